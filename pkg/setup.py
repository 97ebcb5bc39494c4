import setuptools

with open("README.md", "r") as f:
    long_description = f.read()

with open("requirements.txt") as f:
    requirements = [line.strip() for line in f if line.strip()]

setuptools.setup(
    name="oit-solver",
    keywords="oit-solver multilayer heat-equation stefan-problem integral-transform",
    version="1.0",
    description="OIT Solver computes semi-analytical solutions of multilayer heat equations with oscillating integral transforms and Volterra equations.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    install_requires=requirements,
    extras_require={"test": ["pytest>=7.0"]},
    include_package_data=True,
    entry_points={"console_scripts": ["oit-solver=oitsolver.driver:main"]},
    packages=["oitsolver", "oitsolver.plots"],
    package_data={
        "oitsolver": ["configs/*.json"],
        "oitsolver.plots": ["*.py"],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
        "Programming Language :: Python :: 3 :: Only",
    ],
    python_requires=">=3.8",
)
