"""
OIT Solver.

Semi-analytical solvers for one-dimensional multilayer heat equations with
piecewise-constant diffusivity and moving interfaces, built on oscillating
integral transforms and Volterra equations of the second kind.
"""

from oitsolver.version import __version__, __release_date__
