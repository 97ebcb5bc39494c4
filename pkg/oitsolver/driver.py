"""
OIT Solver.

Command-line front end: reads a JSON run file, runs one subcommand, writes
its CSV tables, a summary.json and, on request, an interactive plot.
"""

import os
import sys
import json
import time
import shlex
import logging
import argparse
import subprocess
import webbrowser
import numpy as np
import pandas as pd
import scipy
import pkg_resources
import pyarrow.feather as feather

from contextlib import contextmanager

from oitsolver import pool
from oitsolver import version as solver_version
from oitsolver.config import PROBLEMS, load_config, parse_config
from oitsolver.errors import ConfigError, OutputError, SolverError, ValidationFailure
from oitsolver.fd import fd_solve, front_fixing_solve
from oitsolver.mixed import delta_sift, polish_pole, pole_residual, three_layer_poles
from oitsolver.multilayer import (
    MovingLayerGrid,
    StripProblem,
    interface_volterra,
    solution_frame,
    solution_series,
    truncation_terms,
)
from oitsolver.obm import (
    MovingInterface,
    constant_boundary_density,
    green_function,
    laplace_route,
    mass,
    solve_interface,
)
from oitsolver.oit import delta_check, oit_forward, oit_inverse
from oitsolver.spectrum import approx_errors, find_eigenvalues
from oitsolver.stefan import neumann_alpha, neumann_front, run as stefan_run, time_grid
from oitsolver.validation import checks_frame, run_checks
from oitsolver.volterra import TimeGrid

# run file used when --config is not given
BUNDLED = {
    "spectrum": "two_layer.json",
    "oit": "oit.json",
    "mixed": "mixed.json",
    "obm": "obm.json",
    "multilayer": "multilayer.json",
    "stefan": "freezing.json",
}


def _number(value):
    """JSON-safe float: NaN and infinities become null."""
    value = float(value)
    return value if np.isfinite(value) else None


class Solver:
    def __init__(self, args):
        """Initialize the solver."""
        self.args = args
        self.configure_log()

        self.generated_files = []
        self.phases = {}
        self.summary = {}

    def configure_log(self):
        """Configure the logging system."""
        self.logger = logging.getLogger("OIT Solver")

        if self.args.debug:
            self.logger.setLevel(logging.DEBUG)
        else:
            self.logger.setLevel(logging.INFO)

        # Defines the format of the logger
        formatter = logging.Formatter(
            "%(asctime)s %(module)s - %(levelname)s - %(message)s"
        )

        console = logging.StreamHandler()

        console.setFormatter(formatter)

        self.logger.addHandler(console)

    @contextmanager
    def phase(self, name):
        """Time a phase of the run."""
        start = time.time()
        yield
        self.phases[name] = time.time() - start
        self.logger.info("{} finished in {:.3f} s".format(name, self.phases[name]))

    def run(self):
        self.solver_start_time = time.time()

        try:
            self.execute()
        except ValueError as error:
            # every library call is driven by the run file
            self.logger.error("invalid configuration: {}".format(error))
            sys.exit(ConfigError.exit_code)
        except SolverError as error:
            self.logger.error("{}: {}".format(type(error).__name__, error))
            sys.exit(error.exit_code)

    def execute(self):
        command = self.args.command

        with self.phase("configuration"):
            self.config = self.load_config(command)
            pool.configure(self.args.threads, self.args.deterministic)

        self.prefix = self.get_directory()
        self.log_provenance()

        getattr(self, "run_{}".format(command))()

        self.summary["phases"] = {name: round(value, 6) for name, value in self.phases.items()}
        self.summary["outputs"] = list(self.generated_files)
        self.write_summary()

        self.logger.info(
            "{} run finished in {:.3f} s".format(command, time.time() - self.solver_start_time)
        )

    def load_config(self, command):
        if self.args.config:
            return load_config(self.args.config, command)

        if command == "validate":
            return parse_config({"problem": "validate"})

        path = pkg_resources.resource_filename(__name__, "configs/{}".format(BUNDLED[command]))
        self.logger.info("no --config given, using the bundled {}".format(BUNDLED[command]))
        return load_config(path, command)

    def get_directory(self):
        prefix = self.args.out or os.getcwd()
        try:
            os.makedirs(prefix, exist_ok=True)
        except OSError as error:
            raise OutputError("cannot create the output directory {}: {}".format(prefix, error))
        return prefix

    def log_provenance(self):
        self.summary.update(
            {
                "problem": self.config.problem,
                "config_sha256": self.config.digest,
                "version": solver_version.__version__,
                "threads": self.args.threads,
                "deterministic": self.args.deterministic,
            }
        )
        self.logger.info("config sha256 {}".format(self.config.digest))
        self.logger.info(
            "oit-solver {} ({}), numpy {}, scipy {}, pandas {}".format(
                solver_version.__version__,
                solver_version.__release_date__,
                np.__version__,
                scipy.__version__,
                pd.__version__,
            )
        )

    def write_frame(self, frame, name):
        """Write a CSV table into the output directory."""
        path = os.path.join(self.prefix, name)
        try:
            frame.to_csv(path, index=False, encoding="utf-8")
        except OSError as error:
            raise OutputError("cannot write {}: {}".format(path, error))

        self.logger.info("SUCCESS: {}".format(path))
        self.generated_files.append(path)
        return path

    def write_summary(self):
        path = os.path.join(self.prefix, "summary.json")
        self.summary["outputs"].append(path)
        try:
            with open(path, "w") as handle:
                json.dump(self.summary, handle, indent=4)
        except OSError as error:
            raise OutputError("cannot write {}: {}".format(path, error))

        self.logger.info("SUCCESS: {}".format(path))
        print(json.dumps(self.summary))

    def generate_plot(self, name, frame):
        """Generate an interactive plot from a frame handed over in feather."""
        if not self.args.plot:
            return

        dataset = os.path.join(self.prefix, "{}.feather".format(name))
        output_file = os.path.join(self.prefix, "{}.html".format(name))

        try:
            feather.write_feather(frame.reset_index(drop=True), dataset)
        except OSError as error:
            raise OutputError("cannot write {}: {}".format(dataset, error))

        path = "plots/{}.py".format(name)
        script = pkg_resources.resource_filename(__name__, path)

        command = "{} {} -f {} -o {}".format(sys.executable, script, dataset, output_file)

        args = shlex.split(command)

        self.logger.info("generating interactive {} plot".format(name))
        self.logger.debug(command)

        with self.phase("plot"):
            s = subprocess.run(args)

        if s.returncode == 0:
            self.logger.info("SUCCESS: {}".format(output_file))
            self.generated_files.append(output_file)

            if self.args.browser:
                webbrowser.open("file://{}".format(os.path.abspath(output_file)), new=2)
        else:
            raise OutputError(
                "failed to generate the interactive plot (error {})".format(s.returncode)
            )

    def run_spectrum(self):
        block = self.config.block
        grid = block.grid()

        with self.phase("eigenvalues"):
            if grid.n_layers == 2:
                frame = approx_errors(grid, block.count, block.variant)
            else:
                self.logger.info(
                    "asymptotic approximations need two layers, got {}".format(grid.n_layers)
                )
                roots, _, degenerate = find_eigenvalues(grid, block.count, True)
                frame = pd.DataFrame(
                    {
                        "n": np.arange(1, roots.size + 1),
                        "lambda": roots,
                        "lambda0": np.nan,
                        "lambda1": np.nan,
                        "rel_err0": np.nan,
                        "rel_err1": np.nan,
                        "degenerate": degenerate,
                    }
                )

        self.write_frame(frame, "spectrum.csv")
        self.summary.update(
            {
                "eigenvalues": int(len(frame)),
                "degenerate": int(frame["degenerate"].sum()),
                "worst_rel_err0": _number(frame["rel_err0"].max()),
                "worst_rel_err1": _number(frame["rel_err1"].max()),
            }
        )
        self.generate_plot("spectrum", frame)

    def run_oit(self):
        block, numeric = self.config.block, self.config.numeric
        medium = block.medium()
        f = block.datum_function()
        support = block.support()
        x = block.x()

        with self.phase("round trip"):
            result = oit_inverse(
                lambda omega: oit_forward(f, medium, omega, support),
                medium,
                x,
                numeric.omega_max,
                numeric.panels,
                numeric.order,
                numeric.tolerance,
            )

        expected = f(x)
        frame = pd.DataFrame(
            {
                "x": x,
                "f": expected,
                "f_roundtrip": result.value,
                "abs_err": np.abs(result.value - expected),
            }
        )
        self.write_frame(frame, "oit.csv")
        self.summary.update(
            {
                "max_abs_err": _number(frame["abs_err"].max()),
                "truncation": _number(result.truncation),
            }
        )

        if block.delta_x0:
            with self.phase("delta"):
                rows = []
                for x0 in block.delta_x0:
                    sifted, value = delta_check(medium, x0, block.delta_width, block.delta_omega_max)
                    rows.append(
                        {"x0": x0, "sifted": sifted, "expected": value, "abs_err": abs(sifted - value)}
                    )
            self.write_frame(pd.DataFrame(rows), "delta.csv")

        self.generate_plot("oit", frame)

    def run_mixed(self):
        block = self.config.block
        medium = block.medium()

        rows = []
        with self.phase("poles"):
            if medium.y.size == 2:
                sigma = medium.sigma
                for pole in three_layer_poles(*sigma, medium.y[1] - medium.y[0], block.poles):
                    polished = polish_pole(medium, pole.k)
                    for kind, k in (("closed_form", pole.k), ("polished", polished)):
                        lam = k * k
                        rows.append(
                            {
                                "kind": kind,
                                "n": pole.n,
                                "lambda_real": lam.real,
                                "lambda_imag": lam.imag,
                                "residual": pole_residual(medium, k),
                            }
                        )
            elif block.poles:
                self.logger.warning(
                    "closed-form poles need a three-layer line, got {} layers".format(
                        medium.sigma.size
                    )
                )

        columns = ["kind", "n", "lambda_real", "lambda_imag", "residual"]
        frame = pd.DataFrame(rows, columns=columns)
        self.write_frame(frame, "mixed.csv")

        with self.phase("delta"):
            sifts = []
            for x0 in block.x0:
                sifted, value = delta_sift(medium, x0, block.width, block.omega_max)
                sifts.append(
                    {"x0": x0, "sifted": sifted, "expected": value, "abs_err": abs(sifted - value)}
                )
        delta = pd.DataFrame(sifts, columns=["x0", "sifted", "expected", "abs_err"])
        self.write_frame(delta, "delta.csv")

        self.summary.update(
            {
                "poles": int((frame["kind"] == "polished").sum()),
                "max_delta_err": _number(delta["abs_err"].max()) if len(delta) else None,
            }
        )
        self.generate_plot("mixed", frame)

    def run_obm(self):
        block, numeric = self.config.block, self.config.numeric
        medium, interface = block.medium(), block.interface()
        grid = TimeGrid.uniform(block.tau, numeric.steps)

        with self.phase("interface"):
            if block.route == "laplace":
                trace = laplace_route(medium, block.y, block.slope, block.x0, grid)
            else:
                trace = solve_interface(medium, interface, block.x0, grid)
        self.write_frame(trace.to_frame(), "trace.csv")

        x = block.x()
        frames, masses = [], []
        with self.phase("density"):
            for tau in block.times():
                density = green_function(medium, interface, block.x0, trace, tau, x)
                frames.append(pd.DataFrame({"tau": tau, "x": x, "density": density}))
                masses.append(
                    mass(medium, interface, block.x0, trace, tau, block.mass_half_width)
                )
        frame = pd.concat(frames, ignore_index=True)
        self.write_frame(frame, "density.csv")

        self.summary.update(
            {
                "route": block.route,
                "mass": [_number(value) for value in masses],
                "max_mass_err": _number(np.max(np.abs(np.array(masses) - 1.0))),
            }
        )

        if self.config.fd is not None:
            self.obm_oracle(medium, block, frame)

        self.generate_plot("obm", frame)

    def obm_oracle(self, medium, block, frame):
        """Finite-volume run from a short-time start, compared on the density grid."""
        start = min(0.05, 0.5 * block.times()[0])
        width = block.mass_half_width
        threshold = MovingInterface.linear(
            block.y + block.slope * start, block.slope, block.tau - start
        )
        layers = MovingLayerGrid(
            [
                MovingInterface.constant(block.y - width, block.tau - start),
                threshold,
                MovingInterface.constant(block.y + width, block.tau - start),
            ],
            [medium.sigma_minus, medium.sigma_plus],
        )
        problem = StripProblem(
            layers, lambda x: constant_boundary_density(medium, block.x0, start, x)
        )

        taus = block.times() - start
        solve = front_fixing_solve if self.config.fd.front_fixing else fd_solve
        with self.phase("fd oracle"):
            solution = solve(self.config.fd, problem, taus)

        gap = 0.0
        for k, tau in enumerate(block.times()):
            rows = frame[frame["tau"] == tau]
            gap = max(gap, float(np.max(np.abs(solution.at(k, rows["x"]) - rows["density"]))))

        oracle = solution.to_frame()
        oracle["tau"] += start
        self.write_frame(oracle, "fd.csv")
        self.summary["fd_max_abs_diff"] = _number(gap)
        self.logger.info("finite-volume oracle differs by {:.3g}".format(gap))

    def run_multilayer(self):
        block, numeric = self.config.block, self.config.numeric
        layers = block.layers()
        problem = StripProblem(layers, block.initial_function())
        grid = TimeGrid.uniform(block.tau, numeric.steps)

        terms = numeric.terms
        if terms is None:
            terms = truncation_terms(layers.frozen(0.0), float(grid.steps.min()))

        with self.phase("interfaces"):
            traces = interface_volterra(problem, terms, grid)
        self.write_frame(traces.to_frame(), "traces.csv")

        with self.phase("series"):
            solution = solution_frame(problem, traces, terms, block.times(), block.x())
        self.write_frame(solution, "solution.csv")

        _, tail = solution_series(problem, traces, terms, block.tau, block.x())
        self.summary.update({"terms": int(terms), "tail": _number(tail)})

        if self.config.fd is not None:
            solve = front_fixing_solve if self.config.fd.front_fixing else fd_solve
            with self.phase("fd oracle"):
                oracle = solve(self.config.fd, problem, block.times())

            gap = 0.0
            for k, tau in enumerate(block.times()):
                rows = solution[solution["tau"] == tau]
                gap = max(gap, float(np.max(np.abs(oracle.at(k, rows["x"]) - rows["u"]))))

            self.write_frame(oracle.to_frame(), "fd.csv")
            self.summary["fd_max_abs_diff"] = _number(gap)
            self.logger.info("finite-volume oracle differs by {:.3g}".format(gap))

        self.generate_plot("multilayer", solution)

    def run_stefan(self):
        block, numeric = self.config.block, self.config.numeric
        physics = block.physics
        grid = time_grid(block.tau_s, numeric.first_step, numeric.ratio, numeric.max_step)

        with self.phase("stepping"):
            state = stefan_run(physics, grid, terms=numeric.terms or 50)

        frame = state.to_frame()
        self.write_frame(frame, "steps.csv")

        alpha = neumann_alpha(physics)
        front = neumann_front(physics, grid.horizon, alpha)
        self.summary.update(
            {
                "steps": int(grid.steps.size),
                "y_final_mm": _number(state.y[-1]),
                "neumann_y_final_mm": _number(front),
                "max_interface_residual_K": _number(np.max(state.residual[1:])),
                "max_step_runtime_s": _number(np.max(state.runtime[1:])),
                "max_terms": int(max(lam.size for lam in state.lam)),
            }
        )
        self.logger.info(
            "front at {:.6g} mm after {:.6g} s (similarity front {:.6g} mm)".format(
                state.y[-1], grid.horizon, front
            )
        )
        self.generate_plot("stefan", frame)

    def run_validate(self):
        with self.phase("checks"):
            rows = run_checks(self.config.block)

        frame = checks_frame(rows)
        self.write_frame(frame, "checks.csv")

        failed = [row.check for row in rows if not row.passed]
        self.summary.update({"checks": len(rows), "failed": failed})

        if failed:
            self.summary["phases"] = dict(self.phases)
            self.summary["outputs"] = list(self.generated_files)
            self.write_summary()
            raise ValidationFailure("{} check(s) failed: {}".format(len(failed), ", ".join(failed)))


def main():
    PARSER = argparse.ArgumentParser(
        description="OIT Solver: multilayer heat equations by oscillating integral transforms"
    )

    PARSER.add_argument("command", choices=PROBLEMS, help="Subcommand to run")

    PARSER.add_argument(
        "-c",
        "--config",
        default=None,
        help="JSON run file (default: the bundled example for the subcommand)",
    )

    PARSER.add_argument(
        "-o", "--out", default=None, help="Output directory (created if absent)"
    )

    PARSER.add_argument(
        "-t",
        "--threads",
        default=1,
        type=int,
        dest="threads",
        help="Worker threads for root scans and series sums",
    )

    PARSER.add_argument(
        "--deterministic",
        default=False,
        action="store_true",
        dest="deterministic",
        help="Ordered floating-point reductions",
    )

    PARSER.add_argument(
        "-p",
        "--plot",
        default=False,
        action="store_true",
        dest="plot",
        help="Generate an interactive plot of the run",
    )

    PARSER.add_argument(
        "--browser",
        default=False,
        action="store_true",
        dest="browser",
        help="Open the browser with the generated plot",
    )

    PARSER.add_argument(
        "-d", "--debug", action="store_true", dest="debug", help="Enable debug mode"
    )

    PARSER.add_argument(
        "-v",
        "--version",
        action="version",
        version="%(prog)s "
        + solver_version.__version__
        + " ("
        + solver_version.__release_date__
        + ")",
        help="Display the OIT Solver version",
    )

    ARGS = PARSER.parse_args()

    SOLVER = Solver(ARGS)
    SOLVER.run()


if __name__ == "__main__":
    main()
