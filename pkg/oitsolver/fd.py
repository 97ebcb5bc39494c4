"""
Finite-volume oracle for the layered heat equation u_tau = (sigma^2 u_x)_x.

Cells are uniform inside each layer and every layer boundary is a cell face,
so the interface flux uses the harmonic conductance of the two half cells.
Moving boundaries stretch the cells of each layer with the map
x = y_j + xi (y_{j+1} - y_j); the face velocities enter as a conservative
transport term. Time stepping is the theta scheme with a banded solve.
"""

import math
import logging
import numpy as np
import pandas as pd

from dataclasses import dataclass
from scipy import linalg

from oitsolver.errors import BlowUpError, CFLViolationError

logger = logging.getLogger("OIT Solver")

INTERFACES = ("harmonic",)


@dataclass(frozen=True)
class FDOracleConfig:
    """theta = 0 is explicit Euler, 0.5 Crank-Nicolson and 1 implicit Euler."""

    nodes: int = 400
    dt: float = 1e-3
    theta: float = 0.5
    interface: str = "harmonic"
    front_fixing: bool = False
    blow_up: float = 1e12

    def __post_init__(self):
        if self.nodes < 4:
            raise ValueError("the oracle needs at least 4 cells, got {}".format(self.nodes))
        if self.dt <= 0:
            raise ValueError("time step must be positive, got {}".format(self.dt))
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1], got {}".format(self.theta))
        if self.interface not in INTERFACES:
            raise ValueError(
                "unknown interface treatment '{}', expected one of {}".format(
                    self.interface, INTERFACES
                )
            )

    @property
    def explicit(self):
        return self.theta == 0.0


@dataclass(frozen=True)
class FDSolution:
    """Cell centres, widths and values per saved time; walls carry Dirichlet data."""

    tau: np.ndarray
    centres: np.ndarray
    widths: np.ndarray
    u: np.ndarray
    walls: tuple
    left: float
    right: float

    def profile(self, k):
        x = np.concatenate(([self.walls[k][0]], self.centres[k], [self.walls[k][1]]))
        return x, np.concatenate(([self.left], self.u[k], [self.right]))

    def at(self, k, x):
        """Linear interpolation of saved profile k, walls included."""
        return np.interp(x, *self.profile(k))

    def mass(self, k):
        return float(np.sum(self.widths[k] * self.u[k]))

    def to_frame(self):
        return pd.DataFrame(
            {
                "tau": np.repeat(self.tau, self.centres.shape[1]),
                "x": self.centres.ravel(),
                "u": self.u.ravel(),
            }
        )


def _cells_per_layer(lengths, total):
    counts = np.maximum(2, np.round(total * lengths / lengths.sum()).astype(int))
    return counts


class _Mesh:
    """Faces and face velocities of the stretched layer cells."""

    def __init__(self, layers, counts):
        self.layers = layers
        self.counts = counts
        self.xi = [np.linspace(0.0, 1.0, n + 1) for n in counts]
        self.sigma2 = np.repeat(layers.sigma**2, counts)

    def _stack(self, ends):
        parts = [
            ends[j] + xi * (ends[j + 1] - ends[j]) for j, xi in enumerate(self.xi)
        ]
        return np.concatenate([parts[0]] + [part[1:] for part in parts[1:]])

    def faces(self, tau):
        return self._stack(self.layers.positions(float(tau)))

    def velocities(self, tau):
        return self._stack(self.layers.slopes(float(tau)))


def _operator(mesh, tau, left, right):
    """
    Tridiagonal (lower, diag, upper), wall forcing b and widths h of
    d(h u)/dtau = A u + b at tau.
    """
    faces = mesh.faces(tau)
    w = mesh.velocities(tau)
    h = np.diff(faces)
    c = 2.0 * mesh.sigma2 / h

    g = np.empty(faces.size)
    g[1:-1] = c[:-1] * c[1:] / (c[:-1] + c[1:])
    g[0], g[-1] = c[0], c[-1]

    # weight of the left cell in the face value; wall faces take the wall data
    alpha = np.empty(faces.size)
    alpha[1:-1] = c[:-1] / (c[:-1] + c[1:])
    alpha[0], alpha[-1] = 1.0, 0.0

    lower = g[1:-1] - w[1:-1] * alpha[1:-1]
    upper = g[1:-1] + w[1:-1] * (1.0 - alpha[1:-1])
    diag = -(g[:-1] + g[1:]) - w[:-1] * (1.0 - alpha[:-1]) + w[1:] * alpha[1:]

    b = np.zeros(h.size)
    b[0] += (g[0] - w[0]) * left
    b[-1] += (g[-1] + w[-1]) * right
    return lower, diag, upper, b, h


def _apply(lower, diag, upper, u):
    out = diag * u
    out[1:] += lower * u[:-1]
    out[:-1] += upper * u[1:]
    return out


def _check_cfl(config, mesh, tau):
    if not config.explicit:
        return
    h = np.diff(mesh.faces(tau))
    ratio = float(np.max(mesh.sigma2) * config.dt / np.min(h) ** 2)
    if ratio > 0.5:
        raise CFLViolationError(
            "explicit step violates sigma^2 dt / dx^2 <= 0.5: {:.4g}".format(ratio)
        )


def _source(problem, mesh, tau):
    if problem.source is None:
        return 0.0
    faces = mesh.faces(tau)
    centres = 0.5 * (faces[:-1] + faces[1:])
    return np.diff(faces) * np.asarray(problem.source(tau, centres), dtype=float)


def _march(config, problem, taus, left, right):
    layers = problem.layers
    taus = np.sort(np.atleast_1d(np.asarray(taus, dtype=float)))
    if taus[0] < 0 or taus[-1] > layers.horizon:
        raise ValueError(
            "save times must lie in [0, {}], got {}".format(layers.horizon, taus)
        )

    lengths = np.diff(layers.positions(0.0))
    mesh = _Mesh(layers, _cells_per_layer(lengths, config.nodes))
    faces = mesh.faces(0.0)
    u = np.asarray(problem.initial(0.5 * (faces[:-1] + faces[1:])), dtype=float)

    scale = config.blow_up * max(1.0, float(np.max(np.abs(u))), abs(left), abs(right))
    theta = config.theta
    saved = []
    tau = 0.0

    for target in taus:
        start = tau
        count = max(0, math.ceil((target - start) / config.dt - 1e-9))
        for step in range(count):
            dt = (target - start) / count
            tau = start + step * dt
            _check_cfl(config, mesh, tau)

            lower0, diag0, upper0, b0, h0 = _operator(mesh, tau, left, right)
            lower1, diag1, upper1, b1, h1 = _operator(mesh, tau + dt, left, right)

            rhs = h0 * u + dt * (
                (1.0 - theta) * (_apply(lower0, diag0, upper0, u) + b0)
                + theta * b1
                + (1.0 - theta) * _source(problem, mesh, tau)
                + theta * _source(problem, mesh, tau + dt)
            )

            banded = np.zeros((3, u.size))
            banded[0, 1:] = -theta * dt * upper1
            banded[1] = h1 - theta * dt * diag1
            banded[2, :-1] = -theta * dt * lower1
            u = linalg.solve_banded((1, 1), banded, rhs)

            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > scale:
                raise BlowUpError(
                    "finite-volume solution blew up at tau={:.6g}".format(tau + dt)
                )
        tau = target

        faces = mesh.faces(tau)
        saved.append((faces, u.copy()))

    logger.debug(
        "fd oracle: {} cells, dt={:.3g}, theta={}, {} saved times".format(
            mesh.sigma2.size, config.dt, theta, taus.size
        )
    )
    faces = np.array([item[0] for item in saved])
    return FDSolution(
        taus,
        0.5 * (faces[:, :-1] + faces[:, 1:]),
        np.diff(faces, axis=1),
        np.array([item[1] for item in saved]),
        tuple((float(f[0]), float(f[-1])) for f in faces),
        left,
        right,
    )


def _moves(layers):
    nodes = np.linspace(0.0, layers.horizon, 17)
    return bool(np.any(layers.slopes(nodes) != 0.0))


def fd_solve(config, problem, taus, left=0.0, right=0.0):
    """
    Solve a StripProblem and save the profiles at ``taus``. Moving layer
    boundaries need ``config.front_fixing``.
    """
    if _moves(problem.layers) and not config.front_fixing:
        raise ValueError("moving layer boundaries need the front-fixing map")
    return _march(config, problem, taus, left, right)


def front_fixing_solve(config, problem, taus, left=0.0, right=0.0):
    """The oracle on cells that follow prescribed moving boundaries."""
    return _march(config, problem, taus, left, right)
