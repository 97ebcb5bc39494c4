"""
Transition density of oscillating Brownian motion with a moving threshold.

The diffusivity is sigma_minus below the threshold y(tau) and sigma_plus
above it. The density is assembled from the two-layer heat kernels of
``oitsolver.oit`` taken relative to the current threshold, plus single and
double layer potentials carried by the interface value phi and the flux
combination psi = Phi + y' phi. Those two traces solve a 2x2 Volterra system
of the second kind whose flux kernels are weakly singular at s = tau.
"""

import math
import logging
import numpy as np
import pandas as pd

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable
from scipy import integrate, interpolate

from oitsolver.errors import TrajectoryError
from oitsolver.oit import kernel_stack
from oitsolver.volterra import (
    TimeGrid,
    VolterraSystem,
    laplace_convolution_solve,
    laplace_transform,
    solve_second_kind,
)

logger = logging.getLogger("OIT Solver")

ROOT_PI = math.sqrt(math.pi)

# slope consistency checks of y' start this far into the horizon
CHECK_START = 0.05
CHECK_POINTS = 7

# graded Gauss-Legendre panels in u = sqrt(tau - s)
PANELS = 48
PANEL_ORDER = 12
FIRST_PANEL = 1e-5
CHUNK = 128


@dataclass(frozen=True)
class MovingInterface:
    """
    Threshold trajectory. ``y`` and ``y_prime`` take numpy arrays of times.
    """

    y: Callable
    y_prime: Callable
    horizon: float

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive, got {}".format(self.horizon))

        samples = self.horizon * np.linspace(
            CHECK_START, 1.0 - CHECK_START, CHECK_POINTS
        )
        h = 1e-5 * self.horizon
        slope = (self.position(samples + h) - self.position(samples - h)) / (2.0 * h)
        exact = self.slope(samples)

        mismatch = np.abs(slope - exact) / np.maximum(1.0, np.abs(exact))
        if np.any(mismatch > 1e-4):
            raise ValueError(
                "y_prime is inconsistent with y (worst relative mismatch {:.3g})".format(
                    mismatch.max()
                )
            )

    @classmethod
    def constant(cls, position, horizon):
        position = float(position)
        return cls(
            lambda tau: np.zeros_like(np.asarray(tau, dtype=float)) + position,
            lambda tau: np.zeros_like(np.asarray(tau, dtype=float)),
            horizon,
        )

    @classmethod
    def linear(cls, a, b, horizon):
        a, b = float(a), float(b)
        return cls(
            lambda tau: a + b * np.asarray(tau, dtype=float),
            lambda tau: np.zeros_like(np.asarray(tau, dtype=float)) + b,
            horizon,
        )

    def position(self, tau):
        value = np.asarray(self.y(tau), dtype=float)
        if not np.all(np.isfinite(value)):
            raise TrajectoryError(
                "threshold trajectory is not finite at tau={}".format(tau)
            )
        return value

    def slope(self, tau):
        return np.asarray(self.y_prime(tau), dtype=float)


@dataclass(frozen=True)
class BoundaryTrace:
    grid: TimeGrid
    y: np.ndarray
    phi: np.ndarray
    Phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        for name in ("y", "phi", "Phi", "psi"):
            samples = getattr(self, name)
            if samples.shape != (self.grid.size,):
                raise ValueError("{} has shape {}".format(name, samples.shape))
            if not np.all(np.isfinite(samples)):
                raise TrajectoryError("interface trace {} is not finite".format(name))

    def to_frame(self):
        return pd.DataFrame(
            {
                "tau": self.grid.nodes,
                "y": self.y,
                "phi": self.phi,
                "Phi": self.Phi,
                "psi": self.psi,
            }
        )


def _source_row(interface, x0):
    y0 = float(interface.position(0.0))
    if x0 == y0:
        raise ValueError("the source x0={} sits on the initial threshold".format(x0))
    return 0 if x0 < y0 else 1


def potentials(medium, z, t, zeta, derivative=False):
    """
    Interface potential weights for every evaluation column.

    Returns (single, double) shaped broadcast(z, t, zeta) + (2,): single is
    <[1, -1], P^j> and double is -<[sigma_-, -sigma_+], eta^j>, or their
    z-derivatives.
    """
    P = kernel_stack(z, t, zeta, medium, "dP" if derivative else "P")
    eta = kernel_stack(z, t, zeta, medium, "deta" if derivative else "eta")
    single = P[..., 0, :] - P[..., 1, :]
    double = medium.sigma_plus * eta[..., 1, :] - medium.sigma_minus * eta[..., 0, :]
    return single, double


def diagonal_limit(medium, slope):
    """sqrt(tau - s) times the system kernel as s -> tau."""
    sm, sp, Sigma = medium.sigma_minus, medium.sigma_plus, medium.Sigma
    scale = (1.0 - Sigma) / (4.0 * ROOT_PI * sm)
    C_psi = -scale * slope * (1.0 / sm**2 - 1.0 / sp**2)
    C_phi = -scale * 0.75 * slope**2 * (1.0 / sp**2 - 1.0 / sm**2)
    return np.array([[0.0, 0.0], [sm**2 * C_phi, sm**2 * C_psi]])


def _source(medium, interface, x0, row, tau, derivative=False):
    zeta = x0 - interface.position(tau)
    kind = "dP" if derivative else "P"
    return kernel_stack(0.0, tau, zeta, medium, kind)[..., row, 0]


def interface_system(medium, interface, x0):
    """
    The (phi, psi) system with the smooth factors sqrt(tau - s) K(tau, s),
    ready for the product rule.
    """
    row = _source_row(interface, x0)
    s2 = medium.sigma_minus**2

    def forcing(tau):
        if tau == 0.0:
            return np.zeros(2)
        A = float(_source(medium, interface, x0, row, tau))
        B = float(_source(medium, interface, x0, row, tau, derivative=True))
        slope = float(interface.slope(tau))
        return np.array([A, slope * A + s2 * B])

    def kernel(tau, s):
        t = tau - s
        out = np.full((s.size, 2, 2), np.nan)
        live = t > 0
        if not np.any(live):
            return out

        zeta = interface.position(s[live]) - interface.position(tau)
        K_psi, K_phi = (v[..., 0] for v in potentials(medium, 0.0, t[live], zeta))
        C_psi, C_phi = (
            v[..., 0] for v in potentials(medium, 0.0, t[live], zeta, derivative=True)
        )
        slope = float(interface.slope(tau))
        root = np.sqrt(t[live])

        out[live, 0, 0] = root * K_phi
        out[live, 0, 1] = root * K_psi
        out[live, 1, 0] = root * (slope * K_phi + s2 * C_phi)
        out[live, 1, 1] = root * (slope * K_psi + s2 * C_psi)
        return out

    def diagonal(tau):
        return diagonal_limit(medium, float(interface.slope(tau)))

    return VolterraSystem(2, forcing, kernel, diagonal)


def _trace(interface, grid, phi, psi):
    y = interface.position(grid.nodes)
    Phi = psi - interface.slope(grid.nodes) * phi
    return BoundaryTrace(grid, y, phi, Phi, psi)


def solve_interface(medium, interface, x0, grid):
    if grid.horizon > interface.horizon * (1.0 + 1e-12):
        raise ValueError(
            "time grid reaches {} beyond the interface horizon {}".format(
                grid.horizon, interface.horizon
            )
        )

    system = interface_system(medium, interface, x0)
    phi, psi = solve_second_kind(system, grid, "product")

    logger.debug(
        "obm interface solved on {} nodes, max |phi| {:.4g}".format(
            grid.size, np.abs(phi).max()
        )
    )
    return _trace(interface, grid, phi, psi)


def _u_nodes(tau):
    """Graded Gauss-Legendre nodes and weights on [0, sqrt(tau)]."""
    root = math.sqrt(tau)
    edges = np.concatenate([[0.0], root * np.geomspace(FIRST_PANEL, 1.0, PANELS)])
    x, w = np.polynomial.legendre.leggauss(PANEL_ORDER)

    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _assemble(medium, interface, x0, trace, tau, x, derivative=False, columns=None):
    if tau <= 0:
        raise ValueError("the density needs tau > 0, got {}".format(tau))
    if tau > trace.grid.horizon * (1.0 + 1e-12):
        raise ValueError(
            "tau={} lies beyond the trace horizon {}".format(tau, trace.grid.horizon)
        )

    x = np.atleast_1d(np.asarray(x, dtype=float))
    row = _source_row(interface, x0)
    y_tau = float(interface.position(tau))
    z = x - y_tau
    if columns is None:
        columns = (z >= 0).astype(int)
    columns = np.broadcast_to(columns, z.shape)

    kind = "dP" if derivative else "P"
    source = kernel_stack(z, tau, x0 - y_tau, medium, kind)[..., row, :]
    value = np.where(columns == 1, source[:, 1], source[:, 0])

    u, weight = _u_nodes(tau)
    s = tau - u * u
    zeta = interface.position(s) - y_tau
    phi = interpolate.CubicSpline(trace.grid.nodes, trace.phi)(s)
    psi = interpolate.CubicSpline(trace.grid.nodes, trace.psi)(s)
    weight = 2.0 * u * weight

    for start in range(0, x.size, CHUNK):
        part = slice(start, start + CHUNK)
        single, double = potentials(
            medium, z[part, None], (u * u)[None, :], zeta[None, :], derivative
        )
        right = columns[part, None] == 1
        single = np.where(right, single[..., 1], single[..., 0])
        double = np.where(right, double[..., 1], double[..., 0])
        value[part] += (single * psi + double * phi) @ weight

    return value


def green_function(medium, interface, x0, trace, tau, x):
    """Transition density u(tau, x) for the threshold trajectory of ``trace``."""
    return _assemble(medium, interface, x0, trace, tau, x)


def flux_limits(medium, interface, x0, trace, tau):
    """Flux sigma^2 u_x at the threshold from the left and from the right."""
    y_tau = interface.position(tau)
    left = _assemble(medium, interface, x0, trace, tau, [y_tau], True, np.array([0]))
    right = _assemble(medium, interface, x0, trace, tau, [y_tau], True, np.array([1]))
    return (
        float(medium.sigma_minus**2 * left[0]),
        float(medium.sigma_plus**2 * right[0]),
    )


def constant_boundary_density(medium, x0, tau, x):
    """
    Semi-closed form for a threshold fixed at medium.y: the interface
    potentials vanish and the density is the two-layer heat kernel.
    """
    if tau <= 0:
        raise ValueError("the density needs tau > 0, got {}".format(tau))
    if x0 == medium.y:
        raise ValueError("the source x0={} sits on the threshold".format(x0))

    x = np.atleast_1d(np.asarray(x, dtype=float))
    row = int(x0 >= medium.y)
    P = kernel_stack(x - medium.y, tau, x0 - medium.y, medium)[..., row, :]
    return np.where(x >= medium.y, P[:, 1], P[:, 0])


def laplace_route(medium, a, b, x0, grid, orders=(12, 14)):
    """
    Interface traces for y(tau) = a + b tau from the transformed system.

    The kernels then depend on tau - s only, so the Volterra system becomes
    algebraic in the Laplace variable. Transforms are taken by quadrature and
    inverted with the Stehfest sweep on real p, where all transforms converge.
    """
    interface = MovingInterface.linear(a, b, grid.horizon)
    row = _source_row(interface, x0)
    s2 = medium.sigma_minus**2

    def kernel_profiles(t):
        single, double = potentials(medium, 0.0, t, -b * t)
        dsingle, ddouble = potentials(medium, 0.0, t, -b * t, derivative=True)
        return np.array([double[0], single[0], ddouble[0], dsingle[0]])

    def forcing_profiles(t):
        return np.array(
            [
                _source(medium, interface, x0, row, t),
                _source(medium, interface, x0, row, t, derivative=True),
            ]
        )

    @lru_cache(maxsize=None)
    def transforms(p):
        kernels = [
            laplace_transform(lambda t, i=i: kernel_profiles(t)[i], p) for i in range(4)
        ]
        sources = [
            laplace_transform(lambda t, i=i: forcing_profiles(t)[i], p) for i in range(2)
        ]
        return kernels, sources

    def kernel_transform(p):
        (K_phi, K_psi, C_phi, C_psi), _ = transforms(p)
        return np.array(
            [[K_phi, K_psi], [b * K_phi + s2 * C_phi, b * K_psi + s2 * C_psi]]
        )

    def forcing_transform(p):
        _, (A, B) = transforms(p)
        return np.array([A, b * A + s2 * B])

    phi, psi = laplace_convolution_solve(
        kernel_transform,
        forcing_transform,
        grid.nodes,
        [0.0, 0.0],
        method="stehfest",
        orders=orders,
    )
    logger.debug(
        "obm laplace route: {} transforms evaluated".format(
            transforms.cache_info().currsize
        )
    )
    return _trace(interface, grid, phi, psi)


def mass(medium, interface, x0, trace, tau, half_width, nodes=2001):
    """Total probability at tau by Simpson's rule on each side of y(tau)."""
    y_tau = float(interface.position(tau))
    total = 0.0
    for lo, hi in ((y_tau - half_width, y_tau), (y_tau, y_tau + half_width)):
        x = np.linspace(lo, hi, nodes)
        # the open end at y(tau) belongs to the left column
        columns = np.full(nodes, 0 if hi == y_tau else 1)
        density = _assemble(medium, interface, x0, trace, tau, x, columns=columns)
        total += integrate.simpson(density, x=x)
    return total
