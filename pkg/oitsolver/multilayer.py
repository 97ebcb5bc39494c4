"""
Layered strip with moving boundaries and absorbing ends.

The boundaries y_0(tau) < ... < y_N(tau) move in time and the diffusivity
is constant inside each layer. Solutions are expanded on the eigenbasis of
the grid frozen at the evaluation time. The image of the solution on one
basis function obeys a linear ODE in tau whose boundary terms involve the
interface values phi_j and fluxes Phi_j = sigma^2 u_x. Those traces are
recovered by stepping forward on a time grid: with the frozen basis, every
boundary term vanishes at s = tau, so each step is explicit in the history.
"""

import math
import logging
import numpy as np
import pandas as pd

from dataclasses import dataclass
from typing import Callable, Optional

from oitsolver import pool
from oitsolver.errors import TrajectoryError
from oitsolver.obm import MovingInterface
from oitsolver.spectrum import (
    LayerGrid,
    find_eigenvalues,
    make_basis,
    polish_eigenvalues,
)
from oitsolver.volterra import TimeGrid, exponential_trapezoid_weights

logger = logging.getLogger("OIT Solver")

# relative quantum of the boundary positions keying the basis cache
QUANTUM = 1e-12
# continuation steps between full rescans
GUARD_STEPS = 16
# truncation: exp(-lambda_terms^2 dtau_min) below TAIL, at most MAX_TERMS
TAIL = 1e-12
MAX_TERMS = 200

PANEL_ORDER = 16
PANEL_WIDTH = 0.1


@dataclass(frozen=True)
class MovingLayerGrid:
    boundaries: tuple
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        boundaries = tuple(self.boundaries)

        if sigma.ndim != 1 or sigma.size < 1:
            raise ValueError("a strip needs at least one layer")
        if len(boundaries) != sigma.size + 1:
            raise ValueError(
                "expected {} boundaries, got {}".format(sigma.size + 1, len(boundaries))
            )
        if not np.all(sigma > 0):
            raise ValueError("diffusivities must be positive: {}".format(sigma))

        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "boundaries", boundaries)
        self.check(np.linspace(0.0, self.horizon, 33))

    @classmethod
    def static(cls, y, sigma, horizon):
        return cls([MovingInterface.constant(value, horizon) for value in y], sigma)

    @property
    def n_layers(self):
        return self.sigma.size

    @property
    def horizon(self):
        return min(boundary.horizon for boundary in self.boundaries)

    def positions(self, tau):
        """Boundary positions, shape (N + 1,) for a scalar tau, else (len(tau), N + 1)."""
        return np.stack([b.position(tau) for b in self.boundaries], axis=-1)

    def slopes(self, tau):
        return np.stack([b.slope(tau) for b in self.boundaries], axis=-1)

    def check(self, nodes):
        positions = np.atleast_2d(self.positions(np.asarray(nodes, dtype=float)))
        crossed = np.diff(positions, axis=1) <= 0.0

        if crossed.any():
            row, j = np.argwhere(crossed)[0]
            raise TrajectoryError(
                "boundaries {} and {} cross at tau={:.6g}".format(
                    j, j + 1, float(np.atleast_1d(nodes)[row])
                )
            )

    def frozen(self, tau):
        return LayerGrid(self.positions(float(tau)), self.sigma)


@dataclass(frozen=True)
class StripProblem:
    """``initial(x)`` and ``source(tau, x)`` take numpy arrays of x."""

    layers: MovingLayerGrid
    initial: Callable
    source: Optional[Callable] = None


@dataclass(frozen=True)
class FrozenBasis:
    grid: LayerGrid
    lam: np.ndarray
    coeffs: np.ndarray
    norm: np.ndarray
    degenerate: np.ndarray

    @classmethod
    def from_roots(cls, grid, roots, degenerate):
        bases = [make_basis(grid, lam, flag) for lam, flag in zip(roots, degenerate)]
        return cls(
            grid,
            np.asarray(roots, dtype=float),
            np.array([basis.coeffs for basis in bases]),
            np.array([basis.norm for basis in bases]),
            np.asarray(degenerate, dtype=bool),
        )

    @property
    def size(self):
        return self.lam.size

    def layer_terms(self, x, layer):
        """
        Theta and sigma^2 Theta' of every term at x, each with shape
        (terms,) + x.shape, using the formulas of the given layers.
        """
        x = np.asarray(x, dtype=float)
        layer = np.broadcast_to(np.asarray(layer, dtype=int), x.shape)
        lam = self.lam.reshape((-1,) + (1,) * x.ndim)

        sigma = self.grid.sigma[layer]
        phase = lam / sigma * x
        c = self.coeffs[:, layer, 0]
        d = self.coeffs[:, layer, 1]

        value = c * np.cos(phase) + d * np.sin(phase)
        flux = sigma * lam * (-c * np.sin(phase) + d * np.cos(phase))
        return value, flux

    def evaluate(self, x):
        """Theta of every term, zero outside the strip."""
        x = np.asarray(x, dtype=float)
        value, _ = self.layer_terms(x, self.grid.layer_index(x))
        outside = (x < self.grid.y[0]) | (x > self.grid.y[-1])
        return np.where(outside, 0.0, value)


@dataclass(frozen=True)
class InterfaceVectors:
    """Flux Phi_j and value phi_j at every boundary, one row per time node."""

    grid: TimeGrid
    y: np.ndarray
    Phi: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("y", "Phi", "phi"):
            samples = getattr(self, name)
            if samples.ndim != 2 or samples.shape[0] != self.grid.size:
                raise ValueError("{} has shape {}".format(name, samples.shape))
            if not np.all(np.isfinite(samples)):
                raise TrajectoryError("interface trace {} is not finite".format(name))

        if np.any(self.phi[:, 0] != 0.0) or np.any(self.phi[:, -1] != 0.0):
            raise ValueError("absorbing ends must carry phi = 0")

    @property
    def n_interfaces(self):
        return self.y.shape[1]

    def to_frame(self):
        size, width = self.Phi.shape
        return pd.DataFrame(
            {
                "tau": np.repeat(self.grid.nodes, width),
                "interface": np.tile(np.arange(width), size),
                "phi": self.phi.ravel(),
                "Phi": self.Phi.ravel(),
            }
        )


class FrozenSpectrum:
    """
    Eigenbases of the instantaneous grid y(tau).

    Bases are cached on boundary positions quantized to QUANTUM relative.
    A new grid first tracks the previous roots by local brackets; after
    ``guard`` tracked grids, or when tracking loses a root, it rescans.
    """

    def __init__(self, layers, terms, quantum=QUANTUM, guard=GUARD_STEPS, workers=None):
        if terms < 1:
            raise ValueError("terms must be >= 1, got {}".format(terms))

        self.layers = layers
        self.terms = terms
        self.quantum = quantum
        self.guard = guard
        self.workers = workers

        self.cache = {}
        self.last = None
        self.tracked = 0
        self.rescans = 0

    def key(self, positions):
        scale = max(1.0, float(np.abs(positions).max()))
        return tuple(np.round(positions / (self.quantum * scale)).astype(np.int64))

    def __call__(self, tau):
        positions = self.layers.positions(float(tau))
        key = self.key(positions)

        if key not in self.cache:
            self.layers.check([tau])
            basis = self._solve(LayerGrid(positions, self.layers.sigma))
            self.cache[key] = basis
            self.last = basis.lam

        return self.cache[key]

    def _solve(self, grid):
        tracked = None
        if self.last is not None:
            tracked = polish_eigenvalues(grid, self.last)
            if tracked is not None and self.tracked < self.guard:
                self.tracked += 1
                return FrozenBasis.from_roots(grid, *tracked)

        roots, _, degenerate = find_eigenvalues(grid, self.terms, True, self.workers)

        if tracked is not None:
            drift = float(np.abs(tracked[0] - roots).max())
            if drift > 1e-8 * roots[-1]:
                logger.warning(
                    "eigenvalue continuation drifted by {:.3g}; using the rescan".format(
                        drift
                    )
                )

        self.tracked = 0
        self.rescans += 1
        return FrozenBasis.from_roots(grid, roots, degenerate)


def truncation_terms(grid, dtau, cap=MAX_TERMS):
    """Fewest terms with exp(-lambda_n^2 dtau) < TAIL, from lambda_n ~ n pi / travel time."""
    if dtau <= 0:
        raise ValueError("time step must be positive, got {}".format(dtau))

    needed = math.sqrt(-math.log(TAIL) / dtau) * grid.travel_time / math.pi
    return int(min(cap, max(1, math.ceil(needed))))


def _strip_quadrature(y, sigma, lam_max):
    """Gauss-Legendre panels over [y_0, y_N], at least one per half wave of Theta."""
    base, weights = np.polynomial.legendre.leggauss(PANEL_ORDER)
    nodes, w, layer = [], [], []

    for i in range(sigma.size):
        length = y[i + 1] - y[i]
        panels = max(
            1,
            math.ceil(length / PANEL_WIDTH),
            math.ceil(length * lam_max / (math.pi * sigma[i])),
        )
        edges = np.linspace(y[i], y[i + 1], panels + 1)
        half = 0.5 * np.diff(edges)[:, None]
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]

        nodes.append((mid + half * base).ravel())
        w.append((half * weights).ravel())
        layer.append(np.full(panels * PANEL_ORDER, i))

    return np.concatenate(nodes), np.concatenate(w), np.concatenate(layer)


class _Projector:
    """Integrals of f and g against frozen bases, layered by the grid at the data time."""

    def __init__(self, problem, lam_max):
        self.problem = problem
        self.lam_max = 1.25 * lam_max
        layers = problem.layers

        x, w, layer = _strip_quadrature(
            layers.positions(0.0), layers.sigma, self.lam_max
        )
        self.rule = (x, layer)
        self.weighted = w * np.asarray(problem.initial(x), dtype=float)
        self.sources = {}

    def initial(self, basis):
        x, layer = self.rule
        value, _ = basis.layer_terms(x, layer)
        return pool.reduce_sum(value * self.weighted, axis=1)

    def _source_rule(self, s):
        if s not in self.sources:
            layers = self.problem.layers
            x, w, layer = _strip_quadrature(
                layers.positions(s), layers.sigma, self.lam_max
            )
            weighted = w * np.asarray(self.problem.source(s, x), dtype=float)
            self.sources[s] = (x, weighted, layer, {})
        return self.sources[s]

    def source(self, basis, nodes):
        """Shape (terms, len(nodes)); the projections are cached per basis."""
        columns = []
        for s in nodes:
            x, weighted, layer, done = self._source_rule(float(s))
            if id(basis) not in done:
                value, _ = basis.layer_terms(x, layer)
                done[id(basis)] = pool.reduce_sum(value * weighted, axis=1)
            columns.append(done[id(basis)])
        return np.stack(columns, axis=1)


def jump_vectors(basis, positions):
    """
    Omega and omega at each boundary position, shape (terms, S, N + 1).

    Omega_j = Theta_j(y_j) - Theta_{j+1}(y_j) and omega_j the same jump of
    theta = -sigma^2 Theta', with Theta_0 = Theta_{N+1} = 0. Both vanish
    at interior boundaries of the grid the basis was frozen on.
    """
    positions = np.atleast_2d(positions)
    samples, width = positions.shape
    layers = np.broadcast_to(np.arange(width - 1), (samples, width - 1))

    left_value, left_flux = basis.layer_terms(positions[:, 1:], layers)
    right_value, right_flux = basis.layer_terms(positions[:, :-1], layers)

    Omega = np.zeros((basis.size, samples, width))
    omega = np.zeros((basis.size, samples, width))
    Omega[:, :, 1:] += left_value
    Omega[:, :, :-1] -= right_value
    omega[:, :, 1:] -= left_flux
    omega[:, :, :-1] += right_flux
    return Omega, omega


def boundary_terms(basis, positions, slopes, Phi, phi):
    """<Phi, Omega> + <phi, Y' Omega + omega> for every term and sample."""
    Omega, omega = jump_vectors(basis, positions)
    carried = Phi + slopes * phi
    return np.einsum("tsj,sj->ts", Omega, carried) + np.einsum("tsj,sj->ts", omega, phi)


def _images(basis, projector, nodes, positions, slopes, Phi, phi):
    """u-bar of every term at nodes[-1] from the history sampled on ``nodes``."""
    decay = basis.lam**2
    images = np.exp(-decay * nodes[-1]) * projector.initial(basis)

    k = nodes.size - 1
    if k == 0:
        return images

    history = boundary_terms(basis, positions, slopes, Phi, phi)
    if projector.problem.source is not None:
        history = history + projector.source(basis, nodes)

    weights = exponential_trapezoid_weights(decay, nodes, k)
    return images + pool.reduce_sum(weights * history, axis=1)


def _traces_at(basis, positions, images):
    scaled = images / basis.norm
    width = positions.size

    value, flux = basis.layer_terms(positions[1:], np.arange(width - 1))
    _, first_flux = basis.layer_terms(positions[:1], np.zeros(1, dtype=int))

    phi = np.zeros(width)
    Phi = np.zeros(width)
    phi[1:-1] = pool.reduce_sum(scaled[:, None] * value[:, :-1], axis=0)
    Phi[0] = pool.reduce_sum(scaled * first_flux[:, 0], axis=0)
    Phi[1:] = pool.reduce_sum(scaled[:, None] * flux, axis=0)
    return Phi, phi


def interface_volterra(problem, terms, grid, workers=None):
    """
    Boundary fluxes and values on ``grid`` by forward stepping.

    ``terms=None`` applies the truncation rule to the smallest time step.
    """
    layers = problem.layers
    if grid.horizon > layers.horizon * (1.0 + 1e-12):
        raise ValueError(
            "time grid reaches {} beyond the boundary horizon {}".format(
                grid.horizon, layers.horizon
            )
        )

    nodes = grid.nodes
    layers.check(nodes)
    positions = layers.positions(nodes)
    slopes = layers.slopes(nodes)

    if terms is None:
        terms = truncation_terms(layers.frozen(0.0), float(grid.steps.min()))

    spectrum = FrozenSpectrum(layers, terms, workers=workers)
    projector = _Projector(problem, spectrum(0.0).lam[-1])

    Phi = np.zeros(positions.shape)
    phi = np.zeros(positions.shape)

    for k in range(grid.size):
        basis = spectrum(nodes[k])
        images = _images(
            basis,
            projector,
            nodes[: k + 1],
            positions[: k + 1],
            slopes[: k + 1],
            Phi[: k + 1],
            phi[: k + 1],
        )
        Phi[k], phi[k] = _traces_at(basis, positions[k], images)

    logger.info(
        "multilayer traces: {} nodes, {} terms, {} rescans, {} cached bases".format(
            grid.size, terms, spectrum.rescans, len(spectrum.cache)
        )
    )
    return InterfaceVectors(grid, positions, Phi, phi)


def _history(problem, traces, tau):
    """Time nodes up to tau with the traces interpolated at tau."""
    tau = float(tau)
    horizon = traces.grid.horizon
    if tau < 0.0 or tau > horizon * (1.0 + 1e-12):
        raise ValueError(
            "tau={} is outside the traced horizon [0, {}]".format(tau, horizon)
        )

    nodes = traces.grid.nodes
    before = nodes[nodes < tau - 1e-12 * max(1.0, tau)]
    sampled = np.append(before, tau)

    def at(samples):
        return np.stack(
            [np.interp(sampled, nodes, samples[:, j]) for j in range(samples.shape[1])],
            axis=1,
        )

    layers = problem.layers
    positions = np.atleast_2d(layers.positions(sampled))
    slopes = np.atleast_2d(layers.slopes(sampled))
    return sampled, positions, slopes, at(traces.Phi), at(traces.phi)


def image_baru(problem, traces, lam, tau):
    """
    u-bar(tau, lambda) for any lambda > 0, with the basis frozen at tau.

    The initial projection, the source projection and the boundary history
    of ``traces`` each enter through exp(-lambda^2 (tau - s)).
    """
    sampled, positions, slopes, Phi, phi = _history(problem, traces, tau)
    basis = FrozenBasis.from_roots(
        problem.layers.frozen(tau), np.array([lam]), np.array([False])
    )
    projector = _Projector(problem, lam)
    return float(_images(basis, projector, sampled, positions, slopes, Phi, phi)[0])


def _series_images(problem, traces, terms, tau, workers=None):
    basis = FrozenSpectrum(problem.layers, terms, workers=workers)(tau)
    sampled, positions, slopes, Phi, phi = _history(problem, traces, tau)
    projector = _Projector(problem, basis.lam[-1])
    return basis, _images(basis, projector, sampled, positions, slopes, Phi, phi)


def solution_series(problem, traces, terms, tau, x, workers=None):
    """
    u(tau, x) from ``terms`` eigenfunctions of the grid at tau, and the
    largest magnitude of the last term as a tail estimate.
    """
    x = np.asarray(x, dtype=float)
    basis, images = _series_images(problem, traces, terms, tau, workers)

    scaled = (images / basis.norm).reshape((-1,) + (1,) * x.ndim)
    parts = scaled * basis.evaluate(x)
    tail = float(np.abs(parts[-1]).max())

    logger.debug("series at tau={:.6g}: tail {:.3g}".format(float(tau), tail))
    return pool.reduce_sum(parts, axis=0), tail


def series_energy(problem, traces, terms, tau, workers=None):
    """Integral of u^2 over the strip from Parseval's identity."""
    basis, images = _series_images(problem, traces, terms, tau, workers)
    return float(pool.reduce_sum(images**2 / basis.norm, axis=0))


def solution_frame(problem, traces, terms, taus, x, workers=None):
    x = np.asarray(x, dtype=float)
    frames = []
    for tau in taus:
        u, _ = solution_series(problem, traces, terms, tau, x, workers)
        frames.append(pd.DataFrame({"tau": float(tau), "x": x, "u": u}))
    return pd.concat(frames, ignore_index=True)
