"""
Discrete-spectrum eigenbasis of a layered strip with absorbing ends.

Each eigenfunction solves (sigma^2 Theta')' = -lambda^2 Theta layer by layer,
is continuous together with sigma^2 Theta' across every interior boundary and
vanishes at both ends. On layer i it reads C_i cos(lambda x / sigma_i) +
D_i sin(lambda x / sigma_i).
"""

import math
import logging
import warnings
import numpy as np
import pandas as pd

from dataclasses import dataclass, field
from scipy import integrate, optimize

from oitsolver import pool
from oitsolver.errors import QuadratureError, RootShortfallError
from oitsolver.smallmat import rotation, stretch, ordered_product

logger = logging.getLogger("OIT Solver")

SCAN_START = 1e-9
ROOT_XTOL = 1e-12
DEGENERATE_SLOPE = 1e-8
CHUNK_SAMPLES = 512


@dataclass(frozen=True)
class LayerGrid:
    y: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)

        if y.ndim != 1 or y.size < 2:
            raise ValueError("a strip needs at least two boundaries")
        if sigma.shape != (y.size - 1,):
            raise ValueError(
                "expected {} diffusivities, got {}".format(y.size - 1, sigma.size)
            )
        if not np.all(np.diff(y) > 0):
            raise ValueError("boundaries must be strictly increasing: {}".format(y))
        if not np.all(sigma > 0):
            raise ValueError("diffusivities must be positive: {}".format(sigma))

        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_lengths(cls, lengths, sigma, y0=0.0):
        return cls(y0 + np.concatenate(([0.0], np.cumsum(lengths))), sigma)

    @property
    def n_layers(self):
        return self.sigma.size

    @property
    def l(self):
        return np.diff(self.y)

    @property
    def s(self):
        return self.sigma[:-1] / self.sigma[1:]

    @property
    def travel_time(self):
        """Sum of l_i / sigma_i; eigenvalues are spaced by about pi over it."""
        return float(np.sum(self.l / self.sigma))

    def layer_index(self, x):
        """Zero-based layer containing x (right-closed at the last boundary)."""
        index = np.searchsorted(self.y, x, side="right") - 1
        return np.clip(index, 0, self.n_layers - 1)


@dataclass(frozen=True)
class ThetaBasis:
    lam: float
    coeffs: np.ndarray
    norm: float
    degenerate: bool = False

    def lambda_bar(self, grid):
        return self.lam / grid.sigma


@dataclass
class OscillatingSeries:
    grid: LayerGrid
    bases: list
    coefficients: np.ndarray
    eigenvalues: np.ndarray = field(init=False)

    def __post_init__(self):
        self.eigenvalues = np.array([basis.lam for basis in self.bases])

    def __call__(self, x, terms=None):
        x = np.asarray(x, dtype=float)
        terms = len(self.bases) if terms is None else terms

        parts = [
            self.coefficients[n] * theta_eval(self.bases[n], self.grid, x)
            / self.bases[n].norm
            for n in range(terms)
        ]

        return pool.reduce_sum(np.array(parts), axis=0)

    def l2_error(self, f, terms=None):
        def integrand(x):
            return (f(x) - self(x, terms)) ** 2

        total = 0.0
        for a, b in zip(self.grid.y[:-1], self.grid.y[1:]):
            total += integrate.quad(integrand, a, b, limit=400)[0]

        return math.sqrt(total)


def theta_coeffs(grid, lam):
    """Coefficient pairs (C_i, D_i), one row per layer."""
    if lam <= 0:
        raise ValueError("lambda must be positive, got {}".format(lam))

    bar = lam / grid.sigma
    coeffs = np.empty((grid.n_layers, 2))
    coeffs[0] = (-math.sin(bar[0] * grid.y[0]), math.cos(bar[0] * grid.y[0]))

    for i in range(grid.n_layers - 1):
        y_i = grid.y[i + 1]
        transfer = ordered_product(
            [
                rotation(-bar[i] * y_i),
                stretch(1.0, grid.s[i]),
                rotation(bar[i + 1] * y_i),
            ]
        )
        coeffs[i + 1] = transfer @ coeffs[i]

    return coeffs


def _local_coeffs(grid, lam, coeffs):
    """(a_i, b_i) with Theta_i = a cos(lambda_bar (x - y_{i-1})) + b sin(...)."""
    phase = lam / grid.sigma * grid.y[:-1]
    c, s = np.cos(phase), np.sin(phase)
    a = coeffs[:, 0] * c + coeffs[:, 1] * s
    b = -coeffs[:, 0] * s + coeffs[:, 1] * c
    return a, b


def eigen_residual(grid, lam):
    """Value at y_N of the eigenfunction started as sin at y_0."""
    phases = lam * grid.l / grid.sigma
    n = grid.n_layers

    if n == 1:
        return math.sin(phases[0])

    factors = [stretch(1.0, grid.s[0])] + [
        stretch(1.0, grid.s[i]) @ rotation(-phases[i]) for i in range(1, n - 1)
    ]
    column = ordered_product(factors) @ np.array(
        [math.sin(phases[0]), math.cos(phases[0])]
    )

    return math.cos(phases[-1]) * column[0] + math.sin(phases[-1]) * column[1]


def _residual_mesh(grid, lams):
    """Vectorized eigen_residual over an array of lambda values."""
    lams = np.asarray(lams, dtype=float)
    a = np.zeros_like(lams)
    b = np.ones_like(lams)

    for i in range(grid.n_layers - 1):
        phase = lams * grid.l[i] / grid.sigma[i]
        value = a * np.cos(phase) + b * np.sin(phase)
        slope = -a * np.sin(phase) + b * np.cos(phase)
        a, b = value, grid.s[i] * slope

    phase = lams * grid.l[-1] / grid.sigma[-1]
    return a * np.cos(phase) + b * np.sin(phase)


def two_layer_residual(sigma1, sigma2, l1, l2, lam):
    """Closed form (sigma2-sigma1) sin(phi2-phi1) - (sigma2+sigma1) sin(phi2+phi1)."""
    phi1 = lam * l1 / sigma1
    phi2 = lam * l2 / sigma2
    return (sigma2 - sigma1) * np.sin(phi2 - phi1) - (sigma2 + sigma1) * np.sin(
        phi2 + phi1
    )


def scan_step(grid):
    return math.pi * float(np.min(grid.sigma / grid.l)) / 8.0


def _scan_chunk(args):
    residual, lo, hi, samples = args
    mesh = np.linspace(lo, hi, samples + 1)
    values = residual(mesh)

    # a zero on a mesh node belongs to the cell on its left
    brackets = []
    for j in range(samples):
        if values[j] != 0.0 and values[j] * values[j + 1] <= 0.0:
            brackets.append((mesh[j], mesh[j + 1]))

    return brackets


def bracket_roots(residual, step, count, start=SCAN_START, limit=None, workers=None):
    """
    Bracket the first ``count`` sign changes of a vectorized residual.

    The scan walks chunks of CHUNK_SAMPLES mesh cells of width ``step``.
    Chunks are scanned ``workers`` at a time and merged in order.
    """
    workers = pool.settings.workers if workers is None else workers
    width = step * CHUNK_SAMPLES
    limit = start + width * 4096 if limit is None else limit

    brackets = []
    lo = start
    while len(brackets) < count and lo < limit:
        jobs = []
        for _ in range(max(1, workers)):
            hi = min(lo + width, limit)
            jobs.append((residual, lo, hi, CHUNK_SAMPLES))
            lo = hi
            if lo >= limit:
                break
        for found in pool.parallel_map(_scan_chunk, jobs, workers):
            brackets.extend(found)

    if len(brackets) < count:
        raise RootShortfallError(len(brackets), count, (start, lo))

    return brackets[:count]


def refine_root(residual, bracket):
    lo, hi = bracket
    return optimize.brentq(
        lambda lam: float(residual(np.array([lam]))[0]), lo, hi, xtol=ROOT_XTOL
    )


def is_degenerate(residual, root):
    h = 1e-7 * max(root, 1.0)
    values = residual(np.array([root - h, root + h]))
    return abs(values[1] - values[0]) / (2.0 * h) < DEGENERATE_SLOPE


def find_eigenvalues(grid, count, full_output=False, workers=None):
    """
    First ``count`` positive eigenvalues, strictly increasing.

    With ``full_output`` also returns the bracketing intervals and the
    degenerate flags (residual slope below DEGENERATE_SLOPE at the root).
    """
    if count < 1:
        raise ValueError("count must be >= 1, got {}".format(count))

    def residual(lams):
        return _residual_mesh(grid, lams)

    step = scan_step(grid)
    limit = SCAN_START + 4.0 * (count + 2) * math.pi / grid.travel_time + 64 * step
    brackets = bracket_roots(residual, step, count, limit=limit, workers=workers)

    roots = np.array([refine_root(residual, bracket) for bracket in brackets])
    degenerate = np.array([is_degenerate(residual, root) for root in roots])

    if degenerate.any():
        logger.warning(
            "degenerate eigenvalues at indices {}".format(
                list(np.nonzero(degenerate)[0] + 1)
            )
        )

    logger.debug(
        "bracketed {} eigenvalues up to {:.6g}".format(len(roots), roots[-1])
    )

    if full_output:
        return roots, brackets, degenerate

    return roots


def polish_eigenvalues(grid, guesses):
    """
    Track roots from ``guesses`` (eigenvalues of a nearby grid) inside
    disjoint local brackets. Returns None when a bracket loses its sign
    change, in which case the caller rescans.
    """
    guesses = np.asarray(guesses, dtype=float)

    def residual(lams):
        return _residual_mesh(grid, lams)

    edges = np.concatenate(([0.0], guesses, [guesses[-1] + guesses[0]]))
    gaps = np.diff(edges)
    half = 0.45 * np.minimum(gaps[:-1], gaps[1:])
    lo, hi = guesses - half, guesses + half

    if np.any(residual(lo) * residual(hi) > 0.0):
        return None

    roots = np.array([refine_root(residual, bracket) for bracket in zip(lo, hi)])
    if np.any(np.diff(roots) <= 0.0):
        return None

    degenerate = np.array([is_degenerate(residual, root) for root in roots])
    return roots, degenerate


def basis_norm(basis, grid):
    """Integral of Theta^2 over the strip from closed-form layer integrals."""
    a, b = _local_coeffs(grid, basis.lam, basis.coeffs)
    k = basis.lam / grid.sigma
    l = grid.l

    twice = 2.0 * k * l
    cos_part = l / 2.0 + np.sin(twice) / (4.0 * k)
    sin_part = l / 2.0 - np.sin(twice) / (4.0 * k)
    cross = (1.0 - np.cos(twice)) / (2.0 * k)

    return float(np.sum(a * a * cos_part + b * b * sin_part + a * b * cross))


def make_basis(grid, lam, degenerate=False):
    coeffs = theta_coeffs(grid, lam)
    basis = ThetaBasis(lam, coeffs, 1.0, degenerate)
    return ThetaBasis(lam, coeffs, basis_norm(basis, grid), degenerate)


def eigenbasis(grid, count, workers=None):
    roots, _, degenerate = find_eigenvalues(grid, count, True, workers)
    return [make_basis(grid, lam, flag) for lam, flag in zip(roots, degenerate)]


def _layer_values(basis, grid, layer):
    bar = basis.lam / grid.sigma[layer]
    c = basis.coeffs[layer, 0]
    d = basis.coeffs[layer, 1]
    return bar, c, d


def theta_eval(basis, grid, x, layer=None):
    """
    Theta at x; zero outside [y_0, y_N].

    ``layer`` forces the formula of a given layer, which is how the
    one-sided values at an interior boundary are obtained.
    """
    x = np.asarray(x, dtype=float)
    index = grid.layer_index(x) if layer is None else np.full(x.shape, layer)
    bar, c, d = _layer_values(basis, grid, index)
    value = c * np.cos(bar * x) + d * np.sin(bar * x)

    if layer is None:
        value = np.where((x < grid.y[0]) | (x > grid.y[-1]), 0.0, value)

    return value


def theta_flux(basis, grid, x, layer=None):
    """sigma^2 Theta' at x."""
    x = np.asarray(x, dtype=float)
    index = grid.layer_index(x) if layer is None else np.full(x.shape, layer)
    bar, c, d = _layer_values(basis, grid, index)
    sigma = grid.sigma[index]
    value = sigma * basis.lam * (-c * np.sin(bar * x) + d * np.cos(bar * x))

    if layer is None:
        value = np.where((x < grid.y[0]) | (x > grid.y[-1]), 0.0, value)

    return value


def project(f, basis, grid):
    """Integral of f * Theta over the strip, layer by layer."""
    total = 0.0
    for i, (a, b) in enumerate(zip(grid.y[:-1], grid.y[1:])):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                total += integrate.quad(
                    lambda x: f(x) * float(theta_eval(basis, grid, x, layer=i)),
                    a,
                    b,
                    limit=400,
                    epsabs=1e-11,
                    epsrel=1e-10,
                )[0]
            except integrate.IntegrationWarning as error:
                raise QuadratureError(
                    "projection on layer {} did not converge for lambda={}: {}".format(
                        i, basis.lam, error
                    )
                )
    return total


def oscillating_series(f, grid, terms, workers=None):
    """Coefficients f(lambda_n) = <f, Theta_n> and the reconstructor."""
    if terms < 1:
        raise ValueError("terms must be >= 1, got {}".format(terms))

    bases = eigenbasis(grid, terms, workers)
    coefficients = np.array(
        pool.parallel_map(lambda basis: project(f, basis, grid), bases, workers)
    )

    return OscillatingSeries(grid, bases, coefficients)


def lambda_approx(sigma1, sigma2, l1, l2, n, order=0, variant="displayed"):
    """
    Flat-sigma approximation of the n-th two-layer eigenvalue.

    ``variant="displayed"`` uses alpha cos(beta lambda0) in the first-order
    denominator, ``variant="linearized"`` uses alpha beta cos(beta lambda0).
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1, got {}".format(order))
    if n < 1:
        raise ValueError("n must be >= 1, got {}".format(n))
    if variant not in ("displayed", "linearized"):
        raise ValueError("unknown variant {}".format(variant))

    total = l1 / sigma1 + l2 / sigma2
    lam0 = math.pi * n / total

    if order == 0:
        return lam0

    alpha = (sigma2 - sigma1) / (sigma2 + sigma1)
    beta = l2 / sigma2 - l1 / sigma1
    weight = alpha * beta if variant == "linearized" else alpha
    denominator = (-1) ** n * total - weight * math.cos(beta * lam0)

    return lam0 + alpha * math.sin(beta * lam0) / denominator


def approx_errors(grid, count, variant="displayed", workers=None):
    """Per-index zero- and first-order relative errors for a two-layer grid."""
    if grid.n_layers != 2:
        raise ValueError("approximations are defined for two layers only")

    roots, _, degenerate = find_eigenvalues(grid, count, True, workers)
    sigma1, sigma2 = grid.sigma
    l1, l2 = grid.l

    rows = []
    for n, lam in enumerate(roots, start=1):
        lam0 = lambda_approx(sigma1, sigma2, l1, l2, n, 0)
        lam1 = lambda_approx(sigma1, sigma2, l1, l2, n, 1, variant)
        rows.append(
            {
                "n": n,
                "lambda": lam,
                "lambda0": lam0,
                "lambda1": lam1,
                "rel_err0": abs(lam0 - lam) / lam,
                "rel_err1": abs(lam1 - lam) / lam,
                "degenerate": bool(degenerate[n - 1]),
            }
        )

    return pd.DataFrame(rows)
