"""
Two-phase freezing with a free interface.

Ice fills [y_minus, y(tau)] with diffusivity kappa_I and water fills
[y(tau), y_plus] with kappa_W. The walls are held at T_s and T_l, the
interface at the melting temperature T_m, and the flux jump across it is
rho L y'. A piecewise linear lift eta carries the wall values and the jump;
what remains has a continuous flux and is expanded on the two-phase
eigenbasis frozen at the current interface position. The interface position
and the flux Phi are advanced node by node: the position from the interface
temperature condition, the flux explicitly from the history.
"""

import math
import time
import logging
import mpmath
import numpy as np
import pandas as pd

from dataclasses import dataclass, field
from typing import Optional
from scipy import optimize, special

from oitsolver import pool
from oitsolver.errors import RootIterationError, TrajectoryError
from oitsolver.volterra import TimeGrid, exponential_trapezoid_weights

logger = logging.getLogger("OIT Solver")

# relative phase length treated as a vanished layer
EDGE = 1e-12
BISECTION_STEPS = 80

# interface root iteration, positions in mm
ROOT_XTOL = 1e-9
MIN_BRACKET = 1e-6
EXPANSIONS = 60

STEP_RESIDUAL = 1e-3
FIRST_STEP_RESIDUAL = 1e-2

# truncation: exp(-lambda^2 h) below TAIL over the newest step, at most MAX_TERMS
TAIL = 1e-50
MAX_TERMS = 8000

# one-sided difference step over the shortest half wave of the basis
DIFFERENCE_SCALE = 1e-3

THETA_SERIES_LIMIT = 0.5
THETA_TAIL = 1e-17


@dataclass(frozen=True)
class StefanConfig:
    """
    Walls in mm, temperatures in K, diffusivities in mm^2/s, densities in
    kg/m^3 and the reduced latent heat L in K m^3/kg, so rho L is in K.
    """

    y_minus: float
    y_plus: float
    T_s: float
    T_m: float
    T_l: float
    kappa_I: float
    kappa_W: float
    rho_I: float
    rho_W: float
    L: float
    melting: bool = False
    C_a: Optional[float] = None

    def __post_init__(self):
        if not self.y_minus < self.y_plus:
            raise ValueError(
                "walls must satisfy y_minus < y_plus, got {} and {}".format(
                    self.y_minus, self.y_plus
                )
            )
        for name in ("kappa_I", "kappa_W", "rho_I", "rho_W"):
            if getattr(self, name) <= 0:
                raise ValueError("{} must be positive".format(name))
        if self.L < 0:
            raise ValueError("latent heat must be >= 0, got {}".format(self.L))
        if not self.melting and not self.T_s <= self.T_m <= self.T_l:
            raise ValueError(
                "freezing needs T_s <= T_m <= T_l, got {}, {}, {}".format(
                    self.T_s, self.T_m, self.T_l
                )
            )

    @property
    def latent(self):
        """rho L of the interface energy balance."""
        return (self.rho_W if self.melting else self.rho_I) * self.L

    @property
    def root_I(self):
        return math.sqrt(self.kappa_I)

    @property
    def root_W(self):
        return math.sqrt(self.kappa_W)

    @property
    def span(self):
        return self.y_plus - self.y_minus

    def lengths(self, y):
        """(l_minus, l_plus): the phase widths over the square root diffusivities."""
        return (y - self.y_minus) / self.root_I, (self.y_plus - y) / self.root_W

    def mix(self, y):
        """Interface weights (s_plus, s_minus), doubled when y sits on a wall."""
        return 1.0 + float(y == self.y_plus), 1.0 + float(y == self.y_minus)


def lift_coefficients(config, y, y_prime):
    """
    (A_-, B_-, A_+, B_+) of the lift A + B x on each side of y.

    The lines meet at y, take the wall values and satisfy
    kappa_I B_- - kappa_W B_+ = rho L y'.
    """
    if not config.y_minus <= y <= config.y_plus:
        raise ValueError(
            "interface y={} is outside [{}, {}]".format(y, config.y_minus, config.y_plus)
        )

    jump = config.latent * y_prime
    D = config.kappa_I * (config.y_plus - y) + config.kappa_W * (y - config.y_minus)
    B_minus = ((config.T_l - config.T_s) * config.kappa_W + (config.y_plus - y) * jump) / D
    B_plus = ((config.T_l - config.T_s) * config.kappa_I - (y - config.y_minus) * jump) / D

    return (
        config.T_s - B_minus * config.y_minus,
        B_minus,
        config.T_l - B_plus * config.y_plus,
        B_plus,
    )


def lift_value(coefficients, y, x):
    A_minus, B_minus, A_plus, B_plus = coefficients
    x = np.asarray(x, dtype=float)
    return np.where(x < y, A_minus + B_minus * x, A_plus + B_plus * x)


def eigen_function(config, y, lam):
    """sqrt(kappa_I) cos(lam l_-) sin(lam l_+) + sqrt(kappa_W) sin(lam l_-) cos(lam l_+)."""
    l_minus, l_plus = config.lengths(y)
    lam = np.asarray(lam, dtype=float)
    return config.root_I * np.cos(lam * l_minus) * np.sin(
        lam * l_plus
    ) + config.root_W * np.sin(lam * l_minus) * np.cos(lam * l_plus)


def _poles(length, count):
    return (np.arange(count) + 0.5) * math.pi / length


def stefan_eigenvalues(config, y, count):
    """
    The first ``count`` positive roots of the two-phase eigen equation.

    Dividing by cos(lam l_-) cos(lam l_+) gives
    sqrt(kappa_I) tan(lam l_+) + sqrt(kappa_W) tan(lam l_-), increasing on
    each branch between consecutive poles, so every gap between merged poles
    of the two phases holds exactly one root. A vanished phase leaves
    pi n over the other width.
    """
    if count < 1:
        raise ValueError("count must be >= 1, got {}".format(count))
    if not config.y_minus <= y <= config.y_plus:
        raise ValueError("interface y={} is outside the walls".format(y))

    l_minus, l_plus = config.lengths(y)
    n = np.arange(1, count + 1)
    if l_minus <= EDGE * l_plus:
        return n * math.pi / l_plus
    if l_plus <= EDGE * l_minus:
        return n * math.pi / l_minus

    poles = np.sort(
        np.concatenate((_poles(l_minus, count + 1), _poles(l_plus, count + 1)))
    )[: count + 1]
    lo, hi = poles[:-1].copy(), poles[1:].copy()

    # coincident poles leave an empty gap whose root is the pole itself
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = (
            config.root_I * np.tan(mid * l_plus) + config.root_W * np.tan(mid * l_minus)
            < 0
        )
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)

    return 0.5 * (lo + hi)


def series_length(config, y, h, terms):
    """
    Terms kept for a step of length h from the interface at y: at least
    ``terms``, and enough that exp(-lambda^2 h) drops below TAIL.
    """
    if h <= 0:
        raise ValueError("time step must be positive, got {}".format(h))

    l_minus, l_plus = config.lengths(y)
    needed = math.sqrt(-math.log(TAIL) / h) * (l_minus + l_plus) / math.pi
    return int(max(terms, min(MAX_TERMS, math.ceil(needed))))


def k_factor(config, y, lam):
    """
    Water amplitude K_n = sin(lam l_-) / sin(lam l_+) at eigenvalues.

    Where sin(lam l_+) is small the flux form
    -sqrt(kappa_I) cos(lam l_-) / (sqrt(kappa_W) cos(lam l_+)) is used; both
    agree on roots, and the flux form resolves the 0/0 at y = y_minus.
    """
    l_minus, l_plus = config.lengths(y)
    lam = np.asarray(lam, dtype=float)
    sin_a, sin_b = np.sin(lam * l_minus), np.sin(lam * l_plus)

    if np.any((np.abs(sin_b) < 1e-12) & (np.abs(sin_a) > 1e-8)):
        raise ValueError("lambda sits on a pole of K at y={}".format(y))

    ratio = sin_a / np.where(sin_b == 0.0, 1.0, sin_b)
    flux = -config.root_I * np.cos(lam * l_minus) / (
        config.root_W * np.cos(lam * l_plus)
    )
    return np.where(np.abs(sin_b) >= 0.5, ratio, flux)


def cos_identity(config, y, lam, K):
    """Flux matching residual sqrt(kappa_I) cos(x_-) + sqrt(kappa_W) K cos(x_+)."""
    l_minus, l_plus = config.lengths(y)
    return config.root_I * np.cos(lam * l_minus) + config.root_W * K * np.cos(
        lam * l_plus
    )


def backward_slope(nodes, ys):
    """y' at the last node; second order once two back steps exist."""
    k = len(ys) - 1
    if k == 0:
        return 0.0
    h1 = nodes[k] - nodes[k - 1]
    if k == 1:
        return (ys[1] - ys[0]) / h1

    h2 = nodes[k - 1] - nodes[k - 2]
    return (
        (2 * h1 + h2) / (h1 * (h1 + h2)) * ys[k]
        - (h1 + h2) / (h1 * h2) * ys[k - 1]
        + h1 / (h2 * (h1 + h2)) * ys[k - 2]
    )


@dataclass
class StefanState:
    """Accepted nodes of a run; list entries are per node."""

    terms: int
    nodes: list = field(default_factory=list)
    y: list = field(default_factory=list)
    y_prime: list = field(default_factory=list)
    Phi: list = field(default_factory=list)
    lift: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    K: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    gradient_jump: list = field(default_factory=list)
    latent_rhs: list = field(default_factory=list)
    runtime: list = field(default_factory=list)

    @classmethod
    def initial(cls, config, terms):
        if terms < 1:
            raise ValueError("terms must be >= 1, got {}".format(terms))

        y = config.y_minus
        lam = stefan_eigenvalues(config, y, terms)
        state = cls(terms)
        state.append(
            0.0,
            y,
            0.0,
            0.0,
            lift_coefficients(config, y, 0.0),
            lam,
            k_factor(config, y, lam),
            math.nan,
            math.nan,
            0.0,
            0.0,
        )
        return state

    def append(self, tau, y, y_prime, Phi, lift, lam, K, residual, jump, rhs, runtime):
        self.nodes.append(tau)
        self.y.append(y)
        self.y_prime.append(y_prime)
        self.Phi.append(Phi)
        self.lift.append(lift)
        self.lam.append(lam)
        self.K.append(K)
        self.residual.append(residual)
        self.gradient_jump.append(jump)
        self.latent_rhs.append(rhs)
        self.runtime.append(runtime)

    @property
    def size(self):
        return len(self.nodes)

    @property
    def grid(self):
        return TimeGrid(np.array(self.nodes))

    @property
    def B_minus(self):
        return np.array([lift[1] for lift in self.lift])

    @property
    def B_plus(self):
        return np.array([lift[3] for lift in self.lift])

    def l_minus(self, config):
        return config.lengths(np.array(self.y))[0]

    def l_plus(self, config):
        return config.lengths(np.array(self.y))[1]

    def index(self, tau):
        hits = np.flatnonzero(np.isclose(self.nodes, tau, rtol=1e-12, atol=1e-14))
        if hits.size == 0:
            raise ValueError("tau={} is not an accepted time node".format(tau))
        return int(hits[0])

    def to_frame(self):
        return pd.DataFrame(
            {
                "step": np.arange(self.size),
                "tau": self.nodes,
                "y": self.y,
                "Phi": self.Phi,
                "gradient_jump": self.gradient_jump,
                "latent_rhs": self.latent_rhs,
                "interface_residual": self.residual,
                "runtime_s": self.runtime,
            }
        )


@dataclass(frozen=True)
class Expansion:
    """Series data at one node: S, R (and its lift part P), N and the phases at y."""

    lam: np.ndarray
    K: np.ndarray
    S: np.ndarray
    R: np.ndarray
    P: np.ndarray
    N: np.ndarray
    x_minus: np.ndarray
    x_plus: np.ndarray
    Omega: np.ndarray
    decay: np.ndarray

    @property
    def coefficients(self):
        return (self.S + self.R) / self.N


def regrouped_integrand(config, nodes, ys, Phi, B_minus, B_plus, lam, K):
    """
    Integrand of R_n split as (Phi Omega, lift part), each (terms, k + 1).

    The lift part subtracts its value at s = tau, and Omega vanishes there
    by continuity of the eigenfunctions, so both columns at s = tau are zero.
    """
    ys = np.asarray(ys, dtype=float)
    sin_m = np.sin(np.outer(lam, (ys - config.y_minus) / config.root_I))
    sin_p = np.sin(np.outer(lam, (config.y_plus - ys) / config.root_W))
    K = K[:, None]

    Omega = sin_m - K * sin_p
    lift = config.kappa_I * (
        np.asarray(B_minus)[None, :] * sin_m - B_minus[-1] * sin_m[:, -1:]
    ) - K * config.kappa_W * (
        np.asarray(B_plus)[None, :] * sin_p - B_plus[-1] * sin_p[:, -1:]
    )
    return np.asarray(Phi)[None, :] * Omega, lift, Omega


def _expansion(config, nodes, ys, Phi, B_minus, B_plus, lam, K):
    """S, R, N at nodes[-1]; the last entries of the histories belong to it."""
    nodes = np.asarray(nodes, dtype=float)
    tau, y = nodes[-1], ys[-1]
    l_minus, l_plus = config.lengths(y)
    x_minus, x_plus = lam * l_minus, lam * l_plus

    decay = lam**2
    N = 0.5 * l_minus * config.root_I + 0.5 * K**2 * l_plus * config.root_W
    start = lam * config.span / config.root_W

    S = (np.exp(-decay * tau) / lam) * (
        config.root_I * (config.T_m - config.T_s)
        + (config.T_m - config.T_l) * K * config.root_W * np.cos(start)
        - (
            config.kappa_I * B_minus[-1] * np.sin(x_minus)
            - config.kappa_W * B_plus[-1] * K * np.sin(x_plus)
        )
        / lam
    )

    flux_part, lift_part, Omega = regrouped_integrand(
        config, nodes, ys, Phi, B_minus, B_plus, lam, K
    )
    k = nodes.size - 1
    if k == 0:
        R = P = np.zeros_like(lam)
    else:
        weights = exponential_trapezoid_weights(decay, nodes, k)
        P = pool.reduce_sum(weights * lift_part, axis=1)
        R = P + pool.reduce_sum(weights * flux_part, axis=1)

    return Expansion(lam, K, S, R, P, N, x_minus, x_plus, Omega, decay)


def _value_mix(config, y, expansion):
    s_plus, s_minus = config.mix(y)
    return 0.5 * (
        s_plus * np.sin(expansion.x_minus)
        + s_minus * expansion.K * np.sin(expansion.x_plus)
    )


def _flux_mix(config, y, expansion):
    s_plus, s_minus = config.mix(y)
    return 0.5 * expansion.lam * (
        s_plus * config.root_I * np.cos(expansion.x_minus)
        - s_minus * config.root_W * expansion.K * np.cos(expansion.x_plus)
    )


def _interface_temperature(config, lift, y, expansion):
    series = pool.reduce_sum(expansion.coefficients * _value_mix(config, y, expansion))
    return float(lift_value(lift, y, y)) + float(series)


def _series_value(config, lift, y, expansion, x):
    x = np.asarray(x, dtype=float)
    lam = expansion.lam.reshape((-1,) + (1,) * x.ndim)
    K = expansion.K.reshape(lam.shape)

    ice = np.sin(lam * (x - config.y_minus) / config.root_I)
    water = K * np.sin(lam * (config.y_plus - x) / config.root_W)
    on = _value_mix(config, y, expansion).reshape(lam.shape)
    modes = np.where(x < y, ice, np.where(x > y, water, on))

    c = expansion.coefficients.reshape(lam.shape)
    return lift_value(lift, y, x) + pool.reduce_sum(c * modes, axis=0)


def difference_step(config, y, lam):
    """Offset for one-sided differences at y, well inside both phases."""
    delta = DIFFERENCE_SCALE * min(config.root_I, config.root_W) / float(np.max(lam))
    return min(delta, 0.25 * (y - config.y_minus), 0.25 * (config.y_plus - y))


def one_sided_fluxes(values, delta, config):
    """
    (kappa_I T_x, kappa_W T_x) at the interface from second order one-sided
    differences; ``values`` holds T at y - 2 delta, y - delta, y, y + delta,
    y + 2 delta.
    """
    far_ice, ice, centre, water, far_water = values
    return (
        config.kappa_I * (3.0 * centre - 4.0 * ice + far_ice) / (2.0 * delta),
        config.kappa_W * (-3.0 * centre + 4.0 * water - far_water) / (2.0 * delta),
    )


def _difference_fluxes(config, lift, y, expansion):
    delta = difference_step(config, y, expansion.lam)
    if delta <= 0.0:
        return math.nan, math.nan
    x = y + delta * np.arange(-2, 3)
    return one_sided_fluxes(_series_value(config, lift, y, expansion, x), delta, config)


def _history(state, k):
    return (
        np.array(state.nodes[: k + 1]),
        np.array(state.y[: k + 1]),
        np.array(state.Phi[: k + 1]),
        state.B_minus[: k + 1],
        state.B_plus[: k + 1],
    )


def series_terms(config, state, k, n=None):
    """
    (S_n, R_n, N_n) at accepted node k, for every term or the n-th (from 1).
    """
    nodes, ys, Phi, B_minus, B_plus = _history(state, k)
    expansion = _expansion(
        config, nodes, ys, Phi, B_minus, B_plus, state.lam[k], state.K[k]
    )
    if n is None:
        return expansion.S, expansion.R, expansion.N
    return expansion.S[n - 1], expansion.R[n - 1], expansion.N[n - 1]


def volterra_parts(config, state, k):
    """
    Free terms f_1, f_2 and the kernel rows K_1(tau_k, tau_j), K_2(tau_k, tau_j)
    of the interface system at accepted node k.
    """
    nodes, ys, Phi, B_minus, B_plus = _history(state, k)
    expansion = _expansion(
        config, nodes, ys, Phi, B_minus, B_plus, state.lam[k], state.K[k]
    )
    y = ys[-1]
    value = _value_mix(config, y, expansion)
    flux = _flux_mix(config, y, expansion)
    known = (expansion.S + expansion.P) / expansion.N

    f_1 = -float(pool.reduce_sum(known * flux))
    f_2 = config.T_m - float(lift_value(state.lift[k], y, y)) - float(
        pool.reduce_sum(known * value)
    )

    damping = np.exp(-np.outer(expansion.decay, nodes[-1] - nodes))
    kernel = damping * expansion.Omega / expansion.N[:, None]
    K_1 = pool.reduce_sum(kernel * flux[:, None], axis=0)
    K_2 = pool.reduce_sum(kernel * value[:, None], axis=0)
    return f_1, f_2, np.atleast_1d(K_1), np.atleast_1d(K_2)


def temperature(config, state, tau, x):
    """T at an accepted node; x inside [y_minus, y_plus]."""
    k = state.index(tau)
    x = np.asarray(x, dtype=float)
    if np.any(x < config.y_minus) or np.any(x > config.y_plus):
        raise ValueError("x must lie between the walls")

    nodes, ys, Phi, B_minus, B_plus = _history(state, k)
    expansion = _expansion(
        config, nodes, ys, Phi, B_minus, B_plus, state.lam[k], state.K[k]
    )
    return _series_value(config, state.lift[k], ys[-1], expansion, x)


def _solve_at(config, state, nodes, y, count):
    ys = np.append(state.y, y)
    y_prime = backward_slope(nodes, ys)
    lift = lift_coefficients(config, y, y_prime)
    lam = stefan_eigenvalues(config, y, count)
    K = k_factor(config, y, lam)

    expansion = _expansion(
        config,
        nodes,
        ys,
        np.append(state.Phi, 0.0),
        np.append(state.B_minus, lift[1]),
        np.append(state.B_plus, lift[3]),
        lam,
        K,
    )
    return y_prime, lift, expansion


def _bracket(residual, start, width, floor, ceiling):
    """Walk up, then down, from ``start`` until the residual changes sign."""
    r_start = residual(start)
    if r_start == 0.0:
        return start, start

    for direction, limit in ((1.0, ceiling), (-1.0, floor)):
        step = width
        for _ in range(EXPANSIONS):
            trial = min(max(start + direction * step, floor), ceiling)
            if np.sign(residual(trial)) != np.sign(r_start):
                return (start, trial) if direction > 0 else (trial, start)
            if trial == limit:
                break
            step *= 2.0

    raise RootIterationError(
        "no sign change of the interface residual in [{}, {}]".format(floor, ceiling)
    )


def step(config, state, h):
    """Accept one node at tau_k + h; returns the state."""
    if h <= 0:
        raise ValueError("time step must be positive, got {}".format(h))

    start = time.perf_counter()
    nodes = np.append(state.nodes, state.nodes[-1] + h)
    # fixed over the root iteration so the residual stays continuous in y
    count = series_length(config, state.y[-1], h, state.terms)

    def residual(y):
        _, lift, expansion = _solve_at(config, state, nodes, y, count)
        return config.T_m - _interface_temperature(config, lift, y, expansion)

    previous = state.y[-1]
    advance = abs(state.y[-1] - state.y[-2]) if state.size > 1 else 0.0
    width = max(3.0 * advance, MIN_BRACKET * config.span)
    ceiling = config.y_plus - MIN_BRACKET * config.span

    lo, hi = _bracket(residual, previous, width, config.y_minus, ceiling)
    y = lo if lo == hi else optimize.brentq(residual, lo, hi, xtol=ROOT_XTOL)

    if not config.y_minus <= y <= config.y_plus:
        raise TrajectoryError("interface left the walls: y={}".format(y))

    y_prime, lift, expansion = _solve_at(config, state, nodes, y, count)
    Phi = float(pool.reduce_sum(expansion.coefficients * _flux_mix(config, y, expansion)))
    interface = abs(config.T_m - _interface_temperature(config, lift, y, expansion))

    limit = FIRST_STEP_RESIDUAL if state.size == 1 else STEP_RESIDUAL
    if interface > limit:
        raise TrajectoryError(
            "interface residual {:.3g} K above {:.0e} at tau={:.6g}".format(
                interface, limit, nodes[-1]
            )
        )

    ice, water = _difference_fluxes(config, lift, y, expansion)
    state.append(
        float(nodes[-1]),
        float(y),
        float(y_prime),
        Phi,
        lift,
        expansion.lam,
        expansion.K,
        interface,
        ice - water,
        config.latent * y_prime,
        time.perf_counter() - start,
    )
    logger.debug(
        "stefan step {}: tau={:.6g} y={:.9g} Phi={:.6g} terms={}".format(
            state.size - 1, nodes[-1], y, Phi, count
        )
    )
    return state


def run(config, grid, terms=50):
    """March over every node of ``grid`` from the interface at y_minus."""
    state = StefanState.initial(config, terms)
    for h in grid.steps:
        step(config, state, h)

    logger.info(
        "stefan run: {} steps, y({:.6g}) = {:.6g}, mean step {:.3g} s".format(
            grid.steps.size, grid.horizon, state.y[-1], float(np.mean(state.runtime[1:]))
        )
    )
    return state


def time_grid(horizon, first_step=0.01, ratio=1.2, max_step=15.0):
    return TimeGrid.geometric(horizon, first_step, ratio, max_step)


def theta3(z, omega):
    """
    Jacobi theta 1 + 2 sum_n omega^(n^2) cos(2 n z) for 0 <= omega < 1.

    Summed directly up to omega = THETA_SERIES_LIMIT, through mpmath above.
    """
    if not 0.0 <= omega < 1.0:
        raise ValueError("theta3 needs 0 <= omega < 1, got {}".format(omega))

    z = np.asarray(z, dtype=float)
    if omega == 0.0:
        return np.ones_like(z)

    if omega > THETA_SERIES_LIMIT:
        jtheta = np.vectorize(lambda value: float(mpmath.jtheta(3, value, omega)))
        return jtheta(z).astype(float)

    count = math.ceil(math.sqrt(math.log(THETA_TAIL) / math.log(omega)))
    n = np.arange(1, count + 1)
    terms = omega ** (n**2) * np.cos(2.0 * n * z[..., None])
    return 1.0 + 2.0 * np.sum(terms, axis=-1)


def _short_time_scale(config, tau):
    if tau <= 0:
        raise ValueError("the small-time form needs tau > 0, got {}".format(tau))

    _, l_plus0 = config.lengths(config.y_minus)
    N0 = 0.5 * (config.kappa_I / config.kappa_W) * config.span
    scale = config.kappa_I * (config.T_l - config.T_s) / (2.0 * N0)
    return l_plus0, scale


def phi_short_tau_series(config, tau, y, terms):
    """
    Small-tau flux with S_n from the initial data only, R_n = 0 and the
    eigenvalues frozen at pi n / l_+(0).
    """
    l_plus0, scale = _short_time_scale(config, tau)
    l_minus, l_plus = config.lengths(y)
    s_plus, s_minus = config.mix(y)

    n = np.arange(1, terms + 1)
    lam = n * math.pi / l_plus0
    bracket = s_plus * np.cos(lam * l_minus) + s_minus * (-1.0) ** n * np.cos(
        lam * l_plus
    )
    return scale * float(np.sum(np.exp(-tau * lam**2) * bracket))


def small_time_theta(config, tau, y):
    """
    The same small-tau flux summed through theta3, with
    omega = exp(-pi^2 tau / l_+(0)^2).
    """
    l_plus0, scale = _short_time_scale(config, tau)
    l_minus, l_plus = config.lengths(y)
    s_plus, s_minus = config.mix(y)

    omega = math.exp(-(math.pi**2) * tau / l_plus0**2)
    z_minus = 0.5 * math.pi * l_minus / l_plus0
    z_plus = 0.5 * math.pi + 0.5 * math.pi * l_plus / l_plus0

    pair = theta3(np.array([z_minus, z_plus]), omega)
    return scale * 0.5 * (s_plus * (pair[0] - 1.0) + s_minus * (pair[1] - 1.0))


def neumann_alpha(config):
    """
    Similarity constant of the semi-infinite two-phase problem: the front
    sits at y_minus + 2 alpha sqrt(kappa_I tau).
    """
    if config.T_m <= config.T_s:
        raise ValueError("the similarity front needs T_s < T_m")

    ratio = math.sqrt(config.kappa_I / config.kappa_W)
    root_pi = math.sqrt(math.pi)

    def balance(alpha):
        ice = (
            config.root_I
            * (config.T_m - config.T_s)
            * math.exp(-alpha * alpha)
            / (root_pi * special.erf(alpha))
        )
        water = (
            config.root_W
            * (config.T_l - config.T_m)
            / (root_pi * special.erfcx(alpha * ratio))
        )
        return ice - water - config.latent * alpha * config.root_I

    hi = 1.0
    while balance(hi) > 0:
        hi *= 2.0
    return optimize.brentq(balance, 1e-12, hi, xtol=1e-14)


def neumann_front(config, tau, alpha=None):
    alpha = neumann_alpha(config) if alpha is None else alpha
    return config.y_minus + 2.0 * alpha * np.sqrt(config.kappa_I * np.asarray(tau))
