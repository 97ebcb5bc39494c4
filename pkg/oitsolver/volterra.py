"""
Linear Volterra equations of the second kind and numerical Laplace inversion.

A system reads u(tau) = f(tau) + integral_0^tau K(tau, s) u(s) ds with u of
dimension d. The discretization on a time grid is block lower triangular,
so it is solved by forward substitution in O(M^2) kernel evaluations.
"""

import math
import logging
import mpmath
import numpy as np

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional
from scipy import integrate

from oitsolver import pool
from oitsolver.errors import InversionInstabilityError, VolterraSingularError

logger = logging.getLogger("OIT Solver")

RULES = ("trapezoid", "simpson", "product")
STEHFEST_ORDERS = (8, 10, 12, 14)


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a time grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("time grids start at 0, got {}".format(nodes[0]))
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("time nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, horizon, steps):
        return cls(np.linspace(0.0, horizon, steps + 1))

    @classmethod
    def geometric(cls, horizon, first_step, ratio=1.2, max_step=np.inf):
        """Steps growing by ``ratio`` from ``first_step``, capped at ``max_step``."""
        nodes = [0.0]
        step = first_step
        while nodes[-1] + step < horizon:
            nodes.append(nodes[-1] + step)
            step = min(step * ratio, max_step)

        # merge a sliver last step into the previous one
        if len(nodes) > 1 and horizon - nodes[-1] < 0.25 * (nodes[-1] - nodes[-2]):
            nodes.pop()
        nodes.append(horizon)
        return cls(np.array(nodes))

    @property
    def size(self):
        return self.nodes.size

    @property
    def steps(self):
        return np.diff(self.nodes)

    @property
    def horizon(self):
        return self.nodes[-1]


@dataclass(frozen=True)
class VolterraSystem:
    """
    ``forcing(tau)`` returns shape (d,), ``kernel(tau, s)`` shape (len(s), d, d).

    For the product rule the kernel is the smooth factor sqrt(tau - s) K.
    ``diagonal(tau)`` supplies the s = tau limit where the kernel cannot be
    evaluated there.
    """

    dimension: int
    forcing: Callable
    kernel: Callable
    diagonal: Optional[Callable] = None


def _newton_cotes(points):
    """Weights integrating the interpolant through ``points`` over their span."""
    points = np.asarray(points, dtype=float)
    centre, half = 0.5 * (points[0] + points[-1]), 0.5 * (points[-1] - points[0])
    local = (points - centre) / half
    powers = np.arange(points.size)
    moments = np.where(powers % 2 == 0, 2.0 / (powers + 1), 0.0)
    vandermonde = local[None, :] ** powers[:, None]
    return half * np.linalg.solve(vandermonde, moments)


def trapezoid_weights(nodes, k):
    h = np.diff(nodes[: k + 1])
    w = np.zeros(k + 1)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def simpson_weights(nodes, k):
    """
    Composite Simpson on pairs of steps; an odd count starts with a 3/8 block.
    One step falls back to the trapezoid.
    """
    w = np.zeros(k + 1)
    if k == 0:
        return w
    if k == 1:
        return trapezoid_weights(nodes, 1)

    start = 0
    if k % 2:
        w[:4] += _newton_cotes(nodes[:4])
        start = 3
    for j in range(start, k, 2):
        w[j : j + 3] += _newton_cotes(nodes[j : j + 3])
    return w


def product_weights(nodes, k):
    """Product trapezoid weights for integral_0^tau_k g(s) / sqrt(tau_k - s) ds."""
    w = np.zeros(k + 1)
    if k == 0:
        return w
    tau = nodes[k]
    a = tau - nodes[:k]
    b = tau - nodes[1 : k + 1]
    b[-1] = 0.0
    h = a - b
    I0 = 2.0 * (np.sqrt(a) - np.sqrt(b))
    I1 = (2.0 / 3.0) * (a * np.sqrt(a) - b * np.sqrt(b))
    w[:-1] += (I1 - b * I0) / h
    w[1:] += (a * I0 - I1) / h
    return w


def _phi_series(q):
    """(1 - e^-q (1 + q)) / q^2 and (1 - e^-q) / q, stable at small q."""
    q = np.asarray(q, dtype=float)
    small = q < 1e-3
    safe = np.where(small, 1.0, q)
    decay = np.exp(-safe)

    first = np.where(
        small,
        0.5 - q / 3.0 + q * q / 8.0 - q**3 / 30.0,
        (1.0 - decay * (1.0 + safe)) / (safe * safe),
    )
    whole = np.where(
        small,
        1.0 - q / 2.0 + q * q / 6.0 - q**3 / 24.0,
        (1.0 - decay) / safe,
    )
    return first, whole


def exponential_trapezoid_weights(decay, nodes, k):
    """
    Weights for integral_0^tau_k exp(-a (tau_k - s)) g(s) ds with g linear
    between nodes, one row per decay rate a >= 0. Shape (len(decay), k + 1).
    """
    decay = np.atleast_1d(np.asarray(decay, dtype=float))
    w = np.zeros((decay.size, k + 1))
    if k == 0:
        return w

    tau = nodes[k]
    for j in range(k):
        h = nodes[j + 1] - nodes[j]
        q = decay * h
        right_end = np.exp(-decay * (tau - nodes[j + 1]))
        first, whole = _phi_series(q)
        w[:, j] += right_end * h * first
        w[:, j + 1] += right_end * h * (whole - first)
    return w


WEIGHTS = {
    "trapezoid": trapezoid_weights,
    "simpson": simpson_weights,
    "product": product_weights,
}


def _kernel_row(system, tau, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        block = np.array(system.kernel(tau, s), dtype=float).reshape(
            s.size, system.dimension, system.dimension
        )

    if not np.all(np.isfinite(block[-1])):
        if system.diagonal is not None:
            block[-1] = system.diagonal(tau)
        else:
            logger.warning("kernel not finite at s=tau={:.6g}; using 0".format(tau))
            block[-1] = 0.0

    if not np.all(np.isfinite(block)):
        raise ValueError("kernel not finite below the diagonal at tau={}".format(tau))
    return block


def solve_second_kind(system, grid, rule="trapezoid"):
    """Forward substitution; returns the sampled solution with shape (d, M + 1)."""
    if rule not in RULES:
        raise ValueError("unknown quadrature rule {}".format(rule))

    weights = WEIGHTS[rule]
    nodes = grid.nodes
    d = system.dimension
    u = np.zeros((grid.size, d))
    u[0] = system.forcing(nodes[0])
    identity = np.eye(d)

    for k in range(1, grid.size):
        s = nodes[: k + 1]
        block = _kernel_row(system, nodes[k], s)
        w = weights(nodes, k)

        history = np.einsum("j,jab,jb->a", w[:-1], block[:-1], u[:k])
        diagonal = identity - w[-1] * block[-1]

        if abs(np.linalg.det(diagonal)) < 1e-14:
            raise VolterraSingularError(k)

        u[k] = np.linalg.solve(diagonal, system.forcing(nodes[k]) + history)

    logger.debug("volterra solve: {} nodes, rule {}".format(grid.size, rule))
    return u.T


def assemble_dense(system, grid, rule="trapezoid"):
    """The full block lower triangular matrix and right-hand side."""
    weights = WEIGHTS[rule]
    nodes = grid.nodes
    d, size = system.dimension, grid.size

    matrix = np.eye(d * size)
    rhs = np.concatenate([np.asarray(system.forcing(t), dtype=float) for t in nodes])

    for k in range(1, size):
        block = _kernel_row(system, nodes[k], nodes[: k + 1])
        w = weights(nodes, k)
        for j in range(k + 1):
            matrix[k * d : (k + 1) * d, j * d : (j + 1) * d] -= w[j] * block[j]

    return matrix, rhs


def solve_dense(system, grid, rule="trapezoid"):
    matrix, rhs = assemble_dense(system, grid, rule)
    return np.linalg.solve(matrix, rhs).reshape(grid.size, system.dimension).T


@lru_cache(maxsize=None)
def stehfest_weights(order):
    if order % 2:
        raise ValueError("the Stehfest order must be even, got {}".format(order))

    half = order // 2
    weights = np.zeros(order)
    for i in range(1, order + 1):
        total = 0.0
        for k in range((i + 1) // 2, min(i, half) + 1):
            total += (
                k**half
                * math.factorial(2 * k)
                / (
                    math.factorial(half - k)
                    * math.factorial(k)
                    * math.factorial(k - 1)
                    * math.factorial(i - k)
                    * math.factorial(2 * k - i)
                )
            )
        weights[i - 1] = (-1) ** (half + i) * total
    return weights


def stehfest(transform, t, order=12):
    """Gaver-Stehfest inverse at t > 0 from real samples of the transform."""
    weights = stehfest_weights(order)
    scale = math.log(2.0) / t
    samples = np.array([transform(scale * i) for i in range(1, order + 1)])
    return scale * float(np.real(weights @ samples))


def talbot(transform, t):
    """Talbot contour inverse through mpmath; the transform takes complex p."""

    def wrapped(p):
        return mpmath.mpc(complex(transform(complex(p))))

    return float(mpmath.re(mpmath.invertlaplace(wrapped, t, method="talbot")))


def invert_laplace(transform, t, orders=STEHFEST_ORDERS, tolerance=1e-5, method="auto"):
    """
    Inverse Laplace transform at one time t > 0.

    ``auto`` runs the Stehfest order sweep and accepts it when the two highest
    orders agree to ``tolerance``; otherwise it falls back to Talbot.
    """
    if t <= 0:
        raise ValueError("inversion needs t > 0, got {}".format(t))
    if method == "talbot":
        return talbot(transform, t)

    estimates = [stehfest(transform, t, order) for order in orders]
    if method == "stehfest":
        return estimates[-1]

    spread = abs(estimates[-1] - estimates[-2]) / max(abs(estimates[-1]), 1e-300)
    if spread <= tolerance:
        return estimates[-1]

    logger.debug(
        "stehfest sweep spread {:.3g} at t={:.6g}; using talbot".format(spread, t)
    )
    try:
        value = talbot(transform, t)
    except (ZeroDivisionError, ValueError, ArithmeticError) as error:
        raise InversionInstabilityError(
            "inversion unstable at t={}: stehfest spread {:.3g}, talbot {}".format(
                t, spread, error
            )
        )
    if not math.isfinite(value):
        raise InversionInstabilityError(
            "inversion unstable at t={}: stehfest spread {:.3g}".format(t, spread)
        )
    return value


def laplace_convolution_solve(
    kernel_transform,
    forcing_transform,
    times,
    initial,
    method="auto",
    orders=STEHFEST_ORDERS,
    workers=None,
):
    """
    Solve u = f + K * u for convolution kernels K(tau - s) in the Laplace domain.

    ``kernel_transform(p)`` returns (d, d), ``forcing_transform(p)`` returns (d,)
    and ``initial`` is u(0) = f(0). Returns samples shaped (d, len(times)).
    """
    initial = np.atleast_1d(np.asarray(initial, dtype=float))
    d = initial.size
    times = np.asarray(times, dtype=float)

    @lru_cache(maxsize=4096)
    def image(p):
        matrix = np.eye(d) - np.asarray(kernel_transform(p)).reshape(d, d)
        return np.linalg.solve(matrix, np.asarray(forcing_transform(p)).reshape(d))

    def at_time(t):
        if t == 0.0:
            return initial
        return np.array(
            [
                invert_laplace(
                    lambda p, i=i: image(p)[i], t, orders=orders, method=method
                )
                for i in range(d)
            ]
        )

    values = pool.parallel_map(at_time, times, workers)
    return np.array(values).T


def laplace_transform(func, p):
    """
    integral_0^inf exp(-p t) func(t) dt by quadrature in t = u^2.

    ``func`` may have an integrable 1/sqrt(t) singularity at 0. Complex p is
    handled through the real and imaginary parts.
    """
    p = complex(p)

    def part(kind):
        def integrand(u):
            t = u * u
            value = np.exp(-p * t) * func(t) * 2.0 * u
            return value.real if kind == "real" else value.imag

        return integrate.quad(
            integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400
        )[0]

    if p.imag == 0.0:
        return part("real")
    return complex(part("real"), part("imag"))
