"""
Resolvent of a layered line with semi-infinite outer media.

The layered operator has diffusivities sigma_0 (left of y_0), sigma_1 ...
sigma_N on the finite layers and sigma_{N+1} right of y_N. For a spectral
parameter lambda the function u solves sigma^2 u'' - lambda u = -delta(x - x0)
with u and sigma^2 u' continuous at every y_i and decay at both ends.

Each layer carries the free-space term exp(-k|x - x0| / sigma_i) / (2 k sigma_i)
plus a homogeneous part c cosh(k_i (x - o_i)) + d sinh(k_i (x - o_i)) in local
coordinates o_i. Everything is written in the wavenumber k = sqrt(lambda); the
public entry points take the principal root, the pole and residue helpers
accept k on the second sheet.
"""

import math
import cmath
import logging
import numpy as np

from collections import namedtuple
from dataclasses import dataclass

from oitsolver.errors import (
    HyperbolicOverflowError,
    PoleSingularityError,
    RootIterationError,
)
from oitsolver.smallmat import HYPER_LIMIT

logger = logging.getLogger("OIT Solver")

POLE_WARNING = 1e-10

# complex-step circle for d det / dk: radius relative to max(1, |k|), sample count
STEP_RADIUS = 1e-2
STEP_POINTS = 16

Pole = namedtuple("Pole", ["n", "branch", "k", "lam"])
ThreeLayerForm = namedtuple("ThreeLayerForm", ["u", "C_minus", "D_plus", "det"])


@dataclass(frozen=True)
class MixedMedium:
    y: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)

        if sigma.shape != (y.size + 1,):
            raise ValueError(
                "expected {} diffusivities, got {}".format(y.size + 1, sigma.size)
            )
        if np.any(np.diff(y) <= 0):
            raise ValueError("boundaries must be strictly increasing: {}".format(y))
        if np.any(sigma <= 0):
            raise ValueError("diffusivities must be positive: {}".format(sigma))

        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_interior(self):
        return self.y.size - 1

    @property
    def l(self):
        """Layer lengths l_0 = 0, l_1 ... l_N."""
        return np.concatenate(([0.0], np.diff(self.y)))

    @property
    def s(self):
        """Ratios s_j = sigma_j / sigma_{j+1}, j = 0..N."""
        return self.sigma[:-1] / self.sigma[1:]

    @property
    def origin(self):
        return np.concatenate((self.y[:1], self.y))

    def layer_index(self, x):
        return np.searchsorted(self.y, np.asarray(x, dtype=float), side="right")


@dataclass
class MixedSolution:
    medium: MixedMedium
    k: complex
    x0: float
    coeffs: np.ndarray
    det: complex

    @property
    def lam(self):
        return self.k * self.k

    @property
    def C_minus(self):
        return self.coeffs[0, 0]

    @property
    def D_plus(self):
        return self.coeffs[-1, 0]

    def value(self, x, layer=None):
        return _evaluate(self.medium, self.coeffs[:, :, None], np.array([self.k]),
                         self.x0, x, layer)[..., 0]

    def flux(self, x, layer=None):
        """sigma^2 u' from the side of ``layer`` (default: the layer holding x)."""
        return _evaluate(self.medium, self.coeffs[:, :, None], np.array([self.k]),
                         self.x0, x, layer, flux=True)[..., 0]


def principal_root(lam):
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real <= 0.0:
        raise ValueError("lambda={} lies on the branch cut".format(lam))
    return cmath.sqrt(lam)


def _hyper(phi):
    phi = np.asarray(phi, dtype=complex)
    if np.any(np.abs(phi.real) > HYPER_LIMIT):
        raise HyperbolicOverflowError(
            "cosh of {:.6g} exceeds the representable range".format(
                float(np.max(np.abs(phi.real)))
            )
        )
    out = np.empty(phi.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = out[..., 1, 1] = np.cosh(phi)
    out[..., 0, 1] = out[..., 1, 0] = np.sinh(phi)
    return out


def _transfer(medium, k, j, scaled=False):
    """S_{s_j} H(k l_j / sigma_j), optionally with exp(|Re phi|) factored out."""
    phi = np.asarray(k, dtype=complex) * medium.l[j] / medium.sigma[j]
    shift = np.abs(phi.real) if scaled else np.zeros(phi.shape)

    if scaled:
        out = np.empty(phi.shape + (2, 2), dtype=complex)
        grow, decay = np.exp(phi - shift), np.exp(-phi - shift)
        out[..., 0, 0] = out[..., 1, 1] = 0.5 * (grow + decay)
        out[..., 0, 1] = out[..., 1, 0] = 0.5 * (grow - decay)
    else:
        out = _hyper(phi)

    out[..., 1, :] *= medium.s[j]
    return out, shift


def _source_jump(sigma_a, sigma_b, z, k):
    """Value and scaled-flux jumps of the free-space terms across a boundary."""
    k = np.asarray(k, dtype=complex)
    near = np.exp(-k * abs(z) / sigma_a)
    far = np.exp(-k * abs(z) / sigma_b)
    value = near / (2.0 * k * sigma_a) - far / (2.0 * k * sigma_b)
    flux = (near - far) / (2.0 * k * sigma_b)
    return value, flux


def g_matrix(sigma_a, sigma_b, z, lam):
    """
    Source correction matrix at a boundary between media sigma_a and sigma_b.

    z is x0 minus the boundary; column 0 applies when the source lies left
    of the boundary, column 1 when it lies right of it.
    """
    value, flux = _source_jump(sigma_a, sigma_b, z, principal_root(lam))
    value, flux = complex(value), complex(flux)
    return np.array([[value, value], [-flux, flux]])


def lambda_seq(medium, k, p, lam, scaled=False):
    """
    Ordered product Lambda_k^p = T_{p-1} ... T_k of the layer transfer matrices.

    With ``scaled`` the product is returned as (mantissa, log_scale).
    """
    if not 0 <= k <= p <= medium.n_interior + 1:
        raise ValueError(
            "need 0 <= k <= p <= {}, got k={} p={}".format(medium.n_interior + 1, k, p)
        )
    return _product(medium, principal_root(lam), k, p, scaled)


def _product(medium, wavenumber, k, p, scaled=False):
    result = np.eye(2, dtype=complex)
    log_scale = 0.0
    for j in range(k, p):
        factor, shift = _transfer(medium, wavenumber, j, scaled)
        result = factor @ result
        log_scale += float(shift)
    if scaled:
        return result, log_scale
    return result


def _det(medium, k):
    """det Lambda* as a function of the (possibly second-sheet) wavenumber."""
    total = _product(medium, k, 0, medium.n_interior + 1)
    return total[0, 0] + total[0, 1] + total[1, 0] + total[1, 1]


def pole_residual(medium, k):
    """|det Lambda*| at a wavenumber on either sheet."""
    return abs(_det(medium, complex(k)))


def det_lambda_star(medium, lam, scaled=False):
    k = principal_root(lam)
    if scaled:
        total, log_scale = _product(medium, k, 0, medium.n_interior + 1, True)
        return total.sum(), log_scale
    return _det(medium, k)


def _states(medium, x0, k):
    """
    Homogeneous (A_i) and forced (F_i) parts of the layer coefficients.

    The coefficient pair of layer i is A_i C_- + F_i for i = 0..N+1.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    A = [np.ones(k.shape + (2,), dtype=complex)]
    F = [np.zeros(k.shape + (2,), dtype=complex)]

    for j in range(medium.n_interior + 1):
        T, _ = _transfer(medium, k, j)
        value, flux = _source_jump(
            medium.sigma[j], medium.sigma[j + 1], x0 - medium.y[j], k
        )
        jump = np.stack([value, flux if x0 >= medium.y[j] else -flux], axis=-1)

        A.append(np.einsum("...ij,...j->...i", T, A[-1]))
        F.append(np.einsum("...ij,...j->...i", T, F[-1]) + jump)

    return np.array(A), np.array(F)


def _numerators(A, F):
    """Numerators of (C_-, D_+) = -Lambda* R / det Lambda*, and det Lambda*."""
    a1, a2 = A[-1][..., 0], A[-1][..., 1]
    R1, R2 = F[-1][..., 0], F[-1][..., 1]
    det = a1 + a2
    return -(R1 + R2), a2 * R1 - a1 * R2, det


def _coefficients(medium, x0, k, check=True):
    A, F = _states(medium, x0, k)
    num_c, num_d, det = _numerators(A, F)

    scale = np.maximum(1.0, np.abs(A[-1]).max(axis=-1))
    if check and np.any(np.abs(det) <= 1e-12 * scale):
        raise PoleSingularityError(
            "det Lambda* vanishes at k={}".format(np.atleast_1d(k)[0])
        )
    if np.any(np.abs(det) < POLE_WARNING * scale):
        logger.warning("spectral parameter close to a zero of det Lambda*")

    C_minus = num_c / det
    D_plus = num_d / det
    coeffs = A * C_minus[None, ..., None] + F
    coeffs[-1, ..., 0] = D_plus
    coeffs[-1, ..., 1] = -D_plus
    return coeffs, det


def _evaluate(medium, coeffs, k, x0, x, layer=None, flux=False, free_terms=True):
    """u (or sigma^2 u') at points x for coefficient arrays shaped (N+2, 2, len(k))."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    index = medium.layer_index(x) if layer is None else np.full(x.shape, layer)
    sigma = medium.sigma[index][:, None]
    kx = k[None, :] / sigma
    local = (x - medium.origin[index])[:, None]
    offset = np.abs(x - x0)[:, None]

    c = coeffs[index, 0, :]
    d = coeffs[index, 1, :]
    plus, minus = 0.5 * (c + d), 0.5 * (c - d)

    with np.errstate(over="ignore", invalid="ignore"):
        grow = np.where(plus == 0, 0.0, plus * np.exp(kx * local))
        decay = np.where(minus == 0, 0.0, minus * np.exp(-kx * local))
        free = np.exp(-kx * offset)

    if flux:
        direction = np.sign(x - x0)[:, None]
        out = sigma * k[None, :] * (grow - decay)
        if free_terms:
            out = out - 0.5 * direction * free
    else:
        out = grow + decay
        if free_terms:
            out = out + free / (2.0 * k[None, :] * sigma)

    return out[0] if scalar else out


def mixed_solution(medium, x0, lam=None, k=None):
    """Solved layer coefficients for a source at x0; pass either lam or k."""
    if k is None:
        k = principal_root(lam)
    coeffs, det = _coefficients(medium, x0, np.array([complex(k)]))
    return MixedSolution(medium, complex(k), float(x0), coeffs[:, 0, :], complex(det[0]))


def solve_boundary_coeffs(medium, x0, lam):
    solution = mixed_solution(medium, x0, lam)
    return solution.C_minus, solution.D_plus


def layer_coeffs(medium, x0, lam):
    """Interior pairs (C_i, D_i), i = 1..N, in local coordinates x - y_{i-1}."""
    return mixed_solution(medium, x0, lam).coeffs[1:-1]


def u_lambda_mixed(medium, x, x0, lam):
    return mixed_solution(medium, x0, lam).value(x)


def u_wavenumber(medium, x, x0, k):
    """u for an array of wavenumbers k, shape (len(x), len(k))."""
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    coeffs, _ = _coefficients(medium, x0, k)
    return _evaluate(medium, coeffs.transpose(0, 2, 1), k, x0,
                     np.atleast_1d(x))


def three_layer_closed_form(sigma_minus, sigma_1, sigma_plus, l1, x, x0, lam):
    """Explicit u, C_-, D_+ and det Lambda* for boundaries y_0 = 0, y_1 = l1."""
    k = principal_root(lam)
    s_minus, s_1 = sigma_minus / sigma_1, sigma_1 / sigma_plus
    w = k * l1 / sigma_1
    ch, sh = cmath.cosh(w), cmath.sinh(w)

    Lam = np.array([[ch, s_minus * sh], [s_1 * sh, s_1 * s_minus * ch]])
    det = (1.0 + s_1 * s_minus) * ch + (s_1 + s_minus) * sh

    def jump(sa, sb, z, right):
        value, flux = _source_jump(sa, sb, z, k)
        return np.array([complex(value), complex(flux) if right else -complex(flux)])

    g0 = jump(sigma_minus, sigma_1, x0, x0 >= 0.0)
    g1 = jump(sigma_1, sigma_plus, x0 - l1, x0 >= l1)
    R = np.array([[ch, sh], [s_1 * sh, s_1 * ch]]) @ g0 + g1

    adjugate = np.array([[1.0, 1.0], [-(Lam[1, 0] + Lam[1, 1]), Lam[0, 0] + Lam[0, 1]]])
    C_minus, D_plus = -(adjugate @ R) / det

    def u(point):
        if point < 0.0:
            sigma, hom = sigma_minus, C_minus * cmath.exp(k * point / sigma_minus)
        elif point < l1:
            c, d = np.array([C_minus, s_minus * C_minus]) + g0
            phase = k * point / sigma_1
            sigma, hom = sigma_1, c * cmath.cosh(phase) + d * cmath.sinh(phase)
        else:
            sigma, hom = sigma_plus, D_plus * cmath.exp(-k * (point - l1) / sigma_plus)
        return hom + cmath.exp(-k * abs(point - x0) / sigma) / (2.0 * k * sigma)

    values = np.array([u(point) for point in np.atleast_1d(x)])
    return ThreeLayerForm(values, C_minus, D_plus, det)


def three_layer_poles(sigma_minus, sigma_1, sigma_plus, l1, count):
    """
    Closed-form zeros of det Lambda* for the three-layer line.

    tanh(k l1 / sigma_1) = -r with r = (1 + s_1 s_-) / (s_1 + s_-); every zero
    has Re k < 0, so the poles sit on the second sheet of sqrt(lambda). Each
    index contributes a conjugate pair (branch +1 and -1).
    """
    s_minus, s_1 = sigma_minus / sigma_1, sigma_1 / sigma_plus
    r = (1.0 + s_1 * s_minus) / (s_1 + s_minus)

    if math.isclose(r, 1.0, rel_tol=1e-14):
        return []

    poles = []
    for n in range(1, count + 1):
        for branch in (1, -1):
            if r < 1.0:
                w = complex(-math.atanh(r), branch * math.pi * n)
            else:
                w = complex(-math.atanh(1.0 / r), branch * math.pi * (n - 0.5))
            k = sigma_1 * w / l1
            poles.append(Pole(n, branch, k, k * k))
    return poles


def det_slope(medium, k, radius=STEP_RADIUS, points=STEP_POINTS):
    """
    d det Lambda* / dk by complex steps on a circle around k.

    det is entire in k, so the mean of det(k + h w) / (h w) over the roots of
    unity w is exact up to terms of order h^points.
    """
    k = complex(k)
    h = radius * max(1.0, abs(k))
    w = np.exp(2j * math.pi * np.arange(points) / points)
    samples = np.array([_det(medium, k + h * root) for root in w])
    return complex(np.mean(samples / (h * w)))


def polish_pole(medium, k0, tol=1e-12, max_iter=60):
    """Newton iteration on det Lambda*(k) from a starting wavenumber."""
    k = complex(k0)
    for iteration in range(max_iter):
        slope = det_slope(medium, k)
        if slope == 0:
            break
        step = _det(medium, k) / slope
        k -= step
        if abs(step) < tol * max(1.0, abs(k)):
            logger.debug("pole converged after {} iterations".format(iteration + 1))
            return k

    raise RootIterationError("pole polishing from k={} did not converge".format(k0))


def residue(medium, x, x0, pole_k):
    """Residue in lambda of u at a simple zero of det Lambda*."""
    pole_k = complex(pole_k)
    A, F = _states(medium, x0, np.array([pole_k]))
    num_c, num_d, _ = _numerators(A, F)

    coeffs = A * num_c[None, :, None]
    coeffs[-1, :, 0] = num_d
    coeffs[-1, :, 1] = -num_d

    slope_lam = det_slope(medium, pole_k) / (2.0 * pole_k)

    # the free-space terms and the source corrections stay bounded at the pole
    homogeneous = _evaluate(
        medium,
        coeffs.transpose(0, 2, 1),
        np.array([pole_k]),
        x0,
        np.atleast_1d(x),
        free_terms=False,
    )
    return homogeneous[:, 0] / slope_lam


def contour_residue(medium, x, x0, pole_k, radius=1e-3, points=64):
    """Residue by the trapezoid rule on a small circle around lambda_k."""
    pole_k = complex(pole_k)
    pole_lam = pole_k * pole_k
    angles = 2.0 * math.pi * np.arange(points) / points
    offsets = radius * abs(pole_lam) * np.exp(1j * angles)

    # follow the sheet of pole_k around the circle
    k = pole_k * np.sqrt(1.0 + offsets / pole_lam)
    values = u_wavenumber(medium, x, x0, k)
    return values @ offsets / points


def _omega_panels(omega_max, panels, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, omega_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    omega = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    weight = (half[:, None] * weights[None, :]).ravel()
    return omega, weight, np.repeat(np.arange(panels), order)


def delta_representation_mixed(medium, x, x0, omega_max, panels=64, order=24):
    """
    Truncated branch-cut representation of delta(x - x0).

    -(2/pi) times the integral over [0, omega_max] of omega Im u at k = i omega.
    Returns (value, truncation), the truncation being the change against
    three quarters of omega_max.
    """
    if panels % 4:
        raise ValueError("panels must be a multiple of 4, got {}".format(panels))

    omega, weight, panel = _omega_panels(omega_max, panels, order)
    values = u_wavenumber(medium, x, x0, 1j * omega)
    integrand = -(2.0 / math.pi) * omega * values.imag

    full = integrand @ weight
    inner = integrand @ (weight * (panel < 3 * panels // 4))
    return full, np.abs(full - inner)


def delta_sift(medium, x0, width, omega_max, panels=64, order=24, x_nodes=200):
    """
    Weak sifting check of the branch-cut representation.

    Returns (sifted, expected) for a Gaussian of the given width centred at x0.
    """

    def test_function(x):
        return np.exp(-0.5 * ((x - x0) / width) ** 2)

    lo, hi = x0 - 10.0 * width, x0 + 10.0 * width
    edges = np.unique(np.concatenate(([lo, x0, hi], medium.y[(medium.y > lo) & (medium.y < hi)])))

    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(x_nodes)
    xs = np.concatenate(
        [0.5 * (b - a) * gl_nodes + 0.5 * (b + a) for a, b in zip(edges[:-1], edges[1:])]
    )
    xw = np.concatenate(
        [0.5 * (b - a) * gl_weights for a, b in zip(edges[:-1], edges[1:])]
    )

    omega, weight, _ = _omega_panels(omega_max, panels, order)
    values = u_wavenumber(medium, xs, x0, 1j * omega)
    projected = (xw * test_function(xs)) @ values

    sifted = float(-(2.0 / math.pi) * np.sum(weight * omega * projected.imag))
    return sifted, float(test_function(x0))
