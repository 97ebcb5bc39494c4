"""
Oscillating Fourier transform of a two-layer line and its heat kernels.

The medium has diffusivity sigma_minus left of the interface y and
sigma_plus right of it. Two-component images pair the analysis matrix F
with the left/right indicator of the source point, and the synthesis
matrix B with the indicator of the evaluation point.

The heat kernels P and eta are returned with rows indexing the side of the
source offset zeta and columns the side of the evaluation offset z, both
measured from the interface.
"""

import math
import logging
import warnings
import numpy as np

from collections import namedtuple
from dataclasses import dataclass
from scipy import integrate

from oitsolver.errors import QuadratureError, TruncationError
from oitsolver.smallmat import Mat2

logger = logging.getLogger("OIT Solver")

InverseResult = namedtuple("InverseResult", ["value", "truncation"])


@dataclass(frozen=True)
class TwoLayerMedium:
    y: float
    sigma_minus: float
    sigma_plus: float

    def __post_init__(self):
        if self.sigma_minus <= 0 or self.sigma_plus <= 0:
            raise ValueError(
                "diffusivities must be positive: {}, {}".format(
                    self.sigma_minus, self.sigma_plus
                )
            )

    @property
    def Sigma(self):
        return (self.sigma_minus - self.sigma_plus) / (
            self.sigma_minus + self.sigma_plus
        )

    @property
    def sigma(self):
        return np.array([self.sigma_minus, self.sigma_plus])

    def side(self, x):
        """0 left of the interface, 1 at or right of it."""
        return (np.asarray(x) >= self.y).astype(int)


@dataclass(frozen=True)
class KernelSample:
    P: Mat2
    eta: Mat2
    z: float
    tau: float
    zeta: float
    s: float


def forward_matrix(z, medium, omega):
    """diag(exp(i omega z / sigma_-), exp(i omega z / sigma_+)), broadcast over omega."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(np.broadcast(z, omega).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(1j * omega * z / medium.sigma_minus)
    out[..., 1, 1] = np.exp(1j * omega * z / medium.sigma_plus)
    return out


def backward_matrix(z, medium, omega):
    """Synthesis matrix B_z(omega), broadcast over z and omega."""
    omega = np.asarray(omega, dtype=float)
    sm, sp, Sigma = medium.sigma_minus, medium.sigma_plus, medium.Sigma

    out_m = np.exp(-1j * omega * z / sm)
    in_m = np.exp(1j * omega * z / sm)
    out_p = np.exp(-1j * omega * z / sp)
    in_p = np.exp(1j * omega * z / sp)

    out = np.zeros(out_m.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = (out_m + Sigma * in_m) / sm
    out[..., 0, 1] = (1.0 + Sigma) * out_p / sm
    out[..., 1, 0] = (1.0 - Sigma) * out_m / sp
    out[..., 1, 1] = (out_p - Sigma * in_p) / sp
    return out


def _oscillatory_quad(func, length, frequency, kind):
    """Integral over [0, length] of func(t) times cos or sin(frequency t)."""
    if frequency == 0.0:
        if kind == "sin":
            return 0.0
        return integrate.quad(func, 0.0, length, limit=400, epsabs=1e-11)[0]

    sign = 1.0
    if frequency < 0.0:
        frequency = -frequency
        sign = -1.0 if kind == "sin" else 1.0

    value = integrate.quad(
        func, 0.0, length, weight=kind, wvar=frequency, limit=400, epsabs=1e-11
    )[0]
    return sign * value


def _image_at(f, medium, omega, support):
    lo, hi = support
    y = medium.y
    sm, sp = medium.sigma_minus, medium.sigma_plus

    minus = 0.0j
    if lo < y:
        left = y - lo

        def reflected(t):
            return f(y - t)

        minus = _oscillatory_quad(reflected, left, omega / sm, "cos") - 1j * (
            _oscillatory_quad(reflected, left, omega / sm, "sin")
        )

    plus = 0.0j
    if hi > y:
        right = hi - y

        def shifted(t):
            return f(y + t)

        plus = _oscillatory_quad(shifted, right, omega / sp, "cos") + 1j * (
            _oscillatory_quad(shifted, right, omega / sp, "sin")
        )

    return minus, plus


def oit_forward(f, medium, omega_grid, support=(-np.inf, np.inf)):
    """
    Two-component image (f_-(omega), f_+(omega)), one row per omega.

    ``support`` bounds the integration; infinite ends use Fourier-weighted
    quadrature on the half-line.
    """
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    image = np.zeros((omega_grid.size, 2), dtype=complex)

    for k, omega in enumerate(omega_grid):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                image[k] = _image_at(f, medium, omega, support)
            except integrate.IntegrationWarning as error:
                raise QuadratureError(
                    "forward transform did not converge at omega={}: {}".format(
                        omega, error
                    )
                )

    return image


def _panels(lo, hi, panels, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    omega = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    weight = (half[:, None] * weights[None, :]).ravel()
    return omega, weight, np.repeat(np.arange(panels), order)


def oit_inverse(image, medium, x, omega_max, panels=64, order=24, tolerance=None):
    """
    (1/2pi) integral of f(omega)^T B_{x-y}(omega) 1_x over [-omega_max, omega_max].

    ``image`` maps an array of omega to an array of shape (len(omega), 2).
    The truncation estimate is the change when the range shrinks to three
    quarters of omega_max; above ``tolerance`` it raises TruncationError.
    """
    if panels % 8:
        raise ValueError("panels must be a multiple of 8, got {}".format(panels))

    x = np.atleast_1d(np.asarray(x, dtype=float))
    omega, weight, panel = _panels(-omega_max, omega_max, panels, order)
    samples = np.asarray(image(omega))

    side = medium.side(x)
    synthesis = backward_matrix((x - medium.y)[:, None], medium, omega[None, :])
    column = synthesis[np.arange(x.size), :, :, side]
    integrand = np.einsum("nk,xnk->xn", samples, column)

    full = integrand @ weight / (2.0 * math.pi)
    inner_mask = (panel >= panels // 8) & (panel < panels - panels // 8)
    inner = integrand @ (weight * inner_mask) / (2.0 * math.pi)

    truncation = float(np.max(np.abs(full - inner)))
    if tolerance is not None and truncation > tolerance:
        raise TruncationError(
            "inverse transform truncation estimate {:.3g} above {:.3g}".format(
                truncation, tolerance
            )
        )

    imaginary = float(np.max(np.abs(full.imag)))
    if imaginary > 1e-8 * max(1.0, float(np.max(np.abs(full.real)))):
        logger.warning(
            "inverse transform imaginary residue {:.3g}".format(imaginary)
        )

    return InverseResult(full.real, truncation)


def delta_check(medium, x0, width, omega_max, panels=64, order=24, x_nodes=200):
    """
    Weak sifting check of the F/B pair.

    Integrates the truncated delta representation against a Gaussian of the
    given width centred at x0 and returns (sifted, expected).
    """

    def test_function(x):
        return np.exp(-0.5 * ((x - x0) / width) ** 2)

    lo, hi = x0 - 12.0 * width, x0 + 12.0 * width
    edges = [lo, hi]
    if lo < medium.y < hi:
        edges = [lo, medium.y, hi]

    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(x_nodes)
    xs, xw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * gl_nodes + 0.5 * (b + a))
        xw.append(0.5 * (b - a) * gl_weights)
    xs, xw = np.concatenate(xs), np.concatenate(xw)

    omega, weight, _ = _panels(-omega_max, omega_max, panels, order)
    synthesis = backward_matrix((xs - medium.y)[:, None], medium, omega[None, :])
    side = medium.side(xs)
    column = synthesis[np.arange(xs.size), :, :, side]
    projected = np.einsum("x,xnk->nk", xw * test_function(xs), column)

    analysis = forward_matrix(x0 - medium.y, medium, omega)
    row = analysis[:, medium.side(x0), :]
    integrand = np.sum(row * projected, axis=1)

    sifted = float((integrand @ weight).real / (2.0 * math.pi))
    return sifted, float(test_function(x0))


# Gaussian terms of the kernels: (row, column, coefficient, c_zeta, c_z)
# with phase alpha = c_zeta * zeta + c_z * z and G(alpha) = exp(-alpha^2 / 4t).
def _kernel_terms(medium):
    sm, sp, Sigma = medium.sigma_minus, medium.sigma_plus, medium.Sigma
    return [
        (0, 0, 1.0, 1.0 / sm, -1.0 / sm),
        (0, 0, Sigma, 1.0 / sm, 1.0 / sm),
        (0, 1, 1.0 + Sigma, 1.0 / sm, -1.0 / sp),
        (1, 0, 1.0 - Sigma, 1.0 / sp, -1.0 / sm),
        (1, 1, 1.0, 1.0 / sp, -1.0 / sp),
        (1, 1, -Sigma, 1.0 / sp, 1.0 / sp),
    ]


def kernel_stack(z, t, zeta, medium, kind="P"):
    """
    Vectorized kernels with t = tau - s > 0, shape broadcast(z, t, zeta) + (2, 2).

    kind is one of "P", "eta", "dP" (d/dz of P) or "deta" (d/dz of eta).
    """
    z, t, zeta = np.broadcast_arrays(
        np.asarray(z, float), np.asarray(t, float), np.asarray(zeta, float)
    )
    if np.any(t <= 0):
        raise ValueError("kernels need tau > s")

    sigma = medium.sigma
    out = np.zeros(z.shape + (2, 2))
    root = math.sqrt(math.pi)

    for row, col, coef, c_zeta, c_z in _kernel_terms(medium):
        alpha = c_zeta * zeta + c_z * z
        gauss = np.exp(-alpha * alpha / (4.0 * t))

        if kind == "P":
            term = coef * gauss / (2.0 * root * np.sqrt(t) * sigma[row])
        elif kind == "dP":
            term = (
                -coef * alpha * c_z * gauss
                / (4.0 * root * t * np.sqrt(t) * sigma[row])
            )
        elif kind == "eta":
            term = -coef * c_zeta * alpha * gauss / (4.0 * root * t * np.sqrt(t))
        elif kind == "deta":
            term = (
                -coef * c_zeta * c_z * gauss * (1.0 - alpha * alpha / (2.0 * t))
                / (4.0 * root * t * np.sqrt(t))
            )
        else:
            raise ValueError("unknown kernel kind {}".format(kind))

        out[..., row, col] += term

    return out


def _to_mat2(array):
    return Mat2(*(float(v) for v in np.asarray(array).ravel()))


def heat_kernel_P(z, tau, zeta, s, medium):
    if tau <= s:
        raise ValueError("heat kernel needs tau > s, got tau={} s={}".format(tau, s))
    return _to_mat2(kernel_stack(z, tau - s, zeta, medium, "P"))


def heat_kernel_eta(z, tau, zeta, s, medium):
    if tau <= s:
        raise ValueError("heat kernel needs tau > s, got tau={} s={}".format(tau, s))
    return _to_mat2(kernel_stack(z, tau - s, zeta, medium, "eta"))


def kernel_sample(z, tau, zeta, s, medium):
    return KernelSample(
        heat_kernel_P(z, tau, zeta, s, medium),
        heat_kernel_eta(z, tau, zeta, s, medium),
        z,
        tau,
        zeta,
        s,
    )


def kernel_quadrature(z, t, zeta, medium, panels=40, order=20):
    """
    P and eta from the omega integrals of F_zeta B_z weighted by exp(-omega^2 t).

    Returns complex arrays; the imaginary parts vanish analytically.
    """
    omega_max = math.sqrt(37.0 / t)
    omega, weight, _ = _panels(-omega_max, omega_max, panels, order)
    product = forward_matrix(zeta, medium, omega) @ backward_matrix(z, medium, omega)
    damping = np.exp(-omega * omega * t) * weight / (2.0 * math.pi)

    P = np.einsum("n,nij->ij", damping, product)
    eta = np.einsum("n,nij->ij", 1j * omega * damping, product)
    return P, eta
