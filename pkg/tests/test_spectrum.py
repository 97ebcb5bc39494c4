import math
import pytest
import numpy as np

from scipy import integrate

from oitsolver.errors import QuadratureError, RootShortfallError
from oitsolver.spectrum import (
    LayerGrid,
    approx_errors,
    basis_norm,
    bracket_roots,
    eigen_residual,
    eigenbasis,
    find_eigenvalues,
    lambda_approx,
    make_basis,
    oscillating_series,
    project,
    theta_coeffs,
    theta_eval,
    theta_flux,
    two_layer_residual,
    _residual_mesh,
)


def _gauss_inner(grid, f, g, order=200):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(grid.y[:-1], grid.y[1:]):
        x = 0.5 * (b - a) * nodes + 0.5 * (b + a)
        total += 0.5 * (b - a) * np.sum(weights * f(x) * g(x))
    return total


def _random_grid(rng, layers):
    lengths = rng.uniform(0.3, 2.0, layers)
    sigma = rng.uniform(0.3, 3.0, layers)
    return LayerGrid.from_lengths(lengths, sigma, y0=rng.uniform(-1.0, 1.0))


def test_layer_grid_validation():
    with pytest.raises(ValueError):
        LayerGrid([0.0, 1.0, 0.5], [1.0, 1.0])
    with pytest.raises(ValueError):
        LayerGrid([0.0, 1.0], [-1.0])
    with pytest.raises(ValueError):
        LayerGrid([0.0, 1.0, 2.0], [1.0])


def test_single_layer_coefficients_are_a_sine():
    grid = LayerGrid([0.0, 2.0], [1.5])
    coeffs = theta_coeffs(grid, 0.8)
    assert coeffs[0] == pytest.approx([0.0, 1.0], abs=1e-15)


def test_two_layer_second_component():
    grid = LayerGrid([0.2, 1.0, 2.5], [1.3, 0.6])
    lam = 2.1
    basis = make_basis(grid, lam)
    bar1, bar2 = lam / grid.sigma
    s1 = grid.s[0]

    x = np.linspace(1.0, 2.5, 7)
    expected = np.cos(bar2 * (x - 1.0)) * math.sin(bar1 * 0.8) + s1 * np.sin(
        bar2 * (x - 1.0)
    ) * math.cos(bar1 * 0.8)

    assert theta_eval(basis, grid, x, layer=1) == pytest.approx(expected, abs=1e-12)


def test_flat_sigma_reduces_to_sines():
    grid = LayerGrid([0.3, 0.7, 1.1, 1.9], [2.0, 2.0, 2.0])
    l = 1.6
    x = np.linspace(0.3, 1.9, 41)
    for n in (1, 2, 5):
        lam = math.pi * n * 2.0 / l
        basis = make_basis(grid, lam)
        assert theta_eval(basis, grid, x) == pytest.approx(
            np.sin(math.pi * n * (x - 0.3) / l), abs=1e-12
        )


def test_two_layer_residual_matches_closed_form():
    grid = LayerGrid.from_lengths([1.2, 1.0], [7.0, 0.7])
    for lam in np.linspace(0.1, 20.0, 37):
        closed = two_layer_residual(7.0, 0.7, 1.2, 1.0, lam)
        assert closed == pytest.approx(-2.0 * 0.7 * eigen_residual(grid, lam), abs=1e-12)


def test_matrix_and_mesh_residuals_agree(rng):
    grid = _random_grid(rng, 4)
    lams = np.linspace(0.05, 15.0, 23)
    mesh = _residual_mesh(grid, lams)
    for lam, value in zip(lams, mesh):
        assert eigen_residual(grid, lam) == pytest.approx(value, abs=1e-12)


def test_residual_vanishes_at_zero():
    grid = LayerGrid.from_lengths([1.2, 1.0], [7.0, 0.7])
    assert abs(eigen_residual(grid, 1e-12)) < 1e-10


def test_flat_unit_strip_spectrum():
    grid = LayerGrid([0.0, 1.0], [1.0])
    roots = find_eigenvalues(grid, 20)
    assert roots == pytest.approx(math.pi * np.arange(1, 21), abs=1e-10)


def test_equal_two_layer_spectrum():
    grid = LayerGrid.from_lengths([0.4, 1.1], [0.8, 0.8])
    roots = find_eigenvalues(grid, 15)
    assert roots == pytest.approx(math.pi * np.arange(1, 16) * 0.8 / 1.5, abs=1e-10)


def test_two_layer_roots_have_small_residual(two_layer_grid):
    roots, brackets, degenerate = find_eigenvalues(two_layer_grid, 30, full_output=True)

    assert np.all(np.diff(roots) > 0)
    assert roots[0] > 0
    assert not degenerate.any()
    for root, (lo, hi) in zip(roots, brackets):
        assert lo <= root <= hi
        assert abs(eigen_residual(two_layer_grid, root)) < 1e-9


def test_root_shortfall_reports_window():
    with pytest.raises(RootShortfallError) as info:
        bracket_roots(lambda lam: np.ones_like(lam), 0.1, 3, limit=10.0)
    assert info.value.found == 0
    assert info.value.window[1] == pytest.approx(10.0)


def test_lambda_approx_values():
    assert lambda_approx(7.0, 0.7, 1.2, 1.0, 1, 0) == pytest.approx(1.9635, abs=1e-4)
    for n in range(1, 6):
        assert lambda_approx(1.0, 1.0, 0.5, 0.7, n, 1) == lambda_approx(
            1.0, 1.0, 0.5, 0.7, n, 0
        )
    with pytest.raises(ValueError):
        lambda_approx(1.0, 2.0, 1.0, 1.0, 1, 2)


@pytest.mark.parametrize("variant", ["displayed", "linearized"])
def test_two_layer_approximation_errors(two_layer_grid, variant):
    frame = approx_errors(two_layer_grid, 30, variant)

    first_five = frame["rel_err0"].iloc[:5]
    assert (first_five >= 0.03).all() and (first_five <= 0.15).all()
    assert frame["rel_err1"].max() <= 0.02
    assert (frame["rel_err1"] <= frame["rel_err0"] + 1e-10).all()


def test_theta_eval_endpoints_and_continuity(two_layer_grid):
    flat = LayerGrid([0.0, 1.0], [1.0])
    assert float(theta_eval(make_basis(flat, math.pi), flat, 0.5)) == pytest.approx(1.0)

    for basis in eigenbasis(two_layer_grid, 10):
        y0, y1, y2 = two_layer_grid.y
        assert abs(float(theta_eval(basis, two_layer_grid, y0))) < 1e-12
        assert abs(float(theta_eval(basis, two_layer_grid, y2))) < 1e-9
        left = float(theta_eval(basis, two_layer_grid, y1, layer=0))
        right = float(theta_eval(basis, two_layer_grid, y1, layer=1))
        assert left == pytest.approx(right, abs=1e-10)
        flux_left = float(theta_flux(basis, two_layer_grid, y1, layer=0))
        flux_right = float(theta_flux(basis, two_layer_grid, y1, layer=1))
        assert flux_left == pytest.approx(flux_right, rel=1e-10, abs=1e-10)


def test_theta_is_zero_outside_strip(two_layer_grid):
    basis = eigenbasis(two_layer_grid, 1)[0]
    assert theta_eval(basis, two_layer_grid, np.array([-1.0, 5.0])) == pytest.approx([0, 0])


def test_flat_norm_is_half():
    grid = LayerGrid([0.0, 1.0], [1.0])
    for n in (1, 3, 8):
        assert make_basis(grid, math.pi * n).norm == pytest.approx(0.5, abs=1e-14)


def test_norm_matches_quadrature(rng):
    for _ in range(5):
        grid = _random_grid(rng, 2)
        for basis in eigenbasis(grid, 4):
            numeric = 0.0
            for i, (a, b) in enumerate(zip(grid.y[:-1], grid.y[1:])):
                numeric += integrate.quad(
                    lambda x: float(theta_eval(basis, grid, x, layer=i)) ** 2,
                    a,
                    b,
                    epsabs=1e-14,
                    epsrel=1e-13,
                )[0]
            assert basis_norm(basis, grid) == pytest.approx(numeric, rel=1e-10)


def test_orthogonality_on_random_grids(rng):
    for trial in range(20):
        grid = _random_grid(rng, 2 + trial % 2)
        bases = eigenbasis(grid, 12)
        for m in range(12):
            for n in range(m + 1, 12):
                inner = _gauss_inner(
                    grid,
                    lambda x: theta_eval(bases[m], grid, x),
                    lambda x: theta_eval(bases[n], grid, x),
                )
                scale = math.sqrt(bases[m].norm * bases[n].norm)
                assert abs(inner) < 1e-8 * scale


def test_series_of_an_eigenfunction(two_layer_grid):
    first = eigenbasis(two_layer_grid, 1)[0]
    series = oscillating_series(
        lambda x: float(theta_eval(first, two_layer_grid, x)), two_layer_grid, 5
    )
    expected = np.zeros(5)
    expected[0] = first.norm
    assert series.coefficients == pytest.approx(expected, abs=1e-8)


def test_flat_series_matches_classical_sine_series():
    grid = LayerGrid([0.0, 1.0], [1.0])
    series = oscillating_series(lambda x: x * (1.0 - x), grid, 50)
    assert series.l2_error(lambda x: x * (1.0 - x)) < 1e-4


def test_two_layer_series_converges(two_layer_grid):
    def f(x):
        return x * (2.2 - x)

    series = oscillating_series(f, two_layer_grid, 20)
    errors = [series.l2_error(f, terms) for terms in (5, 10, 20)]
    assert errors[0] >= errors[1] >= errors[2]
    assert errors[2] < errors[0]


def test_projection_of_a_divergent_integrand_raises(two_layer_grid):
    first = eigenbasis(two_layer_grid, 1)[0]
    with pytest.raises(QuadratureError):
        project(lambda x: 1.0 / abs(x - 0.50314159), first, two_layer_grid)
