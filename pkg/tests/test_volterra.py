import math
import pytest
import numpy as np

from scipy import integrate

from oitsolver.errors import VolterraSingularError
from oitsolver.volterra import (
    TimeGrid,
    VolterraSystem,
    exponential_trapezoid_weights,
    invert_laplace,
    laplace_convolution_solve,
    laplace_transform,
    simpson_weights,
    solve_dense,
    solve_second_kind,
    stehfest_weights,
)


def _exponential_system():
    return VolterraSystem(
        1,
        lambda tau: np.array([1.0]),
        lambda tau, s: np.ones((s.size, 1, 1)),
    )


def _manufactured_system():
    def forcing(tau):
        return np.array(
            [
                1 + tau**2 - tau - tau**3 / 3 - tau**4 / 4,
                tau**3 - tau**2 / 2 - tau**4 / 12,
            ]
        )

    def kernel(tau, s):
        block = np.zeros((s.size, 2, 2))
        block[:, 0, 0] = 1.0
        block[:, 0, 1] = 1.0
        block[:, 1, 0] = tau - s
        return block

    return VolterraSystem(2, forcing, kernel)


def _manufactured_error(steps, rule):
    grid = TimeGrid.uniform(1.0, steps)
    u = solve_second_kind(_manufactured_system(), grid, rule)
    exact = np.array([2.0, 1.0])
    return np.abs(u[:, -1] - exact).max()


def test_time_grid():
    grid = TimeGrid.geometric(10.0, 0.01, 1.2, max_step=2.0)
    assert grid.nodes[0] == 0.0 and grid.horizon == 10.0
    assert grid.steps[0] == pytest.approx(0.01)
    assert grid.steps.max() <= 2.0 * 1.25 + 1e-12
    with pytest.raises(ValueError):
        TimeGrid([0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.5, 1.0])


def test_simpson_weights_integrate_quadratics_on_uneven_nodes():
    nodes = np.array([0.0, 0.1, 0.25, 0.5, 0.6, 0.9, 1.3])
    for k in range(2, nodes.size):
        w = simpson_weights(nodes, k)
        f = nodes[: k + 1] ** 2 - 2 * nodes[: k + 1]
        exact = nodes[k] ** 3 / 3 - nodes[k] ** 2
        assert w @ f == pytest.approx(exact, rel=1e-12, abs=1e-14)


def test_exponential_solution():
    grid = TimeGrid.uniform(1.0, 200)
    u = solve_second_kind(_exponential_system(), grid, "simpson")
    assert np.abs(u[0] - np.exp(grid.nodes)).max() < 1e-6


def test_zero_kernel_returns_forcing():
    system = VolterraSystem(
        1, lambda tau: np.array([math.sin(tau)]), lambda tau, s: np.zeros((s.size, 1, 1))
    )
    grid = TimeGrid.uniform(2.0, 10)
    assert solve_second_kind(system, grid)[0] == pytest.approx(np.sin(grid.nodes), abs=0)


def test_simpson_is_fourth_order():
    coarse = _manufactured_error(16, "simpson")
    fine = _manufactured_error(32, "simpson")
    assert math.log2(coarse / fine) >= 3.5


def test_trapezoid_is_second_order():
    coarse = _manufactured_error(16, "trapezoid")
    fine = _manufactured_error(32, "trapezoid")
    assert math.log2(coarse / fine) == pytest.approx(2.0, abs=0.3)


@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
def test_forward_substitution_matches_dense_solve(rule):
    grid = TimeGrid.geometric(1.0, 0.02, 1.15)
    system = _manufactured_system()
    assert solve_second_kind(system, grid, rule) == pytest.approx(
        solve_dense(system, grid, rule), abs=1e-12
    )


def test_solver_is_linear():
    grid = TimeGrid.uniform(1.0, 30)

    def kernel(tau, s):
        return np.exp(-(tau - s))[:, None, None] * np.ones((1, 1, 1))

    def solve(forcing):
        return solve_second_kind(VolterraSystem(1, forcing, kernel), grid, "simpson")

    first = solve(lambda tau: np.array([math.cos(tau)]))
    second = solve(lambda tau: np.array([tau**2]))
    both = solve(lambda tau: np.array([math.cos(tau) + tau**2]))
    assert both == pytest.approx(first + second, abs=1e-12)


def test_product_rule_is_exact_for_linear_solutions():
    grid = TimeGrid.geometric(2.0, 0.01, 1.3)

    def kernel(tau, s):
        return np.ones((s.size, 1, 1))

    constant = VolterraSystem(1, lambda tau: np.array([1 - 2 * math.sqrt(tau)]), kernel)
    assert solve_second_kind(constant, grid, "product")[0] == pytest.approx(
        np.ones(grid.size), abs=1e-12
    )

    linear = VolterraSystem(
        1, lambda tau: np.array([tau - 4.0 / 3.0 * tau**1.5]), kernel
    )
    assert solve_second_kind(linear, grid, "product")[0] == pytest.approx(
        grid.nodes, abs=1e-12
    )


def test_singular_diagonal_is_reported():
    system = VolterraSystem(
        1, lambda tau: np.array([1.0]), lambda tau, s: np.full((s.size, 1, 1), 20.0)
    )
    with pytest.raises(VolterraSingularError) as info:
        solve_second_kind(system, TimeGrid.uniform(1.0, 10))
    assert info.value.node == 1


def test_diagonal_guard_uses_the_supplied_limit():
    def kernel(tau, s):
        return (np.sin(tau - s) / (tau - s))[:, None, None]

    guarded = VolterraSystem(1, lambda tau: np.array([1.0]), kernel, lambda tau: 1.0)
    reference = VolterraSystem(
        1,
        lambda tau: np.array([1.0]),
        lambda tau, s: np.sinc((tau - s) / math.pi)[:, None, None],
    )
    grid = TimeGrid.uniform(1.0, 20)
    assert solve_second_kind(guarded, grid) == pytest.approx(
        solve_second_kind(reference, grid), abs=1e-14
    )


def test_exponential_weights():
    nodes = np.array([0.0, 0.2, 0.5, 0.6, 1.1])
    k = 4

    assert exponential_trapezoid_weights(0.0, nodes, k)[0] == pytest.approx(
        np.array([0.1, 0.25, 0.2, 0.3, 0.25])
    )

    for a in (1e-5, 0.7, 30.0):
        w = exponential_trapezoid_weights([a], nodes, k)[0]
        exact = integrate.quad(lambda s: math.exp(-a * (1.1 - s)) * (2 + 3 * s), 0, 1.1)[0]
        assert w @ (2 + 3 * nodes) == pytest.approx(exact, rel=1e-12)


def test_stehfest_weights_sum_to_zero():
    for order in (8, 10, 12, 14):
        assert abs(stehfest_weights(order).sum()) < 1e-6 * np.abs(stehfest_weights(order)).max()
    with pytest.raises(ValueError):
        stehfest_weights(7)


def test_inversion_of_a_table_transform():
    times = np.linspace(0.1, 2.0, 8)
    for t in times:
        assert invert_laplace(lambda p: 1.0 / (p + 1.0), t) == pytest.approx(
            math.exp(-t), abs=1e-5
        )
        assert invert_laplace(lambda p: 1.0 / (p + 1.0), t, method="talbot") == (
            pytest.approx(math.exp(-t), abs=1e-10)
        )


def test_laplace_transform_quadrature():
    assert laplace_transform(lambda t: math.exp(-t), 2.0) == pytest.approx(1.0 / 3.0)
    assert laplace_transform(lambda t: 1.0 / math.sqrt(t), 4.0) == pytest.approx(
        math.sqrt(math.pi / 4.0), rel=1e-9
    )
    assert laplace_transform(lambda t: math.exp(-t), 1.0 + 1.0j) == pytest.approx(
        1.0 / (2.0 + 1.0j)
    )


def test_convolution_solve_without_kernel():
    times = np.array([0.0, 0.5, 1.0, 2.0])
    u = laplace_convolution_solve(
        lambda p: np.zeros((1, 1)), lambda p: np.array([1.0 / (p + 1.0)]), times, [1.0]
    )
    assert u[0] == pytest.approx(np.exp(-times), abs=1e-5)


def test_convolution_solve_matches_time_stepping():
    # u = 1 + integral of exp(-(tau - s)) u(s) ds has u = 1 + tau
    times = np.array([0.25, 0.5, 1.0, 1.5])
    u = laplace_convolution_solve(
        lambda p: np.array([[1.0 / (p + 1.0)]]),
        lambda p: np.array([1.0 / p]),
        times,
        [1.0],
    )
    assert u[0] == pytest.approx(1.0 + times, rel=1e-5)

    grid = TimeGrid.uniform(1.5, 120)
    system = VolterraSystem(
        1,
        lambda tau: np.array([1.0]),
        lambda tau, s: np.exp(-(tau - s))[:, None, None],
    )
    stepped = solve_second_kind(system, grid, "simpson")[0]
    assert np.interp(times, grid.nodes, stepped) == pytest.approx(u[0], rel=1e-4)
