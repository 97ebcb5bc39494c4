import math
import pytest
import numpy as np

from oitsolver.errors import TrajectoryError
from oitsolver.obm import (
    MovingInterface,
    constant_boundary_density,
    flux_limits,
    green_function,
    interface_system,
    laplace_route,
    mass,
    potentials,
    solve_interface,
)
from oitsolver.oit import TwoLayerMedium, kernel_stack
from oitsolver.volterra import TimeGrid

X0 = 0.5


def _sine_interface(horizon=1.0):
    return MovingInterface(
        lambda tau: 0.2 * np.sin(3.0 * np.asarray(tau)),
        lambda tau: 0.6 * np.cos(3.0 * np.asarray(tau)),
        horizon,
    )


def _free_density(sigma, x0, tau, x):
    return np.exp(-((x - x0) ** 2) / (4 * sigma**2 * tau)) / (
        2 * sigma * np.sqrt(math.pi * tau)
    )


def test_interface_checks_its_derivative():
    with pytest.raises(ValueError):
        MovingInterface(lambda tau: np.asarray(tau) ** 2, lambda tau: np.asarray(tau), 1.0)
    with pytest.raises(ValueError):
        MovingInterface.constant(0.0, 0.0)

    interface = MovingInterface.linear(0.3, -0.2, 2.0)
    assert interface.position(1.0) == pytest.approx(0.1)
    assert interface.slope(np.array([0.0, 1.0])) == pytest.approx([-0.2, -0.2])


def test_non_finite_trajectory_is_rejected():
    interface = MovingInterface(
        lambda tau: np.where(np.asarray(tau) > 0.97, np.inf, 0.0),
        lambda tau: np.zeros_like(np.asarray(tau, dtype=float)),
        0.9,
    )
    with pytest.raises(TrajectoryError):
        interface.position(np.array([0.5, 1.0]))


def test_constant_boundary_kernels_vanish(obm_medium):
    t = np.array([1e-3, 0.1, 0.7, 2.0])
    single, double = potentials(obm_medium, 0.0, t, 0.0)
    assert single[:, 0] == pytest.approx(np.zeros(4), abs=1e-14)
    assert double[:, 0] == pytest.approx(np.zeros(4), abs=1e-14)

    eta = kernel_stack(0.0, t, 0.0, obm_medium, "eta")
    assert eta[:, :, 0] == pytest.approx(np.zeros((4, 2)), abs=1e-14)

    dsingle, _ = potentials(obm_medium, 0.0, t, 0.0, derivative=True)
    assert dsingle[:, 0] == pytest.approx(np.zeros(4), abs=1e-14)


def test_source_on_the_threshold_is_rejected(obm_medium):
    interface = MovingInterface.constant(0.0, 1.0)
    with pytest.raises(ValueError):
        solve_interface(obm_medium, interface, 0.0, TimeGrid.uniform(1.0, 10))


def test_constant_boundary_traces_are_explicit(obm_medium):
    interface = MovingInterface.constant(0.0, 1.0)
    grid = TimeGrid.uniform(1.0, 40)
    trace = solve_interface(obm_medium, interface, X0, grid)

    assert trace.phi[0] == 0.0 and trace.Phi[0] == 0.0
    expected = np.array(
        [constant_boundary_density(obm_medium, X0, tau, [0.0])[0] for tau in grid.nodes[1:]]
    )
    assert trace.phi[1:] == pytest.approx(expected, rel=1e-12)
    assert trace.psi == pytest.approx(trace.Phi, abs=0)

    flux = np.array(
        [
            kernel_stack(0.0, tau, X0, obm_medium, "dP")[1, 0]
            for tau in grid.nodes[1:]
        ]
    )
    assert trace.Phi[1:] == pytest.approx(flux, rel=1e-12)


def test_constant_boundary_assembly_is_the_semi_closed_form(obm_medium):
    interface = MovingInterface.constant(0.0, 1.0)
    trace = solve_interface(obm_medium, interface, X0, TimeGrid.uniform(1.0, 40))
    x = np.linspace(-4.0, 5.0, 37)

    for tau in (0.1, 0.55, 1.0):
        assert green_function(obm_medium, interface, X0, trace, tau, x) == pytest.approx(
            constant_boundary_density(obm_medium, X0, tau, x), abs=1e-12
        )


def test_flat_medium_constant_threshold_is_the_gaussian():
    medium = TwoLayerMedium(0.3, 1.4, 1.4)
    interface = MovingInterface.constant(0.3, 2.0)
    grid = TimeGrid.uniform(2.0, 20)
    trace = solve_interface(medium, interface, -0.4, grid)

    expected = _free_density(1.4, -0.4, grid.nodes[1:], 0.3)
    assert trace.phi[1:] == pytest.approx(expected, rel=1e-12)


def test_flat_medium_hides_a_moving_threshold():
    medium = TwoLayerMedium(0.0, 0.8, 0.8)
    interface = _sine_interface()
    trace = solve_interface(medium, interface, X0, TimeGrid.uniform(1.0, 50))
    x = np.linspace(-3.0, 3.0, 41)

    for tau in (0.2, 0.73, 1.0):
        assert green_function(medium, interface, X0, trace, tau, x) == pytest.approx(
            _free_density(0.8, X0, tau, x), abs=1e-10
        )


def test_kernel_diagonal_limit(obm_medium):
    interface = _sine_interface()
    system = interface_system(obm_medium, interface, X0)
    for tau in (0.3, 0.8):
        near = system.kernel(tau, np.array([tau - 1e-6, tau]))
        assert np.all(np.isnan(near[1]))
        assert near[0] == pytest.approx(system.diagonal(tau), rel=1e-4, abs=1e-5)


def test_density_rejects_extrapolation(obm_medium):
    interface = MovingInterface.constant(0.0, 2.0)
    trace = solve_interface(obm_medium, interface, X0, TimeGrid.uniform(1.0, 10))
    with pytest.raises(ValueError):
        green_function(obm_medium, interface, X0, trace, 1.5, [0.2])
    with pytest.raises(ValueError):
        green_function(obm_medium, interface, X0, trace, 0.0, [0.2])


@pytest.mark.parametrize("tau", [0.1, 0.5, 1.0])
def test_constant_boundary_conserves_mass(obm_medium, tau):
    interface = MovingInterface.constant(0.0, 1.0)
    trace = solve_interface(obm_medium, interface, X0, TimeGrid.uniform(1.0, 20))
    assert mass(obm_medium, interface, X0, trace, tau, 20.0) == pytest.approx(
        1.0, abs=1e-4
    )


def test_short_time_density_is_a_delta(obm_medium):
    interface = MovingInterface.constant(0.0, 1.0)
    trace = solve_interface(obm_medium, interface, X0, TimeGrid.uniform(1.0, 20))
    total = mass(obm_medium, interface, X0, trace, 1e-4, 2.0, nodes=8001)
    assert abs(total - 1.0) < 1e-3


@pytest.mark.slow
def test_moving_threshold_density(obm_medium):
    interface = MovingInterface.linear(0.0, 0.1, 0.5)
    trace = solve_interface(obm_medium, interface, X0, TimeGrid.uniform(0.5, 200))
    tau = 0.5
    y = float(interface.position(tau))

    assert mass(obm_medium, interface, X0, trace, tau, 16.0) == pytest.approx(
        1.0, abs=1e-3
    )

    left, right = flux_limits(obm_medium, interface, X0, trace, tau)
    assert left == pytest.approx(trace.Phi[-1], rel=1e-3)
    assert right == pytest.approx(left, rel=1e-3)

    eps = 1e-6
    below, above = green_function(obm_medium, interface, X0, trace, tau, [y - eps, y + eps])
    assert abs(below - above) < 1e-4

    density = green_function(obm_medium, interface, X0, trace, tau, np.linspace(-6, 6, 61))
    assert density.min() > -1e-6


def test_laplace_route_matches_time_stepping(obm_medium):
    stepped = solve_interface(
        obm_medium, MovingInterface.linear(0.0, 0.1, 1.0), X0, TimeGrid.uniform(1.0, 800)
    )
    coarse = TimeGrid(np.array([0.0, 0.25, 0.5, 0.75, 1.0]))
    transformed = laplace_route(obm_medium, 0.0, 0.1, X0, coarse)

    assert transformed.phi == pytest.approx(stepped.phi[::200], abs=1e-4)
    assert transformed.Phi == pytest.approx(stepped.Phi[::200], abs=1e-4)


@pytest.mark.slow
def test_laplace_route_without_slope_is_the_semi_closed_form(obm_medium):
    grid = TimeGrid(np.array([0.0, 0.2, 0.6, 1.0]))
    trace = laplace_route(obm_medium, 0.0, 0.0, X0, grid)
    expected = [constant_boundary_density(obm_medium, X0, tau, [0.0])[0] for tau in grid.nodes[1:]]
    assert trace.phi[1:] == pytest.approx(expected, abs=1e-5)
