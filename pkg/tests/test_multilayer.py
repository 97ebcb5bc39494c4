import math
import pytest
import numpy as np

from oitsolver.errors import TrajectoryError
from oitsolver.multilayer import (
    FrozenBasis,
    FrozenSpectrum,
    InterfaceVectors,
    MovingLayerGrid,
    StripProblem,
    boundary_terms,
    image_baru,
    interface_volterra,
    series_energy,
    solution_frame,
    solution_series,
    truncation_terms,
)
from oitsolver.obm import MovingInterface, constant_boundary_density
from oitsolver.spectrum import find_eigenvalues, make_basis, theta_eval
from oitsolver.volterra import TimeGrid


def _wobbling(centre, amplitude, horizon):
    return MovingInterface(
        lambda tau: centre + amplitude * np.sin(2 * math.pi * np.asarray(tau)),
        lambda tau: 2 * math.pi * amplitude * np.cos(2 * math.pi * np.asarray(tau)),
        horizon,
    )


def _two_modes(x):
    x = np.asarray(x)
    return np.sin(math.pi * x) + 0.5 * np.sin(3 * math.pi * x)


def _two_modes_at(sigma, tau, x):
    decay = math.pi**2 * sigma**2 * tau
    return np.exp(-decay) * np.sin(math.pi * x) + 0.5 * np.exp(-9 * decay) * np.sin(
        3 * math.pi * x
    )


def _two_modes_flux(sigma, tau, x):
    decay = math.pi**2 * sigma**2 * tau
    return sigma**2 * math.pi * (
        np.exp(-decay) * np.cos(math.pi * x)
        + 1.5 * np.exp(-9 * decay) * np.cos(3 * math.pi * x)
    )


def _zero_traces(layers, grid):
    shape = (grid.size, layers.n_layers + 1)
    return InterfaceVectors(
        grid, layers.positions(grid.nodes), np.zeros(shape), np.zeros(shape)
    )


def test_crossing_boundaries_are_rejected():
    with pytest.raises(TrajectoryError):
        MovingLayerGrid(
            [
                MovingInterface.constant(0.0, 1.0),
                MovingInterface.linear(0.5, 1.0, 1.0),
                MovingInterface.constant(1.0, 1.0),
            ],
            [1.0, 1.0],
        )
    with pytest.raises(ValueError):
        MovingLayerGrid.static([0.0, 1.0], [1.0, 2.0], 1.0)


def test_grid_beyond_the_boundary_horizon_is_rejected():
    layers = MovingLayerGrid.static([0.0, 0.5, 1.0], [1.0, 0.5], 0.5)
    problem = StripProblem(layers, _two_modes)
    with pytest.raises(ValueError):
        interface_volterra(problem, 5, TimeGrid.uniform(1.0, 10))


def test_truncation_rule():
    layers = MovingLayerGrid.static([0.0, 1.0], [1.0], 1.0)
    assert truncation_terms(layers.frozen(0.0), 0.01) == 17
    assert truncation_terms(layers.frozen(0.0), 1e-8) == 200


def test_eigenfunction_image_decays():
    layers = MovingLayerGrid.static([0.0, 0.6, 1.5], [1.0, 0.5], 1.0)
    grid = layers.frozen(0.0)
    lam = find_eigenvalues(grid, 2)[1]
    basis = make_basis(grid, lam)

    problem = StripProblem(layers, lambda x: theta_eval(basis, grid, x))
    traces = _zero_traces(layers, TimeGrid.uniform(1.0, 10))

    for tau in (0.0, 0.3, 0.75):
        assert image_baru(problem, traces, lam, tau) == pytest.approx(
            math.exp(-(lam**2) * tau) * basis.norm, rel=1e-10
        )


def test_image_obeys_its_ode():
    layers = MovingLayerGrid.static([0.0, 0.5, 1.0], [1.0, 0.5], 1.0)
    problem = StripProblem(layers, lambda x: np.asarray(x) * (1 - np.asarray(x)))
    grid = TimeGrid.uniform(1.0, 2000)
    tau = grid.nodes

    Phi = np.stack([np.cos(tau), 0.3 * np.sin(2 * tau), 1 + tau**2], axis=1)
    phi = np.stack([np.zeros_like(tau), 0.2 * tau, np.zeros_like(tau)], axis=1)
    traces = InterfaceVectors(grid, layers.positions(tau), Phi, phi)

    lam, h, k = 2.3, grid.steps[0], 1000
    middle = image_baru(problem, traces, lam, tau[k])
    slope = (
        image_baru(problem, traces, lam, tau[k + 1])
        - image_baru(problem, traces, lam, tau[k - 1])
    ) / (2 * h)

    basis = FrozenBasis.from_roots(layers.frozen(tau[k]), [lam], [False])
    forcing = boundary_terms(
        basis,
        layers.positions(tau[k : k + 1]),
        layers.slopes(tau[k : k + 1]),
        Phi[k : k + 1],
        phi[k : k + 1],
    )[0, 0]

    assert slope == pytest.approx(-(lam**2) * middle + forcing, abs=1e-4)


def test_image_rejects_times_past_the_traces():
    layers = MovingLayerGrid.static([0.0, 1.0], [1.0], 2.0)
    traces = _zero_traces(layers, TimeGrid.uniform(1.0, 4))
    with pytest.raises(ValueError):
        image_baru(StripProblem(layers, _two_modes), traces, 1.0, 1.5)


def test_static_flat_strip_is_the_sine_series():
    sigma = 0.7
    layers = MovingLayerGrid.static([0.0, 0.35, 1.0], [sigma, sigma], 0.2)
    problem = StripProblem(layers, _two_modes)
    grid = TimeGrid.uniform(0.2, 20)
    traces = interface_volterra(problem, 12, grid)

    x = np.linspace(0.0, 1.0, 41)
    for tau in (0.13, 0.2):
        u, tail = solution_series(problem, traces, 12, tau, x)
        assert u == pytest.approx(_two_modes_at(sigma, tau, x), abs=1e-8)
        assert tail < 1e-8
        assert abs(u[0]) < 1e-10 and abs(u[-1]) < 1e-10

    nodes = grid.nodes
    assert traces.phi[:, 1] == pytest.approx(_two_modes_at(sigma, nodes, 0.35), abs=1e-8)
    for j, y in enumerate((0.0, 0.35, 1.0)):
        assert traces.Phi[:, j] == pytest.approx(
            _two_modes_flux(sigma, nodes, y), abs=1e-8
        )


def test_zero_data_gives_zero_traces():
    layers = MovingLayerGrid(
        [
            MovingInterface.constant(0.0, 0.5),
            _wobbling(0.5, 0.1, 0.5),
            MovingInterface.constant(1.0, 0.5),
        ],
        [1.0, 0.4],
    )
    problem = StripProblem(layers, np.zeros_like)
    traces = interface_volterra(problem, 10, TimeGrid.uniform(0.5, 25))

    assert np.all(traces.Phi == 0.0)
    assert np.all(traces.phi == 0.0)


def test_flat_strip_hides_a_moving_interface():
    layers = MovingLayerGrid(
        [
            MovingInterface.constant(0.0, 0.3),
            _wobbling(0.5, 0.1, 0.3),
            MovingInterface.constant(1.0, 0.3),
        ],
        [1.0, 1.0],
    )
    problem = StripProblem(layers, lambda x: np.sin(math.pi * np.asarray(x)))
    grid = TimeGrid.uniform(0.3, 30)
    traces = interface_volterra(problem, None, grid)

    tau = grid.nodes
    decay = np.exp(-(math.pi**2) * tau)
    y = traces.y[:, 1]

    assert traces.phi[:, 1] == pytest.approx(decay * np.sin(math.pi * y), abs=1e-8)
    assert traces.Phi[:, 1] == pytest.approx(
        math.pi * decay * np.cos(math.pi * y), abs=1e-8
    )
    assert traces.Phi[:, 0] == pytest.approx(math.pi * decay, abs=1e-8)
    assert traces.Phi[:, 2] == pytest.approx(-math.pi * decay, abs=1e-8)

    u, _ = solution_series(problem, traces, 17, 0.25, np.linspace(0, 1, 11))
    assert u == pytest.approx(
        math.exp(-(math.pi**2) * 0.25) * np.sin(math.pi * np.linspace(0, 1, 11)),
        abs=1e-8,
    )


def test_frozen_spectrum_tracks_moving_boundaries():
    layers = MovingLayerGrid(
        [
            MovingInterface.constant(0.0, 1.0),
            _wobbling(0.6, 0.15, 1.0),
            MovingInterface.linear(1.5, 0.2, 1.0),
        ],
        [1.0, 0.5],
    )
    spectrum = FrozenSpectrum(layers, 8, guard=4)

    for tau in np.linspace(0.0, 1.0, 21):
        basis = spectrum(tau)
        expected = find_eigenvalues(layers.frozen(tau), 8)
        assert basis.lam == pytest.approx(expected, rel=1e-10)

    assert spectrum.rescans >= 4
    assert spectrum.rescans < 21


def test_frozen_spectrum_caches_static_grids():
    layers = MovingLayerGrid.static([0.0, 0.6, 1.5], [1.0, 0.5], 1.0)
    spectrum = FrozenSpectrum(layers, 5)
    assert spectrum(0.1) is spectrum(0.9)
    assert spectrum.rescans == 1


def test_energy_decays_with_a_moving_interface():
    layers = MovingLayerGrid(
        [
            MovingInterface.constant(0.0, 0.2),
            MovingInterface.linear(0.4, 0.1, 0.2),
            MovingInterface.constant(1.0, 0.2),
        ],
        [1.0, 0.6],
    )
    problem = StripProblem(layers, lambda x: np.sin(math.pi * np.asarray(x)))
    grid = TimeGrid.uniform(0.2, 20)
    traces = interface_volterra(problem, 30, grid)

    energy = np.array(
        [series_energy(problem, traces, 30, tau) for tau in grid.nodes[::2]]
    )
    assert np.all(energy > 0)
    assert np.all(energy[1:] <= energy[:-1] * (1 + 1e-6))


def test_short_time_two_layer_strip_matches_the_free_kernel(obm_medium):
    # the ends at +-8 are invisible before tau = 0.25
    layers = MovingLayerGrid.static([-8.0, 0.0, 8.0], [1.0, 2.0], 0.2)
    problem = StripProblem(
        layers, lambda x: constant_boundary_density(obm_medium, 0.5, 0.05, x)
    )
    traces = interface_volterra(problem, 80, TimeGrid.uniform(0.2, 40))

    x = np.linspace(-3.0, 4.0, 29)
    u, _ = solution_series(problem, traces, 80, 0.2, x)
    assert u == pytest.approx(
        constant_boundary_density(obm_medium, 0.5, 0.25, x), abs=1e-3
    )

    at_interface = constant_boundary_density(obm_medium, 0.5, 0.25, [0.0])[0]
    assert traces.phi[-1, 1] == pytest.approx(at_interface, abs=1e-3)


def test_frames_have_the_output_columns():
    layers = MovingLayerGrid.static([0.0, 0.5, 1.0], [1.0, 1.0], 0.1)
    problem = StripProblem(layers, _two_modes)
    traces = interface_volterra(problem, 6, TimeGrid.uniform(0.1, 4))

    frame = traces.to_frame()
    assert list(frame.columns) == ["tau", "interface", "phi", "Phi"]
    assert len(frame) == 5 * 3

    solution = solution_frame(problem, traces, 6, [0.05, 0.1], np.linspace(0, 1, 5))
    assert list(solution.columns) == ["tau", "x", "u"]
    assert len(solution) == 10
