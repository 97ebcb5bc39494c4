"""
Run configuration.

A run file is a JSON object with the problem kind, one section named after
it and the optional ``numeric`` and ``fd`` sections:

    {"problem": "stefan", "stefan": {...}, "numeric": {...}}

Physical quantities carry their unit in the key name.
"""

import json
import hashlib
import logging
import numpy as np

from dataclasses import MISSING, dataclass, field, fields
from typing import Optional, Tuple, Union, get_args, get_origin

from oitsolver.errors import ConfigError, TrajectoryError
from oitsolver.fd import FDOracleConfig
from oitsolver.multilayer import MovingLayerGrid
from oitsolver.obm import MovingInterface
from oitsolver.oit import TwoLayerMedium
from oitsolver.mixed import MixedMedium
from oitsolver.spectrum import LayerGrid
from oitsolver.stefan import StefanConfig

logger = logging.getLogger("OIT Solver")

PROBLEMS = ("spectrum", "oit", "mixed", "obm", "multilayer", "stefan", "validate")
VARIANTS = ("displayed", "linearized")
DATA = ("matched_gaussian", "gaussian")
INITIAL = ("sine", "parabola", "gaussian")
ROUTES = ("stepping", "laplace")


def _tuple(values, name):
    try:
        return tuple(float(value) for value in values)
    except TypeError:
        raise ValueError("{} must be a list of numbers, got {}".format(name, values))


def _check_range(values, name):
    if len(values) != 3 or values[0] >= values[1] or int(values[2]) < 2:
        raise ValueError(
            "{} must be [lo, hi, points] with lo < hi and points >= 2, got {}".format(
                name, list(values)
            )
        )


@dataclass(frozen=True)
class NumericControls:
    """Term counts, grid sizes and tolerances shared by the subcommands."""

    terms: Optional[int] = 50
    steps: int = 100
    first_step: float = 0.01
    ratio: float = 1.2
    max_step: float = 15.0
    omega_max: float = 24.0
    panels: int = 64
    order: int = 24
    tolerance: Optional[float] = None

    def __post_init__(self):
        if self.terms is not None and self.terms < 1:
            raise ValueError("terms must be >= 1, got {}".format(self.terms))
        if self.steps < 1:
            raise ValueError("steps must be >= 1, got {}".format(self.steps))
        if self.first_step <= 0 or self.max_step < self.first_step:
            raise ValueError(
                "time steps need 0 < first_step <= max_step, got {} and {}".format(
                    self.first_step, self.max_step
                )
            )
        if self.ratio < 1.0:
            raise ValueError("step ratio must be >= 1, got {}".format(self.ratio))
        if self.omega_max <= 0:
            raise ValueError("omega_max must be positive, got {}".format(self.omega_max))
        if self.panels < 8 or self.panels % 8:
            raise ValueError("panels must be a positive multiple of 8, got {}".format(self.panels))
        if self.order < 2:
            raise ValueError("order must be >= 2, got {}".format(self.order))


@dataclass(frozen=True)
class SpectrumConfig:
    lengths: Tuple[float, ...]
    sigma: Tuple[float, ...]
    y0: float = 0.0
    count: int = 30
    variant: str = "displayed"

    def __post_init__(self):
        object.__setattr__(self, "lengths", _tuple(self.lengths, "lengths"))
        object.__setattr__(self, "sigma", _tuple(self.sigma, "sigma"))
        if len(self.lengths) != len(self.sigma):
            raise ValueError(
                "got {} layer lengths for {} diffusivities".format(
                    len(self.lengths), len(self.sigma)
                )
            )
        if self.count < 1:
            raise ValueError("count must be >= 1, got {}".format(self.count))
        if self.variant not in VARIANTS:
            raise ValueError(
                "unknown variant '{}', expected one of {}".format(self.variant, VARIANTS)
            )

    def grid(self):
        return LayerGrid.from_lengths(self.lengths, self.sigma, self.y0)


@dataclass(frozen=True)
class OITConfig:
    y: float
    sigma_minus: float
    sigma_plus: float
    datum: str = "matched_gaussian"
    centre: float = 0.0
    width: float = 0.5
    x_range: Tuple[float, ...] = (-3.0, 3.0, 61)
    delta_x0: Tuple[float, ...] = ()
    delta_width: float = 0.1
    delta_omega_max: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "x_range", _tuple(self.x_range, "x_range"))
        object.__setattr__(self, "delta_x0", _tuple(self.delta_x0, "delta_x0"))
        _check_range(self.x_range, "x_range")
        if self.datum not in DATA:
            raise ValueError("unknown datum '{}', expected one of {}".format(self.datum, DATA))
        if self.width <= 0 or self.delta_width <= 0:
            raise ValueError("widths must be positive")

    def medium(self):
        return TwoLayerMedium(self.y, self.sigma_minus, self.sigma_plus)

    def x(self):
        lo, hi, points = self.x_range
        return np.linspace(lo, hi, int(points))

    def support(self):
        """Interval outside which the datum is below double precision."""
        if self.datum == "matched_gaussian":
            return (
                self.y - 12.0 * self.sigma_minus * self.width,
                self.y + 12.0 * self.sigma_plus * self.width,
            )
        return self.centre - 12.0 * self.width, self.centre + 12.0 * self.width

    def datum_function(self):
        y, width = self.y, self.width
        sigma_minus, sigma_plus, centre = self.sigma_minus, self.sigma_plus, self.centre

        if self.datum == "matched_gaussian":

            def f(x):
                x = np.asarray(x, dtype=float)
                sigma = np.where(x < y, sigma_minus, sigma_plus)
                return np.exp(-0.5 * ((x - y) / (sigma * width)) ** 2)

            return f

        def f(x):
            return np.exp(-0.5 * ((np.asarray(x, dtype=float) - centre) / width) ** 2)

        return f


@dataclass(frozen=True)
class MixedConfig:
    y: Tuple[float, ...]
    sigma: Tuple[float, ...]
    poles: int = 3
    x0: Tuple[float, ...] = (0.75,)
    width: float = 0.08
    omega_max: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "y", _tuple(self.y, "y"))
        object.__setattr__(self, "sigma", _tuple(self.sigma, "sigma"))
        object.__setattr__(self, "x0", _tuple(self.x0, "x0"))
        if self.poles < 0:
            raise ValueError("poles must be >= 0, got {}".format(self.poles))
        if self.width <= 0 or self.omega_max <= 0:
            raise ValueError("width and omega_max must be positive")
        self.medium()

    def medium(self):
        return MixedMedium(list(self.y), list(self.sigma))


@dataclass(frozen=True)
class OBMConfig:
    """Threshold y(tau) = y + slope tau between diffusivities sigma_minus and sigma_plus."""

    sigma_minus: float
    sigma_plus: float
    x0: float
    y: float = 0.0
    slope: float = 0.0
    tau: float = 1.0
    route: str = "stepping"
    x_range: Tuple[float, ...] = (-6.0, 6.0, 121)
    snapshots: int = 4
    mass_half_width: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "x_range", _tuple(self.x_range, "x_range"))
        _check_range(self.x_range, "x_range")
        if self.tau <= 0:
            raise ValueError("tau must be positive, got {}".format(self.tau))
        if self.route not in ROUTES:
            raise ValueError("unknown route '{}', expected one of {}".format(self.route, ROUTES))
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1, got {}".format(self.snapshots))
        if self.x0 == self.y:
            raise ValueError("the source x0 must not sit on the threshold")
        self.medium()

    def medium(self):
        return TwoLayerMedium(self.y, self.sigma_minus, self.sigma_plus)

    def interface(self):
        return MovingInterface.linear(self.y, self.slope, self.tau)

    def x(self):
        lo, hi, points = self.x_range
        return np.linspace(lo, hi, int(points))

    def times(self):
        return self.tau * np.arange(1, self.snapshots + 1) / self.snapshots


@dataclass(frozen=True)
class MultilayerConfig:
    """Strip boundaries y_j + velocity_j tau, ends included."""

    y: Tuple[float, ...]
    sigma: Tuple[float, ...]
    velocity: Tuple[float, ...] = ()
    tau: float = 0.2
    initial: str = "sine"
    points: int = 41
    snapshots: int = 4

    def __post_init__(self):
        object.__setattr__(self, "y", _tuple(self.y, "y"))
        object.__setattr__(self, "sigma", _tuple(self.sigma, "sigma"))
        velocity = _tuple(self.velocity, "velocity") or (0.0,) * len(self.y)
        object.__setattr__(self, "velocity", velocity)
        if len(self.velocity) != len(self.y):
            raise ValueError(
                "got {} velocities for {} boundaries".format(len(self.velocity), len(self.y))
            )
        if self.tau <= 0:
            raise ValueError("tau must be positive, got {}".format(self.tau))
        if self.initial not in INITIAL:
            raise ValueError(
                "unknown initial datum '{}', expected one of {}".format(self.initial, INITIAL)
            )
        if self.points < 2 or self.snapshots < 1:
            raise ValueError("points must be >= 2 and snapshots >= 1")
        try:
            self.layers()
        except TrajectoryError as error:
            raise ValueError(str(error))

    @property
    def moving(self):
        return any(v != 0.0 for v in self.velocity)

    def layers(self):
        if not self.moving:
            return MovingLayerGrid.static(list(self.y), list(self.sigma), self.tau)
        boundaries = [
            MovingInterface.linear(y, v, self.tau) for y, v in zip(self.y, self.velocity)
        ]
        return MovingLayerGrid(boundaries, list(self.sigma))

    def initial_function(self):
        lo, hi = self.y[0], self.y[-1]
        span = hi - lo

        def f(x):
            u = (np.asarray(x, dtype=float) - lo) / span
            if self.initial == "sine":
                return np.sin(np.pi * u)
            if self.initial == "parabola":
                return 4.0 * u * (1.0 - u)
            return np.exp(-0.5 * ((u - 0.5) / 0.1) ** 2) * np.sin(np.pi * u)

        return f

    def x(self):
        return np.linspace(self.y[0], self.y[-1], self.points)

    def times(self):
        return self.tau * np.arange(1, self.snapshots + 1) / self.snapshots


@dataclass(frozen=True)
class StefanRunConfig:
    physics: StefanConfig
    tau_s: float = 60.0

    def __post_init__(self):
        if self.tau_s <= 0:
            raise ValueError("tau_s must be positive, got {}".format(self.tau_s))


@dataclass(frozen=True)
class ValidationConfig:
    checks: Tuple[str, ...] = ()
    stefan_tau_s: float = 10.0
    slow: bool = False

    def __post_init__(self):
        object.__setattr__(self, "checks", tuple(str(name) for name in self.checks))
        if self.stefan_tau_s <= 0:
            raise ValueError("stefan_tau_s must be positive")


STEFAN_KEYS = {
    "y_minus_mm": "y_minus",
    "y_plus_mm": "y_plus",
    "T_s_K": "T_s",
    "T_m_K": "T_m",
    "T_l_K": "T_l",
    "kappa_I_mm2_per_s": "kappa_I",
    "kappa_W_mm2_per_s": "kappa_W",
    "rho_I_kg_per_m3": "rho_I",
    "rho_W_kg_per_m3": "rho_W",
    "L_K_m3_per_kg": "L",
    "melting": "melting",
    "C_a_J_per_kg_K": "C_a",
}

BLOCKS = {
    "spectrum": SpectrumConfig,
    "oit": OITConfig,
    "mixed": MixedConfig,
    "obm": OBMConfig,
    "multilayer": MultilayerConfig,
    "validate": ValidationConfig,
}


@dataclass(frozen=True)
class RunConfig:
    problem: str
    block: object
    numeric: NumericControls = field(default_factory=NumericControls)
    fd: Optional[FDOracleConfig] = None
    document: dict = field(default_factory=dict)

    @property
    def digest(self):
        """sha256 of the canonical JSON document."""
        canonical = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _matches(value, annotation):
    """JSON value against a field annotation; unknown annotations pass."""
    origin, args = get_origin(annotation), get_args(annotation)
    if origin is Union:
        return any(_matches(value, arg) for arg in args)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            return False
        inner = args[0] if args else None
        return inner is None or all(_matches(item, inner) for item in value)

    if annotation is type(None):
        return value is None
    if annotation is bool:
        return isinstance(value, bool)
    if annotation is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if annotation is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if annotation is str:
        return isinstance(value, str)
    return True


def _describe(annotation):
    if isinstance(annotation, type):
        return annotation.__name__
    return str(annotation).replace("typing.", "")


def _build(cls, section, data, keys=None):
    if not isinstance(data, dict):
        raise ConfigError("section '{}' must be a JSON object".format(section))

    keys = keys or {item.name: item.name for item in fields(cls)}
    required = {
        item.name
        for item in fields(cls)
        if item.default is MISSING and item.default_factory is MISSING
    }

    for key in data:
        if key not in keys:
            raise ConfigError("unknown key '{}.{}'".format(section, key))
    for key, name in keys.items():
        if name in required and key not in data:
            raise ConfigError("missing key '{}.{}'".format(section, key))

    annotations = {item.name: item.type for item in fields(cls)}
    for key, value in data.items():
        annotation = annotations[keys[key]]
        if not _matches(value, annotation):
            raise ConfigError(
                "key '{}.{}' must be {}, got {!r}".format(
                    section, key, _describe(annotation), value
                )
            )

    try:
        return cls(**{keys[key]: value for key, value in data.items()})
    except (TypeError, ValueError) as error:
        raise ConfigError("section '{}': {}".format(section, error))


def _stefan(data):
    if not isinstance(data, dict):
        raise ConfigError("section 'stefan' must be a JSON object")
    data = dict(data)
    tau_s = data.pop("tau_s", 60.0)
    if not _matches(tau_s, float):
        raise ConfigError("key 'stefan.tau_s' must be float, got {!r}".format(tau_s))
    physics = _build(StefanConfig, "stefan", data, STEFAN_KEYS)
    try:
        return StefanRunConfig(physics, float(tau_s))
    except (TypeError, ValueError) as error:
        raise ConfigError("section 'stefan': {}".format(error))


def parse_config(document, problem=None):
    """Validate a decoded JSON document and build its RunConfig."""
    if not isinstance(document, dict):
        raise ConfigError("a run file must hold a JSON object")
    if "problem" not in document:
        raise ConfigError("missing key 'problem'")

    kind = document["problem"]
    if kind not in PROBLEMS:
        raise ConfigError("unknown problem '{}', expected one of {}".format(kind, PROBLEMS))
    if problem is not None and kind != problem:
        raise ConfigError(
            "the file describes a '{}' run, not '{}'".format(kind, problem)
        )

    for key in document:
        if key not in ("problem", kind, "numeric", "fd"):
            raise ConfigError("unknown key '{}'".format(key))

    if kind == "stefan":
        if kind not in document:
            raise ConfigError("missing key 'stefan'")
        block = _stefan(document[kind])
    elif kind == "validate":
        block = _build(ValidationConfig, kind, document.get(kind, {}))
    else:
        if kind not in document:
            raise ConfigError("missing key '{}'".format(kind))
        block = _build(BLOCKS[kind], kind, document[kind])

    numeric = _build(NumericControls, "numeric", document.get("numeric", {}))
    fd = None
    if "fd" in document:
        fd = _build(FDOracleConfig, "fd", document["fd"])

    return RunConfig(kind, block, numeric, fd, document)


def load_config(path, problem=None):
    """Read a JSON run file; problem, when given, must match the file."""
    try:
        with open(path, "r") as handle:
            document = json.load(handle)
    except OSError as error:
        raise ConfigError("cannot read {}: {}".format(path, error))
    except json.JSONDecodeError as error:
        raise ConfigError("{} is not valid JSON: {}".format(path, error))

    config = parse_config(document, problem)
    logger.debug("loaded {} ({} run)".format(path, config.problem))
    return config
