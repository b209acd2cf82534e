import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from utils.config import THERMAL_TAIL_TOLERANCE, TRUNCATION_N_IONS_MAX
from utils.errors import ConfigError


class Axis(Enum):
    """Principal axes of a beam's spot ellipse. X is the tight axis, Z the loose one."""
    X = "x"
    Z = "z"


class Direction(Enum):
    """Motional mode families, classified by their dominant beam-frame projection."""
    AXIAL = "axial"  # beam x
    HORIZONTAL = "horizontal"  # beam y, along propagation
    VERTICAL = "vertical"  # beam z

    @property
    def frame_axis(self) -> str:
        return {"axial": "x", "horizontal": "y", "vertical": "z"}[self.value]


class Geometry(Enum):
    CO_PROPAGATING = "co"
    COUNTER_PROPAGATING = "counter"


class FunctionId(Enum):
    """Spatial factors of the field product: amplitude (A) and phase (B) series."""
    A1 = "A1"
    A2 = "A2"
    B0 = "B0"
    B1 = "B1"
    B2 = "B2"


class PhaseErrorModel(Enum):
    PROGRESSIVE = "progressive"
    CONSTANT = "constant"


@dataclass(frozen=True)
class BeamGeometry:
    """One Raman beam with simple astigmatism, all lengths in metres.

    The beam propagates along the shared lab y axis with sign propagation_sign;
    the tight principal axis is x and the loose one z.
    """
    power: float
    wavelength: float
    waist_x: float
    waist_z: float
    focal_y_x: float = 0.0
    focal_y_z: float = 0.0
    phase0: float = 0.0
    propagation_sign: int = 1

    def __post_init__(self):
        for name in ("power", "wavelength", "waist_x", "waist_z"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"must be positive and finite, got {value!r}", name)
        if self.propagation_sign not in (1, -1):
            raise ConfigError(f"must be +1 or -1, got {self.propagation_sign!r}", "propagation_sign")

    @property
    def wavevector(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def waist(self, axis: Axis) -> float:
        return self.waist_x if axis is Axis.X else self.waist_z

    def focal_y(self, axis: Axis) -> float:
        return self.focal_y_x if axis is Axis.X else self.focal_y_z

    def rayleigh_range(self, axis: Axis) -> float:
        return math.pi * self.waist(axis) ** 2 / self.wavelength


@dataclass(frozen=True)
class BeamFramePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ConfigError("beam-frame coordinates must be finite")


@dataclass(frozen=True, eq=False)
class ChainModes:
    """Normal modes of a single-species ion chain.

    mode_matrix rows are ordered (x ions, y ions, z ions) in the beam frame and
    columns are modes; columns are orthonormal so the inverse is the transpose.
    Modes are ordered axial, horizontal, vertical with ascending frequency
    inside each family.
    """
    n_ions: int
    mass: float
    frequencies: np.ndarray
    mode_matrix: np.ndarray
    directions: Tuple[Direction, ...]
    positions: Optional[np.ndarray] = None  # equilibrium along the chain axis, metres

    def __post_init__(self):
        n_modes = 3 * self.n_ions
        if self.n_ions < 1:
            raise ConfigError("chain needs at least one ion", "trap.ions")
        if self.mass <= 0:
            raise ConfigError("ion mass must be positive", "trap.species")
        if self.frequencies.shape != (n_modes,) or self.mode_matrix.shape != (n_modes, n_modes):
            raise ConfigError(f"expected {n_modes} modes for {self.n_ions} ions")
        if np.any(self.frequencies <= 0):
            raise ConfigError("mode frequencies must be positive", "trap")
        if len(self.directions) != n_modes:
            raise ConfigError("one direction label per mode is required", "trap")

    @property
    def n_modes(self) -> int:
        return 3 * self.n_ions

    def projection(self, mode: int, axis: str, ion: int) -> float:
        """Element ν_p^α of mode p along beam-frame axis α ('x', 'y', 'z') at one ion."""
        row = "xyz".index(axis) * self.n_ions + ion
        return float(self.mode_matrix[row, mode])

    def projections(self, axis: str, ion: int) -> np.ndarray:
        row = "xyz".index(axis) * self.n_ions + ion
        return np.array(self.mode_matrix[row, :], dtype=float)

    def modes_in(self, direction: Direction) -> List[int]:
        return [p for p, d in enumerate(self.directions) if d is direction]


@dataclass(frozen=True)
class AlignmentError:
    """Bound ε on off-dominant mode projections, scaled by √N."""
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1), got {self.epsilon!r}", "alignment")


@dataclass(frozen=True, eq=False)
class CouplingParams:
    """Dimensionless offsets and per-mode c-coefficients for both beams.

    Arrays are indexed [beam] or [beam, axis] with axis 0 = x, 1 = z, and a
    trailing mode index for the c-coefficients.
    """
    gamma0: np.ndarray  # (2, 2)
    lambda0: np.ndarray  # (2, 2)
    c_beta: np.ndarray  # (2, n_modes)
    c_gamma: np.ndarray  # (2, 2, n_modes)
    c_lambda: np.ndarray  # (2, 2, n_modes)
    y0: Tuple[float, float] = (0.0, 0.0)  # s_b·y⁽⁰⁾ per beam

    @property
    def n_modes(self) -> int:
        return self.c_beta.shape[1]


@dataclass(frozen=True)
class EffectiveGate:
    omega0: float
    psi0: float
    eta: float
    xi: float
    duration: float
    detuning: float = 0.0
    geometry: Geometry = Geometry.CO_PROPAGATING

    def __post_init__(self):
        if self.omega0 < 0:
            raise ConfigError("Rabi rate must be non-negative", "omega0")
        if self.duration <= 0:
            raise ConfigError("gate duration must be positive", "duration")
        if self.eta < 0:
            raise ConfigError("eta must be non-negative", "eta")

    @property
    def pulse_area(self) -> float:
        """Ω₀t of the pulse."""
        return self.omega0 * self.duration


@dataclass(frozen=True)
class ThermalState:
    """Thermal occupation of one mode, truncated at cutoff."""
    nbar: float
    cutoff: int

    def __post_init__(self):
        if self.nbar < 0 or not math.isfinite(self.nbar):
            raise ConfigError(f"mean phonon number must be non-negative, got {self.nbar!r}", "nbar")
        if self.cutoff < 0:
            raise ConfigError("cutoff must be non-negative", "cutoff")

    @classmethod
    def with_tail(cls, nbar: float, tolerance: float = THERMAL_TAIL_TOLERANCE) -> "ThermalState":
        """Smallest cutoff whose neglected tail weight is below tolerance."""
        if not 0 < tolerance < 1:
            raise ConfigError(f"tail tolerance must lie in (0, 1), got {tolerance!r}", "tolerance")
        if nbar == 0:
            return cls(0.0, 0)
        ratio = nbar / (1.0 + nbar)
        # tail beyond n_max is ratio**(n_max + 1)
        cutoff = max(0, math.ceil(math.log(tolerance) / math.log(ratio)) - 1)
        return cls(float(nbar), cutoff)

    @property
    def tail(self) -> float:
        if self.nbar == 0:
            return 0.0
        return (self.nbar / (1.0 + self.nbar)) ** (self.cutoff + 1)

    def weights(self) -> np.ndarray:
        n = np.arange(self.cutoff + 1, dtype=float)
        if self.nbar == 0:
            return (n == 0).astype(float)
        # log domain keeps large n̄ finite
        log_w = n * math.log(self.nbar / (1.0 + self.nbar)) - math.log1p(self.nbar)
        return np.exp(log_w)


@dataclass(frozen=True)
class Pulse:
    """Rotation by theta about an equatorial axis at phase phi.

    gate is the index of the logical gate the pulse belongs to; physical
    sub-pulses of one logical gate share it.
    """
    theta: float
    phi: float
    gate: int = 0

    def __post_init__(self):
        if self.theta < 0:
            raise ConfigError(f"rotation angle must be non-negative, got {self.theta!r}", "theta")


@dataclass(frozen=True)
class PulseSequence:
    name: str
    pulses: Tuple[Pulse, ...]
    phase_error_model: PhaseErrorModel = PhaseErrorModel.PROGRESSIVE

    def __post_init__(self):
        if not self.pulses:
            raise ConfigError("a pulse sequence needs at least one pulse", "sequence")

    @property
    def gate_count(self) -> int:
        return len({p.gate for p in self.pulses})


@dataclass(frozen=True)
class SeriesTerm:
    """coefficient · p̂₁^power_p · q̂₁^power_q"""
    coefficient: complex
    power_p: int
    power_q: int = 0


@dataclass(frozen=True)
class FockSpace:
    cutoff: int
    modes: int = 1

    def __post_init__(self):
        if self.cutoff < 1:
            raise ConfigError(f"Fock cutoff must be at least 1, got {self.cutoff!r}", "cutoff")
        if self.modes < 1:
            raise ConfigError("at least one mode is required", "modes")

    @property
    def dimension(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class TruncationScenario:
    """Per-direction Fock cutoffs for one heating assumption.

    With dominant set, the strongest-coupled mode of each direction gets the
    cutoff multiplied by the ion count and the other modes keep the base cutoff.
    """
    name: str
    cutoffs: Dict[Direction, int]
    dominant: bool = False


@dataclass(frozen=True)
class TruncationPolicy:
    threshold: float
    scenarios: Tuple[TruncationScenario, ...]
    n_ions_max: int = TRUNCATION_N_IONS_MAX

    def __post_init__(self):
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in [0, 1), got {self.threshold!r}", "truncation.threshold")
        if not self.scenarios:
            raise ConfigError("at least one truncation scenario is required", "truncation.scenarios")
        if self.n_ions_max < 1:
            raise ConfigError(f"n_ions_max must be at least 1, got {self.n_ions_max!r}", "truncation.n_ions_max")


@dataclass(frozen=True)
class HeatingModel:
    nbar0: float
    rate: float  # quanta per second

    def __post_init__(self):
        if self.nbar0 < 0:
            raise ConfigError("initial mean phonon number must be non-negative", "run.nbar0")
        if self.rate < 0:
            raise ConfigError("heating rate must be non-negative", "run.heating_rate_per_s")

    def nbar(self, delay):
        return self.nbar0 + self.rate * np.asarray(delay, dtype=float)


@dataclass
class FitResult:
    rate: float
    offset: float
    residual_norm: float
    iterations: int
    covariance: List[List[float]]
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "heating_rate_per_s": self.rate,
            "p_up_offset": self.offset,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "covariance": self.covariance,
            "converged": self.converged,
        }


@dataclass
class PowerLawFit:
    """ṅ = prefactor · ω^(−exponent)"""
    prefactor: float
    exponent: float
    residual_norm: float

    def to_dict(self) -> dict:
        return {"prefactor": self.prefactor, "exponent": self.exponent, "residual_norm": self.residual_norm}


@dataclass
class CurveOutput:
    variable: str
    values: List[float]
    series: Dict[str, List[float]] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for name, column in self.series.items():
            if len(column) != len(self.values):
                raise ValueError(f"series {name!r} has {len(column)} points, expected {len(self.values)}")
