"""
Data models for the nuclear forward scattering switching simulator.
All models use Pydantic for validation and static typing.
"""

import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.constants import physical_constants

from config import settings
from exceptions import NFSInputError

Vector3 = Tuple[float, float, float]

HBAR_EV_S = physical_constants["reduced Planck constant in eV s"][0]


def _unit(v, name: str, tol: float = 1e-12) -> Vector3:
    norm = math.sqrt(sum(x * x for x in v))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"{name} must be a unit vector (norm={norm:.15g})")
    return tuple(float(x) for x in v)


class Polarization(str, Enum):
    """Scattered-field polarization components (beam along y)"""
    SIGMA = "sigma"  # along x
    PI = "pi"  # along z


class PolarizationTarget(str, Enum):
    """What a switching instant should achieve"""
    SIGMA_ONLY = "sigma"
    PI_ONLY = "pi"
    FULL_SUPPRESSION = "suppression"


# Angular momentum
class SpinHalfInt(BaseModel):
    """Spin stored as twice its value so half-integers stay exact"""
    model_config = ConfigDict(frozen=True)

    twice_value: int = Field(ge=0)

    @property
    def value(self) -> float:
        return self.twice_value / 2

    def projections(self) -> List[int]:
        """Doubled projections 2m from +2I down to -2I"""
        return list(range(self.twice_value, -self.twice_value - 1, -2))

    def check_projection(self, twice_m: int) -> None:
        if abs(twice_m) > self.twice_value or (self.twice_value - twice_m) % 2:
            raise NFSInputError(f"projection {twice_m}/2 invalid for spin {self.twice_value}/2")


class LineOverride(BaseModel):
    """One externally supplied hyperfine frequency"""
    twice_m_g: int
    twice_m_e: int
    omega_rad_s: float


class HyperfineConfig(BaseModel):
    """Zeeman hyperfine parameters, or six explicit line frequencies"""
    field_magnitude_tesla: float = Field(ge=0.0)
    g_factor_ground: float
    g_factor_excited: float
    override_frequencies: Optional[List[LineOverride]] = None


class TransitionLine(BaseModel):
    """One M1 line l = (m_g, m_e) with its hyperfine frequency"""
    model_config = ConfigDict(frozen=True)

    twice_m_g: int
    twice_m_e: int
    omega_hf: float

    @property
    def m_g(self) -> float:
        return self.twice_m_g / 2

    @property
    def m_e(self) -> float:
        return self.twice_m_e / 2

    @property
    def q(self) -> int:
        return (self.twice_m_e - self.twice_m_g) // 2

    @property
    def key(self) -> Tuple[int, int]:
        return (self.twice_m_g, self.twice_m_e)

    @model_validator(mode="after")
    def _check_q(self):
        if abs(self.twice_m_e - self.twice_m_g) > 2:
            raise ValueError("transition lines need |m_e - m_g| <= 1")
        return self


class LevelScheme(BaseModel):
    """Ground/excited spins and the six allowed lines"""
    model_config = ConfigDict(frozen=True)

    spin_ground: SpinHalfInt
    spin_excited: SpinHalfInt
    lines: Tuple[TransitionLine, ...]

    @property
    def omega0(self) -> float:
        """|Omega| of the Delta m = 0 lines"""
        return abs(self.line(1, 1).omega_hf)

    @property
    def omega1(self) -> float:
        """|Omega| of the (m_g=-1/2, m_e=+3/2) coherence"""
        return abs(self.omega(-1, 3))

    def line(self, twice_m_g: int, twice_m_e: int) -> TransitionLine:
        for line in self.lines:
            if line.key == (twice_m_g, twice_m_e):
                return line
        raise NFSInputError(f"no line ({twice_m_g}/2 -> {twice_m_e}/2)")

    def coherences(self) -> List[Tuple[int, int]]:
        """Every (2m_g, 2m_e) pair, including the |dm| > 1 ones that carry no current"""
        return [(mg, me) for mg in self.spin_ground.projections() for me in self.spin_excited.projections()]

    def omega(self, twice_m_g: int, twice_m_e: int) -> float:
        """Frequency of any ground/excited coherence, built from level differences of the six lines"""
        if abs(twice_m_e - twice_m_g) <= 2:
            return self.line(twice_m_g, twice_m_e).omega_hf
        # Omega(g, e) = eps_e(e) - eps_g(g); route through allowed lines
        step = 2 if twice_m_e > twice_m_g else -2
        mid_e = twice_m_g + step
        return (self.omega(twice_m_g, mid_e)
                + self.omega(twice_m_e - step, twice_m_e)
                - self.omega(twice_m_e - step, mid_e))


class NuclearConstants(BaseModel):
    """Constants of the Moessbauer transition"""
    model_config = ConfigDict(frozen=True)

    E0_ev: float = Field(default=settings.TRANSITION_ENERGY_EV, gt=0)
    tau_s: float = Field(default=settings.LIFETIME_S, gt=0)
    ic_ratio: float = Field(default=settings.IC_RATIO, ge=0)

    @property
    def gamma0_ev(self) -> float:
        return HBAR_EV_S / self.tau_s

    @property
    def gamma_gamma_ev(self) -> float:
        return self.gamma0_ev / (1.0 + self.ic_ratio)

    @property
    def decay_rate(self) -> float:
        """Gamma0 / hbar in 1/s"""
        return 1.0 / self.tau_s


# Geometry and currents
class Geometry(BaseModel):
    """Beam direction, incident polarization and initial quantization axis (lab frame)"""
    model_config = ConfigDict(frozen=True)

    k_direction: Vector3 = (0.0, 1.0, 0.0)
    k_magnitude: float = Field(default=7.304e10, gt=0)  # 1/m at 14.413 keV
    incident_polarization: Vector3 = (1.0, 0.0, 0.0)
    quantization_axis: Vector3 = (0.0, 0.0, 1.0)

    @field_validator("k_direction", "quantization_axis")
    @classmethod
    def _unit_direction(cls, v, info):
        return _unit(v, info.field_name)

    @field_validator("incident_polarization")
    @classmethod
    def _polarization(cls, v):
        norm = math.sqrt(sum(x * x for x in v))
        if norm > 1e-15:
            _unit(v, "incident_polarization")
        return tuple(float(x) for x in v)

    @model_validator(mode="after")
    def _transverse(self):
        dot = sum(a * b for a, b in zip(self.k_direction, self.incident_polarization))
        if abs(dot) > 1e-12:
            raise ValueError("incident polarization must be perpendicular to k")
        return self


class CurrentMatrixElement(BaseModel):
    """j_l(k) in the lab frame"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    line: TransitionLine
    j_vec: np.ndarray
    prefactor: float


class SampleConfig(BaseModel):
    """Resonant sample; the effective thickness alone fixes the coupling K*L"""
    model_config = ConfigDict(frozen=True)

    xi: float = Field(default=settings.DEFAULT_XI, gt=0)
    thickness_m: Optional[float] = Field(default=None, gt=0)


class TimeGrid(BaseModel):
    """Uniform sampling of [t_start, t_end]"""
    model_config = ConfigDict(frozen=True)

    t_start: float = Field(default=0.0, ge=0)
    t_end: float = settings.GRID_T_END_S
    dt: float = Field(default=settings.GRID_DT_S, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        return self

    @property
    def samples(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt)) + 1

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples)


# Switching
class RotationSpec(BaseModel):
    """Euler angles (z-y-z) of a hyperfine-field rotation, radians in (-pi, pi]"""
    model_config = ConfigDict(frozen=True)

    euler_alpha: float = 0.0
    euler_beta: float = 0.0
    euler_gamma: float = 0.0

    @field_validator("euler_alpha", "euler_beta", "euler_gamma")
    @classmethod
    def _wrap(cls, v: float) -> float:
        w = math.remainder(v, 2 * math.pi)
        return math.pi if w <= -math.pi else w

    @classmethod
    def from_degrees(cls, alpha: float, beta: float, gamma: float) -> "RotationSpec":
        return cls(euler_alpha=math.radians(alpha), euler_beta=math.radians(beta),
                   euler_gamma=math.radians(gamma))


class SwitchingEvent(BaseModel):
    """
    One instantaneous switch.

    rotation acts on the excitation coefficients in the current basis. field_axis, when
    set, is the lab direction the field points to afterwards and the new frame is the
    standard frame of that direction; otherwise the frame turns by rotation relative to
    the current one.
    """
    model_config = ConfigDict(frozen=True)

    time: float = Field(gt=0)
    rotation: RotationSpec
    field_axis: Optional[Vector3] = None

    @field_validator("field_axis")
    @classmethod
    def _unit_axis(cls, v):
        return None if v is None else _unit(v, "field_axis")


class SwitchSequence(BaseModel):
    """Ordered, instantaneous field rotations"""
    model_config = ConfigDict(frozen=True)

    events: Tuple[SwitchingEvent, ...] = ()

    @field_validator("events")
    @classmethod
    def _increasing(cls, events):
        times = [e.time for e in events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("switching times must be strictly increasing")
        return tuple(events)

    @property
    def times(self) -> List[float]:
        return [e.time for e in self.events]


class SwitchDesign(BaseModel):
    """A designed switching event and how well it meets its target"""
    model_config = ConfigDict(frozen=True)

    event: SwitchingEvent
    target: PolarizationTarget
    residual: float
    complement: Optional[float] = None


class AmplitudeSet(BaseModel):
    """
    Excitation state on one inter-switch interval.

    coefficients: absolute-time excitation coefficients c~ for every (m_g, m_e)
    coherence (order of LevelScheme.coherences()); the coefficient at time t is
    c~ * exp(-(i Omega + Gamma0/2hbar) t).
    amplitudes: the six lab-frame vector amplitudes A_l = K j_l c~_l keyed by (2m_g, 2m_e).
    frame: columns are the current quantization frame axes; column 2 is the field axis.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coefficients: np.ndarray
    amplitudes: Dict[Tuple[int, int], np.ndarray]
    valid_from: float
    valid_to: float = math.inf
    frame: np.ndarray
    history: Tuple[SwitchingEvent, ...] = ()

    @model_validator(mode="after")
    def _six(self):
        if len(self.amplitudes) != 6:
            raise ValueError("an amplitude set holds exactly six lines")
        return self

    @property
    def quantization_axis(self) -> np.ndarray:
        return self.frame[:, 2]


class FieldRecord(BaseModel):
    """Scattered field at the sample exit, normalized to the unperturbed first-order E1(0+)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    e_sigma: np.ndarray
    e_pi: np.ndarray
    orders: Optional[Tuple[np.ndarray, ...]] = None  # (samples, 3) per scattering order, 1/n! included
    truncation_order: int
    converged: bool = True
    residual: float = 0.0
    switch_times: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _lengths(self):
        n = self.grid.samples
        if len(self.e_sigma) != n or len(self.e_pi) != n:
            raise ValueError("field arrays must match the grid")
        return self


# Photonics
class WindowSpec(BaseModel):
    """Time windows of the two field modes"""
    model_config = ConfigDict(frozen=True)

    sigma_window: Tuple[float, float]
    pi_window: Tuple[float, float]

    @model_validator(mode="after")
    def _disjoint(self):
        for lo, hi in (self.sigma_window, self.pi_window):
            if hi <= lo:
                raise ValueError("window end must exceed its start")
        (a0, a1), (b0, b1) = sorted([self.sigma_window, self.pi_window])
        if b0 < a1:
            raise ValueError("mode windows must be disjoint")
        return self


class TwoModeState(BaseModel):
    """alpha |1>_sigma |0>_pi + beta |0>_sigma |1>_pi"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha: complex
    beta: complex
    loss_fraction: float = Field(default=0.0, ge=0.0, le=1.0)

    @field_validator("alpha", "beta", mode="before")
    @classmethod
    def _as_complex(cls, v):
        return complex(v)

    @model_validator(mode="after")
    def _normalized(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"two-mode state not normalized (|a|^2+|b|^2={norm})")
        return self


class InterferometerConfig(BaseModel):
    """Delay-line phases and recombining splitter"""
    model_config = ConfigDict(frozen=True)

    phase_sigma: float = 0.0
    phase_pi: float = 0.0
    splitter_transmittance: float = Field(default=settings.SPLITTER_TRANSMITTANCE, ge=0.0, le=1.0)


class BellSettings(BaseModel):
    """Phase-shifter settings (radians) of the two arms: a, a' on sigma, b, b' on pi"""
    model_config = ConfigDict(frozen=True)

    a: float
    a_prime: float
    b: float
    b_prime: float


class BellRow(BaseModel):
    phi_a: float
    phi_b: float
    correlation: float
    p_d1: float
    p_d2: float


class BellScan(BaseModel):
    """CHSH-type combination of interference correlations"""
    rows: List[BellRow]
    s_value: float
    classical_bound: float = settings.CLASSICAL_BOUND

    @property
    def violates(self) -> bool:
        return self.s_value > self.classical_bound


# Scenario file schema; every unit is in the key name
class ScenarioBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NuclearBlock(ScenarioBlock):
    transition_energy_ev: float = Field(default=settings.TRANSITION_ENERGY_EV, gt=0)
    lifetime_ns: float = Field(default=settings.LIFETIME_S * 1e9, gt=0)
    ic_ratio: float = Field(default=settings.IC_RATIO, ge=0)


class LineOverrideBlock(ScenarioBlock):
    twice_m_g: int
    twice_m_e: int
    omega_rad_s: float


class HyperfineBlock(ScenarioBlock):
    field_tesla: Optional[float] = Field(default=None, ge=0)  # None: calibrate from first_beat_minimum_ns
    first_beat_minimum_ns: float = Field(default=settings.FIRST_BEAT_MINIMUM_S * 1e9, gt=0)
    mu_ground_nm: float = settings.MU_GROUND_NM
    mu_excited_nm: float = settings.MU_EXCITED_NM
    override_lines: Optional[List[LineOverrideBlock]] = None


class GeometryBlock(ScenarioBlock):
    k_direction: Vector3 = (0.0, 1.0, 0.0)
    incident_polarization: Vector3 = (1.0, 0.0, 0.0)
    quantization_axis: Vector3 = (0.0, 0.0, 1.0)


class SampleBlock(ScenarioBlock):
    xi: float = Field(default=settings.DEFAULT_XI, gt=0)
    thickness_m: Optional[float] = Field(default=None, gt=0)


class GridBlock(ScenarioBlock):
    t_start_ns: float = Field(default=0.0, ge=0)
    t_end_ns: float = Field(default=settings.GRID_T_END_S * 1e9, gt=0)
    dt_ns: float = Field(default=settings.GRID_DT_S * 1e9, gt=0)


class SeriesBlock(ScenarioBlock):
    max_order: int = Field(default=settings.SERIES_MAX_ORDER, ge=1)
    tol_rel: float = Field(default=settings.SERIES_TOL_REL, gt=0)


class EventBlock(ScenarioBlock):
    t_ns: float = Field(gt=0)
    alpha_deg: float = 0.0
    beta_deg: float = 0.0
    gamma_deg: float = 0.0
    field_axis: Optional[Vector3] = None


class DesignBlock(ScenarioBlock):
    """four_switch builds the whole plan; release designs one switch after the listed events"""
    kind: Literal["four_switch", "release"] = "four_switch"
    final_polarization: Polarization = Polarization.SIGMA
    target: Optional[PolarizationTarget] = None
    rotation: Literal["beam_parallel", "back_to_z", "in_plane"] = "back_to_z"
    in_plane_deg: float = 0.0
    window_ns: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def _release_needs_target(self):
        if self.kind == "release" and self.target is None:
            raise ValueError("a release design needs a target")
        return self


class SequenceBlock(ScenarioBlock):
    events: List[EventBlock] = []
    design: Optional[DesignBlock] = None


class WindowsBlock(ScenarioBlock):
    sigma_window_ns: Optional[Tuple[float, float]] = None
    pi_window_ns: Optional[Tuple[float, float]] = None


class BellBlock(ScenarioBlock):
    """Phase settings in radians; omitted means the optimal ones"""
    a_rad: Optional[float] = None
    a_prime_rad: Optional[float] = None
    b_rad: Optional[float] = None
    b_prime_rad: Optional[float] = None
    splitter_transmittance: float = Field(default=settings.SPLITTER_TRANSMITTANCE, ge=0, le=1)
    include_incoherent_loss: bool = True


class ScanBlock(ScenarioBlock):
    xi_values: List[float] = []

    @field_validator("xi_values")
    @classmethod
    def _positive(cls, values):
        if any(v <= 0 for v in values):
            raise ValueError("xi values must be positive")
        return values


class OutputBlock(ScenarioBlock):
    intensity_csv: str = "intensity.csv"
    summary_json: str = "summary.json"
    sequence_json: str = "sequence.json"
    bell_csv: str = "bell_scan.csv"


class ScenarioConfig(ScenarioBlock):
    nuclear: NuclearBlock = NuclearBlock()
    hyperfine: HyperfineBlock = HyperfineBlock()
    geometry: GeometryBlock = GeometryBlock()
    sample: SampleBlock = SampleBlock()
    grid: GridBlock = GridBlock()
    series: SeriesBlock = SeriesBlock()
    sequence: SequenceBlock = SequenceBlock()
    windows: WindowsBlock = WindowsBlock()
    bell: BellBlock = BellBlock()
    scan: ScanBlock = ScanBlock()
    output: OutputBlock = OutputBlock()
