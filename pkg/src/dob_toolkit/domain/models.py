import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

# g_v sentinel for ideal velocity measurement
INFINITE = math.inf

Diagnostics = List[Tuple[str, str]]


class Mode(str, Enum):
    POSITION = "position"
    FORCE = "force"
    HYBRID = "hybrid"


class ContactMode(str, Enum):
    BILATERAL = "bilateral"
    UNILATERAL = "unilateral"


def _positive(diag: Diagnostics, key: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        diag.append((key, f"must be a positive finite number (got {value!r})"))


def _non_negative(diag: Diagnostics, key: str, value: float) -> None:
    if not (value >= 0 and math.isfinite(value)):
        diag.append((key, f"must be a non-negative finite number (got {value!r})"))


@dataclass(frozen=True)
class MotorParams:
    """True motor: inertia, torque coefficient and friction."""
    J_m: float
    K_tau: float
    B: float = 0.0
    F_c: float = 0.0

    def problems(self, prefix: str = "plant") -> Diagnostics:
        diag: Diagnostics = []
        _positive(diag, f"{prefix}.J_m", self.J_m)
        _positive(diag, f"{prefix}.K_tau", self.K_tau)
        _non_negative(diag, f"{prefix}.B", self.B)
        _non_negative(diag, f"{prefix}.F_c", self.F_c)
        return diag


@dataclass(frozen=True)
class NominalModel:
    J_mn: float
    K_tau_n: float

    def problems(self, prefix: str = "nominal") -> Diagnostics:
        diag: Diagnostics = []
        _positive(diag, f"{prefix}.J_mn", self.J_mn)
        _positive(diag, f"{prefix}.K_tau_n", self.K_tau_n)
        return diag


@dataclass(frozen=True)
class IdentifiedModel:
    """Model used inside the reaction torque observer."""
    J_hat: float
    K_tau_hat: float
    B_hat: float = 0.0
    F_c_hat: float = 0.0

    @classmethod
    def perfect(cls, plant: MotorParams) -> "IdentifiedModel":
        return cls(J_hat=plant.J_m, K_tau_hat=plant.K_tau, B_hat=plant.B, F_c_hat=plant.F_c)

    def problems(self, prefix: str = "identified") -> Diagnostics:
        diag: Diagnostics = []
        _positive(diag, f"{prefix}.J_hat", self.J_hat)
        _positive(diag, f"{prefix}.K_tau_hat", self.K_tau_hat)
        _non_negative(diag, f"{prefix}.B_hat", self.B_hat)
        _non_negative(diag, f"{prefix}.F_c_hat", self.F_c_hat)
        return diag


@dataclass(frozen=True)
class ObserverBandwidths:
    """Cut-off frequencies (rad/s). g_v = INFINITE means ideal velocity measurement."""
    g_DOB: float
    g_v: float = INFINITE
    g_RTOB: Optional[float] = None

    def __post_init__(self):
        if self.g_RTOB is None:
            object.__setattr__(self, "g_RTOB", self.g_DOB)

    @property
    def ideal_velocity(self) -> bool:
        return math.isinf(self.g_v)

    @property
    def kappa(self) -> float:
        return self.g_v / self.g_DOB

    def finite_bandwidths(self) -> List[float]:
        return [g for g in (self.g_DOB, self.g_v, self.g_RTOB) if math.isfinite(g)]

    def problems(self, prefix: str = "bandwidths") -> Diagnostics:
        diag: Diagnostics = []
        _positive(diag, f"{prefix}.g_DOB", self.g_DOB)
        if not (self.g_v > 0):
            diag.append((f"{prefix}.g_v", f"must be positive or 'inf' (got {self.g_v!r})"))
        _positive(diag, f"{prefix}.g_RTOB", self.g_RTOB)
        return diag


@dataclass(frozen=True)
class Environment:
    """Lumped spring-damper contact; the environment itself is static."""
    D_env: float
    K_env: float
    q_env: float = 0.0
    contact_mode: ContactMode = ContactMode.BILATERAL

    def problems(self, prefix: str = "environment") -> Diagnostics:
        diag: Diagnostics = []
        _non_negative(diag, f"{prefix}.D_env", self.D_env)
        _non_negative(diag, f"{prefix}.K_env", self.K_env)
        if not math.isfinite(self.q_env):
            diag.append((f"{prefix}.q_env", "must be finite"))
        if not diag and self.D_env + self.K_env <= 0:
            diag.append((prefix, "D_env + K_env must be positive (no contact to control)"))
        return diag


@dataclass(frozen=True)
class OuterLoopGains:
    K_P: float
    K_D: float
    C_f: float = 0.0

    def problems(self, prefix: str = "gains", position: bool = True) -> Diagnostics:
        diag: Diagnostics = []
        if position:
            _positive(diag, f"{prefix}.K_P", self.K_P)
            _positive(diag, f"{prefix}.K_D", self.K_D)
        else:
            _non_negative(diag, f"{prefix}.K_P", self.K_P)
            _non_negative(diag, f"{prefix}.K_D", self.K_D)
        _non_negative(diag, f"{prefix}.C_f", self.C_f)
        return diag


@dataclass(frozen=True)
class Signal:
    """Reference or disturbance time function: constant, step or sine."""
    kind: str = "constant"
    value: float = 0.0
    amplitude: float = 0.0
    start: float = 0.0
    initial: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    offset: float = 0.0

    KINDS = ("constant", "step", "sine")

    @classmethod
    def constant(cls, value: float) -> "Signal":
        return cls(kind="constant", value=value)

    @classmethod
    def step(cls, amplitude: float, start: float = 0.0, initial: float = 0.0) -> "Signal":
        return cls(kind="step", amplitude=amplitude, start=start, initial=initial)

    @classmethod
    def sine(cls, amplitude: float, omega: float, phase: float = 0.0, offset: float = 0.0) -> "Signal":
        return cls(kind="sine", amplitude=amplitude, omega=omega, phase=phase, offset=offset)

    def at(self, t: float) -> float:
        if self.kind == "step":
            return self.initial + (self.amplitude if t >= self.start else 0.0)
        if self.kind == "sine":
            return self.offset + self.amplitude * math.sin(self.omega * t + self.phase)
        return self.value

    def rate(self, t: float) -> float:
        if self.kind == "sine":
            return self.amplitude * self.omega * math.cos(self.omega * t + self.phase)
        return 0.0

    def accel(self, t: float) -> float:
        if self.kind == "sine":
            return -self.amplitude * self.omega ** 2 * math.sin(self.omega * t + self.phase)
        return 0.0

    def problems(self, prefix: str) -> Diagnostics:
        diag: Diagnostics = []
        if self.kind not in self.KINDS:
            diag.append((f"{prefix}.kind", f"must be one of {', '.join(self.KINDS)}"))
        for name in ("value", "amplitude", "start", "initial", "omega", "phase", "offset"):
            if not math.isfinite(getattr(self, name)):
                diag.append((f"{prefix}.{name}", "must be finite"))
        return diag


ZERO_SIGNAL = Signal.constant(0.0)


@dataclass(frozen=True)
class RhoSchedule:
    """Piecewise-constant compliance selection: ((t_start, rho), ...), sorted by t_start."""
    points: Tuple[Tuple[float, float], ...] = ((0.0, 1.0),)

    def at(self, t: float) -> float:
        rho = self.points[0][1]
        for t_start, value in self.points:
            if t < t_start:
                break
            rho = value
        return rho

    def problems(self, prefix: str = "rho_schedule") -> Diagnostics:
        diag: Diagnostics = []
        if not self.points:
            return [(prefix, "must contain at least one [t_start, rho] pair")]
        if self.points[0][0] != 0.0:
            diag.append((f"{prefix}[0]", "first t_start must be 0"))
        for i, (t_start, rho) in enumerate(self.points):
            if not 0.0 <= rho <= 1.0:
                diag.append((f"{prefix}[{i}]", f"rho must lie in [0, 1] (got {rho!r})"))
            if i and t_start <= self.points[i - 1][0]:
                diag.append((f"{prefix}[{i}]", "t_start values must be strictly increasing"))
        return diag


@dataclass(frozen=True)
class SimConfig:
    T_s: float = 1e-4
    duration: float = 1.0
    noise_std: float = 0.0
    seed: int = 0
    q0: float = 0.0
    qdot0: float = 0.0

    @property
    def n_samples(self) -> int:
        # tolerance keeps duration/T_s = 10000.000000002 and 9999.99999998 on the same side
        return int(math.floor(self.duration / self.T_s + 1e-9)) + 1

    def problems(self, prefix: str = "simulation") -> Diagnostics:
        diag: Diagnostics = []
        _positive(diag, f"{prefix}.T_s", self.T_s)
        _positive(diag, f"{prefix}.duration", self.duration)
        _non_negative(diag, f"{prefix}.noise_std", self.noise_std)
        if not diag and self.duration < 10 * self.T_s:
            diag.append((f"{prefix}.duration", "must cover at least 10 samples"))
        return diag


@dataclass(frozen=True)
class AnalysisDefaults:
    omega_lo: float = 1.0
    omega_hi: float = 1e5
    points_per_decade: int = 60
    gain_lo: float = 1e-3
    gain_hi: float = 1e4
    gains_per_decade: int = 60
    alpha_lo: float = 0.01
    alpha_hi: float = 10.0
    xi_min: float = 0.707

    def problems(self, prefix: str = "analysis") -> Diagnostics:
        diag: Diagnostics = []
        for lo, hi in (("omega_lo", "omega_hi"), ("gain_lo", "gain_hi"), ("alpha_lo", "alpha_hi")):
            _positive(diag, f"{prefix}.{lo}", getattr(self, lo))
            _positive(diag, f"{prefix}.{hi}", getattr(self, hi))
            if getattr(self, lo) >= getattr(self, hi):
                diag.append((f"{prefix}.{hi}", f"must exceed {lo}"))
        for name in ("points_per_decade", "gains_per_decade"):
            if getattr(self, name) < 1:
                diag.append((f"{prefix}.{name}", "must be at least 1"))
        _positive(diag, f"{prefix}.xi_min", self.xi_min)
        return diag


@dataclass(frozen=True)
class Scenario:
    """Everything needed to analyse or simulate one control configuration."""
    mode: Mode
    plant: MotorParams
    nominal: NominalModel
    bw: ObserverBandwidths
    gains: OuterLoopGains
    identified: Optional[IdentifiedModel] = None
    env: Optional[Environment] = None
    rho_schedule: Optional[RhoSchedule] = None
    position_ref: Signal = ZERO_SIGNAL
    force_ref: Signal = ZERO_SIGNAL
    ext_disturbance: Signal = ZERO_SIGNAL
    disturbance_estimate: Signal = ZERO_SIGNAL
    sim: SimConfig = field(default_factory=SimConfig)
    analysis: AnalysisDefaults = field(default_factory=AnalysisDefaults)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.identified is None:
            object.__setattr__(self, "identified", IdentifiedModel.perfect(self.plant))
        if self.rho_schedule is None:
            rho = 1.0 if self.mode == Mode.POSITION else 0.0
            object.__setattr__(self, "rho_schedule", RhoSchedule(((0.0, rho),)))

    @property
    def uses_position_loop(self) -> bool:
        return self.mode in (Mode.POSITION, Mode.HYBRID)

    @property
    def uses_force_loop(self) -> bool:
        return self.mode in (Mode.FORCE, Mode.HYBRID)

    def problems(self) -> Diagnostics:
        diag: Diagnostics = []
        diag += self.plant.problems()
        diag += self.nominal.problems()
        diag += self.identified.problems()
        diag += self.bw.problems()
        diag += self.gains.problems(position=self.uses_position_loop)
        if self.env is not None:
            diag += self.env.problems()
        elif self.uses_force_loop:
            diag.append(("environment", f"required for {self.mode.value} mode"))
        diag += self.rho_schedule.problems()
        for key, sig in (
            ("references.position", self.position_ref),
            ("references.force", self.force_ref),
            ("references.disturbance", self.ext_disturbance),
            ("references.disturbance_estimate", self.disturbance_estimate),
        ):
            diag += sig.problems(key)
        diag += self.sim.problems()
        diag += self.analysis.problems()
        return diag
