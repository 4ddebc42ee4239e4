"""
Design rules for DOB/RTOB based motion control and the aggregated design report.

Every verdict satisfies passed == (margin >= 0). Hard rules decide the CLI exit
code; advisory rules only warn.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from dob_toolkit.domain.errors import InvalidScenario
from dob_toolkit.domain.models import (
    Environment,
    IdentifiedModel,
    MotorParams,
    NominalModel,
    ObserverBandwidths,
    OuterLoopGains,
    Scenario,
)
from dob_toolkit.services.loop_models import (
    alpha_of,
    beta_of,
    build_position_loop,
    build_rtob_loop,
    inner_second_order,
    rtob_phi,
)
from dob_toolkit.services.poly_tf import Polynomial, max_real_part, poly_roots, routh_verdict

XI_MIN_DEFAULT = 0.707
ALPHA_REFERENCE = 2.0
ALPHA_REFERENCE_TOL = 0.02
OBSERVER_FRACTION = 0.25


class Severity(str, Enum):
    HARD = "hard"
    ADVISORY = "advisory"


class CompensatorClass(str, Enum):
    LEAD = "Lead"
    LAG = "Lag"
    UNITY = "Unity"


@dataclass(frozen=True)
class RuleVerdict:
    rule_id: str
    passed: bool
    margin: float
    detail: str
    severity: Severity = Severity.HARD

    @property
    def status(self) -> str:
        if self.passed:
            return "PASS"
        return "FAIL" if self.severity == Severity.HARD else "WARN"


def _verdict(rule_id: str, margin: float, detail: str, severity: Severity = Severity.HARD) -> RuleVerdict:
    return RuleVerdict(rule_id=rule_id, passed=margin >= 0, margin=margin, detail=detail, severity=severity)


def check_robustness(alpha: float, g_DOB: float, g_v: float, xi_min: float = XI_MIN_DEFAULT) -> RuleVerdict:
    """Inner-loop damping bound xi >= xi_min, i.e. alpha g_DOB <= g_v / (4 xi_min^2).

    Margin in rad/s. For xi_min = 0.707 the bound is g_v/2 up to rounding of 4 * 0.707^2.
    """
    if math.isinf(g_v):
        return _verdict("robustness", math.inf, "ideal velocity measurement: no damping bound")
    # 0.707 is the customary spelling of 1/sqrt(2); use the exact factor 2 for it
    factor = 2.0 if abs(xi_min - XI_MIN_DEFAULT) < 1e-12 else 4.0 * xi_min ** 2
    bound = g_v / factor
    margin = bound - alpha * g_DOB
    return _verdict(
        "robustness",
        margin,
        f"alpha*g_DOB = {alpha * g_DOB:.6g} rad/s against bound g_v/{factor:.6g} = {bound:.6g} rad/s",
    )


def position_stability_threshold(g_DOB: float, gains: OuterLoopGains) -> float:
    """Right-hand side of the ideal-velocity criterion 1/alpha < RHS."""
    return 1.0 + g_DOB * gains.K_D / gains.K_P + gains.K_D / g_DOB + gains.K_D ** 2 / gains.K_P


def check_position_stability(
    plant: MotorParams,
    nominal: NominalModel,
    bw: ObserverBandwidths,
    gains: OuterLoopGains,
) -> RuleVerdict:
    alpha = alpha_of(plant, nominal)
    if bw.ideal_velocity:
        rhs = position_stability_threshold(bw.g_DOB, gains)
        margin = rhs - 1.0 / alpha
        return _verdict(
            "position-stability",
            margin,
            f"1/alpha = {1.0 / alpha:.6g} against {rhs:.6g} (alpha_min = {1.0 / rhs:.6g})",
        )
    return _routh_rule("position-stability", build_position_loop(plant, nominal, bw, gains).closed.den, "")


def _signed_margin(magnitude: float, passed: bool) -> float:
    """Margin whose sign agrees with the verdict even when rounding puts it near zero."""
    if passed:
        return abs(magnitude)
    return -max(abs(magnitude), math.ulp(0.0))


def _routh_rule(rule_id: str, char: Polynomial, prefix: str) -> RuleVerdict:
    """Routh decides pass/fail; the margin is the distance of the slowest pole from the axis."""
    verdict = routh_verdict(char)
    return RuleVerdict(
        rule_id=rule_id,
        passed=verdict.is_stable,
        margin=_signed_margin(max_real_part(char), verdict.is_stable),
        detail=f"{prefix}Routh: {verdict.stability.value}, {verdict.rhp_count} RHP root(s)",
    )


@dataclass(frozen=True)
class CompensatorClasses:
    dob: CompensatorClass
    rtob: CompensatorClass


def _classify(ratio: float) -> CompensatorClass:
    if ratio > 1.0:
        return CompensatorClass.LEAD
    if ratio < 1.0:
        return CompensatorClass.LAG
    return CompensatorClass.UNITY


def classify_compensators(alpha: float, g_DOB: float, g_RTOB: float) -> CompensatorClasses:
    return CompensatorClasses(dob=_classify(alpha), rtob=_classify(g_RTOB / g_DOB))


def detect_rhp_zero(
    plant: MotorParams,
    identified: IdentifiedModel,
    env: Environment,
) -> Optional[float]:
    """Positive real zero of phi(s) when its s^2 coefficient is negative, else None."""
    nominal_free = NominalModel(J_mn=plant.J_m, K_tau_n=plant.K_tau)
    phi = rtob_phi(plant, nominal_free, identified, env, g_DOB=1.0)
    if phi.degree < 2 or phi.leading >= 0:
        return None
    positive = [r.real for r in poly_roots(phi) if r.real > 0 and r.imag == 0.0]
    return max(positive) if positive else None


def check_min_phase(
    plant: MotorParams,
    nominal: NominalModel,
    identified: IdentifiedModel,
) -> RuleVerdict:
    alpha = alpha_of(plant, nominal)
    beta = beta_of(nominal, identified)
    lead = plant.J_m * identified.K_tau_hat - identified.J_hat * plant.K_tau
    # beta - alpha carries the sign of the phi s^2 coefficient; the coefficient decides at the boundary
    passed = lead >= 0
    return RuleVerdict(
        rule_id="rtob-min-phase",
        passed=passed,
        margin=_signed_margin(beta - alpha, passed),
        detail=f"beta - alpha = {beta - alpha:.6g}; phi s^2 coefficient {lead:.6g}",
    )


def check_force_stability(
    plant: MotorParams,
    nominal: NominalModel,
    identified: IdentifiedModel,
    bw: ObserverBandwidths,
    env: Environment,
    C_f: float,
) -> RuleVerdict:
    char = build_rtob_loop(plant, nominal, identified, bw, env, C_f).closed.den
    return _routh_rule("force-stability", char, f"C_f = {C_f:.6g}; ")


@dataclass(frozen=True)
class DesignReport:
    verdicts: Tuple[RuleVerdict, ...]
    alpha: float
    beta: float
    kappa: float
    w_n: float
    xi: float
    rhp_zero: Optional[float] = None
    compensators: Optional[CompensatorClasses] = None
    name: str = ""

    @property
    def hard_failures(self) -> List[RuleVerdict]:
        return [v for v in self.verdicts if not v.passed and v.severity == Severity.HARD]

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def verdict(self, rule_id: str) -> RuleVerdict:
        for v in self.verdicts:
            if v.rule_id == rule_id:
                return v
        raise KeyError(rule_id)


def validate_scenario(scenario: Scenario) -> None:
    diagnostics = scenario.problems()
    if diagnostics:
        raise InvalidScenario(diagnostics)


def design_report(scenario: Scenario) -> DesignReport:
    validate_scenario(scenario)
    plant, nominal, bw = scenario.plant, scenario.nominal, scenario.bw
    identified = scenario.identified
    xi_min = scenario.analysis.xi_min

    alpha = alpha_of(plant, nominal)
    beta = beta_of(nominal, identified)
    if bw.ideal_velocity:
        kappa = w_n = xi = math.inf
    else:
        inner = inner_second_order(alpha, bw.kappa, bw.g_DOB)
        kappa, w_n, xi = bw.kappa, inner.w_n, inner.xi

    verdicts = [check_robustness(alpha, bw.g_DOB, bw.g_v, xi_min)]
    observer_margin = math.inf if bw.ideal_velocity else OBSERVER_FRACTION * bw.g_v - bw.g_DOB
    verdicts.append(
        _verdict(
            "observer-bandwidth",
            observer_margin,
            f"g_DOB = {bw.g_DOB:.6g} rad/s against 0.25*g_v",
            Severity.ADVISORY,
        )
    )
    verdicts.append(
        _verdict(
            "alpha-reference",
            ALPHA_REFERENCE_TOL - abs(alpha - ALPHA_REFERENCE),
            f"alpha = {alpha:.6g} (reference point 2)",
            Severity.ADVISORY,
        )
    )
    if scenario.uses_position_loop:
        verdicts.append(check_position_stability(plant, nominal, bw, scenario.gains))

    rhp_zero = None
    if scenario.uses_force_loop:
        env = scenario.env
        verdicts.append(check_min_phase(plant, nominal, identified))
        rhp_zero = detect_rhp_zero(plant, identified, env)
        lead = classify_compensators(alpha, bw.g_DOB, bw.g_RTOB).rtob
        verdicts.append(
            _verdict(
                "rtob-bandwidth",
                bw.g_RTOB - bw.g_DOB,
                f"C_com is {lead.value.lower()} (g_RTOB = {bw.g_RTOB:.6g}, g_DOB = {bw.g_DOB:.6g})",
                Severity.ADVISORY,
            )
        )
        verdicts.append(check_force_stability(plant, nominal, identified, bw, env, scenario.gains.C_f))

    for v in verdicts:
        if not v.passed:
            logging.info("Rule %s %s: %s", v.rule_id, v.status, v.detail)

    return DesignReport(
        verdicts=tuple(verdicts),
        alpha=alpha,
        beta=beta,
        kappa=kappa,
        w_n=w_n,
        xi=xi,
        rhp_zero=rhp_zero,
        compensators=classify_compensators(alpha, bw.g_DOB, bw.g_RTOB),
        name=scenario.name,
    )


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "none"
    return format(value, ".9g")


def render_report(report: DesignReport) -> str:
    lines = [f"{v.rule_id:<20} {v.status:<4} {_fmt(v.margin)}" for v in report.verdicts]
    lines.append(f"# alpha = {_fmt(report.alpha)}")
    lines.append(f"# beta = {_fmt(report.beta)}")
    lines.append(f"# kappa = {_fmt(report.kappa)}")
    lines.append(f"# w_n = {_fmt(report.w_n)}")
    lines.append(f"# xi = {_fmt(report.xi)}")
    lines.append(f"# rhp_zero = {_fmt(report.rhp_zero)}")
    if report.compensators is not None:
        lines.append(f"# dob_compensator = {report.compensators.dob.value}")
        lines.append(f"# rtob_compensator = {report.compensators.rtob.value}")
    return "\n".join(lines) + "\n"
