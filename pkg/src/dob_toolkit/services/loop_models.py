"""
Transfer functions of the DOB inner loop, the DOB based position loop and the
RTOB based force loop, built from physical parameter sets.

The builders assume linear dynamics: friction only enters the time simulator.
"""
import math
from dataclasses import dataclass
from typing import Tuple

from dob_toolkit.domain.models import (
    Environment,
    IdentifiedModel,
    MotorParams,
    NominalModel,
    ObserverBandwidths,
    OuterLoopGains,
)
from dob_toolkit.services.poly_tf import Polynomial, RationalTF

S = Polynomial.s()


def alpha_of(plant: MotorParams, nominal: NominalModel) -> float:
    return (nominal.J_mn * plant.K_tau) / (plant.J_m * nominal.K_tau_n)


def beta_of(nominal: NominalModel, identified: IdentifiedModel) -> float:
    """alpha analogue built from the identified model used inside the RTOB.

    With perfect identification (J_hat = J_m, K_tau_hat = K_tau) this equals alpha_of.
    """
    return (nominal.J_mn * identified.K_tau_hat) / (identified.J_hat * nominal.K_tau_n)


def nominal_for_alpha(plant: MotorParams, nominal: NominalModel, alpha: float) -> NominalModel:
    """Nominal model whose inertia is rescaled so that alpha_of(plant, result) == alpha."""
    return NominalModel(J_mn=alpha * plant.J_m * nominal.K_tau_n / plant.K_tau, K_tau_n=nominal.K_tau_n)


def _first_order(g: float) -> Polynomial:
    return S + g


def build_l_dob(plant: MotorParams, nominal: NominalModel, bw: ObserverBandwidths) -> RationalTF:
    alpha = alpha_of(plant, nominal)
    if bw.ideal_velocity:
        return RationalTF(Polynomial.constant(alpha * bw.g_DOB), S)
    return RationalTF(Polynomial.constant(alpha * bw.g_v * bw.g_DOB), S * _first_order(bw.g_v))


def sensitivity_pair(L: RationalTF) -> Tuple[RationalTF, RationalTF]:
    """(1/(1+L), L/(1+L)) over the shared denominator den + num."""
    common = L.den + L.num
    return RationalTF(L.den, common), RationalTF(L.num, common)


@dataclass(frozen=True)
class InnerLoop:
    char_poly: Polynomial
    w_n: float
    xi: float


def inner_second_order(alpha: float, kappa: float, g_DOB: float) -> InnerLoop:
    char_poly = Polynomial((alpha * kappa * g_DOB ** 2, kappa * g_DOB, 1.0))
    return InnerLoop(
        char_poly=char_poly,
        w_n=math.sqrt(alpha * kappa) * g_DOB,
        xi=0.5 * math.sqrt(kappa / alpha),
    )


def build_accel_response(plant: MotorParams, nominal: NominalModel, bw: ObserverBandwidths) -> RationalTF:
    """Desired-to-actual acceleration transfer of the DOB inner loop."""
    alpha = alpha_of(plant, nominal)
    if bw.ideal_velocity:
        return RationalTF(alpha * _first_order(bw.g_DOB), _first_order(alpha * bw.g_DOB))
    num = alpha * _first_order(bw.g_v) * _first_order(bw.g_DOB)
    den = Polynomial((alpha * bw.g_v * bw.g_DOB, bw.g_v, 1.0))
    return RationalTF(num, den)


@dataclass(frozen=True)
class PositionLoop:
    closed: RationalTF
    open: RationalTF


def build_position_loop(
    plant: MotorParams,
    nominal: NominalModel,
    bw: ObserverBandwidths,
    gains: OuterLoopGains,
) -> PositionLoop:
    """Acceleration-reference closed loop and the outer-loop open loop L_PC.

    Ideal velocity:  den = s^2 (s + a g) + a (s + g)(K_D s + K_P)
    Filtered:        den = s^2 (s^2 + g_v s + a g_v g) + a (s + g_v)(s + g)(K_D s + K_P)
    Both satisfy den = s^3 (1 + L_PC) (times (s + g_v) when filtered).
    """
    alpha = alpha_of(plant, nominal)
    g = bw.g_DOB
    pd = Polynomial((gains.K_P, gains.K_D))
    tracking = Polynomial((gains.K_P, gains.K_D, 1.0))
    s2 = S * S

    if bw.ideal_velocity:
        num = alpha * _first_order(g) * tracking
        den = s2 * _first_order(alpha * g) + alpha * _first_order(g) * pd
        open_num = alpha * (g * s2 + _first_order(g) * pd)
        open_den = s2 * S
    else:
        gv = bw.g_v
        num = alpha * _first_order(gv) * _first_order(g) * tracking
        den = s2 * Polynomial((alpha * gv * g, gv, 1.0)) + alpha * _first_order(gv) * _first_order(g) * pd
        open_num = alpha * (gv * g * s2 + _first_order(gv) * _first_order(g) * pd)
        open_den = s2 * S * _first_order(gv)
    return PositionLoop(closed=RationalTF(num, den), open=RationalTF(open_num, open_den))


def rtob_phi(
    plant: MotorParams,
    nominal: NominalModel,
    identified: IdentifiedModel,
    env: Environment,
    g_DOB: float,
    reduced: bool = True,
) -> Polynomial:
    """Force-loop numerator factor phi(s).

    The expanded form J_m K^ s(s + a g) + K^(D s + K) - J^ K s(s + b g) collapses
    to the reduced quadratic because a J_m K^ = b J^ K for the adopted beta.
    """
    contact = Polynomial((env.K_env, env.D_env))
    if reduced:
        lead = plant.J_m * identified.K_tau_hat - identified.J_hat * plant.K_tau
        return Polynomial((0.0, 0.0, lead)) + identified.K_tau_hat * contact
    alpha = alpha_of(plant, nominal)
    beta = beta_of(nominal, identified)
    return (
        plant.J_m * identified.K_tau_hat * S * _first_order(alpha * g_DOB)
        + identified.K_tau_hat * contact
        - identified.J_hat * plant.K_tau * S * _first_order(beta * g_DOB)
    )


def contact_dynamics(plant: MotorParams, nominal: NominalModel, env: Environment, g_DOB: float) -> Polynomial:
    """J_m s (s + a g) + D_env s + K_env: the DOB-stabilised plant in contact."""
    alpha = alpha_of(plant, nominal)
    return plant.J_m * S * _first_order(alpha * g_DOB) + Polynomial((env.K_env, env.D_env))


def compensator_tf(g_DOB: float, g_RTOB: float) -> RationalTF:
    """C_com = (s + g_DOB)/(s + g_RTOB); lead when g_RTOB > g_DOB."""
    return RationalTF(_first_order(g_DOB), _first_order(g_RTOB))


@dataclass(frozen=True)
class RtobLoop:
    open: RationalTF
    phi: Polynomial
    closed: RationalTF


def build_rtob_loop(
    plant: MotorParams,
    nominal: NominalModel,
    identified: IdentifiedModel,
    bw: ObserverBandwidths,
    env: Environment,
    C_f: float,
) -> RtobLoop:
    """Open loop from tau_ref to tau_load_hat of the RTOB force loop, and its closure.

    L = C_f g_R (J_mn/K_tau_n)(s + g) phi(s) / (s P(s) (s + g_R)),
    P(s) = J_m s (s + a g) + D_env s + K_env. The force controller commands
    acceleration C_f (tau_ref - tau_load_hat), turned into current by the nominal model.
    """
    g = bw.g_DOB
    g_r = bw.g_RTOB
    phi = rtob_phi(plant, nominal, identified, env, g)
    gain = C_f * g_r * nominal.J_mn / nominal.K_tau_n
    num = gain * _first_order(g) * phi
    den = S * contact_dynamics(plant, nominal, env, g) * _first_order(g_r)
    open_loop = RationalTF(num, den)
    return RtobLoop(open=open_loop, phi=phi, closed=open_loop.closed_loop())
