"""
Fixed-step discrete-time simulation of the DOB position loop, the RTOB force loop
and their hybrid blend.

Per sample k the controller reads the current state, the observers update from
the current applied current, and the plant is advanced over [t_k, t_k+1] with the
current held. Observer estimates enter the command one sample later.
"""
import logging
import math
import time
from dataclasses import dataclass, fields
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.signal import cont2discrete

from dob_toolkit.domain.errors import ConfigError, InvalidScenario, NotSettled, NumericalBlowup
from dob_toolkit.domain.models import (
    ContactMode,
    Environment,
    Mode,
    MotorParams,
    Scenario,
)

BLOWUP_LIMIT = 1e12
# T_s * g must stay below this for every filter bandwidth
DISCRETIZATION_LIMIT = 0.5
SETTLING_BAND = 0.02
MIN_SEGMENT_FRACTION = 0.2
SS_FRACTION = 0.05


def _sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def _zoh(a: np.ndarray, T_s: float) -> Tuple[float, float, float, float, float, float]:
    """Exact ZOH of x' = a x + [0, 1]^T u, flattened for the scalar inner loop."""
    ad, bd, _, _, _ = cont2discrete((a, np.array([[0.0], [1.0]]), np.eye(2), np.zeros((2, 1))), T_s, method="zoh")
    return (
        float(ad[0, 0]), float(ad[0, 1]), float(ad[1, 0]), float(ad[1, 1]),
        float(bd[0, 0]), float(bd[1, 0]),
    )


class MotorPlant:
    """Motor inertia with viscous friction, optionally pressed against a spring-damper.

    step() takes the torque that is held over the sample (motor torque minus
    Coulomb friction and interaction torque) and integrates the linear part exactly.
    """

    def __init__(self, params: MotorParams, T_s: float, env: Optional[Environment] = None):
        self.params = params
        self.env = env
        J, B = params.J_m, params.B
        self._free = _zoh(np.array([[0.0, 1.0], [0.0, -B / J]]), T_s)
        self._contact = None
        if env is not None:
            self._contact = _zoh(
                np.array([[0.0, 1.0], [-env.K_env / J, -(B + env.D_env) / J]]), T_s
            )

    def contact_force(self, q: float, qd: float) -> float:
        env = self.env
        return env.K_env * (q - env.q_env) + env.D_env * qd

    def in_contact(self, q: float, qd: float) -> bool:
        env = self.env
        if env is None:
            return False
        if env.contact_mode == ContactMode.BILATERAL:
            return True
        return q >= env.q_env and self.contact_force(q, qd) > 0

    def load_torque(self, q: float, qd: float) -> float:
        return self.contact_force(q, qd) if self.in_contact(q, qd) else 0.0

    def step(self, q: float, qd: float, torque: float) -> Tuple[float, float]:
        if self.in_contact(q, qd):
            a11, a12, a21, a22, b1, b2 = self._contact
            u = (torque + self.env.K_env * self.env.q_env) / self.params.J_m
        else:
            a11, a12, a21, a22, b1, b2 = self._free
            u = torque / self.params.J_m
        return a11 * q + a12 * qd + b1 * u, a21 * q + a22 * qd + b2 * u


class _LowPass:
    """Bilinear g/(s+g); an infinite bandwidth passes the input through."""

    def __init__(self, g: float, T_s: float, initial: float = 0.0):
        self.passthrough = math.isinf(g)
        gt = 0.0 if self.passthrough else g * T_s
        self.a = (2.0 - gt) / (2.0 + gt)
        self.b = gt / (2.0 + gt)
        self.prev_in = initial
        self.prev_out = initial

    def update(self, x: float) -> float:
        if self.passthrough:
            self.prev_in = self.prev_out = x
            return x
        y = self.a * self.prev_out + self.b * (x + self.prev_in)
        self.prev_in, self.prev_out = x, y
        return y


COLUMNS = (
    "t", "q_m", "qdot_m", "qdot_meas", "i_m_des", "i_m_cmp", "i_m",
    "tau_dis_hat", "tau_load_true", "tau_load_hat", "q_ref", "tau_ref",
)


@dataclass(frozen=True)
class SimTrace:
    t: np.ndarray
    q_m: np.ndarray
    qdot_m: np.ndarray
    qdot_meas: np.ndarray
    i_m_des: np.ndarray
    i_m_cmp: np.ndarray
    i_m: np.ndarray
    tau_dis_hat: np.ndarray
    tau_load_true: np.ndarray
    tau_load_hat: np.ndarray
    q_ref: np.ndarray
    tau_ref: np.ndarray

    def __post_init__(self):
        lengths = {len(getattr(self, f.name)) for f in fields(self)}
        if len(lengths) != 1:
            raise ValueError(f"trace columns differ in length: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(f"unknown trace channel {name!r}")
        return getattr(self, name)

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in COLUMNS}


def check_sampling(scenario: Scenario) -> None:
    T_s = scenario.sim.T_s
    for name, g in (("g_DOB", scenario.bw.g_DOB), ("g_v", scenario.bw.g_v), ("g_RTOB", scenario.bw.g_RTOB)):
        if math.isfinite(g) and T_s * g >= DISCRETIZATION_LIMIT:
            raise ConfigError(
                [("simulation.T_s", f"T_s*{name} = {T_s * g:.3g} must stay below {DISCRETIZATION_LIMIT}")]
            )


def simulate(scenario: Scenario) -> SimTrace:
    diagnostics = scenario.problems()
    if diagnostics:
        raise InvalidScenario(diagnostics)
    check_sampling(scenario)

    sim = scenario.sim
    plant, nominal, ident, bw, gains = (
        scenario.plant, scenario.nominal, scenario.identified, scenario.bw, scenario.gains,
    )
    T_s = sim.T_s
    n = sim.n_samples
    env = scenario.env
    motor = MotorPlant(plant, T_s, env)

    rng = np.random.Generator(np.random.Philox(sim.seed))
    noise = (sim.noise_std * rng.standard_normal(n)).tolist() if sim.noise_std > 0 else [0.0] * n

    J_n, K_n = nominal.J_mn, nominal.K_tau_n
    g, g_r = bw.g_DOB, bw.g_RTOB
    K_P, K_D, C_f = gains.K_P, gains.K_D, gains.C_f
    K_tau, F_c = plant.K_tau, plant.F_c
    J_hat, K_hat, B_hat, F_hat = ident.J_hat, ident.K_tau_hat, ident.B_hat, ident.F_c_hat
    position_on = scenario.uses_position_loop
    force_on = scenario.uses_force_loop

    q, qd = sim.q0, sim.qdot0
    vel_filter = _LowPass(bw.g_v, T_s, initial=qd)
    dob_filter = _LowPass(g, T_s, initial=J_n * g * qd)
    rtob_filter = _LowPass(g_r, T_s, initial=J_hat * g_r * qd)
    tau_dis_prev = 0.0
    tau_load_prev = 0.0

    cols = {name: [0.0] * n for name in COLUMNS}
    started = time.perf_counter()
    logging.debug("Simulating %s mode: %d steps at T_s=%g s", scenario.mode.value, n, T_s)

    for k in range(n):
        t = k * T_s
        qd_meas = vel_filter.update(qd + noise[k])
        tau_load_true = motor.load_torque(q, qd) if env is not None else 0.0

        if scenario.mode == Mode.HYBRID:
            rho = scenario.rho_schedule.at(t)
        else:
            rho = 1.0 if position_on else 0.0

        q_ref = scenario.position_ref.at(t)
        tau_ref = scenario.force_ref.at(t)
        acc_pos = 0.0
        if position_on and rho > 0.0:
            acc_pos = (
                scenario.position_ref.accel(t)
                + K_P * (q_ref - q)
                + K_D * (scenario.position_ref.rate(t) - qd_meas)
            )
        acc_force = C_f * (tau_ref - tau_load_prev) if force_on else 0.0
        i_des = J_n * (rho * acc_pos + (1.0 - rho) * acc_force) / K_n
        i_cmp = tau_dis_prev / K_n
        i_m = i_des + i_cmp

        dob_in = K_n * i_m + J_n * g * qd_meas
        tau_dis_hat = dob_filter.update(dob_in) - J_n * g * qd_meas

        tau_fric_hat = B_hat * qd_meas + F_hat * _sign(qd_meas)
        rtob_in = (
            K_hat * i_m - tau_fric_hat - scenario.disturbance_estimate.at(t) + J_hat * g_r * qd_meas
        )
        tau_load_hat = rtob_filter.update(rtob_in) - J_hat * g_r * qd_meas

        row = (t, q, qd, qd_meas, i_des, i_cmp, i_m, tau_dis_hat, tau_load_true, tau_load_hat, q_ref, tau_ref)
        for name, value in zip(COLUMNS, row):
            cols[name][k] = value

        for channel, value in (("q_m", q), ("qdot_m", qd), ("tau_dis_hat", tau_dis_hat), ("tau_load_hat", tau_load_hat)):
            if not abs(value) < BLOWUP_LIMIT:
                raise NumericalBlowup(k, channel, value)

        torque = K_tau * i_m - F_c * _sign(qd) - scenario.ext_disturbance.at(t)
        q, qd = motor.step(q, qd, torque)
        tau_dis_prev, tau_load_prev = tau_dis_hat, tau_load_hat

    logging.debug("Simulation finished in %.3f s", time.perf_counter() - started)
    return SimTrace(**{name: np.array(values) for name, values in cols.items()})


@dataclass(frozen=True)
class TraceMetrics:
    overshoot_pct: float
    settling_time_s: float
    ss_error: float
    rms_residual: float


def trace_metrics(trace: SimTrace, channel: str, ref_channel: str) -> TraceMetrics:
    """Step-response figures of `channel` against the final segment of `ref_channel`.

    The segment starts after the last change of the reference. The settling time is
    inf when the channel never stays inside the 2 % band.
    """
    y = trace.column(channel)
    ref = trace.column(ref_channel)
    t = trace.t
    n = len(y)

    changes = np.nonzero(np.diff(ref) != 0)[0]
    start = int(changes[-1]) + 1 if len(changes) else 0
    if n - start < MIN_SEGMENT_FRACTION * n:
        raise NotSettled(
            f"{ref_channel} holds its final value for {n - start} of {n} samples (needs 20%)"
        )

    ref_final = float(ref[-1])
    segment = y[start:]
    step = ref_final - float(segment[0])

    overshoot = 0.0
    if step != 0.0:
        excess = float(np.max((segment - ref_final) * math.copysign(1.0, step)))
        overshoot = max(excess, 0.0) / abs(step) * 100.0

    band = SETTLING_BAND * (abs(step) or abs(ref_final) or 1.0)
    outside = np.nonzero(np.abs(segment - ref_final) > band)[0]
    if not len(outside):
        settling = 0.0
    elif outside[-1] == len(segment) - 1:
        settling = math.inf
    else:
        settling = float(t[start + outside[-1] + 1] - t[start])

    tail = max(1, int(round(SS_FRACTION * n)))
    ss_error = float(np.mean(y[-tail:])) - ref_final
    rms = float(np.sqrt(np.mean((segment - ref[start:]) ** 2)))
    return TraceMetrics(overshoot_pct=overshoot, settling_time_s=settling, ss_error=ss_error, rms_residual=rms)
