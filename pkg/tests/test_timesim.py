"""
Tests for the discrete-time simulator and step-response metrics.
"""
import copy
import json
import math

import numpy as np
import pytest
from scipy import signal

from dob_toolkit.domain.errors import ConfigError, NotSettled, NumericalBlowup
from dob_toolkit.domain.models import ContactMode, Environment, MotorParams
from dob_toolkit.services.loop_models import build_rtob_loop
from dob_toolkit.services.timesim import (
    COLUMNS,
    MotorPlant,
    SimTrace,
    simulate,
    trace_metrics,
)
from dob_toolkit.storage.scenario_file import scenario_from_dict


def position_doc(duration=1.0, **references):
    return {
        "mode": "position",
        "plant": {"J_m": 0.1, "K_tau": 5.0},
        "nominal": {"J_mn": 0.1, "K_tau_n": 5.0},
        "bandwidths": {"g_DOB": 200.0},
        "gains": {"K_P": 900.0, "K_D": 100.0},
        "references": references,
        "simulation": {"T_s": 1e-4, "duration": duration},
    }


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def make_trace(t, y, ref):
    """Trace whose q_m/q_ref columns carry y/ref and every other channel is zero."""
    t = np.asarray(t, dtype=float)
    zeros = np.zeros_like(t)
    columns = {name: zeros for name in COLUMNS}
    columns.update(t=t, q_m=np.asarray(y, dtype=float), q_ref=np.asarray(ref, dtype=float))
    return SimTrace(**columns)


def test_zero_inputs_give_zero_trace():
    trace = simulate(scenario_from_dict(position_doc(duration=0.01)))
    assert len(trace) == 101
    for name in COLUMNS:
        if name != "t":
            assert not trace.column(name).any(), name
    assert trace.t[-1] == pytest.approx(0.01)


def test_sample_count_follows_duration():
    trace = simulate(scenario_from_dict(position_doc(duration=1.0)))
    assert len(trace) == 10001


def test_noise_is_reproducible():
    doc = position_doc(duration=0.05, position={"kind": "step", "amplitude": 0.1})
    doc["simulation"].update(noise_std=0.01, seed=3)
    first = simulate(scenario_from_dict(doc))
    second = simulate(scenario_from_dict(doc))
    for name in COLUMNS:
        assert np.array_equal(first.column(name), second.column(name))

    doc["simulation"]["seed"] = 4
    other = simulate(scenario_from_dict(doc))
    assert not np.array_equal(first.qdot_meas, other.qdot_meas)


def test_dob_rejects_constant_disturbance():
    doc = position_doc(duration=2.0, disturbance={"kind": "step", "amplitude": 1.0})
    trace = simulate(scenario_from_dict(doc))
    assert abs(trace.q_m[-1]) < 1e-4
    assert trace.tau_dis_hat[-1] == pytest.approx(1.0, abs=1e-3)


def test_disturbance_estimate_tracks_filtered_disturbance():
    g, T_s = 200.0, 1e-4
    omega = g / 10
    doc = position_doc(duration=1.0, disturbance={"kind": "sine", "amplitude": 1.0, "omega": omega})
    trace = simulate(scenario_from_dict(doc))

    gt = g * T_s
    a, b = (2.0 - gt) / (2.0 + gt), gt / (2.0 + gt)
    expected = signal.lfilter([b, b], [1.0, -a], np.sin(omega * trace.t))
    assert rms(trace.tau_dis_hat - expected) < 0.02 * rms(expected)


def test_force_step_settles(force_scenario_doc):
    trace = simulate(scenario_from_dict(force_scenario_doc))
    late = trace.t > 2.0
    assert np.all(np.abs(trace.tau_load_hat[late] - 1.0) < 1e-3)
    assert trace.q_m[-1] == pytest.approx(1e-3, rel=1e-2)


def test_known_disturbance_is_removed_from_reaction_estimate(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["references"]["disturbance"] = 0.5
    without = simulate(scenario_from_dict(doc))
    doc["references"]["disturbance_estimate"] = 0.5
    with_estimate = simulate(scenario_from_dict(doc))
    assert without.tau_load_true[-1] == pytest.approx(0.5, abs=1e-3)
    assert with_estimate.tau_load_true[-1] == pytest.approx(1.0, abs=1e-3)


def force_step_error(doc, T_s):
    doc = copy.deepcopy(doc)
    doc["simulation"].update(T_s=T_s, duration=0.5)
    scenario = scenario_from_dict(doc)
    trace = simulate(scenario)
    closed = build_rtob_loop(
        scenario.plant, scenario.nominal, scenario.identified, scenario.bw, scenario.env, scenario.gains.C_f
    ).closed
    num_d, den_d, _ = signal.cont2discrete(
        (closed.num.descending(), closed.den.descending()), T_s, method="zoh"
    )
    _, expected = signal.dlsim((np.squeeze(num_d), den_d, T_s), np.ones(len(trace)))
    expected = expected[:, 0]
    return rms(trace.tau_load_hat[10:] - expected[10:]) / rms(expected[10:])


def test_force_step_matches_discretized_closed_loop(force_scenario_doc):
    fine = force_step_error(force_scenario_doc, 1e-4)
    coarse = force_step_error(force_scenario_doc, 2e-4)
    assert fine < 0.01
    assert coarse / fine >= 1.8


def test_discretized_reference_matches_continuous_step(force_scenario_doc):
    scenario = scenario_from_dict(force_scenario_doc)
    closed = build_rtob_loop(
        scenario.plant, scenario.nominal, scenario.identified, scenario.bw, scenario.env, scenario.gains.C_f
    ).closed
    system = (closed.num.descending(), closed.den.descending())
    t = np.arange(5001) * 1e-4
    num_d, den_d, _ = signal.cont2discrete(system, 1e-4, method="zoh")
    _, discrete = signal.dlsim((np.squeeze(num_d), den_d, 1e-4), np.ones(len(t)))
    _, continuous = signal.step(system, T=t)
    assert np.max(np.abs(discrete[:, 0] - continuous)) < 1e-5


def test_unilateral_contact_only_pushes(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["environment"].update(q_env=0.01, contact_mode="unilateral")
    doc["simulation"]["duration"] = 1.0
    trace = simulate(scenario_from_dict(doc))
    assert trace.tau_load_true.min() >= 0.0
    assert not trace.tau_load_true[:100].any()
    assert trace.tau_load_true.max() > 0.0


def test_hybrid_with_zero_rho_equals_force_control(hybrid_path):
    doc = json.loads(hybrid_path.read_text())
    doc["simulation"]["duration"] = 1.0
    doc["rho_schedule"] = [[0.0, 0.0], [0.5, 1.0]]
    doc["references"]["position"] = 1e-3
    hybrid = simulate(scenario_from_dict(doc))

    force_doc = copy.deepcopy(doc)
    force_doc["mode"] = "force"
    del force_doc["rho_schedule"]
    force = simulate(scenario_from_dict(force_doc))

    head = slice(0, 4999)
    for name in ("q_m", "i_m", "tau_load_hat"):
        assert np.array_equal(hybrid.column(name)[head], force.column(name)[head])
    assert not np.array_equal(hybrid.i_m_des[5001:], force.i_m_des[5001:])


def test_unstable_design_raises_blowup(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["identified"] = {"J_hat": 0.15, "K_tau_hat": 5.0}
    doc["gains"]["C_f"] = 100.0
    with pytest.raises(NumericalBlowup) as exc:
        simulate(scenario_from_dict(doc))
    assert exc.value.channel in ("q_m", "qdot_m", "tau_dis_hat", "tau_load_hat")


def test_coarse_sampling_is_rejected(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["simulation"]["T_s"] = 1e-3
    with pytest.raises(ConfigError) as exc:
        simulate(scenario_from_dict(doc))
    assert exc.value.diagnostics[0][0] == "simulation.T_s"


def test_free_plant_matches_exponential_decay():
    plant = MotorPlant(MotorParams(J_m=0.1, K_tau=5.0, B=0.5), T_s=1e-3)
    q, qd = 0.0, 1.0
    for _ in range(1000):
        q, qd = plant.step(q, qd, 0.0)
    assert qd == pytest.approx(math.exp(-5.0), rel=1e-9)
    assert q == pytest.approx(0.2 * (1 - math.exp(-5.0)), rel=1e-9)


def test_contact_energy_never_grows():
    env = Environment(D_env=10.0, K_env=1000.0)
    params = MotorParams(J_m=0.1, K_tau=5.0, B=0.2)
    plant = MotorPlant(params, T_s=1e-4, env=env)
    q, qd = 0.01, 0.0
    energy = 0.5 * env.K_env * q ** 2
    for _ in range(2000):
        q, qd = plant.step(q, qd, 0.0)
        current = 0.5 * params.J_m * qd ** 2 + 0.5 * env.K_env * q ** 2
        assert current <= energy * (1 + 1e-12)
        energy = current


def test_lossless_contact_keeps_energy_in_simulation():
    """Released spring with negligible observer action: stored energy never grows."""
    doc = {
        "mode": "force",
        "plant": {"J_m": 0.1, "K_tau": 5.0},
        "nominal": {"J_mn": 0.1, "K_tau_n": 5.0},
        "bandwidths": {"g_DOB": 1e-9},
        "gains": {"C_f": 0.0},
        "environment": {"D_env": 0.0, "K_env": 1000.0},
        "simulation": {"T_s": 1e-4, "duration": 0.5, "q0": 0.01},
    }
    trace = simulate(scenario_from_dict(doc))
    assert np.abs(trace.i_m).max() < 1e-6

    energy = 0.5 * 0.1 * trace.qdot_m ** 2 + 0.5 * 1000.0 * trace.q_m ** 2
    assert np.all(energy[1:] <= energy[:-1] * (1 + 1e-6))
    assert energy[-1] == pytest.approx(energy[0], rel=1e-4)
    assert trace.q_m.min() < -0.009


def test_unilateral_load_torque():
    env = Environment(D_env=10.0, K_env=1000.0, q_env=0.01, contact_mode=ContactMode.UNILATERAL)
    plant = MotorPlant(MotorParams(J_m=0.1, K_tau=5.0), T_s=1e-4, env=env)
    assert plant.load_torque(0.0, 0.0) == 0.0
    assert plant.load_torque(0.02, 0.0) == pytest.approx(10.0)
    assert plant.load_torque(0.02, -5.0) == 0.0


def test_trace_rejects_ragged_columns():
    columns = {name: np.zeros(3) for name in COLUMNS}
    columns["q_m"] = np.zeros(2)
    with pytest.raises(ValueError):
        SimTrace(**columns)


def test_metrics_of_perfect_tracking():
    t = np.linspace(0.0, 1.0, 1001)
    m = trace_metrics(make_trace(t, np.ones_like(t), np.ones_like(t)), "q_m", "q_ref")
    assert m.overshoot_pct == 0.0
    assert m.settling_time_s == 0.0
    assert m.ss_error == 0.0
    assert m.rms_residual == 0.0


def test_metrics_of_second_order_step():
    xi, w_n = 0.5, 20.0
    t = np.linspace(0.0, 2.0, 2001)
    _, y = signal.step(([w_n ** 2], [1.0, 2 * xi * w_n, w_n ** 2]), T=t)
    m = trace_metrics(make_trace(t, y, np.ones_like(t)), "q_m", "q_ref")
    assert m.overshoot_pct == pytest.approx(100 * math.exp(-math.pi * xi / math.sqrt(1 - xi ** 2)), rel=1e-2)
    assert 0.3 < m.settling_time_s < 0.5
    assert abs(m.ss_error) < 1e-6


def test_metrics_rms_of_noise():
    rng = np.random.default_rng(21)
    t = np.linspace(0.0, 10.0, 100001)
    y = 1.0 + 0.01 * rng.standard_normal(len(t))
    m = trace_metrics(make_trace(t, y, np.ones_like(t)), "q_m", "q_ref")
    assert m.rms_residual == pytest.approx(0.01, rel=0.05)


def test_metrics_never_settling():
    t = np.linspace(0.0, 1.0, 101)
    m = trace_metrics(make_trace(t, np.zeros_like(t), np.ones_like(t)), "q_m", "q_ref")
    assert math.isinf(m.settling_time_s)
    assert m.ss_error == pytest.approx(-1.0)


def test_metrics_need_a_settled_reference():
    t = np.linspace(0.0, 1.0, 1001)
    with pytest.raises(NotSettled):
        trace_metrics(make_trace(t, np.zeros_like(t), np.sin(10 * t)), "q_m", "q_ref")


def test_unknown_channel():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(KeyError):
        make_trace(t, t, t).column("torque")
