"""
Tests for scenario JSON loading, validation and normalised saving.
"""
import copy
import json
import math

import pytest

from dob_toolkit.domain.errors import InvalidScenario
from dob_toolkit.domain.models import ContactMode, Mode, Signal
from dob_toolkit.storage.scenario_file import (
    dump_scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def diagnostic_keys(exc_info):
    return [key for key, _ in exc_info.value.diagnostics]


def test_shipped_scenarios_load(position_path, hybrid_path):
    position = load_scenario(str(position_path))
    hybrid = load_scenario(str(hybrid_path))
    assert position.mode == Mode.POSITION
    assert position.bw.g_v == 2000.0
    assert position.ext_disturbance == Signal.step(1.0, start=0.5)
    assert hybrid.mode == Mode.HYBRID
    assert hybrid.env.contact_mode == ContactMode.BILATERAL
    assert hybrid.rho_schedule.at(7.0) == 1.0
    assert hybrid.rho_schedule.at(12.0) == 0.0


def test_defaults_are_filled_in(force_scenario_doc):
    scenario = scenario_from_dict(force_scenario_doc)
    assert scenario.identified.J_hat == scenario.plant.J_m
    assert math.isinf(scenario.bw.g_v)
    assert scenario.rho_schedule.at(0.0) == 0.0
    assert scenario.sim.seed == 0
    assert scenario.analysis.xi_min == 0.707


def test_rtob_bandwidth_defaults_to_dob_bandwidth(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    del doc["bandwidths"]["g_RTOB"]
    assert scenario_from_dict(doc).bw.g_RTOB == 500.0


def test_missing_required_key_is_named(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    del doc["plant"]["J_m"]
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    assert "plant.J_m" in diagnostic_keys(exc)


def test_every_problem_is_reported(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["plant"]["K_tau"] = "five"
    doc["nominal"]["color"] = "red"
    doc["references"]["force"] = {"kind": "ramp"}
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    keys = diagnostic_keys(exc)
    assert "plant.K_tau" in keys
    assert "nominal.color" in keys
    assert "references.force.kind" in keys


def test_unknown_top_level_key(force_scenario_doc):
    doc = dict(force_scenario_doc, plot=True)
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    assert diagnostic_keys(exc) == ["plot"]


def test_out_of_range_values(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["plant"]["J_m"] = -0.1
    doc["rho_schedule"] = [[0.0, 1.5]]
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    keys = diagnostic_keys(exc)
    assert "plant.J_m" in keys
    assert "rho_schedule[0]" in keys


def test_force_mode_needs_environment(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    del doc["environment"]
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    assert "environment" in diagnostic_keys(exc)


def test_position_mode_needs_gains(position_path):
    doc = json.loads(position_path.read_text())
    del doc["gains"]
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    assert "gains.K_P" in diagnostic_keys(exc)


def test_g_v_accepts_inf_only_there(force_scenario_doc):
    doc = copy.deepcopy(force_scenario_doc)
    doc["bandwidths"]["g_DOB"] = "inf"
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(doc)
    assert "bandwidths.g_DOB" in diagnostic_keys(exc)


def test_bad_mode(force_scenario_doc):
    with pytest.raises(InvalidScenario) as exc:
        scenario_from_dict(dict(force_scenario_doc, mode="impedance"))
    assert "mode" in diagnostic_keys(exc)


def test_round_trip_through_normalised_document(position_path, hybrid_path, force_scenario_doc):
    scenarios = [
        load_scenario(str(position_path)),
        load_scenario(str(hybrid_path)),
        scenario_from_dict(force_scenario_doc),
    ]
    for scenario in scenarios:
        doc = json.loads(json.dumps(scenario_to_dict(scenario)))
        assert scenario_from_dict(doc) == scenario


def test_normalised_document_spells_out_infinity(force_scenario_doc):
    doc = scenario_to_dict(scenario_from_dict(force_scenario_doc))
    assert doc["bandwidths"]["g_v"] == "inf"
    assert doc["environment"]["contact_mode"] == "bilateral"


def test_save_scenario_writes_sorted_json(tmp_path, force_scenario_doc):
    scenario = scenario_from_dict(force_scenario_doc)
    target = tmp_path / "nested" / "dir" / "scenario.json"
    save_scenario(str(target), scenario)

    text = target.read_text()
    assert text == dump_scenario(scenario)
    assert text.endswith("\n")
    assert text.startswith('{\n  "analysis"')
    assert load_scenario(str(target)) == scenario


def test_save_scenario_overwrites(tmp_path, force_scenario_doc, position_path):
    target = tmp_path / "scenario.json"
    save_scenario(str(target), scenario_from_dict(force_scenario_doc))
    save_scenario(str(target), load_scenario(str(position_path)))
    assert load_scenario(str(target)).mode == Mode.POSITION
    assert [p.name for p in tmp_path.iterdir()] == ["scenario.json"]


def test_missing_file(tmp_path):
    with pytest.raises(InvalidScenario) as exc:
        load_scenario(str(tmp_path / "nope.json"))
    assert "not found" in exc.value.diagnostics[0][1]


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(InvalidScenario) as exc:
        load_scenario(str(path))
    assert "invalid JSON" in exc.value.diagnostics[0][1]
