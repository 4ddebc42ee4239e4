import json
import logging
import math
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Any, Dict, List, Optional, Tuple

from dob_toolkit.domain.errors import InvalidScenario
from dob_toolkit.domain.models import (
    AnalysisDefaults,
    ContactMode,
    Environment,
    IdentifiedModel,
    Mode,
    MotorParams,
    NominalModel,
    ObserverBandwidths,
    OuterLoopGains,
    RhoSchedule,
    Scenario,
    Signal,
    SimConfig,
    ZERO_SIGNAL,
)

Diagnostics = List[Tuple[str, str]]

REQUIRED = object()

# section -> {key: default}; REQUIRED marks mandatory keys
SECTIONS: Dict[str, Dict[str, Any]] = {
    "plant": {"J_m": REQUIRED, "K_tau": REQUIRED, "B": 0.0, "F_c": 0.0},
    "nominal": {"J_mn": REQUIRED, "K_tau_n": REQUIRED},
    "identified": {"J_hat": REQUIRED, "K_tau_hat": REQUIRED, "B_hat": 0.0, "F_c_hat": 0.0},
    "bandwidths": {"g_DOB": REQUIRED, "g_v": math.inf, "g_RTOB": None},
    "gains": {"K_P": 0.0, "K_D": 0.0, "C_f": 0.0},
    "environment": {"D_env": REQUIRED, "K_env": REQUIRED, "q_env": 0.0, "contact_mode": "bilateral"},
    "simulation": {"T_s": 1e-4, "duration": 1.0, "noise_std": 0.0, "seed": 0, "q0": 0.0, "qdot0": 0.0},
    "analysis": {
        "omega_lo": 1.0,
        "omega_hi": 1e5,
        "points_per_decade": 60,
        "gain_lo": 1e-3,
        "gain_hi": 1e4,
        "gains_per_decade": 60,
        "alpha_lo": 0.01,
        "alpha_hi": 10.0,
        "xi_min": 0.707,
    },
}
OPTIONAL_SECTIONS = ("identified", "environment")
INTEGER_KEYS = {"seed", "points_per_decade", "gains_per_decade"}
TOP_LEVEL = {"name", "mode", "rho_schedule", "references"} | set(SECTIONS)
REFERENCES = ("position", "force", "disturbance", "disturbance_estimate")
SIGNAL_KEYS = {
    "constant": {"value": REQUIRED},
    "step": {"amplitude": REQUIRED, "start": 0.0, "initial": 0.0},
    "sine": {"amplitude": REQUIRED, "omega": REQUIRED, "phase": 0.0, "offset": 0.0},
}


def _number(value: Any, key: str, diag: Diagnostics, allow_inf: bool = False) -> Optional[float]:
    if allow_inf and value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        expected = "a number or 'inf'" if allow_inf else "a number"
        diag.append((key, f"must be {expected} (got {value!r})"))
        return None
    return float(value)


def _integer(value: Any, key: str, diag: Diagnostics) -> Optional[int]:
    if isinstance(value, bool) or not isinstance(value, int):
        diag.append((key, f"must be an integer (got {value!r})"))
        return None
    return value


def _unknown_keys(doc: Dict[str, Any], allowed, prefix: str, diag: Diagnostics) -> None:
    for key in sorted(set(doc) - set(allowed)):
        diag.append((f"{prefix}.{key}" if prefix else key, "unknown key"))


def _section(doc: Dict[str, Any], name: str, diag: Diagnostics) -> Optional[Dict[str, Any]]:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        diag.append((name, "must be an object"))
        return None
    schema = SECTIONS[name]
    _unknown_keys(raw, schema, name, diag)
    values: Dict[str, Any] = {}
    ok = True
    for key, default in schema.items():
        path = f"{name}.{key}"
        if key not in raw:
            if default is REQUIRED:
                diag.append((path, "required"))
                ok = False
            else:
                values[key] = default
            continue
        value = raw[key]
        if default is None and value is None:
            values[key] = None
            continue
        if key in INTEGER_KEYS:
            parsed = _integer(value, path, diag)
        elif key == "contact_mode":
            parsed = value if value in (m.value for m in ContactMode) else None
            if parsed is None:
                diag.append((path, "must be 'bilateral' or 'unilateral'"))
        else:
            parsed = _number(value, path, diag, allow_inf=(key == "g_v"))
        if parsed is None:
            ok = False
        values[key] = parsed
    return values if ok else None


def _signal(raw: Any, key: str, diag: Diagnostics) -> Signal:
    if raw is None:
        return ZERO_SIGNAL
    if not isinstance(raw, dict):
        value = _number(raw, key, diag)
        return Signal.constant(value) if value is not None else ZERO_SIGNAL
    kind = raw.get("kind", "constant")
    if kind not in SIGNAL_KEYS:
        diag.append((f"{key}.kind", f"must be one of {', '.join(SIGNAL_KEYS)}"))
        return ZERO_SIGNAL
    schema = SIGNAL_KEYS[kind]
    _unknown_keys(raw, set(schema) | {"kind"}, key, diag)
    values = {}
    for name, default in schema.items():
        if name not in raw:
            if default is REQUIRED:
                diag.append((f"{key}.{name}", "required"))
            else:
                values[name] = default
            continue
        parsed = _number(raw[name], f"{key}.{name}", diag)
        if parsed is not None:
            values[name] = parsed
    if len(values) < len(schema):
        return ZERO_SIGNAL
    return Signal(kind=kind, **values)


def _rho_schedule(raw: Any, diag: Diagnostics) -> Optional[RhoSchedule]:
    if raw is None:
        return None
    if not isinstance(raw, list):
        diag.append(("rho_schedule", "must be a list of [t_start, rho] pairs"))
        return None
    points = []
    for i, pair in enumerate(raw):
        key = f"rho_schedule[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            diag.append((key, "must be a [t_start, rho] pair"))
            continue
        t_start, rho = _number(pair[0], key, diag), _number(pair[1], key, diag)
        if t_start is not None and rho is not None:
            points.append((t_start, rho))
    return RhoSchedule(tuple(points))


def scenario_from_dict(doc: Any) -> Scenario:
    """Validate a decoded scenario document. Raises InvalidScenario listing every problem."""
    diag: Diagnostics = []
    if not isinstance(doc, dict):
        raise InvalidScenario([("<document>", "must be a JSON object")])
    _unknown_keys(doc, TOP_LEVEL, "", diag)

    mode = doc.get("mode")
    if mode not in (m.value for m in Mode):
        diag.append(("mode", "must be one of position, force, hybrid"))
        mode = None
    name = doc.get("name", "")
    if not isinstance(name, str):
        diag.append(("name", "must be a string"))

    parsed = {
        section: _section(doc, section, diag)
        for section in SECTIONS
        if section in doc or section not in OPTIONAL_SECTIONS
    }

    refs = doc.get("references", {})
    signals: Dict[str, Signal] = {}
    if not isinstance(refs, dict):
        diag.append(("references", "must be an object"))
        refs = {}
    _unknown_keys(refs, REFERENCES, "references", diag)
    for key in REFERENCES:
        signals[key] = _signal(refs.get(key), f"references.{key}", diag)
    rho = _rho_schedule(doc.get("rho_schedule"), diag)

    if diag or mode is None:
        raise InvalidScenario(diag)

    environment = None
    if parsed.get("environment") is not None:
        env = dict(parsed["environment"])
        env["contact_mode"] = ContactMode(env["contact_mode"])
        environment = Environment(**env)
    scenario = Scenario(
        mode=Mode(mode),
        plant=MotorParams(**parsed["plant"]),
        nominal=NominalModel(**parsed["nominal"]),
        bw=ObserverBandwidths(**parsed["bandwidths"]),
        gains=OuterLoopGains(**parsed["gains"]),
        identified=IdentifiedModel(**parsed["identified"]) if parsed.get("identified") else None,
        env=environment,
        rho_schedule=rho,
        position_ref=signals["position"],
        force_ref=signals["force"],
        ext_disturbance=signals["disturbance"],
        disturbance_estimate=signals["disturbance_estimate"],
        sim=SimConfig(**parsed["simulation"]),
        analysis=AnalysisDefaults(**parsed["analysis"]),
        name=name,
    )
    problems = scenario.problems()
    if problems:
        raise InvalidScenario(problems)
    return scenario


def load_scenario(path: str) -> Scenario:
    p = Path(path)
    if not p.exists():
        raise InvalidScenario([(str(path), "scenario file not found")])
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidScenario([(str(path), f"invalid JSON: {e}")]) from e
    scenario = scenario_from_dict(doc)
    logging.info("Loaded %s scenario from %s", scenario.mode.value, path)
    return scenario


def _encode_number(value: float) -> Any:
    if math.isinf(value):
        return "inf"
    return value


def _signal_to_dict(sig: Signal) -> Dict[str, Any]:
    out: Dict[str, Any] = {"kind": sig.kind}
    for key in SIGNAL_KEYS[sig.kind]:
        out[key] = getattr(sig, key)
    return out


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Normalised document: every key present with its effective value."""
    doc: Dict[str, Any] = {
        "name": scenario.name,
        "mode": scenario.mode.value,
        "plant": {k: getattr(scenario.plant, k) for k in SECTIONS["plant"]},
        "nominal": {k: getattr(scenario.nominal, k) for k in SECTIONS["nominal"]},
        "identified": {k: getattr(scenario.identified, k) for k in SECTIONS["identified"]},
        "bandwidths": {k: _encode_number(getattr(scenario.bw, k)) for k in SECTIONS["bandwidths"]},
        "gains": {k: getattr(scenario.gains, k) for k in SECTIONS["gains"]},
        "rho_schedule": [[t, rho] for t, rho in scenario.rho_schedule.points],
        "references": {
            "position": _signal_to_dict(scenario.position_ref),
            "force": _signal_to_dict(scenario.force_ref),
            "disturbance": _signal_to_dict(scenario.ext_disturbance),
            "disturbance_estimate": _signal_to_dict(scenario.disturbance_estimate),
        },
        "simulation": {k: getattr(scenario.sim, k) for k in SECTIONS["simulation"]},
        "analysis": {k: getattr(scenario.analysis, k) for k in SECTIONS["analysis"]},
    }
    if scenario.env is not None:
        env = {k: getattr(scenario.env, k) for k in SECTIONS["environment"]}
        env["contact_mode"] = scenario.env.contact_mode.value
        doc["environment"] = env
    return doc


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n"


def save_scenario(path: str, scenario: Scenario) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    # Atomic write
    with NamedTemporaryFile("w", delete=False, dir=str(p.parent), encoding="utf-8") as tmp:
        tmp.write(dump_scenario(scenario))
        tmp.flush()
    Path(tmp.name).replace(p)
