import sys
from pathlib import Path

import pytest

# Ensure src/ is on sys.path so `dob_toolkit` imports work without PYTHONPATH
PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC = PROJECT_ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

DATA = PROJECT_ROOT / "data"


@pytest.fixture
def position_path() -> Path:
    return DATA / "position_step.json"


@pytest.fixture
def hybrid_path() -> Path:
    return DATA / "hybrid_contact.json"


@pytest.fixture
def force_scenario_doc():
    """Force-control scenario: unit motor ratio, stiff environment, perfect identification."""
    return {
        "name": "force step",
        "mode": "force",
        "plant": {"J_m": 0.1, "K_tau": 5.0},
        "nominal": {"J_mn": 0.1, "K_tau_n": 5.0},
        "bandwidths": {"g_DOB": 500.0, "g_v": "inf", "g_RTOB": 1000.0},
        "gains": {"C_f": 1.0},
        "environment": {"D_env": 10.0, "K_env": 1000.0},
        "references": {"force": {"kind": "step", "amplitude": 1.0}},
        "simulation": {"T_s": 1e-4, "duration": 3.0},
    }
