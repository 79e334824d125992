"""Shared fixtures: a small, fast synthetic setup for CLI/service tests."""

import json

import pytest

SMALL_SYNTH = {
    "n_total": 240,
    "n_abnormal": 24,
    "planted_rules": [{"features": ["trigger"], "implies": "abnormal"}],
    "base_rates": {"trigger": 0.11, "n1": 0.3, "n2": 0.25, "bg": 0.4},
    "columns": [["bg", "Demographics"], ["trigger", "BCT"],
                 ["n1", "BCT"], ["n2", "BCT"]],
    "default_rate": 0.2,
}

SMALL_TESTS = {
    "tests": [
        {"name": "Trigger", "cost": 100, "discomfort": 2, "columns": ["trigger"]},
        {"name": "NoiseOne", "cost": 100, "discomfort": 3, "columns": ["n1"]},
        {"name": "NoiseTwo", "cost": 100, "discomfort": 1, "columns": ["n2"]},
    ]
}


@pytest.fixture
def small_config_path(tmp_path):
    tests_path = tmp_path / "tests.json"
    tests_path.write_text(json.dumps(SMALL_TESTS))
    config = {
        "pipeline": {"degree": 2, "seed": 5, "max_epochs": 200, "protocol": "paper"},
        "synth": SMALL_SYNTH,
        "tests": str(tests_path),
        "store": str(tmp_path / "store"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path
