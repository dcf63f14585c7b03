"""Flat config loading and parameter validation."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from needlesim import ConfigError, SimParams, load_params, params_from_flat
from needlesim.params import params_to_flat


def test_defaults_validate():
    params = SimParams().validate()
    assert params.tissue.k_t == 2.0
    assert params.loop.rate_hz == 1000
    assert params.feedback.actuator.transport_delay_ms == 45.0


def test_flat_overrides_reach_each_group():
    params = params_from_flat({
        "k_t": 3.0,
        "rate_hz": 2000,
        "bar_full_scale": 4.0,
        "actuator_max_force": 6.0,
        "pd_stiffness": 250.0,
        "repetitions": 3,
        "hand_max": 0.08,
    })
    assert params.tissue.k_t == 3.0
    assert params.loop.rate_hz == 2000
    assert params.feedback.bar_full_scale == 4.0
    assert params.feedback.actuator.max_force == 6.0
    assert params.operator.pd_stiffness == 250.0
    assert params.harness.repetitions == 3
    assert params.server.hand_max == 0.08


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        params_from_flat({"bogus": 1})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        params_from_flat({"k_vf": -1.0})
    with pytest.raises(ConfigError):
        params_from_flat({"z_vf": 0.01})
    with pytest.raises(ConfigError):
        params_from_flat({"rate_hz": 400})  # dt above the 2 ms margin


def test_config_file_round_trip(tmp_path: Path):
    flat = params_to_flat(SimParams())
    flat["feedback_delay_ms"] = 50.0
    flat["seed"] = 9
    path = tmp_path / "config.json"
    path.write_text(json.dumps(flat))
    params = load_params(path)
    assert params.loop.feedback_delay_ms == 50.0
    assert params.harness.seed == 9
    assert params_to_flat(params)["feedback_delay_ms"] == 50.0


def test_config_file_must_be_flat_object(tmp_path: Path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(ConfigError):
        load_params(path)
