import math

import pytest

from odmrkit import constants
from odmrkit.params import (
    PROVENANCE,
    ConfigError,
    DefectParams,
    RunConfig,
    T1Model,
    config_from_dict,
    default_params,
    load_config,
    serialize_config,
)


def test_constants_positive():
    constants.CONSTANTS.validate()
    assert constants.CONSTANTS.mu_b_mhz_per_gauss == pytest.approx(1.3996245, rel=1e-6)
    assert constants.CONSTANTS.mev_to_kelvin(1.0) == pytest.approx(11.6045, rel=1e-4)


def test_defaults_pass_invariants():
    p = default_params()
    p.validate()
    assert p.d_splitting_mhz == 1063.11
    assert p.t_opt_us == 156.3
    assert p.branching == (1 / 3, 1 / 3, 1 / 3)
    assert sum(p.branching) == pytest.approx(1.0, abs=1e-12)


def test_every_field_has_provenance():
    import dataclasses

    for f in dataclasses.fields(DefectParams):
        assert f.name in PROVENANCE, f"missing provenance note for {f.name}"
        assert PROVENANCE[f.name]


def test_t1_model_pins_1p6_seconds_at_15k():
    p = default_params()
    assert p.t1_model.t1_seconds(15.0) == pytest.approx(1.6, rel=1e-12)
    assert p.t1_us(15.0) == pytest.approx(1.6e6, rel=1e-12)


def test_t1_model_domain():
    m = T1Model(kind="raman", a=1.0, delta_t_k=3.2, power=9)
    with pytest.raises(ValueError):
        m.rate_per_s(3.0)
    orb = T1Model(kind="orbach", a=1.0, e_mev=20.0)
    assert orb.rate_per_s(1e-3) < 1e-300 or orb.rate_per_s(1e-3) == 0.0


def test_empty_document_gives_defaults():
    cfg = load_config("")
    assert cfg == RunConfig()
    cfg2 = load_config("{}")
    assert cfg2 == RunConfig()


def test_branching_sum_violation_reports_value():
    with pytest.raises(ConfigError, match="branching sums to 1.1"):
        config_from_dict({"defect": {"branching": [0.5, 0.5, 0.1]}})


def test_rabi_protocol_at_158_gauss():
    cfg = load_config('{"field_b_gauss": 158, "protocol": {"id": "rabi"}}')
    assert cfg.field_b_gauss == 158
    assert cfg.protocol.id == "rabi"


def test_roundtrip_serialization_field_by_field():
    cfg = config_from_dict(
        {
            "field_b_gauss": 27.5,
            "temperature_k": 18.0,
            "defect": {"g_parallel": 1.99, "eseem_components": [[0.2, 90.0]]},
            "detection": {"repetitions": 777, "dark_rate_cps": 6000},
            "protocol": {"id": "hahn_echo", "sweep_start": 0, "sweep_stop": 100, "sweep_num": 21},
        }
    )
    text = serialize_config(cfg)
    again = load_config(text)
    assert again == cfg


def test_unknown_field_path_in_error():
    with pytest.raises(ConfigError, match="defect.bogus"):
        config_from_dict({"defect": {"bogus": 1}})
    with pytest.raises(ConfigError, match="malformed"):
        load_config("{not json")


def test_invariant_checks():
    with pytest.raises(ConfigError):
        config_from_dict({"detection": {"collection_efficiency": 0.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"detection": {"repetitions": 0}})
    with pytest.raises(ConfigError):
        config_from_dict({"ensemble": {"n_nodes": 4}})
    with pytest.raises(ConfigError):
        config_from_dict({"protocol": {"sweep_values": [0.0, 1.0, 0.5]}})
    with pytest.raises(ConfigError):
        config_from_dict({"defect": {"t2_star_ns": -5}})


def test_env_var_config_path(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text('{"temperature_k": 21.5}')
    monkeypatch.setenv("ODMRKIT_CONFIG", str(path))
    cfg = load_config()
    assert cfg.temperature_k == 21.5


def test_immutability():
    p = default_params()
    with pytest.raises(Exception):
        p.d_splitting_mhz = 1.0
    q = p.replace(g_parallel=1.98)
    assert q.g_parallel == 1.98 and p.g_parallel == 2.00
    with pytest.raises(ConfigError):
        p.replace(t_opt_us=-1.0)


def test_t2star_convention_note():
    # the fitted 307 ns value is adopted, not the abstract's 317 ns
    assert default_params().t2_star_ns == 307.0
    assert math.isclose(default_params().t2_star_us, 0.307)
