import copy
import json

import pytest

from nshops import ConfigError, ModelDomainError, Rectangular, Triangular
from nshops.config import SCHEMA, SCHEMA_VERSION, canonical_text, load_config, parse_config, parse_dict

BASE = {
    "schema": SCHEMA_VERSION,
    "system": {"kind": "two_level", "omega0": 5.0, "coupling": "sigma_x"},
    "initial_state": [0.7071067811865476, [0.5, -0.5]],
    "bath": {"kind": "single_mode_squeezed",
             "params": {"gamma": 1.0, "omega0": 5.0, "r": 1.5, "phi": 0.0, "Gamma": 1.0}},
    "method": "pme",
    "truncation": {"kind": "rectangular", "nmax": [100]},
    "T": 10.0,
    "h": 0.001,
}

DPA = {"kind": "dpa_three_mode",
       "params": {"gamma": 1.0, "omega0": 5.0, "Gamma0": 2.0, "Gamma": 1.0, "eps": 0.5, "phi": 3.14159}}


def variant(**kw):
    d = copy.deepcopy(BASE)
    d.update(kw)
    return d


def test_squeezed_config_roundtrip(configs):
    cfg = load_config(configs / "squeezed_pme.json")
    text = cfg.canonical()
    again = parse_config(text)
    assert again.canonical() == text
    assert again.method == "pme"
    assert again.truncation() == Rectangular((100,))
    assert again.n_steps == 10000
    assert json.loads(text)["bath"]["params"]["r"] == 1.5


def test_defaults_filled():
    cfg = parse_dict(BASE)
    assert cfg["stored_points"] == 1000
    assert cfg["seed"] == 0
    assert cfg["noise"] == "auto"
    assert cfg.frame_frequency() == 5.0


def test_pme_with_dpa_rejected():
    with pytest.raises(ConfigError, match="pme requires f_j = g_j for all modes"):
        parse_dict(variant(bath=DPA, truncation={"kind": "triangular", "nsum": 5}))


def test_psse_with_dpa_rejected():
    with pytest.raises(ConfigError, match="psse requires f_j = g_j for all modes"):
        parse_dict(variant(bath=DPA, method="psse-nonlinear", truncation={"kind": "triangular", "nsum": 5}))


def test_negative_rate_rejected_with_key_path():
    bad = variant()
    bad["bath"]["params"]["Gamma"] = -1.0
    with pytest.raises(ConfigError) as err:
        parse_dict(bad)
    assert err.value.path == "bath.params.Gamma"
    assert "bath.params.Gamma" in str(err.value)


def test_unknown_key_rejected_with_key_path():
    bad = variant()
    bad["bath"]["params"]["Gama"] = 1.0
    with pytest.raises(ConfigError) as err:
        parse_dict(bad)
    assert err.value.path == "bath.params"
    assert "Gama" in str(err.value)
    with pytest.raises(ConfigError, match="extra"):
        parse_dict(variant(extra=1))


def test_schema_version_required():
    with pytest.raises(ConfigError, match="schema"):
        parse_dict(variant(schema="nshops.run/0"))


@pytest.mark.parametrize(
    "kw, path",
    [
        ({"h": 0.003}, "h"),
        ({"stored_points": 3000}, "stored_points"),
        ({"trajectories": 0}, "trajectories"),
        ({"initial_state": [1.0]}, "initial_state"),
        ({"initial_state": [0, 0]}, "initial_state"),
        ({"truncation": {"kind": "rectangular", "nmax": [3, 3]}}, "truncation.nmax"),
        ({"truncation": {"kind": "triangular"}}, "truncation"),
        ({"method": "heom"}, "method"),
    ],
)
def test_invariants(kw, path):
    with pytest.raises(ConfigError) as err:
        parse_dict(variant(**kw))
    assert err.value.path == path


def test_malformed_text():
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_domain_violation_is_not_a_config_error():
    bath = copy.deepcopy(DPA)
    bath["params"]["eps"] = 1.5
    with pytest.raises(ModelDomainError):
        parse_dict(variant(bath=bath, method="hops-nonlinear", truncation={"kind": "triangular", "nsum": 5}))


def test_matrix_system_and_modes_bath():
    d = variant(
        system={"kind": "matrix", "hamiltonian": [[2.5, 0], [0, -2.5]], "coupling": [[1, 0], [0, -1]]},
        bath={"kind": "modes", "modes": [
            {"rate": 1.0, "f": {"type": "stationary", "amp": 1.0, "freq": 5.0},
             "g": {"type": "stationary", "amp": [1.0, 0.0], "freq": 5.0}}]},
        method="hme",
        truncation={"kind": "triangular", "nsum": 4},
    )
    cfg = parse_dict(d)
    assert cfg.bath().pseudomode_ok
    assert cfg.truncation() == Triangular(4, 1)
    assert cfg.frame_frequency() == 0.0
    assert cfg.system().coupling[1, 1] == -1


def test_scan_rules():
    with pytest.raises(ConfigError, match="stochastic"):
        parse_dict(variant(scan={"axis": "trajectories", "values": [10]}))
    with pytest.raises(ConfigError, match="rectangular"):
        parse_dict(variant(truncation={"kind": "triangular", "nsum": 3}, scan={"axis": "nmax", "values": [2]}))
    with pytest.raises(ConfigError, match="integers"):
        parse_dict(variant(scan={"axis": "nmax", "values": [2.5]}))
    with pytest.raises(ConfigError) as err:
        parse_dict(variant(bath=DPA, method="hops-nonlinear", truncation={"kind": "triangular", "nsum": 3},
                           scan={"axis": "nsum", "values": [2]}))
    assert err.value.path == "scan.reference.truncation"


def test_seed_override_and_canonical_text():
    cfg = parse_dict(BASE).with_overrides(seed=9)
    assert cfg["seed"] == 9
    assert canonical_text(cfg.data).endswith("}\n")
    assert SCHEMA["properties"]["schema"]["const"] == SCHEMA_VERSION
