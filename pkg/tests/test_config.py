import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ehduty.config import KEYS, SimConfig, load_preset, parse_config, preset_text, serialize_config
from ehduty.errors import ParseError
from ehduty.policies import PolicyKind


def test_empty_document_is_the_preset():
    assert parse_config("") == SimConfig() == load_preset()


def test_preset_file_lists_every_key():
    listed = [line.split("=")[0].strip() for line in preset_text().splitlines() if line and not line.startswith("#")]
    assert listed == KEYS


def test_alpha_bound_named():
    with pytest.raises(ParseError) as exc:
        parse_config("alpha = 1.5")
    assert exc.value.key == "alpha" and exc.value.line == 1
    assert "[0, 1]" in str(exc.value)


def test_published_energy_values_accepted():
    cfg = parse_config("e_tx = 10, e_idle = 1, eta = 1, d_max = 4")
    assert (cfg.e_tx, cfg.e_idle, cfg.eta, cfg.d_max) == (10, 1, 1.0, 4.0)


def test_comments_exp_and_auto():
    cfg = parse_config("# header\ni_min = exp(-2)  # threshold\n\nburn_in = auto\npolicy = grid-search\n")
    assert cfg.i_min == math.exp(-2) and cfg.burn_in is None and cfg.policy is PolicyKind.GRID_SEARCH


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("bogus = 1", "bogus", 1),
        ("alpha = 0.1\nalpha = 0.2", "alpha", 2),
        ("\nn_devices = ten", "n_devices", 2),
        ("n_devices = 2.5", "n_devices", 1),
        ("eta = -1", "eta", 1),
        ("i_min = 2", "i_min", 1),
        ("geometry_mode = magic", "geometry_mode", 1),
        ("policy = best", "policy", 1),
    ],
)
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.key == key
    assert exc.value.line == line


def test_line_without_assignment():
    with pytest.raises(ParseError) as exc:
        parse_config("alpha 0.1")
    assert exc.value.line == 1


def test_unreachable_threshold_is_a_warning():
    with pytest.warns(UserWarning, match="e_tx"):
        cfg = parse_config("e_tx = 20, e_max = 10")
    assert cfg.e_tx == 20


configs = st.builds(
    SimConfig,
    width=st.floats(0.5, 100),
    height=st.floats(0.5, 100),
    n_devices=st.integers(1, 500),
    alpha=st.floats(0, 1),
    eta=st.floats(0.01, 5),
    e_max=st.integers(10, 500),
    e_tx=st.integers(1, 10),
    e_idle=st.integers(0, 5),
    e_h=st.integers(1, 5),
    lambda_tau=st.floats(0.01, 10),
    d_max=st.floats(0.1, 10),
    k_neighbors=st.integers(1, 10),
    policy=st.sampled_from(list(PolicyKind)),
    wakeup_sensing=st.sampled_from(["deterministic", "bernoulli"]),
    geometry_mode=st.sampled_from(["oracle-geometry", "estimated"]),
    tti_count=st.integers(0, 10**6),
    burn_in=st.one_of(st.none(), st.integers(0, 1000)),
    n_runs=st.integers(1, 1000),
    base_seed=st.integers(0, 2**63),
)


@given(configs)
def test_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg
