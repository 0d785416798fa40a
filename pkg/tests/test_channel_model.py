import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plateflow.channel_model import (
    ChannelConfig,
    GaussianBump,
    InitialData,
    check_decay,
    config_from_dict,
    gaussian_data,
    load_config,
    make_config,
    uniform_config,
    validate,
)
from plateflow.errors import ConfigError, NonMonotoneHeights, NonPositiveGap, WrongFlowCount


def test_minimal_config():
    cfg = validate(ChannelConfig((0, 1, 2), (0, 0)))
    assert cfg.n == 1
    np.testing.assert_array_equal(cfg.gaps, [1.0, 1.0])
    assert cfg.width == 2.0
    assert not cfg.has_flow


def test_figure2_config_is_valid():
    cfg = uniform_config(6, 0.1)
    assert cfg.n == 6 and cfg.flows.size == 7
    assert np.all(cfg.flows == 0.1)


@pytest.mark.parametrize(
    "heights, flows, err",
    [
        ((0, 2, 1), (0, 0), NonMonotoneHeights),
        ((0, 1, 1, 2), (0, 0, 0), NonPositiveGap),
        ((0, 1, 2), (0, 0, 0), WrongFlowCount),
        ((0, 1), (0,), ConfigError),
        ((0, np.nan, 2), (0, 0), ConfigError),
    ],
)
def test_invalid_configs(heights, flows, err):
    with pytest.raises(err):
        validate(ChannelConfig(heights, flows))


def test_config_is_immutable():
    cfg = make_config([1, 2], [0.1, 0.2])
    with pytest.raises(ValueError):
        cfg.flows[0] = 1.0


gaps_st = st.lists(st.floats(0.01, 100.0), min_size=2, max_size=17)


@given(gaps_st, st.data())
def test_validate_idempotent_and_width(gaps, data):
    flows = data.draw(st.lists(st.floats(-5, 5), min_size=len(gaps), max_size=len(gaps)))
    cfg = make_config(gaps, flows)
    again = validate(cfg)
    assert again == cfg
    np.testing.assert_array_equal(again.gaps, cfg.gaps)
    assert cfg.width == pytest.approx(cfg.gaps.sum(), rel=1e-12)


def test_scaled_and_with_flows():
    cfg = make_config([1, 2, 3], [0.1, 0.0, -0.1])
    np.testing.assert_allclose(cfg.scaled(2.0).gaps, [2, 4, 6])
    np.testing.assert_array_equal(cfg.scaled(2.0).flows, cfg.flows)
    assert not cfg.with_flows([0, 0, 0]).has_flow


def test_digest_stable():
    a = make_config([1, 1], [0.1, 0.2])
    b = make_config([1, 1], [0.1, 0.2])
    assert a.digest() == b.digest()
    assert a.digest() != make_config([1, 1], [0.1, 0.3]).digest()


def test_gaussian_defaults_and_sampling():
    x = np.linspace(-20, 20, 401)
    data = gaussian_data(3, [1, 3])
    eta, eta_t = data.sample(x)
    assert eta.shape == (3, 401)
    assert eta[0].max() == pytest.approx(0.1)
    assert np.all(eta[1] == 0) and np.all(eta_t == 0)
    assert data.metadata()[0] == {"plate": 1, "center": 0.0, "width": 2.0, "amplitude": 0.1, "field": "amplitude"}


def test_velocity_bump():
    x = np.linspace(-20, 20, 101)
    eta, eta_t = InitialData(1, (GaussianBump(1, velocity=True),)).sample(x)
    assert np.all(eta == 0) and eta_t.max() > 0


def test_non_decaying_data_rejected():
    x = np.linspace(-5, 5, 101)
    with pytest.raises(ConfigError):
        InitialData(1, (GaussianBump(1, width=4.0),)).sample(x)
    check_decay(np.zeros(5))


def test_bad_plate_index():
    with pytest.raises(ConfigError):
        InitialData(2, (GaussianBump(3),))


def test_json_roundtrip(tmp_path):
    doc = {
        "heights": [0, 1, 3],
        "flows": [0.2, -0.2],
        "initial": [{"plate": 1, "center": 1.0, "width": 1.5, "amplitude": 0.05}],
        "description": "ignored",
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    cfg, data = load_config(path)
    assert cfg.to_dict() == {"heights": [0.0, 1.0, 3.0], "flows": [0.2, -0.2]}
    assert data.bumps[0].width == 1.5


def test_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"heights": [0, 1, 2]})
    with pytest.raises(ConfigError):
        config_from_dict({"heights": [0, 1, 2], "flows": [0, 0], "initial": [{"plate": 1, "field": "mass"}]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


@settings(max_examples=25)
@given(st.integers(1, 6), st.floats(0.5, 4.0))
def test_uniform_config(n, gap):
    cfg = uniform_config(n, 0.3, gap)
    assert cfg.n == n
    assert cfg.width == pytest.approx((n + 1) * gap)
