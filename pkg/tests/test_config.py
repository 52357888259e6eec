import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logvisc import config as cf
from logvisc.errors import ConfigError

BASE = "model = solid\nscenario = rest_strained\nt_end = 0.5\n"


def test_minimal_config_uses_defaults():
    cfg = cf.parse_config_text(BASE)
    assert cfg.model == "solid" and cfg.t_end == 0.5
    assert cfg.nx == 64 and cfg.tau_r is None and cfg.track_F is False
    assert not cfg.uses_bref


def test_comments_blank_lines_and_types():
    text = "# header\n\n" + BASE + "nx = 32  # cells\ntau_r = none\ntrack_F = TRUE\nlx = 2.5\n"
    cfg = cf.parse_config_text(text)
    assert (cfg.nx, cfg.tau_r, cfg.track_F, cfg.lx) == (32, None, True, 2.5)


@pytest.mark.parametrize("extra, line, fragment", [
    ("colour = red\n", 4, "unknown key"),
    ("nx 32\n", 4, "expected 'key = value'"),
    ("nx = many\n", 4, "invalid value"),
    ("track_F = yes\n", 4, "invalid value"),
    ("t_end = 1\n", 4, "duplicate key"),
    ("eta =\n", 4, "missing value"),
    ("eta = 0\n", 4, "eta must be positive"),
    ("kappa = -1\n", 4, "kappa must be non-negative"),
    ("record_every = 0\n", 4, "record_every"),
    ("boundary = slippery\n", 4, "boundary must be one of"),
])
def test_errors_carry_line_numbers(extra, line, fragment):
    with pytest.raises(ConfigError) as info:
        cf.parse_config_text(BASE + extra)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}: ")
    assert fragment in str(info.value)


def test_missing_required_key_reports_last_line():
    with pytest.raises(ConfigError, match="missing required key 't_end'") as info:
        cf.parse_config_text("model = solid\nscenario = rest_strained\n")
    assert info.value.lineno == 2


def test_fluid_needs_relaxation_time():
    with pytest.raises(ConfigError, match="line 1: tau_r is required"):
        cf.parse_config_text("model = fluid\nscenario = rest_strained\nt_end = 1\n")
    cfg = cf.parse_config_text("model = fluid\nscenario = rest_strained\nt_end = 1\ntau_r = 2\n")
    assert cfg.uses_bref


def test_bad_model_points_at_its_line():
    with pytest.raises(ConfigError) as info:
        cf.parse_config_text("scenario = rest_strained\nt_end = 1\nmodel = plasma\n")
    assert info.value.lineno == 3


def test_dump_round_trip_is_byte_identical(tmp_path):
    cfg = cf.parse_config_text(BASE + "eta = 0.1\ntau_r = 0.3\namplitude = 0.7\n")
    text = cf.dump_config(cfg)
    again = cf.dump_config(cf.parse_config_text(text))
    assert again == text
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert cf.parse_config(path) == cfg
    assert cf.config_hash(cfg) == cf.config_hash(cf.parse_config_text(text))


def test_hash_changes_with_values():
    a = cf.parse_config_text(BASE)
    b = dataclasses.replace(a, eta=2.0)
    assert cf.config_hash(a) != cf.config_hash(b)
    assert len(cf.config_hash(a)) == 64


def test_every_key_is_documented():
    assert set(cf.DEFAULTS_DOC) == {f.name for f in dataclasses.fields(cf.SimConfig)}


pos = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(pos, pos, st.floats(0, 1e3), st.one_of(st.none(), pos), st.integers(8, 256), st.booleans())
def test_round_trip_property(eta, t_end, kappa, tau, nx, track):
    cfg = cf.SimConfig(model="fluid" if tau else "solid", scenario="rest_strained", t_end=t_end,
                       eta=eta, kappa=kappa, tau_r=tau, nx=nx, track_F=track)
    text = cf.dump_config(cfg)
    back = cf.parse_config_text(text)
    assert back == cfg
    assert cf.dump_config(back) == text
