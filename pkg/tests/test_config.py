import pytest

from cqedspec import ValidationError, parse_config, preset
from cqedspec.config import PRESETS, ConfigError, dump_document, load_document, parse_document, parse_frequency, preset_document

FIG2A = """
levels:
  delta23: 5 Gamma
  delta34: 10 Gamma
coupling:
  g_sqrt_n: 4.3 Gamma
cavity:
  kappa: 2 Gamma
  delta_c: 0 Gamma
scan:
  dp_min: -30 Gamma
  dp_max: 15 Gamma
  points: 451
"""

FIG2A_MHZ = """
units:
  gamma_mhz: 6.0
levels:
  delta23: 30 MHz
  delta34: 60 MHz
coupling:
  g_sqrt_n: 25.8 MHz
cavity:
  kappa: 12 MHz
  delta_c: 0 MHz
scan:
  dp_min: -180 MHz
  dp_max: 90 MHz
  points: 451
"""


def test_fig2a_text():
    cfg = parse_config(FIG2A)
    assert cfg.ladder.offsets == (-15.0, -10.0, 0.0)
    assert cfg.coupling.strengths == (4.3, 4.3, 4.3)
    assert cfg.cavity.kappa == 2.0 and cfg.cavity.delta_c == 0.0
    assert cfg.grid.points == 451


def test_mhz_equivalent_to_gamma_units():
    a = parse_config(FIG2A)
    b = parse_config(FIG2A_MHZ)
    assert b.ladder.offsets == pytest.approx(a.ladder.offsets, abs=1e-12)
    assert b.coupling.strengths == pytest.approx(a.coupling.strengths, rel=1e-12)
    assert b.cavity.kappa == pytest.approx(a.cavity.kappa, rel=1e-12)
    assert b.grid.dp_min == pytest.approx(a.grid.dp_min, rel=1e-12)


def test_missing_kappa_names_path():
    text = FIG2A.replace("  kappa: 2 Gamma\n", "")
    with pytest.raises(ConfigError, match="cavity.kappa"):
        parse_config(text)


def test_nonpositive_kappa_names_path():
    with pytest.raises(ConfigError, match="cavity.kappa"):
        parse_config(FIG2A.replace("kappa: 2 Gamma", "kappa: -2 Gamma"))


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="cavity.finesse"):
        parse_config(FIG2A.replace("  delta_c: 0 Gamma", "  delta_c: 0 Gamma\n  finesse: 3"))


def test_untagged_frequency_rejected():
    with pytest.raises(ConfigError, match="levels.delta23"):
        parse_config(FIG2A.replace("delta23: 5 Gamma", "delta23: 5"))


def test_mhz_without_calibration_rejected():
    with pytest.raises(ConfigError, match="gamma_mhz"):
        parse_config(FIG2A.replace("kappa: 2 Gamma", "kappa: 12 MHz"))


def test_syntax_error_is_config_error():
    with pytest.raises(ConfigError):
        load_document("levels: [unclosed")
    assert issubclass(ConfigError, ValidationError)


def test_per_transition_coupling():
    text = FIG2A.replace("  g_sqrt_n: 4.3 Gamma", "  per_transition: [1 Gamma, 2 Gamma, 3 Gamma]")
    assert parse_config(text).coupling.strengths == (1.0, 2.0, 3.0)


def test_missing_scan_gets_auto_grid():
    text = FIG2A.split("scan:")[0]
    cfg = parse_config(text)
    assert cfg.grid.dp_min < -15 - 4.3 and cfg.grid.dp_max > 4.3


@pytest.mark.parametrize(
    "value,expected",
    [("4.3 Gamma", 4.3), ("10MHz", 2.0), ({"value": 15, "unit": "MHz"}, 3.0), ("-2.5 gamma", -2.5)],
)
def test_parse_frequency(value, expected):
    assert parse_frequency(value, "x", 5.0) == pytest.approx(expected)


def test_parse_frequency_errors():
    with pytest.raises(ConfigError):
        parse_frequency("4 GHz", "x", 5.0)
    with pytest.raises(ConfigError):
        parse_frequency(4.0, "x", 5.0)


def test_dump_round_trip():
    doc = load_document(FIG2A)
    assert parse_document(load_document(dump_document(doc))).system == parse_document(doc).system


def test_theory_presets_match_captions():
    a = preset("fig2a")
    assert a.ladder.offsets == (-15.0, -10.0, 0.0)
    assert a.cavity.kappa == 2.0 and a.cavity.delta_c == 0.0
    assert a.coupling.strengths == (4.3, 4.3, 4.3)
    assert PRESETS["fig2a"].g_variants == (2.3, 3.3, 4.3)
    assert [preset(f"fig2{p}").cavity.delta_c for p in "abcd"] == [0.0, -5.0, -10.0, -12.5]
    f3 = preset("fig3")
    assert f3.coupling.strengths[0] == 10.0 and f3.cavity.kappa == 2.0
    f6 = preset("fig6")
    assert f6.coupling.strengths[0] == 4.5 and f6.cavity.delta_c == 0.0 and f6.cavity.kappa == 2.0


def test_rb85_preset():
    doc = preset_document("rb85-d2")
    assert doc["cavity"]["kappa"] == "10 MHz"
    assert doc["levels"] == {"delta23": "31.7 MHz", "delta34": "60.3 MHz"}
    assert PRESETS["rb85-d2"].panels == {"a": "0 MHz", "b": "0 MHz", "c": "-31.7 MHz", "d": "-78.1 MHz"}
    assert "-71.8" in PRESETS["rb85-d2"].notes
    with pytest.raises(ConfigError, match="coupling.g_sqrt_n"):
        preset("rb85-d2")
    cfg = preset("rb85-d2", "30 MHz", panel="d")
    gam = 6.0666
    assert cfg.cavity.delta_c == pytest.approx(-78.1 / gam)
    assert cfg.cavity.kappa == pytest.approx(10 / gam)
    assert cfg.ladder.offsets == pytest.approx((-92.0 / gam, -60.3 / gam, 0.0))
    assert preset("rb85-d2", panel="a").coupling.strengths == (0.0, 0.0, 0.0)


def test_unknown_preset_and_panel():
    with pytest.raises(ConfigError, match="fig2a"):
        preset("fig9")
    with pytest.raises(ConfigError):
        preset("rb85-d2", "30 MHz", panel="z")
    with pytest.raises(ConfigError):
        preset("fig3", panel="a")
