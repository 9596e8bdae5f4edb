import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timeres.cli import main
from timeres.config import (
    ConfigError,
    ScenarioConfig,
    config_hash,
    default_config,
    load_config,
    parse_config,
    serialize_config,
)

FAST_HOM = """
[circuit]
phase_steps = 16
[analysis]
tau_max_ps = 800
"""


def test_defaults_are_valid():
    for name in ("hom", "fusion", "scattershot", "projections", "analyze"):
        cfg = default_config(name).validate()
        assert cfg.name == name
    assert default_config("fusion").preset == "f4"
    assert len(default_config("scattershot").detunings_ghz) == 4
    assert ScenarioConfig().rep_period_ps == 20000


def test_round_trip_is_identity():
    cfg = default_config("scattershot").with_overrides(seed=7, r=0.5, delayed=True)
    back = parse_config(serialize_config(cfg))
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 10**6),
    st.lists(st.floats(1, 1000, allow_nan=False), min_size=1, max_size=6, unique=True),
    st.floats(0, 1),
    st.booleans(),
)
def test_round_trip_property(seed, windows, r, delayed):
    cfg = ScenarioConfig(seed=seed, windows_ps=sorted(windows, reverse=True), r=r, delayed=delayed)
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize(
    "text",
    [
        "[circuit]\npreset = nope\n",
        "[analysis]\nwindows_ps = 20, 50\n",
        "[bogus]\nx = 1\n",
        "[scenario]\nunknown = 1\n",
        "[scenario]\nseed = abc\n",
        "[circuit]\nr = 1.5\n",
        "[sources]\ndetunings_ghz = 1, 2, 3\n",
        "not an ini file",
        "[analysis]\ndelayed = maybe\n",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")


def _run(tmp_path, name, *extra, config=None):
    args = [name, "--out", str(tmp_path)]
    if config is not None:
        p = tmp_path / "cfg.ini"
        p.write_text(config)
        args += ["--config", str(p)]
    return main(args + list(extra))


def test_cli_hom_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert _run(a, "hom", "--seed", "3", config=FAST_HOM) == 0
    assert _run(b, "hom", "--seed", "3", config=FAST_HOM) == 0
    files = sorted(p.name for p in a.glob("*.csv"))
    assert "hom_fringes.csv" in files and "hom_visibility.csv" in files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    first = (a / "hom_visibility.csv").read_text().splitlines()[0]
    assert first.startswith("# timeres 0.1.0 seed=3 config=")
    assert "window 20 ps" in capsys.readouterr().out


def test_cli_dump_config_and_overrides(capsys):
    assert main(["hom", "--dump-config", "--detuning-ghz", "5", "--windows", "100,10"]) == 0
    cfg = parse_config(capsys.readouterr().out)
    assert cfg.detunings_ghz == [-2.5, 2.5]
    assert cfg.windows_ps == [100.0, 10.0]


def test_cli_config_errors(tmp_path, capsys):
    assert main(["hom", "--windows", "10,100", "--dump-config"]) == 1
    assert _run(tmp_path, "hom", config="[circuit]\npreset = zzz\n") == 1
    assert "config error" in capsys.readouterr().err


def test_cli_analyze_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,100\n0,x\n")
    assert _run(tmp_path, "analyze", str(bad)) == 2
    assert "line 2" in capsys.readouterr().err
    assert _run(tmp_path, "analyze", str(tmp_path / "missing.csv")) == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert _run(tmp_path, "analyze", str(empty)) == 0


def test_cli_projections(tmp_path):
    cfg = "[projections]\ndetuning_points = 9\ndetuning_max_ghz = 50\n"
    assert _run(tmp_path, "projections", config=cfg) == 0
    rows = (tmp_path / "projections.csv").read_text().splitlines()
    assert rows[1] == "detuning_ghz,jitter_fwhm_ps,visibility"
    # detuning 0 is always included in front of the log grid
    assert len(rows) == 2 + 10 * 3
    assert rows[2].startswith("0,109,1.0000")


@pytest.mark.slow
def test_cli_scattershot_export_then_analyze(tmp_path):
    cfg = "[scenario]\nsamples = 4000\n[analysis]\nn_repeats = 5\nsubset_size = 500\n"
    assert _run(tmp_path, "scattershot", "--export-tags", config=cfg) == 0
    tags = tmp_path / "scattershot_timetags.csv"
    assert tags.exists()
    assert (tmp_path / "scattershot_window_sweep.csv").exists()
    assert _run(tmp_path, "analyze", str(tags), config=cfg) == 0
    rows = (tmp_path / "analyze_distributions.csv").read_text().splitlines()
    assert rows[0].startswith("# timeres")
    assert len(rows) > 2
