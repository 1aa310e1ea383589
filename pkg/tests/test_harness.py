import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spreaddiv import __version__
from spreaddiv.cli import main
from spreaddiv.harness import (CANNED, HEADERS, PARAMS_HEADER, SCHEMAS, ConfigError,
                               ExperimentSpec, csv_text, execute, format_cell, parse_config,
                               run_experiment, serialize_config)

# fast parameter choices so every subcommand runs in well under a second
QUICK = {
    "check-kernel": {"n_omega": 5},
    "divergence": {},
    "subspace-noise": {"steps": 2000},
    "ica": {"n": 100, "iterations": 2, "s_z": 20, "x_dim": 4, "z_dim": 2},
    "pca": {},
    "dvae": {"epochs": 2, "n": 40},
    "toy2d": {"n": 50, "steps": 20},
}


# -- config format ------------------------------------------------------------

def test_minimal_ica_spec_defaults(monkeypatch):
    monkeypatch.delenv("SPREADDIV_SEED", raising=False)
    spec = parse_config("[experiment]\nsubcommand = ica\n")
    assert spec.seed == 0 and spec.name == "ica" and spec.output == "runs/ica"
    assert spec.params == {p.name: p.default for p in SCHEMAS["ica"]}
    assert spec.params["iterations"] == 100 and spec.params["sigma"] == "auto"


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("SPREADDIV_SEED", "42")
    assert parse_config("[experiment]\nsubcommand = pca\n").seed == 42


def test_full_spec_parses():
    text = ("[experiment]\nsubcommand = ica\nname = small\nseed = 3\noutput = out/x\n\n"
            "[ica]\niterations = 50\ngamma = 0.1\nsigma = 2.5\n")
    spec = parse_config(text)
    assert (spec.name, spec.seed, spec.output) == ("small", 3, "out/x")
    assert spec.params["iterations"] == 50 and spec.params["gamma"] == 0.1
    assert spec.params["sigma"] == 2.5


@pytest.mark.parametrize("sub", sorted(SCHEMAS))
def test_round_trip_defaults(sub):
    spec = ExperimentSpec(sub, {}, 5, "n", "o")
    assert parse_config(serialize_config(spec)) == spec


PARAM_VALUES = {
    "int": st.integers(0, 10**6),
    "float": st.floats(-1e6, 1e6, allow_nan=False),
    "bool": st.booleans(),
    "floats": st.lists(st.floats(0, 1), min_size=1, max_size=4).map(tuple),
    "ints": st.lists(st.integers(1, 64), max_size=3).map(tuple),
    "float|auto": st.one_of(st.just("auto"), st.floats(0.001, 10)),
    "str": st.text("abcxyz_-./:", min_size=1, max_size=10),
}


@st.composite
def specs(draw):
    sub = draw(st.sampled_from(sorted(SCHEMAS)))
    params = {}
    for p in SCHEMAS[sub]:
        if not draw(st.booleans()):
            continue
        if p.choices:
            params[p.name] = draw(st.sampled_from(p.choices))
        else:
            params[p.name] = draw(PARAM_VALUES[p.kind])
    seed = draw(st.integers(0, 2**31 - 1))
    name = draw(st.text("abcdef-_0123", min_size=1, max_size=8))
    return ExperimentSpec(sub, params, seed, name, "")


@settings(max_examples=100, deadline=None)
@given(specs())
def test_round_trip_property(spec):
    assert parse_config(serialize_config(spec)) == spec


def test_duplicate_key():
    with pytest.raises(ConfigError) as info:
        parse_config("[experiment]\nsubcommand = ica\n[ica]\ngamma = 0.1\ngamma = 0.2\n")
    assert info.value.key == "gamma" and info.value.line == 5


def test_unknown_key():
    with pytest.raises(ConfigError) as info:
        parse_config("[experiment]\nsubcommand = ica\n\n[ica]\nbogus = 1\n")
    assert info.value.key == "bogus" and info.value.line == 5
    assert "bogus" in str(info.value) and "line 5" in str(info.value)


def test_type_mismatch():
    with pytest.raises(ConfigError) as info:
        parse_config("[experiment]\nsubcommand = ica\n[ica]\niterations = many\n")
    assert info.value.key == "iterations" and info.value.line == 4


def test_missing_subcommand():
    with pytest.raises(ConfigError) as info:
        parse_config("[experiment]\nname = x\n")
    assert info.value.key == "subcommand"


def test_canned_section():
    spec = parse_config("[experiment]\nsubcommand = experiment\n[canned]\nwhich = fig4b\n")
    assert spec.params["which"] == "fig4b"


def test_unknown_section_and_subcommand():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nsubcommand = ica\n[pca]\nn = 3\n")
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nsubcommand = gan\n")


def test_bad_choice():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nsubcommand = dvae\n[dvae]\nspread = cauchy\n")


# -- output format ------------------------------------------------------------

def test_cells_17_digits():
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(True) == "true" and format_cell(3) == "3"


def test_csv_text():
    assert csv_text(("a", "b"), [(1, 0.5)]) == "a,b\n1,0.5\n"


@pytest.mark.parametrize("sub", sorted(QUICK))
def test_headers_fixed(sub):
    res = execute(ExperimentSpec(sub, QUICK[sub], 0))
    assert tuple(res.header) == HEADERS[sub]
    assert all(len(r) == len(res.header) for r in res.rows)
    assert res.rows


def test_dvae_writes_params(tmp_path):
    spec = ExperimentSpec("dvae", QUICK["dvae"], 0, output=str(tmp_path))
    status, out = run_experiment(spec)
    assert status == 0
    rows = list(csv.reader(open(out / "params.csv")))
    assert tuple(rows[0]) == PARAMS_HEADER and len(rows) > 1


def test_meta_contents(tmp_path):
    spec = ExperimentSpec("pca", {}, 7, output=str(tmp_path))
    run_experiment(spec)
    meta = (tmp_path / "meta.txt").read_text()
    assert "subcommand = pca" in meta and "seed = 7" in meta and __version__ in meta


@pytest.mark.parametrize("sub", ["ica", "dvae", "subspace-noise"])
def test_byte_identical_reruns(sub, tmp_path):
    spec = ExperimentSpec(sub, QUICK[sub], 3)
    run_experiment(spec, tmp_path / "a")
    run_experiment(spec, tmp_path / "b")
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_fig2c_minimum_at_zero():
    res = execute(ExperimentSpec("experiment", {"which": "fig2c"}, 0))
    assert tuple(res.header) == HEADERS["fig2c"]
    mu = np.array([r[0] for r in res.rows])
    kl = np.array([r[1] for r in res.rows])
    assert mu.min() == -3.0 and mu.max() == 3.0
    assert mu[np.argmin(kl)] == 0.0
    assert np.max(np.abs(kl - mu ** 2)) <= 1e-12


def test_canned_cheap_headers():
    for which, key in (("subspace", "subspace"), ("j1-demo", "j1-demo")):
        res = execute(ExperimentSpec("experiment", {"which": which, "instances": 3}, 0))
        assert tuple(res.header) == HEADERS[key]


def test_fig4a_small():
    res = execute(ExperimentSpec("experiment", {"which": "fig4a", "iterations": 2}, 0))
    assert tuple(res.header) == HEADERS["fig4a"]
    assert len(res.rows) == 10 and all(math.isfinite(r[2]) for r in res.rows)


def test_all_canned_listed():
    assert set(CANNED) == {"fig2c", "fig4a", "fig4b", "subspace", "toy2d", "j1-demo"}


# -- command line -------------------------------------------------------------

def test_cli_invalid_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ica", "--no-such-flag"])
    assert info.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_cli_bad_value(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ica", "--iters", "lots"])
    assert info.value.code == 2


def test_cli_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        main(["gan"])
    assert info.value.code == 2


def test_cli_report_to_stdout(capsys):
    assert main(["check-kernel", "--family", "laplace", "--scale", "1"]) == 0
    out = capsys.readouterr().out
    assert "valid=true" in out and "ft(1)=0.3989422804014327" in out


def test_cli_csv_to_stdout(capsys):
    assert main(["experiment", "fig2c"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert tuple(rows[0]) == HEADERS["fig2c"] and len(rows) == 26


def test_cli_writes_files(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["ica", "--iters", "2", "--sz", "20", "--n", "100", "--x-dim", "4", "--z-dim", "2",
                 "--seed", "1", "--out", str(out)]) == 0
    for name in ("results.csv", "meta.txt", "A_est_spread.csv", "A_est_standard.csv"):
        assert (out / name).exists()


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "spec.ini"
    cfg.write_text(f"[experiment]\nsubcommand = pca\noutput = {tmp_path / 'o'}\n")
    assert main(["experiment", "--config", str(cfg)]) == 0
    assert (tmp_path / "o" / "results.csv").exists() and (tmp_path / "o" / "F.csv").exists()


def test_cli_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "spec.ini"
    cfg.write_text("[experiment]\nsubcommand = pca\nsubcommand = ica\n")
    assert main(["experiment", "--config", str(cfg)]) == 1
    assert "subcommand" in capsys.readouterr().err


def test_cli_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["pca", "--out", str(blocker / "sub")]) == 1


def test_cli_bool_flag(capsys):
    assert main(["pca", "--demo-j1"]) == 0
    assert capsys.readouterr().out.startswith(",".join(HEADERS["j1-demo"]))


def test_cli_spread_file(tmp_path, capsys):
    P = tmp_path / "P.csv"
    P.write_text("0.75,0.25\n0.25,0.75\n")
    assert main(["divergence", "--p", "1,0", "--q", "0,1", "--spread-file", str(P)]) == 0
    out = capsys.readouterr().out
    report = dict(line.split("=") for line in out.split())
    assert report["original"] == "undefined"
    assert float(report["spread"]) == pytest.approx(0.5 * math.log(3), abs=1e-15)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spreaddiv.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout


def test_meta_replays_as_config(tmp_path):
    out = tmp_path / "a"
    assert main(["experiment", "fig2c", "--out", str(out)]) == 0
    replay = tmp_path / "b"
    assert main(["experiment", "--config", str(out / "meta.txt"), "--out", str(replay)]) == 0
    assert (out / "results.csv").read_bytes() == (replay / "results.csv").read_bytes()
