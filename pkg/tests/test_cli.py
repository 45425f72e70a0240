"""End-to-end command line checks via subprocess."""

import json
import subprocess
import sys

import numpy as np
import pytest

from sketchlab import matio


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "sketchlab.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


@pytest.fixture()
def matrix_file(tmp_path):
    path = tmp_path / "m.sklb"
    r = run_cli("gen", "--kind", "svd", "--n", "128", "--r", "6",
                "--seed", "5", "--out", str(path))
    assert r.returncode == 0, r.stderr
    return path


# -- gen ---------------------------------------------------------------------

def test_gen_writes_matrix_and_reports_shape(tmp_path, matrix_file):
    payload = json.loads(run_cli("gen", "--kind", "svd", "--n", "64",
                                 "--r", "3", "--seed", "1",
                                 "--out", str(tmp_path / "g.sklb")).stdout)
    assert payload["rows"] == 64 and payload["cols"] == 64
    M = matio.read_matrix(tmp_path / "g.sklb")
    assert M.shape == (64, 64)
    assert np.linalg.matrix_rank(M, tol=1e-7) == 3


def test_gen_requires_out():
    r = run_cli("gen", "--kind", "svd", "--n", "16", "--r", "2")
    assert r.returncode == 2


@pytest.mark.parametrize("args,shape", [
    (("--kind", "laplacian", "--n", "64"), (64, 64)),
    (("--kind", "fd", "--preset", "small"), (88, 160)),
    (("--kind", "factor", "--m", "20", "--n", "15", "--r", "3"), (20, 15)),
])
def test_gen_other_kinds(tmp_path, args, shape):
    out = tmp_path / "x.sklb"
    r = run_cli("gen", *args, "--seed", "2", "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert matio.read_matrix(out).shape == shape


# -- approx --------------------------------------------------------------------

def test_approx_frozen_reference(tmp_path, matrix_file):
    out = tmp_path / "approx.json"
    r = run_cli("approx", "--input", str(matrix_file), "--multiplier", "3-aph",
                "--l", "18", "--tau", "1e-5", "--seed", "9", "--out", str(out))
    assert r.returncode == 0, r.stderr
    payload = json.loads(out.read_text())
    assert payload["status"] == "success"
    assert payload["delta"] == pytest.approx(4.370986771033058e-10, rel=1e-9)
    assert payload["flops"] == {"additions": 49152, "multiplications": 0}
    assert payload["l_used"] == 18


def test_approx_reports_failure_exit_code(matrix_file):
    r = run_cli("approx", "--input", str(matrix_file), "--multiplier", "3-aph",
                "--l", "18", "--tau", "1e-30", "--seed", "9")
    assert r.returncode == 1
    assert json.loads(r.stdout)["status"] == "failure"


def test_approx_missing_input_exits_2():
    r = run_cli("approx", "--input", "no-such-file.sklb", "--l", "4",
                "--tau", "1.0")
    assert r.returncode == 2
    assert "no-such-file" in r.stderr


# -- recursive -------------------------------------------------------------------

def test_recursive_reports_block_history(matrix_file):
    r = run_cli("recursive", "--input", str(matrix_file),
                "--multiplier", "3-asph", "--block-size", "4",
                "--tau", "1e-5", "--seed", "7")
    assert r.returncode == 0, r.stderr
    payload = json.loads(r.stdout)
    assert payload["status"] == "success"
    assert payload["stage"] == len(payload["history"])
    widths = [h["l_used"] for h in payload["history"]]
    assert widths == sorted(widths)


def test_recursive_explicit_blocks(matrix_file):
    r = run_cli("recursive", "--input", str(matrix_file),
                "--multiplier", "3-asph",
                "--blocks", ",".join(["8"] * 16), "--tau", "1e-5",
                "--seed", "7")
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["history"][0]["l_used"] == 8


# -- lsr ----------------------------------------------------------------------------

def test_lsr_coverage_met_exits_0(tmp_path):
    out = tmp_path / "lsr.json"
    r = run_cli("lsr", "--m", "400", "--d", "10", "--k", "20",
                "--kind", "orthogonal", "--trials", "60",
                "--coverage", "1.0", "--seed", "3", "--out", str(out))
    assert r.returncode == 0, r.stderr
    payload = json.loads(out.read_text())
    assert payload["coverage"] >= payload["coverage_target"]
    assert payload["k"] == 20


def test_lsr_coverage_missed_exits_1():
    r = run_cli("lsr", "--m", "64", "--d", "5", "--k", "1",
                "--trials", "40", "--coverage", "0.99", "--seed", "3")
    assert r.returncode == 1
    payload = json.loads(r.stdout)
    assert payload["coverage"] < 0.99


def test_lsr_default_k_from_dimension_rule():
    r = run_cli("lsr", "--m", "256", "--d", "5",
                "--delta", "0.36787944117144233", "--xi", "1.0",
                "--trials", "10", "--seed", "2")
    payload = json.loads(r.stdout)
    assert payload["k"] == 6


# -- bench ------------------------------------------------------------------------------

def test_bench_writes_json_and_figures(tmp_path):
    out = tmp_path / "t6.json"
    r = run_cli("bench", "--table", "6", "--trials", "2", "--out", str(out))
    assert r.returncode == 0, r.stderr
    payload = json.loads(out.read_text())
    assert payload["table_id"] == 6
    assert payload["smoke"] is True
    pngs = sorted(p.name for p in tmp_path.glob("*.png"))
    assert pngs == ["t6.json_deltas.png", "t6.json_means.png"]


def test_bench_no_figures_flag(tmp_path):
    out = tmp_path / "t6.csv"
    r = run_cli("bench", "--table", "6", "--trials", "2", "--format", "csv",
                "--no-figures", "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert list(tmp_path.glob("*.png")) == []
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("table,row,cell,")
    assert len(lines) == 1 + 10  # header + 2 sizes x 5 recipes


def test_bench_rejects_unknown_table():
    r = run_cli("bench", "--table", "11", "--trials", "2")
    assert r.returncode == 2


# -- audit and norms ---------------------------------------------------------------------

def test_audit_reports_all_families_ok(tmp_path):
    out = tmp_path / "audit.json"
    r = run_cli("audit", "--sizes", "128", "--out", str(out))
    assert r.returncode == 0, r.stderr
    rows = json.loads(out.read_text())["rows"]
    assert all(row["ok"] for row in rows)
    families = {row["family"] for row in rows}
    assert "abridged-hadamard" in families


def test_mc_norms_square_notice():
    r = run_cli("mc-norms", "--m", "100", "--n", "100", "--trials", "120",
                "--seed", "8")
    assert r.returncode == 0, r.stderr
    payload = json.loads(r.stdout)
    assert payload["norm_ok"] is True
    assert payload["mean_pinv_norm"] is None
    assert "skip" in payload["notice"]


def test_mc_norms_rectangular_bound():
    r = run_cli("mc-norms", "--m", "200", "--n", "100", "--trials", "120",
                "--seed", "8")
    payload = json.loads(r.stdout)
    assert r.returncode == 0
    assert payload["pinv_ok"] is True


# -- config files -------------------------------------------------------------------------

def test_toml_config_supplies_defaults(tmp_path):
    cfg = tmp_path / "lsr.toml"
    cfg.write_text('m = 400\nd = 10\nk = 20\nkind = "orthogonal"\n'
                   'trials = 60\ncoverage = 1.0\nseed = 3\n')
    r = run_cli("--config", str(cfg), "lsr")
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["k"] == 20


def test_config_satisfies_required_flags(tmp_path, matrix_file):
    # hyphenated keys map to option names; tau comes from the file only
    cfg = tmp_path / "rec.toml"
    cfg.write_text("block-size = 4\ntau = 1e-5\nseed = 7\n")
    r = run_cli("--config", str(cfg), "recursive", "--input",
                str(matrix_file), "--multiplier", "3-asph")
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["tau"] == 1e-5


def test_explicit_flag_wins_over_config(tmp_path):
    cfg = tmp_path / "lsr.toml"
    cfg.write_text("m = 400\nd = 10\nk = 20\ntrials = 10\nseed = 3\n")
    r = run_cli("--config", str(cfg), "lsr", "--k", "44")
    assert json.loads(r.stdout)["k"] == 44


def test_json_config_accepted(tmp_path):
    cfg = tmp_path / "lsr.json"
    cfg.write_text(json.dumps({"m": 64, "d": 4, "k": 12, "trials": 10,
                               "seed": 2}))
    r = run_cli("--config", str(cfg), "lsr")
    assert r.returncode == 0, r.stderr


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("bogus_key = 1\n")
    r = run_cli("--config", str(cfg), "lsr", "--m", "64", "--d", "4",
                "--k", "8", "--trials", "5")
    assert r.returncode == 2
    assert "unknown config keys" in r.stderr


def test_missing_config_file_rejected():
    r = run_cli("--config", "no-such.toml", "lsr", "--m", "64", "--d", "4",
                "--k", "8", "--trials", "5")
    assert r.returncode == 2


def test_sectioned_config_rejected(tmp_path):
    # the schema is flat: keys name options of the chosen subcommand
    cfg = tmp_path / "sect.toml"
    cfg.write_text("[lsr]\nm = 400\n")
    r = run_cli("--config", str(cfg), "lsr", "--m", "64", "--d", "4",
                "--k", "8", "--trials", "5")
    assert r.returncode == 2


# -- parser basics ---------------------------------------------------------------------------

def test_unknown_subcommand_exits_2():
    assert run_cli("nope").returncode == 2


def test_help_exits_0():
    r = run_cli("--help")
    assert r.returncode == 0
    for sub in ("gen", "approx", "recursive", "lsr", "bench", "audit",
                "mc-norms"):
        assert sub in r.stdout
