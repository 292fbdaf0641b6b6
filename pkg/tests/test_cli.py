"""Command line interface tests, driving ``main(argv)`` in-process."""

import csv
import json

import pytest

from bcfsim.cli import main
from bcfsim.dgp import DgpSpec, generate

TINY_CFG = (
    "selections = extreme\n"
    "alphas = 4\n"
    "models = no_propensity\n"
    "n = 40\n"
    "replicates = 1\n"
    "iterations = 30\n"
    "burn_in = 15\n"
    "master_seed = 3\n"
)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    """One minimal CLI run shared by the artifact and report tests."""
    root = tmp_path_factory.mktemp("cli_run")
    cfg = root / "study.cfg"
    cfg.write_text(TINY_CFG, encoding="utf-8")
    out = root / "run"
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    return cfg, out


# ---------------------------------------------------------------------------
# generate

def test_generate_writes_dataset(tmp_path, capsys):
    dest = tmp_path / "draw.csv"
    code = main(["generate", "--dgp", "moderate", "--alpha", "2",
                 "--n", "40", "--seed", "5", "--out", str(dest)])
    assert code == 0
    assert "wrote 40 rows" in capsys.readouterr().out

    with open(dest, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "x2", "x3", "x4", "x5",
                       "pi_true", "d", "y", "cate_true"]
    assert len(rows) == 41

    # the CLI is a thin wrapper: bytes must match the library call
    twin = tmp_path / "twin.csv"
    generate(DgpSpec("moderate", 2.0, 40), 5).to_csv(twin)
    assert dest.read_bytes() == twin.read_bytes()


def test_generate_rejects_unsupported_alpha(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--dgp", "moderate", "--alpha", "3",
              "--n", "10", "--seed", "1", "--out", str(tmp_path / "x.csv")])
    assert exc.value.code == 2


def test_generate_unwritable_destination_is_a_clean_error(tmp_path, capsys):
    dest = tmp_path / "missing_dir" / "draw.csv"
    code = main(["generate", "--dgp", "slight", "--alpha", "1",
                 "--n", "10", "--seed", "1", "--out", str(dest)])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# run

def test_run_writes_artifacts(tiny_run):
    _, out = tiny_run
    for name in ("run_config.json", "replicates.csv", "digests.csv",
                 "summary_extreme_4.csv", "timing.json"):
        assert (out / name).exists(), name
    lines = (out / "replicates.csv").read_text().splitlines()
    assert len(lines) == 2  # header + 1 replicate x 1 model
    config = json.loads((out / "run_config.json").read_text())
    assert config["master_seed"] == 3
    assert config["replicates"] == 1


def test_run_refuses_dirty_directory_then_resumes(tiny_run, capsys):
    cfg, out = tiny_run
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    assert code == 1
    assert "resume" in capsys.readouterr().err

    before = (out / "replicates.csv").read_bytes()
    code = main(["run", "--config", str(cfg), "--out", str(out), "--resume"])
    assert code == 0
    assert "wrote 1 replicate records" in capsys.readouterr().out
    assert (out / "replicates.csv").read_bytes() == before


def test_run_seed_flag_overrides_config(tiny_run, tmp_path):
    cfg, _ = tiny_run
    out = tmp_path / "reseeded"
    assert main(["run", "--config", str(cfg), "--out", str(out),
                 "--seed", "77"]) == 0
    config = json.loads((out / "run_config.json").read_text())
    assert config["master_seed"] == 77


def test_run_full_profile_keeps_config(tiny_run, tmp_path):
    cfg, _ = tiny_run
    out = tmp_path / "full"
    assert main(["run", "--config", str(cfg), "--out", str(out),
                 "--profile", "full"]) == 0
    config = json.loads((out / "run_config.json").read_text())
    assert config["replicates"] == 1
    assert config["iterations"] == 30


def test_run_requires_an_output_directory(tmp_path, capsys):
    cfg = tmp_path / "no_out.cfg"
    cfg.write_text("replicates = 1\n", encoding="utf-8")
    code = main(["run", "--config", str(cfg)])
    assert code == 1
    assert "output directory" in capsys.readouterr().err


def test_run_reports_config_file_typos(tmp_path, capsys):
    cfg = tmp_path / "typo.cfg"
    cfg.write_text("replicas = 3\n", encoding="utf-8")
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "unknown config key" in err


# ---------------------------------------------------------------------------
# report

def test_report_rebuilds_summaries(tiny_run, capsys):
    _, out = tiny_run
    summary = out / "summary_extreme_4.csv"
    original = summary.read_bytes()
    summary.unlink()
    assert main(["report", "--from", str(out)]) == 0
    assert "rebuilt reports for 1 records" in capsys.readouterr().out
    assert summary.read_bytes() == original


def test_report_on_empty_directory_fails_cleanly(tmp_path, capsys):
    code = main(["report", "--from", str(tmp_path)])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# argument parsing

def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["analyze"])
    assert exc.value.code == 2
