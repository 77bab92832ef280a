import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from selfdistill.cli import main
from selfdistill.config import defaults_reference
from selfdistill.results import read_results

TINY = """
seed = 3
generations = 3
[dataset]
k = 3
d = 4
n_train = 120
n_test = 90
cluster_spread = 3.0
subclusters = 1
[model]
hidden = [8]
cross_hidden = [6, 6]
[train]
epochs = 4
batch_size = 32
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(TINY)
    return p


def test_no_args_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "ban" in capsys.readouterr().out


def test_config_error_exit_one(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[scheme]\ntemprature = 2.0\n")
    assert main(["train", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "scheme.temprature" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.toml")]) == 1


def test_runtime_error_exit_two(cfg_path, tmp_path, capsys):
    assert main(["metrics", "--config", str(cfg_path), "--checkpoint", str(tmp_path / "nope.dfck")]) == 2
    assert "error" in capsys.readouterr().err


def test_ban_writes_csv_svgs_and_meta(cfg_path, tmp_path):
    out = tmp_path / "r"
    assert main(["ban", "--config", str(cfg_path), "--out", str(out)]) == 0
    recs = read_results(out / "results.csv")
    assert [r.generation for r in recs] == [0, 1, 2]
    svgs = sorted(out.glob("*.svg"))
    assert len(svgs) == 4
    for s in svgs:
        ET.parse(s)
    meta = json.loads((out / "meta.json").read_text())
    assert meta["artifact_version"] == "0.1.0"
    assert meta["config_hash"] == recs[0].config_hash
    assert meta["config"]["generations"] == 3


def test_ban_output_is_byte_deterministic(cfg_path, tmp_path):
    for d in ("a", "b"):
        assert main(["ban", "--config", str(cfg_path), "--out", str(tmp_path / d)]) == 0
    for name in ("results.csv", "meta.json", "generation_accuracy.svg", "gen2_s3.dfck"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_overrides_config(cfg_path, tmp_path):
    assert main(["train", "--config", str(cfg_path), "--seed", "11", "--out", str(tmp_path)]) == 0
    assert read_results(tmp_path / "results.csv")[0].seed == 11
    assert (tmp_path / "model_s11.dfck").exists()


@pytest.mark.parametrize("seed", [3, 4])
def test_metrics_recompute_is_bit_exact(cfg_path, tmp_path, capsys, seed):
    out = tmp_path / "t"
    assert main(["train", "--config", str(cfg_path), "--repeats", "2", "--out", str(out)]) == 0
    row = next(r for r in read_results(out / "results.csv") if r.seed == seed)
    capsys.readouterr()
    assert main(["metrics", "--config", str(cfg_path), "--seed", str(seed),
                 "--checkpoint", str(out / f"model_s{seed}.dfck")]) == 0
    m = json.loads(capsys.readouterr().out)
    assert (m["accuracy"], m["nll"], m["ece"]) == (row.accuracy, row.nll, row.ece)


def test_metrics_writes_file_when_out_given(cfg_path, tmp_path):
    main(["train", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert main(["metrics", "--config", str(cfg_path), "--checkpoint", str(tmp_path / "model_s3.dfck"),
                 "--split", "train", "--out", str(tmp_path / "m")]) == 0
    assert "avg_pred_uncertainty" in json.loads((tmp_path / "m" / "metrics_train.json").read_text())


def test_compare_and_plot(cfg_path, tmp_path):
    out = tmp_path / "c"
    assert main(["compare", "--config", str(cfg_path), "--repeats", "2", "--out", str(out)]) == 0
    assert (out / "summary.csv").read_text().startswith("scheme,n,accuracy_mean")
    assert {p.name for p in out.glob("*.svg")} == {"schemes_accuracy.svg", "schemes_ece.svg"}
    assert main(["plot", str(out / "results.csv"), "--out", str(tmp_path / "p")]) == 0
    assert len(list((tmp_path / "p").glob("*.svg"))) == 2


def test_temperature_with_ban_reference(cfg_path, tmp_path):
    main(["ban", "--config", str(cfg_path), "--out", str(tmp_path / "b")])
    out = tmp_path / "t"
    assert main(["temperature", "--config", str(cfg_path), "--T", "1", "2", "--out", str(out),
                 "--ban-table", str(tmp_path / "b" / "results.csv")]) == 0
    assert "over generations" in (out / "temperature_accuracy.svg").read_text()


def test_sweep_writes_summary(cfg_path, tmp_path):
    assert main(["sweep", "--config", str(cfg_path), "--axis", "trainset_size", "--values", "60", "100",
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("trainset_size,60,")


def test_sweep_rejects_bad_axis(cfg_path, tmp_path):
    assert main(["sweep", "--config", str(cfg_path), "--axis", "dropout", "--values", "1"]) == 1


def test_cross(cfg_path, tmp_path):
    assert main(["cross", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    assert [r.scheme for r in read_results(tmp_path / "results.csv")] == ["sd_a", "sd_b", "cd_a_to_b", "cd_b_to_a"]


def test_calibrate_t(cfg_path, tmp_path, capsys):
    main(["train", "--config", str(cfg_path), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["calibrate-t", "--config", str(cfg_path), "--checkpoint", str(tmp_path / "model_s3.dfck"),
                 "--alpha", "0.6", "--g", "0.85"]) == 0
    assert float(capsys.readouterr().out) > 0
    assert main(["calibrate-t", "--config", str(cfg_path), "--alpha", "0.9", "--g", "0.85"]) == 2


def test_config_reference_matches_docs(capsys):
    assert main(["config-reference"]) == 0
    out = capsys.readouterr().out
    assert out == defaults_reference() + "\n"
    assert out == (Path(__file__).resolve().parents[1] / "docs" / "config_reference.md").read_text()
