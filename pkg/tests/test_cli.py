import numpy as np
import pytest

from personnet import cli
from personnet.config import format_config, tiny_config


@pytest.fixture
def run_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(format_config(tiny_config(max_iterations=40, validation_interval=20)),
                    encoding="utf-8")
    return path


@pytest.fixture
def small_data(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path / "data"), "--identities", "4",
                     "--per-view", "2", "--seed", "3"]) == 0
    return tmp_path / "data" / "manifest.csv"


def test_synth_writes_corpus_and_refuses_overwrite(tmp_path, small_data, capsys):
    assert len(list(small_data.parent.glob("*.ppm"))) == 16
    assert cli.main(["synth", "--out", str(small_data.parent), "--identities", "4"]) == 2
    assert "not empty" in capsys.readouterr().err
    assert cli.main(["synth", "--out", str(small_data.parent), "--identities", "4",
                     "--per-view", "2", "--seed", "3", "--force"]) == 0


def test_train_then_eval(tmp_path, run_cfg, small_data, capsys):
    ckpt, metrics = tmp_path / "m.pnet", tmp_path / "metrics.csv"
    assert cli.main(["train", "--config", str(run_cfg), "--data", str(small_data),
                     "--out", str(ckpt), "--metrics", str(metrics), "--seed", "1"]) == 0
    rows = metrics.read_text().splitlines()
    assert rows[0] == "iteration,loss,learning_rate,val_rank1"
    assert len(rows) == 41
    assert rows[20].split(",")[3] != "" and rows[19].split(",")[3] == ""

    outs = []
    for name in ("a.csv", "b.csv"):
        assert cli.main(["eval", "--checkpoint", str(ckpt), "--data", str(small_data),
                         "--trials", "3", "--out", str(tmp_path / name), "--seed", "5"]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    printed = capsys.readouterr().out
    assert "rank-1:" in printed and "mAP:" in printed


def test_train_is_seed_deterministic(tmp_path, run_cfg, small_data):
    blobs = []
    for k in range(2):
        out = tmp_path / f"m{k}.pnet"
        cli.main(["train", "--config", str(run_cfg), "--data", str(small_data),
                  "--out", str(out), "--seed", "4"])
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


def test_train_missing_manifest(tmp_path, run_cfg, capsys):
    out = tmp_path / "m.pnet"
    code = cli.main(["train", "--config", str(run_cfg), "--data", str(tmp_path / "none.csv"),
                     "--out", str(out)])
    assert code != 0
    assert not out.exists()
    assert "does not exist" in capsys.readouterr().err


def test_train_config_error_reports_line(tmp_path, small_data, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("training.seed = 1\nnetwork.bogus = 2\n", encoding="utf-8")
    assert cli.main(["train", "--config", str(bad), "--data", str(small_data),
                     "--out", str(tmp_path / "m.pnet")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_eval_reports_format_error(tmp_path, small_data, capsys):
    junk = tmp_path / "junk.pnet"
    junk.write_bytes(b"nope")
    assert cli.main(["eval", "--checkpoint", str(junk), "--data", str(small_data)]) == 2
    assert "offset 0" in capsys.readouterr().err


@pytest.mark.slow
def test_gradcheck_pass_sabotage_and_noise_floor(run_cfg, capsys):
    args = ["gradcheck", "--config", str(run_cfg), "--max-coords", "6"]
    assert cli.main(args) == 0
    assert cli.main(args + ["--sabotage"]) == 1
    assert "exceeded tolerance" in capsys.readouterr().out
    assert cli.main(args + ["--tolerance", "1e-12"]) == 1


def test_compare_optimizers_file(tmp_path, small_data):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(format_config(tiny_config(max_iterations=15)), encoding="utf-8")
    out = tmp_path / "cmp.csv"
    assert cli.main(["compare-optimizers", "--config", str(cfg), "--data", str(small_data),
                     "--out", str(out), "--seeds", "0,1"]) == 0
    lines = out.read_text().splitlines()
    blocks = [i for i, line in enumerate(lines) if line.startswith("# seed=")]
    assert [lines[i] for i in blocks] == ["# seed=0", "# seed=1"]
    assert blocks[1] - blocks[0] == 2 + 15 and len(lines) == 2 * (2 + 15)
    values = np.array([[float(v) for v in line.split(",")[1:]]
                       for line in lines if not line.startswith(("#", "iteration"))])
    assert np.all(np.isfinite(values))
