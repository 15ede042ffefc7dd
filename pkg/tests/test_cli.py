import csv
import json

import pytest

from fcnet.cli import main


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 2
    cap = capsys.readouterr()
    assert "usage" in (cap.out + cap.err).lower()


def test_unknown_flag_is_usage_error():
    assert main(["verify", "--bogus"]) == 2


def test_help_exits_zero():
    assert main(["--help"]) == 0


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "dual" in out.lower()


def test_gen_data_then_spectrum(tmp_path, capsys):
    assert main(["gen-data", "--kind", "harmonic", "--count", "1", "--steps", "512",
                 "--out", str(tmp_path)]) == 0
    data = tmp_path / "harmonic.fctraj"
    assert data.exists()
    assert main(["spectrum", "--data", str(data), "--n", "256", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader((tmp_path / "spectrum.csv").read_text().splitlines()))
    assert rows[0] == ["mode", "density_pct", "cumulative_pct"]
    assert len(rows) == 1 + 129
    assert float(rows[5][1]) == pytest.approx(100.0, abs=1e-6)


def test_train_and_eval_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tiny run\ncount = 40\nsteps = 24\nd_h = 8\nlayers = 1\nn = 8\nm = 3\n"
                   "epochs = 2\nbatch_size = 16\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path), "--seed", "1"]) == 0
    for name in ("model.ckpt", "loss.csv", "norm.json"):
        assert (tmp_path / name).exists()
    assert len((tmp_path / "loss.csv").read_text().splitlines()) == 3
    assert set(json.loads((tmp_path / "norm.json").read_text()))
    capsys.readouterr()
    assert main(["eval", "--config", str(cfg), "--checkpoint", str(tmp_path / "model.ckpt")]) == 0
    assert "val_mse" in capsys.readouterr().out


def test_bad_config_key_fails(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_missing_checkpoint_fails(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "nope.ckpt")]) == 1


def test_bench_latency_small(tmp_path):
    assert main(["bench-latency", "--models", "fcnet", "attn", "--ns", "8", "--layers", "1",
                 "--d-h", "8", "--samples", "5", "--warmup", "2", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "latency.csv").read_text().splitlines()) == 3
    assert (tmp_path / "parallel.csv").read_text().startswith("T,seconds")
