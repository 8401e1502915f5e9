"""Command-line behaviour, run in-process through ``main``."""

import csv
import json
import subprocess
import sys

import pytest

from sdlformer.cli import main
from sdlformer.io import SliceData, encode_slice, load_checkpoint, load_slice

TINY = {"model": {"embed_dim": 8, "n_heads": 2, "leff_ratio": 2, "kcnn_channels": 4, "n_sab": 1, "n_dab": 1},
        "train": {"epochs": 2}}


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--out", str(root), "--slices", "6", "--size", "32x32", "--coils", "2",
                 "--seed", "3"]) == 0
    cfg = root.parent / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    return root, cfg


@pytest.fixture(scope="module")
def trained(data):
    root, cfg = data
    ck = root.parent / "run" / "best.sdlc"
    assert main(["train", "--data", str(root), "--config", str(cfg), "--out", str(ck), "--quiet"]) == 0
    return ck


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# synth


def test_synth_layout_and_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, out, _ = _run(capsys, "synth", "--out", d, "--slices", 8, "--size", "16x24", "--seed", 5)
        assert code == 0 and "8 slices" in out
    files = sorted(p.name for p in a.iterdir())
    assert files == ["manifest.json"] + [f"slice_{i:04d}.sdlk" for i in range(8)]
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert [s["split"] for s in man["slices"]].count("val") == 2


def test_synth_single_coil(tmp_path, capsys):
    code, _, _ = _run(capsys, "synth", "--out", tmp_path, "--slices", 2, "--size", "16x16", "--coils", 1)
    assert code == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["coils"] == 1


def test_synth_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SDLF_SEED", "11")
    _run(capsys, "synth", "--out", tmp_path / "env", "--slices", 1, "--size", "16x16")
    _run(capsys, "synth", "--out", tmp_path / "flag", "--slices", 1, "--size", "16x16", "--seed", 11)
    monkeypatch.delenv("SDLF_SEED")
    _run(capsys, "synth", "--out", tmp_path / "none", "--slices", 1, "--size", "16x16")
    env = (tmp_path / "env" / "slice_0000.sdlk").read_bytes()
    assert env == (tmp_path / "flag" / "slice_0000.sdlk").read_bytes()
    assert env != (tmp_path / "none" / "slice_0000.sdlk").read_bytes()


# ---------------------------------------------------------------------------
# train


def test_train_outputs(trained, data, capsys):
    root, cfg = data
    ck = load_checkpoint(trained)
    assert ck.meta["kind"] == "best"
    log = _rows(trained.with_suffix(".csv"))
    assert [r["split"] for r in log] == ["train", "val", "train", "val"]
    assert trained.with_suffix(".last.sdlc").exists()

    out = trained.parent / "again.sdlc"
    code, text, _ = _run(capsys, "train", "--data", root, "--config", cfg, "--out", out, "--quiet")
    assert code == 0
    assert f"parameters: {ck.meta['metrics']['param_count']}" in text
    assert "final validation loss:" in text
    # same seed, same bytes
    assert out.read_bytes() == trained.read_bytes()
    assert out.with_suffix(".csv").read_bytes() == trained.with_suffix(".csv").read_bytes()


def test_train_cnn_only_flags(data, tmp_path, capsys):
    root, cfg = data
    out = tmp_path / "cnn.sdlc"
    code, _, _ = _run(capsys, "train", "--data", root, "--config", cfg, "--out", out, "--quiet",
                      "--no-sab", "--no-dab", "--epochs", 1)
    assert code == 0
    meta = load_checkpoint(out).meta
    assert meta["model"]["enable_sab"] is False and meta["model"]["enable_dab"] is False
    assert not any(k.startswith(("sab", "dab")) for k in load_checkpoint(out).tensors)


def test_train_resume_matches_uninterrupted(data, tmp_path, capsys):
    root, cfg = data
    full, half, cont = tmp_path / "full.sdlc", tmp_path / "half.sdlc", tmp_path / "cont.sdlc"
    _run(capsys, "train", "--data", root, "--config", cfg, "--out", full, "--quiet", "--epochs", 3)
    _run(capsys, "train", "--data", root, "--config", cfg, "--out", half, "--quiet", "--epochs", 1)
    code, _, _ = _run(capsys, "train", "--data", root, "--config", cfg, "--out", cont, "--quiet", "--epochs", 3,
                      "--resume", half.with_suffix(".last.sdlc"))
    assert code == 0
    assert cont.read_bytes() == full.read_bytes()
    assert cont.with_suffix(".csv").read_bytes() == full.with_suffix(".csv").read_bytes()


def test_seed_env_fallback_for_training(data, tmp_path, capsys, monkeypatch):
    root, cfg = data
    monkeypatch.setenv("SDLF_SEED", "9")
    _run(capsys, "train", "--data", root, "--config", cfg, "--out", tmp_path / "a.sdlc", "--quiet", "--epochs", 1)
    assert load_checkpoint(tmp_path / "a.sdlc").meta["train"]["seed"] == 9
    _run(capsys, "train", "--data", root, "--config", cfg, "--out", tmp_path / "b.sdlc", "--quiet", "--epochs", 1,
         "--seed", 2)
    assert load_checkpoint(tmp_path / "b.sdlc").meta["train"]["seed"] == 2


# ---------------------------------------------------------------------------
# errors


@pytest.mark.parametrize("argv", [
    ["train", "--data", "x", "--out", "y", "--accel", "3"],
    ["synth"],
    ["recon", "--slice", "a", "--ckpt", "b", "--out", "c.jpg"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert err.startswith("error[usage]:")


def test_missing_checkpoint_is_single_line_format_error(data, tmp_path, capsys):
    root, _ = data
    code, _, err = _run(capsys, "eval", "--data", root, "--ckpt", tmp_path / "nope.sdlc", "--out", tmp_path / "e.csv")
    assert code == 1
    assert err.startswith("error[format]:") and err.count("\n") == 1


def test_bad_config_is_config_error(data, tmp_path, capsys):
    root, _ = data
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": {"epochz": 1}}))
    code, _, err = _run(capsys, "train", "--data", root, "--config", bad, "--out", tmp_path / "o.sdlc")
    assert code == 1 and err.startswith("error[config]:")


def test_bad_env_seed(data, tmp_path, capsys, monkeypatch):
    root, cfg = data
    monkeypatch.setenv("SDLF_SEED", "abc")
    code, _, err = _run(capsys, "train", "--data", root, "--config", cfg, "--out", tmp_path / "o.sdlc")
    assert code == 1 and err.startswith("error[config]:")


# ---------------------------------------------------------------------------
# eval / recon / ablate


def test_eval_table(trained, data, tmp_path, capsys):
    root, _ = data
    out = tmp_path / "eval.csv"
    code, text, _ = _run(capsys, "eval", "--data", root, "--ckpt", trained, "--out", out)
    assert code == 0 and "ZF" in text
    rows = _rows(out)
    n_val = 6 // 4
    for method in ("ZF", "model"):
        assert sum(r["method"] == method for r in rows) == n_val + 1
    assert list(rows[0]) == ["slice_id", "method", "psnr_db", "ssim"]


def test_eval_full_sampling_zero_filled_is_inf(trained, data, tmp_path, capsys):
    root, _ = data
    out = tmp_path / "eval1.csv"
    assert _run(capsys, "eval", "--data", root, "--ckpt", trained, "--out", out, "--accel", 1, "--split", "all")[0] == 0
    zf = [r for r in _rows(out) if r["method"] == "ZF"]
    assert len(zf) == 7
    assert all(r["psnr_db"] == "inf" for r in zf)


def test_recon_with_ground_truth(trained, data, tmp_path, capsys):
    root, _ = data
    outs = []
    for name in ("r1.png", "r2.png"):
        code, text, _ = _run(capsys, "recon", "--slice", root / "slice_0005.sdlk", "--ckpt", trained,
                             "--out", tmp_path / name, "--index", 5)
        assert code == 0 and "notice" not in text
        outs.append(tmp_path / name)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert (tmp_path / "r1_residual.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    side = (tmp_path / "r1.txt").read_text().splitlines()
    assert side[0].startswith("reconstruction r1.png min") and side[1].startswith("residual r1_residual.png gain 5.0")


def test_recon_without_ground_truth(trained, data, tmp_path, capsys):
    root, _ = data
    sl = load_slice(root / "slice_0005.sdlk")
    bare = tmp_path / "bare.sdlk"
    bare.write_bytes(encode_slice(SliceData(sl.kspace, sl.maps, None)))
    code, text, _ = _run(capsys, "recon", "--slice", bare, "--ckpt", trained, "--out", tmp_path / "x.pgm")
    assert code == 0
    assert "notice: slice has no ground truth; residual map skipped" in text
    assert not (tmp_path / "x_residual.pgm").exists()
    assert (tmp_path / "x.pgm").read_bytes().startswith(b"P5\n32 32\n255\n")
    assert len((tmp_path / "x.txt").read_text().splitlines()) == 1


def test_ablate_subset(data, tmp_path, capsys):
    root, cfg = data
    out = tmp_path / "abl.csv"
    code, text, _ = _run(capsys, "ablate", "--data", root, "--config", cfg, "--out", out, "--epochs", 1,
                         "--rows", "CNN", "SAB+DAB")
    assert code == 0
    rows = _rows(out)
    assert [r["config"] for r in rows] == ["CNN", "SAB+DAB"]
    assert int(rows[0]["params"]) < int(rows[1]["params"])


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sdlformer", "synth", "--out", str(tmp_path), "--slices", "1",
                        "--size", "16x16"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "slice_0000.sdlk").exists()
