import dataclasses
import math

import numpy as np
import pytest

from sdlformer import mri
from sdlformer import tensor as T
from sdlformer.config import ModelConfig, TrainConfig
from sdlformer.data import Dataset, synth_slice, synthesize
from sdlformer.errors import ConfigError, FormatError, NonFiniteError, ResampleError
from sdlformer.io import decode_checkpoint, encode_checkpoint
from sdlformer.net import SDLFormer
from sdlformer.tensor import Param, Tensor
from sdlformer.training import (OptimState, adam_step, evaluate, lr_at, mean_row,
                                model_from_checkpoint, ssl_loss, supervised_loss, train)

SMALL = ModelConfig(embed_dim=8, n_heads=2, window=8, leff_ratio=2, kcnn_channels=8)


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    synthesize(root, 8, 32, 32, 2, seed=0, val_slices=2)
    return Dataset.load(root)


# ---------------------------------------------------------------------------
# objectives


@pytest.fixture
def acquisition():
    sl = synth_slice(16, 32, 3, seed=1)
    return sl


def _split_all_columns(w, seed=0):
    # every column sampled, none reserved as ACS, so the loss mask is non-empty
    return mri.split_mask(mri.SamplingMask(np.ones(w, dtype=np.uint8), 1.0, 0), 0.6, seed=seed)


def test_ssl_loss_zero_at_ground_truth(acquisition):
    sp = _split_all_columns(32)
    loss = ssl_loss(Tensor(acquisition.gt), acquisition.maps, sp.m2, acquisition.kspace)
    assert loss.item() < 1e-6


def test_ssl_loss_of_zero_image_is_mean_abs_target(acquisition):
    sp = _split_all_columns(32, seed=3)
    y2 = acquisition.kspace * sp.m2.expand(acquisition.kspace.shape)
    loss = ssl_loss(Tensor(np.zeros((2, 16, 32))), acquisition.maps, sp.m2, y2).item()
    cols = np.flatnonzero(sp.m2.cols)
    assert abs(loss - np.abs(acquisition.kspace[..., cols]).mean()) < 1e-15


def test_ssl_loss_gradient_only_through_loss_mask(acquisition):
    sp = _split_all_columns(32, seed=4)
    x = Tensor(np.random.default_rng(0).normal(size=(2, 16, 32)), requires_grad=True)
    ssl_loss(x, acquisition.maps, sp.m2, acquisition.kspace).backward()
    assert np.abs(x.grad).max() > 0
    # the same loss restricted to zero columns (target = prediction there) has zero gradient
    k = T.fft2c(mri.expand_coils(x.detach(), acquisition.maps)).data
    x2 = Tensor(x.data.copy(), requires_grad=True)
    ssl_loss(x2, acquisition.maps, sp.m2, k).backward()
    assert not x2.grad.any()


def test_ssl_loss_empty_mask_raises(acquisition):
    empty = mri.SamplingMask(np.zeros(32, dtype=np.uint8), 4)
    with pytest.raises(ResampleError):
        ssl_loss(Tensor(acquisition.gt), acquisition.maps, empty, acquisition.kspace)


def test_supervised_loss_examples():
    a = np.arange(8.0).reshape(2, 2, 2)
    assert supervised_loss(Tensor(a), a).item() == 0.0
    assert abs(supervised_loss(Tensor(a + 0.25), a).item() - 0.25) < 1e-15
    b = np.array([[[1.0, -2.0], [0.5, 0.0]], [[3.0, 1.0], [-1.0, 2.0]]])
    hand = sum(abs(a.flat[i] - b.flat[i]) for i in range(8)) / 8
    assert abs(supervised_loss(Tensor(a), b).item() - hand) < 1e-15


# ---------------------------------------------------------------------------
# optimizer and schedule


def test_adam_first_step():
    p = Param(np.array([0.5, -2.0]), name="w")
    adam_step([p], [np.ones(2)], OptimState(lr=1e-3))
    assert np.all(np.abs((p.data - [0.5, -2.0]) + 1e-3) < 1e-6)


def test_adam_zero_gradient_is_noop():
    p = Param(np.array([0.5, -2.0]), name="w")
    st = OptimState()
    adam_step([p], [np.zeros(2)], st)
    assert np.array_equal(p.data, [0.5, -2.0])
    assert st.step == 1


def test_adam_matches_reference_sequence():
    rng = np.random.default_rng(0)
    p = Param(rng.normal(size=5), name="w")
    theta = p.data.copy()
    m = v = np.zeros(5)
    st = OptimState(lr=0.01)
    for t in range(1, 6):
        g = rng.normal(size=5)
        adam_step([p], [g], st)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.max(np.abs(p.data - theta)) < 1e-14


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(1)
        p = Param(rng.normal(size=(3, 3)), name="w")
        st = OptimState()
        for _ in range(4):
            adam_step([p], [rng.normal(size=(3, 3))], st)
        return p.data.tobytes()
    assert run() == run()


def test_lr_schedule():
    cfg = TrainConfig()
    assert lr_at(0, cfg) == 1e-3
    assert lr_at(39, cfg) == 1e-3
    assert math.isclose(lr_at(40, cfg), 1e-4, rel_tol=1e-12)
    assert math.isclose(lr_at(80, cfg), 1e-5, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# training loop


def test_smoke_training_is_finite(smoke):
    res = train(smoke, SMALL, TrainConfig(epochs=3))
    assert all(math.isfinite(r["loss"]) for r in res.log)
    assert [r["split"] for r in res.log] == ["train", "val"] * 3


def test_best_checkpoint_has_min_val_loss(smoke):
    res = train(smoke, SMALL, TrainConfig(epochs=4, lr=3e-3))
    vals = [r["loss"] for r in res.log if r["split"] == "val"]
    assert res.best_val_loss == min(vals)
    assert res.best.meta["epoch"] == int(np.argmin(vals))
    # the retained parameters reproduce that loss
    model, _ = model_from_checkpoint(res.best)
    for name, p in model.named_params().items():
        assert np.array_equal(p.data, res.best.tensors[name])


def test_ssl_validation_loss_descends(tmp_path):
    # six training slices overfit; twelve give a validation trend
    synthesize(tmp_path, 16, 32, 32, 4, seed=0, val_slices=4)
    res = train(Dataset.load(tmp_path), SMALL, TrainConfig(epochs=30))
    vals = [r["loss"] for r in res.log if r["split"] == "val"]
    assert vals[-1] < vals[0]


def test_supervised_mode_runs(smoke):
    res = train(smoke, SMALL, TrainConfig(epochs=2, mode="supervised"))
    assert all(math.isfinite(r["loss"]) for r in res.log)


def test_resume_is_bitwise_identical(smoke):
    tcfg = TrainConfig(epochs=4)
    full = train(smoke, SMALL, tcfg)
    half = train(smoke, SMALL, dataclasses.replace(tcfg, epochs=2))
    resumed = train(smoke, SMALL, tcfg, resume=decode_checkpoint(encode_checkpoint(half.last)))
    assert encode_checkpoint(resumed.best) == encode_checkpoint(full.best)
    assert encode_checkpoint(resumed.last) == encode_checkpoint(full.last)
    assert resumed.log == full.log


def test_resume_rejects_other_config(smoke):
    half = train(smoke, SMALL, TrainConfig(epochs=1))
    with pytest.raises(ConfigError):
        train(smoke, dataclasses.replace(SMALL, embed_dim=4), TrainConfig(epochs=2), resume=half.last)
    with pytest.raises(FormatError):
        train(smoke, SMALL, TrainConfig(epochs=2), resume=half.best)


def test_nan_loss_names_first_bad_tensor(smoke, monkeypatch):
    orig = SDLFormer.__init__

    def poisoned(self, *a, **kw):
        orig(self, *a, **kw)
        self.sab[0].msa.qkv_w.data[0, 0] = np.nan

    monkeypatch.setattr(SDLFormer, "__init__", poisoned)
    with pytest.raises(NonFiniteError, match="sab.0"):
        train(smoke, SMALL, TrainConfig(epochs=1))


# ---------------------------------------------------------------------------
# evaluation


def test_zero_filled_at_full_sampling(smoke):
    table = evaluate(None, smoke, accel=1, split=None)
    zf = [r for r in table if r["method"] == "ZF" and r["slice_id"] != "mean"]
    assert len(zf) == 8
    assert all(r["psnr_db"] == math.inf for r in zf)
    assert all(abs(r["ssim"] - 1.0) < 1e-6 for r in zf)


def test_evaluation_table_layout_and_determinism(smoke):
    res = train(smoke, SMALL, TrainConfig(epochs=1))
    t1 = evaluate(res.model, smoke, 4)
    t2 = evaluate(res.model, smoke, 4)
    assert t1 == t2
    assert len(t1) == 2 * (2 + 1)
    assert [r["slice_id"] for r in t1[-2:]] == ["mean", "mean"]
    zf = [r["psnr_db"] for r in t1 if r["method"] == "ZF" and r["slice_id"] != "mean"]
    assert mean_row(t1, "ZF")["psnr_db"] == pytest.approx(np.mean(zf), rel=1e-15)


def test_no_training_slices_is_config_error(tmp_path):
    synthesize(tmp_path, 2, 16, 16, 1, val_slices=2)
    with pytest.raises(ConfigError):
        train(Dataset.load(tmp_path), SMALL, TrainConfig(epochs=1))
