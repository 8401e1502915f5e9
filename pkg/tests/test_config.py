import json

import pytest

from sdlformer.config import ModelConfig, RunConfig, TrainConfig, load_run_config
from sdlformer.errors import ConfigError


def _write(tmp_path, doc):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(doc))
    return p


def test_defaults():
    rc = load_run_config()
    assert rc == RunConfig()
    assert rc.train.epochs == 60 and rc.train.lr == 1e-3 and rc.train.accel == 4
    assert rc.model.window == 8 and rc.model.enable_locality


def test_precedence_cli_over_file_over_default(tmp_path):
    p = _write(tmp_path, {"train": {"epochs": 7, "lr": 2e-3}, "model": {"embed_dim": 16}})
    rc = load_run_config(p, train_overrides={"epochs": 3})
    assert rc.train.epochs == 3      # flag
    assert rc.train.lr == 2e-3       # file
    assert rc.train.sched_step == 40  # default
    assert rc.model.embed_dim == 16


def test_int_accepted_for_float():
    rc = load_run_config(train_overrides={"lr": 1})
    assert isinstance(rc.train.lr, float)


@pytest.mark.parametrize("doc", [
    {"train": {"epoch": 3}},
    {"model": {"dim": 8}},
    {"optim": {}},
    {"train": {"epochs": 2.5}},
    {"train": {"epochs": True}},
    {"model": {"enable_sab": 1}},
    {"train": {"lr": "fast"}},
    {"train": {"mode": "unsupervised"}},
    {"model": {"embed_dim": 10, "n_heads": 4}},
    [1, 2],
])
def test_bad_config_rejected(tmp_path, doc):
    with pytest.raises(ConfigError):
        load_run_config(_write(tmp_path, doc))


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{model:")
    with pytest.raises(ConfigError, match="JSON"):
        load_run_config(bad)


@pytest.mark.parametrize("kw", [
    dict(window=0), dict(kcnn_layers=1), dict(leff_ratio=0), dict(n_sab=-1), dict(ln_eps=0.0),
])
def test_model_validation(kw):
    with pytest.raises(ConfigError):
        ModelConfig(**kw)


@pytest.mark.parametrize("kw", [
    dict(epochs=0), dict(batch_size=2), dict(rho=1.0), dict(sched_gamma=0.0), dict(dtype="float16"),
    dict(accel=0),
])
def test_train_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_has_transformer():
    assert ModelConfig().has_transformer
    assert not ModelConfig(enable_sab=False, enable_dab=False).has_transformer
    assert ModelConfig(enable_sab=False).has_transformer
    assert not ModelConfig(n_sab=0, n_dab=0).has_transformer


def test_to_dict_roundtrips():
    rc = RunConfig(ModelConfig(embed_dim=8, n_heads=2), TrainConfig(epochs=5))
    assert load_run_config(None, rc.to_dict()["model"], rc.to_dict()["train"]) == rc
