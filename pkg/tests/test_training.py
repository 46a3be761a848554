import copy

import numpy as np
import pytest
import torch

from regionfill import data, masks
from regionfill.losses import LossWeights, NonFiniteLossError
from regionfill.nn import DiscriminatorConfig, GeneratorConfig
from regionfill.training import (
    LOG_COLUMNS,
    CheckpointError,
    TrainConfig,
    init_state,
    load_checkpoint,
    sample_masks,
    save_checkpoint,
    train_loop,
    train_step,
)


def tiny_cfg(**kw):
    base = dict(
        image_size=16,
        batch_size=2,
        epochs=2,
        pretrain_epochs=1,
        generator=GeneratorConfig(base_width=4, levels=2),
        discriminator=DiscriminatorConfig(levels=2, base_width=4),
        seed=0,
    )
    base.update(kw)
    return TrainConfig(**base)


def rand_batch(seed, b=2, size=16):
    g = torch.Generator().manual_seed(seed)
    return (torch.rand(b, 3, size, size, generator=g) * 2 - 1).contiguous()


def params_snapshot(module):
    return [p.detach().clone() for p in module.parameters()]


def params_equal(snap, module):
    return all(torch.equal(a, b) for a, b in zip(snap, module.parameters()))


# ------------------------------------------------------------ config


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_cfg(lr=0.0)
    with pytest.raises(ValueError):
        tiny_cfg(pretrain_epochs=3, epochs=2)
    with pytest.raises(ValueError):
        tiny_cfg(mask_kind="solid")
    with pytest.raises(ValueError):
        tiny_cfg(batch_size=0)
    cfg = tiny_cfg(pretrain_steps=10, pretrain_epochs=99)  # steps take precedence
    assert cfg.pretrain_steps == 10


# ------------------------------------------------------------ masks


def test_sample_masks_shapes_and_determinism():
    cfg = tiny_cfg()
    a = sample_masks(np.random.default_rng(1), 3, 16, 16, cfg)
    b = sample_masks(np.random.default_rng(1), 3, 16, 16, cfg)
    assert a.shape == (3, 16, 16)
    assert a.dtype == np.uint8
    assert np.array_equal(a, b)
    for m in a:
        masks.check_mask(m)
        assert 0.1 <= masks.mask_ratio(m) <= 0.4


def test_sample_masks_fixed_kinds():
    cfg_c = tiny_cfg(mask_kind="contiguous")
    for m in sample_masks(np.random.default_rng(2), 4, 32, 32, cfg_c):
        assert masks.missing_components(m) == 1
    cfg_d = tiny_cfg(mask_kind="discontiguous")
    for m in sample_masks(np.random.default_rng(2), 4, 32, 32, cfg_d):
        assert masks.missing_components(m) >= 2


# ------------------------------------------------------------ train_step


def test_pretrain_step_leaves_discriminator_untouched():
    cfg = tiny_cfg()
    state = init_state(cfg)
    d_before = params_snapshot(state.discriminator)
    g_before = params_snapshot(state.generator)
    _, report = train_step(rand_batch(0), state, cfg)
    assert params_equal(d_before, state.discriminator)
    assert not params_equal(g_before, state.generator)
    assert report.adversarial_g == 0.0
    assert report.adversarial_d == 0.0
    assert report.total > 0


def test_adversarial_step_updates_both():
    cfg = tiny_cfg(pretrain_epochs=0)
    state = init_state(cfg)
    d_before = params_snapshot(state.discriminator)
    g_before = params_snapshot(state.generator)
    _, report = train_step(rand_batch(1), state, cfg)
    assert not params_equal(d_before, state.discriminator)
    assert not params_equal(g_before, state.generator)
    assert report.adversarial_g != 0.0
    assert report.adversarial_d != 0.0


def test_step_determinism_across_fresh_runs():
    cfg = tiny_cfg()
    r1 = train_step(rand_batch(2), init_state(cfg), cfg)[1]
    r2 = train_step(rand_batch(2), init_state(cfg), cfg)[1]
    assert r1 == r2


def test_phase_switch_by_steps():
    cfg = tiny_cfg(pretrain_steps=1, epochs=1, pretrain_epochs=0)
    state = init_state(cfg)
    d_before = params_snapshot(state.discriminator)
    train_step(rand_batch(3), state, cfg)  # step 0: pretrain
    assert params_equal(d_before, state.discriminator)
    train_step(rand_batch(4), state, cfg)  # step 1: adversarial
    assert not params_equal(d_before, state.discriminator)


def test_nonfinite_loss_aborts_with_named_term():
    cfg = tiny_cfg()
    state = init_state(cfg)
    with torch.no_grad():
        state.generator.semantic.stem.weight[0, 0, 0, 0] = float("nan")
    with pytest.raises(NonFiniteLossError, match="reconstruction"):
        train_step(rand_batch(5), state, cfg)


def test_masked_mae_reported():
    cfg = tiny_cfg()
    state = init_state(cfg)
    _, report = train_step(rand_batch(6), state, cfg)
    assert report.masked_mae is not None
    assert 0 <= report.masked_mae < 2.0


def test_report_total_matches_weighted_sum():
    cfg = tiny_cfg(pretrain_epochs=0, weights=LossWeights())
    state = init_state(cfg)
    _, r = train_step(rand_batch(7), state, cfg)
    w = cfg.weights
    want = (
        r.reconstruction
        + w.lambda_correlation * r.correlation
        + w.lambda_style * r.style
        + w.lambda_adversarial * r.adversarial_g
    )
    assert r.total == pytest.approx(want, rel=1e-5)


# ------------------------------------------------------------ train_loop


@pytest.fixture()
def corpus(tmp_path):
    root = tmp_path / "imgs"
    data.make_fixture_corpus(root, size=16, count=4)
    return root


def test_zero_epochs_returns_initialized_state(corpus):
    cfg = tiny_cfg(epochs=0, pretrain_epochs=0, data_dir=str(corpus))
    state, reports = train_loop(cfg)
    assert state.epoch == 0
    assert state.global_step == 0
    assert reports == []


def test_loop_runs_and_logs_csv(tmp_path, corpus):
    log = tmp_path / "log.csv"
    cfg = tiny_cfg(data_dir=str(corpus), log_csv=str(log), epochs=2, pretrain_epochs=1)
    state, reports = train_loop(cfg)
    assert state.epoch == 2
    assert state.global_step == 4  # 4 images / batch 2 = 2 steps per epoch
    assert len(reports) == 2
    lines = log.read_text().strip().splitlines()
    assert lines[0] == ",".join(LOG_COLUMNS)
    assert len(lines) == 1 + 4
    assert all(len(line.split(",")) == len(LOG_COLUMNS) for line in lines)


def test_loop_phase_gate_across_epochs(corpus):
    cfg = tiny_cfg(data_dir=str(corpus), epochs=2, pretrain_epochs=1)
    state = init_state(cfg)
    d_before = params_snapshot(state.discriminator)

    cfg1 = TrainConfig(**{**cfg.__dict__, "epochs": 1})
    train_loop(cfg1, state)
    assert params_equal(d_before, state.discriminator), "pretrain epoch must not touch D"

    train_loop(cfg, state)
    assert not params_equal(d_before, state.discriminator)


def test_checkpoint_cadence(tmp_path, corpus):
    ck = tmp_path / "ck"
    cfg = tiny_cfg(
        data_dir=str(corpus), epochs=2, checkpoint_dir=str(ck), checkpoint_every=1
    )
    train_loop(cfg)
    names = sorted(p.name for p in ck.iterdir())
    assert names == ["epoch_0001.ckpt", "epoch_0002.ckpt"]


# ------------------------------------------------------------ checkpoints


def test_checkpoint_roundtrip_exact(tmp_path, corpus):
    cfg = tiny_cfg(data_dir=str(corpus), epochs=1)
    state, _ = train_loop(cfg)
    p = tmp_path / "s.ckpt"
    save_checkpoint(state, p)
    back = load_checkpoint(p)
    assert back.epoch == state.epoch
    assert back.global_step == state.global_step
    for a, b in zip(state.generator.parameters(), back.generator.parameters()):
        assert torch.equal(a, b)
    for a, b in zip(state.discriminator.parameters(), back.discriminator.parameters()):
        assert torch.equal(a, b)
    assert back.mask_rng.bit_generator.state == state.mask_rng.bit_generator.state
    assert back.cfg == state.cfg


def test_checkpoint_truncation_detected(tmp_path):
    cfg = tiny_cfg()
    state = init_state(cfg)
    p = tmp_path / "s.ckpt"
    save_checkpoint(state, p)
    blob = p.read_bytes()
    p.write_bytes(blob[: len(blob) - 20])
    with pytest.raises(CheckpointError, match="corrupt|checksum"):
        load_checkpoint(p)


def test_checkpoint_bad_magic_and_version(tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"JUNKJUNKJUNK" + b"\x00" * 64)
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(p)

    cfg = tiny_cfg()
    save_checkpoint(init_state(cfg), p)
    blob = bytearray(p.read_bytes())
    blob[4:8] = (99).to_bytes(4, "little")
    p.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(p)

    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_checkpoint_cross_config_shape_error(tmp_path):
    p = tmp_path / "s.ckpt"
    save_checkpoint(init_state(tiny_cfg()), p)
    wider = tiny_cfg(generator=GeneratorConfig(base_width=8, levels=2))
    with pytest.raises(CheckpointError, match="incompatible"):
        load_checkpoint(p, cfg=wider)


def test_resume_matches_uninterrupted_run(tmp_path, corpus):
    ck = tmp_path / "ck"
    full_cfg = tiny_cfg(data_dir=str(corpus), epochs=2, pretrain_epochs=1)

    state_full, reports_full = train_loop(full_cfg)

    part_cfg = tiny_cfg(
        data_dir=str(corpus),
        epochs=1,
        pretrain_epochs=1,
        checkpoint_dir=str(ck),
    )
    train_loop(part_cfg)
    resumed = load_checkpoint(ck / "epoch_0001.ckpt")
    state_res, reports_res = train_loop(full_cfg, resumed)

    assert state_res.global_step == state_full.global_step
    for a, b in zip(state_full.generator.parameters(), state_res.generator.parameters()):
        assert torch.equal(a, b)
    for a, b in zip(
        state_full.discriminator.parameters(), state_res.discriminator.parameters()
    ):
        assert torch.equal(a, b)
    assert reports_res[-1] == reports_full[-1]
