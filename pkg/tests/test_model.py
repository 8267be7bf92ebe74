import numpy as np
import pytest

from sketchguess.gradcheck import run_full_suite
from sketchguess.model import (
    ArchitectureSpec,
    CheckpointError,
    ChecksumError,
    VersionError,
    build,
    load_checkpoint,
    save_checkpoint,
)

MICRO = dict(
    conv_channels=[6, 8],
    conv_kernels=[5, 3],
    lstm_layers=1,
    hidden_size=7,
    dropout_rate=0.3,
    class_count=5,
)


def micro_model(seed=0, **overrides):
    return build(ArchitectureSpec(**{**MICRO, **overrides}), seed=seed)


def test_default_spec_shapes():
    model = build(ArchitectureSpec(), seed=0)
    assert model.dense.w.shape == (512, 345)
    conv0 = model.conv_blocks[0][0]
    assert conv0.w.shape == (48, 3, 5)


def test_build_deterministic():
    a = build(ArchitectureSpec(**MICRO), seed=3)
    b = build(ArchitectureSpec(**MICRO), seed=3)
    for (na, ta), (nb, tb) in zip(a.named_tensors(), b.named_tensors()):
        assert na == nb
        np.testing.assert_array_equal(ta, tb)


def test_invalid_spec_rejected():
    with pytest.raises(ValueError):
        build(ArchitectureSpec(conv_channels=[8, 8], conv_kernels=[3]), seed=0)
    with pytest.raises(ValueError):
        build(ArchitectureSpec(class_count=1), seed=0)


def test_param_count_closed_form():
    spec = ArchitectureSpec()
    model = build(spec, seed=0)
    expected = 0
    in_ch = spec.input_channels
    for ch, k in zip(spec.conv_channels, spec.conv_kernels):
        expected += ch * in_ch * k + ch  # conv weights + bias
        expected += 2 * ch  # batch-norm gamma + beta
        in_ch = ch
    h = spec.hidden_size
    for _ in range(spec.lstm_layers):
        expected += 2 * (in_ch * 4 * h + h * 4 * h + 4 * h)
        in_ch = 2 * h
    expected += in_ch * spec.class_count + spec.class_count
    assert model.param_count() == expected


def test_forward_shape_and_finite():
    model = build(ArchitectureSpec(), seed=1)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, size=(2, 30, 3))
    logits = model.forward(x)
    assert logits.shape == (2, 345)
    assert np.all(np.isfinite(logits))


def test_forward_eval_batch_independence():
    model = micro_model(seed=2)
    rng = np.random.default_rng(1)
    seq = rng.uniform(0, 1, size=(1, 12, 3))
    batch = np.concatenate([seq, seq], axis=0)
    logits = model.forward(batch)
    np.testing.assert_allclose(logits[0], logits[1], atol=1e-9)


def test_forward_padding_invariance():
    model = micro_model(seed=4)
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, size=(1, 20, 3))
    short = model.forward(x, mask=np.ones((1, 20)))
    padded = np.zeros((1, 32, 3))
    padded[:, :20] = x
    mask = np.zeros((1, 32))
    mask[:, :20] = 1.0
    long = model.forward(padded, mask=mask)
    np.testing.assert_allclose(short, long, atol=1e-6)


def test_forward_rejects_all_padding_row():
    model = micro_model()
    x = np.zeros((2, 5, 3))
    mask = np.ones((2, 5))
    mask[1] = 0.0
    with pytest.raises(ValueError):
        model.forward(x, mask=mask)


def test_forward_eval_repeatable():
    model = micro_model(seed=5)
    x = np.random.default_rng(3).uniform(0, 1, size=(3, 9, 3))
    a = model.forward(x)
    b = model.forward(x)
    np.testing.assert_array_equal(a, b)


def test_forward_train_deterministic_per_rng_seed():
    model = micro_model(seed=6)
    x = np.random.default_rng(4).uniform(0, 1, size=(3, 9, 3))
    a = model.forward(x, train=True, rng=np.random.default_rng(77))
    # train forward mutates BN running stats; rebuild to compare cleanly
    model2 = micro_model(seed=6)
    b = model2.forward(x, train=True, rng=np.random.default_rng(77))
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------- cloning


def test_clone_bit_equal():
    model = micro_model(seed=7)
    clone = model.clone()
    for (na, ta), (nb, tb) in zip(model.named_tensors(), clone.named_tensors()):
        assert na == nb
        np.testing.assert_array_equal(ta, tb)


def test_clone_isolated():
    model = micro_model(seed=8)
    clone = model.clone()
    clone.dense.b.values += 1.0
    assert np.all(model.dense.b.values == 0.0)


def test_clone_training_step_leaves_source_unchanged():
    from sketchguess.layers import softmax_xent

    model = micro_model(seed=9)
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, size=(4, 10, 3))
    labels = rng.integers(0, 5, size=4)
    before = model.forward(x)

    clone = model.clone()
    ctx = {}
    logits = clone.forward(x, train=True, rng=np.random.default_rng(0), ctx=ctx)
    _, dlogits = softmax_xent(logits, labels)
    clone.zero_grads()
    clone.backward(dlogits, ctx)
    for p in clone.params():
        p.values -= 0.1 * p.grad

    after = model.forward(x)
    np.testing.assert_array_equal(before, after)


# ---------------------------------------------------------------- checkpoints


def dirty_model():
    model = micro_model(seed=10)
    rng = np.random.default_rng(6)
    # make running stats and metadata nontrivial so the round trip is a real test
    model.forward(rng.uniform(0, 1, size=(4, 8, 3)), train=True, rng=rng)
    model.metadata = {"epoch": 12, "best_val_loss": 0.4567}
    return model


def test_checkpoint_round_trip(tmp_path):
    model = dirty_model()
    path = tmp_path / "m.inkm"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.metadata == model.metadata
    assert loaded.init_seed == model.init_seed
    for (na, ta), (nb, tb) in zip(model.named_tensors(), loaded.named_tensors()):
        assert na == nb
        np.testing.assert_array_equal(ta, tb)


def test_checkpoint_save_is_byte_stable(tmp_path):
    model = dirty_model()
    p1, p2 = tmp_path / "a.inkm", tmp_path / "b.inkm"
    save_checkpoint(model, p1)
    save_checkpoint(model, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_truncated_rejected(tmp_path):
    model = dirty_model()
    path = tmp_path / "m.inkm"
    save_checkpoint(model, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 20])
    with pytest.raises(ChecksumError):
        load_checkpoint(path)


def test_checkpoint_version_mismatch(tmp_path):
    model = dirty_model()
    path = tmp_path / "m.inkm"
    save_checkpoint(model, path)
    data = bytearray(path.read_bytes())
    data[4] = 99
    path.write_bytes(bytes(data))
    with pytest.raises(VersionError):
        load_checkpoint(path)


def test_checkpoint_class_count_guard(tmp_path):
    model = dirty_model()
    path = tmp_path / "m.inkm"
    save_checkpoint(model, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expect_class_count=345)
    loaded = load_checkpoint(path, expect_class_count=5)
    assert loaded.spec.class_count == 5


# ---------------------------------------------------------------- gradients


def test_full_gradient_suite():
    for name, report in run_full_suite(seed=0):
        assert report.passed, f"{name}: {report.summary()}"
