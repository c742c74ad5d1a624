"""Smoke tests for the python bindings."""

import numpy as np
import pytest

import _uhdres as U


@pytest.fixture(scope="module")
def model():
    return U.Model(U.Config(), seed=0)


def make_image(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(1, 3, h, w)).astype(np.float32)


def test_param_count_in_band(model):
    total = model.param_count()
    assert 341_037 <= total <= 461_403
    assert sum(model.param_breakdown().values()) == total


def test_forward_preserves_shape(model):
    x = make_image(24, 20)
    y = model.forward(x)
    assert y.shape == x.shape
    assert np.isfinite(y).all()


def test_forward_is_deterministic(model):
    x = make_image(16, 16, seed=3)
    y1 = model.forward(x)
    y2 = model.forward(x)
    assert np.array_equal(y1, y2)


def test_ablation_reduces_params(model):
    cfg = U.Config()
    cfg.use_sgfn = False
    smaller = U.Model(cfg, seed=0)
    assert smaller.param_count() < model.param_count()


def test_save_load_roundtrip(tmp_path, model):
    path = str(tmp_path / "model.ckpt")
    model.save(path)
    loaded = U.load_model(path)
    x = make_image(16, 16, seed=5)
    assert np.array_equal(model.forward(x), loaded.forward(x))


def test_metrics():
    x = make_image(32, 32, seed=7)
    assert U.psnr(x, x) == 100.0
    noisy = np.clip(x + 0.05, 0.0, 1.0)
    assert U.psnr(noisy, x) < 100.0
    assert U.ssim(x, x) == pytest.approx(1.0)
    assert U.l1_loss(x, x) == 0.0
    assert U.freq_loss(x, x) == 0.0


def test_fft_roundtrip():
    x = make_image(17, 23, seed=9)  # non-power-of-two extents
    back = U.fft_roundtrip(x)
    assert np.max(np.abs(back - x)) < 1e-5


def test_perturbation_ordering():
    x = make_image(48, 48, seed=11)
    # smooth the noise image a little so it has structure
    x = (x + np.roll(x, 1, axis=2) + np.roll(x, 1, axis=3)) / 3.0
    amp = U.perturb_image(x, "amplitude", 0.3, seed=1)
    ph = U.perturb_image(x, "phase", 0.3, seed=1)
    assert U.psnr(amp, x) > U.psnr(ph, x)
    with pytest.raises(Exception):
        U.perturb_image(x, "neither", 0.1)
