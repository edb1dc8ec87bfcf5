import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prnugroups import simkit
from prnugroups.errors import ImageTooSmallError, ZeroPatternError
from prnugroups.filters import (FilterConfig, FilterKind, SuppressStrategy,
                                extract_noise, extract_noise_fourth_order,
                                extract_noise_second_order, extract_noise_wavelet,
                                extract_pattern, normalize, suppress_periodic)
from prnugroups.fingerprint import corr2


def lap_loops(img):
    """Brute-force 5-point Laplacian with edge replication."""
    h, w = img.shape
    out = np.zeros_like(img, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            up = img[max(i - 1, 0), j]
            down = img[min(i + 1, h - 1), j]
            left = img[i, max(j - 1, 0)]
            right = img[i, min(j + 1, w - 1)]
            out[i, j] = up + down + left + right - 4 * img[i, j]
    return out


def test_sod_constant_is_zero():
    assert not extract_noise_second_order(np.full((8, 9), 100.0)).any()


def test_sod_impulse():
    img = np.zeros((3, 3))
    img[1, 1] = 1.0
    expected = np.array([[0, -0.25, 0], [-0.25, 1.0, -0.25], [0, -0.25, 0]])
    assert np.array_equal(extract_noise_second_order(img), expected)
    assert np.allclose(-0.25 * lap_loops(img), expected, atol=0)


def test_sod_ramp_interior_zero():
    i, j = np.mgrid[0:10, 0:12]
    noise = extract_noise_second_order((i + j).astype(float))
    assert np.allclose(noise[1:-1, 1:-1], 0, atol=1e-12)


def test_sod_matches_loop_oracle(rng):
    img = rng.random((7, 11)) * 500
    assert np.allclose(extract_noise_second_order(img), -0.25 * lap_loops(img), atol=1e-10)


def test_fod_matches_loop_oracle(rng):
    img = rng.random((9, 6)) * 500
    assert np.allclose(extract_noise_fourth_order(img), lap_loops(lap_loops(img)) / 16, atol=1e-9)


def test_fod_constant_and_quadratic():
    assert not extract_noise_fourth_order(np.full((6, 6), 7.0)).any()
    i, _ = np.mgrid[0:12, 0:12]
    noise = extract_noise_fourth_order((i ** 2).astype(float))
    assert np.allclose(noise[2:-2, 2:-2], 0, atol=1e-9)


def test_fod_impulse_is_biharmonic_stencil():
    img = np.zeros((5, 5))
    img[2, 2] = 1.0
    stencil = np.array([[0, 0, 1, 0, 0],
                        [0, 2, -8, 2, 0],
                        [1, -8, 20, -8, 1],
                        [0, 2, -8, 2, 0],
                        [0, 0, 1, 0, 0]], dtype=float)
    out = extract_noise_fourth_order(img)
    assert out[2, 2] == pytest.approx(20 / 16)
    assert np.allclose(out, stencil / 16, atol=0)
    assert np.allclose(lap_loops(lap_loops(img)), stencil, atol=0)


def test_differential_filters_too_small():
    with pytest.raises(ImageTooSmallError):
        extract_noise_second_order(np.zeros((2, 5)))
    with pytest.raises(ImageTooSmallError):
        extract_noise_fourth_order(np.zeros((4, 5)))


@settings(max_examples=25)
@given(st.floats(-50, 50, allow_nan=False), st.integers(0, 1000))
def test_differential_filters_scale_equivariant(c, seed):
    img = np.random.default_rng(seed).random((8, 8)) * 100
    for f in (extract_noise_second_order, extract_noise_fourth_order):
        assert np.allclose(f(c * img), c * f(img), rtol=1e-12, atol=1e-9)


def test_wavelet_constant_is_zero():
    out = extract_noise_wavelet(np.full((64, 64), 300.0), 3.0)
    assert np.abs(out).max() < 1e-9


def test_wavelet_recovers_white_noise():
    rng = np.random.default_rng(7)
    noise = rng.normal(0, 3.0, (256, 256))
    out = extract_noise_wavelet(400.0 + noise, sigma0=3.0)
    assert out.shape == noise.shape
    assert corr2(out, noise) > 0.8


def test_wavelet_odd_shape():
    img = np.random.default_rng(1).random((67, 71)) * 100
    assert extract_noise_wavelet(img).shape == (67, 71)


@pytest.mark.parametrize("sigma0", [0.0, -1.0])
def test_wavelet_rejects_nonpositive_sigma(sigma0):
    with pytest.raises(ValueError):
        extract_noise_wavelet(np.zeros((64, 64)), sigma0)


def test_wavelet_too_small():
    with pytest.raises(ImageTooSmallError):
        extract_noise_wavelet(np.zeros((63, 64)))


def test_rowcol_removes_rank_one_structure():
    out = suppress_periodic(np.array([[1.0, 2.0], [3.0, 4.0]]), "rowcol")
    assert np.allclose(out, 0, atol=1e-15)


def test_none_is_identity(rng):
    x = rng.normal(size=(5, 6))
    assert np.array_equal(suppress_periodic(x, SuppressStrategy.NONE), x)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_rowcol_zero_means(seed):
    x = np.random.default_rng(seed).normal(3.0, 2.0, (13, 17))
    out = suppress_periodic(x, "rowcol")
    rms = np.sqrt(np.mean(out ** 2))
    assert np.abs(out.mean(axis=1)).max() <= 1e-9 * rms
    assert np.abs(out.mean(axis=0)).max() <= 1e-9 * rms


def test_fftwiener_energy_on_white_noise():
    for seed in range(3):
        x = np.random.default_rng(seed).normal(size=(128, 128))
        out = suppress_periodic(x, "fftwiener")
        ratio = np.sum(out ** 2) / np.sum(x ** 2)
        assert 0.5 <= ratio <= 1.0


def test_suppression_recovers_clean_part():
    rng = np.random.default_rng(3)
    clean = rng.normal(size=(128, 128))
    dirty = clean + 2.0 * simkit.periodic_pattern(128, 8, rng)
    out = suppress_periodic(dirty, "both")
    assert corr2(out, clean) > corr2(dirty, clean) + 0.2


def test_normalize():
    out = normalize(np.array([[1.0, -1.0]]))
    assert np.allclose(out, [[1 / np.sqrt(2), -1 / np.sqrt(2)]])
    with pytest.raises(ZeroPatternError):
        normalize(np.full((2, 2), 3.0))


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_normalize_postcondition(seed, scale):
    x = np.random.default_rng(seed).normal(5, scale, (9, 4))
    out = normalize(x)
    assert abs(out.mean()) < 1e-12
    assert abs(np.linalg.norm(out) - 1) < 1e-12


@pytest.mark.parametrize("kind", list(FilterKind))
def test_self_correlation_after_normalize(kind, rng):
    img = 300 + 40 * rng.normal(size=(64, 64))
    p = normalize(extract_noise(img, kind))
    assert corr2(p, p) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind", list(FilterKind))
def test_constant_image_is_degenerate(kind):
    cfg = FilterConfig(filter=kind, crop=64)
    with pytest.raises(ZeroPatternError):
        extract_pattern(np.full((80, 80), 765.0), cfg)


def test_extract_pattern_crops():
    img = np.random.default_rng(0).random((100, 90)) * 700
    p = extract_pattern(img, FilterConfig(crop=64))
    assert p.shape == (64, 64)
    assert abs(p.mean()) < 1e-12 and abs(np.linalg.norm(p) - 1) < 1e-12


def test_filter_config_roundtrip_and_validation():
    cfg = FilterConfig("wavelet", 2.5, "both", 512)
    assert FilterConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.to_dict() == {"filter": "wavelet", "sigma0": 2.5, "suppress": "both", "crop": 512}
    with pytest.raises(ValueError):
        FilterConfig(crop=32)
    with pytest.raises(ValueError):
        FilterConfig(sigma0=0)
    with pytest.raises(ValueError):
        FilterConfig(filter="median")
