import math

import numpy as np
import pytest

from prnugroups.calibration import (LabeledPattern, ThresholdTable, calibrate, draw_trial,
                                    lookup, roc_stats, threshold_at, trial_rng)
from prnugroups.errors import (ConfigMismatchError, EmptyTableError, FormatError,
                               InsufficientCamerasError, InsufficientSamplesError)
from prnugroups.filters import FilterConfig
from prnugroups.fingerprint import Fingerprint, average_into, corr2


def equicorrelated(n_cameras, per_camera, rho, shape=(8, 8), seed=0):
    """Each camera repeats one vector; any two cameras correlate at exactly rho."""
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(int(np.prod(shape)), n_cameras + 1))
    m -= m.mean(axis=0)
    q, _ = np.linalg.qr(m)
    z0, zs = q[:, 0], q[:, 1:]
    out = []
    for c in range(n_cameras):
        v = (np.sqrt(rho) * z0 + np.sqrt(1 - rho) * zs[:, c]).reshape(shape)
        out += [LabeledPattern(f"c{c}/{i}", f"c{c}", v) for i in range(per_camera)]
    return out


def noisy_samples(n_cameras=4, per_camera=6, shape=(12, 12), seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for c in range(n_cameras):
        k = rng.normal(size=shape)
        out += [LabeledPattern(f"c{c}/{i}", f"c{c}", k + 2 * rng.normal(size=shape))
                for i in range(per_camera)]
    return out


def test_constant_mismatch_distribution():
    table = calibrate(equicorrelated(3, 5, 0.1), [1, 2, 5], r=0.01, trials=200)
    for t in table.cells.values():
        assert t == pytest.approx(0.1, abs=1e-12)


def test_quantile_rule():
    corrs = [0.01 * k for k in range(1, 101)]
    assert threshold_at(corrs, 0.05) == pytest.approx(0.9505, abs=1e-12)
    assert threshold_at([0.1] * 50, 0.01) == pytest.approx(0.1, abs=1e-15)


def test_gram_route_equals_explicit_fingerprints():
    samples = noisy_samples()
    grid = [1, 2, 5]
    table = calibrate(samples, grid, r=0.05, trials=100, rng_seed=3)
    by_camera = {}
    for i, s in enumerate(samples):
        by_camera.setdefault(s.camera_id, []).append(i)
    cams = sorted(by_camera)
    by_camera = {c: np.asarray(by_camera[c]) for c in cams}
    for a, b in [(1, 1), (2, 5), (5, 5)]:
        pairs = [(x, y) for x in cams for y in cams if x != y]
        for t in range(0, 100, 17):
            ia, ib = draw_trial(trial_rng(3, a, b, t), pairs, by_camera, a, b)
            fa = Fingerprint.single(samples[ia[0]].pattern, samples[ia[0]].image_id)
            for i in ia[1:]:
                fa = average_into(fa, samples[i].pattern, samples[i].image_id)
            fb = Fingerprint.single(samples[ib[0]].pattern, samples[ib[0]].image_id)
            for i in ib[1:]:
                fb = average_into(fb, samples[i].pattern, samples[i].image_id)
            assert len(set(ia)) == a and len(set(ib)) == b
            assert samples[ia[0]].camera_id != samples[ib[0]].camera_id
            assert table.mismatch[(a, b)][t] == pytest.approx(corr2(fa.pattern, fb.pattern),
                                                              abs=1e-12)


def test_table_shape_and_symmetry():
    table = calibrate(noisy_samples(), [1, 2, 5], r=0.05, trials=150, rng_seed=1)
    for a in [1, 2, 5]:
        for b in [1, 2, 5]:
            assert table.cells[(a, b)] == table.cells[(b, a)]
            assert -1 <= table.cells[(a, b)] <= 1
            assert table.trials[(a, b)] == 150


def test_quantile_consistency():
    trials = 300
    r = 0.05
    table = calibrate(noisy_samples(), [1, 2, 5], r=r, trials=trials, rng_seed=2)
    for key, thr in table.cells.items():
        fpr = roc_stats([1.0], table.mismatch[key], thr).fpr
        assert fpr <= r + 1 / trials


def test_determinism_and_threads():
    s = noisy_samples()
    t1 = calibrate(s, [1, 2], r=0.05, trials=120, rng_seed=9, threads=1)
    t2 = calibrate(s, [1, 2], r=0.05, trials=120, rng_seed=9, threads=1)
    t3 = calibrate(s, [1, 2], r=0.05, trials=120, rng_seed=9, threads=3)
    assert t1 == t2 == t3
    for k in t1.mismatch:
        assert np.array_equal(t1.mismatch[k], t3.mismatch[k])
    t4 = calibrate(s, [1, 2], r=0.05, trials=120, rng_seed=10)
    assert t4.cells != t1.cells


def test_calibration_errors():
    one_cam = [LabeledPattern(str(i), "c", np.random.default_rng(i).normal(size=(4, 4)))
               for i in range(3)]
    with pytest.raises(InsufficientCamerasError):
        calibrate(one_cam, [1], trials=100)
    with pytest.raises(InsufficientSamplesError) as e:
        calibrate(noisy_samples(per_camera=3), [1, 2, 5], trials=100)
    assert (5, 5) in e.value.cells and (1, 5) in e.value.cells and (2, 2) not in e.value.cells
    for r in (0.0, 0.5, -0.1):
        with pytest.raises(ValueError):
            calibrate(noisy_samples(), [1], r=r, trials=100)
    with pytest.raises(ValueError):
        calibrate(noisy_samples(), [1], trials=99)


def test_small_cameras_skipped_for_large_counts():
    s = noisy_samples(n_cameras=3, per_camera=6) + noisy_samples(n_cameras=1, per_camera=2, seed=5)
    s[-2:] = [LabeledPattern(x.image_id.replace("c0", "tiny"), "tiny", x.pattern) for x in s[-2:]]
    table = calibrate(s, [1, 5], r=0.05, trials=100)
    assert set(table.grid_counts) == {1, 5}


def grid_table():
    cells = {}
    for a in (1, 2, 5):
        for b in (1, 2, 5):
            cells[(a, b)] = 0.01 * (a + b)
    cells[(1, 1)] = 0.02
    cells[(2, 1)] = cells[(1, 2)] = 0.04
    cells[(5, 1)] = cells[(1, 5)] = 0.06
    return ThresholdTable(0.01, [1, 2, 5], cells)


def test_lookup_exact_interpolated_clamped():
    t = grid_table()
    assert lookup(t, 1, 1) == 0.02
    expected = 0.04 + 0.02 * (math.log2(3) - 1) / (math.log2(5) - 1)
    assert lookup(t, 3, 1) == pytest.approx(expected, abs=1e-15)
    assert lookup(t, 3, 1) == pytest.approx(0.048850, abs=1e-6)
    assert lookup(t, 1000, 1000) == t.cells[(5, 5)]
    assert lookup(t, 1000, 1) == t.cells[(5, 1)]


def test_lookup_continuous_on_grid_lines():
    t = grid_table()
    for a, b in [(2, 1), (2, 2), (5, 2), (2, 5)]:
        for eps in (1e-9, -1e-9):
            assert abs(lookup(t, a * 2 ** eps, b) - t.cells[(a, b)]) < 1e-8
            if b * 2 ** eps >= 1:
                assert abs(lookup(t, a, b * 2 ** eps) - t.cells[(a, b)]) < 1e-8


def test_lookup_empty_and_invalid():
    with pytest.raises(EmptyTableError):
        lookup(ThresholdTable(0.01, [], {}), 1, 1)
    with pytest.raises(ValueError):
        lookup(grid_table(), 0, 1)


def test_roc_stats():
    assert roc_stats([0.9, 0.8], [0.1, 0.2], 0.5) == (1.0, 0.0)
    assert roc_stats([0.9, 0.8], [0.1, 0.2], -1) == (1.0, 1.0)
    s = roc_stats([0.9], [0.1, 0.2, 0.3, 0.4], 0.2)
    assert s.fpr == 0.5
    with pytest.raises(ValueError):
        roc_stats([], [0.1], 0)


def test_json_roundtrip(tmp_path):
    cfg = FilterConfig(crop=256)
    t = calibrate(noisy_samples(), [1, 2], r=0.05, trials=100, filter_config=cfg)
    path = tmp_path / "t.json"
    t.save(path)
    u = ThresholdTable.load(path)
    assert u == t
    d = u.to_dict()
    assert set(d) == {"version", "error_margin", "grid_counts", "cells", "filter_config"}
    assert {"a", "b", "threshold", "trials"} <= set(d["cells"][0])
    u.check_config(cfg)
    with pytest.raises(ConfigMismatchError):
        u.check_config(FilterConfig(crop=512))


def test_json_rejects_incomplete_or_wrong_version():
    d = grid_table().to_dict()
    d["cells"] = d["cells"][:-1]
    with pytest.raises(FormatError):
        ThresholdTable.from_dict(d)
    d = grid_table().to_dict()
    d["version"] = 99
    with pytest.raises(FormatError):
        ThresholdTable.from_dict(d)
