"""
Decision thresholds at a fixed false-positive rate.

Two fingerprints averaged from ``a`` and ``b`` images match when
``corr2(A, B) > threshold(a, b)``. Each threshold is the (1 - r) quantile of
correlations between fingerprints built from *different* cameras of a
labeled sample set, so about a fraction ``r`` of non-matching pairs exceed it.
"""
import json
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (ConfigMismatchError, EmptyTableError, FormatError,
                     InsufficientCamerasError, InsufficientSamplesError)

DEFAULT_GRID = (1, 2, 5, 10, 20, 40)
DEFAULT_TRIALS = 1000
TABLE_VERSION = 1


@dataclass
class LabeledPattern:
    image_id: str
    camera_id: str
    pattern: np.ndarray


class RocStats(NamedTuple):
    tpr: float
    fpr: float


@dataclass
class ThresholdTable:
    """Symmetric grid of thresholds indexed by fingerprint sizes ``(a, b)``."""
    error_margin: float
    grid_counts: list
    cells: dict
    trials: dict = field(default_factory=dict)
    filter_config: dict = None
    # per-cell mismatch correlations from calibration; not serialized
    mismatch: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.grid_counts = sorted(int(g) for g in self.grid_counts)
        for (a, b), t in list(self.cells.items()):
            self.cells[(b, a)] = t
        for (a, b), n in list(self.trials.items()):
            self.trials[(b, a)] = n

    def lookup(self, a, b):
        return lookup(self, a, b)

    def check_config(self, config):
        """Raise unless the table was calibrated under ``config`` (a FilterConfig)."""
        if self.filter_config is None:
            return
        if dict(self.filter_config) != config.to_dict():
            raise ConfigMismatchError(
                f"threshold table was calibrated with {self.filter_config}, "
                f"not {config.to_dict()}")

    def to_dict(self):
        cells = [{"a": a, "b": b, "threshold": self.cells[(a, b)],
                  "trials": self.trials.get((a, b))}
                 for a in self.grid_counts for b in self.grid_counts]
        return {"version": TABLE_VERSION, "error_margin": self.error_margin,
                "grid_counts": list(self.grid_counts), "cells": cells,
                "filter_config": self.filter_config}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != TABLE_VERSION:
            raise FormatError(f"unsupported threshold table version {d.get('version')}")
        cells, trials = {}, {}
        for c in d["cells"]:
            key = (int(c["a"]), int(c["b"]))
            cells[key] = float(c["threshold"])
            if c.get("trials") is not None:
                trials[key] = int(c["trials"])
        table = cls(float(d["error_margin"]), d["grid_counts"], cells, trials,
                    d.get("filter_config"))
        missing = [(a, b) for a in table.grid_counts for b in table.grid_counts
                   if (a, b) not in table.cells]
        if missing:
            raise FormatError(f"threshold table is missing cells {missing}")
        return table

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _bracket(grid_logs, x):
    n = len(grid_logs)
    if n == 1:
        return 0, 0, 0.0
    x = min(max(x, grid_logs[0]), grid_logs[-1])
    j = int(np.searchsorted(grid_logs, x, side="right")) - 1
    j = min(max(j, 0), n - 2)
    t = (x - grid_logs[j]) / (grid_logs[j + 1] - grid_logs[j])
    return j, j + 1, t


def lookup(table, a, b):
    """
    Threshold for fingerprints of ``a`` and ``b`` images.

    Exact on grid points, bilinear in ``(log2 a, log2 b)`` between them and
    clamped to the grid edge outside it.
    """
    if not table.cells or not table.grid_counts:
        raise EmptyTableError("threshold table has no cells")
    if a < 1 or b < 1:
        raise ValueError(f"counts must be >= 1, got ({a}, {b})")
    g = table.grid_counts
    if (a, b) in table.cells:
        return table.cells[(a, b)]
    logs = [math.log2(c) for c in g]
    i0, i1, s = _bracket(logs, math.log2(a))
    j0, j1, t = _bracket(logs, math.log2(b))
    c = table.cells
    top = (1 - t) * c[(g[i0], g[j0])] + t * c[(g[i0], g[j1])]
    bottom = (1 - t) * c[(g[i1], g[j0])] + t * c[(g[i1], g[j1])]
    return (1 - s) * top + s * bottom


def roc_stats(match_corrs, mismatch_corrs, threshold):
    """TPR and FPR at ``threshold``; a correlation counts only if strictly above it."""
    m = np.asarray(match_corrs, dtype=np.float64)
    n = np.asarray(mismatch_corrs, dtype=np.float64)
    if m.size == 0 or n.size == 0:
        raise ValueError("roc_stats needs nonempty match and mismatch lists")
    return RocStats(float(np.mean(m > threshold)), float(np.mean(n > threshold)))


def threshold_at(mismatch_corrs, r):
    """(1 - r) quantile with linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(mismatch_corrs, dtype=np.float64), 1.0 - r,
                             method="linear"))


def _gram(samples):
    """Gram matrix of the mean-centered sample patterns."""
    n = len(samples)
    shape = samples[0].pattern.shape
    x = np.empty((n, int(np.prod(shape))), dtype=np.float64)
    for i, s in enumerate(samples):
        if s.pattern.shape != shape:
            raise ValueError("sample patterns must share one shape")
        p = np.asarray(s.pattern, dtype=np.float64).ravel()
        x[i] = p - p.mean()
    return x @ x.T


def trial_rng(seed, a, b, trial):
    return np.random.default_rng([int(seed), int(a), int(b), int(trial)])


def draw_trial(rng, pairs, by_camera, a, b):
    """Pick an ordered camera pair, then ``a`` and ``b`` distinct sample indices."""
    x, y = pairs[int(rng.integers(len(pairs)))]
    ia = rng.choice(by_camera[x], size=a, replace=False)
    ib = rng.choice(by_camera[y], size=b, replace=False)
    return ia, ib


def _run_trials(gram, pairs, by_camera, a, b, seed, trial_ids):
    out = np.empty(len(trial_ids))
    for k, t in enumerate(trial_ids):
        ia, ib = draw_trial(trial_rng(seed, a, b, t), pairs, by_camera, a, b)
        sab = gram[np.ix_(ia, ib)].sum()
        saa = gram[np.ix_(ia, ia)].sum()
        sbb = gram[np.ix_(ib, ib)].sum()
        out[k] = sab / math.sqrt(saa * sbb)
    return out


def calibrate(samples, grid_counts=DEFAULT_GRID, r=0.01, trials=DEFAULT_TRIALS,
              rng_seed=0, filter_config=None, threads=1):
    """
    Build a threshold table from labeled noise patterns.

    For every cell ``a <= b``, ``trials`` times: pick two different cameras,
    average ``a`` patterns of the first and ``b`` of the second (drawn without
    replacement) and correlate the two means. The cell's threshold is the
    ``1 - r`` quantile of those mismatch correlations.

    Correlations are evaluated through the Gram matrix of the centered
    patterns, which is algebraically identical to forming both means and
    calling ``corr2``.

    :param samples: list of LabeledPattern, all the same shape
    :param grid_counts: fingerprint sizes to calibrate
    :param r: target false-positive rate, 0 < r < 0.5
    :param trials: mismatch pairs per cell, >= 100
    :param rng_seed: seed; each trial draws from its own derived stream
    :param filter_config: FilterConfig the samples were extracted with
    :param threads: worker threads; results do not depend on it
    :return: ThresholdTable
    """
    if not 0 < r < 0.5:
        raise ValueError(f"error margin must be in (0, 0.5), got {r}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials per cell, got {trials}")
    grid = sorted(set(int(g) for g in grid_counts))
    if not grid or grid[0] < 1:
        raise ValueError(f"grid counts must be positive, got {grid_counts}")

    by_camera = defaultdict(list)
    for i, s in enumerate(samples):
        if not s.camera_id:
            raise ValueError(f"sample {s.image_id} has no camera id")
        by_camera[s.camera_id].append(i)
    if len(by_camera) < 2:
        raise InsufficientCamerasError(
            f"calibration needs at least 2 cameras, got {len(by_camera)}")
    cameras = sorted(by_camera)
    by_camera = {c: np.asarray(by_camera[c]) for c in cameras}

    plan, skipped = [], []
    for ai, a in enumerate(grid):
        for b in grid[ai:]:
            pairs = [(x, y) for x in cameras for y in cameras
                     if x != y and len(by_camera[x]) >= a and len(by_camera[y]) >= b]
            if pairs:
                plan.append((a, b, pairs))
            else:
                skipped.append((a, b))
    if skipped:
        raise InsufficientSamplesError(skipped)

    gram = _gram(samples)
    cells, counts, mismatch = {}, {}, {}
    threads = max(1, int(threads or 1))
    chunks = np.array_split(np.arange(trials), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for a, b, pairs in plan:
            parts = pool.map(
                lambda ids: _run_trials(gram, pairs, by_camera, a, b, rng_seed, ids),
                chunks)
            corrs = np.concatenate(list(parts))
            cells[(a, b)] = threshold_at(corrs, r)
            counts[(a, b)] = trials
            mismatch[(a, b)] = mismatch[(b, a)] = corrs
    fc = filter_config.to_dict() if hasattr(filter_config, "to_dict") else filter_config
    return ThresholdTable(r, grid, cells, counts, fc, mismatch=mismatch)
