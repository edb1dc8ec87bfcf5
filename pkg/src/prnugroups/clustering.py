"""
Grouping a database of images by shared sensor noise.

The database is cut into consecutive blocks. Inside a block, groups grow
greedily from randomly chosen seed images: every unassigned image whose
pattern correlates with the group fingerprint above ``threshold(count, 1)``
joins, the fingerprint is re-averaged, and this repeats until a pass adds
nobody. Groups from different blocks are then merged, strongest match first,
trying all four quarter-turn rotations.
"""
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigMismatchError, DimensionMismatchError
from .filters import DEFAULT_SIGMA0, FilterConfig, FilterKind, SuppressStrategy
from .fingerprint import (Fingerprint, Rotation, average_into, corr2, corr2_many,
                          merge_fingerprints, rotate)
from .imaging import DEFAULT_CROP
from .pipeline import extract_patterns, pattern_from_path

MERGED = "merged"


@dataclass(frozen=True)
class ClusterConfig:
    block_size: int = 50
    filter: FilterKind = FilterKind.SECOND_ORDER
    suppress: SuppressStrategy = SuppressStrategy.ROWCOL
    crop: int = DEFAULT_CROP
    rng_seed: int = 0
    error_margin: float = 0.01
    sigma0: float = DEFAULT_SIGMA0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        # validates filter, suppress, sigma0 and crop
        self.filter_config

    @property
    def filter_config(self):
        return FilterConfig(self.filter, self.sigma0, self.suppress, self.crop)

    @classmethod
    def from_filter_config(cls, fc, **kw):
        return cls(filter=fc.filter, suppress=fc.suppress, crop=fc.crop,
                   sigma0=fc.sigma0, **kw)

    def to_dict(self):
        d = self.filter_config.to_dict()
        d.update(block_size=self.block_size, rng_seed=self.rng_seed,
                 error_margin=self.error_margin)
        return d


class AuditEntry(NamedTuple):
    """Why an image (or merged group) joined a group."""
    image_id: str
    correlation: float
    threshold: float
    step: str


@dataclass
class Group:
    id: int
    fingerprint: Fingerprint
    blocks: frozenset
    audit: list = field(default_factory=list)

    @property
    def block_of_origin(self):
        return next(iter(self.blocks)) if len(self.blocks) == 1 else MERGED

    @property
    def members(self):
        return self.fingerprint.members

    @property
    def size(self):
        return self.fingerprint.count


def block_rng(seed, block_index):
    return np.random.default_rng([int(seed), int(block_index)])


def split_blocks(items, block_size):
    return [items[i:i + block_size] for i in range(0, len(items), block_size)]


def cluster_block(patterns, thresholds, rng, block_index=0, first_id=0):
    """
    Greedy grouping of one block.

    :param patterns: list of ``(image id, pattern)``, all the same shape
    :param thresholds: ThresholdTable
    :param rng: numpy Generator choosing group seeds
    :param block_index: recorded as each group's block of origin
    :param first_id: id given to the first group
    :return: list of Group, in creation order
    """
    if not patterns:
        return []
    ids = [str(p[0]) for p in patterns]
    shape = np.shape(patterns[0][1])
    for pid, p in patterns:
        if np.shape(p) != shape:
            raise DimensionMismatchError(f"{pid} has shape {np.shape(p)}, expected {shape}")
    stack = np.stack([np.asarray(p, dtype=np.float64) for _, p in patterns])

    unassigned = list(range(len(ids)))
    groups = []
    while unassigned:
        seed = unassigned.pop(int(rng.integers(len(unassigned))))
        fp = Fingerprint.single(stack[seed], ids[seed])
        audit = [AuditEntry(ids[seed], 1.0, float("nan"), "seed")]
        n_pass = 0
        while unassigned:
            n_pass += 1
            thr = thresholds.lookup(fp.count, 1)
            corrs = corr2_many(stack[unassigned], fp.pattern)
            joining = [(u, c) for u, c in zip(unassigned, corrs) if c > thr]
            if not joining:
                break
            for u, c in joining:
                fp = average_into(fp, stack[u], ids[u])
                audit.append(AuditEntry(ids[u], float(c), float(thr), f"pass{n_pass}"))
            taken = {u for u, _ in joining}
            unassigned = [u for u in unassigned if u not in taken]
        groups.append(Group(first_id + len(groups), fp, frozenset([block_index]), audit))
    return groups


def _unit(p):
    p = np.asarray(p, dtype=np.float64)
    p = p - p.mean()
    return p / np.linalg.norm(p)


def _best_rotation(u1, u2, tie_tol=1e-12):
    best_r, best_c = None, -np.inf
    for r in Rotation:
        q = rotate(u2, r)
        if q.shape != u1.shape:
            continue
        c = float(np.dot(u1.ravel(), q.ravel()))
        if c > best_c + tie_tol:
            best_r, best_c = r, c
    if best_r is None:
        raise DimensionMismatchError(f"pattern shapes differ: {u1.shape} vs {u2.shape}")
    return best_r, min(best_c, 1.0)


def _order(g1, g2):
    """Larger group first (ties: lower id); its orientation is kept."""
    return (g1, g2) if (-g1.size, g1.id) <= (-g2.size, g2.id) else (g2, g1)


def merge_blocks(groups, thresholds):
    """
    Merge groups that come from disjoint sets of blocks.

    Every eligible pair is scored by its best-rotation correlation; the
    highest pair above ``threshold(count1, count2)`` is merged into the
    larger group's orientation, its scores are refreshed, and this repeats
    until no pair clears its threshold. Groups sharing a block never merge.
    """
    active = {g.id: g for g in groups}
    if len(active) != len(groups):
        raise ValueError("group ids must be unique")
    shapes = {tuple(sorted(g.fingerprint.shape)) for g in groups}
    if len(shapes) > 1:
        raise DimensionMismatchError(f"fingerprints have different shapes: {shapes}")
    units = {g.id: _unit(g.fingerprint.pattern) for g in groups}
    scores = {}

    def score(i, j):
        g1, g2 = _order(active[i], active[j])
        r, c = _best_rotation(units[g1.id], units[g2.id])
        scores[(min(i, j), max(i, j))] = (c, g1.id, g2.id, r)

    ids = sorted(active)
    for k, i in enumerate(ids):
        for j in ids[k + 1:]:
            if not active[i].blocks & active[j].blocks:
                score(i, j)

    while True:
        best = None
        for key in sorted(scores):
            c, i1, i2, r = scores[key]
            thr = thresholds.lookup(active[i1].size, active[i2].size)
            if c > thr and (best is None or c > best[0]):
                best = (c, i1, i2, r, thr)
        if best is None:
            break
        c, i1, i2, r, thr = best
        g1, g2 = active[i1], active[i2]
        merged = Group(g1.id, merge_fingerprints(g1.fingerprint, g2.fingerprint, r),
                       g1.blocks | g2.blocks,
                       g1.audit + [AuditEntry(f"group{g2.id}", c, thr, f"merge:{r.name}")]
                       + g2.audit)
        del active[i2], units[i2]
        active[i1] = merged
        units[i1] = _unit(merged.fingerprint.pattern)
        scores = {k: v for k, v in scores.items() if i1 not in k and i2 not in k}
        for j in sorted(active):
            if j != i1 and not active[j].blocks & merged.blocks:
                score(i1, j)
    return [active[i] for i in sorted(active)]


@dataclass
class ClusterResult:
    groups: list
    params: ClusterConfig
    thresholds: object
    timing: dict
    skipped: list
    block_sizes: list

    def to_report(self, fingerprint_files=None):
        fingerprint_files = fingerprint_files or {}
        groups = []
        for g in self.groups:
            groups.append({
                "id": g.id,
                "size": g.size,
                "members": list(g.members),
                "rotations": [r.name for r in g.fingerprint.rotations],
                "block_of_origin": g.block_of_origin,
                "fingerprint_file": fingerprint_files.get(g.id),
            })
        return {
            "params": self.params.to_dict(),
            "thresholds": self.thresholds.to_dict(),
            "blocks": list(self.block_sizes),
            "groups": groups,
            "skipped": [{"path": p, "error": e} for p, e in self.skipped],
            "timing_ms": {k: round(v * 1000.0, 3) for k, v in self.timing.items()},
        }

    def to_json(self, fingerprint_files=None):
        return json.dumps(self.to_report(fingerprint_files), indent=2, sort_keys=True)


def _check_thresholds(thresholds, config):
    thresholds.check_config(config.filter_config)
    if not np.isclose(thresholds.error_margin, config.error_margin, rtol=0, atol=1e-12):
        raise ConfigMismatchError(
            f"threshold table error margin {thresholds.error_margin} "
            f"differs from configured {config.error_margin}")


def cluster_patterns(patterns, config, thresholds, threads=None, block_sizes=None):
    """
    Steps after extraction: per-block grouping then cross-block merging.

    :param patterns: list of ``(image id, pattern)`` grouped into blocks
        either by ``block_sizes`` or by ``config.block_size``
    :return: (groups, timing dict)
    """
    if block_sizes is None:
        blocks = split_blocks(patterns, config.block_size)
    else:
        blocks, pos = [], 0
        for n in block_sizes:
            blocks.append(patterns[pos:pos + n])
            pos += n
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        per_block = list(pool.map(
            lambda ib: cluster_block(ib[1], thresholds, block_rng(config.rng_seed, ib[0]), ib[0]),
            enumerate(blocks)))
    groups, next_id = [], 0
    for block_groups in per_block:
        for g in block_groups:
            g.id = next_id
            next_id += 1
            groups.append(g)
    t1 = time.perf_counter()
    groups = merge_blocks(groups, thresholds)
    t2 = time.perf_counter()
    return groups, {"cluster": t1 - t0, "merge": t2 - t1}


def cluster_database(image_paths, config, thresholds, threads=None):
    """
    Group image files by source camera.

    Paths are split into consecutive blocks of ``config.block_size``; images
    that cannot be decoded or give a degenerate pattern are reported in
    ``skipped`` and otherwise ignored.

    :param image_paths: list of file paths
    :param config: ClusterConfig
    :param thresholds: ThresholdTable calibrated under the same configuration
    :param threads: worker threads for extraction and per-block grouping
    :return: ClusterResult
    """
    paths = [str(p) for p in image_paths]
    if not paths:
        raise ValueError("cluster_database needs at least one image")
    _check_thresholds(thresholds, config)

    t0 = time.perf_counter()
    # float32 storage keeps a 500 image database in memory; math stays float64
    patterns, skipped = extract_patterns(paths, config.filter_config, threads,
                                         dtype=np.float32)
    t_extract = time.perf_counter() - t0

    ok = {p for p, _ in patterns}
    path_blocks = split_blocks(paths, config.block_size)
    sizes_ok = [sum(p in ok for p in b) for b in path_blocks]
    groups, timing = cluster_patterns(patterns, config, thresholds, threads, sizes_ok)
    timing = {"extract": t_extract, **timing}
    return ClusterResult(groups, config, thresholds, timing, skipped,
                         [len(b) for b in path_blocks])


class MatchRecord(NamedTuple):
    fingerprint: int
    correlation: float
    matched: bool


def match_against(suspects, image_path, config, thresholds):
    """
    Correlate one image against suspect fingerprints.

    :param suspects: list of Fingerprint
    :param image_path: image file
    :param config: FilterConfig (or ClusterConfig) the suspects were built with
    :param thresholds: ThresholdTable
    :return: one MatchRecord per suspect, in order; ``matched`` is
        ``corr > threshold(count, 1)``
    """
    fc = getattr(config, "filter_config", config)
    thresholds.check_config(fc)
    pattern = pattern_from_path(image_path, fc)
    out = []
    for k, f in enumerate(suspects):
        if f.shape != pattern.shape:
            raise DimensionMismatchError(
                f"suspect {k} has shape {f.shape}, image pattern {pattern.shape}")
        c = corr2(pattern, f.pattern)
        out.append(MatchRecord(k, c, c > thresholds.lookup(f.count, 1)))
    return out
