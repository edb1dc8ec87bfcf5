"""File-level helpers: image path in, normalized noise pattern out."""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import PrnuError
from .filters import FilterConfig, extract_pattern
from .imaging import load_image, to_gray_sum


def pattern_from_path(path, config=FilterConfig()):
    return extract_pattern(to_gray_sum(load_image(path)), config)


def _try_extract(path, config, dtype):
    try:
        return np.asarray(pattern_from_path(path, config), dtype=dtype), None
    except (PrnuError, OSError) as e:
        return None, f"{type(e).__name__}: {e}"


def extract_patterns(paths, config=FilterConfig(), threads=None, dtype=np.float64):
    """
    Extract patterns for many files, collecting per-file failures.

    :return: ``(patterns, skipped)``; ``patterns`` is a list of
        ``(path, pattern)`` in input order, ``skipped`` a list of
        ``(path, error message)``
    """
    paths = [str(p) for p in paths]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda p: _try_extract(p, config, dtype), paths))
    patterns, skipped = [], []
    for path, (pat, err) in zip(paths, results):
        if err is None:
            patterns.append((path, pat))
        else:
            skipped.append((path, err))
    return patterns, skipped
