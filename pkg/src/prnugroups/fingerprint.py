"""
Correlation of noise patterns and group fingerprints.

A fingerprint is the running mean of its members' normalized noise
patterns. It is not re-normalized after each addition; ``corr2`` centers
and scales at comparison time.
"""
import enum
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConstantInputError, DimensionMismatchError,
                     DuplicateMemberError, FormatError)
from .filters import FilterConfig


class Rotation(enum.IntEnum):
    """Clockwise quarter turns."""
    R0 = 0
    R90 = 1
    R180 = 2
    R270 = 3

    def __add__(self, other):
        return Rotation((int(self) + int(other)) % 4)

    def inverse(self):
        return Rotation((-int(self)) % 4)


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(f"pattern shapes differ: {a.shape} vs {b.shape}")


def corr2(a, b):
    """Pearson correlation of two equal-size matrices viewed as vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    a = (a - a.mean()).ravel()
    b = (b - b.mean()).ravel()
    na = np.sqrt(np.dot(a, a))
    nb = np.sqrt(np.dot(b, b))
    if na == 0 or nb == 0:
        raise ConstantInputError("corr2 of a constant pattern is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def corr2_many(stack, pattern):
    """corr2 of each row of ``stack`` (n, H, W) against one (H, W) pattern."""
    stack = np.asarray(stack, dtype=np.float64)
    pattern = np.asarray(pattern, dtype=np.float64)
    if stack.shape[1:] != pattern.shape:
        raise DimensionMismatchError(
            f"pattern shapes differ: {stack.shape[1:]} vs {pattern.shape}")
    n = stack.shape[0]
    flat = stack.reshape(n, -1)
    p = (pattern - pattern.mean()).ravel()
    np_ = np.sqrt(np.dot(p, p))
    means = flat.mean(axis=1)
    # sum((x - mx) * p) == sum(x * p) because p is centered
    dots = flat @ p
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->i", flat, flat) - flat.shape[1] * means ** 2, 0.0))
    if np_ == 0 or np.any(norms == 0):
        raise ConstantInputError("corr2 of a constant pattern is undefined")
    return np.clip(dots / (norms * np_), -1.0, 1.0)


def rotate(pattern, r):
    """Rotate clockwise by ``r`` quarter turns; R90 sends (i, j) to (j, H-1-i)."""
    return np.rot90(np.asarray(pattern), k=-int(Rotation(r)))


@dataclass
class Fingerprint:
    """Mean noise pattern of a set of images (a camera or group PRNU).

    ``rotations[i]`` is the rotation applied to member ``i``'s own pattern
    to bring it into this fingerprint's orientation.
    """
    pattern: np.ndarray
    members: list
    rotations: list = field(default=None)

    def __post_init__(self):
        self.pattern = np.asarray(self.pattern, dtype=np.float64)
        self.members = [str(m) for m in self.members]
        if self.rotations is None:
            self.rotations = [Rotation.R0] * len(self.members)
        self.rotations = [Rotation(r) for r in self.rotations]
        if not self.members:
            raise ValueError("a fingerprint needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise DuplicateMemberError("fingerprint members must be unique")
        if len(self.rotations) != len(self.members):
            raise ValueError("one rotation per member is required")

    @property
    def count(self):
        return len(self.members)

    @property
    def shape(self):
        return self.pattern.shape

    @classmethod
    def single(cls, pattern, image_id):
        return cls(np.array(pattern, dtype=np.float64), [image_id])


def average_into(f, pattern, image_id):
    """Return ``f`` with one more member folded into its running mean."""
    pattern = np.asarray(pattern, dtype=np.float64)
    _check_same_shape(f.pattern, pattern)
    image_id = str(image_id)
    if image_id in f.members:
        raise DuplicateMemberError(f"{image_id} is already a member")
    n = f.count
    new = (n * f.pattern + pattern) / (n + 1)
    return Fingerprint(new, f.members + [image_id], f.rotations + [Rotation.R0])


def _candidate_rotations(p1, p2):
    return [r for r in Rotation
            if (p2.shape if r % 2 == 0 else p2.shape[::-1]) == p1.shape]


def best_rotation_corr(f1, f2, tie_tol=1e-12):
    """
    Find the rotation of ``f2`` that best aligns it with ``f1``.

    :return: (rotation, correlation); near-ties within ``tie_tol`` go to the
        earliest rotation in R0, R90, R180, R270 order.
    """
    p1, p2 = f1.pattern, f2.pattern
    candidates = _candidate_rotations(p1, p2)
    if not candidates:
        raise DimensionMismatchError(f"pattern shapes differ: {p1.shape} vs {p2.shape}")
    best_r, best_c = None, -np.inf
    for r in candidates:
        c = corr2(p1, rotate(p2, r))
        if c > best_c + tie_tol:
            best_r, best_c = r, c
    return best_r, best_c


def merge_fingerprints(f1, f2, r=Rotation.R0):
    """Count-weighted merge of ``f2`` (rotated by ``r``) into ``f1``'s orientation."""
    r = Rotation(r)
    p2 = rotate(f2.pattern, r)
    _check_same_shape(f1.pattern, p2)
    overlap = set(f1.members) & set(f2.members)
    if overlap:
        raise DuplicateMemberError(f"fingerprints share members: {sorted(overlap)}")
    n1, n2 = f1.count, f2.count
    pattern = (n1 * f1.pattern + n2 * p2) / (n1 + n2)
    return Fingerprint(pattern, f1.members + f2.members,
                       f1.rotations + [m + r for m in f2.rotations])


# Binary file layout, all integers little-endian:
#   b"PRNU" | version u16 | width u32 | height u32 | count u32 |
#   config length u32 | config JSON | float32 pattern, row-major |
#   newline-separated member ids
MAGIC = b"PRNU"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIII")


def fingerprint_to_bytes(f, config):
    cfg = config.to_json().encode("utf-8")
    h, w = f.pattern.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, w, h, f.count, len(cfg))
    body = np.ascontiguousarray(f.pattern, dtype="<f4").tobytes()
    members = "\n".join(f.members).encode("utf-8")
    return header + cfg + body + members


def fingerprint_from_bytes(data):
    """Parse a fingerprint file. Returns ``(Fingerprint, FilterConfig)``."""
    if len(data) < _HEADER.size:
        raise FormatError("truncated fingerprint header")
    magic, version, w, h, count, cfg_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported fingerprint format version {version}")
    pos = _HEADER.size
    try:
        config = FilterConfig.from_dict(json.loads(data[pos:pos + cfg_len].decode("utf-8")))
    except (ValueError, KeyError) as e:
        raise FormatError(f"bad filter config: {e}") from e
    pos += cfg_len
    nbytes = 4 * w * h
    if len(data) < pos + nbytes:
        raise FormatError("truncated fingerprint pattern")
    pattern = np.frombuffer(data, dtype="<f4", count=w * h, offset=pos).reshape(h, w)
    members = data[pos + nbytes:].decode("utf-8").split("\n")
    if len(members) != count:
        raise FormatError(f"header says {count} members, found {len(members)}")
    return Fingerprint(pattern.astype(np.float64), members), config


def save_fingerprint(path, f, config):
    with open(path, "wb") as fh:
        fh.write(fingerprint_to_bytes(f, config))


def load_fingerprint(path):
    with open(path, "rb") as fh:
        return fingerprint_from_bytes(fh.read())
