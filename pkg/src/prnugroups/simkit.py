"""
Synthetic cameras and images with a known PRNU, used as ground truth.

Sensor model, per pixel::

    I = scene * (1 + strength * K + common) + additive + N(0, read_noise_std)

``K`` is the camera's PRNU (zero mean, unit RMS), ``common`` an optional
multiplicative pattern shared by every camera of a corpus (same sensor model
and firmware) and ``additive`` optional structured noise such as a periodic
grid. Everything is deterministic in the seeds.
"""
import csv
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from PIL import Image

from .errors import DimensionMismatchError

DEFAULT_READ_NOISE = 40.0
DEFAULT_COMMON_STRENGTH = 0.0
MIN_SIZE = 64


@dataclass(frozen=True)
class SyntheticCamera:
    camera_id: str
    prnu: np.ndarray
    strength: float


class SyntheticImage(NamedTuple):
    image_id: str
    image: np.ndarray
    camera_id: str


def _standardize(x):
    x = x - x.mean()
    return x / x.std()


def gen_camera(rng_seed, size, strength, camera_id=None):
    """Camera whose PRNU is an i.i.d. Gaussian field scaled to zero mean and unit RMS."""
    if size < MIN_SIZE:
        raise ValueError(f"camera size must be >= {MIN_SIZE}, got {size}")
    if strength < 0:
        raise ValueError(f"strength must be >= 0, got {strength}")
    rng = np.random.default_rng(rng_seed)
    k = _standardize(rng.standard_normal((size, size)))
    return SyntheticCamera(camera_id or f"cam{rng_seed}", k, float(strength))


def gen_scene(size, rng):
    """Smooth scene: a flat level plus a tilted plane and one slow cosine bump."""
    level = rng.uniform(250.0, 550.0)
    gy, gx = rng.uniform(-80.0, 80.0, size=2)
    amp = rng.uniform(0.0, 40.0)
    fy, fx = rng.uniform(0.25, 1.5, size=2)
    phase = rng.uniform(0, 2 * np.pi)
    t = np.linspace(-0.5, 0.5, size)
    y, x = t[:, None], t[None, :]
    bump = amp * np.cos(2 * np.pi * (fy * y + fx * x) + phase)
    return level + gy * y + gx * x + bump


def gen_image(cam, scene, read_noise_std, rng, common=None, additive=None):
    """
    Render one exposure of ``scene`` through ``cam``.

    :param cam: SyntheticCamera
    :param scene: gray scene with the camera's dimensions
    :param read_noise_std: additive Gaussian noise, gray units
    :param rng: numpy Generator for the read noise
    :param common: optional multiplicative field shared across cameras
    :param additive: optional additive field (e.g. periodic noise)
    :return: gray image, clamped at zero
    """
    scene = np.asarray(scene, dtype=np.float64)
    if scene.shape != cam.prnu.shape:
        raise DimensionMismatchError(
            f"scene {scene.shape} does not match camera {cam.prnu.shape}")
    if read_noise_std < 0:
        raise ValueError("read_noise_std must be >= 0")
    gain = 1.0 + cam.strength * cam.prnu
    if common is not None:
        gain = gain + common
    img = scene * gain
    if additive is not None:
        img = img + additive
    if read_noise_std > 0:
        img = img + rng.normal(0.0, read_noise_std, size=scene.shape)
    return np.maximum(img, 0.0)


def periodic_pattern(size, period=8, rng=None):
    """
    Unit-RMS grid noise repeating every ``period`` pixels along rows and columns.

    Mixes separable row and column waves with a non-separable product term,
    the kind of blocky artifact a JPEG pipeline leaves.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    p1, p2, p3, p4 = rng.uniform(0, 2 * np.pi, size=4)
    w = 2 * np.pi / period
    i = np.arange(size)[:, None]
    j = np.arange(size)[None, :]
    x = np.sin(w * i + p1) + np.sin(w * j + p2) + 2.0 * np.sin(w * i + p3) * np.sin(w * j + p4)
    return _standardize(x)


def iter_database(n_cameras, images_per_camera, size, strength, rng_seed,
                  read_noise_std=DEFAULT_READ_NOISE,
                  common_strength=DEFAULT_COMMON_STRENGTH):
    """Generator form of :func:`gen_database`, one image at a time."""
    if n_cameras < 1 or images_per_camera < 1:
        raise ValueError("n_cameras and images_per_camera must be >= 1")
    common = None
    if common_strength > 0:
        common = common_strength * _standardize(
            np.random.default_rng([rng_seed, 2]).standard_normal((size, size)))
    for c in range(n_cameras):
        cam = gen_camera([rng_seed, 0, c], size, strength, camera_id=f"cam{c:02d}")
        for i in range(images_per_camera):
            rng = np.random.default_rng([rng_seed, 1, c, i])
            scene = gen_scene(size, rng)
            img = gen_image(cam, scene, read_noise_std, rng, common=common)
            yield SyntheticImage(f"{cam.camera_id}/img{i:03d}", img, cam.camera_id)


def gen_database(n_cameras, images_per_camera, size, strength, rng_seed,
                 read_noise_std=DEFAULT_READ_NOISE,
                 common_strength=DEFAULT_COMMON_STRENGTH):
    """
    Labeled corpus of ``n_cameras * images_per_camera`` gray images.

    Image ids look like ``cam03/img007``; ordered camera by camera. Camera
    ``c`` is seeded from ``(rng_seed, 0, c)`` and its image ``i`` from
    ``(rng_seed, 1, c, i)``, so corpora with more cameras or images extend
    smaller ones.
    """
    return list(iter_database(n_cameras, images_per_camera, size, strength, rng_seed,
                              read_noise_std, common_strength))


def gray_to_rgb8(gray):
    """
    Split a gray image into 8-bit RGB planes whose sum is ``round(gray)``.

    Values are clipped to 0..765; the remainder of the division by 3 goes to
    the red and then green plane.
    """
    v = np.clip(np.rint(gray), 0, 765).astype(np.int32)
    base, rem = np.divmod(v, 3)
    rgb = np.stack([base + (rem > 0), base + (rem > 1), base], axis=-1)
    return rgb.astype(np.uint8)


def write_corpus(images, directory, rotations=None):
    """
    Save a corpus as PNG files plus ``labels.csv`` (``path,camera_id``).

    :param images: iterable of SyntheticImage
    :param directory: output directory, created if needed
    :param rotations: optional mapping image_id -> clockwise quarter turns
        applied to the stored file
    :return: list of written file paths, in corpus order
    """
    os.makedirs(directory, exist_ok=True)
    rotations = rotations or {}
    paths = []
    rows = []
    for im in images:
        rel = im.image_id.replace("/", "_") + ".png"
        path = os.path.join(directory, rel)
        arr = gray_to_rgb8(im.image)
        k = int(rotations.get(im.image_id, 0))
        if k:
            arr = np.rot90(arr, k=-k)
        Image.fromarray(np.ascontiguousarray(arr), mode="RGB").save(path)
        paths.append(path)
        rows.append((rel, im.camera_id))
    with open(os.path.join(directory, "labels.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "camera_id"])
        w.writerows(rows)
    return paths
