"""Image decoding and the grayscale center crop consumed by the filters.

Images travel through the pipeline as plain numpy arrays:

* RGB images are ``(height, width, 3)`` ``uint8`` arrays,
* gray images are ``(height, width)`` ``float64`` arrays holding the
  unscaled channel sum (range 0..765).
"""
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageDecodeError, ImageTooSmallError

DEFAULT_CROP = 1024


def load_image(path):
    """
    Decode a JPEG or PNG file into an RGB array.

    EXIF orientation is ignored; pixels are returned in stored sensor order.
    Single-channel sources are replicated into three identical planes.

    :param path: image file path
    :return: ``(H, W, 3)`` uint8 array
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(2, "image not found", str(path))
    try:
        with Image.open(path) as im:
            if im.mode.startswith("I;16"):
                # 16-bit grayscale: keep the top 8 bits instead of clipping
                arr = np.asarray(im, dtype=np.uint32) >> 8
                arr = np.repeat(arr.astype(np.uint8)[:, :, None], 3, axis=2)
            else:
                arr = np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise ImageDecodeError(path, str(e)) from e
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
        raise ImageDecodeError(path, f"unexpected decoded shape {arr.shape}")
    return np.ascontiguousarray(arr, dtype=np.uint8)


def to_gray_sum(img):
    """Sum the three color planes into one float plane, without scaling or clipping."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    return img.astype(np.float64).sum(axis=2)


def center_crop(img, size=DEFAULT_CROP):
    """
    Cut a ``size`` x ``size`` window from the center of a gray image.

    Odd margins are rounded down, so the window sits at most one pixel
    toward the top-left. ``size=0`` disables cropping.
    """
    if size == 0:
        return img
    h, w = img.shape
    if h < size or w < size:
        raise ImageTooSmallError(h, w, size)
    top = (h - size) // 2
    left = (w - size) // 2
    return img[top:top + size, left:left + size]
