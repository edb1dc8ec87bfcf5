"""
Noise residual extraction.

Three extractors are provided, from fastest to slowest:

* ``sod``: second order differential, ``-1/4 * Lap(img)``
* ``fod``: fourth order differential, ``1/16 * Lap(Lap(img))``
* ``wavelet``: 4-level db4 decomposition with a locally adaptive Wiener
  shrinkage of every detail subband

``Lap`` is the 5-point Laplacian with edge replication. The two differential
filters are the high-pass residual left by one explicit smoothing step, so
they are linear and their output scale is irrelevant to correlation.

Noise patterns are plain 2D float64 arrays with the shape of the source
gray image.
"""
import enum
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import pywt
from scipy import ndimage

from .errors import ImageTooSmallError, ZeroPatternError
from .imaging import DEFAULT_CROP, center_crop

SOD_STEP = 0.25
FOD_STEP = 1.0 / 16.0
WAVELET = "db4"
WAVELET_LEVELS = 4
WIENER_WINDOWS = (3, 5, 7, 9)
DEFAULT_SIGMA0 = 3.0

PEAK_FACTOR = 4.0
PEAK_WINDOW = 7

# patterns with an RMS below this (gray units) carry no usable noise
ZERO_RMS = 1e-9


class FilterKind(str, enum.Enum):
    WAVELET = "wavelet"
    SECOND_ORDER = "sod"
    FOURTH_ORDER = "fod"


class SuppressStrategy(str, enum.Enum):
    NONE = "none"
    ROWCOL = "rowcol"
    FFTWIENER = "fftwiener"
    BOTH = "both"


@dataclass(frozen=True)
class FilterConfig:
    """Every setting that changes the numbers in a noise pattern.

    Fingerprints and threshold tables are only comparable when produced
    under equal configurations.
    """
    filter: FilterKind = FilterKind.SECOND_ORDER
    sigma0: float = DEFAULT_SIGMA0
    suppress: SuppressStrategy = SuppressStrategy.ROWCOL
    crop: int = DEFAULT_CROP

    def __post_init__(self):
        object.__setattr__(self, "filter", FilterKind(self.filter))
        object.__setattr__(self, "suppress", SuppressStrategy(self.suppress))
        object.__setattr__(self, "sigma0", float(self.sigma0))
        object.__setattr__(self, "crop", int(self.crop))
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.crop != 0 and self.crop < 64:
            raise ValueError(f"crop must be 0 or >= 64, got {self.crop}")

    def to_dict(self):
        d = asdict(self)
        d["filter"] = self.filter.value
        d["suppress"] = self.suppress.value
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(filter=d["filter"], sigma0=d["sigma0"],
                   suppress=d["suppress"], crop=d["crop"])


def _check_size(img, min_size):
    h, w = img.shape
    if h < min_size or w < min_size:
        raise ImageTooSmallError(h, w, min_size)


def laplacian(img):
    """5-point Laplacian with edge replication."""
    p = np.pad(img, 1, mode="edge")
    out = p[:-2, 1:-1] + p[2:, 1:-1]
    out += p[1:-1, :-2]
    out += p[1:-1, 2:]
    out -= 4.0 * img
    return out


def extract_noise_second_order(img):
    img = np.asarray(img, dtype=np.float64)
    _check_size(img, 3)
    out = laplacian(img)
    out *= -SOD_STEP
    return out


def extract_noise_fourth_order(img):
    img = np.asarray(img, dtype=np.float64)
    _check_size(img, 5)
    out = laplacian(laplacian(img))
    out *= FOD_STEP
    return out


def _local_variance(coeffs, noise_var):
    """Smallest windowed signal-variance estimate over the Wiener windows."""
    sq = coeffs * coeffs
    est = None
    for w in WIENER_WINDOWS:
        v = ndimage.uniform_filter(sq, size=w, mode="wrap")
        est = v if est is None else np.minimum(est, v)
    est -= noise_var
    np.maximum(est, 0.0, out=est)
    return est


def extract_noise_wavelet(img, sigma0=DEFAULT_SIGMA0):
    """
    Wavelet-domain residual with locally adaptive Wiener shrinkage.

    :param img: gray image, at least 64x64
    :param sigma0: standard deviation of the noise to remove, gray units
    :return: ``img`` minus the denoised reconstruction
    """
    img = np.asarray(img, dtype=np.float64)
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    _check_size(img, 64)
    noise_var = float(sigma0) ** 2

    with warnings.catch_warnings():
        # small inputs: deep levels see boundary effects, accepted
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec2(img, WAVELET, mode="periodization", level=WAVELET_LEVELS)
    shrunk = [coeffs[0]]
    for details in coeffs[1:]:
        level = []
        for c in details:
            var = _local_variance(c, noise_var)
            level.append(c * (var / (var + noise_var)))
        shrunk.append(tuple(level))
    rec = pywt.waverec2(shrunk, WAVELET, mode="periodization")
    h, w = img.shape
    return img - rec[:h, :w]


def extract_noise(img, kind=FilterKind.SECOND_ORDER, sigma0=DEFAULT_SIGMA0):
    kind = FilterKind(kind)
    if kind is FilterKind.SECOND_ORDER:
        return extract_noise_second_order(img)
    if kind is FilterKind.FOURTH_ORDER:
        return extract_noise_fourth_order(img)
    return extract_noise_wavelet(img, sigma0)


def _suppress_rowcol(x):
    x = x - x.mean(axis=1, keepdims=True)
    x -= x.mean(axis=0, keepdims=True)
    return x


def _suppress_fft_peaks(x):
    """Clamp spectral peaks above PEAK_FACTOR x the local median magnitude.

    Phase is preserved; only the magnitude of peak bins is lowered to the
    local median, so energy can only decrease.
    """
    spec = np.fft.fft2(x)
    mag = np.abs(spec)
    med = ndimage.median_filter(mag, size=PEAK_WINDOW, mode="wrap")
    peaks = mag > PEAK_FACTOR * med
    if not peaks.any():
        return x.copy()
    spec[peaks] *= med[peaks] / mag[peaks]
    return np.fft.ifft2(spec).real


def suppress_periodic(pattern, strategy=SuppressStrategy.ROWCOL):
    """
    Remove row/column-aligned and periodic structure that is not PRNU.

    ``rowcol`` subtracts row means, then column means. ``fftwiener`` clamps
    isolated peaks in the 2D spectrum. ``both`` applies them in that order.
    """
    strategy = SuppressStrategy(strategy)
    x = np.asarray(pattern, dtype=np.float64)
    if strategy is SuppressStrategy.NONE:
        return x.copy()
    if strategy in (SuppressStrategy.ROWCOL, SuppressStrategy.BOTH):
        x = _suppress_rowcol(x)
    if strategy in (SuppressStrategy.FFTWIENER, SuppressStrategy.BOTH):
        x = _suppress_fft_peaks(x)
    return x


def normalize(pattern):
    """Return the pattern shifted to zero mean and scaled to unit L2 norm."""
    x = np.asarray(pattern, dtype=np.float64)
    x = x - x.mean()
    norm = np.sqrt(np.dot(x.ravel(), x.ravel()))
    if x.size == 0 or norm <= ZERO_RMS * np.sqrt(x.size):
        raise ZeroPatternError("noise pattern is constant; degenerate or saturated image")
    x /= norm
    return x


def extract_pattern(gray, config=FilterConfig()):
    """Full per-image chain: crop, filter, suppress, normalize."""
    img = center_crop(gray, config.crop)
    noise = extract_noise(img, config.filter, config.sigma0)
    noise = suppress_periodic(noise, config.suppress)
    return normalize(noise)
