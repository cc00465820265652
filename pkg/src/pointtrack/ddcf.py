"""Multi-channel discriminative correlation filters over shared feature maps.

A per-track filter is trained in closed form in the Fourier domain on a
windowed feature patch against a Gaussian target label, then used to
re-localize the target when its detection is missing. The whole-frame
feature map is computed once upstream (or synthesized); tracks only
extract small patches from it.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InvalidInputError

MIN_PATCH_CELLS = 8


@dataclass(frozen=True)
class DcfConfig:
    patch_cells: int = 32        # square patch side, in feature cells
    regularization: float = 0.01
    learning_rate: float = 0.02  # exponential model blend per update
    label_sigma: float = 2.0     # Gaussian target width, cells
    psr_min: float = 5.0         # acceptance gate for recoveries
    init_on_miss: bool = False   # train only at the first miss instead of warm updates

    def __post_init__(self):
        if self.patch_cells < MIN_PATCH_CELLS:
            raise ConfigError(f"patch_cells must be >= {MIN_PATCH_CELLS}")
        if self.regularization <= 0:
            raise ConfigError("regularization must be > 0")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.label_sigma <= 0:
            raise ConfigError("label_sigma must be > 0")


@dataclass(frozen=True)
class FeatureMap:
    """Whole-frame feature grid, channel-last, with an image-px stride."""

    data: np.ndarray  # (height, width, channels)
    stride: float     # image pixels per feature cell

    def __post_init__(self):
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise InvalidInputError(f"feature map must be (h, w, c) with positive dims, got {self.data.shape}")
        if self.stride <= 0 or not np.isfinite(self.stride):
            raise InvalidInputError(f"stride must be > 0, got {self.stride!r}")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("non-finite feature values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FeaturePatch:
    """Square window of a feature map, centred on a snapped grid cell.

    origin is the image-px position of the patch's centre cell; localization
    offsets are reported relative to it.
    """

    data: np.ndarray   # (size, size, channels)
    origin: np.ndarray  # (2,) image px, centre cell position
    stride: float

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CorrelationFilter:
    """Frequency-domain filter plus the running model statistics it came from."""

    freq: np.ndarray         # (s, s, c) complex
    numerator: np.ndarray    # (s, s, c) complex
    denominator: np.ndarray  # (s, s) real
    label_sigma: float
    regularization: float
    learning_rate: float

    @property
    def size(self) -> int:
        return self.freq.shape[0]

    @property
    def channels(self) -> int:
        return self.freq.shape[2]


@lru_cache(maxsize=8)
def _hann2d(size: int) -> np.ndarray:
    w = np.hanning(size)
    return np.outer(w, w)


@lru_cache(maxsize=8)
def _gaussian_label_fft(size: int, sigma: float) -> np.ndarray:
    """FFT of a Gaussian peak at the centre cell, wrapped circularly."""
    c = size // 2
    # circular distance of each index to the centre cell
    d = np.minimum(np.abs(np.arange(size) - c), size - np.abs(np.arange(size) - c))
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma ** 2))
    return np.fft.fft2(g)


def _windowed_fft(patch: FeaturePatch) -> np.ndarray:
    win = _hann2d(patch.size)
    return np.fft.fft2(patch.data * win[:, :, None], axes=(0, 1))


def extract_patch(fmap: FeatureMap, center, size: int) -> FeaturePatch:
    """Cut a size x size window around an image-px point.

    The centre is snapped to the nearest feature cell; cells falling outside
    the map are filled by edge replication. No window function is applied
    here (training and localization apply their own).
    """
    center = np.asarray(center, dtype=float).reshape(2)
    if not np.all(np.isfinite(center)):
        raise InvalidInputError(f"non-finite patch centre {center!r}")
    if size < MIN_PATCH_CELLS:
        raise InvalidInputError(f"patch size must be >= {MIN_PATCH_CELLS}, got {size}")
    cx = int(np.floor(center[0] / fmap.stride + 0.5))
    cy = int(np.floor(center[1] / fmap.stride + 0.5))
    half = size // 2
    rows = np.clip(np.arange(cy - half, cy - half + size), 0, fmap.height - 1)
    cols = np.clip(np.arange(cx - half, cx - half + size), 0, fmap.width - 1)
    data = np.ascontiguousarray(fmap.data[np.ix_(rows, cols)], dtype=float)
    origin = np.array([cx * fmap.stride, cy * fmap.stride])
    return FeaturePatch(data=data, origin=origin, stride=fmap.stride)


def train_filter(patch: FeaturePatch, config: DcfConfig = DcfConfig()) -> CorrelationFilter:
    """Closed-form ridge-regression filter for one patch.

    Per channel, with X = fft2(windowed patch) and Y = fft2(Gaussian label):
    numerator_c = Y * conj(X_c), denominator = sum_c |X_c|^2, and the filter
    is numerator / (denominator + regularization).
    """
    if not np.any(patch.data):
        raise InvalidInputError("all-zero patch cannot train a filter")
    x = _windowed_fft(patch)
    y = _gaussian_label_fft(patch.size, config.label_sigma)
    numerator = y[:, :, None] * np.conj(x)
    denominator = np.sum(x * np.conj(x), axis=2).real
    freq = numerator / (denominator + config.regularization)[:, :, None]
    return CorrelationFilter(
        freq=freq, numerator=numerator, denominator=denominator,
        label_sigma=config.label_sigma, regularization=config.regularization,
        learning_rate=config.learning_rate)


def _check_shapes(filt: CorrelationFilter, patch: FeaturePatch):
    if filt.freq.shape != patch.data.shape:
        raise InvalidInputError(
            f"filter shape {filt.freq.shape} does not match patch shape {patch.data.shape}")


def response(filt: CorrelationFilter, patch: FeaturePatch) -> np.ndarray:
    """Real-valued correlation response over the patch grid."""
    _check_shapes(filt, patch)
    z = _windowed_fft(patch)
    spectrum = np.sum(filt.freq * z, axis=2)
    return np.fft.ifft2(spectrum).real


def localize(filt: CorrelationFilter, patch: FeaturePatch) -> tuple[np.ndarray, float]:
    """Locate the target inside a patch.

    Returns (offset, psr): offset is the displacement from patch.origin in
    image pixels (circular-shift convention, refined to sub-cell precision
    by a quadratic fit around the peak); psr is the peak-to-sidelobe ratio
    with an 11x11 exclusion window.
    """
    r = response(filt, patch)
    s = patch.size
    c = s // 2
    peak_flat = int(np.argmax(r))
    py, px = np.unravel_index(peak_flat, r.shape)

    def _subcell(axis_vals) -> float:
        prev_v, peak_v, next_v = axis_vals
        denom = prev_v - 2.0 * peak_v + next_v
        if denom >= -1e-12:  # not a strict local maximum
            return 0.0
        delta = 0.5 * (prev_v - next_v) / denom
        return float(np.clip(delta, -0.5, 0.5))

    dy = _subcell((r[(py - 1) % s, px], r[py, px], r[(py + 1) % s, px]))
    dx = _subcell((r[py, (px - 1) % s], r[py, px], r[py, (px + 1) % s]))

    # signed displacement from the centre cell, wrapped into [-s/2, s/2)
    off_y = ((py - c + s // 2) % s) - s // 2 + dy
    off_x = ((px - c + s // 2) % s) - s // 2 + dx

    excl = 5  # 11x11 window around the peak
    yy = (np.arange(s)[:, None] - py + s // 2) % s - s // 2
    xx = (np.arange(s)[None, :] - px + s // 2) % s - s // 2
    sidelobe = r[(np.abs(yy) > excl) | (np.abs(xx) > excl)]
    sd = float(sidelobe.std())
    if sd < 1e-12:
        psr = float("inf")
    else:
        psr = float((r[py, px] - sidelobe.mean()) / sd)

    offset = np.array([off_x * patch.stride, off_y * patch.stride])
    return offset, psr


def update_filter(filt: CorrelationFilter, patch: FeaturePatch) -> CorrelationFilter:
    """Blend the running model statistics with a new patch and rebuild."""
    _check_shapes(filt, patch)
    eta = filt.learning_rate
    z = _windowed_fft(patch)
    y = _gaussian_label_fft(patch.size, filt.label_sigma)
    num_new = y[:, :, None] * np.conj(z)
    den_new = np.sum(z * np.conj(z), axis=2).real
    numerator = (1.0 - eta) * filt.numerator + eta * num_new
    denominator = (1.0 - eta) * filt.denominator + eta * den_new
    freq = numerator / (denominator + filt.regularization)[:, :, None]
    return CorrelationFilter(
        freq=freq, numerator=numerator, denominator=denominator,
        label_sigma=filt.label_sigma, regularization=filt.regularization,
        learning_rate=eta)
