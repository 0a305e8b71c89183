"""Wideband detector: PSD edge detection with multiscale wavelet products.

The wavelet is the first derivative of a Gaussian. At scale ``s = 2**j``
the Gaussian has a standard deviation of ``s`` bins, the kernel is
sampled on ``[-4s, 4s]`` and normalized to unit L1 mass. Transforms are
circular convolutions over the frequency axis, so a PSD step shows up
as an extremum of the transform at every scale while noise does not
line up across scales; the pointwise product keeps the former and
suppresses the latter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectral import PsdEstimate


@dataclass(frozen=True)
class WaveletConfig:
    n_scales: int = 3
    edge_threshold_fraction: float = 0.3

    def __post_init__(self) -> None:
        if not 1 <= self.n_scales <= 8:
            raise ValueError(f"n_scales must be in 1..8, got {self.n_scales}")
        if not 0 < self.edge_threshold_fraction < 1:
            raise ValueError("edge_threshold_fraction must be in (0, 1)")

    @property
    def base_support_bins(self) -> int:
        """Width of the scale-1 kernel, ``8 * 2**1`` bins."""
        return 8 * 2


@lru_cache(maxsize=16)
def wavelet_kernel(scale_index: int) -> np.ndarray:
    """Sampled kernel ``psi`` on offsets ``m = 0..4s``; ``psi[-m] = -psi[m]``."""
    s = 2 ** scale_index
    m = np.arange(0, 4 * s + 1, dtype=float)
    half = -m * np.exp(-0.5 * (m / s) ** 2)
    half /= 2.0 * np.sum(np.abs(half))
    half.setflags(write=False)
    return half


def _transform(values: np.ndarray, scale_index: int) -> np.ndarray:
    psi = wavelet_kernel(scale_index)
    out = np.zeros(values.size)
    # W[k] = sum_m psi[m] P[k-m]; pairing +m/-m keeps constants exactly zero
    for m in range(1, psi.size):
        out += psi[m] * (np.roll(values, m) - np.roll(values, -m))
    return out


def _check_scale(n_bins: int, scale_index: int) -> None:
    if scale_index < 1:
        raise ValueError(f"scale index must be >= 1, got {scale_index}")
    if n_bins < 8 * 2 ** scale_index:
        raise ValueError(f"scale 2^{scale_index} needs at least {8 * 2 ** scale_index} bins, PSD has {n_bins}")


def wavelet_transform_psd(psd: PsdEstimate, scale_index: int) -> np.ndarray:
    """Circular convolution of the PSD with the scale ``2**scale_index`` wavelet."""
    values = psd.values if isinstance(psd, PsdEstimate) else np.asarray(psd, dtype=float)
    _check_scale(values.size, scale_index)
    return _transform(values, scale_index)


def multiscale_product(psd: PsdEstimate, config: WaveletConfig) -> np.ndarray:
    """Pointwise product of the transforms at scales ``2**1 .. 2**J``."""
    product = wavelet_transform_psd(psd, 1)
    for j in range(2, config.n_scales + 1):
        product = product * wavelet_transform_psd(psd, j)
    return product


def local_maxima(values, threshold_fraction: float) -> np.ndarray:
    """Circular local maxima of ``|values|`` above ``threshold_fraction * max``.

    A plateau contributes its first bin. All-zero input gives no maxima.
    """
    a = np.abs(np.asarray(values, dtype=float))
    peak = a.max() if a.size else 0.0
    if peak == 0:
        return np.zeros(0, dtype=np.int64)
    left = np.roll(a, 1)
    right = np.roll(a, -1)
    mask = (a > left) & (a >= right) & (a > threshold_fraction * peak)
    return np.flatnonzero(mask)


@dataclass(frozen=True)
class EdgeList:
    """Detected PSD edges, sorted by frequency.

    ``peak_bins`` are the integer local maxima; ``positions`` refine them
    to fractional bins and ``frequencies_hz`` converts those to Hz.
    """

    peak_bins: tuple = ()
    positions: tuple = ()
    frequencies_hz: tuple = ()
    magnitudes: tuple = ()

    def __len__(self) -> int:
        return len(self.frequencies_hz)


def _refine(a: np.ndarray, k: int) -> float:
    n = a.size
    left, mid, right = a[(k - 1) % n], a[k], a[(k + 1) % n]
    denom = left - 2 * mid + right
    if denom == 0:
        return float(k)
    return k + 0.5 * (left - right) / denom


def detect_edges(product, psd: PsdEstimate, config: WaveletConfig) -> EdgeList:
    """Edges at significant local maxima of ``|product|``.

    Maxima below ``edge_threshold_fraction`` of the global maximum are
    dropped, maxima closer than the scale-1 kernel width are merged in
    favour of the larger one, and each survivor is refined to a
    sub-bin position by a parabola through its neighbours.
    """
    a = np.abs(np.asarray(product, dtype=float))
    if a.size != psd.n_bins:
        raise ValueError("product length must equal the number of PSD bins")
    peaks = local_maxima(a, config.edge_threshold_fraction)
    if peaks.size == 0:
        return EdgeList()
    n = a.size
    keep: list = []
    for k in sorted(peaks, key=lambda i: (-a[i], i)):
        if all(min(abs(k - q), n - abs(k - q)) >= config.base_support_bins for q in keep):
            keep.append(int(k))
    keep.sort()
    positions = [_refine(a, k) % n for k in keep]
    order = np.argsort(positions, kind="stable")
    positions = [positions[i] for i in order]
    peaks_sorted = [keep[i] for i in order]
    return EdgeList(
        peak_bins=tuple(peaks_sorted),
        positions=tuple(positions),
        frequencies_hz=tuple(p * psd.bin_width_hz for p in positions),
        magnitudes=tuple(float(a[k]) for k in peaks_sorted),
    )


class Occupancy(str, enum.Enum):
    OCCUPIED = "occupied"
    VACANT = "vacant"


@dataclass(frozen=True)
class OccupiedSubband:
    f_start_hz: float
    f_stop_hz: float
    status: Occupancy
    mean_psd_level: float


@dataclass(frozen=True)
class OccupancyMap:
    subbands: tuple

    @property
    def statuses(self) -> tuple:
        return tuple(b.status for b in self.subbands)

    @property
    def boundaries_hz(self) -> tuple:
        return tuple(b.f_start_hz for b in self.subbands) + (self.subbands[-1].f_stop_hz,)


def classify_subbands(edges: EdgeList, psd: PsdEstimate, noise_variance: float,
                      occupancy_factor: float = 2.0) -> OccupancyMap:
    """Split ``[0, fs)`` at the edges and label each piece.

    A piece is occupied when its mean PSD level exceeds
    ``occupancy_factor * noise_variance``. Neighbouring pieces with the
    same label are then merged, so the map keeps only edges that
    separate occupied from vacant spectrum; a bin belongs to the piece
    containing its centre frequency.
    """
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    fs = psd.sample_rate_hz
    for f in edges.frequencies_hz:
        if not 0 <= f < fs:
            raise ValueError(f"edge {f} Hz outside [0, {fs})")
    cuts = sorted(f for f in edges.frequencies_hz if f > 0)
    bounds = [0.0] + cuts + [fs]
    freqs = psd.frequencies
    values = psd.values
    limit = occupancy_factor * noise_variance

    pieces = []  # (start, stop, bin index array)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        idx = np.flatnonzero((freqs >= lo) & (freqs < hi))
        if idx.size == 0:
            if pieces:
                pieces[-1] = (pieces[-1][0], hi, pieces[-1][2])
            continue
        if not pieces and lo > 0:
            lo = 0.0
        pieces.append((lo, hi, idx))

    merged = []  # (start, stop, status, bins)
    for lo, hi, idx in pieces:
        status = Occupancy.OCCUPIED if values[idx].mean() > limit else Occupancy.VACANT
        if merged and merged[-1][2] is status:
            prev = merged[-1]
            merged[-1] = (prev[0], hi, status, np.concatenate([prev[3], idx]))
        else:
            merged.append((lo, hi, status, idx))
    # a piece that only survived merging may have absorbed a trailing empty range
    merged[-1] = (merged[-1][0], fs, merged[-1][2], merged[-1][3])
    return OccupancyMap(tuple(
        OccupiedSubband(float(lo), float(hi), status, float(values[idx].mean()))
        for lo, hi, status, idx in merged
    ))
