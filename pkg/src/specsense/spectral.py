"""FFT-based spectral estimation.

Conventions
-----------
All PSDs here cover the full circle ``[0, fs)`` of a complex baseband
signal, bin ``k`` sitting at ``k * fs / L``. Values are *power per bin*
scaled so that the mean over bins equals the mean power of the input:
a white input of variance ``s2`` gives an expected level of ``s2`` in
every bin. ``bin_width_hz`` is kept only for converting bin indices to
frequencies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .signals import SampleBuffer


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(size: int) -> np.ndarray:
    half = size // 2
    return np.exp(-2j * np.pi * np.arange(half) / size)


def _fft_last_axis(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    lead = a.shape[:-1]
    out = a[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(size)
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(lead + (n,))
        size *= 2
    return out


def fft(x) -> np.ndarray:
    """Unnormalized forward DFT, ``X[k] = sum_n x[n] exp(-2j pi k n / N)``.

    Iterative radix-2 decimation in time along the last axis; batched
    input of shape ``(..., N)`` is transformed row by row. ``x`` may be a
    :class:`SampleBuffer` or array-like.
    """
    a = x.samples if isinstance(x, SampleBuffer) else x
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim == 0:
        raise ValueError("fft needs at least one axis")
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"fft length must be a power of two, got {n}")
    return _fft_last_axis(a)


def ifft(X) -> np.ndarray:
    """Inverse of :func:`fft` (carries the ``1/N`` factor)."""
    a = np.asarray(X, dtype=np.complex128)
    n = a.shape[-1]
    return np.conj(fft(np.conj(a))) / n


class WindowKind(str, enum.Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"
    HAMMING = "hamming"


@dataclass(frozen=True)
class WindowSpec:
    kind: WindowKind = WindowKind.HANN
    length: int = 1024

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if self.length < 2:
            raise ValueError(f"window length must be >= 2, got {self.length}")

    def coefficients(self) -> np.ndarray:
        # periodic (DFT-even) forms, the usual choice for spectral averaging
        m = np.arange(self.length)
        if self.kind is WindowKind.RECTANGULAR:
            return np.ones(self.length)
        if self.kind is WindowKind.HANN:
            return 0.5 - 0.5 * np.cos(2 * np.pi * m / self.length)
        return 0.54 - 0.46 * np.cos(2 * np.pi * m / self.length)

    def power(self) -> float:
        """Mean squared coefficient ``U``."""
        w = self.coefficients()
        return float(np.mean(w * w))


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    values: np.ndarray
    bin_width_hz: float
    sample_rate_hz: float
    n_segments_averaged: int = 1

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("PSD must be a nonempty 1-D array")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("PSD values must be finite and nonnegative")
        if self.bin_width_hz <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("bin width and sample rate must be positive")
        if not np.isclose(v.size * self.bin_width_hz, self.sample_rate_hz, rtol=1e-12, atol=0):
            raise ValueError("bins * bin_width_hz must equal sample_rate_hz")
        if self.n_segments_averaged < 1:
            raise ValueError("n_segments_averaged must be >= 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_bins(self) -> int:
        return self.values.size

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_width_hz

    def scaled(self, factor: float) -> "PsdEstimate":
        return PsdEstimate(self.values * factor, self.bin_width_hz, self.sample_rate_hz,
                           self.n_segments_averaged)


def _power_spectrum(X: np.ndarray, norm: float) -> np.ndarray:
    return (X.real * X.real + X.imag * X.imag) / norm


def periodogram(buffer: SampleBuffer) -> PsdEstimate:
    """Single-segment, unwindowed PSD: ``P[k] = |X[k]|^2 / N``."""
    n = len(buffer)
    X = fft(buffer.samples)
    return PsdEstimate(_power_spectrum(X, n), buffer.sample_rate_hz / n,
                       buffer.sample_rate_hz, 1)


def segment_count(n_samples: int, window_length: int, overlap_fraction: float) -> int:
    step = window_length - int(np.floor(overlap_fraction * window_length))
    if n_samples < window_length:
        return 0
    return 1 + (n_samples - window_length) // step


def welch(
    buffer: SampleBuffer,
    window: WindowSpec = WindowSpec(),
    overlap_fraction: float = 0.5,
    min_segments: int = 1,
) -> PsdEstimate:
    """Welch averaged modified periodogram.

    Each length-``L`` segment is windowed, transformed and scaled by
    ``1 / (L * U)`` so that white noise of variance ``s2`` gives expected
    level ``s2`` per bin; the segment spectra are then averaged.

    Raises
    ------
    ValueError
        If the buffer is too short for ``min_segments`` segments, or the
        window length is not a power of two.
    """
    if not 0 <= overlap_fraction < 1:
        raise ValueError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    L = window.length
    n = len(buffer)
    k = segment_count(n, L, overlap_fraction)
    if k < max(1, min_segments):
        raise ValueError(
            f"buffer of {n} samples gives {k} segments of length {L} "
            f"at overlap {overlap_fraction}; need {max(1, min_segments)}"
        )
    step = L - int(np.floor(overlap_fraction * L))
    idx = np.arange(k)[:, None] * step + np.arange(L)[None, :]
    w = window.coefficients()
    X = fft(buffer.samples[idx] * w)
    spectra = _power_spectrum(X, L * window.power())
    return PsdEstimate(np.mean(spectra, axis=0), buffer.sample_rate_hz / L,
                       buffer.sample_rate_hz, k)
