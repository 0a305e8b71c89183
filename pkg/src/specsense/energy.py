"""Energy detector: statistic, CFAR and equal-error thresholds, decision.

Under H0 the statistic of ``N`` complex white Gaussian samples of
variance ``s2`` satisfies ``T / s2 ~ Gamma(N, 1)``; thresholds are found
by inverting that law exactly. Band-restricted statistics sum
``|X[k]|^2 / N`` over the selected FFT bins, which are again independent
``s2 * Exp(1)`` variables, so the same law holds with ``N`` replaced by
the bin count.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaincc

from .rng import Rng
from .signals import SampleBuffer, _complex_gaussian
from .spectral import fft, is_power_of_two

Band = Tuple[float, float]
BandSelection = Union[Band, Sequence[Band]]

_MAX_BISECTION_STEPS = 400


class CfarConvergenceError(RuntimeError):
    """Threshold inversion hit its iteration cap."""


class Hypothesis(str, enum.Enum):
    H0_ABSENT = "H0"
    H1_PRESENT = "H1"


def _normalize_bands(band: Optional[BandSelection]):
    if band is None:
        return None
    if len(band) == 2 and all(isinstance(v, (int, float, np.floating, np.integer)) for v in band):
        return (tuple(float(v) for v in band),)
    return tuple((float(lo), float(hi)) for lo, hi in band)


@dataclass(frozen=True)
class DetectorConfig:
    """Energy detector setup.

    ``band`` is one ``(f_lo, f_hi)`` range in Hz or a sequence of them;
    frequencies are taken modulo ``sample_rate_hz`` so a range may start
    below zero (negative baseband frequencies).
    """

    n_samples: int
    noise_variance: float
    target_pfa: float
    band: Optional[BandSelection] = None
    sample_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise ValueError(f"noise_variance must be positive, got {self.noise_variance}")
        if not 0 < self.target_pfa < 1:
            raise ValueError(f"target_pfa must be in (0, 1), got {self.target_pfa}")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        bands = _normalize_bands(self.band)
        if bands is not None:
            for lo, hi in bands:
                if not lo < hi:
                    raise ValueError(f"band needs f_lo < f_hi, got ({lo}, {hi})")
        object.__setattr__(self, "band", bands)

    @property
    def degrees_of_freedom(self) -> int:
        """Gamma shape of the H0 statistic: samples, or bins inside the band."""
        if self.band is None:
            return self.n_samples
        return int(band_bins(self.n_samples, self.sample_rate_hz, self.band).size)


@dataclass(frozen=True)
class DetectionDecision:
    hypothesis: Hypothesis
    statistic: float
    threshold: float


def band_bins(n: int, sample_rate_hz: float, band: BandSelection) -> np.ndarray:
    """Sorted FFT bin indices whose frequency ``k fs / n`` lies in the band.

    Each range is half-open ``[f_lo, f_hi)`` and is reduced modulo the
    sample rate, so it must lie within ``[-fs, 2 fs]`` and be no wider
    than ``fs``.
    """
    fs = sample_rate_hz
    selected = set()
    for lo, hi in _normalize_bands(band):
        if not lo < hi:
            raise ValueError(f"band needs f_lo < f_hi, got ({lo}, {hi})")
        if lo < -fs or hi > 2 * fs or hi - lo > fs * (1 + 1e-12):
            raise ValueError(f"band ({lo}, {hi}) is outside the sampled range of fs = {fs}")
        first = math.ceil(lo * n / fs - 1e-9)
        stop = math.ceil(hi * n / fs - 1e-9)
        selected.update(k % n for k in range(first, min(stop, first + n)))
    if not selected:
        raise ValueError(f"band selection {band} contains no FFT bins at n = {n}")
    return np.array(sorted(selected), dtype=np.int64)


def test_statistic(buffer: SampleBuffer, band: Optional[BandSelection] = None) -> float:
    """Received energy, optionally restricted to a frequency band.

    Without a band ``T = sum |x[n]|^2``. With a band, ``T`` is the sum of
    ``|X[k]|^2 / N`` over bins in the band; over the full band this is
    the same number by Parseval's identity.
    """
    x = buffer.samples
    if band is None:
        return float(np.sum(x.real * x.real + x.imag * x.imag))
    n = x.size
    if not is_power_of_two(n):
        raise ValueError(f"band-restricted statistic needs a power-of-two length, got {n}")
    bins = band_bins(n, buffer.sample_rate_hz, band)
    X = fft(x)[bins]
    return float(np.sum(X.real * X.real + X.imag * X.imag) / n)


# not a pytest test despite the name
test_statistic.__test__ = False


def gamma_upper_quantile(shape: float, tail_probability: float) -> float:
    """``x`` with ``Q(shape, x) = tail_probability`` by bisection.

    ``Q`` is the regularized upper incomplete gamma function. Stops when
    the bracket is narrower than ``1e-10`` relative to the root.
    """
    if shape <= 0:
        raise ValueError("shape must be positive")
    if not 0 < tail_probability < 1:
        raise ValueError("tail probability must be in (0, 1)")
    lo, hi = 0.0, max(1.0, shape + 10.0 * math.sqrt(shape) + 10.0)
    steps = 0
    while gammaincc(shape, hi) > tail_probability:
        lo, hi = hi, 2.0 * hi
        steps += 1
        if steps > 200:
            raise CfarConvergenceError("could not bracket the gamma quantile")
    for _ in range(_MAX_BISECTION_STEPS):
        if hi - lo <= 1e-10 * hi:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if gammaincc(shape, mid) > tail_probability:
            lo = mid
        else:
            hi = mid
    raise CfarConvergenceError(
        f"gamma quantile bisection did not converge (shape={shape}, p={tail_probability})"
    )


def cfar_threshold(config: DetectorConfig) -> float:
    """Threshold ``lam`` with ``P(T > lam | H0) = target_pfa``."""
    return config.noise_variance * gamma_upper_quantile(config.degrees_of_freedom, config.target_pfa)


def decide(statistic: float, threshold: float) -> DetectionDecision:
    """H1 iff the statistic strictly exceeds the threshold; ties go to H0."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    hyp = Hypothesis.H1_PRESENT if statistic > threshold else Hypothesis.H0_ABSENT
    return DetectionDecision(hyp, float(statistic), float(threshold))


def gaussian_midpoint_threshold(config: DetectorConfig, snr_db: float) -> float:
    """Midpoint of the H0 and H1 statistic means, ``N s2 (1 + snr / 2)``."""
    snr = 10.0 ** (snr_db / 10.0)
    n = config.degrees_of_freedom
    return 0.5 * (n * config.noise_variance + n * config.noise_variance * (1.0 + snr))


def _statistics(config: DetectorConfig, gen, trials: int, snr_db: Optional[float],
                tone_hz: float, chunk: int = 2048) -> np.ndarray:
    # vectorized equivalent of gen_narrowband -> apply_channel(AWGN) -> test_statistic
    n = config.n_samples
    fs = config.sample_rate_hz
    bins = None if config.band is None else band_bins(n, fs, config.band)
    out = np.empty(trials)
    t = np.arange(n)
    amp = 0.0 if snr_db is None else math.sqrt(10.0 ** (snr_db / 10.0) * config.noise_variance)
    for start in range(0, trials, chunk):
        m = min(chunk, trials - start)
        x = _complex_gaussian(gen, (m, n), config.noise_variance)
        if snr_db is not None:
            phi = gen.uniform(0.0, 2 * np.pi, size=(m, 1))
            x = x + amp * np.exp(1j * (2 * np.pi * tone_hz / fs * t + phi))
        if bins is None:
            e = np.sum(x.real * x.real + x.imag * x.imag, axis=1)
        else:
            X = fft(x)[:, bins]
            e = np.sum(X.real * X.real + X.imag * X.imag, axis=1) / n
        out[start:start + m] = e
    return out


def equal_error_threshold(config: DetectorConfig, snr_db: float, rng: Rng, trials: int = 100_000,
                          tone_hz: Optional[float] = None) -> float:
    """Threshold at which the estimated false-alarm and miss rates are equal.

    The H1 signal is a random-phase tone at ``tone_hz`` (default
    ``fs / 8``) normalized to ``snr_db`` over the full band, in AWGN.
    Both error curves are estimated from ``trials`` Monte Carlo
    statistics each, then the crossing is located by bisection on the
    threshold starting from the Gaussian midpoint. Among the final
    bracket ends the one with the smaller ``|Pfa - Pmd|`` is returned.
    """
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if tone_hz is None:
        tone_hz = config.sample_rate_hz / 8
    gen_h0 = rng.child("h0").generator()
    gen_h1 = rng.child("h1").generator()
    t0 = np.sort(_statistics(config, gen_h0, trials, None, tone_hz))
    t1 = np.sort(_statistics(config, gen_h1, trials, snr_db, tone_hz))

    def gap(lam: float) -> float:
        pfa = (trials - np.searchsorted(t0, lam, side="right")) / trials
        pmd = np.searchsorted(t1, lam, side="right") / trials
        return pfa - pmd

    mid = gaussian_midpoint_threshold(config, snr_db)
    g = gap(mid)
    if g == 0:
        return float(mid)
    lo = min(t0[0], t1[0]) * (1 - 1e-12)
    hi = max(t0[-1], t1[-1])
    if g > 0:
        lo = max(lo, mid)
    else:
        hi = min(hi, mid)
    for _ in range(_MAX_BISECTION_STEPS):
        if hi - lo <= 1e-12 * hi:
            break
        m = 0.5 * (lo + hi)
        gm = gap(m)
        if gm == 0:
            return float(m)
        if gm > 0:
            lo = m
        else:
            hi = m
    best = lo if abs(gap(lo)) <= abs(gap(hi)) else hi
    return float(max(best, np.finfo(float).tiny))


def with_band(config: DetectorConfig, band: Optional[BandSelection], n_samples: Optional[int] = None,
              sample_rate_hz: Optional[float] = None) -> DetectorConfig:
    kwargs = {"band": band}
    if n_samples is not None:
        kwargs["n_samples"] = n_samples
    if sample_rate_hz is not None:
        kwargs["sample_rate_hz"] = sample_rate_hz
    return replace(config, **kwargs)
