"""Primary-user waveforms, noise, and the multipath fading + AWGN channel.

Everything is complex circularly-symmetric baseband. SNR is always the
ratio of average received signal power to the noise variance over the
full sampled band, measured at the detector input.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .rng import as_generator


@dataclass(frozen=True, eq=False)
class SampleBuffer:
    samples: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        x = np.array(self.samples, dtype=np.complex128, copy=True).reshape(-1)
        if x.size < 1:
            raise ValueError("a sample buffer needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean power ``(1/N) sum |x[n]|^2``."""
        x = self.samples
        return float(np.mean(x.real * x.real + x.imag * x.imag))

    def scaled(self, factor: complex) -> "SampleBuffer":
        return SampleBuffer(self.samples * factor, self.sample_rate_hz)


@dataclass(frozen=True)
class Subband:
    f_start_hz: float
    f_stop_hz: float
    power_level: float


@dataclass(frozen=True)
class SubbandPlan:
    """Piecewise-constant wideband scene tiling ``[0, total_bandwidth_hz)``.

    ``power_level`` uses the PSD convention of :mod:`specsense.spectral`:
    a band at level ``p`` contributes ``p`` per bin, so a full-band plan at
    level ``s2`` has the same expected spectrum as white noise of
    variance ``s2``.
    """

    bands: tuple
    total_bandwidth_hz: float

    def __post_init__(self) -> None:
        bands = tuple(b if isinstance(b, Subband) else Subband(*map(float, b)) for b in self.bands)
        if not bands:
            raise ValueError("a subband plan needs at least one band")
        if not self.total_bandwidth_hz > 0:
            raise ValueError("total bandwidth must be positive")
        tol = 1e-12 * self.total_bandwidth_hz
        if abs(bands[0].f_start_hz) > tol:
            raise ValueError("first band must start at 0 Hz")
        if abs(bands[-1].f_stop_hz - self.total_bandwidth_hz) > tol:
            raise ValueError("last band must end at total_bandwidth_hz")
        for prev, nxt in zip(bands, bands[1:]):
            if abs(prev.f_stop_hz - nxt.f_start_hz) > tol:
                raise ValueError("bands must be consecutive and non-overlapping")
        for b in bands:
            if not b.f_stop_hz > b.f_start_hz:
                raise ValueError(f"empty or reversed band {b}")
            if not (b.power_level >= 0 and math.isfinite(b.power_level)):
                raise ValueError(f"power level must be finite and >= 0 in {b}")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "total_bandwidth_hz", float(self.total_bandwidth_hz))

    @classmethod
    def from_fractions(cls, spec: Iterable[Sequence[float]], total_bandwidth_hz: float) -> "SubbandPlan":
        """Build from ``(width_fraction, power_level)`` pairs laid out from 0 Hz."""
        spec = list(spec)
        edges = np.concatenate([[0.0], np.cumsum([w for w, _ in spec])])
        if not math.isclose(edges[-1], 1.0, rel_tol=1e-12):
            raise ValueError("width fractions must sum to 1")
        edges = edges / edges[-1] * total_bandwidth_hz
        return cls(tuple(Subband(edges[i], edges[i + 1], float(p)) for i, (_, p) in enumerate(spec)),
                   total_bandwidth_hz)

    def level_at(self, freqs_hz) -> np.ndarray:
        f = np.mod(np.asarray(freqs_hz, dtype=float), self.total_bandwidth_hz)
        starts = np.array([b.f_start_hz for b in self.bands[1:]])
        levels = np.array([b.power_level for b in self.bands])
        return levels[np.searchsorted(starts, f, side="right")]

    def edges_hz(self) -> list:
        """Frequencies where the level changes, including the 0/fs wrap if any."""
        out = [b.f_start_hz for prev, b in zip(self.bands, self.bands[1:])
               if b.power_level != prev.power_level]
        if self.bands[0].power_level != self.bands[-1].power_level:
            out.insert(0, 0.0)
        return out

    def occupancy(self) -> list:
        """Merged ``(f_start, f_stop, occupied)`` runs."""
        runs: list = []
        for b in self.bands:
            occ = b.power_level > 0
            if runs and runs[-1][2] == occ:
                runs[-1] = (runs[-1][0], b.f_stop_hz, occ)
            else:
                runs.append((b.f_start_hz, b.f_stop_hz, occ))
        return runs

    def occupied_fraction(self) -> float:
        occ = sum(b.f_stop_hz - b.f_start_hz for b in self.bands if b.power_level > 0)
        return occ / self.total_bandwidth_hz


class Fading(str, enum.Enum):
    NONE = "none"
    RAYLEIGH_BLOCK = "rayleigh_block"


@dataclass(frozen=True)
class ChannelSpec:
    """Tapped-delay-line channel followed by AWGN.

    ``snr_db=None`` disables power normalization: the signal passes at
    its own level (needed for noise-only and absolute-level scenes).
    """

    noise_variance: float = 1.0
    snr_db: Optional[float] = None
    taps: tuple = ((0, 1.0),)
    fading: Fading = Fading.NONE

    def __post_init__(self) -> None:
        object.__setattr__(self, "fading", Fading(self.fading))
        taps = tuple((int(d), float(p)) for d, p in self.taps)
        object.__setattr__(self, "taps", taps)
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise ValueError(f"noise_variance must be positive, got {self.noise_variance}")
        if self.snr_db is not None and math.isnan(self.snr_db):
            raise ValueError("snr_db is NaN")
        if not taps:
            raise ValueError("channel needs at least one tap")
        delays = [d for d, _ in taps]
        if delays[0] != 0:
            raise ValueError("first tap delay must be 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("tap delays must be strictly increasing")
        powers = [p for _, p in taps]
        if any(p <= 0 for p in powers):
            raise ValueError("tap mean powers must be positive")
        if not math.isclose(sum(powers), 1.0, rel_tol=1e-9):
            raise ValueError(f"tap mean powers must sum to 1, got {sum(powers)}")


def _complex_gaussian(gen, shape, variance: float) -> np.ndarray:
    z = gen.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return math.sqrt(variance / 2.0) * (z[0] + 1j * z[1])


def gen_awgn(n: int, noise_variance: float, rng, sample_rate_hz: float = 1.0) -> SampleBuffer:
    """``n`` circular complex Gaussian samples of variance ``noise_variance``."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not noise_variance >= 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    return SampleBuffer(_complex_gaussian(as_generator(rng), n, noise_variance), sample_rate_hz)


def gen_narrowband(fc_hz: float, n: int, amplitude: float, sample_rate_hz: float, rng) -> SampleBuffer:
    """Complex tone ``A exp(i(2 pi fc n / fs + phi))`` with uniform random phase."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not abs(fc_hz) < sample_rate_hz / 2:
        raise ValueError(f"|fc| = {abs(fc_hz)} Hz is outside the Nyquist band of fs = {sample_rate_hz}")
    if not amplitude >= 0:
        raise ValueError("amplitude must be nonnegative")
    phi = float(as_generator(rng).uniform(0.0, 2 * np.pi))
    theta = 2 * np.pi * fc_hz / sample_rate_hz * np.arange(n) + phi
    return SampleBuffer(amplitude * np.exp(1j * theta), sample_rate_hz)


def gen_wideband(plan: SubbandPlan, n: int, rng) -> SampleBuffer:
    """Sum of band-limited Gaussian processes with brick-wall spectra.

    White Gaussian spectral lines are drawn on an ``M``-point grid
    (``M`` the next power of two >= ``n``), shaped by the plan's level
    at each line, inverse transformed, and the first ``n`` samples kept.
    The sample rate equals ``plan.total_bandwidth_hz``.
    """
    from .spectral import ifft

    if n < 64:
        raise ValueError(f"wideband synthesis needs n >= 64, got {n}")
    m = 1 << (n - 1).bit_length()
    fs = plan.total_bandwidth_hz
    levels = plan.level_at(np.arange(m) * fs / m)
    lines = _complex_gaussian(as_generator(rng), m, 1.0) * np.sqrt(m * levels)
    return SampleBuffer(ifft(lines)[:n], fs)


def apply_channel(signal: SampleBuffer, channel: ChannelSpec, rng, add_noise: bool = True) -> SampleBuffer:
    """Scale to the target SNR, pass through the tap delay line, add AWGN.

    Tap gains are ``sqrt(mean_power)`` without fading, or independent
    complex Gaussians of variance ``mean_power`` drawn once per call for
    block Rayleigh fading. Normalization uses the *expected* received
    power (unit-sum delay profile), so per-buffer power varies under
    fading. The convolution tail is truncated to the input length.
    ``add_noise=False`` returns the noiseless received signal.
    """
    x = signal.samples
    n = x.size
    if channel.snr_db is not None:
        p_in = signal.power
        if p_in == 0:
            raise ValueError("cannot normalize a zero-power signal to a target SNR")
        if channel.snr_db == -math.inf:
            x = np.zeros_like(x)
        else:
            target = 10.0 ** (channel.snr_db / 10.0) * channel.noise_variance
            x = x * math.sqrt(target / p_in)

    gen = as_generator(rng)
    # noise first and always drawn, so it is the same stream for any taps, fading or add_noise
    noise = _complex_gaussian(gen, n, channel.noise_variance)
    powers = np.array([p for _, p in channel.taps])
    rayleigh = _complex_gaussian(gen, len(powers), 1.0)
    if channel.fading is Fading.RAYLEIGH_BLOCK:
        gains = rayleigh * np.sqrt(powers)
    else:
        gains = np.sqrt(powers).astype(np.complex128)

    y = np.zeros(n, dtype=np.complex128)
    for (delay, _), g in zip(channel.taps, gains):
        if delay < n:
            y[delay:] += g * x[: n - delay]
    if add_noise:
        y = y + noise
    return SampleBuffer(y, signal.sample_rate_hz)
