"""Centralized integrated sensing: Welch PSD, narrow/wide routing, detection.

Routing rule: measure the 99%-power occupied bandwidth of the Welch PSD
after removing the known noise floor. A signal occupying at most 10% of
the sampled band is narrowband and goes to the energy detector,
restricted to the occupied bins; anything wider goes to the wavelet
edge detector. Pure noise has its excess power spread over the whole
band, so it routes wideband and comes back as a single vacant band.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import (DetectionDecision, DetectorConfig, cfar_threshold, decide,
                     test_statistic)
from .signals import SampleBuffer
from .spectral import PsdEstimate, WindowKind, WindowSpec, welch
from .wavelet import (EdgeList, OccupancyMap, WaveletConfig, classify_subbands,
                      detect_edges, multiscale_product)


class SensingError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class SignalKind(str, enum.Enum):
    NARROWBAND = "narrowband"
    WIDEBAND = "wideband"


class SensingPath(str, enum.Enum):
    ENERGY = "energy"
    WAVELET = "wavelet"


@dataclass(frozen=True)
class SignalClass:
    kind: SignalKind
    occupied_bandwidth_hz: float
    occupied_fraction: float


@dataclass(frozen=True)
class WelchConfig:
    window: WindowKind = WindowKind.HANN
    length: int = 1024
    overlap_fraction: float = 0.5
    min_segments: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", WindowKind(self.window))
        WindowSpec(self.window, self.length)
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must be in [0, 1)")
        if self.min_segments < 1:
            raise ValueError("min_segments must be >= 1")

    def estimate(self, buffer: SampleBuffer) -> PsdEstimate:
        return welch(buffer, WindowSpec(self.window, self.length), self.overlap_fraction,
                     self.min_segments)


@dataclass(frozen=True)
class RouterConfig:
    power_fraction: float = 0.99
    narrowband_fraction_threshold: float = 0.1
    subtract_noise_floor: bool = True
    occupancy_factor: float = 2.0

    def __post_init__(self) -> None:
        if not 0 < self.power_fraction < 1:
            raise ValueError("power_fraction must be in (0, 1)")
        if not 0 <= self.narrowband_fraction_threshold <= 1:
            raise ValueError("narrowband_fraction_threshold must be in [0, 1]")
        if not self.occupancy_factor > 0:
            raise ValueError("occupancy_factor must be positive")


@dataclass(frozen=True)
class SensingReport:
    signal_class: SignalClass
    path: SensingPath
    psd: PsdEstimate
    decision: Optional[DetectionDecision] = None
    occupancy: Optional[OccupancyMap] = None
    band_hz: tuple = ()
    edges: Optional[EdgeList] = None

    def __post_init__(self) -> None:
        if (self.decision is None) == (self.occupancy is None):
            raise ValueError("a report carries exactly one of decision / occupancy")
        if (self.path is SensingPath.ENERGY) != (self.decision is not None):
            raise ValueError("energy path must carry a decision, wavelet path an occupancy map")
        if (self.path is SensingPath.ENERGY) != (self.signal_class.kind is SignalKind.NARROWBAND):
            raise ValueError("path must match the signal class")


def _excess(psd: PsdEstimate, noise_floor: float) -> np.ndarray:
    return np.maximum(psd.values - noise_floor, 0.0)


def occupied_bins(psd: PsdEstimate, power_fraction: float = 0.99, noise_floor: float = 0.0) -> np.ndarray:
    """Fewest highest-power bins holding ``power_fraction`` of the power.

    Power is measured above ``noise_floor`` (bins below it count as
    zero). Returns sorted bin indices; empty when there is no power.
    """
    if not 0 < power_fraction < 1:
        raise ValueError("power_fraction must be in (0, 1)")
    p = _excess(psd, noise_floor)
    total = float(np.sum(p))
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-p, kind="stable")
    csum = np.cumsum(p[order])
    # relative slack absorbs summation-order rounding for exactly flat spectra
    count = int(np.searchsorted(csum, power_fraction * total * (1 - 1e-12), side="left")) + 1
    return np.sort(order[:min(count, p.size)])


def estimate_occupied_bandwidth(psd: PsdEstimate, power_fraction: float = 0.99,
                                noise_floor: float = 0.0) -> tuple:
    """``(bandwidth_hz, occupied_fraction)`` of the power-fraction bin set."""
    n = occupied_bins(psd, power_fraction, noise_floor).size
    return n * psd.bin_width_hz, n / psd.n_bins


def classify_signal(psd: PsdEstimate, narrowband_fraction_threshold: float = 0.1,
                    power_fraction: float = 0.99, noise_floor: float = 0.0) -> SignalClass:
    bw, frac = estimate_occupied_bandwidth(psd, power_fraction, noise_floor)
    kind = SignalKind.NARROWBAND if frac <= narrowband_fraction_threshold else SignalKind.WIDEBAND
    return SignalClass(kind, bw, frac)


def bins_to_bands(bins, n_bins: int, bin_width_hz: float) -> tuple:
    """Contiguous runs of PSD bins as ``(f_lo, f_hi)`` ranges.

    Bin ``k`` covers ``[(k - 1/2) w, (k + 1/2) w)``; a run through bin 0
    and the last bin is joined across the wrap and starts below 0 Hz.
    """
    b = sorted(int(k) for k in bins)
    if not b:
        return ()
    runs = [[b[0], b[0]]]
    for k in b[1:]:
        if k == runs[-1][1] + 1:
            runs[-1][1] = k
        else:
            runs.append([k, k])
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == n_bins - 1:
        last = runs.pop()
        runs[0][0] = last[0] - n_bins
    return tuple(((lo - 0.5) * bin_width_hz, (hi + 0.5) * bin_width_hz) for lo, hi in runs)


def _largest_power_of_two(n: int) -> int:
    return 1 << (n.bit_length() - 1)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SensingError:
        raise
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        raise SensingError(name, exc) from exc


def _energy_path(buffer: SampleBuffer, psd: PsdEstimate, bins: np.ndarray,
                 detector_config: DetectorConfig) -> tuple:
    # the energy statistic uses the longest power-of-two prefix of the buffer
    n = _largest_power_of_two(len(buffer))
    head = SampleBuffer(buffer.samples[:n], buffer.sample_rate_hz) if n != len(buffer) else buffer
    if bins.size == 0:
        bands = ((0.0, buffer.sample_rate_hz),)
    else:
        bands = bins_to_bands(bins, psd.n_bins, psd.bin_width_hz)
    config = DetectorConfig(n, detector_config.noise_variance, detector_config.target_pfa,
                            band=bands, sample_rate_hz=buffer.sample_rate_hz)
    statistic = test_statistic(head, config.band)
    threshold = cfar_threshold(config)
    return decide(statistic, threshold), bands


def integrated_sense(
    buffer: SampleBuffer,
    detector_config: DetectorConfig,
    wavelet_config: WaveletConfig = WaveletConfig(),
    router: RouterConfig = RouterConfig(),
    welch_config: WelchConfig = WelchConfig(),
) -> SensingReport:
    """Estimate, route, and detect.

    ``detector_config`` supplies the known noise variance and the target
    false-alarm rate; its sample count and band are replaced by the
    buffer length and the occupied band found by the router.

    Raises
    ------
    SensingError
        With ``stage`` set to ``"welch"``, ``"classify"``, ``"energy"`` or
        ``"wavelet"``.
    """
    psd = _stage("welch", welch_config.estimate, buffer)
    floor = detector_config.noise_variance if router.subtract_noise_floor else 0.0
    bins = _stage("classify", occupied_bins, psd, router.power_fraction, floor)
    frac = bins.size / psd.n_bins
    kind = SignalKind.NARROWBAND if frac <= router.narrowband_fraction_threshold else SignalKind.WIDEBAND
    signal_class = SignalClass(kind, bins.size * psd.bin_width_hz, frac)

    if kind is SignalKind.NARROWBAND:
        decision, bands = _stage("energy", _energy_path, buffer, psd, bins, detector_config)
        return SensingReport(signal_class, SensingPath.ENERGY, psd, decision=decision, band_hz=bands)

    def wavelet_path():
        product = multiscale_product(psd, wavelet_config)
        edges = detect_edges(product, psd, wavelet_config)
        occupancy = classify_subbands(edges, psd, detector_config.noise_variance, router.occupancy_factor)
        return edges, occupancy

    edges, occupancy = _stage("wavelet", wavelet_path)
    return SensingReport(signal_class, SensingPath.WAVELET, psd, occupancy=occupancy, edges=edges)
