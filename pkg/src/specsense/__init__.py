"""Integrated narrowband/wideband spectrum sensing simulator.

Narrowband signals go to an energy detector with exact CFAR thresholds;
wideband signals go to a wavelet multiscale-product edge detector on the
Welch PSD. A Monte Carlo harness measures detection performance under
AWGN and block Rayleigh multipath fading.
"""

from .energy import (DetectionDecision, DetectorConfig, Hypothesis, cfar_threshold, decide,
                     equal_error_threshold, test_statistic)
from .integrate import (RouterConfig, SensingPath, SensingReport, SignalClass, SignalKind, WelchConfig,
                        classify_signal, estimate_occupied_bandwidth, integrated_sense)
from .rng import Rng
from .signals import (ChannelSpec, Fading, SampleBuffer, Subband, SubbandPlan, apply_channel, gen_awgn,
                      gen_narrowband, gen_wideband)
from .spectral import PsdEstimate, WindowKind, WindowSpec, fft, ifft, periodogram, welch
from .wavelet import (EdgeList, Occupancy, OccupancyMap, WaveletConfig, classify_subbands, detect_edges,
                      multiscale_product, wavelet_transform_psd)

__version__ = "0.1.0"

__all__ = [
    "DetectionDecision",
    "DetectorConfig",
    "Hypothesis",
    "cfar_threshold",
    "decide",
    "equal_error_threshold",
    "test_statistic",
    "RouterConfig",
    "SensingPath",
    "SensingReport",
    "SignalClass",
    "SignalKind",
    "WelchConfig",
    "classify_signal",
    "estimate_occupied_bandwidth",
    "integrated_sense",
    "Rng",
    "ChannelSpec",
    "Fading",
    "SampleBuffer",
    "Subband",
    "SubbandPlan",
    "apply_channel",
    "gen_awgn",
    "gen_narrowband",
    "gen_wideband",
    "PsdEstimate",
    "WindowKind",
    "WindowSpec",
    "fft",
    "ifft",
    "periodogram",
    "welch",
    "EdgeList",
    "Occupancy",
    "OccupancyMap",
    "WaveletConfig",
    "classify_subbands",
    "detect_edges",
    "multiscale_product",
    "wavelet_transform_psd",
]
