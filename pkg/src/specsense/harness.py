"""Monte Carlo experiments: Pd vs SNR, ROC, fading comparison, CFAR sweeps,
and the multiscale-product demo.

Every trial draws from ``rng.child(<experiment>, trial_index)``, never
from a shared stream, so results are a pure function of the master seed
and configuration no matter how trials are split across workers.
Within a trial the same draws are reused at every SNR and every
threshold (common random numbers), which makes the ROC exactly
monotone for a given seed set.

All probabilities come with a 3-sigma normal-approximation binomial
half-width.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .energy import DetectorConfig, Hypothesis, cfar_threshold, decide, test_statistic
from .rng import Rng
from .signals import ChannelSpec, Fading, SubbandPlan, apply_channel, gen_awgn, gen_narrowband, gen_wideband
from .spectral import PsdEstimate
from .wavelet import WaveletConfig, local_maxima, wavelet_transform_psd
from .integrate import WelchConfig

BLOCK_SIZE = 256
DEFAULT_FADING_TAPS = ((0, 0.5), (3, 0.5))


def ci_halfwidth(p: float, trials: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


@dataclass(frozen=True)
class PdEstimate:
    pd_hat: float
    trials: int
    ci_halfwidth: float
    snr_db: float
    target_pfa: float

    @classmethod
    def from_count(cls, detections: int, trials: int, snr_db: float, target_pfa: float) -> "PdEstimate":
        if trials < 1:
            raise ValueError("trials must be >= 1")
        p = detections / trials
        return cls(p, trials, ci_halfwidth(p, trials), snr_db, target_pfa)


@dataclass(frozen=True)
class RocPoint:
    pfa_target: float
    pfa_empirical: float
    pd_hat: float
    trials: int

    @property
    def pd_ci(self) -> float:
        return ci_halfwidth(self.pd_hat, self.trials)

    @property
    def pfa_ci(self) -> float:
        return ci_halfwidth(self.pfa_empirical, self.trials)


@dataclass(frozen=True)
class RocCurve:
    points: tuple
    snr_db: float
    channel: ChannelSpec


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    truth: Hypothesis
    decision: object
    seed: int


@dataclass(frozen=True)
class CalibrationRow:
    n: int
    pfa_target: float
    pfa_empirical: float
    ci: float
    trials: int

    @property
    def passed(self) -> bool:
        return abs(self.pfa_empirical - self.pfa_target) <= self.ci


@dataclass(frozen=True)
class FadingComparison:
    awgn: tuple
    rayleigh: tuple


@dataclass(frozen=True)
class MultiscaleDemo:
    psd: PsdEstimate
    transforms: tuple  # W_1 .. W_J
    product: np.ndarray
    true_edge_bins: tuple

    def columns(self) -> dict:
        cols = {
            "bin": np.arange(self.psd.n_bins),
            "freq_hz": self.psd.frequencies,
            "psd": self.psd.values,
        }
        for j, w in enumerate(self.transforms, start=1):
            cols[f"w_{j}"] = w
        cols["product"] = self.product
        return cols


def run_trials(fn: Callable[[int], np.ndarray], trials: int, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(i)`` for ``i < trials`` and stack the results in index order.

    Work is cut into fixed blocks of trial indices; the output does not
    depend on ``workers``.
    """
    blocks = [range(s, min(s + BLOCK_SIZE, trials)) for s in range(0, trials, BLOCK_SIZE)]

    def run_block(block):
        return np.stack([np.asarray(fn(i)) for i in block])

    if workers <= 1:
        parts = [run_block(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, blocks))
    return np.concatenate(parts)


def _tone_hz(config: DetectorConfig, tone_hz: Optional[float]) -> float:
    return config.sample_rate_hz / 8 if tone_hz is None else tone_hz


def _h1_statistics(trial_rng: Rng, snr_grid: Sequence[float], config: DetectorConfig,
                   channel: ChannelSpec, tone_hz: float) -> np.ndarray:
    n = config.n_samples
    tone = gen_narrowband(tone_hz, n, 1.0, config.sample_rate_hz, trial_rng.child("signal"))
    ch_rng = trial_rng.child("channel")
    out = np.empty(len(snr_grid))
    for i, snr in enumerate(snr_grid):
        y = apply_channel(tone, replace(channel, snr_db=float(snr)), ch_rng)
        out[i] = test_statistic(y, config.band)
    return out


def _validate_grid(grid, name: str) -> list:
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError(f"{name} must be nonempty")
    return grid


def run_pd_vs_snr(snr_grid: Sequence[float], detector_config: DetectorConfig, channel: ChannelSpec,
                  trials: int, rng: Rng, tone_hz: Optional[float] = None,
                  workers: int = 1, label: str = "pd_vs_snr") -> list:
    """Detection probability of a random-phase tone at each SNR.

    The noise variance of ``channel`` is the true one; the detector
    threshold uses ``detector_config.noise_variance``. ``-inf`` in the
    grid runs the noise-only control.
    """
    grid = _validate_grid(snr_grid, "snr_grid")
    if trials < 100:
        raise ValueError("need at least 100 trials per point")
    tone_hz = _tone_hz(detector_config, tone_hz)
    lam = cfar_threshold(detector_config)
    base = rng.child(label)
    stats = run_trials(lambda i: _h1_statistics(base.child(i), grid, detector_config, channel, tone_hz),
                       trials, workers)
    counts = [sum(decide(t, lam).hypothesis is Hypothesis.H1_PRESENT for t in stats[:, k])
              for k in range(len(grid))]
    return [PdEstimate.from_count(int(c), trials, snr, detector_config.target_pfa)
            for c, snr in zip(counts, grid)]


def run_roc(pfa_grid: Sequence[float], snr_db: float, detector_config: DetectorConfig,
            channel: ChannelSpec, trials: int, rng: Rng, tone_hz: Optional[float] = None,
            workers: int = 1, label: str = "roc") -> RocCurve:
    """(Pfa, Pd) pairs along a grid of CFAR targets with shared trials.

    Each trial produces one H1 statistic (tone at ``snr_db``) and one H0
    statistic (the same noise realization without the tone), both
    compared against every grid threshold.
    """
    grid = _validate_grid(pfa_grid, "pfa_grid")
    if any(not 0 < p < 1 for p in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("pfa_grid must be strictly increasing inside (0, 1)")
    tone_hz = _tone_hz(detector_config, tone_hz)
    base = rng.child(label)
    snrs = [float(snr_db), -math.inf]
    stats = run_trials(lambda i: _h1_statistics(base.child(i), snrs, detector_config, channel, tone_hz),
                       trials, workers)
    h1, h0 = stats[:, 0], stats[:, 1]
    points = []
    for pfa in grid:
        lam = cfar_threshold(replace(detector_config, target_pfa=pfa))
        pd = int(np.count_nonzero(h1 > lam)) / trials
        pf = int(np.count_nonzero(h0 > lam)) / trials
        points.append(RocPoint(pfa, pf, pd, trials))
    return RocCurve(tuple(points), float(snr_db), channel)


def run_fading_comparison(detector_config: DetectorConfig, snr_grid: Sequence[float], trials: int,
                          rng: Rng, channel: Optional[ChannelSpec] = None,
                          fading_taps=DEFAULT_FADING_TAPS, tone_hz: Optional[float] = None,
                          workers: int = 1) -> FadingComparison:
    """Pd curves under AWGN only and under block Rayleigh multipath, same seeds."""
    if channel is None:
        channel = ChannelSpec(noise_variance=detector_config.noise_variance)
    awgn = replace(channel, taps=((0, 1.0),), fading=Fading.NONE)
    rayleigh = replace(channel, taps=tuple(fading_taps), fading=Fading.RAYLEIGH_BLOCK)
    a = run_pd_vs_snr(snr_grid, detector_config, awgn, trials, rng, tone_hz, workers, "fading")
    r = run_pd_vs_snr(snr_grid, detector_config, rayleigh, trials, rng, tone_hz, workers, "fading")
    return FadingComparison(tuple(a), tuple(r))


def expected_psd(plan: SubbandPlan, n_bins: int) -> PsdEstimate:
    """Noiseless PSD of a plan sampled at the centres of ``n_bins`` bins."""
    fs = plan.total_bandwidth_hz
    return PsdEstimate(plan.level_at(np.arange(n_bins) * fs / n_bins), fs / n_bins, fs, 1)


def plan_edge_bins(plan: SubbandPlan, n_bins: int) -> tuple:
    """Bin index of the first bin after each level change of the plan."""
    w = plan.total_bandwidth_hz / n_bins
    return tuple(int(math.ceil(f / w - 1e-9)) % n_bins for f in plan.edges_hz())


def run_multiscale_demo(plan: SubbandPlan, welch_config: WelchConfig, wavelet_config: WaveletConfig,
                        rng: Rng, n_samples: int = 32768, noise_variance: float = 1.0,
                        noiseless: bool = False) -> MultiscaleDemo:
    """One realization's PSD, per-scale transforms, and their product.

    ``noiseless=True`` skips simulation and uses the plan's ideal
    piecewise-constant PSD on the Welch bin grid.
    """
    if noiseless:
        psd = expected_psd(plan, welch_config.length)
    else:
        x = gen_wideband(plan, n_samples, rng.child("signal"))
        y = apply_channel(x, ChannelSpec(noise_variance=noise_variance), rng.child("channel"))
        psd = welch_config.estimate(y)
    transforms = tuple(wavelet_transform_psd(psd, j) for j in range(1, wavelet_config.n_scales + 1))
    product = transforms[0]
    for w in transforms[1:]:
        product = product * w
    return MultiscaleDemo(psd, transforms, product, plan_edge_bins(plan, psd.n_bins))


def spurious_extrema(curve, true_edge_bins: Sequence[int], threshold_fraction: float,
                     tolerance_bins: int = 3) -> int:
    """Above-threshold local maxima of ``|curve|`` farther than the tolerance from every true edge.

    The edge at bin ``k`` may peak at ``k - 1`` or ``k`` (the step sits
    between them), so the tolerance is measured to both.
    """
    n = len(curve)
    count = 0
    for k in local_maxima(curve, threshold_fraction):
        d = min((min(abs(k - e), n - abs(k - e)) for e in true_edge_bins), default=n)
        d1 = min((min(abs(k - e + 1), n - abs(k - e + 1)) for e in true_edge_bins), default=n)
        if min(d, d1) > tolerance_bins:
            count += 1
    return count


def edges_recovered(edge_positions: Sequence[float], true_edge_bins: Sequence[int], n_bins: int,
                    tolerance_bins: float = 3.0) -> bool:
    """True iff there is exactly one detected edge within tolerance of each true edge and no others.

    A step between bins ``k - 1`` and ``k`` is located at ``k - 1/2``.
    """
    if len(edge_positions) != len(true_edge_bins):
        return False
    used = set()
    for e in true_edge_bins:
        target = e - 0.5
        hits = [i for i, p in enumerate(edge_positions)
                if min(abs(p - target), n_bins - abs(p - target)) <= tolerance_bins and i not in used]
        if len(hits) != 1:
            return False
        used.add(hits[0])
    return True


def run_cfar_calibration(n_grid: Sequence[int], pfa_grid: Sequence[float], trials: int, rng: Rng,
                         noise_variance: float = 1.0, workers: int = 1) -> list:
    """Empirical false-alarm rates of CFAR thresholds on noise-only buffers.

    Rows outside the 3-sigma band of the target are reported through
    :attr:`CalibrationRow.passed`, not raised.
    """
    if trials < 10_000:
        raise ValueError("calibration needs at least 1e4 trials")
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    n_grid = [int(n) for n in n_grid]
    pfa_grid = _validate_grid(pfa_grid, "pfa_grid")
    rows = []
    for n in n_grid:
        base = rng.child("cfar", n)
        stats = run_trials(lambda i: test_statistic(gen_awgn(n, noise_variance, base.child(i))),
                           trials, workers)
        for pfa in pfa_grid:
            lam = cfar_threshold(DetectorConfig(n, noise_variance, pfa))
            p = int(np.count_nonzero(stats > lam)) / trials
            rows.append(CalibrationRow(n, pfa, p, ci_halfwidth(pfa, trials), trials))
    return rows


def trial_result(trial_index: int, snr_db: float, detector_config: DetectorConfig, channel: ChannelSpec,
                 rng: Rng, tone_hz: Optional[float] = None, label: str = "pd_vs_snr") -> TrialResult:
    """Re-run one H1 trial of :func:`run_pd_vs_snr` in isolation."""
    tone_hz = _tone_hz(detector_config, tone_hz)
    t = _h1_statistics(rng.child(label, trial_index), [snr_db], detector_config, channel, tone_hz)[0]
    return TrialResult(trial_index, Hypothesis.H1_PRESENT, decide(t, cfar_threshold(detector_config)), rng.seed)
