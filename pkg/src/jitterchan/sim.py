"""Reproducible Monte Carlo engine for bit and sector error rates.

Seeding scheme: trials (snapshots) of sweep point i are grouped into blocks
of ``BLOCK_TRIALS``. Block b of point i draws from its own stream

    Generator(PCG64(SeedSequence(master_seed, spawn_key=(i, b))))

in a fixed order (jitter, bits, noise; see ``channel.sample_block``), so
trial t is always row t % BLOCK_TRIALS of block t // BLOCK_TRIALS. Any shard
[start, stop) regenerates the blocks it touches and keeps its rows, and
only integer counts are summed; results therefore do not depend on the
number of threads or on how the trials are sharded.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelParams, sample_block, sigma_from_snr
from .detect import DETECTOR_KINDS, detect_block, optimal_single_probe_threshold
from .rs import RsCode

__all__ = [
    "BLOCK_TRIALS",
    "SweepSpec",
    "ErrorCounts",
    "SweepPoint",
    "merge_counts",
    "block_rng",
    "point_params",
    "count_trials",
    "run_point",
    "run_sweep",
    "run_ber_sweep",
    "run_rs_ser_sweep",
    "ci95",
]

BLOCK_TRIALS = 200


@dataclass(frozen=True)
class SweepSpec:
    """One Monte Carlo sweep over SNR.

    ``detector`` may be a single kind or a tuple of kinds; with several
    kinds every detector sees the very same snapshots. ``fixed_threshold``
    overrides the per-point ML threshold of the fixed detector.
    """

    params_base: ChannelParams
    snr_grid_db: tuple[float, ...]
    detector: str | tuple[str, ...] = "lln"
    trials_per_point: int = 100_000
    master_seed: int = 0
    rs_code: RsCode | None = None
    fixed_threshold: float | None = None

    def __post_init__(self):
        grid = tuple(float(x) for x in self.snr_grid_db)
        object.__setattr__(self, "snr_grid_db", grid)
        if not grid:
            raise ValueError("snr_grid_db is empty")
        if any(not b > a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr_grid_db must be strictly increasing")
        if any(math.isnan(x) or x == -math.inf for x in grid):
            raise ValueError("SNR values must be finite or +inf")
        for d in self.detectors:
            if d not in DETECTOR_KINDS:
                raise ValueError(f"unknown detector {d!r}; expected one of {DETECTOR_KINDS}")
        if int(self.trials_per_point) != self.trials_per_point or self.trials_per_point < 1:
            raise ValueError("trials_per_point must be a positive integer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.rs_code is not None:
            self.params_base.check_rs_shape(self.rs_code.block_symbols)
            if self.rs_code.symbol_bits != self.params_base.symbol_bits:
                raise ValueError("rs_code.symbol_bits differs from params symbol_bits")
        if "fixed" in self.detectors and self.fixed_threshold is None and math.inf in grid:
            raise ValueError("the fixed detector's ML threshold is undefined at sigma = 0")

    @property
    def detectors(self) -> tuple[str, ...]:
        return (self.detector,) if isinstance(self.detector, str) else tuple(self.detector)


@dataclass(frozen=True)
class ErrorCounts:
    """Additive error counters of one sweep point and detector."""

    bits_observed: int = 0
    bit_errors: int = 0
    sectors_observed: int = 0
    sector_errors: int = 0
    point: tuple | None = None

    def __post_init__(self):
        if min(self.bits_observed, self.bit_errors, self.sectors_observed, self.sector_errors) < 0:
            raise ValueError("counts must be nonnegative")
        if self.bit_errors > self.bits_observed or self.sector_errors > self.sectors_observed:
            raise ValueError("errors cannot exceed observations")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_observed if self.bits_observed else math.nan

    @property
    def ser(self) -> float:
        return self.sector_errors / self.sectors_observed if self.sectors_observed else math.nan


def merge_counts(a: ErrorCounts, b: ErrorCounts) -> ErrorCounts:
    """Componentwise sum; a point label of None acts as a wildcard."""
    if a.point is not None and b.point is not None and a.point != b.point:
        raise ValueError(f"cannot merge counts of different points {a.point} and {b.point}")
    return ErrorCounts(
        a.bits_observed + b.bits_observed,
        a.bit_errors + b.bit_errors,
        a.sectors_observed + b.sectors_observed,
        a.sector_errors + b.sector_errors,
        a.point if a.point is not None else b.point,
    )


def ci95(errors: int, observed: int) -> tuple[float, float]:
    """Normal-approximation 95% interval; (0, 3/observed) when no errors were seen.

    The normal interval is unreliable below about 10 errors.
    """
    if observed == 0:
        return (math.nan, math.nan)
    if errors == 0:
        return (0.0, 3.0 / observed)
    rate = errors / observed
    half = 1.96 * math.sqrt(rate * (1.0 - rate) / observed)
    return (max(rate - half, 0.0), min(rate + half, 1.0))


@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    detector: str
    counts: ErrorCounts
    threshold: float | None = None

    @property
    def ber(self) -> float:
        return self.counts.ber

    @property
    def ser(self) -> float:
        return self.counts.ser

    @property
    def ber_ci95(self) -> tuple[float, float]:
        return ci95(self.counts.bit_errors, self.counts.bits_observed)

    @property
    def ser_ci95(self) -> tuple[float, float]:
        return ci95(self.counts.sector_errors, self.counts.sectors_observed)

    def ber_se(self) -> float:
        c = self.counts
        return math.sqrt(max(c.ber * (1.0 - c.ber), 0.0) / c.bits_observed)

    def ser_se(self) -> float:
        c = self.counts
        return math.sqrt(max(c.ser * (1.0 - c.ser), 0.0) / c.sectors_observed)


def block_rng(master_seed: int, point_index: int, block_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(point_index), int(block_index)))
    return np.random.Generator(np.random.PCG64(ss))


def point_params(spec: SweepSpec, point_index: int) -> ChannelParams:
    return replace(spec.params_base, sigma=sigma_from_snr(spec.snr_grid_db[point_index]))


def _thresholds(spec: SweepSpec, params: ChannelParams) -> dict:
    out = {}
    for d in spec.detectors:
        if d == "fixed":
            out[d] = spec.fixed_threshold if spec.fixed_threshold is not None else optimal_single_probe_threshold(params)
        else:
            out[d] = None
    return out


def count_trials(
    spec: SweepSpec,
    point_index: int,
    start: int,
    stop: int,
    thresholds: dict | None = None,
) -> dict[str, ErrorCounts]:
    """Error counts of trials [start, stop) of one point, per detector."""
    params = point_params(spec, point_index)
    if thresholds is None:
        thresholds = _thresholds(spec, params)
    code = spec.rs_code
    N = params.num_probes
    tallies = {d: [0, 0] for d in spec.detectors}
    b = start // BLOCK_TRIALS
    while b * BLOCK_TRIALS < stop:
        lo = max(start - b * BLOCK_TRIALS, 0)
        hi = min(stop - b * BLOCK_TRIALS, BLOCK_TRIALS)
        block = sample_block(params, block_rng(spec.master_seed, point_index, b), BLOCK_TRIALS)
        outputs = block.outputs[lo:hi]
        bits = block.bits[lo:hi]
        amp = block.amplitude[lo:hi]
        for d in spec.detectors:
            err = detect_block(d, outputs, amp, thresholds[d]) != bits
            tallies[d][0] += int(np.count_nonzero(err))
            if code is not None:
                sym = err.reshape(hi - lo, code.block_symbols, code.symbol_bits).any(axis=2)
                tallies[d][1] += int(np.count_nonzero(sym.sum(axis=1) > code.correctable))
        b += 1
    n_trials = stop - start
    key = (point_index,)
    return {
        d: ErrorCounts(
            n_trials * N,
            t[0],
            n_trials if code is not None else 0,
            t[1],
            key,
        )
        for d, t in tallies.items()
    }


def _shards(total: int, threads: int) -> list[tuple[int, int]]:
    # whole blocks per shard so no block is generated twice
    n_blocks = -(-total // BLOCK_TRIALS)
    per = max(1, -(-n_blocks // max(threads * 4, 1)))
    edges = list(range(0, n_blocks, per)) + [n_blocks]
    return [(a * BLOCK_TRIALS, min(b * BLOCK_TRIALS, total)) for a, b in zip(edges[:-1], edges[1:])]


def run_point(spec: SweepSpec, point_index: int, threads: int = 1) -> list[SweepPoint]:
    params = point_params(spec, point_index)
    thresholds = _thresholds(spec, params)
    shards = _shards(spec.trials_per_point, threads)
    if threads <= 1:
        parts = [count_trials(spec, point_index, a, b, thresholds) for a, b in shards]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: count_trials(spec, point_index, ab[0], ab[1], thresholds), shards))
    snr = spec.snr_grid_db[point_index]
    out = []
    for d in spec.detectors:
        total = ErrorCounts(point=(point_index,))
        for part in parts:
            total = merge_counts(total, part[d])
        out.append(SweepPoint(snr, d, total, thresholds[d]))
    return out


def default_threads() -> int:
    return max(1, min(os.cpu_count() or 1, 16))


def run_sweep(spec: SweepSpec, threads: int = 1) -> dict[str, list[SweepPoint]]:
    """All points of the sweep, keyed by detector."""
    result: dict[str, list[SweepPoint]] = {d: [] for d in spec.detectors}
    for i in range(len(spec.snr_grid_db)):
        for sp in run_point(spec, i, threads):
            result[sp.detector].append(sp)
    return result


def _single(spec: SweepSpec, threads: int) -> list[SweepPoint]:
    if len(spec.detectors) != 1:
        raise ValueError("use run_sweep for several detectors at once")
    return run_sweep(spec, threads)[spec.detectors[0]]


def run_ber_sweep(spec: SweepSpec, threads: int = 1) -> list[SweepPoint]:
    """BER per SNR point: ``point.ber`` and ``point.ber_ci95``."""
    return _single(spec, threads)


def run_rs_ser_sweep(spec: SweepSpec, threads: int = 1) -> list[SweepPoint]:
    """Sector error rate per SNR point under bounded-distance decoding.

    A symbol errs if any of its n bits errs; a sector errs if more than
    t = floor((N_s - K_s)/2) symbols err.
    """
    if spec.rs_code is None:
        raise ValueError("run_rs_ser_sweep needs spec.rs_code")
    return _single(spec, threads)
