"""Distributions of the key-rate bounds over random triad pairs.

Samples are processed in fixed-size chunks.  Chunk ``k`` draws its triads from
``generator_for(master_seed, k)``, so every sample is a deterministic function
of the master seed and its index, whatever the number of workers.  Partial
results are merged in chunk order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bellscan import chsh_values_batch
from .keyrates import BATCH_RATES, RATE_NAMES, dd_batch, holevo_werner
from .qmath import rotation_from_quaternion
from .sampling import MAX_SEED, generator_for

CHUNK_SIZE = 16384


@dataclass(frozen=True)
class McConfig:
    n_samples: int
    visibilities: tuple
    master_seed: int
    bin_width: float = 0.01
    rates: tuple = RATE_NAMES

    def __post_init__(self):
        object.__setattr__(self, "visibilities", tuple(float(v) for v in self.visibilities))
        object.__setattr__(self, "rates", tuple(self.rates))
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be at least 1")
        if not self.visibilities:
            raise ValueError("at least one visibility is required")
        if any(not 0.0 <= v <= 1.0 for v in self.visibilities):
            raise ValueError("visibilities must lie in [0, 1]")
        if len(set(self.visibilities)) != len(self.visibilities):
            raise ValueError("visibilities must be distinct")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if not self.rates:
            raise ValueError("at least one rate must be enabled")
        unknown = set(self.rates) - set(RATE_NAMES)
        if unknown:
            raise ValueError(f"unknown rates: {sorted(unknown)}")
        if not 0 <= int(self.master_seed) <= MAX_SEED:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @property
    def n_chunks(self) -> int:
        return -(-self.n_samples // CHUNK_SIZE)

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "visibilities": list(self.visibilities),
                "master_seed": self.master_seed, "bin_width": self.bin_width,
                "rates": list(self.rates)}


@dataclass
class Histogram:
    """Counts in bins ``[i w, (i+1) w)`` keyed by the integer ``i``."""

    bin_width: float
    bins: dict = field(default_factory=dict)
    total: int = 0

    def add(self, values: np.ndarray) -> None:
        idx, counts = np.unique(np.floor(values / self.bin_width).astype(np.int64),
                                return_counts=True)
        for i, c in zip(idx.tolist(), counts.tolist()):
            self.bins[i] = self.bins.get(i, 0) + c
        self.total += len(values)

    def merge(self, other: "Histogram") -> "Histogram":
        bins = dict(self.bins)
        for i, c in other.bins.items():
            bins[i] = bins.get(i, 0) + c
        return Histogram(self.bin_width, bins, self.total + other.total)

    def center(self, i: int) -> float:
        return (i + 0.5) * self.bin_width

    def peak(self, lo: float = -math.inf, hi: float = math.inf) -> float:
        """Centre of the fullest bin whose centre lies in ``[lo, hi]``."""
        inside = [(c, -i) for i, c in self.bins.items() if lo <= self.center(i) <= hi]
        if not inside:
            raise ValueError("no populated bins in range")
        return self.center(-max(inside)[1])


@dataclass
class RateStats:
    """Running statistics of one rate at one visibility."""

    bin_width: float
    n: int = 0
    n_positive: int = 0
    total: float = 0.0
    total_positive: float = 0.0
    max_observed: float = -math.inf
    min_observed: float = math.inf
    histogram: Histogram = None

    def __post_init__(self):
        if self.histogram is None:
            self.histogram = Histogram(self.bin_width)

    def add(self, values: np.ndarray) -> None:
        pos = values > 0.0
        self.n += len(values)
        self.n_positive += int(pos.sum())
        self.total += float(values.sum())
        self.total_positive += float(values[pos].sum())
        self.max_observed = max(self.max_observed, float(values.max()))
        self.min_observed = min(self.min_observed, float(values.min()))
        self.histogram.add(values)

    def merge(self, other: "RateStats") -> "RateStats":
        return RateStats(
            self.bin_width, self.n + other.n, self.n_positive + other.n_positive,
            self.total + other.total, self.total_positive + other.total_positive,
            max(self.max_observed, other.max_observed),
            min(self.min_observed, other.min_observed),
            self.histogram.merge(other.histogram))

    @property
    def fraction_positive(self) -> float:
        return self.n_positive / self.n

    @property
    def mean(self) -> float:
        return self.total / self.n

    @property
    def mean_post_selected(self) -> float:
        return self.total_positive / self.n_positive if self.n_positive else math.nan

    def to_dict(self) -> dict:
        return {"n": self.n, "fraction_positive": self.fraction_positive, "mean": self.mean,
                "mean_post_selected": _json_float(self.mean_post_selected),
                "max_observed": self.max_observed, "min_observed": self.min_observed}


@dataclass
class ChshStats:
    n: int = 0
    n_violating: int = 0
    total_s_max: float = 0.0
    max_s_max: float = -math.inf

    def add(self, s_max: np.ndarray) -> None:
        self.n += len(s_max)
        self.n_violating += int((s_max > 2.0).sum())
        self.total_s_max += float(s_max.sum())
        self.max_s_max = max(self.max_s_max, float(s_max.max()))

    def merge(self, other: "ChshStats") -> "ChshStats":
        return ChshStats(self.n + other.n, self.n_violating + other.n_violating,
                         self.total_s_max + other.total_s_max,
                         max(self.max_s_max, other.max_s_max))

    @property
    def mean_s_max(self) -> float:
        return self.total_s_max / self.n

    @property
    def fraction_violating(self) -> float:
        return self.n_violating / self.n

    def to_dict(self) -> dict:
        return {"n": self.n, "mean_s_max": self.mean_s_max,
                "fraction_violating": self.fraction_violating, "max_s_max": self.max_s_max}


def _json_float(v: float):
    return None if math.isnan(v) else v


@dataclass
class MonteCarloSummary:
    config: McConfig
    stats: dict  # (rate, visibility) -> RateStats
    chsh: dict  # visibility -> ChshStats

    def merge(self, other: "MonteCarloSummary") -> "MonteCarloSummary":
        return MonteCarloSummary(
            self.config,
            {k: v.merge(other.stats[k]) for k, v in self.stats.items()},
            {k: v.merge(other.chsh[k]) for k, v in self.chsh.items()})

    def __getitem__(self, key) -> RateStats:
        return self.stats[key]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.master_seed,
            "rates": {r: {repr(v): self.stats[(r, v)].to_dict() for v in self.config.visibilities}
                      for r in self.config.rates},
            "chsh": {repr(v): self.chsh[v].to_dict() for v in self.config.visibilities},
        }


def chunk_triads(master_seed: int, chunk_index: int, size: int):
    """Alice's and Bob's Haar rotations for one chunk; triads are their columns.

    Each sample consumes eight consecutive normals (Alice's quaternion, then
    Bob's), so sample ``k`` of a chunk does not depend on the chunk length.
    """
    rng = generator_for(master_seed, chunk_index)
    q = rng.standard_normal((size, 2, 4))
    q /= np.linalg.norm(q, axis=2, keepdims=True)
    return rotation_from_quaternion(q[:, 0]), rotation_from_quaternion(q[:, 1])


def triad_overlaps(master_seed: int, chunk_index: int, size: int) -> np.ndarray:
    """Gram matrices ``G[x, y] = a_x . b_y`` for one chunk of triad pairs."""
    ra, rb = chunk_triads(master_seed, chunk_index, size)
    return np.einsum("nix,niy->nxy", ra, rb)


def werner_rates(overlaps: np.ndarray, visibility: float, rates=RATE_NAMES) -> dict:
    """Per-sample rates for Werner correlators ``E = -V a.b``."""
    E = -visibility * overlaps
    out = {}
    for r in rates:
        if r == "dd":
            out[r] = dd_batch(E, holevo_werner(visibility))
        else:
            out[r] = BATCH_RATES[r](E)
    return out


def _empty_summary(config: McConfig) -> MonteCarloSummary:
    return MonteCarloSummary(
        config,
        {(r, v): RateStats(config.bin_width) for r in config.rates for v in config.visibilities},
        {v: ChshStats() for v in config.visibilities})


def run_chunk(config: McConfig, chunk_index: int) -> MonteCarloSummary:
    start = chunk_index * CHUNK_SIZE
    size = min(CHUNK_SIZE, config.n_samples - start)
    overlaps = triad_overlaps(config.master_seed, chunk_index, size)
    part = _empty_summary(config)
    for v in config.visibilities:
        part.chsh[v].add(chsh_values_batch(-v * overlaps).max(axis=1))
        for r, values in werner_rates(overlaps, v, config.rates).items():
            part.stats[(r, v)].add(values)
    return part


def _run_chunk_args(args):
    return run_chunk(*args)


def run_distribution(config: McConfig, workers: int = 1) -> MonteCarloSummary:
    """Accumulate the rate distributions for every enabled rate and visibility."""
    tasks = [(config, k) for k in range(config.n_chunks)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk_args, tasks))
    else:
        parts = [run_chunk(*t) for t in tasks]
    summary = _empty_summary(config)
    for part in parts:
        summary = summary.merge(part)
    return summary


def histogram_emit(summary: MonteCarloSummary) -> list[tuple]:
    """Rows ``(rate, visibility, bin_center, count)`` sorted by rate, V and bin."""
    rows = []
    for r in summary.config.rates:
        for v in summary.config.visibilities:
            h = summary.stats[(r, v)].histogram
            for i in sorted(h.bins):
                rows.append((r, v, h.center(i), h.bins[i]))
    return rows


def min_max_overlap(config: McConfig) -> float:
    """Smallest value of ``max |a_x . b_y|`` over the sampled triad pairs."""
    best = math.inf
    for k in range(config.n_chunks):
        size = min(CHUNK_SIZE, config.n_samples - k * CHUNK_SIZE)
        g = triad_overlaps(config.master_seed, k, size)
        best = min(best, float(np.abs(g).reshape(size, 9).max(axis=1).min()))
    return best


def dd_positivity_threshold(max_overlap: float, lo: float = 0.5, hi: float = 1.0,
                            tol: float = 1e-9) -> float:
    """Smallest visibility at which the Werner ``dd`` rate stays positive.

    ``dd`` grows with the largest correlator magnitude, so the worst sample is
    the one with the smallest ``max |a . b|``; bisection runs on that sample.
    """
    def worst(v):
        e = np.full((1, 3, 3), v * max_overlap)
        return float(dd_batch(e, holevo_werner(v))[0])

    if worst(hi) <= 0.0:
        raise ValueError("rate is not positive at the upper visibility")
    if worst(lo) > 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if worst(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi
