"""Synthetic versions of the two fibre experiments.

Data arrive in 2-minute blocks, each devoted to one of the nine setting pairs,
so one full pass through the settings takes 18 minutes.  The free-drift run is
analysed with an 18-minute window advanced one block at a time; the randomized
run draws a fresh channel rotation for each full pass.

``counts_per_block = 0`` switches to exact correlators (no shot noise).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bellscan import c_max, chsh_scan
from .correlations import (
    SETTING_PAIRS,
    CorrelatorTable,
    CountTable,
    correlators_from_state,
    estimate_correlators,
    joint_probabilities,
    tomography_linear,
)
from .keyrates import KeyRateReport, holevo_many, report_from_table
from .qmath import MeasurementTriad, TwoQubitState, werner_state
from .sampling import DriftProcess, apply_channel, drift_step, generator_for, random_rotation

BLOCK_MINUTES = 2
CYCLE_BLOCKS = len(SETTING_PAIRS)
WINDOW_MINUTES = BLOCK_MINUTES * CYCLE_BLOCKS


@dataclass(frozen=True, eq=False)
class BlockRecord:
    """One 2-minute block of data for a single setting pair.

    ``counts`` holds the four coincidence counts ``(++, +-, -+, --)``; in exact
    mode it holds the outcome probabilities instead and ``exact`` is set.
    """

    block_index: int
    x: int
    y: int
    counts: tuple
    channel_rotation: np.ndarray
    exact: bool = False

    @property
    def t_start(self) -> int:
        return self.block_index * BLOCK_MINUTES

    @property
    def t_end(self) -> int:
        return self.t_start + BLOCK_MINUTES


@dataclass(frozen=True, eq=False)
class WindowRecord:
    window_index: int
    time_start: float
    time_end: float
    table: CorrelatorTable
    s_max: float
    c_max: float
    report: KeyRateReport
    tomo_state: TwoQubitState


def _measure_block(index, pair, state, triad_a, triad_b, rotation, counts_per_block, rng):
    table = correlators_from_state(state, triad_a, apply_channel(triad_b, rotation))
    p = joint_probabilities(table, *pair)
    if counts_per_block == 0:
        counts, exact = tuple(float(v) for v in p), True
    else:
        counts, exact = tuple(int(v) for v in rng.multinomial(counts_per_block, p / p.sum())), False
    return BlockRecord(index, pair[0], pair[1], counts, np.array(rotation), exact)


def window_count(duration_minutes: int) -> int:
    return max(0, (duration_minutes - WINDOW_MINUTES) // BLOCK_MINUTES + 1)


def simulate_free_drift(duration_minutes: int, counts_per_block: int, visibility: float,
                        drift: DriftProcess | None, seed: int,
                        triad_a: MeasurementTriad | None = None,
                        triad_b: MeasurementTriad | None = None) -> list[BlockRecord]:
    """Blocks cycling Alice-major through the setting pairs while the channel drifts.

    The drift advances once after every block.
    """
    if duration_minutes < WINDOW_MINUTES:
        raise ValueError(f"duration must be at least {WINDOW_MINUTES} minutes")
    if counts_per_block < 0:
        raise ValueError("counts_per_block must be nonnegative")
    drift = drift or DriftProcess()
    triad_a = triad_a or MeasurementTriad.canonical()
    triad_b = triad_b or MeasurementTriad.canonical()
    state = werner_state(visibility)
    rng = generator_for(seed)
    blocks = []
    for k in range(duration_minutes // BLOCK_MINUTES):
        pair = SETTING_PAIRS[k % CYCLE_BLOCKS]
        blocks.append(_measure_block(k, pair, state, triad_a, triad_b, drift.current_rotation,
                                     counts_per_block, rng))
        drift = drift_step(drift, rng)
    return blocks


def table_from_blocks(blocks: list[BlockRecord]) -> CorrelatorTable:
    """Correlators from exactly one block per setting pair."""
    by_pair = {(b.x, b.y): b for b in blocks}
    if any(b.exact for b in blocks):
        e = np.zeros((3, 3))
        ma = np.zeros(3)
        mb = np.zeros(3)
        for (x, y), b in by_pair.items():
            ppp, ppm, pmp, pmm = b.counts
            e[x - 1, y - 1] = ppp + pmm - ppm - pmp
            ma[x - 1] += (ppp + ppm - pmp - pmm) / 3
            mb[y - 1] += (ppp + pmp - ppm - pmm) / 3
        return CorrelatorTable(np.clip(e, -1, 1), np.clip(ma, -1, 1), np.clip(mb, -1, 1))
    return estimate_correlators(CountTable({pair: b.counts for pair, b in by_pair.items()}))


def analyze_window(index: int, blocks: list[BlockRecord], t_start=None, t_end=None) -> WindowRecord:
    table = table_from_blocks(blocks)
    scan = chsh_scan(table)
    tomo = tomography_linear(table)
    axes = np.eye(3)
    chi_a = [h.chi for h in holevo_many(tomo, axes, "A")]
    chi_b = [h.chi for h in holevo_many(tomo, axes, "B")]
    report = report_from_table(table, chi_a, chi_b)
    t_start = blocks[0].t_start if t_start is None else t_start
    t_end = blocks[-1].t_end if t_end is None else t_end
    return WindowRecord(index, t_start, t_end, table, scan.s_max, c_max(table)[0], report, tomo)


def analyze_windows(blocks: list[BlockRecord]) -> list[WindowRecord]:
    """Slide an 18-minute window over the blocks one block at a time."""
    blocks = sorted(blocks, key=lambda b: b.block_index)
    if len(blocks) < CYCLE_BLOCKS:
        raise ValueError("need at least one full cycle of blocks")
    records = []
    for w in range(len(blocks) - CYCLE_BLOCKS + 1):
        window = blocks[w:w + CYCLE_BLOCKS]
        if window[-1].block_index - window[0].block_index != CYCLE_BLOCKS - 1 or \
                {(b.x, b.y) for b in window} != set(SETTING_PAIRS):
            warnings.warn(f"window starting at block {window[0].block_index} lacks a "
                          "complete set of setting pairs; skipped", RuntimeWarning, stacklevel=2)
            continue
        records.append(analyze_window(len(records), window))
    return records


def simulate_randomized_runs(n_runs: int, counts_per_block: int, visibility: float, seed: int,
                             rotations=None) -> list[WindowRecord]:
    """Independent Haar channel per run, all nine pairs measured, one window each.

    ``rotations`` may supply the channel rotation for each run instead.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if counts_per_block < 0:
        raise ValueError("counts_per_block must be nonnegative")
    state = werner_state(visibility)
    canonical = MeasurementTriad.canonical()
    rng = generator_for(seed)
    records = []
    for run in range(n_runs):
        rot = random_rotation(rng) if rotations is None else np.asarray(rotations[run], dtype=float)
        blocks = [_measure_block(run * CYCLE_BLOCKS + k, pair, state, canonical, canonical, rot,
                                 counts_per_block, rng)
                  for k, pair in enumerate(SETTING_PAIRS)]
        records.append(analyze_window(run, blocks))
    return records
