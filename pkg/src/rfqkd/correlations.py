"""Correlators, outcome statistics and linear-inversion tomography.

Outcomes are encoded as +1/-1 throughout, so a correlator is literally the
expectation of the product ``a * b``.  Settings are numbered 1..3 in the public
API and stored 0-based in arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .qmath import (
    I2,
    PAULIS,
    InvariantError,
    MeasurementTriad,
    TwoQubitState,
    bloch_operator,
    psd_project,
)

OUTCOME_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))
SETTING_PAIRS = tuple((x, y) for x in (1, 2, 3) for y in (1, 2, 3))
TABLE_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CorrelatorTable:
    """Nine correlators ``E[x, y]`` plus the single-party expectations.

    ``E[x-1, y-1]`` holds the correlator for settings ``(x, y)``; ``m_a`` and
    ``m_b`` are Alice's and Bob's mean outcomes per setting.
    """

    E: np.ndarray
    m_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    m_b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        e, ma, mb = (np.asarray(v, dtype=float) for v in (self.E, self.m_a, self.m_b))
        if e.shape != (3, 3) or ma.shape != (3,) or mb.shape != (3,):
            raise ValueError("correlator table needs a 3x3 E and two length-3 marginals")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(ma)) and np.all(np.isfinite(mb))):
            raise ValueError("correlator table contains non-finite values")
        for name, arr in (("E", e), ("m_a", ma), ("m_b", mb)):
            if np.max(np.abs(arr)) > 1 + TABLE_TOL:
                raise InvariantError(f"{name} has an entry with magnitude above 1")
        p = _joint(e, ma, mb)
        if p.min() < -TABLE_TOL:
            raise InvariantError(
                f"table implies a negative joint probability ({p.min():.3g})")
        object.__setattr__(self, "E", _frozen(e))
        object.__setattr__(self, "m_a", _frozen(ma))
        object.__setattr__(self, "m_b", _frozen(mb))

    def correlator(self, x: int, y: int) -> float:
        return float(self.E[x - 1, y - 1])


def _joint(e, ma, mb) -> np.ndarray:
    """Array ``p[x, y, k]`` over outcome pairs in ``OUTCOME_ORDER``."""
    out = np.empty((3, 3, 4))
    for k, (a, b) in enumerate(OUTCOME_ORDER):
        out[:, :, k] = 0.25 * (1 + a * ma[:, None] + b * mb[None, :] + a * b * e)
    return out


def correlators_from_state(state: TwoQubitState, triad_a: MeasurementTriad,
                           triad_b: MeasurementTriad) -> CorrelatorTable:
    rho = state.rho
    ops_a = [bloch_operator(v) for v in triad_a]
    ops_b = [bloch_operator(v) for v in triad_b]
    e = np.array([[np.trace(rho @ np.kron(oa, ob)).real for ob in ops_b] for oa in ops_a])
    ma = np.array([np.trace(rho @ np.kron(oa, I2)).real for oa in ops_a])
    mb = np.array([np.trace(rho @ np.kron(I2, ob)).real for ob in ops_b])
    return CorrelatorTable(np.clip(e, -1, 1), np.clip(ma, -1, 1), np.clip(mb, -1, 1))


def joint_probabilities(table: CorrelatorTable, x: int, y: int) -> np.ndarray:
    """``P(a, b | x, y)`` ordered ``(++, +-, -+, --)``."""
    if x not in (1, 2, 3) or y not in (1, 2, 3):
        raise ValueError(f"settings must be in 1..3, got ({x}, {y})")
    p = _joint(table.E, table.m_a, table.m_b)[x - 1, y - 1]
    if p.min() < -TABLE_TOL:
        raise InvariantError(f"negative probability for settings ({x}, {y})")
    return np.clip(p, 0.0, None)


@dataclass(frozen=True)
class CountTable:
    """Coincidence counts per setting pair, each as ``(n++, n+-, n-+, n--)``."""

    counts: dict

    def __post_init__(self):
        clean = {}
        for (x, y), n in self.counts.items():
            if (x, y) not in SETTING_PAIRS:
                raise ValueError(f"unknown setting pair {(x, y)!r}")
            n = tuple(int(v) for v in n)
            if len(n) != 4 or min(n) < 0:
                raise ValueError(f"counts for {(x, y)} must be four nonnegative integers")
            if sum(n) == 0:
                raise ValueError(f"setting pair {(x, y)} marked measured with zero counts")
            clean[(int(x), int(y))] = n
        object.__setattr__(self, "counts", clean)

    def total(self, x: int, y: int) -> int:
        return sum(self.counts[(x, y)])


def sample_counts(table: CorrelatorTable, n_per_pair: int, rng: np.random.Generator) -> CountTable:
    """Draw ``n_per_pair`` coincidences for each of the nine setting pairs."""
    if n_per_pair < 1:
        raise ValueError("n_per_pair must be at least 1")
    probs = _joint(table.E, table.m_a, table.m_b)
    out = {}
    for x, y in SETTING_PAIRS:
        p = np.clip(probs[x - 1, y - 1], 0.0, None)
        out[(x, y)] = tuple(rng.multinomial(n_per_pair, p / p.sum()))
    return CountTable(out)


def estimate_correlators(counts: CountTable) -> CorrelatorTable:
    """Frequency estimates of the correlators and pooled single-party means.

    Each marginal pools the three blocks sharing that party's setting, so a
    correlator estimated from a single block can fall outside the range the
    pooled marginals allow (for instance ``E = -1`` with nonzero marginal
    noise).  Such correlators are clipped to the nearest admissible value,
    a shift no larger than the marginal noise.
    """
    missing = [pair for pair in SETTING_PAIRS if pair not in counts.counts]
    if missing:
        raise ValueError(f"missing setting pairs: {missing}")
    e = np.zeros((3, 3))
    a_sum = np.zeros(3)
    b_sum = np.zeros(3)
    a_tot = np.zeros(3)
    b_tot = np.zeros(3)
    for (x, y), (npp, npm, nmp, nmm) in counts.counts.items():
        n = npp + npm + nmp + nmm
        e[x - 1, y - 1] = (npp + nmm - npm - nmp) / n
        a_sum[x - 1] += npp + npm - nmp - nmm
        a_tot[x - 1] += n
        b_sum[y - 1] += npp + nmp - npm - nmm
        b_tot[y - 1] += n
    ma, mb = a_sum / a_tot, b_sum / b_tot
    lo = np.abs(ma[:, None] + mb[None, :]) - 1.0
    hi = 1.0 - np.abs(ma[:, None] - mb[None, :])
    return CorrelatorTable(np.clip(e, lo, hi), ma, mb)


def tomography_linear(table: CorrelatorTable) -> TwoQubitState:
    """Linear-inversion two-qubit tomography in the canonical frame.

    The triads used to produce ``table`` are identified with the X, Y, Z axes of
    each party, so the result equals the true state up to the local rotations
    that carry those triads onto the axes.  For improper (left-handed) triads
    that map is a reflection, which is not a unitary; the spectrum is then not
    preserved in general.
    """
    rho = np.kron(I2, I2).astype(complex)
    for x in range(3):
        rho += table.m_a[x] * np.kron(PAULIS[x], I2)
        rho += table.m_b[x] * np.kron(I2, PAULIS[x])
    for x, y in product(range(3), range(3)):
        rho += table.E[x, y] * np.kron(PAULIS[x], PAULIS[y])
    return psd_project(rho / 4)
