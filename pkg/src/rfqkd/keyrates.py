"""Asymptotic secret-key-rate bounds for reference-frame-free QKD.

Two device-independent bounds (collective attacks via the CHSH/Holevo bound,
and memoryless-device attacks via the min-entropy bound), the 6-state and BB84
device-dependent bounds, and the tomographic Devetak-Winter bound.

Each optimised rate exists in two forms: a per-table function that enumerates
setting choices explicitly and reports the optimiser, and a ``*_batch`` variant
over stacks of correlator matrices used by the Monte Carlo engine.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .bellscan import CHSH_TUPLES, TSIRELSON, chsh_value, chsh_values_batch
from .correlations import CorrelatorTable, correlators_from_state
from .qmath import (
    I2,
    MeasurementTriad,
    TwoQubitState,
    _entropy_terms,
    binary_entropy,
    binary_entropy_array,
    hermitian_eigh,
    projector,
    psd_sqrt,
    spectral_entropy,
)

SENTINEL = -1.0
RATE_NAMES = ("di1", "di2", "dd6", "bb84", "dd")


# --------------------------------------------------------------------------
# single-configuration bounds

def _check_chsh(S: float) -> None:
    if S <= 2.0:
        raise ValueError(f"CHSH value {S!r} shows no violation")
    if S > TSIRELSON + 1e-9:
        raise ValueError(f"CHSH value {S!r} exceeds the Tsirelson bound")


def rate_di1_single(S: float, E_raw: float) -> float:
    """Collective-attack DI rate from one CHSH value and the raw-key correlator."""
    _check_chsh(S)
    s = min(S / 2.0, math.sqrt(2.0))
    return (1.0 - binary_entropy((1.0 - E_raw) / 2.0)
            - binary_entropy((1.0 + math.sqrt(s * s - 1.0)) / 2.0))


def rate_di2_single(S: float, E_raw: float) -> float:
    """Memoryless-device DI rate from one CHSH value and the raw-key correlator."""
    _check_chsh(S)
    s = min(S / 2.0, math.sqrt(2.0))
    return (-binary_entropy((1.0 - E_raw) / 2.0)
            - math.log2((1.0 + math.sqrt(max(0.0, 2.0 - s * s))) / 2.0))


def _raw_pairs(x, xp, y, yp):
    for xr in (1, 2, 3):
        for yr in (1, 2, 3):
            if xr in (x, xp) or yr in (y, yp):
                yield xr, yr


def _optimise_di(table: CorrelatorTable, single) -> tuple[float, tuple | None]:
    best, choice = SENTINEL, None
    for x, xp, y, yp in CHSH_TUPLES:
        S = chsh_value(table.E, x, xp, y, yp)
        if S <= 2.0:
            continue
        # noisy tables may sit above the quantum maximum
        S = min(S, TSIRELSON)
        for xr, yr in _raw_pairs(x, xp, y, yp):
            r = single(S, abs(table.E[xr - 1, yr - 1]))
            if choice is None or r > best:
                best, choice = r, (x, xp, y, yp, xr, yr)
    return best, choice


def rate_di1(table: CorrelatorTable) -> tuple[float, tuple | None]:
    """Best collective-attack DI rate over CHSH tuples and admissible raw pairs.

    Returns ``(-1, None)`` when no CHSH value exceeds 2.  The raw-key correlator
    enters through its magnitude, which amounts to one party flipping all bits.
    """
    return _optimise_di(table, rate_di1_single)


def rate_di2(table: CorrelatorTable) -> tuple[float, tuple | None]:
    return _optimise_di(table, rate_di2_single)


def _six_state_probabilities(e1: float, e2: float, e3: float, sign: int) -> list[float]:
    return [
        (1 + sign * (e1 + e2 - e3)) / 4,
        (1 + sign * (e1 - e2 + e3)) / 4,
        (1 + sign * (-e1 + e2 + e3)) / 4,
        (1 - sign * (e1 + e2 + e3)) / 4,
    ]


def permutation_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def rate_dd_6state(table: CorrelatorTable) -> tuple[float, tuple]:
    """6-state bound maximised over assignments of Bob's settings to Alice's.

    Returns the rate and ``(permutation, signature)``, the permutation listing
    Bob's setting paired with Alice's settings 1, 2, 3.
    """
    best, choice = None, None
    for perm in permutations((1, 2, 3)):
        sign = permutation_sign(perm)
        e1, e2, e3 = (table.E[i, perm[i] - 1] for i in range(3))
        probs = [min(1.0, max(0.0, p)) for p in _six_state_probabilities(e1, e2, e3, sign)]
        r = 1.0 - _entropy_terms(probs)
        if best is None or r > best:
            best, choice = r, (perm, sign)
    return best, choice


def rate_dd_bb84(table: CorrelatorTable) -> tuple[float, tuple]:
    """BB84-style bound from two correlators in distinct rows and columns."""
    best, choice = None, None
    for x in (1, 2, 3):
        for y in (1, 2, 3):
            for xp in (1, 2, 3):
                for yp in (1, 2, 3):
                    if xp == x or yp == y:
                        continue
                    r = (1.0 - binary_entropy((1 - abs(table.E[x - 1, y - 1])) / 2)
                         - binary_entropy((1 - abs(table.E[xp - 1, yp - 1])) / 2))
                    if best is None or r > best:
                        best, choice = r, (x, y, xp, yp)
    return best, choice


# --------------------------------------------------------------------------
# Holevo information

def holevo_werner(visibility: float) -> float:
    """Eve's Holevo information on either party's outcome for a Werner state."""
    v = float(visibility)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v!r} outside [0, 1]")
    spectrum = [(1 + 3 * v) / 4] + [(1 - v) / 4] * 3
    return _entropy_terms(spectrum) - binary_entropy((1 - v) / 2)


@dataclass(frozen=True)
class HolevoBreakdown:
    s_rho_e: float
    conditional_entropies: tuple  # ((outcome, weight, entropy), ...)
    chi: float


def _local_projectors(directions, party: str) -> np.ndarray:
    ops = []
    for n in directions:
        for a in (1, -1):
            p = projector(n, a)
            ops.append(np.kron(p, I2) if party == "A" else np.kron(I2, p))
    return np.array(ops)


def holevo_many(state: TwoQubitState, directions, party: str) -> list[HolevoBreakdown]:
    """Holevo information for several measurement directions of one party.

    Eve holds a purification of ``rho``.  Her unconditioned entropy equals
    ``S(rho)``, and her state conditioned on outcome ``a`` has the same
    nonzero spectrum as ``sqrt(rho) P_a sqrt(rho) / p(a)``, so no purification
    is built explicitly.
    """
    if party not in ("A", "B"):
        raise ValueError(f"party must be 'A' or 'B', not {party!r}")
    directions = [np.asarray(d, dtype=float) for d in directions]
    for d in directions:
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError(f"direction {d!r} is not a unit vector")
    lam, vec = hermitian_eigh(state.rho)
    s_e = spectral_entropy(lam)
    root = psd_sqrt(state.rho)
    projs = _local_projectors(directions, party)
    m = root @ projs @ root
    m = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    weights = np.real(np.einsum("kii->k", m))
    spectra = hermitian_eigh(m)[0]
    out = []
    for k in range(len(directions)):
        terms = []
        cond = 0.0
        for j, a in enumerate((1, -1)):
            idx = 2 * k + j
            w = float(weights[idx])
            if w < 1e-12:
                terms.append((a, 0.0, 0.0))
                continue
            s = spectral_entropy(np.clip(spectra[idx] / w, 0.0, None))
            terms.append((a, w, s))
            cond += w * s
        total = sum(t[1] for t in terms)
        out.append(HolevoBreakdown(s_e, tuple(terms), s_e - cond / total))
    return out


def holevo_general(state: TwoQubitState, direction, party: str) -> HolevoBreakdown:
    """Holevo information of Eve about one party's outcome along ``direction``."""
    return holevo_many(state, [direction], party)[0]


# --------------------------------------------------------------------------
# tomographic Devetak-Winter bound

def rate_dd_from_chi(table: CorrelatorTable, chi_a, chi_b) -> tuple[float, tuple]:
    """Devetak-Winter bound given per-setting Holevo quantities for each party."""
    best, choice = None, None
    for xr in (1, 2, 3):
        for yr in (1, 2, 3):
            mutual = 1.0 - binary_entropy((1 - abs(table.E[xr - 1, yr - 1])) / 2)
            r = mutual - min(chi_a[xr - 1], chi_b[yr - 1])
            if best is None or r > best:
                best, choice = r, (xr, yr)
    return best, choice


def rate_dd(state: TwoQubitState, table: CorrelatorTable, triad_a: MeasurementTriad,
            triad_b: MeasurementTriad) -> tuple[float, tuple]:
    expected = correlators_from_state(state, triad_a, triad_b)
    dev = max(np.max(np.abs(expected.E - table.E)), np.max(np.abs(expected.m_a - table.m_a)),
              np.max(np.abs(expected.m_b - table.m_b)))
    if dev > 1e-6:
        warnings.warn(f"correlator table deviates from the state by {dev:.3g}; "
                      "using state-derived correlators", RuntimeWarning, stacklevel=2)
        table = expected
    chi_a = [h.chi for h in holevo_many(state, triad_a.vectors, "A")]
    chi_b = [h.chi for h in holevo_many(state, triad_b.vectors, "B")]
    return rate_dd_from_chi(table, chi_a, chi_b)


# --------------------------------------------------------------------------
# bundled report

@dataclass(frozen=True)
class KeyRateReport:
    r_di1: float
    r_di1_choice: tuple | None
    r_di2: float
    r_di2_choice: tuple | None
    r_dd_6state: float
    r_dd_6state_permutation: tuple
    r_dd_bb84: float
    r_dd_bb84_choice: tuple
    r_dd: float
    r_dd_choice: tuple

    def rates(self) -> dict:
        return {"di1": self.r_di1, "di2": self.r_di2, "dd6": self.r_dd_6state,
                "bb84": self.r_dd_bb84, "dd": self.r_dd}

    def to_dict(self) -> dict:
        perm, sign = self.r_dd_6state_permutation
        return {
            "r_di1": self.r_di1, "r_di1_choice": _listify(self.r_di1_choice),
            "r_di2": self.r_di2, "r_di2_choice": _listify(self.r_di2_choice),
            "r_dd_6state": self.r_dd_6state,
            "r_dd_6state_permutation": {"permutation": list(perm), "signature": sign},
            "r_dd_bb84": self.r_dd_bb84, "r_dd_bb84_choice": _listify(self.r_dd_bb84_choice),
            "r_dd": self.r_dd, "r_dd_choice": _listify(self.r_dd_choice),
        }


def _listify(t):
    return None if t is None else list(t)


def report_from_table(table: CorrelatorTable, chi_a, chi_b) -> KeyRateReport:
    """All five bounds from one table and the Holevo quantities per setting."""
    di1, di1_c = rate_di1(table)
    di2, di2_c = rate_di2(table)
    dd6, dd6_c = rate_dd_6state(table)
    bb84, bb84_c = rate_dd_bb84(table)
    dd, dd_c = rate_dd_from_chi(table, chi_a, chi_b)
    return KeyRateReport(di1, di1_c, di2, di2_c, dd6, dd6_c, bb84, bb84_c, dd, dd_c)


def full_report(state: TwoQubitState, triad_a: MeasurementTriad,
                triad_b: MeasurementTriad) -> KeyRateReport:
    table = correlators_from_state(state, triad_a, triad_b)
    chi_a = [h.chi for h in holevo_many(state, triad_a.vectors, "A")]
    chi_b = [h.chi for h in holevo_many(state, triad_b.vectors, "B")]
    return report_from_table(table, chi_a, chi_b)


# --------------------------------------------------------------------------
# vectorised bounds over stacks of correlator matrices, shape (n, 3, 3)

def _excluded_raw_cells() -> np.ndarray:
    # the only raw pair outside the admissible set is (x'', y''), the settings
    # left over by the CHSH tuple
    cells = []
    for x, xp, y, yp in CHSH_TUPLES:
        cells.append((6 - x - xp - 1) * 3 + (6 - y - yp - 1))
    return np.array(cells)


_EXCLUDED = _excluded_raw_cells()


def _best_raw_entropy(E: np.ndarray) -> np.ndarray:
    """Smallest admissible raw-key error entropy per CHSH tuple, shape (n, 36)."""
    h = binary_entropy_array((1.0 - np.abs(E)) / 2.0).reshape(len(E), 9)
    order = np.sort(h, axis=1)
    argmin = np.argmin(h, axis=1)
    # drop the excluded cell by falling back to the runner-up when it is the minimum
    hit = argmin[:, None] == _EXCLUDED[None, :]
    return np.where(hit, order[:, 1:2], order[:, 0:1])


def _di_batch(E: np.ndarray, eve_term) -> np.ndarray:
    S = chsh_values_batch(E)
    violating = S > 2.0
    s = np.minimum(S, TSIRELSON) / 2.0
    rates = -_best_raw_entropy(E) - eve_term(s)
    rates = np.where(violating, rates, -np.inf).max(axis=1)
    return np.where(violating.any(axis=1), rates, SENTINEL)


def di1_batch(E: np.ndarray) -> np.ndarray:
    return _di_batch(E, lambda s: -1.0 + binary_entropy_array(
        (1.0 + np.sqrt(np.clip(s * s - 1.0, 0.0, None))) / 2.0))


def di2_batch(E: np.ndarray) -> np.ndarray:
    return _di_batch(E, lambda s: np.log2((1.0 + np.sqrt(np.clip(2.0 - s * s, 0.0, None))) / 2.0))


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, -p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def dd6_batch(E: np.ndarray) -> np.ndarray:
    rows = np.arange(3)
    best = None
    for perm in permutations((1, 2, 3)):
        sign = permutation_sign(perm)
        e = E[:, rows, np.array(perm) - 1]
        probs = np.stack(_six_state_probabilities(e[:, 0], e[:, 1], e[:, 2], sign), axis=1)
        r = 1.0 - _entropy_rows(probs)
        best = r if best is None else np.maximum(best, r)
    return best


def bb84_batch(E: np.ndarray) -> np.ndarray:
    h = binary_entropy_array((1.0 - np.abs(E)) / 2.0)
    best = None
    for x in range(3):
        for y in range(3):
            for xp in range(3):
                for yp in range(3):
                    if xp == x or yp == y:
                        continue
                    r = 1.0 - h[:, x, y] - h[:, xp, yp]
                    best = r if best is None else np.maximum(best, r)
    return best


def dd_batch(E: np.ndarray, chi: float) -> np.ndarray:
    """Devetak-Winter bound when Eve's Holevo term is setting independent."""
    e_max = np.abs(E).reshape(len(E), 9).max(axis=1)
    return 1.0 - binary_entropy_array((1.0 - e_max) / 2.0) - chi


BATCH_RATES = {"di1": di1_batch, "di2": di2_batch, "dd6": dd6_batch, "bb84": bb84_batch}
