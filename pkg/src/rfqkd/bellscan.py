"""CHSH parameters and the two alignment figures of merit, S_max and C_max."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .correlations import CorrelatorTable

TSIRELSON = 2.0 * math.sqrt(2.0)

# (x, x', y, y') with x != x' and y != y', lexicographic, 1-based
CHSH_TUPLES = tuple(
    (x, xp, y, yp)
    for x in (1, 2, 3) for xp in (1, 2, 3) if xp != x
    for y in (1, 2, 3) for yp in (1, 2, 3) if yp != y
)
# perfect matchings as Bob's setting for Alice's 1, 2, 3
MATCHINGS = tuple(permutations((1, 2, 3)))


def chsh_value(E: np.ndarray, x: int, xp: int, y: int, yp: int) -> float:
    """``|E_xy + E_xy' + E_x'y - E_x'y'|`` with 1-based settings."""
    e = lambda i, j: E[i - 1, j - 1]  # noqa: E731
    return abs(e(x, y) + e(x, yp) + e(xp, y) - e(xp, yp))


@dataclass(frozen=True)
class ChshScan:
    values: dict
    s_max: float
    s_max_indices: tuple
    c_max: float
    c_max_pairing: tuple


def c_max(table: CorrelatorTable) -> tuple[float, tuple]:
    """Largest sum of three absolute correlators over disjoint setting pairs.

    Returns the value and the matching as ``((1, y1), (2, y2), (3, y3))``.
    """
    best, best_match = -1.0, None
    for match in MATCHINGS:
        total = sum(abs(table.E[x, y - 1]) for x, y in enumerate(match))
        if total > best:
            best, best_match = total, match
    return float(best), tuple((x + 1, y) for x, y in enumerate(best_match))


def chsh_scan(table: CorrelatorTable) -> ChshScan:
    values = {t: chsh_value(table.E, *t) for t in CHSH_TUPLES}
    best_t = CHSH_TUPLES[0]
    for t in CHSH_TUPLES:
        if values[t] > values[best_t]:
            best_t = t
    s_max = values[best_t]
    if s_max > TSIRELSON + 1e-6:
        warnings.warn(f"S_max = {s_max:.6f} exceeds the Tsirelson bound", RuntimeWarning,
                      stacklevel=2)
    cm, pairing = c_max(table)
    return ChshScan(values, s_max, best_t, cm, pairing)


# vectorised forms used by the Monte Carlo engine; E has shape (n, 3, 3)

_T0 = np.array(CHSH_TUPLES) - 1


def chsh_values_batch(E: np.ndarray) -> np.ndarray:
    """All 36 CHSH values for a stack of tables, shape ``(n, 36)``, tuple order as CHSH_TUPLES."""
    x, xp, y, yp = _T0.T
    return np.abs(E[:, x, y] + E[:, x, yp] + E[:, xp, y] - E[:, xp, yp])


def c_max_batch(E: np.ndarray) -> np.ndarray:
    a = np.abs(E)
    rows = np.arange(3)
    return np.max(np.stack([a[:, rows, np.array(m) - 1].sum(axis=1) for m in MATCHINGS], 1), 1)
