import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfqkd.bellscan import (
    CHSH_TUPLES,
    TSIRELSON,
    c_max,
    c_max_batch,
    chsh_scan,
    chsh_value,
    chsh_values_batch,
)
from rfqkd.correlations import CorrelatorTable, correlators_from_state
from rfqkd.qmath import MeasurementTriad, werner_state
from rfqkd.sampling import random_triad

tables = st.lists(st.floats(-1.0, 1.0), min_size=9, max_size=9).map(
    lambda v: CorrelatorTable(np.array(v).reshape(3, 3)))


def brute_c_max(E):
    return max(sum(abs(E[i, p[i]]) for i in range(3)) for p in permutations(range(3)))


def brute_s_max(E):
    best = 0.0
    for x in range(3):
        for xp in range(3):
            for y in range(3):
                for yp in range(3):
                    if x != xp and y != yp:
                        best = max(best, abs(E[x, y] + E[x, yp] + E[xp, y] - E[xp, yp]))
    return best


def tsirelson_table():
    # Bob's first two axes at 45 degrees to Alice's in the x-z plane
    c = 1 / math.sqrt(2)
    ta = MeasurementTriad.canonical()
    tb = MeasurementTriad([[c, 0, c], [-c, 0, c], [0, 1, 0]])
    return correlators_from_state(werner_state(1.0), ta, tb)


def test_tuple_enumeration():
    assert len(CHSH_TUPLES) == 36
    assert len(set(CHSH_TUPLES)) == 36
    assert CHSH_TUPLES[0] == (1, 2, 1, 2)
    assert all(x != xp and y != yp for x, xp, y, yp in CHSH_TUPLES)


def test_aligned_singlet():
    t = CorrelatorTable(-np.eye(3))
    scan = chsh_scan(t)
    assert scan.s_max == pytest.approx(2.0)
    assert scan.c_max == pytest.approx(3.0)
    assert scan.c_max_pairing == ((1, 1), (2, 2), (3, 3))


def test_tsirelson_configuration():
    scan = chsh_scan(tsirelson_table())
    assert scan.s_max == pytest.approx(TSIRELSON, abs=1e-12)
    assert scan.s_max_indices[:2] in ((1, 3), (3, 1))


def test_chsh_value_formula():
    E = np.arange(9.0).reshape(3, 3) / 10
    assert chsh_value(E, 1, 2, 1, 2) == pytest.approx(abs(0.0 + 0.1 + 0.3 - 0.4))


@pytest.mark.filterwarnings("ignore:S_max")
@given(tables)
@settings(max_examples=60, deadline=None)
def test_matches_brute_force(t):
    scan = chsh_scan(t)
    assert scan.s_max == pytest.approx(brute_s_max(t.E), abs=1e-12)
    assert scan.c_max == pytest.approx(brute_c_max(t.E), abs=1e-12)
    assert c_max(t)[0] == scan.c_max


@pytest.mark.filterwarnings("ignore:S_max")
@given(tables, st.permutations([0, 1, 2]), st.permutations([0, 1, 2]),
       st.lists(st.sampled_from([-1.0, 1.0]), min_size=6, max_size=6))
@settings(max_examples=60, deadline=None)
def test_relabel_and_sign_flip_invariance(t, pa, pb, signs):
    E = t.E[np.ix_(pa, pb)] * np.outer(signs[:3], signs[3:])
    moved = chsh_scan(CorrelatorTable(E))
    scan = chsh_scan(t)
    assert moved.s_max == pytest.approx(scan.s_max, abs=1e-12)
    assert moved.c_max == pytest.approx(scan.c_max, abs=1e-12)


def test_quantum_tables_respect_bounds(rng):
    for _ in range(200):
        t = correlators_from_state(werner_state(1.0), random_triad(rng), random_triad(rng))
        scan = chsh_scan(t)
        assert scan.s_max <= TSIRELSON + 1e-9
        assert scan.c_max <= 3.0 + 1e-9


def test_warns_above_tsirelson():
    E = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.warns(RuntimeWarning):
        scan = chsh_scan(CorrelatorTable(E))
    assert scan.s_max == pytest.approx(4.0)


def test_ties_resolve_to_first_tuple():
    assert chsh_scan(CorrelatorTable(np.zeros((3, 3)))).s_max_indices == CHSH_TUPLES[0]


def test_batch_agrees(rng):
    E = np.array([correlators_from_state(werner_state(0.9), random_triad(rng),
                                         random_triad(rng)).E for _ in range(50)])
    vals = chsh_values_batch(E)
    cm = c_max_batch(E)
    for k in range(len(E)):
        scan = chsh_scan(CorrelatorTable(E[k]))
        np.testing.assert_allclose(vals[k], [scan.values[t] for t in CHSH_TUPLES], atol=1e-14)
        assert cm[k] == pytest.approx(scan.c_max, abs=1e-14)
