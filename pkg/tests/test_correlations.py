import math
from itertools import product

import numpy as np
import pytest

from rfqkd.correlations import (
    OUTCOME_ORDER,
    SETTING_PAIRS,
    CorrelatorTable,
    CountTable,
    correlators_from_state,
    estimate_correlators,
    joint_probabilities,
    sample_counts,
    tomography_linear,
)
from rfqkd.qmath import (
    SINGLET,
    InvariantError,
    MeasurementTriad,
    TwoQubitState,
    projector,
    unitary_from_rotation,
    werner_state,
)
from rfqkd.sampling import random_rotation, random_triad

from conftest import random_density_matrix

CANON = MeasurementTriad.canonical()
SINGLET_PROJ = np.outer(SINGLET, SINGLET.conj())


def projector_sum_oracle(rho, ta, tb):
    """Correlators and marginals assembled from outcome projector probabilities."""
    e = np.zeros((3, 3))
    ma = np.zeros(3)
    mb = np.zeros(3)
    for x, y in product(range(3), range(3)):
        for a, b in OUTCOME_ORDER:
            p = np.trace(rho @ np.kron(projector(ta[x], a), projector(tb[y], b))).real
            e[x, y] += a * b * p
            ma[x] += a * p / 3
            mb[y] += b * p / 3
    return e, ma, mb


class TestCorrelatorsFromState:
    def test_singlet_aligned(self):
        t = correlators_from_state(TwoQubitState(SINGLET_PROJ), CANON, CANON)
        np.testing.assert_allclose(t.E, -np.eye(3), atol=1e-15)
        np.testing.assert_allclose(t.m_a, 0, atol=1e-15)
        np.testing.assert_allclose(t.m_b, 0, atol=1e-15)

    def test_werner_aligned(self):
        t = correlators_from_state(werner_state(0.95), CANON, CANON)
        np.testing.assert_allclose(t.E, -0.95 * np.eye(3), atol=1e-15)

    def test_werner_general_triads(self, rng):
        for _ in range(20):
            ta, tb = random_triad(rng), random_triad(rng)
            v = rng.uniform()
            t = correlators_from_state(werner_state(v), ta, tb)
            np.testing.assert_allclose(t.E, -v * ta.vectors @ tb.vectors.T, atol=1e-9)
            np.testing.assert_allclose(t.m_a, 0, atol=1e-9)

    def test_random_state_matches_projector_oracle(self, rng):
        for _ in range(20):
            st = random_density_matrix(rng)
            ta, tb = random_triad(rng, True), random_triad(rng, True)
            e, ma, mb = projector_sum_oracle(st.rho, ta, tb)
            t = correlators_from_state(st, ta, tb)
            np.testing.assert_allclose(t.E, e, atol=1e-12)
            np.testing.assert_allclose(t.m_a, ma, atol=1e-12)
            np.testing.assert_allclose(t.m_b, mb, atol=1e-12)

    def test_local_unitary_covariance(self, rng):
        for _ in range(20):
            st = random_density_matrix(rng)
            ta, tb = random_triad(rng), random_triad(rng)
            ra, rb = random_rotation(rng), random_rotation(rng)
            u = np.kron(unitary_from_rotation(ra), unitary_from_rotation(rb))
            moved = TwoQubitState(u @ st.rho @ u.conj().T)
            t0 = correlators_from_state(st, ta, tb)
            t1 = correlators_from_state(moved, MeasurementTriad(ta.vectors @ ra.T),
                                        MeasurementTriad(tb.vectors @ rb.T))
            np.testing.assert_allclose(t1.E, t0.E, atol=1e-9)
            np.testing.assert_allclose(t1.m_a, t0.m_a, atol=1e-9)
            np.testing.assert_allclose(t1.m_b, t0.m_b, atol=1e-9)


class TestTable:
    def test_rejects_large_entries(self):
        with pytest.raises(InvariantError):
            CorrelatorTable(np.full((3, 3), 1.2))

    def test_rejects_negative_joint(self):
        with pytest.raises(InvariantError):
            CorrelatorTable(-np.eye(3), m_a=[0.9, 0, 0], m_b=[0.9, 0, 0])

    def test_joint_probabilities(self):
        np.testing.assert_allclose(joint_probabilities(CorrelatorTable(-np.eye(3)), 1, 1),
                                   [0, 0.5, 0.5, 0])
        np.testing.assert_allclose(joint_probabilities(CorrelatorTable(np.zeros((3, 3))), 2, 3),
                                   [0.25] * 4)
        np.testing.assert_allclose(joint_probabilities(CorrelatorTable(-0.95 * np.eye(3)), 3, 3),
                                   [0.0125, 0.4875, 0.4875, 0.0125])

    def test_joint_probabilities_bad_setting(self):
        with pytest.raises(ValueError):
            joint_probabilities(CorrelatorTable(np.zeros((3, 3))), 0, 1)


class TestCounts:
    def test_perfect_correlation(self, rng):
        c = sample_counts(CorrelatorTable(np.ones((3, 3))), 1000, rng)
        for pair in SETTING_PAIRS:
            n = c.counts[pair]
            assert n[1] == n[2] == 0 and n[0] + n[3] == 1000

    def test_deterministic(self):
        t = CorrelatorTable(-0.9 * np.eye(3))
        a = sample_counts(t, 500, np.random.default_rng(5))
        b = sample_counts(t, 500, np.random.default_rng(5))
        assert a == b

    def test_large_sample_within_five_sigma(self, rng):
        n = 10**6
        est = estimate_correlators(sample_counts(CorrelatorTable(-0.95 * np.eye(3)), n, rng))
        sigma = math.sqrt((1 - 0.95**2) / n)
        assert abs(est.E[0, 0] + 0.95) < 5 * sigma
        # round trip towards the source table
        truth = -0.95 * np.eye(3)
        for x, y in SETTING_PAIRS:
            s = math.sqrt((1 - truth[x - 1, y - 1] ** 2) / n)
            assert abs(est.E[x - 1, y - 1] - truth[x - 1, y - 1]) < 5 * s

    def test_estimate_examples(self):
        flat = CountTable({p: (25, 25, 25, 25) for p in SETTING_PAIRS})
        t = estimate_correlators(flat)
        np.testing.assert_allclose(t.E, 0)
        np.testing.assert_allclose(t.m_a, 0)
        corr = CountTable({p: (50, 0, 0, 50) for p in SETTING_PAIRS})
        np.testing.assert_allclose(estimate_correlators(corr).E, 1)

    def test_estimate_marginals(self):
        counts = {p: (40, 30, 20, 10) for p in SETTING_PAIRS}
        t = estimate_correlators(CountTable(counts))
        np.testing.assert_allclose(t.m_a, (40 + 30 - 20 - 10) / 100)
        np.testing.assert_allclose(t.m_b, (40 + 20 - 30 - 10) / 100)
        np.testing.assert_allclose(t.E, (40 + 10 - 30 - 20) / 100)

    def test_missing_pair(self):
        counts = {p: (1, 1, 1, 1) for p in SETTING_PAIRS[:-1]}
        with pytest.raises(ValueError):
            estimate_correlators(CountTable(counts))

    def test_unbiased(self):
        n = 10**4
        truth = CorrelatorTable(-0.6 * np.eye(3) + 0.2)
        errs = np.array([estimate_correlators(sample_counts(truth, n, np.random.default_rng(s))).E
                         - truth.E for s in range(200)])
        sigma = np.sqrt((1 - truth.E**2) / n)
        assert np.all(np.abs(errs.mean(axis=0)) < 3 * sigma / math.sqrt(200))


class TestTomography:
    def test_singlet(self):
        np.testing.assert_allclose(tomography_linear(CorrelatorTable(-np.eye(3))).rho,
                                   SINGLET_PROJ, atol=1e-12)

    def test_werner(self):
        np.testing.assert_allclose(tomography_linear(CorrelatorTable(-0.95 * np.eye(3))).rho,
                                   werner_state(0.95).rho, atol=1e-12)

    def test_round_trip_canonical(self, rng):
        for _ in range(50):
            st = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
            back = tomography_linear(correlators_from_state(st, CANON, CANON))
            assert np.max(np.abs(back.rho - st.rho)) < 1e-8

    def test_spectrum_preserved_for_rotated_triads(self, rng):
        for _ in range(30):
            st = random_density_matrix(rng)
            back = tomography_linear(correlators_from_state(st, random_triad(rng), random_triad(rng)))
            np.testing.assert_allclose(back.spectrum, st.spectrum, atol=1e-8)

    def test_projects_unphysical_tables(self):
        # valid probabilities but no quantum state: |E| = 1 along all three pairs
        # with the "wrong" sign pattern
        back = tomography_linear(CorrelatorTable(np.eye(3)))
        assert back.spectrum[-1] >= -1e-12
        assert np.trace(back.rho).real == pytest.approx(1.0)


def test_estimate_stays_consistent_with_pooled_marginals():
    # perfect anticorrelation on (1, 1) but biased marginals from the other pairs
    counts = {p: (25, 25, 25, 25) for p in SETTING_PAIRS}
    counts[(1, 1)] = (0, 50, 50, 0)
    counts[(1, 2)] = (40, 30, 20, 10)
    t = estimate_correlators(CountTable(counts))
    assert t.E[0, 0] == pytest.approx(-1 + abs(t.m_a[0] + t.m_b[0]))
    assert min(joint_probabilities(t, 1, 1)) >= -1e-12


def test_estimate_from_low_counts_never_breaks_invariants():
    rng = np.random.default_rng(3)
    for _ in range(300):
        t = CorrelatorTable(-np.eye(3))
        est = estimate_correlators(sample_counts(t, 20, rng))
        for x, y in SETTING_PAIRS:
            assert min(joint_probabilities(est, x, y)) >= -1e-9
