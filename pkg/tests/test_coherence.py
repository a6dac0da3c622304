import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scatterlab.bench import ScatteringBench
from scatterlab.coherence import (
    BENCHMARK_INCOMPARABLE,
    CoherenceSpectrum,
    Majorization,
    TransportOperator,
    alignment_unitaries,
    benchmark_pairs,
    comparable_pair,
    exact_interval,
    interval_relation,
    majorization_compare,
    nesting_experiment,
    operator_from_tm,
    orbit_response,
    readout_masks,
    response_interval,
    sample_responses,
    t_transform,
    weighted_reconstruction_response,
)
from scatterlab.tm import measure_tm
from scatterlab.wave_core import SeededRng, haar_unitary


def random_operator(n, seed):
    a = np.random.default_rng(seed).uniform(0, 1, n)
    return TransportOperator.from_eigenvalues(a, haar_unitary(n, seed))


@pytest.fixture(scope="module")
def measured_tm():
    return measure_tm(ScatteringBench.create(16, 256, seed=12))


@pytest.mark.parametrize(
    "lam,mu,expected",
    [
        ((0.5, 0.5), (1, 0), Majorization.LESS),
        ((1, 0), (0.5, 0.5), Majorization.GREATER),
        ((0.4, 0.35, 0.25), (0.5, 0.25, 0.25), Majorization.LESS),
        ((0.6, 0.2, 0.2), (0.5, 0.4, 0.1), Majorization.INCOMPARABLE),
        ((0.2, 0.3, 0.5), (0.5, 0.3, 0.2), Majorization.EQUAL),
    ],
)
def test_majorization_examples(lam, mu, expected):
    assert majorization_compare(lam, mu) is expected


def test_majorization_length_mismatch():
    with pytest.raises(ValueError):
        majorization_compare((1, 0), (1, 0, 0))


def test_spectrum_validation():
    with pytest.raises(ValueError):
        CoherenceSpectrum([0.5, 0.6])
    with pytest.raises(ValueError):
        CoherenceSpectrum([1.5, -0.5])
    assert list(CoherenceSpectrum([0.1, 0.9]).values) == [0.9, 0.1]


def test_two_level_spectra_always_comparable():
    grid = np.linspace(0.5, 1.0, 51)
    for p, q in itertools.product(grid, grid):
        assert majorization_compare((p, 1 - p), (q, 1 - q)) is not Majorization.INCOMPARABLE


def _spectrum(n):
    return st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n).map(CoherenceSpectrum.normalized)


spectrum_triples = st.integers(2, 6).flatmap(lambda n: st.tuples(_spectrum(n), _spectrum(n), _spectrum(n)))


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 8))
def test_majorization_transitive_on_chains(seed, n):
    rng = SeededRng(seed)
    lam, mu = comparable_pair(n, rng.child("a"))
    g = rng.child("b").generator
    values = lam.values
    for _ in range(3):
        i, j = g.choice(n, 2, replace=False)
        values = t_transform(values, i, j, g.integers(1, 16) / 16)
    nu = CoherenceSpectrum(values)
    assert majorization_compare(nu, lam, tol=0) in (Majorization.LESS, Majorization.EQUAL)
    assert majorization_compare(lam, mu, tol=0) in (Majorization.LESS, Majorization.EQUAL)
    assert majorization_compare(nu, mu, tol=0) in (Majorization.LESS, Majorization.EQUAL)


@settings(max_examples=150, deadline=None)
@given(triple=spectrum_triples)
def test_majorization_partial_order(triple):
    a, b, c = triple
    assert majorization_compare(a, a) is Majorization.EQUAL
    ab, bc = majorization_compare(a, b), majorization_compare(b, c)
    flip = {Majorization.LESS: Majorization.GREATER, Majorization.GREATER: Majorization.LESS}
    assert majorization_compare(b, a) is flip.get(ab, ab)
    if ab is Majorization.LESS and bc is Majorization.LESS:
        assert majorization_compare(a, c) in (Majorization.LESS, Majorization.EQUAL)


def test_interval_examples():
    op = TransportOperator.from_eigenvalues([0.1, 0.9])
    iv = response_interval((1, 0), op)
    assert (iv.lo, iv.hi) == pytest.approx((0.1, 0.9))
    iv = response_interval((0.75, 0.25), op)
    assert (iv.lo, iv.hi) == pytest.approx((0.75 * 0.1 + 0.25 * 0.9, 0.75 * 0.9 + 0.25 * 0.1))
    op4 = random_operator(4, 3)
    iv = response_interval(np.full(4, 0.25), op4)
    assert iv.lo == pytest.approx(iv.hi) and iv.lo == pytest.approx(np.trace(op4.matrix).real / 4)


def test_interval_dimension_mismatch():
    with pytest.raises(ValueError):
        response_interval((0.5, 0.5), random_operator(3, 0))


def test_uniform_spectrum_samples_degenerate():
    op = random_operator(5, 1)
    values = sample_responses(np.full(5, 0.2), op, 200, SeededRng(0))
    assert np.max(np.abs(values - np.trace(op.matrix).real / 5)) < 1e-12


def test_samples_inside_interval():
    op = random_operator(8, 2)
    lam = CoherenceSpectrum.normalized(np.arange(8, 0, -1) ** 2)
    iv = response_interval(lam, op)
    values = sample_responses(lam, op, 10_000, SeededRng(5))
    assert np.all(values >= iv.lo - 1e-9) and np.all(values <= iv.hi + 1e-9)


def test_two_mode_samples_fill_interval():
    # for n = 2 the orbit response is uniform on the interval
    op = random_operator(2, 6)
    iv = response_interval((0.8, 0.2), op)
    values = sample_responses((0.8, 0.2), op, 20_000, SeededRng(1))
    assert values.min() - iv.lo < 0.01 * iv.width
    assert iv.hi - values.max() < 0.01 * iv.width
    assert np.mean(values) == pytest.approx((iv.lo + iv.hi) / 2, abs=0.01 * iv.width)


def test_endpoints_attained_by_alignment():
    op = random_operator(6, 4)
    lam = CoherenceSpectrum.normalized([5, 3, 2, 1, 1, 0.5])
    iv = response_interval(lam, op)
    u_lo, u_hi = alignment_unitaries(op)
    assert abs(orbit_response(lam, op, u_lo) - iv.lo) < 1e-12
    assert abs(orbit_response(lam, op, u_hi) - iv.hi) < 1e-12


def test_operator_from_isotropic_unitary_readout():
    n = 8
    u = haar_unitary(n, 3)
    from scatterlab.tm import ObservedTM

    tm = ObservedTM(matrix=u, input_basis="canonical", frames_used=0, blank=np.ones(n))
    op = operator_from_tm(tm, np.ones(n))
    assert np.allclose(op.matrix, np.eye(n), atol=1e-12)
    iv = response_interval(CoherenceSpectrum.normalized(np.arange(1, n + 1)), op)
    assert iv.width < 1e-12


def test_single_channel_readout_is_rank_one(measured_tm):
    mask = np.zeros(256)
    mask[17] = 1
    op = operator_from_tm(measured_tm, mask)
    assert np.sum(op.eigenvalues > 1e-10) == 1
    iv = response_interval(np.eye(16)[0], op)
    assert iv.lo == pytest.approx(0, abs=1e-12) and iv.hi == pytest.approx(1)


def test_measured_operator_hermitian_and_normalized(measured_tm):
    for mask in readout_masks(256, 4):
        op = operator_from_tm(measured_tm, mask)
        assert np.max(np.abs(op.matrix - op.matrix.conj().T)) < 1e-10
        assert op.eigenvalues[-1] == pytest.approx(1)
        assert op.eigenvalues[0] > -1e-12


def test_measured_operator_matches_ground_truth():
    bench = ScatteringBench.create(16, 256, seed=13)
    tm = measure_tm(bench)
    mask = readout_masks(256, 4)[2]
    t = bench.signal_medium
    a = t.conj().T @ (mask[:, None] * t)
    a /= np.linalg.eigvalsh(a)[-1]
    assert np.allclose(operator_from_tm(tm, mask).matrix, a, atol=1e-12)


def test_operator_errors(measured_tm):
    with pytest.raises(ValueError):
        operator_from_tm(measured_tm, np.zeros(256))
    with pytest.raises(ValueError):
        operator_from_tm(measured_tm, np.ones(10))
    with pytest.raises(ValueError):
        operator_from_tm(measure_tm(ScatteringBench.create(32, 64, seed=0)), np.ones(64))


def test_weighted_reconstruction(measured_tm):
    mask = readout_masks(256, 4)[1]
    op = operator_from_tm(measured_tm, mask)
    v = haar_unitary(16, 8)
    lam = CoherenceSpectrum.normalized(np.arange(16, 0, -1))
    got = weighted_reconstruction_response(lam, v, measured_tm, mask)
    assert got == pytest.approx(orbit_response(lam, op, v), abs=1e-10)
    pure = np.eye(16)[0]
    first = v[:, :1]
    assert weighted_reconstruction_response(pure, v, measured_tm, mask) == pytest.approx(
        float((first.conj().T @ op.matrix @ first).real[0, 0]), abs=1e-12
    )
    uniform = weighted_reconstruction_response(np.full(16, 1 / 16), v, measured_tm, mask)
    assert uniform == pytest.approx(np.trace(op.matrix).real / 16, abs=1e-12)
    with pytest.raises(ValueError):
        weighted_reconstruction_response(lam, v * 1.01, measured_tm, mask)


def test_textbook_pair_overlap_depends_on_operator():
    lam, mu = CoherenceSpectrum(BENCHMARK_INCOMPARABLE[0][0]), CoherenceSpectrum(BENCHMARK_INCOMPARABLE[0][1])
    # equally spaced eigenvalues give identical intervals for this pair
    even = TransportOperator.from_eigenvalues([0.9, 0.5, 0.1])
    assert interval_relation(exact_interval(lam, even.eigenvalues), exact_interval(mu, even.eigenvalues)) in (
        "equal",
        "first-inside",
        "second-inside",
    )
    uneven = TransportOperator.from_eigenvalues([0.9, 0.2, 0.1])
    a, b = response_interval(lam, uneven), response_interval(mu, uneven)
    assert (a.lo, a.hi) == pytest.approx((0.28, 0.60))
    assert (b.lo, b.hi) == pytest.approx((0.22, 0.54))
    report = nesting_experiment([(lam, mu)], [uneven])
    assert report.rows[0].relation == "partial-overlap"
    assert report.verdicts == ["partial-overlap-witnessed"]


def test_identical_spectra_identical_intervals():
    op = random_operator(4, 9)
    lam = CoherenceSpectrum.normalized([4, 3, 2, 1])
    report = nesting_experiment([(lam, lam)], [op])
    assert report.rows[0].relation == "equal"
    assert report.verdicts == ["nested-for-all-operators"]


def test_nesting_brute_force_small_n():
    """Comparable pairs at n <= 6: closed-form nesting agrees with Haar sampling."""
    for k in range(12):
        n = 2 + k % 5
        less, more = comparable_pair(n, SeededRng(k, "bf"))
        op = random_operator(n, 100 + k)
        outer = response_interval(more, op)
        samples = sample_responses(less, op, 3000, SeededRng(k, "haar"))
        assert np.all(samples >= outer.lo - 1e-9) and np.all(samples <= outer.hi + 1e-9)
        assert nesting_experiment([(less, more)], [op]).verdicts == ["nested-for-all-operators"]


def test_comparable_pairs_are_exact():
    for k in range(50):
        less, more = comparable_pair(16, SeededRng(k))
        assert sum(Fraction(x) for x in less.values) == 1
        assert majorization_compare(less, more, tol=0) in (Majorization.LESS, Majorization.EQUAL)


def test_interval_relation_cases():
    f = Fraction
    assert interval_relation((f(1), f(2)), (f(0), f(3))) == "first-inside"
    assert interval_relation((f(0), f(3)), (f(1), f(2))) == "second-inside"
    assert interval_relation((f(0), f(2)), (f(1), f(3))) == "partial-overlap"
    assert interval_relation((f(0), f(1)), (f(2), f(3))) == "disjoint"


def test_benchmark_pairs_incomparable():
    for a, b in benchmark_pairs(16):
        assert a.n == 16
        assert majorization_compare(a, b) is Majorization.INCOMPARABLE
