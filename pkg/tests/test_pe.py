import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from qpufsim import Basis, ContractError, PeQpuf, PeToken, PureState, RngStream, SinsKernel, UnitaryMatrix
from qpufsim import pe, random_pure_state
from qpufsim.bounds import lemma1_lower, lemma2_upper
from qpufsim.errors import ScaleError
from qpufsim.linalg import haar_unitary, phase_aligned_diff

seeds = st.integers(min_value=0, max_value=2**63 - 1)


def mp_sins(x, d):
    mpmath.mp.dps = 40
    x = mpmath.mpf(x)
    den = d * mpmath.sin(mpmath.pi * x / d)
    if abs(den) < mpmath.mpf(10) ** -30:
        return float(mpmath.limit(lambda t: mpmath.sin(mpmath.pi * t) / (d * mpmath.sin(mpmath.pi * t / d)), x))
    return float(mpmath.sin(mpmath.pi * x) / den)


# -- kernel -------------------------------------------------------------------------------

def test_sins_basic_values():
    assert pe.sins(0.0, 16) == 1.0
    assert abs(pe.sins(3.0, 16)) < 1e-15
    assert pe.sins(0.5, 128) >= 2 / np.pi
    assert SinsKernel(16)(0.0) == 1.0


@pytest.mark.parametrize("d", [2, 3, 8, 9])
def test_sins_singular_limits(d):
    assert pe.sins(float(d), d) == pytest.approx(mp_sins(d, d), abs=1e-12)
    assert pe.sins(float(-d), d) == pytest.approx(mp_sins(-d, d), abs=1e-12)
    assert pe.sins(2.0 * d, d) == 1.0


@given(st.floats(-300, 300, allow_nan=False), st.sampled_from([2, 5, 16, 128]))
def test_sins_matches_high_precision(x, d):
    assert abs(pe.sins(x, d) - mp_sins(x, d)) <= 1e-9


@given(st.floats(-200, 200, allow_nan=False), st.sampled_from([4, 16, 64]))
def test_sins_period_and_parity(x, d):
    assert abs(pe.sins(x + 2 * d, d) - pe.sins(x, d)) <= 1e-9
    assert abs(pe.sins(-x, d) - pe.sins(x, d)) <= 1e-12


def test_sins_dominates_sinc():
    # |sin(pi x / d)| <= pi |x| / d on (0, d)
    x = np.linspace(1e-6, 128 - 1e-6, 10_000)
    assert np.all(np.abs(pe.sins(x, 128)) >= np.abs(np.sinc(x)) - 1e-15)


def test_sins_squared_sums_to_one():
    # sum over a full period of outcomes is 1 for any phase
    for phi in (0.0, 0.3, 7.5, 12.999):
        assert abs(np.sum(pe.sins(phi - np.arange(16), 16) ** 2) - 1) < 1e-12


# -- Kraus / POVM ---------------------------------------------------------------------------

def test_kraus_integer_phase_is_delta():
    q = PeQpuf.from_phases([5.0, 2.0], 8, 1)
    for k in range(8):
        assert np.allclose(pe.kraus_diag(q, k), [k == 5, k == 2], atol=1e-15)


@given(seeds)
def test_povm_complete(seed):
    rng = RngStream(seed).generator()
    q = PeQpuf.from_phases(rng.uniform(0, 16, 4), 16, 2)
    assert np.max(np.abs(np.sum(np.abs(pe.kraus_table(q)) ** 2, axis=0) - 1)) <= 1e-9
    assert np.allclose(pe.povm_table(q), np.abs(pe.kraus_table(q)) ** 2)


def test_kraus_rejects_bad_outcome():
    q = PeQpuf.from_phases([0.0], 8, 1)
    with pytest.raises(ContractError):
        pe.kraus_diag(q, 8)


def test_delta_range_enforced():
    with pytest.raises(ContractError):
        PeQpuf.from_phases([0.0], 8, 5)


# -- outcome distribution ------------------------------------------------------------------------

def test_integer_phase_eigenvector_is_exact(rng):
    q = PeQpuf.from_phases([1.0, 5.0, 9.0], 16, 1)
    psi = PureState.basis_state(3, 1, Basis.EIGEN)
    p = pe.outcome_distribution(q, psi)
    assert p[5] == pytest.approx(1, abs=1e-12) and np.sum(np.delete(p, 5)) < 1e-12
    k, post = pe.measure(q, psi, rng)
    assert k == 5 and phase_aligned_diff(post.amplitudes, psi.amplitudes) < 1e-12


def test_half_phase_splits_evenly():
    q = PeQpuf.from_phases([0.5], 2, 0)
    p = pe.outcome_distribution(q, PureState.basis_state(1, 0, Basis.EIGEN))
    assert np.allclose(p, [0.5, 0.5], atol=1e-15)


def test_fast_path_matches_circuit_small(rng):
    for _ in range(5):
        u = haar_unitary(4, rng)
        q = PeQpuf.from_unitary(u, 16, 2)
        psi = random_pure_state(4, rng)
        fast = pe.outcome_distribution(q, q.eigensystem.to_eigenbasis(psi))
        slow = np.sum(np.abs(pe.full_circuit_state(u, 16, psi)) ** 2, axis=1)
        assert 0.5 * np.sum(np.abs(fast - slow)) <= 1e-9


def test_measure_requires_eigenbasis(rng):
    q = PeQpuf.sample(8, 3, 1, rng)
    with pytest.raises(ContractError):
        pe.outcome_distribution(q, random_pure_state(3, rng))
    with pytest.raises(ContractError):
        pe.outcome_distribution(q, random_pure_state(4, rng, Basis.EIGEN))


def test_integer_phase_measurement_is_idempotent(rng):
    q = PeQpuf.from_phases([3.0, 3.0, 6.0], 8, 1)
    psi = random_pure_state(3, rng, Basis.EIGEN)
    k, once = pe.measure(q, psi, rng)
    twice = pe.kraus_diag(q, k) * once.amplitudes
    twice /= np.linalg.norm(twice)
    assert abs(np.vdot(once.amplitudes, twice)) ** 2 >= 1 - 1e-9


def test_sequential_outcomes_are_exchange_symmetric(rng):
    q = PeQpuf.sample(8, 4, 1, rng)
    psi = random_pure_state(4, rng, Basis.EIGEN)
    c2 = np.abs(psi.amplitudes) ** 2
    joint = np.zeros((8, 8))
    for k0 in range(8):
        post = pe.kraus_diag(q, k0) * psi.amplitudes
        joint[k0] = pe.povm_table(q) @ np.abs(post) ** 2
    assert np.max(np.abs(joint - joint.T)) <= 1e-9
    assert abs(joint.sum() - c2.sum()) <= 1e-12


def test_measure_frequencies(rng):
    q = PeQpuf.sample(16, 4, 2, rng)
    psi = random_pure_state(4, rng, Basis.EIGEN)
    p = pe.outcome_distribution(q, psi)
    n = 20_000
    counts = np.bincount([pe.measure(q, psi, rng)[0] for _ in range(n)], minlength=16)
    keep = p * n >= 5
    expected = np.append(p[keep] * n, p[~keep].sum() * n)
    observed = np.append(counts[keep], counts[~keep].sum())
    if expected[-1] == 0:
        expected, observed = expected[:-1], observed[:-1]
    assert stats.chisquare(observed, expected * observed.sum() / expected.sum()).pvalue > 1e-3


# -- windows ---------------------------------------------------------------------------------------

def test_full_window_has_weight_one(rng):
    q = PeQpuf.sample(9, 3, 4, rng)
    psi = random_pure_state(3, rng, Basis.EIGEN)
    assert pe.window_weight(q, 2, psi) == pytest.approx(1, abs=1e-12)
    assert len(pe.window_labels(2, 4, 9)) == 9


def test_window_labels_do_not_double_count():
    assert list(pe.window_labels(0, 4, 8)) == list(range(8))
    assert list(pe.window_labels(0, 1, 8)) == [0, 1, 7]


def test_integer_phase_window_weight():
    q = PeQpuf.from_phases([7.0], 32, 3)
    assert pe.window_weight(q, 7, PureState.basis_state(1, 0, Basis.EIGEN)) == pytest.approx(1, abs=1e-12)


def test_half_offset_window_weight():
    q = PeQpuf.from_phases([0.5], 128, 5)
    w = pe.window_weight(q, 0, PureState.basis_state(1, 0, Basis.EIGEN))
    assert 1 - 2 / (np.pi**2 * 5.5) <= w <= 1


def test_projector_weight_extremes():
    q = PeQpuf.from_phases([10.0, 11.5, 12.0], 64, 3)
    psi = PureState.normalized([1, 1, 1], Basis.EIGEN)
    assert pe.window_projector_weight(q, 11, psi) == pytest.approx(1)
    assert pe.window_projector_weight(q, 40, psi) == 0


def test_window_weight_tracks_projector(rng):
    # eigenvectors deep inside the window contribute at least 1 - L1(b), those far
    # outside at most L2(c); only the band in between is unconstrained
    d, delta, b, c = 128, 16, 2, 3
    for _ in range(20):
        q = PeQpuf.sample(d, 8, delta, rng)
        psi = random_pure_state(8, rng, Basis.EIGEN)
        m = int(rng.integers(d))
        c2 = np.abs(psi.amplitudes) ** 2
        dist = pe.circular_distance(q.phases, m, d)
        band = np.sum(c2[(dist > delta - b) & (dist < delta + c)])
        diff = abs(pe.window_weight(q, m, psi) - pe.window_projector_weight(q, m, psi))
        assert diff <= (1 - lemma1_lower(b)) + lemma2_upper(c) + band + 1e-12


def test_tilde_step_shape():
    x = np.linspace(-64, 64, 4001)
    w = pe.tilde_step(x, 128, 5)
    assert np.all((w >= -1e-15) & (w <= 1 + 1e-12))
    assert w[np.abs(x) <= 4].min() > 0.93
    assert w[np.abs(x) >= 7].max() < 0.05


# -- generation and verification -----------------------------------------------------------------

def test_generate_integer_phase_token(rng):
    q = PeQpuf.from_phases([5.0, 9.0], 16, 2)
    tok = pe.generate(q, PureState.basis_state(2, 0, Basis.EIGEN), rng)
    assert tok.verifier_value == 5
    assert phase_aligned_diff(tok.state_eig.amplitudes, [1, 0]) < 1e-12


def test_token_must_be_in_eigenbasis():
    with pytest.raises(ContractError):
        PeToken(0, PureState.basis_state(2, 0))


def test_remeasured_token_follows_its_distribution(rng):
    q = PeQpuf.sample(32, 4, 2, rng)
    tok = pe.generate(q, random_pure_state(4, rng, Basis.EIGEN), rng)
    p = pe.outcome_distribution(q, tok.state_eig)
    n = 10_000
    counts = np.bincount([pe.measure(q, tok.state_eig, rng)[0] for _ in range(n)], minlength=32)
    sigma = np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(counts / n - p) <= 4 * sigma + 2 / n)
    # mass concentrates around the issued value
    assert p[pe.window_labels(tok.verifier_value, 2, 32)].sum() > 0.5


def test_first_outcome_is_uniform_over_labels():
    d = 64
    m0 = []
    for t in range(1000):
        rng = RngStream(99, t).generator()
        q = PeQpuf.sample(d, 64, 0, rng)
        m0.append(pe.generate(q, q.eigensystem.to_eigenbasis(random_pure_state(64, rng)), rng).verifier_value)
    counts = np.bincount(m0, minlength=d)
    assert stats.chisquare(counts).pvalue > 0.01


def test_integer_phase_tokens_always_verify(rng):
    q = PeQpuf.from_phases([3.0, 8.0, 12.0], 16, 0)
    tok = pe.generate(q, random_pure_state(3, rng, Basis.EIGEN), rng)
    for _ in range(20):
        res = pe.verify(q, tok, rng)
        assert res.passed and res.measured_outcome == tok.verifier_value
        tok = res.refreshed_token


def test_full_window_always_verifies(rng):
    q = PeQpuf.sample(9, 4, 4, rng)
    tok = pe.generate(q, random_pure_state(4, rng, Basis.EIGEN), rng)
    for _ in range(100):
        res = pe.verify(q, tok, rng)
        assert res.passed
        tok = res.refreshed_token


def test_failed_verification_ends_chain():
    # phase halfway between labels with delta 0 fails about half the time
    q = PeQpuf.from_phases([0.5], 64, 0)
    rng = RngStream(4).generator()
    tok = pe.generate(q, PureState.basis_state(1, 0, Basis.EIGEN), rng)
    results = [pe.verify(q, tok, rng) for _ in range(200)]
    fails = [r for r in results if not r.passed]
    assert fails and all(r.refreshed_token is None for r in fails)
    assert all(isinstance(r.refreshed_token, PeToken) for r in results if r.passed)


# -- circular arithmetic ---------------------------------------------------------------------------

@pytest.mark.parametrize("a,b,d,expected", [(0, 0, 8, 0), (1, 7, 8, 2), (3, 100, 128, 31)])
def test_circular_distance(a, b, d, expected):
    assert pe.circular_distance(a, b, d) == expected


@given(st.integers(0, 999), st.integers(0, 999), st.integers(2, 300))
def test_circular_distance_properties(a, b, d):
    dist = pe.circular_distance(a, b, d)
    assert dist == pe.circular_distance(b, a, d)
    assert 0 <= dist <= d // 2
    s = pe.signed_circular_difference(a, b, d)
    assert -d / 2 < s <= d / 2 and (s - (a - b)) % d == 0 and abs(s) == dist


# -- explicit circuit --------------------------------------------------------------------------------

def test_circuit_identity(rng):
    out = pe.full_circuit_state(UnitaryMatrix.identity(3), 8, random_pure_state(3, rng))
    p = np.sum(np.abs(out) ** 2, axis=1)
    assert p[0] == pytest.approx(1, abs=1e-12)


def test_circuit_integer_phase(rng):
    u = UnitaryMatrix.diagonal([0.0, 2 * np.pi * 3 / 8])
    k, post = pe.full_circuit_measure(u, 8, PureState.basis_state(2, 1), rng)
    assert k == 3 and phase_aligned_diff(post.amplitudes, [0, 1]) < 1e-12


def test_circuit_matches_fast_path_d32(rng):
    u = haar_unitary(8, rng)
    q = PeQpuf.from_unitary(u, 32, 4)
    psi = random_pure_state(8, rng)
    fast = pe.outcome_distribution(q, q.eigensystem.to_eigenbasis(psi))
    slow = np.sum(np.abs(pe.full_circuit_state(u, 32, psi)) ** 2, axis=1)
    assert 0.5 * np.sum(np.abs(fast - slow)) <= 1e-9


def test_circuit_scale_guard():
    with pytest.raises(ScaleError):
        pe.full_circuit_kraus(UnitaryMatrix.identity(65), 64)
    with pytest.raises(ContractError):
        pe.full_circuit_kraus(UnitaryMatrix.identity(2), 1)


def test_fourier_is_unitary():
    f = pe.fourier_matrix(12)
    assert np.max(np.abs(f.conj().T @ f - np.eye(12))) < 1e-12


@pytest.mark.parametrize("d,dim", list(itertools.product([4, 8], [1, 3])))
def test_circuit_kraus_are_the_diagonal_ones(d, dim):
    u = haar_unitary(dim, RngStream(d * 10 + dim).generator())
    q = PeQpuf.from_unitary(u, d, 1)
    v = q.eigensystem.eigenvectors
    ks = pe.full_circuit_kraus(u, d)
    for k in range(d):
        assert np.max(np.abs(ks[k] - (v * pe.kraus_diag(q, k)) @ v.conj().T)) < 1e-10
