import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import aslinearoperator

from conftest import principal_sines
from rsvd_lab import bounds as bd
from rsvd_lab.densela import exact_svd, gaussian_matrix, qr_factor, singular_values
from rsvd_lab.exceptions import DimensionError, RankCollapseError, RowRankError
from rsvd_lab.sketch import (
    SketchConfig,
    basic_randomized,
    improved_small_k,
    power_method,
    randomized_power_method,
    randomized_subspace_iteration,
    stabilized_power_basis,
    subspace_iteration,
    subspace_iteration_path,
)
from rsvd_lab.testmat import DecaySpec, decay_matrix, log_kernel_discs


def _orthonormal(x, tol=1e-12):
    return np.max(np.abs(x.T @ x - np.eye(x.shape[1]))) <= tol


# ---------------------------------------------------------------------------
# config


def test_config_validation():
    with pytest.raises(ValueError):
        SketchConfig(k=0, ell=3)
    with pytest.raises(ValueError):
        SketchConfig(k=4, ell=3)
    with pytest.raises(ValueError):
        SketchConfig(k=2, ell=4, p=3)
    with pytest.raises(ValueError):
        SketchConfig(k=2, ell=4, reorth_period=0)
    with pytest.raises(ValueError):
        SketchConfig(k=2, ell=4, delta=1.0)
    assert SketchConfig(k=2, ell=30, delta=1e-16).p_split == 16
    assert SketchConfig(k=2, ell=5, delta=1e-16).p_split == 3
    with pytest.raises(DimensionError):
        randomized_subspace_iteration(np.eye(5), SketchConfig(k=2, ell=5))


# ---------------------------------------------------------------------------
# stabilized_power_basis


def test_basis_q0_matches_qr(rng):
    a, om = rng.standard_normal((30, 20)), rng.standard_normal((20, 5))
    f = stabilized_power_basis(a, om, 0)
    assert principal_sines(f.q, qr_factor(a @ om).q) <= 1e-12
    assert f.collapse_step is None


def test_basis_full_space():
    f = stabilized_power_basis(np.diag([2.0, 1.0]), np.eye(2), 3)
    assert f.q.shape == (2, 2) and _orthonormal(f.q)


@pytest.mark.parametrize("period", [1, 2, 3])
def test_basis_matches_explicit_product(rng, period):
    a, om = rng.standard_normal((30, 20)), rng.standard_normal((20, 5))
    y = a @ a.T @ a @ a.T @ a @ om
    f = stabilized_power_basis(a, om, 2, reorth_period=period)
    assert _orthonormal(f.q)
    assert principal_sines(f.q, np.linalg.qr(y)[0]) <= 1e-8


def test_basis_rank_collapse_reported_and_strict(rng):
    a = np.zeros((10, 8))
    a[:2, :2] = np.eye(2)
    om = rng.standard_normal((8, 4))
    f = stabilized_power_basis(a, om, 1)
    assert f.collapse_step == 0
    with pytest.raises(RankCollapseError) as err:
        stabilized_power_basis(a, om, 1, strict=True)
    assert err.value.step == 0


def test_basis_linear_operator(rng):
    a, om = rng.standard_normal((25, 15)), rng.standard_normal((15, 4))
    dense = stabilized_power_basis(a, om, 2)
    op = stabilized_power_basis(aslinearoperator(a), om, 2)
    assert principal_sines(dense.q, op.q) <= 1e-12


# ---------------------------------------------------------------------------
# basic_randomized


def test_basic_identity():
    ap = basic_randomized(np.eye(12), 3, 6, seed=4)
    assert np.allclose(ap.sigma_hat, 1.0, atol=1e-14)
    assert np.linalg.norm(np.eye(12) - ap.to_dense(), 2) == pytest.approx(1.0, abs=1e-12)
    assert ap.matvec_count == 12


def test_basic_exact_capture(rng):
    a = rng.standard_normal((40, 4)) @ rng.standard_normal((4, 30))
    ap = basic_randomized(a, 4, 8, seed=1)
    assert np.linalg.norm(a - ap.to_dense()) <= 1e-10 * np.linalg.norm(a)


def test_basic_equals_q0_iteration(rng):
    a = rng.standard_normal((30, 20))
    b = basic_randomized(a, 3, 7, seed=9)
    r = randomized_subspace_iteration(a, SketchConfig(k=3, ell=7, q=0, seed=9))
    assert np.array_equal(b.sigma_hat, r.sigma_hat)


def test_basic_log_kernel_hmt():
    a = log_kernel_discs(200)
    sig = exact_svd(a).sigma
    spec = bd.SpectrumView(sig, 200, 200)
    k, ell = 10, 20
    bound = bd.hmt_bound(spec, k, ell - k)
    ap = basic_randomized(a, k, ell, seed=0)
    assert singular_values(a - ap.to_dense())[0] <= bound


def test_basic_argument_checks():
    with pytest.raises(ValueError):
        basic_randomized(np.eye(6), 3, 3, 0)
    with pytest.raises(ValueError):
        basic_randomized(np.eye(6), 3, 6, 0)


# ---------------------------------------------------------------------------
# subspace_iteration


def test_iteration_exact_subspace(rng):
    a = rng.standard_normal((30, 20))
    f = exact_svd(a)
    for q in (0, 2):
        ap = subspace_iteration(a, f.v[:, :6], SketchConfig(k=4, ell=6, q=q))
        assert np.allclose(ap.sigma_hat, f.sigma[:4], rtol=1e-10)


def test_iteration_slow_start_orthogonal_omega(rng):
    a = decay_matrix(DecaySpec("exponential", 30, rate=0.5), 3)
    k, ell = 3, 5
    omega = a.v[:, k : k + ell]
    ap = subspace_iteration(a.matrix, omega, SketchConfig(k=k, ell=ell, q=0))
    # only the tail is visible: sigma_hat equals sigma_{k+1}, ..., sigma_{2k}
    assert np.allclose(ap.sigma_hat, a.true_sigma[k : 2 * k], rtol=1e-10)
    assert ap.sigma_hat[k - 1] < a.true_sigma[k - 1]


def test_iteration_det_bound_holds(rng):
    a = rng.standard_normal((40, 30))
    sig = exact_svd(a).sigma
    spec = bd.SpectrumView(sig, 40, 30)
    cfg = SketchConfig(k=4, ell=8, q=3, p=2)
    ap = subspace_iteration(a, rng.standard_normal((30, 8)), cfg, diagnostics=True)
    sp = ap.omega_split
    assert sp.full_row_rank
    for j in range(1, 5):
        lo = bd.det_sv_lower(spec, j, 8, 2, 3, sp.omega2_norm, sp.omega1_pinv_norm)
        assert ap.sigma_hat[j - 1] >= lo * (1 - 1e-10)


def test_iteration_invariants(rng):
    a = rng.standard_normal((50, 35))
    sig = singular_values(a)
    cfg = SketchConfig(k=5, ell=9, q=1, seed=3)
    ap = randomized_subspace_iteration(a, cfg)
    assert _orthonormal(ap.q_basis) and _orthonormal(ap.core_u) and _orthonormal(ap.v_hat)
    assert np.all(np.diff(ap.sigma_hat) <= 0)
    assert np.all(ap.sigma_hat <= sig[:5] + 1e-12)
    assert np.linalg.matrix_rank(ap.to_dense()) <= 5
    assert ap.matvec_count == (2 * 1 + 2) * 9


def test_iteration_wide_input(rng):
    a = rng.standard_normal((20, 45))
    ap = randomized_subspace_iteration(a, SketchConfig(k=3, ell=8, q=2))
    assert ap.transposed
    assert ap.left.shape == (20, 3) and ap.right.shape == (45, 3)
    assert np.allclose(ap.sigma_hat, singular_values(a)[:3], rtol=1e-2)
    assert np.linalg.norm(ap.left.T @ a @ ap.right - np.diag(ap.sigma_hat)) <= 1e-10 * ap.sigma_hat[0]


def test_iteration_row_rank_strict(rng):
    a = rng.standard_normal((20, 12))
    v = exact_svd(a).v
    omega = v[:, 4:8]  # V^T Omega has a zero leading block
    cfg = SketchConfig(k=2, ell=4, q=0, p=0)
    ap = subspace_iteration(a, omega, cfg, diagnostics=True)
    assert not ap.omega_split.full_row_rank
    assert math.isinf(ap.omega_split.omega1_pinv_norm)
    with pytest.raises(RowRankError):
        subspace_iteration(a, omega, cfg, diagnostics=True, strict=True)


def test_iteration_determinism():
    a = gaussian_matrix(40, 30, 1)
    cfg = SketchConfig(k=4, ell=8, q=2, seed=77)
    r1 = randomized_subspace_iteration(a, cfg)
    r2 = randomized_subspace_iteration(a, cfg)
    assert np.array_equal(r1.sigma_hat, r2.sigma_hat)
    assert np.array_equal(r1.q_basis, r2.q_basis)


def test_iteration_identity_any_seed():
    for seed in range(5):
        ap = randomized_subspace_iteration(np.eye(15), SketchConfig(k=3, ell=6, q=1, seed=seed))
        assert np.allclose(ap.sigma_hat, 1.0, atol=1e-14)


def test_iteration_average_bound_monte_carlo():
    n, k, ell, q = 24, 3, 8, 1
    a = np.diag(2.0 ** -np.arange(n))
    spec = bd.SpectrumView(np.diag(a), n, n)
    p = 2
    lows = [bd.avg_sv_lower(spec, j, k, ell, p, q) for j in range(1, k + 1)]
    hits = 0
    for seed in range(200):
        ap = randomized_subspace_iteration(a, SketchConfig(k=k, ell=ell, q=q, seed=seed))
        hits += all(ap.sigma_hat[j] >= lows[j] for j in range(k))
    assert hits >= 180


def test_path_is_bit_identical(rng):
    a = rng.standard_normal((30, 25))
    om = rng.standard_normal((25, 6))
    for q, ap in subspace_iteration_path(a, om, 3, 4):
        ref = subspace_iteration(a, om, SketchConfig(k=3, ell=6, q=q))
        assert np.array_equal(ap.sigma_hat, ref.sigma_hat)
        assert ap.matvec_count == ref.matvec_count


def test_truncation_dominance_and_pythagoras(rng):
    a = rng.standard_normal((30, 20))
    ap = randomized_subspace_iteration(a, SketchConfig(k=3, ell=6))
    qb = ap.q_basis
    proj = a - qb @ (qb.T @ a)
    for _ in range(20):
        b = rng.standard_normal((6, 20))
        r = a - qb @ b
        assert np.linalg.norm(proj) <= np.linalg.norm(r) + 1e-12
        assert np.linalg.norm(proj, 2) <= np.linalg.norm(r, 2) + 1e-12
        lhs = np.linalg.norm(r) ** 2
        rhs = np.linalg.norm(proj) ** 2 + np.linalg.norm(qb.T @ a - b) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_restricted_optimality(rng):
    a = rng.standard_normal((30, 20))
    ap = randomized_subspace_iteration(a, SketchConfig(k=3, ell=6, q=1))
    best = np.linalg.norm(a - ap.to_dense())
    for _ in range(100):
        b = rng.standard_normal((6, 3)) @ rng.standard_normal((3, 20))
        assert best <= np.linalg.norm(a - ap.q_basis @ b) + 1e-12


def test_chain_and_reverse_ey(rng):
    a = rng.standard_normal((30, 20))
    sig = singular_values(a)
    k = 4
    ap = randomized_subspace_iteration(a, SketchConfig(k=k, ell=8, q=1))
    f = exact_svd(a)
    ak = (f.u[:, :k] * sig[:k]) @ f.v[:, :k].T
    qb = ap.q_basis
    e_opt = np.linalg.norm(a - ak)
    e_run = np.linalg.norm(a - ap.to_dense())
    e_chain = np.linalg.norm(a - qb @ (qb.T @ ak))
    assert e_opt <= e_run + 1e-12 <= e_chain + 2e-12
    eta = math.sqrt(max(0.0, e_run**2 - np.sum(sig[k:] ** 2)))
    r = bd.reverse_ey(eta, bd.SpectrumView(sig, 30, 20), k)
    assert np.linalg.norm(a - ap.to_dense(), 2) <= r["two_upper"] + 1e-10
    assert np.linalg.norm(sig[:k] - ap.sigma_hat) <= eta + 1e-10


# ---------------------------------------------------------------------------
# power methods


def test_power_method_hand_cases():
    a = np.diag([2.0, 1.0])
    assert power_method(a, [1.0, 0.0], 0).norm_estimate == 2.0
    for q in range(5):
        assert power_method(a, [0.0, 1.0], q).norm_estimate == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        power_method(a, [0.0, 0.0], 1)


def test_power_method_converges(rng):
    # uniform entries give a dominant sigma_1; a Gaussian square matrix has
    # sigma_2 / sigma_1 close to 1 and needs far more than 20 steps
    a = rng.random((50, 50))
    s1 = singular_values(a)[0]
    est = power_method(a, rng.standard_normal(50), 20)
    assert est.norm_estimate == pytest.approx(s1, rel=1e-6)
    assert est.norm_estimate <= s1 + 1e-12
    assert est.matvec_count == 42


def test_randomized_power_trivial(rng):
    assert randomized_power_method(np.eye(7), 3, 11).norm_estimate == pytest.approx(1.0, abs=1e-15)
    u, v = rng.standard_normal(20), rng.standard_normal(15)
    a = 3.0 * np.outer(u, v)
    assert randomized_power_method(a, 0, 2).norm_estimate == pytest.approx(
        3.0 * np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12
    )


def test_randomized_power_gap_monte_carlo():
    n = 100
    sig = np.concatenate([[1.0, 0.9], 0.9 * 0.95 ** np.arange(1, n - 1)])
    a = np.diag(sig)
    q = math.ceil((math.log(1e-3) / math.log(0.9) - 1) / 2)
    good = sum(randomized_power_method(a, q, s).norm_estimate >= 0.999 for s in range(200))
    assert good >= 190


# ---------------------------------------------------------------------------
# improved_small_k


def test_small_k_identity():
    ap = improved_small_k(np.eye(20), 1, 5, 1, 2, seed=0)
    assert ap.sigma_hat[0] == pytest.approx(1.0, abs=1e-14)


def test_small_k_alignment():
    dm = decay_matrix(DecaySpec("exponential", 60, rate=0.7), 0)
    v1 = dm.v[:, 0]
    better = 0
    for seed in range(200):
        st1 = basic_randomized(dm.matrix, 1, 5, seed)
        g = gaussian_matrix(60, 1, seed + 10_000)[:, 0]
        better += abs(st1.right[:, 0] @ v1) > abs(g @ v1) / np.linalg.norm(g)
    assert better >= 180


def test_small_k_matvecs_cover_both_stages():
    a = gaussian_matrix(30, 30, 0)
    ap = improved_small_k(a, 1, 5, 2, 3, seed=1)
    assert ap.matvec_count == 2 * 5 + (2 * 3 + 2) * 2
    with pytest.raises(ValueError):
        improved_small_k(a, 2, 3, 3, 1, 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 3), st.integers(1, 4), st.integers(0, 4))
def test_sketch_properties(seed, q, k, extra):
    a = gaussian_matrix(24, 16, seed % 1000)
    ell = k + extra
    ap = randomized_subspace_iteration(a, SketchConfig(k=k, ell=ell, q=q, seed=seed))
    sig = singular_values(a)
    assert np.all(ap.sigma_hat <= sig[:k] + 1e-12)
    assert _orthonormal(ap.q_basis)
    assert ap.matvec_count == (2 * q + 2) * ell
