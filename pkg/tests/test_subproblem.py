import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_feasible_beams, random_in_ball, random_instance
from trtc_beamforming import BeamformerSet, assemble_coefficients, reduce_to_subvector, softmin, softmin_weights
from trtc_beamforming.fp import transformed_rates, update_auxiliaries
from trtc_beamforming.subproblem import (
    ALPHA_FLOOR,
    CurvatureError,
    SubvectorCoefficients,
    ball_qp_objective,
    build_mm_surrogate,
    build_psi_oracle,
    mm_alpha,
    mm_linear,
    smoothed_per_cell,
    solve_ball_qp,
)


def setup(rng, G=2, K=2, N=3, noise=0.5):
    cfg, ch = random_instance(rng, G=G, K=K, N=N, noise=noise)
    beams = random_feasible_beams(rng, G, K, N)
    aux = update_auxiliaries(ch, random_feasible_beams(rng, G, K, N), cfg)
    return cfg, ch, beams, aux, assemble_coefficients(ch, aux, cfg)


def tiny_sub(u, b5, c5=None):
    u = np.asarray(u, dtype=complex)
    b5 = np.asarray(b5, dtype=complex)
    c5 = np.zeros(u.shape[:2]) if c5 is None else np.asarray(c5, dtype=float)
    return SubvectorCoefficients(u=u, b5=b5, c5=c5)


# -- exact reduction -------------------------------------------------------

def test_reduction_exact_per_unit(rng):
    cfg, ch, beams, aux, coeffs = setup(rng)
    for g in range(2):
        for n in range(3):
            sub = reduce_to_subvector(coeffs, beams, g, n)
            for _ in range(50):
                x = crandn(rng, 2)
                ref = transformed_rates(ch, beams.with_subvector(g, n, x), aux, cfg)
                np.testing.assert_allclose(sub.values(x), ref, rtol=1e-10, atol=1e-10)


def test_reduction_exact_for_whole_cell(rng):
    cfg, ch, beams, aux, coeffs = setup(rng, G=3, K=2, N=3)
    sub = reduce_to_subvector(coeffs, beams, 1, range(3))
    for _ in range(20):
        x = crandn(rng, 6)
        f = np.array(beams.f)
        f[1] = x.reshape(2, 3)
        np.testing.assert_allclose(sub.values(x), transformed_rates(ch, BeamformerSet(f), aux, cfg),
                                   rtol=1e-10, atol=1e-10)


def test_reduction_gradient_matches_finite_difference(rng):
    cfg, ch, beams, aux, coeffs = setup(rng)
    sub = reduce_to_subvector(coeffs, beams, 0, 1)
    x, d = crandn(rng, 2), crandn(rng, 2)
    h = 1e-6
    fd = (sub.values(x + h * d) - sub.values(x - h * d)) / (2 * h)
    np.testing.assert_allclose(fd, 2 * np.real(np.einsum("jkd,d->jk", sub.gradients(x).conj(), d)), rtol=1e-6)


def test_single_unit_has_no_frozen_terms(rng):
    cfg, ch, beams, aux, coeffs = setup(rng, N=1)
    sub = reduce_to_subvector(coeffs, beams, 1, 0)
    assert not np.any(sub.b3) and not np.any(sub.c3) and not np.any(sub.c4)
    np.testing.assert_allclose(sub.u, coeffs.w_vec[1])


def test_zero_frozen_entries(rng):
    cfg, ch, _, aux, coeffs = setup(rng)
    f = np.zeros((2, 2, 3), dtype=complex)
    f[0, :, 2] = crandn(rng, 2)
    f[1] = crandn(rng, 2, 3)
    sub = reduce_to_subvector(coeffs, BeamformerSet(f), 0, 2)
    assert not np.any(sub.b3) and not np.any(sub.c3)


def test_block_matrix_is_kron_of_rank_one(rng):
    cfg, ch, beams, aux, coeffs = setup(rng, K=3)
    sub = reduce_to_subvector(coeffs, beams, 0, 2)
    for j in range(2):
        for k in range(3):
            B = sub.dense_B(j, k)
            np.testing.assert_allclose(np.diag(B).real, sub.B2[j, k])
            assert np.max(np.linalg.eigvalsh(B)) == pytest.approx(sub.lam_max[j, k])
            x = crandn(rng, 3)
            np.testing.assert_allclose(sub.apply_B(x)[j, k], B @ x, rtol=1e-12)


# -- smoothing -------------------------------------------------------------

def test_softmin_equal_values():
    assert softmin([3.0, 3.0], 5.0) == pytest.approx(3.0 - np.log(2.0) / 5.0, rel=1e-15)


def test_softmin_hard_limit():
    assert abs(softmin([1.0, 2.0], 1e6) - 1.0) < 1e-5


def test_softmin_no_overflow():
    assert softmin([1e4, 2e4], 100.0) == pytest.approx(1e4)


def test_softmin_sandwich(rng):
    v = rng.standard_normal((10_000, 4)) * rng.uniform(0.01, 10, size=(10_000, 1))
    mu = rng.uniform(0.1, 100, size=(10_000, 1))
    s = np.array([softmin(row, m[0]) for row, m in zip(v, mu)])
    assert np.all(s <= v.min(axis=1))
    assert np.all(s >= v.min(axis=1) - np.log(4) / mu[:, 0])


def test_softmin_weights_uniform_on_ties():
    np.testing.assert_allclose(softmin_weights([2.0, 2.0, 2.0], 7.0), 1 / 3)
    np.testing.assert_allclose(softmin_weights([1.0, 5.0], 0.0), 0.5)


@settings(max_examples=50, deadline=None)
@given(v=st.lists(st.floats(-5, 5), min_size=2, max_size=6), mu=st.floats(0.1, 50))
def test_softmin_weights_are_gradient(v, mu):
    v = np.array(v)
    w = softmin_weights(v, mu)
    assert w.sum() == pytest.approx(1.0)
    h = 1e-7
    for i in range(len(v)):
        e = np.zeros_like(v)
        e[i] = h
        fd = (softmin(v + e, mu) - softmin(v - e, mu)) / (2 * h)
        assert fd == pytest.approx(w[i], abs=1e-6)


# -- MM surrogate ----------------------------------------------------------

def test_alpha_hand_example():
    # lam = 2, tc = 4*1 + 1 + 2*1*2 = 9, alpha = -2 - 2*1*9
    sub = tiny_sub([[[np.sqrt(2.0)]]], [[[1.0]]])
    alpha, tc = mm_alpha(sub, mu=1.0, P_t=1.0, return_tc=True)
    assert tc[0, 0] == pytest.approx(9.0)
    assert alpha[0] == pytest.approx(-20.0)


def test_alpha_floor():
    sub = tiny_sub(np.zeros((2, 2, 1)), np.zeros((2, 2, 2)))
    np.testing.assert_array_equal(mm_alpha(sub, 10.0, 1.0), ALPHA_FLOOR)


def test_linear_term_at_origin(rng):
    cfg, ch, beams, aux, coeffs = setup(rng)
    sub = reduce_to_subvector(coeffs, beams, 1, 0)
    w = softmin_weights(sub.values(np.zeros(2)), 20.0, axis=1)
    b6, c6 = mm_linear(sub, w, mm_alpha(sub, 20.0, 1.0), np.zeros(2), 20.0)
    np.testing.assert_allclose(b6, np.einsum("jk,jkd->jd", w, sub.b5))
    np.testing.assert_allclose(c6, smoothed_per_cell(sub, np.zeros(2), 20.0))


def _mm_case(rng, mu=20.0, P=1.0):
    cfg, ch, beams, aux, coeffs = setup(rng, noise=0.5)
    g, n = rng.integers(2), rng.integers(3)
    sub = reduce_to_subvector(coeffs, beams, g, n)
    x0 = random_in_ball(rng, 2, P)
    return sub, x0, build_mm_surrogate(sub, x0, mu, P)


def test_surrogate_touches_at_expansion_point(rng):
    for _ in range(10):
        sub, x0, sur = _mm_case(rng)
        np.testing.assert_allclose(sur.value_per_cell(x0), smoothed_per_cell(sub, x0, 20.0), rtol=1e-8, atol=1e-8)


def test_surrogate_gradient_matches(rng):
    for _ in range(10):
        sub, x0, sur = _mm_case(rng)
        d = crandn(rng, 2)
        h = 1e-6
        fd_true = (smoothed_per_cell(sub, x0 + h * d, 20.0) - smoothed_per_cell(sub, x0 - h * d, 20.0)) / (2 * h)
        fd_sur = (sur.value_per_cell(x0 + h * d) - sur.value_per_cell(x0 - h * d)) / (2 * h)
        np.testing.assert_allclose(fd_sur, fd_true, rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(2 * np.real(sur.b7.conj() @ d), fd_true, rtol=1e-5, atol=1e-7)


def test_surrogate_minorizes(rng):
    for _ in range(5):
        sub, x0, sur = _mm_case(rng)
        for _ in range(200):
            x = random_in_ball(rng, 2, 1.0)
            assert np.all(sur.value_per_cell(x) <= smoothed_per_cell(sub, x, 20.0) + 1e-8)


# -- ball QP ---------------------------------------------------------------

def test_ball_qp_zero_linear_term():
    np.testing.assert_array_equal(solve_ball_qp(-1.0, np.zeros(3), 1.0), 0.0)


def test_ball_qp_interior():
    x = solve_ball_qp(-2.0, [0.5, 0.0], 1.0)
    np.testing.assert_allclose(x, [0.25, 0.0])


def test_ball_qp_boundary():
    x = solve_ball_qp(-1.0, [2.0, 0.0], 1.0)
    np.testing.assert_allclose(x, [1.0, 0.0])


@pytest.mark.parametrize("abar", [0.0, 1.0])
def test_ball_qp_rejects_nonnegative_curvature(abar):
    with pytest.raises(CurvatureError):
        solve_ball_qp(abar, [1.0], 1.0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ball_qp_beats_feasible_points(seed):
    rng = np.random.default_rng(seed)
    abar = -rng.uniform(0.01, 10)
    b8 = crandn(rng, 3) * rng.uniform(0.01, 10)
    P = rng.uniform(0.1, 5)
    x = solve_ball_qp(abar, b8, P)
    assert np.vdot(x, x).real <= P * (1 + 1e-12)
    best = ball_qp_objective(abar, b8, x)
    for _ in range(20):
        assert ball_qp_objective(abar, b8, random_in_ball(rng, 3, P)) <= best + 1e-12


# -- curvature matrix oracle -----------------------------------------------

def test_psi_vanishes_for_zero_problem():
    sub = tiny_sub(np.zeros((1, 2, 1)), np.zeros((1, 2, 2)))
    psi = build_psi_oracle(sub, 0, 5.0, np.zeros(2), np.ones(2), 0.3)
    np.testing.assert_array_equal(psi, 0.0)


def test_psi_single_user_cancellation(rng):
    u = crandn(rng, 1, 1, 3)
    sub = tiny_sub(u, crandn(rng, 1, 1, 3))
    psi = build_psi_oracle(sub, 0, 7.0, crandn(rng, 3), crandn(rng, 3), 0.6)
    B = sub.dense_B(0, 0)
    expected = np.block([[-B, np.zeros((3, 3))], [np.zeros((3, 3)), -B.conj()]])
    np.testing.assert_allclose(psi, expected, atol=1e-12)


def test_psi_is_second_derivative(rng):
    sub, x0, _ = _mm_case(rng, mu=5.0)
    x1 = random_in_ball(rng, 2, 1.0)
    xh = x1 - x0
    phi = lambda t: smoothed_per_cell(sub, x0 + t * xh, 5.0)
    t, h = 0.4, 1e-4
    for j in range(2):
        fd = (phi(t + h)[j] - 2 * phi(t)[j] + phi(t - h)[j]) / h**2
        v = np.concatenate([xh, xh.conj()])
        quad = np.vdot(v, build_psi_oracle(sub, j, 5.0, x0, x1, t) @ v)
        assert abs(quad.imag) < 1e-12
        assert quad.real == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_alpha_below_psi_spectrum(rng):
    for _ in range(5):
        sub, x0, sur = _mm_case(rng)
        for _ in range(10):
            x1 = random_in_ball(rng, 2, 1.0)
            tau = rng.uniform()
            for j in range(2):
                lam = np.linalg.eigvalsh(build_psi_oracle(sub, j, 20.0, x0, x1, tau))[0]
                assert sur.alpha[j] <= lam + 1e-12
