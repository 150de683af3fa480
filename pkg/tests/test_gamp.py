import numpy as np
import pytest

from jcas.gamp import (
    GampDivergence,
    PriorParams,
    g_in,
    g_out,
    gamp_solve,
    lift_complex,
)
from oracles import g_in_grid_search, map_support_enumeration


def test_prior_params_validation():
    with pytest.raises(ValueError):
        PriorParams(lam=0.0)
    with pytest.raises(ValueError):
        PriorParams(theta=1.5)
    with pytest.raises(ValueError):
        PriorParams(sigma_x=0.0)
    with pytest.raises(ValueError):
        PriorParams(sigma_w=-1.0)


def test_alpha_is_outside_mass():
    q = PriorParams(lam=0.2, theta=0.5, sigma_x=0.04)
    # N(0.5, 0.04): (0,1) is +-2.5 sigma, so about 1.24% falls outside
    assert np.isclose(q.alpha, 0.2 * 2 * 0.00621, rtol=0.01)
    assert np.isclose(q.spike_mass, 1 - q.lam + q.alpha)


def test_g_in_matches_grid_search():
    """Closed-form denoiser vs dense grid search of the MAP objective."""
    rng = np.random.default_rng(0)
    qs = [
        PriorParams(lam=0.05, theta=0.5, sigma_x=0.1),
        PriorParams(lam=0.3, theta=0.2, sigma_x=0.01),
        PriorParams(lam=0.05, theta=0.5, sigma_x=0.1, renormalized=True),
    ]
    for q in qs:
        v = rng.uniform(-1.5, 2.5, 300)
        sv = 10.0 ** rng.uniform(-4, 0, 300)
        x_hat, _ = g_in(v, sv, q)
        for vi, svi, xi in zip(v, sv, x_hat):
            ref = g_in_grid_search(vi, svi, q)
            assert abs(xi - ref) <= 1e-4, (vi, svi, xi, ref)


def test_g_in_limits():
    q = PriorParams(lam=0.05, theta=0.5, sigma_x=0.1)
    # far negative v: spike wins outright
    x, d = g_in(np.array([-5.0]), np.array([0.1]), q)
    assert x[0] == 0.0 and d[0] == 0.0
    # v far above 1: Gaussian branch clips to 1, derivative 0 at the clip
    x, d = g_in(np.array([5.0]), np.array([0.01]), q)
    assert x[0] == 1.0 and d[0] == 0.0
    # interior (with a dense prior so the Gaussian branch wins):
    # derivative is sigma_x / (sigma_x + sigma_v)
    q_dense = PriorParams(lam=0.5, theta=0.5, sigma_x=0.1)
    x, d = g_in(np.array([0.5]), np.array([0.05]), q_dense)
    assert 0 < x[0] < 1
    assert np.isclose(d[0], 0.1 / 0.15)


def test_g_in_rejects_nonpositive_variance():
    q = PriorParams()
    with pytest.raises(ValueError):
        g_in(np.array([0.0]), np.array([0.0]), q)


def test_g_out_formula():
    s, d = g_out(np.array([1.0]), np.array([0.25]), np.array([0.5]), 0.25)
    assert np.isclose(s[0], 0.75 / 0.75)
    assert np.isclose(d[0], -1 / 0.75)
    with pytest.raises(ValueError):
        g_out(np.array([1.0]), np.array([0.0]), np.array([0.0]), 0.0)


def test_gamp_one_iteration_hand_stepped():
    """gamp_solve(max_iter=1) must match the update schedule written out."""
    rng = np.random.default_rng(1)
    phi = rng.standard_normal((6, 4))
    q = PriorParams(lam=0.3, theta=0.5, sigma_x=0.1, sigma_w=0.01)
    x_true = np.array([0.8, 0.0, 0.0, 0.4])
    y = phi @ x_true
    damping = 0.7

    res = gamp_solve(phi, y, q, max_iter=1, damping=damping)

    x = np.full(4, q.theta * q.lam)
    sx = np.full(4, q.sigma_x)
    s = np.zeros(6)
    phi2 = phi**2
    sz = phi2 @ sx
    p = phi @ x - sz * s
    s_new, gp = g_out(y, p, sz, q.sigma_w)
    s = damping * s_new
    sv = 1.0 / (phi2.T @ (-gp))
    v = x + sv * (phi.T @ s)
    x_new, gin = g_in(v, sv, q)
    x = damping * x_new + (1 - damping) * x
    assert np.allclose(res.x, x, atol=1e-12)
    assert np.allclose(res.sigma_x, np.maximum(sv * gin, 1e-15 * q.sigma_x), atol=1e-12)


def test_gamp_recovers_sparse_vector():
    rng = np.random.default_rng(2)
    phi = rng.standard_normal((24, 12)) / np.sqrt(24)
    x_true = np.zeros(12)
    x_true[[3, 7]] = [0.6, 0.35]
    y = phi @ x_true
    q = PriorParams(lam=2 / 12, theta=0.5, sigma_x=0.1, sigma_w=1e-10)
    res = gamp_solve(phi, y, q)
    assert res.converged
    assert np.allclose(res.x, x_true, atol=1e-4)


def test_gamp_matches_support_enumeration_oracle():
    """MAP oracle agreement on small underdetermined instances using the
    restart mode (spot check; the acceptance suite runs the full
    200-instance version)."""
    rng = np.random.default_rng(3)
    hits = 0
    trials = 25
    for i in range(trials):
        phi = rng.standard_normal((8, 12)) / np.sqrt(8)
        x_true = np.zeros(12)
        sup = rng.choice(12, 2, replace=False)
        x_true[sup] = rng.uniform(0.2, 1.0, 2)
        y = phi @ x_true + np.sqrt(1e-6) * rng.standard_normal(8)
        q = PriorParams(lam=2 / 12, theta=0.5, sigma_x=0.1, sigma_w=1e-6)
        x_ref, sup_ref = map_support_enumeration(phi, y, q)
        res = gamp_solve(phi, y, q, restarts=8, seed=i)
        got = tuple(int(j) for j in np.flatnonzero(res.x > 1e-2))
        if got == sup_ref:
            hits += 1
            assert np.allclose(res.x, x_ref, atol=1e-2)
    assert hits / trials >= 0.9


def test_gamp_stops_at_eps_t():
    rng = np.random.default_rng(4)
    phi = rng.standard_normal((20, 10)) / np.sqrt(20)
    x_true = np.zeros(10)
    x_true[2] = 0.5
    y = phi @ x_true
    q = PriorParams(lam=0.1, theta=0.5, sigma_x=0.1)
    loose = gamp_solve(phi, y, q, eps_t=1e-2)
    assert loose.converged
    assert loose.residual <= 1e-2
    tight = gamp_solve(phi, y, q, eps_t=1e-6)
    assert loose.iterations <= tight.iterations


def test_gamp_input_validation():
    q = PriorParams()
    with pytest.raises(ValueError):
        gamp_solve(np.zeros((3, 2)), np.zeros(4), q)
    with pytest.raises(ValueError):
        gamp_solve(np.zeros((3, 2)), np.zeros(3), q, damping=0.0)


def test_divergence_carries_state():
    err = GampDivergence("boom", np.ones(2), np.ones(2), 7, 42.0)
    assert err.iteration == 7 and err.residual == 42.0
    assert np.array_equal(err.x, np.ones(2))


def test_lift_complex_identity():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    x = rng.uniform(0, 1, 4)
    h = a @ x
    phi, y = lift_complex(a, h)
    assert phi.shape == (12, 4)
    assert np.allclose(phi @ x, y)
    assert np.allclose(y[:6], h.real) and np.allclose(y[6:], h.imag)
    with pytest.raises(ValueError):
        lift_complex(a, h[:3])
