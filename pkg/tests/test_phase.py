import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraudit import phase as ph
from paraudit.errors import DomainError

vec = st.lists(st.floats(-50, 50, allow_nan=False), min_size=3, max_size=3).map(np.array)


def test_omega_closed_form():
    lam = 10.0
    assert float(ph.omega([lam, 0, 0], [0, lam, 0])) == pytest.approx(2 * lam - lam * math.sqrt(2))


def test_omega_domain_errors():
    with pytest.raises(DomainError):
        ph.omega([1.0, 2, 3], [-1.0, -2, -3])
    with pytest.raises(DomainError):
        ph.grad_omega([0.0, 0, 0], [1.0, 0, 0])


def test_gradients_vanish_when_parallel():
    gx, ge = ph.grad_omega([2.0, 0, 0], [5.0, 0, 0])
    assert np.allclose(gx, 0) and np.allclose(ge, 0)


@settings(max_examples=50)
@given(vec, vec)
def test_gradient_matches_differences(xi, eta):
    if min(np.linalg.norm(xi), np.linalg.norm(eta), np.linalg.norm(xi + eta)) < 1:
        return
    a = ph.grad_omega(xi, eta)
    b = ph.fd_grad_omega(xi, eta)
    for u, v in zip(a, b):
        assert np.max(np.abs(u - v)) <= 1e-6 * max(1.0, np.max(np.abs(u)))


def test_frame():
    f = ph.transverse_frame([0.0, 0.0, 1.0])
    assert np.array_equal(f.v3, [0, 0, 1]) and abs(f.v1 @ f.v3) == 0
    g = ph.transverse_frame([0.0, 0.0, 1.0])
    assert np.array_equal(f.v1, g.v1) and np.array_equal(f.v2, g.v2)
    w = np.random.default_rng(1).standard_normal((100, 3))
    h = ph.transverse_frame(w)
    m = np.stack([h.v1, h.v2, h.v3], axis=-1)
    assert np.allclose(np.einsum("nij,nik->njk", m, m), np.eye(3), atol=1e-14)
    with pytest.raises(DomainError):
        ph.transverse_frame([0.0, 0.0, 0.0])


def test_symmetric_hessian_entries():
    rng = np.random.default_rng(2)
    for lam in (64, 1024, 16384):
        pair = ph.sample_resonant_pairs(lam, F(1, 2), rng, 500, equal_radii=True)
        m = ph.hessian_rho(pair).m
        assert np.max(np.abs(m[:, 0, 0] * lam / 2 - 1)) < 1e-10
        target = 2 / lam - 4 / pair.wnorm
        assert np.max(np.abs(m[:, 1, 1] / target - 1)) < 1e-10
        assert np.max(np.abs(m[:, 0, 1])) < 1e-8 * (2 / lam)
        assert np.array_equal(m[:, 0, 1], m[:, 1, 0])


def test_hessian_degenerates_for_equal_vectors():
    lam = 100.0
    xi = np.array([lam, 0, 0])
    h = ph.hessian_rho(ph.FreqPair(xi, xi.copy(), lam))
    assert h.m[1, 1] == pytest.approx(0, abs=1e-15)
    assert h.det == pytest.approx(0, abs=1e-18)


@pytest.mark.parametrize("delta", [F(1, 4), F(1, 2), F(5, 8)])
def test_hessian_matches_finite_differences(delta):
    rng = np.random.default_rng(3)
    for lam in (64, 4096, 16384):
        pair = ph.sample_resonant_pairs(lam, delta, rng, 2000)
        m = ph.hessian_rho(pair).m
        fd = ph.fd_hessian_rho(pair)
        scale = np.max(np.abs(m), axis=(-2, -1))
        assert np.max(np.max(np.abs(fd - m), axis=(-2, -1)) / scale) < 1e-5


def test_block_hessian_symmetric():
    rng = np.random.default_rng(4)
    h = ph.block_hessian(rng.standard_normal((20, 3)), rng.standard_normal((20, 3)))
    assert np.array_equal(h, np.swapaxes(h, -1, -2))


@pytest.mark.parametrize("delta", [F(1, 4), F(1, 2), F(5, 8)])
def test_sampler_windows(delta):
    rng = np.random.default_rng(5)
    for lam in (16, 256, 16384):
        pair = ph.sample_resonant_pairs(lam, delta, rng, 20_000)
        theta = pair.theta * lam ** float(delta)
        assert theta.min() >= 0.5 - 1e-12 and theta.max() <= 2 + 1e-12
        w = pair.wnorm / lam ** (1 - float(delta))
        assert w.min() >= ph.W_BOUNDS[0] and w.max() <= ph.W_BOUNDS[1]
        phi = ph.heat_phase(pair.xi, pair.eta) / lam ** (2 - 2 * float(delta))
        assert phi.min() >= ph.HEAT_PHASE_BOUNDS[0] and phi.max() <= ph.HEAT_PHASE_BOUNDS[1]
        inv = 1 / ph.heat_phase(pair.xi, pair.eta)
        assert np.all(inv <= ph.HEAT_SAFETY_CONSTANT * ph.heat_phase_safety(lam, delta))


def test_sampler_determinism():
    a = ph.sample_resonant_pairs(64, F(1, 2), np.random.default_rng(9), 10)
    b = ph.sample_resonant_pairs(64, F(1, 2), np.random.default_rng(9), 10)
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.eta, b.eta)


def test_equal_radius_small_angle():
    pair = ph.sample_resonant_pairs(1024, F(1, 2), np.random.default_rng(6), 10_000, equal_radii=True)
    ratio = pair.wnorm / (pair.lam * pair.theta)
    assert ratio.min() >= 1 / 1.02 and ratio.max() <= 1.02
    assert np.max(ph.angle_identity_residual(pair)) < 1e-10 * 1024


def test_null_symbol_examples():
    w = np.array([1.0, 2.0, 2.0])
    eta = 3 * w
    xi = w - eta
    assert np.allclose(ph.null_symbol(xi, eta), 0, atol=1e-14)
    perp = np.array([2.0, -1.0, 0.0])
    assert np.allclose(ph.null_symbol(w - perp, perp), perp)
    with pytest.raises(DomainError):
        ph.null_symbol(np.array([1.0, 0, 0]), np.array([-1.0, 0, 0]))


@settings(max_examples=100)
@given(vec, vec)
def test_null_symbol_projection(xi, eta):
    w = xi + eta
    if np.linalg.norm(w) < 1e-3:
        return
    b = ph.null_symbol(xi, eta)
    assert abs(b @ w) <= 1e-10 * np.linalg.norm(eta) * np.linalg.norm(w) + 1e-300
    assert np.linalg.norm(b) <= np.linalg.norm(eta) * (1 + 1e-12)


def test_suppression_zero_when_parallel():
    xi, eta = np.array([[3.0, 0, 0]]), np.array([[-1.0, 0, 0]])
    assert ph.suppression_ratio(ph.FreqPair(xi, eta, 3.0), F(1, 2))[0] == 0


def test_suppression_at_half_is_lambda_independent():
    rng = np.random.default_rng(7)
    maxima = [ph.suppression_ratio(ph.sample_resonant_pairs(lam, F(1, 2), rng, 20_000), F(1, 2)).max() for lam in (64, 1024, 16384)]
    assert max(maxima) / min(maxima) < 1.5


def test_cross_identities():
    pair = ph.sample_resonant_pairs(512, F(1, 2), np.random.default_rng(8), 10_000)
    cross = np.linalg.norm(np.cross(pair.xi, pair.eta), axis=-1)
    nx, ne = np.linalg.norm(pair.xi, axis=-1), np.linalg.norm(pair.eta, axis=-1)
    ang = ph.angle(pair.xi, pair.eta)
    assert np.max(np.abs(cross - nx * ne * np.sin(ang)) / (nx * ne)) < 1e-12
    assert np.max(np.abs(np.sin(ang) - np.sin(pair.theta))) < 1e-12
    assert ph.cross_lower_bound(pair, F(1, 2)).min() >= ph.CROSS_LOWER


def test_heat_phase_zero():
    assert ph.heat_phase([1.0, 2, 3], [-1.0, -2, -3]) == 0


def test_exact_constants_reported():
    c = ph.exact_constants()
    assert c["w_bounds"] == ph.W_BOUNDS and c["theta_window"] == (0.5, 2.0)
