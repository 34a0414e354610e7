import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraudit import dyadic as dy
from paraudit import paraproduct as pp
from paraudit import spectral as sp
from paraudit import window as wk
from paraudit.errors import DomainError, GeometryError, ParameterError, ResolutionError

G64 = sp.make_grid(64)
seeds = st.integers(min_value=0, max_value=2**63)


def _pair(lam, seed, grid=G64):
    return sp.synth_band_field(grid, lam, seed), sp.synth_band_field(grid, lam, seed + 1)


@settings(max_examples=8, deadline=None)
@given(seeds, st.sampled_from([4, 8]), st.sampled_from([F(1, 4), F(1, 2), F(5, 8)]))
def test_measurement_chain_and_support(seed, lam, delta):
    u, v = _pair(lam, seed)
    m = pp.measure_paraproduct(u, v, lam, delta)
    assert m.chain_ok and m.support_ok
    assert m.u_h1 == pytest.approx(1.0) and m.v_h1 == pytest.approx(1.0)
    assert m.ratio == pytest.approx(m.hminus1)


def test_paraproduct_vanishes_off_the_annulus():
    # fields living at frequency ~ 16 have no lambda = 4 piece
    u, v = _pair(16, 3, sp.make_grid(128))
    R = pp.diagonal_paraproduct(u, v, 4, F(1, 2))
    assert sp.norm(R) == 0.0


def test_paraproduct_output_is_mean_free():
    u, v = _pair(4, 12)
    R = pp.diagonal_paraproduct(u, v, 4, F(1, 4))
    assert sp.norm(R) > 0
    assert np.max(np.abs(R.coefficient((0, 0, 0)))) == 0.0


def test_paraproduct_bilinear():
    u, v = _pair(4, 11)
    w = sp.synth_band_field(G64, 4, 99)
    lhs = pp.diagonal_paraproduct(u + w, v, 4, F(1, 2))
    rhs = pp.diagonal_paraproduct(u, v, 4, F(1, 2)) + pp.diagonal_paraproduct(w, v, 4, F(1, 2))
    assert sp.norm(lhs - rhs) < 1e-13 * sp.norm(lhs)


def test_paraproduct_alias_rule_enforced():
    u = sp.zeros(sp.make_grid(32), 8)
    with pytest.raises(GeometryError) as err:
        pp.diagonal_paraproduct(u, u, 8, F(1, 2))
    assert err.value.minimal_n == 64


def test_paraproduct_rejects_non_solenoidal():
    u = sp.synth_band_field(G64, 4, 5, divergence_free=False)
    with pytest.raises(ParameterError):
        pp.diagonal_paraproduct(u, u, 4, F(1, 2))


def test_schrodinger_is_unitary_and_heat_contracts():
    f = sp.synth_band_field(G64, 8, 2)
    for t in (0.01, 0.3, 2.0):
        assert sp.norm(pp.schrodinger_evolve(f, t)) == pytest.approx(sp.norm(f), rel=1e-13)
        assert sp.norm(pp.heat_evolve(f, t)) < sp.norm(f)
    assert pp.heat_evolve(f, 0.0) is f
    with pytest.raises(DomainError):
        pp.heat_evolve(f, -0.1)


def test_schrodinger_group_property():
    f = sp.synth_band_field(G64, 8, 4)
    a = pp.schrodinger_evolve(pp.schrodinger_evolve(f, 0.2), 0.3)
    b = pp.schrodinger_evolve(f, 0.5)
    assert sp.norm(a - b) < 1e-12


def test_mixed_norm_conventions():
    f = sp.synth_band_field(G64, 4, 1, normalize=sp.NormSpec.l2())
    single = pp.TimeSeriesField(np.array([0.0]), (f,))
    assert pp.mixed_norm(single, 2) == pytest.approx(1.0)
    assert pp.mixed_norm(pp.TimeSeriesField(np.array([0.0]), (f,), dt=0.25), 2) == pytest.approx(0.5)
    T = 3.0
    const = pp.TimeSeriesField(np.linspace(0, T, 31), (f,) * 31)
    assert pp.mixed_norm(const, 2) == pytest.approx(math.sqrt(T))
    assert pp.mixed_norm(const, math.inf) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        pp.mixed_norm(const, 3)


def test_time_series_validation():
    f = sp.zeros(G64, 4)
    with pytest.raises(ParameterError):
        pp.TimeSeriesField(np.array([0.0, 1.0]), (f,))
    with pytest.raises(ParameterError):
        pp.TimeSeriesField(np.array([0.0, 1.0, 1.5]), (f, f, f))
    with pytest.raises(ParameterError):
        pp.evolve_series(f, [0.0], kind="wave")


def test_xs_norm_single_block():
    f = sp.synth_band_field(G64, 8, 6, normalize=sp.NormSpec.l2())
    series = pp.evolve_series(f, np.linspace(0, 1, 5), kind="schrodinger")
    piece = sp.norm(dy.project_dyadic(f, 8))
    assert pp.xs_norm(series, F(1, 2), [8]) == pytest.approx(math.sqrt(8) * piece, rel=1e-12)


def test_cylinder_geometry():
    cyl = pp.make_cylinder(16, F(1, 2))
    assert cyl.length == pytest.approx(16**-1.0)
    assert cyl.radius == pytest.approx(0.25)
    assert cyl.resolved and cyl.dt <= 0.25 / 256
    assert cyl.times()[0] == pytest.approx(cyl.dt / 2)


def test_local_l4_zero_field_is_degenerate():
    cyl = pp.make_cylinder(4, F(1, 2))
    grid = sp.make_grid(pp.minimal_tile_grid(4, cyl.radius))
    r = pp.local_l4_of_field(sp.zeros(grid, 4, components=1), 4, F(1, 2), cyl)
    assert r["degenerate"] and r["ratio"] == 0.0


def test_local_l4_resolution_errors():
    cyl = pp.make_cylinder(16, F(1, 2))
    f = sp.synth_band_field(sp.make_grid(32), 4, 0, divergence_free=False, components=1)
    with pytest.raises(ResolutionError):
        pp.local_l4_norm(f, cyl)


def test_local_l4_plane_wave():
    # |e^{ik.x}|^4 is constant, so the L4 norm is (vol * dt-sum)^(1/4) times the amplitude
    lam = 4
    cyl = pp.make_cylinder(lam, F(1, 2))
    grid = sp.make_grid(pp.minimal_tile_grid(lam, cyl.radius))
    f = sp.single_mode(grid, (4, 0, 0), 1.0)
    f = f.with_coeffs(f.coeffs[:1], hermitian=False)
    for prop in ("schrodinger", "heat"):
        got = pp.local_l4_norm(f, cyl, prop)
        xs = pp._ball_axes(grid, cyl.center, cyl.radius)
        inside = (xs[0][:, None, None] ** 2 + xs[1][None, :, None] ** 2 + xs[2][None, None, :] ** 2) <= cyl.radius**2
        h3 = (2 * math.pi / grid.n) ** 3
        decay = np.exp(-4 * 16 * cyl.times()) if prop == "heat" else np.ones(cyl.time_steps)
        want = (inside.sum() * h3 * cyl.dt * decay.sum()) ** 0.25 * (2 * math.pi) ** -1.5
        assert got == pytest.approx(want, rel=1e-10)


def test_decoupling_within_square_root_of_cap_count():
    lam = 8
    u, v = _pair(lam, 21, sp.make_grid(64))
    caps = dy.build_cap_family(lam, F(2, 3))
    r = pp.decoupling_ratio(u, v, lam, F(1, 2), caps)
    assert r["cap_count"] >= 1 and not r["degenerate"]
    assert r["ratio"] <= math.sqrt(r["cap_count"]) * (1 + 1e-12)


def test_decoupling_single_pair_ratio_one():
    lam = 8
    u, v = _pair(lam, 22, sp.make_grid(64))
    caps = dy.build_cap_family(lam, F(2, 3))
    r = pp.decoupling_ratio(u, v, lam, F(1, 2), caps, direction=caps.centers[0], cone_constant=1e-6)
    assert r["cap_count"] == 1
    assert r["ratio"] == pytest.approx(1.0, rel=1e-12)


def test_decoupling_family_mismatch():
    u, v = _pair(8, 1)
    with pytest.raises(ParameterError):
        pp.decoupling_ratio(u, v, 8, F(1, 2), dy.build_cap_family(16, F(2, 3)))


@pytest.mark.parametrize("swap", [False, True])
def test_low_pass_commutes_with_leray(swap):
    assert pp.commutator_zero_check(6.0, 3, sp.make_grid(32), 7, swap=swap) < 1e-13


def test_bump_field_matches_physical():
    g = sp.make_grid(32)
    assert np.max(np.abs(sp.to_physical(pp.bump_field(g))[0] - pp.bump_physical(g))) < 1e-13


def test_bump_gradient_sup_against_sampling():
    y = np.linspace(-math.pi, math.pi, 200_001)
    d = np.gradient(pp.bump_profile(y), y)
    # the gradient peaks on an axis, where the other two factors equal 1
    assert pp.bump_gradient_sup() == pytest.approx(np.max(np.abs(d)), rel=1e-8)


def test_commutator_with_constant_multiplier_vanishes():
    g = sp.make_grid(32)
    r = pp.localized_commutator_norm(4.0, np.full((32,) * 3, 2.5), g, iters=20)
    assert r.value < 1e-12


@pytest.mark.parametrize("method", ["power", "lanczos"])
def test_commutator_is_linear_in_multiplier(method):
    g = sp.make_grid(32)
    a = pp.bump_physical(g)
    one = pp.localized_commutator_norm(4.0, a, g, iters=200, method=method, rtol=1e-8)
    two = pp.localized_commutator_norm(4.0, 2 * a, g, iters=200, method=method, rtol=1e-8)
    assert two.value == pytest.approx(2 * one.value, rel=1e-6)


def test_commutator_methods_agree():
    g = sp.make_grid(32)
    a = pp.bump_physical(g)
    p = pp.localized_commutator_norm(4.0, a, g, iters=400, method="power", rtol=1e-10)
    q = pp.localized_commutator_norm(4.0, a, g, iters=200, method="lanczos", rtol=1e-10)
    # power iteration only approaches the top from below
    assert p.value <= q.value * (1 + 1e-9)
    assert p.value == pytest.approx(q.value, rel=1e-2)


def test_commutator_argument_checks():
    g = sp.make_grid(16)
    a = pp.bump_physical(g)
    with pytest.raises(ParameterError):
        pp.localized_commutator_norm(2.0, a, g, iters=5)
    with pytest.raises(ParameterError):
        pp.localized_commutator_norm(2.0, a, g, method="qr")
    with pytest.raises(GeometryError):
        pp.localized_commutator_norm(16.0, a, g)


def test_chained_commutator_constant_multiplier():
    u, v = _pair(8, 31)
    r = pp.chained_commutator_bound(u, v, 8, F(1, 2), amplitude=0.0)
    assert r["measured"] < 1e-12 and r["reference"] > 0


def test_chained_commutator_scales_with_amplitude():
    u, v = _pair(8, 32)
    a = pp.chained_commutator_bound(u, v, 8, F(1, 2))
    b = pp.chained_commutator_bound(u, v, 8, F(1, 2), amplitude=3.0)
    assert b["measured"] == pytest.approx(3 * a["measured"], rel=1e-12)
    assert b["grad_a_sup"] == pytest.approx(3 * a["grad_a_sup"])


def test_heat_series_norm_monotone_under_truncation():
    f = sp.synth_band_field(G64, 8, 41)
    series = pp.evolve_series(f, np.linspace(0, 0.05, 21), kind="heat", seed=41)
    h1 = sp.NormSpec.sobolev(1)
    norms = [pp.mixed_norm(series.truncated(m), 2, h1) for m in range(2, 22)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))
    pointwise = [sp.norm(g, h1) for g in series.fields]
    assert all(b <= a for a, b in zip(pointwise, pointwise[1:]))


@pytest.mark.parametrize("N", [4, 8])
def test_heat_minus_schrodinger_matches_kernel_oracle(N):
    # a single mode at |k| = N sees exactly the scalar kernel difference
    f = sp.single_mode(G64, (N, 0, 0), np.array([0.0, 1.0, 0.0]), real=True)
    T = wk.kernel_window(N, F(1, 2))
    times = np.linspace(0.0, T, 4001)
    diff = pp.TimeSeriesField(times, tuple(pp.heat_evolve(f, t) - pp.schrodinger_evolve(f, t) for t in times))
    want = math.sqrt(wk.kernel_diff_sq_closed(N, T)) * sp.norm(f)
    assert pp.mixed_norm(diff, 2) == pytest.approx(want, rel=1e-6)


def test_schrodinger_preserves_cap_energy():
    lam = 8
    f = sp.synth_band_field(G64, lam, 17)
    caps = dy.build_cap_family(lam, F(2, 3))
    g = pp.schrodinger_evolve(f, 0.37)
    for i in range(0, len(caps), max(1, len(caps) // 12)):
        a = sp.norm(dy.project_cap(f, lam, caps, i))
        b = sp.norm(dy.project_cap(g, lam, caps, i))
        assert b == pytest.approx(a, rel=1e-12, abs=1e-15)


def test_commutator_check_single_mode_is_zero():
    g = sp.make_grid(32)
    f = sp.single_mode(g, (3, -1, 2), np.array([1.0, 0.5, -0.25]), real=True)
    for swap in (False, True):
        assert sp.norm(pp.commutator_residual_field(f, 5.0, swap)) < 1e-14
