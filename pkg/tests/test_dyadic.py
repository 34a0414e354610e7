import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from paraudit import dyadic as dy
from paraudit import spectral as sp
from paraudit.errors import GeometryError, ParameterError, ResolutionError

G64 = sp.make_grid(64)


def test_chi_plateau_and_support():
    r = np.linspace(0.01, 3, 30001)
    c = dy.chi(r)
    assert np.all(c[(r >= 0.75) & (r <= 4 / 3)] == 1.0)
    assert np.all(c[(r <= 2 / 3) | (r >= 1.5)] == 0.0)
    assert np.all((c >= 0) & (c <= 1))


def test_smooth_step_ends():
    assert dy.smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])).tolist() == [0.0, 0.0, 0.5, 1.0, 1.0]


@given(st.floats(min_value=0.3, max_value=2.0**30))
def test_partition_of_unity(r):
    assert abs(float(dy.dyadic_sum(r)) - 1.0) < 1e-12


def test_low_symbol_shape():
    for mu in (8, 12, 16, 64):
        J = dy.low_exponent(mu)
        top = 2.0 ** (J - 1)
        assert 2**J >= mu > 2 ** (J - 1)
        r = np.linspace(0, 3 * top, 5001)
        s = dy.low_symbol_radial(r, mu)
        assert np.all(s[r <= 4 / 3 * top] == 1.0)
        assert np.all(s[r >= dy.low_support(mu)] == 0.0)
        # telescoping: P_{<mu} equals the sum of the dyadic pieces below 2^J, plus everything near zero
        mid = (r > 1) & (r < 1.5 * top)
        pieces = sum(dy.chi(r[mid] / 2.0**j) for j in range(-6, J))
        assert np.max(np.abs(pieces - s[mid])) < 1e-12


def test_low_exponent_rejects_nonpositive():
    with pytest.raises(ParameterError):
        dy.low_exponent(0)


def test_project_dyadic_plateau_and_outside():
    f = sp.single_mode(G64, (8, 0, 0), 1.0, real=True)
    assert dy.project_dyadic(f, 8).coefficient((8, 0, 0)) == pytest.approx(1.0)
    g = sp.single_mode(G64, (16, 0, 0), 1.0, real=True)
    assert sp.norm(dy.project_dyadic(g, 8)) == 0.0


def test_project_low_examples():
    mu = 16
    f = sp.single_mode(G64, (4, 0, 0), 1.0, real=True)
    assert dy.project_low(f, mu).coefficient((4, 0, 0)) == 1.0
    g = sp.single_mode(G64, (0, 0, 31), 1.0, real=True)
    assert sp.norm(dy.project_low(g, mu)) == 0.0


def test_projection_nyquist_errors():
    f = sp.zeros(G64, 4)
    with pytest.raises(GeometryError):
        dy.project_dyadic(f, 16)
    with pytest.raises(GeometryError):
        dy.project_low(f, 40)


def test_whole_sphere_family():
    fam = dy.build_cap_family(64, 0)
    assert fam.whole_sphere and len(fam) == 1
    dirs = np.random.default_rng(0).standard_normal((50, 3))
    assert np.all(fam.symbol(0, dirs) == 1.0)


def test_cap_count_at_large_lambda():
    fam = dy.build_cap_family(4096, F(2, 3))
    ratio = len(fam) / 4096 ** (4 / 3)
    lo, hi = dy.CAP_COUNT_BOUNDS
    assert lo <= ratio <= hi


@pytest.mark.parametrize("lam,rho", [(64, F(1, 2)), (512, F(2, 3)), (4096, F(2, 3))])
def test_square_partition_and_antipodes(lam, rho):
    fam = dy.build_cap_family(lam, rho)
    dirs = np.random.default_rng(lam).standard_normal((5000, 3))
    rows, cols, p = fam.symbol_entries(dirs)
    total = np.bincount(rows, weights=p * p, minlength=dirs.shape[0])
    assert np.max(np.abs(total - 1)) < 1e-12
    assert np.array_equal(fam.centers[fam.antipode], -fam.centers)
    assert np.array_equal(fam.antipode[fam.antipode], np.arange(len(fam)))
    # symbols of antipodal caps are mirror images
    i = 3
    assert np.allclose(fam.symbol(i, dirs), fam.symbol(int(fam.antipode[i]), -dirs), atol=1e-14)


def test_over_fine_family_rejected():
    with pytest.raises(ResolutionError):
        dy.build_cap_family(2**30, 1)
    with pytest.raises(ResolutionError):
        dy.build_cap_family(64, F(3, 2))


def test_cap_energy_resummation():
    f = sp.synth_band_field(G64, 8, 3, divergence_free=False)
    fam = dy.build_cap_family(8, F(2, 3))
    pieces = sum(sp.norm(dy.project_cap(f, 8, fam, i)) ** 2 for i in range(len(fam)))
    assert pieces == pytest.approx(sp.norm(dy.project_dyadic(f, 8)) ** 2, rel=1e-12)


def test_active_cap_prediction():
    a = dy.count_active_caps(1024, F(1, 2), F(2, 3), np.array([0, 0, 1.0]))
    assert a.predicted == dy.AffineExponent(F(4, 3), -2)
    assert a.cone == pytest.approx(2 / 32)
    coarse = dy.count_active_caps(1024, F(1, 2), "delta", np.array([0, 0, 1.0]))
    assert coarse.predicted == dy.AffineExponent(0, 0)


def test_active_cap_growth():
    direction = np.array([1.0, 2.0, 3.0]) / math.sqrt(14)
    counts = [dy.count_active_caps(2**j, F(1, 2), F(2, 3), direction).count for j in (8, 10, 12)]
    steps = np.diff(np.log2(counts)) / 2  # per lambda doubling
    assert np.all(np.abs(steps - 1 / 3) <= 0.25)


def test_active_caps_bounded_when_delta_exceeds_rho():
    direction = np.array([0.3, -0.4, 0.866])
    counts = [dy.count_active_caps(2**j, F(3, 4), F(1, 2), direction).count for j in (8, 10, 12, 14)]
    assert max(counts) <= 6
