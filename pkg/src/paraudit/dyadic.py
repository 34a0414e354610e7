"""Littlewood-Paley symbols and smooth angular cap families.

The radial bump chi lives in the variable t = log2(r). It equals 1 on
[3/4, 4/3], vanishes outside (2/3, 3/2), and its lower transition is the
exact complement of the upper one shifted by one octave, so the dyadic
sum over j of chi(r / 2^j) is 1 to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError, ParameterError, ResolutionError
from .ledger import AffineExponent, as_fraction
from .spectral import SpectralField, next_power_of_two, wavenumber_magnitude, wavevectors

_A = math.log2(4.0 / 3.0)
_B = math.log2(3.0 / 2.0)

CHI_PLATEAU = (0.75, 4.0 / 3.0)
CHI_SUPPORT = (2.0 / 3.0, 1.5)


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        f1 = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return f0 / (f0 + f1)


def chi(r) -> np.ndarray:
    """Radial dyadic bump; r is the radius ratio |k| / lambda."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros(r.shape)
    pos = r > 0
    t = np.log2(np.where(pos, r, 1.0))
    w = _B - _A
    upper = pos & (t >= 0)
    lower = pos & (t < 0)
    out[upper] = 1.0 - smooth_step((t[upper] - _A) / w)
    out[lower] = smooth_step((t[lower] + 1.0 - _A) / w)
    return out


def dyadic_sum(r, jmin: int = -4, jmax: int = 40) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    return sum(chi(r / 2.0**j) for j in range(jmin, jmax + 1))


def low_exponent(mu: float) -> int:
    """Smallest J with 2^J >= mu; P_{<mu} keeps the pieces 2^j < mu, i.e. j < J."""
    if mu <= 0:
        raise ParameterError("low-pass cutoff must be positive")
    return math.ceil(math.log2(mu) - 1e-12)


def low_symbol_radial(r, mu: float) -> np.ndarray:
    """Symbol of P_{<mu} as a function of |k|; 1 at k = 0."""
    r = np.asarray(r, dtype=np.float64)
    top = 2.0 ** (low_exponent(mu) - 1)
    return np.where(r <= CHI_PLATEAU[1] * top, 1.0, chi(r / top))


def low_support(mu: float) -> float:
    """Radius beyond which the P_{<mu} symbol vanishes exactly."""
    return CHI_SUPPORT[1] * 2.0 ** (low_exponent(mu) - 1)


def dyadic_symbol(band: int, lam: float) -> np.ndarray:
    return chi(wavenumber_magnitude(band) / lam)


def low_symbol(band: int, mu: float) -> np.ndarray:
    return low_symbol_radial(wavenumber_magnitude(band), mu)


def _shrink(f: SpectralField, band: int) -> SpectralField:
    if band >= f.band:
        return f
    b0, b = f.band, band
    sl = slice(b0 - b, b0 + b + 1)
    return SpectralField(f.grid, np.ascontiguousarray(f.coeffs[:, sl, sl, sl]), band, f.hermitian)


def project_dyadic(f: SpectralField, lam: float) -> SpectralField:
    if 2 * lam > f.grid.kmax:
        raise GeometryError(
            f"dyadic block {lam} needs 2*lambda below Nyquist {f.grid.kmax}",
            minimal_n=next_power_of_two(4 * lam + 2),
        )
    g = _shrink(f, int(2 * lam))
    return g.with_coeffs(g.coeffs * dyadic_symbol(g.band, lam)[None])


def project_low(f: SpectralField, mu: float) -> SpectralField:
    if mu > f.grid.kmax:
        raise GeometryError(
            f"low-pass cutoff {mu:g} above Nyquist {f.grid.kmax}", minimal_n=next_power_of_two(2 * mu + 2)
        )
    g = _shrink(f, max(1, math.ceil(low_support(mu))))
    return g.with_coeffs(g.coeffs * low_symbol(g.band, mu)[None])


# ----------------------------------------------------------------------------
# angular caps


CAP_SUPPORT_FACTOR = 1.5
ACTIVE_CONE_CONSTANT = 2
MAX_FACE_DIVISIONS = 2048
CAP_COUNT_BOUNDS = (0.9, 1.1)  # 6 m^2 / lambda^(2 rho), valid once m >= 5


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def angle_between(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Great-circle angle between unit vectors, accurate at small angles."""
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.arctan2(cross, dot)


def _face_centers(m: int) -> np.ndarray:
    """Equiangular m x m cell centers on the three positive cube faces."""
    alpha = -math.pi / 4 + (np.arange(m) + 0.5) * (math.pi / 2) / m
    ta, tb = np.meshgrid(np.tan(alpha), np.tan(alpha), indexing="ij")
    ta, tb = ta.ravel(), tb.ravel()
    one = np.ones_like(ta)
    faces = [
        np.stack([one, ta, tb], axis=1),
        np.stack([tb, one, ta], axis=1),
        np.stack([ta, tb, one], axis=1),
    ]
    return _unit(np.concatenate(faces))


@dataclass(frozen=True, eq=False)
class CapFamily:
    lam: int
    rho: Fraction
    m: int
    centers: np.ndarray
    radius: float
    antipode: np.ndarray
    whole_sphere: bool = False

    def __post_init__(self):
        object.__setattr__(self, "_tree", cKDTree(self.centers) if not self.whole_sphere else None)

    def __len__(self) -> int:
        return self.centers.shape[0]

    def _bumps(self, dirs: np.ndarray):
        """Sparse (direction, cap, q) triples for all bumps touching each direction."""
        dirs = _unit(np.atleast_2d(np.asarray(dirs, dtype=np.float64)))
        chord = 2.0 * math.sin(min(self.radius, math.pi) / 2.0)
        lists = self._tree.query_ball_point(dirs, chord * (1 + 1e-12))
        rows = np.repeat(np.arange(len(lists)), [len(x) for x in lists])
        cols = np.fromiter((c for x in lists for c in x), dtype=np.int64, count=rows.size)
        ang = angle_between(dirs[rows], self.centers[cols])
        q = 1.0 - smooth_step(ang / self.radius)
        return dirs.shape[0], rows, cols, q

    def bump_energy(self, dirs) -> np.ndarray:
        """Sum over caps of the unnormalized squared bumps at each direction."""
        if self.whole_sphere:
            return np.ones(np.atleast_2d(dirs).shape[0])
        nd, rows, _, q = self._bumps(dirs)
        return np.bincount(rows, weights=q * q, minlength=nd)

    def symbol_entries(self, dirs):
        """(rows, caps, p) with p the normalized cap symbol; sum of p^2 per row is 1."""
        if self.whole_sphere:
            nd = np.atleast_2d(dirs).shape[0]
            return np.arange(nd), np.zeros(nd, dtype=np.int64), np.ones(nd)
        nd, rows, cols, q = self._bumps(dirs)
        s = np.bincount(rows, weights=q * q, minlength=nd)
        if np.any(s <= 0):
            raise ResolutionError("cap family leaves directions uncovered")
        return rows, cols, q / np.sqrt(s[rows])

    def symbol(self, index: int, dirs) -> np.ndarray:
        dirs = np.atleast_2d(dirs)
        if self.whole_sphere:
            return np.ones(dirs.shape[0])
        rows, cols, p = self.symbol_entries(dirs)
        out = np.zeros(dirs.shape[0])
        hit = cols == index
        out[rows[hit]] = p[hit]
        return out

    def symbols_for(self, indices, dirs) -> np.ndarray:
        """Dense (len(indices), len(dirs)) block of normalized symbols."""
        dirs = np.atleast_2d(dirs)
        indices = np.asarray(indices, dtype=np.int64)
        out = np.zeros((indices.size, dirs.shape[0]))
        if self.whole_sphere:
            out[:] = 1.0
            return out
        rows, cols, p = self.symbol_entries(dirs)
        lookup = np.full(len(self), -1, dtype=np.int64)
        lookup[indices] = np.arange(indices.size)
        which = lookup[cols]
        sel = which >= 0
        which = which[sel]
        out[which, rows[sel]] = p[sel]
        return out

    def within(self, direction, angle: float) -> np.ndarray:
        """Indices of caps whose centers lie within ``angle`` of ``direction``."""
        d = _unit(np.asarray(direction, dtype=np.float64))
        if self.whole_sphere:
            return np.zeros(1, dtype=np.int64)
        ang = angle_between(self.centers, d[None, :])
        return np.flatnonzero(ang <= angle)


def face_divisions(lam: int, rho) -> int:
    return max(1, int(round(float(lam) ** float(rho) / math.sqrt(6.0))))


def build_cap_family(lam: int, rho) -> CapFamily:
    rho = as_fraction(rho)
    if rho < 0 or rho > 1:
        raise ResolutionError(f"cap exponent rho = {rho} outside [0, 1]: caps finer than the lattice at radius lambda")
    if rho == 0:
        return CapFamily(lam, rho, 0, np.array([[0.0, 0.0, 1.0]]), math.pi, np.zeros(1, dtype=np.int64), True)
    m = face_divisions(lam, rho)
    if m > MAX_FACE_DIVISIONS:
        raise ResolutionError(f"{6 * m * m} caps requested for lambda = {lam}, rho = {rho}")
    half = _face_centers(m)
    centers = np.concatenate([half, -half])
    h = half.shape[0]
    antipode = np.concatenate([np.arange(h, 2 * h), np.arange(h)])
    radius = CAP_SUPPORT_FACTOR * (math.pi / 2) / m
    return CapFamily(lam, rho, m, centers, radius, antipode)


def cap_symbol_on_cube(family: CapFamily, indices, band: int, lam: float):
    """Cap symbols times chi(|k|/lam) on the annulus modes of the band cube.

    Returns (mask, block) where block[i] holds the values on cube[mask].
    """
    k1, k2, k3, ksq = wavevectors(band)
    shape = ksq.shape
    r = np.sqrt(ksq.astype(np.float64))
    radial = chi(r / lam)
    mask = radial > 0
    dirs = np.stack([np.broadcast_to(k, shape)[mask] for k in (k1, k2, k3)], axis=1) / r[mask][:, None]
    block = family.symbols_for(indices, dirs) * radial[mask][None, :]
    return mask, block


def project_cap(f: SpectralField, lam: float, family: CapFamily, index: int) -> SpectralField:
    """P_{lam,theta} f for a single cap."""
    g = _shrink(f, int(2 * lam))
    mask, block = cap_symbol_on_cube(family, [index], g.band, lam)
    out = np.zeros_like(g.coeffs)
    out[:, mask] = g.coeffs[:, mask] * block[0][None, :]
    return g.with_coeffs(out, family.whole_sphere and g.hermitian)


@dataclass(frozen=True)
class ActiveCaps:
    count: int
    predicted: AffineExponent
    cone: float


def count_active_caps(lam: int, delta, rho, direction, constant: float = ACTIVE_CONE_CONSTANT) -> ActiveCaps:
    delta = as_fraction(delta)
    if isinstance(rho, str) and rho == "delta":
        rho_value, predicted = delta, AffineExponent(0, 0)
    else:
        rho_value = as_fraction(rho)
        predicted = AffineExponent(2 * rho_value, -2)
    family = build_cap_family(lam, rho_value)
    cone = constant * float(lam) ** -float(delta)
    d = -np.asarray(direction, dtype=np.float64)
    return ActiveCaps(int(family.within(d, cone).size), predicted, cone)
