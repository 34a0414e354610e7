"""Periodic 3D grid, band-limited fields, transforms, norms and products.

Coefficients use the orthonormal convention on the torus [0, 2pi)^3,

    f(x) = (2pi)^(-3/2) * sum_k c_k exp(i k.x),

so that the L^2 norm is exactly the l^2 norm of the coefficients.

A field stores its coefficients on the cube |k_i| <= band rather than on
the full n^3 index set. The grid only matters when the field is sampled in
physical space; this keeps memory proportional to the band, which is what
makes n = 256 runs fit on a desk machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import rng
from .errors import (
    ConfigurationError,
    DegenerateSampleError,
    GeometryError,
    NormDomainError,
    ParameterError,
)

TWO_PI = 2.0 * math.pi
_PHYS = (2.0 * math.pi) ** -1.5


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def next_power_of_two(x: float) -> int:
    """Smallest power of two that is >= x."""
    p = 1
    while p < x:
        p *= 2
    return p


@dataclass(frozen=True)
class Grid3:
    n: int
    period: float = TWO_PI

    @property
    def kmin(self) -> int:
        return -self.n // 2

    @property
    def kmax(self) -> int:
        return self.n // 2 - 1

    @property
    def num_modes(self) -> int:
        return self.n**3

    @property
    def cell_volume(self) -> float:
        return (self.period / self.n) ** 3

    def points(self) -> np.ndarray:
        return np.arange(self.n) * (self.period / self.n)


def make_grid(n: int) -> Grid3:
    if not is_power_of_two(n) or not 8 <= n <= 1024:
        raise ConfigurationError(f"grid size must be a power of two in [8, 1024], got {n}")
    return Grid3(int(n))


@lru_cache(maxsize=64)
def _cube_axes(band: int):
    ax = np.arange(-band, band + 1, dtype=np.int64)
    k1 = ax.reshape(-1, 1, 1)
    k2 = ax.reshape(1, -1, 1)
    k3 = ax.reshape(1, 1, -1)
    ksq = k1 * k1 + k2 * k2 + k3 * k3
    for a in (k1, k2, k3, ksq):
        a.setflags(write=False)
    return k1, k2, k3, ksq


def wavevectors(band: int):
    """Broadcastable integer wavevector components and |k|^2 on the band cube."""
    return _cube_axes(int(band))


def wavenumber_magnitude(band: int) -> np.ndarray:
    return np.sqrt(_cube_axes(int(band))[3].astype(np.float64))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid3
    coeffs: np.ndarray
    band: int
    hermitian: bool = True

    def __post_init__(self):
        c = self.coeffs
        side = 2 * self.band + 1
        if c.ndim != 4 or c.shape[1:] != (side, side, side):
            raise ParameterError(f"coefficient array shape {c.shape} does not match band {self.band}")
        if c.shape[0] not in (1, 3, 9):
            raise ParameterError(f"unsupported component count {c.shape[0]}")
        if self.band > self.grid.kmax:
            raise GeometryError(
                f"band {self.band} exceeds Nyquist bound {self.grid.kmax}",
                minimal_n=next_power_of_two(2 * self.band + 2),
            )
        c.setflags(write=False)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def coefficient(self, k, component: int = 0) -> complex:
        b = self.band
        if max(abs(int(x)) for x in k) > b:
            return 0j
        return complex(self.coeffs[component, k[0] + b, k[1] + b, k[2] + b])

    def with_coeffs(self, coeffs: np.ndarray, hermitian: bool | None = None) -> "SpectralField":
        herm = self.hermitian if hermitian is None else hermitian
        return SpectralField(self.grid, coeffs, self.band, herm)

    def scaled(self, factor: complex) -> "SpectralField":
        herm = self.hermitian and complex(factor).imag == 0
        return self.with_coeffs(self.coeffs * factor, herm)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        a, b = _common_band(self, other)
        return a.with_coeffs(a.coeffs + b.coeffs, a.hermitian and b.hermitian)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        a, b = _common_band(self, other)
        return a.with_coeffs(a.coeffs - b.coeffs, a.hermitian and b.hermitian)


def _common_band(a: SpectralField, b: SpectralField):
    if a.grid != b.grid or a.components != b.components:
        raise ParameterError("fields live on different grids or have different component counts")
    band = max(a.band, b.band)
    return rebanded(a, band), rebanded(b, band)


@dataclass(frozen=True)
class NormSpec:
    kind: str
    s: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        if self.kind not in ("sobolev", "l2", "l4"):
            raise ParameterError(f"unknown norm kind {self.kind!r}")
        object.__setattr__(self, "s", Fraction(self.s))

    @classmethod
    def sobolev(cls, s) -> "NormSpec":
        return cls("sobolev", Fraction(s))

    @classmethod
    def l2(cls) -> "NormSpec":
        return cls("l2")

    @classmethod
    def l4(cls) -> "NormSpec":
        return cls("l4")


def zeros(grid: Grid3, band: int, components: int = 3, hermitian: bool = True) -> SpectralField:
    side = 2 * band + 1
    return SpectralField(grid, np.zeros((components, side, side, side), complex), band, hermitian)


def single_mode(grid: Grid3, k, amplitude, band: int | None = None, real: bool = False) -> SpectralField:
    """Field with one nonzero wavevector (plus its mirror when ``real``)."""
    amp = np.atleast_1d(np.asarray(amplitude, dtype=complex))
    k = tuple(int(x) for x in k)
    if band is None:
        band = max(1, max(abs(x) for x in k))
    out = np.zeros((amp.size,) + (2 * band + 1,) * 3, complex)
    out[(slice(None),) + tuple(x + band for x in k)] += amp
    if real:
        out[(slice(None),) + tuple(-x + band for x in k)] += np.conj(amp)
    return SpectralField(grid, out, band, real)


def rebanded(f: SpectralField, band: int) -> SpectralField:
    """Crop or zero-pad the coefficient cube to a new band."""
    if band == f.band:
        return f
    side = 2 * band + 1
    out = np.zeros((f.components, side, side, side), complex)
    m = min(band, f.band)
    src = slice(f.band - m, f.band + m + 1)
    dst = slice(band - m, band + m + 1)
    out[:, dst, dst, dst] = f.coeffs[:, src, src, src]
    return SpectralField(f.grid, out, band, f.hermitian)


def on_grid(f: SpectralField, grid: Grid3) -> SpectralField:
    """The same band-limited function, sampled on another grid."""
    return SpectralField(grid, f.coeffs, f.band, f.hermitian)


def hermitian_residual(f: SpectralField) -> float:
    c = f.coeffs
    scale = np.max(np.abs(c))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(c - np.conj(c[:, ::-1, ::-1, ::-1]))) / scale)


def multiply_symbol(f: SpectralField, symbol: np.ndarray, hermitian: bool | None = None) -> SpectralField:
    """Apply a scalar Fourier multiplier given on the band cube."""
    return f.with_coeffs(f.coeffs * symbol[None], hermitian)


def _check_band_fits(grid: Grid3, band: int, what: str):
    if band > grid.kmax:
        raise GeometryError(
            f"{what}: band {band} exceeds Nyquist bound {grid.kmax}",
            minimal_n=next_power_of_two(2 * band + 2),
        )


def synth_band_field(
    grid: Grid3,
    lam: int,
    seed: int,
    divergence_free: bool = True,
    normalize: NormSpec | None = NormSpec.sobolev(1),
    components: int = 3,
) -> SpectralField:
    """Seeded Gaussian field on the open annulus lam/2 < |k| < 2 lam."""
    if not is_power_of_two(lam):
        raise ConfigurationError(f"lambda must be a power of two, got {lam}")
    if 2 * lam > grid.kmax:
        raise GeometryError(
            f"annulus up to 2*{lam} exceeds Nyquist bound {grid.kmax}",
            minimal_n=next_power_of_two(4 * lam + 2),
        )
    band = 2 * lam
    k1, k2, k3, ksq = wavevectors(band)
    shape = (2 * band + 1,) * 3
    mask = (4 * ksq > lam * lam) & (ksq < 4 * lam * lam)
    K1 = np.broadcast_to(k1, shape)[mask]
    K2 = np.broadcast_to(k2, shape)[mask]
    K3 = np.broadcast_to(k3, shape)[mask]
    coeffs = np.zeros((components,) + shape, complex)
    for c in range(components):
        z = rng.complex_normal(seed, K1, K2, K3, c)
        zm = rng.complex_normal(seed, -K1, -K2, -K3, c)
        coeffs[c][mask] = (z + np.conj(zm)) / math.sqrt(2.0)
    f = SpectralField(grid, coeffs, band, True)
    if divergence_free:
        f = leray_project(f)
    if normalize is not None:
        size = norm(f, normalize)
        if not size > 0:
            raise DegenerateSampleError("synthesized field vanished after projection")
        f = f.scaled(1.0 / size)
    return f


def synth_white_field(grid: Grid3, seed: int, components: int = 3, band: int | None = None) -> SpectralField:
    """Real-valued seeded field with Gaussian coefficients on the whole cube."""
    band = grid.kmax if band is None else band
    _check_band_fits(grid, band, "white field")
    k1, k2, k3, _ = wavevectors(band)
    shape = (2 * band + 1,) * 3
    K1, K2, K3 = (np.broadcast_to(k, shape) for k in (k1, k2, k3))
    coeffs = np.empty((components,) + shape, complex)
    for c in range(components):
        z = rng.complex_normal(seed, K1, K2, K3, c)
        coeffs[c] = (z + np.conj(z[::-1, ::-1, ::-1])) / math.sqrt(2.0)
    return SpectralField(grid, coeffs, band, True)


def leray_project(f: SpectralField) -> SpectralField:
    if f.components != 3:
        raise ParameterError("Leray projection needs a 3-component field")
    k1, k2, k3, ksq = wavevectors(f.band)
    inv = np.zeros(ksq.shape)
    np.divide(1.0, ksq, out=inv, where=ksq > 0)
    u = f.coeffs
    kdotu = (k1 * u[0] + k2 * u[1] + k3 * u[2]) * inv
    out = np.stack([u[0] - k1 * kdotu, u[1] - k2 * kdotu, u[2] - k3 * kdotu])
    return f.with_coeffs(out)


def divergence_residual(f: SpectralField) -> float:
    """max_k |k . f(k)|."""
    k1, k2, k3, _ = wavevectors(f.band)
    u = f.coeffs
    return float(np.max(np.abs(k1 * u[0] + k2 * u[1] + k3 * u[2])))


def norm(f: SpectralField, spec: NormSpec = NormSpec.l2()) -> float:
    if spec.kind == "l4":
        vals = to_physical(f)
        mag2 = np.sum(np.abs(vals) ** 2, axis=0)
        return float((f.grid.cell_volume * np.sum(mag2 * mag2)) ** 0.25)
    energy = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    s = spec.s if spec.kind == "sobolev" else Fraction(0)
    if s == 0:
        return float(math.sqrt(np.sum(energy)))
    ksq = wavevectors(f.band)[3]
    b = f.band
    if s < 0:
        total = float(np.sum(energy))
        if energy[b, b, b] > (1e-14) ** 2 * max(total, np.finfo(float).tiny):
            raise NormDomainError("negative-order homogeneous norm of a field with nonzero mean")
    weight = np.zeros(ksq.shape)
    np.power(ksq.astype(np.float64), float(s), out=weight, where=ksq > 0)
    return float(math.sqrt(np.sum(weight * energy)))


def _embed_indices(grid: Grid3, band: int):
    return np.arange(-band, band + 1) % grid.n


def to_physical(f: SpectralField) -> np.ndarray:
    """Sample on the grid; real array when the field is Hermitian."""
    n = f.grid.n
    b = f.band
    idx = _embed_indices(f.grid, b)
    if f.hermitian:
        out = np.empty((f.components, n, n, n))
        half = np.zeros((n, n, n // 2 + 1), complex)
        sel = np.ix_(idx, idx, np.arange(b + 1))
        for c in range(f.components):
            half[sel] = f.coeffs[c, :, :, b:]
            out[c] = sfft.irfftn(half, s=(n, n, n), norm="forward") * _PHYS
        return out
    out = np.empty((f.components, n, n, n), complex)
    full = np.zeros((n, n, n), complex)
    sel = np.ix_(idx, idx, idx)
    for c in range(f.components):
        full[sel] = f.coeffs[c]
        out[c] = sfft.ifftn(full, norm="forward") * _PHYS
    return out


def _forward_one(values: np.ndarray, grid: Grid3, band: int) -> np.ndarray:
    idx = _embed_indices(grid, band)
    if np.isrealobj(values):
        spec = sfft.rfftn(values, norm="forward")
        half = spec[np.ix_(idx, idx, np.arange(band + 1))]
        cube = np.empty((2 * band + 1,) * 3, complex)
        cube[:, :, band:] = half
        # negative k3 from the mirror: c(k1,k2,-k3) = conj(c(-k1,-k2,k3))
        cube[:, :, :band] = np.conj(half[::-1, ::-1, :0:-1])
    else:
        spec = sfft.fftn(values, norm="forward")
        cube = spec[np.ix_(idx, idx, idx)]
    return cube / _PHYS


def from_physical(values: np.ndarray, grid: Grid3, band: int) -> SpectralField:
    """Forward transform of sampled values, truncated to the band cube."""
    _check_band_fits(grid, band, "forward transform")
    values = np.asarray(values)
    if values.ndim == 3:
        values = values[None]
    real = np.isrealobj(values)
    coeffs = np.stack([_forward_one(v, grid, band) for v in values])
    return SpectralField(grid, coeffs, band, real)


def alias_free_grid(band_a: int, band_b: int, mu_out: float) -> int:
    return next_power_of_two(band_a + band_b + mu_out + 1)


def check_alias_rule(grid: Grid3, band_a: int, band_b: int, mu_out: float):
    if not band_a + band_b + mu_out < grid.n:
        raise GeometryError(
            f"alias rule violated: {band_a} + {band_b} + {mu_out:g} >= n = {grid.n}",
            minimal_n=alias_free_grid(band_a, band_b, mu_out),
        )


def pointwise_product(a: SpectralField, b: SpectralField, mu_out: float | None = None) -> SpectralField:
    """All component products a_i * b_j, flattened as index i * len(b) + j.

    Only the cube |k_i| <= mu_out is returned, and it is guaranteed free of
    aliasing by the rule band_a + band_b + mu_out < n.
    """
    if a.grid != b.grid:
        raise ParameterError("product of fields on different grids")
    grid = a.grid
    if mu_out is None:
        mu_out = a.band + b.band
    check_alias_rule(grid, a.band, b.band, mu_out)
    out_band = min(int(math.ceil(mu_out)), grid.kmax)
    pb = to_physical(b)
    blocks = []
    for i in range(a.components):
        ai = to_physical(SpectralField(grid, a.coeffs[i : i + 1], a.band, a.hermitian))[0]
        for j in range(b.components):
            blocks.append(_forward_one(ai * pb[j], grid, out_band))
        del ai
    real = a.hermitian and b.hermitian
    comps = np.stack(blocks)
    if comps.shape[0] not in (1, 3, 9):
        raise ParameterError(f"product has unsupported component count {comps.shape[0]}")
    return SpectralField(grid, comps, out_band, real)


def divergence(t: SpectralField) -> SpectralField:
    """Row divergence of a rank-2 tensor: (div T)_i = sum_j i k_j T_ij."""
    if t.components != 9:
        raise ParameterError("divergence expects a 9-component tensor field")
    k1, k2, k3, _ = wavevectors(t.band)
    c = t.coeffs
    out = np.stack([1j * (k1 * c[3 * i] + k2 * c[3 * i + 1] + k3 * c[3 * i + 2]) for i in range(3)])
    return t.with_coeffs(out)
