"""Gaussian time windows, the heat/Schrodinger kernel difference, and the
tile-to-max inequality on a single time window."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, ParameterError
from .ledger import as_fraction

MAX_ORDER = 8
KERNEL_CONSTANT = math.sqrt(2.0)  # |e^z - 1| <= |z| for Re z <= 0, and |1+i| = sqrt 2
TILE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class GaussWindow:
    Lam: float
    N: float | None = None
    delta: object = None

    def __post_init__(self):
        if not self.Lam > 0:
            raise ParameterError("window parameter must be positive")

    @classmethod
    def from_frequency(cls, N: float, delta) -> "GaussWindow":
        d = as_fraction(delta)
        return cls(float(N) ** (1.5 - float(d)), float(N), d)

    @property
    def width(self) -> float:
        return self.Lam**-0.5


def hermite(k: int, z) -> np.ndarray:
    """Physicists' Hermite polynomial by the three-term recurrence."""
    z = np.asarray(z, dtype=np.float64)
    h_prev, h = np.ones_like(z), 2.0 * z
    if k == 0:
        return h_prev
    for j in range(1, k):
        h_prev, h = h, 2.0 * z * h - 2.0 * j * h_prev
    return h


def _check_order(k: int):
    if not (isinstance(k, (int, np.integer)) and 0 <= k <= MAX_ORDER):
        raise ParameterError(f"derivative order must be an integer in [0, {MAX_ORDER}], got {k}")


def window_derivative(k: int, w: GaussWindow, t) -> np.ndarray:
    """d^k/dt^k exp(-Lam t^2) = (-1)^k Lam^(k/2) H_k(sqrt(Lam) t) exp(-Lam t^2)."""
    _check_order(k)
    t = np.asarray(t, dtype=np.float64)
    z = math.sqrt(w.Lam) * t
    return (-1) ** k * w.Lam ** (k / 2) * hermite(k, z) * np.exp(-z * z)


def hermite_function_max(k: int, points: int = 100_001, zmax: float = 6.0) -> float:
    """max_z |H_k(z) exp(-z^2)|: dense grid, then a bounded local refinement."""
    _check_order(k)
    z = np.linspace(-zmax, zmax, points)
    vals = np.abs(hermite(k, z) * np.exp(-z * z))
    i = int(np.argmax(vals))
    h = z[1] - z[0]
    res = minimize_scalar(
        lambda x: -abs(float(hermite(k, x) * math.exp(-x * x))),
        bounds=(z[max(i - 1, 0)] - h, z[min(i + 1, points - 1)] + h),
        method="bounded",
        options={"xatol": 1e-14},
    )
    return max(float(vals[i]), -float(res.fun))


def window_sup_ratio(k: int, N: float, delta) -> dict:
    _check_order(k)
    w = GaussWindow.from_frequency(N, delta)
    constant = hermite_function_max(k)
    sup = w.Lam ** (k / 2) * constant
    bound = float(N) ** ((0.75 - float(as_fraction(delta)) / 2) * k)
    return {"sup": sup, "bound": bound, "ratio": sup / bound}


# ----------------------------------------------------------------------------
# heat versus Schrodinger


def kernel_diff(t, N: float) -> np.ndarray:
    """e^{-tN^2} - e^{itN^2}, written as e^{itN^2} (e^{-(1+i)tN^2} - 1)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("kernel difference is only used for t >= 0")
    s = t * float(N) ** 2
    return np.exp(1j * s) * np.expm1(-(1 + 1j) * s)


def kernel_diff_alt(t, N: float) -> np.ndarray:
    """Second factorization e^{-tN^2} (1 - e^{(1+i)tN^2}); finite while tN^2 < 709."""
    t = np.asarray(t, dtype=np.float64)
    s = t * float(N) ** 2
    return np.exp(-s) * -np.expm1((1 + 1j) * s)


def kernel_diff_direct(t, N: float) -> np.ndarray:
    s = np.asarray(t, dtype=np.float64) * float(N) ** 2
    return np.exp(-s) - np.exp(1j * s)


def kernel_diff_bound(t, N: float) -> np.ndarray:
    s = np.asarray(t, dtype=np.float64) * float(N) ** 2
    return np.minimum(2.0, KERNEL_CONSTANT * s)


def kernel_window(N: float, delta) -> float:
    """Right end of I+ = [0, N^(-3/2 + delta)]."""
    return float(N) ** (-1.5 + float(as_fraction(delta)))


def kernel_diff_sq_closed(freq: float, T: float) -> float:
    """Closed form of int_0^T |e^{-t f^2} - e^{i t f^2}|^2 dt."""
    f2 = float(freq) ** 2
    S = T * f2
    return (-0.5 * math.expm1(-2.0 * S) - math.exp(-S) * (math.sin(S) - math.cos(S)) - 1.0 + S) / f2


def _kernel_sq_integrand(t, freq):
    s = np.asarray(t) * float(freq) ** 2
    return np.exp(-2.0 * s) - 2.0 * np.exp(-s) * np.cos(s) + 1.0


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature, processing every open interval of a level at once."""
    fa, fm, fb = f(np.array([a, 0.5 * (a + b), b]))
    lo, hi = np.array([a]), np.array([b])
    flo, fmid, fhi = np.array([fa]), np.array([fm]), np.array([fb])
    whole = (hi - lo) / 6.0 * (flo + 4 * fmid + fhi)
    eps = np.array([tol])
    total = 0.0
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        err = left + right - whole
        done = np.abs(err) <= 15.0 * eps
        total += float(np.sum((left + right + err / 15.0)[done]))
        keep = ~done
        if not keep.any():
            return total
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        flo, fmid, fhi = flo[keep], fmid[keep], fhi[keep]
        flm, frm, left, right, eps = flm[keep], frm[keep], left[keep], right[keep], eps[keep]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        flo, fhi = np.concatenate([flo, fmid]), np.concatenate([fmid, fhi])
        fmid = np.concatenate([flm, frm])
        whole = np.concatenate([left, right])
        eps = np.concatenate([eps, eps]) / 2.0
    total += float(np.sum(whole))
    return total


def kernel_diff_l2(N: float, delta) -> dict:
    T = kernel_window(N, delta)
    # the integrand is 0 at t=0 and ~1 after a few periods; seed with one panel per period
    period = 2 * math.pi / float(N) ** 2
    edges = np.unique(np.concatenate([np.arange(0.0, min(T, 40 * period), period), [T]]))
    tol = 1e-12 * T
    quad = sum(
        adaptive_simpson(lambda t: _kernel_sq_integrand(t, N), a, b, tol / (len(edges) - 1))
        for a, b in zip(edges[:-1], edges[1:])
    )
    closed = kernel_diff_sq_closed(N, T)
    pred = float(N) ** (-0.75 + float(as_fraction(delta)) / 2)
    return {
        "quadrature": math.sqrt(quad),
        "closed_form": math.sqrt(closed),
        "normalized": math.sqrt(quad) / pred,
        "quadrature_sq": quad,
        "closed_form_sq": closed,
    }


def remainder_l2_bound(N: float, delta, f_norm: float) -> float:
    if f_norm < 0:
        raise ParameterError("f_norm must be nonnegative")
    return kernel_diff_l2(N, delta)["quadrature"] * f_norm


# ----------------------------------------------------------------------------
# tile to max


@dataclass(frozen=True, eq=False)
class SampledSignal:
    a: float
    b: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.b > self.a:
            raise ParameterError("interval must have b > a")
        if np.asarray(self.samples).shape[0] < 16:
            raise ParameterError("need at least 16 samples")

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> float:
        return self.b - self.a

    def times(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.m)

    def l2(self) -> float:
        dt = self.length / (self.m - 1)
        v = np.abs(self.samples) ** 2
        return math.sqrt(dt * (np.sum(v) - 0.5 * (v[0] + v[-1])))


def tile_to_max_check(F: SampledSignal, Fp: SampledSignal) -> dict:
    if F.m != Fp.m or F.a != Fp.a or F.b != Fp.b:
        raise ParameterError("signal and derivative samples are on different grids")
    L = F.length
    lhs = float(np.max(np.abs(F.samples)))
    rhs = L**-0.5 * F.l2() + L**0.5 * Fp.l2()
    return {"lhs": lhs, "rhs": rhs, "pass": lhs <= rhs * (1 + TILE_TOLERANCE)}


def random_trig_signal(rng: np.random.Generator, a: float, b: float, degree: int, m: int = 2049):
    """A random complex trigonometric polynomial periodic on [a, b] and its exact derivative."""
    L = b - a
    j = np.arange(-degree, degree + 1)
    c = (rng.standard_normal(j.size) + 1j * rng.standard_normal(j.size)) / (1.0 + np.abs(j)) ** rng.uniform(0, 2)
    t = np.linspace(a, b, m)
    phase = np.exp(2j * np.pi * np.outer(t - a, j) / L)
    F = phase @ c
    Fp = phase @ (c * 2j * np.pi * j / L)
    return SampledSignal(a, b, F), SampledSignal(a, b, Fp)
