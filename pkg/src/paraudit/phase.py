"""Phase omega = |xi| + |eta| - |xi + eta| and its geometry near resonance.

All functions accept single 3-vectors or stacks of shape (N, 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ledger import as_fraction

# Sampler contract: |w| / lam^(1-delta) lies in W_BOUNDS (derivation in
# sample_resonant_pairs); the other constants follow from it.
W_BOUNDS = (0.44, 2.7)
HEAT_PHASE_BOUNDS = (W_BOUNDS[0] ** 2, W_BOUNDS[1] ** 2)
HEAT_SAFETY_CONSTANT = 1.0 / W_BOUNDS[0] ** 2
CROSS_LOWER = 0.35
THETA_WINDOW = (0.5, 2.0)


def _norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=-1)


def _nonzero(*pairs):
    for name, value in pairs:
        if np.any(np.asarray(value) == 0):
            raise DomainError(f"{name} vanishes")


@dataclass(frozen=True, eq=False)
class FreqPair:
    xi: np.ndarray
    eta: np.ndarray
    lam: float

    @property
    def w(self) -> np.ndarray:
        return self.xi + self.eta

    @property
    def wnorm(self) -> np.ndarray:
        return _norm(self.w)

    @property
    def theta(self) -> np.ndarray:
        """Angle between xi and -eta."""
        return angle(self.xi, -self.eta)

    def __len__(self) -> int:
        return 1 if self.xi.ndim == 1 else self.xi.shape[0]

    def __getitem__(self, i) -> "FreqPair":
        return FreqPair(self.xi[i], self.eta[i], self.lam)


def angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.arctan2(_norm(np.cross(u, v)), np.sum(u * v, axis=-1))


def omega(xi, eta) -> np.ndarray:
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    a, b, c = _norm(xi), _norm(eta), _norm(xi + eta)
    _nonzero(("|xi|", a), ("|eta|", b), ("|xi+eta|", c))
    return a + b - c


def grad_omega(xi, eta):
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    w = xi + eta
    a, b, c = _norm(xi), _norm(eta), _norm(w)
    _nonzero(("|xi|", a), ("|eta|", b), ("|xi+eta|", c))
    wh = w / c[..., None]
    return xi / a[..., None] - wh, eta / b[..., None] - wh


@dataclass(frozen=True, eq=False)
class TransverseFrame:
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray


def transverse_frame(w) -> TransverseFrame:
    """Orthonormal frame with v3 = w/|w|; v1 comes from the least aligned axis."""
    w = np.asarray(w, float)
    nw = _norm(w)
    _nonzero(("|w|", nw))
    v3 = w / nw[..., None]
    axis = np.argmin(np.abs(v3), axis=-1)
    e = np.zeros(v3.shape)
    np.put_along_axis(e, np.asarray(axis)[..., None], 1.0, axis=-1)
    v1 = e - np.sum(e * v3, axis=-1)[..., None] * v3
    v1 = v1 / _norm(v1)[..., None]
    v2 = np.cross(v3, v1)
    return TransverseFrame(v1, v2, v3)


def transverse_direction(xi, eta) -> np.ndarray:
    """Unit normal to span(xi, eta), or frame v1 when xi and eta are parallel."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    n = np.cross(xi, eta)
    nn = _norm(n)
    degenerate = nn <= 1e-12 * _norm(xi) * _norm(eta)
    out = n / np.where(degenerate, 1.0, nn)[..., None]
    if np.any(degenerate):
        fallback = transverse_frame(xi + eta).v1
        out = np.where(degenerate[..., None], fallback, out)
    return out


def _perp(x: np.ndarray) -> np.ndarray:
    """Hessian of |x|: (Id - x x^T / |x|^2) / |x|, stacked."""
    r = _norm(x)
    xh = x / r[..., None]
    eye = np.eye(3)
    return (eye - xh[..., :, None] * xh[..., None, :]) / r[..., None, None]


def block_hessian(xi, eta) -> np.ndarray:
    """Full 6x6 Hessian of omega in (xi, eta)."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    w = xi + eta
    _nonzero(("|xi|", _norm(xi)), ("|eta|", _norm(eta)), ("|xi+eta|", _norm(w)))
    hw = _perp(w)
    top = np.concatenate([_perp(xi) - hw, -hw], axis=-1)
    bottom = np.concatenate([-hw, _perp(eta) - hw], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


@dataclass(frozen=True, eq=False)
class HessianRho:
    m: np.ndarray
    det: np.ndarray
    eigs: np.ndarray
    flagged: np.ndarray


def hessian_basis(xi, eta):
    """e_minus = (v, -v), e_plus = (v, v) with v normal to span(xi, eta).

    The vectors are left unnormalized (length sqrt 2): this is the scaling in
    which the symmetric-configuration entries read 2/lam and 2/lam - 4/|w|.
    """
    v = transverse_direction(xi, eta)
    return np.concatenate([v, -v], axis=-1), np.concatenate([v, v], axis=-1)


def hessian_rho(pair: FreqPair) -> HessianRho:
    h = block_hessian(pair.xi, pair.eta)
    em, ep = hessian_basis(pair.xi, pair.eta)
    hem = np.einsum("...ij,...j->...i", h, em)
    hep = np.einsum("...ij,...j->...i", h, ep)
    mm = np.sum(em * hem, axis=-1)
    pp = np.sum(ep * hep, axis=-1)
    mp = np.sum(em * hep, axis=-1)
    m = np.stack([np.stack([mm, mp], -1), np.stack([mp, pp], -1)], -2)
    det = mm * pp - mp * mp
    eigs = np.linalg.eigvalsh(m)
    flagged = pair.theta < float(pair.lam) ** (-2.0 / 3.0)
    return HessianRho(m, det, eigs, flagged)


def _norm_second_difference(x: np.ndarray, d: np.ndarray, rel_step: float) -> np.ndarray:
    """d^T (Hess |x|) d by a central second difference with step rel_step*|x|."""
    dn = _norm(d)
    zero = dn == 0
    h = rel_step * _norm(x) / np.where(zero, 1.0, dn)
    hv = h[..., None]
    out = (_norm(x + hv * d) - 2.0 * _norm(x) + _norm(x - hv * d)) / (h * h)
    return np.where(zero, 0.0, out)


def fd_quadratic_form(xi, eta, e: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """<H e, e> from finite differences of the three norms that make up omega.

    Each term gets a step proportional to its own argument, so the |w| term is
    resolved even when |w| is much smaller than lam.
    """
    exi, eeta = e[..., :3], e[..., 3:]
    return (
        _norm_second_difference(xi, exi, rel_step)
        + _norm_second_difference(eta, eeta, rel_step)
        - _norm_second_difference(xi + eta, exi + eeta, rel_step)
    )


def fd_hessian_rho(pair: FreqPair, rel_step: float = 1e-4) -> np.ndarray:
    em, ep = hessian_basis(pair.xi, pair.eta)
    mm = fd_quadratic_form(pair.xi, pair.eta, em, rel_step)
    pp = fd_quadratic_form(pair.xi, pair.eta, ep, rel_step)
    mp = 0.25 * (
        fd_quadratic_form(pair.xi, pair.eta, em + ep, rel_step)
        - fd_quadratic_form(pair.xi, pair.eta, em - ep, rel_step)
    )
    return np.stack([np.stack([mm, mp], -1), np.stack([mp, pp], -1)], -2)


def fd_grad_omega(xi, eta, rel_step: float = 1e-5):
    """Central-difference gradient, one norm term at a time."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)

    def grad_norm(x):
        h = rel_step * _norm(x)
        out = np.empty(x.shape)
        for i in range(3):
            d = np.zeros(3)
            d[i] = 1.0
            out[..., i] = (_norm(x + h[..., None] * d) - _norm(x - h[..., None] * d)) / (2 * h)
        return out

    gw = grad_norm(xi + eta)
    return grad_norm(xi) - gw, grad_norm(eta) - gw


def radial_slack(lam: float, delta) -> float:
    """Half-width of the radial window, kept small enough that |w| ~ lam^(1-delta)."""
    return min(0.1, 0.25 * float(lam) ** -float(as_fraction(delta)))


def sample_resonant_pairs(lam: float, delta, rng: np.random.Generator, size: int, equal_radii: bool = False) -> FreqPair:
    """Random resonant configurations.

    theta is uniform in [0.5, 2] lam^-delta and the radii are uniform in
    lam [1 - s, 1 + s] with s = min(0.1, 0.25 lam^-delta). Then
    2 lam (1 - s) sin(theta/2) <= |w| <= 2 s lam + (1 + s) lam theta, which
    puts |w| / lam^(1-delta) in W_BOUNDS for every lam >= 16.
    """
    d = float(as_fraction(delta))
    a = rng.standard_normal((size, 3))
    a /= _norm(a)[:, None]
    b = rng.standard_normal((size, 3))
    b -= np.sum(a * b, axis=1)[:, None] * a
    b /= _norm(b)[:, None]
    theta = rng.uniform(THETA_WINDOW[0], THETA_WINDOW[1], size) * lam**-d
    if equal_radii:
        rx = ry = np.full(size, float(lam))
    else:
        s = radial_slack(lam, delta)
        rx = lam * rng.uniform(1 - s, 1 + s, size)
        ry = lam * rng.uniform(1 - s, 1 + s, size)
    xi = rx[:, None] * a
    eta = -ry[:, None] * (np.cos(theta)[:, None] * a + np.sin(theta)[:, None] * b)
    return FreqPair(xi, eta, float(lam))


def sample_resonant_pair(lam: float, delta, rng: np.random.Generator, equal_radii: bool = False) -> FreqPair:
    return sample_resonant_pairs(lam, delta, rng, 1, equal_radii)[0]


def null_symbol(xi, eta) -> np.ndarray:
    """B = eta minus its component along w = xi + eta."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    w = xi + eta
    ww = np.sum(w * w, axis=-1)
    _nonzero(("|xi+eta|", ww))
    return eta - (np.sum(eta * w, axis=-1) / ww)[..., None] * w


def suppression_ratio(pair: FreqPair, delta) -> np.ndarray:
    """(|B|/|w|) (|w|/lam)^2 lam^(2-3 delta)."""
    d = float(as_fraction(delta))
    bn = _norm(null_symbol(pair.xi, pair.eta))
    wn = pair.wnorm
    lam = float(pair.lam)
    return (bn / wn) * (wn / lam) ** 2 * lam ** (2 - 3 * d)


def cross_lower_bound(pair: FreqPair, delta) -> np.ndarray:
    d = float(as_fraction(delta))
    return _norm(np.cross(pair.xi, pair.eta)) * float(pair.lam) ** -(2 - d)


def heat_phase(xi, eta) -> np.ndarray:
    w = np.asarray(xi, float) + np.asarray(eta, float)
    return np.sum(w * w, axis=-1)


def heat_phase_safety(lam: float, delta) -> float:
    d = float(as_fraction(delta))
    return max(lam ** (-2 + 2 * d), lam**-1.0)


def angle_identity_residual(pair: FreqPair) -> np.ndarray:
    """| |w| - 2 lam sin(theta/2) | for equal-radius pairs."""
    return np.abs(pair.wnorm - 2.0 * pair.lam * np.sin(pair.theta / 2.0))


def exact_constants() -> dict:
    return {
        "w_bounds": W_BOUNDS,
        "heat_phase_bounds": HEAT_PHASE_BOUNDS,
        "heat_safety_constant": HEAT_SAFETY_CONSTANT,
        "cross_lower": CROSS_LOWER,
        "theta_window": THETA_WINDOW,
    }
