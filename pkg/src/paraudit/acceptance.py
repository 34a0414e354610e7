"""The twelve acceptance criteria as plain functions.

Each returns a CriterionResult with one line of detail per checked part, so
the command line and the test suite report the same thing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dyadic as dy
from . import harness as hs
from . import ledger as lg
from . import paraproduct as pp
from . import phase as ph
from . import spectral as sp
from . import window as wk
from .errors import ParauditError
from .rng import derive_seed

F = Fraction
DELTAS = (F(1, 4), F(1, 2), F(5, 8))
PHASE_LAMBDAS = tuple(2**j for j in range(6, 15))


@dataclass
class CriterionResult:
    number: int
    title: str
    parts: list = field(default_factory=list)  # (label, passed, detail)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.parts)

    def check(self, label: str, ok: bool, detail: str = ""):
        self.parts.append((label, bool(ok), detail))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [f"{label} ({detail})" if detail else label for label, ok, detail in self.parts if not ok]
        tail = "; failed: " + "; ".join(failed) if failed else ""
        return f"criterion {self.number:>2} {status}  {self.title}  [{self.seconds:.1f}s]{tail}"

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "seconds": self.seconds,
            "parts": [{"label": a, "passed": b, "detail": c} for a, b, c in self.parts],
        }


def _timed(number: int, title: str):
    def wrap(fn):
        def run(*args, **kw) -> CriterionResult:
            res = CriterionResult(number, title)
            t = time.perf_counter()
            try:
                fn(res, *args, **kw)
            except ParauditError as exc:
                res.check("ran without error", False, f"{type(exc).__name__}: {exc}")
            res.seconds = time.perf_counter() - t
            return res

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# ----------------------------------------------------------------------------


@_timed(1, "exact exponent ledger")
def criterion_1(res: CriterionResult):
    d = lg.AffineExponent
    t1 = lg.balance_table()
    res.check("table total", t1.total == d(-3, F(7, 4)), str(t1.total))
    res.check("minimal total", t1.minimal_total == d(-3, 2), str(t1.minimal_total))
    unfolded = lg.affine_sum(*lg.unfolded_plus_row())
    res.check("unfolded row sum", unfolded == d(1, -2), str(unfolded))
    res.check("epsilon series at 1/6", lg.EPSILON_SERIES(F(1, 6)) == F(-49, 12))
    res.check("epsilon series at 5/8", lg.EPSILON_SERIES(F(5, 8)) == F(-47, 16))
    sharp = {str(r.exponent): r.exponent for r in lg.sharp_rows()}
    res.check("sharp IBP row at 5/8", sharp[str(d(F(-19, 4), F(13, 2)))](F(5, 8)) == F(-11, 16))
    res.check("counting-sum row at 5/8", sharp[str(d(F(-13, 2), F(19, 2)))](F(5, 8)) == F(-9, 16))
    res.check("amplitude combination at 5/8", lg.amplitude_combination()(F(5, 8)) == F(-5, 8))
    res.check("scaling prediction at 5/8", lg.SCALING_PREDICTION(F(5, 8)) == F(-1, 8))
    th = lg.threshold(lg.ENDPOINT_ON_WINDOW, lg.ENDPOINT_TARGET)
    res.check("endpoint threshold", th.delta == F(5, 9), str(th.delta))
    g = lg.gap(lg.ENDPOINT_ON_WINDOW, lg.ENDPOINT_TARGET, F(5, 8))
    res.check("gap at 5/8", g == F(5, 32), str(g))


@_timed(2, "spectral core identities")
def criterion_2(res: CriterionResult, fields: int = 20, n: int = 64):
    g = sp.make_grid(n)
    worst = {"plancherel": 0.0, "round trip": 0.0, "leray idempotence": 0.0, "leray annihilation": 0.0, "hermitian": 0.0}
    for s in range(fields):
        lam = 2 ** (1 + s % 3)
        f = sp.synth_band_field(g, lam, 1000 + s, divergence_free=False) if s % 2 else sp.synth_white_field(g, 1000 + s, band=20)
        scale = sp.norm(f)
        phys = sp.to_physical(f)
        l2_phys = math.sqrt(g.cell_volume * float(np.sum(phys**2)))
        worst["plancherel"] = max(worst["plancherel"], abs(l2_phys - scale) / scale)
        back = sp.from_physical(phys, g, f.band)
        worst["round trip"] = max(worst["round trip"], sp.norm(back - f) / scale)
        p1 = sp.leray_project(f)
        worst["leray idempotence"] = max(worst["leray idempotence"], sp.norm(sp.leray_project(p1) - p1) / scale)
        phi = sp.synth_white_field(g, 2000 + s, components=1, band=f.band)
        k1, k2, k3, _ = sp.wavevectors(f.band)
        grad = phi.with_coeffs(np.stack([1j * k * phi.coeffs[0] for k in (k1, k2, k3)]))
        worst["leray annihilation"] = max(
            worst["leray annihilation"], sp.norm(sp.leray_project(grad)) / sp.norm(grad)
        )
        worst["hermitian"] = max(worst["hermitian"], sp.hermitian_residual(back) / scale, sp.hermitian_residual(p1) / scale)
    for name, value in worst.items():
        res.check(name, value < 1e-12, f"{value:.2e}")


@_timed(3, "dyadic and angular partitions")
def criterion_3(res: CriterionResult, samples: int = 10_000):
    rng = np.random.default_rng(3)
    r = 2.0 ** rng.uniform(-2, 30, samples)
    err = float(np.max(np.abs(dy.dyadic_sum(r) - 1.0)))
    res.check("dyadic partition of unity", err < 1e-12, f"{err:.2e}")
    fam = dy.build_cap_family(4096, F(2, 3))
    dirs = rng.standard_normal((samples, 3))
    rows, _, p = fam.symbol_entries(dirs)
    err = float(np.max(np.abs(np.bincount(rows, weights=p * p, minlength=samples) - 1.0)))
    res.check("squared cap partition", err < 1e-10, f"{err:.2e}")
    lam = 8
    g = sp.make_grid(64)
    f = sp.synth_band_field(g, lam, 5, divergence_free=False)
    small = dy.build_cap_family(lam, F(2, 3))
    mask, block = dy.cap_symbol_on_cube(small, np.arange(len(small)), f.band, lam)
    radial = dy.chi(np.sqrt(sp.wavevectors(f.band)[3][mask].astype(float)) / lam)
    energy_caps = float(np.sum(np.abs(f.coeffs[:, mask]) ** 2 * np.sum(block**2, axis=0)[None]))
    energy_ring = float(np.sum(np.abs(f.coeffs[:, mask]) ** 2 * radial[None] ** 2))
    err = abs(energy_caps - energy_ring) / energy_ring
    res.check("cap energy resummation", err < 1e-10, f"{err:.2e}")
    anti = fam.antipode
    closed = np.array_equal(fam.centers[anti], -fam.centers) and np.array_equal(anti[anti], np.arange(len(fam)))
    res.check("antipodal closure", closed)


@_timed(4, "low-pass commutes with Leray")
def criterion_4(res: CriterionResult, trials: int = 10):
    g = sp.make_grid(64)
    worst = max(pp.commutator_zero_check(mu, trials, g, seed=4) for mu in (4.0, 8.0, 16.0))
    res.check("max relative residual", worst < 1e-12, f"{worst:.2e}")


def _phase_samples(lam, delta, samples, seed):
    return ph.sample_resonant_pairs(lam, delta, np.random.default_rng(derive_seed(seed, lam, delta.numerator, delta.denominator)), samples)


@_timed(5, "phase geometry")
def criterion_5(res: CriterionResult, samples: int = 100_000, per_cell: int = 20_000):
    worst_angle = 0.0
    for lam in PHASE_LAMBDAS:
        eq = ph.sample_resonant_pairs(lam, F(1, 2), np.random.default_rng(lam), samples // len(PHASE_LAMBDAS) + 1, equal_radii=True)
        worst_angle = max(worst_angle, float(np.max(ph.angle_identity_residual(eq))) / lam)
    res.check("angle identity", worst_angle < 1e-10, f"{worst_angle:.2e} * lambda")
    sym_err, fd_err = 0.0, 0.0
    for lam in PHASE_LAMBDAS:
        eq = ph.sample_resonant_pairs(lam, F(1, 2), np.random.default_rng(lam + 1), 200, equal_radii=True)
        m = ph.hessian_rho(eq).m
        sym_err = max(
            sym_err,
            float(np.max(np.abs(m[:, 0, 0] - 2 / lam) / (2 / lam))),
            float(np.max(np.abs(m[:, 1, 1] - (2 / lam - 4 / eq.wnorm)) / np.abs(2 / lam - 4 / eq.wnorm))),
        )
    res.check("symmetric entries 2/lambda and 2/lambda - 4/|w|", sym_err < 1e-10, f"{sym_err:.2e}")
    for delta in DELTAS:
        minima = []
        for lam in PHASE_LAMBDAS:
            pair = _phase_samples(lam, delta, per_cell, 5)
            h = ph.hessian_rho(pair)
            fd = ph.fd_hessian_rho(pair)
            scale = np.max(np.abs(h.m), axis=(-2, -1))
            fd_err = max(fd_err, float(np.max(np.max(np.abs(fd - h.m), axis=(-2, -1)) / scale)))
            minima.append(float(np.min(np.abs(h.det))) * lam ** (2 - float(delta)))
        lo, hi = min(minima), max(minima)
        ok = lo > 0 and hi / lo <= 4
        res.check(f"min |det| lambda^(2-delta) stable, delta={delta}", ok, f"range {lo:.3g}..{hi:.3g}, spread {hi / lo if lo else math.inf:.3g}")
    res.check("finite differences", fd_err < 1e-5, f"{fd_err:.2e}")


@_timed(6, "null form")
def criterion_6(res: CriterionResult, per_cell: int = 20_000):
    violations = 0
    cross_min = math.inf
    total = 0
    for delta in DELTAS:
        maxima = []
        for lam in PHASE_LAMBDAS:
            pair = _phase_samples(lam, delta, per_cell, 6)
            bn = np.linalg.norm(ph.null_symbol(pair.xi, pair.eta), axis=-1)
            violations += int(np.sum(bn > np.linalg.norm(pair.eta, axis=-1) * (1 + 1e-12)))
            total += len(pair)
            maxima.append(float(np.max(ph.suppression_ratio(pair, delta))))
            cross_min = min(cross_min, float(np.min(ph.cross_lower_bound(pair, delta))))
        spread = max(maxima) / min(maxima)
        res.check(
            f"suppression stable within 4, delta={delta}",
            spread <= 4,
            f"max over samples from {maxima[0]:.3g} (lambda=64) to {maxima[-1]:.3g} (lambda=16384), spread {spread:.3g}",
        )
    res.check("|B| <= |eta|", violations == 0, f"{violations} of {total}")
    res.check(f"cross product >= {ph.CROSS_LOWER}", cross_min >= ph.CROSS_LOWER, f"min {cross_min:.4f}")


@_timed(7, "windows and kernel difference")
def criterion_7(res: CriterionResult, samples: int = 100_000):
    Ns = [2**j for j in range(6, 13)]
    spread = 0.0
    for k in range(wk.MAX_ORDER + 1):
        r = [wk.window_sup_ratio(k, N, F(1, 2))["ratio"] for N in Ns]
        spread = max(spread, (max(r) - min(r)) / max(r))
    res.check("window sup ratio independent of N", spread < 1e-10, f"{spread:.2e}")
    rng = np.random.default_rng(7)
    fact, bound_viol = 0.0, 0
    for N in Ns:
        t = rng.uniform(0, 700.0 / N**2, samples // len(Ns) + 1)
        a, b, c = wk.kernel_diff(t, N), wk.kernel_diff_alt(t, N), wk.kernel_diff_direct(t, N)
        fact = max(fact, float(np.max(np.abs(a - b))), float(np.max(np.abs(a - c))))
        tb = rng.uniform(0, 50.0 / N**2, samples // len(Ns) + 1)
        bound_viol += int(np.sum(np.abs(wk.kernel_diff(tb, N)) > wk.kernel_diff_bound(tb, N) * (1 + 1e-12)))
    res.check("factorizations agree", fact < 1e-13, f"{fact:.2e}")
    res.check("pointwise bound with sqrt 2", bound_viol == 0, f"{bound_viol} violations")
    quad_err, normalized = 0.0, []
    for N in Ns:
        r = wk.kernel_diff_l2(N, F(1, 2))
        quad_err = max(quad_err, abs(r["quadrature_sq"] - r["closed_form_sq"]) / r["closed_form_sq"])
        normalized.append(r["normalized"])
    res.check("quadrature vs closed form", quad_err < 1e-8, f"{quad_err:.2e}")
    spread = max(normalized) / min(normalized) - 1
    res.check("normalized L2 stable within 10%", spread <= 0.1, f"{spread:.3%}")


@_timed(8, "tile to max with constant 1")
def criterion_8(res: CriterionResult, trials: int = 1000):
    cfg = hs.SweepConfig("tile-max", lambdas=(1,), trials=trials, seed=8)
    recs = hs.run_sweep(cfg)
    violations = sum(int(r.value("violations")) for r in recs)
    worst = max(r.normalized for r in recs)
    res.check("zero violations", violations == 0, f"{violations} of {3 * trials}, worst ratio {worst:.6f}")


@_timed(9, "paraproduct conformance sweep")
def criterion_9(res: CriterionResult, lambdas=(4, 8, 16), trials: int = 4):
    for delta in DELTAS:
        cfg = hs.SweepConfig("scaling", lambdas=lambdas, delta=delta, trials=trials, seed=42, grid_rule=5)
        recs = hs.run_sweep(cfg)
        errors = [r.error for r in recs if r.error]
        chain = sum(1 for r in recs if not r.error and not r.value("chain_ok"))
        support = sum(1 for r in recs if not r.error and not r.value("support_ok"))
        above = sum(1 for r in recs if not r.error and r.value("ratio") > r.lam ** float(r.predicted_exponent))
        res.check(f"cells ran, delta={delta}", not errors, "; ".join(errors[:2]))
        res.check(f"chain and support, delta={delta}", chain == 0 and support == 0, f"{chain} chain, {support} support")
        res.check(f"ratio <= lambda^(-2+3 delta), delta={delta}", above == 0, f"{above} above")
        fit = hs.fit_exponent(recs)
        pred = float(lg.SCALING_PREDICTION(delta))
        res.check(f"slope <= {pred:g} + 0.2, delta={delta}", fit.slope <= pred + 0.2, f"slope {fit.slope:.3f}")


@_timed(10, "local L4 on a tile")
def criterion_10(res: CriterionResult, lambdas=(8, 16, 32)):
    for prop in ("schrodinger", "heat"):
        cfg = hs.SweepConfig("local-l4", lambdas=lambdas, delta=F(1, 2), seed=10, propagator=prop)
        recs = hs.run_sweep(cfg)
        errors = [r.error for r in recs if r.error]
        res.check(f"cells ran, {prop}", not errors, "; ".join(errors[:2]))
        if errors:
            continue
        vals = [r.normalized for r in recs]
        bounded = all(math.isfinite(v) and v > 0 for v in vals)
        monotone = all(b <= 1.2 * a for a, b in zip(vals, vals[1:]))
        res.check(f"normalized bounded and non-increasing, {prop}", bounded and monotone, ", ".join(f"{v:.4g}" for v in vals))


@_timed(11, "commutator scaling")
def criterion_11(res: CriterionResult, mus=(8, 16, 32, 64), chained=(8, 16, 32), n: int = 128):
    cfg = hs.SweepConfig("commutator", lambdas=mus, grid_n=n, seed=11, iters=400, method="lanczos")
    recs = hs.run_sweep(cfg)
    errors = [r.error for r in recs if r.error]
    res.check("commutator cells ran", not errors, "; ".join(errors[:2]))
    if not errors:
        norms = [r.value("norm") for r in recs]
        res.check("estimates converged", all(r.value("converged") for r in recs))
        for (m0, a), (m1, b) in zip(zip(mus, norms), zip(mus[1:], norms[1:])):
            q = b / a
            res.check(f"halves from mu={m0} to mu={m1}", 0.35 <= q <= 0.65, f"{a:.4g} -> {b:.4g}, factor {q:.3f}")
    cfg = hs.SweepConfig("commutator", lambdas=chained, delta=F(1, 2), chained=True, seed=11)
    recs = hs.run_sweep(cfg)
    errors = [r.error for r in recs if r.error]
    res.check("chained cells ran", not errors, "; ".join(errors[:2]))
    if not errors:
        ratios = [r.value("ratio") for r in recs]
        res.check("chained ratio bounded", max(ratios) <= 4 * ratios[0], ", ".join(f"{v:.3g}" for v in ratios))


@_timed(12, "determinism across worker counts")
def criterion_12(res: CriterionResult, lambdas=(4, 8, 16), trials: int = 4):
    base = hs.SweepConfig("scaling", lambdas=lambdas, delta=F(1, 2), trials=trials, seed=42, grid_rule=5)
    texts = [hs.to_csv(hs.run_sweep(hs.with_overrides(base, workers=w))) for w in (1, 8)]
    res.check("byte-identical CSV at 1 and 8 workers", texts[0] == texts[1], f"{len(texts[0])} bytes")


CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
    criterion_11,
    criterion_12,
)


def run_all(full: bool = False, echo=None) -> list[CriterionResult]:
    """Quick mode keeps every grid at n <= 64; full mode runs every criterion as stated."""
    if full:
        jobs = [lambda c=c: c() for c in CRITERIA]
    else:
        jobs = [lambda c=c: c() for c in CRITERIA[:8]]
        jobs.append(lambda: criterion_9(lambdas=(4, 8), trials=2))
        jobs.append(lambda: criterion_12(lambdas=(4, 8), trials=2))
    out = []
    for job in jobs:
        r = job()
        if echo:
            echo(r.line())
        out.append(r)
    return out
