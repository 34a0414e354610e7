"""Sweep orchestration, exponent fits and CSV/JSON emission.

A sweep is a grid of (lambda, trial) cells. Each cell is a pure function of
the config, so cells may run in any order on any number of worker processes;
the collected records are sorted before anything is written.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from fractions import Fraction

import numpy as np

from . import __version__
from . import ledger as lg
from . import paraproduct as pp
from . import phase as ph
from . import window as wk
from .dyadic import build_cap_family
from .errors import ConfigurationError, FitError, ParauditError, ResourceError
from .rng import derive_seed
from .spectral import is_power_of_two, make_grid, next_power_of_two, synth_band_field

WORKERS_ENV = "PARAUDIT_WORKERS"
DEFAULT_MEMORY_CAP = 4 * 2**30
FIELD_COPIES = 9  # complex fields at n^3 held by the heaviest cell

EXPERIMENTS = (
    "scaling",
    "local-l4",
    "decoupling",
    "commutator",
    "hessian",
    "angles",
    "window",
    "kernel",
    "ledger",
    "tile-max",
)

# grid multiplier floor per experiment; None means the experiment has no grid rule
GRID_MINIMUM = {"scaling": 5, "decoupling": 5, "local-l4": 8, "commutator": 5}
GRID_DEFAULT = {"scaling": 5, "decoupling": 5, "local-l4": 8, "commutator": 5}

CSV_COLUMNS = (
    "experiment",
    "lambda",
    "delta_num",
    "delta_den",
    "trial",
    "seed",
    "value_name",
    "value",
    "predicted_exponent",
    "normalized",
    "walltime_ms",
)


@dataclass(frozen=True)
class SweepConfig:
    experiment: str
    lambdas: tuple = ()
    delta: Fraction = Fraction(1, 2)
    trials: int = 1
    seed: int = 0
    grid_rule: int | None = None
    samples: int = 10_000
    k: int = 5
    propagator: str = "schrodinger"
    chained: bool = False
    grid_n: int = 128
    rho: Fraction = Fraction(2, 3)
    bump_degree: int = pp.BUMP_DEGREE
    iters: int = 200
    method: str = "lanczos"
    memory_cap: int = DEFAULT_MEMORY_CAP
    workers: int | None = None
    timing: bool = False
    strict: bool = False
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(int(x) for x in self.lambdas))
        object.__setattr__(self, "delta", lg.as_fraction(self.delta))
        object.__setattr__(self, "rho", lg.as_fraction(self.rho))
        if self.grid_rule is None and self.experiment in GRID_DEFAULT:
            object.__setattr__(self, "grid_rule", GRID_DEFAULT[self.experiment])

    def validate(self) -> "SweepConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        if not self.lambdas:
            raise ConfigurationError("empty lambda list")
        for lam in self.lambdas:
            if lam < 1 or not is_power_of_two(lam):
                raise ConfigurationError(f"lambda = {lam} is not dyadic")
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if not 0 < self.delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        floor = GRID_MINIMUM.get(self.experiment)
        if floor is not None and (self.grid_rule is None or self.grid_rule < floor):
            raise ConfigurationError(f"grid rule m = {self.grid_rule} below the minimum {floor} for {self.experiment}")
        if self.samples < 1:
            raise ConfigurationError("samples must be positive")
        if self.experiment == "window" and not 0 <= self.k <= wk.MAX_ORDER:
            raise ConfigurationError(f"derivative order k = {self.k} outside [0, {wk.MAX_ORDER}]")
        return self

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        out.pop("workers")  # schedule is not part of the result
        out.pop("out")
        return out


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    lam: int
    delta: Fraction
    trial: int
    seed: int
    values: tuple
    predicted: lg.AffineExponent
    normalized: float
    walltime_ms: float = 0.0
    error: str | None = None

    @property
    def predicted_exponent(self) -> Fraction:
        return self.predicted(self.delta)

    def value(self, name: str) -> float:
        for k, v in self.values:
            if k == name:
                return v
        raise KeyError(name)

    def sort_key(self):
        return (self.experiment, self.lam, self.trial)

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "lambda": self.lam,
            "delta": str(self.delta),
            "trial": self.trial,
            "seed": self.seed,
            "values": [[k, v] for k, v in self.values],
            "predicted": {"a": str(self.predicted.a), "b": str(self.predicted.b)},
            "predicted_exponent": str(self.predicted_exponent),
            "normalized": self.normalized,
            "walltime_ms": self.walltime_ms,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentRecord":
        return cls(
            d["experiment"],
            int(d["lambda"]),
            Fraction(d["delta"]),
            int(d["trial"]),
            int(d["seed"]),
            tuple((k, float(v)) for k, v in d["values"]),
            lg.AffineExponent(Fraction(d["predicted"]["a"]), Fraction(d["predicted"]["b"])),
            float(d["normalized"]),
            float(d["walltime_ms"]),
            d["error"],
        )


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    points: int


# ----------------------------------------------------------------------------
# experiment cells


def _cell_seed(cfg: SweepConfig, lam: int, trial: int, stream: int = 0) -> int:
    return derive_seed(cfg.seed, EXPERIMENTS.index(cfg.experiment), lam, trial, stream)


def _rng(cfg: SweepConfig, lam: int, trial: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(_cell_seed(cfg, lam, trial, stream))


def grid_size(cfg: SweepConfig, lam: int) -> int:
    """Grid side the cell for lam will use, or 0 for grid-free experiments."""
    e = cfg.experiment
    if e in ("scaling", "decoupling"):
        return next_power_of_two(cfg.grid_rule * lam)
    if e == "local-l4":
        cyl = pp.make_cylinder(lam, cfg.delta)
        return max(next_power_of_two(cfg.grid_rule * lam), pp.minimal_tile_grid(lam, cyl.radius))
    if e == "commutator":
        return next_power_of_two(cfg.grid_rule * lam) if cfg.chained else cfg.grid_n
    return 0


def _scaling_cell(cfg, lam, trial):
    g = make_grid(grid_size(cfg, lam))
    u = synth_band_field(g, lam, _cell_seed(cfg, lam, trial, 0))
    v = synth_band_field(g, lam, _cell_seed(cfg, lam, trial, 1))
    m = pp.measure_paraproduct(u, v, lam, cfg.delta)
    pred = lg.SCALING_PREDICTION
    values = (
        ("hminus1", m.hminus1),
        ("low_tensor_l2", m.low_tensor_l2),
        ("tensor_l2", m.tensor_l2),
        ("ratio", m.ratio),
        ("chain_ok", float(m.chain_ok)),
        ("support_ok", float(m.support_ok)),
    )
    return values, pred, m.ratio / float(lam) ** float(pred(cfg.delta))


def _local_l4_cell(cfg, lam, trial):
    g = make_grid(grid_size(cfg, lam))
    cyl = pp.make_cylinder(lam, cfg.delta)
    r = pp.local_l4_ratio(lam, cfg.delta, g, _cell_seed(cfg, lam, trial), cyl, cfg.propagator)
    values = (("l4", r["l4"]), ("l2", r["l2"]), ("ratio", r["ratio"]), ("degenerate", float(r["degenerate"])))
    return values, lg.LOCAL_L4_PREDICTION, r["normalized"]


def _decoupling_cell(cfg, lam, trial):
    g = make_grid(grid_size(cfg, lam))
    u = synth_band_field(g, lam, _cell_seed(cfg, lam, trial, 0))
    v = synth_band_field(g, lam, _cell_seed(cfg, lam, trial, 1))
    caps = build_cap_family(lam, cfg.rho)
    r = pp.decoupling_ratio(u, v, lam, cfg.delta, caps)
    values = (
        ("lhs", r["lhs"]),
        ("rhs_l2", r["rhs_l2"]),
        ("ratio", r["ratio"]),
        ("cap_count", float(r["cap_count"])),
        ("reference", r["reference"]),
    )
    pred = lg.DECOUPLING_GAIN
    return values, pred, r["ratio"] / r["reference"]


def _commutator_cell(cfg, lam, trial):
    g = make_grid(grid_size(cfg, lam))
    if cfg.chained:
        u = synth_band_field(g, lam, _cell_seed(cfg, lam, trial, 0))
        v = synth_band_field(g, lam, _cell_seed(cfg, lam, trial, 1))
        r = pp.chained_commutator_bound(u, v, lam, cfg.delta, cfg.bump_degree)
        values = (("measured", r["measured"]), ("reference", r["reference"]), ("ratio", r["ratio"]))
        return values, lg.CHAINED_COMMUTATOR_PREDICTION, r["ratio"]
    a = pp.bump_physical(g, cfg.bump_degree)
    r = pp.localized_commutator_norm(lam, a, g, iters=cfg.iters, seed=_cell_seed(cfg, lam, trial), method=cfg.method)
    grad = pp.bump_gradient_sup(cfg.bump_degree)
    values = (
        ("norm", r.value),
        ("converged", float(r.converged)),
        ("iterations", float(r.iterations)),
        ("grad_a_sup", grad),
    )
    return values, lg.const(-1), r.value * lam / grad


def _hessian_cell(cfg, lam, trial):
    pair = ph.sample_resonant_pairs(lam, cfg.delta, _rng(cfg, lam, trial), cfg.samples)
    h = ph.hessian_rho(pair)
    fd = ph.fd_hessian_rho(pair)
    scale = np.max(np.abs(h.m), axis=(-2, -1))
    fd_err = float(np.max(np.max(np.abs(fd - h.m), axis=(-2, -1)) / scale))
    pred = lg.AffineExponent(-2, 1)
    min_det = float(np.min(np.abs(h.det)))
    values = (
        ("min_abs_det", min_det),
        ("det_nonzero", float(np.all(h.det != 0))),
        ("fd_max_rel_error", fd_err),
        ("flagged", float(np.sum(h.flagged))),
    )
    return values, pred, min_det / float(lam) ** float(pred(cfg.delta))


def _angles_cell(cfg, lam, trial):
    rng = _rng(cfg, lam, trial)
    eq = ph.sample_resonant_pairs(lam, cfg.delta, rng, cfg.samples, equal_radii=True)
    pair = ph.sample_resonant_pairs(lam, cfg.delta, rng, cfg.samples)
    bn = np.linalg.norm(ph.null_symbol(pair.xi, pair.eta), axis=-1)
    en = np.linalg.norm(pair.eta, axis=-1)
    supp = ph.suppression_ratio(pair, cfg.delta)
    values = (
        ("angle_identity_max", float(np.max(ph.angle_identity_residual(eq))) / lam),
        ("null_violations", float(np.sum(bn > en * (1 + 1e-12)))),
        ("suppression_max", float(np.max(supp))),
        ("cross_min", float(np.min(ph.cross_lower_bound(pair, cfg.delta)))),
    )
    return values, lg.SCALING_PREDICTION, float(np.max(supp))


def _window_cell(cfg, lam, trial):
    r = wk.window_sup_ratio(cfg.k, lam, cfg.delta)
    pred = lg.AffineExponent(Fraction(3, 4), Fraction(-1, 2)).scale(cfg.k)
    return (("sup", r["sup"]), ("bound", r["bound"]), ("ratio", r["ratio"])), pred, r["ratio"]


def _kernel_cell(cfg, lam, trial):
    r = wk.kernel_diff_l2(lam, cfg.delta)
    values = (("quadrature", r["quadrature"]), ("closed_form", r["closed_form"]))
    return values, lg.KERNEL_L2_PREDICTION, r["normalized"]


TILE_LENGTHS = (0.01, 1.0, 7.5)


def _tile_cell(cfg, lam, trial):
    rng = _rng(cfg, lam, trial)
    worst, violations = 0.0, 0
    values = []
    for i, L in enumerate(TILE_LENGTHS):
        a = float(rng.uniform(-1, 1))
        F, Fp = wk.random_trig_signal(rng, a, a + L, int(rng.integers(0, 12)))
        r = wk.tile_to_max_check(F, Fp)
        ratio = r["lhs"] / r["rhs"]
        values.append((f"ratio_L{i}", ratio))
        worst = max(worst, ratio)
        violations += not r["pass"]
    values.append(("violations", float(violations)))
    return tuple(values), lg.const(0), worst


def _ledger_cell(cfg, lam, trial):
    t1 = lg.balance_table()
    d = cfg.delta
    values = tuple((row.name, float(row.exponent(d))) for row in t1.rows) + (
        ("total", float(t1.total(d))),
        ("minimal_total", float(t1.minimal_total(d))),
        ("gap", float(lg.gap(lg.ENDPOINT_ON_WINDOW, lg.ENDPOINT_TARGET, d))),
    )
    return values, t1.total, float(t1.total(d))


CELLS = {
    "scaling": _scaling_cell,
    "local-l4": _local_l4_cell,
    "decoupling": _decoupling_cell,
    "commutator": _commutator_cell,
    "hessian": _hessian_cell,
    "angles": _angles_cell,
    "window": _window_cell,
    "kernel": _kernel_cell,
    "tile-max": _tile_cell,
    "ledger": _ledger_cell,
}

# cells whose prediction does not depend on the inputs, used for error records
_PREDICTIONS = {
    "scaling": lg.SCALING_PREDICTION,
    "local-l4": lg.LOCAL_L4_PREDICTION,
    "decoupling": lg.DECOUPLING_GAIN,
    "hessian": lg.AffineExponent(-2, 1),
    "angles": lg.SCALING_PREDICTION,
    "kernel": lg.KERNEL_L2_PREDICTION,
    "tile-max": lg.const(0),
}


def _prediction_for(cfg: SweepConfig) -> lg.AffineExponent:
    if cfg.experiment == "commutator":
        return lg.CHAINED_COMMUTATOR_PREDICTION if cfg.chained else lg.const(-1)
    if cfg.experiment == "window":
        return lg.AffineExponent(Fraction(3, 4), Fraction(-1, 2)).scale(cfg.k)
    if cfg.experiment == "ledger":
        return lg.balance_table().total
    return _PREDICTIONS[cfg.experiment]


def run_cell(cfg: SweepConfig, lam: int, trial: int) -> ExperimentRecord:
    start = time.perf_counter()
    seed = _cell_seed(cfg, lam, trial)
    try:
        values, pred, normalized = CELLS[cfg.experiment](cfg, lam, trial)
        error = None
    except ParauditError as exc:
        if cfg.strict:
            raise
        values, pred, normalized = (), _prediction_for(cfg), math.nan
        error = f"{type(exc).__name__}: {exc}"
    ms = (time.perf_counter() - start) * 1e3 if cfg.timing else 0.0
    return ExperimentRecord(
        cfg.experiment, lam, cfg.delta, trial, seed, tuple((k, float(v)) for k, v in values), pred, float(normalized), ms, error
    )


def resolve_workers(requested: int | None = None) -> int:
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        if env is None:
            return 1
        try:
            requested = int(env)
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if requested < 1:
        raise ConfigurationError("worker count must be at least 1")
    return requested


def check_memory(cfg: SweepConfig):
    for lam in cfg.lambdas:
        n = grid_size(cfg, lam)
        need = FIELD_COPIES * 16 * n**3
        if need > cfg.memory_cap:
            raise ResourceError(
                f"lambda = {lam} needs n = {n}: about {need / 2**30:.1f} GiB, above the cap of {cfg.memory_cap / 2**30:.1f} GiB"
            )


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(cfg: SweepConfig) -> list[ExperimentRecord]:
    cfg.validate()
    check_memory(cfg)
    trials = 1 if cfg.experiment == "ledger" else cfg.trials
    cells = [(cfg, lam, t) for lam in dict.fromkeys(cfg.lambdas) for t in range(trials)]
    workers = min(resolve_workers(cfg.workers), len(cells))
    if workers == 1:
        records = [run_cell(*c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell_args, cells))
    return sorted(records, key=ExperimentRecord.sort_key)


# ----------------------------------------------------------------------------
# fits and emission


def fit_exponent(records, value_name: str = "ratio") -> FitResult:
    """Least squares for log2(value) = slope * log2(lambda) + intercept."""
    xs, ys = [], []
    for r in records:
        if r.error is not None:
            continue
        v = r.value(value_name)
        if v > 0 and math.isfinite(v):
            xs.append(math.log2(r.lam))
            ys.append(math.log2(v))
    if len(set(xs)) < 2:
        raise FitError(f"need at least two distinct lambda values with positive {value_name!r}, got {len(set(xs))}")
    x, y = np.array(xs), np.array(ys)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return FitResult(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), len(xs))


def _fmt(x: float) -> str:
    return repr(float(x))


def to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        rows = r.values if r.error is None else (("error", math.nan),)
        for name, value in rows:
            w.writerow(
                [
                    r.experiment,
                    r.lam,
                    r.delta.numerator,
                    r.delta.denominator,
                    r.trial,
                    r.seed,
                    name,
                    _fmt(value),
                    str(r.predicted_exponent),
                    _fmt(r.normalized),
                    _fmt(r.walltime_ms),
                ]
            )
    return buf.getvalue()


def to_json(records, cfg: SweepConfig | None = None) -> str:
    header = {"version": __version__, "config": cfg.to_json() if cfg else None}
    if cfg is not None and 0 < cfg.delta < 1:
        header["ledger"] = lg.branch_report(cfg.delta)
    header["baseline_note"] = "measured values come from this repository's own runs; no external reference exists"
    doc = {"header": header, "records": [r.to_json() for r in records]}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def records_from_json(text: str) -> list[ExperimentRecord]:
    return [ExperimentRecord.from_json(d) for d in json.loads(text)["records"]]


def emit(records, fmt: str = "csv", path: str | None = None, cfg: SweepConfig | None = None, stream=None) -> str:
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"unknown output format {fmt!r}")
    text = to_csv(records) if fmt == "csv" else to_json(records, cfg)
    if path is None:
        if stream is not None:
            stream.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def with_overrides(cfg: SweepConfig, **kw) -> SweepConfig:
    return replace(cfg, **kw)
