"""Exact bookkeeping of powers of the frequency of the form a + b*delta.

Everything here is ``fractions.Fraction``; no float ever enters an
exponent. Decimal exponents (-4.75, 6.5, ...) are stored as quarters and
halves.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import ParameterError

F = Fraction


def as_fraction(value, max_denominator: int = 10**6) -> Fraction:
    """Parse '5/8', '0.625', 5/8 (Fraction) or an int into an exact rational.

    Decimal input is snapped to the nearest rational with bounded denominator.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(max_denominator)
    text = str(value).strip()
    try:
        if "/" in text:
            return Fraction(text)
        return Fraction(text).limit_denominator(max_denominator)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"cannot read {value!r} as a rational") from exc


@dataclass(frozen=True)
class AffineExponent:
    """The exponent a + b*delta."""

    a: Fraction = F(0)
    b: Fraction = F(0)

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))

    def __add__(self, other: "AffineExponent") -> "AffineExponent":
        return AffineExponent(self.a + other.a, self.b + other.b)

    def __neg__(self) -> "AffineExponent":
        return AffineExponent(-self.a, -self.b)

    def __sub__(self, other: "AffineExponent") -> "AffineExponent":
        return self + (-other)

    def scale(self, c) -> "AffineExponent":
        c = Fraction(c)
        return AffineExponent(c * self.a, c * self.b)

    def __mul__(self, c) -> "AffineExponent":
        return self.scale(c)

    __rmul__ = __mul__

    def __call__(self, delta) -> Fraction:
        return self.a + self.b * Fraction(delta)

    evaluate = __call__

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a)
        b = "" if abs(self.b) == 1 else f"{abs(self.b)}*"
        if self.a == 0:
            return f"{'-' if self.b < 0 else ''}{b}delta"
        return f"{self.a} {'-' if self.b < 0 else '+'} {b}delta"

    def to_json(self) -> dict:
        return {"a": str(self.a), "b": str(self.b), "text": str(self)}


def const(a) -> AffineExponent:
    return AffineExponent(F(a), F(0))


def affine_sum(*terms: AffineExponent) -> AffineExponent:
    out = AffineExponent()
    for t in terms:
        out = out + t
    return out


@dataclass(frozen=True)
class LedgerRow:
    name: str
    exponent: AffineExponent
    source: str
    note: str = ""

    def __post_init__(self):
        if not self.source:
            raise ParameterError(f"ledger row {self.name!r} has no source")


@dataclass(frozen=True)
class DeltaDomain:
    lo: Fraction = F(1, 6)
    hi: Fraction = F(5, 8)

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if not self.lo < self.hi:
            raise ParameterError("empty delta domain")

    def __contains__(self, delta) -> bool:
        return self.lo < Fraction(delta) <= self.hi


DEFAULT_DOMAIN = DeltaDomain()


@dataclass(frozen=True)
class BalanceTable:
    rows: tuple
    total: AffineExponent
    minimal_total: AffineExponent


def balance_table() -> BalanceTable:
    rows = (
        LedgerRow("local L4", AffineExponent(0, F(-1, 4)), "space-time L4 on one tile"),
        LedgerRow("phase IBP (simplified)", AffineExponent(-2, 1), "integration by parts in the phase"),
        LedgerRow(
            "null form + 2x(rho-IBP) + H^-1",
            AffineExponent(-2, 3),
            "null suppression, transverse IBP, output regularity",
        ),
        LedgerRow("angular l2 + tiling", AffineExponent(1, -2), "cap square function and tile count"),
        LedgerRow("rank-3 decoupling", AffineExponent(0, 0), "rank-3 decoupling, no loss"),
    )
    total = affine_sum(*(r.exponent for r in rows))
    minimal = affine_sum(*(r.exponent for r in rows[1:]))
    return BalanceTable(rows, total, minimal)


def unfolded_plus_row() -> tuple:
    """Pieces of the angular l2 + tiling row; they sum to 1 - 2 delta."""
    return (AffineExponent(F(1, 6), -1), AffineExponent(F(1, 6), 0), AffineExponent(F(2, 3), -1))


def sharp_rows() -> tuple:
    return (
        LedgerRow("phase IBP, full degree", AffineExponent(F(-19, 4), F(13, 2)), "integration by parts to full degree"),
        LedgerRow("mixed time case", AffineExponent(F(-29, 4), F(19, 2)), "mixed window derivatives"),
        LedgerRow("amplitude L2", AffineExponent(F(-25, 4), 7), "amplitude in L2 with seven derivatives"),
        LedgerRow("counting-decoupling sum", AffineExponent(F(-13, 2), F(19, 2)), "sum over spatial blocks after decoupling"),
        LedgerRow("tile bookkeeping factor", AffineExponent(0, 2), "decay in kappa against the tile count"),
    )


def amplitude_combination() -> AffineExponent:
    """The tile factor 2 delta combined with the amplitude row: -25/4 + 9 delta."""
    rows = sharp_rows()
    return rows[4].exponent + rows[2].exponent


CLAMP_NOTE = "literal formula; clamp at 1 in harness"


def counting_rows() -> tuple:
    return (
        LedgerRow("#caps active", AffineExponent(F(4, 3), -2), "active caps in a cone of opening lambda^-delta"),
        LedgerRow("#tiles", AffineExponent(F(5, 3), -2), "tiles per window"),
        LedgerRow("l2 cost", AffineExponent(F(5, 6), -1), "square root of the tile count"),
        LedgerRow("net after decoupling gain", AffineExponent(F(1, 6), -1), "l2 cost times the -2/3 gain"),
        LedgerRow("#micro-windows J_k", AffineExponent(F(-1, 2), 1), "micro-windows per tile", note=CLAMP_NOTE),
        LedgerRow("#windows", AffineExponent(F(3, 2), -1), "windows of length lambda^(-3/2+delta) in [0,1]"),
    )


DECOUPLING_GAIN = const(F(-2, 3))


def clamped_count(exponent: AffineExponent, lam: int, delta) -> tuple:
    """Evaluate lam**exponent as a count; returns (count, clamped_flag)."""
    value = float(lam) ** float(exponent(delta))
    if value < 1.0:
        return 1.0, True
    return value, False


@dataclass(frozen=True)
class NegativityResult:
    always_negative: bool
    witness: Optional[Fraction]


def negativity_interval(e: AffineExponent, dom: DeltaDomain = DEFAULT_DOMAIN) -> NegativityResult:
    """Decide whether a + b*delta < 0 for every delta in (lo, hi].

    The supremum over the half-open domain is attained at hi when b >= 0 and
    approached at lo when b < 0, which is what the endpoint cases use.
    """
    a, b = e.a, e.b
    if b >= 0:
        if e(dom.hi) < 0:
            return NegativityResult(True, None)
        return NegativityResult(False, dom.hi)
    if e(dom.lo) <= 0:
        return NegativityResult(True, None)
    root = -a / b
    top = min(root, dom.hi)
    return NegativityResult(False, (dom.lo + top) / 2)


@dataclass(frozen=True)
class ThresholdResult:
    delta: Optional[Fraction]
    identical: bool
    below: str
    above: str

    def __str__(self) -> str:
        if self.delta is None:
            return "identical" if self.identical else f"parallel (lhs {self.below} rhs everywhere)"
        return f"lhs {self.below} rhs for delta < {self.delta}; lhs {self.above} rhs for delta > {self.delta}"


def _relation(x: Fraction) -> str:
    return "<" if x < 0 else (">" if x > 0 else "=")


def threshold(lhs: AffineExponent, rhs: AffineExponent) -> ThresholdResult:
    d = lhs - rhs
    if d.b == 0:
        return ThresholdResult(None, d.a == 0, _relation(d.a), _relation(d.a))
    star = -d.a / d.b
    return ThresholdResult(star, False, _relation(d(star - 1)), _relation(d(star + 1)))


def gap(lhs: AffineExponent, rhs: AffineExponent, delta) -> Fraction:
    return (lhs - rhs)(delta)


def summable(e: AffineExponent, delta, target=F(0)) -> bool:
    """Exponent below target: '< 0' for geometric series in lambda, '< -1' for squared series."""
    return e(delta) < Fraction(target)


WEAK_MAX = AffineExponent(F(-5, 4), F(5, 2))
ENDPOINT_ON_WINDOW = AffineExponent(F(-9, 4), F(5, 4))
ENDPOINT_TARGET = AffineExponent(-1, -1)
GLOBAL_COMMUTATOR = AffineExponent(-3, 3)
SQUARED_SERIES = AffineExponent(-6, F(7, 2))
SQUARED_SERIES_ALT = AffineExponent(-2, -1)
EPSILON_SERIES = AffineExponent(F(-9, 2), F(5, 2))
SCALING_PREDICTION = AffineExponent(-2, 3)
LOCAL_L4_PREDICTION = AffineExponent(0, F(-1, 4))
KERNEL_L2_PREDICTION = AffineExponent(F(-3, 4), F(1, 2))
CHAINED_COMMUTATOR_PREDICTION = AffineExponent(-3, 3)
COMMUTATOR_PREDICTION = AffineExponent(-1, 1)


def branch_report(delta) -> dict:
    delta = as_fraction(delta)
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    t1 = balance_table()
    cut = threshold(ENDPOINT_ON_WINDOW, ENDPOINT_TARGET)
    endpoint = delta <= cut.delta
    warnings = []
    if delta not in DEFAULT_DOMAIN:
        warnings.append(f"delta = {delta} lies outside ({DEFAULT_DOMAIN.lo}, {DEFAULT_DOMAIN.hi}]")
    lam_rows = []
    for row in counting_rows():
        entry = {"name": row.name, "exponent": str(row.exponent), "value": str(row.exponent(delta))}
        if row.note:
            entry["note"] = row.note
            if row.exponent(delta) < 0:
                entry["clamped"] = True
        lam_rows.append(entry)

    def ev(e: AffineExponent) -> dict:
        return {"exponent": str(e), "value": str(e(delta))}

    report = {
        "delta": str(delta),
        "in_domain": delta in DEFAULT_DOMAIN,
        "warnings": warnings,
        "balance": {
            "rows": [{"name": r.name, **ev(r.exponent)} for r in t1.rows],
            "total": ev(t1.total),
            "minimal_total": ev(t1.minimal_total),
            "total_negative": t1.total(delta) < 0,
            "minimal_total_negative": t1.minimal_total(delta) < 0,
        },
        "sharp_rows": [{"name": r.name, **ev(r.exponent)} for r in sharp_rows()],
        "amplitude_combination": ev(amplitude_combination()),
        "counting_rows": lam_rows,
        "weak_max_on_window": ev(WEAK_MAX),
        "endpoint_on_window": ev(ENDPOINT_ON_WINDOW),
        "endpoint_target": ev(ENDPOINT_TARGET),
        "threshold": str(cut.delta),
        "branch": "endpoint" if endpoint else "epsilon-loss",
        "gap": str(gap(ENDPOINT_ON_WINDOW, ENDPOINT_TARGET, delta)),
        "single_frequency_exponent": str(ENDPOINT_TARGET(delta)) if endpoint else None,
        "global_commutator": {**ev(GLOBAL_COMMUTATOR), "summable": summable(GLOBAL_COMMUTATOR, delta, -1)},
        "frequency_series": {
            "weak_max_summable": summable(WEAK_MAX, delta, 0),
            "squared_series": {**ev(SQUARED_SERIES), "below_minus_one": summable(SQUARED_SERIES, delta, -1)},
            "squared_series_alt": {
                **ev(SQUARED_SERIES_ALT),
                "below_minus_one": summable(SQUARED_SERIES_ALT, delta, -1),
            },
            "epsilon_series": ev(EPSILON_SERIES),
        },
    }
    if endpoint:
        report["conclusion"] = (
            f"endpoint branch: delta = {delta} <= {cut.delta}; single-frequency exponent {ENDPOINT_TARGET(delta)}"
        )
    else:
        report["conclusion"] = (
            f"epsilon-loss branch: delta = {delta} > {cut.delta}; endpoint misses the target by "
            f"{report['gap']}"
        )
    return report
