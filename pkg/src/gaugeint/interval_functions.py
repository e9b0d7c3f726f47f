"""
Additive interval functions, series over divisions, the series-built
extension ``F0`` and the two falsification checks built on them.

Universally quantified statements ("for every division", "for every
Z-tagged partition") are tested by seeded sampling; a pass means "not
falsified at N trials".
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .divisions import (
    Division,
    dyadic_division,
    local_tail,
    restrict_division,
    sparse_division,
)
from .gauges import ConstantGauge, Gauge
from .geometry import (
    Interval,
    IntervalAlgebraSet,
    VectorValue,
    volume,
)
from .partitions import as_point_set, sample_z_tagged_partition

PROVENANCES = ("closed-form", "integral-backed", "series-built")


class SeriesError(ValueError):
    pass


class PreconditionError(RuntimeError):
    pass


class EvaluationFailure(RuntimeError):
    """An interval function could not produce a value (e.g. an integral diverged)."""


def _vsum(values, d, norm_tag) -> VectorValue:
    values = list(values)
    if not values:
        return VectorValue.zeros(d, norm_tag)
    if all(v.exact for v in values):
        return VectorValue(
            tuple(sum((v[j] for v in values), Fraction(0)) for j in range(d)), norm_tag
        )
    return VectorValue(tuple(math.fsum(float(v[j]) for v in values) for j in range(d)), norm_tag)


class AdditiveIntervalFunction:
    """Interval-indexed vector function expected to be additive.

    Parameters
    ----------
    func : callable
        ``Interval -> VectorValue`` (or a sequence of numbers).
    value_dim : int
    density_bound : float, optional
        ``M`` with ``||F(J)|| <= M |J|``; needed to certify series tails.
    error : callable, optional
        ``Interval -> float``, the evaluation error budget (0 for closed forms).
    """

    def __init__(
        self,
        func: Callable,
        value_dim: int,
        provenance: str = "closed-form",
        density_bound: float | None = None,
        norm_tag: str = "max",
        error: Callable | None = None,
        name: str = "F",
        memoize: bool = True,
    ):
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        self.func = func
        self.value_dim = value_dim
        self.provenance = provenance
        self.density_bound = density_bound
        self.norm_tag = norm_tag
        self._error = error
        self.name = name
        self._memo = {} if memoize else None

    def eval(self, I: Interval) -> VectorValue:
        if self._memo is not None:
            key = I.key()
            hit = self._memo.get(key)
            if hit is not None:
                return hit
        v = self.func(I)
        if not isinstance(v, VectorValue):
            v = VectorValue(tuple(v), self.norm_tag)
        elif v.norm_tag != self.norm_tag:
            v = VectorValue(v.components, self.norm_tag)
        if self._memo is not None:
            self._memo[key] = v
        return v

    __call__ = eval

    def error(self, I: Interval) -> float:
        return 0.0 if self._error is None else float(self._error(I))

    def __repr__(self):
        return f"AdditiveIntervalFunction({self.name!r}, {self.provenance})"


def volume_function(c=1, value_dim: int = 1, norm_tag: str = "max") -> AdditiveIntervalFunction:
    """``F(I) = c |I|`` in every component."""
    c = Fraction(c)
    return AdditiveIntervalFunction(
        lambda I: VectorValue((c * volume(I),) * value_dim, norm_tag),
        value_dim,
        density_bound=float(abs(c)),
        norm_tag=norm_tag,
        name=f"{c}|I|",
    )


def closed_form_primitive(f, density_bound=None) -> AdditiveIntervalFunction:
    """Oracle primitive from an integrand's closed form (tests only)."""
    if f.primitive is None:
        raise ValueError(f"{f.name} has no closed-form primitive")
    return AdditiveIntervalFunction(
        f.primitive,
        f.value_dim,
        density_bound=density_bound,
        norm_tag=f.norm_tag,
        name=f"closed form of {f.name}",
    )


def inject_defect(F: AdditiveIntervalFunction, cell: Interval, v) -> AdditiveIntervalFunction:
    """``F`` with ``v`` added on exactly one interval: no longer additive."""
    v = VectorValue(tuple(v), F.norm_tag) if not isinstance(v, VectorValue) else v
    key = cell.key()

    def func(I):
        base = F.eval(I)
        return base + v if I.key() == key else base

    return AdditiveIntervalFunction(
        func,
        F.value_dim,
        F.provenance,
        F.density_bound,
        F.norm_tag,
        F.error,
        name=f"{F.name} with defect on {cell}",
    )


def inject_local_defect(F: AdditiveIntervalFunction, region: Interval, v) -> AdditiveIntervalFunction:
    """``F`` plus ``v`` on every non-degenerate interval inside ``region``."""
    v = VectorValue(tuple(v), F.norm_tag) if not isinstance(v, VectorValue) else v

    def func(I):
        base = F.eval(I)
        return base + v if region.contains_box(I) and volume(I) > 0 else base

    return AdditiveIntervalFunction(
        func,
        F.value_dim,
        F.provenance,
        F.density_bound,
        F.norm_tag,
        F.error,
        name=f"{F.name} with defect inside {region}",
    )


# ---------------------------------------------------------------------------
# random intervals
# ---------------------------------------------------------------------------

_DEN = 1 << 12


def random_subinterval(rng: random.Random, box: Interval) -> Interval:
    lo, hi = [], []
    for a, b in box.bounds:
        i = rng.randrange(_DEN)
        j = rng.randrange(i + 1, _DEN + 1)
        lo.append(a + (b - a) * Fraction(i, _DEN))
        hi.append(a + (b - a) * Fraction(j, _DEN))
    return Interval(tuple(lo), tuple(hi))


def random_split(rng: random.Random, I: Interval):
    axis = rng.randrange(I.dim)
    a, b = I.lower[axis], I.upper[axis]
    at = a + (b - a) * Fraction(rng.randrange(1, _DEN), _DEN)
    return axis, at, I.split(axis, at)


@dataclass
class AdditivityReport:
    passed: bool
    samples: int
    max_defect: float
    witness: tuple | None = None


def check_additivity(F, I0: Interval, samples: int = 100, seed=0, tol: float = 0.0) -> AdditivityReport:
    """Random hyperplane splits of random subintervals of ``I0``.

    The defect ``||F(I) - F(left) - F(right)||`` must not exceed ``tol``
    (plus the evaluation error budgets for integral-backed functions).
    """
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(samples):
        I = random_subinterval(rng, I0)
        axis, at, (L, R) = random_split(rng, I)
        whole, left, right = F(I), F(L), F(R)
        defect = (whole - left - right).norm()
        slack = tol + F.error(I) + F.error(L) + F.error(R) if hasattr(F, "error") else tol
        worst = max(worst, defect)
        if defect > slack:
            return AdditivityReport(False, samples, worst, (I, axis, at, defect))
    return AdditivityReport(True, samples, worst)


# ---------------------------------------------------------------------------
# series over divisions
# ---------------------------------------------------------------------------

@dataclass
class SeriesReport:
    prefix_sums: list = field(default_factory=list)
    abs_tail_bound: float = 0.0
    permutation_spread: float = 0.0
    converged: bool = True
    terms: int = 0
    eval_error: float = 0.0

    def to_record(self) -> dict:
        return {
            "terms": self.terms,
            "abs_tail_bound": self.abs_tail_bound,
            "permutation_spread": self.permutation_spread,
            "converged": self.converged,
        }


def series_over_division(
    F: AdditiveIntervalFunction,
    D: Division,
    I: Interval,
    tol: float = 1e-6,
    permutations: int = 20,
    seed: int = 0,
    keep_prefix: bool = True,
):
    """``sum_k F(I & C_k)`` over the cells of ``D`` that overlap ``I``.

    Returns ``(value, SeriesReport)``.  The tail bound is ``M`` times the
    part of ``I`` in the host interior that the prefix leaves uncovered.

    Raises
    ------
    SeriesError
        "tail not certifiable" when the tail is positive and ``F`` has no
        density bound.
    """
    pieces = restrict_division(D, I)
    d = F.value_dim
    report = SeriesReport(terms=len(pieces))
    tail = local_tail(D, I)
    if tail > 0:
        if F.density_bound is None:
            raise SeriesError("tail not certifiable")
        report.abs_tail_bound = F.density_bound * float(tail)
    if not pieces:
        report.converged = report.abs_tail_bound < tol
        return VectorValue.zeros(d, F.norm_tag), report
    terms = [F(J) for _, J in pieces]
    report.eval_error = sum(F.error(J) for _, J in pieces)
    value = _vsum(terms, d, F.norm_tag)
    if keep_prefix:
        acc = terms[0]
        report.prefix_sums.append(acc)
        for t in terms[1:]:
            acc = acc + t
            report.prefix_sums.append(acc)
    if len(terms) > 1 and not value.exact:
        rng = random.Random(seed)
        spread = 0.0
        for _ in range(permutations):
            order = list(range(len(terms)))
            rng.shuffle(order)
            naive = [0.0] * d
            for k in order:
                for j in range(d):
                    naive[j] += float(terms[k][j])
            spread = max(spread, VectorValue(tuple(naive), F.norm_tag).dist(value))
        report.permutation_spread = spread
    report.converged = report.abs_tail_bound < tol or report.abs_tail_bound == 0
    return value, report


# ---------------------------------------------------------------------------
# Dunford-function check
# ---------------------------------------------------------------------------

@dataclass
class TrialRow:
    trial: int
    clause: str
    depth: int
    sparse: bool
    interval: str
    defect: float
    budget: float
    spread: float
    status: str  # "ok", "fail", "inconclusive"

    def to_record(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DunfordReport:
    passed: bool
    trials: int
    failures: int
    inconclusive: int
    max_spread: float
    rows: list = field(default_factory=list)
    witness: TrialRow | None = None

    def to_record(self, rows: bool = False) -> dict:
        rec = {
            "passed": self.passed,
            "trials": self.trials,
            "failures": self.failures,
            "inconclusive": self.inconclusive,
            "max_spread": self.max_spread,
            "witness": None if self.witness is None else self.witness.to_record(),
        }
        if rows:
            rec["rows"] = [r.to_record() for r in self.rows]
        return rec


def _cells_of(G):
    if isinstance(G, IntervalAlgebraSet):
        return list(G.cells)
    return None


def sample_interval_in(rng, G, D: Division | None = None, forced: list | None = None):
    """Random ``I`` inside ``G``: a cell of its normal form or a sub-box of one."""
    cells = _cells_of(G)
    if cells is None:
        if D is None or not D.cells:
            raise ValueError("oracle sets need a division to sample intervals from")
        cells = list(D.cells)
    if forced:
        return forced.pop(0)
    C = cells[rng.randrange(len(cells))]
    return C if rng.random() < 0.25 else random_subinterval(rng, C)


def check_dunford_function(
    F: AdditiveIntervalFunction,
    G,
    I0: Interval,
    trials: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
    max_depth: int = 6,
    spread_tol: float = 1e-12,
    probes: list | None = None,
) -> DunfordReport:
    """Falsification test of the two Dunford-function clauses.

    Each trial draws a dyadic division prefix of ``G`` (full, or a sparse
    random sub-family).  Clause (a): for ``I`` in ``I0`` the series over the
    division is tail-certified and permutation-stable.  Clause (b), full
    divisions only: for ``I`` inside ``G`` the series reproduces ``F(I)``
    within ``tol`` plus tail and evaluation budgets.  Early trials probe
    ``probes`` and then the cells of ``G`` itself.
    """
    divisions = {}
    rows = []
    forced = list(probes or []) + list(_cells_of(G) or [])
    for i in range(trials):
        rng = random.Random(seed * 1_000_003 + i)
        depth = rng.randint(1, max_depth)
        if depth not in divisions:
            divisions[depth] = dyadic_division(G, depth)
        D = divisions[depth]
        sparse = bool(i % 2) and len(D.cells) > 1
        Dk = sparse_division(D, rng.randrange(1 << 30)) if sparse else D
        if sparse:
            clause = "a"
            I = random_subinterval(rng, I0)
        else:
            clause = "b"
            pool = D
            if not D.cells and _cells_of(G) is None:
                # shallow prefixes of oracle sets can be empty: draw from the deepest one
                if max_depth not in divisions:
                    divisions[max_depth] = dyadic_division(G, max_depth)
                pool = divisions[max_depth]
            I = sample_interval_in(rng, G, pool, forced)
        try:
            value, rep = series_over_division(F, Dk, I, seed=i)
            target = F(I) if clause == "b" else None
        except (SeriesError, EvaluationFailure):
            rows.append(TrialRow(i, clause, depth, sparse, str(I), math.nan, math.nan, math.nan, "inconclusive"))
            continue
        spread_budget = spread_tol * max(1, rep.terms)
        if clause == "a":
            ok = rep.permutation_spread <= spread_budget
            rows.append(
                TrialRow(i, clause, depth, sparse, str(I), rep.permutation_spread, spread_budget,
                         rep.permutation_spread, "ok" if ok else "fail")
            )
            continue
        defect = value.dist(target)
        budget = tol + rep.abs_tail_bound + rep.eval_error + F.error(I)
        ok = defect <= budget and rep.permutation_spread <= spread_budget
        rows.append(
            TrialRow(i, clause, depth, sparse, str(I), defect, budget, rep.permutation_spread,
                     "ok" if ok else "fail")
        )
    fails = [r for r in rows if r.status == "fail"]
    spreads = [r.spread for r in rows if not math.isnan(r.spread)]
    return DunfordReport(
        passed=not fails,
        trials=trials,
        failures=len(fails),
        inconclusive=sum(r.status == "inconclusive" for r in rows),
        max_spread=max(spreads, default=0.0),
        rows=rows,
        witness=fails[0] if fails else None,
    )


def construct_F0(
    F: AdditiveIntervalFunction, D: Division, certifier: DunfordReport | None
) -> AdditiveIntervalFunction:
    """Series-built extension of ``F`` to every interval.

    ``eval(I) = sum_k F(I & C_k)``; the error budget of ``eval(I)`` holds the
    certified tail plus the evaluation errors of the terms.

    Raises
    ------
    PreconditionError
        unless ``certifier`` is a passed Dunford-function report.
    """
    if certifier is None or not certifier.passed:
        raise PreconditionError("construct_F0 needs a passed Dunford-function check")
    if not D.covers_interior:
        raise PreconditionError("construct_F0 needs a division of the interior")
    cache = {}

    def series(I):
        key = I.key()
        if key not in cache:
            cache[key] = series_over_division(F, D, I, permutations=0, keep_prefix=False)
        return cache[key]

    def func(I):
        return series(I)[0]

    def err(I):
        rep = series(I)[1]
        return rep.abs_tail_bound + rep.eval_error

    return AdditiveIntervalFunction(
        func,
        F.value_dim,
        "series-built",
        F.density_bound,
        F.norm_tag,
        err,
        name=f"F0 of {F.name}",
    )


# ---------------------------------------------------------------------------
# negligible variation
# ---------------------------------------------------------------------------

@dataclass
class VariationReport:
    trials: int
    max_observed: float
    gauge_radius: float | None
    epsilon: float
    passed: bool
    vacuous: bool = False
    worst_trial: int | None = None
    inconclusive: int = 0

    def to_record(self) -> dict:
        return {
            "trials": self.trials,
            "max_observed": self.max_observed,
            "gauge_radius": self.gauge_radius,
            "epsilon": self.epsilon,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
        }


def negligible_variation_falsifier(
    F: AdditiveIntervalFunction,
    Z,
    D: Division,
    epsilon: float,
    gauge: Gauge,
    trials: int = 200,
    seed: int = 0,
    mode: str = "M",
    count: int = 8,
    W: Interval | None = None,
    collar=None,
) -> VariationReport:
    """Search for Z-tagged gauge-fine partitions with large ``F0`` sums.

    Each trial samples a partition with ``count`` boxes in ``W`` (default:
    the host's bounding box widened by ``collar``) and evaluates
    ``|| sum_(t, I) sum_k F(I & C_k) ||``.  Passes iff the largest value seen
    stays below ``epsilon``.  Trials whose values cannot be evaluated are
    counted as inconclusive and do not enter the maximum.
    """
    radius = gauge.r if isinstance(gauge, ConstantGauge) else None
    try:
        Zs = as_point_set(Z)
    except ValueError:
        return VariationReport(0, 0.0, radius, epsilon, True, vacuous=True)
    if W is None:
        W = D.host.bounding_box
        if collar is None:
            collar = Fraction(W.max_edge) / 8
        if collar:
            W = W.dilate(collar)
    worst = 0.0
    worst_trial = None
    skipped = 0
    for i in range(trials):
        pi = sample_z_tagged_partition(Zs, gauge, W, seed=seed * 1_000_003 + i, count=count, mode=mode)
        total = VectorValue.zeros(F.value_dim, F.norm_tag)
        try:
            for it in pi:
                v, _ = series_over_division(F, D, it.box, permutations=0, keep_prefix=False)
                total = total + v
        except (SeriesError, EvaluationFailure):
            skipped += 1
            continue
        obs = total.norm()
        if worst_trial is None or obs > worst:
            worst, worst_trial = obs, i
    return VariationReport(
        trials, worst, radius, epsilon, worst < epsilon, worst_trial=worst_trial, inconclusive=skipped
    )


__all__ = [
    "AdditiveIntervalFunction",
    "AdditivityReport",
    "DunfordReport",
    "EvaluationFailure",
    "PreconditionError",
    "SeriesError",
    "SeriesReport",
    "TrialRow",
    "VariationReport",
    "check_additivity",
    "check_dunford_function",
    "closed_form_primitive",
    "construct_F0",
    "inject_defect",
    "inject_local_defect",
    "negligible_variation_falsifier",
    "random_split",
    "random_subinterval",
    "series_over_division",
    "volume_function",
]
