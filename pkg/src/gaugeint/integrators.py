"""
McShane and Henstock-Kurzweil integrals on boxes by gauge refinement.

Level ``n`` of the sweep uses the gauge

    delta_n(t) = min(h_n, c * dist(t, S)**p)        h_n = edge * 2**-n

where ``S`` holds the integrand's singular points (and, with slope 2, its
jump faces, floored at ``r_n`` next to them).  Cells touching ``S`` shrink
to size ``r_n = edge * 2**(-rate * n)``.  The two modes differ only there:

* ``"HK"``: the radius is ``r_n`` on ``S`` and a singular cell is tagged at
  its singular point, where an undefined value counts as 0;
* ``"M"``: the radius is clipped below at ``r_n`` everywhere, which makes it
  legal to move the tags of singular cells onto interior Gauss nodes.

A level's sum is a genuine fine Riemann sum: each accepted cell is split
into Gauss sub-cells tagged at the Gauss nodes whenever those sub-tags are
fine too.  The sweep stops when three successive sums agree within
``tol / 2`` and the error estimate fits in ``tol``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Integrand
from .cover import DepthExceeded, WorkLimitExceeded, default_subtags, dyadic_cover, gauss_tensor
from .gauges import DistanceGauge
from .geometry import Interval, VectorValue
from .interval_functions import AdditiveIntervalFunction, EvaluationFailure

LEVEL_CAP = 24
DEPTH_CAP = 52
MAX_CELLS = 6_000_000
# boxes cut by more jump-face hyperplanes than this are swept whole
MAX_PIECES = 4096
EPS = np.finfo(float).eps
# smallest singular cell, relative to the box edge: keeps float corners exact
FLOOR_EXP = 50


class NoConvergence(EvaluationFailure):
    """The refinement sweep ended without meeting the tolerance.

    Either the integrand is not integrable in the requested sense or the
    level cap (or work budget) is too low; the two are not distinguished.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class LevelRecord:
    level: int
    value: tuple
    cells: int
    spread: float | None
    residue: float
    error: float | None

    def to_record(self) -> dict:
        return {
            "level": self.level,
            "value": list(self.value),
            "cells": self.cells,
            "spread": self.spread,
            "residue": self.residue,
            "error": self.error,
        }


@dataclass(frozen=True)
class IntegralResult:
    value: VectorValue
    error_estimate: float
    refinement_levels: int
    mode: str
    converged: bool
    history: tuple = field(default=(), repr=False)
    reason: str = ""

    def to_record(self) -> dict:
        return {
            "value": list(self.value.to_floats()),
            "error_estimate": self.error_estimate,
            "refinement_levels": self.refinement_levels,
            "mode": self.mode,
            "converged": self.converged,
        }


def _faces_inside(faces, I: Interval):
    out = []
    for lo, hi in faces:
        if all(max(a, c) <= min(b, d) for a, b, c, d in zip(lo, hi, I.lower, I.upper)):
            # a face on the boundary of I cannot be straddled
            on_edge = any(
                c == d and (c == a or c == b) for a, b, c, d in zip(I.lower, I.upper, lo, hi)
            )
            if not on_edge:
                out.append((lo, hi))
    return tuple(out)


def _rates(f: Integrand):
    rate = f.floor_rate
    if f.jump_faces and not f.singular_points:
        rate = max(rate, 2.0)
    return rate


def level_gauge(f: Integrand, I: Interval, n: int, mode: str) -> DistanceGauge:
    """The level-``n`` gauge of the refinement sweep on ``I``."""
    E = float(I.max_edge)
    h = E * 2.0 ** -n
    r = min(h, E * 2.0 ** -min(_rates(f) * n, FLOOR_EXP))
    faces = _faces_inside(f.jump_faces, I)
    return DistanceGauge(
        points=f.singular_points,
        faces=faces,
        scale=f.gauge_scale,
        power=f.gauge_power,
        face_scale=2.0,
        r_max=h,
        r_min=r if mode == "M" else 0.0,
        singular_radius=r,
        face_floor=r,
    )


def _norm(v, norm_tag):
    return VectorValue(tuple(float(x) for x in v), norm_tag).norm()


def _face_cuts(f: Integrand, I: Interval):
    """Per-axis coordinates of the jump-face hyperplanes crossing ``I``."""
    cuts = [set() for _ in range(I.dim)]
    for lo, hi in _faces_inside(f.jump_faces, I):
        for j in range(I.dim):
            if lo[j] == hi[j] and I.lower[j] < lo[j] < I.upper[j]:
                cuts[j].add(lo[j])
    return [sorted(c) for c in cuts]


def _pieces(I: Interval, cuts):
    axes = [[a] + c + [b] for (a, b), c in zip(I.bounds, cuts)]
    spans = [list(zip(ax[:-1], ax[1:])) for ax in axes]
    return [Interval.from_bounds(combo) for combo in itertools.product(*spans)]


def _merge_history(results):
    """One aggregated record per level; finished pieces keep their last level."""
    rows = []
    for n in range(1, max(len(r.history) for r in results) + 1):
        recs = [r.history[min(n, len(r.history)) - 1] for r in results if r.history]
        value = tuple(math.fsum(c) for c in zip(*(h.value for h in recs)))
        spreads = [h.spread for h in recs]
        errors = [h.error for h in recs]
        rows.append(LevelRecord(
            n,
            value,
            sum(h.cells for h in recs),
            None if None in spreads else math.fsum(spreads),
            math.fsum(h.residue for h in recs),
            None if None in errors else math.fsum(errors),
        ))
    return tuple(rows)


def _integrate_split(f, I, pieces, tol, mode, strict, **kw) -> IntegralResult:
    # the integral is additive over the pieces; each gets an equal share of tol
    share = tol / len(pieces)
    results = [_integrate(f, P, share, mode, strict=False, **kw) for P in pieces]
    value = VectorValue(
        tuple(math.fsum(c) for c in zip(*(r.value.to_floats() for r in results))), f.norm_tag
    )
    err = math.fsum(r.error_estimate for r in results)
    levels = max(r.refinement_levels for r in results)
    bad = [(P, r) for P, r in zip(pieces, results) if not r.converged]
    reason = f"piece {bad[0][0]}: {bad[0][1].reason}" if bad else ""
    res = IntegralResult(value, err, levels, mode, not bad, _merge_history(results), reason)
    if bad and strict:
        raise NoConvergence(f"{mode} integral of {f.name} on {I} did not converge: {reason}", res)
    return res


def _integrate(
    f: Integrand,
    I: Interval,
    tol: float,
    mode: str,
    level_cap: int = LEVEL_CAP,
    depth_cap: int = DEPTH_CAP,
    max_cells: int = MAX_CELLS,
    strict: bool = True,
) -> IntegralResult:
    if f.dim != I.dim:
        raise ValueError(f"integrand lives in R^{f.dim}, box in R^{I.dim}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    cuts = _face_cuts(f, I)
    n_pieces = math.prod(len(c) + 1 for c in cuts)
    if 1 < n_pieces <= MAX_PIECES:
        return _integrate_split(
            f, I, _pieces(I, cuts), tol, mode, strict,
            level_cap=level_cap, depth_cap=depth_cap, max_cells=max_cells,
        )
    M = f.norm_bound(I)
    p = default_subtags(I.dim)
    # a Gauss sub-cell sum has len(nodes) terms; a few more roundings per term
    round_c = (len(gauss_tensor(p, I.dim)[0]) if p else 1) + 8
    sums = []
    history = []
    reason = f"level cap {level_cap} reached"
    est = math.inf
    for n in range(1, level_cap + 1):
        gauge = level_gauge(f, I, n, mode)
        try:
            cover = dyadic_cover(I, gauge, depth_cap=depth_cap, max_cells=max_cells, subtags=p)
        except WorkLimitExceeded as exc:
            reason = f"work budget exhausted at level {n}: {exc}"
            break
        s, s_abs = cover.riemann_sum(f.eval_many, f.value_dim, mode, with_abs=True)
        # floating-point rounding of the sum itself
        residue = round_c * EPS * _norm(s_abs, f.norm_tag)
        if M is not None:
            residue += 2.0 * M * cover.singular_volume()
            if f.jump_neighborhood is not None:
                residue += 2.0 * M * f.jump_neighborhood(float(I.max_edge) * 2.0 ** -n)
        sums.append(s)
        spread = None
        est_n = None
        if len(sums) >= 3:
            # componentwise spread measured in the value norm
            spread = max(_norm(a - b, f.norm_tag) for a, b in itertools.combinations(sums[-3:], 2))
            est_n = spread + residue
            est = est_n
        history.append(LevelRecord(n, tuple(float(x) for x in s), cover.n_cells, spread, residue, est_n))
        if spread is not None and spread < tol / 2 and est_n <= tol:
            return IntegralResult(
                VectorValue(tuple(float(x) for x in s), f.norm_tag), est_n, n, mode, True, tuple(history)
            )
    value = VectorValue(tuple(float(x) for x in (sums[-1] if sums else [math.nan] * f.value_dim)), f.norm_tag)
    res = IntegralResult(value, est, len(sums), mode, False, tuple(history), reason)
    if strict:
        raise NoConvergence(f"{mode} integral of {f.name} on {I} did not converge: {reason}", res)
    return res


def mcshane_integral(f: Integrand, I: Interval, tol: float = 1e-6, **kw) -> IntegralResult:
    """McShane integral of ``f`` over the box ``I``.

    Raises
    ------
    NoConvergence
        after the level cap or work budget (``strict=False`` returns the
        unconverged result instead).
    DepthExceeded
        from the partition generator.
    """
    return _integrate(f, I, tol, "M", **kw)


def hk_integral(f: Integrand, I: Interval, tol: float = 1e-6, **kw) -> IntegralResult:
    """Henstock-Kurzweil integral of ``f`` over the box ``I``."""
    return _integrate(f, I, tol, "HK", **kw)


def integral(f: Integrand, I: Interval, mode: str = "M", tol: float = 1e-6, **kw) -> IntegralResult:
    if mode not in ("M", "HK"):
        raise ValueError(f"unknown mode {mode!r}")
    return _integrate(f, I, tol, mode, **kw)


# ---------------------------------------------------------------------------
# componentwise absolute integrability
# ---------------------------------------------------------------------------

@dataclass
class WeakIntegralRecord:
    coordinate_integrals: tuple | None
    abs_integral_estimates: tuple
    dunford_ok: bool
    pettis_vector: VectorValue | None
    levels: int
    reason: str = ""
    history: list = field(default_factory=list, repr=False)

    def to_record(self) -> dict:
        return {
            "coordinate_integrals": None if self.coordinate_integrals is None else list(self.coordinate_integrals),
            "abs_integral_estimates": list(self.abs_integral_estimates),
            "dunford_ok": self.dunford_ok,
            "pettis_vector": None if self.pettis_vector is None else list(self.pettis_vector.to_floats()),
            "levels": self.levels,
            "reason": self.reason,
        }


def abs_integral_sweep(f: Integrand, I: Interval, level: int, max_cells: int = MAX_CELLS) -> np.ndarray:
    """Level estimate of ``int_I |f_j|`` with the singular cells left out."""
    gauge = level_gauge(f, I, level, "M")
    cover = dyadic_cover(I, gauge, depth_cap=DEPTH_CAP, max_cells=max_cells, subtags=default_subtags(I.dim))
    return cover.riemann_sum(f.eval_many, f.value_dim, "M", absolute=True, exclude_singular=True)


def dunford_componentwise_check(
    f: Integrand,
    I: Interval,
    divergence_threshold: float = 100.0,
    tol: float = 1e-6,
    level_cap: int = LEVEL_CAP,
    max_cells: int = MAX_CELLS,
) -> WeakIntegralRecord:
    """Is every coordinate of ``f`` absolutely integrable on ``I``?

    Estimates of ``int_I |f_j|`` come from fine sums of ``|f_j|`` that leave
    out shrinking neighbourhoods of the singular set.  A coordinate passes
    when three successive estimates agree within ``tol`` below the
    threshold; it fails when an estimate crosses the threshold or the sweep
    ends first.
    """
    hist = []
    reason = f"no stabilisation by level {level_cap}"
    ok = False
    for n in range(1, level_cap + 1):
        try:
            est = abs_integral_sweep(f, I, n, max_cells)
        except WorkLimitExceeded:
            reason = f"work budget exhausted at level {n} before stabilisation"
            break
        hist.append(tuple(float(x) for x in est))
        if np.any(est >= divergence_threshold):
            reason = f"estimate crossed {divergence_threshold} at level {n}"
            break
        if len(hist) >= 3:
            last = np.array(hist[-3:])
            if float((last.max(axis=0) - last.min(axis=0)).max()) < tol:
                ok = True
                reason = f"stabilised at level {n}"
                break
    pettis = None
    coords = None
    if ok:
        try:
            res = mcshane_integral(f, I, tol)
            pettis = res.value
            coords = res.value.to_floats()
        except NoConvergence as exc:
            reason += f"; McShane sweep failed: {exc}"
    return WeakIntegralRecord(
        coords,
        hist[-1] if hist else (),
        ok,
        pettis,
        len(hist),
        reason,
        hist,
    )


# ---------------------------------------------------------------------------
# integral-backed primitives
# ---------------------------------------------------------------------------

def primitive_of(
    f: Integrand,
    mode: str = "M",
    tol: float = 1e-6,
    box: Interval | None = None,
    known: dict | None = None,
    **kw,
) -> AdditiveIntervalFunction:
    """Integral-backed primitive ``I -> int_I f`` with memoised results.

    ``box`` (the working box) sets the density bound ``sup ||f||`` used to
    certify series tails; without it bounded integrands have no bound.
    ``known`` pre-seeds the memo with ``{I.key(): IntegralResult}``.
    Divergent or too deep integrals raise :class:`NoConvergence`.
    """
    results = dict(known or {})

    def run(I):
        key = I.key()
        if key not in results:
            try:
                results[key] = integral(f, I, mode, tol, **kw)
            except DepthExceeded as exc:
                raise NoConvergence(f"{mode} integral of {f.name} on {I}: {exc}") from exc
        return results[key]

    bound = f.norm_bound(box) if box is not None else None
    return AdditiveIntervalFunction(
        lambda I: run(I).value,
        f.value_dim,
        "integral-backed",
        bound,
        f.norm_tag,
        lambda I: run(I).error_estimate,
        name=f"primitive of {f.name} ({mode})",
    )


__all__ = [
    "DepthExceeded",
    "IntegralResult",
    "LevelRecord",
    "NoConvergence",
    "WeakIntegralRecord",
    "abs_integral_sweep",
    "dunford_componentwise_check",
    "hk_integral",
    "integral",
    "level_gauge",
    "mcshane_integral",
    "primitive_of",
]
