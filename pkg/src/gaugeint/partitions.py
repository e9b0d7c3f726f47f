"""
Tagged partitions, fineness checks and partition generators.

A tagged partition is a finite list of ``(tag, box)`` pairs with pairwise
non-overlapping boxes.  In McShane mode a tag may sit anywhere; in
Henstock-Kurzweil mode it must lie in its box.  Fineness is exact: the box
must sit inside the open max-norm ball of radius ``gauge.radius(tag)``.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .cover import DepthExceeded, WorkLimitExceeded, dyadic_cover  # noqa: F401
from .gauges import Gauge
from .geometry import (
    GeometryError,
    Interval,
    IntervalAlgebraSet,
    VectorValue,
    ball_contains,
    circumradius,
    interior_contains,
    on_faces,
    overlaps,
    parse_box,
    point,
    scalar,
    volume,
)

MODES = ("M", "HK")


class PartitionError(ValueError):
    pass


class RedirectViolatesFineness(PartitionError):
    """A redirected tag no longer has its box inside the gauge ball."""


@dataclass(frozen=True)
class TaggedInterval:
    tag: tuple
    box: Interval

    def __post_init__(self):
        object.__setattr__(self, "tag", point(self.tag))
        if len(self.tag) != self.box.dim:
            raise GeometryError("tag and box dimensions differ")


def _sweep_overlap(boxes) -> tuple | None:
    """First overlapping pair found by a sweep along axis 0, else None."""
    order = sorted(range(len(boxes)), key=lambda i: boxes[i].lower[0])
    active: list = []
    for i in order:
        b = boxes[i]
        active = [j for j in active if boxes[j].upper[0] > b.lower[0]]
        for j in active:
            if overlaps(boxes[j], b):
                return j, i
        active.append(i)
    return None


@dataclass(frozen=True)
class TaggedPartition:
    """Finite family of tagged, pairwise non-overlapping boxes."""

    items: tuple
    mode: str = "HK"
    validate: bool = True
    # False when a sampler returned fewer items than requested
    complete: bool = True

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.mode not in MODES:
            raise PartitionError(f"unknown partition mode {self.mode!r}")
        if self.validate:
            if self.items:
                m = self.items[0].box.dim
                if any(it.box.dim != m for it in self.items):
                    raise GeometryError("mixed dimensions in partition")
            hit = _sweep_overlap([it.box for it in self.items])
            if hit is not None:
                a, b = (self.items[k].box for k in hit)
                raise PartitionError(f"boxes {a} and {b} overlap")
            if self.mode == "HK":
                for it in self.items:
                    if not it.box.contains_point(it.tag):
                        raise PartitionError(f"HK tag {it.tag} outside its box {it.box}")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def boxes(self):
        return [it.box for it in self.items]

    @property
    def tags(self):
        return [it.tag for it in self.items]

    def measure(self) -> Fraction:
        return sum((volume(it.box) for it in self.items), Fraction(0))


def is_delta_fine(pi: TaggedPartition, gauge: Gauge) -> bool:
    return all(ball_contains(it.tag, Fraction(gauge.radius(it.tag)), it.box) for it in pi)


def fineness_violations(pi: TaggedPartition, gauge: Gauge) -> list:
    """Items whose box escapes the gauge ball, with (circumradius, radius)."""
    out = []
    for it in pi:
        r = gauge.radius(it.tag)
        c = circumradius(it.tag, it.box)
        if not c < Fraction(r):
            out.append((it, c, r))
    return out


def is_partition_of(pi: TaggedPartition, W) -> bool:
    """Boxes lie in ``W`` (box or interval-algebra set) and fill it exactly."""
    if isinstance(W, Interval):
        total = volume(W)
        inside = all(W.contains_box(it.box) for it in pi)
    else:
        total = W.measure()
        inside = all(W.covers(it.box) for it in pi)
    if not inside:
        return False
    if _sweep_overlap(pi.boxes) is not None:
        return False
    return pi.measure() == total


# ---------------------------------------------------------------------------
# point sets Z
# ---------------------------------------------------------------------------

_DEN = 1 << 20


def _rand_in(rng: random.Random, a: Fraction, b: Fraction) -> Fraction:
    if a == b:
        return a
    return a + (b - a) * Fraction(rng.randrange(_DEN + 1), _DEN)


class PointSet:
    """Exact membership plus a seeded sampler of rational members."""

    def contains(self, t) -> bool:
        raise NotImplementedError

    def sample(self, rng: random.Random):
        raise NotImplementedError

    def __contains__(self, t):
        return self.contains(point(t))


class FinitePoints(PointSet):
    def __init__(self, points: Iterable):
        self.points = tuple(point(p) for p in points)
        if not self.points:
            raise ValueError("empty point set")
        self._set = set(self.points)

    def contains(self, t):
        return point(t) in self._set

    def sample(self, rng):
        return self.points[rng.randrange(len(self.points))]


class FaceSet(PointSet):
    """Finite union of closed, possibly degenerate boxes ``(lo, hi)``."""

    def __init__(self, faces: Iterable):
        self.faces = tuple((point(lo), point(hi)) for lo, hi in faces)
        if not self.faces:
            raise ValueError("empty face set")

    @classmethod
    def boundary_of(cls, S: IntervalAlgebraSet) -> "FaceSet":
        return cls(S.boundary_faces())

    def contains(self, t):
        return on_faces(self.faces, point(t))

    def sample(self, rng):
        lo, hi = self.faces[rng.randrange(len(self.faces))]
        return tuple(_rand_in(rng, a, b) for a, b in zip(lo, hi))


class ComplementOfInterior(PointSet):
    """``W \\ G°``: the part of the box ``W`` outside the open set ``G°``."""

    def __init__(self, G: IntervalAlgebraSet, W: Interval | None = None):
        self.G = G
        self.W = W or G.bounding_box
        self._faces = FaceSet.boundary_of(G)

    def contains(self, t):
        t = point(t)
        return self.W.contains_point(t) and not interior_contains(self.G, t)

    def sample(self, rng):
        if rng.random() < 0.5:
            t = self._faces.sample(rng)
            if self.W.contains_point(t):
                return t
        for _ in range(64):
            t = tuple(_rand_in(rng, a, b) for a, b in self.W.bounds)
            if self.contains(t):
                return t
        return self._faces.sample(rng)


class PredicateSet(PointSet):
    def __init__(self, predicate: Callable, sampler: Callable):
        self.predicate = predicate
        self.sampler = sampler

    def contains(self, t):
        return bool(self.predicate(point(t)))

    def sample(self, rng):
        return point(self.sampler(rng))


def _no_sampler(rng):
    raise ValueError("predicate point set has no sampler")


def as_point_set(Z) -> PointSet:
    if isinstance(Z, PointSet):
        return Z
    if isinstance(Z, IntervalAlgebraSet):
        return FaceSet.boundary_of(Z)
    if callable(Z):
        return PredicateSet(Z, _no_sampler)
    return FinitePoints(Z)


def is_z_tagged(pi: TaggedPartition, Z) -> bool:
    Z = as_point_set(Z)
    return all(Z.contains(it.tag) for it in pi)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def cousin_hk_partition(I: Interval, gauge: Gauge, depth_cap: int = 52, max_cells: int | None = 2_000_000):
    """HK-tagged gauge-fine partition of ``I`` by dyadic bisection.

    Tags are cell centres, except that a cell containing a singular point of
    the gauge is tagged at that point and a cell cut by a singular face is
    tagged on the face.

    Raises
    ------
    DepthExceeded
        when no fine cover exists within ``depth_cap`` bisections.
    """
    cover = dyadic_cover(I, gauge, depth_cap=depth_cap, max_cells=max_cells)
    return cover.to_partition("HK")


def _redirect_candidates(box: Interval):
    fracs = (Fraction(1, 2), Fraction(1, 4), Fraction(3, 4), Fraction(1, 8), Fraction(7, 8))
    for combo in itertools.product(fracs, repeat=box.dim):
        yield tuple(a + e * f for a, e, f in zip(box.lower, box.edges, combo))


def mcshane_partition(
    I: Interval,
    gauge: Gauge,
    tag_redirect=None,
    depth_cap: int = 52,
    max_cells: int | None = 2_000_000,
):
    """McShane-mode gauge-fine partition of ``I``.

    Parameters
    ----------
    tag_redirect : callable or PointSet, optional
        A callable ``(box, tag) -> new tag or None`` moves tags; a point set
        ``N`` moves every tag lying in ``N`` to a nearby point of its box
        outside ``N``.  Each moved tag is re-checked for fineness.

    Raises
    ------
    RedirectViolatesFineness
        when a redirected tag no longer controls its box.
    """
    base = dyadic_cover(I, gauge, depth_cap=depth_cap, max_cells=max_cells).to_partition("HK")
    if tag_redirect is None:
        return TaggedPartition(base.items, mode="M", validate=False)
    if isinstance(tag_redirect, PointSet) or not callable(tag_redirect):
        N = as_point_set(tag_redirect)

        def tag_redirect(box, t, N=N):
            if not N.contains(t):
                return None
            for c in _redirect_candidates(box):
                if not N.contains(c) and ball_contains(c, Fraction(gauge.radius(c)), box):
                    return c
            return next((c for c in _redirect_candidates(box) if not N.contains(c)), t)

    items = []
    for it in base:
        new = tag_redirect(it.box, it.tag)
        if new is None:
            items.append(TaggedInterval(it.tag, it.box))
            continue
        new = point(new)
        if not ball_contains(new, Fraction(gauge.radius(new)), it.box):
            raise RedirectViolatesFineness(f"tag moved to {new} does not control {it.box}")
        items.append(TaggedInterval(new, it.box))
    return TaggedPartition(tuple(items), mode="M", validate=False)


def sample_z_tagged_partition(
    Z,
    gauge: Gauge,
    W: Interval,
    seed: int | None = None,
    count: int = 16,
    mode: str = "HK",
    max_attempts: int | None = None,
    patience: int | None = None,
) -> TaggedPartition:
    """Random gauge-fine partial partition of ``W`` with all tags in ``Z``.

    Boxes are small rational boxes around sampled tags, clipped to ``W`` and
    rejected on overlap.  The result may hold fewer than ``count`` items,
    with ``complete`` set to False, if the attempt budget runs out or
    ``patience`` attempts in a row fail.
    """
    Z = as_point_set(Z)
    rng = random.Random(seed)
    items: list = []
    # float copies of the accepted boxes screen out clearly disjoint pairs
    flo = np.empty((count, W.dim))
    fhi = np.empty((count, W.dim))
    attempts = max_attempts or 50 * count
    patience = patience or max(100, 5 * count)
    misses = 0
    for _ in range(attempts):
        if len(items) >= count or misses >= patience:
            break
        misses += 1
        t = Z.sample(rng)
        if not W.contains_point(t):
            continue
        r = Fraction(gauge.radius(t))
        lo, hi = [], []
        for x, a, b in zip(t, W.lower, W.upper):
            u = Fraction(rng.randrange(1, 1024), 1024)
            v = Fraction(rng.randrange(1, 1024), 1024)
            lo.append(max(a, x - u * r))
            hi.append(min(b, x + v * r))
        if any(p >= q for p, q in zip(lo, hi)):
            continue
        box = Interval(tuple(lo), tuple(hi))
        n = len(items)
        if n:
            blo = np.array([float(x) for x in lo])
            bhi = np.array([float(x) for x in hi])
            slack = 1e-9 * (1.0 + np.abs(blo).max() + np.abs(bhi).max())
            maybe = np.nonzero(np.all(np.maximum(flo[:n], blo) < np.minimum(fhi[:n], bhi) + slack, axis=1))[0]
            if any(overlaps(box, items[k].box) for k in maybe):
                continue
        flo[n] = [float(x) for x in lo]
        fhi[n] = [float(x) for x in hi]
        items.append(TaggedInterval(t, box))
        misses = 0
    return TaggedPartition(tuple(items), mode=mode, complete=len(items) >= count)


# ---------------------------------------------------------------------------
# sums
# ---------------------------------------------------------------------------

def _value(v, norm_tag=None) -> VectorValue:
    if isinstance(v, VectorValue):
        return v
    if isinstance(v, (int, float, Fraction, np.floating, np.integer)):
        v = (v,)
    comps = tuple(c if isinstance(c, (int, Fraction)) else float(c) for c in v)
    return VectorValue(comps, norm_tag or "max")


def riemann_sum(f, pi: TaggedPartition, norm_tag: str | None = None) -> VectorValue:
    """``sum f(t) |I|`` over the partition.

    Exact when every value is rational, otherwise each component is summed
    with :func:`math.fsum` in item order.
    """
    terms = []
    for it in pi:
        v = _value(f(it.tag), norm_tag)
        terms.append((v, volume(it.box)))
    if not terms:
        return VectorValue((0.0,), norm_tag or "max")
    tag = norm_tag or terms[0][0].norm_tag
    d = terms[0][0].dim
    if all(v.exact for v, _ in terms):
        comps = tuple(sum((v[j] * vol for v, vol in terms), Fraction(0)) for j in range(d))
    else:
        comps = tuple(math.fsum(float(v[j]) * float(vol) for v, vol in terms) for j in range(d))
    return VectorValue(comps, tag)


def partition_defect(f, F, pi: TaggedPartition, norm_tag: str | None = None) -> float:
    """``|| sum (f(t)|I| - F(I)) ||`` over the partition."""
    s = riemann_sum(f, pi, norm_tag)
    total = None
    for it in pi:
        v = _value(F(it.box) if callable(F) else F.eval(it.box), s.norm_tag)
        total = v if total is None else total + v
    if total is None:
        return 0.0
    if s.exact and total.exact:
        return (s - total).norm()
    diff = tuple(float(a) - float(b) for a, b in zip(s, total))
    return VectorValue(diff, s.norm_tag).norm()


# ---------------------------------------------------------------------------
# text format: one ``tag | box`` per line
# ---------------------------------------------------------------------------

def _fmt(x: Fraction) -> str:
    return str(x)


def dumps(pi: TaggedPartition) -> str:
    lines = [f"# mode {pi.mode}"]
    for it in pi:
        lines.append(",".join(_fmt(x) for x in it.tag) + " | " + str(it.box))
    return "\n".join(lines) + "\n"


def loads(text: str) -> TaggedPartition:
    mode = "HK"
    items = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "mode":
                mode = parts[1]
            continue
        if "|" not in line:
            raise PartitionError(f"line {n}: expected 'tag | box'")
        tag_s, box_s = line.split("|", 1)
        try:
            tag = tuple(scalar(x) for x in tag_s.split(","))
            box = parse_box(box_s)
        except GeometryError as exc:
            raise PartitionError(f"line {n}: {exc}") from exc
        items.append(TaggedInterval(tag, box))
    return TaggedPartition(tuple(items), mode=mode)
