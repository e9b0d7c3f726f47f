"""
Countable divisions as finite dyadic prefixes with certified tails.

Dyadic generations are anchored to the host's bounding box: generation
``g`` cubes have edges ``edge / 2**g`` on every axis.  A cube is admitted
when its interior lies in the host's interior and no ancestor was admitted.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .geometry import (
    GeometryError,
    Interval,
    IntervalAlgebraSet,
    intersect,
    overlaps,
    parse_box,
    volume,
)

INSIDE, OUTSIDE, STRADDLE = "inside", "outside", "straddle"


class DivisionError(ValueError):
    pass


class OracleSet:
    """Set known through membership and box classification only.

    Subclasses supply ``classify_box`` (inside / outside / straddle, exact),
    ``contains`` for exact points, ``contains_many`` for float arrays, the
    bounding box and a boundary certificate ``neighborhood_bound(r)`` that
    bounds the measure of the open ``r``-neighbourhood of the boundary.
    """

    bounding_box: Interval
    perimeter_bound: float

    @property
    def dim(self) -> int:
        return self.bounding_box.dim

    def classify_box(self, box: Interval) -> str:
        raise NotImplementedError

    def contains(self, t) -> bool:
        raise NotImplementedError

    def contains_many(self, pts):
        raise NotImplementedError

    def interior_contains(self, t) -> bool:
        raise NotImplementedError

    def boundary_point(self, rng: random.Random):
        raise NotImplementedError

    def neighborhood_bound(self, r: float) -> float:
        raise NotImplementedError

    def measure(self):
        """Reference measure when known in closed form (tests only)."""
        return None


class Disk(OracleSet):
    """Closed Euclidean disk in the plane."""

    def __init__(self, center=(Fraction(1, 2), Fraction(1, 2)), radius=Fraction(1, 2)):
        self.center = tuple(Fraction(c) for c in center)
        self.radius = Fraction(radius)
        cx, cy = self.center
        R = self.radius
        self.bounding_box = Interval((cx - R, cy - R), (cx + R, cy + R))
        self.perimeter_bound = 2 * math.pi * float(R)

    def _d2(self, t):
        return sum((x - c) ** 2 for x, c in zip(t, self.center))

    def classify_box(self, box):
        R2 = self.radius ** 2
        far = max(self._d2(p) for p in box.corners())
        if far <= R2:
            return INSIDE
        near = sum(
            (max(a - c, Fraction(0), c - b)) ** 2
            for a, b, c in zip(box.lower, box.upper, self.center)
        )
        return OUTSIDE if near >= R2 else STRADDLE

    def contains(self, t):
        return self._d2(tuple(Fraction(x) for x in t)) <= self.radius ** 2

    def interior_contains(self, t) -> bool:
        return self._d2(tuple(Fraction(x) for x in t)) < self.radius ** 2

    def boundary_point(self, rng: random.Random):
        """Exact rational point of the circle (rational parametrisation)."""
        s = Fraction(rng.randrange(-4096, 4097), 4096)
        u, v = (1 - s * s) / (1 + s * s), 2 * s / (1 + s * s)
        if rng.random() < 0.5:
            u = -u
        cx, cy = self.center
        return (cx + self.radius * u, cy + self.radius * v)

    def contains_many(self, pts):
        import numpy as np

        c = np.array([float(v) for v in self.center])
        return ((pts - c) ** 2).sum(axis=1) <= float(self.radius) ** 2

    def neighborhood_bound(self, r):
        # the max-norm r-collar sits inside the Euclidean annulus of half-width r*sqrt(2)
        R = float(self.radius)
        w = r * math.sqrt(2)
        return math.pi * ((R + w) ** 2 - max(R - w, 0.0) ** 2)

    def measure(self):
        return math.pi * float(self.radius) ** 2

    def __str__(self):
        return f"disk(center={self.center[0]},{self.center[1]}; radius={self.radius})"


def classify(host, box: Interval) -> str:
    if isinstance(host, IntervalAlgebraSet):
        inter = host.intersection_measure(box)
        if inter == 0:
            return OUTSIDE
        return INSIDE if inter == volume(box) else STRADDLE
    return host.classify_box(box)


@dataclass(frozen=True)
class Division:
    """Finite ordered prefix of a division, with tail accounting.

    ``tail_measure`` bounds the host interior left uncovered: exact for
    interval-algebra hosts, the total volume of the straddling cubes at the
    final generation for oracle hosts.
    """

    cells: tuple
    generations: tuple
    host: object
    covers_interior: bool
    tail_measure: object
    depth: int
    a_priori_bound: float | None = None
    straddling: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    @property
    def covered_measure(self) -> Fraction:
        return sum((volume(c) for c in self.cells), Fraction(0))

    @property
    def exact(self) -> bool:
        return isinstance(self.host, IntervalAlgebraSet)


def _children(box: Interval):
    return list(box.children())


def dyadic_division(host, depth: int) -> Division:
    """Maximal dyadic cubes of generations ``1..depth`` inside the host interior."""
    if depth < 0:
        raise DivisionError("depth must be non-negative")
    bbox = host.bounding_box
    if isinstance(host, IntervalAlgebraSet) and host.measure() == 0:
        raise DivisionError("host interior is empty")
    admitted = []
    frontier = [bbox]
    for g in range(1, depth + 1):
        nxt = []
        for parent in frontier:
            for cube in _children(parent):
                kind = classify(host, cube)
                if kind == INSIDE:
                    admitted.append((g, cube))
                elif kind == STRADDLE:
                    nxt.append(cube)
        frontier = nxt
    admitted.sort(key=lambda gc: (gc[0], gc[1].lower))
    cells = tuple(c for _, c in admitted)
    gens = tuple(g for g, _ in admitted)
    covered = sum((volume(c) for c in cells), Fraction(0))
    straddling = tuple(frontier) if depth else (bbox,)
    if isinstance(host, IntervalAlgebraSet):
        tail = host.measure() - covered
        prior = None
    else:
        tail = sum((volume(c) for c in straddling), Fraction(0))
        edge = float(bbox.max_edge)
        prior = 4 * host.perimeter_bound * edge * 2.0 ** -depth
    return Division(cells, gens, host, True, tail, depth, prior, straddling)


def permute_division(D: Division, seed=None) -> Division:
    """Same cells in a seeded order; ``seed=None`` keeps the order."""
    if seed is None:
        return D
    order = list(range(len(D.cells)))
    random.Random(seed).shuffle(order)
    return replace(
        D,
        cells=tuple(D.cells[k] for k in order),
        generations=tuple(D.generations[k] for k in order),
    )


def sparse_division(D: Division, seed, keep: float = 0.5) -> Division:
    """Random sub-family of ``D``: still a division in the host, no longer of it."""
    rng = random.Random(seed)
    idx = [k for k in range(len(D.cells)) if rng.random() < keep]
    cells = tuple(D.cells[k] for k in idx)
    gens = tuple(D.generations[k] for k in idx)
    return replace(D, cells=cells, generations=gens, covers_interior=False)


def restrict_division(D: Division, I: Interval) -> list:
    """``(k, I & C_k)`` for every cell ``C_k`` whose interior meets ``I``."""
    out = []
    for k, C in enumerate(D.cells):
        if overlaps(I, C):
            out.append((k, intersect(I, C)))
    return out


def local_tail(D: Division, I: Interval):
    """Measure of ``I`` inside the host but outside the prefix (exact when possible)."""
    if isinstance(D.host, IntervalAlgebraSet):
        inside = D.host.intersection_measure(I)
    else:
        inside = sum(
            (volume(J) for J in (intersect(I, c) for c in D.straddling) if isinstance(J, Interval)),
            Fraction(0),
        )
        # for oracle hosts the straddling cubes already over-cover the gap
        return inside
    covered = sum((volume(J) for _, J in restrict_division(D, I)), Fraction(0))
    return inside - covered


def dump_division(D: Division) -> str:
    """One ``generation | box`` line per cell."""
    lines = [f"# depth {D.depth} cells {len(D.cells)} tail {D.tail_measure}"]
    lines += [f"{g} | {c}" for g, c in zip(D.generations, D.cells)]
    return "\n".join(lines) + "\n"


def load_division_cells(text: str) -> list:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        g, box = line.split("|", 1)
        out.append((int(g), parse_box(box)))
    return out


def check_non_overlap(D: Division) -> bool:
    for a, b in itertools.combinations(D.cells, 2):
        if overlaps(a, b):
            return False
    return True


__all__ = [
    "Disk",
    "Division",
    "DivisionError",
    "GeometryError",
    "OracleSet",
    "check_non_overlap",
    "dump_division",
    "dyadic_division",
    "load_division_cells",
    "local_tail",
    "permute_division",
    "restrict_division",
    "sparse_division",
]
