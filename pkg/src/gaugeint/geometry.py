"""
Exact geometry for closed boxes in R^m under the maximum norm.

All endpoints are :class:`fractions.Fraction` so overlap, measure and
additivity checks are bit-exact.  Floats only enter through function values.
"""

from __future__ import annotations

import enum
import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

Scalar = Fraction
Point = tuple  # tuple[Fraction, ...]

NORMS = ("max", "euclidean", "one")


class GeometryError(ValueError):
    pass


def scalar(x) -> Fraction:
    """Coerce ``x`` to an exact rational.

    Floats are converted exactly (every binary float is a dyadic rational);
    strings may be ``"1/3"``, ``"0.25"`` or ``"2"``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise GeometryError(f"non-finite coordinate {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip()
        try:
            value = Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise GeometryError(f"malformed rational {x!r}") from exc
        return value
    try:
        return Fraction(float(x))
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"cannot interpret {x!r} as a rational") from exc


def point(*coords) -> Point:
    if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
        coords = tuple(coords[0])
    if not coords:
        raise GeometryError("points need at least one coordinate")
    return tuple(scalar(c) for c in coords)


def max_dist(s: Point, t: Point) -> Fraction:
    return max(abs(a - b) for a, b in zip(s, t))


@dataclass(frozen=True)
class Interval:
    """Closed non-degenerate box ``prod_j [lower_j, upper_j]``."""

    lower: Point
    upper: Point

    def __post_init__(self):
        lo = point(self.lower)
        hi = point(self.upper)
        if len(lo) != len(hi):
            raise GeometryError("lower and upper corners differ in dimension")
        for j, (a, b) in enumerate(zip(lo, hi)):
            if not a < b:
                raise GeometryError(f"degenerate interval on axis {j}: [{a}, {b}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_bounds(cls, bounds: Iterable[Sequence]) -> "Interval":
        bounds = list(bounds)
        return cls(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))

    @classmethod
    def cube(cls, m: int, a=0, b=1) -> "Interval":
        return cls((a,) * m, (b,) * m)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def bounds(self):
        return tuple(zip(self.lower, self.upper))

    @property
    def edges(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def max_edge(self) -> Fraction:
        return max(self.edges)

    @property
    def center(self) -> Point:
        return tuple((a + b) / 2 for a, b in zip(self.lower, self.upper))

    def volume(self) -> Fraction:
        return volume(self)

    def contains_point(self, t: Point) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lower, t, self.upper))

    def contains_box(self, other: "Interval") -> bool:
        return all(
            a <= c and d <= b
            for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def corners(self):
        return itertools.product(*self.bounds)

    def split(self, axis: int, at) -> tuple["Interval", "Interval"]:
        at = scalar(at)
        a, b = self.lower[axis], self.upper[axis]
        if not a < at < b:
            raise GeometryError(f"split point {at} not interior to [{a}, {b}]")
        left_hi = self.upper[:axis] + (at,) + self.upper[axis + 1:]
        right_lo = self.lower[:axis] + (at,) + self.lower[axis + 1:]
        return Interval(self.lower, left_hi), Interval(right_lo, self.upper)

    def children(self):
        """The 2^m congruent sub-boxes from bisecting every axis."""
        mid = self.center
        halves = [((a, c), (c, b)) for a, c, b in zip(self.lower, mid, self.upper)]
        for combo in itertools.product(*halves):
            yield Interval.from_bounds(combo)

    def dilate(self, r) -> "Interval":
        r = scalar(r)
        return Interval(tuple(a - r for a in self.lower), tuple(b + r for b in self.upper))

    def key(self) -> tuple:
        return self.lower + self.upper

    def __str__(self) -> str:
        return "x".join(f"[{a},{b}]" for a, b in self.bounds)


class Cut(enum.Enum):
    """Outcome of an intersection that is not a non-degenerate box."""

    EMPTY = "empty"
    DEGENERATE = "degenerate"


def _check_dims(I: Interval, J: Interval) -> None:
    if I.dim != J.dim:
        raise GeometryError(f"dimension mismatch: {I.dim} vs {J.dim}")


def volume(I: Interval) -> Fraction:
    v = Fraction(1)
    for e in I.edges:
        v *= e
    return v


def intersect(I: Interval, J: Interval):
    """Componentwise ``[max(a), min(b)]``.

    Returns the intersection box, :attr:`Cut.DEGENERATE` when the boxes meet
    in a set of measure zero, or :attr:`Cut.EMPTY` when they are disjoint.
    """
    _check_dims(I, J)
    lo = tuple(max(a, c) for a, c in zip(I.lower, J.lower))
    hi = tuple(min(b, d) for b, d in zip(I.upper, J.upper))
    if any(a > b for a, b in zip(lo, hi)):
        return Cut.EMPTY
    if any(a == b for a, b in zip(lo, hi)):
        return Cut.DEGENERATE
    return Interval(lo, hi)


def overlaps(I: Interval, J: Interval) -> bool:
    """True iff the interiors meet, i.e. ``|I & J| > 0``."""
    _check_dims(I, J)
    return all(max(a, c) < min(b, d) for a, b, c, d in zip(I.lower, I.upper, J.lower, J.upper))


def ball_contains(t: Point, r, I: Interval) -> bool:
    """Is ``I`` inside the open max-norm ball ``B(t, r)``?"""
    r = scalar(r)
    return all(max(abs(a - x), abs(b - x)) < r for a, b, x in zip(I.lower, I.upper, t))


def circumradius(t: Point, I: Interval) -> Fraction:
    """Largest max-norm distance from ``t`` to a point of ``I``."""
    return max(max(abs(a - x), abs(b - x)) for a, b, x in zip(I.lower, I.upper, t))


def box_distance(lo1, hi1, lo2, hi2) -> Fraction:
    """Max-norm distance between two (possibly degenerate) closed boxes."""
    return max(
        max(Fraction(0), c - b, a - d) for a, b, c, d in zip(lo1, hi1, lo2, hi2)
    )


# ---------------------------------------------------------------------------
# finite interval-algebra sets
# ---------------------------------------------------------------------------

def _breakpoints(boxes, m):
    axes = [set() for _ in range(m)]
    for lo, hi in boxes:
        for j in range(m):
            axes[j].add(lo[j])
            axes[j].add(hi[j])
    return [sorted(a) for a in axes]


def _grid(axes):
    """Elementary cells of the product grid spanned by the breakpoints."""
    spans = [list(zip(ax[:-1], ax[1:])) for ax in axes]
    for combo in itertools.product(*spans):
        yield Interval.from_bounds(combo)


@dataclass(frozen=True)
class IntervalAlgebraSet:
    """Closed finite union of pairwise non-overlapping boxes."""

    cells: tuple
    bounding_box: Interval

    def __post_init__(self):
        if not self.cells:
            raise GeometryError("set has empty interior")
        for c in self.cells:
            if not self.bounding_box.contains_box(c):
                raise GeometryError(f"cell {c} escapes bounding box {self.bounding_box}")
        for a, b in itertools.combinations(self.cells, 2):
            if overlaps(a, b):
                raise GeometryError(f"cells {a} and {b} overlap")

    @property
    def dim(self) -> int:
        return self.bounding_box.dim

    def measure(self) -> Fraction:
        return sum((volume(c) for c in self.cells), Fraction(0))

    def contains(self, t: Point) -> bool:
        return any(c.contains_point(t) for c in self.cells)

    def interior_contains(self, t: Point) -> bool:
        return interior_contains(self, t)

    def intersection_measure(self, box: Interval) -> Fraction:
        total = Fraction(0)
        for c in self.cells:
            J = intersect(c, box)
            if isinstance(J, Interval):
                total += volume(J)
        return total

    def covers(self, box: Interval) -> bool:
        """``box`` lies inside the closed set (equivalently its interior in the set's interior)."""
        return self.intersection_measure(box) == volume(box)

    def boundary_faces(self) -> tuple:
        """Exact topological boundary as a list of degenerate boxes ``(lo, hi)``."""
        return boundary_faces(self)

    def float_bounds(self):
        import numpy as np

        lo = np.array([[float(a) for a in c.lower] for c in self.cells])
        hi = np.array([[float(b) for b in c.upper] for c in self.cells])
        return lo, hi

    def __str__(self) -> str:
        return " u ".join(str(c) for c in self.cells)


def set_normalize(signed_cells, bounding_box: Interval | None = None) -> IntervalAlgebraSet:
    """Disjoint normal form of an ordered union/difference expression.

    ``signed_cells`` is a sequence of ``(Interval, sign)`` with sign ``'+'``
    (union) or ``'-'`` (difference), applied left to right.  The result is
    the set of elementary grid cells (over all breakpoints) that survive.
    """
    signed_cells = [(c, s) for c, s in signed_cells]
    if not signed_cells:
        raise GeometryError("set has empty interior")
    m = signed_cells[0][0].dim
    for c, s in signed_cells:
        if c.dim != m:
            raise GeometryError("dimension mismatch in set description")
        if s not in ("+", "-"):
            raise GeometryError(f"bad sign {s!r}")
    axes = _breakpoints([(c.lower, c.upper) for c, _ in signed_cells], m)
    kept = []
    for cell in _grid(axes):
        mid = cell.center
        inside = False
        for c, s in signed_cells:
            if all(a < x < b for a, x, b in zip(c.lower, mid, c.upper)):
                inside = s == "+"
        if inside:
            kept.append(cell)
    if not kept:
        raise GeometryError("set has empty interior")
    if bounding_box is None:
        lo = tuple(min(c.lower[j] for c in kept) for j in range(m))
        hi = tuple(max(c.upper[j] for c in kept) for j in range(m))
        bounding_box = Interval(lo, hi)
    return IntervalAlgebraSet(tuple(kept), bounding_box)


def interior_contains(S: IntervalAlgebraSet, t: Point) -> bool:
    """Exact membership of ``t`` in the interior of the closed union.

    Near ``t`` every closed orthant must be filled by a single cell containing
    ``t``: cells away from ``t`` are at positive distance, and a cell through
    ``t`` that is flat on the wrong side of an axis only covers a null slice.
    """
    t = point(t)
    through = [c for c in S.cells if c.contains_point(t)]
    if not through:
        return False
    for signs in itertools.product((-1, 1), repeat=len(t)):
        ok = False
        for c in through:
            if all(
                (c.upper[j] > t[j]) if s > 0 else (c.lower[j] < t[j])
                for j, s in enumerate(signs)
            ):
                ok = True
                break
        if not ok:
            return False
    return True


def boundary_faces(S: IntervalAlgebraSet) -> tuple:
    m = S.dim
    axes = _breakpoints([(c.lower, c.upper) for c in S.cells], m)
    index = [{v: i for i, v in enumerate(ax)} for ax in axes]
    shape = [len(ax) - 1 for ax in axes]
    filled = set()
    for c in S.cells:
        ranges = [range(index[j][c.lower[j]], index[j][c.upper[j]]) for j in range(m)]
        filled.update(itertools.product(*ranges))
    faces = []
    for j in range(m):
        for idx in itertools.product(*[range(n) for n in shape]):
            here = idx in filled
            # face on the upper side of cell idx along axis j
            up = idx[:j] + (idx[j] + 1,) + idx[j + 1:]
            there = up in filled if idx[j] + 1 < shape[j] else False
            if here != there:
                faces.append(_face(axes, idx, j, upper=True))
            if idx[j] == 0 and here:
                faces.append(_face(axes, idx, j, upper=False))
    return tuple(faces)


def _face(axes, idx, j, upper):
    lo = []
    hi = []
    for k, i in enumerate(idx):
        if k == j:
            v = axes[k][i + 1] if upper else axes[k][i]
            lo.append(v)
            hi.append(v)
        else:
            lo.append(axes[k][i])
            hi.append(axes[k][i + 1])
    return tuple(lo), tuple(hi)


def on_faces(faces, t: Point) -> bool:
    return any(all(a <= x <= b for a, x, b in zip(lo, t, hi)) for lo, hi in faces)


def union_volume(boxes: Iterable[Interval]) -> Fraction:
    """Exact Lebesgue measure of a finite union of boxes."""
    import bisect

    import numpy as np

    boxes = [b for b in boxes if volume(b) > 0]
    if not boxes:
        return Fraction(0)
    m = boxes[0].dim
    axes = [sorted({x for b in boxes for x in (b.lower[j], b.upper[j])}) for j in range(m)]
    covered = np.zeros([len(a) - 1 for a in axes], dtype=bool)
    for b in boxes:
        sl = tuple(
            slice(bisect.bisect_left(axes[j], b.lower[j]), bisect.bisect_left(axes[j], b.upper[j]))
            for j in range(m)
        )
        covered[sl] = True
    widths = [[a[i + 1] - a[i] for i in range(len(a) - 1)] for a in axes]
    total = Fraction(0)
    for idx in zip(*np.nonzero(covered)):
        v = Fraction(1)
        for j, i in enumerate(idx):
            v *= widths[j][i]
        total += v
    return total


def neighborhood_volume(faces, r) -> Fraction:
    """Measure of the open max-norm ``r``-neighbourhood of a union of closed boxes."""
    r = scalar(r)
    return union_volume(
        Interval(tuple(a - r for a in lo), tuple(b + r for b in hi)) for lo, hi in faces
    )


# ---------------------------------------------------------------------------
# set-description text format
# ---------------------------------------------------------------------------

_BOX_RE = re.compile(r"\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\]")


def parse_box(text: str) -> Interval:
    """Parse ``[0,1]x[1/3,2/3]`` into an :class:`Interval`."""
    parts = [p.strip() for p in re.split(r"\s*[x×]\s*(?=\[)", text.strip())]
    bounds = []
    for part in parts:
        mt = _BOX_RE.fullmatch(part)
        if mt is None:
            raise GeometryError(f"malformed box component {part!r}")
        bounds.append((scalar(mt.group(1)), scalar(mt.group(2))))
    return Interval.from_bounds(bounds)


def parse_set(lines: Iterable[str]) -> list:
    """Parse lines like ``+ [0,1]x[0,1]`` into signed cells."""
    out = []
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sign, rest = line[0], line[1:]
        if sign not in "+-":
            raise GeometryError(f"set line must start with + or -: {raw!r}")
        out.append((parse_box(rest), sign))
    return out


def format_box(I: Interval) -> str:
    return str(I)


# ---------------------------------------------------------------------------
# values
# ---------------------------------------------------------------------------

def vnorm(components, norm: str = "max") -> float:
    comps = [abs(c) for c in components]
    if norm == "max":
        return float(max(comps)) if comps else 0.0
    if norm == "one":
        return float(sum(comps))
    if norm == "euclidean":
        return math.sqrt(sum(float(c) ** 2 for c in comps))
    raise ValueError(f"unknown norm {norm!r}")


@dataclass(frozen=True)
class VectorValue:
    """Element of R^d, exact (all Fractions/ints) or approximate (floats)."""

    components: tuple
    norm_tag: str = "max"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.norm_tag not in NORMS:
            raise ValueError(f"unknown norm {self.norm_tag!r}")

    @classmethod
    def zeros(cls, d: int, norm_tag: str = "max", exact: bool = True):
        z = Fraction(0) if exact else 0.0
        return cls((z,) * d, norm_tag)

    @property
    def exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.components)

    @property
    def dim(self) -> int:
        return len(self.components)

    def norm(self) -> float:
        return vnorm(self.components, self.norm_tag)

    def _coerce(self, other):
        if isinstance(other, VectorValue):
            if other.dim != self.dim:
                raise ValueError("value dimension mismatch")
            return other.components
        return tuple(other)

    def __add__(self, other):
        return VectorValue(tuple(a + b for a, b in zip(self.components, self._coerce(other))), self.norm_tag)

    def __sub__(self, other):
        return VectorValue(tuple(a - b for a, b in zip(self.components, self._coerce(other))), self.norm_tag)

    def __neg__(self):
        return VectorValue(tuple(-a for a in self.components), self.norm_tag)

    def __mul__(self, s):
        return VectorValue(tuple(a * s for a in self.components), self.norm_tag)

    __rmul__ = __mul__

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def to_floats(self) -> tuple:
        return tuple(float(c) for c in self.components)

    def dist(self, other) -> float:
        return (self - other).norm()
