"""
Gauges: strictly positive radius functions with a lower-bound oracle per box.

Radii are floats.  Every gauge answers ``radii`` for an ``(N, m)`` array of
points and ``lower_bounds`` for arrays of box corners; the scalar methods
``radius`` and ``lower_bound`` wrap them for exact points and intervals.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .geometry import Interval, IntervalAlgebraSet, point


class Gauge:
    """Base class.  Subclasses define ``radii`` and ``lower_bounds``."""

    kind = "abstract"
    #: exact singular points (tag attractors for the partition generators)
    singular_points: tuple = ()
    #: exact degenerate boxes ``(lo, hi)`` across which tags are pinned
    singular_faces: tuple = ()

    def radii(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lower_bounds(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Per-box lower bound of the radius; ``nan`` means unknown."""
        return np.full(len(lo), np.nan)

    def max_radius(self) -> float:
        """Upper bound on every radius (inf when unknown)."""
        return math.inf

    def radius(self, t) -> float:
        t = np.array([float(x) for x in t])[None, :]
        r = float(self.radii(t)[0])
        if not r > 0:
            raise ValueError(f"gauge is not positive at {t[0]}: {r}")
        return r

    def lower_bound(self, box: Interval):
        lo = np.array([[float(a) for a in box.lower]])
        hi = np.array([[float(b) for b in box.upper]])
        v = float(self.lower_bounds(lo, hi)[0])
        return None if math.isnan(v) else v

    # float views of the singular set, used by the cover engine
    @property
    def points_array(self) -> np.ndarray:
        if not self.singular_points:
            return np.zeros((0, 0))
        return np.array([[float(x) for x in p] for p in self.singular_points])

    @property
    def faces_arrays(self):
        if not self.singular_faces:
            return np.zeros((0, 0)), np.zeros((0, 0))
        lo = np.array([[float(x) for x in f[0]] for f in self.singular_faces])
        hi = np.array([[float(x) for x in f[1]] for f in self.singular_faces])
        return lo, hi


class ConstantGauge(Gauge):
    kind = "constant"

    def __init__(self, r: float):
        if not r > 0:
            raise ValueError("gauge radius must be positive")
        self.r = float(r)

    def radii(self, pts):
        return np.full(len(pts), self.r)

    def max_radius(self):
        return self.r

    def lower_bounds(self, lo, hi):
        return np.full(len(lo), self.r)

    def __repr__(self):
        return f"ConstantGauge({self.r!r})"


class PiecewiseGauge(Gauge):
    """Constant on each region; the smallest value wins on shared faces."""

    kind = "piecewise"

    def __init__(self, regions: Sequence, default: float):
        self.regions = [(box, float(v)) for box, v in regions]
        if not default > 0 or any(not v > 0 for _, v in self.regions):
            raise ValueError("gauge values must be positive")
        self.default = float(default)
        self._max = max([self.default] + [v for _, v in self.regions])
        self._lo = np.array([[float(a) for a in b.lower] for b, _ in self.regions]) if self.regions else None
        self._hi = np.array([[float(a) for a in b.upper] for b, _ in self.regions]) if self.regions else None
        self._v = np.array([v for _, v in self.regions])

    def max_radius(self):
        return self._max

    @classmethod
    def on_set(cls, S: IntervalAlgebraSet, values, default: float):
        return cls(list(zip(S.cells, values)), default)

    def radii(self, pts):
        out = np.full(len(pts), self.default)
        if self._lo is None:
            return out
        inside = np.all((pts[:, None, :] >= self._lo[None]) & (pts[:, None, :] <= self._hi[None]), axis=2)
        vals = np.where(inside, self._v[None, :], np.inf).min(axis=1)
        hit = inside.any(axis=1)
        out[hit] = vals[hit]
        return out

    def lower_bounds(self, lo, hi):
        out = np.full(len(lo), self.default)
        if self._lo is None:
            return out
        meets = np.all((lo[:, None, :] <= self._hi[None]) & (hi[:, None, :] >= self._lo[None]), axis=2)
        inside = np.all((lo[:, None, :] >= self._lo[None]) & (hi[:, None, :] <= self._hi[None]), axis=2)
        vals = np.where(meets, self._v[None, :], np.inf).min(axis=1)
        covered = inside.any(axis=1)
        return np.where(covered, vals, np.minimum(vals, self.default))


def _point_dist(pts, sing):
    """Max-norm distance from each point to the nearest singular point."""
    if len(sing) == 0:
        return np.full(len(pts), np.inf)
    return np.abs(pts[:, None, :] - sing[None]).max(axis=2).min(axis=1)


def _box_dist(lo, hi, flo, fhi):
    """Max-norm distance from each box to the nearest (degenerate) box."""
    if len(flo) == 0:
        return np.full(len(lo), np.inf)
    gap = np.maximum(np.maximum(flo[None] - hi[:, None, :], lo[:, None, :] - fhi[None]), 0.0)
    return gap.max(axis=2).min(axis=1)


class DistanceGauge(Gauge):
    """``c * dist(t, S)**power`` clipped to ``[r_min, r_max]``.

    ``S`` is made of singular points (where the integrand may blow up or
    oscillate) and faces (bounded jumps).  Distances to faces are scaled by
    ``face_scale`` linearly and floored at ``face_floor``.  On ``S`` itself
    the radius is ``singular_radius`` (defaulting to ``r_min``), which must
    be positive.
    """

    kind = "distance"

    def __init__(
        self,
        points=(),
        faces=(),
        scale: float = 0.5,
        power: float = 1.0,
        face_scale: float = 2.0,
        r_max: float = math.inf,
        r_min: float = 0.0,
        singular_radius: float | None = None,
        face_floor: float = 0.0,
    ):
        self.singular_points = tuple(point(p) for p in points)
        self.singular_faces = tuple((point(lo), point(hi)) for lo, hi in faces)
        self.scale = float(scale)
        self.power = float(power)
        self.face_scale = float(face_scale)
        self.r_max = float(r_max)
        self.r_min = float(r_min)
        self.face_floor = float(face_floor)
        self.singular_radius = float(r_min if singular_radius is None else singular_radius)
        if not self.singular_radius > 0 and (self.singular_points or self.singular_faces):
            raise ValueError("singular_radius (or r_min) must be positive")
        if self.r_min > self.r_max:
            raise ValueError("r_min exceeds r_max")
        self._p = self.points_array
        self._flo, self._fhi = self.faces_arrays

    def max_radius(self):
        return max(self.r_max, self.singular_radius) if math.isfinite(self.r_max) else math.inf

    def _rho(self, dp, df):
        with np.errstate(over="ignore"):
            rp = self.scale * dp ** self.power
        return np.minimum(rp, np.maximum(self.face_scale * df, self.face_floor))

    def radii(self, pts):
        pts = np.asarray(pts, dtype=float)
        dp = _point_dist(pts, self._p)
        df = _box_dist(pts, pts, self._flo, self._fhi)
        r = np.clip(self._rho(dp, df), self.r_min, self.r_max)
        on = (dp == 0) | (df == 0)
        r[on] = min(self.singular_radius, self.r_max)
        return r

    def lower_bounds(self, lo, hi):
        dp = _box_dist(lo, hi, self._p, self._p) if len(self._p) else np.full(len(lo), np.inf)
        df = _box_dist(lo, hi, self._flo, self._fhi)
        r = np.clip(self._rho(dp, df), self.r_min, self.r_max)
        # a box touching S contains points where the radius is singular_radius
        on_face = df == 0
        r[on_face] = np.minimum(r[on_face], min(self.singular_radius, self.r_max))
        r[dp == 0] = min(self.singular_radius, self.r_min, self.r_max)
        return r

    def __repr__(self):
        return (
            f"DistanceGauge(points={len(self.singular_points)}, faces={len(self.singular_faces)}, "
            f"scale={self.scale}, power={self.power}, r_max={self.r_max}, r_min={self.r_min}, "
            f"singular_radius={self.singular_radius})"
        )


class MinGauge(Gauge):
    """Pointwise minimum of several gauges."""

    kind = "min"

    def __init__(self, *gauges: Gauge):
        self.gauges = gauges
        self.singular_points = tuple(p for g in gauges for p in g.singular_points)
        self.singular_faces = tuple(f for g in gauges for f in g.singular_faces)

    def radii(self, pts):
        return np.min([g.radii(pts) for g in self.gauges], axis=0)

    def lower_bounds(self, lo, hi):
        return np.min([g.lower_bounds(lo, hi) for g in self.gauges], axis=0)

    def max_radius(self):
        return min(g.max_radius() for g in self.gauges)
