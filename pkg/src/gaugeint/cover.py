"""
Vectorised dyadic Cousin covers.

A cover is built level by level: every active cell of the anchor box is
either accepted (some admissible tag makes it fine) or split into its 2^m
halves.  Cells are stored as ``(depth, integer index)`` pairs so the exact
boxes can always be recovered; float corners are exact dyadic numbers as
long as the depth stays below the float mantissa.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .gauges import Gauge
from .geometry import Interval

# relative slack on float fineness tests so exact re-checks always pass
MARGIN = 1e-9
# cells per numpy block when evaluating integrands
BLOCK = 1 << 18

CENTER = -1


class DepthExceeded(RuntimeError):
    """Bisection reached the depth cap without finishing the cover."""


class WorkLimitExceeded(RuntimeError):
    """The cover would need more cells than the configured budget."""


class IntegrandError(ArithmeticError):
    """Integrand produced a non-finite value at a non-singular tag."""


@lru_cache(maxsize=None)
def gauss_reference(p: int):
    """Gauss-Legendre nodes on [0, 1] and the breakpoints that make them tags.

    The node ``x_i`` lies strictly inside ``[y_{i-1}, y_i]`` where the
    ``y`` are the cumulative weights, so nodes and weights form a genuine
    tagged partition of [0, 1].
    """
    x, w = np.polynomial.legendre.leggauss(p)
    x = (x + 1) / 2
    w = w / 2
    y = np.concatenate([[0.0], np.cumsum(w)])
    y[-1] = 1.0
    assert np.all(y[:-1] < x) and np.all(x < y[1:])
    return x, y, np.diff(y)


@lru_cache(maxsize=None)
def gauss_tensor(p: int, m: int):
    """Tensor nodes ``(p^m, m)``, weights ``(p^m,)`` and sub-cell corners."""
    x, y, dy = gauss_reference(p)
    combos = list(itertools.product(range(p), repeat=m))
    nodes = np.array([[x[i] for i in c] for c in combos]).reshape(len(combos), m)
    weights = np.array([math.prod(dy[i] for i in c) for c in combos])
    sub_lo = np.array([[y[i] for i in c] for c in combos]).reshape(len(combos), m)
    sub_hi = np.array([[y[i + 1] for i in c] for c in combos]).reshape(len(combos), m)
    return nodes, weights, sub_lo, sub_hi


def default_subtags(m: int) -> int:
    return {1: 8, 2: 4, 3: 3}.get(m, 2)


@dataclass
class CoverChunk:
    depth: int
    index: np.ndarray  # (N, m) int64
    tags: np.ndarray  # (N, m) float
    source: np.ndarray  # (N,) int: CENTER, k >= 0 singular point k, -2 - f face f
    sub_ok: np.ndarray  # (N,) bool: Gauss sub-tags of the cell are fine too

    def __len__(self):
        return len(self.index)


@dataclass
class DyadicCover:
    box: Interval
    gauge: Gauge
    subtags: int = 0
    chunks: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def n_cells(self) -> int:
        return sum(len(c) for c in self.chunks)

    @property
    def max_depth(self) -> int:
        return max((c.depth for c in self.chunks if len(c)), default=0)

    def _geom(self, chunk):
        a = np.array([float(v) for v in self.box.lower])
        E = np.array([float(v) for v in self.box.edges])
        w = E * 2.0 ** -chunk.depth
        lo = a + chunk.index * w
        return lo, w

    def float_cells(self):
        """Yield ``(lo, hi, tags, source, sub_ok)`` arrays chunk by chunk."""
        a = np.array([float(v) for v in self.box.lower])
        for ch in self.chunks:
            lo, w = self._geom(ch)
            yield lo, a + (ch.index + 1) * w, ch.tags, ch.source, ch.sub_ok

    def exact_box(self, depth: int, idx) -> Interval:
        lo = []
        hi = []
        for a, e, k in zip(self.box.lower, self.box.edges, idx):
            step = e / (1 << depth)
            lo.append(a + step * int(k))
            hi.append(a + step * (int(k) + 1))
        return Interval(tuple(lo), tuple(hi))

    def singular_volume(self) -> float:
        """Total volume of cells whose tag was pinned to the singular set."""
        vol = math.prod(float(e) for e in self.box.edges)
        parts = [
            float(np.count_nonzero(ch.source != CENTER)) * vol * 2.0 ** (-ch.depth * self.dim)
            for ch in self.chunks
        ]
        return math.fsum(parts)

    def riemann_sum(
        self,
        func,
        value_dim: int,
        mode: str = "HK",
        use_subtags: bool = True,
        absolute: bool = False,
        exclude_singular: bool = False,
        with_abs: bool = False,
    ) -> np.ndarray:
        """Compensated Riemann sum of a vectorised integrand over the cover.

        ``func`` maps an ``(N, m)`` float array to ``(N, value_dim)``.  Cells
        whose Gauss sub-tags are fine are split into Gauss sub-cells.  In
        ``"HK"`` mode cells pinned to a singular point keep that tag; in
        ``"M"`` mode they are sub-tagged too when that is fine.  Non-finite
        values at singular tags count as zero.

        With ``with_abs`` the sum of ``|f(t)| |I|`` per component is returned
        as well, as ``(sum, abs_sum)``; it bounds the rounding error.
        """
        m = self.dim
        p = self.subtags if use_subtags else 0
        if p:
            g_nodes, g_w, _, _ = gauss_tensor(p, m)
        partials = [[] for _ in range(value_dim)]
        abs_partials = [[] for _ in range(value_dim)]
        for ch in self.chunks:
            if not len(ch):
                continue
            lo, w = self._geom(ch)
            vol = float(np.prod(w))
            pinned = ch.source >= 0
            keep = pinned.copy() if exclude_singular else np.zeros(len(ch), bool)
            if p:
                sub = ch.sub_ok & ~keep
                if mode == "HK":
                    sub &= ~pinned
            else:
                sub = np.zeros(len(ch), bool)
            single = ~sub & ~keep
            # single-tag cells
            idx = np.nonzero(single)[0]
            for s in range(0, len(idx), BLOCK):
                blk = idx[s:s + BLOCK]
                vals = self._eval(func, ch.tags[blk], value_dim, pinned[blk], absolute)
                for j in range(value_dim):
                    partials[j].append(math.fsum(vals[:, j] * vol))
                    if with_abs:
                        abs_partials[j].append(math.fsum(np.abs(vals[:, j]) * vol))
            # Gauss sub-tagged cells
            idx = np.nonzero(sub)[0]
            if len(idx):
                per = max(1, BLOCK // len(g_w))
                for s in range(0, len(idx), per):
                    blk = idx[s:s + per]
                    pts = (lo[blk][:, None, :] + g_nodes[None] * w).reshape(-1, m)
                    vals = self._eval(func, pts, value_dim, None, absolute)
                    cell = np.einsum("cqd,q->cd", vals.reshape(len(blk), len(g_w), value_dim), g_w)
                    for j in range(value_dim):
                        partials[j].append(math.fsum(cell[:, j] * vol))
                    if with_abs:
                        acell = np.einsum("cqd,q->cd", np.abs(vals).reshape(len(blk), len(g_w), value_dim), g_w)
                        for j in range(value_dim):
                            abs_partials[j].append(math.fsum(acell[:, j] * vol))
        total = np.array([math.fsum(pj) for pj in partials])
        if with_abs:
            return total, np.array([math.fsum(pj) for pj in abs_partials])
        return total

    @staticmethod
    def _eval(func, pts, value_dim, pinned, absolute):
        vals = np.asarray(func(pts), dtype=float).reshape(len(pts), value_dim)
        bad = ~np.isfinite(vals).all(axis=1)
        if bad.any():
            if pinned is None or not np.all(pinned[bad]):
                where = pts[np.nonzero(bad & (True if pinned is None else ~pinned))[0][0]]
                raise IntegrandError(f"non-finite integrand value at {tuple(where)}")
            vals = vals.copy()
            vals[bad] = 0.0
        return np.abs(vals) if absolute else vals

    def to_partition(self, mode: str = "HK", use_subtags: bool = False):
        """Exact :class:`~gaugeint.partitions.TaggedPartition` of the cover.

        With ``use_subtags`` the sub-taggable cells are split into Gauss sub-cells
        (exact rational images of the float breakpoints and nodes).
        """
        from .partitions import TaggedInterval, TaggedPartition

        m = self.dim
        sing = self.gauge.singular_points
        faces = self.gauge.singular_faces
        items = []
        subtags = self.subtags if use_subtags else 0
        if subtags:
            g_nodes, _, g_lo, g_hi = gauss_tensor(subtags, m)
        for ch in self.chunks:
            for k in range(len(ch)):
                box = self.exact_box(ch.depth, ch.index[k])
                src = int(ch.source[k])
                split = subtags and ch.sub_ok[k] and not (mode == "HK" and src >= 0)
                if split:
                    for q in range(len(g_nodes)):
                        lo = tuple(a + e * Fraction(float(y)) for a, e, y in zip(box.lower, box.edges, g_lo[q]))
                        hi = tuple(a + e * Fraction(float(y)) for a, e, y in zip(box.lower, box.edges, g_hi[q]))
                        t = tuple(a + e * Fraction(float(x)) for a, e, x in zip(box.lower, box.edges, g_nodes[q]))
                        items.append(TaggedInterval(t, Interval(lo, hi)))
                    continue
                if src >= 0:
                    t = sing[src]
                elif src == CENTER:
                    t = box.center
                else:
                    flo, fhi = faces[-2 - src]
                    t = tuple(
                        min(max(c, max(fl, bl)), min(fh, bh))
                        for c, fl, fh, bl, bh in zip(box.center, flo, fhi, box.lower, box.upper)
                    )
                items.append(TaggedInterval(t, box))
        return TaggedPartition(tuple(items), mode=mode, validate=False)


def _forced_tags(lo, hi, centers, sing, flo, fhi, exact=None):
    """Pin tags to singular points in the closed cell, else to faces through it.

    Returns ``(tags, source)``.  Among several candidates the one nearest the
    centre wins, ties going to the lexicographically smallest tag.  With
    ``exact = (points, box_of_row)`` membership is decided in exact
    arithmetic for the cells the float test (widened by a few ulps) flags.
    """
    n, m = lo.shape
    tags = centers.copy()
    source = np.full(n, CENTER, dtype=np.int64)
    if len(sing):
        if exact is None:
            inside = np.all((sing[None] >= lo[:, None, :]) & (sing[None] <= hi[:, None, :]), axis=2)
        else:
            slack = 8 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi))
            inside = np.all(
                (sing[None] >= (lo - slack)[:, None, :]) & (sing[None] <= (hi + slack)[:, None, :]), axis=2
            )
            points, box_of_row = exact
            for r in np.nonzero(inside.any(axis=1))[0]:
                box = box_of_row(r)
                for k in np.nonzero(inside[r])[0]:
                    inside[r, k] = box.contains_point(points[k])
        rows = np.nonzero(inside.any(axis=1))[0]
        for r in rows:
            cand = np.nonzero(inside[r])[0]
            if len(cand) > 1:
                d = np.abs(sing[cand] - centers[r]).max(axis=1)
                order = np.lexsort(tuple(sing[cand][:, j] for j in reversed(range(m))) + (d,))
                cand = cand[order]
            source[r] = cand[0]
            tags[r] = sing[cand[0]]
    if len(flo):
        free = np.nonzero(source == CENTER)[0]
        if len(free):
            l, h = lo[free], hi[free]
            meets = np.all((l[:, None, :] < fhi[None]) & (h[:, None, :] > flo[None]), axis=2)
            hit = np.nonzero(meets.any(axis=1))[0]
            for r in hit:
                cand = np.nonzero(meets[r])[0]
                row = free[r]
                plo = np.maximum(flo[cand], lo[row])
                phi = np.minimum(fhi[cand], hi[row])
                proj = np.minimum(np.maximum(centers[row], plo), phi)
                d = np.abs(proj - centers[row]).max(axis=1)
                order = np.lexsort(tuple(proj[:, j] for j in reversed(range(m))) + (d,))
                best = order[0]
                source[row] = -2 - int(cand[best])
                tags[row] = proj[best]
    return tags, source


def _subtags_fine(gauge, lo, w, p):
    """Are all Gauss sub-tags of each cell fine for their sub-cells?"""
    nodes, _, sub_lo, sub_hi = gauss_tensor(p, lo.shape[1])
    n, m = lo.shape
    ok = np.ones(n, bool)
    per = max(1, BLOCK // len(nodes))
    for s in range(0, n, per):
        l = lo[s:s + per][:, None, :]
        t = l + nodes[None] * w
        reach = np.maximum(t - (l + sub_lo[None] * w), (l + sub_hi[None] * w) - t).max(axis=2)
        rad = gauge.radii(t.reshape(-1, m)).reshape(reach.shape)
        ok[s:s + per] = np.all(rad > reach * (1 + MARGIN), axis=1)
    return ok


def dyadic_cover(
    box: Interval,
    gauge: Gauge,
    depth_cap: int = 52,
    max_cells: int | None = 15_000_000,
    pin_tags: bool = True,
    subtags: int = 0,
) -> DyadicCover:
    """Fine dyadic cover of ``box`` by bisection (the Cousin construction).

    A cell is accepted when the gauge's lower bound on it exceeds its
    diameter, or when the ball around its tag swallows it.  The tag is the
    centre unless ``pin_tags`` moves it onto the gauge's singular set.  With
    ``subtags = p`` an unpinned cell is only accepted when its ``p``-point
    Gauss sub-tags are fine as well, so quadrature on the sub-cells is a
    genuine fine Riemann sum.
    """
    m = box.dim
    a = np.array([float(v) for v in box.lower])
    E = np.array([float(v) for v in box.edges])
    sing = gauge.points_array if pin_tags else np.zeros((0, m))
    flo, fhi = gauge.faces_arrays if pin_tags else (np.zeros((0, m)), np.zeros((0, m)))
    sing = sing.reshape(-1, m)
    flo, fhi = flo.reshape(-1, m), fhi.reshape(-1, m)
    offsets = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int64)
    cover = DyadicCover(box, gauge, subtags)
    exact_points = gauge.singular_points if pin_tags else ()
    # no cell wider than twice the largest radius can be accepted: skip ahead
    depth = 0
    rmax = gauge.max_radius()
    while math.isfinite(rmax) and float(E.max()) * 2.0 ** -depth >= 2 * rmax and depth < depth_cap:
        depth += 1
    if max_cells is not None and 2 ** (m * depth) > max_cells:
        raise WorkLimitExceeded(f"cover of {box} exceeds {max_cells} cells at depth {depth}")
    grids = np.meshgrid(*[np.arange(2 ** depth, dtype=np.int64)] * m, indexing="ij")
    active = np.stack([g.ravel() for g in grids], axis=1)
    total = 0
    while len(active):
        if depth > depth_cap:
            raise DepthExceeded(f"cover of {box} needs depth beyond {depth_cap}")
        w = E * 2.0 ** -depth
        diam = float(w.max())
        acc_parts = []
        split_parts = []
        for s in range(0, len(active), BLOCK):
            idx = active[s:s + BLOCK]
            lo = a + idx * w
            # the same expression as the neighbour's lower corner
            hi = a + (idx + 1) * w
            centers = lo + w / 2
            exact = None
            if exact_points:
                exact = (exact_points, lambda r, idx=idx, d=depth: cover.exact_box(d, idx[r]))
            tags, source = _forced_tags(lo, hi, centers, sing, flo, fhi, exact)
            circ = np.maximum(tags - lo, hi - tags).max(axis=1)
            lb = gauge.lower_bounds(lo, hi)
            lb_ok = lb > diam * (1 + MARGIN)
            rad = gauge.radii(tags)
            # the exact tag of an unpinned cell may round to a neighbouring
            # float: use the radius bound over a few ulps around it
            free = source < 0
            if free.any():
                ulp = 8 * np.finfo(float).eps * np.maximum(np.abs(lo[free]), np.abs(hi[free]))
                near = gauge.lower_bounds(tags[free] - ulp, tags[free] + ulp)
                rad[free] = np.where(np.isnan(near), rad[free], np.minimum(rad[free], near))
            tag_ok = rad > circ * (1 + MARGIN)
            sub_ok = lb_ok.copy()
            if subtags:
                check = np.nonzero(tag_ok & ~lb_ok)[0]
                if len(check):
                    sub_ok[check] = _subtags_fine(gauge, lo[check], w, subtags)
                ok = lb_ok | (tag_ok & (sub_ok | (source != CENTER)))
            else:
                ok = lb_ok | tag_ok
            acc = np.nonzero(ok)[0]
            if len(acc):
                acc_parts.append(CoverChunk(depth, idx[acc], tags[acc], source[acc], sub_ok[acc]))
            rest = idx[~ok]
            if len(rest):
                split_parts.append((rest[:, None, :] * 2 + offsets[None]).reshape(-1, m))
        if acc_parts:
            cover.chunks.append(
                CoverChunk(
                    depth,
                    np.concatenate([c.index for c in acc_parts]),
                    np.concatenate([c.tags for c in acc_parts]),
                    np.concatenate([c.source for c in acc_parts]),
                    np.concatenate([c.sub_ok for c in acc_parts]),
                )
            )
            total += len(cover.chunks[-1])
        active = np.concatenate(split_parts) if split_parts else np.zeros((0, m), dtype=np.int64)
        if max_cells is not None and total + len(active) > max_cells:
            raise WorkLimitExceeded(
                f"cover of {box} exceeds {max_cells} cells at depth {depth + 1}"
            )
        depth += 1
    return cover
