"""
Integrands and the built-in function catalog.

An :class:`Integrand` carries a vectorised evaluator together with the
metadata the integrators rely on: singular points, jump faces, a bound on
boxes and the gauge profile used near the singular points.  The catalog
entries build integrands with trustworthy metadata; the optional
``primitive`` is a closed form kept for tests and is never used to compute
integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .geometry import Interval, VectorValue, point, scalar, volume


@dataclass(frozen=True, eq=False)
class Integrand:
    """Vector-valued function on R^m with integration metadata.

    Parameters
    ----------
    vec : callable
        ``(N, m)`` float array to ``(N, value_dim)`` float array.  Values at
        singular points may be non-finite.
    exact : callable, optional
        Point of Fractions to a tuple of Fractions, used for exact sums.
    bound_on : callable, optional
        Box to an upper bound on ``sup ||f||`` (max norm of the values) off
        the singular set, or None when unbounded.
    gauge_scale, gauge_power : float
        Near the singular points the integrators use radii
        ``gauge_scale * dist**gauge_power``.
    floor_rate : float
        At refinement level ``n`` the singular cells have size about
        ``2**(-floor_rate * n)`` relative to the box.
    """

    name: str
    dim: int
    value_dim: int
    vec: Callable
    exact: Callable | None = None
    singular_points: tuple = ()
    jump_faces: tuple = ()
    bound_on: Callable | None = None
    gauge_scale: float = 0.5
    gauge_power: float = 1.0
    floor_rate: float = 1.0
    primitive: Callable | None = None
    norm_tag: str = "max"
    # extra straddle volume bound for curved jump sets: r -> |N_r(jump set)|
    jump_neighborhood: Callable | None = None

    def __call__(self, t) -> VectorValue:
        t = point(t)
        if self.exact is not None:
            return VectorValue(tuple(self.exact(t)), self.norm_tag)
        row = np.array([[float(x) for x in t]])
        return VectorValue(tuple(float(v) for v in self.eval_many(row)[0]), self.norm_tag)

    def eval_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        with np.errstate(all="ignore"):
            out = np.asarray(self.vec(pts), dtype=float)
        return out.reshape(len(pts), self.value_dim)

    def bound(self, box: Interval | None = None):
        """Bound on the max-norm of the values over ``box`` (None if unknown)."""
        if self.bound_on is None:
            return None
        return self.bound_on(box)

    def norm_bound(self, box: Interval | None = None):
        """Bound on ``||f||`` in the integrand's own value norm."""
        M = self.bound(box)
        if M is None:
            return None
        factor = {"max": 1.0, "euclidean": math.sqrt(self.value_dim), "one": float(self.value_dim)}
        return M * factor[self.norm_tag]

    def with_norm(self, norm_tag: str) -> "Integrand":
        return replace(self, norm_tag=norm_tag)

    @property
    def is_bounded(self) -> bool:
        return self.bound_on is not None

    def __repr__(self):
        return f"Integrand({self.name!r}, m={self.dim}, d={self.value_dim})"


def _box_max_abs(box: Interval, j: int) -> Fraction:
    return max(abs(box.lower[j]), abs(box.upper[j]))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def const(c=1, dim: int = 1) -> Integrand:
    """Constant function ``c`` (scalar or tuple for vector values)."""
    cs = tuple(scalar(v) for v in (c if isinstance(c, (tuple, list)) else (c,)))
    cf = np.array([float(v) for v in cs])
    M = float(max(abs(v) for v in cs))
    return Integrand(
        name=f"const({','.join(str(v) for v in cs)})",
        dim=dim,
        value_dim=len(cs),
        vec=lambda x: np.broadcast_to(cf, (len(x), len(cf))),
        exact=lambda t: cs,
        bound_on=lambda box: M,
        primitive=lambda I: VectorValue(tuple(v * volume(I) for v in cs)),
    )


def coord(j: int = 0, dim: int = 1) -> Integrand:
    """The coordinate function ``t -> t_j`` (0-based axis)."""
    if not 0 <= j < dim:
        raise ValueError(f"axis {j} out of range for dimension {dim}")
    return Integrand(
        name=f"coord({j + 1})",
        dim=dim,
        value_dim=1,
        vec=lambda x: x[:, j:j + 1],
        exact=lambda t: (t[j],),
        bound_on=lambda box: None if box is None else float(_box_max_abs(box, j)),
        primitive=lambda I: VectorValue((volume(I) * (I.lower[j] + I.upper[j]) / 2,)),
    )


def affine(c0=0, *coeffs, dim: int | None = None) -> Integrand:
    """``c0 + sum_j c_j t_j``."""
    c0 = scalar(c0)
    cs = tuple(scalar(c) for c in coeffs)
    dim = dim or max(1, len(cs))
    cs = cs + (Fraction(0),) * (dim - len(cs))
    cf = np.array([float(c) for c in cs])

    def ex(t):
        return (c0 + sum(c * x for c, x in zip(cs, t)),)

    def bnd(box):
        if box is None:
            return None
        return float(max(abs(ex(p)[0]) for p in box.corners()))

    return Integrand(
        name=f"affine({','.join(str(v) for v in (c0,) + cs)})",
        dim=dim,
        value_dim=1,
        vec=lambda x: (float(c0) + x @ cf)[:, None],
        exact=ex,
        bound_on=bnd,
        primitive=lambda I: VectorValue((volume(I) * ex(I.center)[0],)),
    )


def prodpoly(*exponents, coeff=1) -> Integrand:
    """``coeff * prod_j t_j**k_j`` with non-negative integer exponents."""
    ks = tuple(int(k) for k in exponents)
    if not ks or any(k < 0 for k in ks):
        raise ValueError("exponents must be non-negative integers")
    coeff = scalar(coeff)
    kf = np.array(ks, dtype=float)

    def ex(t):
        v = coeff
        for x, k in zip(t, ks):
            v *= x ** k
        return (v,)

    def prim(I):
        v = coeff
        for a, b, k in zip(I.lower, I.upper, ks):
            v *= (b ** (k + 1) - a ** (k + 1)) / (k + 1)
        return VectorValue((v,))

    def bnd(box):
        if box is None:
            return None
        v = abs(coeff)
        for j, k in enumerate(ks):
            v *= _box_max_abs(box, j) ** k
        return float(v)

    return Integrand(
        name=f"prodpoly({','.join(map(str, ks))})",
        dim=len(ks),
        value_dim=1,
        vec=lambda x: (float(coeff) * np.prod(x ** kf, axis=1))[:, None],
        exact=ex,
        bound_on=bnd,
        primitive=prim,
    )


def inv_sqrt() -> Integrand:
    """``1/sqrt(t)`` on ``t > 0``: singular at 0, absolutely integrable."""

    def vec(x):
        t = x[:, 0]
        out = np.full(len(t), np.nan)
        pos = t > 0
        out[pos] = 1.0 / np.sqrt(t[pos])
        return out[:, None]

    def prim(I):
        a, b = float(I.lower[0]), float(I.upper[0])
        return VectorValue((2.0 * (math.sqrt(b) - math.sqrt(max(a, 0.0))),))

    return Integrand(
        name="inv_sqrt",
        dim=1,
        value_dim=1,
        vec=vec,
        singular_points=((Fraction(0),),),
        gauge_scale=0.5,
        gauge_power=1.0,
        floor_rate=3.0,
        primitive=prim,
    )


def hk_deriv() -> Integrand:
    """Derivative of ``x**2 sin(1/x**2)``, with value 0 at the origin.

    Henstock-Kurzweil integrable on bounded intervals but not absolutely.
    """

    def vec(x):
        t = x[:, 0]
        out = np.zeros(len(t))
        nz = t != 0
        u = t[nz]
        s = u ** -2
        out[nz] = 2 * u * np.sin(s) - (2 / u) * np.cos(s)
        return out[:, None]

    def F(x: float) -> float:
        return 0.0 if x == 0 else x * x * math.sin(1.0 / (x * x))

    return Integrand(
        name="hk_deriv",
        dim=1,
        value_dim=1,
        vec=vec,
        singular_points=((Fraction(0),),),
        gauge_scale=1.5,
        gauge_power=3.0,
        floor_rate=1.0,
        primitive=lambda I: VectorValue((F(float(I.upper[0])) - F(float(I.lower[0])),)),
    )


def point_indicator(points, dim: int | None = None) -> Integrand:
    """1 on a finite point set, 0 elsewhere."""
    pts = tuple(point(p) for p in points)
    dim = dim or len(pts[0])
    arr = np.array([[float(x) for x in p] for p in pts])
    pset = set(pts)
    return Integrand(
        name=f"indicator({len(pts)} points)",
        dim=dim,
        value_dim=1,
        vec=lambda x: np.any(np.all(x[:, None, :] == arr[None], axis=2), axis=1).astype(float)[:, None],
        exact=lambda t: (Fraction(1) if t in pset else Fraction(0),),
        singular_points=pts,
        bound_on=lambda box: 1.0,
        floor_rate=2.0,
        primitive=lambda I: VectorValue((Fraction(0),)),
    )


def _merge_meta(fs, name, value_dim, vec, exact, primitive, bound_combine):
    dims = {f.dim for f in fs}
    if len(dims) != 1:
        raise ValueError("dimension mismatch between integrands")
    pts = []
    for f in fs:
        for p in f.singular_points:
            if p not in pts:
                pts.append(p)
    faces = []
    for f in fs:
        for fc in f.jump_faces:
            if fc not in faces:
                faces.append(fc)
    bounded = all(f.bound_on is not None for f in fs)
    hoods = [f.jump_neighborhood for f in fs if f.jump_neighborhood is not None]
    return Integrand(
        name=name,
        dim=dims.pop(),
        value_dim=value_dim,
        vec=vec,
        exact=exact,
        singular_points=tuple(pts),
        jump_faces=tuple(faces),
        bound_on=(lambda box: bound_combine([f.bound(box) for f in fs])) if bounded else None,
        gauge_scale=min(f.gauge_scale for f in fs),
        gauge_power=max(f.gauge_power for f in fs),
        floor_rate=max(f.floor_rate for f in fs),
        primitive=primitive,
        norm_tag=fs[0].norm_tag,
        jump_neighborhood=(lambda r: max(h(r) for h in hoods)) if hoods else None,
    )


def _all_or_none(xs):
    return None if any(x is None for x in xs) else xs


def bundle(*fs: Integrand) -> Integrand:
    """Stack several integrands into one vector-valued integrand."""
    if not fs:
        raise ValueError("empty bundle")
    d = sum(f.value_dim for f in fs)
    exact = None
    if all(f.exact is not None for f in fs):
        def exact(t):
            return tuple(v for f in fs for v in f.exact(t))
    primitive = None
    if all(f.primitive is not None for f in fs):
        def primitive(I):
            return VectorValue(tuple(v for f in fs for v in f.primitive(I)))

    def comb(bs):
        bs = _all_or_none(bs)
        return None if bs is None else max(bs)

    return _merge_meta(
        fs,
        "bundle(" + ", ".join(f.name for f in fs) + ")",
        d,
        lambda x: np.concatenate([f.eval_many(x) for f in fs], axis=1),
        exact,
        primitive,
        comb,
    )


def lincomb(alpha, f: Integrand, beta, h: Integrand) -> Integrand:
    """``alpha * f + beta * h`` for integrands with the same shape."""
    if f.value_dim != h.value_dim:
        raise ValueError("value dimension mismatch")
    a, b = scalar(alpha), scalar(beta)
    af, bf = float(a), float(b)
    exact = None
    if f.exact is not None and h.exact is not None:
        def exact(t):
            return tuple(a * u + b * v for u, v in zip(f.exact(t), h.exact(t)))
    primitive = None
    if f.primitive is not None and h.primitive is not None:
        def primitive(I):
            return f.primitive(I) * a + h.primitive(I) * b

    def comb(bs):
        bs = _all_or_none(bs)
        return None if bs is None else abs(af) * bs[0] + abs(bf) * bs[1]

    def vec(x):
        u = f.eval_many(x)
        v = h.eval_many(x)
        # 0 * inf must stay 0 so that dropped terms do not poison the sum
        out = np.zeros_like(u)
        if af:
            out = out + af * u
        if bf:
            out = out + bf * v
        return out

    return _merge_meta((f, h), f"{a}*{f.name} + {b}*{h.name}", f.value_dim, vec, exact, primitive, comb)


CATALOG = {
    "const": const,
    "coord": coord,
    "affine": affine,
    "prodpoly": prodpoly,
    "inv_sqrt": inv_sqrt,
    "hk_deriv": hk_deriv,
    "indicator": point_indicator,
}


def build(name: str, args=(), dim: int = 1) -> Integrand:
    """Instantiate catalog entry ``name`` for ambient dimension ``dim``.

    Arguments are the textual parameters of the scenario format: ``const``
    takes one value per component, ``coord`` a 1-based axis, ``affine`` the
    constant then one coefficient per axis, ``prodpoly`` one exponent per
    axis; ``inv_sqrt`` and ``hk_deriv`` take none and need ``dim == 1``.
    """
    if name not in CATALOG:
        raise KeyError(f"unknown function {name!r}; catalog: {', '.join(sorted(CATALOG))}")
    args = list(args)
    if name == "const":
        return const(tuple(args) if len(args) > 1 else (args[0] if args else 1), dim=dim)
    if name == "coord":
        return coord(int(args[0]) - 1 if args else 0, dim=dim)
    if name == "affine":
        return affine(*(args or [0]), dim=dim)
    if name == "prodpoly":
        f = prodpoly(*[int(a) for a in args] or [0] * dim)
        if f.dim != dim:
            raise ValueError(f"prodpoly needs {dim} exponents, got {f.dim}")
        return f
    if name == "indicator":
        pts = [tuple(scalar(v) for v in str(a).split(";")) for a in args]
        return point_indicator(pts, dim)
    if dim != 1 or args:
        raise ValueError(f"{name} takes no parameters and lives on the line")
    return CATALOG[name]()
