import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugeint import catalog as cat
from gaugeint import dunford as du
from gaugeint.geometry import Interval
from gaugeint.integrators import (
    NoConvergence,
    dunford_componentwise_check,
    hk_integral,
    integral,
    level_gauge,
    mcshane_integral,
    primitive_of,
)
from gaugeint.interval_functions import check_additivity, random_subinterval

F = Fraction
U = Interval.cube(1)
SIN1 = math.sin(1.0)

# McShane-integrable catalog entries with closed-form values on [0,1]^m
BOUNDED = [
    ("const", lambda: cat.const(2), 2.0),
    ("coord", lambda: cat.coord(0), 0.5),
    ("affine", lambda: cat.affine(1, -3), -0.5),
    ("prodpoly", lambda: cat.prodpoly(3), 0.25),
    ("prodpoly_2d", lambda: cat.prodpoly(1, 2), 1 / 6),
    ("indicator", lambda: cat.point_indicator([(F(1, 2),)]), 0.0),
    ("inv_sqrt", cat.inv_sqrt, 2.0),
]


def _box(f):
    return Interval.cube(f.dim)


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------

def test_constant_on_square():
    res = mcshane_integral(cat.const(5, dim=2), Interval.cube(2), 1e-6)
    assert res.value.components == (5.0,) and res.converged
    # the estimate is the floating-point rounding bound of the sum, not 0
    assert res.error_estimate <= 1e-13
    assert res.refinement_levels == 3


def test_product_on_square():
    res = mcshane_integral(cat.prodpoly(1, 1), Interval.cube(2), 1e-8)
    assert abs(res.value[0] - 0.25) <= 1e-8
    assert res.error_estimate <= 1e-8


def test_inv_sqrt_mcshane():
    res = mcshane_integral(cat.inv_sqrt(), U, 1e-6)
    assert abs(res.value[0] - 2.0) <= 1e-6


def test_hk_derivative_value():
    res = hk_integral(cat.hk_deriv(), U, 1e-6)
    assert abs(res.value[0] - SIN1) <= 1e-6 and res.mode == "HK"


def test_hk_derivative_not_mcshane():
    with pytest.raises(NoConvergence) as exc:
        mcshane_integral(cat.hk_deriv(), U, 1e-6)
    res = exc.value.result
    assert res is not None and not res.converged and res.reason


def test_point_indicator_integrates_to_zero():
    f = cat.point_indicator([(F(1, 3), F(1, 2)), (F(1, 2), F(1, 2))])
    for mode in ("M", "HK"):
        assert abs(integral(f, Interval.cube(2), mode, 1e-7).value[0]) <= 1e-7


def test_integral_argument_errors():
    with pytest.raises(ValueError):
        integral(cat.const(1), U, "R")
    with pytest.raises(ValueError):
        mcshane_integral(cat.const(1), Interval.cube(2))
    with pytest.raises(ValueError):
        mcshane_integral(cat.const(1), U, 0.0)


def test_level_gauge_modes():
    f = cat.inv_sqrt()
    gm, gh = level_gauge(f, U, 5, "M"), level_gauge(f, U, 5, "HK")
    r = 2.0 ** -(f.floor_rate * 5)
    assert gm.r_min == r and gh.r_min == 0.0
    assert gh.radius((0,)) == r and gm.r_max == gh.r_max == 2.0 ** -5


# ---------------------------------------------------------------------------
# componentwise absolute integrability
# ---------------------------------------------------------------------------

def test_dunford_componentwise_bounded():
    f = cat.bundle(cat.const(1), cat.coord(0))
    rec = dunford_componentwise_check(f, U)
    assert rec.dunford_ok
    assert rec.pettis_vector == mcshane_integral(f, U, 1e-6).value
    assert np.allclose(rec.abs_integral_estimates, (1.0, 0.5), atol=1e-6)


def test_dunford_componentwise_inv_sqrt():
    rec = dunford_componentwise_check(cat.inv_sqrt(), U)
    assert rec.dunford_ok and abs(rec.abs_integral_estimates[0] - 2.0) < 1e-6


def test_dunford_componentwise_hk_derivative():
    rec = dunford_componentwise_check(cat.hk_deriv(), U)
    assert not rec.dunford_ok and rec.pettis_vector is None
    est = [e[0] for e in rec.history]
    # level n leaves out [0, 2^-n]: int_eps^1 |f| <= 1 + 2 ln(1/eps)
    for n, e in enumerate(est, 1):
        assert e <= 1 + 2 * n * math.log(2)
    # |cos| averages 2/pi, so the estimates grow like (4/pi) ln(1/eps)
    assert est[19] >= 4 / math.pi * 20 * math.log(2) - 3
    assert all(b > a for a, b in zip(est[::5], est[5::5]))


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def test_primitive_examples():
    Fc = primitive_of(cat.const(3), "M", 1e-8)
    rng = random.Random(0)
    for _ in range(10):
        I = random_subinterval(rng, U)
        assert abs(Fc(I)[0] - 3 * float(I.edges[0])) <= 1e-14
    Fl = primitive_of(cat.affine(1, 2), "M", 1e-8)
    assert check_additivity(Fl, U, samples=30, seed=1, tol=2e-8).passed
    Fh = primitive_of(cat.hk_deriv(), "HK", 1e-6)
    prim = lambda x: x * x * math.sin(1 / (x * x))  # noqa: E731
    for a, b in ((F(1, 10), F(1, 2)), (F(1, 4), F(1, 1)), (F(1, 3), F(2, 3))):
        assert abs(Fh(Interval((a,), (b,)))[0] - (prim(float(b)) - prim(float(a)))) <= 1e-6


def test_primitive_density_bound_needs_box():
    assert primitive_of(cat.const(3)).density_bound is None
    assert primitive_of(cat.const(3), box=U).density_bound == 3


def test_face_splitting_matches_exact_measure():
    spec = du.middle_third(2)
    f0 = du.zero_extend(cat.const(1, dim=2), spec)
    res = mcshane_integral(f0, spec.I0, 1e-6)
    assert abs(res.value[0] - 8 / 9) <= res.error_estimate + 1e-15
    cells = [h.cells for h in res.history]
    assert cells == sorted(cells)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,make,exact", BOUNDED, ids=[b[0] for b in BOUNDED])
def test_hk_mcshane_consistency(name, make, exact):
    f = make()
    tol = 1e-6
    m = mcshane_integral(f, _box(f), tol)
    h = hk_integral(f, _box(f), tol)
    assert m.value.dist(h.value) <= 2 * tol
    assert abs(m.value[0] - exact) <= tol + 1e-15


@pytest.mark.parametrize("name,make,exact", BOUNDED, ids=[b[0] for b in BOUNDED])
def test_oracle_agreement(name, make, exact):
    f = make()
    if f.primitive is None:
        pytest.skip("no closed form")
    rng = random.Random(name)
    tol = 1e-7
    for _ in range(5):
        I = random_subinterval(rng, _box(f))
        res = mcshane_integral(f, I, tol)
        oracle = [float(x) for x in f.primitive(I)]
        assert abs(res.value[0] - oracle[0]) <= tol + 1e-14


@pytest.mark.parametrize("pair", [("const", "coord"), ("coord", "prodpoly"), ("affine", "inv_sqrt")])
def test_linearity(pair):
    makers = {b[0]: b[1] for b in BOUNDED}
    f, h = makers[pair[0]](), makers[pair[1]]()
    tol = 1e-6
    for alpha, beta in ((1, 0), (2, -3), (F(1, 2), F(5, 2))):
        lhs = mcshane_integral(cat.lincomb(alpha, f, beta, h), U, tol).value
        rhs = mcshane_integral(f, U, tol).value * float(alpha) + mcshane_integral(h, U, tol).value * float(beta)
        assert lhs.dist(rhs) <= 3 * tol


@pytest.mark.parametrize("make,mode", [(cat.inv_sqrt, "M"), (cat.inv_sqrt, "HK"), (cat.hk_deriv, "HK"),
                                       (lambda: cat.point_indicator([(F(1, 2),)]), "M")])
def test_monotone_refinement(make, mode):
    res = integral(make(), U, mode, 1e-6)
    errs = [h.error for h in res.history if h.error is not None][-3:]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_null_set_insensitivity():
    f = cat.prodpoly(1, 2)
    N = [(F(1, 3), F(1, 2)), (F(1, 2), F(1, 2))]
    # same metadata, values differing only on N
    a = cat.lincomb(1, f, 1, cat.point_indicator(N))
    b = cat.lincomb(1, f, 0, cat.point_indicator(N))
    I = Interval.cube(2)
    assert mcshane_integral(a, I, 1e-7).value == mcshane_integral(b, I, 1e-7).value
    assert hk_integral(a, I, 1e-7).value.dist(hk_integral(b, I, 1e-7).value) <= 2e-7


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_primitive_additive_on_splits(seed):
    Fp = primitive_of(cat.prodpoly(2, 1), "M", 1e-8)
    rep = check_additivity(Fp, Interval.cube(2), samples=3, seed=seed, tol=2e-8)
    assert rep.passed


def test_determinism():
    a = hk_integral(cat.hk_deriv(), U, 1e-4)
    b = hk_integral(cat.hk_deriv(), U, 1e-4)
    assert a.value == b.value and a.history == b.history
