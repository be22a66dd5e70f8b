from fractions import Fraction

import numpy as np
import pytest
import sympy

from qszego.series import (
    CompiledSeries,
    TermSeries,
    differentiate,
    seed_series,
    series_from_json,
    series_to_json,
)


def test_seed_series_values_and_degree():
    comps = seed_series()
    assert comps[0].evaluate_exact((1, 0, 0, 0)) == 1
    assert comps[1].evaluate_exact((0, 1, 0, 0)) == -1
    for s in comps:
        assert s.homogeneity_degree() == -3


def test_differentiate_hand_oracle():
    # d/dx1 [x1 r^-4] = r^-4 - 4 x1^2 r^-6
    s = TermSeries.from_dict({(1, 0, 0, 0, 2): Fraction(1)})
    got = differentiate(s, 1).as_dict()
    assert got == {(0, 0, 0, 0, 2): Fraction(1), (2, 0, 0, 0, 3): Fraction(-4)}
    # d/dx2 [r^-4] = -4 x2 r^-6
    s2 = TermSeries.from_dict({(0, 0, 0, 0, 2): Fraction(1)})
    assert differentiate(s2, 2).as_dict() == {(0, 1, 0, 0, 3): Fraction(-4)}
    with pytest.raises(ValueError):
        differentiate(s, 0)


def test_differentiate_lowers_degree():
    s = seed_series()[0]
    for k in range(1, 5):
        s = differentiate(s, 1)
        assert s.homogeneity_degree() == -3 - k


def test_second_derivative_vs_finite_differences():
    seed = seed_series()[0]
    dd = differentiate(differentiate(seed, 1), 1)
    x0 = np.array([1.0, 0.2, -0.3, 0.4])
    h = 1e-4
    f = CompiledSeries(seed)
    xp = x0.copy(); xp[0] += h
    xm = x0.copy(); xm[0] -= h
    fd = (f(xp) - 2 * f(x0) + f(xm)) / h**2
    got = CompiledSeries(dd)(x0)
    assert abs(fd - got) / abs(got) <= 1e-6


def test_canonical_merge_and_zero_drop():
    a = TermSeries.from_dict({(1, 0, 0, 0, 2): Fraction(2)})
    b = TermSeries.from_dict({(1, 0, 0, 0, 2): Fraction(-2), (0, 0, 0, 0, 1): Fraction(1, 3)})
    total = a + b
    assert total.as_dict() == {(0, 0, 0, 0, 1): Fraction(1, 3)}


def test_inhomogeneous_degree_raises():
    s = TermSeries.from_dict({(1, 0, 0, 0, 2): Fraction(1), (0, 0, 0, 0, 2): Fraction(1)})
    with pytest.raises(ValueError):
        s.homogeneity_degree()


def test_json_roundtrip_and_canonical():
    s = differentiate(seed_series()[2], 1)
    text = series_to_json(s)
    assert series_from_json(text) == s
    assert series_to_json(series_from_json(text)) == text
    assert '"num"' in text and '"den"' in text


def test_compiled_matches_exact_rational():
    s = differentiate(differentiate(seed_series()[0], 1), 2)
    x = (Fraction(3, 2), Fraction(-1, 3), Fraction(2, 5), Fraction(1))
    exact = s.evaluate_exact(x)
    compiled = CompiledSeries(s)(np.array([float(v) for v in x]))
    assert abs(compiled - float(exact)) <= 1e-14 * max(1.0, abs(float(exact)))


@pytest.mark.parametrize("n", [2, 3])
def test_sympy_cross_check(n):
    # independent symbolic oracle for the 2(n-1)-fold derivative
    x1, x2, x3, x4 = sympy.symbols("x1 x2 x3 x4")
    r2 = x1**2 + x2**2 + x3**2 + x4**2
    comps_sym = [x1 / r2**2, -x2 / r2**2, -x3 / r2**2, -x4 / r2**2]
    comps_sym = [sympy.diff(c, x1, 2 * (n - 1)) for c in comps_sym]
    comps = list(seed_series())
    for _ in range(2 * (n - 1)):
        comps = [differentiate(s, 1) for s in comps]
    pt = {x1: Fraction(1), x2: Fraction(1, 5), x3: Fraction(-2, 7), x4: Fraction(1, 2)}
    for sym_expr, ours in zip(comps_sym, comps):
        want = sympy.nsimplify(sym_expr.subs(pt))
        got = ours.evaluate_exact((pt[x1], pt[x2], pt[x3], pt[x4]))
        assert sympy.Rational(got.numerator, got.denominator) == sympy.nsimplify(want)
