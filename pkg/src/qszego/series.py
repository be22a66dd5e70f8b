"""Exact rational term series in four variables with |x|^(-2 beta) factors.

A series is a finite sum of terms

    coeff * x1^a1 x2^a2 x3^a3 x4^a4 * (x1^2 + x2^2 + x3^2 + x4^2)^(-beta)

with Fraction coefficients, nonnegative integer exponents and positive
integer beta.  This is closed under partial differentiation, which is all
the kernel construction needs; coefficients stay exact through the full
2(n-1)-fold derivative.
"""

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class TermSeries:
    """Canonical (sorted, merged, zero-free) term dictionary."""

    terms: tuple  # of ((a1, a2, a3, a4, beta), Fraction), sorted by key

    @staticmethod
    def from_dict(d):
        items = tuple(sorted((k, v) for k, v in d.items() if v != 0))
        return TermSeries(items)

    def as_dict(self):
        return dict(self.terms)

    def homogeneity_degree(self):
        """Common degree sum(a) - 2*beta; raises if terms disagree."""
        degs = {sum(k[:4]) - 2 * k[4] for k, _ in self.terms}
        if len(degs) > 1:
            raise ValueError(f"inhomogeneous series: degrees {sorted(degs)}")
        return degs.pop() if degs else 0

    def scaled(self, c):
        c = Fraction(c)
        return TermSeries.from_dict({k: c * v for k, v in self.terms})

    def __add__(self, other):
        d = self.as_dict()
        for k, v in other.terms:
            d[k] = d.get(k, Fraction(0)) + v
        return TermSeries.from_dict(d)

    def evaluate_exact(self, x):
        """Exact evaluation at a 4-tuple of Fractions (r^2 must divide cleanly)."""
        x = [Fraction(v) for v in x]
        r2 = sum(v * v for v in x)
        total = Fraction(0)
        for (a1, a2, a3, a4, beta), c in self.terms:
            mono = x[0] ** a1 * x[1] ** a2 * x[2] ** a3 * x[3] ** a4
            total += c * mono / r2 ** beta
        return total


def seed_series():
    """The four components of conj(sigma) / |sigma|^4.

    Component 1 is x1 * r^-4; components 2..4 are -x_m * r^-4.
    """
    comps = []
    for m in range(4):
        expo = [0, 0, 0, 0]
        expo[m] = 1
        coeff = Fraction(1) if m == 0 else Fraction(-1)
        comps.append(TermSeries.from_dict({(*expo, 2): coeff}))
    return tuple(comps)


def differentiate(series, axis):
    """Exact partial derivative along axis in 1..4.

    d/dx_i [x^A r^(-2b)] = a_i x^(A - e_i) r^(-2b) - 2b x^(A + e_i) r^(-2(b+1));
    lowers the homogeneity degree by exactly one.
    """
    if axis not in (1, 2, 3, 4):
        raise ValueError(f"axis must be 1..4, got {axis}")
    i = axis - 1
    out = {}
    for key, c in series.terms:
        a = list(key[:4])
        beta = key[4]
        if a[i] > 0:
            lo = a.copy()
            lo[i] -= 1
            k = (*lo, beta)
            out[k] = out.get(k, Fraction(0)) + c * a[i]
        hi = a.copy()
        hi[i] += 1
        k = (*hi, beta + 1)
        out[k] = out.get(k, Fraction(0)) - 2 * beta * c
    return TermSeries.from_dict(out)


def series_to_json(series):
    """Canonical JSON text: sorted terms, coefficients as num/den strings."""
    payload = {
        "terms": [
            {
                "num": str(c.numerator),
                "den": str(c.denominator),
                "exponents": list(k[:4]),
                "beta": k[4],
            }
            for k, c in series.terms
        ]
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def series_from_json(text):
    data = json.loads(text)
    d = {}
    for t in data["terms"]:
        key = (*[int(a) for a in t["exponents"]], int(t["beta"]))
        d[key] = Fraction(int(t["num"]), int(t["den"]))
    return TermSeries.from_dict(d)


class CompiledSeries:
    """Float-compiled series for fast vectorized evaluation."""

    def __init__(self, series):
        keys = [k for k, _ in series.terms]
        self.coeffs = np.array([float(c) for _, c in series.terms], dtype=np.float64)
        self.expo = np.array([k[:4] for k in keys], dtype=np.int64).reshape(-1, 4)
        self.betas = np.array([k[4] for k in keys], dtype=np.int64)

    def __call__(self, x):
        """Evaluate at x of shape (..., 4); returns shape (...)."""
        x = np.asarray(x, dtype=np.float64)
        r2 = np.sum(x * x, axis=-1)
        acc = np.zeros(r2.shape, dtype=np.float64)
        for c, ex, beta in zip(self.coeffs, self.expo, self.betas):
            mono = np.ones_like(acc)
            for i in range(4):
                if ex[i]:
                    mono = mono * x[..., i] ** int(ex[i])
            acc += c * mono * r2 ** float(-beta)
        return acc
