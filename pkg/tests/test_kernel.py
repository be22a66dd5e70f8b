import math
from fractions import Fraction

import numpy as np
import pytest

from qszego.heisenberg import Ball, GroupDims, dilate, gmul, hnorm, identity, point, sample_ball, sample_unit_sphere
from qszego.kernel import (
    DEFAULT_CUTOFF,
    build_kernel,
    cutoff_phi,
    eval_K,
    eval_K_eps,
    eval_K_eta,
    eval_K_two_point,
    gradient_bound_scan,
    holder_quotient_scan,
    horizontal_gradient_K,
    kernel_to_json,
    lower_bound_scan,
    quat_modulus,
    sign_constancy_scan,
    size_bound_scan,
)


def test_build_kernel_n2_series(ker):
    got = {k: v for k, v in ker.components[0].terms}
    assert got == {(1, 0, 0, 0, 3): Fraction(-12), (3, 0, 0, 0, 4): Fraction(24)}
    for comp in ker.components:
        assert comp.homogeneity_degree() == -5
    ke3 = build_kernel(GroupDims(3), 1.0)
    for comp in ke3.components:
        assert comp.homogeneity_degree() == -7


def test_kernel_point_values(ker):
    s1 = ker.eval_s(np.array([1.0, 0, 0, 0]))
    assert np.allclose(s1, [12.0, 0, 0, 0], atol=1e-12)
    s2 = ker.eval_s(np.array([2.0, 0, 0, 0]))
    assert abs(s2[0] - 0.375) <= 1e-12


def test_eval_K_examples(ker, dims):
    g = point([0, 0, 0], [1, 0, 0, 0])  # |y| = 1 => sigma = 1
    v = eval_K(ker, g)
    assert abs(v.x1 - 12.0) <= 1e-12 and v.x2 == v.x3 == v.x4 == 0.0
    tpoint = point([1, 0, 0], [0, 0, 0, 0])
    mod = math.sqrt(eval_K(ker, tpoint).norm_sq())
    assert np.isfinite(mod) and mod > 0
    with pytest.raises(ValueError):
        eval_K(ker, identity(dims))


def test_eval_K_homogeneity(ker, dims):
    rng = np.random.default_rng(1)
    g = sample_ball(Ball(identity(dims), 2.0), 10_000, 2)
    g = g[hnorm(g) > 0.05]
    r = np.exp(rng.uniform(math.log(0.2), math.log(5.0), len(g)))
    lhs = np.asarray(eval_K(ker, dilate(r, g)))
    rhs = np.asarray(eval_K(ker, g)) * (r**-10.0)[:, None]
    rel = np.abs(lhs - rhs).max(axis=1) / np.abs(rhs).max(axis=1)
    assert rel.max() <= 1e-10


def test_eval_K_eps(ker, dims):
    v = eval_K_eps(ker, identity(dims), 1.0)
    assert abs(v.x1 - 12.0) <= 1e-12
    g = point([0.2, -0.1, 0.3], [0.4, 0.1, 0.0, -0.2])
    kv = np.array(eval_K(ker, g).coords())
    ke_eps = np.array(eval_K_eps(ker, g, 1e-8 * float(hnorm(g)) ** 2).coords())
    assert np.max(np.abs(kv - ke_eps)) / np.max(np.abs(kv)) <= 1e-6
    for eps in (1.0, 0.1, 0.01):
        assert np.all(np.isfinite(np.array(eval_K_eps(ker, identity(dims), eps).coords())))
    with pytest.raises(ValueError):
        eval_K_eps(ker, g, 0.0)


def test_cutoff_phi():
    assert cutoff_phi(0.25) == 0.0
    assert cutoff_phi(2.0) == 1.0
    assert abs(cutoff_phi(0.75) - 0.5) <= 1e-15
    grid = np.linspace(-1, 2, 400)
    vals = cutoff_phi(grid)
    assert np.all(np.diff(vals) >= -1e-15)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(vals[grid <= 0.5] == 0.0)
    assert np.all(vals[grid >= 1.0] == 1.0)


def test_eval_K_eta_plateaus(ker, dims):
    u = identity(dims)
    eta = 0.4
    near = point([0, 0, 0], [eta / 4, 0, 0, 0])  # rho = eta/4 < eta/2
    assert eval_K_eta(ker, DEFAULT_CUTOFF, near, u, eta).coords() == (0, 0, 0, 0)
    far = point([0, 0, 0], [2 * eta, 0, 0, 0])  # rho = 2 eta > eta
    lhs = np.array(eval_K_eta(ker, DEFAULT_CUTOFF, far, u, eta).coords())
    rhs = np.array(eval_K(ker, far).coords())
    assert np.array_equal(lhs, rhs)
    mid = point([0, 0, 0], [0.75 * eta, 0, 0, 0])
    vm = quat_modulus(np.array(eval_K_eta(ker, DEFAULT_CUTOFF, mid, u, eta).coords()))
    vk = quat_modulus(np.array(eval_K(ker, mid).coords()))
    assert 0.0 < vm < vk
    with pytest.raises(ValueError):
        eval_K_eta(ker, DEFAULT_CUTOFF, far, u, -0.1)


def test_horizontal_gradient_fd(ker, dims):
    g0 = point([0.3, -0.2, 0.5], [0.8, -0.1, 0.4, 0.2])
    grad = horizontal_gradient_K(ker, g0)
    h = 1e-5
    for j in range(dims.ydim):
        e = np.zeros(dims.ydim)
        e[j] = 1.0
        kp = np.array(eval_K(ker, gmul(g0, point([0, 0, 0], h * e))).coords())
        km = np.array(eval_K(ker, gmul(g0, point([0, 0, 0], -h * e))).coords())
        fd = (kp - km) / (2 * h)
        an = np.array(grad[j].coords())
        assert np.max(np.abs(fd - an)) / np.max(np.abs(an)) <= 1e-5


def test_horizontal_gradient_homogeneity(ker, dims):
    g = sample_ball(Ball(identity(dims), 2.0), 2_000, 3)
    g = g[hnorm(g) > 0.1]
    r = np.exp(np.random.default_rng(4).uniform(-1, 1, len(g)))
    lhs = horizontal_gradient_K(ker, dilate(r, g))
    rhs = horizontal_gradient_K(ker, g) * (r**-11.0)[:, None, None]
    assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)) <= 1e-10
    oney = point([0, 0, 0], [1, 0, 0, 0])
    vals = horizontal_gradient_K(ker, oney)
    assert all(np.isfinite(v.coords()).all() for v in vals)
    with pytest.raises(ValueError):
        horizontal_gradient_K(ker, identity(dims))


def test_two_point_kernel_left_invariance(ker, dims):
    g = point([0.1, 0.2, -0.3], [0.5, -0.2, 0.1, 0.4])
    h = point([-0.4, 0.1, 0.2], [0.1, 0.3, -0.2, 0.0])
    w = point([1.0, -0.5, 0.3], [0.6, 0.1, 0.1, -0.3])
    lhs = np.array(eval_K_two_point(ker, g, h).coords())
    rhs = np.array(eval_K_two_point(ker, gmul(w, g), gmul(w, h)).coords())
    assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)) <= 1e-12


def test_scans_smoke(ker):
    size = size_bound_scan(ker, [20_000, 40_000], 5)
    assert abs(size[1][1] - 12.0) <= 0.2  # sup attained at sigma = (1,0,0,0)
    _, grad = gradient_bound_scan(ker, [10_000, 20_000], 5)
    assert grad[1][1] > 0 and np.isfinite(grad[1][1])
    hold = holder_quotient_scan(ker, [20_000, 40_000], 5)
    assert hold[1][1] > 0
    low = lower_bound_scan(ker, 5, 8, 5)
    assert low["c_global"] > 0


def test_sign_constancy_scan(ker, dims):
    from qszego.heisenberg import rho

    base = sample_unit_sphere(dims, 1, 6)[0]
    scan = sign_constancy_scan(ker, Ball(base, 0.25), 7)
    assert scan.found and scan.floor > 0 and scan.component in (0, 1, 2, 3)
    assert scan.sign in (-1, 1)
    dist = float(rho(scan.companion.center, base))
    assert 3.0 * 0.25 * 0.8 <= dist <= 10.0 * 0.25 * 1.2


def test_kernel_json_roundtrip(ker, dims):
    text1 = kernel_to_json(ker)
    text2 = kernel_to_json(build_kernel(dims, 1.0))
    assert text1 == text2
    assert '"components"' in text1 and '"partials"' in text1
