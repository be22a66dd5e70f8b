import math

import numpy as np
import pytest

from qszego.analysis import (
    EstimatorCfg,
    MorreyParams,
    VmoCfg,
    a1_characteristic,
    ap_characteristic,
    ap_characteristic_stratified,
    ball_stats,
    bmo_norm,
    bmo_p_norm,
    doubling_check,
    fit_log_slope,
    jn_levelset_decay,
    mean_oscillation,
    median,
    morrey_norm,
    vmo_diagnostics,
    weighted_measure,
)
from qszego.fields import (
    ScalarField,
    ball_indicator,
    constant_field,
    log_hnorm_field,
    power_hnorm_field,
    power_weight,
    sign_split_indicator,
    smooth_bump,
    unit_weight,
)
from qszego.heisenberg import (
    Ball,
    BallFamily,
    ball_volume,
    gmul,
    identity,
    make_ball_family,
    point,
    random_centers,
    rho,
    sample_ball,
    unit_ball_volume_exact,
)


@pytest.fixture(scope="module")
def B1(dims):
    return Ball(identity(dims), 1.0)


def test_morrey_params_validation():
    with pytest.raises(ValueError):
        MorreyParams(1.0, 0.5)
    with pytest.raises(ValueError):
        MorreyParams(2.0, 1.0)
    with pytest.raises(ValueError):
        MorreyParams(2.0, 0.0)


def test_weighted_measure(dims, B1):
    cfg = EstimatorCfg(4000, 1)
    wu = unit_weight(dims)
    val, se = weighted_measure(wu, B1, cfg)
    assert val == pytest.approx(ball_volume(dims, 1.0), abs=1e-12)
    w2 = ScalarField(lambda p: 2.0 * np.ones(p.batch_shape), name="2")
    from qszego.fields import Weight

    val2, _ = weighted_measure(Weight(w2), B1, cfg)
    assert val2 == pytest.approx(2 * val, rel=1e-12)
    wpow = power_weight(1.0, dims)
    vals = [weighted_measure(wpow, B1, EstimatorCfg(20_000, s))[0] for s in (1, 2, 3)]
    assert (max(vals) - min(vals)) / min(vals) <= 0.01


def test_weight_positivity_guard(dims, B1):
    from qszego.fields import Weight

    bad = Weight(ScalarField(lambda p: np.zeros(p.batch_shape) - 1.0, name="neg"))
    with pytest.raises(ValueError):
        weighted_measure(bad, B1, EstimatorCfg(100, 1))


def test_median_examples(dims, B1):
    cfg = EstimatorCfg(4001, 2)
    assert median(constant_field(5.0, dims), B1, cfg) == 5.0
    # strict-majority two-valued function: lower median lands on the bigger piece
    maj = ScalarField(lambda p: np.where(p.y[..., 0] < 0.1, -1.0, 1.0), name="maj")
    assert median(maj, B1, cfg) == -1.0
    # balanced split: median is one of the two values and (3.1)/(3.2) hold
    bal = ScalarField(lambda p: np.sign(p.y[..., 0]), name="bal")
    m = median(bal, B1, cfg)
    assert m in (-1.0, 0.0, 1.0)
    pts = sample_ball(B1, 4001, 7)
    vals = bal(pts)
    alpha = float(np.sort(vals)[(len(vals) - 1) // 2])
    assert np.mean(vals > alpha) <= 0.5 and np.mean(vals < alpha) <= 0.5
    # indicator of a small sub-ball: median 0
    sub = ball_indicator(Ball(identity(dims), 0.5))
    assert median(sub, B1, cfg) == 0.0


def test_mean_oscillation(dims, B1):
    cfg = EstimatorCfg(20_000, 3)
    assert mean_oscillation(constant_field(2.5, dims), B1, cfg) == 0.0
    half = ScalarField(lambda p: (p.y[..., 0] > 0).astype(float), name="half")
    m = mean_oscillation(half, B1, cfg)
    # two-valued oracle: mean |f - q| = 2 q (1 - q) with q the mass fraction
    pts = sample_ball(B1, 20_000, 4)
    q = float(half(pts).mean())
    assert m == pytest.approx(2 * q * (1 - q), abs=0.01)
    # comparability with the median-centered deviation
    blog = log_hnorm_field(dims)
    mb = mean_oscillation(blog, B1, cfg)
    pts = sample_ball(B1, 20_000, 5)
    vals = blog(pts)
    alpha = float(np.sort(vals)[(len(vals) - 1) // 2])
    med_dev = float(np.abs(vals - alpha).mean())
    assert mb <= 2 * med_dev * 1.05


def test_bmo_norms(dims):
    fam = make_ball_family(dims, [identity(dims)] + random_centers(dims, 6, 2.0, 8),
                           (0.1, 1.0, 10.0), 3000, 9)
    assert bmo_norm(constant_field(3.0, dims), fam) == 0.0
    blog = log_hnorm_field(dims)
    v = bmo_norm(blog, fam)
    assert 0.0 < v < 1.0
    assert bmo_p_norm(blog, fam, 1.0) == v
    ratio = bmo_p_norm(blog, fam, 2.0) / v
    assert 1.0 <= ratio <= 10.0
    with pytest.raises(ValueError):
        bmo_norm(blog, BallFamily([], 100, 0))
    with pytest.raises(ValueError):
        bmo_p_norm(blog, fam, 0.5)
    # hnorm is not BMO: the estimator doubles when a radius decade is added
    bhn = power_hnorm_field(1.0, dims)
    fam_small = make_ball_family(dims, [identity(dims)], (0.1, 1.0, 10.0), 2000, 10)
    fam_big = make_ball_family(dims, [identity(dims)], (0.1, 1.0, 10.0, 100.0), 2000, 10)
    assert bmo_norm(bhn, fam_big) >= 2.0 * bmo_norm(bhn, fam_small)


def test_ap_characteristics(dims):
    fam = make_ball_family(dims, [identity(dims)] + random_centers(dims, 4, 2.0, 11),
                           (0.25, 1.0, 4.0), 4000, 12)
    assert ap_characteristic(unit_weight(dims), 2.0, fam) == 1.0
    w1 = power_weight(1.0, dims)
    v = ap_characteristic(w1, 2.0, fam)
    assert np.isfinite(v) and v >= 1.0
    # scale invariance under w -> c w (exact formula invariance)
    from qszego.fields import Weight

    w_scaled = Weight(ScalarField(lambda p: 3.0 * w1(p), name="3w"))
    v2 = ap_characteristic(w_scaled, 2.0, fam)
    assert v2 == pytest.approx(v, rel=1e-12)
    # p <= 1 routes to the A_1 variant
    assert ap_characteristic(unit_weight(dims), 1.0, fam) == a1_characteristic(unit_weight(dims), fam)


def test_a1_characteristic(dims):
    fam = make_ball_family(dims, [identity(dims)], (0.5, 1.0), 4000, 13)
    assert a1_characteristic(unit_weight(dims), fam) == 1.0
    wneg = power_weight(-1.0, dims)
    assert np.isfinite(a1_characteristic(wneg, fam))
    # w = hnorm with balls shrinking to the origin: inf -> 0, estimator grows
    w = power_weight(1.0, dims)
    near0 = make_ball_family(dims, [identity(dims)], (1.0,), 4000, 14)
    nearer = make_ball_family(dims, [identity(dims)], (1.0, 0.01), 20_000, 14)
    assert a1_characteristic(w, nearer) > 2.0 * a1_characteristic(w, near0)


def test_ap_divergence_ladder(dims):
    B = Ball(identity(dims), 1.0)
    a_div = dims.Q * 1.0 + 0.5  # Q(p-1) + 0.5 at p = 2
    ladder = [ap_characteristic_stratified(a_div, 2.0, dims, B, d, 3000, 15) for d in (4, 8, 12)]
    assert ladder[1] > 2.0 * ladder[0] and ladder[2] > 2.0 * ladder[1]
    stable = [ap_characteristic_stratified(2.0, 2.0, dims, B, d, 3000, 15) for d in (4, 8, 12)]
    assert abs(stable[2] / stable[1] - 1.0) < 0.05
    with pytest.raises(ValueError):
        ap_characteristic_stratified(2.0, 2.0, dims, Ball(point([1, 0, 0], [0, 0, 0, 0]), 1.0), 4, 100, 1)


def test_doubling_check(dims):
    cfg = EstimatorCfg(4000, 16)
    B = Ball(identity(dims), 0.5)
    res = doubling_check(unit_weight(dims), 2.0, B, [1.0, 2.0, 4.0], cfg)
    # unit weight: ratio = lambda^(Q - Qp) exactly
    for row in res["rows"]:
        lam = row["lambda"]
        assert row["ratio"] == pytest.approx(lam ** (dims.Q - dims.Q * 2.0), rel=1e-12)
    w2 = power_weight(2.0, dims)
    res2 = doubling_check(w2, 2.0, Ball(random_centers(dims, 1, 1.0, 17)[0], 0.5), [2.0, 4.0, 8.0], cfg)
    ratios = [r["ratio"] for r in res2["rows"]]
    assert res2["C_hat"] == max(ratios)
    assert all(r <= res2["C_hat"] for r in ratios)
    with pytest.raises(ValueError):
        doubling_check(w2, 2.0, B, [0.5], cfg)


def test_morrey_norm(dims, B1):
    params = MorreyParams(2.0, 0.5)
    fam = make_ball_family(dims, [identity(dims)], (1.0,), 30_000, 18)
    wu = unit_weight(dims)
    zero = constant_field(0.0, dims)
    assert morrey_norm(zero, wu, params, fam) == 0.0
    f = ball_indicator(B1)
    v = morrey_norm(f, wu, params, fam)
    expect = unit_ball_volume_exact(dims) ** ((1 - params.kappa) / params.p)
    assert v == pytest.approx(expect, rel=0.01)
    f3 = ScalarField(lambda p: 3.0 * f(p), name="3f", support=B1)
    assert morrey_norm(f3, wu, params, fam) == pytest.approx(3 * v, rel=1e-12)
    # kappa -> 0 on a single ball approaches the plain L^p ball integral
    params0 = MorreyParams(2.0, 1e-9)
    v0 = morrey_norm(f, wu, params0, fam)
    plain = math.sqrt(ball_volume(dims, 1.0))
    assert v0 == pytest.approx(plain, rel=0.01)


def test_sup_estimators_monotone(dims):
    blog = log_hnorm_field(dims)
    fam = make_ball_family(dims, [identity(dims)], (0.5, 1.0), 2000, 19)
    ext = fam.extended([Ball(c, 1.0) for c in random_centers(dims, 3, 2.0, 20)])
    assert bmo_norm(blog, ext) >= bmo_norm(blog, fam)
    w = power_weight(1.0, dims)
    assert ap_characteristic(w, 2.0, ext) >= ap_characteristic(w, 2.0, fam)


def test_vmo_diagnostics(dims):
    cfg = VmoCfg(
        small_radii=(1.0, 0.1, 0.01, 0.001),
        large_radii=(1.0, 10.0, 100.0, 1000.0),
        far_radii=(0.3, 1.0, 10.0, 100.0),
        centers_per_radius=8,
        samples=1200,
        seed=21,
    )
    res_const = vmo_diagnostics(constant_field(4.0, dims), dims, cfg)
    for curve in res_const["curves"].values():
        assert all(v == 0.0 for v in curve["sup_oscillation"])
    res_bump = vmo_diagnostics(smooth_bump(identity(dims), 1.0), dims, cfg)
    for s in res_bump["summaries"].values():
        assert s["tail"] <= 0.1 * s["initial"] + 1e-12
    res_log = vmo_diagnostics(log_hnorm_field(dims), dims, cfg)
    s = res_log["summaries"]["small"]
    assert s["tail"] >= 0.5 * s["initial"] > 0


def test_jn_levelset_decay(dims, B1):
    cfg = EstimatorCfg(30_000, 22)
    res = jn_levelset_decay(constant_field(1.0, dims), B1, [0.0, 0.5], cfg)
    fr = {r["alpha"]: r["fraction"] for r in res["rows"]}
    assert fr[0.0] <= 1.0 and fr[0.5] == 0.0
    res = jn_levelset_decay(log_hnorm_field(dims), B1, np.linspace(0.15, 0.7, 10), cfg)
    assert res["fit"]["r_squared"] >= 0.95
    assert res["fit"]["slope"] < 0


def test_ball_stats(dims, B1):
    st = ball_stats(log_hnorm_field(dims), power_weight(2.0, dims), B1, EstimatorCfg(4000, 23))
    assert st.volume == pytest.approx(ball_volume(dims, 1.0))
    assert st.mean_oscillation > 0 and st.weighted_measure > 0
    assert st.samples == 4000 and st.stderr_mean > 0
    assert st.median <= st.lebesgue_mean  # log is left-skewed on balls at 0


def test_fit_log_slope():
    xs = [1.0, 2.0, 4.0, 8.0]
    ys = [16.0, 4.0, 1.0, 0.25]
    assert fit_log_slope(xs, ys) == pytest.approx(-2.0, abs=1e-12)
    assert math.isnan(fit_log_slope([1.0, 2.0], [0.0, 0.0]))


def test_fields_misc(dims, B1):
    f = ball_indicator(B1)
    pts = sample_ball(B1, 100, 24)
    assert np.all(f(pts) == 1.0)
    out = point([5.0, 0, 0], [0, 0, 0, 0])
    assert f(out) == 0.0
    s = sign_split_indicator(B1)
    vals = s(sample_ball(B1, 60_000, 25))
    assert set(np.unique(vals)) <= {-1.0, 1.0}
    assert abs(vals.mean()) <= 3.5 / math.sqrt(len(vals))
    bump = smooth_bump(identity(dims), 1.0)
    p0 = point([0.1, 0.05, -0.02], [0.2, 0.1, 0.0, 0.3])
    grad = bump.horizontal_gradient(p0)
    h = 1e-6
    for j in range(dims.ydim):
        e = np.zeros(dims.ydim)
        e[j] = 1.0
        fd = (float(bump(gmul(p0, point([0, 0, 0], h * e)))) -
              float(bump(gmul(p0, point([0, 0, 0], -h * e))))) / (2 * h)
        assert abs(fd - grad[j]) <= 1e-6 * max(1.0, abs(grad[j]))
    assert bump.sup_horizontal_gradient(seed=1) > 0
    with pytest.raises(ValueError):
        log_hnorm_field(dims).horizontal_gradient(p0)
