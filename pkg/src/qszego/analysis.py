"""Sampled-ball estimators: weights, oscillation, medians, Morrey norms.

Every "sup over all balls" is replaced by a max over a BallFamily; the
estimates are lower bounds of the true sups, and convergence is judged by
family-refinement deltas reported by the experiment layer.  Weighted
integrals reuse one sample set per ball for numerator and denominator so
Monte-Carlo noise cancels in ratios.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._util import substream
from .heisenberg import (
    Ball,
    GroupDims,
    RHO_TRIANGLE_BOUND,
    annulus_volume,
    ball_volume,
    dilate,
    gmul,
    hnorm,
    identity,
    random_centers,
    sample_annulus,
    sample_ball,
    sample_unit_sphere,
)


@dataclass(frozen=True)
class MorreyParams:
    """Exponents of the weighted Morrey norm: p in (1, inf), kappa in (0, 1)."""

    p: float
    kappa: float

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must be in (0,1), got {self.kappa}")


@dataclass(frozen=True)
class EstimatorCfg:
    """Per-ball sampling budget and stream seed for the scalar estimators."""

    samples: int = 4000
    seed: int = 0


@dataclass(frozen=True)
class BallStats:
    """Per-ball statistics bundle (one CSV row in reports)."""

    center_norm: float
    radius: float
    volume: float
    lebesgue_mean: float
    weighted_measure: float
    weighted_mean: float
    mean_oscillation: float
    median: float
    samples: int
    stderr_mean: float


def _ball_samples(B, cfg, salt=0):
    dims = GroupDims(B.center.y.shape[-1] // 4 + 1)
    return sample_ball(B, cfg.samples, substream(cfg.seed, 0xE5, salt).integers(2**62))


def weighted_measure(w, B, cfg):
    """w(B) = |B| * mean of w over Haar-uniform samples; returns (est, se)."""
    dims = GroupDims(B.center.y.shape[-1] // 4 + 1)
    pts = _ball_samples(B, cfg)
    vals = w(pts)
    vol = ball_volume(dims, B.radius)
    return vol * float(vals.mean()), vol * float(vals.std(ddof=1)) / math.sqrt(len(vals))


def median(f, B, cfg):
    """Lower sample median of f over the ball.

    With v sorted, returns v[(N-1)//2]; then at most half the samples lie
    strictly above and at most half strictly below, exactly, for every
    sample set (ties included).
    """
    vals = np.sort(f(_ball_samples(B, cfg)))
    return float(vals[(len(vals) - 1) // 2])


def mean_oscillation(f, B, cfg, pts=None):
    """M(f; B): sampled mean of |f - f_B| with f_B the sampled mean."""
    if pts is None:
        pts = _ball_samples(B, cfg)
    vals = f(pts)
    return float(np.abs(vals - vals.mean()).mean())


def ball_stats(f, w, B, cfg):
    dims = GroupDims(B.center.y.shape[-1] // 4 + 1)
    pts = _ball_samples(B, cfg)
    vals = f(pts)
    wvals = w(pts)
    vol = ball_volume(dims, B.radius)
    wB = vol * float(wvals.mean())
    return BallStats(
        center_norm=float(hnorm(B.center)),
        radius=B.radius,
        volume=vol,
        lebesgue_mean=float(vals.mean()),
        weighted_measure=wB,
        weighted_mean=float((vals * wvals).mean() / wvals.mean()),
        mean_oscillation=float(np.abs(vals - vals.mean()).mean()),
        median=float(np.sort(vals)[(len(vals) - 1) // 2]),
        samples=cfg.samples,
        stderr_mean=float(vals.std(ddof=1)) / math.sqrt(len(vals)),
    )


def bmo_norm(b, family, cfg=None):
    """max over the family of M(b; B); a lower bound for the BMO sup."""
    if len(family) == 0:
        raise ValueError("empty ball family")
    best = 0.0
    for B, pts in family:
        vals = b(pts)
        best = max(best, float(np.abs(vals - vals.mean()).mean()))
    return best


def bmo_p_norm(b, family, p, cfg=None):
    """max over the family of (mean |b - b_B|^p)^(1/p); p = 1 is bmo_norm."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if len(family) == 0:
        raise ValueError("empty ball family")
    best = 0.0
    for B, pts in family:
        vals = b(pts)
        best = max(best, float(np.mean(np.abs(vals - vals.mean()) ** p) ** (1.0 / p)))
    return best


def ap_characteristic(w, p, family, cfg=None):
    """max over the family of (avg w) * (avg w^(-1/(p-1)))^(p-1).

    The two averages share one sample set per ball.  p <= 1 routes to the
    A_1 variant.
    """
    if p <= 1:
        return a1_characteristic(w, family, cfg)
    best = 0.0
    for B, pts in family:
        vals = w(pts)
        dual = float(np.mean(vals ** (-1.0 / (p - 1.0))))
        best = max(best, float(vals.mean()) * dual ** (p - 1.0))
    return best


def a1_characteristic(w, family, cfg=None):
    """max over the family of (avg w) / (sampled essential infimum of w)."""
    best = 0.0
    for B, pts in family:
        vals = w(pts)
        best = max(best, float(vals.mean() / vals.min()))
    return best


def ap_stratified_ball_average(w_exponent, dims, B, depth, per_annulus, seed):
    """Average of hnorm^w_exponent over a 0-centered ball, stratified by
    dyadic annuli down to radius * 2^-depth.

    This is the refinement channel that exposes divergent power weights:
    for Q + w_exponent < 0 each deeper annulus adds a growing contribution,
    so the estimate keeps climbing as depth increases; admissible exponents
    stabilize geometrically.  Only valid for balls centered at the origin.
    """
    if float(hnorm(B.center)) != 0.0:
        raise ValueError("stratified power average needs a 0-centered ball")
    r = B.radius
    total = 0.0
    for k in range(depth):
        r_hi = r * 2.0 ** (-k)
        r_lo = r_hi / 2.0
        pts = sample_annulus(B.center, r_lo, r_hi, per_annulus, substream(seed, 0xAD, k).integers(2**62))
        total += annulus_volume(dims, r_lo, r_hi) * float(np.mean(np.maximum(hnorm(pts), 1e-300) ** w_exponent))
    # innermost core, plain sampling of the remaining tiny ball
    r_core = r * 2.0 ** (-depth)
    core = sample_ball(Ball(B.center, r_core), per_annulus, substream(seed, 0xAD, depth + 1).integers(2**62))
    total += ball_volume(dims, r_core) * float(np.mean(np.maximum(hnorm(core), 1e-300) ** w_exponent))
    return total / ball_volume(dims, r)


def ap_characteristic_stratified(a, p, dims, B, depth, per_annulus, seed):
    """A_p product for w = hnorm^a on a 0-centered ball with dyadic-annulus
    stratification of both averages down to 2^-depth of the radius."""
    avg_w = ap_stratified_ball_average(a, dims, B, depth, per_annulus, seed)
    avg_dual = ap_stratified_ball_average(-a / (p - 1.0), dims, B, depth, per_annulus, seed + 1)
    return avg_w * avg_dual ** (p - 1.0)


def doubling_check(w, p, B, lambdas, cfg):
    """Ratios w(lambda B) / (lambda^(Qp) w(B)) per lambda, plus fitted C-hat.

    All ratios must sit below one constant for an A_p weight; the fitted
    constant is their max.
    """
    dims = GroupDims(B.center.y.shape[-1] // 4 + 1)
    wB, _ = weighted_measure(w, B, cfg)
    rows = []
    for lam in lambdas:
        if lam < 1:
            raise ValueError("lambda must be >= 1")
        wLB, se = weighted_measure(w, B.scaled(lam), EstimatorCfg(cfg.samples, cfg.seed + int(lam * 1000)))
        rows.append({"lambda": float(lam), "ratio": wLB / (lam ** (dims.Q * p) * wB), "stderr": se / (lam ** (dims.Q * p) * wB)})
    chat = max(r["ratio"] for r in rows)
    return {"rows": rows, "C_hat": chat}


def morrey_norm(f, w, params, family, cfg=None):
    """max over the family of ([w(B)]^-kappa int_B |f|^p w)^(1/p).

    Ball integrals by shared-sample Monte Carlo; a lower bound of the sup.
    """
    if len(family) == 0:
        raise ValueError("empty ball family")
    best = 0.0
    for B, pts in family:
        dims = GroupDims(B.center.y.shape[-1] // 4 + 1)
        vol = ball_volume(dims, B.radius)
        wvals = w(pts)
        fvals = np.abs(f(pts))
        wB = vol * float(wvals.mean())
        integral = vol * float(np.mean(fvals ** params.p * wvals))
        best = max(best, (integral / wB ** params.kappa) ** (1.0 / params.p))
    return best


@dataclass
class VmoCfg:
    """Grids and budgets for the three vanishing-oscillation curves."""

    small_radii: tuple = (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001)
    large_radii: tuple = (1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0)
    far_radii: tuple = (0.3, 1.0, 3.0, 10.0, 30.0, 100.0)
    centers_per_radius: int = 12
    center_scale: float = 2.0
    samples: int = 2000
    seed: int = 0


def _sup_oscillation(b, balls, cfg, salt):
    best = 0.0
    for i, B in enumerate(balls):
        pts = sample_ball(B, cfg.samples, substream(cfg.seed, salt, i).integers(2**62))
        vals = b(pts)
        best = max(best, float(np.abs(vals - vals.mean()).mean()))
    return best


def vmo_diagnostics(b, dims, cfg):
    """Three curves characterizing vanishing mean oscillation.

    (i)  a -> sup over sampled balls of radius a, a decreasing;
    (ii) same for a increasing;
    (iii) r -> sup over sampled balls provably inside the complement of
         B(0, r).
    Returns the curves plus tail/initial ratios and log-log tail slopes.
    """
    curves = {}
    for key, radii, salt in (
        ("small", cfg.small_radii, 0x71),
        ("large", cfg.large_radii, 0x72),
    ):
        vals = []
        for j, a in enumerate(radii):
            centers = [identity(dims)] + random_centers(
                dims, cfg.centers_per_radius, cfg.center_scale, substream(cfg.seed, salt, 0xC, j).integers(2**62)
            ) + random_centers(
                dims, cfg.centers_per_radius, 3.0 * a, substream(cfg.seed, salt, 0xD, j).integers(2**62)
            )
            balls = [Ball(c, a) for c in centers]
            vals.append(_sup_oscillation(b, balls, cfg, salt + 256 * j))
        curves[key] = {"radii": list(radii), "sup_oscillation": vals}
    far_vals = []
    for j, r in enumerate(cfg.far_radii):
        balls = []
        rng = substream(cfg.seed, 0x73, j)
        for rad_factor in (0.25, 1.0, 4.0):
            rad = r * rad_factor
            dist = RHO_TRIANGLE_BOUND * (r + rad) * 1.25
            dirs = sample_unit_sphere(dims, cfg.centers_per_radius, rng.integers(2**62))
            for i in range(cfg.centers_per_radius):
                balls.append(Ball(dilate(dist, dirs[i]), rad))
        far_vals.append(_sup_oscillation(b, balls, cfg, 0x74 + 256 * j))
    curves["far"] = {"radii": list(cfg.far_radii), "sup_oscillation": far_vals}

    def summary(vals):
        initial, tail = vals[0], vals[-1]
        ratio = tail / initial if initial > 0 else 0.0
        return {"initial": initial, "tail": tail, "tail_over_initial": ratio}

    return {
        "curves": curves,
        "summaries": {k: summary(v["sup_oscillation"]) for k, v in curves.items()},
    }


def jn_levelset_decay(b, B, alphas, cfg):
    """Sampled level-set fractions |{|b - b_B| > alpha}| / |B| per alpha,
    with a linear fit of log fraction against alpha (exponential decay).
    """
    pts = _ball_samples(B, cfg)
    vals = b(pts)
    dev = np.abs(vals - vals.mean())
    rows = [{"alpha": float(a), "fraction": float(np.mean(dev > a))} for a in alphas]
    xs = np.array([r["alpha"] for r in rows if r["fraction"] > 0])
    ys = np.log([r["fraction"] for r in rows if r["fraction"] > 0])
    fit = {"slope": float("nan"), "intercept": float("nan"), "r_squared": float("nan")}
    if len(xs) >= 3:
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = slope * xs + intercept
        ss_res = float(np.sum((ys - pred) ** 2))
        ss_tot = float(np.sum((ys - ys.mean()) ** 2))
        fit = {
            "slope": float(slope),
            "intercept": float(intercept),
            "r_squared": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        }
    return {"rows": rows, "fit": fit}


def fit_log_slope(xs, ys):
    """Slope of log(y) against log(x), ignoring non-positive ys."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ok = ys > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])
