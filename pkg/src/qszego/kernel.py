"""Construction and evaluation of the boundary convolution kernel.

The kernel K(g) is the quaternion-valued function s(|y|^2 + t) where s is
the 2(n-1)-fold x1-derivative of conj(sigma)/|sigma|^4, built exactly with
rational coefficients (series.py) and compiled to floats once per
evaluator.  Also here: the shifted kernel (x1 -> |y|^2 + eps), the smooth
truncation K_eta, the horizontal gradient, and the empirical scans for the
size / smoothness / lower bounds of the kernel.
"""

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._util import substream
from .heisenberg import (
    Ball,
    GroupDims,
    dilate,
    ginv,
    gmul,
    hnorm,
    rho,
    sample_annulus,
    sample_ball,
    sample_unit_sphere,
)
from .quaternion import B_ALPHA, Quaternion
from .series import CompiledSeries, differentiate, seed_series, series_to_json

SINGULARITY_TOL = 1e-12


@dataclass(frozen=True)
class SmoothCutoff:
    """Smooth step phi: 0 on (-inf, 1/2], in [0,1] on [1/2, 1], 1 on [1, inf).

    Concrete choice: the exp(-1/s) glue h(2t-1) / (h(2t-1) + h(2-2t)); any
    C-infinity monotone step with the same plateaus would do.
    """

    def __call__(self, t):
        return cutoff_phi(t)


def cutoff_phi(t):
    """Evaluate the smooth step; exact 0/1 plateaus, monotone."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(t.shape, dtype=np.float64)
    out[t >= 1.0] = 1.0
    mid = (t > 0.5) & (t < 1.0)
    if np.any(mid):
        tm = t[mid]
        h1 = np.exp(-1.0 / (2.0 * tm - 1.0))
        h2 = np.exp(-1.0 / (2.0 - 2.0 * tm))
        out[mid] = h1 / (h1 + h2)
    if out.ndim == 0:
        return float(out)
    return out


DEFAULT_CUTOFF = SmoothCutoff()


@dataclass(frozen=True)
class KernelEvaluator:
    """Immutable kernel: four exact component series plus their partials.

    Evaluation is pure and reentrant; compiled float tables are built once
    in build_kernel.
    """

    dims: GroupDims
    c: float
    components: tuple  # 4 TermSeries
    partials: tuple  # partials[i][comp] = d components[comp] / d x_{i+1}
    _comp_fns: tuple
    _partial_fns: tuple

    def eval_s(self, x):
        """s at quaternion coordinates x of shape (..., 4) -> (..., 4)."""
        x = np.asarray(x, dtype=np.float64)
        return np.stack([fn(x) for fn in self._comp_fns], axis=-1)

    def eval_partial_s(self, axis, x):
        """(d s / d x_axis) at x, axis in 1..4 -> (..., 4)."""
        x = np.asarray(x, dtype=np.float64)
        return np.stack([fn(x) for fn in self._partial_fns[axis - 1]], axis=-1)


def build_kernel(dims, c=1.0):
    """Differentiate the seed series 2(n-1) times along x1 and scale by c."""
    comps = list(seed_series())
    for _ in range(2 * (dims.n - 1)):
        comps = [differentiate(s, 1) for s in comps]
    cfrac = Fraction(c)
    comps = [s.scaled(cfrac) for s in comps]
    want = -(2 * dims.n + 1)
    for s in comps:
        if s.homogeneity_degree() != want:
            raise AssertionError(f"component degree {s.homogeneity_degree()} != {want}")
    partials = tuple(tuple(differentiate(s, ax) for s in comps) for ax in (1, 2, 3, 4))
    return KernelEvaluator(
        dims=dims,
        c=float(c),
        components=tuple(comps),
        partials=partials,
        _comp_fns=tuple(CompiledSeries(s) for s in comps),
        _partial_fns=tuple(tuple(CompiledSeries(s) for s in row) for row in partials),
    )


def sigma_coords(g, eps=0.0):
    """Kernel argument sigma(g): x1 = |y|^2 + eps, (x2, x3, x4) = t."""
    x1 = np.sum(g.y * g.y, axis=-1) + eps
    return np.concatenate([x1[..., None], np.broadcast_to(g.t, x1.shape + (3,))], axis=-1)


def _maybe_quaternion(g, vals):
    if g.batch_shape == ():
        return Quaternion(*[float(v) for v in vals])
    return vals


def eval_K(ke, g, scale=1.0):
    """K(g) = s(|y|^2 + t); refuses points within 1e-12 * scale of the origin.

    Returns a Quaternion for a single point, an (..., 4) array for a batch.
    """
    hn = hnorm(g)
    if np.any(hn < SINGULARITY_TOL * scale):
        raise ValueError("eval_K too close to the singularity; use eval_K_eta or eval_K_eps")
    return _maybe_quaternion(g, ke.eval_s(sigma_coords(g)))


def eval_K_eps(ke, g, eps):
    """Shifted kernel s(|y|^2 + eps + t); defined everywhere for eps > 0."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return _maybe_quaternion(g, ke.eval_s(sigma_coords(g, eps=eps)))


def eval_K_two_point(ke, g, h):
    """Two-point kernel K(g, h) = K(h^-1 . g)."""
    return eval_K(ke, gmul(ginv(h), g))


def eval_K_eta(ke, cutoff, g, u, eta):
    """Truncated kernel K(u^-1 g) * phi(rho(g, u) / eta).

    Exactly zero where rho < eta/2 (the kernel is never touched there),
    exactly K where rho > eta.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    d = rho(g, u)
    d_b = np.broadcast_to(d, d.shape) if d.shape else d.reshape(())
    w = cutoff(np.asarray(d) / eta)
    w = np.asarray(w, dtype=np.float64)
    single = w.shape == ()
    if single:
        if w == 0.0:
            return _maybe_quaternion(g, np.zeros(4))
        vals = ke.eval_s(sigma_coords(gmul(ginv(u), g)))
        return _maybe_quaternion(g, w * vals)
    diff = gmul(ginv(u), g)
    x = sigma_coords(diff)
    out = np.zeros(w.shape + (4,), dtype=np.float64)
    live = w > 0.0
    if np.any(live):
        out[live] = ke.eval_s(x[live]) * w[live][..., None]
    return out


def horizontal_gradient_K(ke, g, scale=1.0):
    """All 4(n-1) horizontal derivatives of K at g.

    Chain rule through sigma: d K/d y_m = 2 y_m (d s/d x1), d K/d t_a =
    d s/d x_{1+a}; the left-invariant fields add the structure-matrix drift,
    so Y_{4l+j} K = 2 y_{4l+j} d1s + 2 sum_{a,k} b^a[k,j] y_{4l+k} d_{1+a}s.

    Returns (..., 4(n-1), 4); a list of Quaternions for a single point.
    """
    hn = hnorm(g)
    if np.any(hn < SINGULARITY_TOL * scale):
        raise ValueError("horizontal gradient at the singularity")
    x = sigma_coords(g)
    p1 = ke.eval_partial_s(1, x)  # (..., 4)
    pt = np.stack([ke.eval_partial_s(1 + a, x) for a in (1, 2, 3)], axis=-2)  # (..., 3, 4)
    m = ke.dims.n - 1
    yb = np.broadcast_to(g.y, x.shape[:-1] + (4 * m,)).reshape(x.shape[:-1] + (m, 4))
    # drift[..., l, j, a] = sum_k b^a[k, j] y_{4l+k}
    drift = np.einsum("...lk,akj->...lja", yb, B_ALPHA.astype(np.float64))
    grad = 2.0 * yb[..., None] * p1[..., None, None, :] + 2.0 * np.einsum(
        "...lja,...ac->...ljc", drift, pt
    )
    grad = grad.reshape(x.shape[:-1] + (4 * m, 4))
    if g.batch_shape == ():
        return [Quaternion(*[float(v) for v in grad[j]]) for j in range(4 * m)]
    return grad


def quat_modulus(vals):
    """|q| for component arrays of shape (..., 4)."""
    vals = np.asarray(vals, dtype=np.float64)
    return np.sqrt(np.sum(vals * vals, axis=-1))


def kernel_to_json(ke):
    """Canonical JSON for the whole evaluator (diffable across runs)."""
    payload = {
        "n": ke.dims.n,
        "c": {"num": str(Fraction(ke.c).numerator), "den": str(Fraction(ke.c).denominator)},
        "components": [json.loads(series_to_json(s)) for s in ke.components],
        "partials": [[json.loads(series_to_json(s)) for s in row] for row in ke.partials],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Empirical kernel-bound scans.  Every scan reports running sups at the
# requested checkpoints so stabilization (change on doubling) is visible.


def _checkpointed_sup(value_chunk, counts, seed, chunk=200_000):
    counts = sorted(int(c) for c in counts)
    sups = []
    best = 0.0
    done = 0
    for target in counts:
        while done < target:
            m = min(chunk, target - done)
            vals = value_chunk(m, done)
            best = max(best, float(np.max(vals)))
            done += m
        sups.append((target, best))
    return sups


def size_bound_scan(ke, counts, seed):
    """Running sup of |K(g)| * hnorm(g)^Q over unit-sphere samples.

    By homogeneity the product is constant along rays, so scanning the
    sphere scans everything.
    """
    def chunk_vals(m, offset):
        g = sample_unit_sphere(ke.dims, m, substream(seed, 0x51, offset).integers(2**62))
        return quat_modulus(eval_K(ke, g))  # hnorm == 1 on the sphere

    return _checkpointed_sup(chunk_vals, counts, seed)


def gradient_bound_scan(ke, counts, seed):
    """Running sups of |Y_j K| * hnorm^(Q+1) on the sphere, per j and overall.

    Returns (per_j_sups, overall_checkpoints).
    """
    counts = sorted(int(c) for c in counts)
    ydim = ke.dims.ydim
    per_j = np.zeros(ydim)
    overall = []
    done = 0
    chunk = 100_000
    for target in counts:
        while done < target:
            m = min(chunk, target - done)
            g = sample_unit_sphere(ke.dims, m, substream(seed, 0x52, done).integers(2**62))
            mods = quat_modulus(horizontal_gradient_K(ke, g))  # (m, ydim)
            per_j = np.maximum(per_j, mods.max(axis=0))
            done += m
        overall.append((target, float(per_j.max())))
    return per_j, overall


def holder_quotient_scan(ke, counts, seed, separation=5.0, side="left"):
    """Running sup of the smoothness quotient of the two-point kernel.

    side="left":  |K(g,h) - K(g0,h)| rho(g0,h)^(Q+1) / rho(g,g0)
                  over rho(g0,h) >= separation * rho(g,g0);
    side="right": same for increments in the second argument.
    Reduced to one-point form via left-invariance.  The quotient is
    dilation-invariant, so rho(g0,h) is pinned to 1 (base points on the
    unit sphere) and the increment to the regime boundary 1/separation,
    where the quotient peaks; the scan then stabilizes quickly and reports
    a lower bound of the constrained sup.
    """

    def chunk_vals(m, offset):
        rng = substream(seed, 0x53, offset)
        a0 = sample_unit_sphere(ke.dims, m, rng.integers(2**62))
        v = sample_unit_sphere(ke.dims, m, rng.integers(2**62))
        step = dilate(np.full(m, 1.0 / separation), v)
        if side == "left":
            a = gmul(a0, step)  # increment in the first argument
        else:
            a = gmul(step, a0)  # increment in the second argument
        dk = quat_modulus(np.asarray(eval_K(ke, a)) - np.asarray(eval_K(ke, a0)))
        return dk / rho(a, a0)  # hnorm(a0)^(Q+1) == 1 on the sphere

    return _checkpointed_sup(chunk_vals, counts, seed, chunk=100_000)


def lower_bound_scan(ke, n_base, n_dirs, seed, r0=10.0, n_radii=4, r_max=100.0, ball_samples=16):
    """Scan for a uniform pointwise lower bound |K| >= c * rho^-Q.

    For each base point g on the unit sphere, sample direction rays; along
    each ray take points g2 = g . delta_d(v) with d on a log grid in
    [r0, r_max] and probe pairs (g1, g2) with g1 in B(g, 1).  A direction
    "achieves" level c when its min of |K(g1, g2)| rho^Q clears c.

    Returns dict with the global floor (max c valid for every base point via
    its best direction) and the mean fraction of directions achieving it.
    """
    Q = ke.dims.Q
    base = sample_unit_sphere(ke.dims, n_base, substream(seed, 0x54).integers(2**62))
    dists = np.geomspace(r0, r_max, n_radii)
    best_floor = []
    dir_floors_all = []
    for i in range(n_base):
        g = base[i]
        rng = substream(seed, 0x54, i)
        dirs = sample_unit_sphere(ke.dims, n_dirs, rng.integers(2**62))
        g1 = sample_ball(Ball(g, 1.0), ball_samples, rng.integers(2**62))
        floors = np.empty(n_dirs)
        for v in range(n_dirs):
            ray_floors = []
            for d in dists:
                g2 = gmul(g, dilate(float(d), dirs[v]))
                two = eval_K_two_point(ke, g1, g2)
                ray_floors.append(np.min(quat_modulus(two) * rho(g1, g2) ** Q))
            floors[v] = min(ray_floors)
        dir_floors_all.append(floors)
        best_floor.append(float(floors.max()))
    c_global = float(min(best_floor))
    fracs = [float(np.mean(f >= c_global)) for f in dir_floors_all]
    return {
        "c_global": c_global,
        "mean_direction_fraction": float(np.mean(fracs)),
        "best_floors": best_floor,
    }


@dataclass(frozen=True)
class CompanionScan:
    """Result of the sign-constancy companion search for one base ball."""

    found: bool
    companion: object  # Ball or None
    component: int  # 0..3, or -1
    sign: int
    floor: float  # min |K_i(g,h)| * rho(g,h)^Q over sampled pairs
    candidates_tried: int


def sign_constancy_scan(ke, base_ball, seed, a1=3.0, a2=10.0, n_dirs=24, n_dists=3, n_pairs=48):
    """Find a companion ball on which one kernel component keeps its sign.

    Candidates are centers g0 . delta_d(v) with d log-spaced in
    [a1 * r, a2 * r]; for each candidate, sampled pairs (g, h) in
    B(g0,r) x B(h0,r) must give one component with constant sign, scored by
    min |K_i| rho^Q.  The best-scoring candidate wins.
    """
    g0, r = base_ball.center, base_ball.radius
    rng = substream(seed, 0x5C)
    dirs = sample_unit_sphere(ke.dims, n_dirs, rng.integers(2**62))
    dists = np.geomspace(a1 * r, a2 * r, n_dists)
    gs = sample_ball(Ball(g0, r), n_pairs, rng.integers(2**62))
    best = CompanionScan(False, None, -1, 0, 0.0, n_dirs * n_dists)
    Q = ke.dims.Q
    for v in range(n_dirs):
        for d in dists:
            h0 = gmul(g0, dilate(float(d), dirs[v]))
            hs = sample_ball(Ball(h0, r), n_pairs, rng.integers(2**62))
            vals = np.asarray(eval_K_two_point(ke, gs, hs))  # (n_pairs, 4)
            rr = rho(gs, hs) ** Q
            scaled = np.abs(vals) * rr[:, None]
            for i in range(4):
                col = vals[:, i]
                if np.all(col > 0):
                    sgn = 1
                elif np.all(col < 0):
                    sgn = -1
                else:
                    continue
                floor = float(scaled[:, i].min())
                if floor > best.floor:
                    best = CompanionScan(True, Ball(h0, r), i, sgn, floor, best.candidates_tried)
    return best
