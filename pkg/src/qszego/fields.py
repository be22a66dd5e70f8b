"""Scalar fields on the group: test functions b and f, and weights.

A ScalarField wraps a pure vectorized callable GroupPoint-batch -> values,
plus the metadata the estimators need (support ball, smoothness tag,
optional analytic coordinate partials for horizontal gradients).
"""

from dataclasses import dataclass

import numpy as np

from ._util import substream
from .heisenberg import Ball, GroupDims, hnorm, identity, rho, sample_ball
from .quaternion import B_ALPHA


@dataclass(frozen=True)
class ScalarField:
    """Real-valued function on the group with estimator metadata."""

    fn: object
    name: str = ""
    support: Ball | None = None  # None means "not compactly supported"
    smooth: str = "unknown"  # "smooth", "indicator", "singular", ...
    # Optional analytic partials for the horizontal gradient; each maps a
    # point batch to (..., 3) / (..., ydim) arrays.
    dt: object = None
    dy: object = None
    # Optional sampler over the region carrying the gradient mass (the
    # metric support cover can be far larger than the effective support).
    grad_region: object = None
    # Known exact value of int f dg (enables control-variate quadrature
    # for mean-zero test functions, whose far-field images otherwise
    # drown in cancellation noise).
    exact_integral: float | None = None

    def __call__(self, pts):
        return np.asarray(self.fn(pts), dtype=np.float64)

    def horizontal_gradient(self, pts):
        """All Y_j derivatives, shape (..., ydim); needs analytic partials.

        Y_{4l+j} f = df/dy_{4l+j} + 2 sum_{a,k} b^a[k,j] y_{4l+k} df/dt_a.
        """
        if self.dt is None or self.dy is None:
            raise ValueError(f"field {self.name!r} has no analytic partials")
        dt = np.asarray(self.dt(pts), dtype=np.float64)
        dy = np.asarray(self.dy(pts), dtype=np.float64)
        m = dy.shape[-1] // 4
        yb = np.broadcast_to(pts.y, dy.shape).reshape(dy.shape[:-1] + (m, 4))
        drift = np.einsum("...lk,akj->...lja", yb, B_ALPHA.astype(np.float64))
        grad = dy.reshape(dy.shape[:-1] + (m, 4)) + 2.0 * np.einsum(
            "...lja,...a->...lj", drift, dt
        )
        return grad.reshape(dy.shape)

    def sup_horizontal_gradient(self, samples=20_000, seed=0):
        """Sampled sup of |grad_H f| over the gradient-carrying region."""
        if self.grad_region is not None:
            pts = self.grad_region(samples, substream(seed, 0x6E).integers(2**62))
        elif self.support is not None:
            pts = sample_ball(self.support, samples, substream(seed, 0x6E).integers(2**62))
        else:
            raise ValueError("unbounded support: cannot scan the gradient sup")
        g = self.horizontal_gradient(pts)
        return float(np.sqrt(np.sum(g * g, axis=-1)).max())


def constant_field(value, dims):
    return ScalarField(lambda pts: np.full(pts.batch_shape, float(value)), name=f"const({value})", smooth="smooth")


def ball_indicator(ball):
    from .heisenberg import GroupDims, ball_volume

    dims = GroupDims(ball.center.y.shape[-1] // 4 + 1)

    def fn(pts):
        return (rho(pts, ball.center) < ball.radius).astype(np.float64)

    return ScalarField(
        fn,
        name=f"chi(r={ball.radius:g})",
        support=ball,
        smooth="indicator",
        exact_integral=ball_volume(dims, ball.radius),
    )


def sign_split_indicator(ball, axis=0):
    """Indicator of the ball with a sign flip across one y-coordinate plane.

    The sign factor is odd under the antipode p -> c . (c^-1 p)^-1, which
    is a measure-preserving isometry of the ball, so the integral is
    exactly zero.
    """
    c = ball.center

    def fn(pts):
        inside = rho(pts, c) < ball.radius
        return np.where(inside, np.sign(pts.y[..., axis] - c.y[..., axis]), 0.0)

    return ScalarField(
        fn, name=f"chi_sign(r={ball.radius:g})", support=ball, smooth="indicator", exact_integral=0.0
    )


def log_hnorm_field(dims):
    def fn(pts):
        n = hnorm(pts)
        return np.log(np.maximum(n, 1e-300))

    return ScalarField(fn, name="log-hnorm", smooth="singular")


def power_hnorm_field(a, dims):
    # Floor keeps w > 0 at every evaluated point (the origin is null for
    # the integrals; the floor only guards exact-zero evaluations).
    def fn(pts):
        n = np.maximum(hnorm(pts), 1e-30)
        return n ** a

    return ScalarField(fn, name=f"hnorm^{a:g}", smooth="singular" if a < 0 else "continuous")


def smooth_bump(center, radius):
    """C-infinity bump in Euclidean coordinates, supported in a coordinate
    ball of the given radius around center; analytic partials included.

    b = exp(1 - 1/(1 - s^2)) with s^2 = (|t - t0|^2 + |y - y0|^2)/R^2.
    The support metadata is a metric ball that provably contains the
    coordinate ball (|t-t0| <= R and |y-y0| <= R give rho <= C(R^(1/2)+R)).
    """
    t0 = np.asarray(center.t, dtype=np.float64)
    y0 = np.asarray(center.y, dtype=np.float64)
    R = float(radius)

    def s2_of(pts):
        dt = pts.t - t0
        dy = pts.y - y0
        return (np.sum(dt * dt, axis=-1) + np.sum(dy * dy, axis=-1)) / R**2

    def fn(pts):
        u = s2_of(pts)
        out = np.zeros(np.shape(u), dtype=np.float64)
        inside = u < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside]))
        return out

    def phi_prime(u):
        out = np.zeros(np.shape(u), dtype=np.float64)
        inside = u < 1.0
        ui = u[inside]
        out[inside] = -np.exp(1.0 - 1.0 / (1.0 - ui)) / (1.0 - ui) ** 2
        return out

    def dt_fn(pts):
        u = s2_of(pts)
        return phi_prime(u)[..., None] * 2.0 * (pts.t - t0) / R**2

    def dy_fn(pts):
        u = s2_of(pts)
        return phi_prime(u)[..., None] * 2.0 * (pts.y - y0) / R**2

    # metric ball around center covering the coordinate support
    from .heisenberg import GroupPoint, RHO_TRIANGLE_BOUND

    cover = RHO_TRIANGLE_BOUND * ((3 * R**2) ** 0.25 + (len(y0) * R**2) ** 0.25) * 1.01

    def grad_region(count, seed):
        # the coordinate box around the bump, where the gradient lives
        rng = np.random.default_rng(seed)
        return GroupPoint(
            t0 + rng.uniform(-R, R, size=(count, 3)),
            y0 + rng.uniform(-R, R, size=(count, len(y0))),
        )

    return ScalarField(
        fn,
        name=f"bump(R={R:g})",
        support=Ball(center, cover),
        smooth="smooth",
        dt=dt_fn,
        dy=dy_fn,
        grad_region=grad_region,
    )


@dataclass(frozen=True)
class Weight:
    """Positive weight with its claimed Muckenhoupt class parameter.

    power_exponent is set for the built-in family w = hnorm^a (admissible
    range a in (-Q, Q(p-1)) for class p, checked empirically elsewhere).
    """

    field: ScalarField
    claimed_p: float = 2.0
    power_exponent: float | None = None

    def __call__(self, pts):
        vals = self.field(pts)
        if np.any(vals <= 0):
            raise ValueError(f"weight {self.field.name!r} not positive at sampled points")
        return vals

    @property
    def name(self):
        return self.field.name


def unit_weight(dims, p=2.0):
    return Weight(constant_field(1.0, dims), claimed_p=p, power_exponent=0.0)


def power_weight(a, dims, p=2.0):
    if a == 0:
        return unit_weight(dims, p)
    f = power_hnorm_field(a, dims)
    return Weight(ScalarField(f.fn, name=f.name, smooth=f.smooth), claimed_p=p, power_exponent=float(a))
