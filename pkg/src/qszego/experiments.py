"""Named, reproducible experiment scenarios with CSV/JSON reporting.

A scenario is a pure function of a validated RunConfig; identical
(config, seed) pairs give byte-identical CSV tables.  Timestamps appear
only in output directory names, never inside files.
"""

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from ._util import substream
from . import analysis, fields, heisenberg, kernel, operators
from .analysis import EstimatorCfg, MorreyParams, VmoCfg
from .heisenberg import Ball, GroupDims, dilate, hnorm, identity, point, sample_ball, sample_unit_sphere
from .operators import CommutatorImage, QuadratureCfg


class ConfigError(ValueError):
    """Invalid run configuration; message carries the field path."""


DEFAULT_BUDGETS = {
    "source_samples": 4096,
    "targets_per_ball": 32,
    "samples_per_ball": 3000,
    "sphere_samples": 250_000,
    "triples": 200_000,
    "volume_samples": 2_000_000,
    "trials": 20,
}

_SPEC_KEYS = {
    "scenario": str,
    "n": int,
    "seed": int,
    "kernel_c": (int, float),
    "budget_scale": (int, float),
    "eta_grid": list,
    "morrey": dict,
    "weight": dict,
    "b": dict,
    "f": list,
    "balls": dict,
    "budgets": dict,
    "out_dir": (str, type(None)),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated scenario configuration (defaults filled)."""

    scenario: str
    n: int = 2
    seed: int = 7
    kernel_c: float = 1.0
    budget_scale: float = 1.0
    eta_grid: tuple = (0.2, 0.1, 0.05)
    morrey: MorreyParams = MorreyParams(2.0, 0.5)
    weight: dict = field(default_factory=lambda: {"kind": "power", "a": 2.0})
    b: dict = field(default_factory=lambda: {"kind": "log-hnorm"})
    f: tuple = ()
    balls: dict = field(default_factory=lambda: {"n_random_centers": 4, "center_scale": 2.0,
                                                 "radii": (0.25, 1.0, 4.0), "include_origin": True})
    budgets: dict = field(default_factory=dict)
    out_dir: str | None = None

    def budget(self, name):
        base = self.budgets.get(name, DEFAULT_BUDGETS[name])
        return max(4, int(round(base * self.budget_scale)))

    @property
    def dims(self):
        return GroupDims(self.n)


@dataclass
class RunReport:
    """Scenario outcome: config echo, per-check PASS/FAIL, constants, tables."""

    scenario: str
    config: dict
    checks: list
    constants: dict
    tables: dict

    @property
    def all_pass(self):
        return all(c["pass"] for c in self.checks)


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def validate_config(raw):
    """Parse and range-check a JSON config document (text, dict, or path).

    Unknown keys are errors; every violation message carries the offending
    field path.  Returns a RunConfig with defaults filled.
    """
    if isinstance(raw, str):
        if "\n" not in raw and os.path.exists(raw):
            with open(raw, "r", encoding="utf-8") as fh:
                raw = fh.read()
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ConfigError(f"<document>: not valid JSON ({e})") from e
    else:
        data = dict(raw)
    if not isinstance(data, dict):
        _fail("<document>", "top level must be an object")
    for key, val in data.items():
        if key not in _SPEC_KEYS:
            _fail(key, "unknown key")
        if not isinstance(val, _SPEC_KEYS[key]) and not (
            _SPEC_KEYS[key] is int and isinstance(val, int)
        ):
            _fail(key, f"expected {_SPEC_KEYS[key]}, got {type(val).__name__}")
    if "scenario" not in data:
        _fail("scenario", "required")
    if data["scenario"] not in SCENARIOS:
        _fail("scenario", f"unknown scenario {data['scenario']!r}; see --list-scenarios")
    n = int(data.get("n", 2))
    if n < 2:
        _fail("n", "must be >= 2")
    morrey_raw = data.get("morrey", {})
    for k in morrey_raw:
        if k not in ("p", "kappa"):
            _fail(f"morrey.{k}", "unknown key")
    p = float(morrey_raw.get("p", 2.0))
    kappa = float(morrey_raw.get("kappa", 0.5))
    if not p > 1:
        _fail("morrey.p", "must be > 1")
    if not 0 < kappa < 1:
        _fail("morrey.kappa", "must be in (0,1)")
    weight = dict(data.get("weight", {"kind": "power", "a": 2.0}))
    if weight.get("kind") not in ("unit", "power"):
        _fail("weight.kind", "must be 'unit' or 'power'")
    if weight["kind"] == "power" and "a" not in weight:
        _fail("weight.a", "required for power weights")
    for k in weight:
        if k not in ("kind", "a"):
            _fail(f"weight.{k}", "unknown key")
    bspec = dict(data.get("b", {"kind": "log-hnorm"}))
    if bspec.get("kind") not in ("constant", "smooth-bump", "log-hnorm", "power-hnorm"):
        _fail("b.kind", "must be constant | smooth-bump | log-hnorm | power-hnorm")
    eta_grid = tuple(float(e) for e in data.get("eta_grid", (0.2, 0.1, 0.05)))
    if any(e <= 0 for e in eta_grid):
        _fail("eta_grid", "etas must be positive")
    budget_scale = float(data.get("budget_scale", 1.0))
    if budget_scale <= 0:
        _fail("budget_scale", "must be positive")
    budgets = dict(data.get("budgets", {}))
    for k in budgets:
        if k not in DEFAULT_BUDGETS:
            _fail(f"budgets.{k}", f"unknown budget (known: {sorted(DEFAULT_BUDGETS)})")
    balls = dict(data.get("balls", {}))
    for k in balls:
        if k not in ("n_random_centers", "center_scale", "radii", "include_origin"):
            _fail(f"balls.{k}", "unknown key")
    balls.setdefault("n_random_centers", 4)
    balls.setdefault("center_scale", 2.0)
    balls.setdefault("radii", (0.25, 1.0, 4.0))
    balls.setdefault("include_origin", True)
    balls["radii"] = tuple(float(r) for r in balls["radii"])
    return RunConfig(
        scenario=data["scenario"],
        n=n,
        seed=int(data.get("seed", 7)),
        kernel_c=float(data.get("kernel_c", 1.0)),
        budget_scale=budget_scale,
        eta_grid=eta_grid,
        morrey=MorreyParams(p, kappa),
        weight=weight,
        b=bspec,
        f=tuple(data.get("f", ())),
        balls=balls,
        budgets=budgets,
        out_dir=data.get("out_dir"),
    )


def _build_weight(cfg):
    if cfg.weight["kind"] == "unit":
        return fields.unit_weight(cfg.dims, p=cfg.morrey.p)
    return fields.power_weight(float(cfg.weight["a"]), cfg.dims, p=cfg.morrey.p)


def _build_b(cfg, spec=None):
    spec = spec if spec is not None else cfg.b
    dims = cfg.dims
    kind = spec["kind"]
    if kind == "constant":
        return fields.constant_field(float(spec.get("value", 1.0)), dims)
    if kind == "log-hnorm":
        return fields.log_hnorm_field(dims)
    if kind == "power-hnorm":
        return fields.power_hnorm_field(float(spec.get("a", 0.5)), dims)
    center = point(spec.get("center_t", [0.0, 0.0, 0.0]), spec.get("center_y", [0.0] * dims.ydim))
    return fields.smooth_bump(center, float(spec.get("radius", 1.0)))


def _build_family(cfg, salt=0):
    dims = cfg.dims
    spec = cfg.balls
    centers = []
    if spec["include_origin"]:
        centers.append(identity(dims))
    centers += heisenberg.random_centers(
        dims, int(spec["n_random_centers"]), float(spec["center_scale"]),
        substream(cfg.seed, 0xFA4, salt).integers(2**62),
    )
    return heisenberg.make_ball_family(dims, centers, spec["radii"], cfg.budget("samples_per_ball"), cfg.seed + salt)


def _check(name, op, value, passed, tolerance, stderr=None):
    row = {"name": name, "op": op, "value": value, "tolerance": tolerance, "pass": bool(passed)}
    if stderr is not None:
        row["stderr"] = stderr
    return row


def _table(columns, rows):
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


# ---------------------------------------------------------------------------
# scenarios


def _scenario_group_geometry(cfg):
    dims = cfg.dims
    rng = substream(cfg.seed, 0x61)
    m = cfg.budget("triples")
    a = sample_ball(Ball(identity(dims), 2.0), m, rng.integers(2**62))
    b = sample_ball(Ball(identity(dims), 2.0), m, rng.integers(2**62))
    c = sample_ball(Ball(identity(dims), 2.0), m, rng.integers(2**62))
    assoc = heisenberg.gmul(heisenberg.gmul(a, b), c)
    assoc2 = heisenberg.gmul(a, heisenberg.gmul(b, c))
    err_assoc = float(
        max(np.abs(assoc.t - assoc2.t).max(), np.abs(assoc.y - assoc2.y).max())
    )
    prod = heisenberg.gmul(a, heisenberg.ginv(a))
    inv_err = float(max(np.abs(prod.t).max(), np.abs(prod.y).max()))
    d1 = heisenberg.rho(b, c)
    d2 = heisenberg.rho(heisenberg.gmul(a, b), heisenberg.gmul(a, c))
    err_left = float(np.max(np.abs(d1 - d2) / np.maximum(d1, 1e-30)))
    ctri = heisenberg.quasi_triangle_constant(dims, m, cfg.seed)
    vol_mc, vol_se = heisenberg.unit_ball_volume(dims, cfg.budget("volume_samples"), cfg.seed)
    vol_exact = heisenberg.unit_ball_volume_exact(dims)
    # annulus mass fraction against the exact volume law
    pts = sample_ball(Ball(identity(dims), 2.0), m, rng.integers(2**62))
    frac = float(np.mean(hnorm(pts) < 1.0))
    expect = 2.0 ** -dims.Q
    frac_se = math.sqrt(expect * (1 - expect) / m)
    checks = [
        _check("associativity_max_abs_err", "gmul", err_assoc, err_assoc <= 1e-12, 1e-12),
        _check("inverse_identity_max_err", "ginv", inv_err, inv_err <= 1e-13, 1e-13),
        _check("rho_left_invariance_rel_err", "rho", err_left, err_left <= 1e-12, 1e-12),
        _check("quasi_triangle_estimate", "quasi_triangle_constant", ctri, 0.9 <= ctri <= 1.0 + 1e-9, "[0.9, 1.0+1e-9]"),
        _check(
            "unit_ball_volume_mc_vs_exact",
            "unit_ball_volume",
            vol_mc,
            abs(vol_mc - vol_exact) <= 4 * vol_se,
            f"4*se={4 * vol_se:.3g}",
            stderr=vol_se,
        ),
        _check(
            "volume_scaling_fraction",
            "sample_ball",
            frac,
            abs(frac - expect) <= 4 * frac_se,
            f"expected {expect:.3g} +- 4*{frac_se:.2g}",
            stderr=frac_se,
        ),
    ]
    tables = {
        "geometry": _table(
            ["quantity", "value", "stderr_or_tol"],
            [
                ["associativity_max_abs_err", repr(err_assoc), repr(1e-12)],
                ["quasi_triangle_estimate", repr(ctri), repr(0.02)],
                ["unit_ball_volume_mc", repr(vol_mc), repr(vol_se)],
                ["unit_ball_volume_exact", repr(vol_exact), "0"],
            ],
        )
    }
    return checks, {"omega_Q": vol_exact, "C_rho_estimate": ctri, "Q": dims.Q}, tables


def _scenario_kernel_identities(cfg):
    dims = cfg.dims
    ke = kernel.build_kernel(dims, cfg.kernel_c)
    checks = []
    if dims.n == 2 and cfg.kernel_c == 1.0:
        expected = {(1, 0, 0, 0, 3): -12, (3, 0, 0, 0, 4): 24}
        got = {k: float(v) for k, v in ke.components[0].terms}
        series_ok = got == {k: float(v) for k, v in expected.items()}
        checks.append(_check("component1_series", "build_kernel", repr(sorted(got.items())), series_ok, "exact"))
        s1 = float(ke.eval_s(np.array([1.0, 0, 0, 0]))[0])
        s2 = float(ke.eval_s(np.array([2.0, 0, 0, 0]))[0])
        checks.append(_check("s_at_1", "build_kernel", s1, abs(s1 - 12.0) <= 1e-12, 1e-12))
        checks.append(_check("s_at_2", "build_kernel", s2, abs(s2 - 0.375) <= 1e-12, 1e-12))
    m = max(1000, cfg.budget("sphere_samples") // 25)
    rng = substream(cfg.seed, 0x62)
    g = sample_ball(Ball(identity(dims), 2.0), m, rng.integers(2**62))
    keep = hnorm(g) > 0.05
    g = g[keep]
    r = np.exp(rng.uniform(math.log(0.2), math.log(5.0), len(g)))
    k_dil = np.asarray(kernel.eval_K(ke, dilate(r, g)))
    k_ref = np.asarray(kernel.eval_K(ke, g)) * (r ** float(-dims.Q))[:, None]
    scale = np.abs(k_ref).max(axis=1)
    hom_err = float(np.max(np.abs(k_dil - k_ref).max(axis=1) / scale))
    checks.append(_check("kernel_homogeneity_rel_err", "eval_K", hom_err, hom_err <= 1e-10, 1e-10))
    gr_dil = kernel.horizontal_gradient_K(ke, dilate(r, g))
    gr_ref = kernel.horizontal_gradient_K(ke, g) * (r ** float(-(dims.Q + 1)))[:, None, None]
    gr_err = float(np.max(np.abs(gr_dil - gr_ref)) / np.max(np.abs(gr_ref)))
    checks.append(_check("gradient_homogeneity_rel_err", "horizontal_gradient_K", gr_err, gr_err <= 1e-10, 1e-10))
    # finite-difference oracle for the gradient at a fixed well-separated point
    g0 = point([0.3, -0.2, 0.5], [0.8, -0.1, 0.4, 0.2] + [0.0] * (dims.ydim - 4))
    grad = kernel.horizontal_gradient_K(ke, g0)
    h = 1e-5
    fd_err = 0.0
    for j in range(dims.ydim):
        e = np.zeros(dims.ydim)
        e[j] = 1.0
        kp = np.array(kernel.eval_K(ke, heisenberg.gmul(g0, point([0, 0, 0], h * e))).coords())
        km = np.array(kernel.eval_K(ke, heisenberg.gmul(g0, point([0, 0, 0], -h * e))).coords())
        fd = (kp - km) / (2 * h)
        an = np.array(grad[j].coords())
        fd_err = max(fd_err, float(np.max(np.abs(fd - an)) / np.max(np.abs(an))))
    checks.append(_check("gradient_fd_rel_err", "horizontal_gradient_K", fd_err, fd_err <= 1e-5, 1e-5))
    # shifted kernel converges to K
    gtest = point([0.2, 0.1, -0.3], [0.5, 0.2, 0.0, -0.1] + [0.0] * (dims.ydim - 4))
    kv = np.array(kernel.eval_K(ke, gtest).coords())
    ke_eps = np.array(kernel.eval_K_eps(ke, gtest, 1e-8 * float(hnorm(gtest)) ** 2).coords())
    eps_err = float(np.max(np.abs(kv - ke_eps)) / np.max(np.abs(kv)))
    checks.append(_check("shifted_kernel_limit_rel_err", "eval_K_eps", eps_err, eps_err <= 1e-6, 1e-6))
    # canonical serialization round-trip
    text = kernel.kernel_to_json(ke)
    ke2 = kernel.build_kernel(dims, cfg.kernel_c)
    checks.append(
        _check("kernel_json_canonical", "kernel_to_json", hashlib.sha256(text.encode()).hexdigest()[:16],
               text == kernel.kernel_to_json(ke2), "byte-equal")
    )
    tables = {
        "homogeneity": _table(
            ["check", "max_rel_err", "tolerance"],
            [
                ["kernel", repr(hom_err), repr(1e-10)],
                ["gradient", repr(gr_err), repr(1e-10)],
                ["gradient_fd", repr(fd_err), repr(1e-5)],
            ],
        )
    }
    return checks, {"kernel_c": cfg.kernel_c, "degree": -(2 * dims.n + 1)}, tables


def _scenario_kernel_bounds(cfg):
    dims = cfg.dims
    ke = kernel.build_kernel(dims, cfg.kernel_c)
    n1 = cfg.budget("sphere_samples")
    counts = [n1 // 2, n1]
    size = kernel.size_bound_scan(ke, counts, cfg.seed)
    size_delta = size[1][1] / size[0][1] - 1.0
    per_j, grad = kernel.gradient_bound_scan(ke, [c // 2 for c in counts], cfg.seed)
    grad_delta = grad[1][1] / grad[0][1] - 1.0
    hold = kernel.holder_quotient_scan(ke, counts, cfg.seed, side="left")
    hold_delta = hold[1][1] / hold[0][1] - 1.0
    hold_r = kernel.holder_quotient_scan(ke, [c // 2 for c in counts], cfg.seed, side="right")
    lower = kernel.lower_bound_scan(ke, 20, 16, cfg.seed)
    base = sample_unit_sphere(dims, 40, substream(cfg.seed, 0x63).integers(2**62))
    found = 0
    floors = []
    for i in range(40):
        scan = kernel.sign_constancy_scan(ke, Ball(base[i], 0.25), substream(cfg.seed, 0x64, i).integers(2**62))
        if scan.found and scan.floor > 0:
            found += 1
            floors.append(scan.floor)
    frac = found / 40.0
    checks = [
        _check("size_sup_stabilization", "size_bound_scan", size_delta, abs(size_delta) < 0.05, 0.05),
        _check("gradient_sup_stabilization", "gradient_bound_scan", grad_delta, abs(grad_delta) < 0.05, 0.05),
        _check("holder_sup_stabilization", "holder_quotient_scan", hold_delta, abs(hold_delta) < 0.10, 0.10),
        _check("lower_bound_positive", "lower_bound_scan", lower["c_global"], lower["c_global"] > 0, "> 0"),
        _check("sign_constancy_success", "sign_constancy_scan", frac, frac >= 0.95, ">= 0.95"),
        _check("sign_constancy_floor", "sign_constancy_scan", min(floors) if floors else 0.0,
               bool(floors) and min(floors) > 0, "> 0"),
    ]
    tables = {
        "bounds": _table(
            ["quantity", "value", "stabilization_delta"],
            [
                ["size_sup", repr(size[1][1]), repr(size_delta)],
                ["gradient_sup", repr(grad[1][1]), repr(grad_delta)],
                ["holder_sup_left", repr(hold[1][1]), repr(hold_delta)],
                ["holder_sup_right", repr(hold_r[1][1]), ""],
                ["theoremC_floor", repr(lower["c_global"]), ""],
                ["companion_floor", repr(min(floors) if floors else 0.0), ""],
            ],
        ),
        "gradient_per_direction": _table(
            ["j", "sup"], [[str(j), repr(float(v))] for j, v in enumerate(per_j)]
        ),
    }
    consts = {
        "size_sup": size[1][1],
        "gradient_sup": grad[1][1],
        "holder_sup": hold[1][1],
        "theoremC_floor": lower["c_global"],
        "companion_success_fraction": frac,
    }
    return checks, consts, tables


def _scenario_weights_and_norms(cfg):
    dims = cfg.dims
    p = cfg.morrey.p
    fam = _build_family(cfg)
    wu = fields.unit_weight(dims, p)
    ap_unit = analysis.ap_characteristic(wu, p, fam)
    w2 = fields.power_weight(2.0, dims, p)
    ap_pow = analysis.ap_characteristic(w2, p, fam)
    extra = [Ball(c, r) for c in heisenberg.random_centers(dims, 3, 20.0, cfg.seed + 5) for r in (0.1, 10.0)]
    ap_pow2 = analysis.ap_characteristic(w2, p, fam.extended(extra))
    delta_fam = abs(ap_pow2 - ap_pow) / ap_pow
    ecfg = EstimatorCfg(cfg.budget("samples_per_ball"), cfg.seed)
    db = analysis.doubling_check(w2, p, Ball(heisenberg.random_centers(dims, 1, 1.0, cfg.seed)[0], 0.5),
                                 [2.0, 4.0, 8.0], ecfg)
    ratios = [r["ratio"] for r in db["rows"]]
    a_div = dims.Q * (p - 1.0) + 0.5
    ladder = [
        analysis.ap_characteristic_stratified(a_div, p, dims, Ball(identity(dims), 1.0), depth, 4000, cfg.seed)
        for depth in (4, 8, 12)
    ]
    ladder_ok = ladder[1] / ladder[0] > 2.0 and ladder[2] / ladder[1] > 2.0
    stable = [
        analysis.ap_characteristic_stratified(2.0, p, dims, Ball(identity(dims), 1.0), depth, 4000, cfg.seed)
        for depth in (4, 8, 12)
    ]
    stable_delta = abs(stable[2] / stable[1] - 1.0)
    blog = fields.log_hnorm_field(dims)
    # half-decade radii and a dense center pool: the sup explores the
    # center-offset/radius configurations that carry the BMO mass
    half_decades = tuple(10.0 ** (e / 2.0) for e in range(-6, 7))

    def wide_family(seed):
        return heisenberg.make_ball_family(
            dims,
            [identity(dims)] + heisenberg.random_centers(dims, 24, 2.0, seed + 1),
            half_decades,
            cfg.budget("samples_per_ball"),
            seed,
        )

    bmo_log_1 = analysis.bmo_norm(blog, wide_family(cfg.seed + 1))
    bmo_log_2 = analysis.bmo_norm(blog, wide_family(cfg.seed + 2))
    wide = wide_family(cfg.seed + 1)
    bmo_reseed_delta = abs(bmo_log_2 - bmo_log_1) / bmo_log_1
    bhn = fields.power_hnorm_field(1.0, dims)
    radii_small = tuple(10.0**e for e in (-1, 0, 1))
    radii_big = tuple(10.0**e for e in (-1, 0, 1, 2))
    fam_s = heisenberg.make_ball_family(dims, [identity(dims)], radii_small, 2000, cfg.seed)
    fam_b = heisenberg.make_ball_family(dims, [identity(dims)], radii_big, 2000, cfg.seed)
    growth = analysis.bmo_norm(bhn, fam_b) / analysis.bmo_norm(bhn, fam_s)
    bmo2 = analysis.bmo_p_norm(blog, wide, 2.0)
    ratio_p = bmo2 / bmo_log_1
    # Morrey norm exactness on the unit indicator
    f_ind = fields.ball_indicator(Ball(identity(dims), 1.0))
    one_ball = heisenberg.BallFamily([Ball(identity(dims), 1.0)], cfg.budget("samples_per_ball"), cfg.seed)
    mor = analysis.morrey_norm(f_ind, wu, cfg.morrey, one_ball)
    mor_expect = heisenberg.unit_ball_volume_exact(dims) ** ((1.0 - cfg.morrey.kappa) / p)
    jn = analysis.jn_levelset_decay(blog, Ball(identity(dims), 1.0), np.linspace(0.15, 0.7, 10),
                                    EstimatorCfg(40_000, cfg.seed))
    checks = [
        _check("ap_unit_weight", "ap_characteristic", ap_unit, abs(ap_unit - 1.0) <= 0.005, 0.005),
        _check("ap_power_family_stability", "ap_characteristic", delta_fam, delta_fam < 0.05, 0.05),
        _check("doubling_single_constant", "doubling_check", db["C_hat"],
               all(r <= db["C_hat"] * (1 + 1e-12) for r in ratios) and ratios[-1] <= ratios[0],
               "ratios nonincreasing, below C_hat"),
        _check("ap_divergent_ladder", "ap_characteristic_stratified",
               ladder[2] / ladder[0], ladder_ok, "> 2x per refinement"),
        _check("ap_admissible_ladder_stable", "ap_characteristic_stratified", stable_delta, stable_delta < 0.05, 0.05),
        _check("bmo_log_finite_stable", "bmo_norm", bmo_reseed_delta, bmo_reseed_delta < 0.05, 0.05),
        _check("bmo_hnorm_growth", "bmo_norm", growth, growth >= 2.0, ">= 2x per added decade"),
        _check("bmo_p_ratio_bounded", "bmo_p_norm", ratio_p, 1.0 <= ratio_p <= 10.0, "[1, 10]"),
        _check("morrey_indicator_value", "morrey_norm", mor, abs(mor - mor_expect) / mor_expect < 0.01,
               f"within 1% of {mor_expect:.6g}"),
        _check("jn_exponential_decay_r2", "jn_levelset_decay", jn["fit"]["r_squared"],
               jn["fit"]["r_squared"] >= 0.95, ">= 0.95"),
    ]
    tables = {
        "weights": _table(
            ["quantity", "value", "stderr_or_tol"],
            [
                ["ap_unit", repr(ap_unit), repr(0.005)],
                ["ap_power_a2", repr(ap_pow), repr(0.05)],
                ["divergent_ladder_4", repr(ladder[0]), ""],
                ["divergent_ladder_8", repr(ladder[1]), ""],
                ["divergent_ladder_12", repr(ladder[2]), ""],
                ["bmo_log", repr(bmo_log_1), repr(bmo_reseed_delta)],
                ["jn_slope", repr(jn["fit"]["slope"]), repr(jn["fit"]["r_squared"])],
            ],
        ),
        "doubling": _table(
            ["lambda", "ratio", "stderr"],
            [[repr(r["lambda"]), repr(r["ratio"]), repr(r["stderr"])] for r in db["rows"]],
        ),
    }
    consts = {"ap_power_a2": ap_pow, "bmo_log": bmo_log_1, "C_hat_doubling": db["C_hat"],
              "jn_slope": jn["fit"]["slope"]}
    return checks, consts, tables


def _scenario_truncation_gap(cfg):
    dims = cfg.dims
    ke = kernel.build_kernel(dims, cfg.kernel_c)
    center = point([0.1, 0, 0], [0.5, 0, 0, 0] + [0.0] * (dims.ydim - 4))
    b = fields.smooth_bump(center, 0.8)
    f = fields.ball_indicator(Ball(identity(dims), 1.0))
    targets = sample_ball(Ball(center, 0.5), 16, substream(cfg.seed, 0x65).integers(2**62))
    qcfg = QuadratureCfg(source_samples=cfg.budget("source_samples"), seed=cfg.seed)
    etas = sorted(cfg.eta_grid)
    cs = []
    rows = []
    for e1, e2 in zip(etas[:-1], etas[1:]):
        res = operators.truncation_gap(ke, b, f, e1, e2, targets, qcfg)
        cs.append(res["C_fit"])
        rows.append([repr(e1), repr(e2), repr(res["C_fit"]), repr(res["grad_sup"])])
    spread = max(cs) / min(cs) if min(cs) > 0 else float("inf")
    checks = [
        _check("gap_constant_stability", "truncation_gap", spread, spread < 2.0, "< 2x across the eta grid"),
        _check("gap_constant_positive", "truncation_gap", min(cs), min(cs) > 0, "> 0"),
    ]
    tables = {"gap": _table(["eta1", "eta2", "C_fit", "grad_sup"], rows)}
    return checks, {"C_fits": cs}, tables


def _decade_ratio(cfg, ke, bfield, scale, w, fkind):
    dims = cfg.dims
    qcfg = QuadratureCfg(
        source_samples=cfg.budget("source_samples"),
        targets_per_ball=cfg.budget("targets_per_ball"),
        seed=cfg.seed,
    )
    fball = Ball(identity(dims), scale)
    if fkind == "indicator":
        f = fields.ball_indicator(fball)
    else:
        f = fields.sign_split_indicator(fball)
    dirs = sample_unit_sphere(dims, 2, substream(cfg.seed, 0xD1).integers(2**62))
    centers = [identity(dims)] + [dilate(scale * 1.5, dirs[i]) for i in range(2)]
    radii = [0.5 * scale, scale, 2.0 * scale]
    fam = heisenberg.make_ball_family(dims, centers, radii, cfg.budget("samples_per_ball"), cfg.seed)
    return operators.morrey_operator_ratio(ke, bfield, f, w, cfg.morrey, 0.1 * scale, fam, qcfg)


def _scenario_commutator_boundedness(cfg):
    dims = cfg.dims
    ke = kernel.build_kernel(dims, cfg.kernel_c)
    w = _build_weight(cfg)
    rows = []
    growths = {}
    for name, b in (("log-hnorm", fields.log_hnorm_field(dims)),
                    ("power-hnorm-0.5", fields.power_hnorm_field(0.5, dims))):
        per_decade = []
        for l in (0, 1, 2):
            vals = [_decade_ratio(cfg, ke, b, 10.0**l, w, fk) for fk in ("indicator", "sign-split")]
            per_decade.append(max(vals))
            rows.append([name, str(l), repr(per_decade[-1])])
        growths[name] = [per_decade[i + 1] / per_decade[i] for i in range(2)]
    log_growth = max(growths["log-hnorm"])
    pow_growth = min(growths["power-hnorm-0.5"])
    # far-field decay of the commutator against the size bound
    b = fields.smooth_bump(identity(dims), 1.0)
    f = fields.ball_indicator(Ball(identity(dims), 1.0))
    qcfg = QuadratureCfg(source_samples=cfg.budget("source_samples"), seed=cfg.seed)
    dirs = sample_unit_sphere(dims, 8, substream(cfg.seed, 0x66).integers(2**62))
    decs = []
    for i in range(8):
        for dist in (10.0, 30.0, 100.0):
            g = dilate(dist, dirs[i])
            v, _ = operators.apply_commutator(ke, b, f, 0.2, g, qcfg)
            decs.append(math.sqrt(float(v.norm_sq())) * dist**dims.Q)
    decay_const = max(decs)
    checks = [
        _check("bounded_symbol_growth", "morrey_operator_ratio", log_growth, log_growth < 1.3,
               "< 1.3x per decade"),
        _check("unbounded_symbol_growth", "morrey_operator_ratio", pow_growth, pow_growth >= 2.0,
               ">= 2x per decade"),
        _check("far_field_decay_bounded", "apply_commutator", decay_const, decay_const < float("inf"),
               "finite fitted constant"),
    ]
    tables = {"ratios": _table(["b", "decade", "max_ratio"], rows)}
    return checks, {"log_growth": log_growth, "pow_growth": pow_growth, "decay_const": decay_const}, tables


def _scenario_vmo_diagnostics(cfg):
    dims = cfg.dims
    vcfg = VmoCfg(seed=cfg.seed, samples=max(1000, cfg.budget("samples_per_ball") // 2))
    bump = fields.smooth_bump(identity(dims), 1.0)
    blog = fields.log_hnorm_field(dims)
    res_bump = analysis.vmo_diagnostics(bump, dims, vcfg)
    res_log = analysis.vmo_diagnostics(blog, dims, vcfg)
    sb = res_bump["summaries"]
    sl = res_log["summaries"]
    bump_ok = all(
        s["tail"] <= 0.1 * s["initial"] + 1e-12 for s in (sb["small"], sb["large"], sb["far"])
    )
    log_floor = sl["small"]["tail"] >= 0.5 * sl["small"]["initial"] > 0
    checks = [
        _check("smooth_bump_vanishing", "vmo_diagnostics", max(s["tail_over_initial"] for s in sb.values()),
               bump_ok, "tails below 10% of initial"),
        _check("log_small_scale_floor", "vmo_diagnostics", sl["small"]["tail_over_initial"],
               log_floor, "tail >= 50% of initial"),
    ]
    rows = []
    for nm, res in (("bump", res_bump), ("log-hnorm", res_log)):
        for key, curve in res["curves"].items():
            for r, v in zip(curve["radii"], curve["sup_oscillation"]):
                rows.append([nm, key, repr(float(r)), repr(float(v))])
    tables = {"curves": _table(["field", "curve", "radius", "sup_oscillation"], rows)}
    return checks, {"bump_max_tail_ratio": max(s["tail_over_initial"] for s in sb.values()),
                    "log_small_tail_ratio": sl["small"]["tail_over_initial"]}, tables


def _scenario_compactness_probe(cfg):
    dims = cfg.dims
    ke = kernel.build_kernel(dims, cfg.kernel_c)
    params = cfg.morrey
    wu = fields.unit_weight(dims, params.p)
    blog = fields.log_hnorm_field(dims)
    qcfg = QuadratureCfg(
        source_samples=cfg.budget("source_samples"),
        targets_per_ball=cfg.budget("targets_per_ball"),
        seed=cfg.seed,
        delta=0.01,
    )
    balls = [Ball(identity(dims), 2.0**-j) for j in range(1, 6)]
    sep = operators.separation_probe(ke, blog, balls, wu, params, qcfg)
    m = sep["matrix"]
    nballs = len(balls)
    dmin = [min(m[j, k] for k in range(nballs) if k != j) for j in range(nballs)]
    spread = (max(dmin) - min(dmin)) / max(dmin)
    # Kolmogorov-Riesz harness with a smooth symbol
    w = _build_weight(cfg)
    bump = fields.smooth_bump(identity(dims), 1.0)
    centers = [identity(dims)] + heisenberg.random_centers(dims, 2, 1.5, cfg.seed + 3)
    images = [
        CommutatorImage(ke, bump, fields.ball_indicator(Ball(c, 1.0)), 0.2, qcfg, salt=i)
        for i, c in enumerate(centers)
    ]
    fam = heisenberg.make_ball_family(dims, centers, (1.0, 2.0), cfg.budget("samples_per_ball"), cfg.seed + 4)
    kr = operators.kr_conditions(images, w, params, [20.0, 40.0, 80.0], [0.1, 0.05, 0.025], fam, qcfg)
    checks = [
        _check("separation_floor", "separation_probe", min(dmin), min(dmin) > 0, "> 0"),
        _check("separation_stability", "separation_probe", spread, spread < 0.30, "< 30% variation"),
        _check("kr_tail_decay_exponent", "kr_conditions", kr["tail"]["fitted_exponent"],
               kr["tail"]["fitted_exponent"] > 0, "> 0"),
        _check("kr_bounded", "kr_conditions", kr["bound"], np.isfinite(kr["bound"]), "finite"),
    ]
    rows = [[str(j), str(k), repr(float(m[j, k]))] for j in range(nballs) for k in range(nballs)]
    tables = {
        "separation_matrix": _table(["j", "k", "distance"], rows),
        "kr_tail": _table(
            ["M", "sup_norm"],
            [[repr(float(M)), repr(float(v))] for M, v in zip(kr["tail"]["M"], kr["tail"]["sup_norm"])],
        ),
    }
    consts = {
        "min_separation": min(dmin),
        "separation_spread": spread,
        "kr_tail_exponent": kr["tail"]["fitted_exponent"],
        "kr_reference_exponent": kr["tail"]["reference_exponent"],
        "violations": len(sep["violations"]),
    }
    return checks, consts, tables


def _scenario_f0_bounds(cfg):
    dims = cfg.dims
    ke = kernel.build_kernel(dims, cfg.kernel_c)
    params = cfg.morrey
    w = _build_weight(cfg)
    rng = substream(cfg.seed, 0x67)
    trials = cfg.budget("trials")
    ok_a0 = ok_int = ok_sign = ok_median = 0
    for i in range(trials):
        c = heisenberg.random_centers(dims, 1, 2.0, rng.integers(2**62))[0]
        B0 = Ball(c, float(rng.uniform(0.3, 2.0)))
        kind = i % 3
        if kind == 0:
            b = fields.log_hnorm_field(dims)
        elif kind == 1:
            b = fields.smooth_bump(c, B0.radius * 1.5)
        else:
            b = fields.power_hnorm_field(0.5, dims)
        qcfg = QuadratureCfg(source_samples=4000, seed=int(rng.integers(2**31)))
        f0 = operators.build_f0(ke, b, B0, w, params, qcfg)
        ok_a0 += abs(f0.a0) <= 0.5
        pts = sample_ball(B0, 8000, rng.integers(2**62))
        vals = f0.field(pts)
        bv = b(pts)
        vol = heisenberg.ball_volume(dims, B0.radius)
        intf0 = float(vals.mean()) * vol
        se_test = float(vals.std(ddof=1)) / math.sqrt(len(vals)) * vol
        se_build = f0.amplitude * vol * f0.a0_se
        ok_int += abs(intf0) <= 3.0 * math.hypot(se_test, se_build) + 1e-12
        ok_sign += bool(np.all(vals * (bv - f0.alpha) >= -1e-12))
        # sampled median conditions on the defining sample set
        mpts = sample_ball(B0, 4001, rng.integers(2**62))
        mv = b(mpts)
        alpha = float(np.sort(mv)[(len(mv) - 1) // 2])
        ok_median += (np.mean(mv > alpha) <= 0.5) and (np.mean(mv < alpha) <= 0.5)
    blog = fields.log_hnorm_field(dims)
    qcfg = QuadratureCfg(
        source_samples=cfg.budget("source_samples"),
        targets_per_ball=cfg.budget("targets_per_ball"),
        seed=cfg.seed,
        delta=0.01,
    )
    fb = operators.f0_bound_check(ke, blog, Ball(identity(dims), 1.0), w, params, (2, 3), qcfg)
    lows = [r.get("lower_normalized") for r in fb["rows"] if "lower_normalized" in r]
    checks = [
        _check("a0_bounded", "build_f0", ok_a0 / trials, ok_a0 == trials, "|a0| <= 1/2 always"),
        _check("f0_zero_mean", "build_f0", ok_int / trials, ok_int == trials, "within 3 sigma always"),
        _check("f0_sign_alignment", "build_f0", ok_sign / trials, ok_sign == trials, ">= 0 always"),
        _check("median_level_sets", "median", ok_median / trials, ok_median == trials, "both <= 1/2 always"),
        _check("f0_lower_floor", "f0_bound_check", fb["floor"], fb["floor"] > 0 and bool(lows), "> 0"),
        _check("f0_upper_cap_finite", "f0_bound_check", fb["cap"], np.isfinite(fb["cap"]), "finite"),
    ]
    rows = [
        [str(r["k"]), str(r["companion_found"]), repr(r.get("lower_normalized", float("nan"))),
         repr(r["upper_normalized"])]
        for r in fb["rows"]
    ]
    tables = {"f0_chain": _table(["k", "companion_found", "lower_normalized", "upper_normalized"], rows)}
    consts = {"floor": fb["floor"], "cap": fb["cap"], "oscillation": fb["oscillation"]}
    return checks, consts, tables


SCENARIOS = {
    "group-geometry": _scenario_group_geometry,
    "kernel-identities": _scenario_kernel_identities,
    "kernel-bounds": _scenario_kernel_bounds,
    "weights-and-norms": _scenario_weights_and_norms,
    "truncation-gap": _scenario_truncation_gap,
    "commutator-boundedness": _scenario_commutator_boundedness,
    "vmo-diagnostics": _scenario_vmo_diagnostics,
    "compactness-probe": _scenario_compactness_probe,
    "f0-bounds": _scenario_f0_bounds,
}


def run_scenario(config):
    """Execute one named scenario; returns its RunReport."""
    if isinstance(config, (str, dict)):
        config = validate_config(config)
    fn = SCENARIOS.get(config.scenario)
    if fn is None:
        raise ConfigError(f"scenario: unknown scenario {config.scenario!r}")
    checks, constants, tables = fn(config)
    echo = asdict(config)
    echo["morrey"] = {"p": config.morrey.p, "kappa": config.morrey.kappa}
    return RunReport(scenario=config.scenario, config=echo, checks=checks, constants=constants, tables=tables)


_SCHEMA_VERSION = "v1"


def _csv_text(name, table):
    lines = [f"# schema=qszego.{name}.{_SCHEMA_VERSION}"]
    lines.append(",".join(table["columns"]))
    for row in table["rows"]:
        lines.append(",".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


def emit_report(report, out_dir):
    """Write CSV tables + JSON summary into a fresh timestamped subdirectory.

    Returns the manifest (relative paths -> sha256) also stored in the
    summary.  File contents carry no timestamps, so reruns with identical
    config and seed produce byte-identical files.
    """
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = os.path.join(out_dir, f"{report.scenario}-{stamp}")
    run_dir = base
    k = 1
    while os.path.exists(run_dir):
        run_dir = f"{base}-{k}"
        k += 1
    os.makedirs(run_dir)
    manifest = {}
    for name, table in sorted(report.tables.items()):
        text = _csv_text(name, table)
        fname = f"{name}.csv"
        with open(os.path.join(run_dir, fname), "w", encoding="utf-8") as fh:
            fh.write(text)
        manifest[fname] = hashlib.sha256(text.encode()).hexdigest()
    summary = {
        "scenario": report.scenario,
        "config": report.config,
        "checks": report.checks,
        "constants": report.constants,
        "all_pass": report.all_pass,
        "manifest": manifest,
    }
    text = json.dumps(summary, indent=2, sort_keys=True, default=repr) + "\n"
    with open(os.path.join(run_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(text)
    manifest = dict(manifest)
    manifest["summary.json"] = hashlib.sha256(text.encode()).hexdigest()
    return {"dir": run_dir, "files": manifest}
