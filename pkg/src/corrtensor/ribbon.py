"""Hypercontractivity ribbon membership, boundary tracing and s*.

Membership verdicts are asymmetric: a positive objective value found at an
explicit witness proves non-membership, while failing to find one only
suggests membership. Besides global witnesses, non-membership is also
certified by a failure of second-order (local) convexity, which is an exact
eigenvalue test and catches violations that are invisible at finite tolerance
near the boundary, where the objective grows only cubically.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import aux
from .dualreg import fork_objective, g_fork_k2, g_side_info, side_info_objective
from .errors import DimensionMismatch, IndexOutOfRange, LambdaOutOfRange, UnknownMethod
from .localreg import local_perturbation_channel, top_direction
from .maxcorr import maximal_correlation_functions, rho
from .prob import JointDistribution, condition_on, marginal_array, mutual_information
from .results import MembershipResult, Verdict

DEFAULT_TOL = 1e-6
# explicit witnesses must beat floating-point noise in the recomputed objective
NOISE_FLOOR = 1e-14


@dataclass(frozen=True)
class LambdaVector:
    """Non-negative weights, optionally with theta coefficients on subsets."""

    lambdas: tuple[float, ...]
    theta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if any(x < 0 or not math.isfinite(x) for x in lam):
            raise LambdaOutOfRange("lambda values must be finite and non-negative")
        object.__setattr__(self, "lambdas", lam)

    @property
    def k(self) -> int:
        return len(self.lambdas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)


def _lambda_array(lambdas, k: int | None = None) -> np.ndarray:
    if isinstance(lambdas, LambdaVector):
        lambdas = lambdas.lambdas
    lam = LambdaVector(tuple(np.asarray(lambdas, dtype=float).reshape(-1))).as_array()
    if k is not None and lam.shape[0] != k:
        raise DimensionMismatch(f"expected {k} lambda values, got {lam.shape[0]}")
    return lam


# -- local certificates -----------------------------------------------------------

def _best_local_channel(obj: aux.AuxObjective, f: np.ndarray):
    """Scan the amplitude of a binary local perturbation along f; return (value, channel).

    ``f`` is indexed by the full helper alphabet and so is the returned channel.
    """
    amp = float(np.max(np.abs(f))) if f.size else 0.0
    if amp <= 0:
        return -math.inf, None
    best, best_W = -math.inf, None
    for scale in np.geomspace(1e-4, 0.999, 40):
        W = local_perturbation_channel(f, scale / amp)
        v = obj.recompute(W)
        if v > best:
            best, best_W = v, W
    return best, best_W


def _best_revelation_channel(obj: aux.AuxObjective, r: np.ndarray):
    """Scan the revelation probability for posterior r; return (value, full channel)."""
    best, best_W = -math.inf, None
    for e in np.geomspace(1e-8, 0.999, 48):
        W = obj.full_channel(aux.revelation_channel(obj, r, e))
        v = obj.recompute(W)
        if v > best:
            best, best_W = v, W
    return best, best_W


# -- multipartite ribbon via the auxiliary dual ---------------------------------

def side_info_member(dist: JointDistribution, helper, lambdas, targets=None, tol: float = DEFAULT_TOL,
                     restarts: int = 32, seed: int = 0, n_u: int | None = None,
                     local: bool = True) -> MembershipResult:
    """Sign of G = max_U -I(X_helper; U) + sum lambda_i I(X_i; U), with witnesses.

    Non-membership is certified by a channel whose recomputed objective
    exceeds ``tol`` or, failing that, by one of two small-perturbation
    tests, each confirmed by an explicit channel of positive value: second-order
    non-convexity (top eigenvalue of sum lambda_i A_i above one), or a positive
    first-order rate for channels that reveal a posterior r with vanishing
    probability, sum lambda_i D(r_i || p_i) - D(r_helper || p_helper) > 0.
    """
    obj = side_info_objective(dist, helper, lambdas, targets)
    lam = np.asarray(lambdas, dtype=float)
    g = g_side_info(dist, helper, lam, targets, restarts=restarts, seed=seed, n_u=n_u)
    value = obj.recompute(g.maximizer)
    diag = {"restarts": restarts, "seed": seed, "tol": tol, "optimizer_value": g.value}
    diag.update({k: v for k, v in g.diagnostics.items() if k in ("iterations", "n_u")})
    if value > tol:
        diag["certificate"] = "global"
        return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, value, g.maximizer, diag)
    if local:
        lmax, f = top_direction(dist, helper, lam, targets)
        diag["local_lambda_max"] = lmax
        if lmax > 1.0 + 1e-9:
            v, W = _best_local_channel(obj, f)
            if v > NOISE_FLOOR:
                diag["certificate"] = "local"
                return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, max(value, v), W, diag)
        rate, r = aux.maximize_revelation(obj, seed=seed)
        diag["revelation_rate"] = rate
        if rate > 0:
            v, W = _best_revelation_channel(obj, r)
            if v > NOISE_FLOOR:
                diag["certificate"] = "revelation"
                return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, max(value, v), W, diag)
    return MembershipResult(Verdict.HEURISTIC_MEMBER, max(value, 0.0), None, diag)


def hc_member_aux(dist: JointDistribution, lambdas, tol: float = DEFAULT_TOL, restarts: int = 32,
                  seed: int = 0, n_u: int | None = None, local: bool = True) -> MembershipResult:
    """Membership of lambda in the ribbon of (X_1..X_k) through G with the whole tuple as helper."""
    lam = _lambda_array(lambdas, dist.k)
    return side_info_member(dist, tuple(range(dist.k)), lam, None, tol, restarts, seed, n_u, local)


def hc_member_conditional(dist: JointDistribution, lambdas, z_index: int, tol: float = DEFAULT_TOL,
                          restarts: int = 32, seed: int = 0) -> MembershipResult:
    """Conditional ribbon: intersection over z with p(z) > 0 of the slice ribbons."""
    if not 0 <= z_index < dist.k:
        raise IndexOutOfRange(f"variable {z_index} not in range(0, {dist.k})")
    lam = _lambda_array(lambdas, dist.k - 1)
    pz = marginal_array(dist.p, (z_index,))
    worst = None
    slices = {}
    for z in np.flatnonzero(pz > 0):
        r = hc_member_aux(condition_on(dist, z_index, int(z)), lam, tol, restarts, seed)
        slices[int(z)] = r.margin
        if worst is None or (not r.is_member and worst.is_member) or \
                (r.is_member == worst.is_member and r.margin > worst.margin):
            worst = r
            worst_z = int(z)
    diag = dict(worst.diagnostics, slice=worst_z, slice_margins=slices)
    return MembershipResult(worst.verdict, worst.margin, worst.witness, diag)


def fork_member(dist: JointDistribution, l1: float, l2: float, tol: float = DEFAULT_TOL, restarts: int = 32,
                seed: int = 0) -> MembershipResult:
    """Sign of the fork functional on (X1, X2, X3); the constant U is tried first.

    With U constant the objective is max(l1, l2) I(X1; X2), so a dependent
    pair already certifies non-membership for every lambda away from zero.
    """
    obj = fork_objective(dist, l1, l2)
    W0 = np.ones((1, dist.cardinalities[2]))
    v0 = obj.recompute(W0)
    diag = {"restarts": restarts, "seed": seed, "tol": tol, "constant_value": v0}
    if v0 > tol:
        diag["certificate"] = "constant"
        return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, v0, W0, diag)
    g = g_fork_k2(dist, l1, l2, restarts=restarts, seed=seed)
    value = obj.recompute(g.maximizer)
    if value > tol:
        diag["certificate"] = "global"
        return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, value, g.maximizer, diag)
    return MembershipResult(Verdict.HEURISTIC_MEMBER, max(value, 0.0), None, diag)



# -- bipartite ribbon via function norms ------------------------------------------

def lp_norm(px: np.ndarray, f: np.ndarray, lam: float) -> float:
    """||f||_{1/lam} under px; lam = 0 gives the essential supremum."""
    f = np.abs(np.asarray(f, dtype=float))
    if lam == 0:
        return float(np.max(f[px > 0])) if np.any(px > 0) else 0.0
    return float(np.sum(px * f ** (1.0 / lam)) ** lam)


def norm_violation(pxy: np.ndarray, f: np.ndarray, g: np.ndarray, l1: float, l2: float) -> float:
    """E[f g] - ||f||_{1/l1} ||g||_{1/l2}."""
    return float(f @ pxy @ g) - lp_norm(pxy.sum(axis=1), f, l1) * lp_norm(pxy.sum(axis=0), g, l2)


def _softmax(a):
    e = np.exp(a - np.max(a))
    return e / e.sum()


def hc_member_norms(dist: JointDistribution, l1: float, l2: float, i: int = 0, j: int = 1,
                    tol: float = DEFAULT_TOL, restarts: int = 32, seed: int = 0,
                    local: bool = True) -> MembershipResult:
    """Search non-negative f, g with E[fg] > ||f||_{1/l1} ||g||_{1/l2}.

    f = (alpha / p_x)^{l1} and g = (beta / p_y)^{l2} with alpha, beta on the
    simplex have unit norms, so the search maximizes E[fg] - 1 over the two
    simplices (softmax coordinates, L-BFGS). A zero exponent means the
    sup-norm limit, where f = 1 is optimal for non-negative g.
    """
    from scipy.optimize import minimize

    for l in (l1, l2):
        if not 0 <= l <= 1 or not math.isfinite(l):
            raise LambdaOutOfRange("this characterization needs lambda in [0, 1]")
    pxy = marginal_array(dist.p, (i, j))
    px, py = pxy.sum(axis=1), pxy.sum(axis=0)
    sx, sy = np.flatnonzero(px > 0), np.flatnonzero(py > 0)
    P = pxy[np.ix_(sx, sy)]
    qx, qy = px[sx], py[sy]
    nx, ny = len(sx), len(sy)

    def fg(z):
        a, b = _softmax(z[:nx]), _softmax(z[nx:])
        return a, b, (a / qx) ** l1, (b / qy) ** l2

    def neg(z):
        a, b, f, g = fg(z)
        val = f @ P @ g - 1.0
        df = l1 * f / np.maximum(a, 1e-300) * (P @ g)
        dg = l2 * g / np.maximum(b, 1e-300) * (P.T @ f)
        ga = a * (df - a @ df)
        gb = b * (dg - b @ dg)
        return -val, -np.concatenate([ga, gb])

    rng = np.random.default_rng(seed)
    starts = [np.zeros(nx + ny)]
    for x in range(nx):
        for y in range(ny):
            z = np.zeros(nx + ny)
            z[x], z[nx + y] = 4.0, 4.0
            starts.append(z)
    starts += [rng.normal(scale=2.0, size=nx + ny) for _ in range(restarts)]
    best, best_z = -math.inf, None
    for z0 in starts:
        res = minimize(neg, z0, jac=True, method="L-BFGS-B", options={"maxiter": 300, "gtol": 1e-12})
        if -res.fun > best:
            best, best_z = -res.fun, res.x
    _, _, f_s, g_s = fg(best_z)
    f = np.zeros(dist.cardinalities[i])
    g = np.zeros(dist.cardinalities[j])
    f[sx], g[sy] = f_s, g_s
    value = norm_violation(pxy, f, g, l1, l2)
    diag = {"restarts": restarts, "seed": seed, "tol": tol, "starts": len(starts)}
    if value > tol:
        diag["certificate"] = "global"
        return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, value, (f, g), diag)
    if local and nx > 1 and ny > 1:
        r, a, b = maximal_correlation_functions(dist, i, j)
        diag["rho"] = r
        if r * r * l1 * l2 > (1 - l1) * (1 - l2) * (1 + 1e-9) + 1e-15:
            # f = 1 + e s a, g = 1 + e b / s, with the balance s chosen from the quadratic form
            ca = max((1 - l1) / l1, 1e-8)
            cb = max((1 - l2) / l2, 1e-8)
            s = (cb / ca) ** 0.25
            top = 1.0 / max(np.max(np.abs(s * a)), np.max(np.abs(b / s)))
            best_v, best_w = -math.inf, None
            for e in np.geomspace(1e-4, 0.999, 40) * top:
                ff, gg = 1 + e * s * a, 1 + e * b / s
                v = norm_violation(pxy, ff, gg, l1, l2)
                if v > best_v:
                    best_v, best_w = v, (ff, gg)
            if best_v > 0:
                diag["certificate"] = "local"
                return MembershipResult(Verdict.CERTIFIED_NON_MEMBER, max(value, best_v), best_w, diag)
    return MembershipResult(Verdict.HEURISTIC_MEMBER, max(value, 0.0), None, diag)


# -- boundary tracing ----------------------------------------------------------

@dataclass
class BoundaryPoint:
    """Crossing of the region boundary along t * direction, bracketed by [lo, hi]."""

    direction: tuple[float, ...]
    t: float
    lo: float
    hi: float
    margin_lo: float
    margin_hi: float
    bounded: bool = True
    anomalies: list = field(default_factory=list)


def _default_member(dist):
    return lambda lam: hc_member_aux(dist, lam)


def hc_boundary_sample(dist: JointDistribution, directions, resolution: float = 1e-3,
                       t_max: float | None = None, member=None, check_points: int = 4) -> list[BoundaryPoint]:
    """Bisection along rays from the origin for the ribbon boundary.

    ``member`` maps a lambda vector to a :class:`MembershipResult` (default:
    :func:`hc_member_aux`). Rays are expected to leave the region once; a few
    extra points on each side of the crossing are probed and any verdict that
    contradicts this is recorded in ``anomalies``.
    """
    member = member or _default_member(dist)
    out = []
    for d in directions:
        d = np.asarray(d, dtype=float)
        if np.any(d < 0) or not np.any(d > 0):
            raise LambdaOutOfRange("directions must be nonzero and non-negative")
        d = d / np.linalg.norm(d)
        tm = t_max if t_max is not None else 1.05 / float(np.max(d))
        r_hi = member(tm * d)
        if r_hi.is_member:
            out.append(BoundaryPoint(tuple(d), math.inf, tm, math.inf, r_hi.margin, math.nan, False))
            continue
        lo, hi, m_lo, m_hi = 0.0, tm, 0.0, r_hi.margin
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            r = member(mid * d)
            if r.is_member:
                lo, m_lo = mid, r.margin
            else:
                hi, m_hi = mid, r.margin
        anomalies = []
        for q in range(1, check_points + 1):
            t_in = lo * q / (check_points + 1)
            if t_in > 0 and not member(t_in * d).is_member:
                anomalies.append({"t": t_in, "expected": "member"})
            t_out = hi + (tm - hi) * q / (check_points + 1)
            if t_out > hi and member(t_out * d).is_member:
                anomalies.append({"t": t_out, "expected": "non-member"})
        out.append(BoundaryPoint(tuple(d), 0.5 * (lo + hi), lo, hi, m_lo, m_hi, True, anomalies))
    return out


def boundary_csv(points: Sequence[BoundaryPoint]) -> str:
    """CSV with direction components, crossing t, bracket and verdict margins (17 digits)."""
    if not points:
        return ""
    k = len(points[0].direction)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"d{i + 1}" for i in range(k)] + ["t", "lo", "hi", "margin_lo", "margin_hi", "anomalies"])
    fmt = lambda x: format(float(x), ".17g")
    for p in points:
        w.writerow([fmt(x) for x in p.direction] + [fmt(p.t), fmt(p.lo), fmt(p.hi), fmt(p.margin_lo),
                                                     fmt(p.margin_hi), len(p.anomalies)])
    return buf.getvalue()


def unit_directions(n: int, k: int = 2) -> np.ndarray:
    """n evenly spread unit directions in the closed non-negative quadrant (k = 2 only)."""
    if k != 2:
        raise DimensionMismatch("evenly spaced directions are provided for k = 2")
    th = np.linspace(0.0, math.pi / 2, n)
    return np.stack([np.cos(th), np.sin(th)], axis=1)


# -- s* ------------------------------------------------------------------------

def _pair(dist, i, j):
    if i == j:
        raise IndexOutOfRange("i and j must differ")
    for v in (i, j):
        if not 0 <= v < dist.k:
            raise IndexOutOfRange(f"variable {v} not in range(0, {dist.k})")
    return JointDistribution(marginal_array(dist.p, (i, j)))


def _s_star_direct(d: JointDistribution, restarts: int, seed: int):
    r, _, g = maximal_correlation_functions(d, 0, 1)
    num = aux.ObjectiveBuilder(d, (1,)).add_mi(1.0, (0,)).build()
    den = aux.ObjectiveBuilder(d, (1,)).add_mi(1.0, (1,)).build()
    res = aux.maximize_ratio(num, den, restarts=restarts, seed=seed, directions=[g[num.support]])
    return max(res.value, r * r), {"ratio_search": res.value, "rho_squared": r * r,
                                   "channel": res.channel}


def _ribbon_b(d: JointDistribution, t: float, tol: float, resolution: float, restarts: int, seed: int):
    """Largest lambda_j with (lambda_i, lambda_j) = (t, b) in the ribbon, by bisection on [1 - t, 1]."""
    lo, hi = 1.0 - t, 1.0
    if hc_member_aux(d, [t, hi], tol=tol, restarts=restarts, seed=seed).is_member:
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if hc_member_aux(d, [t, mid], tol=tol, restarts=restarts, seed=seed).is_member:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _s_star_ribbon(d: JointDistribution, restarts: int, seed: int, t: float = 2e-3,
                   tol: float = 1e-12, resolution: float = 1e-10):
    # (1 - b(t)) / t is non-decreasing in t; extrapolate t -> 0 from t and t / 2
    r1 = (1.0 - _ribbon_b(d, t, tol, resolution, restarts, seed)) / t
    r2 = (1.0 - _ribbon_b(d, t / 2, tol, resolution, restarts, seed)) / (t / 2)
    rr = rho(d, 0, 1) ** 2
    return max(2 * r2 - r1, rr), {"ratio_t": r1, "ratio_t_half": r2, "t": t, "rho_squared": rr}


def _s_star_lce(d: JointDistribution, step: float | None = None, tol: float = 1e-12, iters: int = 44):
    n = int(np.count_nonzero(marginal_array(d.p, (1,)) > 0))
    if step is None:
        step = 1e-4 if n <= 2 else (0.01 if n == 3 else 0.05)
    r = rho(d, 0, 1)

    def touches(lam):
        obj = aux.ObjectiveBuilder(d, (1,)).add_mi(1.0, (0,)).add_mi(-lam, (1,)).build()
        return aux.grid_maximize(obj, step=step).diagnostics.get("lp_value", 0.0) <= tol

    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if touches(mid):
            hi = mid
        else:
            lo = mid
    return max(hi, r * r), {"grid_value": hi, "rho_squared": r * r, "grid_step": step}


def s_star(dist: JointDistribution, i: int = 0, j: int = 1, method: str = "direct",
           restarts: int = 32, seed: int = 0, return_details: bool = False):
    """sup over p(u | x_j) of I(X_i; U) / I(X_j; U).

    ``direct`` runs a ratio ascent; ``ribbon`` reads the slope of the ribbon
    boundary at the corner (lambda_i, lambda_j) = (0, 1); ``lce`` finds the
    smallest lambda at which H(X_i) - lambda H(X_j), as a function of the
    X_j marginal, touches its lower convex envelope (simplex grid). Each route
    is combined with the exact second-order bound s* >= rho^2, which is the
    limit of vanishing perturbations and is not attained by any fixed channel.
    """
    d = _pair(dist, i, j)
    if mutual_information(d, (0,), (1,)) <= 1e-13:
        val, det = 0.0, {"independent": True}
    elif method == "direct":
        val, det = _s_star_direct(d, restarts, seed)
    elif method == "ribbon":
        val, det = _s_star_ribbon(d, restarts, seed)
    elif method == "lce":
        val, det = _s_star_lce(d)
    else:
        raise UnknownMethod(method)
    val = min(max(val, 0.0), 1.0)
    return (val, det) if return_details else val


def s_star_conditional(dist: JointDistribution, i: int, j: int, z_index: int, method: str = "direct",
                       restarts: int = 32, seed: int = 0) -> float:
    """max over z with p(z) > 0 of s* on the slice."""
    if len({i, j, z_index}) != 3:
        raise IndexOutOfRange("three distinct indices required")
    pz = marginal_array(dist.p, (z_index,))
    ii, jj = i - (i > z_index), j - (j > z_index)
    best = 0.0
    for z in np.flatnonzero(pz > 0):
        best = max(best, s_star(condition_on(dist, z_index, int(z)), ii, jj, method, restarts, seed))
    return best


def s_star_conditional_ribbon(dist: JointDistribution, i: int, j: int, z_index: int,
                              restarts: int = 32, seed: int = 0, t: float = 2e-3,
                              tol: float = 1e-12, resolution: float = 1e-10) -> float:
    """inf of (1 - lambda_j) / lambda_i over the conditional ribbon, read at the corner."""
    if len({i, j, z_index}) != 3:
        raise IndexOutOfRange("three distinct indices required")
    d = JointDistribution(marginal_array(dist.p, (i, j, z_index)))

    def b(tt):
        lo, hi = 1.0 - tt, 1.0
        if hc_member_conditional(d, [tt, hi], 2, tol, restarts, seed).is_member:
            return hi
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if hc_member_conditional(d, [tt, mid], 2, tol, restarts, seed).is_member:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    r1 = (1.0 - b(t)) / t
    r2 = (1.0 - b(t / 2)) / (t / 2)
    return min(max(2 * r2 - r1, 0.0), 1.0)


# -- secure simulation ----------------------------------------------------------

def secure_sim_precondition(dist_x1x2z: JointDistribution, dist_y1y2: JointDistribution,
                            lambda_samples, tol: float = DEFAULT_TOL, restarts: int = 32,
                            seed: int = 0) -> dict:
    """Look for lambda in the conditional ribbon of (X1, X2 | Z) but outside the ribbon of (Y1, Y2).

    A witness shows that (Y1, Y2) cannot be simulated securely from (X1, X2, Z).
    Without one the test is inconclusive ("pass").
    """
    if dist_x1x2z.k != 3:
        raise DimensionMismatch("source must have three variables (X1, X2, Z)")
    if dist_y1y2.k != 2:
        raise DimensionMismatch("target must have two variables")
    checked = []
    for lam in lambda_samples:
        lam = _lambda_array(lam, 2)
        src = hc_member_conditional(dist_x1x2z, lam, 2, tol, restarts, seed)
        if not src.is_member:
            checked.append({"lambda": lam.tolist(), "source": src.verdict.value})
            continue
        tgt = hc_member_aux(dist_y1y2, lam, tol, restarts, seed)
        checked.append({"lambda": lam.tolist(), "source": src.verdict.value, "target": tgt.verdict.value,
                        "target_margin": tgt.margin})
        if tgt.verdict is Verdict.CERTIFIED_NON_MEMBER:
            return {"status": "witness", "witness_lambda": lam.tolist(), "target_margin": tgt.margin,
                    "source_margin": src.margin, "checked": checked}
    return {"status": "pass", "witness_lambda": None, "checked": checked}
