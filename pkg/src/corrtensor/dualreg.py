"""Dual functionals of rate regions.

Given a rate region and a linear functional F(R) = sum lambda_i R_i +
sum theta_S H(X_S), G is the maximum of F over the region. For finite point
sets this is exact; for the source-coding regions with one auxiliary variable
the maximization over rates collapses to a maximization over p(u | x_helper),
done by :mod:`corrtensor.aux`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import aux
from .errors import (AlternativeFormInvalid, DimensionMismatch, GZeroViolated, IndexOutOfRange,
                     LambdaOutOfRange, UnboundedObjective, UnknownMethod)
from .localreg import check_lambdas, default_targets, normalize_helper, top_direction
from .prob import JointDistribution, entropy, mutual_information


@dataclass(frozen=True)
class RatePointSet:
    """Finite set of rate tuples plus recession directions (default: coordinate axes)."""

    points: tuple[tuple[float, ...], ...]
    recession: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        pts = tuple(tuple(float(x) for x in p) for p in self.points)
        if not pts:
            raise DimensionMismatch("at least one rate point is required")
        m = len(pts[0])
        if any(len(p) != m for p in pts):
            raise DimensionMismatch("rate points must share one dimension")
        if any(not math.isfinite(x) for p in pts for x in p):
            raise ValueError("rate points must be finite")
        object.__setattr__(self, "points", pts)
        if self.recession is None:
            rec = tuple(tuple(1.0 if a == b else 0.0 for b in range(m)) for a in range(m))
        else:
            rec = tuple(tuple(float(x) for x in d) for d in self.recession)
            if any(len(d) != m for d in rec):
                raise DimensionMismatch("recession directions must match the rate dimension")
        object.__setattr__(self, "recession", rec)

    @property
    def dimension(self) -> int:
        return len(self.points[0])

    def scaled(self, n: float) -> "RatePointSet":
        return RatePointSet(tuple(tuple(n * x for x in p) for p in self.points), self.recession)


@dataclass(frozen=True)
class DualObjective:
    """F(R) = sum lambda_i R_i + sum theta_S H(X_S).

    ``free_lambdas`` and ``free_thetas`` record which coefficients are the
    region's free variables; the remaining ones are fixed. ``entropies`` maps
    every subset with a theta coefficient to H(X_S).
    """

    lambdas: tuple[float, ...]
    thetas: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    entropies: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    free_lambdas: frozenset = frozenset()
    free_thetas: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        for S in self.thetas:
            if not S:
                raise ValueError("theta subsets must be non-empty")
            if S not in self.entropies:
                raise DimensionMismatch(f"missing entropy for subset {S}")
        if any(not 0 <= i < len(self.lambdas) for i in self.free_lambdas):
            raise IndexOutOfRange("free lambda index out of range")
        if any(S not in self.thetas for S in self.free_thetas):
            raise IndexOutOfRange("free theta subset has no coefficient")

    @property
    def constant(self) -> float:
        return math.fsum(c * self.entropies[S] for S, c in self.thetas.items())

    def __call__(self, rates: Sequence[float]) -> float:
        return math.fsum([l * r for l, r in zip(self.lambdas, rates)] + [self.constant])

    @classmethod
    def from_distribution(cls, dist: JointDistribution, lambdas, thetas=None, **kw):
        thetas = dict(thetas or {})
        ents = {tuple(S): entropy(dist, tuple(S)) for S in thetas}
        return cls(tuple(lambdas), {tuple(S): float(c) for S, c in thetas.items()}, ents, **kw)


@dataclass
class GEvaluation:
    """Value of a dual functional with its maximizer.

    ``maximizer`` is a channel p(u | x_helper) (rows u, columns helper symbols)
    or a rate point. ``lower_bound_only`` is True when found by local search.
    """

    value: float
    maximizer: object
    lower_bound_only: bool
    diagnostics: dict = field(default_factory=dict)


def generic_dual_g(rate_points: RatePointSet, objective: DualObjective) -> GEvaluation:
    """Exact maximum of F over a finite point set plus its recession cone."""
    if len(objective.lambdas) != rate_points.dimension:
        raise DimensionMismatch("objective and rate points differ in dimension")
    for d in rate_points.recession:
        if math.fsum(l * x for l, x in zip(objective.lambdas, d)) > 0:
            raise UnboundedObjective("a positive coefficient multiplies an unbounded rate direction")
    vals = [objective(p) for p in rate_points.points]
    best = int(np.argmax(vals))
    return GEvaluation(float(vals[best]), rate_points.points[best], False, {"evaluated": len(vals)})


# -- auxiliary-variable functionals -------------------------------------------------

def _run(obj: aux.AuxObjective, method: str, restarts: int, seed: int, n_u, grid_step: float,
         directions=()) -> GEvaluation:
    if method == "optimizer":
        r = aux.maximize(obj, n_u=n_u, restarts=restarts, seed=seed, directions=directions)
        lower = True
    elif method == "grid":
        r = aux.grid_maximize(obj, step=grid_step)
        lower = True
    elif method == "best":
        r1 = aux.maximize(obj, n_u=n_u, restarts=restarts, seed=seed, directions=directions)
        r2 = aux.grid_maximize(obj, step=grid_step)
        r = r1 if r1.value >= r2.value else r2
        r.diagnostics = {"optimizer": r1.value, "grid": r2.value, **r2.diagnostics, **r1.diagnostics}
        lower = True
    else:
        raise UnknownMethod(method)
    value = max(r.value, obj.value(np.ones((1, obj.n_helper))))
    return GEvaluation(float(value), r.channel, lower, dict(r.diagnostics, method=method))


def side_info_objective(dist: JointDistribution, helper, lambdas, targets=None) -> aux.AuxObjective:
    """J(U) = -I(X_helper; U) + sum lambda_i I(X_i; U)."""
    helper = normalize_helper(dist, helper)
    targets = default_targets(dist, helper) if targets is None else tuple(targets)
    lam = check_lambdas(lambdas, targets)
    b = aux.ObjectiveBuilder(dist, helper).add_mi(-1.0, helper)
    for l, t in zip(lam, targets):
        b.add_mi(float(l), (t,))
    return b.build()


def g_side_info(dist: JointDistribution, helper_index, lambdas, targets=None, method: str = "optimizer",
                restarts: int = 32, seed: int = 0, n_u: int | None = None,
                grid_step: float = 0.02) -> GEvaluation:
    """max over p(u | x_helper) of -I(X_helper; U) + sum lambda_i I(X_i; U); always >= 0.

    ``helper_index`` is one variable or a tuple (a grouped helper). The local
    top eigenfunction of sum lambda_i A_i seeds the search.
    """
    helper = normalize_helper(dist, helper_index)
    obj = side_info_objective(dist, helper, lambdas, targets)
    lam = np.asarray(lambdas, dtype=float)
    directions = []
    if np.any(lam > 0):
        _, f = top_direction(dist, helper, lam, targets)
        directions.append(f[obj.support])
    return _run(obj, method, restarts, seed, n_u, grid_step, directions)


def g_helper(dist: JointDistribution, i: int, j: int, lam: float, method: str = "optimizer",
             restarts: int = 32, seed: int = 0, n_u: int | None = None,
             grid_step: float = 0.02) -> GEvaluation:
    """max over p(u | x_j) of lam I(X_i; U) - I(X_j; U)."""
    if lam < 0 or not math.isfinite(lam):
        raise LambdaOutOfRange("lambda must be non-negative")
    if i == j:
        raise IndexOutOfRange("i and j must differ")
    return g_side_info(dist, j, [lam], targets=(i,), method=method, restarts=restarts,
                       seed=seed, n_u=n_u, grid_step=grid_step)


def fork_objective(dist: JointDistribution, l1: float, l2: float, form: str = "standard") -> aux.AuxObjective:
    """Objective over p(u | x_3) for the fork region on three variables (X1, X2, X3)."""
    if dist.k != 3:
        raise DimensionMismatch("fork functional needs exactly three variables")
    if l1 < 0 or l2 < 0:
        raise LambdaOutOfRange("lambda values must be non-negative")
    m = max(l1, l2)
    b = aux.ObjectiveBuilder(dist, (2,)).add_mi(-1.0, (2,))
    if form == "standard":
        b.add_mi(l1, (0,)).add_mi(l2, (1,))
        b.add_cond_mi_given_u(m, (0,), (1,))
    elif form == "alternative":
        if mutual_information(dist, (0,), (1,)) > 1e-9:
            raise AlternativeFormInvalid("alternative form needs I(X1;X2) = 0")
        b.add_mi(min(0.0, l1 - l2), (0,)).add_mi(min(0.0, l2 - l1), (1,)).add_mi(m, (0, 1))
    else:
        raise UnknownMethod(form)
    return b.build()


def g_fork_k2(dist: JointDistribution, l1: float, l2: float, form: str = "standard",
              method: str = "optimizer", restarts: int = 32, seed: int = 0,
              n_u: int | None = None, grid_step: float = 0.02) -> GEvaluation:
    """Fork functional: -I(X3;U) + l1 I(X1;U) + l2 I(X2;U) + max(l1,l2) I(X1;X2|U)."""
    obj = fork_objective(dist, l1, l2, form)
    directions = []
    if max(l1, l2) > 0:
        _, f = top_direction(dist, 2, [max(l1, l2)] * 2, targets=(0, 1))
        directions.append(f[obj.support])
    return _run(obj, method, restarts, seed, n_u, grid_step, directions)


def fork_corner_points(dist: JointDistribution, channel: np.ndarray) -> RatePointSet:
    """Corner points (R1, R2, R3) of the fork region for a given p(u | x_3)."""
    a = aux.augment(dist, (2,), np.asarray(channel, dtype=float))
    u = 3

    def H(S):
        return entropy(a, tuple(S))

    i3u = H((2,)) + H((u,)) - H((2, u))
    c1 = (H((0, 1, u)) - H((1, u)), H((1, u)) - H((u,)), i3u)
    c2 = (H((0, u)) - H((u,)), H((0, 1, u)) - H((0, u)), i3u)
    return RatePointSet((c1, c2))


def fork_dual_objective(dist: JointDistribution, l1: float, l2: float) -> DualObjective:
    """F(R) = -l1 R1 - l2 R2 - R3 + l1 H(X1) + l2 H(X2)."""
    return DualObjective.from_distribution(dist, (-l1, -l2, -1.0), {(0,): l1, (1,): l2},
                                           free_lambdas=frozenset({0, 1}))


# -- initial efficiency -----------------------------------------------------------

def initial_efficiency(rate_points: RatePointSet, num_rate: int | Callable, den_rate: int,
                       zero_tol: float = 1e-12) -> float:
    """max over points with den > zero_tol of num / den.

    ``num_rate`` is a coordinate index or a callable mapping a point to the
    numerator value (e.g. g(R) = h(0) - R_1 for the helper problem).
    """
    num = (lambda p: p[num_rate]) if isinstance(num_rate, (int, np.integer)) else num_rate
    best = 0.0
    for p in rate_points.points:
        n, d = num(p), p[den_rate]
        if abs(d) <= zero_tol:
            if n > zero_tol:
                raise GZeroViolated(f"point {p} has zero denominator but numerator {n}")
            continue
        best = max(best, n / d)
    return best


def helper_rate_points(dist: JointDistribution, i: int, j: int, channels) -> RatePointSet:
    """Points (H(X_i | U), I(X_j; U)) of the one-helper region for channels p(u | x_j)."""
    pts = []
    for W in channels:
        a = aux.augment(dist, (j,), np.asarray(W, dtype=float))
        u = a.k - 1
        pts.append((entropy(a, (i, u)) - entropy(a, (u,)),
                    max(mutual_information(a, (j,), (u,)), 0.0)))
    return RatePointSet(tuple(pts))
