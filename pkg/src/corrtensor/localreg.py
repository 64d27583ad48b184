"""Local (second-order) version of the side-information region.

For a helper variable X_h and targets X_i, the operator A_i acts on mean-zero
functions of X_h and has quadratic form Var_{X_i}[E[f(X_h) | X_i]]. A vector
lambda is locally admissible iff Var[f] >= sum_i lambda_i f'A_i f for all f,
i.e. iff the top eigenvalue of sum_i lambda_i A_i is at most one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, InvalidPerturbation, LambdaOutOfRange
from .linalg import jacobi_eigh
from .prob import JointDistribution, centered_normalized, entropy, marginal_array
from .results import MembershipResult, Verdict

LN2 = math.log(2.0)


def normalize_helper(dist: JointDistribution, helper) -> tuple[int, ...]:
    helper = (helper,) if isinstance(helper, (int, np.integer)) else tuple(helper)
    if not helper:
        raise IndexOutOfRange("helper must name at least one variable")
    for v in helper:
        if not 0 <= v < dist.k:
            raise IndexOutOfRange(f"variable {v} not in range(0, {dist.k})")
    return tuple(int(v) for v in helper)


def default_targets(dist: JointDistribution, helper: tuple[int, ...]) -> tuple[int, ...]:
    """Targets are all non-helper variables, or all variables when the helper is a group."""
    if len(helper) > 1:
        return tuple(range(dist.k))
    return tuple(v for v in range(dist.k) if v not in helper)


def check_lambdas(lambdas: Sequence[float], targets: Sequence[int]) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if lam.shape[0] != len(targets):
        raise DimensionMismatch(f"expected {len(targets)} lambda values, got {lam.shape[0]}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise LambdaOutOfRange("lambda values must be finite and non-negative")
    return lam


def _mean_zero_basis(sqrt_p: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of sqrt_p (columns), via a Householder reflection."""
    n = len(sqrt_p)
    e = np.zeros(n)
    e[0] = 1.0
    v = sqrt_p - e
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        H = np.eye(n)
    else:
        v = v / nv
        H = np.eye(n) - 2.0 * np.outer(v, v)
    return H[:, 1:]


@dataclass(frozen=True, eq=False)
class CondExpOperator:
    """Matrix of f -> Var_{X_i} E[f | X_i] on mean-zero functions of the helper.

    Coordinates c correspond to f = (basis @ c) / sqrt(p_h) on the helper
    support, so that Var[f] = |c|^2.
    """

    A: np.ndarray
    basis: np.ndarray
    sqrt_p: np.ndarray
    support: np.ndarray
    helper_cardinality: int

    def quadratic_form(self, f: np.ndarray) -> float:
        """Var_{X_i}[E[f|X_i]] for a mean-zero f given on the full helper alphabet."""
        c = self.coordinates(f)
        return float(c @ self.A @ c)

    def coordinates(self, f: np.ndarray) -> np.ndarray:
        g = np.asarray(f, dtype=float)[self.support] * self.sqrt_p
        return self.basis.T @ g

    def function(self, c: np.ndarray) -> np.ndarray:
        f = np.zeros(self.helper_cardinality)
        f[self.support] = (self.basis @ c) / self.sqrt_p
        return f


def cond_exp_operator(dist: JointDistribution, helper_index, i: int) -> CondExpOperator:
    helper = normalize_helper(dist, helper_index)
    if not 0 <= i < dist.k:
        raise IndexOutOfRange(f"variable {i} not in range(0, {dist.k})")
    from .aux import _conditional_kernel

    M = _conditional_kernel(dist, (i,), helper)  # p(x_i, x_h)
    # Q V = (Q - sqrt(p_i) sqrt(p_h)^T) V, and the centered matrix is formed exactly
    D, _, sh, _, ph = centered_normalized(M)
    sqrt_p = np.sqrt(ph)
    V = _mean_zero_basis(sqrt_p)
    DV = D @ V
    A = DV.T @ DV
    A = 0.5 * (A + A.T)
    return CondExpOperator(A, V, sqrt_p, sh, M.shape[1])


def combined_operator(dist: JointDistribution, helper_index, lambdas, targets=None):
    helper = normalize_helper(dist, helper_index)
    targets = default_targets(dist, helper) if targets is None else tuple(targets)
    lam = check_lambdas(lambdas, targets)
    ops = [cond_exp_operator(dist, helper, t) for t in targets]
    n = ops[0].A.shape[0]
    S = np.zeros((n, n))
    for l, op in zip(lam, ops):
        S = S + l * op.A
    return S, ops[0]


def top_direction(dist: JointDistribution, helper_index, lambdas, targets=None):
    """(lambda_max, f) for sum lambda_i A_i; f is a unit-variance mean-zero helper function."""
    S, op = combined_operator(dist, helper_index, lambdas, targets)
    if S.shape[0] == 0:
        return 0.0, np.zeros(op.helper_cardinality)
    w, v = jacobi_eigh(S)
    return float(w[-1]), op.function(v[:, -1])


def lambda_member(dist: JointDistribution, helper_index, lambdas, targets=None,
                  tol: float = 1e-10) -> MembershipResult:
    """Exact membership: lambda_max(sum lambda_i A_i) <= 1 + tol."""
    lmax, f = top_direction(dist, helper_index, lambdas, targets)
    if lmax <= 1.0 + tol:
        return MembershipResult(Verdict.MEMBER, lmax - 1.0, None, {"lambda_max": lmax})
    return MembershipResult(Verdict.NON_MEMBER, lmax - 1.0, f, {"lambda_max": lmax})


def lambda_boundary(dist: JointDistribution, helper_index, direction, targets=None) -> float:
    """Ray crossing t* = 1 / lambda_max(sum d_i A_i); +inf when the operator vanishes."""
    d = np.asarray(direction, dtype=float)
    if np.all(d == 0):
        raise LambdaOutOfRange("direction must be nonzero")
    lmax, _ = top_direction(dist, helper_index, d, targets)
    if lmax <= 1e-15:
        return math.inf
    return 1.0 / lmax


def local_perturbation_channel(f: np.ndarray, eps: float) -> np.ndarray:
    """Binary channel p(u=0|h) = (1 + eps f)/2, p(u=1|h) = (1 - eps f)/2."""
    f = np.asarray(f, dtype=float)
    if np.any(1 + eps * np.abs(f) < 0) or eps * np.max(np.abs(f)) > 1 + 1e-12:
        raise InvalidPerturbation("eps too large for a valid channel")
    return np.vstack([(1 + eps * f) / 2, (1 - eps * f) / 2])


# -- second-derivative check ------------------------------------------------------

def _t_lambda(p: np.ndarray, helper, targets, lam) -> float:
    d = JointDistribution(p)
    return -entropy(d, helper) + sum(l * entropy(d, (t,)) for l, t in zip(lam, targets))


def perturbation_second_derivative(dist: JointDistribution, helper_index, lambdas, f,
                                   eps_list=(1e-2, 1e-3, 1e-4), targets=None) -> dict:
    """Compare central differences of t_lambda(q_eps) with two closed forms.

    q_eps(x_h) = p(x_h)(1 + eps f(x_h)) with p(rest | x_h) held fixed. The
    variance form is E[f^2] - sum lambda_i E[(E[f|X_i])^2]; the alternative
    reading E[f^2] - sum lambda_i E[E[f^2|X_i]] is reported for comparison.
    Both closed forms are divided by ln 2 since t is computed in bits.
    """
    helper = normalize_helper(dist, helper_index)
    targets = default_targets(dist, helper) if targets is None else tuple(targets)
    lam = check_lambdas(lambdas, targets)
    f = np.asarray(f, dtype=float).reshape(-1)
    from .aux import _conditional_kernel

    ph = marginal_array(dist.p, helper).reshape(-1)
    if f.shape[0] != ph.shape[0]:
        raise InvalidPerturbation("f must be indexed by the helper alphabet")
    Ef = math.fsum(ph * f)
    if abs(Ef) > 1e-9:
        raise InvalidPerturbation(f"E[f] = {Ef} is not zero")
    for e in eps_list:
        if np.any(1 + e * f[ph > 0] < 0) or np.any(1 - e * f[ph > 0] < 0):
            raise InvalidPerturbation(f"eps={e} gives negative probabilities")

    Ef2 = math.fsum(ph * f * f)
    cond_sq = []
    for t in targets:
        M = _conditional_kernel(dist, (t,), helper)
        px = M.sum(axis=1)
        num = M @ f
        cond_sq.append(math.fsum(np.where(px > 0, num ** 2 / np.where(px > 0, px, 1), 0.0)))
    variance_form = (Ef2 - math.fsum(l * c for l, c in zip(lam, cond_sq))) / LN2
    printed_form = (Ef2 - math.fsum(l * Ef2 for l in lam)) / LN2

    # weight each cell by 1 + eps f(x_h)
    cards = dist.cardinalities
    perm_shape = [cards[i] for i in helper]
    # broadcast f over the full array along the helper axes
    idx = np.indices(dist.p.shape)
    flat_h = np.ravel_multi_index(tuple(idx[i] for i in helper), perm_shape)
    F = f[flat_h]
    t0 = _t_lambda(dist.p, helper, targets, lam)
    rows = []
    for e in eps_list:
        tp = _t_lambda(dist.p * (1 + e * F), helper, targets, lam)
        tm = _t_lambda(dist.p * (1 - e * F), helper, targets, lam)
        fd = (tp - 2 * t0 + tm) / (e * e)
        scale = max(abs(variance_form), 1e-12)
        rows.append({"eps": e, "finite_difference": fd,
                     "rel_error_variance_form": abs(fd - variance_form) / scale,
                     "rel_error_printed_form": abs(fd - printed_form) / max(abs(printed_form), 1e-12)})
    return {"variance_form": variance_form, "printed_form": printed_form, "rows": rows}


# -- variance identities -------------------------------------------------------------

def conditional_variance_term(P: np.ndarray, f: np.ndarray, target: Sequence[int],
                              cond: Sequence[int]) -> float:
    """E_cond Var_{target|cond}[E[f(A) | target, cond]] for a joint array with A on axis 0.

    Computed slice by slice with explicit mean subtraction.
    """
    target, cond = tuple(target), tuple(cond)
    keep = cond + target
    drop = tuple(a for a in range(P.ndim) if a not in keep and a != 0)
    R = P.sum(axis=drop) if drop else P
    remaining = [a for a in range(P.ndim) if a not in drop]
    R = np.transpose(R, [remaining.index(a) for a in (0,) + cond + target])
    nA = R.shape[0]
    nc = int(np.prod(R.shape[1:1 + len(cond)])) if cond else 1
    R = R.reshape(nA, nc, -1)
    total = 0.0
    for c in range(nc):
        slab = R[:, c, :]  # (a, t)
        pc = slab.sum()
        if pc <= 0:
            continue
        pt = slab.sum(axis=0) / pc
        ok = pt > 0
        g = np.zeros(slab.shape[1])
        g[ok] = (f @ slab[:, ok]) / (slab[:, ok].sum(axis=0))
        mean = math.fsum(pt[ok] * g[ok])
        total += pc * math.fsum(pt[ok] * (g[ok] - mean) ** 2)
    return total


def variance_identity_checks(dist: JointDistribution, trials: int = 100, seed: int = 0) -> dict:
    """Law of total variance and the Markov-chain variance inequality on random f.

    Variables 0, 1, 2 of ``dist`` play A, B, C for the identity; for the
    inequality (A, C, D) are taken from ``dist`` and E is generated from D by a
    fresh random channel so that C - D - E holds by construction. A second
    family uses a constant D.
    """
    if dist.k < 3:
        raise DimensionMismatch("variance identity checks need at least three variables")
    rng = np.random.default_rng(seed)
    P = marginal_array(dist.p, (0, 1, 2))
    nA = P.shape[0]
    max_residual = 0.0
    min_slack = math.inf
    min_slack_const = math.inf
    for _ in range(trials):
        f = rng.standard_normal(nA)
        lhs = conditional_variance_term(P, f, (1, 2), ())
        rhs = conditional_variance_term(P, f, (1,), ()) + conditional_variance_term(P, f, (2,), (1,))
        max_residual = max(max_residual, abs(lhs - rhs))

        nE = int(rng.integers(2, 4))
        ch = rng.dirichlet(np.ones(nE), size=P.shape[2])  # p(e | d)
        P4 = P[:, :, :, None] * ch[None, None, :, :]  # axes A, C, D, E
        a = conditional_variance_term(P4, f, (1,), (2, 3))
        b = conditional_variance_term(P4, f, (1,), (2,))
        min_slack = min(min_slack, a - b)

        PAC = P.sum(axis=2)
        P3 = PAC[:, :, None, None] * rng.dirichlet(np.ones(nE))[None, None, None, :]
        a = conditional_variance_term(P3, f, (1,), (2, 3))
        b = conditional_variance_term(P3, f, (1,), (2,))
        min_slack_const = min(min_slack_const, a - b)
    return {"trials": trials, "seed": seed, "total_variance_max_residual": max_residual,
            "markov_min_slack": min_slack, "markov_constant_d_min_slack": min_slack_const}
