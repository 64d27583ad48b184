"""Optimization over an auxiliary variable U generated from a helper variable.

Every dual functional in this package has the form

    J(U) = const + sum_S  coef_S * H(X_S | U),     U - X_helper - (everything else)

where the constant collects unconditional entropies. Two independent routes
maximize J over channels p(u | x_helper):

* :func:`maximize` - multi-restart projected-gradient ascent on the channel
  simplex (returns a lower bound with the maximizing channel);
* :func:`grid_maximize` - concave-envelope evaluation on a simplex grid of
  posteriors q(x_helper). Since J = const + E_U[psi(q_U)] with
  psi(q) = sum_S coef_S H_S(q), the maximum over U equals const plus the upper
  concave envelope of psi at p(x_helper); on a finite grid this is a linear
  program whose optimal weights give an explicit channel.

Both return channels restricted to the support of p(x_helper) and report
values recomputed from that channel.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .prob import JointDistribution, entropy, marginal_array

LOG_FLOOR = 1e-300
LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class AuxObjective:
    """J(U) = const + sum coef_S H(X_S | U) with U generated from X_helper."""

    dist: JointDistribution
    helper: tuple[int, ...]
    terms: tuple[tuple[tuple[int, ...], float], ...]
    const: float
    support: np.ndarray = field(init=False, repr=False)
    p_h: np.ndarray = field(init=False, repr=False)
    kernels: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        ph_full = marginal_array(self.dist.p, self.helper).reshape(-1)
        support = np.flatnonzero(ph_full > 0)
        p_h = ph_full[support]
        kernels = []
        for S, _ in self.terms:
            kernels.append(_conditional_kernel(self.dist, S, self.helper)[:, support] / p_h)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "p_h", p_h)
        object.__setattr__(self, "kernels", tuple(kernels))

    @property
    def n_helper(self) -> int:
        return len(self.p_h)

    @property
    def helper_cardinality(self) -> int:
        return math.prod(self.dist.cardinalities[i] for i in self.helper)

    def value(self, W: np.ndarray) -> np.ndarray:
        return self.value_and_grad(W, grad=False)[0]

    def value_and_grad(self, W: np.ndarray, grad: bool = True):
        """Batched evaluation; W has shape (R, n_u, n_helper) or (n_u, n_helper)."""
        single = W.ndim == 2
        if single:
            W = W[None]
        Wp = W * self.p_h
        qu = Wp.sum(axis=2)
        log_qu = np.log2(np.maximum(qu, LOG_FLOOR))
        val = np.full(W.shape[0], self.const)
        g = np.zeros_like(W) if grad else None
        for (S, coef), K in zip(self.terms, self.kernels):
            qus = Wp @ K.T
            logc = np.log2(np.maximum(qus, LOG_FLOOR)) - log_qu[:, :, None]
            h = -np.sum(np.where(qus > 0, qus * logc, 0.0), axis=(1, 2))
            val = val + coef * h
            if grad:
                g -= coef * self.p_h * (logc @ K)
        if single:
            return val[0], (g[0] if grad else None)
        return val, g

    def full_channel(self, W: np.ndarray) -> np.ndarray:
        """Expand a support-restricted channel to the whole helper alphabet."""
        out = np.zeros((W.shape[0], self.helper_cardinality))
        out[0, :] = 1.0
        out[:, self.support] = W
        return out

    def recompute(self, W_full: np.ndarray) -> float:
        """Value of J from a full-alphabet channel, through an explicit joint with U."""
        aug = augment(self.dist, self.helper, W_full)
        u = aug.k - 1
        val = self.const
        for S, coef in self.terms:
            if S:
                val += coef * (entropy(aug, S + (u,)) - entropy(aug, (u,)))
        return float(val)

    def psi(self, Q: np.ndarray) -> np.ndarray:
        """sum_S coef_S H_S(q) for posteriors q(x_helper) given as rows of Q."""
        out = np.zeros(Q.shape[0])
        for (S, coef), K in zip(self.terms, self.kernels):
            d = Q @ K.T
            with np.errstate(divide="ignore", invalid="ignore"):
                h = -np.sum(np.where(d > 0, d * np.log2(np.where(d > 0, d, 1.0)), 0.0), axis=1)
            out += coef * h
        return out


def _conditional_kernel(dist: JointDistribution, S: Sequence[int], helper: Sequence[int]) -> np.ndarray:
    """Matrix M[x_S, x_H] = p(x_S, x_H), allowing S and H to overlap."""
    S, helper = tuple(S), tuple(helper)
    cards = dist.cardinalities
    union = tuple(dict.fromkeys(S + helper))
    marg = marginal_array(dist.p, union)
    coords = np.indices(marg.shape).reshape(len(union), -1)
    pos = {v: n for n, v in enumerate(union)}
    nS = math.prod(cards[i] for i in S) if S else 1
    nH = math.prod(cards[i] for i in helper)
    s_idx = (np.ravel_multi_index(tuple(coords[pos[i]] for i in S), [cards[i] for i in S])
             if S else np.zeros(coords.shape[1], dtype=int))
    h_idx = np.ravel_multi_index(tuple(coords[pos[i]] for i in helper), [cards[i] for i in helper])
    M = np.zeros((nS, nH))
    np.add.at(M, (s_idx, h_idx), marg.reshape(-1))
    return M


def augment(dist: JointDistribution, helper: Sequence[int], W_full: np.ndarray) -> JointDistribution:
    """Joint distribution of (X_1..X_k, U) for the channel p(u | x_helper) = W_full[u, x_helper]."""
    helper = tuple(helper)
    cards = dist.cardinalities
    p = dist.p
    rest = [i for i in range(dist.k) if i not in helper]
    # move helper axes last, flatten them
    arr = np.transpose(p, rest + list(helper))
    arr = arr.reshape([cards[i] for i in rest] + [-1])
    joint = arr[..., None, :] * W_full  # (..., n_u, n_h)
    joint = joint.reshape([cards[i] for i in rest] + [W_full.shape[0]] + [cards[i] for i in helper])
    # current axes: rest..., U, helper...
    order = rest + ["U"] + list(helper)
    inv = [order.index(i) for i in range(dist.k)] + [order.index("U")]
    return JointDistribution(np.transpose(joint, inv))


class ObjectiveBuilder:
    """Accumulates mutual-information terms into an :class:`AuxObjective`.

    ``add_mi(c, A, B)`` adds c * I(X_A; U | X_B).
    """

    def __init__(self, dist: JointDistribution, helper: Sequence[int]):
        self.dist = dist
        self.helper = tuple(helper)
        self.const = 0.0
        self.coefs: dict[tuple[int, ...], float] = {}

    def _add_cond(self, S, coef):
        key = tuple(sorted(set(S)))
        if key:
            self.coefs[key] = self.coefs.get(key, 0.0) + coef

    def add_mi(self, coef: float, A: Sequence[int], B: Sequence[int] = ()) -> "ObjectiveBuilder":
        if coef == 0:
            return self
        A, B = tuple(A), tuple(B)
        AB = tuple(dict.fromkeys(A + B))
        self.const += coef * (entropy(self.dist, AB) - (entropy(self.dist, B) if B else 0.0))
        self._add_cond(AB, -coef)
        if B:
            self._add_cond(B, coef)
        return self

    def add_cond_entropy(self, coef: float, S: Sequence[int]) -> "ObjectiveBuilder":
        """Add coef * H(X_S | U)."""
        self._add_cond(tuple(S), coef)
        return self

    def add_cond_mi_given_u(self, coef: float, A: Sequence[int], B: Sequence[int]) -> "ObjectiveBuilder":
        """Add coef * I(X_A; X_B | U)."""
        A, B = tuple(A), tuple(B)
        self._add_cond(A, coef)
        self._add_cond(B, coef)
        self._add_cond(A + B, -coef)
        return self

    def build(self) -> AuxObjective:
        terms = tuple((S, c) for S, c in sorted(self.coefs.items()) if c != 0)
        return AuxObjective(self.dist, self.helper, terms, float(self.const))


# -- exponentiated-gradient ascent ---------------------------------------------

@dataclass
class AscentResult:
    value: float
    W: np.ndarray
    values: np.ndarray
    iterations: int
    n_starts: int


def ascend(fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]], W0: np.ndarray,
           p_h: np.ndarray, max_iter: int = 300, keep: int = 8, prune_at: int = 40,
           floor: float = 1e-3) -> AscentResult:
    """Batched exponentiated-gradient (mirror) ascent on the channel columns.

    Each column W[:, h] is updated multiplicatively by exp(eta * dJ/dW[:, h] / p_h)
    and renormalized, with a per-start step eta that grows on success and
    shrinks on failure. Starts are first mixed with a ``floor`` fraction of
    the uniform channel so every entry can move. ``fun`` maps a batch of
    channels to (values, gradients). Starts are pruned to the best ``keep``
    after ``prune_at`` iterations.
    """
    n_u = W0.shape[1]
    W = (1.0 - floor) * np.array(W0, dtype=float) + floor / n_u
    W = W / W.sum(axis=1, keepdims=True)
    vals, grads = fun(W)
    eta = np.ones(W.shape[0])
    it = 0
    for it in range(1, max_iter + 1):
        if it == prune_at and W.shape[0] > keep:
            order = np.argsort(-np.where(np.isfinite(vals), vals, -np.inf), kind="stable")[:keep]
            W, vals, grads, eta = W[order], vals[order], grads[order], eta[order]
        G = grads / p_h
        G = G - G.max(axis=1, keepdims=True)
        Wn = W * np.exp(np.maximum(eta[:, None, None] * G, -700.0))
        Wn = Wn / Wn.sum(axis=1, keepdims=True)
        vn, gn = fun(Wn)
        better = vn > vals
        W[better], vals[better], grads[better] = Wn[better], vn[better], gn[better]
        eta = np.where(better, np.minimum(eta * 1.5, 1e6), eta * 0.3)
        if np.all(eta < 1e-12):
            break
    best = int(np.argmax(np.where(np.isfinite(vals), vals, -np.inf)))
    return AscentResult(float(vals[best]), W[best].copy(), vals.copy(), it, int(W0.shape[0]))


# -- seeds ----------------------------------------------------------------------

def _deterministic_channel(labels: np.ndarray, n_u: int) -> np.ndarray:
    W = np.zeros((n_u, len(labels)))
    W[labels, np.arange(len(labels))] = 1.0
    return W


def seed_channels(obj: AuxObjective, n_u: int, rng: np.random.Generator, restarts: int,
                  directions: Sequence[np.ndarray] = (), extra: Sequence[np.ndarray] = ()) -> np.ndarray:
    """Starting channels: constant, structured deterministic maps, local perturbations, random."""
    n_h = obj.n_helper
    seeds = [_deterministic_channel(np.zeros(n_h, dtype=int), n_u)]
    if n_h <= n_u:
        seeds.append(_deterministic_channel(np.arange(n_h), n_u))
    cards = [obj.dist.cardinalities[i] for i in obj.helper]
    coords = np.array(np.unravel_index(obj.support, cards))
    if len(cards) > 1:
        for c, coord in zip(cards, coords):
            if c <= n_u:
                seeds.append(_deterministic_channel(coord, n_u))
    if n_h <= 8:
        for mask in range(1, 2 ** (n_h - 1)):
            labels = np.array([(mask >> b) & 1 for b in range(n_h)])
            seeds.append(_deterministic_channel(labels, n_u))
        # rare-revelation channels: U = 1 with small probability on a subset of symbols
        for mask in range(1, 2 ** n_h - 1):
            ind = np.array([(mask >> b) & 1 for b in range(n_h)], dtype=float)
            for e in (0.3, 0.05, 0.005, 5e-4, 5e-5):
                W = np.zeros((n_u, n_h))
                W[1] = e * ind
                W[0] = 1 - W[1]
                seeds.append(W)
    for f in directions:
        f = np.asarray(f, dtype=float)
        amp = np.max(np.abs(f))
        if amp <= 0:
            continue
        for scale in (0.9, 0.3, 0.1, 0.03, 0.01, 0.003):
            e = scale / amp
            W = np.zeros((n_u, n_h))
            W[0] = (1 + e * f) / 2
            W[1] = (1 - e * f) / 2
            seeds.append(W)
    for W in extra:
        seeds.append(np.asarray(W, dtype=float)[:n_u, obj.support] if W.shape[1] != n_h else W)
    for r in range(restarts):
        if len(cards) > 1 and r % 3 == 2:
            which = (r // 3) % len(cards)
            V = rng.dirichlet(np.ones(n_u), size=cards[which]).T
            seeds.append(V[:, coords[which]])
        else:
            seeds.append(rng.dirichlet(np.ones(n_u), size=n_h).T)
    return np.stack(seeds)


@dataclass
class AuxResult:
    """Best-found value of J with its channel (over the full helper alphabet)."""

    value: float
    channel: np.ndarray
    lower_bound_only: bool = True
    diagnostics: dict = field(default_factory=dict)


def maximize(obj: AuxObjective, n_u: int | None = None, restarts: int = 32, seed: int = 0,
             directions: Sequence[np.ndarray] = (), extra_seeds: Sequence[np.ndarray] = (),
             max_iter: int = 300) -> AuxResult:
    """Multi-restart exponentiated-gradient ascent of J over p(u | x_helper)."""
    n_u = n_u or obj.n_helper + 1
    n_u = max(n_u, 2)
    rng = np.random.default_rng(seed)
    W0 = seed_channels(obj, n_u, rng, restarts, directions, extra_seeds)
    res = ascend(obj.value_and_grad, W0, obj.p_h, max_iter=max_iter)
    full = obj.full_channel(res.W)
    return AuxResult(float(obj.value(res.W)), full, True,
                     {"restarts": restarts, "starts": res.n_starts, "iterations": res.iterations,
                      "n_u": n_u, "seed": seed})


def maximize_ratio(num: AuxObjective, den: AuxObjective, n_u: int | None = None,
                   restarts: int = 32, seed: int = 0, floor: float = 1e-9,
                   directions: Sequence[np.ndarray] = (), max_iter: int = 400) -> AuxResult:
    """Maximize J_num / J_den over channels with J_den >= floor."""
    n_u = max(n_u or num.n_helper + 1, 2)
    rng = np.random.default_rng(seed)
    W0 = seed_channels(num, n_u, rng, restarts, directions)

    def fun(W):
        a, ga = num.value_and_grad(W)
        b, gb = den.value_and_grad(W)
        ok = b >= floor
        bb = np.where(ok, b, 1.0)
        r = np.where(ok, a / bb, -np.inf)
        g = (ga - np.where(ok, r, 0.0)[:, None, None] * gb) / bb[:, None, None]
        return r, np.where(ok[:, None, None], g, 0.0)

    res = ascend(fun, W0, num.p_h, max_iter=max_iter)
    return AuxResult(res.value, num.full_channel(res.W), True,
                     {"restarts": restarts, "iterations": res.iterations, "n_u": n_u, "seed": seed})


# -- grid oracle -------------------------------------------------------------

def simplex_grid(n: int, step: float) -> np.ndarray:
    """All points of the probability simplex in R^n with coordinates multiple of ``step``."""
    N = int(round(1.0 / step))
    if abs(N * step - 1.0) > 1e-9:
        raise ValueError("1/step must be an integer")
    if n == 1:
        return np.ones((1, 1))
    pts = []
    for bars in itertools.combinations(range(N + n - 1), n - 1):
        b = (-1,) + bars + (N + n - 1,)
        pts.append([b[i + 1] - b[i] - 1 for i in range(n)])
    return np.asarray(pts, dtype=float) / N


def grid_size(n: int, step: float) -> int:
    N = int(round(1.0 / step))
    return math.comb(N + n - 1, n - 1)


def grid_maximize(obj: AuxObjective, step: float = 0.02, max_points: int = 200_000) -> AuxResult:
    """Maximize J over U via the concave envelope of psi on a posterior grid.

    The grid always contains p(x_helper) itself, so the constant U is
    feasible. Returned value is recomputed from the channel extracted from the
    optimal LP weights; it is an achievable value (hence a lower bound on the
    true maximum) whose gap shrinks with the grid step.
    """
    from scipy.optimize import linprog

    n = obj.n_helper
    if n == 1:
        W = np.ones((1, 1))
        return AuxResult(float(obj.value(W)), obj.full_channel(W), True,
                         {"grid_step": step, "grid_points": 1})
    if grid_size(n, step) > max_points:
        raise ValueError(f"grid with {grid_size(n, step)} points exceeds {max_points}")
    Q = np.vstack([simplex_grid(n, step), obj.p_h[None, :]])
    psi = obj.psi(Q)
    tight = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    attempts = [("highs", tight), ("highs-ds", tight), ("highs-ipm", tight), ("highs", {})]
    for method, options in attempts:
        res = linprog(-psi, A_eq=Q.T, b_eq=obj.p_h, bounds=(0, None), method=method, options=options)
        if res.status == 0:
            break
    else:
        raise RuntimeError(f"envelope LP failed: {res.message}")
    w = res.x
    active = np.flatnonzero(w > 1e-13)
    W = (w[active, None] * Q[active]) / obj.p_h
    W = W / W.sum(axis=0, keepdims=True)
    value = float(obj.value(W))
    return AuxResult(max(value, float(obj.value(obj_constant_channel(n)))), obj.full_channel(W), True,
                     {"grid_step": step, "grid_points": int(Q.shape[0]), "lp_value": float(obj.const - res.fun),
                      "atoms": int(len(active)), "lp_method": method})


def obj_constant_channel(n_h: int) -> np.ndarray:
    return np.ones((1, n_h))


def channel_grid(n_u: int, n_h: int, step: float):
    """All channels with columns on the ``step`` simplex grid, shape (M, n_u, n_h)."""
    cols = simplex_grid(n_u, step)
    idx = np.array(list(itertools.product(range(len(cols)), repeat=n_h)))
    return np.transpose(cols[idx], (0, 2, 1))


def product_channel(Wp: np.ndarray, Wq: np.ndarray, cards_p: Sequence[int], cards_q: Sequence[int]) -> np.ndarray:
    """Channel from merged helper symbols (h_i h'_i per variable) to U = (U_p, U_q)."""
    cards_p, cards_q = list(cards_p), list(cards_q)
    k = len(cards_p)
    a = np.asarray(Wp, dtype=float).reshape([Wp.shape[0]] + cards_p)
    b = np.asarray(Wq, dtype=float).reshape([Wq.shape[0]] + cards_q)
    out = np.multiply.outer(a, b)  # (u_p, h_p..., u_q, h_q...)
    perm = [0, k + 1] + [ax for i in range(k) for ax in (1 + i, k + 2 + i)]
    out = np.transpose(out, perm)
    return out.reshape(Wp.shape[0] * Wq.shape[0], -1)


# -- first-order (rare revelation) rate ----------------------------------------------

def revelation_rate(obj: AuxObjective, r: np.ndarray) -> float:
    """d/de of J at e = 0 for U = 1 with probability e and posterior r, else U = 0.

    Equals sum_S coef_S * (-D(K_S r || K_S p)) in bits, where J = const +
    sum_S coef_S H(X_S | U); r lives on the helper support.
    """
    r = np.asarray(r, dtype=float)
    out = 0.0
    for (S, coef), K in zip(obj.terms, obj.kernels):
        a, b = K @ r, K @ obj.p_h
        m = a > 0
        out -= coef * math.fsum(a[m] * np.log2(a[m] / b[m]))
    return float(out)


def revelation_channel(obj: AuxObjective, r: np.ndarray, e: float) -> np.ndarray:
    """Channel on the helper support: p(u=1 | h) = e r(h) / (p(h) max(r/p)), scaled into [0, 1]."""
    ratio = np.asarray(r, dtype=float) / obj.p_h
    w = e * ratio / ratio.max()
    return np.vstack([1.0 - w, w])


def maximize_revelation(obj: AuxObjective, restarts: int = 8, seed: int = 0) -> tuple[float, np.ndarray]:
    """Best-found sup over posteriors r of :func:`revelation_rate` (softmax coordinates, L-BFGS)."""
    from scipy.optimize import minimize

    n = obj.n_helper
    if n < 2:
        return 0.0, obj.p_h.copy()
    logp = np.log(obj.p_h)

    def neg(z):
        r = np.exp(z - z.max())
        r /= r.sum()
        g = np.zeros(n)
        val = 0.0
        for (S, coef), K in zip(obj.terms, obj.kernels):
            a, b = K @ r, K @ obj.p_h
            m = a > 0
            la = np.zeros_like(a)
            la[m] = np.log2(a[m] / b[m])
            val -= coef * float(a[m] @ la[m])
            g -= coef * (K.T @ (la + 1.0 / LN2))
        gz = r * (g - r @ g)
        return -val, -gz

    rng = np.random.default_rng(seed)
    starts = []
    for h in range(n):
        z = logp.copy()
        z[h] += 3.0
        starts.append(z)
        z = logp.copy()
        z[h] -= 3.0
        starts.append(z)
    starts += [np.log(rng.dirichlet(np.ones(n))) for _ in range(restarts)]
    best, best_r = -math.inf, None
    for z0 in starts:
        res = minimize(neg, z0, jac=True, method="L-BFGS-B", options={"maxiter": 500, "gtol": 1e-14})
        if -res.fun > best:
            r = np.exp(res.x - res.x.max())
            best, best_r = -res.fun, r / r.sum()
    return float(best), best_r
