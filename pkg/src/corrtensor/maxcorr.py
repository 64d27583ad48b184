"""Maximal correlation via the normalized joint matrix.

For a pair (X, Y) the matrix Q[x, y] = p(x, y) / sqrt(p(x) p(y)) has top
singular value 1 (attained by sqrt(p(x)), sqrt(p(y))) and its second singular
value is the maximal correlation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, UnknownMethod
from .linalg import deflated_power_iteration, jacobi_eigh
from .prob import JointDistribution, centered_normalized, condition_on, marginal_array


@dataclass(frozen=True, eq=False)
class CorrelationOperator:
    """Normalized joint matrix restricted to the support of both marginals."""

    Q: np.ndarray
    sqrt_px: np.ndarray
    sqrt_py: np.ndarray
    support_x: np.ndarray
    support_y: np.ndarray
    D: np.ndarray

    @property
    def degenerate(self) -> bool:
        """True when one of the marginals is a point mass."""
        return len(self.support_x) < 2 or len(self.support_y) < 2

    def deflated(self) -> np.ndarray:
        """Q with the known top singular pair (constant functions) removed."""
        return self.D

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.Q, compute_uv=False)


def correlation_matrix_from_array(pxy: np.ndarray) -> CorrelationOperator:
    pxy = np.asarray(pxy, dtype=float)
    D, sx, sy, px, py = centered_normalized(pxy)
    rx, ry = np.sqrt(px), np.sqrt(py)
    Q = pxy[np.ix_(sx, sy)] / np.outer(rx, ry)
    return CorrelationOperator(Q, rx, ry, sx, sy, D)


def correlation_matrix(dist: JointDistribution, i: int = 0, j: int = 1) -> CorrelationOperator:
    if dist.k < 2:
        raise DimensionMismatch("maximal correlation needs at least two variables")
    for v in (i, j):
        if not 0 <= v < dist.k:
            raise IndexOutOfRange(f"variable {v} not in range(0, {dist.k})")
    if i == j:
        raise IndexOutOfRange("i and j must differ")
    return correlation_matrix_from_array(marginal_array(dist.p, (i, j)))


def _sigma2(op: CorrelationOperator, method: str = "jacobi") -> tuple[float, np.ndarray, np.ndarray]:
    """Second singular value of Q and its singular functions (in sqrt-p coordinates)."""
    D = op.deflated()
    if method == "jacobi":
        w, v = jacobi_eigh(D.T @ D)
        lam, right = w[-1], v[:, -1]
    elif method == "power":
        lam, right, _ = deflated_power_iteration(D.T @ D, known=op.sqrt_py)
    else:
        raise UnknownMethod(method)
    lam = max(float(lam), 0.0)
    sigma = math.sqrt(lam)
    left = D @ right
    nl = np.linalg.norm(left)
    left = left / nl if nl > 0 else left
    return min(sigma, 1.0), left, right


def rho_from_array(pxy: np.ndarray, method: str = "jacobi") -> float:
    op = correlation_matrix_from_array(pxy)
    if op.degenerate:
        return 0.0
    return _sigma2(op, method)[0]


def rho(dist: JointDistribution, i: int = 0, j: int = 1, method: str = "jacobi") -> float:
    """Maximal correlation of (X_i, X_j); 0 when either marginal is a point mass."""
    op = correlation_matrix(dist, i, j)
    if op.degenerate:
        return 0.0
    return _sigma2(op, method)[0]


def maximal_correlation_functions(dist: JointDistribution, i: int = 0, j: int = 1):
    """Return ``(rho, f, g)`` with f, g mean-zero unit-variance maximizers.

    f and g are indexed by the full alphabets of X_i and X_j (zero off the support).
    """
    op = correlation_matrix(dist, i, j)
    f = np.zeros(dist.cardinalities[i])
    g = np.zeros(dist.cardinalities[j])
    if op.degenerate:
        return 0.0, f, g
    s, left, right = _sigma2(op)
    f[op.support_x] = left / op.sqrt_px
    g[op.support_y] = right / op.sqrt_py
    pxy = marginal_array(dist.p, (i, j))
    if float(f @ pxy @ g) < 0:
        g = -g
    return s, f, g


def pearson(pxy: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    """Pearson correlation of f(X) and g(Y) under pxy; nan if either is constant."""
    pxy = np.asarray(pxy, dtype=float)
    px, py = pxy.sum(axis=1), pxy.sum(axis=0)
    mf, mg = px @ f, py @ g
    vf = px @ (f - mf) ** 2
    vg = py @ (g - mg) ** 2
    if vf <= 1e-300 or vg <= 1e-300:
        return float("nan")
    return float((f - mf) @ pxy @ (g - mg) / math.sqrt(vf * vg))


def rho_brute_force(pxy: np.ndarray, n_grid: int = 721) -> float:
    """Maximal correlation by direct Pearson maximization (oracle for one binary side).

    Pearson correlation is invariant under increasing affine maps of either
    function, so on a binary side a single indicator represents every
    non-constant function up to sign. A ternary other side is then a 1-D
    family g = (0, cos t, sin t); t is scanned on a grid and refined with a
    bounded scalar search. Independent of any spectral computation.
    """
    from scipy.optimize import minimize_scalar

    pxy = np.asarray(pxy, dtype=float)
    px, py = pxy.sum(axis=1), pxy.sum(axis=0)
    pxy = pxy[np.ix_(px > 0, py > 0)]
    if pxy.shape[0] < 2 or pxy.shape[1] < 2:
        return 0.0
    if pxy.shape[0] != 2:
        pxy = pxy.T
    if pxy.shape[0] != 2 or pxy.shape[1] > 3:
        raise ValueError("brute-force oracle supports 2x2 and 2x3 supports")
    f = np.array([0.0, 1.0])
    if pxy.shape[1] == 2:
        return abs(pearson(pxy, f, np.array([0.0, 1.0])))

    def corr(t):
        c = pearson(pxy, f, np.array([0.0, math.cos(t), math.sin(t)]))
        return -abs(c) if c == c else 0.0

    ts = np.linspace(0.0, 2 * math.pi, n_grid)
    vals = np.array([corr(t) for t in ts])
    k = int(np.argmin(vals))
    h = ts[1] - ts[0]
    res = minimize_scalar(corr, bounds=(ts[k] - h, ts[k] + h), method="bounded",
                          options={"xatol": 1e-12})
    return float(max(-vals[k], -res.fun))


def rho_conditional(dist: JointDistribution, i: int, j: int, z_index: int) -> float:
    """max over z with p(z) > 0 of rho(X_i, X_j | Z = z)."""
    if len({i, j, z_index}) != 3:
        raise IndexOutOfRange("rho_conditional needs three distinct indices")
    pz = marginal_array(dist.p, (z_index,))
    # indices of X_i, X_j after dropping Z
    ii = i - (i > z_index)
    jj = j - (j > z_index)
    best = 0.0
    for z in np.flatnonzero(pz > 0):
        sl = condition_on(dist, z_index, int(z))
        best = max(best, rho(sl, ii, jj))
    return best


def conditional_lemma_value(dist: JointDistribution, x: int, y: int, z: int):
    """Evaluate max E_{YZ}[(E_{X|YZ} f)^2] over f with E[f|Z]=0, E f^2 = 1.

    The maximizer splits across z-slices; on each slice the best normalized
    f gives rho(X, Y | Z=z)^2, so the overall maximum puts all weight on the
    best slice. Returns ``(value, f)`` where f is indexed ``[x, z]``.
    """
    pxyz = marginal_array(dist.p, (x, y, z))
    nx, ny, nz = pxyz.shape
    pz = pxyz.sum(axis=(0, 1))
    best, best_f = 0.0, np.zeros((nx, nz))
    for zz in np.flatnonzero(pz > 0):
        sl = pxyz[:, :, zz] / pz[zz]
        s, fx, _ = maximal_correlation_functions(JointDistribution(sl), 0, 1)
        if s * s > best:
            best = s * s
            f = np.zeros((nx, nz))
            f[:, zz] = fx / math.sqrt(pz[zz])
            best_f = f
    return best, best_f


def lemma_objective(pxyz: np.ndarray, f: np.ndarray) -> float:
    """E_{YZ}[(E_{X|YZ} f(X,Z))^2] for f indexed [x, z]."""
    pyz = pxyz.sum(axis=0)
    num = np.einsum("xyz,xz->yz", pxyz, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(pyz > 0, num ** 2 / np.where(pyz > 0, pyz, 1.0), 0.0)
    return float(val.sum())
