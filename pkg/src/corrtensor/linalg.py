"""Dense symmetric eigen-solvers for the tiny matrices used here.

The matrices never exceed a few hundred rows, so a cyclic Jacobi sweep is
cheap and gives eigenvalues to near machine precision.
"""
from __future__ import annotations

import math

import numpy as np


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ascending and eigenvectors as columns,
    like :func:`numpy.linalg.eigh`. Iteration stops once the off-diagonal
    Frobenius norm drops below ``tol`` times the matrix norm.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(a.diagonal() ** 2), 0.0))
        if off <= tol * scale * 1e-3 or off < 1e-300:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta != 0:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                else:
                    t = 1.0
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = a.diagonal().copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def top_eigenpair(a: np.ndarray, tol: float = 1e-12):
    w, v = jacobi_eigh(a, tol=tol)
    return w[-1], v[:, -1]


def deflated_power_iteration(m: np.ndarray, known: np.ndarray | None = None,
                             tol: float = 1e-12, max_iter: int = 100_000,
                             seed: int = 0):
    """Largest eigenpair of a PSD matrix, restricted to the complement of ``known``.

    ``known`` is a unit vector (or matrix of orthonormal columns) assumed to
    be eigenvectors already accounted for; iterates are kept orthogonal to it.
    Returns ``(eigenvalue, vector, iterations)``.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    basis = None
    if known is not None:
        basis = np.asarray(known, dtype=float).reshape(n, -1)

    def project(x):
        if basis is not None:
            x = x - basis @ (basis.T @ x)
        return x

    x = project(rng.standard_normal(n))
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0, x, 0
    x /= nx
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = project(m @ x)
        ny = np.linalg.norm(y)
        if ny < 1e-300:
            return 0.0, x, it
        y /= ny
        lam_new = float(y @ m @ y)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)) and np.linalg.norm(y - x) < 1e-6:
            return lam_new, y, it
        lam, x = lam_new, y
    return lam, x, max_iter
