"""Finite-alphabet joint distributions, channels and Shannon quantities.

All entropies are in bits. Distributions are dense numpy tensors with one
axis per variable; objects are immutable once built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CardinalityMismatch,
    DimensionMismatch,
    EmptySubset,
    IndexOutOfRange,
    NegativeProbability,
    NotNormalized,
    OverlappingSets,
    SizeCapExceeded,
    ZeroProbabilityEvent,
)

NORMALIZATION_TOL = 1e-9
CLAMP_TOL = 1e-15
SIZE_CAP = 10**7


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A k-variate probability tensor; axis ``i`` is variable ``i``."""

    p: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p))
        if self.labels is not None:
            if len(self.labels) != self.p.ndim:
                raise DimensionMismatch("one label per variable required")
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(self.p.shape)

    @property
    def k(self) -> int:
        return self.p.ndim

    @property
    def probabilities(self) -> np.ndarray:
        """Row-major flattening of the tensor."""
        return self.p.reshape(-1)

    def to_json(self) -> dict:
        out = {"cardinalities": list(self.cardinalities),
               "probabilities": [float(v) for v in self.probabilities]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    def __repr__(self):
        return f"JointDistribution(cardinalities={self.cardinalities})"


def from_tensor(cardinalities: Sequence[int], values: Iterable[float],
                labels: Sequence[str] | None = None) -> JointDistribution:
    cards = tuple(int(c) for c in cardinalities)
    if not cards or any(c < 1 for c in cards):
        raise DimensionMismatch(f"cardinalities must be positive, got {cards}")
    vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                      dtype=float).reshape(-1)
    if vals.size != math.prod(cards):
        raise DimensionMismatch(
            f"{vals.size} values for cardinalities {cards} (need {math.prod(cards)})")
    if np.any(vals < -CLAMP_TOL) or not np.all(np.isfinite(vals)):
        raise NegativeProbability("entries must be finite and non-negative")
    vals = np.where(vals < 0, 0.0, vals)
    total = math.fsum(vals)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"probabilities sum to {total!r}")
    vals = vals / total
    return JointDistribution(vals.reshape(cards), None if labels is None else tuple(labels))


def from_array(arr, labels=None) -> JointDistribution:
    arr = np.asarray(arr, dtype=float)
    return from_tensor(arr.shape, arr.reshape(-1), labels)


def _check_indices(dist: JointDistribution, idx: Iterable[int]) -> tuple[int, ...]:
    idx = tuple(int(i) for i in idx)
    for i in idx:
        if not 0 <= i < dist.k:
            raise IndexOutOfRange(f"variable {i} not in range(0, {dist.k})")
    if len(set(idx)) != len(idx):
        raise OverlappingSets(f"repeated variable in {idx}")
    return idx


def marginal_array(p: np.ndarray, subset: Sequence[int]) -> np.ndarray:
    """Marginal tensor over ``subset`` with axes in the given order."""
    subset = tuple(subset)
    rest = tuple(i for i in range(p.ndim) if i not in subset)
    m = p.sum(axis=rest) if rest else p
    kept = sorted(subset)
    perm = [kept.index(i) for i in subset]
    return np.transpose(m, perm)


def marginal(dist: JointDistribution, subset: Sequence[int]) -> JointDistribution:
    if len(tuple(subset)) == 0:
        raise EmptySubset("marginal over an empty set")
    subset = _check_indices(dist, subset)
    labels = None if dist.labels is None else tuple(dist.labels[i] for i in subset)
    return JointDistribution(marginal_array(dist.p, subset), labels)


def condition_on(dist: JointDistribution, index: int, value: int) -> JointDistribution:
    (index,) = _check_indices(dist, [index])
    if dist.k < 2:
        raise DimensionMismatch("conditioning needs at least two variables")
    if not 0 <= value < dist.cardinalities[index]:
        raise IndexOutOfRange(f"value {value} outside alphabet of variable {index}")
    sl = np.take(dist.p, value, axis=index)
    mass = math.fsum(sl.reshape(-1))
    if mass <= 0:
        raise ZeroProbabilityEvent(f"P(X_{index} = {value}) = 0")
    labels = None if dist.labels is None else tuple(
        l for i, l in enumerate(dist.labels) if i != index)
    return JointDistribution(sl / mass, labels)


def product(p: JointDistribution, q: JointDistribution) -> JointDistribution:
    """Independent product; variables of ``p`` come first."""
    arr = np.multiply.outer(p.p, q.p)
    labels = None
    if p.labels is not None and q.labels is not None:
        labels = p.labels + q.labels
    return JointDistribution(arr, labels)


def group(dist: JointDistribution, groups: Sequence[Sequence[int]]) -> JointDistribution:
    """Merge variables into composite ones.

    Each group becomes one variable whose symbol is the row-major index of the
    tuple of its members. Every variable must appear in exactly one group.
    """
    flat = [i for g in groups for i in g]
    _check_indices(dist, flat)
    if sorted(flat) != list(range(dist.k)):
        raise DimensionMismatch("groups must partition the variables")
    arr = np.transpose(dist.p, flat)
    cards = [math.prod(dist.cardinalities[i] for i in g) for g in groups]
    return JointDistribution(arr.reshape(cards))


def tensor(p: JointDistribution, q: JointDistribution) -> JointDistribution:
    """Product with variable ``i`` of ``p`` and of ``q`` merged into one variable.

    This is the distribution of (X_1 X_1', ..., X_k X_k') for independent
    X and X'.
    """
    if p.k != q.k:
        raise DimensionMismatch("tensor needs distributions with equal arity")
    k = p.k
    return group(product(p, q), [[i, k + i] for i in range(k)])


def iid_power(p: JointDistribution, n: int, cap: int = SIZE_CAP) -> JointDistribution:
    """n i.i.d. copies, grouped so that variable ``i`` is the block X_i^n.

    Within block ``i`` the symbol is the row-major index of (x_i^(1), ..., x_i^(n)),
    copy 1 most significant; use :func:`split_copies` to address a single copy.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    size = p.p.size ** n
    if size > cap:
        raise SizeCapExceeded(f"iid power would have {size} entries (cap {cap})")
    out = p
    for _ in range(n - 1):
        out = tensor(out, p)
    return out


def split_copies(pn: JointDistribution, base_cards: Sequence[int], n: int) -> JointDistribution:
    """Inverse of the grouping in :func:`iid_power`: axes become (copy, variable)."""
    k = len(base_cards)
    shape = [c for c in base_cards for _ in range(n)]
    arr = pn.p.reshape(shape)
    # axis order is (var0 copy0..copy n-1, var1 ...); reorder to copy-major
    perm = [i * n + j for j in range(n) for i in range(k)]
    return JointDistribution(np.transpose(arr, perm))


@dataclass(frozen=True, eq=False)
class Channel:
    """Conditional distribution p(output tuple | input tuple), rows indexed row-major."""

    input_cardinalities: tuple[int, ...]
    output_cardinalities: tuple[int, ...]
    kernel: np.ndarray = field(repr=False)

    def __post_init__(self):
        ins = tuple(int(c) for c in self.input_cardinalities)
        outs = tuple(int(c) for c in self.output_cardinalities)
        kern = np.asarray(self.kernel, dtype=float)
        if kern.shape != (math.prod(ins), math.prod(outs)):
            raise DimensionMismatch(
                f"kernel shape {kern.shape} does not match {ins} -> {outs}")
        if np.any(kern < -CLAMP_TOL):
            raise NegativeProbability("channel entries must be non-negative")
        kern = np.where(kern < 0, 0.0, kern)
        for r, row in enumerate(kern):
            s = math.fsum(row)
            if abs(s - 1.0) > NORMALIZATION_TOL:
                raise NotNormalized(f"channel row {r} sums to {s!r}")
        kern = kern / kern.sum(axis=1, keepdims=True)
        object.__setattr__(self, "input_cardinalities", ins)
        object.__setattr__(self, "output_cardinalities", outs)
        object.__setattr__(self, "kernel", _frozen(kern))

    @property
    def tensor(self) -> np.ndarray:
        """Kernel reshaped to (*inputs, *outputs)."""
        return self.kernel.reshape(self.input_cardinalities + self.output_cardinalities)

    def to_json(self) -> dict:
        return {"input_cardinalities": list(self.input_cardinalities),
                "output_cardinalities": list(self.output_cardinalities),
                "kernel": [[float(v) for v in row] for row in self.kernel]}


def channel(kernel, input_cardinalities=None, output_cardinalities=None) -> Channel:
    kernel = np.asarray(kernel, dtype=float)
    if input_cardinalities is None:
        input_cardinalities = (kernel.shape[0],)
    if output_cardinalities is None:
        output_cardinalities = (kernel.shape[1],)
    return Channel(tuple(input_cardinalities), tuple(output_cardinalities), kernel)


def identity_channel(n: int) -> Channel:
    return channel(np.eye(n))


def constant_channel(n_in: int, n_out: int = 1) -> Channel:
    kern = np.zeros((n_in, n_out))
    kern[:, 0] = 1.0
    return channel(kern)


def bsc(crossover: float) -> Channel:
    e = float(crossover)
    return channel([[1 - e, e], [e, 1 - e]])


def apply_local_channel(dist: JointDistribution, ch: Channel, index: int) -> JointDistribution:
    """Replace variable ``index`` by the output of ``ch`` applied to it."""
    (index,) = _check_indices(dist, [index])
    n_in = math.prod(ch.input_cardinalities)
    n_out = math.prod(ch.output_cardinalities)
    if dist.cardinalities[index] != n_in:
        raise CardinalityMismatch(
            f"channel expects {n_in} input symbols, variable {index} has "
            f"{dist.cardinalities[index]}")
    arr = np.moveaxis(dist.p, index, -1)
    out = arr @ ch.kernel
    out = np.moveaxis(out, -1, index)
    assert out.shape[index] == n_out
    return JointDistribution(out, dist.labels)


def entropy_vector(v: np.ndarray) -> float:
    """Shannon entropy in bits of a probability vector; 0 log 0 = 0."""
    v = np.asarray(v, dtype=float).reshape(-1)
    v = v[v > 0]
    return float(-math.fsum(v * np.log2(v)))


def entropy(dist: JointDistribution, subset: Sequence[int] | None = None) -> float:
    if subset is None:
        subset = range(dist.k)
    subset = _check_indices(dist, subset)
    if not subset:
        return 0.0
    return entropy_vector(marginal_array(dist.p, subset))


def mutual_information(dist: JointDistribution, S: Sequence[int], T: Sequence[int],
                       W: Sequence[int] = ()) -> float:
    """I(X_S; X_T | X_W) in bits, clamped at zero."""
    S, T, W = tuple(S), tuple(T), tuple(W)
    _check_indices(dist, S + T + W)
    val = (entropy(dist, S + W) + entropy(dist, T + W)
           - entropy(dist, S + T + W) - entropy(dist, W))
    return max(val, 0.0)


def total_correlation(dist: JointDistribution) -> float:
    """sum_i H(X_i) - H(X_1..X_k); zero iff the variables are mutually independent."""
    val = math.fsum(entropy(dist, [i]) for i in range(dist.k)) - entropy(dist)
    return max(val, 0.0)


def prune(dist: JointDistribution, index: int) -> JointDistribution:
    """Drop zero-probability symbols of one variable (indices are renumbered)."""
    (index,) = _check_indices(dist, [index])
    m = marginal_array(dist.p, [index])
    keep = np.flatnonzero(m > 0)
    return JointDistribution(np.take(dist.p, keep, axis=index), dist.labels)


def centered_normalized(pxy: np.ndarray):
    """D[x, y] = (p(x, y) - p(x) p(y)) / sqrt(p(x) p(y)) on the support of both marginals.

    The difference is formed exactly in rational arithmetic from the stored
    doubles and rounded once, so small singular values of D keep full relative
    precision even when the pair is nearly independent. Returns
    ``(D, sx, sy, px, py)`` with ``sx, sy`` the supports and ``px, py`` the
    (rounded) marginals on them.
    """
    from fractions import Fraction

    pxy = np.asarray(pxy, dtype=float)
    px_f = pxy.sum(axis=1)
    py_f = pxy.sum(axis=0)
    sx, sy = np.flatnonzero(px_f > 0), np.flatnonzero(py_f > 0)
    sub = pxy[np.ix_(sx, sy)]
    exact = np.vectorize(Fraction, otypes=[object])(sub)
    mx, my = exact.sum(axis=1), exact.sum(axis=0)
    C = (exact - np.outer(mx, my)).astype(float)
    px = mx.astype(float)
    py = my.astype(float)
    return C / np.sqrt(np.outer(px, py)), sx, sy, px, py


# -- constructors used throughout tests and the CLI ---------------------------

def uniform(cards: Sequence[int]) -> JointDistribution:
    cards = tuple(cards)
    return JointDistribution(np.full(cards, 1.0 / math.prod(cards)))


def point_mass(cards: Sequence[int], at: Sequence[int] | None = None) -> JointDistribution:
    cards = tuple(cards)
    arr = np.zeros(cards)
    arr[tuple(at) if at is not None else (0,) * len(cards)] = 1.0
    return JointDistribution(arr)


def perfectly_correlated_bits() -> JointDistribution:
    return from_array([[0.5, 0.0], [0.0, 0.5]])


def dsbs(crossover: float) -> JointDistribution:
    """Uniform bit X and Y = X xor Bernoulli(crossover)."""
    e = float(crossover)
    return from_array([[(1 - e) / 2, e / 2], [e / 2, (1 - e) / 2]])


def random_distribution(rng: np.random.Generator, cards: Sequence[int],
                        alpha: float = 1.0) -> JointDistribution:
    cards = tuple(cards)
    v = rng.dirichlet(np.full(math.prod(cards), alpha))
    return JointDistribution(v.reshape(cards))


def random_channel(rng: np.random.Generator, n_in: int, n_out: int,
                   alpha: float = 1.0) -> Channel:
    return channel(rng.dirichlet(np.full(n_out, alpha), size=n_in))


# -- JSON ---------------------------------------------------------------------

def dist_from_json(obj: dict) -> JointDistribution:
    return from_tensor(obj["cardinalities"], obj["probabilities"], obj.get("labels"))


def channel_from_json(obj: dict) -> Channel:
    return Channel(tuple(obj["input_cardinalities"]), tuple(obj["output_cardinalities"]),
                   np.asarray(obj["kernel"], dtype=float))


def load_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    if "kernel" in obj:
        return channel_from_json(obj)
    return dist_from_json(obj)


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_json(), fh, indent=2)
