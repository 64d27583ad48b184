"""Two-way channels: PR boxes, no-signaling checks and the channel functional G^z.

For a two-way channel p(y1, y2 | x1, x2), G^z is the largest, over input
pairs, of the bipartite ribbon functional of the output pair
    max_U -I(U; Y1 Y2) + l1 I(U; Y1) + l2 I(U; Y2).
If G^z(p) <= 0 < G^z(q) at some lambda in [0, 1]^2 and p has zero capacity,
then q cannot be simulated from any number of uses of p.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .dualreg import GEvaluation, g_side_info
from .errors import AlphabetTooLarge, DimensionMismatch, EtaOutOfRange, PreconditionNotZeroCapacity
from .prob import Channel, JointDistribution, group, mutual_information
from .localreg import lambda_member
from .ribbon import hc_member_aux
from .results import Verdict

TwoWayChannel = Channel


def two_way_channel(tensor) -> Channel:
    """Build a two-way channel from an array indexed [x1, x2, y1, y2]."""
    t = np.asarray(tensor, dtype=float)
    if t.ndim != 4:
        raise DimensionMismatch("expected an array indexed [x1, x2, y1, y2]")
    n1, n2, m1, m2 = t.shape
    return Channel((n1, n2), (m1, m2), t.reshape(n1 * n2, m1 * m2))


def _check_two_way(ch: Channel):
    if len(ch.input_cardinalities) != 2 or len(ch.output_cardinalities) != 2:
        raise DimensionMismatch("two-way channels have two inputs and two outputs")


def pr_box(eta: float) -> Channel:
    """PR_eta: (1 + eta)/4 when y1 xor y2 = x1 and x2, else (1 - eta)/4."""
    if not 0.0 <= eta <= 1.0 or not math.isfinite(eta):
        raise EtaOutOfRange(f"eta = {eta} outside [0, 1]")
    t = np.empty((2, 2, 2, 2))
    for x1, x2, y1, y2 in np.ndindex(2, 2, 2, 2):
        t[x1, x2, y1, y2] = (1 + eta) / 4 if (y1 ^ y2) == (x1 & x2) else (1 - eta) / 4
    return two_way_channel(t)


def output_pair(ch: Channel, x1: int, x2: int) -> JointDistribution:
    """Joint distribution of (Y1, Y2) for the input pair (x1, x2)."""
    _check_two_way(ch)
    return JointDistribution(ch.tensor[x1, x2])


def zero_capacity_check(ch: Channel, tol: float = 1e-12) -> tuple[bool, dict]:
    """No-signaling test: p(y1 | x1, x2) free of x2 and p(y2 | x1, x2) free of x1.

    This per-input marginal condition implies I(X2; Y1 | X1) = I(X1; Y2 | X2) = 0
    for every input distribution.
    """
    _check_two_way(ch)
    t = ch.tensor
    m1 = t.sum(axis=3)  # [x1, x2, y1]
    m2 = t.sum(axis=2)  # [x1, x2, y2]
    dev1 = float(np.max(np.abs(m1 - m1[:, :1, :])))
    dev2 = float(np.max(np.abs(m2 - m2[:1, :, :])))
    ok = dev1 <= tol and dev2 <= tol
    return ok, {"zero_capacity": ok, "max_dev_y1_on_x2": dev1, "max_dev_y2_on_x1": dev2, "tol": tol}


def g_z_pair(dist: JointDistribution, l1: float, l2: float, method: str = "optimizer",
             restarts: int = 32, seed: int = 0, grid_step: float = 0.02) -> GEvaluation:
    """Bipartite functional on an output pair (Y1, Y2)."""
    if dist.k != 2:
        raise DimensionMismatch("G^z needs a bipartite distribution")
    return g_side_info(dist, (0, 1), [l1, l2], method=method, restarts=restarts, seed=seed,
                       grid_step=grid_step)


def g_z_channel(ch: Channel, l1: float, l2: float, method: str = "optimizer", restarts: int = 32,
                seed: int = 0, grid_step: float = 0.02) -> GEvaluation:
    """max over input pairs of G^z of the output pair; the argmax input is recorded."""
    _check_two_way(ch)
    n1, n2 = ch.input_cardinalities
    best, best_in, per = None, None, {}
    cache: dict[bytes, GEvaluation] = {}
    for x1 in range(n1):
        for x2 in range(n2):
            d = output_pair(ch, x1, x2)
            key = d.p.tobytes()
            if key not in cache:
                cache[key] = g_z_pair(d, l1, l2, method, restarts, seed, grid_step)
            g = cache[key]
            per[f"{x1},{x2}"] = g.value
            if best is None or g.value > best.value:
                best, best_in = g, (x1, x2)
    return GEvaluation(best.value, best.maximizer, True, {"argmax_input": best_in, "per_input": per,
                                                          "method": method})


def g_z_member(ch: Channel, l1: float, l2: float, tol: float = 1e-6, restarts: int = 32,
               seed: int = 0, cache: dict | None = None):
    """Per-input ribbon verdicts; returns (is_member, certified_non_member, margin, argmax_input)."""
    _check_two_way(ch)
    cache = {} if cache is None else cache
    n1, n2 = ch.input_cardinalities
    worst, worst_in, certified = -math.inf, None, False
    member = True
    for x1 in range(n1):
        for x2 in range(n2):
            d = output_pair(ch, x1, x2)
            key = (d.p.tobytes(), float(l1), float(l2))
            if key not in cache:
                cache[key] = hc_member_aux(d, [l1, l2], tol=tol, restarts=restarts, seed=seed)
            r = cache[key]
            if r.margin > worst:
                worst, worst_in = r.margin, (x1, x2)
            if r.verdict is Verdict.CERTIFIED_NON_MEMBER:
                certified = True
                member = False
    return member, certified, worst, worst_in


def _locally_member(ch: Channel, l1: float, l2: float, cache: dict) -> bool:
    """Exact second-order screen on every output pair; failure rules out membership."""
    n1, n2 = ch.input_cardinalities
    for x1 in range(n1):
        for x2 in range(n2):
            d = output_pair(ch, x1, x2)
            key = (d.p.tobytes(), l1, l2)
            if key not in cache:
                cache[key] = lambda_member(d, (0, 1), [l1, l2]).is_member
            if not cache[key]:
                return False
    return True


def lambda_grid(n: int = 41, n_random: int = 32, seed: int = 0) -> np.ndarray:
    """n x n grid of [0, 1]^2 followed by uniformly random points."""
    g = np.linspace(0.0, 1.0, n)
    pts = [(a, b) for a in g for b in g]
    rng = np.random.default_rng(seed)
    pts += [tuple(x) for x in rng.random((n_random, 2))]
    return np.asarray(pts)


def simulation_precondition(p_channel: Channel, q_channel: Channel, lambda_samples=None,
                            tol: float = 1e-6, restarts: int = 32, seed: int = 0,
                            grid_resolution: int = 41, n_random: int = 32,
                            confirm_grid_step: float = 0.02) -> dict:
    """Search lambda with G^z(p) <= tol (heuristic) and G^z(q) > tol (certified).

    Lambdas with l1 + l2 <= 1 lie in every such region and are skipped. Among
    all witnesses the one with the largest certified G^z(q) is reported; its
    p-side value is re-evaluated on the posterior grid as an independent check.
    """
    ok, zc = zero_capacity_check(p_channel)
    if not ok:
        raise PreconditionNotZeroCapacity("source channel signals; the test needs zero capacity")
    if lambda_samples is None:
        lambda_samples = lambda_grid(grid_resolution, n_random, seed)
    cache_p: dict = {}
    cache_q: dict = {}
    cache_local: dict = {}
    best = None
    n_witness = 0
    for lam in np.asarray(lambda_samples, dtype=float):
        l1, l2 = float(lam[0]), float(lam[1])
        if l1 + l2 <= 1.0:
            continue
        if not _locally_member(p_channel, l1, l2, cache_local):
            continue
        q_member, q_cert, q_margin, q_in = g_z_member(q_channel, l1, l2, tol, restarts, seed, cache_q)
        if not q_cert or q_margin <= tol:
            continue
        p_member, _, p_margin, p_in = g_z_member(p_channel, l1, l2, tol, restarts, seed, cache_p)
        if not p_member:
            continue
        n_witness += 1
        if best is None or q_margin > best[1]:
            best = ((l1, l2), q_margin, p_margin, q_in, p_in)
    report = {"status": "pass", "witness_lambda": None, "g_values": None, "argmax_inputs": None,
              "grid_resolution": grid_resolution, "n_random": n_random, "tol": tol, "seed": seed,
              "zero_capacity": zc, "n_witnesses": n_witness}
    if best is not None:
        (l1, l2), q_margin, p_margin, q_in, p_in = best
        p_grid = g_z_channel(p_channel, l1, l2, method="grid", grid_step=confirm_grid_step)
        report.update({"status": "witness", "witness_lambda": [l1, l2],
                       "g_values": {"p_best_found": p_margin, "p_grid": p_grid.value,
                                    "q_certified": q_margin},
                       "argmax_inputs": {"p": list(p_in), "q": list(q_in)}})
    return report


# -- Lemma-type inequality for one channel use ------------------------------------

def _joint_after_channel(p_ab: JointDistribution, f_map, g_map, ch: Channel) -> np.ndarray:
    """Array indexed [a, b, x1, x2, y1, y2]."""
    pab = p_ab.p
    na, nb = pab.shape
    n1, n2 = ch.input_cardinalities
    m1, m2 = ch.output_cardinalities
    t = ch.tensor
    out = np.zeros((na, nb, n1, n2, m1, m2))
    for a in range(na):
        for b in range(nb):
            x1, x2 = int(f_map[a]), int(g_map[b])
            out[a, b, x1, x2] = pab[a, b] * t[x1, x2]
    return out


def lemma12_check(p_ab: JointDistribution, f_map: Sequence[int], g_map: Sequence[int], channel: Channel,
                  l1: float, l2: float, grid_step: float = 0.05, restarts: int = 32, seed: int = 0,
                  slack: float = 5e-3) -> dict:
    """Check G^z(AY1, BY2) - l1 I(X2;Y1|X1) - l2 I(X1;Y2|X2) <= G^z(A,B) + G^z(channel).

    The left side is a best-found (lower) value; each right-side functional is
    the larger of the optimizer value and the posterior-grid value, so search
    gaps make the check conservative rather than producing false failures.
    """
    _check_two_way(channel)
    cards = list(p_ab.cardinalities) + list(channel.input_cardinalities) + list(channel.output_cardinalities)
    if p_ab.k != 2 or any(c > 2 for c in cards):
        raise AlphabetTooLarge("lemma check is limited to binary alphabets")
    J = _joint_after_channel(p_ab, f_map, g_map, channel)
    # (A, Y1, B, Y2) grouped into the two parties
    aybY = JointDistribution(np.transpose(J.sum(axis=(2, 3)), (0, 2, 1, 3)))
    parties = group(aybY, [(0, 1), (2, 3)])
    lhs_g = g_z_pair(parties, l1, l2, restarts=restarts, seed=seed)
    xy = JointDistribution(J.sum(axis=(0, 1)))  # X1, X2, Y1, Y2
    leak1 = mutual_information(xy, (1,), (2,), (0,))
    leak2 = mutual_information(xy, (0,), (3,), (1,))
    lhs = lhs_g.value - l1 * leak1 - l2 * leak2

    def upper(dist):
        a = g_z_pair(dist, l1, l2, "optimizer", restarts, seed).value
        b = g_z_pair(dist, l1, l2, "grid", grid_step=grid_step).value
        return max(a, b)

    g_ab = upper(p_ab)
    n1, n2 = channel.input_cardinalities
    g_ch = max(upper(output_pair(channel, x1, x2)) for x1 in range(n1) for x2 in range(n2))
    rhs = g_ab + g_ch
    return {"lhs_lower": lhs, "g_parties": lhs_g.value, "leak_terms": [leak1, leak2],
            "rhs_upper": rhs, "g_ab": g_ab, "g_channel": g_ch, "slack": slack,
            "violation": lhs - rhs, "ok": bool(lhs <= rhs + slack), "lambda": [l1, l2],
            "grid_step": grid_step}
