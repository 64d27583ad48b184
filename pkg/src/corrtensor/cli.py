"""Command-line front end.

Exit codes: 0 success, 1 an asserted check failed, 2 usage error, 3 input file
missing or unreadable, 4 input could not be parsed, 5 the computation rejected
the input.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import harness, prob, twoway
from .errors import CorrTensorError
from .localreg import lambda_boundary
from .maxcorr import rho
from .dualreg import g_fork_k2, g_helper, g_side_info
from .ribbon import BoundaryPoint, boundary_csv, hc_boundary_sample, s_star, secure_sim_precondition, \
    unit_directions

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_FILE, EXIT_PARSE, EXIT_DOMAIN = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


class InputFileError(Exception):
    pass


class ParseError(Exception):
    pass


def thread_cap() -> int:
    """Parallelism cap from CORRTENSOR_THREADS (default 1; work runs in a fixed order)."""
    raw = os.environ.get("CORRTENSOR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"CORRTENSOR_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("CORRTENSOR_THREADS must be a positive integer")
    return n


def _load(path: str, kind: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise InputFileError(f"cannot read {path}: {e.strerror}") from None
    try:
        obj = json.loads(text)
        if kind == "channel":
            return prob.channel_from_json(obj)
        return prob.dist_from_json(obj)
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ParseError(f"{path}: not a valid {kind} file ({e})") from None
    except (ValueError, CorrTensorError) as e:
        raise ParseError(f"{path}: {e}") from None


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(not math.isfinite(v) for v in vals):
        raise UsageError(f"expected finite numbers, got {text!r}")
    return vals


def _nonneg(v: float, name: str) -> float:
    if not math.isfinite(v) or v < 0:
        raise UsageError(f"--{name} must be a finite non-negative number")
    return v


def _positive(v, name: str):
    if not (isinstance(v, int) or math.isfinite(v)) or v <= 0:
        raise UsageError(f"--{name} must be positive")
    return v


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _scalar(v: float, as_json: bool, extra: dict | None = None) -> None:
    if as_json:
        _emit({"value": float(v), **(extra or {})})
    else:
        print(repr(float(round(v, 12))))


# -- subcommands ----------------------------------------------------------------------

def cmd_compute(a) -> int:
    if a.what == "gz":
        if not a.channel:
            raise UsageError("compute gz needs --channel")
        ch = _load(a.channel, "channel")
        l1, l2 = (_floats(a.lambdas) + [math.nan])[:2]
        if math.isnan(l2):
            raise UsageError("compute gz needs --lambdas l1,l2")
        g = twoway.g_z_channel(ch, l1, l2, method=a.method, seed=a.seed, grid_step=a.grid_step)
        _scalar(g.value, a.json, {"argmax_input": list(g.diagnostics["argmax_input"])})
        return EXIT_OK
    if not a.dist:
        raise UsageError(f"compute {a.what} needs --dist")
    d = _load(a.dist, "distribution")
    if a.what == "rho":
        _scalar(rho(d, a.i, a.j), a.json)
    elif a.what == "sstar":
        _scalar(s_star(d, a.i, a.j, method=a.sstar_method, seed=a.seed), a.json)
    elif a.what == "ghelper":
        lam = _nonneg(_floats(a.lambdas)[0], "lambdas")
        _scalar(g_helper(d, a.i, a.j, lam, method=a.method, seed=a.seed, grid_step=a.grid_step).value, a.json)
    elif a.what == "gsideinfo":
        lam = [_nonneg(x, "lambdas") for x in _floats(a.lambdas)]
        _scalar(g_side_info(d, d.k - 1, lam, method=a.method, seed=a.seed, grid_step=a.grid_step).value,
                a.json)
    elif a.what == "gfork":
        l1, l2 = ([_nonneg(x, "lambdas") for x in _floats(a.lambdas)] + [math.nan])[:2]
        if math.isnan(l2):
            raise UsageError("compute gfork needs --lambdas l1,l2")
        _scalar(g_fork_k2(d, l1, l2, method=a.method, seed=a.seed, grid_step=a.grid_step).value, a.json)
    return EXIT_OK


def _directions(n: int, k: int, seed: int) -> np.ndarray:
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        return unit_directions(n, 2)
    rng = np.random.default_rng(seed)
    d = np.abs(rng.standard_normal((n, k)))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def cmd_region(a) -> int:
    d = _load(a.dist, "distribution")
    _positive(a.directions, "directions")
    _positive(a.resolution, "resolution")
    if a.which == "hc":
        pts = hc_boundary_sample(d, _directions(a.directions, d.k, a.seed), resolution=a.resolution)
    else:
        helper = d.k - 1
        pts = []
        for u in _directions(a.directions, d.k - 1, a.seed):
            t = lambda_boundary(d, helper, u)
            pts.append(BoundaryPoint(tuple(u), t, t, t, 0.0, 0.0, math.isfinite(t)))
    text = boundary_csv(pts)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(a) -> int:
    d = _load(a.dist, "distribution")
    _positive(a.samples, "samples")
    if a.tol is not None:
        _nonneg(a.tol, "tol")
    if a.prop == "tensorization":
        rep = harness.check_tensorization(a.measure, d, n=a.n, tol=a.tol, seed=a.seed, n_samples=a.samples)
    elif a.prop == "dataproc":
        chans = []
        for path in a.channels or []:
            chans.append(None if path == "id" else _load(path, "channel"))
        if not chans:
            rng = np.random.default_rng(a.seed)
            chans = [prob.random_channel(rng, c, c) for c in d.cardinalities]
        rep = harness.check_data_processing(a.measure, d, chans, tol=a.tol, seed=a.seed, n_samples=a.samples)
    else:
        if not a.dist2:
            raise UsageError("check additivity needs --dist2")
        q = _load(a.dist2, "distribution")
        rep = harness.check_additivity(a.measure, d, q, tol=2e-3 if a.tol is None else a.tol, seed=a.seed,
                                       n_samples=a.samples)
    text = rep.dumps()
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_twoway(a) -> int:
    if a.what == "prbox":
        _emit(twoway.pr_box(a.eta).to_json())
        return EXIT_OK
    if not (a.source and a.target):
        raise UsageError("twoway simcheck needs --from and --to")
    p = _load(a.source, "channel")
    q = _load(a.target, "channel")
    rep = twoway.simulation_precondition(p, q, seed=a.seed, grid_resolution=a.grid_resolution)
    if rep["status"] == "witness":
        print("witness lambda: " + ",".join(format(x, ".17g") for x in rep["witness_lambda"]))
    else:
        print("no witness found")
    if a.json:
        _emit(rep)
    return EXIT_OK


def cmd_securesim(a) -> int:
    src = _load(a.source, "distribution")
    tgt = _load(a.target, "distribution")
    lams = [lam for lam in twoway.lambda_grid(a.grid_resolution, 0, a.seed) if lam.sum() > 1.0]
    _emit(secure_sim_precondition(src, tgt, lams, seed=a.seed))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrtensor", description="Tensorizing correlation measures.")
    ap.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    c = sub.add_parser("compute", parents=[common], help="evaluate a measure")
    c.add_argument("what", choices=["rho", "sstar", "gz", "ghelper", "gsideinfo", "gfork"])
    c.add_argument("--dist")
    c.add_argument("--channel")
    c.add_argument("--lambdas", default="1", help="comma-separated lambda values")
    c.add_argument("-i", type=int, default=0)
    c.add_argument("-j", type=int, default=1)
    c.add_argument("--method", choices=["optimizer", "grid", "best"], default="optimizer")
    c.add_argument("--sstar-method", choices=["direct", "ribbon", "lce"], default="direct")
    c.add_argument("--grid-step", type=float, default=0.02)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_compute)

    r = sub.add_parser("region", parents=[common], help="sample a region boundary as CSV")
    r.add_argument("which", choices=["hc", "lambda"])
    r.add_argument("--dist", required=True)
    r.add_argument("--directions", type=int, default=16)
    r.add_argument("--resolution", type=float, default=1e-3)
    r.add_argument("--out")
    r.set_defaults(func=cmd_region)

    k = sub.add_parser("check", parents=[common], help="run a property check and emit a JSON report")
    k.add_argument("prop", choices=["tensorization", "dataproc", "additivity"])
    k.add_argument("--measure", required=True, choices=list(harness.MEASURES))
    k.add_argument("--dist", required=True)
    k.add_argument("--dist2")
    k.add_argument("--channels", nargs="*", help="one channel file (or 'id') per variable")
    k.add_argument("--n", type=int, default=2)
    k.add_argument("--samples", type=int, default=16)
    k.add_argument("--tol", type=float)
    k.add_argument("--out")
    k.set_defaults(func=cmd_check)

    t = sub.add_parser("twoway", parents=[common], help="two-way channel tools")
    t.add_argument("what", choices=["prbox", "simcheck"])
    t.add_argument("--eta", type=float, default=1.0)
    t.add_argument("--from", dest="source")
    t.add_argument("--to", dest="target")
    t.add_argument("--grid-resolution", type=int, default=41)
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=cmd_twoway)

    s = sub.add_parser("securesim", parents=[common], help="secure simulation precondition")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--grid-resolution", type=int, default=21)
    s.set_defaults(func=cmd_securesim)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        thread_cap()
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputFileError as e:
        print(f"file error: {e}", file=sys.stderr)
        return EXIT_FILE
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except CorrTensorError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
