"""Command-line entry point.

Exit codes: 0 on success, 1 on usage errors, 2 on domain or precondition
errors (with ``{"error": ..., "detail": ...}`` JSON on stderr).

Every artifact embeds ``{tool_version, config, seed}``; ``--replay FILE``
re-runs the embedded config and reproduces the artifact byte for byte.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__, bgmodel, conditions, experiments, io, localmin
from .errors import DictIdError
from .model import CoefficientMatrix, Dictionary

# flags that never influence the payload and are kept out of the config
_NON_CONFIG = {"command", "output", "threads", "replay", "global_output", "func"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float(text):
    return float(text)


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed(text):
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser():
    parser = _Parser(prog="dictid", description="Local identifiability of l1 dictionary learning.")
    parser.add_argument("--version", action="version", version=f"dictid {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $DICTID_THREADS or all cores)")
    parser.add_argument("--replay", metavar="FILE", help="re-run the config embedded in FILE")
    parser.add_argument("-o", "--output", dest="global_output", metavar="FILE",
                        help="output file for --replay (default: stdout)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-o", "--output", metavar="FILE", help="output file (default: stdout)")
        p.set_defaults(func=func)
        return p

    p = add("sample", cmd_sample, "draw a Bernoulli-Gaussian coefficient matrix (CSV)")
    p.add_argument("--p", type=_float, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)

    p = add("check", cmd_check, "evaluate the local-minimum conditions (JSON report)")
    p.add_argument("--dict", required=True, metavar="FILE")
    p.add_argument("--coeff", required=True, metavar="FILE")
    p.add_argument("--p-norm", type=_float, default=2.0)
    p.add_argument("--tol", type=_float, default=conditions.DEFAULT_TOL_STRICT)
    p.add_argument("--radius", choices=("auto", "exact", "cover"), default="auto")
    p.add_argument("--cover-eps", type=_float, default=0.05)
    p.add_argument("--cover-seed", type=_seed, default=0)

    p = add("bounds", cmd_bounds, "evaluate (and optionally validate) concentration bounds")
    p.add_argument("--which", required=True,
                   choices=("gamma", "support", "ball", "beta", "theorem4"))
    for name, typ in (("p", _float), ("K", int), ("N", int), ("L", int), ("M", int),
                      ("n", int), ("eps", _float), ("mu2", _float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--validate", action="store_true")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=_seed)

    p = add("landscape", cmd_landscape, "2D cost landscape and its local minima")
    p.add_argument("--p", type=_float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--mu", type=_float, required=True)
    p.add_argument("--resolution", type=int, default=experiments.DEFAULT_RESOLUTION)
    p.add_argument("--sin-tol", type=_float, default=experiments.DEFAULT_SIN_TOL)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=_seed, required=True)

    p = add("phase", cmd_phase, "coherence / sparsity phase diagram (CSV)")
    p.add_argument("--mu-grid", type=_floats, required=True)
    p.add_argument("--p-grid", type=_floats, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--resolution", type=int, default=experiments.DEFAULT_RESOLUTION)
    p.add_argument("--seed", type=_seed, required=True)

    p = add("snapshot", cmd_snapshot, "zonotope snapshot for K = 3 (JSON)")
    p.add_argument("--dict", required=True, metavar="FILE")
    p.add_argument("--coeff", required=True, metavar="FILE")
    p.add_argument("--k", type=int, required=True, help="row index, 0-based")

    p = add("verify-localmin", cmd_verify, "random tangent-direction battery (JSON)")
    p.add_argument("--dict", required=True, metavar="FILE")
    p.add_argument("--coeff", required=True, metavar="FILE")
    p.add_argument("--directions", type=int, default=1000)
    p.add_argument("--seed", type=_seed, required=True)
    return parser


# -- config round trip --------------------------------------------------------

def config_of(args):
    cfg = {"command": args.command}
    for key, val in sorted(vars(args).items()):
        if key in _NON_CONFIG or val is None:
            continue
        cfg[key] = val
    return io.jsonable(cfg)


def argv_of(config):
    argv = [config["command"]]
    for key, val in config.items():
        if key == "command" or val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        if val is True:
            argv.append(flag)
        elif isinstance(val, list):
            argv += [flag, ",".join(io.fmt(v) for v in val)]
        elif isinstance(val, float):
            argv += [flag, io.fmt(val)]
        else:
            argv += [flag, str(val)]
    return argv


def _meta(args):
    return {
        "tool_version": __version__,
        "config": config_of(args),
        "seed": getattr(args, "seed", None),
    }


def _json_doc(args, result):
    doc = _meta(args)
    doc["result"] = result
    return io.dumps_json(doc)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_pair(args):
    D = Dictionary(io.read_matrix(args.dict))
    X = CoefficientMatrix(io.read_matrix(args.coeff))
    return D, X


# -- subcommands ----------------------------------------------------------------

def cmd_sample(args, parser):
    X = bgmodel.sample(bgmodel.BGParams(args.p, args.K, args.N, args.seed))
    return io.matrix_csv(X.X, _meta(args))


def cmd_check(args, parser):
    D, X = _load_pair(args)
    if args.radius == "exact":
        mode = conditions.ExactFacets()
    elif args.radius == "cover":
        mode = conditions.EpsCover(args.cover_eps, args.cover_seed)
    else:
        mode = None
    report = conditions.check_conditions(
        D, X, tol_strict=args.tol, p=args.p_norm, radius_mode=mode, threads=args.threads
    )
    return _json_doc(args, report.to_json())


def _need(parser, args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        parser.error("bounds --which {} needs {}".format(
            args.which, ", ".join("--" + n for n in missing)))
    return [getattr(args, n) for n in names]


def cmd_bounds(args, parser):
    which = args.which
    if args.validate:
        _need(parser, args, "seed")
    result = {"which": which}
    validations = []
    if which == "gamma":
        p, N, eps = _need(parser, args, "p", "N", "eps")
        thr, prob = bgmodel.bound_gamma(p, N, eps)
        result["gamma"] = {"threshold": thr, "prob": prob}
        ids = [("gamma", {"p": p, "N": N, "eps": eps})]
        if args.K is not None:
            thr, prob = bgmodel.bound_gamma_union(p, args.K, N, eps)
            result["gamma_union"] = {"threshold": thr, "prob": prob}
            ids.append(("gamma_union", {"p": p, "K": args.K, "N": N, "eps": eps}))
    elif which == "support":
        p, N, eps = _need(parser, args, "p", "N", "eps")
        b = bgmodel.BoundInputs(p, 1, N, eps)
        result["support"] = {
            "M_l": b.M_l, "M_u": b.M_u, "prob": bgmodel.bound_support_size(p, N, eps),
        }
        ids = [("support", {"p": p, "N": N, "eps": eps})]
    elif which == "ball":
        p, L, M, eps = _need(parser, args, "p", "L", "M", "eps")
        bb = bgmodel.bound_operator_and_ray(p, L, M, eps)
        result["operator"] = {"threshold": bb.op_threshold, "prob": bb.op_prob}
        result["ray"] = {"threshold": bb.ray_threshold, "prob": bb.ray_prob}
        par = {"p": p, "L": L, "M": M, "eps": eps}
        ids = [("operator", par), ("ray", par)]
    elif which == "beta":
        p, eps = _need(parser, args, "p", "eps")
        ids = []
        if args.K is not None and args.N is not None:
            bn, prob = bgmodel.bound_beta(p, args.K, args.N, eps)
            result["beta"] = {"beta_n": bn, "prob": prob}
        if args.L is not None and args.n is not None:
            thr, prob = bgmodel.bound_bs_norm(p, args.L, args.n, eps)
            result["bs_norm"] = {"threshold": thr, "prob": prob}
            ids.append(("beta", {"p": p, "L": args.L, "n": args.n, "eps": eps}))
        if len(result) == 1:
            parser.error("bounds --which beta needs --K and --N, or --L and --n")
        if args.validate and not ids:
            parser.error("bounds --which beta --validate needs --L and --n")
    else:
        p, K, N, mu2 = _need(parser, args, "p", "K", "N", "mu2")
        result["theorem4"] = bgmodel.theorem4(p, K, N, mu2).to_json()
        ids = [("theorem4", {"p": p, "K": K, "N": N, "mu2": mu2})]
    if args.validate:
        for bound_id, par in ids:
            v = bgmodel.validate_bound(bound_id, par, args.trials, args.seed, args.threads)
            validations.append(v.to_json())
        result["validation"] = validations
    return _json_doc(args, result)


def cmd_landscape(args, parser):
    if not 0 <= args.mu < 1:
        raise bgmodel.PreconditionFailed(f"mu must lie in [0, 1), got {args.mu}")
    thetas = experiments.phase_angles(args.mu)
    D = np.asarray(experiments.angle_dictionary(thetas))
    X = bgmodel.sample(bgmodel.BGParams(args.p, 2, args.N, args.seed))
    grid = experiments.landscape2d(D @ X.X, thetas, args.resolution, args.sin_tol)
    minima = experiments.find_local_minima(grid)
    summary = {
        "theta_star": list(grid.theta_star),
        "expected_cells": [list(c) for c in experiments.expected_cells(thetas, args.resolution)],
        "minima": [list(c) for c in minima.cells],
        "plateau": minima.plateau,
        "global_minimum": list(experiments.global_minimum(grid)),
    }
    if args.format == "json":
        summary["thetas"] = grid.thetas
        summary["values"] = grid.values
        return _json_doc(args, summary)
    rows = []
    t = grid.thetas
    with np.errstate(divide="ignore"):
        neg_inv = -1.0 / grid.values
    for i in range(args.resolution):
        for j in range(args.resolution):
            rows.append((float(t[i]), float(t[j]), float(grid.values[i, j]), float(neg_inv[i, j])))
    if args.output:
        sys.stdout.write(io.dumps_json(summary))
    return io.table_csv(("theta0", "theta1", "cost", "neg_inv_cost"), rows, _meta(args))


def cmd_phase(args, parser):
    for m in args.mu_grid:
        if not 0 <= m < 1:
            raise bgmodel.PreconditionFailed(f"mu must lie in [0, 1), got {m}")
    for p in args.p_grid:
        bgmodel.BGParams(p, 2, args.N)
    cells = experiments.phase_experiment(
        args.mu_grid, args.p_grid, args.trials, args.N, args.resolution, args.seed, args.threads
    )
    rows = [
        (c.mu, c.p, c.trials, c.missed, c.spurious, c.wrong_global, c.error_rate)
        for c in cells
    ]
    return io.table_csv(
        ("mu", "p", "trials", "missed", "spurious", "wrong_global", "error_rate"), rows, _meta(args)
    )


def cmd_snapshot(args, parser):
    D, X = _load_pair(args)
    if not 0 <= args.k < X.K:
        raise bgmodel.PreconditionFailed(f"row index {args.k} out of range for K={X.K}")
    snap = experiments.zonotope_snapshot(X, D, args.k)
    return _json_doc(args, snap.to_json())


def cmd_verify(args, parser):
    D, X = _load_pair(args)
    report = conditions.check_conditions(D, X, with_theorem3=False, threads=args.threads)
    bat = localmin.verify_battery(D, X, args.directions, args.seed, args.threads)
    result = {
        "basis": D.is_basis,
        "sc": report.sc.value,
        "directions": bat.directions,
        "counterexample_found": bat.found,
        "counterexample": bat.counterexample,
        "min_margin": bat.min_margin,
    }
    return _json_doc(args, result)


# -- driver ---------------------------------------------------------------------

def _fail(kind, detail, code):
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}) + "\n")
    return code


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.replay:
            if args.command:
                parser.error("--replay takes no subcommand")
            config = io.read_meta(args.replay)["config"]
            replayed = parser.parse_args(argv_of(config))
            replayed.threads = args.threads
            replayed.output = args.global_output
            args = replayed
        if not args.command:
            parser.error("a subcommand is required")
        if args.threads is not None and args.threads < 1:
            parser.error("--threads must be positive")
        text = args.func(args, parser)
        _emit(text, args.output)
        return 0
    except UsageError as exc:
        return _fail("usage", str(exc), 1)
    except DictIdError as exc:
        return _fail(type(exc).__name__, str(exc).strip("'\""), 2)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)


def main():
    sys.exit(run())

