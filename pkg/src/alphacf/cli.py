"""Command-line front end.

Every subcommand prints a one-line summary and, with ``--out``, writes its
table or object atomically (temporary file plus rename).  Exit codes: 0 on
success, 1 when an invariant check fails, 2 on bad input, 3 when a numeric
iteration does not converge.  ``--config FILE`` reads a JSON object whose
keys mirror the long flag names; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from .mapcore import AlphaMap, DomainError, expand
from .transfer import ConvergenceError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT, EXIT_NO_CONVERGENCE = 0, 1, 2, 3
ALPHA_RANGE = (0.05, 1.0)


class InputError(ValueError):
    pass


# ----------------------------------------------------------------------------
# validation and output


def _alpha(value) -> float:
    a = float(value)
    if not ALPHA_RANGE[0] <= a <= ALPHA_RANGE[1]:
        raise InputError(f"alpha must lie in [{ALPHA_RANGE[0]}, {ALPHA_RANGE[1]}], got {a}")
    return a


def _cells(value) -> int:
    n = int(value)
    if n < 2 or n & (n - 1):
        raise InputError(f"--cells must be a power of two, got {n}")
    return n


def _seed(value) -> int:
    s = int(value)
    if not 0 <= s < 2**64:
        raise InputError("--seed must be a 64-bit unsigned integer")
    return s


def _branches(value):
    if value is None or str(value).lower() in ("inf", "none"):
        return None
    j = int(value)
    if j < 2:
        raise InputError("--branches must be at least 2")
    return j


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _json_text(command: str, params: dict, result) -> str:
    return json.dumps({"command": command, "params": params, "result": result}, indent=2, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not serialisable")


def _emit(args, command, params, result, header=None, rows=None):
    """Write the table (csv) or object (json) to ``--out``, or to stdout when no summary is printed."""
    if args.format == "json" or header is None:
        text = _json_text(command, params, result)
    else:
        text = _csv_text(header, rows)
    if args.out:
        atomic_write(args.out, text)
    return text


# ----------------------------------------------------------------------------
# commands


def cmd_expand(args) -> int:
    amap = AlphaMap(_alpha(args.alpha))
    if args.n < 0:
        raise InputError("--n must be nonnegative")
    e = expand(amap, args.x, args.n)
    conv = e.convergents()
    digits = str(e)
    result = {"digits": [str(d) for d in e.digits], "convergents": [list(c) for c in conv], "residual": e.residual}
    params = {"alpha": amap.alpha, "x": args.x, "n": args.n}
    if args.format == "json":
        text = _emit(args, "expand", params, result)
        if not args.out:
            sys.stdout.write(text)
        return EXIT_OK
    print(f"digits: {digits}")
    print("convergents: " + ", ".join(f"{p}/{q}" for p, q in conv))
    print(f"residual: {e.residual!r}")
    if args.out:
        rows = [(k, str(d) if k else "", p, q) for k, ((p, q), d) in enumerate(zip(conv, (None,) + e.digits))]
        atomic_write(args.out, _csv_text(["k", "digit", "p", "q"], rows))
    return EXIT_OK


def cmd_density(args) -> int:
    from .transfer import invariant_density

    amap = AlphaMap(_alpha(args.alpha))
    dens = invariant_density(amap, _cells(args.cells), _branches(args.branches), max_iter=args.max_iter,
                             realization=args.realization)
    e = dens.edges
    params = {"alpha": amap.alpha, "cells": dens.n_cells, "branches": args.branches, "realization": args.realization}
    result = {"cell_left": e[:-1], "cell_right": e[1:], "value": dens.values,
              "iterations": dens.meta["iterations"], "residual": dens.meta["residual"]}
    _emit(args, "density", params, result, ["cell_left", "cell_right", "value"],
          zip(e[:-1], e[1:], dens.values))
    print(f"density alpha={amap.alpha:g} cells={dens.n_cells}: min {dens.values.min():.6g}, "
          f"max {dens.values.max():.6g}, {dens.meta['iterations']} iterations")
    return EXIT_OK


def cmd_entropy(args) -> int:
    from .entropy import birkhoff_entropy, rohlin_entropy
    from .transfer import invariant_density

    amap = AlphaMap(_alpha(args.alpha))
    dens = invariant_density(amap, _cells(args.cells), _branches(args.branches), max_iter=args.max_iter)
    if args.method == "rohlin":
        est = rohlin_entropy(amap, dens)
    else:
        est = birkhoff_entropy(amap, args.n, args.m, _seed(args.seed), density=dens, lebesgue=args.lebesgue)
    params = {"alpha": amap.alpha, "cells": args.cells, "branches": args.branches, "method": args.method}
    result = {"value": est.value, "error_proxy": est.error_proxy}
    _emit(args, "entropy", params, result, ["alpha", "method", "value", "error_proxy"],
          [(amap.alpha, est.method, est.value, est.error_proxy)])
    print(f"h(alpha={amap.alpha:g}) = {est.value:.10f} ({est.method}, error proxy {est.error_proxy:.2e})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .entropy import SweepConfig, alpha_grid, sweep_entropy, write_fit_json

    if args.step <= 0:
        raise InputError("--step must be positive")
    grid = alpha_grid(_alpha(args.start), _alpha(args.stop), args.step)
    cfg = SweepConfig(n_cells=_cells(args.cells), j_max=_branches(args.branches), workers=args.workers)
    res = sweep_entropy(grid, cfg)
    params = {"from": args.start, "to": args.stop, "step": args.step, "cells": cfg.n_cells, "branches": args.branches}
    rows = [(e.alpha, e.value, e.error_proxy, cfg.n_cells, "inf" if cfg.j_max is None else cfg.j_max)
            for e in res.entropies]
    result = {"alpha": [r[0] for r in rows], "h_rohlin": [r[1] for r in rows], "err": [r[2] for r in rows],
              "fits": res.fits_json(), "gaps": res.gaps}
    _emit(args, "sweep", params, result, ["alpha", "h_rohlin", "err", "n_cells", "j_max"], rows)
    if args.fit_out:
        write_fit_json(res, args.fit_out)
    print(f"sweep: {len(rows)} values, {len(res.gaps)} gaps; C(s=0.49) = {res.fits[0.49].C:.4f}")
    return EXIT_OK


def cmd_clt(args) -> int:
    from .stochastics import birkhoff_samples, normality_test, variance_green_kubo
    from .transfer import invariant_density

    amap = AlphaMap(_alpha(args.alpha))
    dens = invariant_density(amap, _cells(args.cells))
    sample = birkhoff_samples(amap, args.observable, args.n, args.m, _seed(args.seed), density=dens)
    sigma2 = variance_green_kubo(amap, args.observable, dens).value
    ks = normality_test(sample, math.sqrt(sigma2)) if sigma2 > 0 else None
    params = {"alpha": amap.alpha, "observable": args.observable, "n": args.n, "m": args.m, "seed": args.seed}
    result = {"sigma2_green_kubo": sigma2, "center": sample.center,
              "ks_statistic": None if ks is None else ks.statistic,
              "ks_critical": None if ks is None else ks.critical,
              "passed": None if ks is None else ks.passed,
              "normalized_sums": sample.normalized_sums}
    _emit(args, "clt", params, result, ["sample_index", "normalized_sum"], enumerate(sample.normalized_sums))
    if ks is None:
        print("clt: zero limit variance, normality test not applicable")
    else:
        print(f"clt: KS D = {ks.statistic:.5f} vs critical {ks.critical:.5f} -> {'pass' if ks.passed else 'fail'}")
    return EXIT_OK


def cmd_variance(args) -> int:
    from .stochastics import variance_eigen, variance_green_kubo, variance_mn
    from .transfer import invariant_density

    amap = AlphaMap(_alpha(args.alpha))
    dens = invariant_density(amap, _cells(args.cells))
    methods = ("mn", "green_kubo", "eigen") if args.method == "all" else (args.method,)
    ests = []
    for m in methods:
        if m == "mn":
            ests.append(variance_mn(amap, args.observable, ns=(args.n // 8, args.n // 4, args.n // 2, args.n),
                                    m=args.m, seed=_seed(args.seed), density=dens))
        elif m == "green_kubo":
            ests.append(variance_green_kubo(amap, args.observable, dens, k_max=args.k_max))
        else:
            ests.append(variance_eigen(amap, args.observable, n_cells=dens.n_cells, density=dens))
    params = {"alpha": amap.alpha, "observable": args.observable, "cells": args.cells}
    result = [{"method": e.method, "value": e.value, "params": e.params} for e in ests]
    rows = [(amap.alpha, e.method, e.value, json.dumps(e.params, sort_keys=True, default=_jsonable)) for e in ests]
    _emit(args, "variance", params, result, ["alpha", "method", "value", "params"], rows)
    print("variance: " + ", ".join(f"{e.method}={e.value:.6f}" for e in ests))
    return EXIT_OK


def cmd_keller(args) -> int:
    from .continuity import keller_construct

    cert = keller_construct(_alpha(args.alpha), _alpha(args.beta), bridge=args.bridge)
    keys = ("alpha", "beta", "delta", "sup_displacement", "sup_derivative_defect", "agreement_measure", "kappa")
    obj = {k: getattr(cert, k) for k in keys}
    text = json.dumps(obj, indent=2) + "\n"
    if args.format == "csv":
        text = _csv_text(list(keys), [tuple(obj.values())])
    if args.out:
        atomic_write(args.out, text)
    print(f"keller: kappa = {cert.kappa:.6f}, displacement {cert.sup_displacement:.3e}, "
          f"agreement {cert.agreement_measure:.4f}")
    return EXIT_OK


def cmd_invariants(args) -> int:
    from .invariants import run_suite

    amap = AlphaMap(_alpha(args.alpha))
    if args.n < 1:
        raise InputError("--n must be at least 1")
    checks = run_suite(amap, args.n)
    params = {"alpha": amap.alpha, "n": args.n}
    result = [{"name": c.name, "passed": bool(c.passed), "details": c.details} for c in checks]
    _emit(args, "invariants", params, result, ["check", "passed"], [(c.name, c.passed) for c in checks])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK_FAILED


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphacf", description="Numerics for alpha-continued fraction maps.")
    parser.add_argument("--config", help="JSON file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cells=4096):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="output file (written atomically)")
        p.add_argument("--config", help="JSON file with default flag values")
        if cells:
            p.add_argument("--cells", type=int, default=cells)

    p = sub.add_parser("expand", help="digits, convergents and residual of a point")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    common(p, cells=0)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("density", help="invariant density on a grid")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--branches", default=None)
    p.add_argument("--realization", choices=("ulam", "branch_sum"), default="ulam")
    p.add_argument("--max-iter", type=int, default=100000)
    common(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("entropy", help="metric entropy at one parameter")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--branches", default=None)
    p.add_argument("--method", choices=("rohlin", "birkhoff"), default="rohlin")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lebesgue", action="store_true")
    p.add_argument("--max-iter", type=int, default=100000)
    common(p)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("sweep", help="entropy over a parameter grid")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--branches", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--fit-out", help="JSON file for the Hölder fits")
    common(p, cells=1024)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("clt", help="normalised Birkhoff sums and a normality test")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--observable", default="logderiv")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--m", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("variance", help="limit variance by several estimators")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--observable", default="logderiv")
    p.add_argument("--method", choices=("all", "mn", "green_kubo", "eigen"), default="all")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--m", type=int, default=20000)
    p.add_argument("--k-max", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("keller", help="near-conjugacy certificate between two parameters")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--bridge", choices=("sqrt", "displacement"), default="sqrt")
    common(p, cells=0)
    p.set_defaults(func=cmd_keller)

    p = sub.add_parser("invariants", help="run the property checks at one parameter")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, default=4)
    common(p, cells=0)
    p.set_defaults(func=cmd_invariants)
    return parser


def _config_defaults(path: str) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InputError("config file must hold a JSON object")
    renames = {"from": "start", "to": "stop"}
    return {renames.get(k, k).replace("-", "_"): v for k, v in cfg.items()}


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path:
        defaults = _config_defaults(path)
        choices = parser._subparsers._group_actions[0].choices
        command = next((a for a in argv if a in choices), defaults.get("command"))
        if command in choices:
            sub = choices[command]
            # flags supplied by the config are no longer required on the command line
            for action in sub._actions:
                if action.dest in defaults:
                    action.required = False
            sub.set_defaults(**{k: v for k, v in defaults.items() if k != "command"})
            if command not in argv:
                argv.insert(0, command)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except json.JSONDecodeError as exc:
        print(f"error: bad config file: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_BAD_INPUT
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ConvergenceError as exc:
        print(f"error: no convergence: {exc} (last residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (DomainError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
