"""Command line interface: ``unilearn <subcommand> [flags]``.

Subcommands: bounds, construct, verify, attack, recover, experiment.
Exit status is 0 on success, 2 on invalid arguments and 1 when a check or
a module precondition fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import bounds as bnd
from .hats import HatSpec
from .nn import INF, Mlp, NetworkClass, coefficient_norm, format_exponent, in_class, parse_exponent
from .witness import ConstructionError, construct, verify_construction

EXACTNESS_RTOL = 1e-10


class CheckFailed(RuntimeError):
    pass


def _exponent(text):
    try:
        return parse_exponent(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _floats(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False)


def _table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v!r}" if isinstance(v, float) else f"{k:<{width}}  {v}" for k, v in rows)


def _emit(args, payload: dict, rows=None, csv_row=None, out=None):
    """Print ``payload`` in the requested format, or write it to ``out``."""
    fmt = args.format
    if fmt == "table" and rows is not None:
        text = _table(rows)
    elif fmt == "csv" and csv_row is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(csv_row))
        w.writeheader()
        w.writerow(csv_row)
        text = buf.getvalue().rstrip("\n")
    else:
        text = _dump(payload)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_net(path) -> Mlp:
    with open(path) as fh:
        return Mlp.from_json(fh.read())


# -- bounds -----------------------------------------------------------------


def cmd_bounds(args):
    B = args.B if args.B is not None else 3 * args.d
    cls = NetworkClass.uniform(args.d, B, args.L, args.c, args.q)
    q = bnd.BoundQuery(cls, m=args.m, p=args.p, s=args.s, epsilon=args.epsilon, c0=args.c0)
    rep = bnd.report(q)
    payload = rep.to_dict()
    rows = [
        ("omega", rep.omega),
        ("lower_bound_error", rep.lower_bound_error),
        ("log2_min_samples", rep.min_samples_log2),
        ("upper_bound_error", rep.upper_bound_error),
        ("lipschitz_bound", rep.lipschitz_bound),
    ] + [("note", n) for n in rep.notes]
    csv_row = {k: v for k, v in payload.items() if k not in ("params", "notes")}
    _emit(args, payload, rows, csv_row, out=args.out)


# -- construct / verify -----------------------------------------------------


def _construction_report(net: Mlp) -> dict:
    meta = net.meta or {}
    if "hat" not in meta or "class" not in meta:
        raise CheckFailed("network file carries no construction metadata ('meta.hat', 'meta.class')")
    spec = HatSpec.from_dict(meta["hat"])
    cls = NetworkClass(meta["class"]["arch"], meta["class"]["c"], meta["class"]["q"])
    amp = float(meta["hat"]["amplitude"])
    dev = verify_construction(net, spec, amp, n_points=10_000, seed=0)
    norm = coefficient_norm(net, cls.q)
    return {
        "construction": meta.get("construction"),
        "amplitude": amp,
        "lambda_value": meta.get("lambda_value"),
        "max_abs_deviation": dev,
        "tolerance": EXACTNESS_RTOL * amp,
        "coefficient_norm": norm,
        "c": cls.c,
        "q": format_exponent(cls.q),
        "in_class": in_class(net, cls, 0.0),
        "ok": bool(dev <= EXACTNESS_RTOL * amp and in_class(net, cls, 0.0)),
    }


def cmd_construct(args):
    B = args.B if args.B is not None else 3 * args.s
    cls = NetworkClass.uniform(args.d, B, args.L, args.c, args.q)
    y = args.y if args.y is not None else [0.5] * args.d
    if len(y) == 1 and args.d > 1:
        y = y * args.d
    spec = HatSpec(args.d, args.s, args.M, y, args.nu)
    net, _ = construct(cls, spec)
    rep = _construction_report(net)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(net.to_json(indent=1))
        rep["network_file"] = args.out
        _emit(args, rep, list(rep.items()), rep)
    else:
        print(_dump({"network": net.to_dict(), "report": rep}))
    if not rep["ok"]:
        raise CheckFailed("construction failed its own verification")


def _smoke_suite(seed: int) -> list:
    """Cross-module checks: construction exactness, Lp sandwich and the
    recovery/fooling squeeze."""
    from .hats import hat_lp_bounds, hat_lp_norm_numeric, lambda_eval
    from .recovery import fooling_attack, grid_recovery_method, lp_error_estimate, run_with_recording

    checks = []
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d, L, B, c, q, s, M in [(1, 3, 3, 1.0, INF, 1, 2), (2, 4, 6, 0.5, 3.0, 2, 8), (3, 3, 9, 2.0, 1.0, 3, 1), (2, 5, 6, 1.0, 2.0, 1, 2)]:
        cls = NetworkClass.uniform(d, B, L, c, q)
        spec = HatSpec(d, s, M, rng.random(d), int(rng.choice([-1, 1])))
        net, p = construct(cls, spec)
        worst = max(worst, verify_construction(net, spec, p.amplitude, 2000, seed) / p.amplitude)
        if not in_class(net, cls, 0.0):
            checks.append(("construction in class", False, coefficient_norm(net, q)))
    checks.append(("construction exactness (relative)", worst <= EXACTNESS_RTOL, worst))

    t = rng.uniform(-2, 2, 10_000)
    Ms, ys = rng.uniform(1, 10, 10_000), rng.random(10_000)
    lhs = 0.5 * np.maximum(t - ys + 1 / Ms, 0) - np.maximum(t - ys, 0)
    rhs = np.array([lambda_eval(M, yy, tt) for M, yy, tt in zip(Ms, ys, t)]) / (2 * Ms)
    err = float(np.max(np.abs(lhs - rhs)))
    checks.append(("relu splitting identity", err <= 1e-12, err))

    ok = True
    for _ in range(10):
        s = int(rng.integers(1, 3))
        M = int(rng.integers(1, 6))
        spec = HatSpec(s, s, M, rng.random(s))
        for p in (1.0, 2.0, INF):
            v = hat_lp_norm_numeric(spec, p, 8 * M * s * 2)
            lo, hi = hat_lp_bounds(s, M, p)
            ok &= lo <= v <= hi
    checks.append(("hat Lp sandwich", bool(ok), None))

    cls = NetworkClass.uniform(1, 3, 3, 1.0, 1.0)
    spec = HatSpec(1, 1, 4, [0.4])
    net, p = construct(cls, spec)
    m = 16
    method = grid_recovery_method(1, m, lipschitz=bnd.lipschitz_bound(cls))
    tr = run_with_recording(method, net)
    err = lp_error_estimate(net, tr.predictor, INF, 20_000, seed, 1, probe_points=[[0.4]])
    ub = bnd.upper_bound_error(cls, m)
    checks.append(("grid recovery within upper bound", err <= ub, {"error": err, "bound": ub}))
    res = fooling_attack(method, 1, 1, p.amplitude / 2, u0=net, p=INF, seed=seed, u0_label="construction")
    checks.append(("fooling error above floor", res.measured_error >= res.theoretical_floor, {"error": res.measured_error, "floor": res.theoretical_floor}))
    return checks


def cmd_verify(args):
    if args.network:
        rep = _construction_report(_load_net(args.network))
        _emit(args, rep, list(rep.items()), rep, out=args.out)
        if not rep["ok"]:
            raise CheckFailed(f"deviation {rep['max_abs_deviation']!r} exceeds {rep['tolerance']!r} or network outside its class")
        return
    checks = _smoke_suite(args.seed)
    payload = {"checks": [{"name": n, "ok": bool(o), "value": v} for n, o, v in checks]}
    _emit(args, payload, [(n, "PASS" if o else "FAIL") for n, o, _ in checks], out=args.out)
    if not all(o for _, o, _ in checks):
        raise CheckFailed("invariant suite failed")


# -- attack / recover -------------------------------------------------------


def _method(spec: str, d: int, m: int, seed: int):
    from .recovery import ZeroMethod, grid_recovery_method

    if spec == "zero":
        return ZeroMethod(d, m)
    if spec == "grid":
        return grid_recovery_method(d, m)
    if spec.startswith("student"):
        from .student import StudentMethod

        cfg = {}
        if ":" in spec:
            path = spec.split(":", 1)[1]
            with open(path) as fh:
                cfg = json.load(fh)
        return StudentMethod(d, m, seed=seed, **cfg)
    raise argparse.ArgumentTypeError(f"unknown method {spec!r}")


def cmd_attack(args):
    from .recovery import fooling_attack, iroot_ceil
    from .witness import plan

    u0, label = None, "zero"
    if args.u0 != "zero":
        if not args.u0.startswith("net:"):
            raise argparse.ArgumentTypeError("--u0 must be 'zero' or 'net:<file>'")
        u0, label = _load_net(args.u0[4:]), args.u0
    amplitude = args.amplitude
    if amplitude is None:
        k = iroot_ceil(args.m, args.s)
        while (4 * k) ** args.s <= args.m:
            k *= 2
        cls = NetworkClass.uniform(args.d, 3 * args.s, 3, 1.0, INF)
        p = plan(cls, HatSpec(args.d, args.s, 8 * k, [0.5] * args.d))
        amplitude = p.lambda_value / (2 * 8 * k * args.s)
    method = _method(args.method, args.d, args.m, args.seed)
    res = fooling_attack(method, args.d, args.s, amplitude, u0=u0, p=args.p, n_mc=args.n_mc, seed=args.seed, u0_label=label)
    payload = res.to_dict()
    row = {k: v for k, v in payload.items() if k not in ("fooling_function", "errors_by_nu")}
    row["chosen_ell"] = " ".join(map(str, res.chosen_ell))
    _emit(args, payload, list(row.items()), row, out=args.out)
    if not res.measured_error >= res.theoretical_floor:
        raise CheckFailed("measured error below the theoretical floor")


def cmd_recover(args):
    from .recovery import grid_recovery_method, lp_error_estimate, run_with_recording

    net = _load_net(args.net)
    meta = net.meta or {}
    if args.c is not None and args.q is not None:
        cls = NetworkClass(net.arch, args.c, args.q)
    elif "class" in meta:
        cls = NetworkClass(meta["class"]["arch"], meta["class"]["c"], meta["class"]["q"])
    else:
        raise argparse.ArgumentTypeError("pass --c and --q (network file has no class metadata)")
    if not in_class(net, cls, 0.0):
        raise CheckFailed("network lies outside the stated class")
    d = net.d_in
    method = grid_recovery_method(d, args.m, lipschitz=bnd.lipschitz_bound(cls))
    tr = run_with_recording(method, net)
    probe = [meta["hat"]["y"]] if "hat" in meta else None
    err = lp_error_estimate(net, tr.predictor, INF, args.n_mc, args.seed, d, probe_points=probe)
    ub = bnd.upper_bound_error(cls, args.m)
    payload = {"m": args.m, "K": method.K, "n_queries": len(tr), "sup_error": err, "upper_bound_error": ub, "lipschitz_bound": bnd.lipschitz_bound(cls), "ok": err <= ub}
    _emit(args, payload, list(payload.items()), payload, out=args.out)
    if not err <= ub:
        raise CheckFailed("recovery error exceeds the upper bound")


# -- experiment -------------------------------------------------------------


def cmd_experiment(args):
    from .experiments import ExperimentConfig, estimate_err_hat, write_outputs

    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    cfg.setdefault("seed", args.seed)
    config = ExperimentConfig.from_dict(cfg)
    table, trials = estimate_err_hat(config, threads=args.threads)
    out = args.out or "experiment_out"
    summary = write_outputs(config, table, trials, out)
    rows = [(f"m={r['m']} p={r['p']}", r["err_hat"]) for r in summary["table"]]
    _emit(args, {"out": out, "table": summary["table"], "series": summary["series"]}, rows)


# -- parser -----------------------------------------------------------------


def _env_seed() -> int:
    v = os.environ.get("UNILEARN_SEED")
    return int(v) if v else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_env_seed(), help="base seed (default: $UNILEARN_SEED or 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes; never changes results")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--format", choices=["json", "csv", "table"], default="json")

    ap = argparse.ArgumentParser(prog="unilearn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="closed-form bounds")
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--L", type=int, required=True)
    b.add_argument("--B", type=int, default=None, help="hidden width (default 3d)")
    b.add_argument("--c", type=float, required=True)
    b.add_argument("--q", type=_exponent, required=True)
    b.add_argument("--m", type=int, default=1)
    b.add_argument("--p", type=_exponent, default=INF)
    b.add_argument("--s", type=int, default=None, help="active coordinates (default min(B//3, d))")
    b.add_argument("--epsilon", type=float, default=None)
    b.add_argument("--c0", type=float, default=1.0)
    b.set_defaults(func=cmd_bounds)

    c = sub.add_parser("construct", parents=[common], help="build a hat network")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--L", type=int, required=True)
    c.add_argument("--B", type=int, default=None, help="hidden width (default 3s)")
    c.add_argument("--c", type=float, required=True)
    c.add_argument("--q", type=_exponent, required=True)
    c.add_argument("--s", type=int, default=1)
    c.add_argument("--M", type=int, required=True)
    c.add_argument("--y", type=_floats, default=None, help="centre, comma separated")
    c.add_argument("--nu", type=int, choices=[-1, 1], default=1)
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", parents=[common], help="verify a constructed network, or run the invariant suite")
    v.add_argument("network", nargs="?", default=None)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("attack", parents=[common], help="fooling-set attack on a method")
    a.add_argument("--method", default="zero", help="zero | grid | student[:config.json]")
    a.add_argument("--d", type=int, required=True)
    a.add_argument("--s", type=int, required=True)
    a.add_argument("--m", type=int, required=True)
    a.add_argument("--p", type=_exponent, default=INF)
    a.add_argument("--amplitude", type=float, default=None)
    a.add_argument("--u0", default="zero", help="zero | net:<file>")
    a.add_argument("--n-mc", dest="n_mc", type=int, default=20_000)
    a.set_defaults(func=cmd_attack)

    r = sub.add_parser("recover", parents=[common], help="grid recovery of a network")
    r.add_argument("--net", required=True)
    r.add_argument("--m", type=int, required=True)
    r.add_argument("--c", type=float, default=None)
    r.add_argument("--q", type=_exponent, default=None)
    r.add_argument("--n-mc", dest="n_mc", type=int, default=100_000)
    r.set_defaults(func=cmd_recover)

    e = sub.add_parser("experiment", parents=[common], help="teacher-student min-max experiment")
    e.add_argument("--config", default=None)
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    try:
        args.func(args)
    except argparse.ArgumentTypeError as e:
        print(f"unilearn: error: {e}", file=sys.stderr)
        return 2
    except (CheckFailed, ConstructionError, RuntimeError, ValueError) as e:
        print(f"unilearn: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
