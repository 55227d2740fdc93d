"""Command-line entry point: ``minegames {solve,threshold,table,simulate,verify}``.

Exit codes: 0 success, 1 numeric or convergence failure (including failed
verification checks), 2 usage error. Set ``MINEGAMES_LOG`` to a logging
level name (e.g. ``INFO``) for diagnostics on standard error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import __version__
from . import io as mio
from .bounds import (
    TABLE_DEPTHS,
    LemmaCheck,
    catalog_checks,
    find_threshold,
    fixed_strategy_checks,
    potential_property_checks,
    reproduce_table,
    rinf_checks,
    verify_lemma_bounds,
)
from .core import GameParams, Model
from .errors import ConvergenceError, MineGameError, NonMonotoneError, NotRecurrentError
from .immediate import DEFAULT_MAX_ITERS, DEFAULT_TOL, solve
from .simulate import BUILTINS, SimConfig, resolve_policy, simulate
from .strategic import solve_strategic, verify_sol_recurrence

log = logging.getLogger("minegames")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _d_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_game(sp, p_required=True, d_default=None):
    sp.add_argument("--model", choices=[m.value for m in Model], default="immediate")
    sp.add_argument("--p", type=float, required=p_required, default=None)
    sp.add_argument("--d", type=int, required=d_default is None, default=d_default)
    sp.add_argument("--a-max", type=int, default=None, help="strategic lead cap (default 2d+2)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minegames", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"minegames {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="optimal gain, potential and policy")
    _add_game(sp)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--policy-out", default=None, help="also write the optimal policy file here")

    for name, helptext in (("threshold", "threshold for one depth"), ("table", "thresholds over several depths")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--model", choices=[m.value for m in Model], default="immediate")
        if name == "threshold":
            sp.add_argument("--d", type=int, required=True)
        else:
            sp.add_argument("--d-list", type=_d_list, default=list(TABLE_DEPTHS))
        sp.add_argument("--a-max", type=int, default=None)
        sp.add_argument("--p-tol", type=float, default=1e-5)
        sp.add_argument("--deviation-eps", type=float, default=1e-7)
        sp.add_argument("--bracket", type=float, nargs=2, default=None, metavar=("LOW", "HIGH"))
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--format", choices=["json", "csv"], default="csv")

    sp = sub.add_parser("simulate", help="Monte Carlo estimate of a policy's gain")
    _add_game(sp)
    sp.add_argument("--policy", default="frontier", help=f"optimal, {', '.join(BUILTINS)} or a policy file path")
    sp.add_argument("--levels", type=int, default=1_000_000)
    sp.add_argument("--trials", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--emit-plot-data", default=None, metavar="CSV", help="write per-trial gains here")

    sp = sub.add_parser("verify", help="numeric checks of the analytic bounds")
    sp.add_argument("--suite", choices=["bounds", "sol", "rinf", "all"], default="all")
    sp.add_argument("--p", type=float, default=0.3)
    sp.add_argument("--d", type=int, default=30)
    sp.add_argument("--sol-range", type=int, default=50, help="check a, b in [0, N] for the sol suite")

    for sp in sub.choices.values():
        sp.add_argument("--out", default=None, help="write the main output here instead of stdout")
        sp.add_argument("--record-timing", action="store_true", help="add wall-clock duration to the manifest")
    return ap


def _params(args) -> GameParams:
    model = Model(args.model)
    if model is Model.IMMEDIATE and args.a_max is not None:
        raise UsageError("--a-max only applies to --model strategic")
    return GameParams(model, args.p, args.d, args.a_max)


def _manifest(args, argv, params: dict, tolerances: dict, seed=None, started=None) -> mio.RunManifest:
    return mio.RunManifest(
        command=args.command,
        params=params,
        tolerances=tolerances,
        seed=seed,
        argv=list(argv),
        duration_s=(time.perf_counter() - started) if args.record_timing else None,
    )


def cmd_solve(args, argv, started) -> int:
    params = _params(args)
    if params.model is Model.IMMEDIATE:
        report = solve(params, tol=args.tol, max_iters=args.max_iters)
    else:
        report = solve_strategic(params, tol=args.tol, max_iters=args.max_iters)
    if args.policy_out:
        mio.dump_policy(report.policy, args.policy_out)
    man = _manifest(args, argv, mio.params_dict(params), {"tol": args.tol, "max_iters": args.max_iters}, started=started)
    if args.format == "json":
        text = mio.report_json("solve", man, mio.solve_result(report))
    else:
        rows = []
        for a, b, v in mio.potential_triples(report.potential):
            act = report.policy.action((a, b))
            rows.append([a, b, v, "win" if act is None else mio._ACTION_NAMES[act.kind], "" if act is None or act.s is None else act.s])
        text = mio.csv_text(["a", "b", "phi", "action", "s"], rows, man)
    mio.write_output(text, args.out, sys.stdout)
    log.info("g* = %.15g", report.g_star)
    return EXIT_OK


def _threshold_kwargs(args) -> dict:
    if Model(args.model) is Model.IMMEDIATE and args.a_max is not None:
        raise UsageError("--a-max only applies to --model strategic")
    if args.p_tol < 1e-5:
        raise UsageError("--p-tol must be >= 1e-5")
    return dict(p_tol=args.p_tol, deviation_eps=args.deviation_eps, bracket=args.bracket, a_max=args.a_max)


def _threshold_output(args, argv, started, results, single: bool) -> str:
    kw = _threshold_kwargs(args)
    params = {"model": args.model, "a_max": args.a_max, "bracket": args.bracket}
    params["d" if single else "d_list"] = args.d if single else args.d_list
    tols = {"p_tol": kw["p_tol"], "deviation_eps": kw["deviation_eps"], "solver_tol": DEFAULT_TOL}
    man = _manifest(args, argv, params, tols, started=started)
    if args.format == "csv":
        rows = [[r["d"], r["threshold"], r["bracket_low"], r["bracket_high"]] for r in map(mio.threshold_row, results)]
        return mio.csv_text(["d", "threshold", "bracket_low", "bracket_high"], rows, man)
    body = [mio.threshold_result(r) for r in results]
    return mio.report_json(args.command, man, body[0] if single else {"rows": body})


def cmd_threshold(args, argv, started) -> int:
    kw = _threshold_kwargs(args)
    res = find_threshold(Model(args.model), args.d, n_jobs=args.jobs, **kw)
    mio.write_output(_threshold_output(args, argv, started, [res], True), args.out, sys.stdout)
    return EXIT_OK


def cmd_table(args, argv, started) -> int:
    kw = _threshold_kwargs(args)
    if any(d < 2 for d in args.d_list) or not args.d_list:
        raise UsageError("--d-list needs integers >= 2")
    rows = reproduce_table(args.d_list, model=Model(args.model), n_jobs=args.jobs, **kw)
    mio.write_output(_threshold_output(args, argv, started, rows, False), args.out, sys.stdout)
    return EXIT_OK


def cmd_simulate(args, argv, started) -> int:
    params = _params(args)
    name = args.policy
    if name == "optimal" or name in BUILTINS:
        policy = resolve_policy(name, params)
    else:
        policy = mio.load_policy(name)
        if not policy.matches(params):
            raise UsageError(f"policy file {name} is for ({policy.model.value}, d={policy.d}, a_max={policy.a_max})")
    config = SimConfig(params, policy, args.levels, args.trials, args.seed)
    report = simulate(config, n_jobs=args.jobs)
    man = _manifest(args, argv, mio.params_dict(params), {"target_levels": args.levels, "trials": args.trials},
                    seed=args.seed, started=started)
    text = mio.report_json("simulate", man, mio.sim_result(report, params, name, args.levels, args.trials))
    mio.write_output(text, args.out, sys.stdout)
    if args.emit_plot_data:
        rows = [[i, t.gain, t.levels, t.miner1_paid, t.miner2_paid, t.phases] for i, t in enumerate(report.trials)]
        header = ["trial", "gain", "levels", "miner1_paid", "miner2_paid", "phases"]
        mio.write_output(mio.csv_text(header, rows, man), args.emit_plot_data)
    return EXIT_OK


def cmd_verify(args, argv, started) -> int:
    if not (0 <= args.p < 1):
        raise UsageError(f"p out of range: {args.p!r} (need 0 <= p < 1)")
    groups = {}
    if args.suite in ("bounds", "all"):
        report = solve(GameParams(Model.IMMEDIATE, args.p, args.d))
        groups["bounds"] = (
            catalog_checks() + fixed_strategy_checks() + verify_lemma_bounds(report) + potential_property_checks(report)
        )
    if args.suite in ("sol", "all"):
        if args.p >= 0.5:
            groups["sol"] = [LemmaCheck("sol recurrence", "skipped", detail="needs p < 1/2")]
        else:
            rng = range(args.sol_range + 1)
            try:
                v = verify_sol_recurrence(args.p, rng, rng)
            except ValueError as exc:
                groups["sol"] = [LemmaCheck("sol recurrence", "fail", detail=str(exc))]
            else:
                state = None if v.first_violation is None else tuple(v.first_violation)
                groups["sol"] = [LemmaCheck("sol recurrence", "pass" if v.passed else "fail", v.margin, state,
                                            "" if v.passed else f"claim={v.claim}")]
    if args.suite in ("rinf", "all"):
        groups["rinf"] = rinf_checks()

    failed = False
    summary = {}
    for suite, checks in groups.items():
        for c in checks:
            print(f"{suite:>6} {c.line()}" + ("" if c.state is None else f" at {c.state}"))
            failed |= c.status == "fail"
        summary[suite] = [
            {"name": c.name, "status": c.status, "margin": c.margin, "state": c.state, "detail": c.detail} for c in checks
        ]
    print("verify:", "FAIL" if failed else "PASS")
    man = _manifest(args, argv, {"p": args.p, "d": args.d, "suite": args.suite, "sol_range": args.sol_range}, {}, started=started)
    if args.out:
        mio.write_output(mio.report_json("verify", man, {"passed": not failed, "suites": summary}), args.out)
    return EXIT_NUMERIC if failed else EXIT_OK


def _configure_logging(level_name: str):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(getattr(logging, level_name.upper(), logging.WARNING))
    log.propagate = False


COMMANDS = {"solve": cmd_solve, "threshold": cmd_threshold, "table": cmd_table, "simulate": cmd_simulate, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _configure_logging(os.environ.get("MINEGAMES_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        return COMMANDS[args.command](args, argv, started)
    except (ConvergenceError, NonMonotoneError, NotRecurrentError) as exc:
        print(f"minegames {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, OSError) as exc:
        print(f"minegames {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MineGameError as exc:
        print(f"minegames {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
