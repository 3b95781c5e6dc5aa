"""Command-line entry point: ``popsim {sweep,explore,estimate,selftest}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from . import __version__, oracle
from .fourstate import Scenario
from .harness import FORMATS, ExperimentSpec, emit, metadata, render, sweep
from .protocol import InfeasibleError, ProtocolParams, check_symmetry
from .registry import MINIMAL, PROTOCOLS, get

log = logging.getLogger("popsim")

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def _int_list(text: str) -> list[int]:
    """``"64,128"`` or ``"2^6..2^9"`` (powers of two, inclusive)."""
    text = text.strip()
    if ".." in text:
        lo, hi = (s.strip() for s in text.split(".."))
        def p2(s):
            return 1 << int(s[2:]) if s.startswith("2^") else int(s)
        lo, hi = p2(lo), p2(hi)
        out, k = [], lo
        while k <= hi:
            out.append(k)
            k *= 2
        return out
    return [int(s) for s in text.split(",") if s.strip()]


def _imbalance(text: str):
    if text == MINIMAL:
        return MINIMAL
    return float(text) if "." in text else int(text)


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args: argparse.Namespace) -> int:
    if args.spec:
        spec = ExperimentSpec.load(args.spec)
        if args.out:
            spec.out = args.out
        if args.format:
            spec.format = args.format
    else:
        if not args.protocol or not args.n:
            raise ValueError("give an ExperimentSpec file or at least --protocol and --n")
        constants = {}
        if args.c is not None:
            constants["c"] = args.c
        if args.C is not None:
            constants["C"] = args.C
        for kv in args.const or []:
            k, _, v = kv.partition("=")
            constants[k] = int(v)
        spec = ExperimentSpec(protocol=args.protocol, n_values=args.n, trials=args.trials,
                              seed_base=args.seed, imbalance=args.imbalance, constants=constants,
                              horizon_factor=args.horizon_factor, reference_n=args.reference_n,
                              out=args.out, format=args.format or "csv", instrument=args.instrument,
                              stop=args.stop)
    result = sweep(spec)
    if spec.out:
        emit(result.rows, spec.format, spec.out, metadata(spec))
        log.info("wrote %s", spec.out)
    else:
        sys.stdout.write(render(result.rows, spec.format, metadata(spec)))
    trips = result.invariant_trips
    if trips:
        print(f"invariant violations: {json.dumps(trips, sort_keys=True)}", file=sys.stderr)
    if not result.all_succeeded:
        print("some runs did not converge to the correct output", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# explore

def _explore_one(proto, scenario, cap: int, show: int) -> bool:
    t0 = time.perf_counter()
    rep = oracle.explore(proto, scenario, cap=cap, max_witnesses=show)
    label = f"[{scenario.a0}A/{scenario.b0}B] " if isinstance(scenario, Scenario) else ""
    print(f"{label}{rep.summary()} ({time.perf_counter() - t0:.1f}s)")
    for _, path in list(rep.witnesses.items())[:show]:
        print("  witness: " + " -> ".join(
            "{" + ", ".join(str(proto.decode(s)) for s in cfg) + "}" for cfg in path))
    return rep.ok


def cmd_explore(args: argparse.Namespace) -> int:
    entry = get(args.protocol)
    params = entry.mini(args.n) if args.mini_constants else ProtocolParams(n=args.n)
    proto = entry.build(params)
    if entry.is_majority and args.imbalance == "all":
        scenarios = [Scenario(a, args.n - a) for a in range(args.n + 1) if 2 * a != args.n]
    elif entry.is_majority:
        scenarios = [entry.scenario(args.n, _imbalance(args.imbalance))]
    else:
        scenarios = [entry.scenario(args.n, None)]
    ok = True
    for sc in scenarios:
        ok &= _explore_one(proto, sc, args.cap, args.witnesses)
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# estimate

def cmd_estimate(args: argparse.Namespace) -> int:
    entry = get(args.protocol)
    proto = entry.build(ProtocolParams(n=args.n))
    est = oracle.mc_probability(proto, args.event, args.trials, args.seed)
    print(f"{args.event} ({args.protocol}, n={args.n}): {est.hits}/{est.trials} = {est.p:.4f}, "
          f"95% Wilson interval [{est.low:.4f}, {est.high:.4f}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest

def _selftest_checks(quick: bool):
    """Yield ``(name, passed, detail)`` for the symmetry and invariant suites."""
    small = {"fourstate": ProtocolParams(n=5), "pushpull": ProtocolParams(n=5),
             "bcer-majority": PROTOCOLS["bcer-majority"].mini(3),
             "bcer-leader": PROTOCOLS["bcer-leader"].mini(3)}
    for name, params in small.items():
        v = check_symmetry(get(name).build(params), mode="exhaustive")
        yield f"symmetry {name} n={params.n} (exhaustive, {v.checked} pairs)", v.symmetric, v.counterexample
    budget = 200_000 if quick else 2_000_000
    for name in ("bcer-majority", "bcer-leader"):
        v = check_symmetry(get(name).build(ProtocolParams(n=1024)), mode="sampled", budget=budget)
        yield f"symmetry {name} n=1024 (sampled, {v.checked} pairs)", v.symmetric, v.counterexample

    trials = 5 if quick else 20
    for name, n in (("fourstate", 101), ("bcer-majority", 128), ("bcer-leader", 64)):
        res = sweep(ExperimentSpec(protocol=name, n_values=[n], trials=trials, seed_base=1, instrument=True))
        yield f"invariants {name} n={n} x{trials}", res.ok, res.invariant_trips or None

    for n in (3, 4):
        proto = get("fourstate").build(ProtocolParams(n=n))
        reps = [oracle.explore(proto, Scenario(a, n - a)) for a in range(n + 1) if 2 * a != n]
        yield f"oracle fourstate n={n} (all imbalances)", all(r.ok for r in reps), None


def cmd_selftest(args: argparse.Namespace) -> int:
    ok = True
    for name, passed, detail in _selftest_checks(args.quick):
        ok &= bool(passed)
        suffix = "" if passed or detail is None else f"  {detail}"
        print(f"{'PASS' if passed else 'FAIL'}  {name}{suffix}")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="popsim", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run seeded trials over a list of population sizes")
    sw.add_argument("spec", nargs="?", help="ExperimentSpec JSON file (flags below are then ignored)")
    sw.add_argument("--protocol", choices=sorted(PROTOCOLS))
    sw.add_argument("--n", type=_int_list, help="population sizes: '256,512' or '2^8..2^12'")
    sw.add_argument("--trials", type=int, default=30)
    sw.add_argument("--seed", type=int, default=0, help="seed_base (64-bit)")
    sw.add_argument("--imbalance", type=_imbalance, default=MINIMAL,
                    help="'minimal', an absolute a0-b0, or a fraction of n such as 0.5")
    sw.add_argument("--c", type=int)
    sw.add_argument("--C", type=int)
    sw.add_argument("--const", action="append", metavar="NAME=VALUE",
                    help="other constant override, e.g. k6i=48 (repeatable)")
    sw.add_argument("--horizon-factor", type=float, default=1.0)
    sw.add_argument("--reference-n", type=int)
    sw.add_argument("--stop", choices=("stable", "selection"), default="stable")
    sw.add_argument("--instrument", action="store_true", help="count invariant violations per run")
    sw.add_argument("--out", help="output file (default: stdout)")
    sw.add_argument("--format", choices=FORMATS)
    sw.set_defaults(func=cmd_sweep)

    ex = sub.add_parser("explore", help="exhaustive reachability check on a tiny population")
    ex.add_argument("--protocol", choices=sorted(PROTOCOLS), required=True)
    ex.add_argument("--n", type=int, required=True)
    ex.add_argument("--mini-constants", action="store_true", help="use the miniature constant set")
    ex.add_argument("--imbalance", default="all",
                    help="majority protocols: 'all' (every a0 != b0), 'minimal' or an integer")
    ex.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP, help="maximum number of classes")
    ex.add_argument("--witnesses", type=int, default=3, help="witness paths to print on failure")
    ex.set_defaults(func=cmd_explore)

    es = sub.add_parser("estimate", help="Monte Carlo probability of an event with a Wilson interval")
    es.add_argument("--protocol", choices=sorted(PROTOCOLS), default="bcer-leader")
    es.add_argument("--n", type=int, default=256)
    es.add_argument("--event", choices=sorted(oracle.EVENTS), required=True)
    es.add_argument("--trials", type=int, default=1000)
    es.add_argument("--seed", type=int, default=0)
    es.set_defaults(func=cmd_estimate)

    st = sub.add_parser("selftest", help="transition symmetry and invariant suites")
    st.add_argument("--quick", action="store_true", help="smaller sample sizes")
    st.set_defaults(func=cmd_selftest)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, InfeasibleError, OSError) as e:
        print(f"popsim: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
