"""Command line entry point: ``trtc-beam {solve,sweep,bench,selftest}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .baselines import OracleError, projected_gradient_oracle
from .experiments import (
    SWEEP_PARAMS,
    SweepSpec,
    bench_runtime,
    build_config,
    load_config,
    parse_overrides,
    run_scenario,
    run_sweep,
    write_trace_csv,
)
from .fp import transformed_rates, update_auxiliaries
from .rates import BeamformerSet, FeasibilityError, rate_report
from .subproblem import CurvatureError, ball_qp_objective, solve_ball_qp
from .system_model import ConfigError, SystemConfig, drop_users, generate_channels

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("trtc_beamforming")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (.toml or .json)")
    common.add_argument("--seed", type=int, help="override rng_seed")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field (repeatable)")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="trtc-beam", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve one scenario")
    s.add_argument("--schemes", default="trtc", help="comma list of trtc,baseline")

    s = sub.add_parser("sweep", parents=[common], help="Monte-Carlo sweep over one parameter")
    s.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    s.add_argument("--values", required=True, help="comma separated values")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--schemes", default="trtc,baseline")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trials-out", help="also write per-trial rows here")
    s.add_argument("--no-timing", action="store_true", help="write timing columns as 0 (byte-reproducible)")

    s = sub.add_parser("bench", parents=[common], help="closed-form vs oracle subproblem runtime")
    s.add_argument("--trials", type=int, default=10)

    sub.add_parser("selftest", parents=[common], help="quick numerical self-check")
    return p


def _config(args) -> tuple[dict, SystemConfig]:
    raw = load_config(args.config) if args.config else {}
    raw.update(parse_overrides(args.set))
    if args.seed is not None:
        raw["rng_seed"] = args.seed
    return raw, build_config(raw)


def _solve(args) -> int:
    _, cfg = _config(args)
    schemes = [s for s in args.schemes.split(",") if s]
    res = run_scenario(cfg, cfg.rng_seed, schemes)
    for scheme, r in res.items():
        print(f"{scheme}: sum of cell-min rates {r.report.objective_bits:.6f} bit/s/Hz "
              f"({r.trace.iterations} iterations, {r.seconds * 1e3:.1f} ms)")
        if args.out:
            path = args.out if len(res) == 1 else args.out.replace(".csv", f"_{scheme}.csv")
            write_trace_csv(r.trace, path)
    return EXIT_OK


def _sweep(args) -> int:
    raw, cfg = _config(args)
    spec = SweepSpec(
        param=args.param,
        values=[_parse_value(v) for v in args.values.split(",")],
        trials=args.trials,
        schemes=[s for s in args.schemes.split(",") if s],
        output=args.out,
    )
    summary, _ = run_sweep(spec, raw, workers=args.workers, record_timing=not args.no_timing,
                           trials_output=args.trials_out)
    if not args.out:
        for row in summary:
            print(row)
    return EXIT_OK


def _bench(args) -> int:
    _, cfg = _config(args)
    rep = bench_runtime(cfg, trials=args.trials)
    print(json.dumps(rep, indent=2))
    return EXIT_OK


def _selftest(args) -> int:
    _, cfg = _config(args)
    cfg = cfg.replace(num_units=min(cfg.N, 4), max_outer_iters=5, array="ula")
    ch = generate_channels(cfg, drop_users(cfg, cfg.rng_seed), cfg.rng_seed)
    rng = np.random.default_rng(cfg.rng_seed)
    f = rng.standard_normal((cfg.G, cfg.K, cfg.N)) + 1j * rng.standard_normal((cfg.G, cfg.K, cfg.N))
    beams = BeamformerSet(f * np.sqrt(cfg.unit_power_max / np.sum(np.abs(f) ** 2, axis=1, keepdims=True)))
    ok = True
    aux = update_auxiliaries(ch, beams, cfg)
    gap = np.max(np.abs(transformed_rates(ch, beams, aux, cfg) - rate_report(ch, beams, cfg).rate))
    ok &= gap < 1e-9
    print(f"fp tightness gap {gap:.2e}")
    abar, b8 = -1.3, rng.standard_normal(3) + 1j * rng.standard_normal(3)
    a = ball_qp_objective(abar, b8, solve_ball_qp(abar, b8, 0.5))
    b = ball_qp_objective(abar, b8, projected_gradient_oracle(abar, b8, 0.5))
    ok &= abs(a - b) <= 1e-6 * (1 + abs(b))
    print(f"ball QP closed form {a:.9f} vs oracle {b:.9f}")
    from .optimizer import run

    _, trace = run(ch, cfg)
    mono = bool(np.all(np.diff(trace.objective) >= 0))
    ok &= mono
    print(f"monotone trace over {trace.iterations} iterations: {mono}")
    print("selftest", "passed" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"solve": _solve, "sweep": _sweep, "bench": _bench, "selftest": _selftest}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FeasibilityError, CurvatureError, OracleError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
