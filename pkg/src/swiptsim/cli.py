"""Command-line entry points for experiments and benchmarks."""

import argparse
import json
import os
import sys

# tiny per-slot linear algebra: threaded BLAS only adds contention
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np

from . import harness
from .config import SystemConfig, reference_config, desk_config


def _load_config(args):
    if args.config:
        cfg = SystemConfig.load(args.config)
    elif getattr(args, "reference", False):
        cfg = reference_config()
    else:
        cfg = desk_config()
    over = {}
    for name in ("trials", "slots", "seed", "tradeoff", "arrival"):
        val = getattr(args, name, None)
        if val is not None:
            over[{
                "trials": "num_trials", "slots": "horizon", "seed": "rng_seed",
                "tradeoff": "tradeoff", "arrival": "mean_arrival",
            }[name]] = val
    return cfg.replace(**over) if over else cfg


def _add_common(sub):
    sub.add_argument("--config", help="YAML config file (defaults to the desk preset)")
    sub.add_argument("--reference", action="store_true",
                     help="start from the literal reference constants instead "
                          "of the desk-scale preset")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--trials", type=int, default=None)
    sub.add_argument("--slots", type=int, default=None)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="swiptsim",
        description="Joint beamforming / power-splitting downlink simulator "
                    "under drift-plus-penalty control",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="single Monte-Carlo experiment")
    _add_common(run)
    run.add_argument("--solver", default="sca", choices=["sca", "sdr-fp"])
    run.add_argument("--tradeoff", type=float, default=None)
    run.add_argument("--arrival", type=float, default=None)
    run.add_argument("--workers", type=int, default=None)

    sweep = subs.add_parser("sweep", help="grid over tradeoff and arrival rate")
    _add_common(sweep)
    sweep.add_argument("--solver", default="sca", choices=["sca", "sdr-fp"])
    sweep.add_argument("--tradeoffs", default="1,2,4,8")
    sweep.add_argument("--arrivals", default="2,3")
    sweep.add_argument("--workers", type=int, default=None)

    comp = subs.add_parser("compare-solvers",
                           help="same instances through several solvers")
    _add_common(comp)
    comp.add_argument("--instances", type=int, default=50)
    comp.add_argument("--solvers", default="sdr-fp,sca")

    bench = subs.add_parser("bench-kkt",
                            help="closed-form vs convex-approximation "
                                 "batteryless timing")
    _add_common(bench)
    bench.add_argument("--instances", type=int, default=50)

    args = parser.parse_args(argv)
    cfg = _load_config(args)
    out = harness.resolve_output_dir(args.out)

    if args.command == "run":
        recs, summary = harness.run_experiment(
            cfg, args.solver, workers=args.workers
        )
        rec_path, sum_path = harness.export(recs, summary, out, cfg)
        print(f"wrote {rec_path}")
        print(f"wrote {sum_path}")
        print(f"avg tx power: {summary['avg_tx_power_w']:.4g} W; "
              f"Pr[Q >= threshold]: "
              f"{[f'{p:.4f}' for p in summary['prob_queue_exceed']]}")
    elif args.command == "sweep":
        tradeoffs = [float(x) for x in args.tradeoffs.split(",")]
        arrivals = [float(x) for x in args.arrivals.split(",")]
        rows = harness.run_sweep(
            cfg, tradeoffs, arrivals, args.solver, out_dir=out,
            workers=args.workers,
        )
        print(f"wrote {os.path.join(out, 'sweep.csv')}")
        for row in rows:
            print(f"V={row['tradeoff']:g} alpha={row['mean_arrival']:g}: "
                  f"P={row['avg_tx_power_w']:.4g} W, "
                  f"harvest={row['avg_harvested_total']:.4g} J")
    elif args.command == "compare-solvers":
        solvers = tuple(args.solvers.split(","))
        os.makedirs(out, exist_ok=True)
        results = harness.compare_solvers(
            cfg, args.instances, seed=cfg.rng_seed, solvers=solvers, out_dir=out
        )
        objs = {name: np.array([r["objective"] for r in rows])
                for name, rows in results.items()}
        names = list(objs)
        with open(os.path.join(out, "comparison.json"), "w") as fh:
            json.dump({
                name: [r["objective"] for r in rows]
                for name, rows in results.items()
            }, fh, indent=1, sort_keys=True)
        print(f"wrote {os.path.join(out, 'convergence.csv')}")
        if len(names) == 2:
            a, b = names
            rel = np.abs(objs[a] - objs[b]) / np.maximum(np.abs(objs[b]), 1e-12)
            print(f"max relative objective gap {a} vs {b}: {rel.max():.3e}")
    elif args.command == "bench-kkt":
        report, _ = harness.bench_batteryless(
            cfg, args.instances, seed=cfg.rng_seed, out_dir=out
        )
        print(f"wrote {os.path.join(out, 'kkt_bench.json')}")
        print(f"median conic-route solve: {report['median_sca_s']*1e3:.2f} ms")
        for kern in report["kernels"]:
            print(f"closed-form [{kern}]: "
                  f"{report[f'median_kkt_{kern}_s']*1e3:.2f} ms "
                  f"({report[f'speedup_{kern}']:.1f}x, "
                  f"max rel gap {report[f'max_rel_gap_{kern}']:.2e})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
