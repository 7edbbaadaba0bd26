"""Monte-Carlo experiment campaigns: trials, sweeps, solver comparisons.

Trials are independent given their derived seeds (base seed + trial index)
and run in parallel processes; records merge deterministically by
(trial, slot), so parallel and serial campaigns produce identical files.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import control, kkt, records, sca, sdr_fp
from .channel import draw_angles, generate_channel
from .config import SystemConfig
from .dynamics import NetworkState

OUTPUT_DIR_ENV = "SWIPTSIM_OUTPUT_DIR"


def resolve_output_dir(path):
    return os.environ.get(OUTPUT_DIR_ENV) or path


def run_trial(config, solver, trial):
    """One trajectory; returns its SlotRecords."""
    out = []

    def hook(trial, slot, state, decision, transition, solver_failed):
        t0 = decision.diagnostics.get("wall_time_ms", 0.0)
        return records.from_horizon_entry(
            trial, slot, state, decision, transition, solver_failed,
            wall_time_ms=t0,
        )

    return control.run_horizon(config, solver, trial=trial, record_hook=hook)


def _trial_worker(args):
    config_dict, solver, trial = args
    config = SystemConfig.from_dict(config_dict)
    t0 = time.perf_counter()
    recs = run_trial(config, solver, trial)
    return recs, time.perf_counter() - t0


def run_experiment(config, solver="sca", num_trials=None, workers=None):
    """Full campaign: trials, merged records and the aggregate summary."""
    n = int(num_trials if num_trials is not None else config.num_trials)
    if workers is None:
        workers = config.workers or min(os.cpu_count() or 1, n)
    jobs = [(config.to_dict(), solver, t) for t in range(n)]
    t_start = time.perf_counter()
    per_trial_times = []
    all_records = []
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for recs, dt in pool.map(_trial_worker, jobs):
                all_records.extend(recs)
                per_trial_times.append(dt)
    else:
        for job in jobs:
            recs, dt = _trial_worker(job)
            all_records.extend(recs)
            per_trial_times.append(dt)
    wall = time.perf_counter() - t_start
    timing = {
        "wall_s": wall,
        "trial_mean_s": float(np.mean(per_trial_times)) if per_trial_times else 0.0,
        "slot_mean_ms": float(
            1e3 * np.sum(per_trial_times) / max(n * config.horizon, 1)
        ),
        "workers": int(workers),
    }
    all_records.sort(key=lambda r: (r.trial, r.slot))
    summary = records.summarize(all_records, config, solver, timing)
    return all_records, summary


def export(recs, summary, out_dir, config=None):
    """Write records.csv + summary.json; returns their paths."""
    out_dir = resolve_output_dir(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    num_users = summary["num_users"]
    rec_path = os.path.join(out_dir, "records.csv")
    sum_path = os.path.join(out_dir, "summary.json")
    records.write_records_csv(recs, rec_path, num_users)
    records.write_summary(summary, sum_path)
    if config is not None:
        config.save(os.path.join(out_dir, "config.yaml"))
    return rec_path, sum_path


def run_sweep(config, tradeoffs, arrivals, solver="sca", out_dir=None,
              num_trials=None, workers=None):
    """Grid campaign over the power-tradeoff weight and the mean arrival rate.

    Returns a list of summary rows; per-cell outputs land in subdirectories
    named V<V>_a<alpha> when an output directory is given.
    """
    rows = []
    for V in tradeoffs:
        for alpha in arrivals:
            cfg = config.replace(tradeoff=float(V), mean_arrival=float(alpha))
            recs, summary = run_experiment(cfg, solver, num_trials, workers)
            row = {
                "tradeoff": float(V),
                "mean_arrival": float(alpha),
                "solver": solver,
                "avg_tx_power_w": summary["avg_tx_power_w"],
                "avg_harvested_total": summary["avg_harvested_total"],
                "avg_battery_mean": float(np.mean(summary["avg_battery"])),
                "avg_queue_mean": float(np.mean(summary["avg_queue"])),
                "prob_queue_exceed_max": float(max(summary["prob_queue_exceed"])),
            }
            rows.append(row)
            if out_dir is not None:
                sub = os.path.join(
                    resolve_output_dir(out_dir), f"V{V:g}_a{alpha:g}"
                )
                export(recs, summary, sub, cfg)
    if out_dir is not None:
        _write_sweep_csv(rows, os.path.join(resolve_output_dir(out_dir), "sweep.csv"))
    return rows


def _write_sweep_csv(rows, path):
    import csv

    cols = ["tradeoff", "mean_arrival", "solver", "avg_tx_power_w",
            "avg_harvested_total", "avg_battery_mean", "avg_queue_mean",
            "prob_queue_exceed_max"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([
                repr(float(row[c])) if isinstance(row[c], float) else row[c]
                for c in cols
            ])


def random_instances(config, count, seed=0, queue_scale=None):
    """Random channel/state instances for cross-solver studies.

    States are drawn at plausible operating magnitudes: queues uniform up to
    twice the threshold, virtual queues up to four thresholds, batteries
    between 20% and full, Poisson arrivals.
    """
    rng = np.random.default_rng(seed)
    K = config.num_users
    qs = queue_scale if queue_scale is not None else float(np.max(config.queue_threshold))
    out = []
    for _ in range(count):
        thetas = draw_angles(rng, K)
        chan = generate_channel(
            rng, thetas, config.rician_factor, config.pathloss_amplitude,
            config.num_antennas,
        )
        state = NetworkState(
            data_queue=rng.uniform(0.0, 2.0 * qs, K),
            virtual_queue=rng.uniform(0.0, 4.0 * qs, K),
            battery=rng.uniform(0.2, 1.0, K) * config.battery_capacity,
            arrivals=rng.poisson(config.mean_arrival, K).astype(float),
        )
        out.append((chan, state))
    return out


def compare_solvers(config, count=50, seed=0, solvers=("sdr-fp", "sca"),
                    out_dir=None):
    """Solve the same channel/state instances with several battery-mode
    solvers; returns per-instance objectives, traces and timings."""
    instances = random_instances(config, count, seed)
    results = {name: [] for name in solvers}
    for chan, state in instances:
        for name in solvers:
            t0 = time.perf_counter()
            dec = control.control_step(chan, state, config, name)
            dt = time.perf_counter() - t0
            results[name].append({
                "objective": dec.objective,
                "iterations": dec.diagnostics.get("iterations", 0),
                "wall_s": dt,
                "trace": list(dec.diagnostics.get("objective_trace", [])),
                "status": dec.diagnostics.get("status"),
                "eigen_ratio": dec.diagnostics.get("eigen_ratio", float("nan")),
            })
    if out_dir is not None:
        _write_convergence_csv(results, os.path.join(
            resolve_output_dir(out_dir), "convergence.csv"))
    return results


def bench_batteryless(config, count=50, seed=0, out_dir=None,
                      kernels=None):
    """Timing and agreement comparison of the two batteryless methods.

    The convex-approximation route is timed against the closed-form
    iteration for every compiled kernel variant that is available.
    """
    instances = random_instances(config, count, seed)
    kernels = kernels or kkt.available_kernels()
    rows = []
    for idx, (chan, state) in enumerate(instances):
        weights = control.compute_weights(state, config)
        weights.rate_weight = np.maximum(weights.rate_weight, 1e-3)
        entry = {"instance": idx}
        t0 = time.perf_counter()
        ref = sca.solve_sca_batteryless(weights, chan, config)
        entry["sca_s"] = time.perf_counter() - t0
        entry["sca_objective"] = ref.objective
        entry["sca_iterations"] = ref.iterations
        entry["sca_trace"] = list(ref.objectives)
        for kern in kernels:
            t0 = time.perf_counter()
            res = kkt.solve_kkt(weights, chan, config, kernel=kern)
            entry[f"kkt_{kern}_s"] = time.perf_counter() - t0
            entry[f"kkt_{kern}_objective"] = res.objective
            entry[f"kkt_{kern}_iterations"] = res.iterations
            entry[f"kkt_{kern}_residual"] = res.kkt_residual
            entry[f"kkt_{kern}_converged"] = res.converged
            if kern == kernels[0]:
                entry["kkt_trace"] = list(res.objectives)
        rows.append(entry)
    report = {
        "count": count,
        "kernels": list(kernels),
        "median_sca_s": float(np.median([r["sca_s"] for r in rows])),
    }
    for kern in kernels:
        med = float(np.median([r[f"kkt_{kern}_s"] for r in rows]))
        report[f"median_kkt_{kern}_s"] = med
        report[f"speedup_{kern}"] = report["median_sca_s"] / med if med > 0 else None
        report[f"max_rel_gap_{kern}"] = float(max(
            abs(r[f"kkt_{kern}_objective"] - r["sca_objective"])
            / max(abs(r["sca_objective"]), 1e-12) for r in rows
        ))
    if out_dir is not None:
        out = resolve_output_dir(out_dir)
        os.makedirs(out, exist_ok=True)
        import json
        with open(os.path.join(out, "kkt_bench.json"), "w") as fh:
            json.dump({"report": report, "instances": rows}, fh, indent=1,
                      sort_keys=True)
    return report, rows


def _write_convergence_csv(results, path):
    import csv

    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "instance", "iteration", "objective"])
        for name, rows in results.items():
            for idx, row in enumerate(rows):
                for it, val in enumerate(row["trace"]):
                    writer.writerow([name, idx, it, repr(float(val))])
