"""Per-slot telemetry records, experiment summaries and their file formats.

records.csv: one row per (trial, slot), wide per-user columns, stable
column order (see column_names).  summary.json: schema-versioned aggregate
document.  Both are byte-deterministic given (seed, config, solver), except
for the summary's "timing" section, which holds wall-clock statistics and
is documented as the only non-deterministic part.
"""

import csv
import io
import json
import numpy as np
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

FLAG_SOLVER_FAILED = 1      # per-slot solve fell back to the all-off decision
FLAG_RESTORED = 2           # feasibility restoration pass ran
FLAG_NOT_CONVERGED = 4      # iteration budget exhausted
FLAG_DRAW_CLIPPED = 8       # energy draw clipped at the battery level


@dataclass
class SlotRecord:
    """Telemetry for one slot of one trial."""

    trial: int
    slot: int
    tx_power: float
    objective: float
    solver_iterations: int
    flags: int
    eigen_ratio: float          # lifted-solver rank-one diagnostic (nan otherwise)
    kkt_residual: float         # closed-form solver residual (nan otherwise)
    queue: np.ndarray           # Q at the start of the slot [bits]
    virtual: np.ndarray         # Z at the start of the slot [bits]
    battery: np.ndarray         # B at the start of the slot [J]
    arrivals: np.ndarray        # A realized in the slot [bits]
    rho: np.ndarray
    gamma: np.ndarray
    harvest: np.ndarray         # banked energy e [J]
    rate: np.ndarray            # log2(1 + gamma) [bits/slot]
    energy_used: np.ndarray     # battery draw [J]
    overflow: np.ndarray        # harvested energy lost to the capacity cap [J]
    wall_time_ms: float = 0.0   # diagnostics only; never serialized


def from_horizon_entry(trial, slot, state, decision, transition, solver_failed,
                       wall_time_ms=0.0):
    diag = decision.diagnostics
    flags = 0
    if solver_failed:
        flags |= FLAG_SOLVER_FAILED
    if diag.get("restored"):
        flags |= FLAG_RESTORED
    if diag.get("converged") is False:
        flags |= FLAG_NOT_CONVERGED
    if transition.used_clipped is not None and np.any(transition.used_clipped):
        flags |= FLAG_DRAW_CLIPPED
    return SlotRecord(
        trial=trial, slot=slot,
        tx_power=decision.tx_power,
        objective=decision.objective,
        solver_iterations=int(diag.get("iterations", 0)),
        flags=flags,
        eigen_ratio=float(diag.get("eigen_ratio", np.nan)),
        kkt_residual=float(diag.get("kkt_residual", np.nan)),
        queue=state.data_queue, virtual=state.virtual_queue,
        battery=state.battery, arrivals=state.arrivals,
        rho=decision.rho, gamma=decision.gamma,
        harvest=decision.harvest, rate=decision.rates,
        energy_used=transition.energy_used, overflow=transition.overflow,
        wall_time_ms=wall_time_ms,
    )


_PER_USER = ("queue", "virtual", "battery", "arrivals", "rho", "gamma",
             "harvest", "rate", "energy_used", "overflow")
_SCALARS = ("tx_power", "objective", "solver_iterations", "flags",
            "eigen_ratio", "kkt_residual")


def column_names(num_users):
    cols = ["trial", "slot", *_SCALARS]
    for name in _PER_USER:
        cols += [f"{name}_{u}" for u in range(num_users)]
    return cols


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_records_csv(records, path, num_users):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(column_names(num_users))
        for r in sorted(records, key=lambda r: (r.trial, r.slot)):
            row = [r.trial, r.slot] + [getattr(r, n) for n in _SCALARS]
            for name in _PER_USER:
                row.extend(np.asarray(getattr(r, name), dtype=float))
            writer.writerow([_fmt(v) for v in row])


def read_records_csv(path):
    """Inverse of write_records_csv (wall times are not serialized)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        num_users = sum(1 for c in header if c.startswith("queue_"))
        rows = []
        for raw in reader:
            row = dict(zip(header, raw))
            kwargs = dict(
                trial=int(row["trial"]), slot=int(row["slot"]),
                tx_power=float(row["tx_power"]),
                objective=float(row["objective"]),
                solver_iterations=int(row["solver_iterations"]),
                flags=int(row["flags"]),
                eigen_ratio=float(row["eigen_ratio"]),
                kkt_residual=float(row["kkt_residual"]),
            )
            for name in _PER_USER:
                kwargs[name] = np.array(
                    [float(row[f"{name}_{u}"]) for u in range(num_users)]
                )
            rows.append(SlotRecord(**kwargs))
    return rows


def ecdf(samples, max_points=512):
    """Downsampled empirical CDF: right-continuous, non-decreasing, ends at 1.

    Evaluation points are the order statistics at ceil-spaced ranks; the
    exact rule is part of the file schema so consumers can reproduce any
    shown aggregate bit-for-bit.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        return {"values": [], "probs": [], "n": 0}
    idx = np.unique(np.round(np.linspace(0, n - 1, min(n, max_points))).astype(int))
    return {
        "values": x[idx].tolist(),
        "probs": ((idx + 1) / n).tolist(),
        "n": int(n),
    }


def summarize(records, config, solver, timing=None):
    """Aggregate a record set into the summary document."""
    records = sorted(records, key=lambda r: (r.trial, r.slot))
    K = config.num_users
    if records:
        q = np.stack([r.queue for r in records])
        z = np.stack([r.virtual for r in records])
        b = np.stack([r.battery for r in records])
        e = np.stack([r.harvest for r in records])
        rate = np.stack([r.rate for r in records])
        p = np.array([r.tx_power for r in records])
        n_trials = len({r.trial for r in records})
    else:
        q = z = b = e = rate = np.zeros((0, K))
        p = np.zeros(0)
        n_trials = 0
    qth = np.asarray(config.queue_threshold)

    def per_user(mat):
        return mat.mean(axis=0).tolist() if mat.size else [0.0] * K

    avg_p = float(p.mean()) if p.size else 0.0
    summary = {
        "schema_version": SCHEMA_VERSION,
        "solver": solver,
        "seed": int(config.rng_seed),
        "num_trials": n_trials,
        "horizon": int(config.horizon),
        "num_users": K,
        "config": config.to_dict(),
        "avg_tx_power_w": avg_p,
        "avg_tx_power_dbm": float(10 * np.log10(avg_p) + 30) if avg_p > 0 else None,
        "avg_harvested_energy": per_user(e),
        "avg_harvested_total": float(e.sum(axis=1).mean()) if e.size else 0.0,
        "avg_battery": per_user(b),
        "avg_queue": per_user(q),
        "avg_virtual_queue": per_user(z),
        "avg_rate": per_user(rate),
        "prob_queue_exceed": [
            float((q[:, u] >= qth[u]).mean()) if q.size else 0.0 for u in range(K)
        ],
        "queue_threshold": qth.tolist(),
        "violation_prob": float(config.violation_prob),
        "ecdf_queue": [ecdf(q[:, u]) for u in range(K)] if q.size else [ecdf([])] * K,
        "ecdf_battery": [ecdf(b[:, u]) for u in range(K)] if b.size else [ecdf([])] * K,
        "ecdf_tx_power": ecdf(p),
        "solver_failures": int(sum(bool(r.flags & FLAG_SOLVER_FAILED) for r in records)),
        "timing": timing or {},
    }
    return summary


def write_summary(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_summary(path):
    with open(path) as fh:
        return json.load(fh)
