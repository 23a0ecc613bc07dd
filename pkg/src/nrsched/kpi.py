"""KPI computation and aggregation over simulation records.

Throughput counts scheduled achievable bits; goodput counts bits actually
delivered (first transmissions plus HARQ recoveries, attributed to the slot
where delivery happens). Cell-level rates are the float sum of the per-user
rates so that additivity holds exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

# Decision codes used in KpiRecord.decisions besides user indices >= 0.
NO_ELIGIBLE = -1  # empty eligible set: scheduler was not invoked
IDLE_INVALID = -2  # agent picked an ineligible user: RBG left idle

SUMMARY_SCHEMA = "summary-v1"
CURVES_SCHEMA = "curves-v1"
RUN_CSV_SCHEMA = "run-v1"


@dataclass
class KpiRecord:
    """Per-slot, per-user accounting of one simulation run."""

    mu: int
    n_ue: int
    slot_duration_s: float
    scheduled: np.ndarray  # (n_slots, n_ue) bits granted
    delivered: np.ndarray  # (n_slots, n_ue) bits received
    decisions: np.ndarray  # (n_slots, n_rbgs) user index or code above
    eligible: np.ndarray  # (n_slots, n_rbgs, n_ue) bool
    seed: int = 0
    scheduler: str = ""
    fingerprint: str = ""

    @property
    def n_slots(self) -> int:
        return self.scheduled.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_slots * self.slot_duration_s

    def grant_counts(self) -> np.ndarray:
        counts = np.zeros(self.n_ue, dtype=np.int64)
        for u in range(self.n_ue):
            counts[u] = int((self.decisions == u).sum())
        return counts


@dataclass
class RunSummary:
    scheduler: str
    seed: int
    throughput_bps: float
    goodput_bps: float
    jfi_throughput: float
    jfi_grants: float
    invalid_rate: float
    per_ue_throughput_bps: list[float] = field(default_factory=list)
    per_ue_goodput_bps: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scheduler": self.scheduler,
            "seed": self.seed,
            "throughput_bps": self.throughput_bps,
            "goodput_bps": self.goodput_bps,
            "jfi_throughput": self.jfi_throughput,
            "jfi_grants": self.jfi_grants,
            "invalid_rate": self.invalid_rate,
            "per_ue_throughput_bps": self.per_ue_throughput_bps,
            "per_ue_goodput_bps": self.per_ue_goodput_bps,
        }


def jfi(x) -> float:
    """Jain's fairness index (sum x)^2 / (n * sum x^2); NaN for an all-zero vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or np.any(x < 0):
        raise ValueError("jfi needs a non-empty, non-negative vector")
    sq = float(np.sum(x * x))
    if sq == 0.0:
        return math.nan
    return float(np.sum(x)) ** 2 / (x.size * sq)


def summarize_run(rec: KpiRecord) -> RunSummary:
    """Headline KPIs of one run."""
    if rec.n_slots == 0:
        raise ValueError("cannot summarize an empty record")
    seconds = rec.duration_s
    per_ue_thr = rec.scheduled.sum(axis=0) / seconds
    per_ue_good = rec.delivered.sum(axis=0) / seconds
    contested = int((rec.decisions != NO_ELIGIBLE).sum())
    idle_invalid = int((rec.decisions == IDLE_INVALID).sum())
    return RunSummary(
        scheduler=rec.scheduler,
        seed=rec.seed,
        throughput_bps=float(per_ue_thr.sum()),
        goodput_bps=float(per_ue_good.sum()),
        jfi_throughput=jfi(per_ue_thr),
        jfi_grants=jfi(rec.grant_counts()),
        invalid_rate=idle_invalid / contested if contested else 0.0,
        per_ue_throughput_bps=[float(v) for v in per_ue_thr],
        per_ue_goodput_bps=[float(v) for v in per_ue_good],
    )


@dataclass
class QuantizedCurves:
    """Per-time-unit rates: rows are time units, columns users."""

    n_units: int
    unit_seconds: list[float]
    ue_throughput_bps: np.ndarray  # (n_units, n_ue)
    ue_goodput_bps: np.ndarray
    cell_throughput_bps: np.ndarray  # (n_units,)
    cell_goodput_bps: np.ndarray


def quantize_curves(rec: KpiRecord, n_units: int = 10) -> QuantizedCurves:
    """Partition the run into n_units time bins and rate each bin."""
    if n_units < 1:
        raise ValueError(f"n_units must be >= 1, got {n_units}")
    if rec.n_slots < n_units:
        raise ValueError(f"record has {rec.n_slots} slots, fewer than {n_units} bins")
    sched_bins = np.array_split(rec.scheduled, n_units, axis=0)
    deliv_bins = np.array_split(rec.delivered, n_units, axis=0)
    unit_seconds = [b.shape[0] * rec.slot_duration_s for b in sched_bins]
    ue_thr = np.stack([b.sum(axis=0) / s for b, s in zip(sched_bins, unit_seconds)])
    ue_good = np.stack([b.sum(axis=0) / s for b, s in zip(deliv_bins, unit_seconds)])
    return QuantizedCurves(
        n_units=n_units,
        unit_seconds=unit_seconds,
        ue_throughput_bps=ue_thr,
        ue_goodput_bps=ue_good,
        cell_throughput_bps=ue_thr.sum(axis=1),
        cell_goodput_bps=ue_good.sum(axis=1),
    )


_KPI_FIELDS = ("throughput_bps", "goodput_bps", "jfi_throughput", "jfi_grants", "invalid_rate")


def aggregate_runs(summaries: list[RunSummary], baseline: str | None = None) -> dict:
    """Mean/std per scheduler per KPI, plus paired same-seed deltas vs a baseline.

    Pairing requires every scheduler to have run the exact same seed set.
    Deltas are mean percentage improvements relative to the baseline.
    """
    if not summaries:
        raise ValueError("no run summaries to aggregate")
    by_sched: dict[str, list[RunSummary]] = {}
    for s in summaries:
        by_sched.setdefault(s.scheduler, []).append(s)

    out: dict = {"schedulers": {}}
    for name, runs in by_sched.items():
        stats = {}
        for kpi_name in _KPI_FIELDS:
            vals = np.array([getattr(r, kpi_name) for r in runs])
            stats[kpi_name] = {"mean": float(vals.mean()), "std": float(vals.std())}
        stats["n_runs"] = len(runs)
        out["schedulers"][name] = stats

    if baseline is not None:
        if baseline not in by_sched:
            raise ValueError(f"baseline scheduler {baseline!r} has no runs")
        seed_sets = {name: sorted(r.seed for r in runs) for name, runs in by_sched.items()}
        base_seeds = seed_sets[baseline]
        for name, seeds in seed_sets.items():
            if seeds != base_seeds:
                raise ValueError(
                    f"paired comparison needs equal seed sets; {name} ran {seeds}, "
                    f"{baseline} ran {base_seeds}"
                )
        base_by_seed = {r.seed: r for r in by_sched[baseline]}
        deltas: dict = {}
        for name, runs in by_sched.items():
            if name == baseline:
                continue
            per_kpi = {}
            for kpi_name in _KPI_FIELDS:
                pct = []
                for r in runs:
                    b = getattr(base_by_seed[r.seed], kpi_name)
                    x = getattr(r, kpi_name)
                    if x == b:
                        pct.append(0.0)
                    elif b != 0.0:
                        pct.append(100.0 * (x - b) / b)
                    # else: percentage vs a zero baseline is undefined; skip the pair
                per_kpi[kpi_name + "_pct"] = float(np.mean(pct)) if pct else None
            deltas[name] = per_kpi
        out["baseline"] = baseline
        out["deltas_vs_baseline_pct"] = deltas
    return out


def write_run_csv(rec: KpiRecord, path) -> None:
    """One row per (slot, user); eligible_bitmap has bit j set when the user
    was eligible at RBG j of that slot, decision counts RBGs granted."""
    n_rbgs = rec.decisions.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# schema={RUN_CSV_SCHEMA} scheduler={rec.scheduler} seed={rec.seed} "
            f"mu={rec.mu} slot_duration_s={rec.slot_duration_s!r} fingerprint={rec.fingerprint}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["slot", "ue", "scheduled_bits", "delivered_bits", "decision", "eligible_bitmap"])
        for slot in range(rec.n_slots):
            for u in range(rec.n_ue):
                bitmap = 0
                for j in range(n_rbgs):
                    if rec.eligible[slot, j, u]:
                        bitmap |= 1 << j
                writer.writerow(
                    [
                        slot,
                        u,
                        int(rec.scheduled[slot, u]),
                        int(rec.delivered[slot, u]),
                        int((rec.decisions[slot] == u).sum()),
                        bitmap,
                    ]
                )


def write_curves_csv(curve_sets: dict[str, tuple[int, QuantizedCurves]], path, fingerprint: str = "") -> None:
    """curve_sets maps scheduler label -> (seed, curves); ue=-1 rows are the cell."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={CURVES_SCHEMA} fingerprint={fingerprint}\n")
        writer = csv.writer(fh)
        writer.writerow(["scheduler", "seed", "time_unit", "ue", "throughput_bps", "goodput_bps"])
        for name, (seed, q) in curve_sets.items():
            for t in range(q.n_units):
                for u in range(q.ue_throughput_bps.shape[1]):
                    writer.writerow(
                        [name, seed, t, u, repr(float(q.ue_throughput_bps[t, u])), repr(float(q.ue_goodput_bps[t, u]))]
                    )
                writer.writerow(
                    [name, seed, t, -1, repr(float(q.cell_throughput_bps[t])), repr(float(q.cell_goodput_bps[t]))]
                )


def write_summary_json(summaries: list[RunSummary], aggregate: dict, path, fingerprint: str = "") -> None:
    doc = {
        "schema": SUMMARY_SCHEMA,
        "fingerprint": fingerprint,
        "runs": [s.to_dict() for s in summaries],
        "aggregate": aggregate,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
