"""CSV persistence for trajectories and reward matrices.

Floats are written with repr so every file round-trips exactly; all
files are self-describing via a header row.
"""

from __future__ import annotations

import csv

import numpy as np

from .objectives import ObjectiveSet, multiobjective_optimum, weighted_loss


def _fmt(value) -> str:
    return repr(float(value))


def write_trajectory_csv(path, trajectory, objective_set: ObjectiveSet) -> None:
    """One row per (step, expert) plus a 'merged' row at sync steps.

    The gap column is the row's scalarized loss minus the optimum value.
    """
    n = objective_set.num_objectives
    theta_star = multiobjective_optimum(objective_set)
    optimum = weighted_loss(objective_set, theta_star)
    header = (
        ["t", "eta", "subset", "expert_id"]
        + [f"loss_{k}" for k in range(n)]
        + ["weighted_loss", "gap", "lemma1_residual", "is_sync"]
    )
    with open(path, "w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for record in trajectory.records:
            subset = "|".join(str(i) for i in record.subset)
            residual = "" if record.lemma1_residual is None else _fmt(record.lemma1_residual)
            sync = "1" if record.is_sync else "0"
            for e in range(record.params.shape[0]):
                writer.writerow(
                    [record.t, _fmt(record.eta), subset, e]
                    + [_fmt(x) for x in record.losses[e]]
                    + [_fmt(record.weighted[e]), _fmt(record.weighted[e] - optimum), residual, sync]
                )
            if record.merged is not None:
                losses = [obj.loss(record.merged) for obj in objective_set.objectives]
                weighted = float(np.dot(objective_set.weights, losses))
                writer.writerow(
                    [record.t, _fmt(record.eta), subset, "merged"]
                    + [_fmt(x) for x in losses]
                    + [_fmt(weighted), _fmt(weighted - optimum), residual, sync]
                )


def read_trajectory_csv(path) -> list:
    """Parse a trajectory CSV back into a list of typed row dicts."""
    rows = []
    with open(path, newline="", encoding="ascii") as handle:
        reader = csv.DictReader(handle)
        for raw in reader:
            row = {
                "t": int(raw["t"]),
                "eta": float(raw["eta"]),
                "subset": tuple(int(i) for i in raw["subset"].split("|")),
                "expert_id": raw["expert_id"],
                "weighted_loss": float(raw["weighted_loss"]),
                "gap": float(raw["gap"]),
                "lemma1_residual": (
                    float(raw["lemma1_residual"]) if raw["lemma1_residual"] else None
                ),
                "is_sync": raw["is_sync"] == "1",
            }
            losses = []
            k = 0
            while f"loss_{k}" in raw:
                losses.append(float(raw[f"loss_{k}"]))
                k += 1
            row["losses"] = tuple(losses)
            rows.append(row)
    return rows


def read_reward_csv(path):
    """Read a headered reward CSV (columns: sample_id, r_1..r_N)."""
    sample_ids = []
    rows = []
    with open(path, newline="", encoding="ascii") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if not header or header[0] != "sample_id":
            raise ValueError("reward CSV must start with a sample_id column")
        n = len(header) - 1
        if n < 1:
            raise ValueError("reward CSV has no reward columns")
        for raw in reader:
            if not raw:
                continue
            if len(raw) != n + 1:
                raise ValueError(f"reward row for {raw[0]!r} has wrong width")
            sample_ids.append(raw[0])
            rows.append([float(x) for x in raw[1:]])
    return sample_ids, np.asarray(rows, dtype=np.float64)


def write_front_csv(path, sample_ids, points, front_indices, per_objective, overall) -> None:
    """Write front membership plus the per-objective and overall means."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[1]
    header = ["sample_id"] + [f"r_{k + 1}" for k in range(n)]
    with open(path, "w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in front_indices:
            writer.writerow([sample_ids[i]] + [_fmt(x) for x in points[i]])
        writer.writerow(["mean"] + [_fmt(x) for x in per_objective])
        writer.writerow(["overall_mean"] + [_fmt(overall)] + [""] * (n - 1))
