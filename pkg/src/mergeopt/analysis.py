"""Convergence-bound evaluation and evaluation metrics.

Covers the closed-form performance-gap bound with its two-term
decomposition, post-hoc gradient-bound estimation, gap series against
the scalarized optimum, the inverse coefficient of variation score, and
Pareto-front extraction over reward vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import ObjectiveSet, multiobjective_optimum, weighted_loss


@dataclass(frozen=True)
class BoundInputs:
    """Constants feeding the performance-gap bound."""

    mu: float
    l_smooth: float
    grad_bound: float
    merge_frequency: int
    subset_size: int
    num_objectives: int
    delta_star: float
    dist_ref_sq: float

    def __post_init__(self):
        if self.mu <= 0.0 or self.l_smooth < self.mu:
            raise ValueError("constants must satisfy 0 < mu <= l_smooth")
        if self.grad_bound < 0.0 or self.delta_star < 0.0 or self.dist_ref_sq < 0.0:
            raise ValueError("grad_bound, delta_star, dist_ref_sq must be >= 0")
        if not 1 <= self.subset_size <= self.num_objectives:
            raise ValueError("subset size must satisfy 1 <= M <= N")
        if self.merge_frequency < 1:
            raise ValueError("merge_frequency must be >= 1")

    @property
    def gamma(self) -> float:
        return max(8.0 * self.l_smooth / self.mu, float(self.merge_frequency)) - 1.0

    @property
    def sampling_factor(self) -> float:
        """(N - M) / (N - 1) * m^2 / M; zero when M = N or N = 1."""
        n, m_sel = self.num_objectives, self.subset_size
        if n == 1 or m_sel == n:
            return 0.0
        return (n - m_sel) / (n - 1) * self.merge_frequency**2 / m_sel


def bound_decomposition(bi: BoundInputs, total_steps: int):
    """Split the gap bound into its objective-heterogeneity term and its
    drift-plus-initialization term. The two always sum to the bound."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    gamma = bi.gamma
    denom = bi.mu**2 * (gamma + total_steps)
    hetero = 12.0 * bi.l_smooth**2 * bi.delta_star / denom
    m = bi.merge_frequency
    drift = (
        8.0 * bi.l_smooth / denom * (2.0 * (m - 1) ** 2 + bi.sampling_factor) * bi.grad_bound**2
        + gamma * bi.l_smooth / (2.0 * (gamma + total_steps)) * bi.dist_ref_sq
    )
    return hetero, drift


def convergence_bound(bi: BoundInputs, total_steps: int) -> float:
    """Closed-form upper bound on the scalarized performance gap after
    total_steps steps of the theorem-schedule iterative merge run."""
    hetero, drift = bound_decomposition(bi, total_steps)
    return hetero + drift


def estimate_gradient_bound(trajectory, objective_set: ObjectiveSet) -> float:
    """Largest per-objective gradient norm seen anywhere along a run.

    This is a post-hoc stand-in for a uniform gradient bound (quadratics
    have none); report it next to any bound that consumes it.
    """
    if not trajectory.records:
        raise ValueError("trajectory is empty")
    points = [trajectory.theta_ref[np.newaxis, :]]
    for record in trajectory.records:
        points.append(record.params)
        if record.merged is not None:
            points.append(record.merged[np.newaxis, :])
    stacked = np.concatenate(points, axis=0)
    best = 0.0
    for obj in objective_set.objectives:
        norms = np.linalg.norm((stacked - obj.c) @ obj.a.T, axis=1)
        best = max(best, float(norms.max()))
    return best


def gap_series(trajectory, objective_set: ObjectiveSet):
    """(t, scalarized gap) at every merged point of a run."""
    theta_star = multiobjective_optimum(objective_set)
    optimum = weighted_loss(objective_set, theta_star)
    return [
        (record.t, weighted_loss(objective_set, record.merged) - optimum)
        for record in trajectory.records
        if record.merged is not None
    ]


def icv_score(rewards, epsilon: float = 1e-9) -> float:
    """Inverse coefficient of variation: per-sample mean over the
    population standard deviation across objectives, averaged over samples.

    Standard deviations below epsilon are clamped to epsilon; see
    :func:`icv_guarded_count` for how many samples the guard touched.
    """
    matrix = _check_rewards(rewards)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    means = matrix.mean(axis=1)
    stds = matrix.std(axis=1)
    return float(np.mean(means / np.maximum(stds, epsilon)))


def icv_guarded_count(rewards, epsilon: float = 1e-9) -> int:
    """Number of samples whose reward spread fell below the epsilon guard."""
    matrix = _check_rewards(rewards)
    return int(np.count_nonzero(matrix.std(axis=1) < epsilon))


def _check_rewards(rewards) -> np.ndarray:
    matrix = np.asarray(rewards, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[np.newaxis, :]
    if matrix.ndim != 2 or matrix.shape[1] < 2:
        raise ValueError("reward matrix must be 2-D with at least two objectives")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("reward matrix contains non-finite entries")
    return matrix


def dominates(p, q) -> bool:
    """Weak dominance with at least one strict coordinate (maximization)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return bool(np.all(p >= q) and np.any(p > q))


def pareto_front(points) -> list:
    """Indices of points dominated by no other point.

    Pairwise O(S^2) scan; exact duplicates are all retained since neither
    strictly dominates the other.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must share one dimension")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    front = []
    for i in range(pts.shape[0]):
        if not any(dominates(pts[j], pts[i]) for j in range(pts.shape[0]) if j != i):
            front.append(i)
    return front


def front_mean_rewards(points, front_indices):
    """Per-objective means over the front plus the mean of those means."""
    pts = np.asarray(points, dtype=np.float64)
    idx = list(front_indices)
    if not idx:
        raise ValueError("front must be non-empty")
    per_objective = pts[idx].mean(axis=0)
    return per_objective, float(per_objective.mean())
