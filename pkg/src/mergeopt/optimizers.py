"""The three optimizers: iterative merge-and-fine-tune, scalarized
gradient descent, and independent experts with a single final merge.

All three share the same step/record machinery so the boundary cases
(merge every step, merge only once at the end) coincide with the
baselines exactly. Runs are deterministic given the config seed.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .core import (
    ConfigError,
    DivergenceError,
    RunConfig,
    StepRecord,
    SubsetSelection,
    check_params,
    check_weights,
    convex_combine,
    normalize_subset_weights,
    validate_run_config,
)
from .objectives import ObjectiveSet, weighted_loss

# Test hook: when set, called with (vectors, lambdas) right before every
# merge reduction and its return value is merged instead. Used by the
# verification suite's negative control; leave None in production.
merge_hook = None

# Stream tags so adding roles never perturbs existing RNG streams.
_SUBSET_STREAM = 1
_EXPERT_STREAM = 2

#: Candidate merge weights used by the selective strategy for N=3 when the
#: config does not supply its own: the uniform vector plus all distinct
#: permutations of (1/6, 1/6, 2/3) and (1/6, 5/12, 5/12).
DEFAULT_CANDIDATES_3 = tuple(
    dict.fromkeys(
        [(1 / 3, 1 / 3, 1 / 3)]
        + sorted(set(itertools.permutations((1 / 6, 1 / 6, 2 / 3))))
        + sorted(set(itertools.permutations((1 / 6, 5 / 12, 5 / 12))))
    )
)


@dataclass(frozen=True)
class ScheduleParams:
    """Learning-rate schedule constants.

    In "theorem" mode eta_t = 2 / (mu * (gamma + t)) with
    gamma = max(8 * l_smooth / mu, m) - 1, which guarantees
    eta_1 <= min(1/mu, 1/(4L)) and eta_t <= 2 * eta_{t+m}.
    """

    mu: float
    l_smooth: float
    merge_frequency: int
    mode: str = "theorem"
    learning_rate: float | None = None

    @property
    def gamma(self) -> float:
        return max(8.0 * self.l_smooth / self.mu, float(self.merge_frequency)) - 1.0

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "ScheduleParams":
        return cls(
            mu=cfg.mu,
            l_smooth=cfg.l_smooth,
            merge_frequency=cfg.merge_frequency,
            mode=cfg.lr_mode,
            learning_rate=cfg.learning_rate,
        )


def lr_schedule(t: int, sp: ScheduleParams) -> float:
    """Learning rate at step t >= 1; strictly decreasing in theorem mode."""
    if t < 1:
        raise ValueError("step index must be >= 1")
    if sp.mode == "constant":
        return float(sp.learning_rate)
    return 2.0 / (sp.mu * (sp.gamma + t))


def sample_subset(rng: np.random.Generator, n: int, m_sel: int, drawn_at: int = 0) -> SubsetSelection:
    """Draw m_sel of n objective indices uniformly without replacement.

    Every index has marginal inclusion probability m_sel / n and every
    pair m_sel(m_sel-1) / (n(n-1)). Indices are returned ascending.
    """
    if not 1 <= m_sel <= n:
        raise ValueError("subset size must satisfy 1 <= M <= N")
    picked = np.sort(rng.permutation(n)[:m_sel])
    return SubsetSelection(indices=tuple(int(i) for i in picked), drawn_at=drawn_at)


def expert_step(theta, obj, eta: float) -> np.ndarray:
    """One gradient step of a single expert on its own objective."""
    if eta <= 0.0:
        raise ValueError("learning rate must be positive")
    theta = check_params(theta)
    return theta - eta * obj.grad(theta)


def _combine(vectors, lambdas) -> np.ndarray:
    if merge_hook is not None:
        vectors, lambdas = merge_hook(vectors, lambdas)
    return convex_combine(vectors, lambdas)


def select_merge_weights(experts, candidates, objective_set: ObjectiveSet):
    """Pick the candidate weight set whose merge scores best.

    Each candidate merges the experts and is scored by the scalarized
    loss (lower is better); ties break toward the lowest candidate index.
    Returns (weights, merged_vector).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    best = None
    for cand in candidates:
        merged = _combine(experts, cand)
        score = weighted_loss(objective_set, merged)
        if best is None or score < best[0]:
            best = (score, tuple(cand), merged)
    return best[1], best[2]


@dataclass
class OptimizerState:
    """Mutable state of an iterative merge run between sync points."""

    t: int
    params: np.ndarray  # (n_experts, d)
    subset: SubsetSelection
    merged: np.ndarray
    rng: np.random.Generator


def _merge_over_subset(params, subset, cfg: RunConfig, objective_set: ObjectiveSet) -> np.ndarray:
    vectors = [params[i] for i in subset.indices]
    if cfg.merge_strategy == "selective":
        candidates = cfg.candidates
        if candidates is None:
            if cfg.num_objectives != 3:
                raise ValueError("default selective candidates exist only for N=3")
            candidates = DEFAULT_CANDIDATES_3
        restricted = []
        for cand in candidates:
            arr = np.asarray(cand, dtype=np.float64)[list(subset.indices)]
            restricted.append(arr / arr.sum())
        _, merged = select_merge_weights(vectors, restricted, objective_set)
        return merged
    lam = normalize_subset_weights(objective_set.weights, subset)
    return _combine(vectors, lam)


def sync_and_merge(state: OptimizerState, cfg: RunConfig, objective_set: ObjectiveSet):
    """Merge the outgoing subset, reset all experts, draw the next subset.

    Must be called exactly at sync steps (t mod m == 0).
    """
    if state.t % cfg.merge_frequency != 0:
        raise ValueError(f"sync called off-schedule at step {state.t}")
    merged = _merge_over_subset(state.params, state.subset, cfg, objective_set)
    state.params[:] = merged
    state.merged = merged
    new_subset = sample_subset(state.rng, cfg.num_objectives, cfg.subset_size, drawn_at=state.t)
    state.subset = new_subset
    return merged, new_subset


@dataclass
class Trajectory:
    """Per-step record stream of one run plus its summary quantities."""

    algorithm: str
    config: RunConfig
    theta_ref: np.ndarray
    records: list = field(default_factory=list)
    final_merged: np.ndarray | None = None
    wall_ms: float = 0.0

    @property
    def merged_points(self):
        """(t, merged vector) at every sync step."""
        return [(r.t, r.merged) for r in self.records if r.merged is not None]


def _check_config(objective_set: ObjectiveSet, cfg: RunConfig) -> np.ndarray:
    violations = validate_run_config(cfg)
    if objective_set.num_objectives != cfg.num_objectives:
        violations.append("objective set size does not match num_objectives")
    if objective_set.dim != cfg.dim:
        violations.append("objective set dimension does not match dim")
    if violations:
        raise ConfigError(violations)
    return check_weights(cfg.weights)


def _theta_ref(cfg: RunConfig) -> np.ndarray:
    if cfg.theta_ref is None:
        return np.zeros(cfg.dim)
    return check_params(cfg.theta_ref)


def _losses(objective_set: ObjectiveSet, params: np.ndarray, t: int):
    losses = np.empty((params.shape[0], objective_set.num_objectives))
    for k, obj in enumerate(objective_set.objectives):
        delta = params - obj.c
        losses[:, k] = 0.5 * np.einsum("ed,ed->e", delta @ obj.a, delta) + obj.b
    if not np.all(np.isfinite(losses)):
        raise DivergenceError(t)
    return losses, losses @ objective_set.weights


class _ContractionMonitor:
    """Tracks the per-step averaging inequality when every expert moves.

    Residual = |psi_new - theta*|^2 - [(1 - eta mu)|psi - theta*|^2
    + 6 L eta^2 delta* + 2 sum_i w_i |psi - theta_i|^2]; the analysis
    guarantees residual <= 0 whenever eta <= 1/(4L) and M == N.
    """

    def __init__(self, objective_set: ObjectiveSet, cfg: RunConfig):
        from .objectives import delta_star, multiobjective_optimum

        self.w = objective_set.weights
        self.mu = cfg.mu
        self.l_smooth = cfg.l_smooth
        self.theta_star = multiobjective_optimum(objective_set)
        self.delta_star = delta_star(objective_set)

    def residual(self, prev_params, new_params, eta):
        psi_prev = _combine(list(prev_params), self.w)
        psi_new = _combine(list(new_params), self.w)
        drift = sum(
            w * float(np.sum((psi_prev - theta) ** 2))
            for w, theta in zip(self.w, prev_params)
        )
        lhs = float(np.sum((psi_new - self.theta_star) ** 2))
        rhs = (
            (1.0 - eta * self.mu) * float(np.sum((psi_prev - self.theta_star) ** 2))
            + 6.0 * self.l_smooth * eta**2 * self.delta_star
            + 2.0 * drift
        )
        return lhs - rhs


def run_iterative_rs(objective_set: ObjectiveSet, cfg: RunConfig) -> Trajectory:
    """Iterative merge-and-fine-tune: experts step on their own
    objectives and are merged back together every m steps.

    m=1 with a full subset recovers scalarized gradient descent; m=T
    recovers independent experts with a single final merge.
    """
    _check_config(objective_set, cfg)
    theta_ref = _theta_ref(cfg)
    sched = ScheduleParams.from_config(cfg)
    rng = np.random.default_rng([cfg.seed, _SUBSET_STREAM])
    n, m = cfg.num_objectives, cfg.merge_frequency
    state = OptimizerState(
        t=0,
        params=np.tile(theta_ref, (n, 1)),
        subset=sample_subset(rng, n, cfg.subset_size, drawn_at=0),
        merged=theta_ref.copy(),
        rng=rng,
    )
    monitor = _ContractionMonitor(objective_set, cfg) if (
        cfg.instrument_lemma1 and cfg.subset_size == n
    ) else None
    traj = Trajectory(algorithm="iterative-rs", config=cfg, theta_ref=theta_ref)
    start = time.perf_counter()
    for t in range(1, cfg.total_steps + 1):
        state.t = t
        eta = lr_schedule(t, sched)
        prev = state.params.copy() if monitor is not None else None
        for i in state.subset.indices:
            obj = objective_set.objectives[i]
            state.params[i] -= eta * (obj.a @ (state.params[i] - obj.c))
        if not np.all(np.isfinite(state.params)):
            raise DivergenceError(t)
        residual = monitor.residual(prev, state.params, eta) if monitor is not None else None
        snapshot = state.params.copy()
        subset_now = state.subset.indices
        merged = None
        if t % m == 0:
            merged, _ = sync_and_merge(state, cfg, objective_set)
        losses, weighted = _losses(objective_set, snapshot, t)
        traj.records.append(
            StepRecord(
                t=t,
                eta=eta,
                subset=subset_now,
                params=snapshot,
                losses=losses,
                weighted=weighted,
                is_sync=merged is not None,
                merged=merged,
                lemma1_residual=residual,
            )
        )
    last = traj.records[-1]
    if last.merged is None:
        final_subset = (
            SubsetSelection(indices=tuple(range(n)), drawn_at=cfg.total_steps)
            if cfg.final_merge_all
            else state.subset
        )
        merged = _merge_over_subset(state.params, final_subset, cfg, objective_set)
        last.merged = merged
        last.is_sync = True
    traj.final_merged = last.merged
    traj.wall_ms = (time.perf_counter() - start) * 1e3
    return traj


def run_morlhf(objective_set: ObjectiveSet, cfg: RunConfig) -> Trajectory:
    """Gradient descent on the preference-weighted scalarized loss."""
    w = _check_config(objective_set, cfg)
    theta_ref = _theta_ref(cfg)
    sched = ScheduleParams.from_config(cfg)
    theta = theta_ref.copy()
    traj = Trajectory(algorithm="morlhf", config=cfg, theta_ref=theta_ref)
    start = time.perf_counter()
    all_indices = tuple(range(cfg.num_objectives))
    for t in range(1, cfg.total_steps + 1):
        eta = lr_schedule(t, sched)
        grad = np.zeros(cfg.dim)
        for wi, obj in zip(w, objective_set.objectives):
            grad += wi * (obj.a @ (theta - obj.c))
        theta = theta - eta * grad
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(t)
        snapshot = theta[np.newaxis, :].copy()
        losses, weighted = _losses(objective_set, snapshot, t)
        traj.records.append(
            StepRecord(
                t=t,
                eta=eta,
                subset=all_indices,
                params=snapshot,
                losses=losses,
                weighted=weighted,
                is_sync=True,
                merged=theta.copy(),
            )
        )
    traj.final_merged = theta.copy()
    traj.wall_ms = (time.perf_counter() - start) * 1e3
    return traj


def run_rewarded_soups(objective_set: ObjectiveSet, cfg: RunConfig) -> Trajectory:
    """Independent per-objective experts merged once after training.

    The merge uses the preference weights (fixed strategy) or the best of
    the configured candidate weight sets (selective strategy).
    """
    w = _check_config(objective_set, cfg)
    theta_ref = _theta_ref(cfg)
    sched = ScheduleParams.from_config(cfg)
    n = cfg.num_objectives
    params = np.tile(theta_ref, (n, 1))
    traj = Trajectory(algorithm="rewarded-soups", config=cfg, theta_ref=theta_ref)
    start = time.perf_counter()
    all_indices = tuple(range(n))
    for t in range(1, cfg.total_steps + 1):
        eta = lr_schedule(t, sched)
        for i in range(n):
            obj = objective_set.objectives[i]
            params[i] -= eta * (obj.a @ (params[i] - obj.c))
        if not np.all(np.isfinite(params)):
            raise DivergenceError(t)
        snapshot = params.copy()
        losses, weighted = _losses(objective_set, snapshot, t)
        traj.records.append(
            StepRecord(
                t=t,
                eta=eta,
                subset=all_indices,
                params=snapshot,
                losses=losses,
                weighted=weighted,
            )
        )
    full = SubsetSelection(indices=all_indices, drawn_at=cfg.total_steps)
    merged = _merge_over_subset(params, full, cfg, objective_set)
    last = traj.records[-1]
    last.merged = merged
    last.is_sync = True
    traj.final_merged = merged
    traj.wall_ms = (time.perf_counter() - start) * 1e3
    return traj


_ENGINES = {
    "iterative-rs": run_iterative_rs,
    "morlhf": run_morlhf,
    "rewarded-soups": run_rewarded_soups,
}


class _MergeOptimizerBase(BaseEstimator):
    """Shared fit machinery for the optimizer estimators.

    ``fit`` consumes an :class:`ObjectiveSet` and exposes the run as
    ``trajectory_`` and the final merged parameters as ``merged_params_``.
    """

    _algorithm = None

    def __init__(
        self,
        total_steps=100,
        seed=0,
        lr_mode="theorem",
        learning_rate=None,
        merge_frequency=1,
        subset_size=None,
        merge_strategy="fixed",
        candidates=None,
        theta_ref=None,
        final_merge_all=False,
        instrument_lemma1=False,
    ):
        self.total_steps = total_steps
        self.seed = seed
        self.lr_mode = lr_mode
        self.learning_rate = learning_rate
        self.merge_frequency = merge_frequency
        self.subset_size = subset_size
        self.merge_strategy = merge_strategy
        self.candidates = candidates
        self.theta_ref = theta_ref
        self.final_merge_all = final_merge_all
        self.instrument_lemma1 = instrument_lemma1

    def _make_config(self, objective_set: ObjectiveSet) -> RunConfig:
        n = objective_set.num_objectives
        return RunConfig(
            seed=self.seed,
            dim=objective_set.dim,
            num_objectives=n,
            subset_size=n if self.subset_size is None else self.subset_size,
            merge_frequency=self.merge_frequency,
            total_steps=self.total_steps,
            weights=tuple(float(w) for w in objective_set.weights),
            lr_mode=self.lr_mode,
            learning_rate=self.learning_rate,
            merge_strategy=self.merge_strategy,
            candidates=self.candidates,
            mu=objective_set.mu,
            l_smooth=objective_set.l_smooth,
            spread=0.0,
            theta_ref=self.theta_ref,
            final_merge_all=self.final_merge_all,
            instrument_lemma1=self.instrument_lemma1,
        )

    def fit(self, objective_set: ObjectiveSet, y=None):
        cfg = self._make_config(objective_set)
        self.config_ = cfg
        self.objective_set_ = objective_set
        self.trajectory_ = _ENGINES[self._algorithm](objective_set, cfg)
        self.merged_params_ = self.trajectory_.final_merged
        self.n_features_in_ = objective_set.dim
        return self

    def score(self, objective_set=None, y=None):
        """Negative scalarized loss of the merged parameters
        (higher is better, sklearn convention)."""
        target = self.objective_set_ if objective_set is None else objective_set
        return -weighted_loss(target, self.merged_params_)


class IterativeRS(_MergeOptimizerBase):
    """Iterative merge-and-fine-tune optimizer (merge every m steps)."""

    _algorithm = "iterative-rs"


class MORLHF(_MergeOptimizerBase):
    """Scalarized gradient descent on the weighted combined loss."""

    _algorithm = "morlhf"

    def __init__(self, total_steps=100, seed=0, lr_mode="theorem", learning_rate=None):
        super().__init__(
            total_steps=total_steps,
            seed=seed,
            lr_mode=lr_mode,
            learning_rate=learning_rate,
        )


class RewardedSoups(_MergeOptimizerBase):
    """Independent per-objective experts merged once after training."""

    _algorithm = "rewarded-soups"

    def __init__(
        self,
        total_steps=100,
        seed=0,
        lr_mode="theorem",
        learning_rate=None,
        merge_strategy="fixed",
        candidates=None,
    ):
        super().__init__(
            total_steps=total_steps,
            seed=seed,
            lr_mode=lr_mode,
            learning_rate=learning_rate,
            merge_strategy=merge_strategy,
            candidates=candidates,
        )
