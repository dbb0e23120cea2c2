"""Shared domain types plus the weight-normalization and merge kernels.

Parameter vectors are plain 1-D float64 numpy arrays; the helpers here
validate them instead of wrapping them in a class so everything composes
with numpy and scikit-learn directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHT_TOL = 1e-12


class ConfigError(ValueError):
    """A run configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DivergenceError(RuntimeError):
    """An optimizer update produced a non-finite parameter or loss."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"run diverged: non-finite value at step {step}")


def check_params(values) -> np.ndarray:
    """Validate and return a parameter vector as a float64 array.

    The vector must be 1-D, non-empty and contain only finite entries.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("parameter vector must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameter vector contains non-finite entries")
    return arr


def check_weights(weights, tol: float = WEIGHT_TOL) -> np.ndarray:
    """Validate preference weights: strictly positive, summing to 1.

    Weights are rejected, never silently renormalized.
    """
    arr = np.asarray(weights, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("weights must be a non-empty 1-D sequence")
    if np.any(arr <= 0.0):
        raise ValueError("weights must be strictly positive")
    if abs(float(arr.sum()) - 1.0) > tol:
        raise ValueError("weights do not sum to 1")
    return arr


@dataclass(frozen=True)
class SubsetSelection:
    """The objective indices active in one merge window."""

    indices: tuple
    drawn_at: int = 0

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(set(idx)) != len(idx):
            raise ValueError("subset indices must be distinct")
        if any(i < 0 for i in idx):
            raise ValueError("subset indices must be non-negative")

    def __len__(self):
        return len(self.indices)


def normalize_subset_weights(weights, subset: SubsetSelection) -> np.ndarray:
    """Restrict preference weights to a subset and rescale them to sum to 1.

    The returned values are ordered to match ``subset.indices``.
    """
    if len(subset) == 0:
        raise ValueError("empty-subset")
    w = check_weights(weights)
    if max(subset.indices) >= w.size:
        raise ValueError("subset index out of range for weights")
    picked = w[list(subset.indices)]
    return picked / picked.sum()


def convex_combine(params, lambdas, tol: float = WEIGHT_TOL) -> np.ndarray:
    """Coordinate-wise convex combination of parameter vectors.

    Summation runs in the given (ascending expert-index) order so serial
    and parallel callers produce bit-identical results.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    vecs = [check_params(p) for p in params]
    if len(vecs) != lam.size or len(vecs) == 0:
        raise ValueError("params and lambdas must be equal-length and non-empty")
    d = vecs[0].size
    if any(v.size != d for v in vecs):
        raise ValueError("parameter vectors must share the same dimension")
    if np.any(lam < 0.0) or abs(float(lam.sum()) - 1.0) > tol:
        raise ValueError("lambdas must be non-negative and sum to 1")
    out = np.zeros(d)
    for coeff, vec in zip(lam, vecs):
        out += coeff * vec
    return out


@dataclass
class RunConfig:
    """Full description of one optimizer run on a synthetic objective set."""

    seed: int = 0
    dim: int = 10
    num_objectives: int = 3
    subset_size: int = 3
    merge_frequency: int = 1
    total_steps: int = 100
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    lr_mode: str = "theorem"  # "theorem" or "constant"
    learning_rate: float | None = None
    merge_strategy: str = "fixed"  # "fixed" or "selective"
    candidates: tuple | None = None
    mu: float = 1.0
    l_smooth: float = 8.0
    spread: float = 1.0
    objective_seed: int | None = None
    theta_ref: tuple | None = None
    final_merge_all: bool = False
    instrument_lemma1: bool = False


def validate_run_config(cfg: RunConfig) -> list:
    """Collect every violated invariant of a run configuration.

    Returns an empty list when the configuration is valid; never raises.
    """
    violations = []
    if cfg.dim < 1:
        violations.append("dim must be >= 1")
    if cfg.num_objectives < 1:
        violations.append("num_objectives must be >= 1")
    if cfg.subset_size < 1:
        violations.append("subset_size must be >= 1")
    if cfg.subset_size > cfg.num_objectives:
        violations.append("M exceeds N")
    if cfg.total_steps < 1:
        violations.append("total_steps must be >= 1")
    if cfg.merge_frequency < 1:
        violations.append("merge_frequency must be >= 1")
    if cfg.merge_frequency > cfg.total_steps:
        violations.append("m exceeds T")
    if not (0.0 < cfg.mu <= cfg.l_smooth):
        violations.append("constants must satisfy 0 < mu <= L")
    if cfg.spread < 0.0:
        violations.append("spread must be >= 0")
    try:
        w = check_weights(cfg.weights)
        if w.size != cfg.num_objectives:
            violations.append("weights length does not match num_objectives")
    except ValueError as exc:
        violations.append(str(exc))
    if cfg.lr_mode not in ("theorem", "constant"):
        violations.append(f"unknown lr_mode {cfg.lr_mode!r}")
    if cfg.lr_mode == "constant":
        if cfg.learning_rate is None or cfg.learning_rate <= 0.0:
            violations.append("constant lr_mode requires a positive learning_rate")
    if cfg.merge_strategy not in ("fixed", "selective"):
        violations.append(f"unknown merge_strategy {cfg.merge_strategy!r}")
    if cfg.merge_strategy == "selective" and cfg.candidates is not None:
        for k, cand in enumerate(cfg.candidates):
            arr = np.asarray(cand, dtype=np.float64)
            if arr.size != cfg.num_objectives:
                violations.append(f"candidate {k} has wrong length")
            elif np.any(arr < 0.0) or abs(float(arr.sum()) - 1.0) > WEIGHT_TOL:
                violations.append(f"candidate {k} is not on the simplex")
    if cfg.theta_ref is not None and len(cfg.theta_ref) != cfg.dim:
        violations.append("theta_ref length does not match dim")
    return violations


@dataclass
class StepRecord:
    """Per-step record emitted by every optimizer.

    ``params`` holds the post-update expert vectors (before any merge
    reset) as an (n_experts, d) array; ``merged`` is the merged vector at
    sync steps and None elsewhere. ``losses`` is (n_experts, N) and
    ``weighted`` the preference-weighted loss per expert.
    """

    t: int
    eta: float
    subset: tuple
    params: np.ndarray
    losses: np.ndarray
    weighted: np.ndarray
    is_sync: bool = False
    merged: np.ndarray | None = None
    lemma1_residual: float | None = None
