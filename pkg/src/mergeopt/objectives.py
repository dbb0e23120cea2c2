"""Synthetic strongly-convex quadratic objective family.

Each objective is L(theta) = 0.5 (theta - c)^T A (theta - c) + b with a
symmetric positive-definite A whose spectrum is pinned to the certified
curvature interval [mu, l_smooth], so smoothness and strong-convexity
constants are tight by construction rather than conservative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import check_params, check_weights

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class QuadraticObjective:
    """One quadratic loss with certified curvature constants."""

    a: np.ndarray
    c: np.ndarray
    b: float = 0.0
    mu: float | None = None
    l_smooth: float | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
            raise ValueError("matrix is not symmetric")
        c = check_params(self.c)
        if c.size != a.shape[0]:
            raise ValueError("minimizer length does not match matrix dimension")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.c.size

    def loss(self, theta) -> float:
        theta = check_params(theta)
        if theta.size != self.dim:
            raise ValueError("dimension mismatch")
        delta = theta - self.c
        return 0.5 * float(delta @ (self.a @ delta)) + self.b

    def grad(self, theta) -> np.ndarray:
        theta = check_params(theta)
        if theta.size != self.dim:
            raise ValueError("dimension mismatch")
        return self.a @ (theta - self.c)

    def spectrum(self) -> np.ndarray:
        """Eigenvalues of the curvature matrix, ascending."""
        return np.linalg.eigvalsh(self.a)


def eval_loss(obj: QuadraticObjective, theta) -> float:
    value = obj.loss(theta)
    if not np.isfinite(value):
        raise ValueError("loss is non-finite")
    return value


def eval_grad(obj: QuadraticObjective, theta) -> np.ndarray:
    return obj.grad(theta)


def finite_diff_grad(obj: QuadraticObjective, theta, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient, the oracle for analytic gradients."""
    if h <= 0.0:
        raise ValueError("step h must be positive")
    theta = check_params(theta)
    grad = np.zeros_like(theta)
    for k in range(theta.size):
        bump = np.zeros_like(theta)
        bump[k] = h
        grad[k] = (obj.loss(theta + bump) - obj.loss(theta - bump)) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class ObjectiveSet:
    """A family of quadratic objectives sharing one parameter space."""

    objectives: tuple
    weights: np.ndarray

    def __post_init__(self):
        objs = tuple(self.objectives)
        if not objs:
            raise ValueError("objective set must be non-empty")
        d = objs[0].dim
        if any(o.dim != d for o in objs):
            raise ValueError("objectives must share the same dimension")
        w = check_weights(self.weights)
        if w.size != len(objs):
            raise ValueError("weights length does not match number of objectives")
        object.__setattr__(self, "objectives", objs)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.objectives[0].dim

    @property
    def num_objectives(self) -> int:
        return len(self.objectives)

    @property
    def mu(self) -> float:
        """Certified strong-convexity constant for the whole set."""
        return min(o.mu for o in self.objectives)

    @property
    def l_smooth(self) -> float:
        """Certified smoothness constant for the whole set."""
        return max(o.l_smooth for o in self.objectives)


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    # QR of a Gaussian matrix; sign-fixing the R diagonal makes Q unique.
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _random_ball_point(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    if radius == 0.0:
        return np.zeros(d)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    return radius * rng.uniform() ** (1.0 / d) * direction


def make_quadratic_set(
    seed: int,
    num_objectives: int,
    dim: int,
    mu: float,
    l_smooth: float,
    spread: float,
    weights=None,
) -> ObjectiveSet:
    """Generate a seeded objective set with tight curvature constants.

    Each curvature matrix has its extreme eigenvalues forced to mu and
    l_smooth (dim >= 2) and the rest drawn uniformly in between; each
    minimizer is drawn uniformly from the ball of the given spread radius.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if l_smooth < mu:
        raise ValueError("l_smooth must be >= mu")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if spread < 0.0:
        raise ValueError("spread must be >= 0")
    if dim == 1 and l_smooth != mu:
        raise ValueError("dim=1 admits a single eigenvalue; set mu == l_smooth")
    rng = np.random.default_rng(seed)
    objectives = []
    for _ in range(num_objectives):
        eigs = np.empty(dim)
        eigs[0] = mu
        eigs[-1] = l_smooth
        if dim > 2:
            eigs[1:-1] = rng.uniform(mu, l_smooth, dim - 2)
        q = _random_orthogonal(rng, dim)
        a = (q * eigs) @ q.T
        a = 0.5 * (a + a.T)
        c = _random_ball_point(rng, dim, spread)
        objectives.append(QuadraticObjective(a=a, c=c, b=0.0, mu=mu, l_smooth=l_smooth))
    if weights is None:
        weights = np.full(num_objectives, 1.0 / num_objectives)
    return ObjectiveSet(objectives=tuple(objectives), weights=weights)


def weighted_loss(objective_set: ObjectiveSet, theta) -> float:
    """Preference-weighted scalarized loss at theta."""
    theta = check_params(theta)
    total = 0.0
    for w, obj in zip(objective_set.weights, objective_set.objectives):
        total += w * obj.loss(theta)
    return float(total)


def weighted_grad(objective_set: ObjectiveSet, theta) -> np.ndarray:
    """Gradient of the scalarized loss, accumulated in objective order."""
    theta = check_params(theta)
    grad = np.zeros(objective_set.dim)
    for w, obj in zip(objective_set.weights, objective_set.objectives):
        grad += w * obj.grad(theta)
    return grad


def multiobjective_optimum(objective_set: ObjectiveSet, residual_tol: float = 1e-9) -> np.ndarray:
    """Minimizer of the scalarized loss via a Cholesky solve.

    The combined curvature matrix is SPD, so the solve cannot fail for
    valid sets; the residual is checked to guard against conditioning.
    """
    d = objective_set.dim
    combined = np.zeros((d, d))
    rhs = np.zeros(d)
    for w, obj in zip(objective_set.weights, objective_set.objectives):
        combined += w * obj.a
        rhs += w * (obj.a @ obj.c)
    theta_star = cho_solve(cho_factor(combined, lower=True), rhs)
    residual = np.linalg.norm(combined @ theta_star - rhs)
    if residual > residual_tol * (1.0 + np.linalg.norm(rhs)):
        raise RuntimeError(f"optimum solve residual too large: {residual:g}")
    return theta_star


def delta_star(objective_set: ObjectiveSet) -> float:
    """Heterogeneity constant: scalarized optimum value minus the
    weighted sum of the per-objective optimum values.

    Zero exactly when all objectives share a minimizer.
    """
    theta_star = multiobjective_optimum(objective_set)
    best_individual = sum(
        w * obj.b for w, obj in zip(objective_set.weights, objective_set.objectives)
    )
    return float(weighted_loss(objective_set, theta_star) - best_individual)


def scale_losses(objective_set: ObjectiveSet) -> ObjectiveSet:
    """Fold non-uniform preference weights into the losses themselves.

    Each objective is scaled by w_i * N and the output set carries uniform
    weights, so the scalarized loss is unchanged at every point. Certified
    curvature constants scale along with the matrices.
    """
    n = objective_set.num_objectives
    scaled = []
    for w, obj in zip(objective_set.weights, objective_set.objectives):
        factor = w * n
        scaled.append(
            QuadraticObjective(
                a=factor * obj.a,
                c=obj.c,
                b=factor * obj.b,
                mu=factor * obj.mu,
                l_smooth=factor * obj.l_smooth,
            )
        )
    return ObjectiveSet(objectives=tuple(scaled), weights=np.full(n, 1.0 / n))


def save_objective_set(path, objective_set: ObjectiveSet) -> None:
    """Write a set field-for-field as text; floats use repr so the file
    round-trips exactly across machines."""
    lines = []
    lines.append(f"dim = {objective_set.dim}")
    lines.append(f"num_objectives = {objective_set.num_objectives}")
    lines.append("weights = " + " ".join(repr(float(w)) for w in objective_set.weights))
    for k, obj in enumerate(objective_set.objectives):
        lines.append(f"objective {k}")
        lines.append(f"mu = {obj.mu!r}")
        lines.append(f"l_smooth = {obj.l_smooth!r}")
        lines.append(f"b = {obj.b!r}")
        lines.append("c = " + " ".join(repr(float(x)) for x in obj.c))
        for row in obj.a:
            lines.append("a = " + " ".join(repr(float(x)) for x in row))
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_objective_set(path) -> ObjectiveSet:
    """Read a set written by :func:`save_objective_set`."""
    with open(path, "r", encoding="ascii") as handle:
        lines = [ln.strip() for ln in handle if ln.strip()]
    fields = {}
    idx = 0
    for key in ("dim", "num_objectives", "weights"):
        name, _, value = lines[idx].partition("=")
        if name.strip() != key:
            raise ValueError(f"expected {key!r} at line {idx + 1}")
        fields[key] = value.strip()
        idx += 1
    dim = int(fields["dim"])
    n = int(fields["num_objectives"])
    weights = np.array([float(x) for x in fields["weights"].split()])
    objectives = []
    for k in range(n):
        if lines[idx] != f"objective {k}":
            raise ValueError(f"expected objective {k} header at line {idx + 1}")
        idx += 1
        scalars = {}
        for key in ("mu", "l_smooth", "b"):
            name, _, value = lines[idx].partition("=")
            scalars[name.strip()] = float(value)
            idx += 1
        _, _, cval = lines[idx].partition("=")
        c = np.array([float(x) for x in cval.split()])
        idx += 1
        rows = []
        for _ in range(dim):
            name, _, value = lines[idx].partition("=")
            if name.strip() != "a":
                raise ValueError(f"expected matrix row at line {idx + 1}")
            rows.append([float(x) for x in value.split()])
            idx += 1
        objectives.append(
            QuadraticObjective(
                a=np.array(rows),
                c=c,
                b=scalars["b"],
                mu=scalars["mu"],
                l_smooth=scalars["l_smooth"],
            )
        )
    return ObjectiveSet(objectives=tuple(objectives), weights=weights)
