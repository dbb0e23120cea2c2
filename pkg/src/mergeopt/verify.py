"""Self-check battery bundling the invariant suites of all modules.

Each check returns (name, passed, detail); the CLI `verify` command
prints one line per check and fails on the first broken property.
"""

from __future__ import annotations

import numpy as np

from . import analysis, optimizers
from .core import RunConfig, SubsetSelection, convex_combine, normalize_subset_weights
from .objectives import (
    delta_star,
    eval_grad,
    finite_diff_grad,
    make_quadratic_set,
    multiobjective_optimum,
    weighted_loss,
)
from .optimizers import (
    ScheduleParams,
    lr_schedule,
    run_iterative_rs,
    run_morlhf,
    run_rewarded_soups,
    sample_subset,
)

_EQUIV_WEIGHTS = (0.5, 0.25, 0.25)


def _probe_set(seed=7):
    return make_quadratic_set(seed, 3, 10, 1.0, 8.0, 1.0)


def check_gradient_oracle():
    oset = _probe_set()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        obj = oset.objectives[rng.integers(3)]
        theta = rng.normal(size=10) * 2.0
        exact = eval_grad(obj, theta)
        approx = finite_diff_grad(obj, theta, h=1e-4)
        worst = max(worst, np.linalg.norm(exact - approx) / max(np.linalg.norm(approx), 1e-12))
    return worst <= 1e-6, f"max rel err {worst:.3e}"


def check_smoothness_certificate():
    oset = _probe_set()
    rng = np.random.default_rng(12)
    worst = -np.inf
    for _ in range(100):
        obj = oset.objectives[rng.integers(3)]
        t1, t2 = rng.normal(size=10) * 3.0, rng.normal(size=10) * 3.0
        upper = (
            obj.loss(t2)
            + float(obj.grad(t2) @ (t1 - t2))
            + obj.l_smooth / 2.0 * float(np.sum((t1 - t2) ** 2))
        )
        worst = max(worst, obj.loss(t1) - upper)
    return worst <= 1e-9, f"max overshoot {worst:.3e}"


def check_strong_convexity_certificate():
    oset = _probe_set()
    rng = np.random.default_rng(13)
    worst = -np.inf
    for _ in range(100):
        obj = oset.objectives[rng.integers(3)]
        t1, t2 = rng.normal(size=10) * 3.0, rng.normal(size=10) * 3.0
        lower = (
            obj.loss(t2)
            + float(obj.grad(t2) @ (t1 - t2))
            + obj.mu / 2.0 * float(np.sum((t1 - t2) ** 2))
        )
        worst = max(worst, lower - obj.loss(t1))
    return worst <= 1e-9, f"max undershoot {worst:.3e}"


def check_subset_weight_normalization():
    lam = normalize_subset_weights((1 / 3, 1 / 3, 1 / 3), SubsetSelection((0, 2)))
    ok = np.allclose(lam, [0.5, 0.5], atol=1e-12)
    lam = normalize_subset_weights((0.5, 0.25, 0.25), SubsetSelection((0, 1)))
    ok = ok and np.allclose(lam, [2 / 3, 1 / 3], atol=1e-12)
    lam = normalize_subset_weights((0.2, 0.3, 0.5), SubsetSelection((0, 1, 2)))
    ok = ok and np.array_equal(lam, [0.2, 0.3, 0.5])
    return ok, "fixtures"


def check_convex_combination():
    rng = np.random.default_rng(14)
    ok = True
    for _ in range(50):
        k = int(rng.integers(1, 6))
        vecs = [rng.normal(size=8) for _ in range(k)]
        lam = rng.random(k) + 0.1
        lam /= lam.sum()
        out = convex_combine(vecs, lam)
        stacked = np.stack(vecs)
        ok = ok and np.all(out <= stacked.max(axis=0) + 1e-12)
        ok = ok and np.all(out >= stacked.min(axis=0) - 1e-12)
        ok = ok and np.linalg.norm(out) <= max(np.linalg.norm(v) for v in vecs) + 1e-12
    return ok, "bounds and norm over 50 random draws"


def check_schedule():
    ok = True
    for mu, l_smooth, m in [(1.0, 2.0, 4), (1.0, 1.0, 1), (0.5, 4.0, 16), (2.0, 2.0, 100)]:
        sp = ScheduleParams(mu=mu, l_smooth=l_smooth, merge_frequency=m)
        etas = [lr_schedule(t, sp) for t in range(1, 200)]
        ok = ok and all(a > b for a, b in zip(etas, etas[1:]))
        ok = ok and all(
            etas[t] <= 2.0 * etas[t + m] + 1e-15 for t in range(len(etas) - m)
        )
        ok = ok and etas[0] <= min(1.0 / mu, 1.0 / (4.0 * l_smooth)) + 1e-15
    return ok, "decay, window ratio, initial cap"


def _equiv_config(**overrides):
    base = dict(
        seed=3,
        dim=10,
        num_objectives=3,
        subset_size=3,
        total_steps=200,
        weights=_EQUIV_WEIGHTS,
        mu=1.0,
        l_smooth=8.0,
        spread=1.0,
    )
    base.update(overrides)
    return RunConfig(**base)


def check_morlhf_equivalence():
    cfg = _equiv_config(merge_frequency=1)
    oset = make_quadratic_set(3, 3, 10, 1.0, 8.0, 1.0, weights=_EQUIV_WEIGHTS)
    dev = morlhf_deviation(oset, cfg)
    return dev <= 1e-9, f"max abs deviation {dev:.3e}"


def morlhf_deviation(oset, cfg) -> float:
    """Max-abs difference between merge-every-step iterates and
    scalarized gradient descent iterates."""
    iterative = run_iterative_rs(oset, cfg)
    combined = run_morlhf(oset, cfg)
    dev = 0.0
    for (_, merged), record in zip(iterative.merged_points, combined.records):
        dev = max(dev, float(np.max(np.abs(merged - record.merged))))
    return dev


def check_rewarded_soups_equivalence():
    cfg = _equiv_config(merge_frequency=200)
    oset = make_quadratic_set(3, 3, 10, 1.0, 8.0, 1.0, weights=_EQUIV_WEIGHTS)
    final_iter = run_iterative_rs(oset, cfg).final_merged
    final_soup = run_rewarded_soups(oset, cfg).final_merged
    dev = float(np.max(np.abs(final_iter - final_soup)))
    return dev <= 1e-9, f"max abs deviation {dev:.3e}"


def check_contraction_residual():
    oset = _probe_set(seed=5)
    cfg = RunConfig(
        seed=5,
        merge_frequency=4,
        total_steps=300,
        weights=(1 / 3, 1 / 3, 1 / 3),
        instrument_lemma1=True,
    )
    traj = run_iterative_rs(oset, cfg)
    residuals = [r.lemma1_residual for r in traj.records]
    worst = max(residuals)
    return all(r is not None and r <= 1e-9 for r in residuals), f"max residual {worst:.3e}"


def check_bound_fixture():
    bi = analysis.BoundInputs(
        mu=1.0,
        l_smooth=1.0,
        grad_bound=1.0,
        merge_frequency=1,
        subset_size=2,
        num_objectives=2,
        delta_star=0.5,
        dist_ref_sq=0.0,
    )
    bound = analysis.convergence_bound(bi, 1)
    hetero, drift = analysis.bound_decomposition(bi, 1)
    ok = abs(bound - 0.75) <= 1e-12 and abs(hetero - 0.75) <= 1e-12 and abs(drift) <= 1e-12
    return ok, f"bound {bound!r}"


def check_bound_monotone():
    bi = analysis.BoundInputs(
        mu=1.0,
        l_smooth=8.0,
        grad_bound=3.0,
        merge_frequency=4,
        subset_size=2,
        num_objectives=3,
        delta_star=0.4,
        dist_ref_sq=1.5,
    )
    values = [analysis.convergence_bound(bi, t) for t in range(1, 101)]
    return all(a > b for a, b in zip(values, values[1:])), "strictly decreasing over T=1..100"


def check_delta_star_nonnegative():
    worst = np.inf
    for seed in range(8):
        worst = min(worst, delta_star(make_quadratic_set(seed, 3, 10, 1.0, 8.0, 1.0)))
    return worst >= -1e-12, f"min delta* {worst:.3e}"


def check_pareto():
    points = [(1, 1), (2, 0.5), (0.5, 2), (0.9, 0.9)]
    if sorted(analysis.pareto_front(points)) != [0, 1, 2]:
        return False, "fixture front mismatch"
    rng = np.random.default_rng(15)
    for _ in range(200):
        pts = rng.random((int(rng.integers(1, 65)), int(rng.integers(2, 5))))
        front = set(analysis.pareto_front(pts))
        for i in range(pts.shape[0]):
            dominated = any(
                analysis.dominates(pts[j], pts[i]) for j in range(pts.shape[0]) if j != i
            )
            if dominated == (i in front):
                return False, f"re-scan mismatch at index {i}"
    return True, "fixture plus 200 random re-scans"


def check_icv():
    score = analysis.icv_score([[1.0, 2.0, 3.0]])
    if abs(score - 2.449489742783178) > 1e-5:
        return False, f"fixture score {score!r}"
    rng = np.random.default_rng(16)
    base = rng.random((20, 3)) + 0.5
    ref = analysis.icv_score(base)
    for alpha in (0.5, 2.0, 10.0):
        if abs(analysis.icv_score(alpha * base) - ref) > 1e-10:
            return False, f"not scale invariant at alpha={alpha}"
    return True, "fixture and scale invariance"


def check_sampling_unbiased():
    rng = np.random.default_rng(17)
    n, m_sel, draws = 6, 2, 10_000
    experts = rng.normal(size=(n, 5))
    weights = np.full(n, 1.0 / n)
    psi = experts.T @ weights
    merges = np.empty((draws, 5))
    sampler = np.random.default_rng(18)
    for k in range(draws):
        subset = sample_subset(sampler, n, m_sel)
        lam = normalize_subset_weights(weights, subset)
        merges[k] = convex_combine([experts[i] for i in subset.indices], lam)
    err = np.abs(merges.mean(axis=0) - psi)
    limit = 3.0 * merges.std(axis=0, ddof=1) / np.sqrt(draws)
    return bool(np.all(err <= limit)), f"max |mean-psi| {err.max():.3e} vs limit {limit.min():.3e}"


def check_marginal_frequency():
    rng = np.random.default_rng(19)
    n, m_sel, draws = 6, 2, 60_000
    counts = np.zeros(n)
    for _ in range(draws):
        for i in sample_subset(rng, n, m_sel).indices:
            counts[i] += 1
    p = m_sel / n
    sigma = np.sqrt(p * (1 - p) / draws)
    err = np.abs(counts / draws - p)
    return bool(np.all(err <= 3.0 * sigma)), f"max freq err {err.max():.3e} (3 sigma {3 * sigma:.3e})"


def bound_battery(seeds=range(20), merge_frequencies=(1, 4, 16), total_steps=500, slack=1e-9):
    """Run seeded uniform-weight instances and compare the gap at every
    sync step against the closed-form bound (gradient bound estimated
    post-hoc from the same run). Returns (num_violations, worst_margin).
    """
    violations = 0
    worst = -np.inf
    for seed in seeds:
        oset = make_quadratic_set(seed, 3, 10, 1.0, 8.0, 1.0)
        theta_star = multiobjective_optimum(oset)
        dstar = delta_star(oset)
        for m in merge_frequencies:
            cfg = RunConfig(
                seed=seed,
                merge_frequency=m,
                total_steps=total_steps,
                weights=(1 / 3, 1 / 3, 1 / 3),
            )
            traj = run_iterative_rs(oset, cfg)
            grad_bound = analysis.estimate_gradient_bound(traj, oset)
            bi = analysis.BoundInputs(
                mu=1.0,
                l_smooth=8.0,
                grad_bound=grad_bound,
                merge_frequency=m,
                subset_size=3,
                num_objectives=3,
                delta_star=dstar,
                dist_ref_sq=float(np.sum(theta_star**2)),
            )
            for t, gap in analysis.gap_series(traj, oset):
                margin = gap - analysis.convergence_bound(bi, t)
                worst = max(worst, margin)
                if margin > slack:
                    violations += 1
    return violations, worst


def check_bound_battery():
    violations, worst = bound_battery()
    return violations == 0, f"{violations} violations, worst margin {worst:.3e}"


FAST_CHECKS = [
    ("gradient-finite-difference", check_gradient_oracle),
    ("smoothness-certificate", check_smoothness_certificate),
    ("strong-convexity-certificate", check_strong_convexity_certificate),
    ("subset-weight-normalization", check_subset_weight_normalization),
    ("convex-combination-bounds", check_convex_combination),
    ("schedule-properties", check_schedule),
    ("morlhf-equivalence", check_morlhf_equivalence),
    ("rewarded-soups-equivalence", check_rewarded_soups_equivalence),
    ("contraction-residual", check_contraction_residual),
    ("bound-fixture", check_bound_fixture),
    ("bound-monotone-in-steps", check_bound_monotone),
    ("delta-star-nonnegative", check_delta_star_nonnegative),
    ("pareto-front", check_pareto),
    ("icv-score", check_icv),
]

FULL_CHECKS = FAST_CHECKS + [
    ("subset-sampling-unbiased", check_sampling_unbiased),
    ("subset-marginal-frequency", check_marginal_frequency),
    ("bound-battery", check_bound_battery),
]


def run_checks(level: str = "fast"):
    """Run the battery; returns a list of (name, passed, detail)."""
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    checks = FAST_CHECKS if level == "fast" else FULL_CHECKS
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(passed), detail))
    return results
