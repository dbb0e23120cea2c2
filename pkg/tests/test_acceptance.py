"""End-to-end acceptance battery.

Each test prints one pass/fail line for its criterion and enforces the
stated tolerance. Criteria with runtime budgets time themselves.
"""

import time

import numpy as np
from click.testing import CliRunner

from mergeopt import analysis, cli, verify
from mergeopt.core import RunConfig, convex_combine, normalize_subset_weights
from mergeopt.objectives import (
    delta_star,
    eval_grad,
    finite_diff_grad,
    make_quadratic_set,
)
from mergeopt.optimizers import run_iterative_rs, run_rewarded_soups, sample_subset

EQUIV_WEIGHTS = (0.5, 0.25, 0.25)


def _report(num, name, ok, detail=""):
    print(f"acceptance {num:02d} {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def _equiv_setup(total_steps, merge_frequency):
    oset = make_quadratic_set(3, 3, 10, 1.0, 8.0, 1.0, weights=EQUIV_WEIGHTS)
    cfg = RunConfig(
        seed=3,
        total_steps=total_steps,
        merge_frequency=merge_frequency,
        weights=EQUIV_WEIGHTS,
    )
    return oset, cfg


def test_01_merge_every_step_matches_scalarized_gd():
    start = time.perf_counter()
    oset, cfg = _equiv_setup(total_steps=200, merge_frequency=1)
    dev = verify.morlhf_deviation(oset, cfg)
    elapsed = time.perf_counter() - start
    ok = dev <= 1e-9 and elapsed < 1.0
    _report(1, "merge-every-step equals scalarized GD", ok,
            f"(max abs dev {dev:.3e}, {elapsed:.2f}s)")


def test_02_merge_once_matches_independent_experts():
    start = time.perf_counter()
    oset, cfg = _equiv_setup(total_steps=200, merge_frequency=200)
    final_iter = run_iterative_rs(oset, cfg).final_merged
    final_soup = run_rewarded_soups(oset, cfg).final_merged
    dev = float(np.max(np.abs(final_iter - final_soup)))
    elapsed = time.perf_counter() - start
    ok = dev <= 1e-9 and elapsed < 1.0
    _report(2, "single final merge equals independent experts", ok,
            f"(max abs dev {dev:.3e}, {elapsed:.2f}s)")


def test_03_gap_respects_bound_across_seeds():
    start = time.perf_counter()
    violations, worst = verify.bound_battery(
        seeds=range(20), merge_frequencies=(1, 4, 16), slack=1e-9
    )
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 10.0
    _report(3, "gap never exceeds the closed-form bound", ok,
            f"({violations} violations, worst margin {worst:.3e}, {elapsed:.2f}s)")


def test_04_bound_fixture():
    bi = analysis.BoundInputs(
        mu=1.0, l_smooth=1.0, grad_bound=1.0, merge_frequency=1,
        subset_size=2, num_objectives=2, delta_star=0.5, dist_ref_sq=0.0,
    )
    bound = analysis.convergence_bound(bi, 1)
    hetero, drift = analysis.bound_decomposition(bi, 1)
    ok = (abs(bound - 0.75) <= 1e-12
          and abs(hetero - 0.75) <= 1e-12
          and abs(drift) <= 1e-12)
    _report(4, "bound fixture 0.75 with zero drift term", ok,
            f"(bound {bound!r}, terms {hetero!r} + {drift!r})")


def test_05_convergence_rate_slope():
    start = time.perf_counter()
    checkpoints = [256, 512, 1024, 2048, 4096]
    sums = dict.fromkeys(checkpoints, 0.0)
    for seed in range(10):
        oset = make_quadratic_set(seed, 3, 10, 1.0, 8.0, 1.0)
        cfg = RunConfig(seed=seed, merge_frequency=4, total_steps=4096,
                        weights=(1 / 3, 1 / 3, 1 / 3))
        gaps = dict(analysis.gap_series(run_iterative_rs(oset, cfg), oset))
        for t in checkpoints:
            sums[t] += gaps[t]
    means = [sums[t] / 10.0 for t in checkpoints]
    slope = float(np.polyfit(np.log(checkpoints), np.log(means), 1)[0])
    elapsed = time.perf_counter() - start
    ok = slope <= -0.8 and elapsed < 30.0
    _report(5, "log-log gap slope at least O(1/T)", ok,
            f"(slope {slope:.3f}, {elapsed:.2f}s)")


def test_06_per_step_contraction_residual():
    oset = make_quadratic_set(0, 3, 10, 1.0, 8.0, 1.0)
    cfg = RunConfig(seed=0, merge_frequency=4, total_steps=500,
                    weights=(1 / 3, 1 / 3, 1 / 3), instrument_lemma1=True)
    traj = run_iterative_rs(oset, cfg)
    residuals = [r.lemma1_residual for r in traj.records]
    covered = all(r is not None for r in residuals)
    worst = max(residuals)
    ok = covered and len(residuals) == 500 and worst <= 1e-9
    _report(6, "contraction inequality holds at every step", ok,
            f"(max residual {worst:.3e} over {len(residuals)} steps)")


def test_07_subset_merge_unbiased():
    start = time.perf_counter()
    n, m_sel, draws = 6, 2, 10_000
    rng = np.random.default_rng(42)
    experts = rng.normal(size=(n, 5))
    weights = np.full(n, 1.0 / n)
    psi = experts.T @ weights
    sampler = np.random.default_rng(43)
    merges = np.empty((draws, 5))
    for k in range(draws):
        subset = sample_subset(sampler, n, m_sel)
        lam = normalize_subset_weights(weights, subset)
        merges[k] = convex_combine([experts[i] for i in subset.indices], lam)
    err = np.abs(merges.mean(axis=0) - psi)
    limit = 3.0 * merges.std(axis=0, ddof=1) / np.sqrt(draws)
    elapsed = time.perf_counter() - start
    ok = bool(np.all(err <= limit)) and elapsed < 5.0
    _report(7, "subset merging is unbiased for the full average", ok,
            f"(max err {err.max():.3e} vs limit {limit.min():.3e}, {elapsed:.2f}s)")


def test_08_gradient_oracle():
    worst = 0.0
    for seed in (0, 1, 2):
        oset = make_quadratic_set(seed, 3, 10, 1.0, 8.0, 1.0)
        rng = np.random.default_rng(seed + 100)
        for _ in range(100):
            obj = oset.objectives[rng.integers(3)]
            theta = rng.normal(size=10) * 2.0
            exact = eval_grad(obj, theta)
            approx = finite_diff_grad(obj, theta, h=1e-4)
            rel = np.linalg.norm(exact - approx) / max(np.linalg.norm(approx), 1e-12)
            worst = max(worst, rel)
    ok = worst <= 1e-6
    _report(8, "analytic gradients match central differences", ok,
            f"(max rel err {worst:.3e} over 300 probes)")


def test_09_icv_fixture_and_scale_invariance():
    score = analysis.icv_score([[1.0, 2.0, 3.0]])
    fixture_ok = abs(score - 2.449489742783178) <= 1e-5
    rng = np.random.default_rng(9)
    base = rng.random((20, 3)) + 0.5
    ref = analysis.icv_score(base)
    invariant = all(
        abs(analysis.icv_score(alpha * base) - ref) <= 1e-10
        for alpha in (0.5, 2.0, 10.0)
    )
    ok = fixture_ok and invariant
    _report(9, "inverse-CV fixture and scale invariance", ok,
            f"(fixture {score!r})")


def test_10_pareto_fixture_and_random_rescans():
    points = [(1, 1), (2, 0.5), (0.5, 2), (0.9, 0.9)]
    fixture_ok = sorted(analysis.pareto_front(points)) == [0, 1, 2]
    rng = np.random.default_rng(10)
    mismatches = 0
    for _ in range(1000):
        pts = rng.random((int(rng.integers(1, 65)), int(rng.integers(2, 5))))
        front = set(analysis.pareto_front(pts))
        for i in range(pts.shape[0]):
            dominated = any(
                analysis.dominates(pts[j], pts[i])
                for j in range(pts.shape[0]) if j != i
            )
            if dominated == (i in front):
                mismatches += 1
    ok = fixture_ok and mismatches == 0
    _report(10, "non-dominated front fixture and re-scan agreement", ok,
            f"({mismatches} mismatches over 1000 sets)")


def test_11_merge_frequency_sweep_structure(tmp_path):
    runner = CliRunner()
    out = tmp_path / "sweep"
    result = runner.invoke(cli.main, [
        "sweep", "--axis", "m", "--values", "1,4,16,64,200",
        "--total-steps", "200", "--out", str(out),
    ])
    structural_ok = result.exit_code == 0
    rows = []
    if structural_ok:
        lines = (out / "summary.csv").read_text().strip().splitlines()
        rows = [line.split(",") for line in lines[1:]]
        structural_ok = (
            lines[0] == "value,final_gap,bound_T,A1,A2,wall_ms"
            and [r[0] for r in rows] == ["1", "4", "16", "64", "200"]
        )
    decomposed_ok = structural_ok and all(
        abs(float(r[3]) + float(r[4]) - float(r[2])) <= 1e-12 for r in rows
    )
    ok = structural_ok and decomposed_ok
    _report(11, "frequency sweep rows and bound decomposition", ok,
            f"({len(rows)} rows)")


def test_12_run_replay_is_byte_identical(tmp_path):
    runner = CliRunner()
    flags = ["run", "--seed", "5", "--merge-frequency", "4",
             "--subset-size", "2", "--total-steps", "100"]
    first = runner.invoke(cli.main, flags + ["--out", str(tmp_path / "a")])
    second = runner.invoke(cli.main, flags + ["--out", str(tmp_path / "b")])
    run_ok = first.exit_code == 0 and second.exit_code == 0
    identical = run_ok and (
        (tmp_path / "a" / "trajectory.csv").read_bytes()
        == (tmp_path / "b" / "trajectory.csv").read_bytes()
    )
    _report(12, "replayed run emits byte-identical trajectory", identical)
