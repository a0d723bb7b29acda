"""What the convergence analysis actually uses, measured on real runs.

Four quantities carry the analysis, and all of them are observable:

1. a curvature-like constant c1 bounding how fast the pulled-back gradient
   moves away from the gradient at the base point (sampled supremum);
2. the per-step descent inequality that c1 implies;
3. the noise martingale z_t = sum gamma_k <grad F, h_k - grad F>, whose
   variance is bounded by 4 A^4 sum gamma_t^2;
4. the finite-difference consistency of the gradient oracle itself.
"""

import numpy as np

import rsgd

problem = rsgd.random_sphere_mean(dim=4, n_outcomes=16, seed=25)
x0 = problem.manifold.random_point(np.random.default_rng(100))
schedule = rsgd.PowerLawSchedule(0.5, 0.75)
bound_a = problem.gradient_bound()

fd = rsgd.finite_difference_gradient_check(problem, n_points=200, seed=1)
print(f"gradient oracle vs central differences: pass={fd.passed}, "
      f"worst relative error {fd.worst:.2e}")

est = rsgd.estimate_lipschitz(problem, radius=bound_a, n_samples=10_000, seed=12)
print(f"sampled constants on {est.region}, radius {est.radius:g}: "
      f"c1 = {est.c1:.4f}, c2 = {est.c2:.4f}")

plan = rsgd.SegmentPlan(problem.space, rsgd.BatchSizes.constant(4))
cfg = rsgd.RunConfig(oracle=problem, plan=plan, rate=schedule, x0=x0,
                     horizon=1000, seed=0)
tr = rsgd.run_deterministic(cfg)
descent = rsgd.check_descent_inequality(tr, est.c1, margin=1.2)
print(f"descent inequality over {tr.horizon} steps: pass={descent.passed}, "
      f"worst excess {descent.worst:.2e}")

sq = rsgd.check_gradient_square_difference(tr, bound_a, est.c1, est.c2, margin=1.5)
print(f"gradient-square increments bounded: pass={sq.passed}, "
      f"worst excess {sq.worst:.2e}")

print()
single = rsgd.SegmentPlan(problem.space, rsgd.BatchSizes.constant(1))
cfg1 = rsgd.RunConfig(oracle=problem, plan=single, rate=schedule, x0=x0,
                      horizon=20_000, seed=0)
traces = [rsgd.track_martingale(t) for t in rsgd.run_many(cfg1, 100)]
summary = rsgd.martingale_summary(traces, bound_a, rsgd.sum_of_squares(schedule))
print(f"noise martingale over {summary['n_seeds']} single-sample runs:")
print(f"  mean z_T  = {summary['mean_z']:+.3e} (3 stderr = {3 * summary['stderr_z']:.3e})")
print(f"  var z_T   = {summary['var_z']:.3e} (bound 4 A^4 sigma = {summary['var_bound']:.3e})")
print(f"  |u_t| max = {summary['max_abs_u']:.3f} (bound 2 A^2 = {summary['u_bound']:.1f}), "
      f"violations: {summary['u_violations']}")

print()
runs = rsgd.run_many(rsgd.RunConfig(oracle=problem, plan=plan, rate=schedule,
                                    x0=x0, horizon=20_000, seed=0), 20)
metrics = rsgd.convergence_metrics(runs, threshold=1e-2)
print(f"convergence over {metrics['n_seeds']} seeds at threshold {metrics['threshold']:g}:")
print(f"  final grad norm below: {metrics['fraction_final_below']:.0%}, "
      f"running min below: {metrics['fraction_min_below']:.0%}")
print(f"  mean-square final grad: {metrics['mean_square_final']:.2e}")
print(f"  weighted sums flattened: last-decade increment / total = "
      f"{max(metrics['last_decade_increments']) / max(metrics['weighted_grad_square_sums']):.3f}")
