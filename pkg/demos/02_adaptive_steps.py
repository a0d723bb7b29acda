"""Adaptive step sizes from accumulated gradient norms.

The adaptive rule eta_t = alpha / (beta + sum_{k<t} ||h_k||^2)^(1/2+eps)
shrinks the step as squared batch-gradient norms accumulate, so it needs no
tuned decay exponent.  Crucially eta_t only looks at draws strictly before t,
which is what keeps the update conditionally unbiased.  Two facts are
illustrated: the recorded steps never increase, and the weighted square sum
sum_t eta_{t+1}^2 ||h_t||^2 obeys the a-priori bound alpha^2/(2 eps beta^2eps)
on every single run, not just on average.
"""

import numpy as np

import rsgd

problem = rsgd.random_sphere_mean(dim=4, n_outcomes=16, seed=25)
x0 = problem.manifold.random_point(np.random.default_rng(100))
plan = rsgd.SegmentPlan(problem.space, rsgd.BatchSizes.constant(4))
rate = rsgd.AdaptiveRate(alpha=0.5, beta=1.0, epsilon=0.25)
horizon = 20_000

cfg = rsgd.RunConfig(oracle=problem, plan=plan, rate=rate, x0=x0,
                     horizon=horizon, seed=0)
runs = rsgd.run_many(cfg, 10)

print(f"eta_0 = {rate.eta0():.3f}, bound on sum eta_(t+1)^2 ||h_t||^2 = "
      f"{rate.square_sum_bound():.3f}")
print()
print(f"{'seed':>4} {'F(x_T)':>10} {'|grad F|':>10} {'eta_T':>10} "
      f"{'sum':>8} {'monotone':>9}")
for tr in runs:
    weighted, _ = rsgd.adaptive_square_sums(tr)
    mono = bool(np.all(np.diff(tr.step) <= 0.0))
    print(f"{tr.seed:>4} {tr.F[-1]:>10.6f} {tr.grad_norm[-1]:>10.2e} "
          f"{tr.step[-1]:>10.2e} {weighted:>8.3f} {str(mono):>9}")

print()
det = rsgd.RunConfig(oracle=problem, plan=plan, rate=rsgd.PowerLawSchedule(0.5, 0.75),
                     x0=x0, horizon=horizon, seed=0)
tr_det = rsgd.run_deterministic(det)
tr_ada = runs[0]
print(f"after {horizon} steps: deterministic rate {tr_det.step[-1]:.2e} vs "
      f"adaptive {tr_ada.step[-1]:.2e}")
print("the adaptive step settles wherever the gradients say, with no exponent to tune")
