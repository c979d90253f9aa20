# How much does planning on the wrong model cost?
#
# The attacker plans on an empirical estimate of the data distribution. Two
# results say this is safe. First, if the planning model's transitions are
# within eps (in L1) of the truth, the value lost is at most
# gamma * C_max * eps / (1 - gamma)^2. Second, n samples over N outcomes give
# an empirical distribution within a known L1 radius with probability 1 - delta.
# Both are checked numerically on small tabular problems.

import numpy as np

from poisonctl.theory import (
    attack_structured_pair,
    l1_concentration_radius,
    optimality_gap,
    simulation_bound,
    verify_prop1,
    verify_thm2,
)

# One attack-shaped MDP: the model state moves deterministically with the
# action, the incoming point is i.i.d. from P (truth) or P_hat (estimate).

true_mdp, model_mdp, eps = attack_structured_pair(3, 3, 4, gamma=0.9, rng=0)
gap = optimality_gap(true_mdp, model_mdp)
print(f"eps = {eps:.3f}, value lost = {gap:.4f}, bound = {simulation_bound(0.9, 1.0, eps):.3f}")

# The bound is loose but never violated.

rep = verify_prop1(trials=200, rng=1)
print(f"{rep.violations} violations in 200 pairs, worst gap/bound {rep.max_ratio:.3f}")

# The concentration radius shrinks like 1/sqrt(n).

for n in (100, 1000, 10_000):
    rep = verify_thm2(2, n, 0.05, trials=5000, rng=n)
    print(f"n={n:6d} radius {l1_concentration_radius(2, n, 0.05):.4f} "
          f"coverage {rep.coverage:.4f} median L1 {np.median(rep.l1):.4f}")
