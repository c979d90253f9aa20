# Attacking logistic regression on a real two-class dataset
#
# The Wisconsin breast cancer data (569 points, 30 features) is normalised
# and streamed by uniform resampling into an online logistic regression. The
# attacker wants the weight vector to point at a random target direction.
# We look for the "early sacrifice": the planner accepts a higher cost at
# first and wins later.
#
# Needs scikit-learn for the dataset. Run with:
#     python demos/real_data_protocol.py   (about a minute)

import numpy as np
from sklearn.datasets import load_breast_cancer

from poisonctl import CostSpec, DataPoint, VictimSpec
from poisonctl.datastream import DatasetResample, preprocess
from poisonctl.harness import EpisodeConfig, run_suite
from poisonctl.trajopt import TrajOptConfig

X, y = load_breast_cancer(return_X_y=True)
points = preprocess([DataPoint(x, 1 if lab else -1) for x, lab in zip(X, y)], d_target=30)
env = DatasetResample(points)

# theta0 and the target are left unset, so both are drawn from N(0, I) under
# the episode seed and shared by every policy.

victim = VictimSpec("logreg", eta=0.01, d=env.dim)
cost = CostSpec(100.0, "targeted", "cosine")
planner = TrajOptConfig(horizon=80)
configs = [EpisodeConfig(victim, cost, env, policy, T=300, planner=planner, seed=0, pre_attack_n=1000)
           for policy in ("null", "greedy", "nlp", "clairvoyant")]
runs = {s.policy: s.trace for s in run_suite(configs)}

print("         J(50)     J(300)")
for policy, tr in runs.items():
    print(f"{policy:12s} {tr.jtilde[49]:8.1f} {tr.jtilde[-1]:9.1f}")

# Cosine between the final model and the target.

target = runs["null"].target
for policy, tr in runs.items():
    w = tr.thetas[-1]
    print(f"{policy:12s} cos = {w @ target / np.linalg.norm(w) / np.linalg.norm(target):+.3f}")
