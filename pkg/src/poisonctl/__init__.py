"""Online data-poisoning attacks as stochastic optimal control."""

from .core import ControlState, DataPoint, RngStream, discounted_cumulative_cost, rng_fork
from .victims import VictimSpec, logreg_update, soft_kmeans_update, softmax, victim_update, victim_vjp
from .costs import CostSpec, cosine, nefarious_cost, running_cost, running_cost_gradient
from .datastream import (
    DatasetResample,
    EmpiricalBuffer,
    GaussianMixture1D,
    env_sample,
    load_csv,
    pca_apply,
    pca_fit,
    preprocess,
    zscore_fit_apply,
)
from .trajopt import TrajOptConfig, TrajOptResult, optimize_trajectory, rollout_gradient, rollout_objective
from .attackers import act_clairvoyant_precompute, act_greedy, act_nlp_mpc, act_null
from .harness import EpisodeConfig, EpisodeTrace, run_episode, run_suite

__version__ = "0.1.0"
