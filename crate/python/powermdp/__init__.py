"""Python interface to the powermdp Rust library."""

from ._powermdp import (
    Estimate,
    Mdp,
    SizeCapError,
    bandit_train_prob,
    decision_prob,
    gridworld,
    gridworld_experiment,
    optimality_probability,
    power,
    proportional_regret,
    solve_delayed_geometric,
)

__all__ = [
    "Estimate",
    "Mdp",
    "SizeCapError",
    "bandit_train_prob",
    "decision_prob",
    "gridworld",
    "gridworld_experiment",
    "optimality_probability",
    "power",
    "proportional_regret",
    "solve_delayed_geometric",
]
