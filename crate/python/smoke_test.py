"""Quick end-to-end check of the compiled extension.

Build first:
    cargo build -p powermdp-py --release
    cp target/release/lib_powermdp.so python/powermdp/_powermdp.so
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import powermdp as pm


def main():
    mdp = pm.Mdp.bundled("case_study")
    assert "r_se" in mdp.state_names
    est = pm.power(mdp, "r_se", 0.5, samples=20_000, seed=1)
    assert abs(est.estimate - 2 / 3) < 0.02, est
    print("power(r_se) =", est)

    ic = pm.Mdp.bundled("power_not_ic")
    exact = pm.power(ic, "s2", 1.0)
    assert exact.exact and exact.estimate == 0.75

    sharp = pm.Mdp.bundled("sharp_bound")
    right = sharp.action_names.index("right")
    pregret, *_ = pm.proportional_regret(sharp, "s1", [0.0, 0.5, 1.0], [right] * 3, 0.5, switch_at=1)
    assert math.isclose(pregret, 0.75, abs_tol=1e-12), pregret

    cards = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    p = pm.decision_prob("argmax", [0, 1], cards, [2], [0, 1], [1.0, 0.0, 0.5])
    assert p == 1.0

    arms = pm.bandit_train_prob([5, 4, 3, 2, 1], samples=2000)
    assert arms[0].estimate > 0.85

    grid, at_goal, side_effect = pm.gridworld("options")
    assert grid.n_actions == 5 and any(at_goal) and any(side_effect)

    try:
        pm.Mdp.bundled("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown MDP accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
