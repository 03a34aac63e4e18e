"""One-step MDP with reward +-s^3 depending on a binary action.

The optimal action is a=+1 for positive states and a=-1 for negative
ones; the two become equivalent as s approaches 0. Used to demonstrate
how input noise during reward-model training smooths the surface that
gradient-based action optimization descends.
"""

from __future__ import annotations

import numpy as np

from .base import STEP_COUNTER, ActionSpec


def toy_reward(s: float, a: float) -> float:
    if not -2.0 <= s <= 2.0:
        raise ValueError(f"state {s} outside [-2, 2]")
    if a == 1.0:
        return s**3
    if a == -1.0:
        return -(s**3)
    raise ValueError(f"action {a} must be -1 or +1")


def sample_toy_batch(n, rng):
    """(states, actions, rewards) with s ~ U[-2,2] and a = +-1 equiprobable."""
    s = rng.uniform(-2.0, 2.0, size=n)
    a = rng.choice([-1.0, 1.0], size=n)
    r = np.where(a > 0, s**3, -(s**3))
    return s, a, r


class ToyEnv:
    name = "toy"
    action_spec = ActionSpec(0, 1)
    state_len = 1

    def __init__(self):
        self._state = None
        self._done = True

    def reset(self, rng):
        self._state = np.array([rng.uniform(-2.0, 2.0)])
        self._done = False
        return self._state.copy()

    def random_action(self, rng):
        return np.array([rng.choice([-1.0, 1.0])])

    def step(self, action):
        if self._done:
            raise RuntimeError("step after episode end")
        action = self.action_spec.validate(action)
        reward = toy_reward(float(self._state[0]), float(action[0]))
        self._done = True
        STEP_COUNTER.total += 1
        return self._state.copy(), reward, True
