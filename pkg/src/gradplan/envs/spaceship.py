"""Spaceship piloting with mixed discrete/continuous actions.

The ship flies in a square arena under the gravity of one planet, updated
by explicit Euler steps. Actions are [signal one-hot(4); thrust 2D] where
signal 0 means silence and 1..3 are the waypoint colors. Touching a
waypoint while emitting its color pays +1 per step; wrong color -1;
signalling away from any waypoint -0.1; planet contact adds -1. Episodes
run a fixed 80 steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import STEP_COUNTER, ActionSpec

STATE_LEN = 17  # [x_s(2), v_s(2), r_s, (x_w(2), r_w) x3, x_p(2), r_p]

X_S = slice(0, 2)
V_S = slice(2, 4)
R_S = 4
WAYPOINTS = (slice(5, 7), slice(8, 10), slice(11, 13))
WP_RADII = (7, 10, 13)
X_P = slice(14, 16)
R_P = 16


@dataclass(frozen=True)
class PhysicsConstants:
    gravity: float = 0.015
    ship_mass: float = 1.0
    planet_mass_per_radius: float = 20.0
    damping: float = 0.1
    dt: float = 4.0
    arena: float = 100.0
    ship_radius: float = 1.0
    waypoint_radius: float = 3.0
    planet_radius_min: float = 4.0
    planet_radius_max: float = 8.0
    thrust_limit: float = 2.0
    episode_len: int = 80


def gravity_force(state, consts=PhysicsConstants()):
    """Planet pull on the ship; the paper's unnormalized-direction form."""
    delta = state[X_P] - state[X_S]
    dist = float(np.sqrt((delta**2).sum()))
    # guard the singularity: bodies can never legitimately be this close
    dist = max(dist, (state[R_P] + state[R_S]) / 2.0)
    m_p = consts.planet_mass_per_radius * state[R_P]
    return consts.gravity * m_p * consts.ship_mass / dist**2 * delta


def physics_step(state, thrust, consts=PhysicsConstants()):
    """One Euler step: position advances on the pre-update velocity."""
    state = np.asarray(state, dtype=np.float64).copy()
    force = gravity_force(state, consts)
    accel = (force - consts.damping * state[V_S] + np.asarray(thrust)) / consts.ship_mass
    state[X_S] = state[X_S] + consts.dt * state[V_S]
    state[V_S] = state[V_S] + consts.dt * accel
    return state


def clamp_to_arena(state, consts=PhysicsConstants()):
    state = state.copy()
    for axis in range(2):
        i = X_S.start + axis
        if state[i] < 0.0:
            state[i] = 0.0
            state[V_S.start + axis] = 0.0
        elif state[i] > consts.arena:
            state[i] = consts.arena
            state[V_S.start + axis] = 0.0
    return state


def _touching(pos_a, r_a, pos_b, r_b):
    return float(np.sqrt(((pos_a - pos_b) ** 2).sum())) < r_a + r_b


def signal_reward(state, signal):
    """Reward from the signalling rules; at most one waypoint counts.

    If the ship overlaps several waypoints only the nearest one is scored,
    keeping the per-step reward within [-1, +1] before planet contact.
    """
    ship, r_s = state[X_S], state[R_S]
    touched, best_dist = 0, None
    for i, (wp, ri) in enumerate(zip(WAYPOINTS, WP_RADII), start=1):
        if _touching(ship, r_s, state[wp], state[ri]):
            dist = float(np.sqrt(((ship - state[wp]) ** 2).sum()))
            if best_dist is None or dist < best_dist:
                touched, best_dist = i, dist
    if touched:
        if signal == touched:
            return 1.0
        if signal != 0:
            return -1.0
        return 0.0
    return -0.1 if signal != 0 else 0.0


class SpaceshipEnv:
    name = "spaceship"
    action_spec = ActionSpec(4, 2)
    state_len = STATE_LEN

    def __init__(self, consts=PhysicsConstants(), thrust_std=0.5):
        self.consts = consts
        self.thrust_std = thrust_std
        self._state = None
        self._t = 0
        self._done = True

    def reset(self, rng):
        c = self.consts
        radii = [c.ship_radius, c.waypoint_radius, c.waypoint_radius, c.waypoint_radius,
                 rng.uniform(c.planet_radius_min, c.planet_radius_max)]
        positions = []
        while len(positions) < 5:
            cand = rng.uniform(0.0, c.arena, size=2)
            ri = radii[len(positions)]
            if all(
                np.sqrt(((cand - p) ** 2).sum()) >= ri + rj
                for p, rj in zip(positions, radii)
            ):
                positions.append(cand)
        state = np.zeros(STATE_LEN)
        state[X_S] = positions[0]
        state[R_S] = radii[0]
        for wp, ridx, pos in zip(WAYPOINTS, WP_RADII, positions[1:4]):
            state[wp] = pos
            state[ridx] = c.waypoint_radius
        state[X_P] = positions[4]
        state[R_P] = radii[4]
        self._state = state
        self._t = 0
        self._done = False
        return state.copy()

    def random_action(self, rng):
        a = np.zeros(6)
        a[rng.integers(4)] = 1.0
        a[4:] = rng.normal(0.0, self.thrust_std, size=2)
        return a

    def step(self, action):
        if self._done:
            raise RuntimeError("step after episode end")
        action = self.action_spec.validate(action)
        STEP_COUNTER.total += 1
        c = self.consts
        signal = int(action[:4].argmax())
        thrust = np.clip(action[4:6], -c.thrust_limit, c.thrust_limit)
        state = physics_step(self._state, thrust, c)
        state = clamp_to_arena(state, c)
        reward = signal_reward(state, signal)
        if _touching(state[X_S], state[R_S], state[X_P], state[R_P]):
            reward -= 1.0
        self._state = state
        self._t += 1
        self._done = self._t >= c.episode_len
        return state.copy(), reward, self._done
