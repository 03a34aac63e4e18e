"""Gridworld navigation: procedural maps, step dynamics, state encoding.

States are 3-channel binary images (obstacles, goal, agent) flattened to
vectors at the environment boundary. Moving onto the goal pays +1 and ends
the episode; moving into an obstacle or off the grid pays -1 and ends it;
every other move costs -0.01. A step cap keeps random walks finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import STEP_COUNTER, ActionSpec

#: action index -> (row delta, col delta)
MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1))  # north, south, east, west
ACTION_NAMES = ("north", "south", "east", "west")

DEFAULT_STEP_CAPS = {8: 30, 16: 50}


class MapGenerationError(Exception):
    pass


@dataclass
class GridMap:
    size: int
    obstacles: np.ndarray  # (n, n) bool
    goal: tuple
    agent: tuple

    def copy(self):
        return GridMap(self.size, self.obstacles.copy(), self.goal, self.agent)


def _reachable(obstacles, start, target):
    n = obstacles.shape[0]
    seen = np.zeros_like(obstacles)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = []
        for r, c in frontier:
            if (r, c) == target:
                return True
            for dr, dc in MOVES:
                rr, cc = r + dr, c + dc
                if 0 <= rr < n and 0 <= cc < n and not obstacles[rr, cc] and not seen[rr, cc]:
                    seen[rr, cc] = True
                    nxt.append((rr, cc))
        frontier = nxt
    return False


def generate_map(size, obstacle_density, rng, max_retries=1000):
    """Sample i.i.d. obstacles and agent/goal cells until the goal is reachable."""
    if not 0.0 <= obstacle_density <= 0.5:
        raise ValueError(f"obstacle density {obstacle_density} outside [0, 0.5]")
    for _ in range(max_retries):
        obstacles = rng.random((size, size)) < obstacle_density
        free = np.argwhere(~obstacles)
        if len(free) < 2:
            continue
        idx = rng.choice(len(free), size=2, replace=False)
        agent = tuple(free[idx[0]])
        goal = tuple(free[idx[1]])
        if _reachable(obstacles, agent, goal):
            return GridMap(size, obstacles, goal, agent)
    raise MapGenerationError(
        f"no valid {size}x{size} map at density {obstacle_density} "
        f"after {max_retries} retries"
    )


def encode_grid_state(grid: GridMap) -> np.ndarray:
    """3-channel image: obstacles, goal, agent."""
    out = np.zeros((3, grid.size, grid.size))
    out[0][grid.obstacles] = 1.0
    out[1][grid.goal] = 1.0
    out[2][grid.agent] = 1.0
    return out


def decode_grid_state(state: np.ndarray) -> GridMap:
    state = np.asarray(state)
    if state.ndim == 1:
        n = int(round((state.size / 3) ** 0.5))
        state = state.reshape(3, n, n)
    n = state.shape[1]
    goal = np.unravel_index(int(state[1].argmax()), (n, n))
    agent = np.unravel_index(int(state[2].argmax()), (n, n))
    return GridMap(n, state[0] > 0.5, tuple(goal), tuple(agent))


class GridworldEnv:
    action_spec = ActionSpec(4, 0)

    def __init__(self, size=8, obstacle_density=0.3, step_cap=None):
        self.size = size
        self.obstacle_density = obstacle_density
        self.step_cap = step_cap if step_cap is not None else DEFAULT_STEP_CAPS.get(size, 4 * size)
        self.grid = None
        self._steps = 0
        self._done = True

    @property
    def name(self):
        return f"gridworld{self.size}"

    @property
    def state_len(self):
        return 3 * self.size * self.size

    def reset(self, rng):
        self.grid = generate_map(self.size, self.obstacle_density, rng)
        self._steps = 0
        self._done = False
        return encode_grid_state(self.grid).reshape(-1)

    def random_action(self, rng):
        a = np.zeros(4)
        a[rng.integers(4)] = 1.0
        return a

    def step(self, action):
        if self._done:
            raise RuntimeError("step after episode end")
        action = self.action_spec.validate(action)
        STEP_COUNTER.total += 1
        self._steps += 1
        move = MOVES[int(action.argmax())]
        r, c = self.grid.agent[0] + move[0], self.grid.agent[1] + move[1]
        n = self.size
        if not (0 <= r < n and 0 <= c < n) or self.grid.obstacles[r, c]:
            # off-grid counts as an obstacle hit; agent stays put
            reward, self._done = -1.0, True
        elif (r, c) == self.grid.goal:
            self.grid.agent = (r, c)
            reward, self._done = 1.0, True
        else:
            self.grid.agent = (r, c)
            reward = -0.01
            self._done = self._steps >= self.step_cap
        return encode_grid_state(self.grid).reshape(-1), reward, self._done


class ExactGridworldModel:
    """Hand-coded forward model over encoded gridworld states.

    Mirrors the environment dynamics but, like any stateless model, has no
    episode bookkeeping: a state whose agent sits on the goal is absorbing
    with zero reward, and collisions leave the agent in place (the -1 can
    repeat if a rollout keeps pushing into the wall).
    """

    def __init__(self, size):
        self.size = size
        self.action_spec = ActionSpec(4, 0)

    def step_np(self, state, action):
        n = self.size
        s = np.asarray(state).reshape(3, n, n)
        agent = np.unravel_index(int(s[2].argmax()), (n, n))
        goal = np.unravel_index(int(s[1].argmax()), (n, n))
        if agent == goal:
            return state.copy(), 0.0
        move = MOVES[int(np.asarray(action).argmax())]
        r, c = agent[0] + move[0], agent[1] + move[1]
        if not (0 <= r < n and 0 <= c < n) or s[0, r, c] > 0.5:
            return state.copy(), -1.0
        out = s.copy()
        out[2][agent] = 0.0
        out[2][r, c] = 1.0
        reward = 1.0 if (r, c) == goal else -0.01
        return out.reshape(state.shape), reward
