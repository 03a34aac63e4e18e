"""Common environment contract, episode storage, and random-policy collection.

Environments expose reset/step over flat float64 state vectors and declare
their action layout through an ActionSpec (one-hot discrete slots first,
then continuous slots). Real environment interactions are the scarce
resource being accounted, so every step() bumps a global counter that
model rollouts never touch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"GRADPLAN-EPDS v1\n"


class _StepCounter:
    def __init__(self):
        self.total = 0


#: counts real environment steps across all env instances
STEP_COUNTER = _StepCounter()


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class ActionSpec:
    """Action layout: discrete_dim one-hot slots followed by continuous_dim reals."""

    discrete_dim: int
    continuous_dim: int

    def __post_init__(self):
        if self.discrete_dim < 0 or self.continuous_dim < 0:
            raise ValueError("action dims must be non-negative")
        if self.discrete_dim + self.continuous_dim < 1:
            raise ValueError("action must have at least one slot")

    @property
    def length(self):
        return self.discrete_dim + self.continuous_dim

    def validate(self, action):
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.length,):
            raise ValueError(
                f"action length {action.shape} does not match spec ({self.length},)"
            )
        d = self.discrete_dim
        if d > 0:
            disc = action[:d]
            if not (np.isin(disc, (0.0, 1.0)).all() and disc.sum() == 1.0):
                raise ValueError(f"discrete sub-vector {disc} is not one-hot")
        if self.continuous_dim > 0 and not np.isfinite(action[d:]).all():
            raise ValueError("continuous action components must be finite")
        return action


@dataclass
class Episode:
    """(state, action, reward) sequence; states has one more row than actions."""

    states: np.ndarray   # (L+1, state_len)
    actions: np.ndarray  # (L, action_len)
    rewards: np.ndarray  # (L,)
    dones: np.ndarray    # (L,) bool, True only on a terminal transition

    def __len__(self):
        return len(self.actions)

    def transitions(self):
        for t in range(len(self.actions)):
            yield (
                self.states[t],
                self.actions[t],
                float(self.rewards[t]),
                self.states[t + 1],
                bool(self.dones[t]),
            )


@dataclass
class EpisodeDataset:
    env_name: str
    action_spec: ActionSpec
    state_len: int
    seed: int
    episodes: list = field(default_factory=list)

    @property
    def n_transitions(self):
        return sum(len(ep) for ep in self.episodes)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(f"env={self.env_name}\n".encode())
            fh.write(f"discrete_dim={self.action_spec.discrete_dim}\n".encode())
            fh.write(f"continuous_dim={self.action_spec.continuous_dim}\n".encode())
            fh.write(f"state_len={self.state_len}\n".encode())
            fh.write(f"episodes={len(self.episodes)}\n".encode())
            fh.write(f"seed={self.seed}\n".encode())
            fh.write(b"end\n")
            for ep in self.episodes:
                fh.write(struct.pack("<I", len(ep)))
                for s, a, r, s2, done in ep.transitions():
                    fh.write(np.ascontiguousarray(s, dtype="<f8").tobytes())
                    fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
                    fh.write(struct.pack("<d", r))
                    fh.write(np.ascontiguousarray(s2, dtype="<f8").tobytes())
                    fh.write(struct.pack("<B", int(done)))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            blob = fh.read()
        if not blob.startswith(MAGIC):
            raise DatasetError(f"{path}: not an episode dataset (bad magic)")
        header_end = blob.find(b"\nend\n")
        if header_end < 0:
            raise DatasetError(f"{path}: truncated header")
        fields = dict(
            line.split("=", 1) for line in blob[len(MAGIC):header_end].decode().splitlines()
        )
        spec = ActionSpec(int(fields["discrete_dim"]), int(fields["continuous_dim"]))
        state_len = int(fields["state_len"])
        n_episodes = int(fields["episodes"])
        ds = cls(fields["env"], spec, state_len, int(fields["seed"]))
        off = header_end + len(b"\nend\n")
        alen = spec.length
        row = state_len * 8 + alen * 8 + 8 + state_len * 8 + 1
        for _ in range(n_episodes):
            (length,) = struct.unpack_from("<I", blob, off)
            off += 4
            states = np.empty((length + 1, state_len))
            actions = np.empty((length, alen))
            rewards = np.empty(length)
            dones = np.zeros(length, dtype=bool)
            for t in range(length):
                base = off + t * row
                states[t] = np.frombuffer(blob, "<f8", state_len, base)
                actions[t] = np.frombuffer(blob, "<f8", alen, base + state_len * 8)
                rewards[t] = struct.unpack_from("<d", blob, base + (state_len + alen) * 8)[0]
                states[t + 1] = np.frombuffer(
                    blob, "<f8", state_len, base + (state_len + alen + 1) * 8
                )
                dones[t] = bool(blob[base + row - 1])
            off += length * row
            ds.episodes.append(Episode(states, actions, rewards, dones))
        if off != len(blob):
            raise DatasetError(f"{path}: {len(blob) - off} trailing bytes")
        return ds


def collect_random_episodes(env, n_episodes, seed):
    """Roll the environment's random policy and record every transition."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ds = EpisodeDataset(env.name, env.action_spec, env.state_len, seed)
    for _ in range(n_episodes):
        state = env.reset(rng)
        states, actions, rewards, dones = [state], [], [], []
        done = False
        while not done:
            action = env.random_action(rng)
            state, reward, done = env.step(action)
            states.append(state)
            actions.append(action)
            rewards.append(reward)
            dones.append(done)
        ds.episodes.append(
            Episode(
                np.asarray(states),
                np.asarray(actions),
                np.asarray(rewards),
                np.asarray(dones, dtype=bool),
            )
        )
    return ds
