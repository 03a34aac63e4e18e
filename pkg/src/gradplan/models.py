"""Action-conditional forward models: (state, action) -> (next state, reward).

All models consume and produce flat float64 state vectors so that the
planner, trainer, and tree search can stay architecture-agnostic. Both
outputs keep gradient paths to the state and the action, which is what
planning by backprop relies on.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .envs.base import ActionSpec
from .envs.spaceship import STATE_LEN as SPACESHIP_STATE_LEN
from .envs.spaceship import V_S
from .nn import MLP, Conv2d, Linear, Module, PReLU


def _check_dims(model, s, a):
    if s.data.ndim != 2 or s.data.shape[1] != model.state_len:
        raise ValueError(
            f"state shape {s.data.shape} does not match (batch, {model.state_len})"
        )
    if a.data.ndim != 2 or a.data.shape[1] != model.action_spec.length:
        raise ValueError(
            f"action shape {a.data.shape} does not match "
            f"(batch, {model.action_spec.length})"
        )


class GridworldForwardModel(Module):
    """Conv encoder + action embedding + conv decoder, with a conv/dense
    reward head squashed by tanh (rewards live in [-1, 1])."""

    feature_maps = 16
    hidden = 16

    def __init__(self, size, rng):
        self.size = size
        self.arch_name = f"gridworld{size}-forward"
        self.action_spec = ActionSpec(4, 0)
        self.state_len = 3 * size * size
        f = self.feature_maps
        self.enc1 = Conv2d(3, f, 3, rng)
        self.enc2 = Conv2d(f, f, 3, rng)
        self.action_embed = Linear(4, f, rng)
        self.dec1 = Conv2d(f, f, 3, rng)
        self.dec2 = Conv2d(f, 3, 3, rng)
        self.rew_conv = Conv2d(f, f, 3, rng)
        self.rew_fc1 = Linear(f * size * size, self.hidden, rng)
        self.rew_fc2 = Linear(self.hidden, 1, rng)

    def predict(self, s, a):
        _check_dims(self, s, a)
        b = s.data.shape[0]
        n, f = self.size, self.feature_maps
        img = ad.reshape(s, (b, 3, n, n))
        h = ad.relu(self.enc1(img))
        h = ad.relu(self.enc2(h))
        emb = ad.reshape(self.action_embed(a), (b, f, 1, 1))
        h = ad.add(h, emb)
        d = ad.relu(self.dec1(h))
        next_img = self.dec2(d)
        rh = ad.relu(self.rew_conv(h))
        rh = ad.relu(self.rew_fc1(ad.reshape(rh, (b, f * n * n))))
        reward = ad.tanh(self.rew_fc2(rh))
        return ad.reshape(next_img, (b, self.state_len)), reward


def spaceship_state_scale():
    """Per-component normalization: positions and radii by the arena side,
    velocities by a fixed 10."""
    scale = np.full(SPACESHIP_STATE_LEN, 100.0)
    scale[V_S] = 10.0
    return scale


class SpaceshipForwardModel(Module):
    """MLP encoder/predictor/reward trio with a linear action encoder added
    to the state encoding. States are normalized inside the graph and
    predictions denormalized, so callers only ever see raw coordinates."""

    arch_name = "spaceship-forward"

    def __init__(self, rng, hidden=512):
        self.action_spec = ActionSpec(4, 2)
        self.state_len = SPACESHIP_STATE_LEN
        self.hidden = hidden
        scale = spaceship_state_scale()
        self._inv_scale = ad.Tensor(1.0 / scale, requires_grad=False)
        self._scale = ad.Tensor(scale, requires_grad=False)
        self.encoder = MLP([self.state_len, hidden, hidden], rng, activation="prelu")
        self.enc_act = PReLU()
        self.action_enc = Linear(self.action_spec.length, hidden, rng)
        self.state_head = MLP([hidden, hidden, self.state_len], rng, activation="prelu")
        self.reward_head = MLP([hidden, hidden, 1], rng, activation="prelu")

    def predict(self, s, a):
        _check_dims(self, s, a)
        s_norm = ad.mul(s, self._inv_scale)
        h = ad.add(self.enc_act(self.encoder(s_norm)), self.action_enc(a))
        next_norm = self.state_head(h)
        reward = self.reward_head(h)
        return ad.mul(next_norm, self._scale), reward


class ToyRewardModel(Module):
    """Reward-only model for the one-step MDP; next state is the input."""

    arch_name = "toy-reward"

    def __init__(self, rng, hidden=100):
        self.action_spec = ActionSpec(0, 1)
        self.state_len = 1
        self.net = MLP([2, hidden, 1], rng, activation="relu")

    def predict(self, s, a):
        _check_dims(self, s, a)
        return s, self.net(ad.concat([s, a], axis=-1))


def build_forward_model(env_name, rng, **kwargs):
    if env_name == "gridworld8":
        return GridworldForwardModel(8, rng)
    if env_name == "gridworld16":
        return GridworldForwardModel(16, rng)
    if env_name == "spaceship":
        return SpaceshipForwardModel(rng, **kwargs)
    if env_name == "toy":
        return ToyRewardModel(rng, **kwargs)
    raise ValueError(f"no forward model registered for {env_name!r}")


def predict_np(model, state, action):
    """Graph-free single-step prediction; returns (next_state, reward)."""
    with model.frozen():
        s = ad.Tensor(np.asarray(state).reshape(1, -1), requires_grad=False)
        a = ad.Tensor(np.asarray(action).reshape(1, -1), requires_grad=False)
        s2, r = model.predict(s, a)
    return s2.data[0].copy(), float(r.data[0, 0])


def unroll(model, s0, actions):
    """Chain predictions from s0 through a list of action tensors.

    Only s0 is ground truth; each later step consumes the previous
    prediction, so gradients flow from any reward back to every action.
    """
    states, rewards = [], []
    s = s0
    for a in actions:
        s, r = model.predict(s, a)
        states.append(s)
        rewards.append(r)
    return states, rewards


def write_model_manifest(path, env_name, action_spec, dataset_seed, train_config,
                         extra=None):
    """Companion manifest for a checkpoint: what it models and how it was trained."""
    lines = [
        f"env={env_name}",
        f"discrete_dim={action_spec.discrete_dim}",
        f"continuous_dim={action_spec.continuous_dim}",
        f"dataset_seed={dataset_seed}",
    ]
    if env_name == "spaceship":
        scale = spaceship_state_scale()
        lines.append("state_scale=" + ",".join(f"{v:g}" for v in scale))
    for key, value in sorted(vars(train_config).items()):
        lines.append(f"train.{key}={value}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                key, value = line.split("=", 1)
                out[key] = value
    return out
