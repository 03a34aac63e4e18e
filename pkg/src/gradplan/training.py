"""Forward-model training on unrolled prediction windows with noisy actions.

Windows of unroll_len consecutive transitions are sampled from episodes;
only the first state of a window is ground truth, later steps consume the
model's own predictions. Gaussian noise is added to the action inputs
(discrete slots by default) during training only -- this is what shapes
the loss surface so that one-hot vertices become attractors under
gradient-based action optimization.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .models import unroll
from .optim import Adam


@dataclass
class TrainConfig:
    unroll_len: int = 10
    noise_std: float = 0.25          # discrete action slots
    noise_std_continuous: float = 0.0
    lr: float = 0.001
    batch_size: int = 64
    epochs: int = 20
    batches_per_epoch: int = 0       # 0 = use every window once per epoch

    def __post_init__(self):
        if self.unroll_len < 1:
            raise ValueError("unroll_len must be at least 1")
        if self.noise_std < 0 or self.noise_std_continuous < 0:
            raise ValueError("noise stds must be non-negative")


def inject_action_noise(actions, spec, noise_std, noise_std_continuous, rng):
    """Add i.i.d. Gaussian noise per slot group; no clamping afterwards."""
    noisy = np.array(actions, dtype=np.float64)
    d = spec.discrete_dim
    if noise_std > 0 and d > 0:
        noisy[..., :d] += rng.normal(0.0, noise_std, size=noisy[..., :d].shape)
    if noise_std_continuous > 0 and spec.continuous_dim > 0:
        noisy[..., d:] += rng.normal(0.0, noise_std_continuous, size=noisy[..., d:].shape)
    return noisy


def window_index(dataset, unroll_len):
    """(episode, start) pairs for every full-length window; short episodes
    contribute nothing."""
    out = []
    for i, ep in enumerate(dataset.episodes):
        for t in range(len(ep) - unroll_len + 1):
            out.append((i, t))
    return out


def _gather_batch(dataset, windows, unroll_len):
    """Stack windows into (s0, actions[T], target_states[T], target_rewards[T])."""
    eps = dataset.episodes
    s0 = np.stack([eps[i].states[t] for i, t in windows])
    actions, states, rewards = [], [], []
    for k in range(unroll_len):
        actions.append(np.stack([eps[i].actions[t + k] for i, t in windows]))
        states.append(np.stack([eps[i].states[t + k + 1] for i, t in windows]))
        rewards.append(
            np.array([eps[i].rewards[t + k] for i, t in windows]).reshape(-1, 1)
        )
    return s0, actions, states, rewards


def window_loss(model, s0, noisy_actions, target_states, target_rewards):
    """Mean over the window of per-step state MSE + reward MSE.

    Returns (loss tensor, predicted state tensors) so callers can inspect
    that steps beyond the first really consumed predictions.
    """
    t_len = len(noisy_actions)
    s0_t = ad.Tensor(s0, requires_grad=False)
    action_ts = [ad.Tensor(a, requires_grad=False) for a in noisy_actions]
    states, rewards = unroll(model, s0_t, action_ts)
    total = None
    for s_pred, r_pred, s_tgt, r_tgt in zip(states, rewards, target_states, target_rewards):
        step = ad.add(
            ad.mse(s_pred, ad.Tensor(s_tgt, requires_grad=False)),
            ad.mse(r_pred, ad.Tensor(r_tgt, requires_grad=False)),
        )
        total = step if total is None else ad.add(total, step)
    return ad.mul_scalar(total, 1.0 / t_len), states


def train_forward_model(dataset, model, config, rng):
    """Adam-train the model; returns the per-epoch mean loss curve."""
    if not dataset.episodes:
        raise ValueError("empty dataset")
    windows = window_index(dataset, config.unroll_len)
    if not windows:
        raise ValueError(
            f"no episode long enough for unroll_len={config.unroll_len}"
        )
    spec = dataset.action_spec
    opt = Adam(model.parameters(), lr=config.lr)
    curve = []
    for _ in range(config.epochs):
        order = rng.permutation(len(windows))
        if config.batches_per_epoch:
            order = order[: config.batches_per_epoch * config.batch_size]
        losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = [windows[j] for j in order[lo : lo + config.batch_size]]
            s0, actions, states, rewards = _gather_batch(dataset, batch, config.unroll_len)
            noisy = [
                inject_action_noise(a, spec, config.noise_std,
                                    config.noise_std_continuous, rng)
                for a in actions
            ]
            loss, _ = window_loss(model, s0, noisy, states, rewards)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        curve.append(float(np.mean(losses)))
    return curve


def eval_prediction_error(model, dataset, unroll_len, batch_size=256):
    """Per-depth state and reward MSE on noiseless unrolls of true actions."""
    windows = window_index(dataset, unroll_len)
    if not windows:
        raise ValueError(f"no episode long enough for unroll_len={unroll_len}")
    state_sq = np.zeros(unroll_len)
    reward_sq = np.zeros(unroll_len)
    count = 0
    with model.frozen():
        for lo in range(0, len(windows), batch_size):
            batch = windows[lo : lo + batch_size]
            s0, actions, states, rewards = _gather_batch(dataset, batch, unroll_len)
            s0_t = ad.Tensor(s0, requires_grad=False)
            action_ts = [ad.Tensor(a, requires_grad=False) for a in actions]
            preds, rpreds = unroll(model, s0_t, action_ts)
            for k in range(unroll_len):
                state_sq[k] += ((preds[k].data - states[k]) ** 2).mean(axis=1).sum()
                reward_sq[k] += ((rpreds[k].data - rewards[k]) ** 2).sum()
            count += len(batch)
    return {
        "state_mse": (state_sq / count).tolist(),
        "reward_mse": (reward_sq / count).tolist(),
    }


def config_dict(config: TrainConfig):
    return asdict(config)
