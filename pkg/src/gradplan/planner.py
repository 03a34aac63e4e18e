"""Gradient-based planning through a frozen forward model.

Discrete action slots are parameterized as logits mapped through softmax,
so candidate actions live on the probability simplex and admit gradients;
continuous slots are optimized directly and clamped to the environment's
thrust range. K randomly initialized rollouts are each refined by N
gradient-ascent steps on the predicted return, the best rollout wins, and
its discrete parts are quantized to one-hot vectors at the end.

Rollouts are optimized as one batch (row k is rollout k), with one
initialization seed per rollout drawn up front so that candidate sets nest
as K grows.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .models import unroll


@dataclass
class PlanConfig:
    rollouts: int = 40       # K random initializations
    grad_steps: int = 10     # N ascent iterations per rollout
    horizon: int = 10        # T planned timesteps
    step_size: float = 0.1
    optimizer: str = "sgd"   # or "adam" on the action parameters
    cont_clamp: float = 2.0  # |u| bound per continuous slot

    def __post_init__(self):
        if self.rollouts < 1 or self.grad_steps < 0 or self.horizon < 1:
            raise ValueError("need rollouts >= 1, grad_steps >= 0, horizon >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")


@dataclass
class PlanResult:
    actions: np.ndarray       # (T, d+c), discrete part one-hot
    soft_actions: np.ndarray  # (T, d+c), simplex probabilities + raw continuous
    states: np.ndarray        # (T+1, state_len), s0 then predicted states
    rewards: np.ndarray       # (T,), predicted per-step rewards
    total_reward: float
    model_passes: int
    best_rollout: int = 0
    value_trace: np.ndarray = field(default=None, repr=False)  # (N+1, K)


def count_model_passes(config: PlanConfig) -> int:
    """Model passes per plan: N forward+backward unrolls plus the final
    scoring unroll, for each of K rollouts of length T."""
    return config.rollouts * config.horizon * (1 + 2 * config.grad_steps)


def quantize_onehot(simplex_vec) -> np.ndarray:
    """Nearest one-hot vertex = argmax; ties break to the lowest index."""
    out = np.zeros_like(simplex_vec, dtype=np.float64)
    out[int(np.argmax(simplex_vec))] = 1.0
    return out


def rollout_value(model, s0, logits, cont=None):
    """Unroll soft actions sigma(x_t) (plus raw continuous u_t) through the
    model and sum predicted rewards.

    s0: (B, state_len) tensor; logits: list of T (B, d) leaf tensors;
    cont: optional list of T (B, c) leaf tensors. Returns (total, states,
    rewards) where total is a (B, 1) tensor with gradient paths to every
    leaf.
    """
    actions = []
    for t in range(len(logits) if logits else len(cont)):
        parts = []
        if logits:
            parts.append(ad.softmax(logits[t]))
        if cont:
            parts.append(cont[t])
        actions.append(parts[0] if len(parts) == 1 else ad.concat(parts, axis=-1))
    states, rewards = unroll(model, s0, actions)
    total = rewards[0]
    for r in rewards[1:]:
        total = ad.add(total, r)
    return total, states, rewards


def _init_rollouts(rng, k, t, d, c, clamp):
    """Per-rollout seeds drawn in order, so rollout k's start is the same
    whatever K is."""
    seeds = [int(s) for s in rng.integers(0, 2**63 - 1, size=k)]
    x = np.zeros((k, t, d))
    u = np.zeros((k, t, c))
    for i, seed in enumerate(seeds):
        r = np.random.default_rng(seed)
        if d:
            x[i] = r.standard_normal((t, d))
        if c:
            u[i] = np.clip(r.normal(0.0, clamp / 2.0, size=(t, c)), -clamp, clamp)
    return x, u


def gbp_plan(model, s0, config, rng, action_spec=None, dump_dir=None) -> PlanResult:
    """Algorithm: sample K action-parameter sequences, refine each by N
    gradient steps on the predicted return, keep the best, quantize."""
    spec = action_spec if action_spec is not None else model.action_spec
    k, n, t = config.rollouts, config.grad_steps, config.horizon
    d, c = spec.discrete_dim, spec.continuous_dim
    eta, clamp = config.step_size, config.cont_clamp

    x, u = _init_rollouts(rng, k, t, d, c, clamp)
    s0 = np.asarray(s0, dtype=np.float64).reshape(-1)
    s0_batch = ad.Tensor(np.tile(s0, (k, 1)), requires_grad=False)

    adam_m = adam_v = None
    if config.optimizer == "adam":
        adam_m = [np.zeros_like(x), np.zeros_like(u)]
        adam_v = [np.zeros_like(x), np.zeros_like(u)]
    elif config.optimizer != "sgd":
        raise ValueError(f"unknown action optimizer {config.optimizer!r}")

    passes = 0
    trace = np.zeros((n + 1, k))
    with model.frozen():
        for i in range(n):
            logits = [ad.Tensor(x[:, j]) for j in range(t)] if d else []
            conts = [ad.Tensor(u[:, j]) for j in range(t)] if c else []
            total, _, _ = rollout_value(model, s0_batch, logits, conts)
            trace[i] = total.data[:, 0]
            total.sum().backward()
            passes += 2 * k * t
            gx = np.stack([lt.grad for lt in logits], axis=1) if d else None
            gu = np.stack([ct.grad for ct in conts], axis=1) if c else None
            if config.optimizer == "adam":
                step = i + 1
                for arr, g, m, v in ((x, gx, adam_m[0], adam_v[0]),
                                     (u, gu, adam_m[1], adam_v[1])):
                    if g is None:
                        continue
                    m *= 0.9
                    m += 0.1 * g
                    v *= 0.999
                    v += 0.001 * g * g
                    mhat = m / (1 - 0.9**step)
                    vhat = v / (1 - 0.999**step)
                    arr += eta * mhat / (np.sqrt(vhat) + 1e-8)
            else:
                if gx is not None:
                    x += eta * gx
                if gu is not None:
                    u += eta * gu
            if c:
                np.clip(u, -clamp, clamp, out=u)

        # score the final parameters; Algorithm bookkeeping uses soft actions
        logits = [ad.Tensor(x[:, j], requires_grad=False) for j in range(t)] if d else []
        conts = [ad.Tensor(u[:, j], requires_grad=False) for j in range(t)] if c else []
        total, states, rewards = rollout_value(model, s0_batch, logits, conts)
        passes += k * t
        trace[n] = total.data[:, 0]

    values = total.data[:, 0]
    best = int(np.argmax(values))

    soft = np.zeros((t, d + c))
    hard = np.zeros((t, d + c))
    for j in range(t):
        if d:
            probs = _softmax_np(x[best, j])
            soft[j, :d] = probs
            hard[j, :d] = quantize_onehot(probs)
        if c:
            soft[j, d:] = u[best, j]
            hard[j, d:] = u[best, j]

    result = PlanResult(
        actions=hard,
        soft_actions=soft,
        states=np.vstack([s0[None], np.stack([s.data[best] for s in states])]),
        rewards=np.array([r.data[best, 0] for r in rewards]),
        total_reward=float(values[best]),
        model_passes=passes,
        best_rollout=best,
        value_trace=trace,
    )
    if dump_dir is not None:
        dump_plan(result, x, u, dump_dir)
    return result


def _softmax_np(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def dump_plan(result: PlanResult, x, u, dump_dir):
    """Write per-rollout value traces and final soft-action matrices."""
    os.makedirs(dump_dir, exist_ok=True)
    with open(os.path.join(dump_dir, "rollout_values.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "rollout", "value"])
        for step, row in enumerate(result.value_trace):
            for kk, val in enumerate(row):
                writer.writerow([step, kk, f"{val:.6g}"])
    k, t, d = x.shape
    c = u.shape[2]
    with open(os.path.join(dump_dir, "soft_actions.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rollout", "step"] + [f"slot{i}" for i in range(d + c)])
        for kk in range(k):
            for j in range(t):
                row = list(_softmax_np(x[kk, j])) if d else []
                row += list(u[kk, j]) if c else []
                writer.writerow([kk, j] + [f"{v:.6g}" for v in row])


def receding_horizon_act(model, state, config, rng, action_spec=None):
    """Plan from the current state and return only the first action."""
    plan = gbp_plan(model, state, config, rng, action_spec=action_spec)
    return plan.actions[0], plan
