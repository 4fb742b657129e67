"""Continual-training regimes over per-task feature datasets.

Every regime is a deterministic function of (datasets, config): the run
seed drives shuffling, buffer decisions, and model initialization, and a
fresh checkpoint is recorded at every task boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .learner import (
    AdamState,
    BufferEntry,
    DerPenalty,
    EwcPenalty,
    MlpModel,
    ReplayBuffer,
    adam_step,
    compute_fisher,
    forward,
    loss_and_grad,
)

REGIMES = (
    "naive", "joint", "cumulative", "shuffled",
    "er", "der", "ewc", "gdumb", "bgs",
)

BUFFER_POLICIES = {"er": "reservoir", "der": "reservoir",
                   "gdumb": "class_balanced", "bgs": "group_balanced"}


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 0.001
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    buffer_size: int = 100
    ewc_lambda: float = 100.0
    der_alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")


@dataclass
class TaskData:
    """Training split of one task: features, labels, confounder flags."""

    x: np.ndarray
    y: np.ndarray
    flags: np.ndarray  # (n, T) booleans; may be empty for unconfounded data

    def __len__(self):
        return len(self.x)


def _concat(datasets):
    return TaskData(
        x=np.concatenate([d.x for d in datasets]),
        y=np.concatenate([d.y for d in datasets]),
        flags=np.concatenate([d.flags for d in datasets]),
    )


def _train(model, opt, data: TaskData, config, rng, log, task_label,
           buffer=None, der_alpha=None, penalties=()):
    """Epoch loop with optional replay-batch augmentation."""
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = data.x[idx], data.y[idx]
            batch_penalties = list(penalties)
            if buffer is not None and buffer.entries:
                replayed = buffer.sample(config.batch_size, rng)
                xr = np.stack([e.x for e in replayed])
                yr = np.array([e.y for e in replayed])
                xb = np.concatenate([xb, xr])
                yb = np.concatenate([yb, yr])
                if der_alpha is not None:
                    lr_stored = np.stack([e.logits for e in replayed])
                    batch_penalties.append(DerPenalty(xr, lr_stored, der_alpha))
            loss, grads = loss_and_grad(model, xb, yb, batch_penalties)
            adam_step(model, opt, grads, lr=config.learning_rate,
                      beta1=config.beta1, beta2=config.beta2, eps=config.eps)
            losses.append(loss)
            correct += int((np.argmax(forward(model, data.x[idx]), axis=1)
                            == data.y[idx]).sum())
        log.append({
            "task": task_label,
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "train_acc": correct / n,
        })


def _buffer_entries(data: TaskData, task_index, model=None):
    logits = forward(model, data.x) if model is not None else None
    entries = []
    for i in range(len(data)):
        entries.append(BufferEntry(
            x=data.x[i],
            y=int(data.y[i]),
            task=task_index,
            flags=tuple(bool(f) for f in data.flags[i]),
            logits=None if logits is None else logits[i].copy(),
        ))
    return entries


def run_regime(regime, tasks, config: TrainConfig):
    """Train through the task sequence; returns (checkpoints, log).

    tasks: list of TaskData for tasks 1..T, in order. joint returns a
    single checkpoint; every other regime returns one per task boundary.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime: {regime!r}")
    if regime == "bgs" and any(t.flags.shape[1] == 0 for t in tasks):
        raise ValueError("bgs requires confounder flags in the dataset")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    model = MlpModel.init(rng)
    opt = AdamState.init(model)
    log: list = []
    checkpoints = []

    if regime == "joint":
        _train(model, opt, _concat(tasks), config, rng, log, task_label=0)
        return [model.copy()], log

    if regime == "shuffled":
        pooled = _concat(tasks)
        # Repartitioning a single task is the identity (and draws no rng),
        # so shuffled degenerates to cumulative at T=1.
        order = rng.permutation(len(pooled)) if len(tasks) > 1 else np.arange(len(pooled))
        bounds = np.linspace(0, len(pooled), len(tasks) + 1).astype(int)
        tasks = [
            TaskData(pooled.x[order[a:b]], pooled.y[order[a:b]], pooled.flags[order[a:b]])
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        regime = "cumulative"

    buffer = None
    if regime in BUFFER_POLICIES:
        buffer = ReplayBuffer(config.buffer_size, BUFFER_POLICIES[regime])
    fisher = None

    for t, data in enumerate(tasks, start=1):
        if regime in ("naive", "er", "der", "bgs"):
            penalties = ()
            _train(model, opt, data, config, rng, log, task_label=t,
                   buffer=buffer if regime in ("er", "der", "bgs") else None,
                   der_alpha=config.der_alpha if regime == "der" else None,
                   penalties=penalties)
        elif regime == "cumulative":
            _train(model, opt, _concat(tasks[:t]), config, rng, log, task_label=t)
        elif regime == "ewc":
            penalties = (EwcPenalty(fisher, config.ewc_lambda),) if fisher else ()
            _train(model, opt, data, config, rng, log, task_label=t,
                   penalties=penalties)
            new_fisher = compute_fisher(model, data.x, data.y)
            fisher = new_fisher if fisher is None else fisher.accumulate(new_fisher)
        elif regime == "gdumb":
            buffer.extend(_buffer_entries(data, t), rng)
            # Retrain from scratch on the buffer at every boundary.
            model = MlpModel.init(
                np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(t,)))
            )
            opt = AdamState.init(model)
            mem = TaskData(
                x=np.stack([e.x for e in buffer.entries]),
                y=np.array([e.y for e in buffer.entries]),
                flags=np.array([e.flags for e in buffer.entries]),
            )
            _train(model, opt, mem, config, rng, log, task_label=t)
        else:  # pragma: no cover
            raise AssertionError(regime)

        if regime in ("er", "der", "bgs"):
            buffer.extend(
                _buffer_entries(data, t, model=model if regime == "der" else None),
                rng,
            )
        checkpoints.append(model.copy())
    return checkpoints, log
