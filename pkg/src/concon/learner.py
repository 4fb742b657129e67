"""From-scratch MLP classifier over symbolic scene features, with exact
gradients, Adam, a diagonal Fisher penalty, and replay buffers.

Features are per-object-type counts (96 values summing to 4), which encode
a scene's multiset losslessly. The model is 96 -> 64 -> 2 with a rectified
hidden layer, all float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .universe import Scene, NUM_TYPES

HIDDEN = 64
N_CLASSES = 2


class NumericFault(RuntimeError):
    pass


def featurize(scene: Scene):
    """96-dim per-type count vector of a scene."""
    x = np.zeros(NUM_TYPES)
    for t in scene.types:
        x[t] += 1.0
    return x


def featurize_types(types_batch):
    """Vectorized featurize for an (n, 4) array of type indices."""
    types_batch = np.asarray(types_batch)
    n = len(types_batch)
    x = np.zeros((n, NUM_TYPES))
    rows = np.repeat(np.arange(n), types_batch.shape[1])
    np.add.at(x, (rows, types_batch.ravel()), 1.0)
    return x


@dataclass
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, rng):
        return cls(
            w1=rng.normal(0.0, np.sqrt(2.0 / NUM_TYPES), size=(NUM_TYPES, HIDDEN)),
            b1=np.zeros(HIDDEN),
            w2=rng.normal(0.0, np.sqrt(1.0 / HIDDEN), size=(HIDDEN, N_CLASSES)),
            b2=np.zeros(N_CLASSES),
        )

    @property
    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self):
        return MlpModel(*(p.copy() for p in self.params))

    def check_finite(self):
        if not all(np.all(np.isfinite(p)) for p in self.params):
            raise NumericFault("non-finite model parameter")

    def save(self, path):
        np.savez(path, w1=self.w1, b1=self.b1, w2=self.w2, b2=self.b2)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            return cls(w1=z["w1"], b1=z["b1"], w2=z["w2"], b2=z["b2"])


def forward(model, x):
    """Batch logits, shape (n, 2)."""
    h = np.maximum(x @ model.w1 + model.b1, 0.0)
    logits = h @ model.w2 + model.b2
    if not np.all(np.isfinite(logits)):
        raise NumericFault("non-finite logits")
    return logits


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class EwcPenalty:
    fisher: "FisherState"
    lam: float


@dataclass
class DerPenalty:
    x: np.ndarray  # replayed features
    logits: np.ndarray  # logits stored at insertion time
    alpha: float


def loss_and_grad(model, x, y, penalties=()):
    """Mean softmax cross-entropy plus optional quadratic-Fisher and
    logit-distillation terms; returns (loss, grads) with exact gradients."""
    n = len(x)
    if n == 0:
        raise ValueError("empty batch")
    y = np.asarray(y, dtype=int)
    if np.any((y < 0) | (y >= N_CLASSES)):
        raise ValueError("label outside {0, 1}")
    pre1 = x @ model.w1 + model.b1
    h = np.maximum(pre1, 0.0)
    logits = h @ model.w2 + model.b2
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    gw2 = h.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dh = dlogits @ model.w2.T
    dh[pre1 <= 0.0] = 0.0
    gw1 = x.T @ dh
    gb1 = dh.sum(axis=0)
    grads = [gw1, gb1, gw2, gb2]

    for pen in penalties:
        if isinstance(pen, EwcPenalty):
            for gp, p, f, anchor in zip(grads, model.params, pen.fisher.fisher,
                                        pen.fisher.anchor):
                diff = p - anchor
                loss += 0.5 * pen.lam * float(np.sum(f * diff * diff))
                gp += pen.lam * f * diff
        elif isinstance(pen, DerPenalty):
            m = len(pen.x)
            pre1r = pen.x @ model.w1 + model.b1
            hr = np.maximum(pre1r, 0.0)
            lr = hr @ model.w2 + model.b2
            diff = lr - pen.logits
            loss += pen.alpha * float(np.mean(diff * diff))
            dl = (2.0 * pen.alpha / diff.size) * diff
            grads[2] += hr.T @ dl
            grads[3] += dl.sum(axis=0)
            dhr = dl @ model.w2.T
            dhr[pre1r <= 0.0] = 0.0
            grads[0] += pen.x.T @ dhr
            grads[1] += dhr.sum(axis=0)
        else:
            raise TypeError(f"unknown penalty: {pen!r}")
    return loss, grads


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def init(cls, model):
        return cls(
            m=[np.zeros_like(p) for p in model.params],
            v=[np.zeros_like(p) for p in model.params],
        )


def adam_step(model, state, grads, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    for p, g, m, v in zip(model.params, grads, state.m, state.v):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)
    model.check_finite()
    return model, state


@dataclass
class FisherState:
    fisher: list  # diagonal estimate per parameter
    anchor: list  # parameters the penalty pulls toward

    def accumulate(self, other):
        """Sum Fisher terms across tasks; the anchor moves to the newest."""
        return FisherState(
            fisher=[f + g for f, g in zip(self.fisher, other.fisher)],
            anchor=[a.copy() for a in other.anchor],
        )


def compute_fisher(model, x, y):
    """Diagonal Fisher: mean squared per-example gradient of the
    cross-entropy at the true label. Vectorized via the outer-product
    structure of the layer gradients."""
    if len(x) == 0:
        raise ValueError("empty data")
    y = np.asarray(y, dtype=int)
    pre1 = x @ model.w1 + model.b1
    h = np.maximum(pre1, 0.0)
    logits = h @ model.w2 + model.b2
    probs = _softmax(logits)
    dlogits = probs
    dlogits[np.arange(len(x)), y] -= 1.0
    # Per-example grad of w2 is outer(h_i, dlogits_i): its square decomposes.
    f_w2 = (h * h).T @ (dlogits * dlogits) / len(x)
    f_b2 = np.mean(dlogits * dlogits, axis=0)
    dh = dlogits @ model.w2.T
    dh[pre1 <= 0.0] = 0.0
    f_w1 = (x * x).T @ (dh * dh) / len(x)
    f_b1 = np.mean(dh * dh, axis=0)
    return FisherState(
        fisher=[f_w1, f_b1, f_w2, f_b2],
        anchor=[p.copy() for p in model.params],
    )


# -- replay buffers ----------------------------------------------------------


@dataclass
class BufferEntry:
    x: np.ndarray
    y: int
    task: int
    flags: tuple = ()
    logits: np.ndarray | None = None


@dataclass
class ReplayBuffer:
    capacity: int
    policy: str = "reservoir"  # reservoir | class_balanced | group_balanced
    entries: list = field(default_factory=list)
    seen: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")

    def _group(self, entry):
        if self.policy == "class_balanced":
            return entry.y
        return (entry.y, entry.flags)

    def add(self, entry, rng):
        self.seen += 1
        if self.policy == "reservoir":
            if len(self.entries) < self.capacity:
                self.entries.append(entry)
            else:
                j = rng.integers(self.seen)
                if j < self.capacity:
                    self.entries[j] = entry
            return
        # Balanced policies: greedy quotas, evicting from the largest group.
        if len(self.entries) < self.capacity:
            self.entries.append(entry)
            return
        groups: dict = {}
        for i, e in enumerate(self.entries):
            groups.setdefault(self._group(e), []).append(i)
        largest = max(groups.values(), key=len)
        mine = groups.get(self._group(entry), [])
        if len(mine) < len(largest):
            victim = largest[rng.integers(len(largest))]
        else:
            # Own group already largest: replace one of its members so long
            # streams keep refreshing content without skewing the quotas.
            victim = mine[rng.integers(len(mine))]
        self.entries[victim] = entry

    def extend(self, entries, rng):
        for e in entries:
            self.add(e, rng)

    def sample(self, k, rng):
        k = min(k, len(self.entries))
        idx = rng.choice(len(self.entries), size=k, replace=False)
        return [self.entries[int(i)] for i in idx]
