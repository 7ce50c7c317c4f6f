"""Gradient-based embedding training under the hinge loss.

For a triplet (i, j, k) the loss is

    max(0, ||f(i) - f(j)||^2 - ||f(i) - f(k)||^2 + gamma)

so zero loss with a positive margin gamma implies the constraint holds
strictly. Quadruplets (a, b, c, d) use the symmetric form
``max(0, ||f(a)-f(b)||^2 - ||f(c)-f(d)||^2 + gamma)``. Updates follow AdamW
(decoupled weight decay: the decay scales coordinates directly and never
enters the moment estimates). The spherical variant renormalizes every row
to unit length after each step.

Runs are deterministic for a fixed config: minibatches come from the seeded
generator and per-constraint gradients are accumulated in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._rng import make_rng
from .embedding import Embedding
from .errors import DivergenceError, InvalidParameterError
from .evaluation import evaluate_accuracy
from .instances import Instance, Triplet

__all__ = [
    "TrainConfig",
    "TrainLogEntry",
    "TrainResult",
    "hinge_loss",
    "hinge_gradient",
    "train",
    "full_batch_gd",
]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``steps=None`` resolves to ``20 * ceil(m / batch_size)`` for the instance
    being trained. ``init_scale=None`` resolves to ``1 / sqrt(d)``. Minibatch
    gradients are averaged over the batch. ``eval_every`` > 0 evaluates full
    accuracy every that many steps; ``patience`` > 0 stops after that many
    consecutive evaluations without accuracy improvement (0 disables).
    """

    d: int
    gamma: float = 1.0
    learning_rate: float = 1e-2
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    steps: int | None = None
    batch_size: int = 1024
    spherical: bool = False
    init_scale: float | None = None
    seed: int = 0
    eval_every: int = 0
    patience: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise InvalidParameterError(f"need d >= 1, got {self.d}")
        if self.gamma <= 0:
            raise InvalidParameterError(f"need gamma > 0, got {self.gamma}")
        if self.learning_rate <= 0:
            raise InvalidParameterError("learning rate must be positive")
        if self.weight_decay < 0:
            raise InvalidParameterError("weight decay must be nonnegative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidParameterError("beta1 and beta2 must lie in (0, 1)")
        if self.steps is not None and self.steps < 1:
            raise InvalidParameterError(f"need steps >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise InvalidParameterError(f"need batch_size >= 1, got {self.batch_size}")
        if self.init_scale is not None and self.init_scale <= 0:
            raise InvalidParameterError("init_scale must be positive")

    def resolved_steps(self, m: int) -> int:
        if self.steps is not None:
            return self.steps
        return max(1, 20 * math.ceil(max(1, m) / self.batch_size))


def hinge_loss(emb: Embedding, t: Triplet, gamma: float) -> float:
    """max(0, ||f(i)-f(j)||^2 - ||f(i)-f(k)||^2 + gamma)."""
    coords = emb.coords
    fi, fj, fk = coords[t.anchor], coords[t.positive], coords[t.negative]
    arg = float(np.dot(fi - fj, fi - fj) - np.dot(fi - fk, fi - fk) + gamma)
    return max(0.0, arg)


def hinge_gradient(emb: Embedding, t: Triplet, gamma: float) -> dict[int, np.ndarray]:
    """Loss gradient over the three touched rows.

    Active hinge: d/df(i) = 2(f(k)-f(j)), d/df(j) = -2(f(i)-f(j)),
    d/df(k) = 2(f(i)-f(k)). Inactive (and exactly at the kink, where the
    subgradient 0 is chosen): zero rows.
    """
    coords = emb.coords
    fi, fj, fk = coords[t.anchor], coords[t.positive], coords[t.negative]
    arg = float(np.dot(fi - fj, fi - fj) - np.dot(fi - fk, fi - fk) + gamma)
    zero = np.zeros(emb.d)
    if arg <= 0.0:
        return {t.anchor: zero, t.positive: zero.copy(), t.negative: zero.copy()}
    return {
        t.anchor: 2.0 * (fk - fj),
        t.positive: -2.0 * (fi - fj),
        t.negative: 2.0 * (fi - fk),
    }


@dataclass(frozen=True)
class TrainLogEntry:
    step: int
    loss: float
    accuracy: float | None = None


@dataclass(frozen=True)
class TrainResult:
    embedding: Embedding
    log: list[TrainLogEntry] = field(repr=False)
    steps_run: int = 0
    final_accuracy: float = 0.0
    final_loss: float = 0.0


def _batch_args(coords, cons, batch, quadruplet: bool, gamma: float):
    rows = cons[batch]
    if quadruplet:
        left = coords[rows[:, 0]] - coords[rows[:, 1]]
        right = coords[rows[:, 2]] - coords[rows[:, 3]]
    else:
        left = coords[rows[:, 0]] - coords[rows[:, 1]]
        right = coords[rows[:, 0]] - coords[rows[:, 2]]
    with np.errstate(invalid="ignore", over="ignore"):  # divergence is detected on the loss
        args = (
            np.einsum("ij,ij->i", left, left) - np.einsum("ij,ij->i", right, right) + gamma
        )
    return rows, left, right, args


def train(
    instance: Instance,
    config: TrainConfig,
    callback: Callable[[int, Embedding], None] | None = None,
) -> TrainResult:
    """AdamW minibatch training; deterministic for a fixed config and instance.

    The optional callback receives (step, embedding snapshot) at every
    evaluation point and must not mutate the snapshot; it cannot affect the
    run's result.
    """
    m = instance.m
    if m == 0:
        raise InvalidParameterError("cannot train on an instance with no constraints")
    n = instance.n
    d = config.d
    steps = config.resolved_steps(m)
    quadruplet = instance.is_quadruplet
    cons = instance.constraints
    gamma = config.gamma

    rng = make_rng(config.seed)
    init_scale = config.init_scale if config.init_scale is not None else 1.0 / math.sqrt(d)
    coords = rng.standard_normal((n, d)) * init_scale
    if config.spherical:
        coords /= np.linalg.norm(coords, axis=1, keepdims=True)

    m1 = np.zeros((n, d))
    m2 = np.zeros((n, d))
    lr = config.learning_rate
    log: list[TrainLogEntry] = []
    best_acc = -1.0
    stale = 0
    steps_run = 0

    for step in range(1, steps + 1):
        batch = rng.integers(0, m, size=config.batch_size)
        rows, left, right, args = _batch_args(coords, cons, batch, quadruplet, gamma)
        loss = float(np.maximum(args, 0.0).mean())
        if not math.isfinite(loss):
            raise DivergenceError(step)
        active = (args > 0.0).astype(np.float64)
        grad = np.zeros((n, d))
        # np.add.at applies updates in index order: repeated rows inside one
        # batch accumulate deterministically, keeping runs bitwise stable
        aw = active[:, None] / config.batch_size
        if quadruplet:
            np.add.at(grad, rows[:, 0], 2.0 * left * aw)
            np.add.at(grad, rows[:, 1], -2.0 * left * aw)
            np.add.at(grad, rows[:, 2], -2.0 * right * aw)
            np.add.at(grad, rows[:, 3], 2.0 * right * aw)
        else:
            np.add.at(grad, rows[:, 0], 2.0 * (left - right) * aw)
            np.add.at(grad, rows[:, 1], -2.0 * left * aw)
            np.add.at(grad, rows[:, 2], 2.0 * right * aw)

        m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad
        m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad * grad
        mhat = m1 / (1.0 - config.beta1**step)
        vhat = m2 / (1.0 - config.beta2**step)
        if config.weight_decay:
            coords *= 1.0 - lr * config.weight_decay
        coords -= lr * mhat / (np.sqrt(vhat) + config.adam_epsilon)
        if config.spherical:
            coords /= np.linalg.norm(coords, axis=1, keepdims=True)
        steps_run = step

        acc = None
        if config.eval_every and (step % config.eval_every == 0 or step == steps):
            snapshot = Embedding(coords.copy())
            acc = evaluate_accuracy(snapshot, instance)
            if callback is not None:
                callback(step, snapshot)
            if config.patience:
                if acc > best_acc + 1e-12:
                    best_acc = acc
                    stale = 0
                else:
                    stale += 1
                    if stale >= config.patience:
                        log.append(TrainLogEntry(step=step, loss=loss, accuracy=acc))
                        break
        log.append(TrainLogEntry(step=step, loss=loss, accuracy=acc))

    final = Embedding(coords.copy())
    final_acc = evaluate_accuracy(final, instance)
    return TrainResult(
        embedding=final,
        log=log,
        steps_run=steps_run,
        final_accuracy=final_acc,
        final_loss=log[-1].loss if log else 0.0,
    )


def full_batch_gd(
    instance: Instance,
    d: int,
    learning_rate: float,
    steps: int,
    seed: int,
    gamma: float = 1.0,
    init_scale: float | None = None,
) -> tuple[Embedding, list[float]]:
    """Plain full-batch gradient descent, a diagnostic mode.

    No momentum, no weight decay; returns the loss trajectory, which should
    be non-increasing for small learning rates.
    """
    if steps < 1 or d < 1:
        raise InvalidParameterError("need steps >= 1 and d >= 1")
    m = instance.m
    if m == 0:
        raise InvalidParameterError("cannot train on an instance with no constraints")
    quadruplet = instance.is_quadruplet
    cons = instance.constraints
    rng = make_rng(seed)
    scale = init_scale if init_scale is not None else 1.0 / math.sqrt(d)
    coords = rng.standard_normal((instance.n, d)) * scale
    everything = np.arange(m)
    losses: list[float] = []
    for _ in range(steps):
        rows, left, right, args = _batch_args(coords, cons, everything, quadruplet, gamma)
        losses.append(float(np.maximum(args, 0.0).mean()))
        active = (args > 0.0).astype(np.float64)
        aw = active[:, None] / m
        grad = np.zeros_like(coords)
        if quadruplet:
            np.add.at(grad, rows[:, 0], 2.0 * left * aw)
            np.add.at(grad, rows[:, 1], -2.0 * left * aw)
            np.add.at(grad, rows[:, 2], -2.0 * right * aw)
            np.add.at(grad, rows[:, 3], 2.0 * right * aw)
        else:
            np.add.at(grad, rows[:, 0], 2.0 * (left - right) * aw)
            np.add.at(grad, rows[:, 1], -2.0 * left * aw)
            np.add.at(grad, rows[:, 2], 2.0 * right * aw)
        coords -= learning_rate * grad
    rows, left, right, args = _batch_args(coords, cons, everything, quadruplet, gamma)
    losses.append(float(np.maximum(args, 0.0).mean()))
    return Embedding(coords), losses
