"""Comparison baselines: single-loss gradient steps on the forget/retain data."""

from __future__ import annotations

import enum

import numpy as np

from cul.errors import InvalidArgument
from cul.numerics import make_rng
from cul.unlearn.model import ToyModel, squared_error_grad
from cul.unlearn.task import UnlearnTask


class BaselineKind(str, enum.Enum):
    MAX_LOSS = "MaxLoss"
    RETAIN_LABEL = "RetainLabel"
    NOISY_LABEL = "NoisyLabel"
    COMPOSITE_LOSS = "CompositeLoss"


def _pairing(task: UnlearnTask, seed: int, epoch: int) -> np.ndarray:
    # forget row i is relabelled with retain row pairing[i] for the whole epoch
    n_f, n_r = len(task.forget), len(task.retain)
    return make_rng((seed, epoch, 0x9A1)).permutation(max(n_f, n_r))[:n_f] % n_r


def baseline_loss_grad(kind, task: UnlearnTask, current: ToyModel, lam: float, noise_std: float, key):
    """Loss and flat gradient that the baseline descends (ascends for MaxLoss)."""
    try:
        kind = BaselineKind(kind)
    except ValueError:
        raise InvalidArgument(f"unknown baseline kind {kind!r}") from None
    if kind in (BaselineKind.NOISY_LABEL, BaselineKind.COMPOSITE_LOSS) and not noise_std > 0:
        raise InvalidArgument("noise_std must be positive")
    if kind is BaselineKind.COMPOSITE_LOSS and not lam >= 0:
        raise InvalidArgument("lambda must be nonnegative")
    seed, it = (key, 0) if np.isscalar(key) else key
    fi, ri, _ = task.batch_indices((seed, it))
    c = task._cache
    xf_in, xf = c["forget_in"][fi], task.forget[fi]
    if kind is BaselineKind.MAX_LOSS:
        return squared_error_grad(current, xf_in, xf)
    if kind is BaselineKind.RETAIN_LABEL:
        epoch = int(it) // task.steps_per_epoch
        labels = task.retain[_pairing(task, seed, epoch)[fi]]
        return squared_error_grad(current, xf_in, labels)
    noisy = xf + noise_std * make_rng((seed, int(it), 0x7015E)).standard_normal(xf.shape)
    loss, grad = squared_error_grad(current, xf_in, noisy)
    if kind is BaselineKind.COMPOSITE_LOSS:
        r_loss, r_grad = squared_error_grad(current, c["retain_in"][ri], task.retain[ri])
        loss, grad = loss + lam * r_loss, grad + lam * r_grad
    return loss, grad


def baseline_step(
    kind,
    task: UnlearnTask,
    current: ToyModel,
    mu: float,
    lam: float = 1.0,
    noise_std: float = 1.0,
    iteration_seed=0,
) -> ToyModel:
    """One gradient step of the chosen baseline; returns a new model."""
    _, grad = baseline_loss_grad(kind, task, current, lam, noise_std, iteration_seed)
    sign = 1.0 if BaselineKind(kind) is BaselineKind.MAX_LOSS else -1.0
    theta = current.flatten() + sign * mu * grad
    return ToyModel.from_flat(theta, current.layer_dims)


def run_baseline(
    kind,
    task: UnlearnTask,
    mu: float,
    epochs: int = 5,
    lam: float = 1.0,
    noise_std: float = 1.0,
    seed: int = 0,
) -> ToyModel:
    model = task.original.copy()
    for it in range(epochs * task.steps_per_epoch):
        model = baseline_step(kind, task, model, mu, lam, noise_std, (seed, it))
    return model
