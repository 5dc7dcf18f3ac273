"""Dense encoder-decoder with hand-written backpropagation.

Layers act on row batches: ``h_{k+1} = act(h_k @ W_k.T + b_k)``, where ``W_k``
has shape ``(out, in)``. Every layer uses ``tanh`` except the last one, which
is linear so outputs are not range-limited. The first half of the layers form
the encoder, the second half the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cul.errors import InvalidArgument, NumericFailure
from cul.numerics import make_rng

DEFAULT_SIZES = (256, 64, 16, 64, 256)


@dataclass
class ToyModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    train_loss: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InvalidArgument("need one bias per weight matrix")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidArgument(f"layer {k}: weight {w.shape} and bias {b.shape} mismatch")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise InvalidArgument(f"layer {k} input {w.shape[1]} != previous output")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        return [tuple(w.shape) for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def latent_dim(self) -> int:
        return self.weights[len(self.weights) // 2 - 1].shape[0] if len(self.weights) > 1 else self.input_dim

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        """Weights then biases per layer, in layer order (row-major)."""
        return np.concatenate([p for w, b in zip(self.weights, self.biases) for p in (w.ravel(), b)])

    @classmethod
    def from_flat(cls, flat, layer_dims) -> ToyModel:
        flat = np.asarray(flat, dtype=np.float64)
        need = sum(r * c + r for r, c in layer_dims)
        if flat.shape != (need,):
            raise InvalidArgument(f"flat vector has {flat.size} entries, layout needs {need}")
        weights, biases, pos = [], [], 0
        for r, c in layer_dims:
            weights.append(flat[pos : pos + r * c].reshape(r, c))
            pos += r * c
            biases.append(flat[pos : pos + r])
            pos += r
        return cls(weights, biases)

    def copy(self) -> ToyModel:
        return ToyModel([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.train_loss)

    # -- compute ---------------------------------------------------------------

    def forward(self, x: np.ndarray, keep: bool = False):
        """Outputs for a ``(n, d)`` batch; with ``keep`` also the activations."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise InvalidArgument(f"input has {x.shape[1]} features, model expects {self.input_dim}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < last:
                h = np.tanh(h)
            acts.append(h)
        return (h, acts) if keep else h

    def backward(self, acts: list[np.ndarray], dout: np.ndarray) -> np.ndarray:
        """Flat gradient of a loss given ``dL/d(output)`` and kept activations."""
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        delta = dout
        for k in range(len(self.weights) - 1, -1, -1):
            grads[2 * k] = (delta.T @ acts[k]).ravel()
            grads[2 * k + 1] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k]) * (1.0 - acts[k] ** 2)
        return np.concatenate(grads)


def init_model(sizes=DEFAULT_SIZES, seed: int = 0, scale: float = 1.0) -> ToyModel:
    """Glorot-normal weights, zero biases."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise InvalidArgument(f"bad layer sizes {sizes}")
    rng = make_rng((seed, 0x1417))
    weights = [
        scale * rng.standard_normal((o, i)) * np.sqrt(2.0 / (i + o)) for i, o in zip(sizes, sizes[1:])
    ]
    return ToyModel(weights, [np.zeros(o) for o in sizes[1:]])


def squared_error_grad(model: ToyModel, x: np.ndarray, target: np.ndarray):
    """Mean over rows of ``|model(x) - target|^2`` and its flat gradient."""
    out, acts = model.forward(x, keep=True)
    diff = out - target
    n = diff.shape[0]
    loss = float(np.sum(diff * diff) / n)
    return loss, model.backward(acts, 2.0 * diff / n)


def pretrain(
    x: np.ndarray,
    crop_fn,
    sizes=DEFAULT_SIZES,
    epochs: int = 500,
    seed: int = 0,
    lr: float = 3e-3,
) -> ToyModel:
    """Fit ``model(crop(x)) ~ x`` with full-batch Adam; returns the frozen original.

    ``crop_fn`` maps a pixel batch to its masked version.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidArgument("pretrain needs a nonempty (n, d) batch")
    model = init_model(sizes, seed)
    layout = model.layer_dims
    theta = model.flatten()
    xin = crop_fn(x)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2 = 0.9, 0.999
    loss = float("nan")
    for t in range(1, epochs + 1):
        loss, grad = squared_error_grad(ToyModel.from_flat(theta, layout), xin, x)
        if not np.isfinite(loss):
            raise NumericFailure("pretraining diverged", iteration=t - 1)
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        theta = theta - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + 1e-8)
    model = ToyModel.from_flat(theta.copy(), layout)
    model.train_loss = float(np.sum((model.forward(xin) - x) ** 2) / x.shape[0]) if epochs else loss
    return model


def relative_error(model: ToyModel, xin: np.ndarray, x: np.ndarray) -> float:
    """Mean over rows of ``|model(xin) - x| / |x|``."""
    out = model.forward(xin)
    return float(np.mean(np.linalg.norm(out - x, axis=1) / np.linalg.norm(x, axis=1)))
