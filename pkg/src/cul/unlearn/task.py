"""Unlearning objectives on the toy image task.

``f1`` pulls the current model's outputs on masked forget images toward a
Gaussian noise target; ``f2`` keeps outputs on masked retain images at the
original model's outputs. Both are batch means of squared L2 distances.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from cul.errors import InvalidArgument
from cul.numerics import estimate_covariance, make_rng, sample_gaussian
from cul.objective import BiObjectiveProblem, ObjectiveEval, register_problem
from cul.unlearn.data import CropSpec, crop_batch, stack
from cul.unlearn.model import ToyModel

VARIANCE_FLOOR = 1e-12


class NoiseMode(str, enum.Enum):
    THROUGH_ORIGINAL = "ThroughOriginal"
    DIRECT_NOISE = "DirectNoise"


@dataclass
class UnlearnTask:
    original: ToyModel
    forget: np.ndarray
    retain: np.ndarray
    crop: CropSpec
    sigma: np.ndarray
    batch: int = 32
    noise_mode: NoiseMode = NoiseMode.THROUGH_ORIGINAL
    height: int = 16
    eval_seed: int = 12345
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.noise_mode = NoiseMode(self.noise_mode)
        if len(self.forget) == 0 or len(self.retain) == 0:
            raise InvalidArgument("forget and retain sets must be nonempty")
        if not 0 < self.batch <= min(len(self.forget), len(self.retain)):
            raise InvalidArgument(
                f"batch {self.batch} must be in [1, {min(len(self.forget), len(self.retain))}]"
            )
        if self.height * self.height != self.forget.shape[1]:
            raise InvalidArgument("image size does not match height")
        # frozen quantities reused by every evaluation
        self._cache["forget_in"] = self.mask(self.forget)
        self._cache["retain_in"] = self.mask(self.retain)
        self._cache["retain_ref"] = self.original.forward(self._cache["retain_in"])
        self._cache["eval_targets"] = self.noise_targets(self.eval_seed, len(self.forget))

    @property
    def dim(self) -> int:
        return self.original.n_params

    @property
    def steps_per_epoch(self) -> int:
        return max(len(self.forget) // self.batch, 1)

    def mask(self, x: np.ndarray) -> np.ndarray:
        return crop_batch(x, self.crop, self.height)

    def noise_targets(self, seed, n: int) -> np.ndarray:
        xn = sample_gaussian(self.sigma.size, self.sigma, seed, n=n)
        if self.noise_mode is NoiseMode.DIRECT_NOISE:
            return xn
        return self.original.forward(self.mask(xn))

    def model(self, theta) -> ToyModel:
        return ToyModel.from_flat(theta, self.original.layer_dims)

    def batch_indices(self, key):
        """Forget/retain row indices and the noise seed for a step key ``(seed, iteration)``."""
        seed, it = (key, 0) if np.isscalar(key) else key
        epoch, k = divmod(int(it), self.steps_per_epoch)
        rows = np.arange(k * self.batch, (k + 1) * self.batch)
        pf = make_rng((seed, epoch, 0)).permutation(len(self.forget))
        pr = make_rng((seed, epoch, 1)).permutation(len(self.retain))
        return pf.take(rows, mode="wrap"), pr.take(rows, mode="wrap"), (seed, int(it), 2)


def make_task(
    original: ToyModel,
    forget,
    retain,
    crop: CropSpec = CropSpec(),
    batch: int = 32,
    noise_mode: NoiseMode | str = NoiseMode.THROUGH_ORIGINAL,
) -> UnlearnTask:
    """Build a task from image lists; the noise covariance comes from the forget set."""
    if {im.class_id for im in forget} & {im.class_id for im in retain}:
        raise InvalidArgument("forget and retain sets share a class")
    xf, xr = stack(forget), stack(retain)
    sigma = estimate_covariance(xf)
    if np.all(sigma < VARIANCE_FLOOR):
        sigma = np.ones_like(sigma)
    height = forget[0].pixels.shape[0]
    return UnlearnTask(original, xf, xr, crop, sigma, batch, NoiseMode(noise_mode), height)


def _eval(task: UnlearnTask, model: ToyModel, xf_in, target, xr_in, xr_ref) -> ObjectiveEval:
    out_f, acts_f = model.forward(xf_in, keep=True)
    df = out_f - target
    out_r, acts_r = model.forward(xr_in, keep=True)
    dr = out_r - xr_ref
    nf, nr = df.shape[0], dr.shape[0]
    return ObjectiveEval(
        f1=float(np.sum(df * df) / nf),
        f2=float(np.sum(dr * dr) / nr),
        grad_f1=model.backward(acts_f, 2.0 * df / nf),
        grad_f2=model.backward(acts_r, 2.0 * dr / nr),
    )


def unlearn_objectives(task: UnlearnTask, current, iteration_seed=0) -> ObjectiveEval:
    """Minibatch objectives and gradients for one step.

    ``current`` is a :class:`ToyModel` or its flat parameter vector;
    ``iteration_seed`` is an int or a ``(seed, iteration)`` pair.
    """
    model = current if isinstance(current, ToyModel) else task.model(current)
    fi, ri, noise_seed = task.batch_indices(iteration_seed)
    c = task._cache
    target = task.noise_targets(noise_seed, task.batch)
    return _eval(task, model, c["forget_in"][fi], target, c["retain_in"][ri], c["retain_ref"][ri])


def full_objectives(task: UnlearnTask, current) -> ObjectiveEval:
    """Objectives over the whole forget and retain sets with fixed noise targets."""
    model = current if isinstance(current, ToyModel) else task.model(current)
    c = task._cache
    return _eval(task, model, c["forget_in"], c["eval_targets"], c["retain_in"], c["retain_ref"])


def make_unlearn_problem(task: UnlearnTask) -> BiObjectiveProblem:
    return BiObjectiveProblem(
        name="unlearn-toy",
        dim=task.dim,
        eval_fn=lambda theta, key: unlearn_objectives(task, theta, key),
        full_fn=lambda theta, key: full_objectives(task, theta),
        stochastic=True,
        meta={"task": task},
    )


register_problem("unlearn-toy", lambda task: make_unlearn_problem(task))


@dataclass(frozen=True)
class UnlearnMetrics:
    forget_err: float
    retain_err: float
    noise_prox: float
    retain_degradation: float

    def as_dict(self) -> dict:
        return {
            "forget_err": self.forget_err,
            "retain_err": self.retain_err,
            "noise_prox": self.noise_prox,
            "retain_degradation": self.retain_degradation,
        }


def _mean_dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def evaluate(model, task: UnlearnTask) -> UnlearnMetrics:
    """L2 reconstruction metrics on the full forget and retain sets."""
    model = model if isinstance(model, ToyModel) else task.model(model)
    c = task._cache
    out_f = model.forward(c["forget_in"])
    retain_err = _mean_dist(model.forward(c["retain_in"]), task.retain)
    base = task._cache.get("base_retain_err")
    if base is None:
        base = task._cache["base_retain_err"] = _mean_dist(c["retain_ref"], task.retain)
    return UnlearnMetrics(
        forget_err=_mean_dist(out_f, task.forget),
        retain_err=retain_err,
        noise_prox=_mean_dist(out_f, c["eval_targets"]),
        retain_degradation=retain_err - base,
    )
