"""Toy image-to-image unlearning task."""

from cul.unlearn.baselines import BaselineKind, baseline_step, run_baseline
from cul.unlearn.data import (
    CropPattern,
    CropSpec,
    Split,
    ToyImage,
    build_dataset,
    build_holdout,
    crop,
    crop_batch,
    stack,
    substitute_proxy_retain,
)
from cul.unlearn.model import DEFAULT_SIZES, ToyModel, init_model, pretrain, relative_error
from cul.unlearn.task import (
    NoiseMode,
    UnlearnMetrics,
    UnlearnTask,
    evaluate,
    full_objectives,
    make_task,
    make_unlearn_problem,
    unlearn_objectives,
)


def forward(model: ToyModel, image: ToyImage) -> ToyImage:
    """Reconstruct one (already masked) image."""
    h, w = image.pixels.shape
    out = model.forward(image.flat)[0].reshape(h, w)
    return ToyImage(out, image.class_id, image.split)


__all__ = [
    "BaselineKind",
    "CropPattern",
    "CropSpec",
    "DEFAULT_SIZES",
    "NoiseMode",
    "Split",
    "ToyImage",
    "ToyModel",
    "UnlearnMetrics",
    "UnlearnTask",
    "baseline_step",
    "build_dataset",
    "build_holdout",
    "crop",
    "crop_batch",
    "evaluate",
    "forward",
    "full_objectives",
    "init_model",
    "make_task",
    "make_unlearn_problem",
    "pretrain",
    "relative_error",
    "run_baseline",
    "stack",
    "substitute_proxy_retain",
    "unlearn_objectives",
]
