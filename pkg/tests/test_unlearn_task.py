import numpy as np
import pytest

from cul.errors import InvalidArgument
from cul.objective import finite_difference_grad
from cul.unlearn.data import CropSpec, build_dataset, stack
from cul.unlearn.model import init_model
from cul.unlearn.task import (
    NoiseMode,
    evaluate,
    full_objectives,
    make_task,
    make_unlearn_problem,
    unlearn_objectives,
)


@pytest.mark.parametrize("mode", list(NoiseMode))
def test_original_has_zero_retain_objective(small_task, mode):
    task = make_task(small_task.original, *_images(), small_task.crop, batch=2, noise_mode=mode)
    ev = unlearn_objectives(task, task.original, (0, 3))
    assert ev.f2 == 0.0
    assert np.array_equal(ev.grad_f2, np.zeros(task.dim))


def _images():
    return build_dataset(2, 4, seed=3, size=4)


def test_gradients_match_finite_differences(small_task):
    prob = make_unlearn_problem(small_task)
    rng = np.random.default_rng(0)
    for draw in range(3):
        theta = small_task.original.flatten() + 0.3 * rng.standard_normal(prob.dim)
        key = (draw, 1)
        ev = prob.evaluate(theta, key)
        g1, g2 = finite_difference_grad(prob, theta, h=1e-6, seed=key)
        assert np.linalg.norm(ev.grad_f1 - g1) / np.linalg.norm(g1) < 1e-4
        assert np.linalg.norm(ev.grad_f2 - g2) / np.linalg.norm(g2) < 1e-4


def test_two_layer_model_gradients():
    forget, retain = build_dataset(2, 4, seed=5, size=4)
    task = make_task(init_model((16, 16), seed=5), forget, retain, CropSpec("Center", 0.25), batch=3)
    prob = make_unlearn_problem(task)
    theta = init_model((16, 16), seed=6).flatten()
    ev = prob.evaluate(theta, (0, 0))
    g1, g2 = finite_difference_grad(prob, theta, h=1e-6, seed=(0, 0))
    assert np.linalg.norm(ev.grad_f1 - g1) / np.linalg.norm(g1) < 1e-4
    assert np.linalg.norm(ev.grad_f2 - g2) / np.linalg.norm(g2) < 1e-4


def test_batches_are_deterministic_and_epoch_permuted(small_task):
    a = small_task.batch_indices((1, 0))
    b = small_task.batch_indices((1, 0))
    assert np.array_equal(a[0], b[0]) and a[2] == b[2]
    # within one epoch the forget batches partition the set
    spe = small_task.steps_per_epoch
    rows = np.concatenate([small_task.batch_indices((1, k))[0] for k in range(spe)])
    assert sorted(rows) == list(range(len(small_task.forget)))


def test_noise_targets_vary_per_step(small_task):
    a = unlearn_objectives(small_task, small_task.original, (0, 0)).f1
    b = unlearn_objectives(small_task, small_task.original, (0, 1)).f1
    assert a != b


def test_full_objectives_use_whole_sets(small_task):
    ev = full_objectives(small_task, small_task.original)
    assert ev.f2 == 0.0 and ev.f1 > 0


def test_batch_larger_than_set_rejected(small_task):
    with pytest.raises(InvalidArgument):
        make_task(small_task.original, *_images(), small_task.crop, batch=10)


def test_shared_class_rejected(small_task):
    forget, _ = _images()
    with pytest.raises(InvalidArgument):
        make_task(small_task.original, forget, forget, small_task.crop, batch=2)


def test_collapsed_variance_falls_back_to_identity(small_task):
    forget, retain = _images()
    flat = [type(im)(np.zeros_like(im.pixels), im.class_id, im.split) for im in forget]
    task = make_task(small_task.original, flat, retain, small_task.crop, batch=2)
    assert np.array_equal(task.sigma, np.ones(16))


def test_covariance_comes_from_forget_set(small_task):
    assert np.allclose(small_task.sigma, stack(_images()[0]).var(axis=0, ddof=1))


def test_evaluate_original_has_no_degradation(small_task):
    assert evaluate(small_task.original, small_task).retain_degradation == 0.0


def test_zero_output_forget_error(small_task):
    zero = small_task.original.copy()
    zero.weights[-1][:] = 0.0
    zero.biases[-1][:] = 0.0
    m = evaluate(zero, small_task)
    assert m.forget_err == pytest.approx(np.mean(np.linalg.norm(small_task.forget, axis=1)))
