import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cul.errors import InvalidArgument
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


def test_small_dataset_shapes_and_means():
    forget, retain = build_dataset(2, 4, seed=0)
    assert len(forget) == len(retain) == 4
    for im in forget + retain:
        assert im.pixels.shape == (16, 16)
        assert abs(im.pixels.mean()) < 1e-9
        assert np.abs(im.pixels).max() <= 1.0
    assert {im.split for im in forget} == {Split.FORGET}
    assert {im.class_id for im in forget}.isdisjoint({im.class_id for im in retain})


def test_dataset_is_deterministic():
    a = stack(sum(build_dataset(4, 3, seed=9), []))
    b = stack(sum(build_dataset(4, 3, seed=9), []))
    assert a.tobytes() == b.tobytes()
    c = stack(sum(build_dataset(4, 3, seed=10), []))
    assert not np.array_equal(a, c)


def test_nearest_centroid_accuracy():
    forget, retain = build_dataset(8, 32, seed=0)
    images = forget + retain
    x, y = stack(images), np.array([im.class_id for im in images])
    # class templates from the first half, classify the second half
    train = np.concatenate([np.flatnonzero(y == c)[:16] for c in range(8)])
    test = np.setdiff1d(np.arange(len(y)), train)
    centroids = np.stack([x[train][y[train] == c].mean(axis=0) for c in range(8)])
    dist = ((x[test][:, None, :] - centroids[None]) ** 2).sum(axis=2)
    assert np.mean(dist.argmin(axis=1) == y[test]) >= 0.95


@pytest.mark.parametrize("n,per", [(3, 4), (0, 4), (2, 1)])
def test_dataset_rejects_bad_sizes(n, per):
    with pytest.raises(InvalidArgument):
        build_dataset(n, per)


def test_center_crop_4x4():
    img = ToyImage(np.arange(1.0, 17.0).reshape(4, 4), 0, Split.FORGET)
    out = crop(img, CropSpec(CropPattern.CENTER, 0.25)).pixels
    assert np.array_equal(out[1:3, 1:3], np.zeros((2, 2)))
    assert np.count_nonzero(out == img.pixels) == 12


def test_center_crop_half_of_16x16():
    mask = CropSpec(CropPattern.CENTER, 0.5).mask(16)
    assert int(np.sum(mask == 0)) == 128


@pytest.mark.parametrize("pattern", list(CropPattern))
def test_tiny_ratio_zeroes_at_most_one_pixel(pattern):
    spec = CropSpec(pattern, 1.0 / (3 * 256))
    zeroed = np.sum(spec.mask(16) == 0)
    if pattern is CropPattern.KEEP_CENTER:
        assert zeroed >= 255  # keeps almost nothing
    else:
        assert zeroed <= 1


@settings(max_examples=60, deadline=None)
@given(
    pattern=st.sampled_from([p for p in CropPattern if p is not CropPattern.KEEP_CENTER]),
    ratio=st.floats(0.01, 0.99),
    h=st.integers(2, 20),
    w=st.integers(2, 20),
)
def test_crop_count_matches_brute_force(pattern, ratio, h, w):
    mask = CropSpec(pattern, ratio).mask(h, w)
    assert int(np.sum(mask == 0)) == int(round(ratio * h * w))
    assert set(np.unique(mask)) <= {0.0, 1.0}


def test_directional_crops():
    top = CropSpec(CropPattern.TOP, 0.25).mask(4).reshape(4, 4)
    assert np.all(top[0] == 0) and np.all(top[1:] == 1)
    right = CropSpec(CropPattern.RIGHT, 0.25).mask(4).reshape(4, 4)
    assert np.all(right[:, 3] == 0) and np.all(right[:, :3] == 1)


def test_keep_center_keeps_middle():
    keep = CropSpec(CropPattern.KEEP_CENTER, 0.25).mask(4).reshape(4, 4)
    assert np.all(keep[1:3, 1:3] == 1) and keep.sum() == 4


def test_crop_batch_matches_single_crop():
    forget, _ = build_dataset(2, 3, seed=1)
    spec = CropSpec(CropPattern.RANDOM_MASK, 0.3, seed=4)
    batch = crop_batch(stack(forget), spec, 16)
    assert np.array_equal(batch[1], crop(forget[1], spec).flat)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2])
def test_crop_rejects_bad_ratio(ratio):
    with pytest.raises(InvalidArgument):
        CropSpec(CropPattern.CENTER, ratio)


def test_proxy_retain_substitution():
    _, retain = build_dataset(4, 4, seed=2)
    holdout = build_holdout(2, 4, first_class=4, seed=2)
    mixed = substitute_proxy_retain(retain, holdout, 0.5, seed=2)
    assert len(mixed) == len(retain)
    assert sum(im.split is Split.HOLDOUT for im in mixed) == 4
    assert substitute_proxy_retain(retain, holdout, 0.0) == retain
    with pytest.raises(InvalidArgument):
        substitute_proxy_retain(retain, holdout[:1], 0.5)
