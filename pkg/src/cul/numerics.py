"""Deterministic numeric substrate.

Parameter vectors are plain 1-D ``float64`` numpy arrays. All randomness in the
package flows through :func:`make_rng`, which wraps numpy's PCG64 bit generator
seeded from a :class:`numpy.random.SeedSequence`. Passing a tuple of integers
(e.g. ``(seed, iteration)``) derives independent, reproducible streams.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from cul.errors import InvalidArgument

SeedLike = int | Sequence[int]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (an int or a tuple of ints)."""
    if isinstance(seed, (int, np.integer)):
        entropy: int | list[int] = int(seed) & 0xFFFFFFFFFFFFFFFF
    else:
        entropy = [int(s) & 0xFFFFFFFFFFFFFFFF for s in seed]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_param_vector(values, dim: int | None = None, name: str = "theta") -> np.ndarray:
    """Validate and copy ``values`` into a finite 1-D float64 array."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise InvalidArgument(f"{name} has length {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} contains nonfinite entries")
    return arr


def as_diag_covariance(values) -> np.ndarray:
    cov = np.array(values, dtype=np.float64).reshape(-1)
    if cov.size == 0:
        raise InvalidArgument("covariance must be nonempty")
    if not np.all(np.isfinite(cov)) or np.any(cov < 0):
        raise InvalidArgument("covariance entries must be finite and nonnegative")
    return cov


def sample_gaussian(dim: int, cov, seed: SeedLike, n: int | None = None) -> np.ndarray:
    """Draw zero-mean Gaussian vectors with diagonal covariance ``cov``.

    Returns a single vector of length ``dim``, or an ``(n, dim)`` array when
    ``n`` is given. The output is a pure function of ``(dim, cov, seed, n)``.
    """
    if dim <= 0:
        raise InvalidArgument("dim must be positive")
    cov = as_diag_covariance(cov)
    if cov.shape[0] != dim:
        raise InvalidArgument(f"covariance has length {cov.shape[0]}, expected {dim}")
    shape = (dim,) if n is None else (n, dim)
    z = make_rng(seed).standard_normal(shape)
    return z * np.sqrt(cov)


def estimate_covariance(samples) -> np.ndarray:
    """Per-coordinate unbiased sample variance about the sample mean."""
    try:
        data = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise InvalidArgument("samples must be equal-length vectors") from exc
    if data.ndim == 0 or data.shape[0] < 2:
        raise InvalidArgument("estimate_covariance needs at least 2 samples")
    data = data.reshape(data.shape[0], -1)
    return data.var(axis=0, ddof=1)
