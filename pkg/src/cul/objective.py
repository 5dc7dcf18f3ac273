"""Bi-objective problem abstraction and the analytic quadratic suite.

A :class:`BiObjectiveProblem` maps a flat parameter vector to both objective
values and their gradients. ``f1`` is the constrained (unlearning) objective and
``f2`` the utility objective being minimized.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from cul.errors import InvalidArgument, NumericFailure, OutOfRange
from cul.numerics import as_param_vector


@dataclass(frozen=True)
class ObjectiveEval:
    f1: float
    f2: float
    grad_f1: np.ndarray
    grad_f2: np.ndarray

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.f1)
            and np.isfinite(self.f2)
            and np.all(np.isfinite(self.grad_f1))
            and np.all(np.isfinite(self.grad_f2))
        )

    def swapped(self) -> ObjectiveEval:
        return ObjectiveEval(self.f2, self.f1, self.grad_f2, self.grad_f1)


EvalFn = Callable[[np.ndarray, int], ObjectiveEval]


@dataclass(frozen=True)
class BiObjectiveProblem:
    """Pair of differentiable objectives over ``R^dim``.

    ``eval_fn(theta, seed)`` must be deterministic in its arguments. ``full_fn``
    evaluates on the complete data (defaults to ``eval_fn`` with seed 0); it
    only differs from ``eval_fn`` for minibatched problems.
    """

    name: str
    dim: int
    eval_fn: EvalFn
    full_fn: EvalFn | None = None
    stochastic: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def evaluate(self, theta, seed: int = 0) -> ObjectiveEval:
        theta = as_param_vector(theta, self.dim)
        return self.eval_fn(theta, seed)

    def evaluate_full(self, theta) -> ObjectiveEval:
        theta = as_param_vector(theta, self.dim)
        fn = self.full_fn if self.full_fn is not None else self.eval_fn
        return fn(theta, 0)

    def swapped(self) -> BiObjectiveProblem:
        """The same problem with the roles of f1 and f2 exchanged."""
        full = self.full_fn
        return BiObjectiveProblem(
            name=f"{self.name}:swapped",
            dim=self.dim,
            eval_fn=lambda th, s: self.eval_fn(th, s).swapped(),
            full_fn=None if full is None else (lambda th, s: full(th, s).swapped()),
            stochastic=self.stochastic,
            meta=self.meta,
        )


@dataclass(frozen=True)
class QuadraticPair:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_param_vector(self.a, name="a")
        b = as_param_vector(self.b, name="b")
        if a.shape != b.shape:
            raise InvalidArgument(f"a and b differ in length ({a.size} vs {b.size})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def gap(self) -> float:
        """Squared distance between the two minimizers."""
        return float(np.sum((self.a - self.b) ** 2))


def make_quadratic_pair(a, b) -> BiObjectiveProblem:
    """f1 = |theta - a|^2, f2 = |theta - b|^2 with exact gradients."""
    pair = QuadraticPair(a, b)

    def eval_fn(theta: np.ndarray, seed: int = 0) -> ObjectiveEval:
        da = theta - pair.a
        db = theta - pair.b
        return ObjectiveEval(float(da @ da), float(db @ db), 2.0 * da, 2.0 * db)

    return BiObjectiveProblem(name="quad", dim=pair.a.size, eval_fn=eval_fn, meta={"pair": pair})


def quadratic_front_oracle(pair: QuadraticPair, f1_value: float) -> float:
    """Minimal f2 attainable with f1 equal to ``f1_value``: (|a-b| - sqrt(f1))^2."""
    gap = pair.gap
    if not (0.0 <= f1_value <= gap):
        raise OutOfRange(f"f1_value {f1_value} outside [0, {gap}]")
    return float((np.sqrt(gap) - np.sqrt(f1_value)) ** 2)


def finite_difference_grad(problem: BiObjectiveProblem, theta, h: float = 1e-5, seed: int = 0):
    """Central-difference gradients of f1 and f2, one coordinate at a time."""
    if not h > 0:
        raise InvalidArgument("h must be positive")
    theta = as_param_vector(theta, problem.dim)
    g1 = np.empty_like(theta)
    g2 = np.empty_like(theta)
    probe = theta.copy()
    for i in range(theta.size):
        probe[i] = theta[i] + h
        plus = problem.eval_fn(probe, seed)
        probe[i] = theta[i] - h
        minus = problem.eval_fn(probe, seed)
        probe[i] = theta[i]
        vals = (plus.f1, plus.f2, minus.f1, minus.f2)
        if not all(np.isfinite(v) for v in vals):
            raise NumericFailure(f"nonfinite objective at coordinate {i}")
        g1[i] = (plus.f1 - minus.f1) / (2 * h)
        g2[i] = (plus.f2 - minus.f2) / (2 * h)
    return g1, g2


_REGISTRY: dict[str, Callable[..., BiObjectiveProblem]] = {}


def register_problem(name: str, factory: Callable[..., BiObjectiveProblem]) -> None:
    _REGISTRY[name] = factory


def get_problem(name: str, **kwargs) -> BiObjectiveProblem:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise InvalidArgument(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**kwargs)


def registered_problems() -> list[str]:
    return sorted(_REGISTRY)


register_problem("quad", lambda a=(0.0, 0.0), b=(1.0, 0.0): make_quadratic_pair(a, b))
