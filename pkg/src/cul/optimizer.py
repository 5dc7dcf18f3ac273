"""Gradient-based epsilon-constrained solver.

Each step solves the per-iteration QP

    min_g |grad f2 - g|^2   s.t.   grad f1 . g >= psi(theta)

in closed form through its dual, then moves ``theta <- theta - mu * g``.
Descent uses the minus sign: ``g`` is a projection of ``grad f2``, so adding it
would ascend the utility objective.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from cul.errors import InvalidArgument, NumericFailure
from cul.numerics import as_param_vector
from cul.objective import BiObjectiveProblem, ObjectiveEval

log = logging.getLogger(__name__)


class Phase(str, enum.Enum):
    I = "PhaseI"  # noqa: E741
    II = "PhaseII"


def _is_odd_integer(x: float) -> bool:
    return float(x).is_integer() and int(x) % 2 == 1


@dataclass(frozen=True)
class ControlFunction:
    """Control function steering the QP constraint force.

    Phase I: ``alpha * |grad f1|^delta`` (always nonnegative).
    Phase II: ``beta * (f1 - epsilon)^delta``, times ``|grad f1|^2`` when
    ``scaled``. Phase II needs an odd integer ``delta`` so the output keeps the
    sign of ``f1 - epsilon``.
    """

    phase: Phase
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 2.0
    scaled: bool = False
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        self.validate()

    def validate(self) -> None:
        if self.phase is Phase.I:
            if not self.alpha > 0:
                raise InvalidArgument(f"alpha must be positive, got {self.alpha}")
            if not self.delta >= 1:
                raise InvalidArgument(f"Phase I needs delta >= 1, got {self.delta}")
        else:
            if not self.beta > 0:
                raise InvalidArgument(f"beta must be positive, got {self.beta}")
            if not _is_odd_integer(self.delta) or self.delta < 1:
                raise InvalidArgument(
                    f"Phase II needs an odd integer delta, got {self.delta}"
                )
            if not math.isfinite(self.epsilon):
                raise InvalidArgument("epsilon must be finite")

    @classmethod
    def phase1(cls, alpha: float = 1.0, delta: float = 2.0) -> ControlFunction:
        return cls(Phase.I, alpha=alpha, delta=delta)

    @classmethod
    def phase2(
        cls, epsilon: float, beta: float = 1.0, delta: int = 1, scaled: bool = True
    ) -> ControlFunction:
        return cls(Phase.II, beta=beta, delta=delta, scaled=scaled, epsilon=epsilon)

    def with_epsilon(self, epsilon: float) -> ControlFunction:
        return replace(self, epsilon=float(epsilon))


def control_value(cf: ControlFunction, f1: float, norm_grad_f1: float) -> float:
    cf.validate()
    if cf.phase is Phase.I:
        return cf.alpha * norm_grad_f1**cf.delta
    gap = f1 - cf.epsilon
    # odd integer power keeps sign(psi) == sign(f1 - eps)
    psi = cf.beta * math.copysign(abs(gap) ** int(cf.delta), gap) if gap != 0 else 0.0
    if cf.scaled:
        psi *= norm_grad_f1**2
    return psi


def dual_multiplier(grad_f1, grad_f2, psi: float, omega: float) -> float:
    """Closed-form multiplier of the per-step QP, clipped at zero."""
    grad_f1 = np.asarray(grad_f1, dtype=np.float64)
    grad_f2 = np.asarray(grad_f2, dtype=np.float64)
    if grad_f1.shape != grad_f2.shape:
        raise InvalidArgument("gradient lengths differ")
    numer = psi - float(grad_f2 @ grad_f1)
    denom = float(grad_f1 @ grad_f1) + omega
    if denom == 0.0:
        # grad f1 = 0 with no regularizer: the QP is infeasible iff psi > 0
        return 0.0 if numer <= 0 else math.inf
    return max(numer / denom, 0.0)


def update_direction(grad_f1, grad_f2, eta: float) -> np.ndarray:
    grad_f1 = np.asarray(grad_f1, dtype=np.float64)
    grad_f2 = np.asarray(grad_f2, dtype=np.float64)
    if grad_f1.shape != grad_f2.shape:
        raise InvalidArgument("gradient lengths differ")
    if eta == 0.0:
        return grad_f2.copy()
    return grad_f2 + eta * grad_f1


@dataclass(frozen=True)
class StepConfig:
    """Step-loop settings.

    ``precondition`` turns on an Adam-style coordinatewise rescaling of ``g`` by
    a running second-moment estimate (decay ``precond_beta2``). It is off by
    default; the convergence results only cover the plain update.
    """

    step_size: float = 1e-4
    max_iters: int = 1000
    grad_tol: float = 1e-6
    omega: float = 1e-7
    eta_warn: float = 1e6
    precondition: bool = False
    precond_beta2: float = 0.95
    record_time: bool = False

    def __post_init__(self):
        if not self.step_size >= 0 or not math.isfinite(self.step_size):
            raise InvalidArgument(f"step_size must be a nonnegative finite real, got {self.step_size}")
        if not self.omega > 0:
            raise InvalidArgument(f"omega must be positive, got {self.omega}")
        if self.max_iters < 0:
            raise InvalidArgument("max_iters must be nonnegative")
        if not self.grad_tol >= 0:
            raise InvalidArgument("grad_tol must be nonnegative")
        if not 0 < self.precond_beta2 < 1:
            raise InvalidArgument("precond_beta2 must lie in (0, 1)")


@dataclass(frozen=True)
class OptimizerState:
    theta: np.ndarray
    iter: int = 0
    second_moment: np.ndarray | None = None


@dataclass(frozen=True)
class TrajectoryRecord:
    iter: int
    f1: float
    f2: float
    norm_grad_f1: float
    norm_g: float
    eta: float
    psi: float
    wall_ms: int = 0


FIELDS = ("iter", "f1", "f2", "norm_grad_f1", "norm_g", "eta", "psi", "wall_ms")


@dataclass
class Trajectory:
    records: list[TrajectoryRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, rec: TrajectoryRecord) -> None:
        if self.records and rec.iter <= self.records[-1].iter:
            raise InvalidArgument("trajectory iterations must increase")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        if name not in FIELDS:
            raise InvalidArgument(f"unknown trajectory column {name!r}")
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def max_eta(self) -> float:
        return max((r.eta for r in self.records), default=0.0)


@dataclass(frozen=True)
class _Direction:
    ev: ObjectiveEval
    psi: float
    eta: float
    g: np.ndarray


def _direction(
    state: OptimizerState,
    problem: BiObjectiveProblem,
    cf: ControlFunction,
    sc: StepConfig,
    seed: int,
) -> _Direction:
    ev = problem.eval_fn(state.theta, (seed, state.iter))
    if not ev.is_finite():
        raise NumericFailure("nonfinite objective or gradient", iteration=state.iter)
    norm1 = float(np.linalg.norm(ev.grad_f1))
    psi = control_value(cf, ev.f1, norm1)
    eta = dual_multiplier(ev.grad_f1, ev.grad_f2, psi, sc.omega)
    g = update_direction(ev.grad_f1, ev.grad_f2, eta)
    if not (math.isfinite(psi) and math.isfinite(eta) and np.all(np.isfinite(g))):
        raise NumericFailure("nonfinite update direction", iteration=state.iter)
    return _Direction(ev, psi, eta, g)


def _advance(state: OptimizerState, d: _Direction, sc: StepConfig) -> OptimizerState:
    g = d.g
    moment = state.second_moment
    if sc.precondition:
        b2 = sc.precond_beta2
        moment = (b2 * moment if moment is not None else 0.0) + (1 - b2) * g * g
        bias = 1 - b2 ** (state.iter + 1)
        g = g / (np.sqrt(moment / bias) + 1e-8)
    theta = state.theta if sc.step_size == 0 else state.theta - sc.step_size * g
    if not np.all(np.isfinite(theta)):
        raise NumericFailure("parameters became nonfinite", iteration=state.iter)
    return OptimizerState(theta=theta, iter=state.iter + 1, second_moment=moment)


def _record(state: OptimizerState, d: _Direction, wall_ms: int) -> TrajectoryRecord:
    return TrajectoryRecord(
        iter=state.iter,
        f1=float(d.ev.f1),
        f2=float(d.ev.f2),
        norm_grad_f1=float(np.linalg.norm(d.ev.grad_f1)),
        norm_g=float(np.linalg.norm(d.g)),
        eta=float(d.eta),
        psi=float(d.psi),
        wall_ms=wall_ms,
    )


def step(
    state: OptimizerState,
    problem: BiObjectiveProblem,
    cf: ControlFunction,
    sc: StepConfig,
    seed: int = 0,
) -> tuple[OptimizerState, TrajectoryRecord]:
    """One iteration: evaluate, solve the dual, move along ``-g``."""
    if state.theta.shape != (problem.dim,):
        raise InvalidArgument(f"theta has shape {state.theta.shape}, problem dim is {problem.dim}")
    t0 = time.perf_counter() if sc.record_time else 0.0
    d = _direction(state, problem, cf, sc, seed)
    new_state = _advance(state, d, sc)
    wall = int(round((time.perf_counter() - t0) * 1000)) if sc.record_time else 0
    return new_state, _record(state, d, wall)


def run(
    problem: BiObjectiveProblem,
    cf: ControlFunction,
    sc: StepConfig,
    theta0,
    seed: int = 0,
) -> tuple[OptimizerState, Trajectory]:
    """Iterate until ``max_iters`` records or ``|g| < grad_tol``.

    When the tolerance triggers, the final record is kept and ``theta`` is left
    where ``g`` was measured.
    """
    state = OptimizerState(theta=as_param_vector(theta0, problem.dim, "theta0"))
    traj = Trajectory()
    warned = False
    for _ in range(sc.max_iters):
        t0 = time.perf_counter() if sc.record_time else 0.0
        d = _direction(state, problem, cf, sc, seed)
        converged = float(np.linalg.norm(d.g)) < sc.grad_tol
        next_state = state if converged else _advance(state, d, sc)
        wall = int(round((time.perf_counter() - t0) * 1000)) if sc.record_time else 0
        traj.append(_record(state, d, wall))
        if d.eta > sc.eta_warn and not warned:
            log.warning("dual multiplier %.3g exceeds %.3g at iteration %d", d.eta, sc.eta_warn, state.iter)
            warned = True
        if converged:
            break
        state = next_state
    return state, traj
