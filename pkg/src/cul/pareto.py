"""Two-phase Pareto front construction.

Phase I finds the two extreme solutions (highest and lowest unlearning
completeness). Phase II sweeps the constraint level between them and solves
one constrained problem per level.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cul.errors import ConstraintViolation, InvalidArgument
from cul.objective import BiObjectiveProblem
from cul.optimizer import ControlFunction, Phase, StepConfig, Trajectory, run

# sweep granularities used by the experiments
QUARTER_FRACTIONS = (0.25, 0.5, 0.75)
FINE_FRACTIONS = (0.16, 0.32, 0.48, 0.64, 0.80)


class Boundary(str, enum.Enum):
    HIGHEST = "HighestCompleteness"
    LOWEST = "LowestCompleteness"


@dataclass
class BoundaryResult:
    theta_star: np.ndarray
    f1_at: float
    f2_at: float
    which: Boundary
    trajectory: Trajectory = field(default_factory=Trajectory, repr=False)


@dataclass
class FrontEntry:
    epsilon: float
    theta: np.ndarray
    f1: float
    f2: float
    trajectory: Trajectory = field(default_factory=Trajectory, repr=False)


@dataclass
class ParetoFront:
    entries: list[FrontEntry]
    boundaries: tuple[BoundaryResult, BoundaryResult]

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([e.epsilon for e in self.entries])

    def points(self) -> list[tuple[float, float]]:
        return [(e.f1, e.f2) for e in self.entries]


def solve_boundary_high(
    problem: BiObjectiveProblem,
    sc: StepConfig,
    alpha: float,
    delta: float,
    theta0,
    seed: int = 0,
) -> BoundaryResult:
    """Drive f1 to its infimum while keeping f2 as low as possible."""
    cf = ControlFunction.phase1(alpha=alpha, delta=delta)
    state, traj = run(problem, cf, sc, theta0, seed=seed)
    ev = problem.evaluate_full(state.theta)
    return BoundaryResult(state.theta, ev.f1, ev.f2, Boundary.HIGHEST, traj)


def solve_boundary_low(
    problem: BiObjectiveProblem,
    sc: StepConfig,
    alpha: float,
    delta: float,
    theta0,
    seed: int = 0,
) -> BoundaryResult:
    """Swapped problem: drive f2 to its infimum, then keep f1 low.

    The returned ``f1_at``/``f2_at`` refer to the original (unswapped) objectives.
    """
    cf = ControlFunction.phase1(alpha=alpha, delta=delta)
    state, traj = run(problem.swapped(), cf, sc, theta0, seed=seed)
    ev = problem.evaluate_full(state.theta)
    return BoundaryResult(state.theta, ev.f1, ev.f2, Boundary.LOWEST, traj)


def epsilon_grid(boundaries, fractions) -> list[float]:
    """Constraint levels at the given fractions of the open boundary range."""
    high, low = boundaries
    lo, hi = high.f1_at, low.f1_at
    if not lo < hi:
        raise InvalidArgument(f"degenerate front: f1 range [{lo}, {hi}] is empty")
    fr = [float(f) for f in fractions]
    if any(not 0 < f < 1 for f in fr):
        raise InvalidArgument("fractions must lie strictly inside (0, 1)")
    if any(b <= a for a, b in zip(fr, fr[1:])):
        raise InvalidArgument("fractions must be strictly increasing")
    return [lo + f * (hi - lo) for f in fr]


def sweep(
    problem: BiObjectiveProblem,
    sc: StepConfig,
    phase2_cf_template: ControlFunction,
    boundaries: tuple[BoundaryResult, BoundaryResult],
    fractions,
    *,
    tol: float | None = None,
    warm_start: bool = True,
    theta0=None,
    seed: int = 0,
    workers: int = 1,
) -> ParetoFront:
    """Solve the constrained problem at each epsilon on the grid.

    Warm start chains the runs, beginning from the highest-completeness
    solution. Cold start runs every level from ``theta0`` (default: that same
    boundary solution) and may use ``workers`` threads. A run that ends with
    ``f1 > eps + tol`` raises :class:`ConstraintViolation`.
    """
    if phase2_cf_template.phase is not Phase.II:
        raise InvalidArgument("sweep needs a Phase II control function template")
    high, low = boundaries
    if not high.f1_at < low.f1_at:
        return ParetoFront([], boundaries)
    grid = epsilon_grid(boundaries, fractions)
    if tol is None:
        tol = 0.01 * (low.f1_at - high.f1_at) if problem.stochastic else 1e-3
    start = high.theta_star if theta0 is None else np.asarray(theta0, dtype=np.float64)

    def solve(k: int, eps: float, init) -> FrontEntry:
        cf = phase2_cf_template.with_epsilon(eps)
        state, traj = run(problem, cf, sc, init, seed=seed + k)
        ev = problem.evaluate_full(state.theta)
        if ev.f1 > eps + tol:
            raise ConstraintViolation(f"f1={ev.f1:.6g} exceeds eps={eps:.6g} + tol={tol:.3g}", k)
        return FrontEntry(eps, state.theta, ev.f1, ev.f2, traj)

    entries: list[FrontEntry] = []
    if warm_start:
        init = start
        for k, eps in enumerate(grid):
            entry = solve(k, eps, init)
            entries.append(entry)
            init = entry.theta
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(solve, k, eps, start) for k, eps in enumerate(grid)]
            entries = [f.result() for f in futures]
    else:
        entries = [solve(k, eps, start) for k, eps in enumerate(grid)]
    return ParetoFront(entries, boundaries)


def dominates(p, q) -> bool:
    """True iff ``p`` is no worse than ``q`` in both objectives and better in one."""
    return p[0] <= q[0] and p[1] <= q[1] and (p[0] < q[0] or p[1] < q[1])


def filter_nondominated(points) -> list:
    """Points not dominated by any input point, in input order.

    Sorts by (f1, f2) and sweeps with a running minimum of f2, so it runs in
    O(n log n). Exact duplicates never dominate each other and are all kept.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    n = len(pts)
    if n == 0:
        return []
    order = sorted(range(n), key=lambda i: pts[i])
    keep = [False] * n
    best_f2 = np.inf  # min f2 among points with strictly smaller f1
    i = 0
    while i < n:
        j = i
        f1 = pts[order[i]][0]
        while j < n and pts[order[j]][0] == f1:
            j += 1
        group_min = pts[order[i]][1]  # group is sorted by f2
        for k in range(i, j):
            f2 = pts[order[k]][1]
            # dominated by a smaller-f1 point with f2 <= ours, or a same-f1 point with smaller f2
            keep[order[k]] = not (best_f2 <= f2 or group_min < f2)
        best_f2 = min(best_f2, group_min)
        i = j
    return [points[i] for i in range(n) if keep[i]]
