"""End-to-end pipelines shared by the command line and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cul.diagnostics import rate_exponent, running_min
from cul.errors import InvalidArgument
from cul.objective import BiObjectiveProblem, make_quadratic_pair
from cul.optimizer import ControlFunction, StepConfig, Trajectory, run
from cul.pareto import BoundaryResult, ParetoFront, solve_boundary_high, solve_boundary_low, sweep
from cul.persistence import ResultRow
from cul.unlearn.baselines import BaselineKind, run_baseline
from cul.unlearn.data import (
    CropSpec,
    build_dataset,
    build_holdout,
    crop_batch,
    stack,
    substitute_proxy_retain,
)
from cul.unlearn.model import ToyModel, pretrain
from cul.unlearn.task import UnlearnMetrics, UnlearnTask, evaluate, make_task, make_unlearn_problem


@dataclass
class Setup:
    problem: BiObjectiveProblem
    theta0: np.ndarray
    task: UnlearnTask | None = None


def step_config(cfg: dict, steps_per_epoch: int = 1, mu_key: str = "step.mu") -> StepConfig:
    epochs = cfg.get("step.epochs")
    max_iters = int(epochs) * steps_per_epoch if epochs else int(cfg["step.max_iters"])
    return StepConfig(
        step_size=float(cfg[mu_key]),
        max_iters=max_iters,
        grad_tol=float(cfg["step.grad_tol"]),
        omega=float(cfg["step.omega"]),
        precondition=bool(cfg["step.precondition"]),
        record_time=bool(cfg.get("timing", False)),
    )


def build_original(cfg: dict) -> tuple[ToyModel, list, list]:
    """Dataset plus the pretrained original model (or one loaded from a checkpoint)."""
    from cul.persistence import load_checkpoint

    seed = int(cfg["seed"])
    forget, retain = build_dataset(int(cfg["task.classes"]), int(cfg["task.per_class"]), seed, int(cfg["task.size"]))
    crop = CropSpec(cfg["task.crop"], float(cfg["task.crop_ratio"]), seed)
    path = cfg.get("task.checkpoint")
    if path:
        original = load_checkpoint(path)
    else:
        x = np.concatenate([stack(forget), stack(retain)])
        size = int(cfg["task.size"])
        original = pretrain(
            x,
            lambda b: crop_batch(b, crop, size),
            sizes=tuple(cfg["task.arch"]),
            epochs=int(cfg["task.pretrain_epochs"]),
            seed=seed,
        )
    return original, forget, retain


def toy_setup(cfg: dict) -> Setup:
    original, forget, retain = build_original(cfg)
    seed = int(cfg["seed"])
    frac = float(cfg["task.proxy_retain_fraction"])
    if frac > 0:
        n_classes = int(cfg["task.classes"])
        holdout = build_holdout(
            n_classes // 2, int(cfg["task.per_class"]), n_classes, seed, int(cfg["task.size"])
        )
        retain = substitute_proxy_retain(retain, holdout, frac, seed)
    crop = CropSpec(cfg["task.crop"], float(cfg["task.crop_ratio"]), seed)
    task = make_task(original, forget, retain, crop, int(cfg["task.batch"]), cfg["task.noise_mode"])
    return Setup(make_unlearn_problem(task), original.flatten(), task)


def quad_setup(cfg: dict) -> Setup:
    problem = make_quadratic_pair(cfg["quad.a"], cfg["quad.b"])
    theta0 = np.asarray(cfg["quad.theta0"], dtype=np.float64)
    if theta0.shape != (problem.dim,):
        raise InvalidArgument(f"quad.theta0 has length {theta0.size}, problem dim is {problem.dim}")
    return Setup(problem, theta0)


def make_setup(cfg: dict) -> Setup:
    name = cfg["problem"]
    if name == "quad":
        return quad_setup(cfg)
    if name == "unlearn-toy":
        return toy_setup(cfg)
    raise InvalidArgument(f"unknown problem {name!r}")


def _spe(setup: Setup) -> int:
    return setup.task.steps_per_epoch if setup.task is not None else 1


def boundaries(setup: Setup, cfg: dict) -> tuple[BoundaryResult, BoundaryResult]:
    sc = step_config(cfg, _spe(setup))
    alpha, delta, seed = float(cfg["phase1.alpha"]), float(cfg["phase1.delta"]), int(cfg["seed"])
    high = solve_boundary_high(setup.problem, sc, alpha, delta, setup.theta0, seed=seed)
    low = solve_boundary_low(setup.problem, sc, alpha, delta, setup.theta0, seed=seed)
    return high, low


def phase2_template(cfg: dict) -> ControlFunction:
    return ControlFunction.phase2(
        0.0, beta=float(cfg["phase2.beta"]), delta=int(cfg["phase2.delta"]), scaled=bool(cfg["phase2.scaled"])
    )


def front(setup: Setup, cfg: dict, bounds=None, workers: int = 1) -> ParetoFront:
    bounds = bounds if bounds is not None else boundaries(setup, cfg)
    tol = cfg.get("sweep.tol")
    warm = bool(cfg["sweep.warm_start"])
    # cold start solves every level from the initial point
    return sweep(
        setup.problem,
        step_config(cfg, _spe(setup)),
        phase2_template(cfg),
        bounds,
        cfg["sweep.fractions"],
        tol=None if tol is None else float(tol),
        warm_start=warm,
        theta0=None if warm else setup.theta0,
        seed=int(cfg["seed"]),
        workers=workers,
    )


def summary_row(phase: str, epsilon, f1: float, f2: float, traj: Trajectory) -> ResultRow:
    """One row for a finished run: full-data objectives plus the last step's diagnostics."""
    last = traj.records[-1] if len(traj) else None
    return ResultRow(
        phase=phase,
        epsilon=epsilon,
        iter=len(traj),
        f1=f1,
        f2=f2,
        grad_f1_norm=last.norm_grad_f1 if last else 0.0,
        g_norm=last.norm_g if last else 0.0,
        eta=last.eta if last else 0.0,
        psi=last.psi if last else 0.0,
        wall_ms=sum(r.wall_ms for r in traj),
    )


def front_rows(fr: ParetoFront) -> list[ResultRow]:
    high, low = fr.boundaries
    rows = [summary_row("boundary-high", None, high.f1_at, high.f2_at, high.trajectory)]
    rows += [summary_row("sweep", e.epsilon, e.f1, e.f2, e.trajectory) for e in fr.entries]
    rows.append(summary_row("boundary-low", None, low.f1_at, low.f2_at, low.trajectory))
    return rows


@dataclass(frozen=True)
class RateResult:
    delta: float
    slope_grad_f1: float
    slope_g: float
    final_grad_f1: float
    trajectory: Trajectory

    @property
    def target_grad_f1(self) -> float:
        return -1.0 / self.delta

    @property
    def target_g(self) -> float:
        return -(0.5 - 0.5 / self.delta)


def fit_slope(traj: Trajectory, column: str, window: float) -> float:
    """Fitted exponent; ``-inf`` when the running minimum hits exactly zero."""
    t = traj.column("iter") + 1.0
    v = traj.column(column)
    if len(v) and running_min(v)[-1] == 0.0:
        return float("-inf")
    return rate_exponent(np.column_stack([t, v]), window)


def rate_study(
    problem: BiObjectiveProblem,
    theta0,
    deltas,
    alpha: float,
    sc: StepConfig,
    window: float = 0.5,
    seed: int = 0,
) -> list[RateResult]:
    """Phase I runs for each exponent with fitted running-min slopes."""
    out = []
    for delta in deltas:
        _, traj = run(problem, ControlFunction.phase1(alpha, float(delta)), sc, theta0, seed=seed)
        out.append(
            RateResult(
                float(delta),
                fit_slope(traj, "norm_grad_f1", window),
                fit_slope(traj, "norm_g", window),
                float(running_min(traj.column("norm_grad_f1"))[-1]),
                traj,
            )
        )
    return out


def compare_baselines(setup: Setup, cfg: dict) -> list[tuple[str, UnlearnMetrics]]:
    """Original model, the four baselines and Phase I unlearning on the toy task."""
    task = setup.task
    if task is None:
        raise InvalidArgument("baselines need the unlearn-toy problem")
    seed = int(cfg["seed"])
    epochs = int(cfg["step.epochs"] or 5)
    mu = float(cfg["baselines.mu"] if cfg.get("baselines.mu") is not None else cfg["step.mu"])
    results = [("Original", evaluate(task.original, task))]
    for kind in BaselineKind:
        model = run_baseline(
            kind, task, mu, epochs, float(cfg["baselines.lambda"]), float(cfg["baselines.noise_std"]), seed
        )
        results.append((kind.value, evaluate(model, task)))
    high = solve_boundary_high(
        setup.problem,
        step_config(cfg, task.steps_per_epoch),
        float(cfg["phase1.alpha"]),
        float(cfg["phase1.delta"]),
        setup.theta0,
        seed=seed,
    )
    results.append(("Ours (Phase I)", evaluate(high.theta_star, task)))
    return results
