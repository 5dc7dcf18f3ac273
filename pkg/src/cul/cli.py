"""Command line: ``cul <subcommand> [flags]``.

Settings are flat dotted keys (``step.mu``, ``phase1.alpha`` ...). They are
resolved as built-in defaults, then per-problem defaults, then a JSON file
given with ``--config``, then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from cul import experiments as ex
from cul.diagnostics import running_min
from cul.errors import ConstraintViolation, CulError, InvalidArgument, NumericFailure
from cul.persistence import read_results, rows_from_trajectory, save_checkpoint, write_results, write_table
from cul.unlearn.data import CropPattern
from cul.unlearn.model import relative_error
from cul.unlearn.task import NoiseMode

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONSTRAINT = 0, 2, 3, 4


class ConfigError(InvalidArgument):
    pass


def _real(v):
    if isinstance(v, bool):
        raise ValueError("expected a real")
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("expected a finite real")
    return x


def _int(v):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError("expected an integer")
    return int(v)


def _bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "1", "yes", "false", "0", "no"):
        return v.lower() in ("true", "1", "yes")
    raise ValueError("expected true or false")


def _reals(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    return [_real(x) for x in v]


def _ints(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    return [_int(x) for x in v]


def _optional(parse):
    return lambda v: None if v is None or v == "" else parse(v)


def _choice(enum_cls):
    def parse(v):
        return enum_cls(v).value

    return parse


def _one_of(v, options):
    if v not in options:
        raise ValueError(f"expected one of {', '.join(options)}")
    return v


def _text(v):
    if not isinstance(v, str):
        raise ValueError("expected a string")
    return v


# key -> (default, parser)
SCHEMA = {
    "problem": ("quad", lambda v: _one_of(v, ("quad", "unlearn-toy"))),
    "seed": (0, _int),
    "out": (None, _optional(_text)),
    "format": (None, _optional(lambda v: _one_of(v, ("csv", "json")))),
    "trajectory": (None, _optional(_text)),
    "timing": (False, _bool),
    "quad.a": ([0.0, 0.0], _reals),
    "quad.b": ([1.0, 0.0], _reals),
    "quad.theta0": ([2.0, 1.0], _reals),
    "phase1.alpha": (1.0, _real),
    "phase1.delta": (2.0, _real),
    "phase2.beta": (5.0, _real),
    "phase2.delta": (1, _int),
    "phase2.scaled": (True, _bool),
    "sweep.fractions": ([0.25, 0.5, 0.75], _reals),
    "sweep.warm_start": (True, _bool),
    "sweep.tol": (None, _optional(_real)),
    "step.mu": (0.05, _real),
    "step.max_iters": (5000, _int),
    "step.epochs": (None, _optional(_int)),
    "step.grad_tol": (1e-6, _real),
    "step.omega": (1e-12, _real),
    "step.precondition": (False, _bool),
    "task.classes": (8, _int),
    "task.per_class": (32, _int),
    "task.size": (16, _int),
    "task.arch": ([256, 64, 16, 64, 256], _ints),
    "task.crop": ("Center", _choice(CropPattern)),
    "task.crop_ratio": (0.5, _real),
    "task.batch": (32, _int),
    "task.noise_mode": ("ThroughOriginal", _choice(NoiseMode)),
    "task.proxy_retain_fraction": (0.0, _real),
    "task.pretrain_epochs": (500, _int),
    "task.checkpoint": (None, _optional(_text)),
    "baselines.mu": (None, _optional(_real)),
    "baselines.lambda": (1.0, _real),
    "baselines.noise_std": (1.0, _real),
    "rates.deltas": ([1.0, 2.0, 3.0, 4.0], _reals),
    "rates.window": (0.5, _real),
    "rates.mu": (1e-3, _real),
    "rates.max_iters": (20000, _int),
    "report.input": (None, _optional(_text)),
    "report.out_dir": (None, _optional(_text)),
}


PROBLEM_DEFAULTS = {
    "quad": {},
    "unlearn-toy": {
        "phase1.alpha": 5.0,
        "phase2.beta": 5.0,
        "step.mu": 1e-4,
        "step.epochs": 5,
        "step.grad_tol": 0.0,
        "step.omega": 1e-7,
    },
}


def parse_value(key: str, value):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return SCHEMA[key][1](value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object of dotted keys")
    return {k: parse_value(k, v) for k, v in data.items()}


def resolve_config(file_values: dict, flag_values: dict) -> dict:
    user = {**file_values, **flag_values}
    problem = user.get("problem", SCHEMA["problem"][0])
    cfg = {k: d for k, (d, _) in SCHEMA.items()}
    cfg.update(PROBLEM_DEFAULTS[problem])
    cfg.update(user)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    """Range checks that must pass before anything runs."""

    def need(cond, key, what):
        if not cond:
            raise ConfigError(f"{key!r} {what} (got {cfg[key]!r})")

    need(cfg["step.mu"] >= 0, "step.mu", "must be nonnegative")
    need(cfg["step.omega"] > 0, "step.omega", "must be positive")
    need(cfg["step.max_iters"] >= 0, "step.max_iters", "must be nonnegative")
    need(cfg["step.grad_tol"] >= 0, "step.grad_tol", "must be nonnegative")
    need(cfg["step.epochs"] is None or cfg["step.epochs"] >= 0, "step.epochs", "must be nonnegative")
    need(cfg["phase1.alpha"] > 0, "phase1.alpha", "must be positive")
    need(cfg["phase1.delta"] >= 1, "phase1.delta", "must be at least 1")
    need(cfg["phase2.beta"] > 0, "phase2.beta", "must be positive")
    need(cfg["phase2.delta"] >= 1 and cfg["phase2.delta"] % 2 == 1, "phase2.delta", "must be an odd integer >= 1")
    fr = cfg["sweep.fractions"]
    need(len(fr) > 0 and all(0 < f < 1 for f in fr), "sweep.fractions", "must lie strictly inside (0, 1)")
    need(all(b > a for a, b in zip(fr, fr[1:])), "sweep.fractions", "must be strictly increasing")
    need(cfg["sweep.tol"] is None or cfg["sweep.tol"] >= 0, "sweep.tol", "must be nonnegative")
    need(len(cfg["quad.a"]) > 0, "quad.a", "must be nonempty")
    need(len(cfg["quad.b"]) == len(cfg["quad.a"]), "quad.b", "must match the length of quad.a")
    need(len(cfg["quad.theta0"]) == len(cfg["quad.a"]), "quad.theta0", "must match the length of quad.a")
    need(cfg["task.classes"] >= 2, "task.classes", "must be at least 2")
    need(cfg["task.per_class"] >= 1, "task.per_class", "must be positive")
    need(cfg["task.size"] >= 2, "task.size", "must be at least 2")
    arch = cfg["task.arch"]
    need(
        len(arch) >= 2 and arch[0] == arch[-1] == cfg["task.size"] ** 2 and min(arch) > 0,
        "task.arch",
        "must start and end at task.size squared",
    )
    need(0 <= cfg["task.crop_ratio"] <= 1, "task.crop_ratio", "must lie in [0, 1]")
    need(cfg["task.batch"] >= 1, "task.batch", "must be positive")
    need(0 <= cfg["task.proxy_retain_fraction"] <= 1, "task.proxy_retain_fraction", "must lie in [0, 1]")
    need(cfg["task.pretrain_epochs"] >= 0, "task.pretrain_epochs", "must be nonnegative")
    need(cfg["baselines.mu"] is None or cfg["baselines.mu"] >= 0, "baselines.mu", "must be nonnegative")
    need(cfg["baselines.lambda"] >= 0, "baselines.lambda", "must be nonnegative")
    need(cfg["baselines.noise_std"] > 0, "baselines.noise_std", "must be positive")
    need(len(cfg["rates.deltas"]) > 0 and min(cfg["rates.deltas"]) >= 1, "rates.deltas", "must all be >= 1")
    need(0 < cfg["rates.window"] <= 1, "rates.window", "must lie in (0, 1]")
    need(cfg["rates.mu"] >= 0, "rates.mu", "must be nonnegative")
    need(cfg["rates.max_iters"] >= 10, "rates.max_iters", "must be at least 10")


# -- argument parsing ----------------------------------------------------------

# flag dest -> config key, shared by every subcommand
COMMON_FLAGS = [
    ("--problem", "problem", "problem name: quad or unlearn-toy"),
    ("--seed", "seed", "base random seed"),
    ("--alpha", "phase1.alpha", "Phase I control coefficient"),
    ("--beta", "phase2.beta", "Phase II control coefficient"),
    ("--phase2-delta", "phase2.delta", "Phase II exponent (odd)"),
    ("--fractions", "sweep.fractions", "comma-separated epsilon fractions"),
    ("--tol", "sweep.tol", "constraint tolerance for sweep points"),
    ("--mu", "step.mu", "step size"),
    ("--max-iters", "step.max_iters", "iteration cap (ignored when --epochs is set)"),
    ("--epochs", "step.epochs", "epochs over the forget set (toy task)"),
    ("--grad-tol", "step.grad_tol", "stop when the update norm falls below this"),
    ("--omega", "step.omega", "regularizer in the multiplier denominator"),
    ("--theta0", "quad.theta0", "comma-separated start point (quad)"),
    ("--classes", "task.classes", "number of texture classes"),
    ("--per-class", "task.per_class", "images per class"),
    ("--crop", "task.crop", "crop pattern"),
    ("--crop-ratio", "task.crop_ratio", "fraction of pixels masked"),
    ("--batch", "task.batch", "minibatch size"),
    ("--noise-mode", "task.noise_mode", "ThroughOriginal or DirectNoise"),
    ("--proxy-retain-fraction", "task.proxy_retain_fraction", "share of retain images swapped for held-out ones"),
    ("--pretrain-epochs", "task.pretrain_epochs", "full-batch pretraining epochs"),
    ("--checkpoint", "task.checkpoint", "load the original model from this checkpoint"),
    ("--out", "out", "output file"),
    ("--format", "format", "csv or json (default: from the suffix)"),
    ("--trajectory", "trajectory", "also write every step record to this file"),
]

BOOL_FLAGS = [
    ("--scaled", "--unscaled", "phase2.scaled"),
    ("--warm-start", "--cold-start", "sweep.warm_start"),
    ("--precondition", "--no-precondition", "step.precondition"),
    ("--timing", "--no-timing", "timing"),
]

COMMANDS = {
    "pretrain": "train the toy model and save a checkpoint",
    "solve-boundaries": "find the highest and lowest completeness solutions",
    "sweep": "trace the front over an epsilon grid",
    "rates": "fit convergence exponents of Phase I runs",
    "baselines": "compare Phase I unlearning with the baselines on the toy task",
    "report": "export plot-ready columns or show the resolved config",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cul", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of dotted keys")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
        for flag, key, h in COMMON_FLAGS:
            p.add_argument(flag, dest=key, default=None, help=h)
        # --delta means the Phase I exponent, or the exponent list for rates
        p.add_argument("--delta", dest="rates.deltas" if name == "rates" else "phase1.delta", default=None)
        for on, off, key in BOOL_FLAGS:
            p.add_argument(on, dest=key, action="store_const", const=True, default=None)
            p.add_argument(off, dest=key, action="store_const", const=False)
        if name == "rates":
            p.add_argument("--window", dest="rates.window", default=None)
        if name == "report":
            p.add_argument("--input", dest="report.input", default=None)
            p.add_argument("--out-dir", dest="report.out_dir", default=None)
            p.add_argument("--show-config", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> dict:
    file_values = load_config_file(args.config) if args.config else {}
    flags = {}
    for key, value in vars(args).items():
        if key in SCHEMA and value is not None:
            flags[key] = parse_value(key, value)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass
        flags[key] = parse_value(key, value)
    return resolve_config(file_values, flags)


def workers_from_env() -> int:
    raw = os.environ.get("CUL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CUL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"CUL_THREADS must be a positive integer, got {raw!r}")
    return n


# -- subcommands ---------------------------------------------------------------


def _need_out(cfg: dict) -> Path:
    if not cfg["out"]:
        raise ConfigError("missing required --out (config key 'out')")
    return Path(cfg["out"])


def _write(rows, cfg: dict, path=None) -> None:
    write_results(rows, path or cfg["out"], cfg["format"])


def cmd_pretrain(cfg: dict) -> None:
    out = _need_out(cfg)
    cfg = {**cfg, "task.checkpoint": None}
    model, forget, retain = ex.build_original(cfg)
    save_checkpoint(model, out)
    task = ex.toy_setup({**cfg, "task.checkpoint": str(out)}).task
    rel_f = relative_error(model, task._cache["forget_in"], task.forget)
    rel_r = relative_error(model, task._cache["retain_in"], task.retain)
    print(
        f"pretrain: params={model.n_params} loss={model.train_loss:.6g} "
        f"rel_err_forget={rel_f:.4f} rel_err_retain={rel_r:.4f} -> {out}"
    )


def _boundary_line(name, res) -> str:
    return f"{name}: iters={len(res.trajectory)} f1={res.f1_at:.6g} f2={res.f2_at:.6g}"


def cmd_solve_boundaries(cfg: dict) -> None:
    out = _need_out(cfg)
    setup = ex.make_setup(cfg)
    high, low = ex.boundaries(setup, cfg)
    print(_boundary_line("boundary-high", high))
    print(_boundary_line("boundary-low", low))
    rows = [
        ex.summary_row("boundary-high", None, high.f1_at, high.f2_at, high.trajectory),
        ex.summary_row("boundary-low", None, low.f1_at, low.f2_at, low.trajectory),
    ]
    _write(rows, cfg, out)
    if cfg["trajectory"]:
        traj_rows = rows_from_trajectory(high.trajectory, "boundary-high")
        traj_rows += rows_from_trajectory(low.trajectory, "boundary-low")
        _write(traj_rows, cfg, cfg["trajectory"])


def cmd_sweep(cfg: dict) -> None:
    out = _need_out(cfg)
    setup = ex.make_setup(cfg)
    bounds = ex.boundaries(setup, cfg)
    print(_boundary_line("boundary-high", bounds[0]))
    print(_boundary_line("boundary-low", bounds[1]))
    fr = ex.front(setup, cfg, bounds, workers=workers_from_env())
    for e in fr.entries:
        print(f"sweep eps={e.epsilon:.6g}: iters={len(e.trajectory)} f1={e.f1:.6g} f2={e.f2:.6g}")
    _write(ex.front_rows(fr), cfg, out)
    if cfg["trajectory"]:
        traj_rows = rows_from_trajectory(bounds[0].trajectory, "boundary-high")
        for e in fr.entries:
            traj_rows += rows_from_trajectory(e.trajectory, "sweep", e.epsilon)
        traj_rows += rows_from_trajectory(bounds[1].trajectory, "boundary-low")
        _write(traj_rows, cfg, cfg["trajectory"])


RATE_HEADER = ("delta", "slope_grad_f1", "target_grad_f1", "slope_g", "target_g", "final_grad_f1")


def cmd_rates(cfg: dict) -> None:
    out = _need_out(cfg)
    setup = ex.make_setup(cfg)
    sc_cfg = {**cfg, "step.mu": cfg["rates.mu"], "step.max_iters": cfg["rates.max_iters"], "step.grad_tol": 0.0}
    if setup.task is None:
        sc_cfg["step.epochs"] = None
    sc = ex.step_config(sc_cfg, ex._spe(setup))
    results = ex.rate_study(
        setup.problem, setup.theta0, cfg["rates.deltas"], cfg["phase1.alpha"], sc, cfg["rates.window"], cfg["seed"]
    )
    table = []
    for r in results:
        print(
            f"rates delta={r.delta:g}: slope_grad_f1={r.slope_grad_f1:.4f} (target {r.target_grad_f1:.4f}) "
            f"slope_g={r.slope_g:.4f} final_grad_f1={r.final_grad_f1:.3g}"
        )
        table.append([r.delta, r.slope_grad_f1, r.target_grad_f1, r.slope_g, r.target_g, r.final_grad_f1])
    write_table(out, RATE_HEADER, table)
    if cfg["trajectory"]:
        rows = []
        for r in results:
            rows += rows_from_trajectory(r.trajectory, f"PhaseI-delta{r.delta:g}")
        _write(rows, cfg, cfg["trajectory"])


BASELINE_HEADER = ("method", "forget_err", "retain_err", "noise_prox", "retain_degradation", "forget_err_gain")


def cmd_baselines(cfg: dict) -> None:
    out = _need_out(cfg)
    if cfg["problem"] != "unlearn-toy":
        raise ConfigError("'problem' must be unlearn-toy for baselines")
    setup = ex.make_setup(cfg)
    results = ex.compare_baselines(setup, cfg)
    base = results[0][1].forget_err
    table = []
    for name, m in results:
        gain = (m.forget_err - base) / base
        print(
            f"{name}: forget_err={m.forget_err:.4f} (+{100 * gain:.1f}%) "
            f"retain_degradation={m.retain_degradation:.4f} noise_prox={m.noise_prox:.4f}"
        )
        table.append([name, m.forget_err, m.retain_err, m.noise_prox, m.retain_degradation, gain])
    write_table(out, BASELINE_HEADER, table)


def _columns(path: Path, xs, ys) -> None:
    lines = [f"{x:.17g} {y:.17g}" for x, y in zip(xs, ys)]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def cmd_report(cfg: dict, show_config: bool) -> None:
    if show_config:
        print(json.dumps({k: cfg[k] for k in sorted(cfg)}, indent=1))
        return
    if not cfg["report.input"] or not cfg["report.out_dir"]:
        raise ConfigError("report needs --input and --out-dir (or --show-config)")
    rows = read_results(cfg["report.input"])
    out_dir = Path(cfg["report.out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    # front summary rows carry the epsilon level; one point per level
    front = {}
    for r in rows:
        if r.epsilon is not None:
            front[r.epsilon] = r
    if front:
        eps = sorted(front)
        _columns(out_dir / "eps_f1.dat", eps, [front[e].f1 for e in eps])
        _columns(out_dir / "eps_f2.dat", eps, [front[e].f2 for e in eps])
        written += ["eps_f1.dat", "eps_f2.dat"]
    # per-run log-t vs log running-min gradient norm
    runs: dict[tuple, list] = {}
    for r in rows:
        runs.setdefault((r.phase, r.epsilon), []).append(r)
    for k, ((phase, eps), rs) in enumerate(runs.items()):
        if len(rs) < 2:
            continue
        t = np.array([r.iter for r in rs], dtype=np.float64) + 1.0
        g = running_min([r.grad_f1_norm for r in rs])
        keep = g > 0
        tag = phase if eps is None else f"{phase}-{k}"
        name = f"loglog_{tag}.dat"
        _columns(out_dir / name, np.log(t[keep]), np.log(g[keep]))
        written.append(name)
    print(f"report: {len(rows)} rows -> {out_dir} ({', '.join(written) or 'nothing to plot'})")


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "pretrain":
            cmd_pretrain(cfg)
        elif args.command == "solve-boundaries":
            cmd_solve_boundaries(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg)
        elif args.command == "rates":
            cmd_rates(cfg)
        elif args.command == "baselines":
            cmd_baselines(cfg)
        else:
            cmd_report(cfg, args.show_config)
    except NumericFailure as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConstraintViolation as exc:
        print(f"error: constraint violated: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (CulError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
