"""Batch front door: config parsing, experiment orchestration, file output.

Usage: ``mvldp <command> --config <path> [--out <dir>] [--seed <u64>]
[--threads <n>]`` with commands ``limit``, ``simulate``, ``skeleton``,
``rate_min``, ``rare_event``, ``verify``. ``MVLDP_THREADS`` is the
fallback for ``--threads``.

Configs are flat INI files with ``[model]``, ``[space]``, ``[grid]`` and
``[run]`` sections; unknown keys are rejected. Every data file starts
with a provenance comment carrying the SHA-256 of the resolved config
(command, all keys, and the effective seed — but not the output
directory or worker count), then a header row; floats are written in
shortest round-trip form, so identical configs yield byte-identical
files regardless of worker count. ``summary.jsonl`` (one JSON object per
experiment row) is rewritten by each run.

Exit codes: 0 success, 2 validation error, 3 numerical blow-up,
4 optimizer failure.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (Control, StabilityError, TimeGrid, Trajectory,
                       simulate_limit, simulate_particles, solve_skeleton)
from .ldp import (OptimizerFailure, RareEvent, RateOptions, action,
                  estimate_rare_prob, rate_minimize, verify_l5, verify_l6,
                  verify_t2, verify_t3)
from .measure import mean, second_moment
from .models import (AuditOptions, BlowupError, SamplerSpec, audit_hypotheses,
                     mvsde_model, p_laplace_model, porous_media_model)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_OPTIMIZER = 4

COMMANDS = ("limit", "simulate", "skeleton", "rate_min", "rare_event", "verify")


class ConfigError(ValueError):
    pass


# -- config schema ---------------------------------------------------------------

_MODEL_KEYS_COMMON = {"family", "theta", "hoelder_gamma", "beta0", "beta1",
                      "beta2", "noise_rank", "noise_modes"}
_MODEL_KEYS = {
    "mvsde": _MODEL_KEYS_COMMON | {"a", "b_bar"},
    "porous_media": _MODEL_KEYS_COMMON | {"r", "kappa"},
    "p_laplace": _MODEL_KEYS_COMMON | {"p", "c0", "c1", "c2"},
}
_SPACE_KEYS = {"mvsde": {"d"}, "porous_media": {"modes"}, "p_laplace": {"nodes"}}
_GRID_KEYS = {"horizon", "steps"}
_EVENT_KEYS = {"event_kind", "event_center", "event_offset", "event_radius",
               "event_direction", "event_level"}
_CONTROL_KEYS = {"control_kind", "control_value", "control_amplitude",
                 "control_cycles", "control_channel", "control_file"}
_RUN_KEYS = {
    "limit": set(),
    "simulate": {"eps", "n_particles"},
    "skeleton": set(_CONTROL_KEYS),
    "rate_min": _EVENT_KEYS | {"tol", "penalty0", "penalty_growth",
                               "max_stages", "max_iter", "gradient",
                               "constant_control"},
    "rare_event": _EVENT_KEYS | {"eps", "n_rep", "n_particles", "tilt_file"},
    "verify": {"which", "eps_list", "n_particles", "control_value", "n_list",
               "amplitude", "delta_list", "trials", "state_scale",
               "constant_cap"},
}
_RUN_COMMON = {"seed", "x0", "out"}


@dataclass
class ExperimentConfig:
    command: str
    model: object
    grid: TimeGrid
    x0: np.ndarray
    run: dict
    seed: int
    out: Path
    threads: int
    config_hash: str


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    out = [int(round(v)) for v in vals]
    if any(abs(v - i) > 1e-12 for v, i in zip(vals, out)):
        raise ConfigError(f"expected integers, got {text!r}")
    return out


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _positive(value: float, what: str) -> float:
    if not value > 0:
        raise ConfigError(f"{what} must be positive, got {value}")
    return value


def _build_model(model_sec: dict, space_sec: dict):
    family = model_sec.get("family")
    if family not in _MODEL_KEYS:
        raise ConfigError(f"unknown or missing model family {family!r}")
    unknown = set(model_sec) - _MODEL_KEYS[family]
    if unknown:
        raise ConfigError(f"unknown [model] keys for {family}: {sorted(unknown)}")
    unknown = set(space_sec) - _SPACE_KEYS[family]
    if unknown:
        raise ConfigError(f"unknown [space] keys for {family}: {sorted(unknown)}")

    kw = {}
    for key in ("theta", "hoelder_gamma"):
        if key in model_sec:
            kw[key] = float(model_sec[key])
    for key in ("beta0", "beta1", "beta2"):
        if key in model_sec:
            vals = _floats(model_sec[key])
            kw[key] = vals[0] if len(vals) == 1 else np.array(vals)
    try:
        if family == "mvsde":
            d = int(space_sec.get("d", 1))
            if "noise_rank" in model_sec:
                kw["noise_rank"] = int(model_sec["noise_rank"])
            return mvsde_model(d, float(model_sec.get("a", -1.0)),
                               float(model_sec.get("b_bar", 0.5)), **kw)
        if "noise_modes" in model_sec:
            kw["noise_modes"] = tuple(_ints(model_sec["noise_modes"]))
        if family == "porous_media":
            return porous_media_model(int(space_sec.get("modes", 16)),
                                      float(model_sec.get("r", 4.0)),
                                      float(model_sec.get("kappa", 0.1)), **kw)
        return p_laplace_model(int(space_sec.get("nodes", 64)),
                               float(model_sec.get("p", 4.0)),
                               c0=float(model_sec.get("c0", 0.0)),
                               c1=float(model_sec.get("c1", -0.5)),
                               c2=float(model_sec.get("c2", 0.25)), **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_x0(text: str | None, model) -> np.ndarray:
    space = model.space
    if text is None or text.strip().lower() == "zero":
        return np.zeros(space.dim)
    token = text.strip().lower()
    if token.startswith("sine:"):
        amp = float(token.split(":", 1)[1])
        if space.kind == "grid_dirichlet":
            return amp * np.sin(np.pi * space.grid_nodes())
        out = np.zeros(space.dim)
        out[0] = amp
        return out
    vals = np.array(_floats(text))
    if vals.size != space.dim:
        raise ConfigError(f"x0 has {vals.size} entries, space needs {space.dim}")
    return vals


def load_config(path: str, command: str, seed_override: int | None,
                out_override: str | None, threads: int) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    sections = set(parser.sections())
    unknown = sections - {"model", "space", "grid", "run"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    model_sec = dict(parser["model"]) if "model" in parser else {}
    space_sec = dict(parser["space"]) if "space" in parser else {}
    grid_sec = dict(parser["grid"]) if "grid" in parser else {}
    run_sec = dict(parser["run"]) if "run" in parser else {}

    unknown = set(grid_sec) - _GRID_KEYS
    if unknown:
        raise ConfigError(f"unknown [grid] keys: {sorted(unknown)}")
    unknown = set(run_sec) - (_RUN_KEYS[command] | _RUN_COMMON)
    if unknown:
        raise ConfigError(f"unknown [run] keys for {command}: {sorted(unknown)}")

    model = _build_model(model_sec, space_sec)
    horizon = _positive(float(grid_sec.get("horizon", 1.0)), "grid horizon")
    steps = int(grid_sec.get("steps", 0))
    if steps < 1:
        raise ConfigError(f"grid steps must be >= 1, got {steps}")
    grid = TimeGrid(horizon, steps)
    x0 = _parse_x0(run_sec.get("x0"), model)

    seed = seed_override if seed_override is not None else int(run_sec.get("seed", 0))
    out = Path(out_override if out_override is not None else run_sec.get("out", "."))

    resolved = {"command": command, "seed": seed, "version": __version__,
                "model": dict(sorted(model_sec.items())),
                "space": dict(sorted(space_sec.items())),
                "grid": dict(sorted(grid_sec.items())),
                "run": {k: v for k, v in sorted(run_sec.items()) if k != "out"}}
    config_hash = hashlib.sha256(
        json.dumps(resolved, sort_keys=True).encode()).hexdigest()
    return ExperimentConfig(command, model, grid, x0, run_sec, seed, out,
                            threads, config_hash)


# -- shared run-section builders ---------------------------------------------------

def _build_control(cfg: ExperimentConfig) -> Control:
    run = cfg.run
    rank = cfg.model.noise_rank
    kind = run.get("control_kind", "zero")
    if kind == "zero":
        return Control.zero(cfg.grid, rank)
    if kind == "constant":
        vals = _floats(run.get("control_value", "0"))
        if len(vals) == 1:
            vals = vals * rank
        if len(vals) != rank:
            raise ConfigError("control_value must match the noise rank")
        return Control.constant(cfg.grid, vals)
    if kind == "sinusoid":
        return Control.sinusoid(cfg.grid, rank,
                                float(run.get("control_amplitude", 1.0)),
                                float(run.get("control_cycles", 1.0)),
                                channel=int(run.get("control_channel", 0)))
    if kind == "table":
        path = run.get("control_file")
        if not path:
            raise ConfigError("control_kind=table needs control_file")
        return _read_control_csv(Path(path), cfg.grid, rank)
    raise ConfigError(f"unknown control_kind {kind!r}")


def _read_control_csv(path: Path, grid: TimeGrid, rank: int) -> Control:
    if not path.exists():
        raise ConfigError(f"control file not found: {path}")
    rows = [line.split(",") for line in path.read_text().splitlines()
            if line and not line.startswith("#")]
    header, data = rows[0], rows[1:]
    if len(header) < rank + 1:
        raise ConfigError("control file has too few columns")
    if len(data) != grid.steps:
        raise ConfigError(
            f"control table has {len(data)} rows, grid needs {grid.steps}")
    try:
        vals = np.array([[float(c) for c in row[1:rank + 1]] for row in data])
    except ValueError as exc:
        raise ConfigError(f"non-numeric control value in {path}: {exc}") from exc
    return Control(grid, vals)


def _build_event(cfg: ExperimentConfig, limit_terminal: np.ndarray) -> RareEvent:
    run = cfg.run
    kind = run.get("event_kind")
    if kind == "ball":
        center_text = run.get("event_center", "limit_terminal")
        if center_text.strip().lower() == "limit_terminal":
            center = limit_terminal.copy()
        else:
            center = np.array(_floats(center_text))
        if "event_offset" in run:
            offset = np.array(_floats(run["event_offset"]))
            if offset.size == 1:
                offset = np.full(center.size, offset[0]) if center.size == 1 \
                    else np.concatenate([offset, np.zeros(center.size - 1)])
            center = center + offset
        radius = float(run.get("event_radius", 0.0))
        try:
            return RareEvent.ball(center, radius)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "halfspace":
        direction = np.array(_floats(run.get("event_direction", "1")))
        level = float(run.get("event_level", "-inf"))
        return RareEvent.halfspace(direction, level)
    raise ConfigError(f"unknown or missing event_kind {kind!r}")


# -- output helpers ------------------------------------------------------------------

def _fmt(cell) -> str:
    if isinstance(cell, str):
        return cell
    if isinstance(cell, (bool, np.bool_)):
        return "1" if cell else "0"
    if isinstance(cell, (int, np.integer)):
        return str(int(cell))
    return repr(float(cell))


def _write_csv(path: Path, config_hash: str, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# mvldp-config-sha256: {config_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def _write_summary(out: Path, config_hash: str, records: list[dict]):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.jsonl", "w") as fh:
        for rec in records:
            rec = {"config_sha256": config_hash, **rec}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _trajectory_rows(traj: Trajectory):
    for t, state in zip(traj.grid.times, traj.states):
        yield [t, *state]


def _state_header(dim: int) -> list[str]:
    return [f"x{i}" for i in range(dim)]


def _write_trajectory(path: Path, cfg: ExperimentConfig, traj: Trajectory):
    _write_csv(path, cfg.config_hash, ["t", *_state_header(traj.states.shape[1])],
               _trajectory_rows(traj))


def _write_control_csv(path: Path, cfg: ExperimentConfig, control: Control):
    header = ["t"] + [f"phi{i}" for i in range(control.rank)]
    rows = ([t, *row] for t, row in zip(control.grid.times[:-1], control.values))
    _write_csv(path, cfg.config_hash, header, rows)


# -- commands -------------------------------------------------------------------------

def cmd_limit(cfg: ExperimentConfig) -> int:
    traj = simulate_limit(cfg.model, cfg.x0, cfg.grid)
    _write_trajectory(cfg.out / "limit.csv", cfg, traj)
    _write_summary(cfg.out, cfg.config_hash, [{
        "command": "limit", "terminal": list(map(float, traj.terminal)),
        "horizon": cfg.grid.horizon, "steps": cfg.grid.steps}])
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    eps = float(cfg.run.get("eps", 0.0))
    if eps < 0:
        raise ConfigError("eps must be nonnegative")
    n = int(cfg.run.get("n_particles", 100))
    if n < 1:
        raise ConfigError("n_particles must be >= 1")
    law, trajs = simulate_particles(cfg.model, cfg.x0, eps, n, cfg.grid, cfg.seed)
    dim = cfg.model.space.dim
    rows = ([t, p, *law.points[i, p]]
            for i, t in enumerate(cfg.grid.times) for p in range(n))
    _write_csv(cfg.out / "particles.csv", cfg.config_hash,
               ["t", "particle", *_state_header(dim)], rows)
    summary_rows = []
    for i, t in enumerate(cfg.grid.times):
        ens = law.law_at(i)
        summary_rows.append([t, second_moment(ens, cfg.model.space),
                             *mean(ens)])
    _write_csv(cfg.out / "law_summary.csv", cfg.config_hash,
               ["t", "second_moment", *[f"mean{i}" for i in range(dim)]],
               summary_rows)
    _write_summary(cfg.out, cfg.config_hash, [{
        "command": "simulate", "eps": eps, "n_particles": n,
        "terminal_second_moment": second_moment(law.law_at(cfg.grid.steps),
                                                cfg.model.space)}])
    return EXIT_OK


def cmd_skeleton(cfg: ExperimentConfig) -> int:
    control = _build_control(cfg)
    limit = simulate_limit(cfg.model, cfg.x0, cfg.grid)
    traj = solve_skeleton(cfg.model, cfg.x0, control, limit, cfg.grid)
    _write_trajectory(cfg.out / "skeleton.csv", cfg, traj)
    _write_summary(cfg.out, cfg.config_hash, [{
        "command": "skeleton", "action": action(control),
        "terminal": list(map(float, traj.terminal))}])
    return EXIT_OK


def _rate_options(run: dict) -> RateOptions:
    kw = {}
    if "tol" in run:
        kw["tol"] = float(run["tol"])
    if "penalty0" in run:
        kw["penalty0"] = float(run["penalty0"])
    if "penalty_growth" in run:
        kw["penalty_growth"] = float(run["penalty_growth"])
    if "max_stages" in run:
        kw["max_stages"] = int(run["max_stages"])
    if "max_iter" in run:
        kw["max_iter"] = int(run["max_iter"])
    if "gradient" in run:
        if run["gradient"] not in ("adjoint", "fd"):
            raise ConfigError("gradient must be adjoint or fd")
        kw["gradient"] = run["gradient"]
    if "constant_control" in run:
        kw["constant_control"] = _bool(run["constant_control"])
    return RateOptions(**kw)


def cmd_rate_min(cfg: ExperimentConfig) -> int:
    limit = simulate_limit(cfg.model, cfg.x0, cfg.grid)
    event = _build_event(cfg, limit.terminal)
    report = rate_minimize(cfg.model, cfg.x0, event, cfg.grid,
                           _rate_options(cfg.run))
    _write_control_csv(cfg.out / "optimal_control.csv", cfg, report.control)
    _write_summary(cfg.out, cfg.config_hash, [{
        "command": "rate_min", "action": report.action_value,
        "rate": report.rate if math.isfinite(report.rate) else "inf",
        "residual": report.residual, "iterations": report.iterations,
        "stages": report.stages, "converged": report.converged,
        "terminal": list(map(float, report.terminal_state))}])
    if not report.converged:
        raise OptimizerFailure(
            f"rate minimization did not reach the event (residual "
            f"{report.residual:.3g})")
    return EXIT_OK


def cmd_rare_event(cfg: ExperimentConfig) -> int:
    eps = float(cfg.run.get("eps", 0.01))
    n_rep = int(cfg.run.get("n_rep", 1000))
    n_particles = int(cfg.run.get("n_particles", 256))
    if n_rep < 1 or n_particles < 1:
        raise ConfigError("n_rep and n_particles must be >= 1")
    limit = simulate_limit(cfg.model, cfg.x0, cfg.grid)
    event = _build_event(cfg, limit.terminal)
    tilt = None
    if "tilt_file" in cfg.run:
        tilt = _read_control_csv(Path(cfg.run["tilt_file"]), cfg.grid,
                                 cfg.model.noise_rank)
    est = estimate_rare_prob(cfg.model, cfg.x0, eps, event, n_rep, cfg.grid,
                             cfg.seed, tilt=tilt, n_particles=n_particles)
    neg_log = -eps * math.log(est.p_hat) if est.p_hat > 0 else math.inf
    _write_csv(cfg.out / "rare_event.csv", cfg.config_hash,
               ["experiment", "eps", "n_samples", "p_hat", "std_err", "ess",
                "ess_warning", "neg_eps_log_p"],
               [["rare_event", eps, est.n_samples, est.p_hat, est.std_err,
                 est.ess, est.ess_warning, neg_log]])
    _write_summary(cfg.out, cfg.config_hash, [{
        "command": "rare_event", "eps": eps, "p_hat": est.p_hat,
        "std_err": est.std_err, "ess": est.ess,
        "ess_warning": bool(est.ess_warning), "tilted": tilt is not None,
        "neg_eps_log_p": neg_log if math.isfinite(neg_log) else "inf"}])
    return EXIT_OK


def _slope_csv(cfg: ExperimentConfig, name: str, report):
    rows = [[report.experiment, x, s, e, report.slope, report.intercept]
            for x, s, e in zip(report.xs, report.statistics, report.std_errs)]
    _write_csv(cfg.out / f"verify_{name}.csv", cfg.config_hash,
               ["experiment", report.x_label, "statistic", "std_err", "slope",
                "intercept"], rows)
    return {"command": f"verify_{name}", "slope": report.slope,
            "intercept": report.intercept}


def cmd_verify(cfg: ExperimentConfig) -> int:
    which = cfg.run.get("which")
    n_particles = int(cfg.run.get("n_particles", 400))
    if which == "l5":
        eps_list = _floats(cfg.run.get("eps_list", "1e-1,3e-2,1e-2,3e-3,1e-3"))
        report = verify_l5(cfg.model, cfg.x0, eps_list, n_particles, cfg.grid,
                           cfg.seed, threads=cfg.threads)
        _write_summary(cfg.out, cfg.config_hash, [_slope_csv(cfg, "l5", report)])
        return EXIT_OK
    if which == "t2":
        eps_list = _floats(cfg.run.get("eps_list", "1e-1,3e-2,1e-2,3e-3,1e-3"))
        vals = _floats(cfg.run.get("control_value", "1.0"))
        control = Control.constant(cfg.grid, vals * cfg.model.noise_rank
                                   if len(vals) == 1 else vals)
        report = verify_t2(cfg.model, cfg.x0, control, eps_list, n_particles,
                           cfg.grid, cfg.seed, threads=cfg.threads)
        _write_summary(cfg.out, cfg.config_hash, [_slope_csv(cfg, "t2", report)])
        return EXIT_OK
    if which == "t3":
        n_list = _ints(cfg.run.get("n_list", "4,8,16,32,64"))
        amplitude = float(cfg.run.get("amplitude", 1.0))
        base_vals = _floats(cfg.run.get("control_value", "0.0"))
        base = Control.constant(cfg.grid, base_vals * cfg.model.noise_rank
                                if len(base_vals) == 1 else base_vals)
        report = verify_t3(cfg.model, cfg.x0, base, n_list, cfg.grid,
                           amplitude=amplitude)
        rows = [[report.experiment, int(n), d]
                for n, d in zip(report.ns, report.distances)]
        _write_csv(cfg.out / "verify_t3.csv", cfg.config_hash,
                   ["experiment", "n", "distance"], rows)
        _write_summary(cfg.out, cfg.config_hash, [{
            "command": "verify_t3",
            "distances": list(map(float, report.distances))}])
        return EXIT_OK
    if which == "l6":
        default = ",".join(str(cfg.grid.horizon / k) for k in (8, 16, 32, 64))
        delta_list = _floats(cfg.run.get("delta_list", default))
        control = Control.zero(cfg.grid, cfg.model.noise_rank)
        report = verify_l6(cfg.model, cfg.x0, control, delta_list, cfg.grid)
        _write_summary(cfg.out, cfg.config_hash, [_slope_csv(cfg, "l6", report)])
        return EXIT_OK
    if which == "hypo":
        trials = int(cfg.run.get("trials", 500))
        sampler = SamplerSpec(state_scale=float(cfg.run.get("state_scale", 1.0)))
        options = AuditOptions(constant_cap=float(cfg.run.get("constant_cap", 1e3)))
        report = audit_hypotheses(cfg.model, sampler, trials, cfg.seed, options)
        rows = [[name, r.fitted_constant, r.defect, r.passed, r.n_samples]
                for name, r in sorted(report.results.items())]
        _write_csv(cfg.out / "verify_hypo.csv", cfg.config_hash,
                   ["hypothesis", "fitted_constant", "defect", "passed",
                    "n_samples"], rows)
        _write_summary(cfg.out, cfg.config_hash, [{
            "command": "verify_hypo", "passed": report.passed,
            "trials": trials}])
        return EXIT_OK
    raise ConfigError(f"verify needs which in l5|l6|t2|t3|hypo, got {which!r}")


_DISPATCH = {
    "limit": cmd_limit,
    "simulate": cmd_simulate,
    "skeleton": cmd_skeleton,
    "rate_min": cmd_rate_min,
    "rare_event": cmd_rare_event,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mvldp",
        description="Small-noise mean-field evolution experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("MVLDP_THREADS", "1"))
    try:
        cfg = load_config(args.config, args.command, args.seed, args.out,
                          max(1, threads))
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        print(f"mvldp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowupError, StabilityError) as exc:
        print(f"mvldp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OptimizerFailure as exc:
        print(f"mvldp: optimizer failure: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER


if __name__ == "__main__":
    sys.exit(main())
