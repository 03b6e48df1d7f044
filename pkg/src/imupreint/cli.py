"""Command-line entry point: ``imupreint {simulate,integrate,compare,evaluate}``.

Every command accepts ``--config FILE`` (TOML, keys named like the long
flags with underscores); explicit flags override the file and unknown keys
are rejected. Output files are written atomically into ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dataset_io as dio
from .evaluation import (
    AlignmentResult,
    align_rigid,
    compute_errors,
    error_rows,
    format_summary,
    improvement_percent,
    summary_items,
)
from .preintegration import CLASSICAL, GRAVITY, MODELS, PROPOSED, integrate_keyframes
from .simulator import generate, load_scenario
from .state import NavState, Trajectory

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("imupreint")


class ConfigError(ValueError):
    pass


# name -> (argparse kwargs); shared so config keys and flags stay in sync
_OPTIONS = {
    "config": dict(help="TOML file with defaults for any of the flags"),
    "scenario": dict(help="scenario TOML file"),
    "imu": dict(help="IMU log (EuRoC schema)"),
    "truth": dict(help="ground truth (EuRoC schema or trajectory file)"),
    "estimate": dict(help="estimated trajectory file"),
    "model": dict(choices=MODELS, help="integration model (default: proposed)"),
    "rate_hz": dict(type=float, help="IMU rate override for the scenario"),
    "keyframe_hz": dict(type=float, help="keyframe rate (default: 10)"),
    "gravity": dict(type=float, metavar="Z", help="gravity z component in m/s^2 (default: -9.81)"),
    "seed": dict(type=int, help="noise seed (default: 0)"),
    "reset_every": dict(type=float, metavar="SECONDS",
                        help="re-initialise from truth every SECONDS and score per window"),
    "align": dict(choices=("none", "se3"), help="rigid alignment before scoring"),
    "out": dict(help="output directory"),
}

_COMMANDS = {
    "simulate": ("scenario", "rate_hz", "gravity", "seed", "out"),
    "integrate": ("imu", "truth", "model", "keyframe_hz", "gravity", "out"),
    "compare": ("imu", "truth", "scenario", "seed", "rate_hz", "keyframe_hz", "gravity",
                "reset_every", "align", "out"),
    "evaluate": ("estimate", "truth", "align", "out"),
}

_DEFAULTS = {
    "model": PROPOSED,
    "keyframe_hz": 10.0,
    "seed": 0,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imupreint", description="IMU preintegration experiments: simulate, integrate, compare, evaluate.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in _COMMANDS.items():
        p = sub.add_parser(name)
        for key in ("config",) + keys:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, **_OPTIONS[key])
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge the optional config file under explicit flags and fill defaults."""
    allowed = _COMMANDS[command]
    cfg = {}
    if args.config:
        with open(args.config, "rb") as f:
            try:
                data = tomllib.load(f)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{args.config}: {exc}") from None
        for key, value in data.items():
            k = key.replace("-", "_")
            if k not in allowed:
                raise ConfigError(f"{args.config}: unknown key {key!r} for '{command}'")
            cfg[k] = value
    for k in allowed:
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    for k, v in _DEFAULTS.items():
        if k in allowed:
            cfg.setdefault(k, v)
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict) -> None:
    def positive(key):
        if key in cfg and not (isinstance(cfg[key], (int, float)) and math.isfinite(cfg[key])
                               and cfg[key] > 0):
            raise ConfigError(f"{key} must be a positive number, got {cfg[key]!r}")

    for key in ("rate_hz", "keyframe_hz", "reset_every"):
        positive(key)
    if "model" in cfg and cfg["model"] not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {cfg['model']!r}")
    if "align" in cfg and cfg["align"] not in ("none", "se3"):
        raise ConfigError(f"align must be 'none' or 'se3', got {cfg['align']!r}")
    if "gravity" in cfg and not (isinstance(cfg["gravity"], (int, float))
                                 and math.isfinite(cfg["gravity"])):
        raise ConfigError("gravity must be finite")
    if not cfg.get("out"):
        raise ConfigError("out is required")

    required = {
        "simulate": ("scenario",),
        "integrate": ("imu",),
        "evaluate": ("estimate", "truth"),
    }.get(command, ())
    for key in required:
        if not cfg.get(key):
            raise ConfigError(f"{key} is required")
    if command == "compare":
        if cfg.get("scenario"):
            if cfg.get("imu") or cfg.get("truth"):
                raise ConfigError("compare takes either scenario or imu+truth, not both")
        elif not (cfg.get("imu") and cfg.get("truth")):
            raise ConfigError("compare needs imu and truth (or scenario)")
        if cfg.get("reset_every") and cfg.get("align") == "se3":
            raise ConfigError("align=se3 cannot be combined with reset_every")


def _gravity(cfg) -> np.ndarray:
    return np.array([0.0, 0.0, float(cfg.get("gravity", GRAVITY[2]))])


def _first_stamp_ns(path) -> int:
    """Exact first stamp of an IMU/ground-truth (ns) or trajectory (seconds) file."""
    with open(path) as f:
        f.readline()
        for line in f:
            if line.strip():
                field = line.split(",")[0].strip()
                if dio.sniff_truth_format(path) == "trajectory":
                    return int(round(Fraction(field) * 10**9))
                return int(field)
    raise dio.DatasetFormatError(f"{path}: no data rows")


def _initial_state(truth: Trajectory | None, t0: float) -> NavState:
    if truth is None:
        return NavState.at_rest(t0)
    pairs, _ = dio.associate([t0], truth.times)
    if not pairs:
        raise ConfigError(f"no ground-truth state within {dio.MATCH_TOL} s of the first IMU sample")
    s = truth[pairs[0][1]]
    return NavState(t0, s.p, s.v, s.R)


def _load_inputs(cfg):
    """(samples, truth, origin_ns, gravity) from imu/truth files or a scenario."""
    if cfg.get("scenario"):
        scenario = load_scenario(cfg["scenario"], imu_rate=cfg.get("rate_hz"),
                                 gravity_z=cfg.get("gravity"))
        samples, truth = generate(scenario, cfg.get("seed", 0))
        return samples, truth, 0, scenario.gravity
    origin = _first_stamp_ns(cfg["imu"])
    samples = dio.read_imu_log(cfg["imu"], origin)
    truth = dio.read_truth(cfg["truth"], origin) if cfg.get("truth") else None
    return samples, truth, origin, _gravity(cfg)


def cmd_simulate(cfg: dict) -> int:
    scenario = load_scenario(cfg["scenario"], imu_rate=cfg.get("rate_hz"),
                             gravity_z=cfg.get("gravity"))
    samples, truth = generate(scenario, cfg["seed"])
    out = Path(cfg["out"])
    dio.write_imu_log(out / "imu.csv", samples)
    dio.write_trajectory(out / "truth.csv", truth)
    print(f"samples={len(samples)} truth_states={len(truth)}")
    print(f"wrote {out / 'imu.csv'} {out / 'truth.csv'}")
    return 0


def cmd_integrate(cfg: dict) -> int:
    samples, truth, origin, g = _load_inputs(cfg)
    keyframes = dio.select_keyframes(samples, cfg["keyframe_hz"])
    x0 = _initial_state(truth, samples[0].t)
    states = integrate_keyframes(x0, samples, keyframes, cfg["model"], g)
    out = Path(cfg["out"])
    path = out / f"trajectory_{cfg['model']}.csv"
    dio.write_trajectory(path, states, origin)
    print(f"samples={len(samples)} keyframes={len(keyframes)} model={cfg['model']}")
    print(f"wrote {path}")
    return 0


def _windows(samples, keyframes, reset_every):
    """Split keyframe positions into reset windows ``(start, end)`` over the keyframe list."""
    t0 = samples[keyframes[0]].t
    bins = [int(math.floor((samples[k].t - t0) / reset_every + 1e-9)) for k in keyframes]
    starts = [0] + [p for p in range(1, len(keyframes)) if bins[p] != bins[p - 1]]
    ends = starts[1:] + [len(keyframes) - 1]
    return [(s, e) for s, e in zip(starts, ends) if e > s]


def _percent(base: float, new: float) -> float:
    if base > 0:
        return improvement_percent(base, new)
    return 0.0 if new == base else float("nan")


def run_compare(samples, truth: Trajectory, keyframes, g, reset_every=None, align="none"):
    """Integrate both models over the same input and score them against truth.

    Returns ``(estimates, reports, windows)``; ``windows`` is a list of
    ``(t_start, t_end, count, rmse_classical, rmse_proposed)`` in reset mode.
    """
    estimates, reports, windows = {}, {}, []
    if not reset_every:
        x0 = _initial_state(truth, samples[keyframes[0]].t)
        for model in (CLASSICAL, PROPOSED):
            est = Trajectory(integrate_keyframes(x0, samples, keyframes, model, g))
            al = align_rigid(est, truth) if align == "se3" else AlignmentResult.identity()
            estimates[model] = est
            reports[model] = compute_errors(est, truth, al)
        return estimates, reports, windows

    collected = {CLASSICAL: [], PROPOSED: []}
    for s, e in _windows(samples, keyframes, reset_every):
        kf = keyframes[s : e + 1]
        try:
            x0 = _initial_state(truth, samples[kf[0]].t)
        except ConfigError:
            log.warning("no truth at window start t=%.6f; window skipped", samples[kf[0]].t)
            continue
        row = [samples[kf[0]].t, samples[kf[-1]].t]
        for model in (CLASSICAL, PROPOSED):
            est = Trajectory(integrate_keyframes(x0, samples, kf, model, g)[1:])
            rep = compute_errors(est, truth)
            collected[model].extend(est)
            if model == CLASSICAL:
                row.append(rep.count)
            row.append(rep.rmse)
        windows.append(tuple(row))
    for model, states in collected.items():
        est = Trajectory(states)
        estimates[model] = est
        reports[model] = compute_errors(est, truth)
    return estimates, reports, windows


def cmd_compare(cfg: dict) -> int:
    samples, truth, origin, g = _load_inputs(cfg)
    if truth is None:
        raise ConfigError("compare needs ground truth")
    keyframes = dio.select_keyframes(samples, cfg["keyframe_hz"])
    estimates, reports, windows = run_compare(
        samples, truth, keyframes, g, cfg.get("reset_every"), cfg.get("align", "none"))

    out = Path(cfg["out"])
    for model in (CLASSICAL, PROPOSED):
        dio.write_trajectory(out / f"trajectory_{model}.csv", estimates[model], origin)
        dio.atomic_write_text(out / f"errors_{model}.csv", error_rows(reports[model], origin))

    items = [("samples", len(samples)), ("keyframes", len(keyframes))]
    for model in (CLASSICAL, PROPOSED):
        items += summary_items(reports[model], prefix=f"{model}.")
    items.append(("improvement_percent",
                  _percent(reports[CLASSICAL].rmse, reports[PROPOSED].rmse)))
    if windows:
        rc = np.array([w[3] for w in windows])
        rp = np.array([w[4] for w in windows])
        items += [
            ("windows", len(windows)),
            ("median_window_rmse.classical", float(np.median(rc))),
            ("median_window_rmse.proposed", float(np.median(rp))),
            ("median_window_improvement_percent", _percent(float(np.median(rc)), float(np.median(rp)))),
            ("windows_proposed_not_worse", int(np.sum(rp <= rc))),
        ]
        lines = ["# t_start, t_end, count, rmse_classical, rmse_proposed"]
        for t_s, t_e, n, a, b in windows:
            lines.append(", ".join([dio.format_seconds(t_s, origin), dio.format_seconds(t_e, origin),
                                    str(n), repr(float(a)), repr(float(b))]))
        dio.atomic_write_text(out / "windows.csv", "\n".join(lines) + "\n")
    summary = format_summary(items)
    dio.atomic_write_text(out / "summary.txt", summary)
    sys.stdout.write(summary)
    return 0


def cmd_evaluate(cfg: dict) -> int:
    origin = _first_stamp_ns(cfg["truth"])
    truth = dio.read_truth(cfg["truth"], origin)
    estimate = dio.read_truth(cfg["estimate"], origin)
    align = cfg.get("align") or "se3"
    al = align_rigid(estimate, truth) if align == "se3" else AlignmentResult.identity()
    report = compute_errors(estimate, truth, al)
    out = Path(cfg["out"])
    dio.atomic_write_text(out / "errors.csv", error_rows(report, origin))
    items = summary_items(report)
    items += [("align", align)]
    items += [(f"align_rot_{i}{j}", float(al.rot[i, j])) for i in range(3) for j in range(3)]
    items += [(f"align_trans_{c}", float(al.trans[k])) for k, c in enumerate("xyz")]
    summary = format_summary(items)
    dio.atomic_write_text(out / "summary.txt", summary)
    sys.stdout.write(summary)
    return 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "integrate": cmd_integrate,
    "compare": cmd_compare,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        return _HANDLERS[args.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"imupreint {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
