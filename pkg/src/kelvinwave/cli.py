"""Scenario orchestration: JSON configs, subcommands, binary/image export.

Subcommands: ``run`` (full pipeline plus frame export and a cost report),
``reference`` (truncated-box oracle), ``compare`` (pipeline vs reference),
``convergence`` (order-of-accuracy study).  The ``KW_THREADS`` environment
variable overrides the stencil worker count and never changes results.

Exit codes: 0 success, 2 configuration error, 3 CFL violation, 4 numeric
blow-up.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import frameio, oracle
from .errors import CFLViolation, ConfigError, InvalidSpec, NumericBlowUp
from .kelvin import (
    CallableField,
    DiskObstacle,
    GaussianPulse,
    NoObstacle,
    PolygonObstacle,
    ProblemSpec,
    size_grid,
)
from .query import query_frame
from .solver import run
from .stencil import backend_name, default_workers


@dataclass(frozen=True)
class ScenarioConfig:
    spec: ProblemSpec
    dxi: float
    dtau: float
    init_mode: str
    out_dir: Path
    stride: int
    query_times: tuple
    image_window: tuple | None
    image_resolution: tuple
    reference: dict | None
    compare: dict | None
    convergence: dict | None


def _check_keys(obj, where: str, required: tuple, optional: tuple = ()) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"unknown key '{key}' in {where}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"missing key '{key}' in {where}")


def _number(obj, key: str, where: str, positive: bool = False) -> float:
    value = obj[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"key '{key}' in {where} must be a number")
    if positive and not value > 0:
        raise ConfigError(f"key '{key}' in {where} must be positive")
    return float(value)


def _parse_field(obj, where: str):
    _check_keys(obj, where, ("type",), ("amplitude", "sigma", "center"))
    if obj["type"] != "gaussian":
        raise ConfigError(f"unsupported field type {obj['type']!r} in {where}")
    for key in ("amplitude", "sigma", "center"):
        if key not in obj:
            raise ConfigError(f"missing key '{key}' in {where}")
    return GaussianPulse(_number(obj, "amplitude", where),
                         _number(obj, "sigma", where, positive=True),
                         obj["center"])


def _parse_obstacle(obj, where: str):
    _check_keys(obj, where, ("type",), ("center", "radius", "vertices"))
    kind = obj["type"]
    if kind == "none":
        return NoObstacle()
    if kind == "disk":
        if "center" not in obj or "radius" not in obj:
            raise ConfigError(f"disk obstacle in {where} needs 'center' and 'radius'")
        return DiskObstacle(obj["center"], _number(obj, "radius", where, positive=True))
    if kind == "polygon":
        if "vertices" not in obj:
            raise ConfigError(f"polygon obstacle in {where} needs 'vertices'")
        return PolygonObstacle(obj["vertices"])
    raise ConfigError(f"unknown obstacle type {kind!r} in {where}")


def parse_config(text: str) -> ScenarioConfig:
    """Validate a JSON scenario document; diagnostics name the offending key."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    _check_keys(doc, "config", ("n", "t0", "x0", "initial", "grid"),
                ("obstacle", "apex_shift", "init_mode", "output",
                 "reference", "compare", "convergence"))

    n = doc["n"]
    if n not in (1, 2, 3):
        raise ConfigError("key 'n' in config must be 1, 2 or 3")
    t0 = _number(doc, "t0", "config", positive=True)
    x0 = _number(doc, "x0", "config", positive=True)

    _check_keys(doc["initial"], "initial", ("f",), ("h",))
    f = _parse_field(doc["initial"]["f"], "initial.f")
    h = None
    if doc["initial"].get("h") is not None:
        h = _parse_field(doc["initial"]["h"], "initial.h")

    obstacle = NoObstacle()
    if "obstacle" in doc:
        obstacle = _parse_obstacle(doc["obstacle"], "obstacle")

    apex_shift = None
    if doc.get("apex_shift") is not None:
        shift = doc["apex_shift"]
        _check_keys(shift, "apex_shift", ("space", "time"))
        apex_shift = (shift["space"], _number(shift, "time", "apex_shift"))

    try:
        spec = ProblemSpec(n, t0, x0, f, h, obstacle, apex_shift)
    except InvalidSpec as exc:
        raise ConfigError(str(exc)) from exc

    _check_keys(doc["grid"], "grid", ("dxi", "dtau"))
    dxi = _number(doc["grid"], "dxi", "grid", positive=True)
    dtau = _number(doc["grid"], "dtau", "grid", positive=True)

    init_mode = doc.get("init_mode", "activation")
    if init_mode not in ("activation", "flat"):
        raise ConfigError("key 'init_mode' in config must be 'activation' or 'flat'")

    out = doc.get("output", {})
    _check_keys(out, "output", (),
                ("dir", "stride", "query_times", "image_window", "image_resolution"))
    out_dir = Path(out.get("dir", "out"))
    stride = int(out.get("stride", 1))
    if stride < 1:
        raise ConfigError("key 'stride' in output must be >= 1")
    query_times = tuple(float(t) for t in out.get("query_times", ()))
    image_window = out.get("image_window")
    if image_window is not None:
        image_window = tuple(tuple(map(float, pair)) for pair in image_window)
        if len(image_window) != n:
            raise ConfigError("key 'image_window' in output needs one (min, max) pair per axis")
    resolution = out.get("image_resolution", [256] * n)
    if isinstance(resolution, int):
        resolution = [resolution] * n
    image_resolution = tuple(int(r) for r in resolution)
    if len(image_resolution) != n or any(r < 2 for r in image_resolution):
        raise ConfigError("key 'image_resolution' in output needs one count >= 2 per axis")

    reference = doc.get("reference")
    if reference is not None:
        _check_keys(reference, "reference", ("dx", "dt", "t_max"),
                    ("box_half", "crop_radius", "record_every"))
    comp = doc.get("compare")
    if comp is not None:
        _check_keys(comp, "compare", ("t_min", "t_max", "radius"))
    conv = doc.get("convergence")
    if conv is not None:
        _check_keys(conv, "convergence", ("scenario",), ("levels", "base_cells", "base_dxi"))

    return ScenarioConfig(spec, dxi, dtau, init_mode, out_dir, stride, query_times,
                          image_window, image_resolution, reference, comp, conv)


def _load_config(path: str) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def cmd_run(config: ScenarioConfig) -> int:
    spec = config.spec
    gs = size_grid(spec.normalized().x0, spec.normalized().t0,
                   config.dxi, config.dtau, spec.n)
    start = time.perf_counter()
    frames = run(spec, gs, stride=config.stride, init_mode=config.init_mode)
    elapsed = time.perf_counter() - start

    config.out_dir.mkdir(parents=True, exist_ok=True)
    frameio.write_frameset(config.out_dir / "frames.kwf", frames)

    for t in config.query_times:
        window = config.image_window
        if window is None:
            reach = spec.x0 + (t - spec.t0)
            window = tuple((-reach, reach) for _ in range(spec.n))
        values = query_frame(frames, spec, t, window, config.image_resolution)
        tag = f"{t:.6f}"
        frameio.write_physical_frame(config.out_dir / f"frame_t{tag}.kwf",
                                     values, window, t)
        image = values if spec.n > 1 else values[None, :]
        frameio.write_pgm(config.out_dir / f"frame_t{tag}.pgm",
                          image.reshape(image.shape[0], -1), comment=f"t={tag}")

    report = {
        "M": gs.M,
        "N": gs.N,
        "points_per_axis": gs.points_per_axis,
        "dxi": gs.dxi,
        "dtau": gs.dtau,
        "steps_run": int(round((frames.taus[-1] - frames.taus[0]) / gs.dtau)),
        "frames_recorded": int(frames.taus.size),
        "wall_time_s": elapsed,
        "backend": backend_name(),
        "workers": default_workers(),
    }
    (config.out_dir / "cost_report.json").write_text(json.dumps(report, indent=2))
    print(f"run complete: M={gs.M} N={gs.N} wall={elapsed:.3f}s "
          f"backend={report['backend']} workers={report['workers']}")
    return 0


def cmd_reference(config: ScenarioConfig) -> int:
    if config.reference is None:
        raise ConfigError("missing key 'reference' in config")
    ref = config.reference
    result = oracle.run_reference(
        config.spec, float(ref["dx"]), float(ref["dt"]), float(ref["t_max"]),
        box_half=ref.get("box_half"), crop_radius=ref.get("crop_radius"),
        record_every=int(ref.get("record_every", 1)))
    config.out_dir.mkdir(parents=True, exist_ok=True)
    path = config.out_dir / "reference.kwf"
    window = tuple((float(a[0]), float(a[-1])) for a in result.axes)
    with open(path, "wb") as fh:
        for t, frame in zip(result.times, result.frames):
            frameio.write_record(fh, config.spec.n, frame.shape,
                                  [w[0] for w in window], result.dx, t, frame)
    print(f"reference complete: {result.times.size} frames, dx={result.dx:.5g}, "
          f"dt={result.dt:.5g}, box_half={result.box_half}")
    return 0


def cmd_compare(config: ScenarioConfig) -> int:
    if config.reference is None or config.compare is None:
        raise ConfigError("compare needs both 'reference' and 'compare' sections")
    spec = config.spec
    gs = size_grid(spec.normalized().x0, spec.normalized().t0,
                   config.dxi, config.dtau, spec.n)
    frames = run(spec, gs, stride=config.stride, init_mode=config.init_mode)
    ref_cfg = config.reference
    reference = oracle.run_reference(
        spec, float(ref_cfg["dx"]), float(ref_cfg["dt"]), float(ref_cfg["t_max"]),
        box_half=ref_cfg.get("box_half"), crop_radius=ref_cfg.get("crop_radius"),
        record_every=int(ref_cfg.get("record_every", 1)))
    window = (float(config.compare["t_min"]), float(config.compare["t_max"]),
              float(config.compare["radius"]))
    report = oracle.compare(frames, spec, reference, window,
                            resolutions={"dxi": gs.dxi, "dtau": gs.dtau,
                                         "dx": reference.dx, "dt": reference.dt})
    config.out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"description": report.description, "l2_rel": report.l2_rel,
               "linf_rel": report.linf_rel, "points": int(report.residuals.size),
               "resolutions": report.resolutions}
    (config.out_dir / "compare_report.json").write_text(json.dumps(payload, indent=2))
    print(report.summary())
    return 0


def cmd_convergence(config: ScenarioConfig) -> int:
    if config.convergence is None:
        raise ConfigError("missing key 'convergence' in config")
    conv = dict(config.convergence)
    scenario = conv.pop("scenario")
    levels = int(conv.pop("levels", 3))
    report = oracle.convergence_study(scenario, levels, **conv)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"scenario": report.scenario,
               "deltas": report.deltas.tolist(),
               "errors": report.errors.tolist(),
               "order": report.order,
               "fit_residual": report.fit_residual}
    (config.out_dir / "convergence_report.json").write_text(json.dumps(payload, indent=2))
    print(report.summary())
    return 0


_COMMANDS = {
    "run": cmd_run,
    "reference": cmd_reference,
    "compare": cmd_compare,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kelvinwave",
        description="Wave propagation on unbounded spacetime domains")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the scenario JSON")
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CFLViolation as exc:
        print(f"CFL violation: {exc}", file=sys.stderr)
        return 3
    except NumericBlowUp as exc:
        print(f"numeric blow-up: {exc}", file=sys.stderr)
        return 4
    except InvalidSpec as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
