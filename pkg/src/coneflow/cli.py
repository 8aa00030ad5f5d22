"""Command-line entry point: config ingestion, orchestration, result emission.

Subcommands: check, strict, pf-field, classify, simulate, hilbert. Settings
come from an optional TOML config file; explicit flags win over the file.
Exit codes: 0 success, 2 when a positivity verdict fails (NotPositive /
NonStrict), 1 on any error (with a JSON error envelope on stdout).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .dynsys import CoordKind, SystemDef
from .errors import ConeflowError, InvalidInput
from .expressions import system_from_expressions
from .geometry import Cone, hilbert_distance
from .integrate import DEFAULT_STEP, flow
from .limitsets import ClassifySettings, classify_limit_set
from .models import ModelSpec, make_model
from .pffield import pf_field_on_grid
from .positivity import StrictVerdict, Verdict, check_pointwise_positivity, check_strict_positivity
from .svg import render_pf_field

REPORT_KEYS = {
    "check": {"verdict", "min_margin", "samples_checked", "witnesses"},
    "strict": {"T", "diameter_estimate", "mu_T", "fitted_lambda", "strict_verdict", "pointwise_verdict"},
    "classify": {"verdict", "alignment_max", "period", "growth_flag", "location"},
}


def parse_report(path):
    """Re-parse an emitted JSON report and validate it against its schema."""
    payload = json.loads(Path(path).read_text())
    for kind, keys in REPORT_KEYS.items():
        if keys <= set(payload):
            return kind, payload
    raise InvalidInput(f"{path} does not match any report schema")


def _parse_param(text):
    if "=" not in text:
        raise InvalidInput(f"--param needs key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        try:
            return key.strip(), float(value)
        except ValueError as exc:
            raise InvalidInput(f"cannot parse parameter value {value!r}") from exc


def _parse_vector(text):
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise InvalidInput(f"cannot parse vector {text!r} (expected comma-separated numbers)") from exc


def _parse_box(text):
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        if not _:
            raise InvalidInput(f"box axis {part!r} must look like lo:hi")
        out.append((float(lo), float(hi)))
    return out


def _parse_grid(text):
    return tuple(int(v) for v in text.split(","))


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidInput(f"config parse error in {path}: {exc}") from exc
    except OSError as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc


def _build_system(args, cfg) -> SystemDef:
    model_name = args.model or cfg.get("model", {}).get("name")
    params = dict(cfg.get("model", {}).get("params", {}))
    for p in args.param or []:
        key, value = _parse_param(p)
        params[key] = value
    if model_name:
        return make_model(ModelSpec.parse(model_name, params))
    block = cfg.get("system")
    if block:
        cone = None
        if "cone" in cfg:
            cone = Cone.from_config(cfg["cone"])
        return system_from_expressions(
            state=block["state"],
            field_exprs=block["f"],
            params={**block.get("params", {}), **params},
            inputs=block.get("inputs", ()),
            topology=block.get("topology"),
            cone=cone,
            name=block.get("name", "config system"),
        )
    raise InvalidInput("no model given: pass --model NAME or a [model]/[system] config block")


def _default_box(sys: SystemDef):
    out = []
    for kind in sys.topology.kinds:
        if kind is CoordKind.CIRCLE:
            out.append((0.0, 2.0 * math.pi))
        elif kind is CoordKind.POSITIVE:
            out.append((0.2, 2.5))
        else:
            out.append((-2.0, 2.0))
    return out


def _setting(args, cfg, key, default):
    cli_value = getattr(args, key.replace("-", "_"), None)
    if cli_value is not None:
        return cli_value
    return cfg.get("settings", {}).get(key, default)


def _state_grid(sys, box, shape, seed, jitter=0.0):
    from .pffield import grid_axes

    axes = grid_axes(sys, box, shape)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        spans = np.array([hi - lo for lo, hi in box])
        pts = pts + rng.uniform(-jitter, jitter, size=pts.shape) * spans
    return [p for p in pts]


def _out_dir(args, cfg):
    target = args.out or cfg.get("output", {}).get("dir")
    if target is None:
        return None
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _cmd_check(args, cfg):
    sys_ = _build_system(args, cfg)
    box = _parse_box(args.box) if args.box else _default_box(sys_)
    shape = _parse_grid(args.grid) if args.grid else (13, 5)[: sys_.dim] or (13,)
    if len(shape) != sys_.dim:
        shape = tuple([max(3, int(round(60 ** (1 / sys_.dim))))] * sys_.dim)
    states = _state_grid(sys_, box, shape, args.seed)
    tol = _setting(args, cfg, "tolerance", 1e-9)
    report = check_pointwise_positivity(sys_, states, per_facet=int(_setting(args, cfg, "per-facet", 1)), tol=tol)
    out = _out_dir(args, cfg)
    if out:
        report.to_json(out / "check.json")
    print(f"verdict={report.verdict.value} min_margin={report.min_margin:.6g} samples={report.samples_checked}")
    return 0 if report.verdict is Verdict.POSITIVE else 2


def _cmd_strict(args, cfg):
    sys_ = _build_system(args, cfg)
    box = _parse_box(args.box) if args.box else _default_box(sys_)
    shape = _parse_grid(args.grid) if args.grid else (5, 3)
    states = _state_grid(sys_, box, shape, args.seed)
    T = float(_setting(args, cfg, "horizon", 2.0))
    h = float(_setting(args, cfg, "step", 1e-2))
    report = check_strict_positivity(sys_, states, T=T, h=h, per_facet=int(_setting(args, cfg, "per-facet", 1)))
    out = _out_dir(args, cfg)
    if out:
        report.to_json(out / "strict.json")
        report.decay_to_csv(out / "hilbert_decay.csv")
    lam = "none" if report.fitted_lambda is None else f"{report.fitted_lambda:.6g}"
    print(
        f"strict_verdict={report.strict_verdict.value} diameter={report.diameter_estimate:.6g} "
        f"mu_T={report.mu_T:.6g} fitted_lambda={lam}"
    )
    return 0 if report.strict_verdict is StrictVerdict.STRICT else 2


def _cmd_pf_field(args, cfg):
    sys_ = _build_system(args, cfg)
    box = _parse_box(args.box) if args.box else _default_box(sys_)
    shape = _parse_grid(args.grid) if args.grid else (11, 11)
    fld = pf_field_on_grid(
        sys_,
        box=box,
        shape=shape,
        window=float(_setting(args, cfg, "window", 3.0)),
        tol=float(_setting(args, cfg, "tolerance", 1e-3)),
        h=float(_setting(args, cfg, "step", 1e-2)),
        max_doublings=int(_setting(args, cfg, "max-doublings", 4)),
    )
    out = _out_dir(args, cfg)
    n_ok = int(np.count_nonzero(fld.ok_mask))
    if out:
        fld.to_csv(out / "pf_field.csv")
        if args.svg:
            trajs = []
            rng = np.random.default_rng(args.seed)
            for _ in range(int(_setting(args, cfg, "trajectories", 0))):
                x0 = np.array([rng.uniform(lo, hi) for lo, hi in box])
                try:
                    trajs.append(flow(sys_, x0, t_span=(0.0, 20.0), h=1e-2))
                except ConeflowError:
                    continue
            _emit(out / "pf_field.svg", render_pf_field(sys_, fld, box, trajectories=trajs))
    print(f"cells={len(fld.points)} ok={n_ok} failed={len(fld.errors)}")
    return 0


def _cmd_classify(args, cfg):
    sys_ = _build_system(args, cfg)
    x0 = _parse_vector(args.x0) if args.x0 else np.zeros(sys_.dim)
    settings = ClassifySettings(
        t_max=float(_setting(args, cfg, "t-max", 200.0)),
        h=float(_setting(args, cfg, "step", 1e-2)),
        tail_fraction=float(_setting(args, cfg, "tail-fraction", 0.5)),
        pf_window=float(_setting(args, cfg, "window", 3.0)),
        pf_tol=float(_setting(args, cfg, "tolerance", 1e-3)),
    )
    report = classify_limit_set(sys_, None, x0, settings)
    out = _out_dir(args, cfg)
    if out:
        report.to_json(out / "classify.json")
        report.omega.to_csv(out / "omega_points.csv")
    from .limitsets import verdict_table

    print(verdict_table([report]), end="")
    return 0


def _cmd_simulate(args, cfg):
    sys_ = _build_system(args, cfg)
    x0 = _parse_vector(args.x0) if args.x0 else np.zeros(sys_.dim)
    t_max = float(_setting(args, cfg, "t-max", 10.0))
    h = float(_setting(args, cfg, "step", DEFAULT_STEP))
    traj = flow(sys_, x0, t_span=(0.0, t_max), h=h)
    out = _out_dir(args, cfg)
    if out:
        if args.format == "json":
            traj.to_json(out / "trajectory.json")
        else:
            traj.to_csv(out / "trajectory.csv")
    print(f"samples={len(traj.times)} t_end={traj.times[-1]:.6g} x_end={traj.states[-1].tolist()}")
    return 0


def _cmd_hilbert(args, cfg):
    if args.cone:
        cone = Cone.from_config({"halfspaces": json.loads(args.cone)})
    elif "cone" in cfg:
        cone = Cone.from_config(cfg["cone"])
    else:
        raise InvalidInput("hilbert needs --cone '[[...], ...]' or a [cone] config block")
    vectors = [_parse_vector(v) for v in args.vector or []]
    if len(vectors) < 2:
        raise InvalidInput("hilbert needs at least two --vector arguments")
    rows = []
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            d = hilbert_distance(cone, vectors[i], vectors[j])
            rows.append((i, j, d.M, d.m, d.value))
    print("i,j,M,m,distance")
    for i, j, M, m, value in rows:
        print(f"{i},{j},{M:.12g},{m:.12g},{value:.12g}")
    out = _out_dir(args, cfg)
    if out:
        lines = ["i,j,M,m,distance"] + [f"{i},{j},{M:.17g},{m:.17g},{v:.17g}" for i, j, M, m, v in rows]
        _emit(out / "hilbert.csv", "\n".join(lines) + "\n")
    return 0


_HANDLERS = {
    "check": _cmd_check,
    "strict": _cmd_strict,
    "pf-field": _cmd_pf_field,
    "classify": _cmd_classify,
    "simulate": _cmd_simulate,
    "hilbert": _cmd_hilbert,
}


def _add_common(p):
    p.add_argument("--model", help="built-in model name")
    p.add_argument("--param", action="append", help="model parameter key=value (repeatable)")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--out", help="output directory for artifacts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--box", help="state box lo:hi,lo:hi")
    p.add_argument("--grid", help="grid resolution per axis, e.g. 21,21")
    p.add_argument("--step", type=float, default=None, help="integrator step")
    p.add_argument("--tolerance", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="coneflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "strict":
            p.add_argument("--horizon", type=float, default=None)
        if name in ("check", "strict"):
            p.add_argument("--per-facet", type=int, default=None)
        if name == "pf-field":
            p.add_argument("--window", type=float, default=None)
            p.add_argument("--max-doublings", type=int, default=None)
            p.add_argument("--svg", action="store_true")
            p.add_argument("--trajectories", type=int, default=None)
        if name == "classify":
            p.add_argument("--x0")
            p.add_argument("--t-max", type=float, default=None)
            p.add_argument("--tail-fraction", type=float, default=None)
            p.add_argument("--window", type=float, default=None)
        if name == "simulate":
            p.add_argument("--x0")
            p.add_argument("--t-max", type=float, default=None)
        if name == "hilbert":
            p.add_argument("--cone", help="halfspace rows as JSON, e.g. [[1,0],[0,1]]")
            p.add_argument("--vector", action="append", help="tangent vector a,b (repeatable)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config) if args.config else {}
        return _HANDLERS[args.command](args, cfg)
    except ConeflowError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())
