"""Command line: JSON-configured experiments with deterministic outputs.

Exit codes: 0 success, 1 a validation check failed, 2 blow-up, 3 config
error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from dataclasses import asdict
from typing import Any, Callable

import numpy as np

from . import flow, norms, selfsim, semigroup, solver
from .flow import BlowUpError, model_from_config
from .grid import Field, build_grid, derivative_values
from .storage import OutputDir, OutputError, RunManifest, config_hash

EXIT_OK, EXIT_CHECK, EXIT_BLOWUP, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4
OUT_ENV = "SDFLOW_OUT"


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "kernel": {"range": 12.0, "step": 0.01, "tol": 1e-12, "bound_orders": [0, 1, 2, 3, 4]},
    "simulate": {
        "model": "exponential",
        "grid": {"kind": "periodic", "L": 20.0, "N": 512},
        "scheme": None,
        "dt_policy": "geometric",
        "dt": None,
        "theta": 0.01,
        "t_floor": 1e-3,
        "safety": 1.0,
        "t_end": 10.0,
        "eps0": flow.DEFAULT_EPS0,
        "retention": "dyadic",
        "per_octave": 8,
        "t_first": 0.01,
        "initial": {"preset": "gaussian-slope", "amplitude": 0.05, "width": 0.5, "mode": 1,
                    "a": 0.1, "b": -0.1, "w": 1.0},
    },
    "decay": {
        "model": "exponential",
        "L": 64 * math.pi,
        "N": 4096,
        "amplitude": 0.05,
        "width": 0.5,
        "t_end": 256.0,
        "theta": 0.01,
        "per_octave": 16,
        "fit_window": [10.0, 200.0],
        "z_k": 2,
        "z_mu": norms.DEFAULT_MU,
        "z_horizons": [32.0, 64.0, 128.0, 256.0],
    },
    "selfsim": {
        "ramp": {"a": 0.1, "b": -0.1, "w": 1.0},
        "model": "exponential",
        "sigmas": [1, 2, 4, 8, 16],
        "grid": {"L": 512.0, "N": 8192},
        "reference": {"t_ref": 1e6, "L": 512.0, "N": 8192},
        "x_window": [-2.0, 2.0],
        "times": [0.25, 0.375, 0.5, 0.75, 1.0],
        "y_range": 4.0,
        "y_points": 401,
        "theta": 0.01,
    },
    "rescale": {
        "ramp": {"a": 0.1, "b": -0.1, "w": 1.0},
        "model": "exponential",
        "sigmas": [1, 2, 4],
        "grid": {"L": 128.0, "N": 2048},
        "x_window": [-2.0, 2.0],
        "x_points": 81,
        "times": [0.25, 0.5, 1.0],
        "theta": 0.01,
    },
    "validate": {"seed": 20240601, "kernel_range": 16.0},
}

TOP_KEYS = {"subcommand", "out_dir", "overwrite", "params"}


# -- config handling ---------------------------------------------------------


def _merge(defaults: Any, given: Any, path: str) -> Any:
    if isinstance(defaults, dict) and defaults and not _free_form(path):
        if not isinstance(given, dict):
            raise ConfigError(f"{path or 'params'}: expected an object")
        unknown = sorted(set(given) - set(defaults))
        if unknown:
            raise ConfigError(f"{path or 'params'}: unknown key(s) {', '.join(unknown)}")
        out = copy.deepcopy(defaults)
        for k, v in given.items():
            out[k] = _merge(defaults[k], v, f"{path}.{k}" if path else k)
        return out
    if defaults is None or _free_form(path):
        return copy.deepcopy(given)
    if isinstance(defaults, bool):
        if not isinstance(given, bool):
            raise ConfigError(f"{path}: expected true/false")
        return given
    if isinstance(defaults, (int, float)):
        if isinstance(given, bool) or not isinstance(given, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return given
    if isinstance(defaults, str):
        if not isinstance(given, (str, dict)):
            raise ConfigError(f"{path}: expected a string")
        return copy.deepcopy(given)
    if isinstance(defaults, list):
        if not isinstance(given, list):
            raise ConfigError(f"{path}: expected a list")
        return copy.deepcopy(given)
    return copy.deepcopy(given)


def _free_form(path: str) -> bool:
    # model may be a name or a custom-model object
    return path.endswith("model")


def resolve_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    sub = raw.get("subcommand")
    if sub not in DEFAULTS:
        raise ConfigError(f"subcommand must be one of {', '.join(DEFAULTS)}")
    params = _merge(DEFAULTS[sub], raw.get("params", {}), "")
    if "model" in params:
        try:
            model_from_config(params["model"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"model: {exc}") from exc
    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out_dir must be a string")
    overwrite = raw.get("overwrite", False)
    if not isinstance(overwrite, bool):
        raise ConfigError("overwrite must be true/false")
    return {"subcommand": sub, "out_dir": out_dir, "overwrite": overwrite, "params": params}


def load_config_text(text: str) -> dict:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return resolve_config(raw)


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2)


def _set_leaf(params: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    cur = params
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


# -- experiments -------------------------------------------------------------


def _grid_of(spec: dict, kind: str | None = None):
    return build_grid(kind or spec.get("kind", "periodic"), spec["L"], int(spec["N"]))


def _tag(sigma: float) -> str:
    return f"{sigma:g}".replace(".", "p")


def exp_kernel(p: dict, out: OutputDir, h: str) -> dict:
    step, rng = float(p["step"]), float(p["range"])
    if not step > 0 or not rng > 0:
        raise ConfigError("kernel range and step must be positive")
    n = int(round(rng / step)) + 1
    ys = np.linspace(0.0, rng, n)
    quad = semigroup.kernel_quadrature()
    out.write_csv(f"kernel_{h}.csv", ["y", "bbar", "dbbar"],
                  zip(ys, quad.profile(ys), quad.profile(ys, 1)))
    table = semigroup.KernelTable.build(rng, step, p["tol"])
    bounds = []
    for l in p["bound_orders"]:
        try:
            bounds.append(asdict(semigroup.fit_kernel_bound(int(l), rng, step)))
        except (semigroup.QuadratureError, ValueError) as exc:
            bounds.append({"order": int(l), "error": str(exc)})
    summary = {
        "bbar0": float(quad.profile(np.array([0.0]))[0]),
        "bbar0_exact": math.gamma(1.25) / math.pi,
        "tol": p["tol"],
        "mass_trapezoid": table.mass(),
        "symmetry_defect": table.symmetry_defect(),
        "bounds": bounds,
    }
    out.write_json(f"kernel_bounds_{h}.json", summary)
    return summary


def _initial(p: dict, grid) -> tuple[Field, float | None]:
    ini = p["initial"]
    preset = ini["preset"]
    x = grid.x
    if preset == "sine":
        v = ini["amplitude"] * np.sin(ini["mode"] * math.pi * x / grid.half_length)
        return Field(grid, v, 0.0, "v"), None
    if preset == "gaussian-slope":
        return gaussian_slope(grid, ini["amplitude"], ini["width"]), None
    if preset == "smoothed-ramp":
        ramp = selfsim.RampSpec(ini["a"], ini["b"], ini["w"])
        return selfsim.ramp_initial(ramp, grid)
    raise ConfigError(f"unknown initial preset {preset!r}")


def gaussian_slope(grid, amplitude: float, width: float) -> Field:
    """Gaussian slope scaled so that ``sup|v| + sup|v_x| = amplitude``."""
    g = np.exp(-grid.x**2 / (2.0 * width**2))
    norm = np.max(np.abs(g)) + np.max(np.abs(derivative_values(g, grid, 1)))
    return Field(grid, amplitude * g / norm, 0.0, "v")


def _geometric_times(t_first: float, t_end: float, per_octave: int) -> list[float]:
    k = math.ceil(per_octave * math.log2(t_end / t_first))
    ts = [t_end * 2.0 ** (-j / per_octave) for j in range(k + 1)]
    return sorted(t for t in ts if t > 0)


def exp_simulate(p: dict, out: OutputDir, h: str) -> dict:
    grid = _grid_of(p["grid"])
    model = model_from_config(p["model"])
    scheme = p["scheme"] or ("if_imex_spectral" if grid.periodic else "semi_implicit_fd")
    try:
        cfg = solver.SolverConfig(
            scheme=scheme, dt_policy=p["dt_policy"], t_end=p["t_end"], dt=p["dt"], safety=p["safety"],
            theta=p["theta"], t_floor=p["t_floor"], eps0=p["eps0"], retention=p["retention"],
            per_octave=p["per_octave"],
            snapshot_times=_geometric_times(min(p["t_first"], p["t_end"]), p["t_end"], p["per_octave"]),
        )
        v0, anchor = _initial(p, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    blow: BlowUpError | None = None
    try:
        traj = solver.integrate(v0, cfg, model, anchor=anchor)
    except BlowUpError as exc:
        blow, traj = exc, exc.trajectory
    files = []
    for i, snap in enumerate(traj):
        name = f"snapshots/v_{h}_{i:04d}.csv"
        out.write_field(name, snap)
        files.append(name)
        if anchor is not None:
            u = selfsim.u_field(traj, i)
            name = f"snapshots/u_{h}_{i:04d}.csv"
            out.write_field(name, u)
            files.append(name)
    summary = {"snapshots": files, "records": traj.records, "times": traj.times.tolist(),
               "steps": (traj.meta or {}).get("steps"), "blow_up": None}
    if blow is not None:
        if blow.snapshot is not None:
            out.write_field(f"snapshots/blowup_{h}.csv", blow.snapshot)
        summary["blow_up"] = str(blow)
    out.write_json(f"trajectory_{h}.json", summary)
    if blow is not None:
        raise blow
    return {"snapshots": len(files), "final_time": float(traj.times[-1])}


def decay_run(p: dict) -> tuple[solver.Trajectory, flow.CurvatureModel]:
    grid = build_grid("periodic", p["L"], int(p["N"]))
    model = model_from_config(p["model"])
    times = _geometric_times(2.0**-6, p["t_end"], int(p["per_octave"]))
    cfg = solver.SolverConfig(t_end=p["t_end"], dt_policy="geometric", theta=p["theta"],
                              snapshot_times=times, retention="dyadic", per_octave=int(p["per_octave"]))
    v0 = gaussian_slope(grid, p["amplitude"], p["width"])
    return solver.integrate(v0, cfg, model), model


def decay_series(traj, model) -> list[tuple[float, float, float, float, float]]:
    rows = []
    for snap in traj:
        if snap.time <= 0:
            continue
        g = snap.grid
        v = snap.values
        vx, vxx = derivative_values(v, g, 1), derivative_values(v, g, 2)
        ut = derivative_values(flow.flux_values(v, vx, vxx, model), g, 1)
        rows.append((snap.time, *(float(np.max(np.abs(a))) for a in (v, vx, vxx, ut))))
    return rows


DECAY_KEYS = ["l=1,m=0", "l=2,m=0", "l=3,m=0", "l=0,m=1"]


def exp_decay(p: dict, out: OutputDir, h: str) -> dict:
    traj, model = decay_run(p)
    rows = decay_series(traj, model)
    win = tuple(p["fit_window"])
    fits = {k: norms.decay_fit([(r[0], r[i + 1]) for r in rows], win).to_dict() for i, k in enumerate(DECAY_KEYS)}
    z = {f"{T:g}": norms.z_norm(traj, int(p["z_k"]), p["z_mu"], T).to_dict() for T in p["z_horizons"]}
    out.write_csv(f"decay_series_{h}.csv", ["t", "u_x", "u_xx", "u_xxx", "u_t"], rows)
    summary = {"fits": fits, "z_norm": z, "predicted": {"l=1,m=0": -0.25, "l=2,m=0": -0.5,
                                                       "l=3,m=0": -0.75, "l=0,m=1": -1.0}}
    out.write_json(f"decay_{h}.json", summary)
    return {k: v["slope"] for k, v in fits.items()}


def _ramp_of(p: dict) -> selfsim.RampSpec:
    r = p["ramp"]
    return selfsim.RampSpec(r["a"], r["b"], r["w"])


def exp_selfsim(p: dict, out: OutputDir, h: str) -> dict:
    ramp = _ramp_of(p)
    model = model_from_config(p["model"])
    ys = np.linspace(-p["y_range"], p["y_range"], int(p["y_points"]))
    ref = selfsim.reference_profile(ramp, build_grid("periodic", p["reference"]["L"], int(p["reference"]["N"])),
                                    p["reference"]["t_ref"], ys, p["theta"])
    grid = build_grid("periodic", p["grid"]["L"], int(p["grid"]["N"]))
    xw = p["x_window"]
    rows, run = selfsim.convergence_study(ramp, model, p["sigmas"], ref, grid, (tuple(xw), (min(p["times"]), max(p["times"]))),
                                          p["times"], theta=p["theta"])
    lin = selfsim.linear_profile(ramp, ys)
    t_top = max(p["times"])
    for s in p["sigmas"]:
        prof = selfsim.extract_profile(run.trajectory, float(s) ** 4 * t_top, ys)
        out.write_csv(f"profile_sigma{_tag(s)}.csv", ["y", "phi", "phi_ref", "phi_lin"],
                      zip(ys, prof.values, ref.values, lin.values),
                      {"sigma": s, "t": t_top, "config_hash": h})
    summary = {"rows": [r.to_dict() for r in rows], "reference_t": p["reference"]["t_ref"]}
    out.write_json(f"selfsim_{h}.json", summary)
    return summary


def exp_rescale(p: dict, out: OutputDir, h: str) -> dict:
    ramp = _ramp_of(p)
    model = model_from_config(p["model"])
    grid = build_grid("periodic", p["grid"]["L"], int(p["grid"]["N"]))
    ts = [float(t) for t in p["times"]]
    snaps = sorted({float(s) ** 4 * t for s in p["sigmas"] for t in ts})
    cfg = solver.SolverConfig(t_end=snaps[-1], dt_policy="geometric", theta=p["theta"], snapshot_times=snaps)
    run = selfsim.run_ramp(ramp, model, grid, cfg)
    xs = np.linspace(p["x_window"][0], p["x_window"][1], int(p["x_points"]))
    written = []
    for s in p["sigmas"]:
        win = selfsim.rescale_solution(run.trajectory, float(s), xs, ts)
        rows = [(t, x, val) for t, row in zip(ts, win.values) for x, val in zip(xs, row)]
        name = f"rescaled_sigma{_tag(s)}_{h}.csv"
        out.write_csv(name, ["t", "x", "u_sigma"], rows, {"sigma": s})
        written.append(name)
    out.write_json(f"rescale_{h}.json", {"files": written})
    return {"files": written}


def exp_validate(p: dict, out: OutputDir, h: str) -> dict:
    from .validation import run_checks

    checks = run_checks(seed=int(p["seed"]), kernel_range=float(p["kernel_range"]))
    summary = {"checks": checks, "passed": all(c["passed"] for c in checks)}
    out.write_json(f"validate_{h}.json", summary)
    return summary


EXPERIMENTS: dict[str, Callable[[dict, OutputDir, str], dict]] = {
    "kernel": exp_kernel,
    "simulate": exp_simulate,
    "decay": exp_decay,
    "selfsim": exp_selfsim,
    "rescale": exp_rescale,
    "validate": exp_validate,
}


def execute(cfg: dict, stream=sys.stdout) -> int:
    """Run a resolved config; returns the exit code."""
    h = config_hash({"subcommand": cfg["subcommand"], "params": cfg["params"]})
    root = cfg["out_dir"] or os.environ.get(OUT_ENV) or os.path.join(os.getcwd(), "sdflow_out")
    manifest = RunManifest({"subcommand": cfg["subcommand"], "params": cfg["params"]})
    try:
        out = OutputDir(root, cfg["overwrite"])
        code = EXIT_OK
        try:
            result = EXPERIMENTS[cfg["subcommand"]](cfg["params"], out, h)
            manifest.status = "ok"
            if cfg["subcommand"] == "validate" and not result["passed"]:
                manifest.status, code = "check-failed", EXIT_CHECK
                failed = [c["name"] for c in result["checks"] if not c["passed"]]
                print("failed checks: " + ", ".join(failed), file=sys.stderr)
        except BlowUpError as exc:
            manifest.status, code = "blow-up", EXIT_BLOWUP
            print(f"blow-up: {exc}", file=sys.stderr)
        manifest.finished = time.time()
        manifest.outputs = list(out.written)
        out.overwrite = True
        out.write_json(f"manifest_{cfg['subcommand']}_{h}.json", manifest.to_dict())
    except OutputError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{cfg['subcommand']} [{h}] -> {root} ({manifest.status})", file=stream)
    return code


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdflow", description="Surface diffusion flow laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (params object or full config)")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./sdflow_out)")
        sp.add_argument("--overwrite", action="store_true")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a parameter leaf; VALUE is parsed as JSON when possible")

    p_run = sub.add_parser("run", help="run a full JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--out")
    p_run.add_argument("--overwrite", action="store_true")

    sp = sub.add_parser("kernel", help="tabulate the kernel profile")
    common(sp)
    sp.add_argument("--range", type=float, dest="p_range")
    sp.add_argument("--step", type=float, dest="p_step")
    sp.add_argument("--tol", type=float, dest="p_tol")

    sp = sub.add_parser("simulate", help="integrate the flow")
    common(sp)
    sp.add_argument("--model", dest="p_model")
    sp.add_argument("--grid", choices=["periodic", "truncated"], dest="p_grid.kind")
    sp.add_argument("--L", type=float, dest="p_grid.L")
    sp.add_argument("--N", type=int, dest="p_grid.N")
    sp.add_argument("--dt-policy", choices=[d.value for d in solver.DtPolicy], dest="p_dt_policy")
    sp.add_argument("--dt", type=float, dest="p_dt")
    sp.add_argument("--t-end", type=float, dest="p_t_end")
    sp.add_argument("--initial", nargs="+", metavar="PRESET", dest="initial",
                    help="sine [amp] | gaussian-slope [amp] | smoothed-ramp A B W")

    for name, help_ in (("decay", "decay exponents and Z-norm"), ("selfsim", "convergence to self-similarity"),
                        ("rescale", "rescaled solutions on a compact window"), ("validate", "invariant suite")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        if name in ("decay", "selfsim", "rescale"):
            sp.add_argument("--model", dest="p_model")
    return ap


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config_from_args(args) -> dict:
    if args.command == "run":
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = load_config_text(text)
        if args.out:
            cfg["out_dir"] = args.out
        if args.overwrite:
            cfg["overwrite"] = True
        return cfg
    params: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if isinstance(raw, dict) and "subcommand" in raw:
            if raw["subcommand"] != args.command:
                raise ConfigError(f"config is for {raw['subcommand']!r}, not {args.command!r}")
            params = raw.get("params", {})
        else:
            params = raw
    params = copy.deepcopy(params)
    for key, val in vars(args).items():
        if key.startswith("p_") and val is not None:
            _set_leaf(params, key[2:], val)
    if getattr(args, "initial", None):
        preset, *rest = args.initial
        ini: dict = {"preset": preset}
        try:
            nums = [float(r) for r in rest]
        except ValueError as exc:
            raise ConfigError(f"--initial: {exc}") from exc
        if preset == "smoothed-ramp":
            if len(nums) != 3:
                raise ConfigError("--initial smoothed-ramp needs A B W")
            ini.update(a=nums[0], b=nums[1], w=nums[2])
        elif nums:
            ini["amplitude"] = nums[0]
        _set_leaf(params, "initial", {**params.get("initial", {}), **ini})
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        _set_leaf(params, key, _parse_value(val))
    return resolve_config({"subcommand": args.command, "params": params, "out_dir": args.out,
                           "overwrite": bool(args.overwrite)})


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
