"""Command-line entry point.

Every subcommand writes one table, as CSV (default) or a JSON list of row
objects with the same keys, to stdout or ``--out``. A run manifest goes to
``<out>.manifest.json`` when ``--out`` is given and to stderr otherwise, so
the data stream itself stays byte-identical between identical runs.

Exit codes: 0 success, 2 invalid arguments, 3 infeasible parameters.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InfeasibleError, NoFiniteDelayError, PacketizationError
from .model import NetworkParams, Scheme, evaluate_curve, feasibility
from .ntn import (
    CASE_STUDY_BASE,
    DEFAULT_RTT_GRID_MS,
    LAMBDA_B_CAP,
    PRESETS,
    load_rtt_grid,
    scenarios_from_dict,
    relative_comparison,
    scaling_study,
)
from .optimizer import DEFAULT_L_MAX, SWEEP_AXES, optimize_packet_size, parameter_sweep
from .sim import SimConfig, child_seed, jitter_curve, simulate
from .tradeoff import THRESHOLD_AXES, classify_region, cross_delays, threshold_sweep, thresholds

CONFIG_ENV = "ALOHA_PKT_CONFIG"
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

# flag dest -> NetworkParams field
PARAM_FLAGS = {
    "n": "n",
    "lambda_b": "lambda_b",
    "r": "R",
    "q": "q",
    "delta_cf": "delta_cf",
    "delta_cb_f": "delta_cb_f",
    "delta_cb_s": "delta_cb_s",
}
NTN_DEFAULT_VALUES = {"n": "10:500:50", "lambda_b": f"1:{LAMBDA_B_CAP:g}:50:log"}
OPTIONAL_FIELDS = {"delta_cf": 0.005, "delta_cb_f": 0.003, "delta_cb_s": 0.008}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int
    tool_version: str
    timestamp: str


# ---------------------------------------------------------------- formatting

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def _json_value(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    f = float(v)
    if not math.isfinite(f):
        return _fmt(f)
    return float(f"{f:.10g}")


def render(columns: list[str], rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        data = [{c: _json_value(r.get(c)) for c in columns} for r in rows]
        return json.dumps(data, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------- argument parsing

def parse_grid(text: str, integer: bool = False) -> list:
    """``lo:hi:points[:log]`` or a comma-separated list."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin")):
                raise ValueError
            lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
            if k < 1 or hi < lo or (k > 1 and hi == lo):
                raise ValueError
            if len(parts) == 4 and parts[3] == "log":
                if lo <= 0:
                    raise ValueError
                vals = np.geomspace(lo, hi, k)
            else:
                vals = np.linspace(lo, hi, k)
            vals = list(vals)
        else:
            vals = [float(x) for x in text.split(",") if x.strip()]
            if not vals:
                raise ValueError
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected lo:hi:points[:log] or a comma list")
    if integer:
        return [int(round(v)) for v in vals]
    return [float(v) for v in vals]


def parse_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected lo:hi")
    return lo, hi


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network parameters (override --config)")
    g.add_argument("--config", help=f"JSON parameter document (default: ${CONFIG_ENV})")
    g.add_argument("--n", type=int)
    g.add_argument("--lambda-b", type=float, help="bit arrival rate per node, bit/s")
    g.add_argument("--r", type=float, help="channel rate, bit/s")
    g.add_argument("--q", type=float, help="transmission probability")
    g.add_argument("--delta-cf", type=float)
    g.add_argument("--delta-cb-f", type=float)
    g.add_argument("--delta-cb-s", type=float)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default stdout)")


def _scheme_flag(p, allow_both=False):
    choices = ("cf", "cb", "both") if allow_both else ("cf", "cb")
    p.add_argument("--scheme", choices=choices, default="both" if allow_both else None,
                   required=not allow_both)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aloha-pkt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        _add_param_flags(p)
        _add_output_flags(p)
        return p

    p = cmd("curve", "analytical mean delay over a packet-size grid")
    _scheme_flag(p)
    p.add_argument("--l-grid", required=True, help="lo:hi:points[:log]")

    p = cmd("optimize", "delay-optimal packet size")
    _scheme_flag(p, allow_both=True)
    p.add_argument("--l-max", type=int, default=DEFAULT_L_MAX)

    p = cmd("sweep", "optimum versus one parameter")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="lo:hi:points[:log] or comma list")
    p.add_argument("--l-max", type=int, default=DEFAULT_L_MAX)

    p = cmd("thresholds", "ratio thresholds xi1..xi3")
    p.add_argument("--bracket", default="0.05:50", help="lo:hi in delta_cf/delta_cb_f")
    p.add_argument("--axis", choices=THRESHOLD_AXES, help="optional sweep axis")
    p.add_argument("--values", help="sweep values when --axis is given")
    p.add_argument("--couple-ack", action="store_true",
                   help="move the CB ACK together with delta_cf")
    p.add_argument("--no-clip", action="store_true",
                   help="fail instead of clipping the bracket when L*_CB <= L*_CF")

    p = cmd("region", "advantage region at one overhead ratio")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--couple-ack", action="store_true")

    p = cmd("simulate", "slot-level simulation at one packet size")
    _scheme_flag(p)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=float, default=0.1, help="warm-up fraction")
    p.add_argument("--trace", help="per-packet CSV trace (single seed only)")

    p = cmd("jitter-curve", "simulated jitter over a packet-size grid")
    _scheme_flag(p)
    p.add_argument("--l-grid", required=True)
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=float, default=0.1)

    p = cmd("ntn-fit", "power-law fits of T* and L* against RTT")
    p.add_argument("--rtt-grid", default="default", help="CSV file of rtt_ms, or 'default'")
    p.add_argument("--points", action="store_true", help="emit per-RTT optima instead of fits")
    p.add_argument("--l-max", type=int, default=DEFAULT_L_MAX)

    p = cmd("ntn-compare", "scenario optima relative to a baseline")
    p.add_argument("--scenario", action="append",
                   help=f"repeatable; presets {', '.join(sorted(PRESETS))} or names from the config")
    p.add_argument("--baseline", default="nr-tn")
    p.add_argument("--axis", required=True, choices=("n", "lambda_b"))
    p.add_argument("--values", help=f"default: {NTN_DEFAULT_VALUES['n']} for n, "
                                    f"{NTN_DEFAULT_VALUES['lambda_b']} for lambda_b")
    p.add_argument("--l-max", type=int, default=DEFAULT_L_MAX)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    _add_output_flags(p)
    return ap


def load_config(args) -> dict:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    return doc


def resolve_params(args, defaults: NetworkParams | None = None, fill: dict | None = None) -> NetworkParams:
    """Merge defaults, the config document and explicit flags, in that order.

    ``fill`` supplies fields with the lowest priority, such as a swept axis
    that needs no flag of its own. A ``scenarios`` key in the config is
    reserved for NTN preset overrides.
    """
    data = dict(fill or {})
    data.update(defaults.to_dict() if defaults is not None else OPTIONAL_FIELDS)
    doc = load_config(args)
    doc.pop("scenarios", None)
    unknown = sorted(set(doc) - set(NetworkParams.__dataclass_fields__))
    if unknown:
        raise UsageError(f"unknown parameter keys in config: {unknown}")
    data.update(doc)
    for dest, name in PARAM_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            data[name] = v
    missing = [n for n in ("n", "lambda_b", "R", "q") if n not in data]
    if missing:
        flags = ", ".join("--" + ("r" if m == "R" else m.replace("_", "-")) for m in missing)
        raise UsageError(f"missing required parameter(s): {flags}")
    try:
        return NetworkParams.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))


def _require_feasible(p: NetworkParams, s: Scheme) -> None:
    f = feasibility(p, s)
    if not f:
        raise InfeasibleError(f"{s.value.upper()} infeasible: {f.reason}")


# ---------------------------------------------------------------- commands

def cmd_curve(args):
    p = resolve_params(args)
    s = Scheme.parse(args.scheme)
    ls = parse_grid(args.l_grid, integer=True)
    if min(ls) < 1:
        raise UsageError("packet sizes must be >= 1")
    _require_feasible(p, s)
    c = evaluate_curve(p, s, ls)
    rows = [{"L": int(c.l[i]), "lambda": c.lam[i], "T_slots": c.t_slots[i] if c.ok[i] else None,
             "sigma_s": c.sigma[i], "T_seconds": c.t_seconds[i] if c.ok[i] else None,
             "unsaturated": bool(c.ok[i])} for i in range(len(ls))]
    return ["L", "lambda", "T_slots", "sigma_s", "T_seconds", "unsaturated"], rows


OPT_COLUMNS = ["scheme", "L_star", "T_star_s", "L_min", "at_boundary"]


def _opt_row(s, r):
    return {"scheme": s.value, "L_star": r.l_star, "T_star_s": r.t_star,
            "L_min": r.l_min, "at_boundary": r.at_boundary}


def cmd_optimize(args):
    p = resolve_params(args)
    schemes = list(Scheme) if args.scheme == "both" else [Scheme.parse(args.scheme)]
    rows = []
    for s in schemes:
        _require_feasible(p, s)
        rows.append(_opt_row(s, optimize_packet_size(p, s, args.l_max)))
    return OPT_COLUMNS, rows


def _axis_fill(axis: str, values: list) -> dict:
    # the swept field is overwritten per point, so its flag is optional
    return {axis: values[0]} if axis in ("n", "lambda_b", "R") else {}


def cmd_sweep(args):
    values = parse_grid(args.values, integer=args.axis == "n")
    p = resolve_params(args, fill=_axis_fill(args.axis, values))
    try:
        res = parameter_sweep(p, args.axis, values, args.l_max)
    except ValueError as exc:
        raise UsageError(str(exc))
    rows = []
    for i, v in enumerate(values):
        for s, out, notes in ((Scheme.CF, res.results_cf, res.notes_cf),
                              (Scheme.CB, res.results_cb, res.notes_cb)):
            r = out[i]
            row = {"axis_value": v, "note": notes[i]}
            if r is not None:
                row.update(_opt_row(s, r))
            else:
                row["scheme"] = s.value
            rows.append(row)
    return ["axis_value"] + OPT_COLUMNS + ["note"], rows


THR_COLUMNS = ["axis_value", "xi1", "xi2", "xi3", "ratio_lo", "ratio_hi", "multiple", "note"]


def _thr_row(v, r):
    return {"axis_value": v, "xi1": r.xi1, "xi2": r.xi2, "xi3": r.xi3,
            "ratio_lo": r.ratio_lo, "ratio_hi": r.ratio_hi,
            "multiple": any(r.multiple_flags), "note": r.note}


def cmd_thresholds(args):
    if args.axis and not args.values:
        raise UsageError("--axis needs --values")
    values = parse_grid(args.values, integer=args.axis == "n") if args.axis else []
    p = resolve_params(args, fill=_axis_fill(args.axis, values) if args.axis else None)
    lo, hi = parse_pair(args.bracket)
    if not 0 < lo < hi:
        raise UsageError("bracket must satisfy 0 < lo < hi")
    kw = dict(ratio_lo=lo, ratio_hi=hi, couple_ack=args.couple_ack, clip_bracket=not args.no_clip)
    if args.axis:
        res = threshold_sweep(p, args.axis, values, **kw)
        return THR_COLUMNS, [_thr_row(v, r) for v, r in zip(values, res)]
    for s in Scheme:
        _require_feasible(p, s)
    return THR_COLUMNS, [_thr_row(None, thresholds(p, **kw))]


def cmd_region(args):
    p = resolve_params(args)
    if not args.ratio > 0:
        raise UsageError("--ratio must be positive")
    for s in Scheme:
        _require_feasible(p, s)
    cd = cross_delays(p, args.ratio, args.couple_ack)
    label = classify_region(p, args.ratio, args.couple_ack)
    row = {"ratio": args.ratio, "region": label.value, "T_cf_star_s": cd.t_cf_star,
           "T_cb_star_s": cd.t_cb_star, "T_cf_at_Lcb_s": cd.t_cf_at_lcb,
           "T_cb_at_Lcf_s": cd.t_cb_at_lcf, "L_cf_star": cd.l_cf_star, "L_cb_star": cd.l_cb_star}
    return list(row), [row]


SIM_COLUMNS = ["seed_index", "seed", "mean_delay_s", "jitter_s", "analytical_T_s",
               "packets_arrived", "packets_completed", "packets_measured",
               "max_backlog", "final_backlog", "slots_simulated"]


def cmd_simulate(args):
    p = resolve_params(args)
    s = Scheme.parse(args.scheme)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    if args.trace and args.seeds > 1:
        raise UsageError("--trace needs --seeds 1")
    _require_feasible(p, s)
    c = evaluate_curve(p, s, [args.l])
    analytic = float(c.t_seconds[0]) if c.ok[0] else None
    rows = []
    for i in range(args.seeds):
        seed = args.seed if args.seeds == 1 else child_seed(args.seed, i)
        try:
            cfg = SimConfig(p, s, args.l, args.duration_s, seed, args.warmup)
            st = simulate(cfg, trace_path=args.trace)
        except ConfigError as exc:
            raise UsageError(str(exc))
        rows.append({"seed_index": i, "seed": seed, "mean_delay_s": st.mean_delay_s,
                     "jitter_s": st.jitter_s, "analytical_T_s": analytic,
                     "packets_arrived": st.packets_arrived,
                     "packets_completed": st.packets_completed,
                     "packets_measured": st.packets_measured,
                     "max_backlog": st.max_backlog, "final_backlog": st.final_backlog,
                     "slots_simulated": st.slots_simulated})
    return SIM_COLUMNS, rows


def cmd_jitter_curve(args):
    p = resolve_params(args)
    s = Scheme.parse(args.scheme)
    ls = parse_grid(args.l_grid, integer=True)
    if args.duration_s <= 0:
        raise UsageError("--duration-s must be positive")
    _require_feasible(p, s)
    pts = jitter_curve(p, s, ls, args.duration_s, args.seed, args.warmup)
    rows = [asdict(pt) for pt in pts]
    for r in rows:
        r["L"] = r.pop("l")
    return ["L", "jitter_s", "mean_delay_s", "unsaturated", "note"], rows


def cmd_ntn_fit(args):
    p = resolve_params(args, CASE_STUDY_BASE)
    if args.rtt_grid == "default":
        grid = list(DEFAULT_RTT_GRID_MS)
    else:
        try:
            grid = load_rtt_grid(args.rtt_grid)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read RTT grid: {exc}")
    study = scaling_study(p, grid, args.l_max)
    if args.points:
        cols = ["rtt_ms", "t_star_cf", "l_star_cf", "t_star_cb", "l_star_cb"]
        return cols, study.points
    rows = [{"quantity": qty, "scheme": s, "k": f.k, "alpha": f.alpha, "r2": f.r2,
             "n_points": f.n_points} for (qty, s), f in study.fits.items()]
    return ["quantity", "scheme", "k", "alpha", "r2", "n_points"], rows


def cmd_ntn_compare(args):
    p = resolve_params(args, CASE_STUDY_BASE)
    try:
        presets = scenarios_from_dict(load_config(args).get("scenarios", {}))
    except (TypeError, ValueError, AttributeError) as exc:
        raise UsageError(f"bad scenarios in config: {exc}")
    names = args.scenario or ["nr-ntn", "iot-ntn"]
    for name in names + [args.baseline]:
        if name not in presets:
            raise UsageError(f"unknown scenario {name!r}")
    values = parse_grid(args.values or NTN_DEFAULT_VALUES[args.axis], integer=args.axis == "n")
    try:
        rows = relative_comparison([presets[n] for n in names], presets[args.baseline],
                                   args.axis, values, base=p, l_max=args.l_max)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = [{"scenario": r.scenario, "scheme": r.scheme, "axis_value": r.axis_value,
            "T_ratio": r.t_ratio, "L_ratio": r.l_ratio, "saturated": r.saturated} for r in rows]
    return ["scenario", "scheme", "axis_value", "T_ratio", "L_ratio", "saturated"], out


COMMANDS = {
    "curve": cmd_curve,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "thresholds": cmd_thresholds,
    "region": cmd_region,
    "simulate": cmd_simulate,
    "jitter-curve": cmd_jitter_curve,
    "ntn-fit": cmd_ntn_fit,
    "ntn-compare": cmd_ntn_compare,
}


# ---------------------------------------------------------------- driver

def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the manifest for reproducible builds
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = time.gmtime(int(epoch)) if epoch else time.gmtime()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", t)


def make_manifest(args) -> RunManifest:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out")}
    if "config" in params and params["config"] is None:
        params["config"] = os.environ.get(CONFIG_ENV)
    return RunManifest(args.command, params, int(getattr(args, "seed", 0) or 0),
                       __version__, _timestamp())


def manifest_argv(manifest: dict) -> list[str]:
    """Rebuild an argument vector from a manifest's command and parameters."""
    argv = [manifest["command"]]
    for k, v in manifest["parameters"].items():
        if v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            argv.append(flag)
        elif isinstance(v, list):
            for item in v:
                argv += [flag, str(item)]
        else:
            argv += [flag, str(v)]
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            recorded = json.loads(Path(args.manifest).read_text())
            replay_argv = manifest_argv(recorded)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"aloha-pkt replay: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if args.out:
            replay_argv += ["--out", args.out]
        return main(replay_argv)
    try:
        columns, rows = COMMANDS[args.command](args)
    except UsageError as exc:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.print_usage(sys.stderr)
        print(f"aloha-pkt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, NoFiniteDelayError) as exc:
        print(f"aloha-pkt {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PacketizationError as exc:
        print(f"aloha-pkt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    text = render(columns, rows, args.format)
    manifest = json.dumps(asdict(make_manifest(args)), indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".manifest.json").write_text(manifest + "\n")
    else:
        sys.stdout.write(text)
        print(manifest, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
