"""Command-line harness: run scenarios, sweep parameters, analyze artifacts.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, config_json
from .scenarios import (
    SCENARIOS,
    make_scenario,
    run_scenario,
    sweep,
    sweep_table,
)


class CliParser(argparse.ArgumentParser):
    """argparse reports bad usage as a configuration error (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _write_lines(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _parse_overrides(pairs: list[str]) -> list[tuple[str, str]]:
    out = []
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        if not key:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        out.append((key, value))
    return out


def write_run_outputs(result, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "report.json", result.report)
    (out_dir / "config.json").write_text(
        config_json(result.config) + "\n", encoding="utf-8"
    )
    _write_lines(out_dir / "trace.csv", result.trace_lines())
    _write_lines(out_dir / "signal.csv", result.signal_lines())
    _write_lines(out_dir / "events.csv", result.event_lines())
    if result.policy_lines:
        _write_lines(out_dir / "policy.csv", result.policy_lines)
    if result.qoe_lines is not None:
        _write_lines(out_dir / "qoe.csv", result.qoe_lines)
    return out_dir / "report.json"


def cmd_run(args) -> int:
    cfg = make_scenario(args.scenario, seed=args.seed,
                        overrides=_parse_overrides(args.set))
    result = run_scenario(cfg)
    out_dir = Path(args.out) if args.out else Path(
        f"out/{cfg.name}_seed{cfg.seed}"
    )
    report_path = write_run_outputs(result, out_dir)
    r = result.report
    print(
        f"{cfg.name} seed={cfg.seed} protocol={cfg.protocol} cc={cfg.cc}: "
        f"goodput={r['goodput_mbps']:.3f}Mbps "
        f"download_time={r['download_time_s']:.3f}s "
        f"retrans={r['retransmissions']} "
        f"{'complete' if r['completed'] else 'incomplete'}"
    )
    print(f"wrote {report_path}")
    return 0


def cmd_sweep(args) -> int:
    values = [v for v in args.values.split(",") if v != ""]
    results = sweep(
        args.scenario, args.axis, values, seed=args.seed,
        overrides=_parse_overrides(args.set),
    )
    out_dir = Path(args.out) if args.out else Path(
        f"out/sweep_{args.scenario}"
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    table = list(sweep_table(values, results))
    _write_lines(out_dir / "sweep.csv", table)
    for i, res in enumerate(results):
        write_run_outputs(res, out_dir / f"run_{i:03d}")
    for line in table:
        print(line)
    print(f"wrote {out_dir / 'sweep.csv'}")
    return 0


# -- analyze ops ---------------------------------------------------------------


def _load_signal_samples(path: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {path}")
    return analysis.load_signal(p)


def _load_trace(path: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {path}")
    return analysis.load_trace(p)


def _emit(args, lines) -> None:
    if args.out:
        _write_lines(Path(args.out), lines)
        print(f"wrote {args.out}")
    else:
        for line in lines:
            print(line)


def op_detect(args) -> int:
    det = analysis.detect_events(_load_signal_samples(args.files[0]))
    lines = ["kind,path_id,time_s,magnitude_db"]
    lines += [
        f"{e.kind},{e.path_id},{e.time_s:.1f},{e.magnitude_db:.1f}"
        for e in det.events
    ]
    _emit(args, lines)
    start = det.mobility_start_s
    print(f"mobility_start_s={'none' if start is None else f'{start:.1f}'} "
          f"events={len(det.events)} sampling_gaps={len(det.sampling_gaps)}",
          file=sys.stderr)
    return 0


def op_classify(args) -> int:
    samples = _load_signal_samples(args.files[0])
    det = analysis.detect_events(samples)
    window_s = args.window_s
    if window_s is None:
        times = [s[0] for s in samples]
        window_s = (max(times) - min(times)) if times else 0.0
    label = analysis.classify_mobility(det.events, window_s)
    feats = analysis.window_features(det.events, window_s)
    print(json.dumps({"label": label, "window_s": window_s, **feats},
                     sort_keys=True, indent=2))
    return 0


def op_utilization(args) -> int:
    fractions = []
    for path in args.files:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"file not found: {path}")
        fractions.append(json.loads(p.read_text())["u_fraction"])
    hist = analysis.utilization_histogram(fractions)
    _emit(args, [json.dumps(hist, sort_keys=True, indent=2)])
    return 0


def op_queuing_delay(args) -> int:
    trace = _load_trace(args.files[0])
    delays = analysis.queuing_delay_from_trace(trace, path_id=args.path)
    out = {
        "samples": int(delays.size),
        "min_ms": float(delays.min()),
        "p50_ms": float(np.percentile(delays, 50)),
        "p75_ms": float(np.percentile(delays, 75)),
        "p95_ms": float(np.percentile(delays, 95)),
        "max_ms": float(delays.max()),
    }
    _emit(args, [json.dumps(out, sort_keys=True, indent=2)])
    return 0


def op_normalized_rtt(args) -> int:
    trace = _load_trace(args.files[0])
    series = analysis.normalized_rtt(
        trace, args.event_at, args.recovery,
        path_id=args.path if args.path is not None else 1,
    )
    lines = ["second,normalized_rtt"]
    lines += [f"{s},{v:.4f}" for s, v in series]
    _emit(args, lines)
    return 0


def op_goodput(args) -> int:
    trace = _load_trace(args.files[0])
    series = analysis.goodput_series(trace, bin_s=args.bin_s)
    lines = ["bin_start_s,goodput_mbps"]
    lines += [f"{s:.3f},{v:.4f}" for s, v in series]
    _emit(args, lines)
    return 0


def op_ellipse(args) -> int:
    points = []
    for path in args.files:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"file not found: {path}")
        rep = json.loads(p.read_text())
        points.append((rep[args.x], rep[args.y]))
    st = analysis.ellipse(np.asarray(points, dtype=np.float64))
    out = {
        "x": args.x,
        "y": args.y,
        "n": len(points),
        "mean": list(st.mean),
        "median": list(st.median),
        "covariance": [list(row) for row in st.covariance],
        "axis_lengths": list(st.axis_lengths),
        "orientation_deg": st.orientation_deg,
    }
    _emit(args, [json.dumps(out, sort_keys=True, indent=2)])
    return 0


ANALYZE_OPS = {
    "detect": op_detect,
    "classify": op_classify,
    "utilization": op_utilization,
    "queuing-delay": op_queuing_delay,
    "normalized-rtt": op_normalized_rtt,
    "goodput": op_goodput,
    "ellipse": op_ellipse,
}


def cmd_analyze(args) -> int:
    if args.op not in ANALYZE_OPS:
        raise ConfigError(
            f"unknown analyze op {args.op!r}; known: {sorted(ANALYZE_OPS)}"
        )
    if not args.files:
        raise ConfigError("analyze needs at least one input file")
    return ANALYZE_OPS[args.op](args)


def cmd_list_scenarios(args) -> int:
    for name in sorted(SCENARIOS):
        cfg = make_scenario(name)
        print(
            f"{name}: protocol={cfg.protocol} cc={cfg.cc} "
            f"workload={cfg.workload.kind} mobility={cfg.mobility.profile} "
            f"paths={len(cfg.paths)}x{cfg.paths[0].capacity_mbps:g}Mbps "
            f"duration={cfg.duration_s:g}s"
        )
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="mpltesim",
                       description="Multipath-over-LTE simulator harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one named scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario across axis values")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--seed", type=int, default=1)
    p_sweep.add_argument("--set", action="append", default=[],
                         metavar="KEY=VALUE")
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="offline analysis of run artifacts")
    p_an.add_argument("op")
    p_an.add_argument("files", nargs="*")
    p_an.add_argument("--out", default=None)
    p_an.add_argument("--path", type=int, default=None)
    p_an.add_argument("--window-s", type=float, default=None, dest="window_s")
    p_an.add_argument("--event-at", type=float, default=0.0, dest="event_at")
    p_an.add_argument("--recovery", type=float, default=4.0)
    p_an.add_argument("--bin-s", type=float, default=1.0, dest="bin_s")
    p_an.add_argument("--x", default="u_fraction")
    p_an.add_argument("--y", default="goodput_mbps")
    p_an.set_defaults(func=cmd_analyze)

    p_list = sub.add_parser("list-scenarios", help="list named scenarios")
    p_list.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
