"""Command-line driver.

Every subcommand that produces results writes them as CSV together with a
``manifest.json`` holding the resolved configuration, the seed, digests of
the inputs and the argument vector, so a run can be repeated from the
manifest alone (``--config manifest.json``).

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, build_config, load_flat, parse_overrides, parse_time, to_flat
from .email_stream import DataError, format_directory, load_stopwords, parse_directory, parse_email_log, preprocess_raw, write_email_log
from .evaluation import STABILITY_THRESHOLD, format_series_csv
from .pipeline import robustness_run, run_experiment, sweep, tau_table

log = logging.getLogger("mosr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _load_flat(args) -> dict[str, str]:
    flat = load_flat(args.config) if args.config else {}
    flat.update(parse_overrides(args.set or []))
    return flat


def _experiment_config(flat: dict[str, str]) -> ExperimentConfig:
    return build_config({k: v for k, v in flat.items() if not k.startswith("synthetic.")})


def _load_inputs(args):
    if not args.input or not args.directory:
        raise UsageError("--input and --directory are required")
    parsed = parse_email_log(args.input)
    if parsed.errors:
        line, msg = parsed.errors[0]
        raise DataError(f"{args.input}: {len(parsed.errors)} bad records; first at line {line}: {msg}")
    return parsed.events, parse_directory(args.directory)


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(path: Path, args, argv, config: dict[str, str], **extra) -> None:
    inputs = {}
    for name in ("config", "input", "directory", "stopwords"):
        p = getattr(args, name, None)
        if p:
            inputs[name] = {"path": str(p), "sha256": _sha256(p)}
    manifest = {
        "tool": "mosr",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "config": config,
        **extra,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# subcommands ---------------------------------------------------------------


def cmd_validate(args, argv) -> int:
    if not args.input:
        raise UsageError("--input is required")
    parsed = parse_email_log(args.input)
    report = [(line, "error", msg) for line, msg in parsed.errors]
    report += [("", "warning", msg) for msg in parsed.warnings]
    n_dir = None
    if args.directory:
        directory = parse_directory(args.directory)
        n_dir = len(directory.insider_set)
        missing = sorted({a for e in parsed.events for a in (e.sender, *e.recipients)
                          if directory.is_insider(a) and directory.level(a) is None})
        report += [("", "warning", f"insider {a} has no job level") for a in missing]
    print(f"{len(parsed.events)} valid events, {len(parsed.errors)} bad records"
          + (f", {n_dir} insiders" if n_dir is not None else ""))
    for line, kind, msg in report:
        print(f"{kind}: line {line}: {msg}" if line else f"{kind}: {msg}")
    if args.out:
        out = _out_dir(args)
        _write_csv(out / "validation.csv", ("line", "level", "message"), report)
        _write_manifest(out / "manifest.json", args, argv, {}, events=len(parsed.events))
    return 2 if parsed.errors else 0


def cmd_preprocess(args, argv) -> int:
    if not args.input or not args.out:
        raise UsageError("--input and --out are required")
    parsed = preprocess_raw(args.input, load_stopwords(args.stopwords))
    for line, msg in parsed.errors:
        print(f"error: line {line}: {msg}", file=sys.stderr)
    write_email_log(parsed.events, args.out)
    return 2 if parsed.errors else 0


def cmd_simulate(args, argv) -> int:
    from .synthetic import SyntheticConfig, generate_synthetic_stream, synthetic_config, synthetic_flat

    if not args.out:
        raise UsageError("--out is required")
    flat = _load_flat(args)
    experiment = _experiment_config(flat)
    sim = synthetic_config(flat, SyntheticConfig())
    if args.seed is not None:
        sim = synthetic_config({"synthetic.seed": str(args.seed)}, sim)
    stream = generate_synthetic_stream(sim, experiment)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stem = out.with_suffix("")
    write_email_log(stream.events, out)
    (stem.parent / f"{stem.name}.directory.csv").write_text(
        format_directory(stream.directory, stream.outsiders), encoding="utf-8"
    )
    args.seed = sim.seed
    # a run started from this manifest scores the simulated users only
    resolved = to_flat(experiment)
    resolved["eval.users"] = resolved["eval.users"] or ",".join(stream.users)
    _write_manifest(stem.parent / f"{stem.name}.manifest.json", args, argv,
                    {**resolved, **synthetic_flat(sim)},
                    switchers=sorted(stream.schedule.switchers or ()))
    print(f"wrote {len(stream.events)} events for {len(stream.users)} users to {out}")
    return 0


def cmd_run(args, argv) -> int:
    flat = _load_flat(args)
    config = _experiment_config(flat)
    events, directory = _load_inputs(args)
    out = _out_dir(args)
    result = run_experiment(events, directory, config, track_weights=args.weights_trajectory)
    (out / "series.csv").write_text(format_series_csv(result.series), encoding="utf-8")
    names = result.ranker_names
    _write_csv(out / "weights.csv", ("user", *names),
               [(u, *(repr(float(x)) for x in w)) for u, w in sorted(result.weights.items())])
    if args.weights_trajectory:
        rows = [(u, t, *(repr(float(x)) for x in w)) for u in sorted(result.trajectory) for t, w in result.trajectory[u]]
        _write_csv(out / "weights_trajectory.csv", ("user", "t", *names), rows)
    _write_manifest(out / "manifest.json", args, argv, to_flat(config))
    for ranker, avg in sorted(result.average_losses().items(), key=lambda kv: kv[1]):
        print(f"{ranker:22s} {avg:.4f}")
    return 0


def _parse_grid(items) -> dict[str, list[str]]:
    grid = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not values:
            raise UsageError(f"grid entry {item!r} is not key=v1,v2,...")
        grid[key.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    return grid


def cmd_sweep(args, argv) -> int:
    if not args.grid:
        raise UsageError("--grid is required")
    grid = _parse_grid(args.grid)
    config = _experiment_config(_load_flat(args))
    events, directory = _load_inputs(args)
    out = _out_dir(args)
    rows = sweep(events, directory, config, grid)
    keys = list(grid)
    rankers = [k for k in rows[0] if k not in grid] if rows else []
    _write_csv(out / "tuning.csv", (*keys, *rankers),
               [(*(r[k] for k in keys), *(repr(float(r[k])) for k in rankers)) for r in rows])
    _write_manifest(out / "manifest.json", args, argv, to_flat(config), grid=grid)
    print(f"{len(rows)} grid points written to {out / 'tuning.csv'}")
    return 0


def _window(text: str) -> tuple[int, int]:
    start, sep, end = text.partition("/")
    if not sep:
        raise UsageError(f"window {text!r} must be START/END")
    try:
        a, b = parse_time(start), parse_time(end)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    if a >= b:
        raise UsageError(f"window {text!r} is empty")
    return a, b


def cmd_tau(args, argv) -> int:
    if not args.window_a or not args.window_b:
        raise UsageError("--window-a and --window-b are required")
    wa, wb = _window(args.window_a), _window(args.window_b)
    config = _experiment_config(_load_flat(args))
    events, directory = _load_inputs(args)
    out = _out_dir(args)
    result = run_experiment(events, directory, config, collect_features=True)
    rows = tau_table(result, wa, wb)
    _write_csv(out / "tau.csv", ("user", "window_a", "window_b", "tau", "stable"),
               [(u, args.window_a, args.window_b, repr(t), int(t < args.threshold)) for u, t in rows])
    _write_manifest(out / "manifest.json", args, argv, to_flat(config),
                    window_a=args.window_a, window_b=args.window_b, threshold=args.threshold)
    print(f"{len(rows)} tau rows written to {out / 'tau.csv'}")
    return 0


def cmd_robustness(args, argv) -> int:
    config = _experiment_config(_load_flat(args))
    events, directory = _load_inputs(args)
    out = _out_dir(args)
    seed = 0 if args.seed is None else args.seed
    args.seed = seed
    res = robustness_run(events, directory, config, args.keep_rate, args.samples, seed, threads=args.threads)
    rows = [(i, r, repr(float(v))) for i, sample in enumerate(res.samples) for r, v in sample.items()]
    _write_csv(out / "robustness.csv", ("sample", "ranker", "avg_loss"), rows)
    _write_manifest(out / "manifest.json", args, argv, to_flat(config),
                    keep_rate=args.keep_rate, samples=args.samples)
    mean, var = res.mean(), res.variance()
    for r in sorted(mean, key=mean.get):
        print(f"{r:22s} mean {mean[r]:.4f} var {var[r]:.6f}")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "preprocess": cmd_preprocess,
    "simulate": cmd_simulate,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "tau": cmd_tau,
    "robustness": cmd_robustness,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value config file or a previous manifest.json")
    common.add_argument("--input", help="event-log CSV")
    common.add_argument("--directory", help="address directory CSV")
    common.add_argument("--stopwords", help="stop-word list (default: bundled)")
    common.add_argument("--out", help="output directory (a file path for simulate and preprocess)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override, repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="mosr", description="Reply-priority ranking experiments over email event logs.")
    parser.add_argument("--version", action="version", version=f"mosr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check an event log (and directory)")
    sub.add_parser("preprocess", parents=[common], help="turn sender,recipients,timestamp,body rows into counts")
    sub.add_parser("simulate", parents=[common], help="generate a synthetic stream")
    p = sub.add_parser("run", parents=[common], help="replay a stream through every ranker and MOSR")
    p.add_argument("--weights-trajectory", action="store_true", help="also write per-day mixture weights")
    p = sub.add_parser("sweep", parents=[common], help="grid of replays")
    p.add_argument("--grid", nargs="+", metavar="KEY=V1,V2", help="e.g. lambda=0.5,0.9 delta_d=0,10")
    p = sub.add_parser("tau", parents=[common], help="drift coefficient between two windows")
    p.add_argument("--window-a", metavar="START/END")
    p.add_argument("--window-b", metavar="START/END")
    p.add_argument("--threshold", type=float, default=STABILITY_THRESHOLD)
    p = sub.add_parser("robustness", parents=[common], help="replays on random subsamples")
    p.add_argument("--keep-rate", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=10)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ConfigError, DataError) as exc:
        print(f"mosr: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        name = exc.filename or ""
        print(f"mosr: cannot read {name}: {exc.strerror or exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"mosr: {exc}", file=sys.stderr)
        return 2
