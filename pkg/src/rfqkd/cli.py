"""Command line entry point: ``rfqkd <command> ...``.

Exit status is 0 on success, 2 for bad configuration or unparsable input and
3 when input data violate a numerical invariant.  Outputs are assembled in
memory and written only once everything has succeeded.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import formats
from .bellscan import chsh_scan
from .correlations import correlators_from_state, tomography_linear
from .driftlab import analyze_windows, simulate_free_drift, simulate_randomized_runs
from .keyrates import (
    RATE_NAMES,
    full_report,
    holevo_many,
    rate_dd_6state,
    rate_dd_bb84,
    rate_di1,
    rate_di2,
    report_from_table,
)
from .montecarlo import McConfig, histogram_emit, run_distribution
from .qmath import InvariantError, spectral_entropy, visibility_from_spectrum
from .sampling import MAX_SEED, DriftProcess, generator_for, random_drift

OUT_DIR_ENV = "RFQKD_OUT_DIR"
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# argument helpers

def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _rate_list(text):
    rates = [v.strip() for v in text.split(",") if v.strip()]
    bad = [r for r in rates if r not in RATE_NAMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown rates {bad}; choose from {','.join(RATE_NAMES)}")
    return rates


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _default_out():
    return os.environ.get(OUT_DIR_ENV, ".")


def _write_outputs(out_dir: Path, files: dict) -> list[Path]:
    """Write ``{name: str | callable(path)}`` atomically into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".rfqkd-", dir=out_dir))
    written = []
    try:
        staged = []
        for name, content in files.items():
            path = tmp / name
            if callable(content):
                content(path)
            else:
                path.write_text(content, encoding="utf-8", newline="")
            staged.append((path, out_dir / name))
        for src, dst in staged:
            os.replace(src, dst)
            written.append(dst)
    finally:
        for leftover in tmp.iterdir():
            leftover.unlink()
        tmp.rmdir()
    return written


def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        path = Path(out)
        _write_outputs(path.parent if str(path.parent) else Path("."), {path.name: text})


# --------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    config = McConfig(args.samples, tuple(args.visibilities), args.seed, args.bin_width,
                      tuple(args.rates))
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    summary = run_distribution(config, workers=args.workers)
    rows = histogram_emit(summary)
    files = {}
    if args.format == "csv":
        files["histogram.csv"] = formats.csv_text(formats.HISTOGRAM_HEADER, rows)
    else:
        files["histogram.json"] = formats.json_text(
            [dict(zip(formats.HISTOGRAM_HEADER, r)) for r in rows])
    files["summary.json"] = formats.json_text(summary.to_dict())
    if not args.no_plot:
        from .plotting import plot_distributions
        files["distributions.png"] = lambda p: plot_distributions(summary, p)
    for path in _write_outputs(Path(args.out), files):
        print(path)
    return 0


def _load_input(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if path.endswith(".json") or text.lstrip().startswith("{"):
        return ("state",) + formats.read_state_json(text)
    table, has_marginals = formats.read_table_csv(text)
    return "table", table, has_marginals


def _tomography_doc(state):
    lam = state.spectrum
    return {"state": formats.state_to_json(state), "spectrum": lam.tolist(),
            "entropy": spectral_entropy(lam), "werner_visibility": visibility_from_spectrum(lam)}


def cmd_keyrates(args) -> int:
    kind, *payload = _load_input(args.input)
    doc = {}
    if kind == "state":
        state, triad_a, triad_b = payload
        report = full_report(state, triad_a, triad_b)
        table = correlators_from_state(state, triad_a, triad_b)
        doc["report"] = report.to_dict()
    else:
        table, has_marginals = payload
        if has_marginals:
            state = tomography_linear(table)
            chi_a = [h.chi for h in holevo_many(state, np.eye(3), "A")]
            chi_b = [h.chi for h in holevo_many(state, np.eye(3), "B")]
            doc["report"] = report_from_table(table, chi_a, chi_b).to_dict()
            doc["tomography"] = _tomography_doc(state)
        else:
            di1, di1_c = rate_di1(table)
            di2, di2_c = rate_di2(table)
            dd6, (perm, sign) = rate_dd_6state(table)
            bb84, bb84_c = rate_dd_bb84(table)
            doc["report"] = {
                "r_di1": di1, "r_di1_choice": list(di1_c) if di1_c else None,
                "r_di2": di2, "r_di2_choice": list(di2_c) if di2_c else None,
                "r_dd_6state": dd6,
                "r_dd_6state_permutation": {"permutation": list(perm), "signature": sign},
                "r_dd_bb84": bb84, "r_dd_bb84_choice": list(bb84_c),
                "r_dd": None, "r_dd_choice": None,
            }
            doc["notice"] = ("marginals missing: tomography skipped, r_dd needs the "
                             "reconstructed state and is not reported")
    scan = chsh_scan(table)
    doc["s_max"] = scan.s_max
    doc["s_max_indices"] = list(scan.s_max_indices)
    doc["c_max"] = scan.c_max
    doc["c_max_pairing"] = [list(p) for p in scan.c_max_pairing]
    _emit(formats.json_text(doc), args.out)
    return 0


def cmd_scan(args) -> int:
    kind, *payload = _load_input(args.input)
    if kind == "state":
        table = correlators_from_state(*payload)
    else:
        table = payload[0]
    scan = chsh_scan(table)
    if args.format == "csv":
        rows = [(*t, v) for t, v in scan.values.items()]
        text = formats.csv_text(["x", "x_prime", "y", "y_prime", "S"], rows)
    else:
        text = formats.json_text({
            "values": [{"indices": list(t), "S": v} for t, v in scan.values.items()],
            "s_max": scan.s_max, "s_max_indices": list(scan.s_max_indices),
            "c_max": scan.c_max, "c_max_pairing": [list(p) for p in scan.c_max_pairing]})
    _emit(text, args.out)
    return 0


def cmd_tomography(args) -> int:
    kind, *payload = _load_input(args.input)
    if kind == "state":
        raise ConfigError("tomography expects correlator or count CSV input")
    table, has_marginals = payload
    if not has_marginals:
        raise ConfigError("tomography needs marginals for all settings (mA and mB rows)")
    _emit(formats.json_text(_tomography_doc(tomography_linear(table))), args.out)
    return 0


def _window_files(records, args, stem, run_doc):
    files = {}
    if args.format == "csv":
        files["windows.csv"] = formats.csv_text(formats.WINDOW_HEADER,
                                                formats.window_rows(records))
    else:
        files["windows.json"] = formats.json_text([formats.window_to_json(r) for r in records])
    files["run.json"] = formats.json_text(run_doc)
    if not args.no_plot:
        from .plotting import plot_windows
        xlabel = "run" if stem == "randomized" else "window"
        files[f"{stem}.png"] = lambda p: plot_windows(records, p, xlabel=xlabel)
    return files


def cmd_drift(args) -> int:
    run_doc = {"command": "drift"}
    files = {}
    if args.blocks:
        try:
            text = Path(args.blocks).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.blocks}: {exc.strerror}") from None
        blocks = formats.read_blocks_csv(text)
        run_doc["blocks_file"] = args.blocks
    else:
        if args.seed is None:
            raise ConfigError("--seed is required when simulating")
        _check_visibility(args.visibility)
        if args.start == "random":
            drift = random_drift(generator_for(args.seed, 1), args.step_std, args.axis_correlation)
        else:
            drift = DriftProcess(args.step_std, args.axis_correlation)
        blocks = simulate_free_drift(args.minutes, args.counts, args.visibility, drift, args.seed)
        run_doc.update({"seed": args.seed, "minutes": args.minutes, "counts": args.counts,
                        "visibility": args.visibility, "step_std": args.step_std,
                        "axis_correlation": args.axis_correlation, "start": args.start})
        files["blocks.csv"] = formats.csv_text(formats.BLOCK_HEADER, formats.block_rows(blocks))
    records = analyze_windows(blocks)
    run_doc["n_windows"] = len(records)
    files.update(_window_files(records, args, "drift", run_doc))
    for path in _write_outputs(Path(args.out), files):
        print(path)
    return 0


def cmd_randomized(args) -> int:
    _check_visibility(args.visibility)
    records = simulate_randomized_runs(args.runs, args.counts, args.visibility, args.seed)
    run_doc = {"command": "randomized", "seed": args.seed, "runs": args.runs,
               "counts": args.counts, "visibility": args.visibility, "n_windows": len(records)}
    files = _window_files(records, args, "randomized", run_doc)
    for path in _write_outputs(Path(args.out), files):
        print(path)
    return 0


def _check_visibility(v):
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"visibility {v} outside [0, 1]")


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfqkd", description="Key-rate analysis for QKD without a shared reference frame.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo distributions of the key-rate bounds")
    p.add_argument("--rates", type=_rate_list, default=list(RATE_NAMES))
    p.add_argument("--visibilities", type=_float_list, default=[1.0, 0.98, 0.95])
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--bin-width", type=float, default=0.01)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=_default_out())
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_simulate)

    for name, func, helptext in (
            ("keyrates", cmd_keyrates, "key-rate report for a correlator/count CSV or state JSON"),
            ("scan", cmd_scan, "all 36 CHSH values, S_max and C_max"),
            ("tomography", cmd_tomography, "linear-inversion state reconstruction")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        if name == "scan":
            p.add_argument("--format", choices=("csv", "json"), default="json")
        p.set_defaults(func=func)

    p = sub.add_parser("drift", help="free-drift experiment with sliding-window analysis")
    p.add_argument("--minutes", type=int, default=162)
    p.add_argument("--counts", type=int, default=20000,
                   help="coincidences per 2-minute block; 0 for exact correlators")
    p.add_argument("--visibility", type=float, default=0.95)
    p.add_argument("--step-std", type=float, default=0.02)
    p.add_argument("--axis-correlation", type=float, default=0.9)
    p.add_argument("--start", choices=("random", "aligned"), default="random",
                   help="initial channel: Haar-random or identity")
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--blocks", default=None, help="analyse an existing block CSV instead")
    p.add_argument("--out", default=_default_out())
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("randomized", help="runs with independent random channel rotations")
    p.add_argument("--runs", type=int, default=17)
    p.add_argument("--counts", type=int, default=20000)
    p.add_argument("--visibility", type=float, default=0.95)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", default=_default_out())
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_randomized)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except InvariantError as exc:
        print(f"rfqkd: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"rfqkd: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
