"""Command-line front end: experiment runs, whiteness reports, PSD checks.

Artifacts are CSV files with a fixed 17-significant-digit float format plus
a JSON manifest carrying the fully resolved configuration, the seed, and
checksums of every output, so a run can be reproduced byte for byte.

Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adapt import AdaptationConfig
from .errors import (
    InsufficientData,
    IwakfError,
    NoConvergence,
    UnstableClosedLoop,
    UnstableFilter,
)
from .kalman import steady_state
from .model import driving_variance, evaluate_transfer, make_coloring_filter
from .sim import ExperimentConfig, run_experiment
from .whiteness import (
    InnovationsLog,
    empirical_autocorrelation,
    flatness_ratio,
    innovations_psd_theoretical,
    welch_psd,
    whiteness_bound,
    whiteness_cost,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

OUT_DIR_ENV = "IWAKF_OUT"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (int, float, np.floating, np.integer)) else v for v in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    if isinstance(d.get("filter_spec"), tuple):
        d["filter_spec"] = list(d["filter_spec"])
    return d


def load_config(path, overrides: dict) -> ExperimentConfig:
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        with open(p) as fh:
            data = json.load(fh)
        if isinstance(data.get("config"), dict):
            # run manifests embed the resolved config
            data = data["config"]
    data.update({k: v for k, v in overrides.items() if v is not None})
    adapt_data = data.pop("adaptation", None)
    if isinstance(data.get("filter_spec"), list):
        data["filter_spec"] = tuple(data["filter_spec"])
    if adapt_data is not None:
        data["adaptation"] = AdaptationConfig(**adapt_data)
    try:
        _clamp_short_run(data)
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ValueError(str(exc)) from exc


def _clamp_short_run(data: dict) -> None:
    """Shrink the adaptation schedule and burn-in for short smoke runs.

    Short `--steps` runs are meant for quick checks; the full-length
    adaptation window and metric burn-in would otherwise make them invalid.
    Full-length runs are left untouched.
    """
    N = int(data.get("N", 20000))
    adapt = data.get("adaptation", AdaptationConfig(window_length=12000))
    if N > adapt.window_length:
        return
    lag_floor = adapt.lag_count + 2
    window = max(lag_floor, N // 2)
    data["adaptation"] = dataclasses.replace(
        adapt,
        window_length=window,
        min_window=max(lag_floor, min(adapt.min_window or window, N // 4)),
        reopt_period=min(adapt.reopt_period, max(1, N // 4)),
    )
    data["burn_in"] = min(int(data.get("burn_in", 500)), N // 4)


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get(OUT_DIR_ENV) or "iwakf-out"
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    overrides = {
        "seed": args.seed,
        "filter_spec": args.filter if args.filter != "custom" else None,
        "N": args.steps,
        "trials": args.trials,
    }
    try:
        config = load_config(args.config, overrides)
        config.coloring_filter()
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError, UnstableFilter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _resolve_out(args)
    try:
        result = run_experiment(config)
    except IwakfError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    artifacts = {}

    rows = [
        [
            t,
            tr.pr_aug,
            tr.pr_iwakf,
            *tr.rmse_kf,
            *tr.rmse_aug,
            *tr.rmse_iwakf,
        ]
        for t, tr in enumerate(result.trials)
    ]
    n = len(result.trials[0].rmse_kf)
    header = (
        ["trial", "pr_aug", "pr_iwakf"]
        + [f"rmse_kf_{i}" for i in range(n)]
        + [f"rmse_aug_{i}" for i in range(n)]
        + [f"rmse_iwakf_{i}" for i in range(n)]
    )
    path = out / "metrics.csv"
    write_csv(path, header, rows)
    artifacts["metrics.csv"] = _sha256(path)

    report = result.autocorr_report(max_lag=args.max_lag)
    for name, (est, bound) in report.items():
        path = out / f"autocorr_{name}.csv"
        write_csv(
            path,
            ["lag", "normalized_autocorr", "bound"],
            [[lag, est.normalized_scalar(lag), bound] for lag in sorted(est.normalized)],
        )
        artifacts[path.name] = _sha256(path)

    t0 = result.trials[0]
    for name, innov in (
        ("kf", t0.innov_kf),
        ("aug", t0.innov_aug),
        ("iwakf", t0.innov_iwakf),
    ):
        seg = min(1024, len(innov) // 4)
        curve = welch_psd(innov, segment_length=seg)
        path = out / f"psd_{name}.csv"
        write_csv(
            path,
            ["frequency", "psd"],
            list(zip(curve.frequencies, curve.scalar())),
        )
        artifacts[path.name] = _sha256(path)

    trace_rows = []
    for t, tr in enumerate(result.trials):
        gamma_iter = iter(tr.gamma_history[1:])
        gamma = tr.gamma_history[0]
        for step, j, accepted in tr.adaptation_trace:
            if accepted:
                gamma = next(gamma_iter)
            trace_rows.append([t, step, *gamma, j, int(accepted)])
    path = out / "adaptation_trace.csv"
    write_csv(
        path,
        ["trial", "step", "gamma0", "gamma1", "gamma2", "gamma3", "cost", "accepted"],
        trace_rows,
    )
    artifacts["adaptation_trace.csv"] = _sha256(path)

    manifest = {
        "tool": "iwakf",
        "version": __version__,
        "config": _config_dict(config),
        "seed": config.seed,
        "artifacts": artifacts,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"filter={config.filter_spec} N={config.N} trials={config.trials} seed={config.seed}")
    print(f"{'estimator':<10} {'PR (mean)':>10} {'PR (std)':>10}")
    print(f"{'aug':<10} {result.pr_aug:>10.4f} {result.pr_aug_std:>10.4f}")
    print(f"{'iwakf':<10} {result.pr_iwakf:>10.4f} {result.pr_iwakf_std:>10.4f}")
    print(f"artifacts written to {out}")
    return 0


def cmd_whiteness(args) -> int:
    path = Path(args.innovations)
    try:
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            col = 0 if len(header) == 1 else header.index(args.column) if args.column else 0
            samples = [float(row[col]) for row in reader if row]
    except (OSError, ValueError, StopIteration, IndexError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not samples:
        print("input error: no innovation samples found", file=sys.stderr)
        return EXIT_CONFIG
    log = InnovationsLog(np.asarray(samples))
    try:
        est = empirical_autocorrelation(log, args.max_lag)
        cost = whiteness_cost(log, max_lag=args.max_lag)
        bound = whiteness_bound(log.N)
    except (InsufficientData, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"N={log.N}  95% bound=+-{bound:.5f}  J={cost:.6g}")
    passed = 0
    for lag in range(1, args.max_lag + 1):
        rho = est.normalized_scalar(lag)
        ok = abs(rho) <= bound
        passed += ok
        print(f"lag {lag:2d}: {rho:+.5f}  {'pass' if ok else 'FAIL'}")
    print(f"{passed}/{args.max_lag} lags inside the bound")
    return 0


def cmd_psd_check(args) -> int:
    try:
        config = load_config(args.config, {"seed": args.seed})
        if args.gamma is not None:
            filt = make_coloring_filter(*args.gamma)
        else:
            filt = config.coloring_filter()
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnstableFilter as exc:
        print(f"numerical failure: UnstableFilter: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    system = config.system()
    R = np.atleast_2d(config.R)
    grid = np.linspace(0.0, np.pi, args.grid_points)
    try:
        # white case: optimal filter for white Q, spectrum should be flat
        Q = np.atleast_2d(config.sigma_v_sq)
        Q_eff = system.B @ Q @ system.B.T
        _, K, F = steady_state(system, Q_eff, R)
        flat = innovations_psd_theoretical(system, K, F, R, Q, grid)
        white_ratio = flatness_ratio(flat)

        # colored case: plain KF against the configured coloring filter
        qw = driving_variance(filt, config.sigma_v_sq)
        phi_v = np.array(
            [abs(evaluate_transfer(filt, np.exp(1j * p))) ** 2 * qw for p in grid]
        )
        from .whiteness import PsdCurve

        colored = innovations_psd_theoretical(
            system, K, F, R, PsdCurve(grid, phi_v), grid
        )
        colored_ratio = flatness_ratio(colored)
    except (NoConvergence, UnstableClosedLoop) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    white_ok = white_ratio < 1.0 + 1e-9
    print(f"white-noise flatness ratio:   {white_ratio:.12f}  {'pass' if white_ok else 'FAIL'}")
    print(
        f"colored-noise flatness ratio: {colored_ratio:.4f}  "
        f"{'expected-colored' if colored_ratio > 1.5 else 'UNEXPECTEDLY FLAT'}"
    )
    if args.out or os.environ.get(OUT_DIR_ENV):
        out = _resolve_out(args)
        for name, curve in (("white", flat), ("colored", colored)):
            write_csv(
                out / f"psd_{name}.csv",
                ["frequency", "psd"],
                list(zip(curve.frequencies, curve.scalar())),
            )
        print(f"PSD curves written to {out}")
    return 0 if white_ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iwakf",
        description="Adaptive Kalman filtering with online innovations whitening",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the pendulum benchmark experiment")
    sim.add_argument("--config", help="JSON experiment config file")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--filter", choices=["sf1", "sf2", "sf3", "custom"], default=None)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--out", help="output directory (or $IWAKF_OUT)")
    sim.add_argument("--max-lag", type=int, default=10)
    sim.set_defaults(func=cmd_simulate)

    wht = sub.add_parser("whiteness", help="whiteness report for an innovations CSV")
    wht.add_argument("innovations", help="CSV with one innovation column")
    wht.add_argument("--column", default=None)
    wht.add_argument("--max-lag", type=int, default=10)
    wht.set_defaults(func=cmd_whiteness)

    psd = sub.add_parser("psd-check", help="theoretical innovations-PSD flatness check")
    psd.add_argument("--config", help="JSON experiment config file")
    psd.add_argument("--seed", type=int)
    psd.add_argument(
        "--gamma",
        type=float,
        nargs=4,
        metavar=("G0", "G1", "G2", "G3"),
        help="override the coloring filter coefficients",
    )
    psd.add_argument("--grid-points", type=int, default=256)
    psd.add_argument("--out", default=None)
    psd.set_defaults(func=cmd_psd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
