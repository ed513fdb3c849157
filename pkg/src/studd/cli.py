"""Command line interface: ``studd run``, ``studd grid`` and ``studd ranks``.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ._util import StuddError, ValidationError
from .harness import (DEFAULT_L_ACCESS_GRID, DEFAULT_L_DELAY_GRID, ExperimentConfig,
                      rank_reports, run_experiment, sensitivity_grid)
from .report import emit_report, load_reports, write_rank_table, write_series_csv
from .stream import SyntheticDriftSpec, generate_synthetic, load_csv, truncate
from .supervision import MethodKind

log = logging.getLogger("studd")

MAX_STREAM_LENGTH = 150_000


def _csv_numbers(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return parse


def _label_column(text):
    try:
        return int(text)
    except ValueError:
        return text


def load_data(spec: str, args):
    """``synth:<spec.json>`` or a CSV path, truncated to ``--max-n``."""
    if spec.startswith("synth:"):
        path = Path(spec[len("synth:"):])
        if not path.is_file():
            raise ValidationError(f"synthetic spec {path} not found")
        stream = generate_synthetic(SyntheticDriftSpec.from_json(path), name=path.stem)
    else:
        if not Path(spec).is_file():
            raise ValidationError(f"data file {spec} not found")
        stream = load_csv(spec, has_header=not args.no_header, label_column=args.label_column)
    return truncate(stream, args.max_n)


def _config(args, method) -> ExperimentConfig:
    kw = dict(method=method, window=args.window, seed=args.seed, n_trees=args.n_trees)
    if getattr(args, "delta", None) is not None:
        kw["ph_delta"] = args.delta
    if getattr(args, "alpha_ks", None) is not None:
        kw["ks_significance"] = args.alpha_ks
    if getattr(args, "l_access_value", None) is not None:
        kw["l_access"] = args.l_access_value
    if getattr(args, "l_delay_value", None) is not None:
        kw["l_delay"] = args.l_delay_value
    return ExperimentConfig(**kw)


def cmd_run(args) -> None:
    stream = load_data(args.data, args)
    report = run_experiment(stream, _config(args, MethodKind(args.method)))
    emit_report([report], args.format, args.out)
    if args.series:
        write_series_csv([report], args.series)
    log.info("%s on %s: kappa=%.4f ratio=%.4f alarms=%d", report.method, report.dataset,
             report.kappa, report.label_ratio, report.n_alarms)


def cmd_grid(args) -> None:
    stream = load_data(args.data, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, tables = sensitivity_grid(stream, _config(args, MethodKind.DWS),
                                       args.l_access, args.l_delay, jobs=args.jobs)
    n_delays = len(args.l_delay)
    n_variants = len(args.l_access) * n_delays
    baselines = reports[n_variants:]
    for ai, a in enumerate(args.l_access):
        sub = out / f"access{a:g}"
        sub.mkdir(exist_ok=True)
        for r in [*reports[ai * n_delays:(ai + 1) * n_delays], *baselines]:
            emit_report([r], "json", sub / f"{r.dataset}__{r.method}.json")
        write_rank_table(tables[a], sub / "ranks.csv")


def cmd_ranks(args) -> None:
    table = rank_reports(load_reports(args.reports), args.metric)
    write_rank_table(table, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="studd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--data", required=True, help="CSV path or synth:<spec.json>")
        sp.add_argument("--label-column", type=_label_column, default=-1)
        sp.add_argument("--no-header", action="store_true")
        sp.add_argument("--max-n", type=int, default=MAX_STREAM_LENGTH)
        sp.add_argument("--window", type=int, default=1000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n-trees", type=int, default=100)
        sp.add_argument("--delta", type=float, default=None, help="Page-Hinkley delta")
        sp.add_argument("--alpha-ks", type=float, default=None, help="KS significance level")

    run = sub.add_parser("run", help="run one method on one stream")
    data_args(run)
    run.add_argument("--method", required=True, choices=[m.value for m in MethodKind])
    run.add_argument("--l-access", dest="l_access_value", type=float, default=None)
    run.add_argument("--l-delay", dest="l_delay_value", type=int, default=None)
    run.add_argument("--out", required=True)
    run.add_argument("--format", choices=["json", "csv"], default="json")
    run.add_argument("--series", default=None, help="also write the sliding-kappa series CSV")
    run.set_defaults(func=cmd_run)

    grid = sub.add_parser("grid", help="label access/delay sensitivity grid")
    data_args(grid)
    grid.add_argument("--l-access", type=_csv_numbers(float),
                      default=list(DEFAULT_L_ACCESS_GRID))
    grid.add_argument("--l-delay", type=_csv_numbers(int), default=list(DEFAULT_L_DELAY_GRID))
    grid.add_argument("--jobs", type=int, default=1)
    grid.add_argument("--out", required=True, help="output directory")
    grid.set_defaults(func=cmd_grid)

    ranks = sub.add_parser("ranks", help="average-rank table from a directory of reports")
    ranks.add_argument("--reports", required=True)
    ranks.add_argument("--metric", choices=["kappa", "cost"], default="kappa")
    ranks.add_argument("--out", required=True)
    ranks.set_defaults(func=cmd_ranks)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StuddError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
