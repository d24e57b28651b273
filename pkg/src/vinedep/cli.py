"""Command-line interface: ``vinedep <command> [options]``.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure. Diagnostics go
to stderr; stdout carries only data. Set VINEDEP_LOG to a logging level name
(DEBUG, INFO, WARNING, ...) to change log verbosity.
"""
from __future__ import annotations

import argparse
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, bicop, ingest, serialize
from .dependence import tau_matrix
from .errors import DataError, NumericError, VineDepError
from .margins import to_pseudo_obs
from .sample import GENERATOR, sample_data_scale, sample_uniform
from .structure import FitSettings
from .vinefit import FittedVine, fit_table

log = logging.getLogger("vinedep")

EXIT_USAGE = 2

MISSING_HELP = ("Missing cells: empty, NA, NaN or null (case-insensitive). "
                "Without --schema, columns holding only 0/1 are read as binary.")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _add_input(p):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--schema", help="JSON array of {name, kind, unit, lower, upper}")
    p.add_argument("--row-threshold", type=float, default=0.05,
                   help="drop rows whose missing fraction exceeds this (default 0.05)")


def _add_margins(p):
    p.add_argument("--tie-policy", choices=("jitter", "average_rank"), default="jitter",
                   help="pseudo-observations for tied values (default jitter)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def _add_fit(p):
    p.add_argument("--criterion", choices=("aic", "bic"), default="aic")
    p.add_argument("--families", help="comma-separated copula families "
                   f"(default {','.join(bicop.DEFAULT_CANDIDATES)})")
    p.add_argument("--gumbel", action="store_true", help="add Gumbel to the candidates")
    p.add_argument("--trunc-level", type=_positive_int,
                   help="use Independence above this tree level")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: all cores); never changes results")


def _add_out(p, what):
    p.add_argument("--out", help=f"write {what} here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vinedep", description="Vine-copula dependence analysis of CSV "
                     "cohorts.", epilog=MISSING_HELP)
    parser.add_argument("--version", action="version", version=f"vinedep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("curate", help="apply bounds, drop sparse rows, impute medians",
                       epilog=MISSING_HELP)
    _add_input(p)
    _add_out(p, "the curated CSV")
    p.add_argument("--log", help="write the curation log JSON here (default stderr)")

    p = sub.add_parser("fit", help="fit a vine and write the model JSON", epilog=MISSING_HELP)
    _add_input(p)
    _add_margins(p)
    _add_fit(p)
    p.add_argument("--vine", choices=("rvine", "cvine", "dvine"), default="rvine")
    p.add_argument("--order", help="comma-separated variable order for --vine dvine")
    _add_out(p, "the model JSON")

    p = sub.add_parser("rank", help="C-vine central-variable ranking", epilog=MISSING_HELP)
    _add_input(p)
    _add_margins(p)
    _add_fit(p)
    p.add_argument("--levels", type=_positive_int, help="number of tree levels (default d-1)")
    p.add_argument("--condition", action="append", default=[], metavar="VAR=VALUE",
                   help="restrict to matching rows and drop VAR; repeatable")
    p.add_argument("--min-rows", type=_positive_int, default=analysis.MIN_SUBSET_ROWS,
                   help="smallest admissible conditioned subset")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_out(p, "the report")

    p = sub.add_parser("clusters", help="first-tree hubs of an R-vine", epilog=MISSING_HELP)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="fitted model JSON (its first tree is used)")
    src.add_argument("--input", help="CSV file; an R-vine is fitted first")
    p.add_argument("--schema")
    p.add_argument("--row-threshold", type=float, default=0.05)
    _add_margins(p)
    _add_fit(p)
    p.add_argument("--indicators", help="comma-separated binary indicators; runs the "
                   "co-occurrence report on indicators plus --covariates")
    p.add_argument("--covariates", default="", help="comma-separated covariates")
    p.add_argument("--min-degree", type=_positive_int, default=3)
    p.add_argument("--dot-dir", help="write one DOT file per hub here")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_out(p, "the report")

    p = sub.add_parser("sample", help="draw synthetic rows from a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", choices=("uniform", "data"), default="uniform")
    _add_out(p, "the CSV")

    p = sub.add_parser("export-tau", help="Kendall tau-b matrix", epilog=MISSING_HELP)
    _add_input(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=_positive_int, default=None)
    _add_out(p, "the matrix")
    return parser


# --------------------------------------------------------------------------

def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


def _settings(args) -> FitSettings:
    if args.families:
        fams = tuple(f.strip() for f in args.families.split(",") if f.strip())
        unknown = [f for f in fams if f not in bicop.FAMILIES]
        if unknown:
            raise DataError(f"unknown copula families {unknown}; "
                            f"choose from {list(bicop.FAMILIES)}")
    else:
        fams = bicop.DEFAULT_CANDIDATES
    if args.gumbel and "Gumbel" not in fams:
        fams = fams + ("Gumbel",)
    return FitSettings(fams, args.criterion, args.trunc_level, _threads(args))


def _load(args) -> ingest.DataTable:
    schema = ingest.load_schema(args.schema) if args.schema else None
    return ingest.load_table(args.input, schema)


def _curated(args) -> ingest.DataTable:
    t = ingest.curate(_load(args), args.row_threshold)
    if t.n_rows < bicop.MIN_FIT_N:
        raise DataError(f"{t.n_rows} rows after curation; at least {bicop.MIN_FIT_N} "
                        "are needed to fit")
    return t


def _names(text: str | None) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()] if text else []


def cmd_curate(args) -> int:
    t = ingest.curate(_load(args), args.row_threshold)
    buf = io.StringIO()
    ingest.write_csv(t, buf)
    _write(buf.getvalue(), args.out)
    text = serialize.dumps(t.log.to_dict())
    if args.log:
        Path(args.log).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return 0


def cmd_fit(args) -> int:
    t = _curated(args)
    order = _names(args.order) or None
    if order is not None:
        if args.vine != "dvine":
            raise DataError("--order applies to --vine dvine only")
        if sorted(order) != sorted(t.names):
            raise DataError("--order must list every variable exactly once")
        order = [t.names.index(v) for v in order]
    fv = fit_table(t, args.vine, _settings(args), args.tie_policy, args.seed, order)
    _write(serialize.dumps(fv.to_dict()), args.out)
    return 0


def cmd_rank(args) -> int:
    t = _curated(args)
    settings = _settings(args)
    if args.condition:
        cond = [analysis.parse_condition(c) for c in args.condition]
        ranking = analysis.conditioned_ranking(t, cond, args.levels, settings, args.min_rows,
                                               args.tie_policy, args.seed)
    else:
        u, _ = to_pseudo_obs(t, args.tie_policy, args.seed)
        ranking = analysis.rank_central_variables(u, args.levels, settings)
    if args.format == "json":
        doc = analysis.report_dict([ranking])
        doc["seed"] = args.seed
        text = serialize.dumps(doc)
    else:
        text = ranking.to_text()
    _write(text, args.out)
    return 0


def cmd_clusters(args) -> int:
    settings = _settings(args)
    if args.model:
        fv = _load_model(args.model)
        report = analysis.extract_clusters(fv.structure, args.min_degree)
    else:
        t = _curated(args)
        indicators = _names(args.indicators)
        if indicators:
            report, _ = analysis.comorbidity_report(t, indicators, _names(args.covariates),
                                                    settings, args.min_degree, args.seed)
        else:
            fv = fit_table(t, "rvine", settings, args.tie_policy, args.seed)
            report = analysis.extract_clusters(fv.structure, args.min_degree)
    if args.dot_dir:
        out = Path(args.dot_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, hub in enumerate(report.hubs, 1):
            (out / f"hub_{i:02d}.dot").write_text(hub.to_dot(), encoding="utf-8")
    if args.format == "json":
        doc = analysis.report_dict([], report)
        doc["seed"] = args.seed
        text = serialize.dumps(doc)
    else:
        text = report.to_text()
    _write(text, args.out)
    return 0


def _load_model(path: str) -> FittedVine:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"model file not found: {p}")
    try:
        return FittedVine.from_dict(serialize.loads(p.read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"model {p} is malformed: {exc}") from None


def cmd_sample(args) -> int:
    fv = _load_model(args.model)
    if args.scale == "data":
        batch = sample_data_scale(fv, args.n, args.seed)
        rows = batch.data_scale
        fmt = ingest.format_value
    else:
        batch = sample_uniform(fv, args.n, args.seed)
        rows = batch.uniforms
        fmt = lambda v: format(float(v), ".12g")  # noqa: E731
    log.info("sampled %d rows with seed %d (%s)", args.n, args.seed, GENERATOR)
    lines = [",".join(batch.names)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_export_tau(args) -> int:
    t = _curated(args)
    tm = tau_matrix(t.matrix(), t.names, _threads(args))
    _write(tm.to_csv() if args.format == "csv" else serialize.dumps(tm.to_dict()), args.out)
    return 0


COMMANDS = {"curate": cmd_curate, "fit": cmd_fit, "rank": cmd_rank, "clusters": cmd_clusters,
            "sample": cmd_sample, "export-tau": cmd_export_tau}


def _configure_logging() -> None:
    level = os.environ.get("VINEDEP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(all="ignore"):
            return COMMANDS[args.command](args)
    except VineDepError as exc:
        sys.stderr.write(f"vinedep {args.command}: {exc}\n")
        return exc.exit_code
    except (FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(f"vinedep {args.command}: numeric failure: {exc}\n")
        return NumericError.exit_code
    except OSError as exc:
        sys.stderr.write(f"vinedep {args.command}: {exc}\n")
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
