"""``medent`` command-line interface.

Exit codes: 0 success, 1 data error, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import logging
import sys
from datetime import date
from pathlib import Path
from typing import Iterator, TextIO

from . import __version__
from .comorbidity import comorbidity_report, write_report
from .cooccur import (
    CooccurrenceMatrix,
    build_cooccurrence,
    build_index,
    build_prevalence,
    restrict_irreducible,
)
from .evaluation import evaluate, temporal_split
from .ingest import (
    CodeMapping,
    IngestError,
    clean_histories,
    load_mapping,
    parse_visits,
    read_histories,
    write_histories,
)
from .maxent import DEFAULT_MAX_ITER, DEFAULT_TOL, FitError, fit
from .modelfile import ModelFormatError, load_model, save_model
from .predict import WeightingScheme, UnknownHistoryError, score, top_k
from .synth import SynthConfig, write_synthetic

logger = logging.getLogger("medent")

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


# --- argument types ----------------------------------------------------------


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _int_at_least(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {value}")
        return value
    return parse


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


# --- I/O helpers ---------------------------------------------------------------


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


@contextlib.contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    """Buffer the whole output and write it once, so failures leave no partial file."""
    buf = io.StringIO()
    yield buf
    if path is None or path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _mapping(args) -> CodeMapping | None:
    if args.mapping is None:
        return None
    return load_mapping(args.mapping, fallback=args.unmapped)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _fit_histories(histories, tol: float, max_iter: int):
    index = build_index(histories)
    matrix = build_cooccurrence(histories, index)
    matrix, index, removed = restrict_irreducible(matrix, index)
    if removed:
        logger.warning("removed %d codes outside the largest connected block: %s",
                       len(removed), " ".join(removed))
    return fit(matrix, index, tol=tol, max_iter=max_iter), removed


# --- subcommands -------------------------------------------------------------


def cmd_clean(args) -> int:
    errors: list[IngestError] = []
    strict = args.mode == "strict"
    visits = parse_visits(_read_text(args.input), strict=strict, errors=errors)
    histories = clean_histories(visits, _mapping(args), strict=strict, errors=errors)
    if not visits:
        logger.warning("input has no visit rows")
    with _output(args.output) as out:
        write_histories(histories, out)
    _info(f"rows={len(visits)} patients={len(histories)} skipped={len(errors)}")
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.output is None:
        raise ConfigError("fit needs --output for the model file")
    rows = read_histories(_read_text(args.input))
    if not rows:
        raise IngestError("no patient histories in input")
    model, removed = _fit_histories([codes for _, codes in rows], args.tol, args.max_iter)
    save_model(model, args.output)
    if args.dump_matrix:
        with _output(args.dump_matrix) as out:
            CooccurrenceMatrix.from_dense(model.counts).dump(out)
    _info(f"lambda={model.lam!r} n={model.n} entropy={model.entropy!r} removed={len(removed)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    if args.model is None:
        raise ConfigError("predict needs --model")
    model = load_model(args.model)
    rows = read_histories(_read_text(args.input))
    scheme = WeightingScheme(args.scheme)
    skipped = 0
    with _output(args.output) as out:
        out.write("patient_id,rank,fcode,score\n")
        for pid, codes in rows:
            try:
                s = score(model, codes, scheme)
            except UnknownHistoryError:
                logger.warning("patient %s: no history code is in the model; skipped", pid)
                skipped += 1
                continue
            if s.dropped:
                logger.info("patient %s: %d codes not in the model", pid, s.dropped)
            ranked = top_k(s, args.k, model.index, codes if args.exclude_history else ())
            for rank, code in enumerate(ranked, start=1):
                out.write(f"{pid},{rank},{code},{s.scores[model.index[code]]:.6g}\n")
    _info(f"patients={len(rows) - skipped} skipped={skipped}")
    return EXIT_OK


def cmd_comorbid(args) -> int:
    model = load_model(args.model) if args.model else None
    prev = None
    if args.input:
        rows = read_histories(_read_text(args.input))
        if not rows:
            raise IngestError("no patient histories in input")
        prev = build_prevalence([codes for _, codes in rows])
    if args.source == "model" and model is None:
        raise ConfigError("model-based comorbidity needs --model")
    if args.source == "empirical" and prev is None:
        raise ConfigError("empirical comorbidity needs --input with cleaned histories")
    if args.gap is not None and model is None:
        raise ConfigError("--gap needs --model")
    table = comorbidity_report(model, prev, args.threshold, args.top, source=args.source,
                               measure=args.measure, asymmetric_gap=args.gap)
    with _output(args.output) as out:
        write_report(table, out)
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.cutoff is None:
        raise ConfigError("eval needs --cutoff")
    strict = args.mode == "strict"
    visits = parse_visits(_read_text(args.input), strict=strict)
    split = temporal_split(visits, _mapping(args), args.cutoff, strict=strict)
    if not split.train_histories:
        raise IngestError("no events before the cutoff")
    model, _ = _fit_histories(split.train_histories, args.tol, args.max_iter)
    prev = build_prevalence(split.train_histories)
    report = evaluate(model, split, prev, args.k, WeightingScheme(args.scheme),
                      args.exclude_history)
    with _output(args.output) as out:
        report.write(out)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        config = SynthConfig(
            seed=args.seed, patients=args.patients, codes=args.codes, pairs=args.pairs,
            boost=args.boost, mean_length=args.mean_length,
            start_year=args.start_year, end_year=args.end_year,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with _output(args.output) as out:
        chain = write_synthetic(config, out)
    _info("planted pairs: " + " ".join(f"{i}->{j}" for i, j in chain.planted))
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medent",
        description="Maximum-entropy disease risk model over ICD-10 histories.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    def io_flags(p, input_help, output_help, input_required=True):
        p.add_argument("--input", required=input_required, help=input_help)
        p.add_argument("--output", default=None, help=output_help + " (default: stdout)")

    def mapping_flags(p):
        p.add_argument("--mapping", default=None,
                       help="FAMILY<TAB>FCODE mapping file; without it codes collapse to F_<family>")
        p.add_argument("--unmapped", choices=("collapse", "reject"), default="collapse",
                       help="what to do with families missing from --mapping")
        p.add_argument("--mode", choices=("strict", "lenient"), default="strict",
                       help="strict aborts on the first bad row, lenient skips and counts it")

    def solver_flags(p):
        p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL,
                       help="relative power-method tolerance on the eigenvalue estimate")
        p.add_argument("--max-iter", type=_int_at_least(1), default=DEFAULT_MAX_ITER,
                       help="power-method iteration cap")

    def scoring_flags(p):
        p.add_argument("--k", type=_int_at_least(1), default=5, help="number of predictions")
        p.add_argument("--scheme", choices=("uniform", "decaying"), default="uniform",
                       help="history weighting; decaying weights the m-th latest disease 1/m^2")
        p.add_argument("--exclude-history", type=_bool, default=True, metavar="true|false",
                       help="never predict a disease already in the history")

    p = add("clean", cmd_clean, "Normalize visit records into per-patient histories.")
    io_flags(p, "visit CSV (patient_id,gender,treatment_date,code)", "cleaned-history CSV")
    mapping_flags(p)

    p = add("fit", cmd_fit, "Fit the maximum-entropy model from cleaned histories.")
    io_flags(p, "cleaned-history CSV", "model file")
    solver_flags(p)
    p.add_argument("--dump-matrix", default=None, help="also write count triplets 'i j count' here")

    p = add("predict", cmd_predict, "Rank likely future diseases per patient.")
    io_flags(p, "cleaned-history CSV", "prediction CSV (patient_id,rank,fcode,score)")
    p.add_argument("--model", default=None, help="model file written by 'fit'")
    scoring_flags(p)

    p = add("comorbid", cmd_comorbid, "Report comorbidity strength between disease pairs.")
    io_flags(p, "cleaned-history CSV (needed for --source empirical)",
             "report CSV (disease_i,disease_j,measure,value)", input_required=False)
    p.add_argument("--model", default=None, help="model file written by 'fit'")
    p.add_argument("--source", choices=("model", "empirical"), default="model",
                   help="model-based or count-based measures")
    p.add_argument("--measure", choices=("alrr", "rr", "phi"), default="alrr",
                   help="measure to threshold and sort on")
    p.add_argument("--threshold", type=float, default=0.0, help="minimum measure value")
    p.add_argument("--top", type=_int_at_least(1), default=20, help="maximum rows")
    p.add_argument("--gap", type=float, default=None,
                   help="also list model pairs whose ALRR differs by at least this between directions")

    p = add("eval", cmd_eval, "Temporal hit-rate evaluation against the prevalence baseline.")
    io_flags(p, "visit CSV", "report table")
    mapping_flags(p)
    p.add_argument("--cutoff", type=_iso_date, default=None, metavar="YYYY-MM-DD",
                   help="events before this date train, first occurrences on/after it are targets")
    solver_flags(p)
    scoring_flags(p)

    p = add("synth", cmd_synth, "Generate a synthetic visit CSV from a planted Markov chain.")
    p.add_argument("--output", default=None, help="visit CSV (default: stdout)")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--patients", type=_int_at_least(0), default=1000, help="number of patients")
    p.add_argument("--codes", type=_int_at_least(2), default=30, help="number of F-codes")
    p.add_argument("--pairs", type=_int_at_least(0), default=5, help="number of planted pairs")
    p.add_argument("--boost", type=float, default=10.0,
                   help="planted pair mass as a multiple of the average off-diagonal entry")
    p.add_argument("--mean-length", type=float, default=8.19, help="mean visits per patient")
    p.add_argument("--start-year", type=int, default=2007, help="first year of visit dates")
    p.add_argument("--end-year", type=int, default=2017, help="last year of visit dates")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"medent: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"medent: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IngestError, ModelFormatError, OSError, ValueError, KeyError) as exc:
        print(f"medent: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
