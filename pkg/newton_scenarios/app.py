# -*- coding: utf-8 -*-

"""
Main module of the newton-scenarios app.
"""

import argparse
from collections import defaultdict
import logging
import logging.config
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sqlalchemy.exc import SQLAlchemyError

from newton_scenarios import __title__, __version__
from newton_scenarios.catalog import SCENARIOS, lookup
from newton_scenarios.config import (
    ENVIRONMENTS,
    LogglyAdapter,
    configure_app,
    default_bank_path,
    format_traceback,
    newton_logging_config,
)
from newton_scenarios.datastore import session_scope
from newton_scenarios.errors import IngestionError, NewtonError, ParameterError
from newton_scenarios.worker_bank import (
    ENCODERS,
    BankConfig,
    QueryRecord,
    bank_encoder,
    build_bank,
    entry_curve,
    entry_flow,
    queries_from_bank,
)
from newton_scenarios.worker_camera import Camera, project_point
from newton_scenarios.worker_datastore import (
    record_artifact,
    record_run,
    runs_for_digest,
)
from newton_scenarios.worker_dynamics import RAW_FEATURE_LENGTH
from newton_scenarios.worker_matching import (
    DESCRIPTOR_DIM,
    EncoderParams,
    FusionConfig,
    SUPERVISION,
    MatchResult,
    encode,
    output_classes,
    predict,
    supervision_of,
)
from newton_scenarios.worker_metrics import angular_error, f_measure, mhd
from newton_scenarios.worker_plots import render_curves, render_entry
from newton_scenarios.worker_reports import (
    format_report,
    format_rows,
    read_queries,
    scenario_report,
    write_losses,
    write_queries,
    write_report,
    write_report_rows,
    write_similarities,
)
from newton_scenarios.worker_store import (
    BankFile,
    atomic_write,
    file_digest,
    load_bank,
    load_params,
    save_bank,
    save_params,
)
from newton_scenarios.worker_training import (
    DEFAULT_ITERS,
    TrainingConfig,
    TrainingResult,
    train_encoder,
)


METRICS = ("fmeasure", "mhd", "flow", "accuracy", "state")

logger = LogglyAdapter(logging.getLogger("newton-scenarios"), {})


def resolve_encoder(bank_file: BankFile, params_path: Optional[str] = None):
    """
    Returns the encoder queries must pass through before matching: a saved
    params file when given, otherwise the encoder the bank was built with

    Args:
        bank_file:              loaded bank
        params_path:            optional encoder params file

    Returns:
        EncoderParams
    """
    bank = bank_file.bank
    if params_path:
        params = load_params(params_path)
    elif bank_file.encoder in ENCODERS:
        config = BankConfig(bank.descriptor_dim, bank_file.encoder, bank_file.seed)
        params = bank_encoder(config, len(bank))
    else:
        raise ParameterError(
            f"Bank was built with encoder '{bank_file.encoder}'; pass its --params."
        )
    if params.descriptor_dim != bank.descriptor_dim:
        raise ParameterError(
            f"Encoder produces {params.descriptor_dim}-dimensional descriptors, "
            f"bank uses {bank.descriptor_dim}."
        )
    supervision_of(params, bank)
    if params.raw_dim != bank_file.raw_dim:
        raise ParameterError(
            f"Encoder takes {params.raw_dim} raw features, bank expects "
            f"R={bank_file.raw_dim}."
        )
    return params


def _check_features(records: Sequence[QueryRecord], raw_dim: int) -> None:
    bad = [r.id for r in records if len(r.features) != raw_dim]
    if bad:
        raise IngestionError(
            f"Queries {', '.join(bad)} do not have the expected R={raw_dim} "
            "raw features."
        )


def _match_all(
    records: Sequence[QueryRecord],
    bank_file: BankFile,
    params: EncoderParams,
    lam: float,
) -> List[MatchResult]:
    _check_features(records, bank_file.raw_dim)
    cfg = FusionConfig(lam)
    return [
        predict(encode(r.features, params), bank_file.bank, params, cfg)
        for r in records
    ]


def _ledger(
    enabled: bool,
    command: str,
    arguments: str,
    outputs: Sequence = (),
    outcome: Optional[float] = None,
    input_path: Optional[str] = None,
) -> None:
    if not enabled:
        return
    try:
        with session_scope() as session:
            artifacts = [
                record_artifact(session, path, kind)
                for path, kind in outputs
                if path and os.path.isfile(path)
            ]
            primary = artifacts[0] if artifacts else None
            record_run(session, command, arguments, outcome, input_path, primary)
    except SQLAlchemyError as exc:
        logger.warning(f"Unable to update run ledger. {exc}")


def bank_build(
    out_path: str,
    config: Optional[BankConfig] = None,
    params_path: Optional[str] = None,
) -> BankFile:
    """
    Builds the scenario bank and writes it to a bank file

    Args:
        out_path:               destination bank file
        config:                 BankConfig
        params_path:            trained encoder params to encode with

    Returns:
        BankFile
    """
    if config is None:
        config = BankConfig()
    params = None
    encoder = config.encoder
    if params_path:
        params = load_params(params_path)
        encoder = f"params:{file_digest(params_path)}"
        config = BankConfig(params.descriptor_dim, config.encoder, config.seed)
    bank = build_bank(config, params)
    bank_file = BankFile(bank, RAW_FEATURE_LENGTH, encoder, config.seed)
    save_bank(out_path, bank_file)
    return bank_file


def bank_inspect(bank_path: str, ledger: bool = False) -> str:
    bank_file = load_bank(bank_path)
    bank = bank_file.bank
    counts: Dict[int, int] = defaultdict(int)
    for entry in bank.catalog:
        counts[entry.scenario_id] += 1
    lines = [
        f"bank: {bank_path}",
        f"format version: {bank_file.version}",
        f"entries: {len(bank)}",
        f"descriptor dim: {bank.descriptor_dim}",
        f"raw dim: {bank_file.raw_dim}",
        f"encoder: {bank_file.encoder}",
        f"seed: {bank_file.seed}",
        "views per scenario: "
        + " ".join(f"{s.id}:{counts.get(s.id, 0)}" for s in SCENARIOS),
    ]
    if ledger:
        try:
            with session_scope() as session:
                for run in runs_for_digest(session, file_digest(bank_path)):
                    lines.append(
                        f"run: {run.timestamp:%Y-%m-%d %H:%M:%S} {run.command} "
                        f"{run.arguments}"
                    )
        except SQLAlchemyError as exc:
            logger.warning(f"Unable to read run ledger. {exc}")
    return "\n".join(lines)


def bank_queries(bank_path: str, out_path: str) -> List[QueryRecord]:
    records = queries_from_bank(load_bank(bank_path).bank)
    write_queries(out_path, records)
    return records


def query_cmd(
    bank_path: str,
    records: Sequence[QueryRecord],
    lam: float = 0.5,
    params_path: Optional[str] = None,
    svg_out: Optional[str] = None,
    similarities_out: Optional[str] = None,
) -> List[MatchResult]:
    """
    Matches queries against the bank

    Args:
        bank_path:              bank file
        records:                queries with raw features
        lam:                    fusion weight of the image-side head
        params_path:            encoder params file
        svg_out:                optional SVG with one predicted curve per query
        similarities_out:       optional CSV of per-state similarities

    Returns:
        list of MatchResult
    """
    bank_file = load_bank(bank_path)
    params = resolve_encoder(bank_file, params_path)
    results = _match_all(records, bank_file, params, lam)

    if svg_out:
        curves = []
        for record, result in zip(records, results):
            curve = entry_curve(bank_file.bank, result.entry_id, result.state)
            view = bank_file.bank.entry(result.entry_id).viewpoint
            cam = Camera.from_viewpoint(view)
            image = np.array([project_point(cam, p) for p in curve.points])
            curves.append((record.id, image))
        atomic_write(svg_out, render_curves(curves).encode("utf-8"))
    if similarities_out:
        write_similarities(
            similarities_out,
            [(r.id, m.entry_id, m.per_state_sims) for r, m in zip(records, results)],
        )
    return results


def _group_values(
    records: Sequence[QueryRecord],
    results: Sequence[MatchResult],
    metric: str,
    bank_file: BankFile,
    threshold: Optional[float],
) -> Dict[int, List[float]]:
    needs = {
        "fmeasure": lambda r: r.curve is not None,
        "mhd": lambda r: r.curve is not None,
        "flow": lambda r: r.flow is not None,
        "accuracy": lambda r: r.entry_id is not None,
        "state": lambda r: r.entry_id is not None and r.state is not None,
    }[metric]
    missing = [r.id for r in records if not needs(r)]
    if missing:
        raise IngestionError(
            f"Metric '{metric}' needs ground truth missing from queries: "
            f"{', '.join(missing)}."
        )

    bank = bank_file.bank
    values: Dict[int, List[float]] = defaultdict(list)
    for record, result in zip(records, results):
        h, s = result.entry_id, result.state
        if metric == "fmeasure":
            value = f_measure(entry_curve(bank, h, s), record.curve, threshold).f
        elif metric == "mhd":
            value = mhd(entry_curve(bank, h, s), record.curve)
        elif metric == "flow":
            value = angular_error(entry_flow(bank, h, s), record.flow)
        elif metric == "accuracy":
            value = 100.0 * (h == record.entry_id)
        else:
            value = 100.0 * (h == record.entry_id and s == record.state)
        scenario_entry = record.entry_id if record.entry_id is not None else h
        values[lookup(scenario_entry).scenario_id].append(float(value))
    return values


def _evaluate(
    bank_file: BankFile,
    records: Sequence[QueryRecord],
    params: EncoderParams,
    metric: str,
    threshold: Optional[float],
    lam: float,
) -> List[float]:
    results = _match_all(records, bank_file, params, lam)
    return scenario_report(
        _group_values(records, results, metric, bank_file, threshold)
    )


def _check_eval_args(metric: str, threshold: Optional[float]) -> None:
    if metric not in METRICS:
        raise ParameterError(f"Unknown metric '{metric}', options: {METRICS}.")
    if threshold is not None and not threshold > 0:
        raise ParameterError(f"Threshold must be positive, got {threshold}.")


def eval_cmd(
    bank_path: str,
    queries_path: str,
    metric: str = "fmeasure",
    threshold: Optional[float] = None,
    lam: float = 0.5,
    params_path: Optional[str] = None,
    out_path: Optional[str] = None,
) -> List[float]:
    """
    Evaluates matching over a query set and reports one value per scenario
    plus their average

    Args:
        bank_path:              bank file
        queries_path:           query set CSV with ground truth
        metric:                 fmeasure, mhd, flow, accuracy or state
        threshold:              F-measure distance threshold in meters
        lam:                    fusion weight of the image-side head
        params_path:            encoder params file
        out_path:               optional report CSV

    Returns:
        13 values: scenarios 1-12 and the average
    """
    _check_eval_args(metric, threshold)
    bank_file = load_bank(bank_path)
    params = resolve_encoder(bank_file, params_path)
    records = read_queries(queries_path)
    row = _evaluate(bank_file, records, params, metric, threshold, lam)
    if out_path:
        write_report(out_path, metric, row)
    return row


def compare_cmd(
    bank_path: str,
    queries_path: str,
    state_params_path: str,
    metric: str = "state",
    threshold: Optional[float] = None,
    lam: float = 0.5,
    params_path: Optional[str] = None,
    out_path: Optional[str] = None,
) -> Dict[str, List[float]]:
    """
    Evaluates an entry-supervised encoder and a state-supervised one on the
    same query set, one report row each

    Args:
        bank_path:              bank file
        queries_path:           query set CSV with ground truth
        state_params_path:      params trained with state supervision
        metric:                 fmeasure, mhd, flow, accuracy or state
        threshold:              F-measure distance threshold in meters
        lam:                    fusion weight of the image-side head
        params_path:            entry-supervised params, bank encoder if omitted
        out_path:               optional report CSV

    Returns:
        supervision -> 13 values
    """
    _check_eval_args(metric, threshold)
    bank_file = load_bank(bank_path)
    entry_params = resolve_encoder(bank_file, params_path)
    state_params = resolve_encoder(bank_file, state_params_path)
    bank = bank_file.bank
    for expected, params in zip(SUPERVISION, (entry_params, state_params)):
        found = supervision_of(params, bank)
        if found != expected:
            raise ParameterError(
                f"Expected {expected}-supervised params, got a {found}-level head."
            )
    records = read_queries(queries_path)
    rows = {
        supervision: _evaluate(bank_file, records, params, metric, threshold, lam)
        for supervision, params in zip(SUPERVISION, (entry_params, state_params))
    }
    if out_path:
        write_report_rows(out_path, _labelled_rows(metric, rows))
    return rows


def _labelled_rows(
    metric: str, rows: Dict[str, List[float]]
) -> List[Tuple[str, List[float]]]:
    return [(f"{metric}:{supervision}", row) for supervision, row in rows.items()]


def train_cmd(
    bank_path: str,
    queries_path: str,
    iters: int = DEFAULT_ITERS,
    seed: int = 0,
    lam: float = 0.5,
    batch: Optional[int] = 128,
    params_out: str = "params.npr",
    loss_out: Optional[str] = "loss.csv",
    supervision: str = "entry",
) -> TrainingResult:
    """
    Trains the encoder on a labelled query set, starting from the bank's own
    encoder, and saves the params and the per-iteration loss curve. State
    supervision swaps in a zero head over every entry state.

    Args:
        bank_path:              bank file
        queries_path:           query set CSV with entry labels
        iters:                  SGD iterations
        seed:                   batch sampling seed
        lam:                    fusion weight of the image-side head
        batch:                  batch size
        params_out:             params file to write
        loss_out:               loss CSV to write
        supervision:            entry or state

    Returns:
        TrainingResult
    """
    config = TrainingConfig(
        iters=iters, batch=batch, lam=lam, seed=seed, supervision=supervision
    )
    bank_file = load_bank(bank_path)
    records = read_queries(queries_path)
    by_state = supervision == "state"
    unlabelled = [
        r.id
        for r in records
        if r.entry_id is None or (by_state and r.state is None)
    ]
    if unlabelled:
        needed = "entry and state" if by_state else "entry"
        raise IngestionError(
            f"Training needs {needed} labels missing from queries: "
            f"{', '.join(unlabelled)}."
        )
    _check_features(records, bank_file.raw_dim)
    bank = bank_file.bank
    init = resolve_encoder(bank_file)
    if by_state:
        init = init.with_zero_head(output_classes(bank, "state"))
        dataset = [(r.features, r.entry_id, r.state) for r in records]
    else:
        dataset = [(r.features, r.entry_id) for r in records]
    result = train_encoder(dataset, bank, config, init)
    save_params(params_out, result.params)
    if loss_out:
        write_losses(loss_out, result.losses)
    return result


def plot_cmd(bank_path: str, entry_id: int, out_path: Optional[str] = None) -> str:
    """
    Renders an entry's trajectory with velocity and force glyphs as SVG
    """
    lookup(entry_id)
    svg = render_entry(load_bank(bank_path).bank, entry_id)
    if out_path:
        atomic_write(out_path, svg.encode("utf-8"))
    return svg


def _parse_features(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise IngestionError(f"Malformed feature list '{text}'.")


def run(args, ledger: bool) -> int:
    logger.info(f"Current working directory: '{os.getcwd()}'.")
    bank_path = getattr(args, "bank", None) or default_bank_path()
    summary = " ".join(f"{k}={v}" for k, v in sorted(vars(args).items()))

    if args.command == "bank" and args.action == "build":
        out = args.out or bank_path
        config = BankConfig(args.dim, args.encoder, args.seed)
        bank_build(out, config, args.params)
        _ledger(ledger, "bank build", summary, [(out, "bank")])
        print(out)
    elif args.command == "bank" and args.action == "inspect":
        print(bank_inspect(bank_path, ledger))
    elif args.command == "bank" and args.action == "queries":
        bank_queries(bank_path, args.out)
        outputs = [(args.out, "queries")]
        _ledger(ledger, "bank queries", summary, outputs, None, bank_path)
        print(args.out)
    elif args.command == "query":
        if args.features:
            records = [QueryRecord("q1", _parse_features(args.features))]
        elif args.queries:
            records = read_queries(args.queries)
        else:
            raise ParameterError("Pass --features or --queries.")
        results = query_cmd(
            bank_path, records, args.lam, args.params, args.out, args.similarities
        )
        for record, result in zip(records, results):
            print(
                f"{record.id} h={result.entry_id} s_h={result.state} "
                f"confidence={result.confidence:.6f}"
            )
        outputs = [(args.out, "svg"), (args.similarities, "csv")]
        _ledger(ledger, "query", summary, outputs, None, bank_path)
    elif args.command == "train":
        result = train_cmd(
            bank_path,
            args.queries,
            args.iters,
            args.seed,
            args.lam,
            args.batch,
            args.out,
            args.loss,
            args.supervision,
        )
        final = result.losses[-1] if result.losses else None
        outputs = [(args.out, "params"), (args.loss, "loss")]
        _ledger(ledger, "train", summary, outputs, final, bank_path)
        print(f"final loss: {final}")
    elif args.command == "eval" and args.state_params:
        rows = compare_cmd(
            bank_path,
            args.queries,
            args.state_params,
            args.metric,
            args.threshold,
            args.lam,
            args.params,
            args.out,
        )
        outcome = rows["state"][-1]
        outputs = [(args.out, "report")]
        _ledger(ledger, "eval", summary, outputs, outcome, bank_path)
        sys.stdout.write(format_rows(_labelled_rows(args.metric, rows)))
    elif args.command == "eval":
        row = eval_cmd(
            bank_path,
            args.queries,
            args.metric,
            args.threshold,
            args.lam,
            args.params,
            args.out,
        )
        _ledger(ledger, "eval", summary, [(args.out, "report")], row[-1], bank_path)
        sys.stdout.write(format_report(args.metric, row))
    elif args.command == "plot":
        out = args.out or f"entry_{args.entry}.svg"
        plot_cmd(bank_path, args.entry, out)
        _ledger(ledger, "plot", summary, [(out, "svg")], None, bank_path)
        print(out)
    return 0


def _add_bank_arg(parser):
    parser.add_argument(
        "--bank",
        type=str,
        help="bank file, default $NEWTON_BANK_DIR/bank.nbk",
    )


def _add_match_args(parser):
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=0.5,
        help="weight of the image-side scores, 1 ignores the motion side",
    )
    parser.add_argument("--params", type=str, help="encoder params file")


def createArgParser():
    parser = argparse.ArgumentParser(
        prog=__title__, description="newton-scenarios help"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--env",
        default="dev",
        choices=ENVIRONMENTS,
        help="environment to run app, options: dev | prod",
    )
    parser.add_argument(
        "--no-ledger", action="store_true", help="do not record runs in the ledger"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    bank = commands.add_parser("bank", help="build and inspect scenario banks")
    actions = bank.add_subparsers(dest="action", required=True)
    build = actions.add_parser("build", help="simulate scenarios and write a bank")
    _add_bank_arg(build)
    build.add_argument("--out", type=str, help="bank file to write")
    build.add_argument("--encoder", choices=ENCODERS, default="identity")
    build.add_argument("--dim", type=int, default=DESCRIPTOR_DIM)
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--params", type=str, help="encode with trained params")
    inspect = actions.add_parser("inspect", help="print bank manifest summary")
    _add_bank_arg(inspect)
    queries = actions.add_parser("queries", help="write queries derived from a bank")
    _add_bank_arg(queries)
    queries.add_argument("--out", type=str, required=True)

    query = commands.add_parser("query", help="match queries against the bank")
    _add_bank_arg(query)
    _add_match_args(query)
    query.add_argument("--features", type=str, help="comma separated raw features")
    query.add_argument("--queries", type=str, help="query set CSV")
    query.add_argument("--out", type=str, help="SVG of predicted curves")
    query.add_argument("--similarities", type=str, help="per-state similarity CSV")

    train = commands.add_parser("train", help="train the descriptor encoder")
    _add_bank_arg(train)
    train.add_argument("--queries", type=str, required=True)
    train.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--batch", type=int, default=128)
    train.add_argument("--lambda", dest="lam", type=float, default=0.5)
    train.add_argument("--out", type=str, default="params.npr")
    train.add_argument("--loss", type=str, default="loss.csv")
    train.add_argument(
        "--supervision",
        choices=SUPERVISION,
        default="entry",
        help="train a head over entries or over every entry state",
    )

    evaluate = commands.add_parser("eval", help="evaluate over a query set")
    _add_bank_arg(evaluate)
    _add_match_args(evaluate)
    evaluate.add_argument("--queries", type=str, required=True)
    evaluate.add_argument("--metric", choices=METRICS, default="fmeasure")
    evaluate.add_argument("--threshold", type=float, help="F-measure threshold, m")
    evaluate.add_argument("--out", type=str, help="report CSV")
    evaluate.add_argument(
        "--state-params",
        type=str,
        help="state-supervised params, reported next to --params",
    )

    plot = commands.add_parser("plot", help="render an entry as SVG")
    _add_bank_arg(plot)
    plot.add_argument("--entry", type=int, required=True)
    plot.add_argument("--out", type=str, help="SVG file")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = createArgParser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        log_fh, log_token, handlers, ledger = configure_app(args.env)
        logging.config.dictConfig(newton_logging_config(log_fh, log_token, handlers))
        logger.debug(f"Initiating {__title__} in {args.env.upper()} mode...")
        return run(args, ledger and not args.no_ledger)
    except NewtonError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.critical(f"Unhandled error. {format_traceback(exc)}")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
