"""Command-line entry point: run, matrix, oracle, score, curve and serve."""

import argparse
import csv
import logging
import sys
from pathlib import Path

from src.bench import (
    FAILED,
    CurveAxis,
    InvariantViolation,
    OracleCapExceeded,
    Reference,
    anytime_curve,
    build_problem,
    dijkstra_oracle,
    find_crossover,
    ipc_score,
    parse_matrix_config,
    run_matrix,
    spec_from_options,
)
from src.config import settings
from src.evaluators import EvaluatorKind, TieBreak
from src.heuristics import HeuristicKind
from src.models import DomainKind, RunRecord
from src.observability import setup_logging
from src.reports import ReportIOError, emit_csv, emit_markdown, emit_records, read_all_records

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE_CAP = 3
EXIT_INVARIANT = 4


def _add_domain_arguments(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("domain")
    group.add_argument("--domain", required=True, choices=[d.value for d in DomainKind])
    for flag in (
        "--k",
        "--goal",
        "--expensive-cost",
        "--x",
        "--y",
        "--high-cost",
        "--low-cost",
        "--goal-high",
        "--goal-low",
        "--depth-cap",
        "--passengers",
        "--planes",
        "--chain-length",
        "--seed",
        "--facts",
        "--actions",
        "--max-cost",
    ):
        group.add_argument(flag, type=int)
    group.add_argument("--passenger-cities", help="comma-separated start city per passenger")
    group.add_argument("--plane-cities", help="comma-separated start city per plane")
    group.add_argument("--passenger-goals", help="comma-separated goal city per passenger")
    group.add_argument("--file", help="task file for --domain taskfile")


def _add_search_arguments(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("search")
    group.add_argument("--id", help="run id (derived from the run spec when omitted)")
    group.add_argument("--eval", default=EvaluatorKind.COST.value, choices=[k.value for k in EvaluatorKind])
    group.add_argument("--weight", help="WEIGHTED_COST weight, a rational >= 1")
    group.add_argument("--tiebreak", default=TieBreak.NONE.value, choices=[t.value for t in TieBreak])
    group.add_argument("--hybrid-max-cost", type=int)
    group.add_argument("--heur", default=HeuristicKind.ZERO.value, choices=[h.value for h in HeuristicKind])
    group.add_argument("--prune-heur", default=HeuristicKind.ZERO.value, choices=["zero", "exact"])
    group.add_argument("--lookahead", action="store_true")
    group.add_argument("--plateau-tau", help="rational plateau threshold, e.g. 1/10000")
    group.add_argument("--max-expansions", type=int)
    group.add_argument("--max-seconds")
    group.add_argument("--max-nodes", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epsilon-bench", description="Cost- and size-based search benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one search run")
    _add_domain_arguments(run)
    _add_search_arguments(run)
    run.add_argument("--out", help="directory for runs.csv and events.csv")
    run.add_argument("--state-cap", type=int, default=settings.oracle_state_cap, help="oracle cap, 0 disables")

    matrix = sub.add_parser("matrix", help="execute a matrix config")
    matrix.add_argument("--config", required=True)
    matrix.add_argument("--out", required=True)
    matrix.add_argument("--jobs", type=int, default=settings.matrix_jobs)
    matrix.add_argument("--state-cap", type=int, default=settings.oracle_state_cap, help="oracle cap, 0 disables")

    oracle = sub.add_parser("oracle", help="exact distances by uniform-cost enumeration")
    _add_domain_arguments(oracle)
    oracle.add_argument("--state-cap", type=int, default=settings.oracle_state_cap)
    oracle.add_argument("--out")

    score = sub.add_parser("score", help="IPC quality scores from run records")
    score.add_argument("--records", nargs="+", required=True)
    score.add_argument("--reference", default=Reference.ORACLE.value, choices=[r.value for r in Reference])
    score.add_argument("--out", required=True)
    score.add_argument("--markdown")

    curve = sub.add_parser("curve", help="anytime score curves from run records")
    curve.add_argument("--records", nargs="+", required=True)
    curve.add_argument("--axis", default=CurveAxis.EXPANSIONS.value, choices=[a.value for a in CurveAxis])
    curve.add_argument("--instants", required=True, help="comma-separated ascending instants")
    curve.add_argument("--reference", default=Reference.ORACLE.value, choices=[r.value for r in Reference])
    curve.add_argument("--out", required=True)
    curve.add_argument("--leader", help="variant expected to lead early")
    curve.add_argument("--challenger", help="variant expected to overtake")

    serve = sub.add_parser("serve", help="serve the HTTP API")
    serve.add_argument("--host", default=settings.api_host)
    serve.add_argument("--port", type=int, default=settings.api_port)
    return parser


def _options(args: argparse.Namespace) -> dict:
    """Namespace back to flag-named options, dropping unset ones."""
    skip = {"command", "out", "state_cap"}
    return {
        key.replace("_", "-"): value
        for key, value in vars(args).items()
        if key not in skip and value is not None
    }


def _summary(record: RunRecord) -> str:
    if record.status == FAILED:
        return f"{record.run_id}: {FAILED} ({record.error})"
    best = "-" if record.best_cost is None else f"cost={record.best_cost} size={record.best_size}"
    return (
        f"{record.run_id}: {record.status} {best} expansions={record.expansions} "
        f"discovery={record.discovery_expansions} oracle={record.oracle_cost}"
    )


def cmd_run(args: argparse.Namespace) -> int:
    spec = spec_from_options(_options(args))
    record = run_matrix([spec], parallelism=1, oracle_cap=args.state_cap)[0]
    print(_summary(record))
    if args.out:
        emit_records([record], args.out)
    return EXIT_CONFIG if record.status == FAILED else EXIT_OK


def cmd_matrix(args: argparse.Namespace) -> int:
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as e:
        raise ReportIOError(f"cannot read {path}: {e}") from e
    specs = parse_matrix_config(text)
    records = run_matrix(specs, parallelism=args.jobs, oracle_cap=args.state_cap)
    for record in records:
        print(_summary(record))
    emit_records(records, args.out)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    spec = spec_from_options(_options(args))
    problem = build_problem(spec.domain, spec.params)
    distances = dijkstra_oracle(problem, args.state_cap)
    goals = [value for state, value in distances.items() if problem.is_goal(state)]
    optimum = min(goals) if goals else None
    print(f"{spec.problem_id}: reachable={len(distances)} optimum={optimum}")
    if args.out:
        out = Path(args.out)
        rows = sorted(distances.items(), key=lambda item: (item[1], repr(item[0])))
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            with out.open("w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["state", "cost", "size", "goal"])
                for state, (cost, size) in rows:
                    writer.writerow([repr(state), cost, size, "true" if problem.is_goal(state) else "false"])
        except OSError as e:
            raise ReportIOError(f"cannot write {out}: {e}") from e
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    records = read_all_records(args.records)
    report = ipc_score(records, Reference(args.reference))
    emit_csv(report, args.out)
    if args.markdown:
        emit_markdown(report, args.markdown)
    for variant in sorted(report.aggregates):
        print(f"{variant}: {float(report.percentage(variant)):.1f}%")
    return EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    try:
        instants = [int(part) for part in args.instants.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"instants must be integers, got {args.instants!r}") from None
    records = read_all_records(args.records)
    curve = anytime_curve(records, instants, CurveAxis(args.axis), Reference(args.reference))
    emit_csv(curve, args.out)
    if args.leader and args.challenger:
        crossover = find_crossover(curve, args.leader, args.challenger)
        if crossover is None:
            print(f"{args.challenger} never overtakes {args.leader}")
        else:
            logger.info(f"Crossover: {args.challenger} overtakes {args.leader} at {crossover}")
            print(f"crossover at {args.axis}={crossover}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("src.main:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "matrix": cmd_matrix,
    "oracle": cmd_oracle,
    "score": cmd_score,
    "curve": cmd_curve,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except OracleCapExceeded as e:
        logger.error(f"Oracle cap exceeded: {e}")
        return EXIT_ORACLE_CAP
    except InvariantViolation as e:
        logger.error(f"Invariant violation: {e}")
        return EXIT_INVARIANT
    except (ValueError, ReportIOError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
