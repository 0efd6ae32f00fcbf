"""Command-line entry point.

Exit codes: 0 success, 1 bad arguments or configuration, 2 runtime failure
(for example an unreachable backend). Diagnostics go to stderr; results go to
files or stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import RunConfig, build_backend, build_engine, load_index, load_run_config
from .core import Ablation, load_qa_jsonl, new_root_question, trace_to_json, write_qa_jsonl
from .datacollect import collect_decom, collect_know, collect_rel, sample_records, write_training_jsonl
from .errors import BackendError, ConfigError, EmptyQuestion, InvalidParams, RaIsfError
from .evaluation.oracle import OracleWorldParams, build_oracle_world
from .evaluation.runner import Strategy, run_eval, sweep_dth, sweep_k, sweep_to_csv
from .retrieval import Corpus, build_index

logger = logging.getLogger("raisf")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _ablations(text: str) -> frozenset[Ablation]:
    try:
        return frozenset(Ablation(v.strip()) for v in text.split(",") if v.strip())
    except ValueError:
        choices = ",".join(a.value for a in Ablation)
        raise argparse.ArgumentTypeError(f"ablations are drawn from {choices}, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="raisf", description="Retrieval-augmented QA with iterative self-feedback.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    cfg = _Parser(add_help=False)
    cfg.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    cfg.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    par = _Parser(add_help=False)
    par.add_argument("--parallelism", type=int, default=1, help="questions solved concurrently")

    index = sub.add_parser("index", help="build a passage index")
    index_sub = index.add_subparsers(dest="action", metavar="ACTION", required=True, parser_class=_Parser)
    build = index_sub.add_parser("build", help="chunk a JSONL corpus and write a BM25 index")
    build.add_argument("--corpus", required=True, type=Path, help='JSONL of {"doc_id", "text"}')
    build.add_argument("--out", required=True, type=Path)

    solve = sub.add_parser("solve", parents=[cfg], help="answer one question")
    solve.add_argument("--question")
    solve.add_argument("--trace-out", type=Path, help="write the solve trace as JSON")

    ev = sub.add_parser("eval", help="evaluate a dataset")
    ev_sub = ev.add_subparsers(dest="action", metavar="ACTION", required=True, parser_class=_Parser)
    run = ev_sub.add_parser("run", parents=[cfg, par], help="score one strategy with Exact Match")
    run.add_argument("--dataset", type=Path)
    run.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.RA_ISF.value)
    run.add_argument("--ablation", type=_ablations, help="comma list of no-skm,no-prm,no-qdm (overrides config)")
    run.add_argument("--report", type=Path, help="write the JSON report here")
    run.add_argument("--strict-em", action="store_true", help="require full normalised equality")

    sweep = sub.add_parser("sweep", parents=[cfg, par], help="evaluate across d_th or k values, CSV out")
    sweep.add_argument("param", choices=["dth", "k"])
    sweep.add_argument("--dataset", type=Path)
    sweep.add_argument("--values", type=_csv_ints)
    sweep.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.RA_ISF.value)
    sweep.add_argument("--out", type=Path, help="CSV path (stdout if omitted)")

    collect = sub.add_parser("collect", parents=[cfg, par], help="build sub-model training data with a teacher backend")
    collect.add_argument("task", choices=["know", "rel", "decom"])
    collect.add_argument("--dataset", type=Path)
    collect.add_argument("--out", type=Path)
    collect.add_argument("--sample", type=int, help="uniformly sample this many questions")
    collect.add_argument("--seed", type=int, default=0, help="sampling seed")
    collect.add_argument("--k", type=int, help="passages per question for rel (default: engine k_passages)")

    oracle = sub.add_parser("oracle", help="generate a synthetic oracle world")
    oracle.add_argument("--out-dir", required=True, type=Path)
    defaults = OracleWorldParams()
    oracle.add_argument("--num-composites", type=int, default=defaults.num_composites)
    oracle.add_argument("--max-facts", type=int, default=defaults.max_facts)
    oracle.add_argument("--p-know", type=float, default=defaults.p_know)
    oracle.add_argument("--p-corpus", type=float, default=defaults.p_corpus)
    oracle.add_argument("--distractor-decay", type=float, default=defaults.distractor_decay)
    oracle.add_argument("--max-distractors", type=int, default=defaults.max_distractors)
    oracle.add_argument("--seed", type=int, default=defaults.seed)
    return parser


def _need(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _config(args: argparse.Namespace) -> RunConfig | None:
    run = load_run_config(args.config)
    if args.print_config:
        sys.stdout.write(run.to_toml())
        return None
    return run


def cmd_index(args: argparse.Namespace) -> int:
    corpus = Corpus.from_jsonl(args.corpus)
    index = build_index(corpus)
    index.save(args.out)
    print(f"indexed {len(corpus)} documents into {index.num_chunks} chunks -> {args.out}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    run = _config(args)
    if run is None:
        return EXIT_OK
    _need(args, "question")
    if not args.question.strip():
        raise UsageError("--question is empty")
    engine = build_engine(run)
    answer, trace = engine.solve(new_root_question(args.question))
    if args.trace_out:
        args.trace_out.write_text(trace_to_json(trace) + "\n", encoding="utf-8")
    print(answer.text)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    run = _config(args)
    if run is None:
        return EXIT_OK
    _need(args, "dataset")
    overrides = {} if args.ablation is None else {"ablation": args.ablation}
    engine = build_engine(run, **overrides)
    dataset = load_qa_jsonl(args.dataset)
    report = run_eval(
        engine, dataset, args.strategy,
        dataset_name=args.dataset.stem, parallelism=args.parallelism, strict_em=args.strict_em,
    )
    if args.report:
        report.save(args.report)
    print(report.to_text().split("\n", 1)[0])
    failed = report.errors
    if failed:
        kinds = sorted({r.error_type for r in failed})
        logger.error("%d of %d questions failed (%s)", len(failed), report.num_questions, ", ".join(kinds))
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    run = _config(args)
    if run is None:
        return EXIT_OK
    _need(args, "dataset", "values")
    if not args.values:
        raise UsageError("--values is empty")
    engine = build_engine(run)
    dataset = load_qa_jsonl(args.dataset)
    sweep = sweep_dth if args.param == "dth" else sweep_k
    points = sweep(engine, dataset, args.values, strategy=args.strategy,
                   dataset_name=args.dataset.stem, parallelism=args.parallelism)
    text = sweep_to_csv(points)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    failed = sum(len(r.errors) for _, r in points)
    if failed:
        logger.error("%d question runs failed across the sweep", failed)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_collect(args: argparse.Namespace) -> int:
    run = _config(args)
    if run is None:
        return EXIT_OK
    _need(args, "dataset", "out")
    dataset = sample_records(load_qa_jsonl(args.dataset), args.sample, args.seed)
    teacher = build_backend(run)
    catalog = run.catalog()
    common = {"catalog": catalog, "parallelism": args.parallelism}
    if args.task == "know":
        records = collect_know(dataset, teacher, **common)
    elif args.task == "decom":
        records = collect_decom(dataset, teacher, **common)
    else:
        index = load_index(run)
        if index is None:
            raise ConfigError("collect rel needs [retriever] index in the config")
        k = args.k if args.k is not None else run.engine.k_passages
        records = collect_rel(dataset, index, teacher, k, max_words=run.engine.retrieval_length, **common)
    write_training_jsonl(records, args.out)
    print(f"wrote {len(records)} {args.task} records -> {args.out}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    params = OracleWorldParams(
        num_composites=args.num_composites, max_facts=args.max_facts, p_know=args.p_know,
        p_corpus=args.p_corpus, distractor_decay=args.distractor_decay,
        max_distractors=args.max_distractors, seed=args.seed,
    )
    world = build_oracle_world(params)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    world.corpus.to_jsonl(out / "corpus.jsonl")
    world.behavior.save(out / "behavior.json")
    write_qa_jsonl(world.dataset, out / "dataset.jsonl")
    build_index(world.corpus).save(out / "index.json")
    config = (
        "[engine]\nd_th = 3\nk_passages = 5\n\n"
        '[backend]\nkind = "scripted"\nbehavior = "behavior.json"\n\n'
        '[retriever]\nindex = "index.json"\n'
    )
    (out / "config.toml").write_text(config, encoding="utf-8")
    print(f"oracle world: {len(world.facts)} facts, {len(world.dataset)} questions -> {out}")
    return EXIT_OK


_COMMANDS = {
    "index": cmd_index,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "collect": cmd_collect,
    "oracle": cmd_oracle,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("raisf: error: a command is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError, InvalidParams, EmptyQuestion) as exc:
        print(f"raisf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"raisf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"raisf: backend failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except RaIsfError as exc:
        print(f"raisf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # last resort; still no traceback
        print(f"raisf: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
