"""
Command-line entry point

Every subcommand writes its report to standard output (canonical JSON, or an
aligned table with ``--table``), logs to standard error and finishes with a
run manifest. Exit status is 0 on success, 1 on a validation error and 2 on
an internal error.
"""

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, NoReturn, Optional

from .augment import FUSE_MODES
from .config import RunConfig, data_path, default_jobs
from .dynoframe import Dynoframe
from .error import INTERNAL_ERROR, VALIDATION_ERROR, DynoframeError
from .metrics.report import EvalReport
from .metrics.situation import ANY_ROLE, PER_ROLE, SCENARIOS
from .services.augment import BOTH
from .services.parser import KINDS
from .structparse import PARSE_MODES, STRICT
from .workspace import canonical_json, write_text

logger = logging.getLogger(__name__)

DEMO_WORLD = data_path("demo_world.json")

VALUE_MODES = {"any": ANY_ROLE, "per-role": PER_ROLE, ANY_ROLE: ANY_ROLE, PER_ROLE: PER_ROLE}

# Argument names holding files that must exist / files that will be written.
INPUT_ARGS = (
    "lexicon",
    "input",
    "predictions",
    "ground_truth",
    "catalog",
    "embeddings",
    "world",
    "spec",
    "model",
    "base",
    "csv",
)
OUTPUT_ARGS = ("output", "output_prefix", "csv_out", "scatter", "manifest")

Handler = Callable[[Dynoframe, argparse.Namespace], int]


class DynoframeArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the validation status and a machine-readable code."""

    def error(self, message: str) -> NoReturn:
        sys.stderr.write("error_code=USAGE\n")
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(VALIDATION_ERROR)


def _emit_report(dyno: Dynoframe, report: EvalReport, args: argparse.Namespace) -> None:
    csv_out = getattr(args, "csv_out", None)
    if csv_out:
        write_text(csv_out, report.to_csv())
    dyno.workspace.emit(report.to_table() if args.table else report.to_canonical_json())


def cmd_parse(dyno: Dynoframe, args: argparse.Namespace) -> int:
    result = dyno.parser.parse(
        {
            "input": args.input,
            "lexicon": args.lexicon,
            "mode": args.mode,
            "kind": args.kind,
            "output": args.output,
        }
    )
    summary = result["summary"]
    logger.info("parse summary: %s", json.dumps(summary, sort_keys=True))
    return VALIDATION_ERROR if summary.get("failed") else 0


def cmd_serialize(dyno: Dynoframe, args: argparse.Namespace) -> int:
    dyno.parser.serialize(
        {"input": args.input, "lexicon": args.lexicon, "kind": args.kind, "output": args.output}
    )
    return 0


def _situation_request(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "predictions": args.predictions,
        "ground_truth": args.ground_truth,
        "lexicon": args.lexicon,
        "scenario": args.scenario,
        "value_mode": VALUE_MODES[args.value_mode],
        "allow_missing": args.allow_missing,
    }


def cmd_eval_sir(dyno: Dynoframe, args: argparse.Namespace) -> int:
    _emit_report(dyno, dyno.situations.evaluate_sir(_situation_request(args)), args)
    return 0


def cmd_eval_gsr(dyno: Dynoframe, args: argparse.Namespace) -> int:
    _emit_report(dyno, dyno.situations.evaluate_gsr(_situation_request(args)), args)
    return 0


def cmd_eval_hoi(dyno: Dynoframe, args: argparse.Namespace) -> int:
    report = dyno.hoi.evaluate(
        {
            "predictions": args.predictions,
            "ground_truth": args.ground_truth,
            "catalog": args.catalog,
            "zero_gt_as_zero": args.zero_gt_as_zero,
        }
    )
    _emit_report(dyno, report, args)
    return 0


def cmd_eval_hhi(dyno: Dynoframe, args: argparse.Namespace) -> int:
    report = dyno.hhi.evaluate(
        {
            "predictions": args.predictions,
            "ground_truth": args.ground_truth,
            "scorer": args.scorer,
            "lexicon": args.lexicon,
            "embeddings": args.embeddings,
            "allow_missing": args.allow_missing,
        }
    )
    _emit_report(dyno, report, args)
    return 0


def cmd_probe(dyno: Dynoframe, args: argparse.Namespace) -> int:
    report = dyno.probes.fit(
        {
            "input": args.input,
            "split": args.split,
            "seed": args.seed,
            "epochs": args.epochs,
            "learning_rate": args.learning_rate,
            "l2": args.l2,
            "batch_size": args.batch_size,
            "scatter": args.scatter,
            "representation": args.representation,
            "task_metric": args.task_metric,
        }
    )
    _emit_report(dyno, report, args)
    return 0


def cmd_correlate(dyno: Dynoframe, args: argparse.Namespace) -> int:
    _emit_report(dyno, dyno.probes.correlate({"csv": args.csv, "x": args.x, "y": args.y}), args)
    return 0


def cmd_demo_train(dyno: Dynoframe, args: argparse.Namespace) -> int:
    report = dyno.decoders.train(
        {
            "world": args.world,
            "output": args.output,
            "seed": args.seed,
            "n": args.n,
            "epochs": args.epochs,
            "lora_rank": args.lora_rank,
            "base": args.base,
            "learning_rate": args.learning_rate,
            "hidden_size": args.hidden_size,
            "batch_size": args.batch_size,
            "finetune_epochs": args.finetune_epochs,
        }
    )
    _emit_report(dyno, report, args)
    return 0


def cmd_demo_generate(dyno: Dynoframe, args: argparse.Namespace) -> int:
    dyno.decoders.generate(
        {
            "model": args.model,
            "embeddings": args.embeddings,
            "lexicon": args.lexicon,
            "top_k": args.top_k,
            "max_len": args.max_len,
            "output": args.output,
        }
    )
    return 0


def cmd_augment_check(dyno: Dynoframe, args: argparse.Namespace) -> int:
    report = dyno.augment.check(
        {
            "mode": args.mode,
            "kb": args.kb,
            "kv": args.kv,
            "n": args.n,
            "heads": args.heads,
            "trials": args.trials,
            "seed": args.seed,
            "large_k": args.large_k,
        }
    )
    _emit_report(dyno, report, args)
    if not report.details["passed"]:
        logger.error("augmentation invariant suite failed")
        return INTERNAL_ERROR
    return 0


def cmd_gen_world(dyno: Dynoframe, args: argparse.Namespace) -> int:
    request = {
        "spec": args.spec,
        "output_prefix": args.output_prefix,
        "n": args.n,
        "start": args.start,
        "seed": args.seed,
        "noise": args.noise,
        "dim": args.dim,
        "empty_prob": args.empty_prob,
        "jitter": args.jitter,
        "flip_prob": args.flip_prob,
        "distractors": args.distractors,
        "miss_prob": args.miss_prob,
    }
    dyno.workspace.emit(canonical_json(dyno.worlds.generate(request)))
    return 0


def cmd_pipeline(dyno: Dynoframe, args: argparse.Namespace) -> int:
    report = dyno.run_pipeline(
        {
            "world": args.world,
            "seed": args.seed,
            "noise": args.noise,
            "n_train": args.n_train,
            "n_eval": args.n_eval,
            "epochs": args.epochs,
            "hidden_size": args.hidden_size,
            "learning_rate": args.learning_rate,
            "value_mode": VALUE_MODES[args.value_mode],
            "top_k": args.top_k,
            "max_len": args.max_len,
            "workdir": args.workdir,
        }
    )
    _emit_report(dyno, report, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--jobs", type=int, default=None, help="Worker processes (default: $DYNOFRAME_JOBS or 1)"
    )
    common.add_argument(
        "--manifest", default=None, help="Write the run manifest here instead of standard error"
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging"
    )

    report = argparse.ArgumentParser(add_help=False)
    report.add_argument("--table", action="store_true", help="Print an aligned text table")
    report.add_argument("--csv", dest="csv_out", default=None, help="Write per-item CSV rows here")

    table_only = argparse.ArgumentParser(add_help=False)
    table_only.add_argument("--table", action="store_true", help="Print an aligned text table")

    parser = DynoframeArgumentParser(
        prog="dynoframe",
        description="Structured-text situation frames, scene metrics and toy decoders",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)

    def add(
        name: str, handler: Handler, help_text: str, *parents: argparse.ArgumentParser
    ) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(
            name,
            help=help_text,
            parents=[common, *parents],
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        sub.set_defaults(handler=handler)
        return sub

    sub = add("parse", cmd_parse, "Parse structured strings into frames")
    sub.add_argument("--in", dest="input", default="-", help="Input lines ('-' for stdin)")
    sub.add_argument("--lexicon", help="Lexicon JSON (frames)")
    sub.add_argument("--mode", choices=PARSE_MODES, default=STRICT)
    sub.add_argument("--kind", choices=KINDS, default="frame")
    sub.add_argument("--out", dest="output", help="Write JSONL records here")

    sub = add("serialize", cmd_serialize, "Render frame records as structured strings")
    sub.add_argument("--in", dest="input", required=True, help="Frame records (JSONL)")
    sub.add_argument("--lexicon", help="Lexicon JSON (frames)")
    sub.add_argument("--kind", choices=KINDS, default="frame")
    sub.add_argument("--out", dest="output", help="Write lines here")

    for name, handler, help_text in (
        ("eval-sir", cmd_eval_sir, "Situation recognition metrics"),
        ("eval-gsr", cmd_eval_gsr, "Grounded situation recognition metrics"),
    ):
        sub = add(name, handler, help_text, report)
        sub.add_argument("--pred", dest="predictions", required=True)
        sub.add_argument("--gt", dest="ground_truth", required=True)
        sub.add_argument("--lexicon", required=True)
        sub.add_argument("--scenario", choices=SCENARIOS, default=SCENARIOS[0])
        sub.add_argument("--value-mode", choices=sorted(VALUE_MODES), default="per-role")
        sub.add_argument("--allow-missing", action="store_true", help="Score missing items as 0")

    sub = add("eval-hoi", cmd_eval_hoi, "HOI detection mAP (full, rare, non-rare)", report)
    sub.add_argument("--pred", dest="predictions", required=True)
    sub.add_argument("--gt", dest="ground_truth", required=True)
    sub.add_argument("--catalog", required=True)
    sub.add_argument(
        "--zero-gt-as-zero", action="store_true", help="Count classes without ground truth as AP 0"
    )

    sub = add("eval-hhi", cmd_eval_hhi, "Human-human interaction text metrics", report)
    sub.add_argument("--pred", dest="predictions", required=True)
    sub.add_argument("--gt", dest="ground_truth", required=True)
    sub.add_argument("--scorer", default="exact", help="exact, f1, verbsim or exec:<path>")
    sub.add_argument("--lexicon", help="Lexicon JSON (verbsim)")
    sub.add_argument("--embeddings", help="Verb embedding table (verbsim)")
    sub.add_argument("--allow-missing", action="store_true")

    sub = add("probe", cmd_probe, "Linear probe on frozen embeddings", report)
    sub.add_argument("--in", dest="input", required=True, help="Embedding records (JSONL)")
    sub.add_argument("--split", default="70/10/20")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--learning-rate", type=float)
    sub.add_argument("--l2", type=float)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--scatter", help="Append a row to this scatter CSV")
    sub.add_argument("--representation", help="Row label (default: input file name)")
    sub.add_argument("--task-metric", type=float, help="Downstream metric for the scatter row")

    sub = add("correlate", cmd_correlate, "Pearson and Spearman over a scatter CSV", table_only)
    sub.add_argument("--csv", required=True, help="Scatter CSV")
    sub.add_argument("--x", default="probe_acc")
    sub.add_argument("--y", default="task_metric")

    sub = add("demo-train", cmd_demo_train, "Train the toy structured-text decoder", report)
    sub.add_argument("--world", default=DEMO_WORLD)
    sub.add_argument("--out", dest="output", required=True, help="Model file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--n", type=int, default=1000, help="Training items")
    sub.add_argument("--epochs", type=int, default=30)
    sub.add_argument("--lora-rank", type=int, default=0)
    sub.add_argument("--base", help="Fine-tune adapters on this saved model")
    sub.add_argument("--learning-rate", type=float)
    sub.add_argument("--hidden-size", type=int)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--finetune-epochs", type=int)

    sub = add("demo-generate", cmd_demo_generate, "Generate structured strings")
    sub.add_argument("--model", required=True)
    sub.add_argument("--embeddings", required=True, help="Embedding records (JSONL)")
    sub.add_argument("--lexicon", help="Lexicon JSON (default: stored with the model)")
    sub.add_argument("--top-k", type=int, default=1)
    sub.add_argument("--max-len", type=int, default=64)
    sub.add_argument("--out", dest="output", help="Write JSONL records here")

    sub = add("augment-check", cmd_augment_check, "Attention augmentation invariants", report)
    sub.add_argument("--mode", choices=FUSE_MODES + (BOTH,), default=BOTH)
    sub.add_argument("--kb", type=int, help="Backbone tokens (default 49)")
    sub.add_argument("--kv", type=int, help="Vision-language tokens (default 32)")
    sub.add_argument("--n", type=int, help="Feature width (default 256)")
    sub.add_argument("--heads", type=int, help="Attention heads (default 4)")
    sub.add_argument("--trials", type=int, help="Random trials per check (default 100)")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--large-k", type=int, help="Token count of the large-block check")

    sub = add("gen-world", cmd_gen_world, "Write a synthetic world's fixtures")
    sub.add_argument("--spec", default=DEMO_WORLD)
    sub.add_argument("--out-prefix", dest="output_prefix", required=True)
    sub.add_argument("--n", type=int, default=1000)
    sub.add_argument("--start", type=int, default=0)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--noise", type=float)
    sub.add_argument("--dim", type=int)
    sub.add_argument("--empty-prob", type=float)
    sub.add_argument("--jitter", type=float)
    sub.add_argument("--flip-prob", type=float)
    sub.add_argument("--distractors", type=int)
    sub.add_argument("--miss-prob", type=float)

    sub = add("pipeline", cmd_pipeline, "World, training, generation, parsing and SiR", report)
    sub.add_argument("--world", default=DEMO_WORLD)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--noise", type=float)
    sub.add_argument("--n-train", type=int, default=1000)
    sub.add_argument("--n-eval", type=int, default=200)
    sub.add_argument("--epochs", type=int, default=30)
    sub.add_argument("--hidden-size", type=int)
    sub.add_argument("--learning-rate", type=float)
    sub.add_argument("--value-mode", choices=sorted(VALUE_MODES), default="per-role")
    sub.add_argument("--top-k", type=int, default=5)
    sub.add_argument("--max-len", type=int, default=64)
    sub.add_argument("--workdir", help="Keep the model, generations and ground truth here")

    return parser


def run_config(args: argparse.Namespace, jobs: int) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k != "handler"}
    inputs = {k: values[k] for k in INPUT_ARGS if values.get(k) and values[k] != "-"}
    outputs = {k: values[k] for k in OUTPUT_ARGS if values.get(k)}
    flags = {k: v for k, v in values.items() if k not in inputs and k not in outputs}
    return RunConfig(
        subcommand=args.command,
        inputs=inputs,
        outputs=outputs,
        flags=flags,
        seed=values.get("seed"),
        verbosity=args.verbose,
        jobs=jobs,
    )


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger("dynoframe").setLevel(level)


def write_manifest(dyno: Dynoframe, run: RunConfig, exit_code: int) -> None:
    arguments = {**run.inputs, **run.outputs, **run.flags}
    manifest = dyno.manifest(run.subcommand, arguments, run.seed)
    manifest["exit_code"] = exit_code
    path = run.outputs.get("manifest")
    if path:
        write_text(path, canonical_json(manifest))
    else:
        sys.stderr.write(json.dumps(manifest, sort_keys=True) + "\n")


def _fail(code: Optional[str], message: str) -> None:
    sys.stderr.write(f"error_code={code or 'ERROR'}\n{message}\n")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name (defaults to ``sys.argv[1:]``)

    Returns:
        Exit status
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else VALIDATION_ERROR

    configure_logging(args.verbose)
    dyno = None
    run = None
    exit_code = INTERNAL_ERROR
    try:
        jobs = args.jobs if args.jobs is not None else default_jobs()
        run = run_config(args, jobs)
        run.validate_paths()
        logger.info("dynoframe %s (seed=%s, jobs=%d)", run.subcommand, run.seed, jobs)
        dyno = Dynoframe(jobs=jobs)
        exit_code = args.handler(dyno, args)
    except DynoframeError as e:
        _fail(e.code, e.message)
        exit_code = e.status or VALIDATION_ERROR
    except ValueError as e:
        _fail("INVALID_ARGUMENT", str(e))
        exit_code = VALIDATION_ERROR
    except Exception as e:
        logger.debug("internal error", exc_info=True)
        _fail("INTERNAL_ERROR", f"{type(e).__name__}: {e}")
        exit_code = INTERNAL_ERROR

    if dyno is not None and run is not None:
        try:
            write_manifest(dyno, run, exit_code)
        except Exception as e:
            _fail("MANIFEST_ERROR", str(e))
            exit_code = exit_code or INTERNAL_ERROR
    if dyno is not None:
        dyno.close()
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
