"""Command line front end.

Exit codes: 0 ok, 1 runtime failure, 2 alignment, 3 parse, 4 usage.
"""
import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from rgrewards import __version__
from rgrewards.ScoreReport import ScoreReport
from rgrewards.annotation import export_dot, graph_stats, load_annotation_corpus
from rgrewards.failure import AlignmentFailure, Failure, UsageFailure
from rgrewards.metrics.factual import (
    CHEXPERT_OBSERVATIONS,
    chexbert_f1,
    corpus_entity_f1,
    entity_set_f1,
    load_entity_bags,
    load_label_csv,
    resolve_classes,
)
from rgrewards.metrics.nlg import NLG_METRICS, cider_d_scores, rouge_l_scores, bleu4, tokenize
from rgrewards.rewards import (
    RelationScope,
    RewardVariant,
    check_aligned,
    confused_labels,
    corpus_rg,
    label_breakdown,
)
from rgrewards.scst.training import (
    SEARCH_LIMIT,
    SCSTConfig,
    ToyTask,
    attainable_maximum,
    search_space,
    train_scst,
)

logger = logging.getLogger(__name__)

# env vars
LOG_LEVEL_ENV = "RGREWARDS_LOG_LEVEL"
JOBS_ENV = "RGREWARDS_JOBS"

# env var defaults
os.environ[LOG_LEVEL_ENV] = os.environ.get(LOG_LEVEL_ENV, "WARNING")
os.environ[JOBS_ENV] = os.environ.get(JOBS_ENV, "1")

DEFAULT_CURVE = "scst_curve.csv"

T = TypeVar("T")


class ArgumentParser(argparse.ArgumentParser):
    """Parser that reports bad arguments as a usage failure."""

    def error(self, message):
        raise UsageFailure.from_message(
            "{{ prog }}: {{ message }}", prog=self.prog, message=message
        )


def existing_file(value: str) -> Path:
    path = Path(value)
    if not path.is_file():
        raise argparse.ArgumentTypeError("no such file: {}".format(value))
    return path


def comma_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def env_jobs() -> int:
    value = os.environ[JOBS_ENV]
    try:
        return int(value)
    except ValueError:
        raise UsageFailure.from_message(
            "{{ env }} should be a number of worker processes, got `{{ value }}`.",
            env=JOBS_ENV,
            value=value,
        )


def parse_variants(names: Sequence[str]) -> List[RewardVariant]:
    variants = []
    for name in dict.fromkeys(n.lower() for n in names):
        try:
            variants.append(RewardVariant(name))
        except ValueError:
            raise UsageFailure.from_message(
                "Unknown reward variant `{{ name }}`; choose from {{ known }}.",
                name=name,
                known=", ".join(v.value for v in RewardVariant),
            )
    return variants


def align_by_id(
    hyps: Sequence[T], refs: Sequence[T], get_id: Callable[[T], str]
) -> Tuple[List[T], List[T]]:
    """Pair every hypothesis with the reference of the same report id.

    References without a hypothesis are ignored with a warning.
    """
    def index(items, side):
        by_id = {}
        for item in items:
            report_id = get_id(item)
            if report_id in by_id:
                raise AlignmentFailure.from_message(
                    "Report id `{{ report_id }}` appears twice in the {{ side }}.",
                    report_id=report_id,
                    side=side,
                )
            by_id[report_id] = item
        return by_id

    hyp_by_id = index(hyps, "hypotheses")
    ref_by_id = index(refs, "references")

    missing = [report_id for report_id in hyp_by_id if report_id not in ref_by_id]
    if missing:
        raise AlignmentFailure.from_message(
            "No reference for the hypothesis ids {{ ids }}.", ids=", ".join(missing)
        )
    extra = [report_id for report_id in ref_by_id if report_id not in hyp_by_id]
    if extra:
        logger.warning(
            "Ignoring %d references without a hypothesis: %s",
            len(extra),
            ", ".join(extra),
        )
    if not hyp_by_id:
        raise UsageFailure.from_message("Cannot score an empty corpus.")

    logger.info("Aligned %d reports by id", len(hyp_by_id))
    return list(hyp_by_id.values()), [ref_by_id[i] for i in hyp_by_id]


def emit(report: ScoreReport, out: Optional[Path]) -> int:
    if out is None:
        sys.stdout.write(report.to_json() + "\n")
    else:
        report.write(out)
        logger.info("Wrote %s", out)
    return 0


def _inputs(args) -> dict:
    return {"hyp": str(args.hyp), "ref": str(args.ref)}


def cmd_score_rg(args) -> int:
    variants = parse_variants(args.variants)
    hyps, refs = align_by_id(
        load_annotation_corpus(args.hyp),
        load_annotation_corpus(args.ref),
        lambda graph: graph.report_id,
    )

    report = ScoreReport(
        "score-rg",
        inputs=_inputs(args),
        config={
            "variants": [v.value for v in variants],
            "relation_scope": args.relation_scope,
            "per_example": args.per_example,
            "by_label": args.by_label,
        },
    )
    results = {}
    for variant in variants:
        results[variant] = corpus_rg(
            hyps,
            refs,
            variant,
            per_example=args.per_example,
            relation_scope=args.relation_scope,
            jobs=args.jobs,
        )
        report.add_metric("rg_" + variant.value, results[variant].to_dict())

    if args.by_label:
        report.add_metric(
            "by_label",
            {label: prf.to_dict() for label, prf in label_breakdown(hyps, refs).items()},
        )
        report.add_metric("confused_labels", confused_labels(hyps, refs))

    if args.per_example:
        for i, hyp in enumerate(hyps):
            row = {"id": hyp.report_id}
            for variant, result in results.items():
                prf = result.items[i]
                row.update(
                    {
                        "rg_{}_precision".format(variant.value): prf.precision,
                        "rg_{}_recall".format(variant.value): prf.recall,
                        "rg_{}_f1".format(variant.value): prf.f1,
                    }
                )
            report.add_example(row)

    return emit(report, args.out)


def _read_lines(path: Path) -> List[str]:
    return path.read_text(encoding="utf-8").splitlines()


def cmd_score_nlg(args) -> int:
    unknown = [m for m in args.metrics if m not in NLG_METRICS]
    if unknown:
        raise UsageFailure.from_message(
            "Unknown metrics {{ names }}; choose from {{ known }}.",
            names=", ".join(unknown),
            known=", ".join(NLG_METRICS),
        )
    metrics = list(dict.fromkeys(args.metrics))

    hyps = [tokenize(line) for line in _read_lines(args.hyp)]
    refs = [tokenize(line) for line in _read_lines(args.ref)]
    check_aligned(hyps, refs)
    logger.info("Scoring %d lines with %s", len(hyps), ", ".join(metrics))

    report = ScoreReport(
        "score-nlg",
        inputs=_inputs(args),
        config={"metrics": metrics, "per_example": args.per_example},
    )
    for name in metrics:
        report.add_metric(name, {"score": NLG_METRICS[name](hyps, refs)})

    if args.per_example:
        per_example = {
            "bleu4": lambda: [bleu4([h], [r]) for h, r in zip(hyps, refs)],
            "rougel": lambda: rouge_l_scores(hyps, refs).tolist(),
            "ciderd": lambda: cider_d_scores(hyps, refs).tolist(),
        }
        columns = {name: per_example[name]() for name in metrics}
        for i in range(len(hyps)):
            report.add_example(
                {"line": i + 1, **{name: columns[name][i] for name in metrics}}
            )

    return emit(report, args.out)


def cmd_chexbert_f1(args) -> int:
    if args.all_classes:
        classes = CHEXPERT_OBSERVATIONS
    else:
        classes = resolve_classes(args.classes)
    uncertain_as_positive = args.uncertain == "positive"

    hyps, refs = align_by_id(
        load_label_csv(args.hyp), load_label_csv(args.ref), lambda v: v.report_id
    )
    result = chexbert_f1(hyps, refs, classes, uncertain_as_positive)

    report = ScoreReport(
        "chexbert-f1",
        inputs=_inputs(args),
        config={
            "classes": list(classes),
            "uncertain": args.uncertain,
            "per_example": args.per_example,
        },
    )
    report.add_metric("chexbert_f1", result.to_dict())

    if args.per_example:
        for hyp, ref in zip(hyps, refs):
            single = chexbert_f1([hyp], [ref], classes, uncertain_as_positive)
            report.add_example({"id": hyp.report_id, **single.micro.to_dict()})

    return emit(report, args.out)


def cmd_entity_f1(args) -> int:
    hyps, refs = align_by_id(
        load_entity_bags(args.hyp), load_entity_bags(args.ref), lambda b: b.report_id
    )
    result = corpus_entity_f1(hyps, refs)

    report = ScoreReport(
        "entity-f1", inputs=_inputs(args), config={"per_example": args.per_example}
    )
    report.add_metric("entity_f1", result.to_dict())

    if args.per_example:
        for hyp, ref in zip(hyps, refs):
            report.add_example({"id": hyp.report_id, **entity_set_f1(hyp, ref).to_dict()})

    return emit(report, args.out)


def cmd_scst_demo(args) -> int:
    config = SCSTConfig.from_json(args.config) if args.config else SCSTConfig()
    overrides = {
        key: value
        for key, value in [("seed", args.seed), ("iterations", args.iterations)]
        if value is not None
    }
    try:
        config = dataclasses.replace(config, **overrides)
    except ValueError as e:
        raise UsageFailure.from_message("Invalid scst-demo option: {{ error }}.", error=str(e))

    task = ToyTask.from_json(config.task)
    if config.max_len:
        task = dataclasses.replace(task, max_len=config.max_len)

    curve = train_scst(config, task=task)
    out = args.out or config.output or DEFAULT_CURVE
    curve.write_csv(out)

    final = curve.final
    print("learning curve: {}".format(out))
    print("final greedy decode: {}".format(" ".join(curve.final_greedy.tokens) or "<empty>"))
    print(
        "final greedy reward: {:.4f} (rg {:.4f}, rouge-l {:.4f}, log-likelihood {:.4f})".format(
            final.greedy_reward, final.rg_term, final.rouge_term, final.nll_term
        )
    )
    candidates = search_space(task)
    if candidates > SEARCH_LIMIT:
        logger.info("Skipping the exhaustive search over %d bodies", candidates)
        print("attainable maximum: not searched ({} candidate bodies)".format(candidates))
    else:
        maximum, best_tokens = attainable_maximum(task, config.reward)
        print(
            "attainable maximum: {:.4f} ({})".format(
                maximum, " ".join(best_tokens) or "<empty>"
            )
        )
    return 0


def cmd_export_dot(args) -> int:
    graphs = load_annotation_corpus(args.annotations)
    if args.id is not None:
        graphs = [g for g in graphs if g.report_id == args.id]
        if not graphs:
            raise UsageFailure.from_message(
                "No report `{{ report_id }}` in `{{ path }}`.",
                report_id=args.id,
                path=str(args.annotations),
            )
    dot = "".join(export_dot(g) for g in graphs)
    if args.out is None:
        sys.stdout.write(dot)
    else:
        Path(args.out).write_text(dot, encoding="utf-8")
    return 0


def cmd_stats(args) -> int:
    corpus = [g for path in args.annotations for g in load_annotation_corpus(path)]
    stats = graph_stats(corpus)
    text = json.dumps({"reports": len(corpus), **stats}, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _add_pair_arguments(parser: argparse.ArgumentParser, per_example: bool = True):
    parser.add_argument("--hyp", type=existing_file, required=True)
    parser.add_argument("--ref", type=existing_file, required=True)
    parser.add_argument("--out", type=Path, help="report path (default: stdout)")
    if per_example:
        parser.add_argument(
            "--per-example", action="store_true", help="add one row per report"
        )


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="rgrewards",
        description="Entity and relation graph rewards for radiology reports.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    score_rg = subparsers.add_parser("score-rg", help="RG_E, RG_ER and RG_ER-bar")
    _add_pair_arguments(score_rg)
    score_rg.add_argument(
        "--variants", type=comma_list, default=["e", "er", "er_bar"]
    )
    score_rg.add_argument(
        "--relation-scope",
        choices=[s.value for s in RelationScope],
        default=RelationScope.OUTGOING.value,
    )
    score_rg.add_argument(
        "--by-label",
        action="store_true",
        help="add per-label scores and label confusions",
    )
    score_rg.add_argument(
        "--jobs", type=int, default=env_jobs(), help="worker processes"
    )
    score_rg.set_defaults(func=cmd_score_rg)

    score_nlg = subparsers.add_parser("score-nlg", help="BLEU-4, ROUGE-L, CIDEr-D")
    _add_pair_arguments(score_nlg)
    score_nlg.add_argument(
        "--metrics", type=comma_list, default=["bleu4", "rougel", "ciderd"]
    )
    score_nlg.set_defaults(func=cmd_score_nlg)

    chexbert = subparsers.add_parser("chexbert-f1", help="F1 over observation labels")
    _add_pair_arguments(chexbert)
    classes = chexbert.add_mutually_exclusive_group()
    classes.add_argument("--classes", type=comma_list, default=None)
    classes.add_argument("--all-classes", action="store_true")
    chexbert.add_argument(
        "--uncertain",
        choices=["negative", "positive"],
        default="negative",
        help="how uncertain labels count",
    )
    chexbert.set_defaults(func=cmd_chexbert_f1)

    entity = subparsers.add_parser("entity-f1", help="F1 over entity sets")
    _add_pair_arguments(entity)
    entity.set_defaults(func=cmd_entity_f1)

    scst = subparsers.add_parser("scst-demo", help="train the toy policy with SCST")
    scst.add_argument("--config", type=existing_file)
    scst.add_argument("--seed", type=int)
    scst.add_argument("--iterations", type=int)
    scst.add_argument("--out", type=Path, help="learning curve CSV")
    scst.set_defaults(func=cmd_scst_demo)

    dot = subparsers.add_parser("export-dot", help="render annotations as DOT")
    dot.add_argument("annotations", type=existing_file)
    dot.add_argument("--id", help="only this report")
    dot.add_argument("--out", type=Path)
    dot.set_defaults(func=cmd_export_dot)

    stats = subparsers.add_parser("stats", help="count entities and relations")
    stats.add_argument("annotations", type=existing_file, nargs="+")
    stats.add_argument("--out", type=Path)
    stats.set_defaults(func=cmd_stats)

    return parser


def configure_logging(verbose: int = 0):
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        name = os.environ[LOG_LEVEL_ENV].upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            raise UsageFailure.from_message(
                "{{ env }} should be a logging level, got `{{ name }}`.",
                env=LOG_LEVEL_ENV,
                name=name,
            )
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose)
        return args.func(args)
    except Failure as failure:
        sys.stderr.write("error: {}\n".format(failure))
        return failure.exit_code


if __name__ == "__main__":
    sys.exit(main())
