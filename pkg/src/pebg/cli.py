"""``pebg`` command-line entry point."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import FORMAT_VERSIONS, __version__
from .config import build, default_config_path, field_names, read_config, stage_values
from .errors import ConfigError, PebgError

log = logging.getLogger("pebg")

EXIT_USAGE = 2
EXIT_IO = 8


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded numerics for bit-reproducible runs")
    p.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    return p


def _split_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-fraction", type=float, default=None,
                   help="train on this share of students (split by student)")
    p.add_argument("--split-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="pebg", description=__doc__)
    parser.add_argument("--version", action="version", version=(
        f"pebg {__version__} (formats: " + ", ".join(f"{k} v{v}" for k, v in FORMAT_VERSIONS.items()) + ")"))
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", parents=[common], help="parse an interaction CSV into a dataset file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--min-seq-len", type=int, default=3)
    p.add_argument("--filter-column", metavar="COL=VALUE", default=None,
                   help="keep only rows whose COL equals VALUE")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--skills", type=int, default=4)
    p.add_argument("--questions-per-skill", type=int, default=5)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--clusters", type=int, default=1)
    p.add_argument("--students", type=int, default=50)
    p.add_argument("--records-per-student", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="dataset file")
    p.add_argument("--csv", default=None, help="also write the raw CSV here")
    p.add_argument("--truth", default=None, help="write planted easiness/adjacency (.npz)")

    p = sub.add_parser("pretrain", parents=[common], help="pre-train question embeddings")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--output", required=True, help="embedding table (text)")
    p.add_argument("--ablation", default=None, help="comma list of RER,RIS,RPL,RPF")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--loss-curve", default=None, help="CSV epoch,L1,L2,L3,L4,total")
    p.add_argument("--figure", default=None, help="PNG of the loss curves")
    p.add_argument("--params-out", default=None, help="save all trained tensors (.npz)")
    p.add_argument("--graph-dump", default=None, help="write edges as 'q s' lines")
    _split_args(p)

    p = sub.add_parser("train-kt", parents=[common], help="train a recurrent KT model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", required=True,
                   choices=["pretrained_finetune", "pretrained_frozen", "raw_question", "raw_skill"])
    p.add_argument("--embeddings", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--model-out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", default=None, help="per-epoch CSV")
    p.add_argument("--test-out", default=None, help="write the held-out split as a dataset file")
    _split_args(p)

    p = sub.add_parser("eval", parents=[common], help="AUC of a trained model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--max-seq-len", type=int, default=200)
    p.add_argument("--roc-figure", default=None)

    p = sub.add_parser("experiment", parents=[common], help="repeated end-to-end runs")
    p.add_argument("--spec", required=True)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--save-embeddings", action="store_true",
                   help="keep each pre-trained embedding table in the arm's directory")

    p = sub.add_parser("export-embeddings", parents=[common],
                       help="write vectors.tsv/metadata.tsv for projection tools")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    return parser


def _stage_config(cls, stage: str, path: str | None, overrides: dict):
    path = path or default_config_path()
    values = {}
    if path:
        values = stage_values(read_config(path), stage, field_names(cls))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build(cls, values)


def _dataset(args, path):
    from .evaluation import load_any

    return load_any(path)


def _maybe_split(args, dataset):
    from .data import split

    if args.train_fraction is None or args.train_fraction >= 1.0:
        return dataset, None
    return split(dataset, args.train_fraction, args.split_seed)


def cmd_ingest(args) -> None:
    from .data import IngestOptions, ingest, save_dataset

    ds = ingest(args.input, IngestOptions.from_filter_spec(args.filter_column, args.min_seq_len))
    save_dataset(ds, args.output)
    r = ds.ingest_report
    print(f"students={len(ds.students)} questions={ds.num_questions} skills={ds.num_skills} "
          f"records={ds.num_records} dropped_no_skill={r.dropped_no_skill} "
          f"dropped_by_filter={r.dropped_by_filter} dropped_short={r.dropped_short_students}",
          file=sys.stderr)


def cmd_synth(args) -> None:
    from .data import save_dataset
    from .synthetic import SyntheticSpec, generate_rows, generate_synthetic, write_csv

    spec = SyntheticSpec(num_skills=args.skills, questions_per_skill=args.questions_per_skill,
                         skill_overlap=args.overlap, clusters=args.clusters, num_students=args.students,
                         records_per_student=args.records_per_student)
    try:
        ds, truth = generate_synthetic(spec, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    save_dataset(ds, args.output)
    if args.csv:
        write_csv(generate_rows(spec, args.seed)[0], args.csv)
    if args.truth:
        np.savez(args.truth, adjacency=truth.adjacency, easiness=truth.easiness,
                 question_ids=np.array(ds.question_ids), skill_ids=np.array(ds.skill_ids))


def cmd_pretrain(args) -> None:
    from .core import PretrainConfig, prepare, pretrain, save_parameters, write_loss_curve

    cfg = _stage_config(PretrainConfig, "pretrain", args.config,
                        {"ablation": args.ablation, "epochs": args.epochs, "seed": args.seed})
    ds = _dataset(args, args.dataset)
    train, _ = _maybe_split(args, ds)
    data = prepare(ds, train, cfg.attributes)
    if args.graph_dump:
        data.graph.write_edges(args.graph_dump)
    result = pretrain(data, cfg, ds.question_ids)
    result.table.save(args.output)
    if args.loss_curve:
        write_loss_curve(result.history, args.loss_curve)
    if args.figure:
        from .plotting import plot_pretrain_losses

        plot_pretrain_losses(result.history, args.figure)
    if args.params_out:
        save_parameters(result.params, args.params_out)


def cmd_train_kt(args) -> None:
    from .core import QuestionEmbeddingTable
    from .data import save_dataset
    from .kt import KtConfig, evaluate, init_model, save_model, train_kt

    cfg = _stage_config(KtConfig, "kt", args.config, {"epochs": args.epochs, "seed": args.seed})
    ds = _dataset(args, args.dataset)
    train, test = _maybe_split(args, ds)
    embeddings = None
    if args.mode.startswith("pretrained"):
        if not args.embeddings:
            raise ConfigError(f"--embeddings is required for mode {args.mode}")
        embeddings = QuestionEmbeddingTable.load(args.embeddings).aligned(ds.question_ids)
    items = ds.skill_ids if args.mode == "raw_skill" else ds.question_ids
    model = init_model(args.mode, items, cfg, embeddings)
    model, trainlog = train_kt(model, train, cfg)
    save_model(model, args.model_out)
    if args.log:
        trainlog.write_csv(args.log)
    if test is not None:
        if args.test_out:
            save_dataset(test, args.test_out)
        print(f"test_auc={evaluate(model, test, cfg.max_seq_len):.6f}")


def cmd_eval(args) -> None:
    from .kt import load_model, predict_dataset
    from .metrics import auc

    model = load_model(args.model)
    ds = _dataset(args, args.dataset)
    probs, labels = predict_dataset(model, ds, args.max_seq_len)
    print(f"auc={auc(probs, labels):.6f} predictions={len(labels)}")
    if args.roc_figure:
        from .plotting import plot_roc

        plot_roc(probs, labels, args.roc_figure)


def cmd_experiment(args) -> None:
    from .evaluation import ExperimentSpec, run_experiment

    spec = ExperimentSpec.from_file(args.spec)
    reports = run_experiment(spec, args.repeats, args.out, save_embeddings=args.save_embeddings)
    for arm, rep in reports.items():
        print(f"{arm}: mean_auc={rep.mean_auc:.4f} runs={len(rep.runs)}")


def cmd_export(args) -> None:
    from .core import QuestionEmbeddingTable

    table = QuestionEmbeddingTable.load(args.embeddings)
    ds = _dataset(args, args.dataset)
    rows = table.aligned(ds.question_ids)
    skills = ds.question_skills()
    os.makedirs(args.out_dir, exist_ok=True)
    np.savetxt(os.path.join(args.out_dir, "vectors.tsv"), rows, delimiter="\t", fmt="%.10g")
    with open(os.path.join(args.out_dir, "metadata.tsv"), "w", encoding="utf-8") as fh:
        fh.write("question_id\tfirst_skill\tskills\n")
        for qid, sk in zip(ds.question_ids, skills):
            names = [ds.skill_ids[s] for s in sk]
            fh.write(f"{qid}\t{names[0] if names else ''}\t{';'.join(names)}\n")


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "train-kt": cmd_train_kt,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "export-embeddings": cmd_export,
}


def _thread_limit(args):
    threads = args.threads
    if threads is None and args.deterministic:
        threads = 1
    if threads is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        with _thread_limit(args):
            COMMANDS[args.command](args)
    except PebgError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
