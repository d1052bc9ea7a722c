"""Experiment harness: ingest, pre-train, train KT, evaluate, repeated over seeds.

An experiment spec is a flat config file::

    dataset = assist09.csv        # raw CSV or dataset file, relative to the spec
    filter = original=1           # optional ingest row filter
    min_seq_len = 3
    train_fraction = 0.8
    seed = 0
    arms = pebg_dkt, dkt_q
    pretrain.epochs = 20
    kt.epochs = 10

Each arm names a KT input mode and, for pre-trained modes, the ablation applied
during pre-training.  Test AUC is pooled over every predicted test record.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field, replace

from . import __version__
from .config import build, field_names, fingerprint, read_config, stage_values
from .core import PretrainConfig, pretrain, prepare, write_loss_curve
from .data import IngestOptions, ingest, is_dataset_file, load_dataset, split
from .errors import ConfigError, PebgError
from .kt import KtConfig, evaluate, init_model, train_kt

log = logging.getLogger(__name__)

ARMS = {
    "pebg_dkt": ("pretrained_finetune", ()),
    "pebg_dkt_frozen": ("pretrained_frozen", ()),
    "rer_dkt": ("pretrained_finetune", ("RER",)),
    "ris_dkt": ("pretrained_finetune", ("RIS",)),
    "rpl_dkt": ("pretrained_finetune", ("RPL",)),
    "rpf_dkt": ("pretrained_finetune", ("RPF",)),
    "dkt_q": ("raw_question", None),
    "dkt": ("raw_skill", None),
}
TOP_LEVEL_KEYS = {"dataset", "filter", "min_seq_len", "train_fraction", "seed", "arms"}


class StageError(PebgError):
    exit_code = 9

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.exit_code = getattr(cause, "exit_code", 9)


@dataclass
class ExperimentSpec:
    dataset: str
    arms: tuple[str, ...] = ("pebg_dkt", "dkt_q")
    filter: str | None = None
    min_seq_len: int = 3
    train_fraction: float = 0.8
    seed: int = 0
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    kt: KtConfig = field(default_factory=KtConfig)

    def __post_init__(self):
        unknown = [a for a in self.arms if a not in ARMS]
        if unknown:
            raise ConfigError(f"unknown arm(s) {unknown}; choose from {sorted(ARMS)}")

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        raw = read_config(path)
        for key in raw:
            prefix = key.split(".", 1)[0]
            if "." not in key and key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"unknown experiment key {key!r}")
            if "." in key and prefix not in ("pretrain", "kt"):
                raise ConfigError(f"unknown section {prefix!r} in key {key!r}")
        if "dataset" not in raw:
            raise ConfigError("experiment spec needs a dataset key")
        dataset = raw["dataset"]
        if not os.path.isabs(dataset):
            dataset = os.path.join(os.path.dirname(os.path.abspath(path)), dataset)
        pre = {k: v for k, v in raw.items() if k.startswith("pretrain.")}
        kt = {k: v for k, v in raw.items() if k.startswith("kt.")}
        return cls(
            dataset=dataset,
            arms=tuple(a.strip() for a in raw.get("arms", "pebg_dkt,dkt_q").split(",") if a.strip()),
            filter=raw.get("filter") or None,
            min_seq_len=int(raw.get("min_seq_len", 3)),
            train_fraction=float(raw.get("train_fraction", 0.8)),
            seed=int(raw.get("seed", 0)),
            pretrain=build(PretrainConfig, stage_values(pre, "pretrain", field_names(PretrainConfig))),
            kt=build(KtConfig, stage_values(kt, "kt", field_names(KtConfig))),
        )

    def as_flat(self) -> dict:
        flat = {"dataset": os.path.basename(self.dataset), "arms": ",".join(self.arms),
                "filter": self.filter, "min_seq_len": self.min_seq_len,
                "train_fraction": self.train_fraction, "seed": self.seed}
        flat.update({f"pretrain.{k}": (",".join(sorted(v)) if isinstance(v, frozenset) else v)
                     for k, v in vars(self.pretrain).items()})
        flat.update({f"kt.{k}": v for k, v in vars(self.kt).items()})
        return flat


@dataclass
class RunResult:
    run: int
    seed: int
    auc: float
    wall_clock_s: float
    pretrain_history: list = field(default_factory=list)
    kt_log: list = field(default_factory=list)


@dataclass
class ExperimentReport:
    arm: str
    runs: list[RunResult]
    config_fingerprint: str
    pooling: str = "pooled"

    @property
    def mean_auc(self) -> float:
        return sum(r.auc for r in self.runs) / len(self.runs)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("run,seed,auc,wall_clock_s\n")
            for r in self.runs:
                fh.write(f"{r.run},{r.seed},{r.auc!r},{r.wall_clock_s:.3f}\n")


def load_any(path, options: IngestOptions | None = None):
    """A dataset file or a raw interaction CSV."""
    return load_dataset(path) if is_dataset_file(path) else ingest(path, options)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (PebgError, ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


def run_experiment(spec: ExperimentSpec, repeats: int, out_dir=None,
                   save_embeddings: bool = False) -> dict[str, ExperimentReport]:
    """Run every arm ``repeats`` times with seeds ``spec.seed + i``.

    Results are returned per arm and, when ``out_dir`` is given, written as
    CSV reports, loss curves and figures.  ``save_embeddings`` also keeps each
    pre-trained table as ``<arm>/run<i>_embeddings.txt``.
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    options = IngestOptions.from_filter_spec(spec.filter, spec.min_seq_len)
    dataset = _stage("ingest", load_any, spec.dataset, options)
    fp = fingerprint(spec.as_flat())
    runs: dict[str, list[RunResult]] = {arm: [] for arm in spec.arms}
    for i in range(repeats):
        seed = spec.seed + i
        train, test = _stage("split", split, dataset, spec.train_fraction, seed)
        data = None
        for arm in spec.arms:
            mode, ablation = ARMS[arm]
            start = time.perf_counter()
            history = []
            embeddings = None
            if ablation is not None:
                if data is None:
                    data = _stage("prepare", prepare, dataset, train, spec.pretrain.attributes)
                cfg = replace(spec.pretrain, seed=seed, ablation=frozenset(ablation))
                result = _stage("pretrain", pretrain, data, cfg, dataset.question_ids)
                embeddings, history = result.table.embeddings, result.history
                if save_embeddings and out_dir is not None:
                    os.makedirs(os.path.join(out_dir, arm), exist_ok=True)
                    result.table.save(os.path.join(out_dir, arm, f"run{i}_embeddings.txt"))
            kt_cfg = replace(spec.kt, seed=seed)
            item_ids = dataset.skill_ids if mode == "raw_skill" else dataset.question_ids
            model = _stage("train-kt", init_model, mode, item_ids, kt_cfg, embeddings)
            model, kt_log = _stage("train-kt", train_kt, model, train, kt_cfg)
            score = _stage("eval", evaluate, model, test, kt_cfg.max_seq_len)
            elapsed = time.perf_counter() - start
            log.info("run %d arm %s: test AUC %.4f (%.1fs)", i, arm, score, elapsed)
            runs[arm].append(RunResult(i, seed, score, elapsed, history, kt_log.rows))
    reports = {arm: ExperimentReport(arm, rs, fp) for arm, rs in runs.items()}
    if out_dir is not None:
        write_reports(reports, spec, out_dir)
    return reports


def write_reports(reports: dict[str, ExperimentReport], spec: ExperimentSpec, out_dir) -> None:
    from .plotting import plot_auc_by_arm, plot_kt_curves, plot_pretrain_losses

    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    for arm, report in reports.items():
        arm_dir = os.path.join(out_dir, arm)
        os.makedirs(arm_dir, exist_ok=True)
        report.write_csv(os.path.join(arm_dir, "report.csv"))
        for r in report.runs:
            if r.pretrain_history:
                write_loss_curve(r.pretrain_history, os.path.join(arm_dir, f"run{r.run}_pretrain_loss.csv"))
            with open(os.path.join(arm_dir, f"run{r.run}_kt_log.csv"), "w", encoding="utf-8") as fh:
                fh.write("epoch,train_loss,train_auc,val_auc\n")
                for row in r.kt_log:
                    fh.write(f"{row['epoch']},{row['train_loss']!r},{row['train_auc']!r},{row['val_auc']!r}\n")
        first = report.runs[0]
        if first.pretrain_history:
            plot_pretrain_losses(first.pretrain_history, os.path.join(fig_dir, f"pretrain_loss_{arm}.png"),
                                 title=f"{arm}: pre-training losses (run 0)")
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("arm,runs,mean_auc\n")
        for arm, report in reports.items():
            fh.write(f"{arm},{len(report.runs)},{report.mean_auc!r}\n")
    meta = {
        "version": __version__,
        "config_fingerprint": next(iter(reports.values())).config_fingerprint,
        "auc_pooling": "pooled over all test predictions",
        "spec": {k: v for k, v in spec.as_flat().items()},
    }
    with open(os.path.join(out_dir, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    plot_auc_by_arm(reports, os.path.join(fig_dir, "auc_by_arm.png"))
    plot_kt_curves({arm: rep.runs[0].kt_log for arm, rep in reports.items()},
                   os.path.join(fig_dir, "kt_curves_run0.png"))
