"""Interaction logs: parsing, indexing, splitting and per-question side information.

Input CSV layout (header required)::

    student_id,question_id,skill_ids,correct,response_time_ms,question_type

``skill_ids`` is ``;``-separated and ``correct`` is ``0`` or ``1``.  The last
two columns may be blank or absent.  Extra columns are allowed and can be used
by the ingest row filter (e.g. ASSISTments' ``original`` flag).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, EmptyDatasetError, ParseError, SplitError

log = logging.getLogger(__name__)

DATASET_MAGIC = "PEBG-DATASET"
DATASET_VERSION = 1

REQUIRED_COLUMNS = ("student_id", "question_id", "skill_ids", "correct")
OPTIONAL_COLUMNS = ("response_time_ms", "question_type")

NUMERICAL_FEATURES = {"response_time": "response_time"}
CATEGORICAL_FEATURES = {"question_type": "question_type"}


@dataclass(frozen=True)
class InteractionRecord:
    student_id: str
    question_index: int
    skill_indices: tuple[int, ...]
    correct: bool
    response_time: float | None
    question_type: str | None
    position: int


@dataclass
class StudentSequence:
    """All records of one student, in answer order, stored column-wise."""

    student_id: str
    questions: np.ndarray
    skills: tuple[tuple[int, ...], ...]
    correct: np.ndarray
    response_time: np.ndarray  # NaN marks a missing value
    question_type: tuple[str | None, ...]

    def __len__(self) -> int:
        return len(self.questions)

    def records(self) -> Iterator[InteractionRecord]:
        for pos in range(len(self)):
            rt = self.response_time[pos]
            yield InteractionRecord(
                student_id=self.student_id,
                question_index=int(self.questions[pos]),
                skill_indices=self.skills[pos],
                correct=bool(self.correct[pos]),
                response_time=None if math.isnan(rt) else float(rt),
                question_type=self.question_type[pos],
                position=pos,
            )


@dataclass
class IngestOptions:
    min_seq_len: int = 3
    filter_column: str | None = None
    filter_value: str | None = None

    @classmethod
    def from_filter_spec(cls, spec: str | None, min_seq_len: int = 3) -> "IngestOptions":
        """Build options from a ``column=value`` filter string."""
        if not spec:
            return cls(min_seq_len=min_seq_len)
        if "=" not in spec:
            raise ConfigError(f"filter must look like column=value, got {spec!r}")
        col, val = spec.split("=", 1)
        return cls(min_seq_len=min_seq_len, filter_column=col.strip(), filter_value=val.strip())


@dataclass
class IngestReport:
    rows_read: int = 0
    dropped_no_skill: int = 0
    dropped_by_filter: int = 0
    dropped_short_students: int = 0
    students_removed: int = 0
    invalid_response_times: int = 0

    @property
    def rows_kept(self) -> int:
        return self.rows_read - self.dropped_no_skill - self.dropped_by_filter - self.dropped_short_students


@dataclass
class InteractionDataset:
    students: list[StudentSequence]
    question_ids: list[str]
    skill_ids: list[str]
    ingest_report: IngestReport | None = field(default=None, compare=False)

    @property
    def num_questions(self) -> int:
        return len(self.question_ids)

    @property
    def num_skills(self) -> int:
        return len(self.skill_ids)

    @property
    def num_records(self) -> int:
        return sum(len(s) for s in self.students)

    @property
    def question_id_map(self) -> dict[str, int]:
        return {q: i for i, q in enumerate(self.question_ids)}

    @property
    def skill_id_map(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.skill_ids)}

    def records(self) -> Iterator[InteractionRecord]:
        for student in self.students:
            yield from student.records()

    def subset(self, student_indices: Iterable[int]) -> "InteractionDataset":
        """A view over some students sharing this dataset's index maps."""
        return InteractionDataset(
            students=[self.students[i] for i in student_indices],
            question_ids=self.question_ids,
            skill_ids=self.skill_ids,
        )

    def question_skills(self) -> list[tuple[int, ...]]:
        """Union of skills seen with each question, sorted."""
        sets: list[set[int]] = [set() for _ in range(self.num_questions)]
        for student in self.students:
            for q, sk in zip(student.questions, student.skills):
                sets[q].update(sk)
        return [tuple(sorted(s)) for s in sets]


# ---------------------------------------------------------------------------
# ingestion


def _open_lines(source) -> tuple[Iterable[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, io.IOBase):
        return source, False
    return iter(source), False


def ingest(source, options: IngestOptions | None = None) -> InteractionDataset:
    """Parse an interaction CSV into an indexed dataset.

    ``source`` is a path, an open text file, or any iterable of CSV lines.
    Rows without skills or rejected by the column filter are dropped, then
    students with fewer than ``options.min_seq_len`` records.  Dense indices
    follow first-seen order of the surviving rows.
    """
    options = options or IngestOptions()
    report = IngestReport()
    handle, owned = _open_lines(source)
    try:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("missing header", line=1) from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"header lacks required columns {missing}", line=1)
        col = {name: header.index(name) for name in header}
        if options.filter_column is not None and options.filter_column not in col:
            raise ConfigError(f"filter column {options.filter_column!r} not in header")

        # (student, question, skills, correct, rt, qtype) in file order
        rows: list[tuple[str, str, tuple[str, ...], int, float, str | None]] = []
        for fields in reader:
            line = reader.line_num
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            report.rows_read += 1
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(fields)}", line=line)
            flag = fields[col["correct"]].strip()
            if flag not in ("0", "1"):
                raise ParseError(f"correct must be 0 or 1, got {flag!r}", line=line)
            if options.filter_column is not None and fields[col[options.filter_column]].strip() != options.filter_value:
                report.dropped_by_filter += 1
                continue
            skills = tuple(dict.fromkeys(s.strip() for s in fields[col["skill_ids"]].split(";") if s.strip()))
            if not skills:
                report.dropped_no_skill += 1
                continue
            rt = math.nan
            if "response_time_ms" in col:
                raw = fields[col["response_time_ms"]].strip()
                if raw:
                    try:
                        rt = float(raw)
                    except ValueError:
                        raise ParseError(f"response_time_ms is not a number: {raw!r}", line=line) from None
                    if not (rt >= 0 and math.isfinite(rt)):
                        report.invalid_response_times += 1
                        rt = math.nan
            qtype = None
            if "question_type" in col:
                qtype = fields[col["question_type"]].strip() or None
            rows.append((fields[col["student_id"]].strip(), fields[col["question_id"]].strip(), skills, int(flag), rt, qtype))
    finally:
        if owned:
            handle.close()

    counts = Counter(r[0] for r in rows)
    short = {s for s, n in counts.items() if n < options.min_seq_len}
    report.students_removed = len(short)
    report.dropped_short_students = sum(counts[s] for s in short)
    rows = [r for r in rows if r[0] not in short]
    if not rows:
        raise EmptyDatasetError("no records left after filtering")

    q_map: dict[str, int] = {}
    s_map: dict[str, int] = {}
    per_student: dict[str, list] = {}
    for sid, qid, skills, c, rt, qtype in rows:
        qi = q_map.setdefault(qid, len(q_map))
        sk = tuple(sorted(s_map.setdefault(s, len(s_map)) for s in skills))
        per_student.setdefault(sid, []).append((qi, sk, c, rt, qtype))

    students = [_make_sequence(sid, recs) for sid, recs in per_student.items()]
    log.info(
        "ingested %d students, %d questions, %d skills, %d records "
        "(dropped: %d without skill, %d by filter, %d from %d short students)",
        len(students), len(q_map), len(s_map), len(rows),
        report.dropped_no_skill, report.dropped_by_filter,
        report.dropped_short_students, report.students_removed,
    )
    return InteractionDataset(students, list(q_map), list(s_map), ingest_report=report)


def _make_sequence(sid: str, recs: Sequence[tuple]) -> StudentSequence:
    return StudentSequence(
        student_id=sid,
        questions=np.array([r[0] for r in recs], dtype=np.int64),
        skills=tuple(r[1] for r in recs),
        correct=np.array([r[2] for r in recs], dtype=np.int8),
        response_time=np.array([r[3] for r in recs], dtype=np.float64),
        question_type=tuple(r[4] for r in recs),
    )


# ---------------------------------------------------------------------------
# serialization


def save_dataset(dataset: InteractionDataset, path) -> None:
    """Write the flat, tab-separated dataset format.

    Line 1: ``PEBG-DATASET <version> <students> <questions> <skills> <records>``,
    then ``Q`` lines (index, raw id), ``S`` lines, and one ``R`` line per record:
    ``R student position question skills correct response_time question_type``.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{DATASET_MAGIC}\t{DATASET_VERSION}\t{len(dataset.students)}\t"
            f"{dataset.num_questions}\t{dataset.num_skills}\t{dataset.num_records}\n"
        )
        for i, q in enumerate(dataset.question_ids):
            fh.write(f"Q\t{i}\t{_check_token(q)}\n")
        for i, s in enumerate(dataset.skill_ids):
            fh.write(f"S\t{i}\t{_check_token(s)}\n")
        for rec in dataset.records():
            rt = "" if rec.response_time is None else repr(rec.response_time)
            qt = "" if rec.question_type is None else _check_token(rec.question_type)
            skills = ";".join(map(str, rec.skill_indices))
            fh.write(
                f"R\t{_check_token(rec.student_id)}\t{rec.position}\t{rec.question_index}\t"
                f"{skills}\t{int(rec.correct)}\t{rt}\t{qt}\n"
            )


def _check_token(value: str) -> str:
    if "\t" in value or "\n" in value:
        raise ValueError(f"identifier contains a tab or newline: {value!r}")
    return value


def is_dataset_file(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.read(len(DATASET_MAGIC)) == DATASET_MAGIC


def load_dataset(path) -> InteractionDataset:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().rstrip("\n").split("\t")
        if len(head) != 6 or head[0] != DATASET_MAGIC:
            raise ParseError("not a dataset file", line=1)
        if int(head[1]) != DATASET_VERSION:
            raise ParseError(f"unsupported dataset version {head[1]}", line=1)
        n_students, n_q, n_s, n_rec = map(int, head[2:])
        qids: list[str] = []
        sids: list[str] = []
        per_student: dict[str, list] = {}
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            kind = parts[0]
            if kind == "Q":
                qids.append(parts[2])
            elif kind == "S":
                sids.append(parts[2])
            elif kind == "R" and len(parts) == 8:
                _, sid, pos, qi, sk, c, rt, qt = parts
                recs = per_student.setdefault(sid, [])
                if int(pos) != len(recs):
                    raise ParseError(f"record position {pos} out of order for {sid}", line=lineno)
                recs.append((
                    int(qi), tuple(int(x) for x in sk.split(";")), int(c),
                    float(rt) if rt else math.nan, qt or None,
                ))
            else:
                raise ParseError(f"unrecognized line {line[:40]!r}", line=lineno)
    students = [_make_sequence(sid, recs) for sid, recs in per_student.items()]
    ds = InteractionDataset(students, qids, sids)
    if (len(students), ds.num_questions, ds.num_skills, ds.num_records) != (n_students, n_q, n_s, n_rec):
        raise ParseError("header counts do not match file contents", line=1)
    return ds


# ---------------------------------------------------------------------------
# splitting and side information


def split(dataset: InteractionDataset, train_fraction: float, seed: int):
    """Partition students into (train, test) views, whole sequences per side."""
    if not 0 < train_fraction < 1:
        raise SplitError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(dataset.students)
    if n < 2:
        raise SplitError("need at least two students to split")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return dataset.subset(sorted(order[:n_train])), dataset.subset(sorted(order[n_train:]))


@dataclass
class DifficultyVector:
    values: np.ndarray
    observed: np.ndarray
    attempts: np.ndarray


def compute_difficulty(train: InteractionDataset) -> DifficultyVector:
    """Per-question fraction of correct training answers.

    Unseen questions get the 0.5 sentinel and ``observed=False``.
    """
    if not train.students:
        raise EmptyDatasetError("training split is empty")
    nq = train.num_questions
    attempts = np.zeros(nq, dtype=np.int64)
    correct = np.zeros(nq, dtype=np.int64)
    for s in train.students:
        np.add.at(attempts, s.questions, 1)
        np.add.at(correct, s.questions, s.correct.astype(np.int64))
    observed = attempts > 0
    values = np.full(nq, 0.5)
    values[observed] = correct[observed] / attempts[observed]
    return DifficultyVector(values=values, observed=observed, attempts=attempts)


@dataclass(frozen=True)
class FeatureBlock:
    name: str
    kind: str  # "numerical" or "categorical"
    start: int
    stop: int
    categories: tuple[str, ...] = ()
    mean: float = 0.0
    std: float = 1.0


@dataclass
class AttributeFeatures:
    matrix: np.ndarray
    layout: list[FeatureBlock]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


def compute_attributes(train: InteractionDataset, feature_selection: Sequence[str]) -> AttributeFeatures:
    """Per-question attribute vectors from the training split.

    Numerical features are per-question means, z-scored over the questions that
    have at least one observation; unobserved questions get 0 (the training
    mean).  Categorical features are one-hot of the modal label, ties broken by
    first appearance; category order is first appearance in the split.
    """
    nq = train.num_questions
    blocks: list[np.ndarray] = []
    layout: list[FeatureBlock] = []
    start = 0
    for name in feature_selection:
        if name in NUMERICAL_FEATURES:
            total = np.zeros(nq)
            count = np.zeros(nq)
            for s in train.students:
                ok = ~np.isnan(s.response_time)
                np.add.at(total, s.questions[ok], s.response_time[ok])
                np.add.at(count, s.questions[ok], 1)
            seen = count > 0
            col = np.zeros(nq)
            mean, std = 0.0, 1.0
            if seen.any():
                raw = total[seen] / count[seen]
                mean = float(raw.mean())
                std = float(raw.std())
                if std == 0:
                    std = 1.0
                col[seen] = (raw - mean) / std
            blocks.append(col[:, None])
            layout.append(FeatureBlock(name, "numerical", start, start + 1, mean=mean, std=std))
            start += 1
        elif name in CATEGORICAL_FEATURES:
            categories: dict[str, int] = {}
            tallies: list[dict[str, int]] = [{} for _ in range(nq)]
            for s in train.students:
                for q, label in zip(s.questions, s.question_type):
                    if label is None:
                        continue
                    categories.setdefault(label, len(categories))
                    tallies[q][label] = tallies[q].get(label, 0) + 1
            onehot = np.zeros((nq, len(categories)))
            for q, tally in enumerate(tallies):
                if tally:
                    # dicts keep insertion order, so max() returns the first-seen label on ties
                    label = max(tally, key=tally.__getitem__)
                    onehot[q, categories[label]] = 1.0
            blocks.append(onehot)
            layout.append(FeatureBlock(name, "categorical", start, start + len(categories), tuple(categories)))
            start += len(categories)
        else:
            known = sorted([*NUMERICAL_FEATURES, *CATEGORICAL_FEATURES])
            raise ConfigError(f"unknown attribute feature {name!r}; known: {known}")
    matrix = np.hstack(blocks) if blocks else np.zeros((nq, 0))
    return AttributeFeatures(matrix=matrix, layout=layout)
