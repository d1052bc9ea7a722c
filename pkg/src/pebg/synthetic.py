"""Synthetic interaction logs with planted question-skill structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InteractionDataset, IngestOptions, ingest

HEADER = "student_id,question_id,skill_ids,correct,response_time_ms,question_type"


@dataclass
class SyntheticSpec:
    num_skills: int = 4
    questions_per_skill: int = 5
    skill_overlap: float = 0.0
    num_students: int = 50
    records_per_student: int = 20
    clusters: int = 1
    easiness: tuple[float, ...] | None = None
    easiness_low: float = 0.2
    easiness_high: float = 0.9
    question_types: int = 2

    @property
    def num_questions(self) -> int:
        return self.num_skills * self.questions_per_skill

    def validate(self) -> None:
        for name in ("num_skills", "questions_per_skill", "num_students", "records_per_student", "clusters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.records_per_student < 3:
            raise ValueError("records_per_student must be >= 3 or every student is filtered out")
        if not 0.0 <= self.skill_overlap <= 1.0:
            raise ValueError("skill_overlap must lie in [0, 1]")
        if self.easiness is not None and len(self.easiness) != self.num_questions:
            raise ValueError(f"easiness needs {self.num_questions} values")


@dataclass
class GroundTruth:
    """Planted structure in dataset index order."""

    adjacency: np.ndarray  # (num_questions, num_skills) 0/1
    easiness: np.ndarray
    cluster_of_skill: np.ndarray


def skill_cluster(spec: SyntheticSpec) -> np.ndarray:
    return np.arange(spec.num_skills) * spec.clusters // spec.num_skills


def generate_rows(spec: SyntheticSpec, seed: int):
    """CSV lines (header first) plus the planted adjacency/easiness in generator order.

    Question ``g`` belongs to skill ``g // questions_per_skill``; with
    probability ``skill_overlap`` it also gets one other skill from the same
    cluster.  Each answer is Bernoulli(easiness of the question).
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    nq, ns = spec.num_questions, spec.num_skills
    cluster = skill_cluster(spec)
    adjacency = np.zeros((nq, ns), dtype=np.int8)
    for g in range(nq):
        primary = g // spec.questions_per_skill
        adjacency[g, primary] = 1
        siblings = np.flatnonzero((cluster == cluster[primary]) & (np.arange(ns) != primary))
        if len(siblings) and rng.random() < spec.skill_overlap:
            adjacency[g, rng.choice(siblings)] = 1
    if spec.easiness is None:
        easiness = rng.uniform(spec.easiness_low, spec.easiness_high, size=nq)
    else:
        easiness = np.asarray(spec.easiness, dtype=np.float64)
    qtype = rng.integers(0, spec.question_types, size=nq)
    base_time = 20000.0 * (1.5 - easiness)

    lines = [HEADER]
    for u in range(spec.num_students):
        qs = rng.integers(0, nq, size=spec.records_per_student)
        correct = rng.random(spec.records_per_student) < easiness[qs]
        times = base_time[qs] * rng.lognormal(0.0, 0.25, size=len(qs))
        for g, c, t in zip(qs, correct, times):
            skills = ";".join(f"s{k}" for k in np.flatnonzero(adjacency[g]))
            lines.append(f"u{u},q{g},{skills},{int(c)},{t:.1f},type{qtype[g]}")
    return lines, adjacency, easiness, cluster


def generate_synthetic(spec: SyntheticSpec, seed: int) -> tuple[InteractionDataset, GroundTruth]:
    lines, adjacency, easiness, cluster = generate_rows(spec, seed)
    dataset = ingest(lines, IngestOptions(min_seq_len=3))
    q_gen = [int(q[1:]) for q in dataset.question_ids]
    s_gen = [int(s[1:]) for s in dataset.skill_ids]
    truth = GroundTruth(
        adjacency=adjacency[np.ix_(q_gen, s_gen)].astype(np.int8),
        easiness=easiness[q_gen],
        cluster_of_skill=cluster[s_gen],
    )
    return dataset, truth


def write_csv(lines, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
