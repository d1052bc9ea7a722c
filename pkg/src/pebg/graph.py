"""Question-skill bipartite graph and the same-side similarity relations.

Relations are stored sparsely as sorted arrays of pair codes
``left * n_right + right``; absent codes are negatives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import InteractionDataset
from .errors import StructuralError

log = logging.getLogger(__name__)

MAX_NEGATIVE_RETRIES = 20


@dataclass
class BipartiteGraph:
    num_questions: int
    num_skills: int
    question_neighbors: list[np.ndarray]
    skill_neighbors: list[np.ndarray]

    @classmethod
    def from_edges(cls, num_questions: int, num_skills: int, edges) -> "BipartiteGraph":
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        codes = np.unique(edges[:, 0] * num_skills + edges[:, 1])
        q, s = np.divmod(codes, num_skills)
        qn = [np.empty(0, dtype=np.int64) for _ in range(num_questions)]
        sn = [np.empty(0, dtype=np.int64) for _ in range(num_skills)]
        # codes are sorted by question then skill, so each split is already sorted
        for qi, chunk in _group(q, s):
            qn[qi] = chunk
        order = np.lexsort((q, s))
        for si, chunk in _group(s[order], q[order]):
            sn[si] = chunk
        return cls(num_questions, num_skills, qn, sn)

    @property
    def num_edges(self) -> int:
        return int(sum(len(n) for n in self.question_neighbors))

    def edges(self) -> np.ndarray:
        """All edges as an (E, 2) array of (question, skill), sorted."""
        if self.num_edges == 0:
            return np.empty((0, 2), dtype=np.int64)
        q = np.repeat(np.arange(self.num_questions), [len(n) for n in self.question_neighbors])
        return np.stack([q, np.concatenate(self.question_neighbors)], axis=1)

    def edge_relation(self) -> "Relation":
        e = self.edges()
        return Relation("edge", self.num_questions, self.num_skills, e[:, 0] * self.num_skills + e[:, 1])

    def adjacency(self) -> sp.csr_matrix:
        e = self.edges()
        data = np.ones(len(e))
        return sp.csr_matrix((data, (e[:, 0], e[:, 1])), shape=(self.num_questions, self.num_skills))

    def mean_pool_matrix(self) -> sp.csr_matrix:
        """Row-normalized adjacency: row i averages the skills of question i."""
        deg = np.array([len(n) for n in self.question_neighbors], dtype=np.float64)
        if (deg == 0).any():
            bad = int(np.flatnonzero(deg == 0)[0])
            raise StructuralError(f"question {bad} has no skill neighbors")
        return sp.diags(1.0 / deg) @ self.adjacency()

    def write_edges(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for q, s in self.edges():
                fh.write(f"{q} {s}\n")


def _group(keys: np.ndarray, values: np.ndarray):
    if len(keys) == 0:
        return
    bounds = np.flatnonzero(np.diff(keys)) + 1
    for chunk_keys, chunk in zip(np.split(keys, bounds), np.split(values, bounds)):
        yield int(chunk_keys[0]), chunk


@dataclass
class Relation:
    """Sparse binary relation over ``[0, n_left) x [0, n_right)``.

    ``side`` is ``"edge"`` for question-skill pairs, else ``"question"`` or
    ``"skill"`` for the symmetric similarity relations.
    """

    side: str
    n_left: int
    n_right: int
    codes: np.ndarray  # sorted, unique

    @property
    def num_positives(self) -> int:
        return len(self.codes)

    @property
    def num_cells(self) -> int:
        return self.n_left * self.n_right

    def pairs(self) -> np.ndarray:
        left, right = np.divmod(self.codes, self.n_right)
        return np.stack([left, right], axis=1)

    def contains(self, left, right) -> np.ndarray:
        code = np.asarray(left, dtype=np.int64) * self.n_right + np.asarray(right, dtype=np.int64)
        if len(self.codes) == 0:
            return np.zeros(code.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(self.codes, code), len(self.codes) - 1)
        return self.codes[pos] == code

    def dense(self) -> np.ndarray:
        out = np.zeros(self.num_cells)
        out[self.codes] = 1.0
        return out.reshape(self.n_left, self.n_right)


SimilarityRelation = Relation


def build_graph(dataset: InteractionDataset) -> BipartiteGraph:
    """Edge (i, j) iff some record links question i to skill j."""
    edges = [(q, s) for q, skills in enumerate(dataset.question_skills()) for s in skills]
    return BipartiteGraph.from_edges(dataset.num_questions, dataset.num_skills, edges)


def _clique_union(side: str, n: int, groups: list[np.ndarray]) -> Relation:
    chunks = []
    for members in groups:
        if len(members):
            chunks.append((members[:, None] * n + members[None, :]).ravel())
    codes = np.unique(np.concatenate(chunks)) if chunks else np.empty(0, dtype=np.int64)
    return Relation(side, n, n, codes)


def question_similarity(graph: BipartiteGraph) -> Relation:
    """Questions i, j are similar iff they share a skill (diagonal included)."""
    return _clique_union("question", graph.num_questions, graph.skill_neighbors)


def skill_similarity(graph: BipartiteGraph) -> Relation:
    """Skills i, j are similar iff they share a question (diagonal included)."""
    return _clique_union("skill", graph.num_skills, graph.question_neighbors)


def draw_negatives(relation: Relation, n: int, rng: np.random.Generator):
    """Draw ``n`` uniform pairs outside ``relation`` by bounded rejection.

    Returns ``(left, right, exhausted)``; when draws are still positive after
    ``MAX_NEGATIVE_RETRIES`` rounds they are discarded and ``exhausted`` is set.
    """
    nl = rng.integers(0, relation.n_left, size=n)
    nr = rng.integers(0, relation.n_right, size=n)
    bad = relation.contains(nl, nr)
    for _ in range(MAX_NEGATIVE_RETRIES):
        if not bad.any():
            break
        k = int(bad.sum())
        nl[bad] = rng.integers(0, relation.n_left, size=k)
        nr[bad] = rng.integers(0, relation.n_right, size=k)
        bad = relation.contains(nl, nr)
    exhausted = bool(bad.any())
    if exhausted:
        log.debug("%s relation: %d negatives not found after retries", relation.side, int(bad.sum()))
        nl, nr = nl[~bad], nr[~bad]
    return nl, nr, exhausted


@dataclass
class PairSample:
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    negatives_exhausted: bool = False

    def __len__(self) -> int:
        return len(self.label)

    @property
    def empty(self) -> bool:
        return len(self.label) == 0

    def batches(self, batch_size: int):
        for lo in range(0, len(self), batch_size):
            sl = slice(lo, lo + batch_size)
            yield PairSample(self.left[sl], self.right[sl], self.label[sl])


def sample_pairs(relation: Relation | BipartiteGraph, num_negatives: int, rng: np.random.Generator,
                 shuffle: bool = True) -> PairSample:
    """One epoch-pass of labeled pairs: every positive once plus sampled negatives.

    Each positive is matched by ``num_negatives`` pairs drawn uniformly over
    the whole domain and rejected while they hit a positive (see
    :func:`draw_negatives`).
    """
    if num_negatives < 1:
        raise ValueError("num_negatives must be >= 1")
    if isinstance(relation, BipartiteGraph):
        relation = relation.edge_relation()
    if relation.num_positives == 0:
        return PairSample(*(np.empty(0, dtype=np.int64),) * 2, np.empty(0), negatives_exhausted=True)
    pos = relation.pairs()
    nl, nr, exhausted = draw_negatives(relation, relation.num_positives * num_negatives, rng)
    left = np.concatenate([pos[:, 0], nl])
    right = np.concatenate([pos[:, 1], nr])
    label = np.concatenate([np.ones(len(pos)), np.zeros(len(nl))])
    if shuffle:
        perm = rng.permutation(len(label))
        left, right, label = left[perm], right[perm], label[perm]
    return PairSample(left, right, label, negatives_exhausted=exhausted)


def all_pairs(relation: Relation) -> PairSample:
    """Every cell of the relation's domain with its exact label (small instances only)."""
    left, right = np.divmod(np.arange(relation.num_cells, dtype=np.int64), relation.n_right)
    return PairSample(left, right, relation.dense().ravel())
