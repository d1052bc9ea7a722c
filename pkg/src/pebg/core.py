"""Question-embedding pre-training on the question-skill graph.

The trainable state is a dict of float64 arrays:

``Q``, ``S``
    question / skill vertex features, ``(|Q|, d_v)`` and ``(|S|, d_v)``.
``Wa``, ``ba``
    linear map from raw attributes to ``d_v``.
``Wz``, ``theta``, ``b``
    product layer: ``d`` linear weight tensors of shape ``(3, d_v)``, the rank-1
    factors of the quadratic weights, and the output bias.
``Wf``, ``bf``
    fully connected replacement of the product layer (``RPF`` ablation).
``wd``, ``bd``
    linear difficulty head.

All gradients are written out by hand for this fixed computation graph.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.special import expit

from .data import AttributeFeatures, DifficultyVector
from .errors import ConfigError, NumericalError
from .graph import (BipartiteGraph, PairSample, Relation, all_pairs, draw_negatives,
                    question_similarity, skill_similarity)
from .optim import Adam

log = logging.getLogger(__name__)

ABLATIONS = ("RER", "RIS", "RPL", "RPF")
TERMS = ("L1", "L2", "L3", "L4")
PARAMS_FORMAT_VERSION = 1
EMBEDDING_FORMAT_VERSION = 1


@dataclass
class PretrainConfig:
    d_v: int = 64
    d: int = 128
    lam: float = 0.5
    learning_rate: float = 0.001
    batch_size: int = 256
    question_batch_size: int = 256
    epochs: int = 20
    neg_ratio: int = 1
    dropout_keep: float = 0.5
    seed: int = 0
    ablation: frozenset = frozenset()
    pair_mode: str = "sampled"
    validation_fraction: float = 0.1
    attributes: tuple = ("response_time", "question_type")

    def __post_init__(self):
        if isinstance(self.ablation, str):
            self.ablation = [a for a in self.ablation.split(",") if a.strip()]
        self.ablation = frozenset(a.strip().upper() for a in self.ablation)
        if isinstance(self.attributes, str):
            self.attributes = [a for a in self.attributes.split(",") if a.strip()]
        self.attributes = tuple(a.strip() for a in self.attributes)
        unknown = self.ablation - set(ABLATIONS)
        if unknown:
            raise ConfigError(f"unknown ablation(s) {sorted(unknown)}; choose from {ABLATIONS}")
        if {"RPL", "RPF"} <= self.ablation:
            raise ConfigError("RPL and RPF both replace the product layer; pick one")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.d_v < 1 or self.d < 1:
            raise ConfigError("dimensions must be >= 1")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigError(f"dropout_keep must lie in (0, 1], got {self.dropout_keep}")
        if self.neg_ratio < 1 or self.batch_size < 1 or self.question_batch_size < 1 or self.epochs < 0:
            raise ConfigError("neg_ratio and batch sizes must be >= 1, epochs >= 0")
        if self.pair_mode not in ("sampled", "full"):
            raise ConfigError(f"pair_mode must be 'sampled' or 'full', got {self.pair_mode!r}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in [0, 1)")

    @property
    def variant(self) -> str:
        if "RPL" in self.ablation:
            return "concat"
        if "RPF" in self.ablation:
            return "dense"
        return "product"

    def term_weights(self) -> dict[str, float]:
        w = {"L1": self.lam, "L2": self.lam, "L3": self.lam, "L4": 1.0 - self.lam}
        if "RER" in self.ablation:
            w["L1"] = 0.0
        if "RIS" in self.ablation:
            w["L2"] = w["L3"] = 0.0
        return w

    def active_terms(self) -> tuple[str, ...]:
        off = set()
        if "RER" in self.ablation:
            off.add("L1")
        if "RIS" in self.ablation:
            off |= {"L2", "L3"}
        return tuple(t for t in TERMS if t not in off)


@dataclass
class PebgParameters:
    tensors: dict[str, np.ndarray]
    variant: str = "product"

    def __getitem__(self, key: str) -> np.ndarray:
        return self.tensors[key]

    def __contains__(self, key: str) -> bool:
        return key in self.tensors

    def copy(self) -> "PebgParameters":
        return PebgParameters({k: v.copy() for k, v in self.tensors.items()}, self.variant)

    @property
    def d_v(self) -> int:
        return self.tensors["Q"].shape[1]

    @property
    def embedding_dim(self) -> int:
        return self.tensors["wd"].shape[0]

    def all_finite(self) -> str | None:
        """Name of the first tensor holding NaN/Inf, or None."""
        for k, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                return k
        return None


def init_parameters(num_questions: int, num_skills: int, attr_dim: int, d_v: int, d: int,
                    seed: int, variant: str = "product") -> PebgParameters:
    """Uniform(-1/sqrt(d_v), 1/sqrt(d_v)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(d_v)

    def uniform(*shape):
        return rng.uniform(-bound, bound, size=shape)

    t = {
        "Q": uniform(num_questions, d_v),
        "S": uniform(num_skills, d_v),
        "Wa": uniform(attr_dim, d_v),
        "ba": np.zeros(d_v),
    }
    if variant == "product":
        t["Wz"] = uniform(d, 3, d_v)
        t["theta"] = uniform(d, 3)
        t["b"] = np.zeros(d)
        width = d
    elif variant == "dense":
        t["Wf"] = uniform(d, 3 * d_v)
        t["bf"] = np.zeros(d)
        width = d
    elif variant == "concat":
        width = 3 * d_v
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    t["wd"] = rng.uniform(-1.0, 1.0, size=width) / math.sqrt(width)
    t["bd"] = np.zeros(1)
    return PebgParameters(t, variant)


@dataclass
class PretrainData:
    """Fixed inputs of pre-training, derived once from the dataset."""

    graph: BipartiteGraph
    attributes: np.ndarray
    difficulty: DifficultyVector
    edge_relation: Relation = field(init=False)
    question_sim: Relation = field(init=False)
    skill_sim: Relation = field(init=False)

    def __post_init__(self):
        if isinstance(self.attributes, AttributeFeatures):
            self.attributes = self.attributes.matrix
        self.attributes = np.asarray(self.attributes, dtype=np.float64)
        self.pool = self.graph.mean_pool_matrix()
        self.edge_relation = self.graph.edge_relation()
        self.question_sim = question_similarity(self.graph)
        self.skill_sim = skill_similarity(self.graph)

    @property
    def num_questions(self) -> int:
        return self.graph.num_questions

    @property
    def num_skills(self) -> int:
        return self.graph.num_skills

    @property
    def attr_dim(self) -> int:
        return self.attributes.shape[1]


# ---------------------------------------------------------------------------
# graph losses


def _grad_buffer(params: PebgParameters, out: dict, key: str) -> np.ndarray:
    if key not in out:
        out[key] = np.zeros_like(params[key])
    return out[key]


def _pair_loss(params: PebgParameters, left_key: str, right_key: str, pairs: PairSample, reduction: str,
               out: dict | None = None, weight: float = 1.0):
    out = {} if out is None else out
    if pairs is None or pairs.empty:
        return 0.0, out
    A = params[left_key][pairs.left]
    B = params[right_key][pairs.right]
    x = np.einsum("ij,ij->i", A, B)
    # -[r log s(x) + (1 - r) log(1 - s(x))] == softplus(x) - r x
    losses = np.logaddexp(0.0, x) - pairs.label * x
    scale = 1.0 / len(x) if reduction == "mean" else 1.0
    loss = float(losses.sum()) * scale
    if weight == 0.0:
        return loss, out
    g = (expit(x) - pairs.label) * (scale * weight)
    np.add.at(_grad_buffer(params, out, left_key), pairs.left, g[:, None] * B)
    np.add.at(_grad_buffer(params, out, right_key), pairs.right, g[:, None] * A)
    return loss, out


def explicit_relation_loss(params: PebgParameters, pairs: PairSample, reduction: str = "mean",
                           out: dict | None = None, weight: float = 1.0):
    """Cross-entropy between sigmoid(q_i . s_j) and the question-skill labels.

    Returns ``(loss, grads)``; gradients (scaled by ``weight``) are added into
    ``out`` when given.
    """
    return _pair_loss(params, "Q", "S", pairs, reduction, out, weight)


def implicit_similarity_loss(params: PebgParameters, side: str, pairs: PairSample, reduction: str = "mean",
                             out: dict | None = None, weight: float = 1.0):
    """Cross-entropy between sigmoid(v_i . v_j) and same-side similarity labels."""
    key = {"question": "Q", "skill": "S"}[side]
    return _pair_loss(params, key, key, pairs, reduction, out, weight)


# ---------------------------------------------------------------------------
# product layer and difficulty head


@dataclass
class ProductLayerActivation:
    idx: np.ndarray
    z: np.ndarray  # (B, 3, d_v): question, mean skill, projected attributes
    e: np.ndarray  # post-activation embedding, before dropout
    mask: np.ndarray | None = None
    gram: np.ndarray | None = None
    l_z: np.ndarray | None = None
    l_p: np.ndarray | None = None
    pre: np.ndarray | None = None

    @property
    def output(self) -> np.ndarray:
        return self.e if self.mask is None else self.e * self.mask


def forward_embedding(params: PebgParameters, q_idx, data: PretrainData,
                      dropout_mask: np.ndarray | None = None) -> ProductLayerActivation:
    idx = np.atleast_1d(np.asarray(q_idx, dtype=np.int64))
    q = params["Q"][idx]
    s_mean = data.pool[idx] @ params["S"]
    a = data.attributes[idx] @ params["Wa"] + params["ba"]
    z = np.stack([q, s_mean, a], axis=1)
    if params.variant == "product":
        d = params["b"].shape[0]
        l_z = z.reshape(len(idx), -1) @ params["Wz"].reshape(d, -1).T
        # W_p = theta theta^T, so l_p[k] = theta_k^T G theta_k = ||sum_i theta_ki z_i||^2
        gram = np.matmul(z, z.transpose(0, 2, 1))
        theta_t = params["theta"].T
        l_p = ((gram @ theta_t) * theta_t).sum(axis=1)
        pre = l_z + l_p + params["b"]
        return ProductLayerActivation(idx, z, np.maximum(pre, 0.0), dropout_mask, gram, l_z, l_p, pre)
    flat = z.reshape(len(idx), -1)
    if params.variant == "dense":
        pre = flat @ params["Wf"].T + params["bf"]
        return ProductLayerActivation(idx, z, np.maximum(pre, 0.0), dropout_mask, pre=pre)
    return ProductLayerActivation(idx, z, flat, dropout_mask)


def _backward_embedding(params: PebgParameters, act: ProductLayerActivation, data: PretrainData,
                        g_out: np.ndarray, out: dict) -> None:
    """Add gradients of every reached parameter, given d(loss)/d(output), into ``out``."""
    g_e = g_out if act.mask is None else g_out * act.mask
    n = len(act.idx)
    flat_z = act.z.reshape(n, -1)
    if params.variant == "product":
        d = params["b"].shape[0]
        g_pre = g_e * (act.pre > 0)
        _grad_buffer(params, out, "b")[...] += g_pre.sum(axis=0)
        _grad_buffer(params, out, "Wz")[...] += (g_pre.T @ flat_z).reshape(params["Wz"].shape)
        g_z = (g_pre @ params["Wz"].reshape(d, -1)).reshape(act.z.shape)
        theta = params["theta"]
        # d l_p[k] / d theta_k = 2 G theta_k;  d l_p[k] / d z = 2 theta_k theta_k^T z
        _grad_buffer(params, out, "theta")[...] += 2.0 * np.einsum("bk,bkc->kc", g_pre, theta @ act.gram)
        mix = theta.T @ (g_pre[:, :, None] * theta)
        g_z += 2.0 * np.matmul(mix, act.z)
    elif params.variant == "dense":
        g_pre = g_e * (act.pre > 0)
        _grad_buffer(params, out, "bf")[...] += g_pre.sum(axis=0)
        _grad_buffer(params, out, "Wf")[...] += g_pre.T @ flat_z
        g_z = (g_pre @ params["Wf"]).reshape(act.z.shape)
    else:
        g_z = g_e.reshape(act.z.shape)
    np.add.at(_grad_buffer(params, out, "Q"), act.idx, g_z[:, 0])
    _grad_buffer(params, out, "S")[...] += data.pool[act.idx].T @ g_z[:, 1]
    _grad_buffer(params, out, "Wa")[...] += data.attributes[act.idx].T @ g_z[:, 2]
    _grad_buffer(params, out, "ba")[...] += g_z[:, 2].sum(axis=0)


def predict_difficulty(params: PebgParameters, q_idx, data: PretrainData) -> np.ndarray:
    act = forward_embedding(params, q_idx, data)
    return act.e @ params["wd"] + params["bd"][0]


def difficulty_loss(params: PebgParameters, q_idx, data: PretrainData,
                    dropout_mask: np.ndarray | None = None, reduction: str = "mean",
                    out: dict | None = None, weight: float = 1.0):
    """Squared error between observed difficulty and the head's estimate.

    Gradients reach every parameter on the forward path; they are scaled by
    ``weight`` and added into ``out`` when given.
    """
    out = {} if out is None else out
    idx = np.atleast_1d(np.asarray(q_idx, dtype=np.int64))
    if len(idx) == 0:
        return 0.0, out
    if not data.difficulty.observed[idx].all():
        raise ValueError("difficulty batch contains questions unobserved in training")
    act = forward_embedding(params, idx, data, dropout_mask)
    emb = act.output
    resid = emb @ params["wd"] + params["bd"][0] - data.difficulty.values[idx]
    scale = 1.0 / len(idx) if reduction == "mean" else 1.0
    loss = float((resid ** 2).sum()) * scale
    if weight == 0.0:
        return loss, out
    g_hat = 2.0 * resid * (scale * weight)
    _grad_buffer(params, out, "wd")[...] += emb.T @ g_hat
    _grad_buffer(params, out, "bd")[...] += g_hat.sum()
    _backward_embedding(params, act, data, np.outer(g_hat, params["wd"]), out)
    return loss, out


def embed_all(params: PebgParameters, data: PretrainData, batch: int = 2048) -> np.ndarray:
    """Dropout-free embeddings of every question, in index order."""
    out = [forward_embedding(params, np.arange(lo, min(lo + batch, data.num_questions)), data).e
           for lo in range(0, data.num_questions, batch)]
    return np.vstack(out) if out else np.zeros((0, params.embedding_dim))


# ---------------------------------------------------------------------------
# joint objective


@dataclass
class JointBatch:
    edges: PairSample | None
    question_pairs: PairSample | None
    skill_pairs: PairSample | None
    questions: np.ndarray


def joint_loss(params: PebgParameters, batch: JointBatch, data: PretrainData, config: PretrainConfig,
               dropout_mask: np.ndarray | None = None):
    """Weighted sum lam*(L1+L2+L3) + (1-lam)*L4 of per-term mean losses.

    Terms removed by an ablation report 0 and contribute no gradient.
    """
    weights = config.term_weights()
    active = config.active_terms()
    report = dict.fromkeys(TERMS, 0.0)
    grads: dict[str, np.ndarray] = {}
    evaluators = {
        "L1": lambda w: explicit_relation_loss(params, batch.edges, out=grads, weight=w),
        "L2": lambda w: implicit_similarity_loss(params, "question", batch.question_pairs, out=grads, weight=w),
        "L3": lambda w: implicit_similarity_loss(params, "skill", batch.skill_pairs, out=grads, weight=w),
        "L4": lambda w: difficulty_loss(params, batch.questions, data, dropout_mask, out=grads, weight=w),
    }
    total = 0.0
    for term in active:
        loss, _ = evaluators[term](weights[term])
        if not math.isfinite(loss):
            raise NumericalError(term, f"loss={loss}")
        report[term] = loss
        total += weights[term] * loss
    report["total"] = total
    for k, v in params.tensors.items():
        if k not in grads:
            grads[k] = np.zeros_like(v)
    return report, grads


def joint_step(params: PebgParameters, optimizer: Adam, batch: JointBatch, data: PretrainData,
               config: PretrainConfig, rng: np.random.Generator) -> dict[str, float]:
    """One Adam step on the joint objective; updates ``params`` in place."""
    mask = None
    if config.dropout_keep < 1.0 and len(batch.questions):
        keep = config.dropout_keep
        mask = (rng.random((len(batch.questions), params.embedding_dim)) < keep) / keep
    report, grads = joint_loss(params, batch, data, config, mask)
    optimizer.step(params.tensors, grads)
    bad = params.all_finite()
    if bad is not None:
        raise NumericalError(f"parameter {bad}")
    return report


# ---------------------------------------------------------------------------
# training loop


class _PairStream:
    """Cycles through a relation's positives, each batch padded with fresh negatives."""

    def __init__(self, relation: Relation, batch_size: int, neg_ratio: int, rng: np.random.Generator):
        self.relation = relation
        self.per_batch = max(1, batch_size // (1 + neg_ratio))
        self.neg_ratio = neg_ratio
        self.rng = rng
        self.order = np.empty(0, dtype=np.int64)
        self.cursor = 0

    def next(self) -> PairSample:
        rel = self.relation
        if rel.num_positives == 0:
            return PairSample(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        if self.cursor >= len(self.order):
            self.order = self.rng.permutation(rel.num_positives)
            self.cursor = 0
        take = self.order[self.cursor:self.cursor + self.per_batch]
        self.cursor += len(take)
        pl, pr = np.divmod(rel.codes[take], rel.n_right)
        nl, nr, _ = draw_negatives(rel, len(take) * self.neg_ratio, self.rng)
        label = np.concatenate([np.ones(len(pl)), np.zeros(len(nl))])
        return PairSample(np.concatenate([pl, nl]), np.concatenate([pr, nr]), label)


class _IndexStream:
    def __init__(self, items: np.ndarray, batch_size: int, rng: np.random.Generator):
        self.items = items
        self.batch_size = batch_size
        self.rng = rng
        self.order = np.empty(0, dtype=np.int64)
        self.cursor = 0

    def next(self) -> np.ndarray:
        if len(self.items) == 0:
            return self.items
        if self.cursor >= len(self.order):
            self.order = self.rng.permutation(self.items)
            self.cursor = 0
        out = self.order[self.cursor:self.cursor + self.batch_size]
        self.cursor += len(out)
        return out


@dataclass
class QuestionEmbeddingTable:
    embeddings: np.ndarray
    question_ids: list[str]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def save(self, path) -> None:
        """Text format: ``<n> <d>`` header, then ``<raw_id> v1 ... vd`` per question."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.question_ids)} {self.dim}\n")
            for qid, row in zip(self.question_ids, self.embeddings):
                if not qid or any(c.isspace() for c in qid):
                    raise ValueError(f"question id {qid!r} cannot be written to the text format")
                fh.write(qid + " " + " ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "QuestionEmbeddingTable":
        with open(path, encoding="utf-8") as fh:
            n, d = map(int, fh.readline().split())
            ids, rows = [], []
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != d + 1:
                    raise ValueError(f"embedding row for {parts[0]!r} has {len(parts) - 1} values, expected {d}")
                ids.append(parts[0])
                rows.append([float(v) for v in parts[1:]])
        if len(ids) != n:
            raise ValueError(f"header announces {n} rows, found {len(ids)}")
        return cls(np.array(rows, dtype=np.float64).reshape(n, d), ids)

    def aligned(self, question_ids: list[str]) -> np.ndarray:
        """Rows reordered to match ``question_ids``; every id must be present."""
        pos = {q: i for i, q in enumerate(self.question_ids)}
        missing = [q for q in question_ids if q not in pos]
        if missing:
            raise ValueError(f"{len(missing)} questions lack embeddings, e.g. {missing[:3]}")
        return self.embeddings[[pos[q] for q in question_ids]]


@dataclass
class PretrainResult:
    table: QuestionEmbeddingTable
    params: PebgParameters
    history: list[dict] = field(default_factory=list)
    best_epoch: int | None = None


def _validation_objective(params, data, config, eval_batch: JointBatch) -> float:
    report, _ = joint_loss(params, eval_batch, data, config)
    return report["total"]


def _eval_pairs(relation: Relation, limit: int, neg_ratio: int, rng) -> PairSample:
    if relation.num_positives == 0:
        return PairSample(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    take = rng.permutation(relation.num_positives)[:limit]
    pl, pr = np.divmod(relation.codes[take], relation.n_right)
    nl, nr, _ = draw_negatives(relation, len(take) * neg_ratio, rng)
    return PairSample(np.concatenate([pl, nl]), np.concatenate([pr, nr]),
                      np.concatenate([np.ones(len(pl)), np.zeros(len(nl))]))


def pretrain(data: PretrainData, config: PretrainConfig, question_ids: list[str] | None = None,
             params: PebgParameters | None = None) -> PretrainResult:
    """Run ``config.epochs`` epochs of joint steps and export the embedding table.

    In ``sampled`` mode one epoch is as many steps as it takes to visit every
    question-skill edge once (with its negatives); the similarity and difficulty
    streams cycle independently.  In ``full`` mode each epoch is one step over
    every pair and every training question.  When ``validation_fraction > 0``
    that share of observed questions is withheld from the difficulty loss and
    the parameters with the best validation objective are kept.
    """
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_parameters(data.num_questions, data.num_skills, data.attr_dim,
                                 config.d_v, config.d, config.seed, config.variant)
    question_ids = question_ids or [str(i) for i in range(data.num_questions)]
    optimizer = Adam(lr=config.learning_rate)

    observed = np.flatnonzero(data.difficulty.observed)
    n_val = int(round(config.validation_fraction * len(observed))) if len(observed) >= 10 else 0
    shuffled = rng.permutation(observed)
    val_q, train_q = np.sort(shuffled[:n_val]), np.sort(shuffled[n_val:])

    if config.pair_mode == "full":
        full = JointBatch(all_pairs(data.edge_relation), all_pairs(data.question_sim),
                          all_pairs(data.skill_sim), train_q)
        steps_per_epoch = 1
        eval_batch = replace(full, questions=val_q)
    else:
        streams = (
            _PairStream(data.edge_relation, config.batch_size, config.neg_ratio, rng),
            _PairStream(data.question_sim, config.batch_size, config.neg_ratio, rng),
            _PairStream(data.skill_sim, config.batch_size, config.neg_ratio, rng),
        )
        q_stream = _IndexStream(train_q, config.question_batch_size, rng)
        steps_per_epoch = max(1, math.ceil(data.edge_relation.num_positives * (1 + config.neg_ratio)
                                           / config.batch_size))
        eval_batch = JointBatch(*(_eval_pairs(r, 2048, config.neg_ratio, rng) for r in
                                  (data.edge_relation, data.question_sim, data.skill_sim)), val_q)

    best = (math.inf, None, None)
    history = []
    for epoch in range(1, config.epochs + 1):
        sums = dict.fromkeys((*TERMS, "total"), 0.0)
        for _ in range(steps_per_epoch):
            if config.pair_mode == "full":
                batch = full
            else:
                batch = JointBatch(*(s.next() for s in streams), q_stream.next())
            report = joint_step(params, optimizer, batch, data, config, rng)
            for k in sums:
                sums[k] += report[k]
        row = {"epoch": epoch, **{k: v / steps_per_epoch for k, v in sums.items()}}
        if n_val:
            row["validation"] = _validation_objective(params, data, config, eval_batch)
            if row["validation"] < best[0]:
                best = (row["validation"], epoch, params.copy())
        history.append(row)
        log.info("pretrain epoch %d: %s", epoch,
                 " ".join(f"{k}={v:.4f}" for k, v in row.items() if k != "epoch"))

    best_epoch = None
    if best[2] is not None:
        best_epoch, params = best[1], best[2]
        log.info("restoring parameters from epoch %d (validation %.4f)", best_epoch, best[0])
    table = QuestionEmbeddingTable(embed_all(params, data), list(question_ids))
    return PretrainResult(table, params, history, best_epoch)


def write_loss_curve(history: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,L1,L2,L3,L4,total\n")
        for row in history:
            fh.write(",".join([str(row["epoch"])] + [repr(float(row[k])) for k in (*TERMS, "total")]) + "\n")


def save_parameters(params: PebgParameters, path) -> None:
    np.savez(path, __format__=np.array([PARAMS_FORMAT_VERSION]), __variant__=np.array(params.variant),
             **params.tensors)


def load_parameters(path) -> PebgParameters:
    with np.load(path) as z:
        if int(z["__format__"][0]) != PARAMS_FORMAT_VERSION:
            raise ValueError("unsupported parameter file version")
        tensors = {k: z[k].copy() for k in z.files if not k.startswith("__")}
        return PebgParameters(tensors, str(z["__variant__"]))


def config_field_names() -> list[str]:
    return [f.name for f in fields(PretrainConfig)]


def prepare(dataset, train, attributes=("response_time", "question_type")) -> PretrainData:
    """Graph from every record, difficulty and attributes from ``train`` only."""
    from .data import compute_attributes, compute_difficulty
    from .graph import build_graph

    return PretrainData(build_graph(dataset), compute_attributes(train, attributes), compute_difficulty(train))
