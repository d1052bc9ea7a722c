"""Recurrent knowledge tracing on question (or skill) embeddings.

A GRU reads ``[e; 0]`` for a wrong answer and ``[0; e]`` for a right one.  The
probability that the next item is answered correctly is
``sigmoid((h_t Wo + bo) . e_next + beta_next)``, so the output head scores the
specific next question instead of spreading one output unit per question.

Input modes:

* ``pretrained_finetune`` / ``pretrained_frozen`` - table from pre-training,
  updated or left untouched.
* ``raw_question`` - randomly initialized trainable question table (DKT-Q).
* ``raw_skill`` - frozen one-hot skill table; targets are each record's first
  skill, which reduces the head to classic per-skill DKT outputs.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import InteractionDataset
from .errors import ConfigError, MetricError, NumericalError
from .metrics import auc
from .optim import Adam

log = logging.getLogger(__name__)

INPUT_MODES = ("pretrained_finetune", "pretrained_frozen", "raw_question", "raw_skill")
MODEL_FORMAT_VERSION = 1


@dataclass
class KtConfig:
    hidden: int = 128
    learning_rate: float = 0.001
    batch_size: int = 32
    max_seq_len: int = 200
    epochs: int = 10
    dropout_keep: float = 0.5
    seed: int = 0
    embed_dim: int = 128
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.hidden < 1 or self.embed_dim < 1:
            raise ConfigError("hidden and embed_dim must be >= 1")
        if self.max_seq_len < 2:
            raise ConfigError("max_seq_len must be >= 2")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigError("dropout_keep must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in [0, 1)")


@dataclass
class KtModel:
    mode: str
    params: dict[str, np.ndarray]
    item_ids: list[str]

    @property
    def frozen(self) -> bool:
        return self.mode in ("pretrained_frozen", "raw_skill")

    @property
    def embed_dim(self) -> int:
        return self.params["E"].shape[1]

    @property
    def hidden(self) -> int:
        return self.params["Un"].shape[0]

    def trainable(self) -> list[str]:
        return [k for k in self.params if not (k == "E" and self.frozen)]

    def copy(self) -> "KtModel":
        return KtModel(self.mode, {k: v.copy() for k, v in self.params.items()}, list(self.item_ids))

    def item_sequences(self, dataset: InteractionDataset) -> list[np.ndarray]:
        """Per-student model item indices (questions or first skills)."""
        pos = {item: i for i, item in enumerate(self.item_ids)}
        if self.mode == "raw_skill":
            lookup = np.array([pos.get(s, -1) for s in dataset.skill_ids], dtype=np.int64)
            seqs = [lookup[[sk[0] for sk in s.skills]] for s in dataset.students]
        else:
            lookup = np.array([pos.get(q, -1) for q in dataset.question_ids], dtype=np.int64)
            seqs = [lookup[s.questions] for s in dataset.students]
        for s in seqs:
            if len(s) and s.min() < 0:
                raise ValueError("dataset contains items unknown to the model")
        return seqs


def build_input(embedding, correct: bool) -> np.ndarray:
    e = np.asarray(embedding, dtype=np.float64)
    zero = np.zeros_like(e)
    return np.concatenate([zero, e] if correct else [e, zero])


def init_model(mode: str, item_ids: list[str], config: KtConfig,
               embeddings: np.ndarray | None = None) -> KtModel:
    if mode not in INPUT_MODES:
        raise ConfigError(f"unknown mode {mode!r}; choose from {INPUT_MODES}")
    rng = np.random.default_rng(config.seed)
    n = len(item_ids)
    if mode.startswith("pretrained"):
        if embeddings is None:
            raise ConfigError(f"mode {mode} needs pre-trained embeddings")
        E = np.array(embeddings, dtype=np.float64)
        if E.shape[0] != n:
            raise ConfigError(f"embedding table has {E.shape[0]} rows for {n} items")
    elif mode == "raw_skill":
        E = np.eye(n)
    else:
        E = rng.uniform(-1, 1, size=(n, config.embed_dim)) / math.sqrt(config.embed_dim)
    d, h = E.shape[1], config.hidden
    bound = 1.0 / math.sqrt(h)
    params = {
        "E": E,
        "W": rng.uniform(-bound, bound, size=(2 * d, 3 * h)),
        "Uzr": rng.uniform(-bound, bound, size=(h, 2 * h)),
        "Un": rng.uniform(-bound, bound, size=(h, h)),
        "bg": np.zeros(3 * h),
        "Wo": rng.uniform(-bound, bound, size=(h, d)),
        "bo": np.zeros(d),
        "beta": np.zeros(n),
    }
    return KtModel(mode, params, list(item_ids))


# ---------------------------------------------------------------------------
# forward / backward over a padded batch


@dataclass
class SequenceBatch:
    items: np.ndarray  # (B, T) int
    correct: np.ndarray  # (B, T) float
    lengths: np.ndarray  # (B,)

    @classmethod
    def from_chunks(cls, chunks: list[tuple[np.ndarray, np.ndarray]]) -> "SequenceBatch":
        T = max(len(i) for i, _ in chunks)
        items = np.zeros((len(chunks), T), dtype=np.int64)
        correct = np.zeros((len(chunks), T))
        for b, (i, c) in enumerate(chunks):
            items[b, :len(i)] = i
            correct[b, :len(c)] = c
        return cls(items, correct, np.array([len(i) for i, _ in chunks]))

    @property
    def step_mask(self) -> np.ndarray:
        return np.arange(self.items.shape[1])[None, :] < self.lengths[:, None]

    @property
    def target_mask(self) -> np.ndarray:
        """Valid prediction slots: slot t predicts record t + 1."""
        return self.step_mask[:, 1:]


def _forward(params, batch: SequenceBatch, dropout_mask=None):
    E = params["E"]
    h_dim = params["Un"].shape[0]
    B, T = batch.items.shape
    step = batch.step_mask[..., None]
    e_in = E[batch.items] * step
    c = batch.correct[..., None]
    X = np.concatenate([e_in * (1 - c), e_in * c], axis=-1)
    XW = X @ params["W"] + params["bg"]
    H = np.zeros((B, T, h_dim))
    cache = []
    h = np.zeros((B, h_dim))
    for t in range(T):
        a_zr = XW[:, t, :2 * h_dim] + h @ params["Uzr"]
        z = expit(a_zr[:, :h_dim])
        r = expit(a_zr[:, h_dim:])
        rh = r * h
        n = np.tanh(XW[:, t, 2 * h_dim:] + rh @ params["Un"])
        h_new = (1 - z) * n + z * h
        cache.append((h, z, r, n, rh))
        H[:, t] = h_new
        h = h_new
    Hd = H if dropout_mask is None else H * dropout_mask
    Y = Hd[:, :-1] @ params["Wo"] + params["bo"]
    tgt = batch.items[:, 1:]
    E_t = E[tgt]
    logits = (Y * E_t).sum(axis=-1) + params["beta"][tgt]
    return logits, (X, cache, Hd, Y, E_t, tgt)


def _loss_and_grads(model: KtModel, batch: SequenceBatch, dropout_mask=None):
    p = model.params
    logits, (X, cache, Hd, Y, E_t, tgt) = _forward(p, batch, dropout_mask)
    valid = batch.target_mask
    n_valid = max(int(valid.sum()), 1)
    y = batch.correct[:, 1:]
    loss = float(((np.logaddexp(0.0, logits) - y * logits) * valid).sum() / n_valid)

    h_dim = p["Un"].shape[0]
    d = p["E"].shape[1]
    g_logit = (expit(logits) - y) * valid / n_valid
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    np.add.at(grads["E"], tgt, g_logit[..., None] * Y)
    np.add.at(grads["beta"], tgt, g_logit)
    gY = g_logit[..., None] * E_t
    grads["Wo"] = Hd[:, :-1].reshape(-1, h_dim).T @ gY.reshape(-1, d)
    grads["bo"] = gY.sum(axis=(0, 1))
    gH = np.zeros_like(Hd)
    gH[:, :-1] = gY @ p["Wo"].T
    if dropout_mask is not None:
        gH *= dropout_mask

    B, T, _ = gH.shape
    gXW = np.zeros((B, T, 3 * h_dim))
    dh_next = np.zeros((B, h_dim))
    for t in reversed(range(T)):
        h_prev, z, r, n, rh = cache[t]
        dh = gH[:, t] + dh_next
        dz = dh * (h_prev - n)
        dh_prev = dh * z
        da_n = dh * (1 - z) * (1 - n * n)
        grads["Un"] += rh.T @ da_n
        d_rh = da_n @ p["Un"].T
        dh_prev += d_rh * r
        da_zr = np.concatenate([dz * z * (1 - z), d_rh * h_prev * r * (1 - r)], axis=1)
        grads["Uzr"] += h_prev.T @ da_zr
        dh_prev += da_zr @ p["Uzr"].T
        gXW[:, t, :2 * h_dim] = da_zr
        gXW[:, t, 2 * h_dim:] = da_n
        dh_next = dh_prev
    grads["W"] = X.reshape(-1, 2 * d).T @ gXW.reshape(-1, 3 * h_dim)
    grads["bg"] = gXW.sum(axis=(0, 1))
    gX = gXW @ p["W"].T
    c = batch.correct[..., None]
    g_in = (gX[..., :d] * (1 - c) + gX[..., d:] * c) * batch.step_mask[..., None]
    np.add.at(grads["E"], batch.items, g_in)
    if model.frozen:
        del grads["E"]
    return loss, grads


def forward_sequence(model: KtModel, items, correct) -> np.ndarray:
    """Probabilities for records 2..T of one sequence given items 1..T."""
    items = np.asarray(items, dtype=np.int64)
    if len(items) < 2:
        raise ValueError("need at least two records to predict anything")
    if items.min() < 0 or items.max() >= len(model.item_ids):
        raise IndexError("item index out of range")
    batch = SequenceBatch(items[None, :], np.asarray(correct, dtype=np.float64)[None, :], np.array([len(items)]))
    logits, _ = _forward(model.params, batch)
    return expit(logits[0])


def _chunks(seqs: list[np.ndarray], dataset: InteractionDataset, max_len: int):
    out = []
    for items, student in zip(seqs, dataset.students):
        c = student.correct.astype(np.float64)
        for lo in range(0, len(items), max_len):
            if len(items) - lo >= 2:
                out.append((items[lo:lo + max_len], c[lo:lo + max_len]))
    return out


def predict_dataset(model: KtModel, dataset: InteractionDataset, max_seq_len: int = 200,
                    batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Pooled (probabilities, labels) for every predicted record, dropout off."""
    chunks = _chunks(model.item_sequences(dataset), dataset, max_seq_len)
    probs, labels = [], []
    for lo in range(0, len(chunks), batch_size):
        batch = SequenceBatch.from_chunks(chunks[lo:lo + batch_size])
        logits, _ = _forward(model.params, batch)
        m = batch.target_mask
        probs.append(expit(logits[m]))
        labels.append(batch.correct[:, 1:][m])
    if not probs:
        return np.empty(0), np.empty(0)
    return np.concatenate(probs), np.concatenate(labels)


def evaluate(model: KtModel, dataset: InteractionDataset, max_seq_len: int = 200) -> float:
    p, y = predict_dataset(model, dataset, max_seq_len)
    return auc(p, y)


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)
    best_epoch: int | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,train_auc,val_auc\n")
            for r in self.rows:
                fh.write(f"{r['epoch']},{r['train_loss']!r},{r['train_auc']!r},{r['val_auc']!r}\n")


def train_kt(model: KtModel, train: InteractionDataset, config: KtConfig) -> tuple[KtModel, TrainLog]:
    """Minimize next-step cross-entropy with Adam; returns the best-validation model.

    ``validation_fraction`` of the students is held out for checkpoint
    selection by AUC; with no usable validation set the last epoch is kept.
    """
    if not train.students:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(config.seed)
    n_students = len(train.students)
    n_val = int(round(config.validation_fraction * n_students)) if n_students >= 10 else 0
    order = rng.permutation(n_students)
    val_set = train.subset(sorted(order[:n_val])) if n_val else None
    fit_set = train.subset(sorted(order[n_val:])) if n_val else train

    chunks = _chunks(model.item_sequences(fit_set), fit_set, config.max_seq_len)
    if not chunks:
        raise ValueError("no sequence has two or more records")
    optimizer = Adam(lr=config.learning_rate)
    trainable = model.trainable()
    trainlog = TrainLog()
    best_auc, best_params = -math.inf, None
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(len(chunks))
        total, count = 0.0, 0
        for lo in range(0, len(chunks), config.batch_size):
            batch = SequenceBatch.from_chunks([chunks[i] for i in perm[lo:lo + config.batch_size]])
            mask = None
            if config.dropout_keep < 1.0:
                keep = config.dropout_keep
                mask = (rng.random((*batch.items.shape, model.hidden)) < keep) / keep
            loss, grads = _loss_and_grads(model, batch, mask)
            if not math.isfinite(loss):
                raise NumericalError("kt loss", f"epoch {epoch}")
            optimizer.step(model.params, {k: grads[k] for k in trainable})
            n = int(batch.target_mask.sum())
            total += loss * n
            count += n
        row = {"epoch": epoch, "train_loss": total / max(count, 1),
               "train_auc": _safe_auc(model, fit_set, config), "val_auc": math.nan}
        if val_set is not None:
            row["val_auc"] = _safe_auc(model, val_set, config)
            if row["val_auc"] > best_auc:
                best_auc, best_params = row["val_auc"], copy.deepcopy(model.params)
                trainlog.best_epoch = epoch
        trainlog.rows.append(row)
        log.info("kt epoch %d: loss=%.4f train_auc=%.4f val_auc=%.4f",
                 epoch, row["train_loss"], row["train_auc"], row["val_auc"])
    if best_params is not None:
        model.params = best_params
    return model, trainlog


def _safe_auc(model, dataset, config) -> float:
    try:
        return evaluate(model, dataset, config.max_seq_len)
    except MetricError:
        return math.nan


def save_model(model: KtModel, path) -> None:
    np.savez(path, __format__=np.array([MODEL_FORMAT_VERSION]), __mode__=np.array(model.mode),
             __items__=np.array(model.item_ids, dtype=str), **model.params)


def load_model(path) -> KtModel:
    with np.load(path) as z:
        if int(z["__format__"][0]) != MODEL_FORMAT_VERSION:
            raise ValueError("unsupported model file version")
        params = {k: z[k].copy() for k in z.files if not k.startswith("__")}
        return KtModel(str(z["__mode__"]), params, [str(x) for x in z["__items__"]])
