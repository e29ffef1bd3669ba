"""Multitask training: alternate triple-embedding epochs (margin ranking
with corrupted tails) with question-answering epochs, early-stop on
validation accuracy, and keep the best checkpoint.

The triple-embedding task pulls the projected sum of a subject and
relation embedding toward the object embedding and away from a corrupted
tail; entity rows are capped at unit norm after each batch so the margin
cannot be satisfied by blowing up scales. It touches only ent_emb,
rel_emb, and M_se.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import CONJUNCTIVE, QAInstance, Vocab, build_vocab
from .inference import answer_conjunctive, answer_question
from .kb import KnowledgeBase
from .model import (GoldTargets, MODE_IRN, MODE_IRN_WEAK, ModelError, ModelParams,
                    PARAM_NAMES, backward, forward, init_params, zero_grads)
from .numerics import AdamState, Prng, adam_step

CHECKPOINT_VERSION = 1


class TrainError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    d: int = 50
    lam: float = 1.0
    lr: float = 0.001
    batch: int = 50
    kb_epochs_per_round: int = 3
    margin: float = 1.0
    negatives_per_triple: int = 1
    max_rounds: int = 200
    patience: int = 10
    hop_cap: int = 5
    mode: str = MODE_IRN
    seed: int = 0

    def __post_init__(self):
        for name in ("d", "lr", "batch", "kb_epochs_per_round", "margin",
                     "negatives_per_triple", "max_rounds", "patience", "hop_cap"):
            if getattr(self, name) <= 0:
                raise TrainError(f"config field {name} must be positive")
        if self.lam < 0:
            raise TrainError("lam must be nonnegative")
        if self.patience > self.max_rounds:
            raise TrainError("patience cannot exceed max_rounds")
        if self.mode not in (MODE_IRN, MODE_IRN_WEAK):
            raise TrainError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        """Flat `key = value` lines; later flags override file values."""
        values: dict = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, raw = line.partition("=")
                if not sep:
                    raise TrainError(f"{path}:{lineno}: expected key = value")
                key = key.strip()
                raw = raw.strip()
                if key not in cls.__dataclass_fields__:
                    raise TrainError(f"{path}:{lineno}: unknown config key {key!r}")
                typ = cls.__dataclass_fields__[key].type
                values[key] = raw if key == "mode" else (float(raw) if typ == "float" else int(raw))
        values.update(overrides)
        return cls(**values)


@dataclass
class HistoryRow:
    round: int
    kb_loss: float
    qa_loss: float
    val_acc: float
    seconds: float


@dataclass
class TrainHistory:
    rows: list[HistoryRow] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("round,kb_loss,qa_loss,val_acc,seconds\n")
            for r in self.rows:
                f.write(f"{r.round},{r.kb_loss!r},{r.qa_loss!r},{r.val_acc!r},{r.seconds:.3f}\n")


def _adam_states(params: ModelParams) -> dict[str, AdamState]:
    return {name: AdamState.like(t) for name, t in params.tensors().items()}


# ---------------------------------------------------------------------------
# triple-embedding task

KB_TASK_TENSORS = ("ent_emb", "rel_emb", "M_se")


def kb_embedding_epoch(params: ModelParams, kb: KnowledgeBase, config: TrainConfig,
                       rng: np.random.Generator,
                       states: dict[str, AdamState] | None = None) -> tuple[ModelParams, float]:
    """One shuffled pass of margin-ranking training over the triples."""
    if not kb.triples:
        raise TrainError("knowledge base has no triples")
    if states is None:
        states = _adam_states(params)
    triples = np.asarray(kb.triples)
    order = rng.permutation(len(triples))
    total = 0.0
    n_terms = 0
    for start in range(0, len(triples), config.batch):
        batch = triples[order[start:start + config.batch]]
        S, R, O = batch[:, 0], batch[:, 1], batch[:, 2]
        reps = config.negatives_per_triple
        if reps > 1:
            S, R, O = np.repeat(S, reps), np.repeat(R, reps), np.repeat(O, reps)
        O_neg = rng.integers(0, kb.n_entities, size=len(S))

        X = params.ent_emb[S] + params.rel_emb[R]          # b x d
        U = X @ params.M_se.T - params.ent_emb[O]          # positive residual
        V = X @ params.M_se.T - params.ent_emb[O_neg]      # negative residual
        hinge = config.margin + (U * U).sum(axis=1) - (V * V).sum(axis=1)
        active = hinge > 0
        total += np.maximum(hinge, 0.0).sum()
        n_terms += len(S)
        if not active.any():
            continue

        scale = 1.0 / len(S)
        Ua = U[active] * scale
        Va = V[active] * scale
        Xa = X[active]
        diff = 2.0 * (Ua - Va)
        grads = {name: np.zeros_like(getattr(params, name)) for name in KB_TASK_TENSORS}
        grads["M_se"] += diff.T @ Xa
        dX = diff @ params.M_se
        np.add.at(grads["ent_emb"], S[active], dX)
        np.add.at(grads["rel_emb"], R[active], dX)
        np.add.at(grads["ent_emb"], O[active], -2.0 * Ua)
        np.add.at(grads["ent_emb"], O_neg[active], 2.0 * Va)
        for name in KB_TASK_TENSORS:
            adam_step(getattr(params, name), grads[name], states[name], lr=config.lr)

        norms = np.linalg.norm(params.ent_emb, axis=1)
        over = norms > 1.0
        if over.any():
            params.ent_emb[over] /= norms[over, None]
    return params, total / max(n_terms, 1)


# ---------------------------------------------------------------------------
# question-answering task

@dataclass(frozen=True)
class EncodedExample:
    token_ids: tuple[int, ...]
    subject: int
    targets: GoldTargets


def encode_training_set(instances, vocab: Vocab, terminal_id: int) -> list[EncodedExample]:
    """Flatten instances into supervised examples; each conjunctive branch
    becomes its own single-hop example sharing the question tokens."""
    out = []
    for inst in instances:
        ids = vocab.encode(inst.tokens)
        if inst.kind == CONJUNCTIVE:
            for subject, (rel, answer) in zip(inst.subjects, inst.gold_path):
                out.append(EncodedExample(ids, subject, GoldTargets((rel, terminal_id), (answer,))))
        else:
            out.append(EncodedExample(ids, inst.subjects[0],
                                      GoldTargets.from_instance(inst, terminal_id)))
    return out


def qa_epoch(params: ModelParams, examples: list[EncodedExample], config: TrainConfig,
             rng: np.random.Generator,
             states: dict[str, AdamState] | None = None) -> tuple[ModelParams, float]:
    """One shuffled pass over the training questions, mean gradient per batch."""
    if not examples:
        raise TrainError("empty training set")
    if states is None:
        states = _adam_states(params)
    order = rng.permutation(len(examples))
    total = 0.0
    for start in range(0, len(examples), config.batch):
        batch = [examples[i] for i in order[start:start + config.batch]]
        grads = zero_grads(params)
        scale = 1.0 / len(batch)
        for ex in batch:
            trace, loss = forward(params, None, ex.targets, lam=config.lam,
                                  mode=config.mode, hop_cap=config.hop_cap,
                                  token_ids=ex.token_ids, subject=ex.subject)
            total += loss
            backward(params, trace, ex.targets, lam=config.lam, mode=config.mode,
                     token_ids=ex.token_ids, subject=ex.subject,
                     grads=grads, scale=scale)
        for name in PARAM_NAMES:
            adam_step(getattr(params, name), grads[name], states[name], lr=config.lr)
    return params, total / len(examples)


def validation_accuracy(params: ModelParams, instances, vocab: Vocab, hop_cap: int) -> float:
    hits = 0
    for inst in instances:
        if inst.kind == CONJUNCTIVE:
            pred = answer_conjunctive(params, inst, hop_cap, vocab=vocab)
        else:
            pred = answer_question(params, inst, hop_cap, vocab=vocab)
        hits += pred.answer in inst.answer_set
    return hits / len(instances) if instances else 0.0


def train(kb: KnowledgeBase, dataset, config: TrainConfig):
    """Alternate KB-embedding and QA epochs; return the best-validation
    parameters, the history, and the vocabulary.

    `dataset` is a (train_instances, valid_instances) pair.
    """
    train_set, valid_set = dataset
    if not train_set:
        raise TrainError("empty training set")
    vocab = build_vocab(train_set)
    params = init_params(config.d, len(vocab), kb.n_entities, kb.n_relations, config.seed)
    examples = encode_training_set(train_set, vocab, params.terminal_id)

    prng = Prng(config.seed)
    kb_rng = prng.stream("kb-shuffle")
    qa_rng = prng.stream("qa-shuffle")
    states = _adam_states(params)

    history = TrainHistory()
    best = params.copy()
    best_acc = -1.0
    stale = 0
    for rnd in range(1, config.max_rounds + 1):
        t0 = time.perf_counter()
        kb_loss = 0.0
        for _ in range(config.kb_epochs_per_round):
            params, kb_loss = kb_embedding_epoch(params, kb, config, kb_rng, states)
        params, qa_loss = qa_epoch(params, examples, config, qa_rng, states)
        val_acc = validation_accuracy(params, valid_set, vocab, config.hop_cap)
        history.rows.append(HistoryRow(rnd, kb_loss, qa_loss, val_acc,
                                       time.perf_counter() - t0))
        if val_acc > best_acc:
            best_acc = val_acc
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history, vocab


# ---------------------------------------------------------------------------
# checkpoints

@dataclass(frozen=True)
class NameTables:
    vocab: tuple[str, ...]
    entities: tuple[str, ...]
    relations: tuple[str, ...]   # excludes the terminal row


def save_checkpoint(params: ModelParams, names: NameTables, path) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "d": params.d,
        "vocab": list(names.vocab),
        "entities": list(names.entities),
        "relations": list(names.relations),
        "tensors": {k: v.tolist() for k, v in params.tensors().items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_checkpoint(path) -> tuple[ModelParams, NameTables]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise TrainError(f"unsupported checkpoint version {doc.get('version')!r}")
    d = doc["d"]
    names = NameTables(tuple(doc["vocab"]), tuple(doc["entities"]), tuple(doc["relations"]))
    expected = {
        "word_emb": (len(names.vocab), d),
        "ent_emb": (len(names.entities), d),
        "rel_emb": (len(names.relations) + 1, d),
        "M_rq": (d, d),
        "M_rs": (d, d),
        "M_se": (d, d),
    }
    tensors = {}
    for name, shape in expected.items():
        t = np.asarray(doc["tensors"][name], dtype=np.float64)
        if t.shape != shape:
            raise TrainError(f"checkpoint tensor {name} has shape {t.shape}, expected {shape}")
        tensors[name] = t
    return ModelParams(**tensors), names
