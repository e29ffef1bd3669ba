"""The reasoning network: parameters, forward pass, loss, and the
hand-derived backward pass.

One hop scores every relation against the current question and state
vectors, forms a probability-weighted "soft" relation, then folds that
relation into the state (additively) and out of the question
(subtractively). An artificial terminal relation row lets the model halt.
All gradients are derived by hand and checked against central finite
differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CONJUNCTIVE, QAInstance
from .numerics import Prng, cross_entropy_index, normal_embedding, softmax, xavier_uniform

MODE_IRN = "irn"
MODE_IRN_WEAK = "irn-weak"

PARAM_NAMES = ("word_emb", "ent_emb", "rel_emb", "M_rq", "M_rs", "M_se")


class ModelError(ValueError):
    pass


@dataclass
class ModelParams:
    word_emb: np.ndarray   # |V| x d
    ent_emb: np.ndarray    # n_e x d
    rel_emb: np.ndarray    # (n_r + 1) x d, last row = terminal relation
    M_rq: np.ndarray       # d x d, relation -> question space
    M_rs: np.ndarray       # d x d, relation -> state space
    M_se: np.ndarray       # d x d, state -> entity space

    @property
    def d(self) -> int:
        return self.M_rq.shape[0]

    @property
    def n_entities(self) -> int:
        return self.ent_emb.shape[0]

    @property
    def n_relations(self) -> int:
        """Relation count excluding the terminal row."""
        return self.rel_emb.shape[0] - 1

    @property
    def terminal_id(self) -> int:
        return self.rel_emb.shape[0] - 1

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.tensors().items()})

    def check_finite(self) -> None:
        for name, t in self.tensors().items():
            if not np.all(np.isfinite(t)):
                raise ModelError(f"non-finite values in {name}")


def init_params(d: int, vocab_size: int, n_e: int, n_r: int, seed: int) -> ModelParams:
    """Fresh parameters: N(0, 0.1) embeddings, Xavier-uniform projections."""
    rng = Prng(seed).stream("init")
    return ModelParams(
        word_emb=normal_embedding(vocab_size, d, rng),
        ent_emb=normal_embedding(n_e, d, rng),
        rel_emb=normal_embedding(n_r + 1, d, rng),
        M_rq=xavier_uniform(d, d, rng),
        M_rs=xavier_uniform(d, d, rng),
        M_se=xavier_uniform(d, d, rng),
    )


@dataclass
class ReasoningTrace:
    """Everything the forward pass computed, hop by hop.

    qs/ss have one more entry than gs (index 0 holds the initial
    vectors); os/e_projs cover the non-terminal hops only.
    """

    qs: list = field(default_factory=list)
    ss: list = field(default_factory=list)
    gs: list = field(default_factory=list)
    rhats: list = field(default_factory=list)
    rel_argmax: list = field(default_factory=list)
    e_projs: list = field(default_factory=list)
    os: list = field(default_factory=list)
    ent_argmax: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def hops(self) -> int:
        return len(self.gs)


@dataclass(frozen=True)
class GoldTargets:
    """Per-hop supervision: H+1 relation targets (last one terminal) and
    H entity targets (intermediate path entities, then the answer)."""

    relation_targets: tuple   # length H+1, entries may be None
    entity_targets: tuple     # length H

    @classmethod
    def from_instance(cls, inst: QAInstance, terminal_id: int) -> "GoldTargets":
        if inst.kind == CONJUNCTIVE:
            raise ModelError("conjunctive instances are supervised per branch")
        rels = inst.gold_path[0::2]
        ents = inst.gold_path[1::2]
        return cls(relation_targets=(*rels, terminal_id), entity_targets=tuple(ents))

    @property
    def hops(self) -> int:
        return len(self.entity_targets)


def encode_question(params: ModelParams, token_ids) -> np.ndarray:
    """Bag-of-words question vector: sum of word embedding rows."""
    if not len(token_ids):
        raise ModelError("cannot encode an empty question")
    return params.word_emb[list(token_ids)].sum(axis=0)


def reason_step(params: ModelParams, q_prev: np.ndarray, s_prev: np.ndarray):
    """One hop: relation distribution, soft relation, updated q and s.

    Relation scoring uses the pre-update q and s.
    """
    u = params.M_rq.T @ q_prev + params.M_rs.T @ s_prev
    logits = params.rel_emb @ u
    if not np.all(np.isfinite(logits)):
        raise ModelError("non-finite relation logits")
    g = softmax(logits)
    rhat = params.rel_emb.T @ g
    s_next = s_prev + params.M_rs @ rhat
    q_next = q_prev - params.M_rq @ rhat
    return g, rhat, q_next, s_next


def predict_entity(params: ModelParams, s: np.ndarray):
    """Project the state into entity space and score every entity."""
    e_proj = params.M_se @ s
    o = softmax(params.ent_emb @ e_proj)
    return e_proj, o


def forward(params: ModelParams, instance: QAInstance, targets: GoldTargets,
            lam: float = 1.0, mode: str = MODE_IRN, hop_cap: int = 5,
            token_ids=None, vocab=None, subject: int | None = None) -> tuple[ReasoningTrace, float]:
    """Teacher-paced forward pass over H+1 hops; returns (trace, loss).

    H is the gold path length; the extra hop carries the terminal-relation
    target. Entity distributions are computed after each non-terminal hop.
    Pass pre-encoded `token_ids`, or a `vocab` to encode instance.tokens.
    """
    if mode not in (MODE_IRN, MODE_IRN_WEAK):
        raise ModelError(f"unknown mode {mode!r}")
    H = targets.hops
    if hop_cap < H + 1:
        raise ModelError(f"hop_cap {hop_cap} cannot cover {H} gold hops + terminal")
    if mode == MODE_IRN and (any(t is None for t in targets.relation_targets)
                             or any(t is None for t in targets.entity_targets)):
        raise ModelError("full per-hop targets are required in irn mode")
    if targets.entity_targets[-1] is None:
        raise ModelError("final entity target is required")

    if token_ids is None:
        if vocab is None:
            raise ModelError("forward needs token_ids or a vocab to encode with")
        token_ids = vocab.encode(instance.tokens)
    if subject is None:
        subject = instance.subjects[0]
    q = encode_question(params, token_ids)
    s = params.ent_emb[subject].copy()

    trace = ReasoningTrace()
    trace.qs.append(q)
    trace.ss.append(s)
    loss = 0.0
    for h in range(1, H + 2):
        g, rhat, q, s = reason_step(params, trace.qs[-1], trace.ss[-1])
        trace.gs.append(g)
        trace.rhats.append(rhat)
        trace.rel_argmax.append(int(np.argmax(g)))
        trace.qs.append(q)
        trace.ss.append(s)
        if mode == MODE_IRN:
            loss += cross_entropy_index(targets.relation_targets[h - 1], g)
        if h <= H:
            e_proj, o = predict_entity(params, s)
            trace.e_projs.append(e_proj)
            trace.os.append(o)
            trace.ent_argmax.append(int(np.argmax(o)))
            if mode == MODE_IRN or h == H:
                loss += lam * cross_entropy_index(targets.entity_targets[h - 1], o)
    trace.stop_reason = "terminal"
    return trace, loss


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


def backward(params: ModelParams, trace: ReasoningTrace, targets: GoldTargets,
             lam: float = 1.0, mode: str = MODE_IRN, token_ids=None,
             subject: int | None = None, grads: dict[str, np.ndarray] | None = None,
             scale: float = 1.0) -> dict[str, np.ndarray]:
    """Analytic gradients of the forward loss for all six tensors.

    Accumulates `scale` times the gradient into `grads` (allocated if
    omitted). The recurrence is walked in reverse: entity losses feed the
    state, the soft relation feeds both the q and s updates, and the
    relation logits feed back into the pre-update q and s.
    """
    H = targets.hops
    if trace.hops != H + 1 or len(trace.os) != H:
        raise ModelError("trace does not match targets")
    if grads is None:
        grads = zero_grads(params)

    n_rel = params.rel_emb.shape[0]
    dq = np.zeros(params.d)
    ds = np.zeros(params.d)
    for h in range(H + 1, 0, -1):
        i = h - 1
        q_prev, s_prev = trace.qs[i], trace.ss[i]
        g, rhat = trace.gs[i], trace.rhats[i]

        if h <= H and (mode == MODE_IRN or h == H):
            o, p = trace.os[i], trace.e_projs[i]
            # d(CE)/d(entity logits) = o - onehot(target)
            dlo = (lam * scale) * o
            dlo[targets.entity_targets[i]] -= lam * scale
            grads["ent_emb"] += np.outer(dlo, p)
            dp = params.ent_emb.T @ dlo
            grads["M_se"] += np.outer(dp, trace.ss[i + 1])
            ds = ds + params.M_se.T @ dp

        # s_h = s_prev + M_rs rhat ; q_h = q_prev - M_rq rhat
        drhat = params.M_rs.T @ ds - params.M_rq.T @ dq
        grads["M_rs"] += np.outer(ds, rhat)
        grads["M_rq"] -= np.outer(dq, rhat)

        # rhat = rel_emb^T g
        dg = params.rel_emb @ drhat
        grads["rel_emb"] += np.outer(g, drhat)

        # softmax jacobian, plus the relation cross-entropy at this hop
        dl = g * (dg - g @ dg)
        if mode == MODE_IRN:
            dl = dl + scale * g
            dl[targets.relation_targets[i]] -= scale

        # logits = rel_emb (M_rq^T q_prev + M_rs^T s_prev)
        u = params.M_rq.T @ q_prev + params.M_rs.T @ s_prev
        grads["rel_emb"] += np.outer(dl, u)
        rtdl = params.rel_emb.T @ dl
        grads["M_rq"] += np.outer(q_prev, rtdl)
        grads["M_rs"] += np.outer(s_prev, rtdl)
        dq = dq + params.M_rq @ rtdl
        ds = ds + params.M_rs @ rtdl

    if token_ids is None or subject is None:
        raise ModelError("backward needs token_ids and subject for the input gradients")
    np.add.at(grads["word_emb"], list(token_ids), dq)
    grads["ent_emb"][subject] += ds
    return grads
