"""Traceable inference: terminal-halted decoding, conjunctive assembly,
manual relation override, and relation-to-word interpretation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import ModelError, ModelParams, ReasoningTrace, encode_question, predict_entity, reason_step

STOP_TERMINAL = "terminal"
STOP_HOP_CAP = "hop-cap"


@dataclass
class Prediction:
    answer: int
    trace: ReasoningTrace
    path: tuple[tuple[int, int], ...]   # (relation, entity) per content hop
    stop_reason: str
    degenerate: bool = False            # terminal won at hop 1
    answer_dist: np.ndarray | None = None
    branches: tuple = ()                # per-subject predictions (conjunctive)


def _decode(params: ModelParams, token_ids, subject: int, hop_cap: int,
            forced: dict[int, int] | None = None) -> Prediction:
    """Run reasoning until the terminal relation wins the argmax (or the
    hop cap is reached). `forced` maps 1-based hop numbers to relation IDs;
    at a forced hop the gate mass of the model's top choice is swapped with
    the forced relation's mass, so the soft mixture is steered toward the
    forced relation while staying on the distribution the model learned
    to reason with (a no-op when the model already agrees)."""
    forced = forced or {}
    for rel in forced.values():
        if not (0 <= rel < params.rel_emb.shape[0]):
            raise ModelError(f"forced relation id {rel} out of range")

    trace = ReasoningTrace()
    trace.qs.append(encode_question(params, token_ids))
    trace.ss.append(params.ent_emb[subject].copy())

    terminal = params.terminal_id
    stop_reason = STOP_HOP_CAP
    degenerate = False
    for h in range(1, hop_cap + 1):
        g, rhat, q, s = reason_step(params, trace.qs[-1], trace.ss[-1])
        top = int(np.argmax(g))
        if h in forced:
            want = forced[h]
            if top != want:
                g = g.copy()
                g[want], g[top] = g[top], g[want]
                rhat = params.rel_emb.T @ g
                s = trace.ss[-1] + params.M_rs @ rhat
                q = trace.qs[-1] - params.M_rq @ rhat
            top = want
        trace.gs.append(g)
        trace.rhats.append(rhat)
        trace.rel_argmax.append(top)
        trace.qs.append(q)
        trace.ss.append(s)
        if top == terminal and h not in forced:
            stop_reason = STOP_TERMINAL
            if not trace.os:   # terminal at hop 1: answer read from the initial state
                degenerate = True
                e_proj, o = predict_entity(params, trace.ss[0])
                trace.e_projs.append(e_proj)
                trace.os.append(o)
                trace.ent_argmax.append(int(np.argmax(o)))
            break
        e_proj, o = predict_entity(params, s)
        trace.e_projs.append(e_proj)
        trace.os.append(o)
        trace.ent_argmax.append(int(np.argmax(o)))
    trace.stop_reason = stop_reason

    content = [r for r in trace.rel_argmax if r != terminal] if stop_reason == STOP_TERMINAL else trace.rel_argmax
    path = tuple(zip(content, trace.ent_argmax)) if not degenerate else ()
    return Prediction(
        answer=trace.ent_argmax[-1],
        trace=trace,
        path=path,
        stop_reason=stop_reason,
        degenerate=degenerate,
        answer_dist=trace.os[-1],
    )


def answer_question(params: ModelParams, instance, hop_cap: int = 5,
                    vocab=None, token_ids=None) -> Prediction:
    """Answer a single-subject question with a full reasoning trace."""
    if len(instance.subjects) != 1:
        raise ModelError("answer_question expects exactly one subject")
    if token_ids is None:
        token_ids = vocab.encode(instance.tokens)
    return _decode(params, token_ids, instance.subjects[0], hop_cap)


def override_relations(params: ModelParams, instance, forced_relations,
                       hop_cap: int = 5, vocab=None, token_ids=None) -> Prediction:
    """Decode with the given relations forced at hops 1..len(forced).

    Entity predictions still come from the model; an empty forcing list is
    identical to answer_question.
    """
    if token_ids is None:
        token_ids = vocab.encode(instance.tokens)
    forced = {h + 1: r for h, r in enumerate(forced_relations)}
    return _decode(params, token_ids, instance.subjects[0], hop_cap, forced)


def combine_branches(dists) -> tuple[int, np.ndarray]:
    """Sum per-branch entity distributions and take the argmax."""
    if not len(dists):
        raise ModelError("no branch distributions to combine")
    combined = np.sum(dists, axis=0)
    return int(np.argmax(combined)), combined


def answer_conjunctive(params: ModelParams, instance, hop_cap: int = 5,
                       vocab=None, token_ids=None) -> Prediction:
    """Run one reasoning branch per subject with shared parameters and
    answer with the argmax of the summed final entity distributions."""
    if len(instance.subjects) < 2:
        raise ModelError("conjunctive answering needs at least 2 subjects")
    if token_ids is None:
        token_ids = vocab.encode(instance.tokens)
    branches = tuple(_decode(params, token_ids, s, hop_cap) for s in instance.subjects)
    answer, combined = combine_branches([b.answer_dist for b in branches])
    return Prediction(
        answer=answer,
        trace=branches[0].trace,
        path=tuple((b.path[0] if b.path else None) for b in branches),
        stop_reason=branches[0].stop_reason,
        answer_dist=combined,
        branches=branches,
    )


def relation_neighbors(params: ModelParams, vocab, relation: int, k: int):
    """Vocabulary words closest (cosine) to the relation's question-space image."""
    if k < 0:
        raise ModelError("k must be nonnegative")
    if k == 0:
        return []
    rq = params.M_rq @ params.rel_emb[relation]
    norms = np.linalg.norm(params.word_emb, axis=1) * np.linalg.norm(rq)
    cos = (params.word_emb @ rq) / np.where(norms == 0, 1.0, norms)
    order = np.argsort(-cos)[:k]
    return [(vocab.words[i], float(cos[i])) for i in order]


def export_gate_heatmap(trace: ReasoningTrace, path, relation_names) -> None:
    """Write the per-hop relation distributions as CSV (rows = hops)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["hop", *relation_names])
        for h, g in enumerate(trace.gs, start=1):
            w.writerow([h, *[repr(float(x)) for x in g]])
