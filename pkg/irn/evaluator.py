"""Metrics and the experiment harness: answer-set accuracy, per-hop path
accuracy, and the standard / incomplete-KB / unseen-relation runs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .dataset import CONJUNCTIVE, compute_answer_set, split_dataset, make_unseen_split
from .inference import answer_conjunctive, answer_question
from .kb import KnowledgeBase, drop_random_triples

DEFAULT_HOLDOUT = ("cause_of_death", "gender", "profession")

EXPERIMENTS = ("standard", "incomplete", "unseen")


class EvalError(ValueError):
    pass


@dataclass
class EvalReport:
    accuracy: float
    n_instances: int
    per_kind: dict[str, float] = field(default_factory=dict)
    per_hop: dict[str, dict[str, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def accuracy(predictions, instances) -> float:
    """Fraction of predictions whose answer falls in the gold answer set."""
    if len(predictions) != len(instances):
        raise EvalError("prediction/instance count mismatch")
    if not instances:
        raise EvalError("nothing to evaluate")
    hits = sum(1 for p, inst in zip(predictions, instances) if p.answer in inst.answer_set)
    return hits / len(instances)


def per_hop_accuracy(predictions, instances, kb: KnowledgeBase | None = None) -> dict:
    """Position-wise accuracy along the answer path.

    Strict columns score exact match against the single labeled path; when
    a KB is given, entity columns additionally get a branch-tolerant score
    accepting any entity reachable via the gold relation prefix. The final
    column uses answer-set membership, identical to accuracy().
    """
    pairs = [(p, i) for p, i in zip(predictions, instances) if i.kind != CONJUNCTIVE]
    if not pairs:
        return {}
    predictions = [p for p, _ in pairs]
    instances = [i for _, i in pairs]
    hops = max(inst.hops for inst in instances)
    cols: dict[str, dict[str, float]] = {}
    counts = {f"r{i}": 0 for i in range(1, hops + 1)}
    counts.update({f"e{i}": 0 for i in range(1, hops)})
    tolerant = dict(counts)
    final_hits = 0
    n = len(instances)
    for pred, inst in zip(predictions, instances):
        gold_rels = inst.relations()
        gold_ents = inst.gold_path[1::2]
        for i in range(inst.hops):
            pr = pred.path[i] if i < len(pred.path) else None
            if pr is not None and pr[0] == gold_rels[i]:
                counts[f"r{i+1}"] += 1
            if i < inst.hops - 1 and pr is not None:
                if pr[1] == gold_ents[i]:
                    tolerant_hit = True
                    counts[f"e{i+1}"] += 1
                elif kb is not None:
                    reachable = compute_answer_set(kb, inst.subjects[0], gold_rels[: i + 1])
                    tolerant_hit = pr[1] in reachable
                else:
                    tolerant_hit = False
                if tolerant_hit:
                    tolerant[f"e{i+1}"] += 1
        if pred.answer in inst.answer_set:
            final_hits += 1
    for key, hits in counts.items():
        cols[key] = {"strict": hits / n}
        if key.startswith("e"):
            cols[key]["tolerant"] = tolerant[key] / n
    cols["final"] = {"strict": final_hits / n}
    return cols


def predict_all(params, instances, vocab, hop_cap: int = 5):
    preds = []
    for inst in instances:
        if inst.kind == CONJUNCTIVE:
            preds.append(answer_conjunctive(params, inst, hop_cap, vocab=vocab))
        else:
            preds.append(answer_question(params, inst, hop_cap, vocab=vocab))
    return preds


def dataset_fingerprint(instances) -> str:
    h = hashlib.sha256()
    for inst in instances:
        h.update(repr((inst.tokens, inst.subjects, inst.gold_path,
                       sorted(inst.answer_set), inst.kind)).encode())
    return h.hexdigest()[:16]


def evaluate(params, instances, vocab, kb=None, hop_cap: int = 5,
             metadata: dict | None = None) -> EvalReport:
    preds = predict_all(params, instances, vocab, hop_cap)
    kinds = {inst.kind for inst in instances}
    per_kind = {}
    for kind in sorted(kinds):
        pairs = [(p, i) for p, i in zip(preds, instances) if i.kind == kind]
        per_kind[kind] = accuracy([p for p, _ in pairs], [i for _, i in pairs])
    return EvalReport(
        accuracy=accuracy(preds, instances),
        n_instances=len(instances),
        per_kind=per_kind,
        per_hop=per_hop_accuracy(preds, instances, kb),
        metadata={**(metadata or {}), "dataset_fingerprint": dataset_fingerprint(instances)},
    )


def run_experiment(name: str, kb: KnowledgeBase, instances, config):
    """Train under one of the standard evaluation configurations and
    report test accuracy. Returns (EvalReport, params, vocab, history)."""
    from .trainer import train  # local import to avoid a cycle

    if name not in EXPERIMENTS:
        raise EvalError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")

    train_set, valid_set, test_set = split_dataset(instances, seed=config.seed)
    train_kb = kb
    if name == "incomplete":
        train_kb = drop_random_triples(kb, 0.5, config.seed)
    if name == "unseen":
        train_set, extra = make_unseen_split(train_set, set(DEFAULT_HOLDOUT), kb)
        test_set = extra

    params, history, vocab = train(train_kb, (train_set, valid_set), config)
    report = evaluate(params, test_set, vocab, kb=kb, hop_cap=config.hop_cap,
                      metadata={"experiment": name, "seed": config.seed,
                                "config": str(config)})
    return report, params, vocab, history
