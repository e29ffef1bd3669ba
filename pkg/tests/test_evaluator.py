import numpy as np
import pytest

from irn.dataset import (CONJUNCTIVE, PATH_2H, QAInstance, build_vocab,
                         compute_answer_set, generate_path_dataset, load_templates)
from irn.evaluator import (EvalError, EvalReport, accuracy, dataset_fingerprint,
                           evaluate, per_hop_accuracy, run_experiment)
from irn.model import init_params
from irn.numerics import Prng
from irn.synthetic import generate_kb
from irn.trainer import TrainConfig


class StubPrediction:
    def __init__(self, answer, path=()):
        self.answer = answer
        self.path = tuple(path)


def _inst(subject, r1, e1, r2, a, answer_set=None, tokens=("q",)):
    return QAInstance(tokens=tokens, subjects=(subject,),
                      gold_path=(r1, e1, r2, a),
                      answer_set=frozenset(answer_set or {a}), kind=PATH_2H)


def test_accuracy_counts_answer_set_membership():
    insts = [_inst(0, 0, 1, 1, 2, answer_set={2, 5}), _inst(0, 0, 1, 1, 3)]
    preds = [StubPrediction(5), StubPrediction(4)]
    assert accuracy(preds, insts) == 0.5


def test_accuracy_permutation_invariant():
    insts = [_inst(0, 0, 1, 1, i) for i in range(6)]
    preds = [StubPrediction(i if i % 2 else 99) for i in range(6)]
    base = accuracy(preds, insts)
    order = [3, 1, 4, 0, 5, 2]
    assert accuracy([preds[i] for i in order], [insts[i] for i in order]) == base


def test_accuracy_rejects_mismatch_and_empty():
    with pytest.raises(EvalError):
        accuracy([StubPrediction(0)], [])
    with pytest.raises(EvalError):
        accuracy([], [])


def test_per_hop_gold_paths_score_one():
    insts = [_inst(0, 0, 1, 1, 2), _inst(3, 1, 4, 0, 5)]
    preds = [StubPrediction(2, path=((0, 1), (1, 2))),
             StubPrediction(5, path=((1, 4), (0, 5)))]
    cols = per_hop_accuracy(preds, insts)
    assert cols["r1"]["strict"] == 1.0
    assert cols["r2"]["strict"] == 1.0
    assert cols["e1"]["strict"] == 1.0
    assert cols["final"]["strict"] == 1.0


def test_per_hop_final_column_equals_accuracy():
    insts = [_inst(0, 0, 1, 1, 2, answer_set={2, 9}), _inst(0, 1, 1, 0, 3)]
    preds = [StubPrediction(9, path=((0, 1), (1, 9))),
             StubPrediction(7, path=((1, 1), (0, 7)))]
    cols = per_hop_accuracy(preds, insts)
    assert cols["final"]["strict"] == accuracy(preds, insts)


def test_per_hop_branch_tolerance_uses_kb_reachability(family_kb):
    kb = family_kb
    s = kb.entity_id["barack_obama"]
    r1 = kb.relation_id["children"]
    r2 = kb.relation_id["age"]
    malia = kb.entity_id["malia_obama"]
    sasha = kb.entity_id["sasha_obama"]
    gold_a = sorted(compute_answer_set(kb, s, (r1, r2)))[0]
    inst = QAInstance(tokens=("q",), subjects=(s,),
                      gold_path=(r1, malia, r2, gold_a),
                      answer_set=compute_answer_set(kb, s, (r1, r2)), kind=PATH_2H)
    # prediction walks through the sibling: strict miss, tolerant hit
    pred = StubPrediction(gold_a, path=((r1, sasha), (r2, gold_a)))
    cols = per_hop_accuracy([pred], [inst], kb=kb)
    assert cols["e1"]["strict"] == 0.0
    assert cols["e1"]["tolerant"] == 1.0
    # an unreachable intermediate stays a miss under tolerance
    stranger = kb.entity_id["hawaii"] if "hawaii" in kb.entity_id else 0
    pred2 = StubPrediction(gold_a, path=((r1, stranger), (r2, gold_a)))
    cols2 = per_hop_accuracy([pred2], [inst], kb=kb)
    assert cols2["e1"]["tolerant"] == 0.0


def test_per_hop_matches_prefix_enumeration_oracle(family_kb):
    # every (prediction, gold) combination over a tiny space, scored two ways
    kb = family_kb
    s = kb.entity_id["barack_obama"]
    r1 = kb.relation_id["children"]
    r2 = kb.relation_id["age"]
    answers = compute_answer_set(kb, s, (r1, r2))
    gold_e1 = kb.entity_id["malia_obama"]
    gold_a = sorted(answers)[0]
    inst = QAInstance(tokens=("q",), subjects=(s,), gold_path=(r1, gold_e1, r2, gold_a),
                      answer_set=answers, kind=PATH_2H)
    reachable_e1 = compute_answer_set(kb, s, (r1,))
    for e1 in range(kb.n_entities):
        for rel in range(kb.n_relations):
            pred = StubPrediction(gold_a, path=((rel, e1), (r2, gold_a)))
            cols = per_hop_accuracy([pred], [inst], kb=kb)
            assert cols["r1"]["strict"] == float(rel == r1)
            assert cols["e1"]["strict"] == float(e1 == gold_e1)
            assert cols["e1"]["tolerant"] == float(e1 == gold_e1 or e1 in reachable_e1)


def test_per_hop_short_predicted_path_counts_as_miss():
    inst = _inst(0, 0, 1, 1, 2)
    pred = StubPrediction(2, path=((0, 1),))     # halted one hop early
    cols = per_hop_accuracy([pred], [inst])
    assert cols["r2"]["strict"] == 0.0
    assert cols["r1"]["strict"] == 1.0


def test_per_hop_skips_conjunctive_instances():
    conj = QAInstance(tokens=("q",), subjects=(0, 1),
                      gold_path=((0, 2), (1, 2)), answer_set=frozenset({2}),
                      kind=CONJUNCTIVE)
    assert per_hop_accuracy([StubPrediction(2)], [conj]) == {}


def test_report_json_round_trip():
    rep = EvalReport(accuracy=0.75, n_instances=4,
                     per_kind={"path-2H": 0.75},
                     per_hop={"r1": {"strict": 1.0}},
                     metadata={"experiment": "standard"})
    back = EvalReport.from_json(rep.to_json())
    assert back == rep


def test_dataset_fingerprint_sensitive_to_content():
    a = [_inst(0, 0, 1, 1, 2)]
    b = [_inst(0, 0, 1, 1, 3)]
    assert dataset_fingerprint(a) != dataset_fingerprint(b)
    assert dataset_fingerprint(a) == dataset_fingerprint([_inst(0, 0, 1, 1, 2)])


def test_evaluate_produces_consistent_report():
    kb = generate_kb(40, seed=3)
    tpl = load_templates()
    insts = generate_path_dataset(kb, 2, tpl, Prng(7).stream("gen"), 30)
    vocab = build_vocab(insts)
    params = init_params(8, len(vocab), kb.n_entities, kb.n_relations, seed=0)
    rep = evaluate(params, insts, vocab, kb=kb)
    assert rep.n_instances == 30
    assert 0.0 <= rep.accuracy <= 1.0
    assert rep.per_hop["final"]["strict"] == rep.accuracy
    assert set(rep.per_kind) == {"path-2H"}
    assert "dataset_fingerprint" in rep.metadata


def test_run_experiment_rejects_unknown_name():
    kb = generate_kb(40, seed=3)
    with pytest.raises(EvalError, match="unknown experiment"):
        run_experiment("nope", kb, [], TrainConfig())


def test_run_experiment_standard_smoke():
    kb = generate_kb(40, seed=3)
    tpl = load_templates()
    insts = generate_path_dataset(kb, 2, tpl, Prng(7).stream("gen"), 60)
    cfg = TrainConfig(d=8, batch=10, max_rounds=2, patience=2, seed=0)
    report, params, vocab, history = run_experiment("standard", kb, insts, cfg)
    assert report.metadata["experiment"] == "standard"
    assert report.n_instances == 6          # 10% test slice
    assert len(history.rows) == 2
