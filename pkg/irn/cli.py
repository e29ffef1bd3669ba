"""Command-line front end for the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 gradient-check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import dataset as ds
from . import kb as kbmod
from .evaluator import DEFAULT_HOLDOUT, evaluate
from .gradcheck import run_gradcheck
from .inference import answer_conjunctive, answer_question, export_gate_heatmap, override_relations, relation_neighbors
from .kb import KBError, add_inverse_relations, drop_random_triples, load_triples
from .model import MODE_IRN, MODE_IRN_WEAK
from .numerics import Prng
from .trainer import NameTables, TrainConfig, TrainError, load_checkpoint, save_checkpoint, train

log = logging.getLogger("irn")

USAGE_ERROR, DATA_ERROR, CHECK_FAILED = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _manifest(**fields) -> None:
    parts = " ".join(f"{k}={v}" for k, v in fields.items())
    print(f"# manifest: {parts}")


def _vocab_from_names(names: NameTables) -> ds.Vocab:
    return ds.Vocab(words=names.vocab, word_id={w: i for i, w in enumerate(names.vocab)})


def _load_kb(path, add_inverses: bool):
    kb = load_triples(path)
    if add_inverses:
        kb = add_inverse_relations(kb)
    return kb


def _instance_from_cli(question: str, subjects, names: NameTables) -> ds.QAInstance:
    tokens = ds.tokenize(question)
    vocab = _vocab_from_names(names)
    unknown = [t for t in tokens if t not in vocab.word_id]
    if unknown:
        print(f"warning: unknown words mapped to UNK: {', '.join(unknown)}", file=sys.stderr)
    ent_id = {e: i for i, e in enumerate(names.entities)}
    subject_ids = []
    for s in subjects:
        if s not in ent_id:
            raise KBError(f"unknown entity {s!r}")
        subject_ids.append(ent_id[s])
    return ds.QAInstance(tokens=tokens, subjects=tuple(subject_ids), gold_path=(),
                         answer_set=frozenset(), kind="adhoc")


def cmd_gen_data(args) -> int:
    rng = Prng(args.seed)
    templates = ds.load_templates(args.templates)
    kb = _load_kb(args.kb, args.add_inverses or args.hops == "conj")
    if args.hops == "conj":
        if args.kb_out:
            raise UsageError("--kb-out applies to path datasets only")
        instances = ds.generate_conjunctive(kb, rng.stream("gen"), args.max or 1000, templates)
    else:
        hops = int(args.hops)
        default_max = 2000 if hops == 2 else 5200
        if args.kb_out:
            # question-scale KB: keep exactly the sampled paths' triples
            kb, instances = ds.generate_pq_dataset(kb, hops, templates, rng.stream("gen"),
                                                   args.max or default_max,
                                                   paraphrases=args.paraphrases)
            kbmod.save_triples(kb, args.kb_out)
        else:
            instances = ds.generate_path_dataset(kb, hops, templates, rng.stream("gen"),
                                                 args.max or default_max)
    ds.write_jsonl(instances, kb, args.out)
    _manifest(cmd="gen-data", seed=args.seed, kb=_sha256(args.kb), out=_sha256(args.out),
              n=len(instances))
    return 0


def cmd_train(args) -> int:
    overrides = {}
    if args.mode:
        overrides["mode"] = {"irn": MODE_IRN, "irn-weak": MODE_IRN_WEAK}[args.mode]
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_rounds is not None:
        overrides["max_rounds"] = args.max_rounds
    config = (TrainConfig.from_file(args.config, **overrides) if args.config
              else TrainConfig(**overrides))

    kb = _load_kb(args.kb, args.add_inverses)
    instances = ds.read_jsonl(args.data, kb)
    train_set, valid_set, test_set = ds.split_dataset(instances, seed=config.seed)

    train_kb = kb
    if args.experiment == "incomplete":
        train_kb = drop_random_triples(kb, 0.5, config.seed)
    elif args.experiment == "unseen":
        train_set, extra = ds.make_unseen_split(train_set, set(DEFAULT_HOLDOUT), kb)
        test_set = extra

    params, history, vocab = train(train_kb, (train_set, valid_set), config)
    names = NameTables(vocab=vocab.words, entities=kb.entities, relations=kb.relations)
    save_checkpoint(params, names, args.out)
    history.to_csv(args.out + ".history.csv")
    test_path = args.out + ".test.jsonl"
    ds.write_jsonl(test_set, kb, test_path)
    best = max((r.val_acc for r in history.rows), default=0.0)
    print(f"trained {len(history.rows)} rounds, best validation accuracy {best:.3f}")
    _manifest(cmd="train", seed=config.seed, kb=_sha256(args.kb), data=_sha256(args.data),
              experiment=args.experiment, mode=config.mode, out=_sha256(args.out))
    return 0


def cmd_eval(args) -> int:
    kb = _load_kb(args.kb, args.add_inverses) if args.kb else None
    if args.repeats > 1:
        if not (args.kb and args.train_data):
            raise UsageError("--repeats needs --kb and --train-data to retrain per seed")
        accs = []
        base = TrainConfig.from_file(args.config) if args.config else TrainConfig()
        instances = ds.read_jsonl(args.train_data, kb)
        for i in range(args.repeats):
            config = TrainConfig(**{**base.__dict__, "seed": base.seed + i})
            tr, va, te = ds.split_dataset(instances, seed=config.seed)
            params, _, vocab = train(kb, (tr, va), config)
            accs.append(evaluate(params, te, vocab, kb=kb, hop_cap=config.hop_cap).accuracy)
        print(f"mean accuracy over {args.repeats} seeds: {np.mean(accs):.4f} "
              f"(individual: {', '.join(f'{a:.4f}' for a in accs)})")
        return 0

    if not args.model or not args.data:
        raise UsageError("eval needs --model and --data")
    params, names = load_checkpoint(args.model)
    vocab = _vocab_from_names(names)
    ref = kb if kb else _kb_from_names(names)
    instances = ds.read_jsonl(args.data, ref)
    report = evaluate(params, instances, vocab, kb=kb,
                      metadata={"model": _sha256(args.model), "data": _sha256(args.data)})
    if not args.per_hop:
        report.per_hop = {}
    with open(args.report, "w", encoding="utf-8") as f:
        f.write(report.to_json())
    print(f"accuracy {report.accuracy:.4f} on {report.n_instances} instances")
    if args.per_hop:
        for col, vals in report.per_hop.items():
            print(f"  {col}: " + ", ".join(f"{k}={v:.4f}" for k, v in vals.items()))
    _manifest(cmd="eval", model=_sha256(args.model), data=_sha256(args.data))
    return 0


def _kb_from_names(names: NameTables):
    """A triple-less shim so datasets can be decoded from checkpoint tables."""
    from .kb import KnowledgeBase
    return KnowledgeBase(
        entities=names.entities, relations=names.relations, triples=(),
        entity_id={e: i for i, e in enumerate(names.entities)},
        relation_id={r: i for i, r in enumerate(names.relations)},
        out_index={},
    )


def cmd_answer(args) -> int:
    params, names = load_checkpoint(args.model)
    inst = _instance_from_cli(args.question, args.subject, names)
    vocab = _vocab_from_names(names)
    if len(inst.subjects) >= 2:
        pred = answer_conjunctive(params, inst, args.hop_cap, vocab=vocab)
    else:
        pred = answer_question(params, inst, args.hop_cap, vocab=vocab)
    rel_names = (*names.relations, "<terminal>")
    steps = " -> ".join(f"{rel_names[r]} -> {names.entities[e]}" for r, e in pred.path if r is not None)
    print(f"answer: {names.entities[pred.answer]}")
    print(f"path: {steps or '(direct)'}  [stop: {pred.stop_reason}]")
    return 0


def cmd_trace(args) -> int:
    params, names = load_checkpoint(args.model)
    inst = _instance_from_cli(args.question, [args.subject], names)
    vocab = _vocab_from_names(names)
    pred = answer_question(params, inst, args.hop_cap, vocab=vocab)
    rel_names = (*names.relations, "<terminal>")
    print(f"{'hop':>3}  {'relation':<24} {'p(rel)':>8}  {'entity':<24} {'p(ent)':>8}")
    for h, g in enumerate(pred.trace.gs):
        r = pred.trace.rel_argmax[h]
        if h < len(pred.trace.ent_argmax):
            e = pred.trace.ent_argmax[h]
            ent, pe = names.entities[e], f"{pred.trace.os[h][e]:.4f}"
        else:
            ent, pe = "-", "-"
        print(f"{h+1:>3}  {rel_names[r]:<24} {g[r]:>8.4f}  {ent:<24} {pe:>8}")
    print(f"answer: {names.entities[pred.answer]}  [stop: {pred.stop_reason}]")
    if args.heatmap:
        export_gate_heatmap(pred.trace, args.heatmap, rel_names)
        print(f"heatmap written to {args.heatmap}")
    return 0


def cmd_override_eval(args) -> int:
    params, names = load_checkpoint(args.model)
    vocab = _vocab_from_names(names)
    kb = _load_kb(args.kb, args.add_inverses) if args.kb else _kb_from_names(names)
    instances = [i for i in ds.read_jsonl(args.data, kb) if i.kind != ds.CONJUNCTIVE]
    if not instances:
        raise TrainError("no path instances to evaluate")
    base_hits = forced_hits = 0
    for inst in instances:
        base = answer_question(params, inst, args.hop_cap, vocab=vocab)
        gold = inst.relations()
        # The gold path's length is known, so the forced run reads its answer
        # right after the last forced hop instead of waiting for the terminal.
        forced = override_relations(params, inst, gold, hop_cap=len(gold), vocab=vocab)
        base_hits += base.answer in inst.answer_set
        forced_hits += forced.answer in inst.answer_set
    n = len(instances)
    base_acc, forced_acc = base_hits / n, forced_hits / n
    print(f"accuracy: {base_acc:.4f}  with gold relations forced: {forced_acc:.4f}  "
          f"delta: {forced_acc - base_acc:+.4f}")
    _manifest(cmd="override-eval", model=_sha256(args.model), data=_sha256(args.data))
    return 0


def cmd_rel_words(args) -> int:
    params, names = load_checkpoint(args.model)
    vocab = _vocab_from_names(names)
    rel_names = (*names.relations, "<terminal>")
    if args.relation not in rel_names:
        raise KBError(f"unknown relation {args.relation!r}")
    rid = rel_names.index(args.relation)
    for word, cos in relation_neighbors(params, vocab, rid, args.k):
        print(f"{word}\t{cos:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    result = run_gradcheck(args.seed)
    status = "OK" if result.ok else "FAILED"
    print(f"gradcheck {status}: worst error/tolerance ratio {result.worst_error:.3g} "
          f"({result.worst_tensor})")
    for inst, tensor, err in result.failures[:10]:
        print(f"  instance {inst}, tensor {tensor}: max abs error {err:.3g}")
    return 0 if result.ok else CHECK_FAILED


def build_parser() -> _Parser:
    p = _Parser(prog="irn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a question dataset from a KB")
    g.add_argument("--kb", required=True)
    g.add_argument("--hops", required=True, choices=["2", "3", "conj"])
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max", type=int)
    g.add_argument("--templates")
    g.add_argument("--kb-out", help="also write the KB shrunk to the sampled paths")
    g.add_argument("--paraphrases", type=int, default=1,
                   help="questions per path in --kb-out mode")
    g.add_argument("--add-inverses", action="store_true")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--kb", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--mode", choices=["irn", "irn-weak"])
    t.add_argument("--experiment", choices=["standard", "incomplete", "unseen"],
                   default="standard")
    t.add_argument("--seed", type=int)
    t.add_argument("--max-rounds", type=int)
    t.add_argument("--add-inverses", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model on a dataset")
    e.add_argument("--model")
    e.add_argument("--data")
    e.add_argument("--report", default="report.json")
    e.add_argument("--kb")
    e.add_argument("--per-hop", action="store_true")
    e.add_argument("--repeats", type=int, default=1)
    e.add_argument("--train-data", help="full dataset for --repeats retraining")
    e.add_argument("--config")
    e.add_argument("--add-inverses", action="store_true")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("answer", help="answer one question")
    a.add_argument("--model", required=True)
    a.add_argument("--question", required=True)
    a.add_argument("--subject", action="append", required=True)
    a.add_argument("--hop-cap", type=int, default=5)
    a.set_defaults(func=cmd_answer)

    tr = sub.add_parser("trace", help="answer with a hop-by-hop table")
    tr.add_argument("--model", required=True)
    tr.add_argument("--question", required=True)
    tr.add_argument("--subject", required=True)
    tr.add_argument("--heatmap")
    tr.add_argument("--hop-cap", type=int, default=5)
    tr.set_defaults(func=cmd_trace)

    o = sub.add_parser("override-eval", help="re-run with gold relations forced")
    o.add_argument("--model", required=True)
    o.add_argument("--data", required=True)
    o.add_argument("--kb")
    o.add_argument("--hop-cap", type=int, default=5)
    o.add_argument("--add-inverses", action="store_true")
    o.set_defaults(func=cmd_override_eval)

    r = sub.add_parser("rel-words", help="closest question words for a relation")
    r.add_argument("--model", required=True)
    r.add_argument("--relation", required=True)
    r.add_argument("-k", type=int, default=5)
    r.set_defaults(func=cmd_rel_words)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("IRN_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (KBError, ds.DatasetError, TrainError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
