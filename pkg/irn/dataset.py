"""Dataset construction: answer-path extraction, templated question
generation with relation synonyms, answer sets, splits, and JSONL I/O.

Instances are stored on disk as JSON Lines with *names* (not IDs) for
portability; in memory they carry KB-relative integer IDs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .kb import INVERSE_SUFFIX, KBError, KnowledgeBase

PATH_2H = "path-2H"
PATH_3H = "path-3H"
CONJUNCTIVE = "conjunctive"

UNK = "<unk>"
UNK_ID = 0


class DatasetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tokenization

_TRAIL_PUNCT = re.compile(r"^(.*?)([?.!,]+)$")


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, split on whitespace, detach trailing punctuation and 's.

    Entity names keep underscores, so a subject mention stays one token.
    """
    out: list[str] = []
    for raw in text.lower().split():
        pending: list[str] = []
        while True:
            m = _TRAIL_PUNCT.match(raw)
            if m and m.group(1):
                pending.append(m.group(2))
                raw = m.group(1)
                continue
            if raw.endswith("'s") and len(raw) > 2:
                pending.append("'s")
                raw = raw[:-2]
                continue
            break
        if raw:
            out.append(raw)
        out.extend(reversed(pending))
    return tuple(out)


# ---------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class QAInstance:
    tokens: tuple[str, ...]
    subjects: tuple[int, ...]
    # path kinds: flat (r1, e1, r2, ..., a); conjunctive: one (r, a) per subject
    gold_path: tuple
    answer_set: frozenset[int]
    kind: str

    @property
    def hops(self) -> int:
        if self.kind == CONJUNCTIVE:
            return 1
        return len(self.gold_path) // 2

    def relations(self) -> tuple[int, ...]:
        if self.kind == CONJUNCTIVE:
            return tuple(branch[0] for branch in self.gold_path)
        return self.gold_path[0::2]

    @property
    def answer(self) -> int:
        if self.kind == CONJUNCTIVE:
            return self.gold_path[0][-1]
        return self.gold_path[-1]


# ---------------------------------------------------------------------------
# templates

@dataclass(frozen=True)
class TemplateSet:
    # (hops, final_relation_name or "universal") -> list of template strings
    templates: dict[tuple[str, str], tuple[str, ...]]
    # relation name -> synonyms (the name itself is always a fallback)
    synonyms: dict[str, tuple[str, ...]]

    def family(self, hops: str, final_relation: str) -> tuple[str, ...]:
        fam = self.templates.get((hops, final_relation))
        if fam:
            return fam
        fam = self.templates.get((hops, "universal"))
        if not fam:
            raise DatasetError(f"no template for pattern hops={hops} final={final_relation}")
        return fam

    def synonym(self, relation: str, rng: np.random.Generator) -> str:
        base = relation.removesuffix(INVERSE_SUFFIX)
        options = self.synonyms.get(base, (base,))
        return options[int(rng.integers(len(options)))]


_SLOT = re.compile(r"\$(e\d?|r\d)")


def _parse_template_line(kind: str, key: str, text: str) -> str:
    slots = _SLOT.findall(text)
    if len(slots) != len(set(slots)):
        raise DatasetError(f"template references a slot twice: {text!r}")
    return text


def load_templates(path=None) -> TemplateSet:
    """Parse the template/synonym file (defaults to the packaged one)."""
    if path is None:
        content = resources.files("irn.data").joinpath("templates.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            content = f.read()

    templates: dict[tuple[str, str], list[str]] = {}
    synonyms: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, body = line.partition(":")
        body = body.strip()
        parts = head.split()
        if parts[0] == "synonyms" and len(parts) == 2:
            synonyms[parts[1]] = tuple(s.strip() for s in body.split(",") if s.strip())
        elif parts[0] == "template" and len(parts) == 3:
            kind, key = parts[1], parts[2]
            if kind not in ("2", "3", "conj"):
                raise DatasetError(f"templates line {lineno}: unknown family {kind!r}")
            templates.setdefault((kind, key), []).append(_parse_template_line(kind, key, body))
        else:
            raise DatasetError(f"templates line {lineno}: cannot parse {line!r}")
    return TemplateSet(
        templates={k: tuple(v) for k, v in templates.items()},
        synonyms=synonyms,
    )


# ---------------------------------------------------------------------------
# path extraction and question generation

def extract_paths(kb: KnowledgeBase, hops: int, rng: np.random.Generator,
                  max_count: int) -> list[tuple[int, ...]]:
    """All answer paths [e_s, r1, e1, ..., a] of the given hop count.

    Exhaustive when the total fits in max_count, otherwise a uniform
    subsample. Paths whose answer equals their own subject are skipped.
    """
    if hops not in (2, 3):
        raise DatasetError(f"hops must be 2 or 3, got {hops}")
    adj: dict[int, list[tuple[int, int]]] = {}
    for (s, r), objs in kb.out_index.items():
        adj.setdefault(s, []).extend((r, o) for o in objs)

    paths: list[tuple[int, ...]] = []
    for s in range(kb.n_entities):
        for r1, e1 in adj.get(s, ()):
            for r2, e2 in adj.get(e1, ()):
                if hops == 2:
                    if e2 != s:
                        paths.append((s, r1, e1, r2, e2))
                    continue
                for r3, e3 in adj.get(e2, ()):
                    if e3 != s:
                        paths.append((s, r1, e1, r2, e2, r3, e3))
    if len(paths) > max_count:
        idx = rng.choice(len(paths), size=max_count, replace=False)
        paths = [paths[i] for i in sorted(idx.tolist())]
    return paths


def compute_answer_set(kb: KnowledgeBase, subject: int,
                       relation_seq) -> frozenset[int]:
    """Breadth-first composition of the relation sequence from the subject."""
    if not len(relation_seq):
        raise DatasetError("empty relation sequence")
    frontier = {subject}
    for r in relation_seq:
        frontier = {o for e in frontier for o in kb.neighbors(e, r)}
        if not frontier:
            return frozenset()
    return frozenset(frontier)


def _fill(template: str, slots: dict[str, str]) -> str:
    def sub(m):
        name = m.group(1)
        if name not in slots:
            raise DatasetError(f"template slot ${name} has no value: {template!r}")
        return slots[name]

    return _SLOT.sub(sub, template)


def generate_question(kb: KnowledgeBase, path: tuple[int, ...],
                      templates: TemplateSet, rng: np.random.Generator) -> QAInstance:
    """Instantiate one templated question for an answer path."""
    subject = path[0]
    relations = path[1::2]
    hops = len(relations)
    final_name = kb.relations[relations[-1]]
    family = templates.family(str(hops), final_name)
    template = family[int(rng.integers(len(family)))]

    slots = {"e": kb.entities[subject].lower()}
    for i, r in enumerate(relations, start=1):
        slots[f"r{i}"] = templates.synonym(kb.relations[r], rng)
    text = _fill(template, slots)

    return QAInstance(
        tokens=tokenize(text),
        subjects=(subject,),
        gold_path=tuple(path[1:]),
        answer_set=compute_answer_set(kb, subject, relations),
        kind=PATH_2H if hops == 2 else PATH_3H,
    )


def generate_path_dataset(kb: KnowledgeBase, hops: int, templates: TemplateSet,
                          rng: np.random.Generator, max_count: int) -> list[QAInstance]:
    paths = extract_paths(kb, hops, rng, max_count)
    return [generate_question(kb, p, templates, rng) for p in paths]


def generate_pq_dataset(kb: KnowledgeBase, hops: int, templates: TemplateSet,
                        rng: np.random.Generator, max_count: int,
                        paraphrases: int = 1) -> tuple[KnowledgeBase, list[QAInstance]]:
    """Path dataset plus the KB shrunk to exactly the sampled paths.

    Sampling paths from a large graph and keeping only their triples
    yields a sparse question-scale KB in which every question's path is
    fully supported; answer sets are computed against the shrunken KB.
    Each path is verbalized up to `paraphrases` times with distinct
    wordings, so splits made at question level share paths across
    train/valid/test the way path-derived QA benchmarks are built.
    Returns (sub_kb, instances) with instance ids in sub_kb's tables.
    """
    from .kb import restrict_to_triples

    if paraphrases < 1:
        raise DatasetError("paraphrases must be >= 1")
    paths = extract_paths(kb, hops, rng, max_count)
    if not paths:
        raise DatasetError("no paths of the requested hop count")
    support = set()
    for p in paths:
        nodes, rels = p[0::2], p[1::2]
        for i, r in enumerate(rels):
            support.add((nodes[i], r, nodes[i + 1]))
    sub_kb, emap = restrict_to_triples(kb, support)
    instances = []
    for p in paths:
        q = list(p)
        q[0::2] = [emap[e] for e in p[0::2]]
        q = tuple(q)
        seen: set = set()
        tries = 0
        while len(seen) < paraphrases and tries < 4 * paraphrases:
            inst = generate_question(sub_kb, q, templates, rng)
            tries += 1
            if inst.tokens not in seen:
                seen.add(inst.tokens)
                instances.append(inst)
    return sub_kb, instances


def generate_conjunctive(kb: KnowledgeBase, rng: np.random.Generator,
                         max_count: int, templates: TemplateSet | None = None) -> list[QAInstance]:
    """Questions whose answer is the intersection of two single-hop queries.

    Requires an inverse-closed KB: the two subjects reach the answer via
    inverse relations, while the surface form speaks in base relations.
    """
    if not kb.inverse_of:
        raise KBError("conjunctive generation requires an inverse-closed KB")
    if templates is None:
        templates = load_templates()

    base = {r for r in range(kb.n_relations)
            if not kb.relations[r].endswith(INVERSE_SUFFIX)}
    # candidate constraint pairs keyed by ((r1, o1), (r2, o2)), r1 != r2
    candidates: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    for a in range(kb.n_entities):
        edges = [(r, o) for r in base for o in kb.neighbors(a, r)]
        for i, (r1, o1) in enumerate(edges):
            for r2, o2 in edges[i + 1:]:
                if r1 != r2:
                    candidates.add(tuple(sorted(((r1, o1), (r2, o2)))))

    ordered = sorted(candidates)
    if len(ordered) > max_count:
        idx = rng.choice(len(ordered), size=max_count, replace=False)
        ordered = [ordered[i] for i in sorted(idx.tolist())]

    out: list[QAInstance] = []
    fam = templates.family("conj", "universal")
    for (r1, o1), (r2, o2) in ordered:
        inv1, inv2 = kb.inverse_of[r1], kb.inverse_of[r2]
        answers = kb.neighbors(o1, inv1) & kb.neighbors(o2, inv2)
        if not answers:
            continue
        answer = sorted(answers)[int(rng.integers(len(answers)))]
        template = fam[int(rng.integers(len(fam)))]
        text = _fill(template, {
            "e1": kb.entities[o1].lower(),
            "e2": kb.entities[o2].lower(),
            "r1": templates.synonym(kb.relations[r1], rng),
            "r2": templates.synonym(kb.relations[r2], rng),
        })
        out.append(QAInstance(
            tokens=tokenize(text),
            subjects=(o1, o2),
            gold_path=((inv1, answer), (inv2, answer)),
            answer_set=frozenset(answers),
            kind=CONJUNCTIVE,
        ))
    return out


# ---------------------------------------------------------------------------
# splits

def split_dataset(instances, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Deterministic shuffled split into (train, valid, test)."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"split ratios must sum to 1, got {ratios}")
    n = len(instances)
    if n < 10:
        raise DatasetError(f"refusing degenerate split of {n} instances")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [instances[i] for i in order]
    n_train = int(ratios[0] * n)
    n_valid = int(ratios[1] * n)
    return (shuffled[:n_train],
            shuffled[n_train:n_train + n_valid],
            shuffled[n_train + n_valid:])


def make_unseen_split(instances, holdout_relations: set[str], kb: KnowledgeBase):
    """Remove instances mentioning a held-out relation; return (train, test_extra)."""
    if not holdout_relations:
        raise DatasetError("holdout relation set is empty")
    ids = set()
    for name in holdout_relations:
        if name not in kb.relation_id:
            raise DatasetError(f"holdout relation {name!r} not in KB")
        ids.add(kb.relation_id[name])
    train, extra = [], []
    for inst in instances:
        (extra if set(inst.relations()) & ids else train).append(inst)
    return train, extra


# ---------------------------------------------------------------------------
# vocabulary

@dataclass(frozen=True)
class Vocab:
    words: tuple[str, ...]          # index 0 is UNK
    word_id: dict[str, int]

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, tokens) -> tuple[int, ...]:
        return tuple(self.word_id.get(t, UNK_ID) for t in tokens)


def build_vocab(train_instances) -> Vocab:
    words = [UNK]
    seen = {UNK}
    for inst in train_instances:
        for t in inst.tokens:
            if t not in seen:
                seen.add(t)
                words.append(t)
    return Vocab(words=tuple(words), word_id={w: i for i, w in enumerate(words)})


# ---------------------------------------------------------------------------
# JSONL I/O (names, not IDs)

def instance_to_dict(inst: QAInstance, kb: KnowledgeBase) -> dict:
    if inst.kind == CONJUNCTIVE:
        path = [[kb.relations[r], kb.entities[a]] for r, a in inst.gold_path]
    else:
        path = [kb.relations[x] if i % 2 == 0 else kb.entities[x]
                for i, x in enumerate(inst.gold_path)]
    return {
        "question": " ".join(inst.tokens),
        "subjects": [kb.entities[s] for s in inst.subjects],
        "path": path,
        "answers": sorted(kb.entities[a] for a in inst.answer_set),
        "kind": inst.kind,
    }


def instance_from_dict(d: dict, kb: KnowledgeBase) -> QAInstance:
    try:
        subjects = tuple(kb.entity_id[s] for s in d["subjects"])
        answers = frozenset(kb.entity_id[a] for a in d["answers"])
        if d["kind"] == CONJUNCTIVE:
            path = tuple((kb.relation_id[r], kb.entity_id[a]) for r, a in d["path"])
        else:
            path = tuple(kb.relation_id[x] if i % 2 == 0 else kb.entity_id[x]
                         for i, x in enumerate(d["path"]))
    except KeyError as e:
        raise DatasetError(f"name not present in KB: {e}") from e
    return QAInstance(
        tokens=tokenize(d["question"]),
        subjects=subjects,
        gold_path=path,
        answer_set=answers,
        kind=d["kind"],
    )


def write_jsonl(instances, kb: KnowledgeBase, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(instance_to_dict(inst, kb)) + "\n")


def read_jsonl(path, kb: KnowledgeBase) -> list[QAInstance]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                out.append(instance_from_dict(json.loads(line), kb))
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {e}") from e
    return out
