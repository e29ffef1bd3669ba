"""Triple store: load, index, inverse-close, and ablate a knowledge base.

The on-disk format is UTF-8 TSV, one `subject<TAB>relation<TAB>object`
triple per line. IDs are assigned in first-seen file order so a run is
reproducible from the same file. The store is immutable after
construction; every mutating operation returns a new KnowledgeBase.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

INVERSE_SUFFIX = "^-1"


class KBError(ValueError):
    """Malformed input or out-of-range identifier."""


@dataclass(frozen=True)
class KnowledgeBase:
    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triples: tuple[tuple[int, int, int], ...]
    entity_id: dict[str, int] = field(repr=False)
    relation_id: dict[str, int] = field(repr=False)
    out_index: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    # relation id -> inverse relation id, only present after inverse closure
    inverse_of: dict[int, int] = field(default_factory=dict, repr=False)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def neighbors(self, entity: int, relation: int) -> frozenset[int]:
        """Objects o with (entity, relation, o) in the triple set."""
        if not (0 <= entity < self.n_entities):
            raise KBError(f"entity id {entity} out of range [0, {self.n_entities})")
        if not (0 <= relation < self.n_relations):
            raise KBError(f"relation id {relation} out of range [0, {self.n_relations})")
        return frozenset(self.out_index.get((entity, relation), ()))


def _build(entities, relations, triples, inverse_of=None) -> KnowledgeBase:
    out_index: dict[tuple[int, int], list[int]] = {}
    for s, r, o in triples:
        out_index.setdefault((s, r), []).append(o)
    return KnowledgeBase(
        entities=tuple(entities),
        relations=tuple(relations),
        triples=tuple(triples),
        entity_id={e: i for i, e in enumerate(entities)},
        relation_id={r: i for i, r in enumerate(relations)},
        out_index={k: tuple(sorted(set(v))) for k, v in out_index.items()},
        inverse_of=dict(inverse_of or {}),
    )


def load_triples(path) -> KnowledgeBase:
    """Parse a TSV triple file into an indexed KnowledgeBase.

    Exact duplicate triples are dropped (logged at debug level); a line
    with other than 3 tab-separated fields is a parse error.
    """
    entities: list[str] = []
    relations: list[str] = []
    ent_id: dict[str, int] = {}
    rel_id: dict[str, int] = {}
    triples: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise KBError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            subj, rel, obj = fields
            for name in (subj, obj):
                if name not in ent_id:
                    ent_id[name] = len(entities)
                    entities.append(name)
            if rel not in rel_id:
                rel_id[rel] = len(relations)
                relations.append(rel)
            t = (ent_id[subj], rel_id[rel], ent_id[obj])
            if t in seen:
                log.debug("duplicate triple at %s:%d dropped", path, lineno)
                continue
            seen.add(t)
            triples.append(t)

    if not triples:
        raise KBError("empty knowledge base")
    return _build(entities, relations, triples)


def add_inverse_relations(kb: KnowledgeBase) -> KnowledgeBase:
    """Materialize r^-1 for every relation and close the triple set.

    Idempotent: relations already paired with an inverse are left alone.
    Raises if some r^-1 name already exists as an ordinary relation.
    """
    relations = list(kb.relations)
    rel_id = dict(kb.relation_id)
    inverse_of = dict(kb.inverse_of)

    base = [r for r in range(len(relations)) if r not in inverse_of]
    for r in base:
        inv_name = relations[r] + INVERSE_SUFFIX
        if inv_name in rel_id:
            raise KBError(f"relation name collision: {inv_name!r} already exists")
        rel_id[inv_name] = len(relations)
        relations.append(inv_name)
        inv = rel_id[inv_name]
        inverse_of[r] = inv
        inverse_of[inv] = r

    seen = set(kb.triples)
    triples = list(kb.triples)
    for s, r, o in kb.triples:
        t = (o, inverse_of[r], s)
        if t not in seen:
            seen.add(t)
            triples.append(t)
    return _build(kb.entities, relations, triples, inverse_of)


def neighbors(kb: KnowledgeBase, entity: int, relation: int) -> frozenset[int]:
    return kb.neighbors(entity, relation)


def drop_random_triples(kb: KnowledgeBase, fraction: float, seed: int) -> KnowledgeBase:
    """Remove floor(fraction * |triples|) triples uniformly at random.

    Entity and relation tables are retained unchanged, so embeddings keep
    their rows even when the triples mentioning them are gone.
    """
    if not (0.0 <= fraction <= 1.0):
        raise KBError(f"fraction must lie in [0, 1], got {fraction}")
    n_drop = int(fraction * len(kb.triples))
    if n_drop == 0:
        return kb
    rng = np.random.default_rng(seed)
    drop = set(rng.choice(len(kb.triples), size=n_drop, replace=False).tolist())
    kept = [t for i, t in enumerate(kb.triples) if i not in drop]
    return _build(kb.entities, kb.relations, kept, kb.inverse_of)


def sparsify_kb(kb: KnowledgeBase, seed: int, keep_fraction: float = 1.0,
                backbone=()) -> KnowledgeBase:
    """Thin a dense graph into a question-friendly one.

    Keeps at most one object per (subject, relation), drops the reverse
    half of symmetric pairs, and keeps triples of non-backbone relations
    with probability keep_fraction. Relations named in `backbone` are
    always kept (subject to the one-object rule). Entity and relation
    tables are retained unchanged.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise KBError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    backbone_ids = set()
    for name in backbone:
        if name not in kb.relation_id:
            raise KBError(f"unknown backbone relation {name!r}")
        backbone_ids.add(kb.relation_id[name])
    rng = np.random.default_rng(seed)
    kept: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()
    for (s, r), objs in sorted(kb.out_index.items()):
        o = objs[int(rng.integers(len(objs)))]
        if (o, r, s) in seen:
            continue
        if r not in backbone_ids and rng.random() > keep_fraction:
            continue
        kept.append((s, r, o))
        seen.add((s, r, o))
    return _build(kb.entities, kb.relations, kept, kb.inverse_of)


def restrict_to_triples(kb: KnowledgeBase, triples) -> tuple[KnowledgeBase, dict[int, int]]:
    """Sub-KB containing exactly the given triples.

    Relations keep their ids; the entity table is compacted to the
    entities the triples mention. Returns (sub_kb, old->new entity map).
    """
    triples = sorted(set(triples))
    if not triples:
        raise KBError("cannot restrict to an empty triple set")
    for s, r, o in triples:
        if not (0 <= s < kb.n_entities and 0 <= o < kb.n_entities
                and 0 <= r < kb.n_relations):
            raise KBError(f"triple ({s}, {r}, {o}) out of range")
    keep = sorted({e for s, _, o in triples for e in (s, o)})
    emap = {old: new for new, old in enumerate(keep)}
    entities = tuple(kb.entities[i] for i in keep)
    remapped = sorted((emap[s], r, emap[o]) for s, r, o in triples)
    return _build(entities, kb.relations, remapped, kb.inverse_of), emap


def save_triples(kb: KnowledgeBase, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s, r, o in kb.triples:
            f.write(f"{kb.entities[s]}\t{kb.relations[r]}\t{kb.entities[o]}\n")
