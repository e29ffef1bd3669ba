import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irn.kb import (KBError, add_inverse_relations, drop_random_triples,
                    load_triples, neighbors, restrict_to_triples, save_triples,
                    sparsify_kb)
from irn.synthetic import generate_biography_triples

from conftest import random_kb_lines


def test_load_dedups_exact_duplicates(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("a\tr1\tb\nb\tr2\tc\na\tr1\tb\n")
    kb = load_triples(p)
    assert kb.n_entities == 3
    assert kb.n_relations == 2
    assert len(kb.triples) == 2


def test_load_rejects_bad_arity(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("x\ty\n")
    with pytest.raises(KBError, match="1"):
        load_triples(p)


def test_load_rejects_empty(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("")
    with pytest.raises(KBError, match="empty"):
        load_triples(p)


def test_first_seen_id_order(chain_kb):
    assert chain_kb.entities == ("a", "b", "c")
    assert chain_kb.relations == ("r1", "r2")


def test_biography_kb_reaches_benchmark_scale(tmp_path):
    # 13 relations and >60,000 triples at full size
    triples = generate_biography_triples(4800, seed=0)
    p = tmp_path / "big.tsv"
    p.write_text("".join(f"{s}\t{r}\t{o}\n" for s, r, o in triples))
    kb = load_triples(p)
    assert kb.n_relations == 13
    assert len(kb.triples) > 60_000


def test_inverse_closure_produces_reverse_edge(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("marco_reus\tplays_in_club\tborussia_dortmund\n")
    kb = add_inverse_relations(load_triples(p))
    bd = kb.entity_id["borussia_dortmund"]
    inv = kb.relation_id["plays_in_club^-1"]
    assert kb.entity_id["marco_reus"] in kb.neighbors(bd, inv)


def test_inverse_closure_idempotent(random_kb):
    once = add_inverse_relations(random_kb)
    twice = add_inverse_relations(once)
    assert len(twice.triples) == len(once.triples)
    assert twice.relations == once.relations


def test_inverse_closure_counts(chain_kb):
    closed = add_inverse_relations(chain_kb)
    assert len(closed.triples) == 4
    assert closed.n_relations == 2 * chain_kb.n_relations


def test_inverse_closure_is_involution(random_kb):
    closed = add_inverse_relations(random_kb)
    original = {t for t in closed.triples if t[1] < random_kb.n_relations}
    assert original == set(random_kb.triples)


def test_inverse_name_collision(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("a\tr\tb\nb\tr^-1\tc\n")
    with pytest.raises(KBError, match="collision"):
        add_inverse_relations(load_triples(p))


def test_neighbors_children(family_kb):
    obama = family_kb.entity_id["barack_obama"]
    children = family_kb.relation_id["children"]
    got = {family_kb.entities[e] for e in family_kb.neighbors(obama, children)}
    assert got == {"malia_obama", "sasha_obama"}


def test_neighbors_absent_edge(family_kb):
    age = family_kb.relation_id["age"]
    assert family_kb.neighbors(family_kb.entity_id["18"], age) == frozenset()


def test_neighbors_out_of_bounds(family_kb):
    with pytest.raises(KBError):
        family_kb.neighbors(10**6, 0)
    with pytest.raises(KBError):
        family_kb.neighbors(0, -1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_out_index_equals_brute_force_scan(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    p = tmp_path_factory.mktemp("kb") / "kb.tsv"
    p.write_text("\n".join(random_kb_lines(rng, n_triples=int(rng.integers(5, 200)))) + "\n")
    kb = load_triples(p)
    for s in range(kb.n_entities):
        for r in range(kb.n_relations):
            scan = {o for (s2, r2, o) in kb.triples if s2 == s and r2 == r}
            assert kb.neighbors(s, r) == scan


def test_drop_half_preserves_tables(random_kb):
    out = drop_random_triples(random_kb, 0.5, seed=3)
    assert out.entities == random_kb.entities
    assert out.relations == random_kb.relations
    assert len(out.triples) == len(random_kb.triples) - len(random_kb.triples) // 2


def test_drop_zero_is_noop(random_kb):
    assert drop_random_triples(random_kb, 0.0, seed=3).triples == random_kb.triples


def test_drop_deterministic(random_kb):
    a = drop_random_triples(random_kb, 0.3, seed=9)
    b = drop_random_triples(random_kb, 0.3, seed=9)
    assert a.triples == b.triples


def test_drop_rejects_bad_fraction(random_kb):
    with pytest.raises(KBError):
        drop_random_triples(random_kb, 1.5, seed=0)


def test_save_round_trip(tmp_path, random_kb):
    p = tmp_path / "out.tsv"
    save_triples(random_kb, p)
    again = load_triples(p)
    assert again.triples == random_kb.triples
    assert again.entities == random_kb.entities


def test_neighbors_function_alias(family_kb):
    obama = family_kb.entity_id["barack_obama"]
    children = family_kb.relation_id["children"]
    assert neighbors(family_kb, obama, children) == family_kb.neighbors(obama, children)


def test_restrict_keeps_exactly_given_triples(random_kb):
    subset = list(random_kb.triples)[::3]
    sub, emap = restrict_to_triples(random_kb, subset)
    assert sub.relations == random_kb.relations
    back = {(old, r, old_o)
            for old, new in emap.items()
            for (s, r, o) in sub.triples if s == new
            for old_o, new_o in emap.items() if new_o == o}
    assert back == set(subset)
    # every kept entity name survives unchanged
    for old, new in emap.items():
        assert sub.entities[new] == random_kb.entities[old]


def test_restrict_compacts_entities(random_kb):
    subset = [random_kb.triples[0]]
    sub, emap = restrict_to_triples(random_kb, subset)
    s, r, o = subset[0]
    assert sub.n_entities == (1 if s == o else 2)
    assert len(sub.triples) == 1


def test_restrict_rejects_empty_and_out_of_range(random_kb):
    with pytest.raises(KBError):
        restrict_to_triples(random_kb, [])
    with pytest.raises(KBError):
        restrict_to_triples(random_kb, [(0, 0, 10 ** 6)])


def test_sparsify_one_object_per_subject_relation(random_kb):
    thin = sparsify_kb(random_kb, seed=1)
    pairs = [(s, r) for s, r, _ in thin.triples]
    assert len(pairs) == len(set(pairs))


def test_sparsify_breaks_symmetric_pairs(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("a\tspouse\tb\nb\tspouse\ta\na\tgender\tmale\n")
    kb = load_triples(p)
    thin = sparsify_kb(kb, seed=0, backbone=("spouse",))
    spouse = kb.relation_id["spouse"]
    sym = [(s, o) for s, r, o in thin.triples if r == spouse]
    assert len(sym) == 1


def test_sparsify_backbone_survives_low_keep_fraction(random_kb):
    name = random_kb.relations[0]
    thin = sparsify_kb(random_kb, seed=2, keep_fraction=0.01, backbone=(name,))
    rid = random_kb.relation_id[name]
    kept_subjects = {s for s, r, _ in thin.triples if r == rid}
    want_subjects = {s for s, r, _ in random_kb.triples if r == rid}
    # one-object rule and symmetry breaking may drop a few, never all
    assert kept_subjects
    assert kept_subjects <= want_subjects


def test_sparsify_deterministic(random_kb):
    assert sparsify_kb(random_kb, seed=5, keep_fraction=0.5).triples == \
           sparsify_kb(random_kb, seed=5, keep_fraction=0.5).triples


def test_sparsify_rejects_bad_arguments(random_kb):
    with pytest.raises(KBError):
        sparsify_kb(random_kb, seed=0, keep_fraction=0.0)
    with pytest.raises(KBError):
        sparsify_kb(random_kb, seed=0, backbone=("no_such_relation",))
