import numpy as np
import pytest

from irn.kb import load_triples


@pytest.fixture
def chain_kb(tmp_path):
    """a -r1-> b -r2-> c"""
    p = tmp_path / "chain.tsv"
    p.write_text("a\tr1\tb\nb\tr2\tc\n")
    return load_triples(p)


@pytest.fixture
def family_kb(tmp_path):
    """Two children with ages, mirroring the branching answer-set case."""
    p = tmp_path / "family.tsv"
    p.write_text(
        "barack_obama\tchildren\tmalia_obama\n"
        "barack_obama\tchildren\tsasha_obama\n"
        "malia_obama\tage\t18\n"
        "sasha_obama\tage\t14\n"
    )
    return load_triples(p)


def random_kb_lines(rng: np.random.Generator, n_entities=20, n_relations=4, n_triples=60):
    ents = [f"e{i}" for i in range(n_entities)]
    rels = [f"r{i}" for i in range(n_relations)]
    lines = set()
    while len(lines) < n_triples:
        s = ents[rng.integers(n_entities)]
        r = rels[rng.integers(n_relations)]
        o = ents[rng.integers(n_entities)]
        lines.add(f"{s}\t{r}\t{o}")
    return sorted(lines)


@pytest.fixture
def random_kb(tmp_path):
    rng = np.random.default_rng(42)
    p = tmp_path / "random.tsv"
    p.write_text("\n".join(random_kb_lines(rng)) + "\n")
    return load_triples(p)
