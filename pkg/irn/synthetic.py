"""Synthetic biography knowledge base.

Generates a multi-generation family graph with the 13 biography relations
(parents/children/spouse plus person attributes), sized to taste. The
real Freebase-derived data is not redistributable, so experiments here run
on this generator's output; the relation inventory and triple volume are
chosen to be comparable.
"""

from __future__ import annotations

import numpy as np

from .kb import KnowledgeBase, load_triples

RELATIONS = (
    "parents", "children", "spouse", "gender", "profession", "religion",
    "nationality", "ethnicity", "cause_of_death", "place_of_birth",
    "place_of_death", "institution", "location",
)

_FIRST_M = ("james", "john", "robert", "michael", "william", "david", "richard",
            "joseph", "thomas", "charles", "henry", "george", "edward", "frank",
            "walter", "arthur", "albert", "harold", "paul", "carl")
_FIRST_F = ("mary", "anna", "emma", "elizabeth", "margaret", "ruth", "florence",
            "helen", "ethel", "clara", "alice", "edith", "grace", "rose", "sophia",
            "esther", "louise", "frances", "martha", "julia")
_SURNAMES = ("smith", "johnson", "brown", "taylor", "anderson", "harris", "clark",
             "lewis", "walker", "hall", "young", "king", "wright", "scott", "green",
             "baker", "adams", "nelson", "carter", "mitchell", "turner", "parker",
             "collins", "edwards", "stewart", "morris", "murphy", "cook", "rogers",
             "reed", "bell", "bailey", "cooper", "richardson", "cox", "howard",
             "ward", "brooks", "gray", "james")

PROFESSIONS = ("doctor", "lawyer", "engineer", "teacher", "actor", "singer",
               "writer", "painter", "farmer", "soldier", "priest", "politician",
               "journalist", "chef", "pilot", "nurse", "architect", "scientist",
               "athlete", "musician", "banker", "merchant", "carpenter", "tailor",
               "miner", "sailor", "clerk", "professor", "judge", "photographer")
RELIGIONS = ("catholic", "protestant", "orthodox", "jewish", "muslim",
             "buddhist", "hindu", "atheist")
GENDERS = ("male", "female")
NATIONALITIES = ("american", "british", "french", "german", "italian", "spanish",
                 "russian", "polish", "irish", "dutch", "swedish", "greek",
                 "portuguese", "austrian", "swiss")
ETHNICITIES = ("english", "german", "irish", "italian", "scandinavian",
               "slavic", "iberian", "greek", "jewish", "french")
CITIES = ("london", "paris", "berlin", "vienna", "rome", "madrid", "moscow",
          "warsaw", "dublin", "amsterdam", "stockholm", "athens", "lisbon",
          "zurich", "new_york", "boston", "chicago", "philadelphia",
          "san_francisco", "baltimore", "prague", "budapest", "munich",
          "hamburg", "lyon", "marseille", "naples", "milan", "turin",
          "barcelona", "seville", "glasgow", "edinburgh", "manchester",
          "liverpool", "bristol", "leeds", "oslo", "copenhagen", "helsinki")
INSTITUTIONS = ("harvard_university", "yale_university", "oxford_university",
                "cambridge_university", "princeton_university", "columbia_university",
                "sorbonne", "heidelberg_university", "university_of_vienna",
                "university_of_bologna", "trinity_college", "eth_zurich",
                "university_of_edinburgh", "cornell_university", "brown_university",
                "leiden_university", "uppsala_university", "charles_university",
                "jagiellonian_university", "complutense_university")
CAUSES = ("cancer", "heart_attack", "pneumonia", "stroke", "accident",
          "tuberculosis", "influenza", "old_age", "drowning", "war_wound")


def _maybe(rng, p):
    return rng.random() < p


def generate_biography_triples(n_people: int, seed: int) -> list[tuple[str, str, str]]:
    """Deterministic family-graph triples, roughly 13-14 per person."""
    rng = np.random.default_rng(seed)
    triples: list[tuple[str, str, str]] = []
    people: list[tuple[str, str]] = []   # (name, gender)
    gender_of: dict[str, str] = {}
    counter = 0

    def new_person(surname: str, gender: str) -> str:
        nonlocal counter
        counter += 1
        pool = _FIRST_M if gender == "male" else _FIRST_F
        first = pool[int(rng.integers(len(pool)))]
        name = f"{first}_{surname}_{counter}"
        people.append((name, gender))
        gender_of[name] = gender
        return name

    def attach_attributes(name: str, gender: str) -> None:
        triples.append((name, "gender", gender))
        triples.append((name, "profession", PROFESSIONS[int(rng.integers(len(PROFESSIONS)))]))
        triples.append((name, "religion", RELIGIONS[int(rng.integers(len(RELIGIONS)))]))
        triples.append((name, "nationality", NATIONALITIES[int(rng.integers(len(NATIONALITIES)))]))
        triples.append((name, "ethnicity", ETHNICITIES[int(rng.integers(len(ETHNICITIES)))]))
        triples.append((name, "place_of_birth", CITIES[int(rng.integers(len(CITIES)))]))
        if _maybe(rng, 0.7):
            triples.append((name, "place_of_death", CITIES[int(rng.integers(len(CITIES)))]))
            triples.append((name, "cause_of_death", CAUSES[int(rng.integers(len(CAUSES)))]))
        if _maybe(rng, 0.7):
            triples.append((name, "institution", INSTITUTIONS[int(rng.integers(len(INSTITUTIONS)))]))
        if _maybe(rng, 0.8):
            triples.append((name, "location", CITIES[int(rng.integers(len(CITIES)))]))

    # founder couples, then descend generations until the budget is spent
    generation: list[tuple[str, str]] = []   # couples
    while counter < n_people:
        surname = _SURNAMES[int(rng.integers(len(_SURNAMES)))]
        a = new_person(surname, "male")
        b = new_person(surname, "female")
        generation.append((a, b))
        if len(generation) * 2 >= max(4, n_people // 8):
            break
    for a, b in list(generation):
        triples.append((a, "spouse", b))
        triples.append((b, "spouse", a))

    while generation and counter < n_people:
        next_gen: list[tuple[str, str]] = []
        singles: list[str] = []
        for father, mother in generation:
            surname = father.split("_")[1]
            for _ in range(int(rng.integers(1, 4))):
                if counter >= n_people:
                    break
                gender = GENDERS[int(rng.integers(2))]
                child = new_person(surname, gender)
                triples.append((father, "children", child))
                triples.append((mother, "children", child))
                triples.append((child, "parents", father))
                triples.append((child, "parents", mother))
                singles.append(child)
        rng.shuffle(singles)
        males = [s for s in singles if gender_of[s] == "male"]
        females = [s for s in singles if gender_of[s] == "female"]
        for a, b in zip(males, females):
            triples.append((a, "spouse", b))
            triples.append((b, "spouse", a))
            next_gen.append((a, b))
        generation = next_gen

    for name, gender in people:
        attach_attributes(name, gender)
    return triples


def write_kb(path, n_people: int, seed: int) -> int:
    triples = generate_biography_triples(n_people, seed)
    with open(path, "w", encoding="utf-8") as f:
        for s, r, o in triples:
            f.write(f"{s}\t{r}\t{o}\n")
    return len(triples)


PQ_BACKBONE = ("parents", "children", "spouse")


def build_pq_benchmark(hops: int, seed: int, n_people: int = 600,
                       keep_fraction: float = 0.35, n_paths: int = 650,
                       paraphrases: int = 3, templates=None):
    """A question-scale benchmark: sparse KB plus paraphrased path questions.

    The dense biography graph is thinned to a near-matching per relation
    (person-to-person relations always kept), paths are sampled, the KB is
    restricted to the paths' triples, and every path is verbalized several
    ways. Returns (kb, instances).
    """
    from .dataset import generate_pq_dataset, load_templates
    from .kb import sparsify_kb
    from .numerics import Prng

    if templates is None:
        templates = load_templates()
    big = generate_kb(n_people, seed)
    thin = sparsify_kb(big, seed, keep_fraction, backbone=PQ_BACKBONE)
    rng = Prng(seed).stream(f"pq-{hops}h")
    return generate_pq_dataset(thin, hops, templates, rng, n_paths, paraphrases)


def generate_kb(n_people: int, seed: int) -> KnowledgeBase:
    """In-memory convenience wrapper used by tests and scripts."""
    import os
    import tempfile

    fd, path = tempfile.mkstemp(suffix=".tsv")
    os.close(fd)
    try:
        write_kb(path, n_people, seed)
        return load_triples(path)
    finally:
        os.unlink(path)
