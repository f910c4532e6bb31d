"""Shared test utilities: random graph pairs and fixture paths."""

import os

from amrtk.graph import ATTRIBUTE, ENTITY_TYPE, AmrGraph, Concept, Relation

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

LABEL_POOL = ["want-01", "go-02", "boy", "girl", "dog", "city", "see-01", "nucleus"]
ROLE_POOL = [":ARG0", ":ARG1", ":mod", ":time", ":poss"]
VALUE_POOL = ["-", "2", "2002"]


def fixture(*parts):
    return os.path.join(FIXTURES, *parts)


def random_graph(rng, n_vars):
    """A connected random labeled graph with `n_vars` variables."""
    concepts = {}
    relations = []
    ids = ["v%d" % i for i in range(n_vars)]
    for cid in ids:
        concepts[cid] = Concept(cid, rng.choice(LABEL_POOL), ENTITY_TYPE)
    # spanning arborescence keeps the graph connected
    for i, cid in enumerate(ids[1:], start=1):
        parent = ids[rng.randrange(i)]
        relations.append(Relation(parent, cid, rng.choice(ROLE_POOL)))
    # sprinkle extra edges and attributes
    for _ in range(rng.randrange(n_vars)):
        if n_vars < 2:
            break
        src, tgt = rng.sample(ids, 2)
        role = rng.choice(ROLE_POOL)
        if not any(r.source == src and r.target == tgt and r.label == role
                   for r in relations):
            relations.append(Relation(src, tgt, role))
    lit_index = 0
    for _ in range(rng.randrange(2)):
        src = rng.choice(ids)
        lid = "_k%d" % lit_index
        lit_index += 1
        concepts[lid] = Concept(lid, rng.choice(VALUE_POOL), ATTRIBUTE)
        relations.append(Relation(src, lid, rng.choice([":quant", ":polarity"])))
    return AmrGraph(concepts, relations, ids[0])


def random_graph_pair(rng, max_vars=5):
    na = rng.randint(1, max_vars)
    nb = rng.randint(1, max_vars)
    return random_graph(rng, na), random_graph(rng, nb)


def perturbed_pair(rng, n_vars):
    """A graph plus a relabeled, possibly edge-dropped copy of itself."""
    g = random_graph(rng, n_vars)
    concepts = dict(g.concepts)
    relations = list(g.relations)
    victim = rng.choice(list(concepts))
    old = concepts[victim]
    concepts[victim] = Concept(old.id, rng.choice(LABEL_POOL), old.kind)
    if relations and rng.random() < 0.5:
        relations.pop(rng.randrange(len(relations)))
    # drop concepts orphaned by edge removal so the copy stays connected
    reachable = {g.root}
    changed = True
    while changed:
        changed = False
        for rel in relations:
            if rel.source in reachable and rel.target not in reachable:
                reachable.add(rel.target)
                changed = True
            elif rel.target in reachable and rel.source not in reachable:
                reachable.add(rel.source)
                changed = True
    concepts = {cid: c for cid, c in concepts.items() if cid in reachable}
    relations = [r for r in relations
                 if r.source in reachable and r.target in reachable]
    return g, AmrGraph(concepts, relations, g.root)
