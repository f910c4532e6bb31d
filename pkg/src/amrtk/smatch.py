"""Smatch precision/recall/F1 between two AMR graphs.

Triples are matched under an injective variable mapping found by
restarted hill-climbing; `exhaustive_smatch` searches every mapping and
serves as the exact reference for small graphs.
"""

import itertools
import random
from collections import namedtuple

from .graph import LITERAL_KINDS

SmatchScore = namedtuple("SmatchScore", ["precision", "recall", "f1"])

TripleSet = namedtuple("TripleSet", ["instances", "attributes", "relations"])

EXHAUSTIVE_VAR_LIMIT = 8


class SmatchSizeError(ValueError):
    pass


def to_triples(graph):
    """Instance/attribute/relation triples of a graph.

    One instance triple per variable, a synthetic TOP attribute on the
    root, an attribute triple per edge to a literal and a relation triple
    per edge between variables.
    """
    instances = set()
    attributes = set()
    relations = set()
    for cid, concept in graph.concepts.items():
        if concept.kind not in LITERAL_KINDS:
            instances.add((cid, "instance", concept.label))
    attributes.add((graph.root, "TOP", graph.concept(graph.root).label))
    for rel in graph.relations:
        target = graph.concept(rel.target)
        if target.kind in LITERAL_KINDS:
            attributes.add((rel.source, rel.label, target.label))
        else:
            relations.add((rel.source, rel.label, rel.target))
    return TripleSet(instances, attributes, relations)


def triple_count(triples):
    return len(triples.instances) + len(triples.attributes) + len(triples.relations)


def _match_count(ta, tb, mapping):
    """Number of triples of `ta` whose image under `mapping` is in `tb`."""
    count = 0
    for var, _, label in ta.instances:
        if (mapping.get(var), "instance", label) in tb.instances:
            count += 1
    for var, role, value in ta.attributes:
        if (mapping.get(var), role, value) in tb.attributes:
            count += 1
    for src, role, tgt in ta.relations:
        if (mapping.get(src), role, mapping.get(tgt)) in tb.relations:
            count += 1
    return count


def _score(matched, n_a, n_b):
    if n_a == 0 and n_b == 0:
        return SmatchScore(1.0, 1.0, 1.0)
    precision = matched / n_a if n_a else 0.0
    recall = matched / n_b if n_b else 0.0
    if precision + recall == 0.0:
        return SmatchScore(precision, recall, 0.0)
    return SmatchScore(precision, recall,
                       2.0 * precision * recall / (precision + recall))


def _label_init(vars_a, vars_b, labels_a, labels_b):
    """Heuristic start: pair variables with equal concept labels."""
    mapping = {}
    used = set()
    for va in vars_a:
        for vb in vars_b:
            if vb in used:
                continue
            if labels_a[va] == labels_b[vb]:
                mapping[va] = vb
                used.add(vb)
                break
    return mapping


def _random_init(vars_a, vars_b, rng):
    shuffled_b = list(vars_b)
    rng.shuffle(shuffled_b)
    order_a = list(vars_a)
    rng.shuffle(order_a)
    return {va: vb for va, vb in zip(order_a, shuffled_b)}


def _hill_climb(ta, tb, vars_a, vars_b, mapping):
    """Steepest-ascent over single reassignments and pair swaps."""
    current = _match_count(ta, tb, mapping)
    while True:
        best_gain = 0
        best_move = None
        used = set(mapping.values())
        for va in vars_a:
            old = mapping.get(va)
            for vb in itertools.chain(vars_b, [None]):
                if vb == old or (vb is not None and vb in used and vb != old):
                    continue
                if vb is None:
                    mapping.pop(va, None)
                else:
                    mapping[va] = vb
                gain = _match_count(ta, tb, mapping) - current
                if old is None:
                    mapping.pop(va, None)
                else:
                    mapping[va] = old
                if gain > best_gain:
                    best_gain = gain
                    best_move = ("move", va, vb)
        for va1, va2 in itertools.combinations(list(mapping), 2):
            mapping[va1], mapping[va2] = mapping[va2], mapping[va1]
            gain = _match_count(ta, tb, mapping) - current
            mapping[va1], mapping[va2] = mapping[va2], mapping[va1]
            if gain > best_gain:
                best_gain = gain
                best_move = ("swap", va1, va2)
        if best_move is None:
            return current, mapping
        kind, x, y = best_move
        if kind == "move":
            if y is None:
                mapping.pop(x, None)
            else:
                mapping[x] = y
        else:
            mapping[x], mapping[y] = mapping[y], mapping[x]
        current += best_gain


def smatch_counts(a, b, restarts=4, seed=1):
    """(matched, total_a, total_b) triple counts from hill-climbing search
    with one concept-label-matching initialization plus `restarts` random
    ones; deterministic for a fixed seed."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    ta = to_triples(a)
    tb = to_triples(b)
    vars_a = a.var_ids()
    vars_b = b.var_ids()
    labels_a = {v: a.concept(v).label for v in vars_a}
    labels_b = {v: b.concept(v).label for v in vars_b}
    rng = random.Random(seed)
    best = 0
    starts = [_label_init(vars_a, vars_b, labels_a, labels_b)]
    starts += [_random_init(vars_a, vars_b, rng) for _ in range(restarts)]
    for start in starts:
        count, _ = _hill_climb(ta, tb, vars_a, vars_b, dict(start))
        if count > best:
            best = count
    return best, triple_count(ta), triple_count(tb)


def smatch_score(a, b, restarts=4, seed=1):
    """Hill-climbing Smatch of graph `a` (candidate) against `b` (reference)."""
    matched, n_a, n_b = smatch_counts(a, b, restarts=restarts, seed=seed)
    return _score(matched, n_a, n_b)


def exhaustive_counts(a, b):
    """(matched, total_a, total_b) from searching every injective variable
    mapping; guarded by a factorial size limit on the smaller set."""
    ta = to_triples(a)
    tb = to_triples(b)
    vars_a = a.var_ids()
    vars_b = b.var_ids()
    if min(len(vars_a), len(vars_b)) > EXHAUSTIVE_VAR_LIMIT:
        raise SmatchSizeError(
            "exhaustive search limited to %d variables" % EXHAUSTIVE_VAR_LIMIT)
    best = 0
    if len(vars_a) <= len(vars_b):
        for image in itertools.permutations(vars_b, len(vars_a)):
            mapping = dict(zip(vars_a, image))
            best = max(best, _match_count(ta, tb, mapping))
    else:
        for image in itertools.permutations(vars_a, len(vars_b)):
            mapping = {va: vb for vb, va in zip(vars_b, image)}
            best = max(best, _match_count(ta, tb, mapping))
    return best, triple_count(ta), triple_count(tb)


def exhaustive_smatch(a, b):
    """Exact Smatch over every injective variable mapping."""
    return _score(*exhaustive_counts(a, b))
