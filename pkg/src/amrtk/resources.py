"""Loaders and lookups for the semantic resources used by the aligner:
word embeddings (GloVe text layout), a morphosemantic link table and a
lemma table.  All tables are read-only after load."""

import logging
import math

import numpy as np

from .graph import strip_sense

logger = logging.getLogger(__name__)

DEFAULT_COSINE_THRESHOLD = 0.7


class ResourceFormatError(ValueError):
    pass


class EmbeddingTable:
    def __init__(self, dimension, vectors):
        self.dimension = dimension
        self.vectors = vectors  # lowercase word -> np.ndarray

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word.lower() in self.vectors

    def get(self, word):
        return self.vectors.get(word.lower())


class MorphLinkTable:
    def __init__(self, links, skipped=0):
        self.links = frozenset(links)  # (word form, concept base label)
        self.skipped = skipped

    def __len__(self):
        return len(self.links)

    def __contains__(self, pair):
        return pair in self.links


class LemmaTable:
    def __init__(self, entries=None, skipped=0):
        self.entries = {k: frozenset(v) for k, v in (entries or {}).items()}
        self.skipped = skipped

    def __len__(self):
        return len(self.entries)

    def lemmas(self, word):
        """Lemmas of a form; every word is a lemma of itself."""
        word = word.lower()
        return self.entries.get(word, frozenset()) | {word}


class Resources:
    """Bundle handed to the aligner; any table may be empty."""

    def __init__(self, embeddings=None, morph=None, lemmas=None,
                 cosine_threshold=DEFAULT_COSINE_THRESHOLD):
        self.embeddings = embeddings or EmbeddingTable(0, {})
        self.morph = morph or MorphLinkTable(())
        self.lemmas = lemmas or LemmaTable()
        self.cosine_threshold = cosine_threshold


def load_embeddings(path):
    """Read a GloVe-layout text file: word then N decimals per line.

    Duplicate words keep the first occurrence; dimension mismatches and
    non-finite values are format errors."""
    vectors = {}
    dimension = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word = parts[0].lower()
            try:
                values = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as err:
                raise ResourceFormatError(
                    "%s:%d: unparseable number (%s)" % (path, lineno, err))
            if dimension is None:
                dimension = len(values)
                if dimension == 0:
                    raise ResourceFormatError(
                        "%s:%d: no vector components" % (path, lineno))
            elif len(values) != dimension:
                raise ResourceFormatError(
                    "%s:%d: expected %d components, found %d"
                    % (path, lineno, dimension, len(values)))
            if not np.all(np.isfinite(values)):
                raise ResourceFormatError(
                    "%s:%d: non-finite vector component" % (path, lineno))
            if word not in vectors:
                vectors[word] = values
    return EmbeddingTable(dimension or 0, vectors)


def _load_tsv(path):
    rows = []
    skipped = 0
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                skipped += 1
                continue
            rows.append((parts[0].strip().lower(), parts[1].strip().lower()))
    if skipped:
        logger.warning("%s: skipped %d malformed line(s)", path, skipped)
    return rows, skipped


def load_morphosemantic(path):
    """2-column TSV of (word form, concept base label) derivational links."""
    rows, skipped = _load_tsv(path)
    return MorphLinkTable(rows, skipped=skipped)


def load_lemmas(path):
    """2-column TSV mapping an inflected form to comma-separated lemmas."""
    rows, skipped = _load_tsv(path)
    entries = {}
    for form, lemma_field in rows:
        lemmas = {l.strip() for l in lemma_field.split(",") if l.strip()}
        entries.setdefault(form, set()).update(lemmas)
    return LemmaTable(entries, skipped=skipped)


def cosine(table, w1, w2):
    """Cosine similarity of two words, or None when either is missing
    or has a zero-norm vector."""
    v1 = table.get(w1)
    v2 = table.get(w2)
    if v1 is None or v2 is None:
        return None
    n1 = math.sqrt(float(np.dot(v1, v1)))
    n2 = math.sqrt(float(np.dot(v2, v2)))
    if n1 == 0.0 or n2 == 0.0:
        return None
    return float(np.dot(v1, v2)) / (n1 * n2)


def semantic_match(table, concept_label, word,
                   threshold=DEFAULT_COSINE_THRESHOLD):
    """Strictly-greater cosine test between the sense-stripped concept
    label and the word.  Missing embeddings never match."""
    sim = cosine(table, strip_sense(concept_label).lower(), word.lower())
    return sim is not None and sim > threshold


def morph_match(morph, lemmas, concept_label, word):
    """True when a derivational link connects the word (or one of its
    lemmas) to the sense-stripped concept label, or when a lemma of the
    word equals the label itself."""
    base = strip_sense(concept_label).lower()
    for form in lemmas.lemmas(word):
        if (form, base) in morph:
            return True
        if form == base:
            return True
    return False
