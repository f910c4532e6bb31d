"""Line-oriented corpus IO: blank-line-separated blocks of `# ::key`
metadata headers followed by one Penman graph.

Alignment lines use the span|heads item format: `s-e|h1+h2` aligns the
token span [s, e) to the fragments whose head concepts sit at addresses
h1 and h2 in the graph's first-appearance order.  Multiple candidates are
carried as repeated `::alignments-k` lines.
"""

import io
import re

from .align import AlignmentRecord, CandidateAlignment, Span
from .graph import parse_penman

_META_RE = re.compile(r"^# ::(\S+) ?(.*)$")
_ALIGN_K_RE = re.compile(r"^alignments-(\d+)$")
_ITEM_RE = re.compile(r"^(\d+)-(\d+)\|(\d+(?:\+\d+)*)$")

HEADER_ORDER = ["id", "snt", "tok", "pos"]


class CorpusFormatError(ValueError):
    pass


class CorpusDocument:
    def __init__(self, metadata, graph=None, graph_text=None):
        self.metadata = dict(metadata)
        self.graph = graph
        self.graph_text = graph_text

    @property
    def id(self):
        return self.metadata.get("id")

    @property
    def snt(self):
        return self.metadata.get("snt")

    @property
    def tokens(self):
        if "tok" in self.metadata:
            return self.metadata["tok"].split()
        if "snt" in self.metadata:
            return self.metadata["snt"].split()
        return []

    @property
    def pos(self):
        if "pos" in self.metadata:
            tags = self.metadata["pos"].split()
            if len(tags) != len(self.tokens):
                raise CorpusFormatError(
                    "document %s: %d POS tags for %d tokens"
                    % (self.id, len(tags), len(self.tokens)))
            return tags
        return None

    def alignment_candidates(self):
        """Parsed candidates from ::alignments-k lines (or the single
        ::alignments line), in index order."""
        if self.graph is None:
            raise CorpusFormatError("document %s has no graph" % self.id)
        keyed = []
        for key, value in self.metadata.items():
            match = _ALIGN_K_RE.match(key)
            if match:
                keyed.append((int(match.group(1)), value))
        if keyed:
            return [parse_alignment(value, self.graph, self.tokens)
                    for _, value in sorted(keyed)]
        if "alignments" in self.metadata:
            return [parse_alignment(self.metadata["alignments"],
                                    self.graph, self.tokens)]
        return []

    def set_candidates(self, candidates):
        self.metadata = {k: v for k, v in self.metadata.items()
                         if not _ALIGN_K_RE.match(k) and k != "alignments"}
        for k, candidate in enumerate(candidates):
            self.metadata["alignments-%d" % k] = format_alignment(candidate)

    def set_alignment(self, candidate):
        self.metadata = {k: v for k, v in self.metadata.items()
                         if not _ALIGN_K_RE.match(k) and k != "alignments"}
        self.metadata["alignments"] = format_alignment(candidate)


def format_alignment(candidate):
    addresses = candidate.graph.addresses()
    by_span = {}
    for head, record in candidate.choices.items():
        if record is None:
            continue
        by_span.setdefault(record.span, []).append(addresses[head])
    items = []
    for span in sorted(by_span, key=lambda s: (s.start, s.end)):
        heads = "+".join(str(a) for a in sorted(by_span[span]))
        items.append("%d-%d|%s" % (span.start, span.end, heads))
    return " ".join(items)


def parse_alignment(text, graph, tokens):
    from .graph import extract_fragments
    order = list(graph.concepts)
    fragment_heads = {f.head for f in extract_fragments(graph)}
    choices = {}
    for item in text.split():
        match = _ITEM_RE.match(item)
        if not match:
            raise CorpusFormatError("bad alignment item %r" % item)
        start, end = int(match.group(1)), int(match.group(2))
        if not 0 <= start < end <= len(tokens):
            raise CorpusFormatError("alignment span %s out of range" % item)
        for addr in match.group(3).split("+"):
            index = int(addr)
            if index >= len(order):
                raise CorpusFormatError("alignment address %s out of range" % addr)
            head = order[index]
            if head not in fragment_heads:
                raise CorpusFormatError("address %s is not a fragment head" % addr)
            choices[head] = AlignmentRecord(Span(start, end))
    for head in fragment_heads:
        choices.setdefault(head, None)
    return CandidateAlignment(graph, tokens, choices)


def _iter_blocks(stream):
    block = []
    for line in stream:
        line = line.rstrip("\n")
        if line.strip():
            block.append(line)
        elif block:
            yield block
            block = []
    if block:
        yield block


def read_corpus(source, parse_graphs=True):
    """Read CorpusDocuments from a path, stream or string."""
    if isinstance(source, str) and "\n" not in source:
        with open(source, encoding="utf-8") as handle:
            return read_corpus(handle, parse_graphs=parse_graphs)
    if isinstance(source, str):
        source = io.StringIO(source)
    documents = []
    for block in _iter_blocks(source):
        metadata = {}
        graph_lines = []
        for line in block:
            match = _META_RE.match(line)
            if match:
                metadata[match.group(1)] = match.group(2)
            elif line.startswith("#"):
                continue
            else:
                graph_lines.append(line)
        graph_text = "\n".join(graph_lines) if graph_lines else None
        graph = None
        if graph_text and parse_graphs:
            graph = parse_penman(graph_text, metadata=metadata)
        documents.append(CorpusDocument(metadata, graph, graph_text))
    return documents


def write_corpus(documents, stream):
    for i, doc in enumerate(documents):
        if i:
            stream.write("\n")
        emitted = set()
        for key in HEADER_ORDER:
            if key in doc.metadata:
                stream.write("# ::%s %s\n" % (key, doc.metadata[key]))
                emitted.add(key)
        for key, value in doc.metadata.items():
            if key not in emitted:
                stream.write("# ::%s %s\n" % (key, value))
        if doc.graph_text:
            stream.write(doc.graph_text + "\n")


def corpus_to_string(documents):
    out = io.StringIO()
    write_corpus(documents, out)
    return out.getvalue()


def read_traces(source):
    """Read an action-trace file: metadata headers then one action per
    line, blank-line separated.  Returns (metadata, action strings) pairs."""
    if isinstance(source, str) and "\n" not in source:
        with open(source, encoding="utf-8") as handle:
            return read_traces(handle)
    if isinstance(source, str):
        source = io.StringIO(source)
    blocks = []
    for block in _iter_blocks(source):
        metadata = {}
        actions = []
        for line in block:
            match = _META_RE.match(line)
            if match:
                metadata[match.group(1)] = match.group(2)
            elif not line.startswith("#"):
                actions.append(line.strip())
        blocks.append((metadata, actions))
    return blocks


def write_traces(blocks, stream):
    for i, (metadata, actions) in enumerate(blocks):
        if i:
            stream.write("\n")
        for key in HEADER_ORDER:
            if key in metadata:
                stream.write("# ::%s %s\n" % (key, metadata[key]))
        for key, value in metadata.items():
            if key not in HEADER_ORDER:
                stream.write("# ::%s %s\n" % (key, value))
        for action in actions:
            stream.write(action + "\n")
