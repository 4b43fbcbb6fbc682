"""Vocabulary-matching baseline with the tag-column heuristic."""
from __future__ import annotations

import re

from .rdl import RdlGraph
from .table import Cell, Corpus, NerTag, Table, TAG_BY_ENTITY
from .tokenize import normalize, tokenize

# a cell (tokens re-joined) looks like an identifier: mixed letters and digits,
# or several alphanumeric groups joined by dashes
_MIXED = re.compile(r"^(?=.*[^\W\d_])(?=.*\d)[^\W_]+(?:[-_./][^\W_]+)*$")
_DASHED = re.compile(r"^[^\W_]+(?:-[^\W_]+)+$")

_PRIORITY = ("EQ", "QUANT", "UoM")


class PhraseMatcher:
    """Greedy longest-match-first lookup of normalized token n-grams."""

    def __init__(self, graph: RdlGraph):
        self.phrases = {}
        for entity in reversed(_PRIORITY):  # earlier types win on identical phrases
            for name in graph.names(entity):
                key = tuple(normalize(t) for t in tokenize(name))
                if key:
                    self.phrases[key] = entity
        self.max_len = max((len(k) for k in self.phrases), default=0)

    def matches(self, tokens) -> list[tuple[int, int, str]]:
        """Non-overlapping (start, end, entity) spans."""
        norm = [normalize(t) for t in tokens]
        out, p = [], 0
        while p < len(norm):
            for size in range(min(self.max_len, len(norm) - p), 0, -1):
                entity = self.phrases.get(tuple(norm[p:p + size]))
                if entity:
                    out.append((p, p + size, entity))
                    p += size
                    break
            else:
                p += 1
        return out

    def tag_cell(self, cell: Cell) -> list[NerTag]:
        tags = [NerTag.O] * len(cell)
        for start, end, entity in self.matches(cell.tokens):
            tags[start:end] = [TAG_BY_ENTITY[entity]] * (end - start)
        return tags


_SEPARATORS = set("-_./")


def _code_piece(token: str) -> bool:
    return token in _SEPARATORS or (token.isalnum() and not any(ch.islower() for ch in token))


def _has_letter_and_digit(tokens) -> bool:
    return any(ch.isalpha() for t in tokens for ch in t) and any(ch.isdigit() for t in tokens for ch in t)


def tag_cell_tokens(cell: Cell) -> list[NerTag]:
    """TAG for identifier-looking tokens of a tag-column cell."""
    joined = "".join(cell.tokens)
    has_words = any(t.isalpha() and not t.isupper() for t in cell.tokens)
    if joined and not has_words and (_MIXED.match(joined) or _DASHED.match(joined)):
        return [NerTag.TAG] * len(cell)
    # tokens lost their whitespace, so fall back to runs of upper-case / digit pieces
    tags = [NerTag.O] * len(cell)
    start = 0
    toks = list(cell.tokens) + [" "]
    for end, tok in enumerate(toks):
        if _code_piece(tok):
            continue
        run = toks[start:end]
        if _has_letter_and_digit(run):
            tags[start:end] = [NerTag.TAG] * len(run)
        start = end + 1
    return tags


def select_tag_column(table: Table, matcher: PhraseMatcher) -> int | None:
    """Vocabulary-free column with the most distinct body values (leftmost on ties)."""
    best, best_count = None, 0
    for j in range(table.n_cols):
        cells = [row[j] for row in table.body]
        if any(matcher.matches(c.tokens) for c in cells):
            continue
        distinct = len({tuple(normalize(t) for t in c.tokens) for c in cells if len(c)})
        if distinct > best_count:
            best, best_count = j, distinct
    return best


def rule_predict(table: Table, graph: RdlGraph, matcher: PhraseMatcher | None = None) -> Table:
    """Same table with predicted tags on every cell."""
    matcher = matcher or PhraseMatcher(graph)
    tag_col = select_tag_column(table, matcher)

    def predict(coord, cell):
        tags = matcher.tag_cell(cell)
        i, j = coord
        if i > 0 and j == tag_col:
            tags = tag_cell_tokens(cell)
        return cell.with_tags(tags)
    return table.map_cells(predict)


def rule_predict_corpus(corpus: Corpus, graph: RdlGraph) -> Corpus:
    matcher = PhraseMatcher(graph)
    return Corpus([rule_predict(t, graph, matcher) for t in corpus])
