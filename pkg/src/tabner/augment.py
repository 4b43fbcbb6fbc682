"""Table augmentation: knowledge-graph table synthesis (RDLTab), label-wise
token replacement (LWTR) and artificial equipment tags."""
from __future__ import annotations

import logging
import re
import zlib
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .rdl import RdlGraph, sample_equipment, sample_quantity, sample_uom
from .table import Cell, Corpus, NerTag, Table, column, entity_types_in
from .tokenize import tokenize

log = logging.getLogger(__name__)

TAG_ALPHABET = "ABCDEFGHJKLMNPQRSTUVWXYZ0123456789"


@dataclass(frozen=True)
class TagPattern:
    group_count: tuple = (2, 3)       # inclusive range
    group_length: tuple = (2, 4)      # inclusive range
    dash_probability: float = 0.7
    alphabet: str = TAG_ALPHABET

    def __post_init__(self):
        for lo, hi in (self.group_count, self.group_length):
            if lo > hi or lo < 0:
                raise ValueError("empty range in TagPattern")
        if self.group_length[0] < 1:
            raise ValueError("group_length must be at least 1")

    def regex(self, acronym: str) -> re.Pattern:
        chars = re.escape(self.alphabet)
        (glo, ghi), (llo, lhi) = self.group_count, self.group_length
        return re.compile(rf"^{re.escape(acronym)}(-?[{chars}]{{{llo},{lhi}}}){{{glo},{ghi}}}$")


def acronym(eq_name: str) -> str:
    return "".join(word[0] for word in eq_name.split()).upper()


def generate_tag(eq_name: str, pattern: TagPattern = TagPattern(), rng=None) -> str:
    """Acronym of the equipment name followed by random alphanumeric groups,
    each junction dashed with probability ``dash_probability``."""
    if not eq_name.strip():
        raise ValueError("eq_name must be non-empty")
    rng = rng if rng is not None else np.random.default_rng()
    out = acronym(eq_name)
    n_groups = int(rng.integers(pattern.group_count[0], pattern.group_count[1] + 1))
    for _ in range(n_groups):
        size = int(rng.integers(pattern.group_length[0], pattern.group_length[1] + 1))
        group = "".join(pattern.alphabet[i] for i in rng.integers(len(pattern.alphabet), size=size))
        out += ("-" if rng.random() < pattern.dash_probability else "") + group
    return out


def tag_matches_grammar(tag: str, eq_name: str, pattern: TagPattern = TagPattern()) -> bool:
    return pattern.regex(acronym(eq_name)).match(tag) is not None


@dataclass(frozen=True)
class AugmentConfig:
    k: int = 2
    n_samples: int = 1
    numeric_value_range: tuple = (0.0, 1000.0)
    uom_probability: float = 0.5
    seed: int = 0
    tag_pattern: TagPattern = field(default_factory=TagPattern)

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 <= self.uom_probability <= 1.0:
            raise ValueError("uom_probability must lie in [0, 1]")


def derive_seed(seed: int, key: str) -> int:
    """Per-table seed: run seed XOR a stable hash of the table key."""
    return (int(seed) ^ zlib.crc32(key.encode("utf-8"))) & 0xFFFFFFFF


# -- RDLTab ------------------------------------------------------------------------

@dataclass
class HeaderPools:
    """Headers of training columns that carry EQ / TAG annotations."""

    eq: list
    tag: list

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "HeaderPools":
        eq, tag = [], []
        for t in corpus:
            for j in range(t.n_cols):
                found = entity_types_in(column(t, j))
                h = t.header[j]
                h = h if h.tags is not None else h.all_o()
                if "EQ" in found:
                    eq.append(h)
                if "TAG" in found:
                    tag.append(h)
        return cls(eq, tag)


def format_value(rng, low, high) -> str:
    decimals = int(rng.integers(0, 3))
    return f"{rng.uniform(low, high):.{decimals}f}"


def _tagged(text, tag):
    return Cell.from_text(text, tag)


def rdltab_augment(table: Table, graph: RdlGraph, train_corpus: Corpus | None,
                   cfg: AugmentConfig = AugmentConfig(), rng=None,
                   pools: HeaderPools | None = None, new_id: str | None = None) -> Table:
    """Build one semantically consistent table from ``table`` and the graph.

    Layout: k annotation-free seed columns of ``table`` (all O), one
    equipment column, one quantity column per row holding a value (and
    maybe a unit) on the diagonal only, and a final tag column.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if pools is None:
        if train_corpus is None:
            raise PreconditionError("rdltab_augment needs a training corpus or header pools")
        pools = HeaderPools.from_corpus(train_corpus)
    if not pools.eq:
        raise PreconditionError("no training column with an EQ annotation to take a header from")
    if not pools.tag:
        raise PreconditionError("no training column with a TAG annotation to take a header from")
    n = table.n_rows

    # step 1: seed columns without annotations
    free = [j for j in range(table.n_cols) if not entity_types_in(column(table, j))]
    if cfg.k > 0 and not free:
        log.warning("table %s has no annotation-free column; using zero seed columns", table.id)
    if len(free) > cfg.k:
        free = sorted(rng.choice(free, size=cfg.k, replace=False).tolist())
    header = [table.header[j].all_o() for j in free]
    body = [[table.body[i][j].all_o() for j in free] for i in range(n)]

    # steps 2-3: equipment column
    eqs = [sample_equipment(graph, rng) for _ in range(n)]
    header.append(pools.eq[rng.integers(len(pools.eq))])
    for i, eq in enumerate(eqs):
        body[i].append(_tagged(eq, NerTag.EQ))

    # step 4: one quantity column per row, filled on the diagonal
    low, high = cfg.numeric_value_range
    for r, eq in enumerate(eqs):
        quant = sample_quantity(graph, eq, rng)
        header.append(_tagged(quant, NerTag.QUANT))
        value = Cell.from_text(format_value(rng, low, high), NerTag.O)
        if rng.random() < cfg.uom_probability:
            uom = sample_uom(graph, quant, rng)
            if uom is not None:
                unit = _tagged(uom, NerTag.UOM)
                value = Cell(value.tokens + unit.tokens, value.tags + unit.tags)
        for i in range(n):
            body[i].append(value if i == r else Cell((), ()))

    # step 5: tag column
    header.append(pools.tag[rng.integers(len(pools.tag))])
    for i, eq in enumerate(eqs):
        body[i].append(_tagged(generate_tag(eq, cfg.tag_pattern, rng), NerTag.TAG))
    return Table(new_id or f"{table.id}.aug", header, body)


# -- LWTR --------------------------------------------------------------------------

def label_donors(corpus: Corpus) -> dict:
    """Every labeled (non-O) token occurrence in the corpus, grouped by tag."""
    donors = defaultdict(list)
    for t in corpus:
        for _, c in t.cells():
            for tok, tag in zip(c.tokens, c.tags or ()):
                if tag is not NerTag.O:
                    donors[tag].append(tok)
    return dict(donors)


def lwtr_augment(table: Table, train_corpus: Corpus | None, rng=None,
                 donors: dict | None = None, new_id: str | None = None) -> Table:
    """Replace floor(m/2) of the m labeled tokens with same-label training tokens.

    Donors whose text equals the token being replaced are skipped so every
    chosen position really changes; positions whose label has no usable
    donor are dropped and another position is drawn instead.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if donors is None:
        donors = label_donors(train_corpus)
    slots = [(coord, p) for coord, c in table.cells()
             for p, tag in enumerate(c.tags or ()) if tag is not NerTag.O]
    target = len(slots) // 2
    new_tokens = {}
    for s in rng.permutation(len(slots)):
        if len(new_tokens) == target:
            break
        coord, p = slots[s]
        cell = table.cell(*coord)
        options = [d for d in donors.get(cell.tags[p], ()) if d != cell.tokens[p]]
        if not options:
            continue
        new_tokens[(coord, p)] = options[rng.integers(len(options))]
    if len(new_tokens) < target:
        log.warning("table %s: only %d of %d LWTR replacements possible",
                    table.id, len(new_tokens), target)

    def swap(coord, cell):
        toks = [new_tokens.get((coord, p), tok) for p, tok in enumerate(cell.tokens)]
        return Cell(toks, cell.tags)
    return table.map_cells(swap, new_id or f"{table.id}.aug")


# -- training-time augmenters ------------------------------------------------------------

class RdlTabAugmenter:
    def __init__(self, graph: RdlGraph, train_corpus: Corpus, cfg: AugmentConfig = AugmentConfig()):
        self.graph = graph
        self.cfg = cfg
        self.n_samples = cfg.n_samples
        self.pools = HeaderPools.from_corpus(train_corpus)

    def generate(self, table: Table, rng) -> list[Table]:
        return [rdltab_augment(table, self.graph, None, self.cfg, rng, pools=self.pools,
                               new_id=f"{table.id}.aug{i}") for i in range(self.n_samples)]


class LwtrAugmenter:
    def __init__(self, train_corpus: Corpus, n_samples: int = 1):
        self.n_samples = n_samples
        self.donors = label_donors(train_corpus)

    def generate(self, table: Table, rng) -> list[Table]:
        return [lwtr_augment(table, None, rng, donors=self.donors, new_id=f"{table.id}.aug{i}")
                for i in range(self.n_samples)]


def augment_corpus(corpus: Corpus, augmenter, seed: int = 0) -> Corpus:
    """Augmented copies only, ids ``<orig>.aug<i>``, each table on its own derived seed."""
    out = []
    for t in corpus:
        out.extend(augmenter.generate(t, np.random.default_rng(derive_seed(seed, t.id))))
    return Corpus(out)
