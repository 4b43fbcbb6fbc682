"""Tables, cells, IO tags, corpus file I/O and corpus statistics."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyInputError, ParseError
from .tokenize import tokenize


class NerTag(str, enum.Enum):
    O = "O"
    TAG = "I-TAG"
    EQ = "I-EQ"
    QUANT = "I-QUANT"
    UOM = "I-UoM"

    @property
    def entity(self) -> str | None:
        """Entity type name without the ``I-`` prefix, or None for O."""
        return None if self is NerTag.O else self.value[2:]

    @property
    def index(self) -> int:
        return TAG_ORDER.index(self)


TAG_ORDER = (NerTag.O, NerTag.TAG, NerTag.EQ, NerTag.QUANT, NerTag.UOM)
ENTITY_TYPES = ("TAG", "EQ", "QUANT", "UoM")
TAG_BY_ENTITY = {t.entity: t for t in TAG_ORDER if t.entity}


def as_tag(value) -> NerTag:
    try:
        return NerTag(value)
    except ValueError:
        raise ParseError(f"unknown NER tag {value!r}") from None


@dataclass(frozen=True)
class Cell:
    tokens: tuple[str, ...] = ()
    tags: tuple[NerTag, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"invalid token {tok!r}")
        if self.tags is not None:
            tags = tuple(as_tag(t) for t in self.tags)
            if len(tags) != len(self.tokens):
                raise ValueError(
                    f"{len(tags)} tags for {len(self.tokens)} tokens in cell {self.text!r}")
            object.__setattr__(self, "tags", tags)

    @classmethod
    def from_text(cls, text: str, tag: NerTag | None = None) -> "Cell":
        """Tokenize ``text``; every token gets ``tag`` when given."""
        tokens = tokenize(text)
        return cls(tokens, None if tag is None else (tag,) * len(tokens))

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def with_tags(self, tags) -> "Cell":
        return Cell(self.tokens, tags)

    def untagged(self) -> "Cell":
        return Cell(self.tokens)

    def all_o(self) -> "Cell":
        return Cell(self.tokens, (NerTag.O,) * len(self.tokens))

    def __repr__(self):
        return f"Cell({self.text!r})"


@dataclass(frozen=True)
class Table:
    """Header row plus an n x m body grid.  Row 0 addresses the header."""

    id: str
    header: tuple[Cell, ...]
    body: tuple[tuple[Cell, ...], ...]

    def __post_init__(self):
        header = tuple(self.header)
        body = tuple(tuple(row) for row in self.body)
        if not header:
            raise ValueError(f"table {self.id!r}: header must have at least one column")
        if not body:
            raise ValueError(f"table {self.id!r}: body must have at least one row")
        for i, row in enumerate(body, start=1):
            if len(row) != len(header):
                raise ValueError(
                    f"table {self.id!r}: row {i} has {len(row)} cells, expected {len(header)}")
        object.__setattr__(self, "header", header)
        object.__setattr__(self, "body", body)

    @property
    def n_rows(self) -> int:
        return len(self.body)

    @property
    def n_cols(self) -> int:
        return len(self.header)

    def row(self, i: int) -> tuple[Cell, ...]:
        """Row ``i``; row 0 is the header."""
        if not 0 <= i <= self.n_rows:
            raise IndexError(f"row {i} out of range for {self.n_rows} body rows")
        return self.header if i == 0 else self.body[i - 1]

    def cell(self, i: int, j: int) -> Cell:
        return self.row(i)[j]

    def rows(self):
        """All rows including the header, as (row index, cells) pairs."""
        yield 0, self.header
        for i, row in enumerate(self.body, start=1):
            yield i, row

    def cells(self):
        for i, row in self.rows():
            for j, c in enumerate(row):
                yield (i, j), c

    def is_tagged(self) -> bool:
        return all(c.tags is not None for _, c in self.cells())

    def map_cells(self, fn, new_id: str | None = None) -> "Table":
        """Apply ``fn((i, j), cell)`` to every cell."""
        header = [fn((0, j), c) for j, c in enumerate(self.header)]
        body = [[fn((i, j), c) for j, c in enumerate(row)]
                for i, row in enumerate(self.body, start=1)]
        return Table(self.id if new_id is None else new_id, header, body)

    def untagged(self) -> "Table":
        return self.map_cells(lambda _, c: c.untagged())


def column(table: Table, j: int) -> list[Cell]:
    """Header cell h_j followed by body cells c_{1,j} .. c_{n,j}."""
    if not 0 <= j < table.n_cols:
        raise IndexError(f"column {j} out of range for {table.n_cols} columns")
    return [table.header[j]] + [row[j] for row in table.body]


def entity_types_in(cells: Iterable[Cell]) -> set[str]:
    found = set()
    for c in cells:
        for t in c.tags or ():
            if t is not NerTag.O:
                found.add(t.entity)
    return found


@dataclass(frozen=True)
class Corpus:
    tables: tuple[Table, ...] = ()

    def __post_init__(self):
        tables = tuple(self.tables)
        seen = set()
        for t in tables:
            if t.id in seen:
                raise ValueError(f"duplicate table id {t.id!r}")
            seen.add(t.id)
        object.__setattr__(self, "tables", tables)

    def __len__(self):
        return len(self.tables)

    def __iter__(self):
        return iter(self.tables)

    def __getitem__(self, i):
        return self.tables[i]

    def subset(self, indices: Sequence[int]) -> "Corpus":
        return Corpus([self.tables[i] for i in indices])


@dataclass(frozen=True)
class CorpusStats:
    mean_tokens_per_cell: float
    std_tokens_per_cell: float
    kurtosis_tokens_per_cell: float
    mean_columns: float
    std_columns: float
    n_tables: int = 0
    n_cells: int = 0

    def as_dict(self):
        return {
            "mean_tokens_per_cell": self.mean_tokens_per_cell,
            "std_tokens_per_cell": self.std_tokens_per_cell,
            "kurtosis_tokens_per_cell": self.kurtosis_tokens_per_cell,
            "mean_columns": self.mean_columns,
            "std_columns": self.std_columns,
            "n_tables": self.n_tables,
            "n_cells": self.n_cells,
        }


def _moments(values):
    n = len(values)
    mean = math.fsum(values) / n
    m2 = math.fsum((v - mean) ** 2 for v in values) / n
    m4 = math.fsum((v - mean) ** 4 for v in values) / n
    return mean, m2, m4


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Token-per-cell and column-count statistics.

    Population moments (no bias correction).  Kurtosis is Fisher excess
    kurtosis, m4 / m2**2 - 3; a zero-variance distribution reports 0.0.
    Header and empty cells are counted.
    """
    if len(corpus) == 0:
        raise EmptyInputError("corpus is empty")
    counts = [len(c) for t in corpus for _, c in t.cells()]
    cols = [t.n_cols for t in corpus]
    mean_tok, m2, m4 = _moments(counts)
    kurt = m4 / (m2 * m2) - 3.0 if m2 > 0 else 0.0
    mean_col, c2, _ = _moments(cols)
    return CorpusStats(mean_tok, math.sqrt(m2), kurt, mean_col, math.sqrt(c2),
                       n_tables=len(cols), n_cells=len(counts))


# -- file I/O ---------------------------------------------------------------

TABLE_SUFFIX = ".table.json"


def table_to_dict(table: Table) -> dict:
    doc = {
        "id": table.id,
        "header": [list(c.tokens) for c in table.header],
        "body": [[list(c.tokens) for c in row] for row in table.body],
    }
    if any(c.tags is not None for _, c in table.cells()):
        def tags_of(c):
            return None if c.tags is None else [t.value for t in c.tags]
        doc["tags"] = {
            "header": [tags_of(c) for c in table.header],
            "body": [[tags_of(c) for c in row] for row in table.body],
        }
    return doc


def _parse_cell(tokens, tags, where):
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ParseError(f"{where}: tokens must be a list of strings")
    if tags is not None:
        if not isinstance(tags, list):
            raise ParseError(f"{where}: tags must be a list or null")
        if not tags and tokens:
            tags = None  # empty annotation field
    if tags is not None and len(tags) != len(tokens):
        raise ParseError(f"{where}: {len(tags)} tags for {len(tokens)} tokens")
    try:
        return Cell(tokens, None if tags is None else [as_tag(t) for t in tags])
    except (ValueError, ParseError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def table_from_dict(doc: dict, source: str = "<table>") -> Table:
    try:
        tid = doc["id"]
        header = doc["header"]
        body = doc["body"]
    except (KeyError, TypeError):
        raise ParseError(f"{source}: missing id/header/body") from None
    tags = doc.get("tags") or {}
    htags = tags.get("header") or [None] * len(header)
    btags = tags.get("body") or [[None] * len(r) for r in body]
    if len(htags) != len(header):
        raise ParseError(f"{source}: header tags cover {len(htags)} of {len(header)} cells")
    if len(btags) != len(body):
        raise ParseError(f"{source}: body tags cover {len(btags)} of {len(body)} rows")
    hcells = [_parse_cell(tok, tg, f"{source}: row 0, column {j}")
              for j, (tok, tg) in enumerate(zip(header, htags))]
    rows = []
    for i, (row, trow) in enumerate(zip(body, btags), start=1):
        trow = trow if trow is not None else [None] * len(row)
        if len(trow) != len(row):
            raise ParseError(f"{source}: row {i} tags cover {len(trow)} of {len(row)} cells")
        rows.append([_parse_cell(tok, tg, f"{source}: row {i}, column {j}")
                     for j, (tok, tg) in enumerate(zip(row, trow))])
    try:
        return Table(str(tid), hcells, rows)
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from None


def write_table(table: Table, path) -> None:
    text = json.dumps(table_to_dict(table), ensure_ascii=False, indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def read_table(path) -> Table:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return table_from_dict(doc, str(path))


def write_corpus(corpus: Corpus, path) -> None:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for t in corpus:
        write_table(t, out / f"{t.id}{TABLE_SUFFIX}")


def read_corpus(path) -> Corpus:
    """Load every ``*.table.json`` in a directory, ordered by file name."""
    root = Path(path)
    if not root.is_dir():
        raise ParseError(f"{root}: not a corpus directory")
    tables = [read_table(p) for p in sorted(root.glob(f"*{TABLE_SUFFIX}"))]
    try:
        return Corpus(tables)
    except ValueError as exc:
        raise ParseError(f"{root}: {exc}") from None
