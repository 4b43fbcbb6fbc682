"""Table linearization with cell-level positions, segments and the
row/column visibility mask."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SequenceTooLongError
from .table import Corpus, Table
from .tokenize import normalize

HEADER, BODY = 0, 1
PAD_ID, UNK_ID = 0, 1
RESERVED = ("[PAD]", "[UNK]")
IGNORE = -1
DEFAULT_MAX_LEN = 512

ATTENTION_MODES = ("table_mask", "full")


class Vocabulary:
    """Normalized token -> id map with PAD=0 and UNK=1 reserved."""

    def __init__(self, tokens=()):
        self._itos = list(RESERVED)
        self._stoi = {}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        token = normalize(token)
        if token not in self._stoi:
            self._stoi[token] = len(self._itos)
            self._itos.append(token)
        return self._stoi[token]

    def extend(self, tokens) -> "Vocabulary":
        """Copy with unseen ``tokens`` appended in sorted order."""
        new = Vocabulary(self.tokens)
        for tok in sorted({normalize(t) for t in tokens} - set(self._stoi)):
            new.add(tok)
        return new

    def __getitem__(self, token: str) -> int:
        return self._stoi.get(normalize(token), UNK_ID)

    def __contains__(self, token) -> bool:
        return normalize(token) in self._stoi

    def __len__(self):
        return len(self._itos)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def token(self, idx: int) -> str:
        return self._itos[idx]

    @property
    def tokens(self) -> list[str]:
        """Non-reserved tokens in id order."""
        return self._itos[len(RESERVED):]

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def build_vocab(corpus: Corpus, min_count: int = 1) -> Vocabulary:
    """Tokens with count >= min_count, ordered by count desc then text."""
    counts = Counter(normalize(tok) for t in corpus for _, c in t.cells() for tok in c.tokens)
    keep = [tok for tok, n in counts.items() if n >= min_count]
    keep.sort(key=lambda tok: (-counts[tok], tok))
    return Vocabulary(keep)


@dataclass
class LinearizedInput:
    token_ids: np.ndarray
    segments: np.ndarray
    positions: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    mask: np.ndarray
    tags: np.ndarray | None
    spans: list  # ((row, col), start, length) per cell, header first

    def __len__(self):
        return len(self.token_ids)

    def cell_tokens(self, vocab: Vocabulary | None = None):
        """Token grid rebuilt from spans: {(row, col): [token ids or strings]}."""
        out = {}
        for coord, start, length in self.spans:
            ids = self.token_ids[start:start + length].tolist()
            out[coord] = [vocab.token(i) for i in ids] if vocab else ids
        return out


def visibility_matrix(rows, cols=None) -> np.ndarray:
    """alpha[i, j] = 1 iff tokens i and j share a row or a column.

    Takes a LinearizedInput or explicit row and column index arrays.
    """
    if cols is None:
        rows, cols = rows.rows, rows.cols
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    return (rows[:, None] == rows[None, :]) | (cols[:, None] == cols[None, :])


def linearize(table: Table, vocab: Vocabulary, attention_mode: str = "table_mask",
              max_len: int = DEFAULT_MAX_LEN) -> LinearizedInput:
    """Header cells first, then body cells row-major.

    ``attention_mode="full"`` is the sequential ablation: global positions,
    a single segment id and an all-ones mask.
    """
    if attention_mode not in ATTENTION_MODES:
        raise ValueError(f"unknown attention mode {attention_mode!r}")
    ids, segs, pos, rows, cols, tags, spans = [], [], [], [], [], [], []
    tagged = table.is_tagged()
    for (i, j), cell in table.cells():
        spans.append(((i, j), len(ids), len(cell)))
        for p, tok in enumerate(cell.tokens):
            ids.append(vocab[tok])
            segs.append(HEADER if i == 0 else BODY)
            pos.append(p)
            rows.append(i)
            cols.append(j)
        if cell.tags is not None:
            tags.extend(t.index for t in cell.tags)
        else:
            tags.extend([IGNORE] * len(cell))
    if len(ids) > max_len:
        raise SequenceTooLongError(
            f"table {table.id!r} linearizes to {len(ids)} tokens (max {max_len})")
    rows_a = np.array(rows, dtype=np.int64)
    cols_a = np.array(cols, dtype=np.int64)
    if attention_mode == "full":
        segs_a = np.zeros(len(ids), dtype=np.int64)
        pos_a = np.arange(len(ids), dtype=np.int64)
        mask = np.ones((len(ids), len(ids)), dtype=bool)
    else:
        segs_a = np.array(segs, dtype=np.int64)
        pos_a = np.array(pos, dtype=np.int64)
        mask = visibility_matrix(rows_a, cols_a)
    has_tags = tagged or any(t != IGNORE for t in tags)
    return LinearizedInput(
        token_ids=np.array(ids, dtype=np.int64),
        segments=segs_a,
        positions=pos_a,
        rows=rows_a,
        cols=cols_a,
        mask=mask,
        tags=np.array(tags, dtype=np.int64) if has_tags else None,
        spans=spans,
    )


@dataclass
class Batch:
    token_ids: np.ndarray   # (B, L)
    segments: np.ndarray
    positions: np.ndarray
    mask: np.ndarray        # (B, L, L) bool
    tags: np.ndarray        # (B, L), IGNORE where unlabeled or padded
    lengths: np.ndarray


def pad_batch(inputs: list[LinearizedInput]) -> Batch:
    """Pad to the longest input.  Pad slots see only themselves and carry no label."""
    B = len(inputs)
    L = max((len(x) for x in inputs), default=0)
    ids = np.full((B, L), PAD_ID, dtype=np.int64)
    segs = np.zeros((B, L), dtype=np.int64)
    pos = np.zeros((B, L), dtype=np.int64)
    tags = np.full((B, L), IGNORE, dtype=np.int64)
    mask = np.zeros((B, L, L), dtype=bool)
    idx = np.arange(L)
    mask[:, idx, idx] = True
    for b, x in enumerate(inputs):
        n = len(x)
        ids[b, :n] = x.token_ids
        segs[b, :n] = x.segments
        pos[b, :n] = x.positions
        mask[b, :n, :n] = x.mask
        if x.tags is not None:
            tags[b, :n] = x.tags
    return Batch(ids, segs, pos, mask, tags, np.array([len(x) for x in inputs]))
