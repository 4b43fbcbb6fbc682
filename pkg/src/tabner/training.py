"""Mini-batch training with a linearly decaying learning rate and early stopping."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .encoding import DEFAULT_MAX_LEN, Vocabulary, linearize, pad_batch
from .errors import ConfigurationError, DivergenceError, EmptyInputError
from .metrics import confusion_from_ids, report_from_confusion
from .model import OPTIMIZERS, EncoderModel, backward, forward
from .table import TAG_ORDER, Corpus, Table

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 4
    max_epochs: int = 20
    early_stop_patience: int = 3
    seed: int = 0
    lr_grid: list = field(default_factory=lambda: [5e-5, 1e-5, 5e-4])
    batch_grid: list = field(default_factory=lambda: [2, 4, 8])
    optimizer: str = "sgd"
    fixed_aug: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ConfigurationError("batch_size, max_epochs and early_stop_patience must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")


def learning_rate_at(cfg: TrainConfig, epoch: int) -> float:
    """Rate for zero-based ``epoch``: lr * (1 - epoch / max_epochs)."""
    return cfg.learning_rate * (1.0 - epoch / cfg.max_epochs)


@dataclass
class EpochRecord:
    epoch: int          # 1-based
    learning_rate: float
    train_loss: float
    valid_f1: float
    n_examples: int


@dataclass
class TrainResult:
    model: EncoderModel
    trace: list
    best_epoch: int
    stopped_early: bool

    @property
    def peak_valid_epoch(self) -> int:
        """First epoch reaching the highest validation F1."""
        f1 = [r.valid_f1 for r in self.trace]
        return self.trace[int(np.argmax(f1))].epoch


def predict_ids(model, inputs, batch_size=16) -> list[np.ndarray]:
    out = []
    for s in range(0, len(inputs), batch_size):
        chunk = inputs[s:s + batch_size]
        logits = forward(model, pad_batch(chunk))
        out.extend(logits[b, :len(x)].argmax(-1) for b, x in enumerate(chunk))
    return out


def f1_on(model, inputs) -> float:
    conf = np.zeros((len(TAG_ORDER), len(TAG_ORDER)), dtype=np.int64)
    for x, pred in zip(inputs, predict_ids(model, inputs)):
        if x.tags is not None:
            conf += confusion_from_ids(x.tags, pred)
    return report_from_confusion(conf).micro_f1


def predict_table(model, vocab, table: Table, attention_mode="table_mask",
                  max_len=DEFAULT_MAX_LEN) -> Table:
    x = linearize(table, vocab, attention_mode, max_len)
    pred = model.predict(x) if len(x) else np.zeros(0, dtype=int)
    spans = {coord: (start, length) for coord, start, length in x.spans}

    def tag(coord, cell):
        start, length = spans[coord]
        return cell.with_tags([TAG_ORDER[k] for k in pred[start:start + length]])
    return table.map_cells(tag)


def predict_corpus(model, vocab, corpus: Corpus, attention_mode="table_mask",
                   max_len=DEFAULT_MAX_LEN) -> Corpus:
    return Corpus([predict_table(model, vocab, t, attention_mode, max_len) for t in corpus])


def train(model: EncoderModel, train_corpus: Corpus, valid_corpus: Corpus, cfg: TrainConfig,
          vocab: Vocabulary, augmenter=None, attention_mode="table_mask",
          max_len=DEFAULT_MAX_LEN) -> TrainResult:
    """Train in place on a copy of ``model``; returns the best-validation weights.

    With an augmenter, every epoch sees the originals plus ``n_samples``
    freshly generated tables per original (generated once up front when
    ``cfg.fixed_aug``).
    """
    if len(train_corpus) == 0 or len(valid_corpus) == 0:
        raise EmptyInputError("training and validation corpora must be non-empty")
    model = model.copy()
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    aug_rng, order_rng, drop_rng = (np.random.default_rng(s) for s in seeds)

    def lin(t):
        return linearize(t, vocab, attention_mode, max_len)
    originals = [lin(t) for t in train_corpus]
    valid = [lin(t) for t in valid_corpus]

    def augmented():
        if augmenter is None:
            return []
        return [lin(a) for t in train_corpus for a in augmenter.generate(t, aug_rng)]
    fixed = augmented() if cfg.fixed_aug else None

    optimizer = OPTIMIZERS[cfg.optimizer](model.params)
    trace = []
    best_f1, best_epoch, best_params, stale = -1.0, 0, None, 0
    stopped = False
    for epoch in range(cfg.max_epochs):
        lr = learning_rate_at(cfg, epoch)
        stream = originals + (fixed if fixed is not None else augmented())
        order = order_rng.permutation(len(stream))
        total, count = 0.0, 0
        for s in range(0, len(order), cfg.batch_size):
            batch = pad_batch([stream[i] for i in order[s:s + cfg.batch_size]])
            n_labeled = int((batch.tags >= 0).sum())
            if n_labeled == 0:
                continue
            value, grads = backward(model, batch, train_mode=True, rng=drop_rng)
            if not math.isfinite(value) or not all(np.isfinite(g).all() for g in grads.values()):
                raise DivergenceError(
                    f"non-finite loss or gradient at epoch {epoch + 1}, batch {s // cfg.batch_size}")
            optimizer.step(model.params, grads, lr)
            total += value * n_labeled
            count += n_labeled
        valid_f1 = f1_on(model, valid)
        rec = EpochRecord(epoch + 1, lr, total / count if count else 0.0, valid_f1, len(stream))
        trace.append(rec)
        log.info("epoch %d lr %.3g loss %.4f valid F1 %.4f", rec.epoch, lr, rec.train_loss, valid_f1)
        if valid_f1 > best_f1:
            best_f1, best_epoch, stale = valid_f1, epoch + 1, 0
            best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                stopped = True
                break
    model.params = best_params
    return TrainResult(model, trace, best_epoch, stopped)
