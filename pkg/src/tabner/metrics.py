"""Token-level sequence labeling evaluation.

Micro F1 pools tp/fp/fn over the four entity classes; O is never scored
as a class, but an entity predicted as O still counts as a false negative.
Zero-denominator ratios are 1.0 when there was nothing to get wrong and 0.0
otherwise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError
from .table import ENTITY_TYPES, TAG_ORDER, Corpus

N = len(TAG_ORDER)


def _ratio(num, den, errors):
    if den:
        return num / den
    return 1.0 if errors == 0 else 0.0


@dataclass
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    micro_f1: float
    per_class: dict
    confusion: np.ndarray  # rows gold, columns predicted, TAG_ORDER indices

    @property
    def micro_precision(self):
        tp, fp, fn = _pooled(self.confusion)
        return _ratio(tp, tp + fp, fn + fp)

    @property
    def micro_recall(self):
        tp, fp, fn = _pooled(self.confusion)
        return _ratio(tp, tp + fn, fn + fp)

    def as_dict(self):
        return {
            "micro_f1": self.micro_f1,
            "per_class": {k: vars(v) for k, v in self.per_class.items()},
            "confusion": {"labels": [t.value for t in TAG_ORDER],
                          "matrix": self.confusion.tolist()},
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["micro_f1"],
                   {k: ClassScore(**v) for k, v in doc["per_class"].items()},
                   np.array(doc["confusion"]["matrix"], dtype=np.int64))

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def format_table(self):
        lines = [f"{'class':<8}{'precision':>11}{'recall':>9}{'f1':>8}{'support':>9}"]
        for name, s in self.per_class.items():
            lines.append(f"{name:<8}{s.precision:>11.4f}{s.recall:>9.4f}{s.f1:>8.4f}{s.support:>9d}")
        lines.append(f"{'micro':<8}{self.micro_precision:>11.4f}{self.micro_recall:>9.4f}"
                     f"{self.micro_f1:>8.4f}{sum(s.support for s in self.per_class.values()):>9d}")
        return "\n".join(lines)


def _pooled(conf):
    tp = fp = fn = 0
    for c in range(1, N):
        tp += conf[c, c]
        fp += conf[:, c].sum() - conf[c, c]
        fn += conf[c, :].sum() - conf[c, c]
    return int(tp), int(fp), int(fn)


def report_from_confusion(conf: np.ndarray) -> EvalReport:
    per_class = {}
    for c, name in enumerate(ENTITY_TYPES, start=1):
        tp = int(conf[c, c])
        fp = int(conf[:, c].sum()) - tp
        fn = int(conf[c, :].sum()) - tp
        per_class[name] = ClassScore(
            precision=_ratio(tp, tp + fp, fn),
            recall=_ratio(tp, tp + fn, fp),
            f1=_ratio(2 * tp, 2 * tp + fp + fn, fp + fn),
            support=tp + fn,
        )
    tp, fp, fn = _pooled(conf)
    return EvalReport(_ratio(2 * tp, 2 * tp + fp + fn, fp + fn), per_class, conf)


def confusion_from_ids(gold, pred) -> np.ndarray:
    """Counts over aligned tag-index arrays; negative gold entries are skipped."""
    gold = np.asarray(gold).ravel()
    pred = np.asarray(pred).ravel()
    keep = gold >= 0
    conf = np.zeros((N, N), dtype=np.int64)
    np.add.at(conf, (gold[keep], pred[keep]), 1)
    return conf


def evaluate(gold: Corpus, pred: Corpus) -> EvalReport:
    """Compare tagged corpora cell by cell.  Tables are matched by id;
    gold cells without tags are not scored."""
    by_id = {t.id: t for t in pred}
    conf = np.zeros((N, N), dtype=np.int64)
    for gt in gold:
        pt = by_id.get(gt.id)
        if pt is None:
            raise AlignmentError(f"table {gt.id!r} missing from predictions")
        if (pt.n_rows, pt.n_cols) != (gt.n_rows, gt.n_cols):
            raise AlignmentError(
                f"table {gt.id!r}: shape {pt.n_rows}x{pt.n_cols} vs gold {gt.n_rows}x{gt.n_cols}")
        for (coord, gc), (_, pc) in zip(gt.cells(), pt.cells()):
            if gc.tags is None:
                continue
            if pc.tokens != gc.tokens or pc.tags is None:
                raise AlignmentError(
                    f"table {gt.id!r}, cell {coord}: predicted cell does not align with gold")
            for g, p in zip(gc.tags, pc.tags):
                conf[g.index, p.index] += 1
    return report_from_confusion(conf)
