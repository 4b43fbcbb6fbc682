"""Experiment driver: splits, cross-validation, the full-attention ablation,
hyperparameter grid and the context probe."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, LwtrAugmenter, RdlTabAugmenter, TagPattern
from .encoding import ATTENTION_MODES, DEFAULT_MAX_LEN, build_vocab, linearize
from .errors import ConfigurationError, ProbeError
from .metrics import EvalReport, evaluate
from .model import EncoderConfig, EncoderModel, forward
from .rdl import RdlGraph, load_graph
from .synth import graph_tokens
from .table import TAG_ORDER, Cell, Corpus, Table, read_corpus
from .training import EpochRecord, TrainConfig, predict_corpus, train

log = logging.getLogger(__name__)

AUG_MODES = ("none", "lwtr", "rdltab")


@dataclass
class ExperimentConfig:
    folds: int = 5
    valid_fraction: float = 0.10
    aug_mode: str = "none"
    n_samples: int = 1
    attention_mode: str = "table_mask"
    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    paths: dict = field(default_factory=dict)   # corpus, triples, output_dir
    seed: int = 0
    grid_search: bool = False
    min_count: int = 1
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigurationError("folds must be >= 2")
        if not 0.0 < self.valid_fraction < 1.0:
            raise ConfigurationError("valid_fraction must lie in (0, 1)")
        if self.aug_mode not in AUG_MODES:
            raise ConfigurationError(f"aug_mode must be one of {AUG_MODES}")
        if self.attention_mode not in ATTENTION_MODES:
            raise ConfigurationError(f"attention_mode must be one of {ATTENTION_MODES}")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "train" in doc:
                doc["train"] = TrainConfig(**doc["train"])
            if "encoder" in doc:
                doc["encoder"] = EncoderConfig(**doc["encoder"])
            if "augment" in doc:
                aug = dict(doc["augment"])
                if "tag_pattern" in aug:
                    tp = {k: tuple(v) if isinstance(v, list) else v
                          for k, v in aug["tag_pattern"].items()}
                    aug["tag_pattern"] = TagPattern(**tp)
                if "numeric_value_range" in aug:
                    aug["numeric_value_range"] = tuple(aug["numeric_value_range"])
                doc["augment"] = AugmentConfig(**aug)
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid config: {exc}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: line {exc.lineno}: {exc.msg}") from None


# -- records -----------------------------------------------------------------------

@dataclass
class FoldRecord:
    fold: int
    train_ids: list
    valid_ids: list
    test_ids: list
    learning_rate: float
    batch_size: int
    trace: list          # EpochRecord
    best_epoch: int
    test: EvalReport

    def as_dict(self):
        d = {k: getattr(self, k) for k in ("fold", "train_ids", "valid_ids", "test_ids",
                                           "learning_rate", "batch_size", "best_epoch")}
        d["trace"] = [asdict(r) for r in self.trace]
        d["test"] = self.test.as_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["trace"] = [EpochRecord(**r) for r in d["trace"]]
        d["test"] = EvalReport.from_dict(d["test"])
        return cls(**d)


@dataclass
class RunRecord:
    config: dict
    folds: list          # FoldRecord
    mean_f1: float
    std_f1: float
    grid: list = field(default_factory=list)   # [{learning_rate, batch_size, valid_f1}]

    def as_dict(self):
        return {"config": self.config, "folds": [f.as_dict() for f in self.folds],
                "mean_f1": self.mean_f1, "std_f1": self.std_f1, "grid": self.grid}

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], [FoldRecord.from_dict(f) for f in d["folds"]],
                   d["mean_f1"], d["std_f1"], d.get("grid", []))

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "RunRecord":
        return cls.from_dict(json.loads(text))


# -- splits ------------------------------------------------------------------------------

def fold_assignment(n_items: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle indices with ``seed`` and cut them into ``folds`` contiguous groups."""
    if n_items < folds:
        raise ConfigurationError(f"{n_items} tables cannot fill {folds} folds")
    order = np.random.default_rng(seed).permutation(n_items)
    return [np.sort(g) for g in np.array_split(order, folds)]


def split_validation(indices, fraction: float, rng):
    """(train, valid) with at least one validation item."""
    indices = np.asarray(indices)
    n_valid = max(1, int(round(fraction * len(indices))))
    if n_valid >= len(indices):
        raise ConfigurationError("validation split leaves no training tables")
    perm = rng.permutation(len(indices))
    return np.sort(indices[perm[n_valid:]]), np.sort(indices[perm[:n_valid]])


def make_vocab(cfg: ExperimentConfig, train_corpus: Corpus, graph: RdlGraph | None):
    vocab = build_vocab(train_corpus, cfg.min_count)
    return vocab.extend(graph_tokens(graph)) if graph is not None else vocab


def make_augmenter(cfg: ExperimentConfig, train_corpus: Corpus, graph: RdlGraph | None):
    if cfg.aug_mode == "none":
        return None
    if cfg.aug_mode == "lwtr":
        return LwtrAugmenter(train_corpus, cfg.n_samples)
    if graph is None:
        raise ConfigurationError("aug_mode 'rdltab' needs a triple file")
    return RdlTabAugmenter(graph, train_corpus, replace(cfg.augment, n_samples=cfg.n_samples))


def _seed_for(cfg, *keys) -> int:
    return int(np.random.SeedSequence([cfg.seed, *keys]).generate_state(1)[0])


def run_split(cfg: ExperimentConfig, train_corpus: Corpus, valid_corpus: Corpus,
              test_corpus: Corpus, graph: RdlGraph | None = None, fold: int = 0,
              learning_rate=None, batch_size=None):
    """Train on one split and score the test tables; returns (FoldRecord, TrainResult, vocab)."""
    tcfg = replace(cfg.train, seed=_seed_for(cfg, fold, 1),
                   learning_rate=learning_rate or cfg.train.learning_rate,
                   batch_size=batch_size or cfg.train.batch_size)
    vocab = make_vocab(cfg, train_corpus, graph)
    model = EncoderModel.init(cfg.encoder, len(vocab), seed=_seed_for(cfg, fold, 0))
    augmenter = make_augmenter(cfg, train_corpus, graph)
    result = train(model, train_corpus, valid_corpus, tcfg, vocab, augmenter,
                   cfg.attention_mode, cfg.max_len)
    pred = predict_corpus(result.model, vocab, test_corpus, cfg.attention_mode, cfg.max_len)
    rec = FoldRecord(fold, [t.id for t in train_corpus], [t.id for t in valid_corpus],
                     [t.id for t in test_corpus], tcfg.learning_rate, tcfg.batch_size,
                     result.trace, result.best_epoch, evaluate(test_corpus, pred))
    return rec, result, vocab


def _load_inputs(cfg, corpus, graph):
    if corpus is None:
        if "corpus" not in cfg.paths:
            raise ConfigurationError("no corpus given (paths.corpus)")
        corpus = read_corpus(cfg.paths["corpus"])
    if graph is None and cfg.paths.get("triples"):
        graph = load_graph(cfg.paths["triples"])
    return corpus, graph


def _splits(cfg, corpus):
    groups = fold_assignment(len(corpus), cfg.folds, cfg.seed)
    for f, test_idx in enumerate(groups):
        rest = np.sort(np.concatenate([g for k, g in enumerate(groups) if k != f]))
        rng = np.random.default_rng(_seed_for(cfg, f, 2))
        train_idx, valid_idx = split_validation(rest, cfg.valid_fraction, rng)
        yield f, corpus.subset(train_idx), corpus.subset(valid_idx), corpus.subset(test_idx)


def select_hyperparameters(cfg, train_corpus, valid_corpus, graph):
    """Grid over lr_grid x batch_grid scored by best validation F1."""
    grid = []
    for lr, bs in itertools.product(cfg.train.lr_grid, cfg.train.batch_grid):
        rec, result, _ = run_split(cfg, train_corpus, valid_corpus, valid_corpus, graph, 0, lr, bs)
        grid.append({"learning_rate": lr, "batch_size": bs,
                     "valid_f1": max(r.valid_f1 for r in result.trace)})
    best = max(grid, key=lambda g: g["valid_f1"])  # first on ties
    return best["learning_rate"], best["batch_size"], grid


def cross_validate(cfg: ExperimentConfig, corpus: Corpus | None = None,
                   graph: RdlGraph | None = None, keep_models: bool = False):
    """k-fold run.  Returns the RunRecord, plus per-fold (model, vocab) pairs
    when ``keep_models``."""
    corpus, graph = _load_inputs(cfg, corpus, graph)
    lr, bs, grid = cfg.train.learning_rate, cfg.train.batch_size, []
    records, models = [], []
    for f, tr, va, te in _splits(cfg, corpus):
        if f == 0 and cfg.grid_search:
            lr, bs, grid = select_hyperparameters(cfg, tr, va, graph)
            log.info("selected learning_rate=%g batch_size=%d", lr, bs)
        rec, result, vocab = run_split(cfg, tr, va, te, graph, f, lr, bs)
        log.info("fold %d test micro F1 %.4f", f, rec.test.micro_f1)
        records.append(rec)
        if keep_models:
            models.append((result.model, vocab))
    f1 = [r.test.micro_f1 for r in records]
    run = RunRecord(cfg.as_dict(), records, float(np.mean(f1)), float(np.std(f1)), grid)
    return (run, models) if keep_models else run


def run_ablation(cfg: ExperimentConfig, corpus: Corpus | None = None,
                 graph: RdlGraph | None = None, keep_models: bool = False):
    """Same pipeline with the sequential encoding: all-ones mask, global
    positions and one segment id."""
    return cross_validate(replace(cfg, attention_mode="full"), corpus, graph, keep_models)


# -- outputs -----------------------------------------------------------------------------

def write_curves(run: RunRecord, out_dir) -> list[Path]:
    out = Path(out_dir) / "curves"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in run.folds:
        for name, attr in (("loss", "train_loss"), ("valid_f1", "valid_f1")):
            path = out / f"fold{rec.fold}_{name}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["epoch", attr])
                for r in rec.trace:
                    w.writerow([r.epoch, repr(getattr(r, attr))])
            written.append(path)
    return written


def write_run(run: RunRecord, out_dir, models=None, figures=True) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "run_record.json"
    path.write_text(run.to_json() + "\n", encoding="utf-8")
    write_curves(run, out)
    for fold, (model, vocab) in enumerate(models or ()):
        model.save(out / f"model_fold{fold}.json", vocab,
                   meta={"fold": fold, "attention_mode": run.config["attention_mode"],
                         "max_len": run.config["max_len"]})
    if figures:
        from .plotting import plot_run
        plot_run(run, out / "figures")
    return path


# -- context probe -----------------------------------------------------------------------

def _probe_table(tid, quantity, first_value):
    def c(text):
        return Cell.from_text(text)
    return Table(tid, [c("equipment"), c(quantity), c("tag")],
                 [[c("pump"), c(first_value), c("P-101")],
                  [c("pump"), c("90 l"), c("P-102")]])


def probe_tables():
    """Random context (power column, units celsius/l) vs consistent context
    (capacity column, litres)."""
    return (_probe_table("probe_random", "power", "8 celsius"),
            _probe_table("probe_consistent", "capacity", "8 l"))


@dataclass
class ProbeReport:
    target: str
    logits: list           # two 5-vectors, TAG_ORDER
    argmax: list           # two tag strings
    tables: list           # table ids
    expected_trend: str = ("random context argmax O; consistent context argmax I-UoM")

    @property
    def trend_holds(self) -> bool:
        return self.argmax == ["O", "I-UoM"]

    def as_dict(self):
        d = asdict(self)
        d["labels"] = [t.value for t in TAG_ORDER]
        d["trend_holds"] = self.trend_holds
        return d


def probe_context(model: EncoderModel, vocab, target="l", tables=None,
                  attention_mode="table_mask") -> ProbeReport:
    """Unnormalized logits of the last occurrence of ``target`` in each probe table."""
    if target not in vocab:
        raise ProbeError(f"target token {target!r} is not in the model vocabulary")
    tables = tables or probe_tables()
    logits, argmax = [], []
    for t in tables:
        x = linearize(t, vocab, attention_mode)
        hits = [i for i, tid in enumerate(x.token_ids) if vocab.token(int(tid)) == target.lower()]
        if not hits:
            raise ProbeError(f"table {t.id!r} does not contain {target!r}")
        z = forward(model, x)[hits[-1]]
        logits.append(z.tolist())
        argmax.append(TAG_ORDER[int(np.argmax(z))].value)
    return ProbeReport(target, logits, argmax, [t.id for t in tables])
