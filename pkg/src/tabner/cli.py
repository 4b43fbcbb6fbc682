"""Command line interface: ``tabner <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .augment import AugmentConfig, LwtrAugmenter, RdlTabAugmenter, augment_corpus
from .errors import ConfigurationError, TabnerError
from .harness import ExperimentConfig, cross_validate, probe_context, write_run
from .metrics import evaluate
from .model import EncoderModel
from .rdl import load_graph, write_triples
from .rule_ner import rule_predict_corpus
from .synth import generate_synthetic_corpus, make_synthetic_graph
from .table import compute_stats, read_corpus, write_corpus

log = logging.getLogger("tabner")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def cmd_stats(args):
    stats = compute_stats(read_corpus(args.corpus))
    if args.json:
        print(json.dumps(stats.as_dict(), indent=2))
        return
    rows = [("tables", f"{stats.n_tables}"), ("cells", f"{stats.n_cells}"),
            ("mean tokens/cell", f"{stats.mean_tokens_per_cell:.4f}"),
            ("std tokens/cell", f"{stats.std_tokens_per_cell:.4f}"),
            ("kurtosis tokens/cell", f"{stats.kurtosis_tokens_per_cell:.4f}"),
            ("mean columns", f"{stats.mean_columns:.4f}"),
            ("std columns", f"{stats.std_columns:.4f}")]
    for name, value in rows:
        print(f"{name:<22}{value:>12}")
    print("(population moments; kurtosis is Fisher excess, 0 for zero variance)")


def cmd_augment(args):
    corpus = read_corpus(args.corpus)
    if args.mode == "rdltab":
        if not args.triples:
            raise ConfigurationError("--mode rdltab needs --triples")
        cfg = AugmentConfig(k=args.k, n_samples=args.n, seed=args.seed)
        augmenter = RdlTabAugmenter(load_graph(args.triples), corpus, cfg)
    else:
        augmenter = LwtrAugmenter(corpus, args.n)
    out = augment_corpus(corpus, augmenter, args.seed)
    write_corpus(out, args.out)
    print(f"wrote {len(out)} augmented tables to {args.out}")


def _seed_override(cfg):
    env = os.environ.get("TABNER_SEED")
    if env is None:
        return cfg
    try:
        return replace(cfg, seed=int(env))
    except ValueError:
        raise ConfigurationError(f"TABNER_SEED must be an integer, got {env!r}") from None


def cmd_train(args):
    cfg = _seed_override(ExperimentConfig.load(args.config))
    base = Path(args.config).resolve().parent
    paths = {k: str((base / v).resolve()) if not Path(v).is_absolute() else v
             for k, v in cfg.paths.items()}
    if args.out:
        paths["output_dir"] = args.out
    cfg = replace(cfg, paths=paths)
    if "output_dir" not in cfg.paths:
        raise ConfigurationError("no output directory (paths.output_dir or --out)")
    run, models = cross_validate(cfg, keep_models=True)
    path = write_run(run, cfg.paths["output_dir"], models, figures=not args.no_figures)
    for rec in run.folds:
        print(f"fold {rec.fold}: test micro F1 {rec.test.micro_f1:.4f} "
              f"({len(rec.trace)} epochs, best {rec.best_epoch})")
    print(f"micro F1 {run.mean_f1:.4f} +- {run.std_f1:.4f}  [{cfg.attention_mode}, {cfg.aug_mode}]")
    print(f"run record: {path}")


def _print_report(report, json_path=None):
    print(report.format_table())
    if json_path:
        Path(json_path).write_text(report.to_json() + "\n", encoding="utf-8")


def cmd_eval(args):
    _print_report(evaluate(read_corpus(args.gold), read_corpus(args.pred)), args.json)


def cmd_rule_ner(args):
    corpus = read_corpus(args.corpus)
    pred = rule_predict_corpus(corpus, load_graph(args.triples))
    if args.out:
        write_corpus(pred, args.out)
        print(f"wrote predictions to {args.out}")
    if any(c.tags is not None for t in corpus for _, c in t.cells()):
        _print_report(evaluate(corpus, pred), args.json)


def cmd_probe(args):
    model, vocab, meta = EncoderModel.load(args.model)
    if vocab is None:
        raise ConfigurationError(f"{args.model} carries no vocabulary")
    report = probe_context(model, vocab, args.target,
                           attention_mode=meta.get("attention_mode", "table_mask"))
    print(json.dumps(report.as_dict(), indent=2))
    if args.out:
        from .plotting import plot_probe
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "probe.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n",
                                        encoding="utf-8")
        plot_probe(report, out / "probe_logits.png")


def cmd_synth(args):
    corpus = generate_synthetic_corpus(load_graph(args.triples), args.tables, args.rows, args.seed)
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} tables to {args.out}")


def cmd_synth_graph(args):
    write_triples(make_synthetic_graph(args.equipment, args.seed).to_triples(), args.out)
    print(f"wrote graph with {args.equipment} equipment names to {args.out}")


def build_parser():
    p = _Parser(prog="tabner", description=__doc__)
    p.add_argument("--version", action="version", version=f"tabner {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="corpus statistics")
    s.add_argument("corpus")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("augment", help="write augmented tables")
    s.add_argument("--mode", choices=("lwtr", "rdltab"), required=True)
    s.add_argument("--n", type=int, choices=(1, 2), default=1)
    s.add_argument("--triples")
    s.add_argument("--k", type=int, default=2, help="seed columns kept by rdltab")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("corpus")
    s.add_argument("out")
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("train", help="cross-validated training run")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="overrides paths.output_dir")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="token-level F1 of predictions")
    s.add_argument("--gold", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--json", help="also write the report as JSON")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("rule-ner", help="vocabulary-matching baseline")
    s.add_argument("--triples", required=True)
    s.add_argument("--out", help="write predicted corpus here")
    s.add_argument("--json", help="write the F1 report as JSON")
    s.add_argument("corpus")
    s.set_defaults(func=cmd_rule_ner)

    s = sub.add_parser("probe", help="logits of an ambiguous token in two contexts")
    s.add_argument("--model", required=True)
    s.add_argument("--target", default="l")
    s.add_argument("--out", help="write probe.json and probe_logits.png here")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("synth", help="generate a tagged synthetic corpus")
    s.add_argument("--triples", required=True)
    s.add_argument("--tables", type=int, required=True)
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("synth-graph", help="write a synthetic reference graph")
    s.add_argument("--equipment", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("out")
    s.set_defaults(func=cmd_synth_graph)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TabnerError as exc:
        print(f"tabner: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"tabner: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
