import json
import subprocess
import sys

import pytest

from tabner.cli import main
from tabner.table import read_corpus, write_corpus

from conftest import plant_table


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth-graph", "--equipment", "20", "--seed", "1", str(d / "g.tsv")]) == 0
    assert main(["synth", "--triples", str(d / "g.tsv"), "--tables", "6", "--rows", "3",
                 "--seed", "1", str(d / "corpus")]) == 0
    return d


def small_config(d, out):
    cfg = {"folds": 2, "aug_mode": "rdltab", "seed": 3,
           "train": {"max_epochs": 2},
           "encoder": {"d_model": 16, "n_heads": 2, "n_layers": 1, "d_ff": 32},
           "paths": {"corpus": "corpus", "triples": "g.tsv", "output_dir": out}}
    path = d / f"{out}.json"
    path.write_text(json.dumps(cfg))
    return path


def test_stats(workspace, capsys):
    assert main(["stats", "--json", str(workspace / "corpus")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_tables"] == 6
    assert main(["stats", str(workspace / "corpus")]) == 0
    assert "kurtosis" in capsys.readouterr().out


def test_augment_byte_identical(workspace):
    outs = []
    for name in ("a1", "a2"):
        assert main(["augment", "--mode", "rdltab", "--n", "2", "--triples", str(workspace / "g.tsv"),
                     "--seed", "5", str(workspace / "corpus"), str(workspace / name)]) == 0
        outs.append(sorted((workspace / name).iterdir()))
    assert len(outs[0]) == 12
    assert [p.read_bytes() for p in outs[0]] == [p.read_bytes() for p in outs[1]]
    assert main(["augment", "--mode", "lwtr", str(workspace / "corpus"), str(workspace / "lw")]) == 0
    assert len(read_corpus(workspace / "lw")) == 6


def test_augment_rdltab_without_triples(workspace):
    assert main(["augment", "--mode", "rdltab", str(workspace / "corpus"), str(workspace / "x")]) == 1


def test_train_eval_probe(workspace, capsys, monkeypatch):
    monkeypatch.delenv("TABNER_SEED", raising=False)
    runs = []
    cfg = small_config(workspace, "run1")
    for _ in range(2):
        assert main(["train", "--config", str(cfg)]) == 0
        runs.append((workspace / "run1" / "run_record.json").read_bytes())
    assert runs[0] == runs[1]
    assert (workspace / "run1" / "figures" / "valid_f1.png").exists()
    assert "micro F1" in capsys.readouterr().out

    monkeypatch.setenv("TABNER_SEED", "11")
    assert main(["train", "--no-figures", "--config", str(small_config(workspace, "run3"))]) == 0
    assert json.loads((workspace / "run3" / "run_record.json").read_text())["config"]["seed"] == 11
    assert not (workspace / "run3" / "figures").exists()

    assert main(["probe", "--model", str(workspace / "run1" / "model_fold0.json"),
                 "--target", "zzzz"]) == 2
    assert main(["eval", "--gold", str(workspace / "corpus"), "--pred", str(workspace / "corpus"),
                 "--json", str(workspace / "rep.json")]) == 0
    assert json.loads((workspace / "rep.json").read_text())["micro_f1"] == 1.0


def test_probe_writes_outputs(tmp_path, workspace):
    from tabner.encoding import Vocabulary
    from tabner.model import EncoderConfig, EncoderModel
    vocab = Vocabulary(["pump", "l", "8", "90", "capacity", "power", "celsius"])
    model = EncoderModel.init(EncoderConfig(d_model=16, n_heads=2, n_layers=1, d_ff=32), len(vocab), 0)
    model.save(tmp_path / "m.json", vocab)
    assert main(["probe", "--model", str(tmp_path / "m.json"), "--out", str(tmp_path / "p")]) == 0
    doc = json.loads((tmp_path / "p" / "probe.json").read_text())
    assert len(doc["logits"]) == 2 and (tmp_path / "p" / "probe_logits.png").exists()


def test_rule_ner(workspace, capsys):
    assert main(["rule-ner", "--triples", str(workspace / "g.tsv"), "--out", str(workspace / "rn"),
                 str(workspace / "corpus")]) == 0
    assert "micro" in capsys.readouterr().out
    assert len(read_corpus(workspace / "rn")) == 6


def test_exit_codes(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["stats"])
    assert exc.value.code == 1
    (tmp_path / "bad").mkdir()
    (tmp_path / "bad" / "t.table.json").write_text("{not json")
    assert main(["stats", str(tmp_path / "bad")]) == 2
    assert main(["stats", str(tmp_path / "missing")]) == 2
    (tmp_path / "cfg.json").write_text('{"folds": 1}')
    assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 1


def test_divergence_exit_code(tmp_path, monkeypatch):
    from tabner import cli
    from tabner.errors import DivergenceError

    def boom(*a, **k):
        raise DivergenceError("loss is nan")
    monkeypatch.setattr(cli, "cross_validate", boom)
    write_corpus([plant_table()], tmp_path / "c")
    (tmp_path / "cfg.json").write_text(json.dumps({"paths": {"corpus": "c", "output_dir": "o"}}))
    assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 3


def test_console_entry_point(workspace):
    r = subprocess.run([sys.executable, "-m", "tabner.cli", "stats", str(workspace / "corpus")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "tables" in r.stdout
