import numpy as np

from tabner.augment import generate_tag
from tabner.rdl import graph_from_triples, parse_triples
from tabner.rule_ner import PhraseMatcher, rule_predict, select_tag_column
from tabner.synth import generate_synthetic_corpus, make_synthetic_graph
from tabner.table import Cell, NerTag, Table

from conftest import cell

G = graph_from_triples(parse_triples([
    "p\ttype\tEQ", "cp\ttype\tEQ", "cp\tlabel\tcentrifugal pump", "p\tlabel\tpump",
    "pr\ttype\tQUANT", "pr\tlabel\tpressure", "dp\ttype\tQUANT", "dp\tlabel\tdesign pressure",
    "bar\ttype\tUoM", "p\thasQuantity\tpr", "pr\thasUoM\tbar"]))


def tags_of(t, i, j):
    return [g.value for g in t.cell(i, j).tags]


def test_exact_quantity_match():
    t = Table("t", [cell("x")], [[cell("pressure")]])
    assert tags_of(rule_predict(t, G), 1, 0) == ["I-QUANT"]


def test_longest_match_wins():
    t = Table("t", [cell("Design Pressure")], [[cell("Centrifugal pump unit")]])
    out = rule_predict(t, G)
    assert tags_of(out, 1, 0) == ["I-EQ", "I-EQ", "O"]
    assert tags_of(out, 0, 0) == ["I-QUANT", "I-QUANT"]


def test_matcher_brute_force_oracle():
    m = PhraseMatcher(G)
    toks = "the centrifugal pump at design pressure bar".split()
    # every greedy step takes the longest phrase starting at the cursor
    assert m.matches(toks) == [(1, 3, "EQ"), (4, 6, "QUANT"), (6, 7, "UoM")]


def test_tag_column_selected(rng):
    tags = [generate_tag("centrifugal pump", rng=rng) for _ in range(3)]
    header = [cell("Description"), cell("Tag no"), cell("Status")]
    body = [[cell("centrifugal pump"), Cell.from_text(tg), cell("ok")] for tg in tags]
    t = Table("t", header, body)
    assert select_tag_column(t, PhraseMatcher(G)) == 1
    out = rule_predict(t, G)
    for i in range(1, 4):
        assert set(out.cell(i, 1).tags) == {NerTag.TAG}
        assert set(out.cell(i, 2).tags) == {NerTag.O}


def test_tie_breaks_leftmost():
    t = Table("t", [cell("a"), cell("b")], [[cell("x1"), cell("y1")], [cell("x2"), cell("y2")]])
    assert select_tag_column(t, PhraseMatcher(G)) == 0


def test_only_alphanumeric_tokens_tagged_in_tag_column():
    t = Table("t", [cell("a")], [[cell("P101 spare")], [cell("P102 ok")]])
    out = rule_predict(t, G)
    assert tags_of(out, 1, 0) == ["I-TAG", "O"]


def test_at_most_one_tag_column_and_determinism(rng):
    corpus = generate_synthetic_corpus(make_synthetic_graph(30, seed=1), 15, 4, seed=1)
    g = make_synthetic_graph(30, seed=1)
    for t in corpus:
        out = rule_predict(t, g)
        cols = {j for (i, j), c in out.cells() if NerTag.TAG in c.tags}
        assert len(cols) <= 1
        renamed = Table("other", t.header, t.body)
        assert [c.tags for _, c in rule_predict(renamed, g).cells()] == [c.tags for _, c in out.cells()]
