import numpy as np
import pytest
from hypothesis import strategies as st

from tabner.rdl import graph_from_triples, parse_triples
from tabner.table import Cell, Corpus, NerTag, Table

O, TAG, EQ, QUANT, UOM = NerTag.O, NerTag.TAG, NerTag.EQ, NerTag.QUANT, NerTag.UOM

PUMP_GRAPH_TSV = """\
# pump with two quantities, each with one unit
pump\ttype\tEQ
pump\thasQuantity\tpressure
pump\thasQuantity\tcapacity
pressure\ttype\tQUANT
capacity\ttype\tQUANT
pressure\thasUoM\tbar
capacity\thasUoM\tl
bar\ttype\tUoM
l\ttype\tUoM
"""


def cell(text, *tags):
    toks = text.split()
    if not tags:
        return Cell(toks)
    if len(tags) == 1:
        tags = tags * len(toks)
    return Cell(toks, tags)


def plant_table(tid="plant"):
    """Equipment-sheet table in the style of an industrial plant spreadsheet."""
    header = [cell("Tag", O), cell("Description", O), cell("Nominal pressure bar", QUANT, QUANT, UOM),
              cell("Design pressure", QUANT), cell("Remarks", O)]
    body = [
        [cell("P - 101 A", TAG), cell("Centrifugal pump", EQ), cell("10", O),
         cell("16 bar", O, UOM), cell("spare part list", O)],
        [cell("V - 2001", TAG), cell("Storage tank", EQ), cell("2.5", O),
         cell("6 bar", O, UOM), cell("", )],
        [cell("HX - 7", TAG), cell("Heat exchanger shell", EQ, EQ, O), cell("8", O),
         cell("12 bar at 120 Celsius", O, UOM, O, O, UOM), cell("see note", O)],
    ]
    body[1][4] = Cell((), ())
    return Table(tid, header, body)


@pytest.fixture
def plant():
    return plant_table()


@pytest.fixture
def pump_graph():
    return graph_from_triples(parse_triples(PUMP_GRAPH_TSV.splitlines()))


WORDS = ["pump", "valve", "bar", "l", "tank", "A1", "x", "pressure", "12", "-", "kw"]


@st.composite
def tables(draw, max_rows=6, max_cols=6, max_tokens=4, tagged=True, min_tokens=0):
    n = draw(st.integers(1, max_rows))
    m = draw(st.integers(1, max_cols))

    def one_cell():
        toks = draw(st.lists(st.sampled_from(WORDS), min_size=min_tokens, max_size=max_tokens))
        tags = draw(st.lists(st.sampled_from(list(NerTag)), min_size=len(toks),
                             max_size=len(toks))) if tagged else None
        return Cell(toks, tags)
    header = [one_cell() for _ in range(m)]
    body = [[one_cell() for _ in range(m)] for _ in range(n)]
    return Table("t", header, body)


def random_table(rng, max_rows=6, max_cols=6, max_tokens=4, tid="t", tagged=True):
    n = int(rng.integers(1, max_rows + 1))
    m = int(rng.integers(1, max_cols + 1))

    def one_cell():
        k = int(rng.integers(0, max_tokens + 1))
        toks = [WORDS[i] for i in rng.integers(len(WORDS), size=k)]
        tags = [list(NerTag)[i] for i in rng.integers(5, size=k)] if tagged else None
        return Cell(toks, tags)
    return Table(tid, [one_cell() for _ in range(m)],
                 [[one_cell() for _ in range(m)] for _ in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance results, printed once at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
