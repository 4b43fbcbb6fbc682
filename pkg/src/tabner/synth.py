"""Synthetic reference graphs and tagged plant-style corpora for desk-scale runs."""
from __future__ import annotations

import numpy as np

from .augment import TagPattern, format_value, generate_tag
from .rdl import RdlGraph, sample_equipment, sample_quantity, sample_uom
from .table import Cell, Corpus, NerTag, Table
from .tokenize import normalize_phrase

# base equipment type -> applicable quantities
EQUIPMENT_BASES = {
    "pump": ["pressure", "capacity", "power", "speed", "flow rate", "head"],
    "compressor": ["pressure", "power", "speed", "flow rate", "temperature"],
    "tank": ["capacity", "volume", "level", "temperature", "design pressure"],
    "vessel": ["volume", "design pressure", "design temperature", "weight"],
    "heat exchanger": ["duty", "temperature", "design pressure", "area"],
    "valve": ["pressure", "flow rate", "size"],
    "motor": ["power", "speed", "voltage", "current"],
    "fan": ["flow rate", "power", "speed"],
    "boiler": ["pressure", "capacity", "temperature", "duty"],
    "filter": ["pressure drop", "flow rate", "size"],
    "turbine": ["power", "speed", "temperature"],
    "agitator": ["power", "speed"],
    "cooler": ["duty", "temperature", "pressure drop"],
    "separator": ["volume", "design pressure", "level"],
}

MODIFIERS = [
    "centrifugal", "reciprocating", "screw", "submersible", "vertical", "horizontal",
    "booster", "feed", "transfer", "cooling", "storage", "relief", "dosing", "vacuum",
    "axial", "seawater", "lube", "fuel", "flare", "auxiliary", "standby", "export",
    "injection", "recycle", "condensate", "drain", "firewater", "ballast", "glycol", "sludge",
]

# units avoid digits and short letter runs so they rarely collide with tag fragments
QUANTITY_UNITS = {
    "pressure": ["bar", "psi", "kpa"],
    "design pressure": ["barg", "psig"],
    "pressure drop": ["mbar", "kpa"],
    "capacity": ["litre", "gallon", "cbm"],
    "volume": ["cbm", "litre"],
    "power": ["kw", "hp"],
    "speed": ["rpm"],
    "flow rate": ["m3/h", "gpm"],
    "head": ["metre"],
    "temperature": ["degc", "degf", "kelvin"],
    "design temperature": ["degc"],
    "level": ["percent", "metre"],
    "weight": ["tonne", "lbs"],
    "duty": ["kw", "mmbtu"],
    "area": ["sqm"],
    "voltage": ["volt"],
    "current": ["ampere"],
    "size": ["inch"],
}

EQ_HEADERS = ["equipment", "equipment type", "description", "item description"]
TAG_HEADERS = ["tag", "tag no", "tag number", "item"]
DISTRACTOR_HEADERS = ["remarks", "status", "location", "material", "vendor", "area code", "note"]
LOREM = ("lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor "
         "incididunt ut labore et dolore magna aliqua enim ad minim veniam quis nostrud "
         "exercitation ullamco laboris nisi aliquip ex ea commodo consequat").split()


def make_synthetic_graph(n_equipment=50, seed=0) -> RdlGraph:
    """``n_equipment`` distinct "<modifier> <base>" names with their base's quantities."""
    rng = np.random.default_rng(seed)
    combos = [f"{m} {b}" for b in EQUIPMENT_BASES for m in MODIFIERS]
    if n_equipment > len(combos):
        raise ValueError(f"at most {len(combos)} equipment names available")
    picked = sorted(combos[i] for i in rng.choice(len(combos), size=n_equipment, replace=False))
    e2q = {}
    for name in picked:
        base = next(b for b in EQUIPMENT_BASES if name.endswith(" " + b))
        e2q[name] = frozenset(EQUIPMENT_BASES[base])
    quants = frozenset(q for qs in e2q.values() for q in qs)
    q2u = {q: frozenset(QUANTITY_UNITS[q]) for q in quants}
    uoms = frozenset(u for us in q2u.values() for u in us)
    return RdlGraph(frozenset(picked), quants, uoms, e2q, q2u)


def _o_cell(text):
    return Cell.from_text(text, NerTag.O)


def synthetic_table(graph: RdlGraph, rows: int, rng, table_id: str,
                    uom_probability=0.8, value_range=(0.0, 1000.0),
                    pattern: TagPattern = TagPattern()) -> Table:
    """Equipment column, one diagonal quantity column per row, tag column and
    1-3 low-cardinality lorem distractor columns at random positions."""
    eqs = [sample_equipment(graph, rng) for _ in range(rows)]
    columns = [(_o_cell(EQ_HEADERS[rng.integers(len(EQ_HEADERS))]),
                [Cell.from_text(eq, NerTag.EQ) for eq in eqs])]
    for r, eq in enumerate(eqs):
        quant = sample_quantity(graph, eq, rng)
        value = _o_cell(format_value(rng, *value_range))
        if rng.random() < uom_probability:
            uom = sample_uom(graph, quant, rng)
            if uom is not None:
                unit = Cell.from_text(uom, NerTag.UOM)
                value = Cell(value.tokens + unit.tokens, value.tags + unit.tags)
        columns.append((Cell.from_text(quant, NerTag.QUANT),
                        [value if i == r else Cell((), ()) for i in range(rows)]))
    columns.append((_o_cell(TAG_HEADERS[rng.integers(len(TAG_HEADERS))]),
                    [Cell.from_text(generate_tag(eq, pattern, rng), NerTag.TAG) for eq in eqs]))
    n_distract = int(rng.integers(1, 4))
    heads = rng.choice(len(DISTRACTOR_HEADERS), size=n_distract, replace=False)
    for h in heads:
        choices = [" ".join(rng.choice(LOREM, size=int(rng.integers(1, 4))))
                   for _ in range(int(rng.integers(1, 3)))]
        cells = [_o_cell(choices[rng.integers(len(choices))]) for _ in range(rows)]
        columns.insert(int(rng.integers(len(columns) + 1)), (_o_cell(DISTRACTOR_HEADERS[h]), cells))
    header = [h for h, _ in columns]
    body = [[cells[i] for _, cells in columns] for i in range(rows)]
    return Table(table_id, header, body)


def generate_synthetic_corpus(graph: RdlGraph, n_tables: int, rows: int, seed=0,
                              prefix="synth", **kwargs) -> Corpus:
    rng = np.random.default_rng(seed)
    width = len(str(max(n_tables - 1, 0)))
    return Corpus([synthetic_table(graph, rows, rng, f"{prefix}{i:0{width}d}", **kwargs)
                   for i in range(n_tables)])


def split_graph(graph: RdlGraph, held_out_fraction: float, seed=0):
    """Partition equipment names into (seen, held-out) subgraphs."""
    rng = np.random.default_rng(seed)
    names = sorted(graph.eq_with_quantities)
    n_held = max(1, int(round(held_out_fraction * len(names))))
    held = set(rng.choice(names, size=n_held, replace=False).tolist())
    return (graph.restrict_equipment(set(names) - held), graph.restrict_equipment(held))


def graph_tokens(graph: RdlGraph) -> set:
    """Every token of every surface name in the graph."""
    from .tokenize import tokenize
    names = graph.eq_names | graph.quant_names | graph.uom_names
    return {t for n in names for t in tokenize(normalize_phrase(n))}
