"""Reference-data graph: entity surface names and applicability dictionaries.

Triple file format (UTF-8 TSV, ``#`` comments)::

    pump        type         EQ
    pump        label        centrifugal pump
    pump        hasQuantity  pressure
    pressure    type         QUANT
    pressure    hasUoM       bar
    bar         type         UoM

A node's surface name is its ``label`` (defaulting to the node id),
lowercased with whitespace collapsed.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import ConsistencyError, NoQuantityError, ParseError
from .tokenize import normalize_phrase

log = logging.getLogger(__name__)

PREDICATES = ("type", "label", "hasQuantity", "hasUoM")
NODE_TYPES = ("EQ", "QUANT", "UoM")


class Triple(NamedTuple):
    subject: str
    predicate: str
    object: str


@dataclass(frozen=True)
class RdlGraph:
    eq_names: frozenset = frozenset()
    quant_names: frozenset = frozenset()
    uom_names: frozenset = frozenset()
    e2q: dict = field(default_factory=dict)   # eq name -> frozenset of quant names
    q2u: dict = field(default_factory=dict)   # quant name -> frozenset of uom names

    def __post_init__(self):
        for key, vals in self.e2q.items():
            if key not in self.eq_names or not vals <= self.quant_names:
                raise ConsistencyError(f"e2q entry {key!r} is not EQ -> QUANT")
        for key, vals in self.q2u.items():
            if key not in self.quant_names or not vals <= self.uom_names:
                raise ConsistencyError(f"q2u entry {key!r} is not QUANT -> UoM")

    @property
    def eq_with_quantities(self) -> list[str]:
        return sorted(e for e in self.eq_names if self.e2q.get(e))

    @property
    def eq_without_quantities(self) -> list[str]:
        return sorted(e for e in self.eq_names if not self.e2q.get(e))

    def names(self, entity: str) -> frozenset:
        return {"EQ": self.eq_names, "QUANT": self.quant_names, "UoM": self.uom_names}[entity]

    def restrict_equipment(self, keep) -> "RdlGraph":
        """Subgraph with only the given equipment names."""
        keep = set(keep) & self.eq_names
        return RdlGraph(frozenset(keep), self.quant_names, self.uom_names,
                        {e: q for e, q in self.e2q.items() if e in keep}, dict(self.q2u))

    def to_triples(self) -> list[Triple]:
        """Triples that reload to an equal graph; node ids are the surface names."""
        out = []
        for kind, names in (("EQ", self.eq_names), ("QUANT", self.quant_names),
                            ("UoM", self.uom_names)):
            out += [Triple(n, "type", kind) for n in sorted(names)]
        out += [Triple(e, "hasQuantity", q) for e in sorted(self.e2q) for q in sorted(self.e2q[e])]
        out += [Triple(q, "hasUoM", u) for q in sorted(self.q2u) for u in sorted(self.q2u[q])]
        return out


def parse_triples(lines, source="<triples>") -> list[Triple]:
    triples = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 3 or not all(parts):
            raise ParseError(f"{source}: line {lineno}: expected subject<TAB>predicate<TAB>object")
        if parts[1] not in PREDICATES:
            raise ParseError(f"{source}: line {lineno}: unknown predicate {parts[1]!r}")
        if parts[1] == "type" and parts[2] not in NODE_TYPES:
            raise ParseError(f"{source}: line {lineno}: unknown node type {parts[2]!r}")
        triples.append(Triple(*parts))
    return triples


def graph_from_triples(triples) -> RdlGraph:
    types = defaultdict(set)
    labels = {}
    edges = {"hasQuantity": set(), "hasUoM": set()}
    for s, p, o in triples:
        if p == "type":
            types[s].add(o)
        elif p == "label":
            if s in labels and labels[s] != normalize_phrase(o):
                raise ConsistencyError(f"node {s!r} has conflicting labels")
            labels[s] = normalize_phrase(o)
        else:
            edges[p].add((s, o))

    def sfn(node):
        return labels.get(node) or normalize_phrase(node)

    def typed(node, kind):
        return kind in types.get(node, ())

    names = {k: {sfn(n) for n, ts in types.items() if k in ts} for k in NODE_TYPES}
    e2q, q2u = defaultdict(set), defaultdict(set)
    for (s, o), (pred, skind, okind, target) in (
            [(e, ("hasQuantity", "EQ", "QUANT", e2q)) for e in sorted(edges["hasQuantity"])]
            + [(e, ("hasUoM", "QUANT", "UoM", q2u)) for e in sorted(edges["hasUoM"])]):
        if not typed(s, skind):
            raise ConsistencyError(f"{pred} subject {s!r} is not typed {skind}")
        if not typed(o, okind):
            raise ConsistencyError(f"{pred} object {o!r} is not typed {okind}")
        target[sfn(s)].add(sfn(o))
    graph = RdlGraph(
        frozenset(names["EQ"]), frozenset(names["QUANT"]), frozenset(names["UoM"]),
        {k: frozenset(v) for k, v in e2q.items()}, {k: frozenset(v) for k, v in q2u.items()})
    if graph.eq_without_quantities:
        log.info("%d equipment names have no applicable quantity",
                 len(graph.eq_without_quantities))
    return graph


def load_graph(path) -> RdlGraph:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return graph_from_triples(parse_triples(fh, str(path)))


def write_triples(triples, path) -> None:
    Path(path).write_text("".join(f"{s}\t{p}\t{o}\n" for s, p, o in triples), encoding="utf-8")


def sample_equipment(graph: RdlGraph, rng, require_quantity=True) -> str:
    """Uniform draw from equipment names; by default only those with a quantity."""
    pool = graph.eq_with_quantities if require_quantity else sorted(graph.eq_names)
    if not pool:
        raise NoQuantityError("graph has no usable equipment")
    return pool[rng.integers(len(pool))]


def sample_quantity(graph: RdlGraph, eq: str, rng) -> str:
    pool = sorted(graph.e2q.get(eq, ()))
    if not pool:
        raise NoQuantityError(f"equipment {eq!r} has no applicable quantity")
    return pool[rng.integers(len(pool))]


def sample_uom(graph: RdlGraph, quant: str, rng) -> str | None:
    """Uniform draw from the units of ``quant``; None when it has none."""
    pool = sorted(graph.q2u.get(quant, ()))
    if not pool:
        return None
    return pool[rng.integers(len(pool))]
