"""Text format for frames, generalized frames, and models.

Line directives, one per line, `#` starts a comment:

    worlds w x y          declare the worlds, in order
    R w x                 an R pair
    S w x : y             an S triple (ordinary: exactly one target)
    S w x : y z           a set-valued S triple (w, x, {y, z})
    val p : x y           extension of atom p
    closure on|off        close the structure after reading (default off)
    kind gen|ordinary     force the reading of singleton S lines

A file is generalized when any S line carries more than one target or a
`kind gen` directive appears; the function argument overrides both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .genveltman import GenFrame, GenModel, close_genframe
from .veltman import Frame, Model, StructureError, close_frame


class FormatError(ValueError):
    def __init__(self, message, line_no=None):
        where = f" (line {line_no})" if line_no else ""
        super().__init__(f"{message}{where}")
        self.line_no = line_no


@dataclass
class StructureFile:
    kind: str                       # "ordinary" | "gen"
    structure: object               # Frame | GenFrame
    valuation: Optional[dict]       # atom -> set of worlds, None if no val lines
    closed: bool

    def model(self):
        if self.valuation is None:
            raise StructureError("file declares no valuation")
        if self.kind == "ordinary":
            return Model(self.structure, self.valuation)
        return GenModel(self.structure, self.valuation)


def parse_structure(text: str, kind: Optional[str] = None) -> StructureFile:
    worlds = None
    rels = []
    triples = []
    valuation: dict[str, set] = {}
    closure = False
    saw_val = False
    declared_kind = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "worlds":
            if worlds is not None:
                raise FormatError("duplicate worlds line", line_no)
            if len(parts) < 2:
                raise FormatError("worlds line needs at least one id", line_no)
            worlds = parts[1:]
        elif head == "R":
            if len(parts) != 3:
                raise FormatError("R line needs exactly two worlds", line_no)
            rels.append((parts[1], parts[2]))
        elif head == "S":
            if len(parts) < 5 or parts[3] != ":":
                raise FormatError("S line shape is `S w x : y [z ...]`", line_no)
            targets = parts[4:]
            triples.append((parts[1], parts[2], targets, line_no))
        elif head == "val":
            if len(parts) < 3 or parts[2] != ":":
                raise FormatError("val line shape is `val p : [w ...]`", line_no)
            valuation[parts[1]] = set(parts[3:])
            saw_val = True
        elif head == "closure":
            if len(parts) != 2 or parts[1] not in ("on", "off"):
                raise FormatError("closure takes `on` or `off`", line_no)
            closure = parts[1] == "on"
        elif head == "kind":
            if len(parts) != 2 or parts[1] not in ("gen", "ordinary"):
                raise FormatError("kind takes `gen` or `ordinary`", line_no)
            declared_kind = parts[1]
        else:
            raise FormatError(f"unknown directive {head!r}", line_no)
    if worlds is None:
        raise FormatError("missing worlds line")

    if kind not in (None, "gen", "ordinary"):
        raise ValueError(f"unknown kind {kind!r}")
    effective = kind or declared_kind
    generalized = effective == "gen" or (
        effective is None and any(len(t[2]) > 1 for t in triples)
    )
    try:
        if generalized:
            st = GenFrame(worlds, rels, [(w, x, frozenset(ts)) for w, x, ts, _ in triples])
            if closure:
                st = close_genframe(st)
        else:
            for w, x, ts, line_no in triples:
                if len(ts) != 1:
                    raise FormatError(
                        "ordinary structure cannot take a multi-world S target", line_no
                    )
            st = Frame(worlds, rels, [(w, x, ts[0]) for w, x, ts, _ in triples])
            if closure:
                st = close_frame(st)
    except StructureError as exc:
        raise FormatError(str(exc)) from exc
    return StructureFile(
        "gen" if generalized else "ordinary", st, valuation if saw_val else None, closure
    )


def load_structure(path, kind: Optional[str] = None) -> StructureFile:
    with open(path, encoding="utf-8") as fh:
        return parse_structure(fh.read(), kind)


def format_structure(structure, valuation: Optional[dict] = None) -> str:
    """Canonical text for a Frame or GenFrame (already-closed; no directive)."""
    ix = structure.index
    lines = ["worlds " + " ".join(structure.worlds)]
    for x, y in sorted(structure.R, key=lambda p: (ix[p[0]], ix[p[1]])):
        lines.append(f"R {x} {y}")
    if isinstance(structure, GenFrame):
        for w, x, Y in sorted(
            structure.S,
            key=lambda t: (ix[t[0]], ix[t[1]], sum(1 << ix[y] for y in t[2])),
        ):
            lines.append(f"S {w} {x} : " + " ".join(sorted(Y, key=ix.get)))
    else:
        for x, y, z in sorted(structure.S, key=lambda t: tuple(ix[w] for w in t)):
            lines.append(f"S {x} {y} : {z}")
    for atom in sorted(valuation or {}):
        members = sorted(valuation[atom], key=ix.get)
        lines.append(f"val {atom} : " + " ".join(members))
    return "\n".join(lines) + "\n"
