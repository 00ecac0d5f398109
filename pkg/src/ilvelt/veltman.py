"""Finite ordinary Veltman frames and models.

A frame is (W, R, S) with R a transitive acyclic relation (the finite stand-in
for converse well-foundedness) and S a set of triples (x, y, z), read
"y S_x z", subject to:

    1. R acyclic            2. R transitive
    3. y S_x z  =>  xRy and xRz
    4. xRy      =>  y S_x y
    5. xRy, yRz =>  y S_x z
    6. each S_x transitive

Worlds carry a fixed order (the constructor's list); witnesses are reported
least-first in that order, with world sets ordered by membership mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Optional

from . import assignments
from .formula import (
    ATOM_RE,
    Atom,
    Bottom,
    Box,
    Formula,
    Implies,
    Rhd,
    Schema,
    is_metavariable,
    subformulas,
)


class StructureError(ValueError):
    """Malformed structure: duplicate/dangling ids, bad atoms, and the like."""


class ClosureError(ValueError):
    """The seed cannot be closed (transitive closure creates an R-cycle)."""


@dataclass(frozen=True)
class Violation:
    condition: str
    witness: tuple

    def __str__(self):
        return f"{self.condition}: {' '.join(map(str, self.witness))}"


@dataclass(frozen=True)
class CheckResult:
    """Boolean verdict plus whatever evidence the check produced."""

    holds: bool
    witness: Any = None

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class CounterAssignment:
    """A subset assignment and world refuting a schema on a frame."""

    assignment: dict
    world: str

    def __str__(self):
        sets = ", ".join(
            f"{mv}:={{{' '.join(ws)}}}" for mv, ws in sorted(self.assignment.items())
        )
        return f"world {self.world} under {sets}"


def _check_world_ids(worlds):
    if not worlds:
        raise StructureError("no worlds")
    if len(set(worlds)) != len(worlds):
        raise StructureError("duplicate world ids")


class Frame:
    def __init__(self, worlds: Iterable[str], R: Iterable[tuple], S: Iterable[tuple]):
        self.worlds = list(worlds)
        _check_world_ids(self.worlds)
        self.index = {w: i for i, w in enumerate(self.worlds)}
        self.n = len(self.worlds)
        self.R = frozenset(R)
        self.S = frozenset(S)
        for x, y in self.R:
            if x not in self.index or y not in self.index:
                raise StructureError(f"R pair ({x},{y}) uses undeclared world")
        for x, y, z in self.S:
            if x not in self.index or y not in self.index or z not in self.index:
                raise StructureError(f"S triple ({x},{y},{z}) uses undeclared world")

        ix = self.index
        self.rsucc_ix = [[] for _ in range(self.n)]
        self.rmask = [0] * self.n
        for x, y in sorted(self.R, key=lambda p: (ix[p[0]], ix[p[1]])):
            self.rsucc_ix[ix[x]].append(ix[y])
            self.rmask[ix[x]] |= 1 << ix[y]
        self.ssucc_ix: dict[tuple[int, int], list[int]] = {}
        self.smask: dict[tuple[int, int], int] = {}
        for x, y, z in sorted(self.S, key=lambda t: (ix[t[0]], ix[t[1]], ix[t[2]])):
            key = (ix[x], ix[y])
            self.ssucc_ix.setdefault(key, []).append(ix[z])
            self.smask[key] = self.smask.get(key, 0) | (1 << ix[z])

    def world_set(self, mask: int) -> frozenset:
        return frozenset(self.worlds[j] for j in range(self.n) if (mask >> j) & 1)

    def mask_of(self, worlds: Iterable[str]) -> int:
        m = 0
        for w in worlds:
            m |= 1 << self.index[w]
        return m

    def encoding(self):
        ix = self.index
        return (
            self.n,
            tuple(sorted((ix[x], ix[y]) for x, y in self.R)),
            tuple(sorted((ix[x], ix[y], ix[z]) for x, y, z in self.S)),
        )

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.worlds == other.worlds
            and self.R == other.R
            and self.S == other.S
        )

    def __hash__(self):
        return hash((tuple(self.worlds), self.R, self.S))

    def __repr__(self):
        return f"Frame({self.n} worlds, |R|={len(self.R)}, |S|={len(self.S)})"


def _transitive_closure(pairs: set) -> set:
    closed = set(pairs)
    changed = True
    while changed:
        changed = False
        new = {(x, z) for x, y in closed for y2, z in closed if y == y2}
        if not new <= closed:
            closed |= new
            changed = True
    return closed


def _find_r_cycle(fr: Frame):
    # with transitivity available a cycle shows up as some (x, x)
    closed = _transitive_closure(set(fr.R))
    for x in fr.worlds:
        if (x, x) in closed:
            return (x,)
    return None


def validate_frame(fr: Frame) -> list[Violation]:
    """Empty list iff fr is a Veltman frame; otherwise named violations."""
    out = []
    cyc = _find_r_cycle(fr)
    if cyc:
        out.append(Violation("R-acyclic", cyc))
    for x, y in sorted(fr.R, key=lambda p: (fr.index[p[0]], fr.index[p[1]])):
        for z in fr.rsucc_ix[fr.index[y]]:
            zw = fr.worlds[z]
            if (x, zw) not in fr.R:
                out.append(Violation("R-transitive", (x, y, zw)))
            if (x, y, zw) not in fr.S:
                out.append(Violation("S-contains-R-chains", (x, y, zw)))
        if (x, y, y) not in fr.S:
            out.append(Violation("S-reflexive-on-successors", (x, y)))
    for x, y, z in sorted(fr.S, key=lambda t: tuple(fr.index[w] for w in t)):
        if (x, y) not in fr.R or (x, z) not in fr.R:
            out.append(Violation("S-inside-R", (x, y, z)))
    for (xi, yi), targets in sorted(fr.ssucc_ix.items()):
        x = fr.worlds[xi]
        for z in targets:
            for u in fr.ssucc_ix.get((xi, z), ()):
                if not (fr.smask.get((xi, yi), 0) >> u) & 1:
                    out.append(
                        Violation("S-transitive", (x, fr.worlds[yi], fr.worlds[z], fr.worlds[u]))
                    )
    return out


def close_frame(seed: Frame) -> Frame:
    """Least frame containing the seed.

    Adds the R-pairs demanded by condition 3 for the seed's S-triples, the
    transitive closure of R, the forced S-triples of conditions 4 and 5, and
    the S_x-transitive closure.  Raises ClosureError if closure puts a cycle
    into R.
    """
    R = set(seed.R)
    for x, y, z in seed.S:
        R.add((x, y))
        R.add((x, z))
    R = _transitive_closure(R)
    for x in seed.worlds:
        if (x, x) in R:
            raise ClosureError(f"R-closure creates a cycle through {x!r}")
    S = set(seed.S)
    for x, y in R:
        S.add((x, y, y))
        for z in seed.worlds:
            if (y, z) in R:
                S.add((x, y, z))
    changed = True
    while changed:
        changed = False
        by_base: dict[str, set] = {}
        for x, y, z in S:
            by_base.setdefault(x, set()).add((y, z))
        for x, pairs in by_base.items():
            extra = _transitive_closure(pairs) - pairs
            if extra:
                changed = True
                for y, z in extra:
                    S.add((x, y, z))
    frame = Frame(seed.worlds, R, S)
    leftover = validate_frame(frame)
    if leftover:
        raise ClosureError(f"seed not closable: {leftover[0]}")
    return frame


class Model:
    def __init__(self, frame: Frame, valuation: dict[str, Iterable[str]]):
        self.frame = frame
        self.valuation = {}
        for atom, ws in valuation.items():
            if not ATOM_RE.fullmatch(atom) or is_metavariable(atom):
                raise StructureError(f"bad valuation atom {atom!r}")
            ws = frozenset(ws)
            for w in ws:
                if w not in frame.index:
                    raise StructureError(f"valuation of {atom!r} uses undeclared world {w!r}")
            self.valuation[atom] = ws
        self.val_mask = {a: frame.mask_of(ws) for a, ws in self.valuation.items()}

    def __repr__(self):
        return f"Model({self.frame!r}, atoms={sorted(self.valuation)})"


def _extensions(model: Model, f: Formula) -> dict[Formula, int]:
    fr = model.frame
    full = (1 << fr.n) - 1
    ext: dict[Formula, int] = {}
    for g in subformulas(f):
        if isinstance(g, Bottom):
            ext[g] = 0
        elif isinstance(g, Atom):
            if g.name not in model.val_mask:
                raise StructureError(f"atom {g.name!r} not in the valuation")
            ext[g] = model.val_mask[g.name]
        elif isinstance(g, Implies):
            ext[g] = (full ^ ext[g.left]) | ext[g.right]
        elif isinstance(g, Box):
            body = ext[g.body]
            ext[g] = sum(
                1 << j for j in range(fr.n) if fr.rmask[j] & ~body == 0
            )
        elif isinstance(g, Rhd):
            le, re_ = ext[g.left], ext[g.right]
            mask = 0
            for j in range(fr.n):
                ok = True
                for u in fr.rsucc_ix[j]:
                    if (le >> u) & 1 and not fr.smask.get((j, u), 0) & re_:
                        ok = False
                        break
                if ok:
                    mask |= 1 << j
            ext[g] = mask
    return ext


def eval_formula(model: Model, world: str, f: Formula) -> bool:
    """Truth of f at a world, per the five satisfaction clauses."""
    if world not in model.frame.index:
        raise StructureError(f"unknown world {world!r}")
    return bool(_extensions(model, f)[f] >> model.frame.index[world] & 1)


def frame_valid_schema(fr: Frame, schema: Schema) -> CheckResult:
    """Brute-force schema validity: every subset assignment, every world.

    On a frame, validity of a schema is validity of its characteristic
    instance under every valuation of fresh atoms, i.e. under every subset
    assignment to the metavariables.
    """
    _require_valid(fr)
    mvs = schema.metavariables
    ok, failure = assignments.valid_under_subsets(fr, schema.body, mvs)
    if ok:
        return CheckResult(True)
    index, world_ix = failure
    masks = assignments.decode_subset_assignment(index, fr.n, mvs)
    witness = CounterAssignment(
        {mv: fr.world_set(m) for mv, m in masks.items()}, fr.worlds[world_ix]
    )
    return CheckResult(False, witness)


def check_R_frame_condition(fr: Frame) -> CheckResult:
    """xRy & yRz & z S_x u & uRv  =>  z S_y v; least witness tuple otherwise."""
    _require_valid(fr)
    ix = fr.worlds
    for xi in range(fr.n):
        for yi in fr.rsucc_ix[xi]:
            for zi in fr.rsucc_ix[yi]:
                for ui in fr.ssucc_ix.get((xi, zi), ()):
                    for vi in fr.rsucc_ix[ui]:
                        if not (fr.smask.get((yi, zi), 0) >> vi) & 1:
                            return CheckResult(
                                False, (ix[xi], ix[yi], ix[zi], ix[ui], ix[vi])
                            )
    return CheckResult(True)


def _algebra_masks(fr: Frame, atom_masks: Iterable[int]) -> frozenset:
    """Masks of the definable algebra generated by the given extensions.

    Semi-naive closure under complement, intersection, box preimage, and the
    rhd set operator; bounded by the powerset, so it terminates.
    """
    full = (1 << fr.n) - 1

    def box_op(m):
        out = 0
        for j in range(fr.n):
            if fr.rmask[j] & ~m == 0:
                out |= 1 << j
        return out

    def rhd_op(a, b):
        out = 0
        for j in range(fr.n):
            ok = True
            for u in fr.rsucc_ix[j]:
                if (a >> u) & 1 and not fr.smask.get((j, u), 0) & b:
                    ok = False
                    break
            if ok:
                out |= 1 << j
        return out

    powerset_size = 1 << fr.n
    sets = {0} | set(atom_masks)
    frontier = set(sets)
    while frontier and len(sets) < powerset_size:
        new = set()
        for m in frontier:
            c = full ^ m
            if c not in sets:
                new.add(c)
            b = box_op(m)
            if b not in sets:
                new.add(b)
        for a in frontier:
            for b in sets:
                for m in (a & b, rhd_op(a, b), rhd_op(b, a)):
                    if m not in sets:
                        new.add(m)
        sets |= new
        frontier = new
    if len(sets) == powerset_size:
        return frozenset(range(powerset_size))
    return frozenset(sets)


def definable_algebra(model: Model, atoms: Optional[Iterable[str]] = None) -> list[frozenset]:
    """The world sets denotable by formulas over the given atoms.

    Least family containing the atom extensions and the empty set, closed
    under complement, intersection, the box preimage, and the rhd operator.
    Returned in mask order.
    """
    fr = model.frame
    if atoms is None:
        atoms = sorted(model.valuation)
    masks = []
    for a in atoms:
        if a not in model.val_mask:
            raise StructureError(f"atom {a!r} not in the valuation")
        masks.append(model.val_mask[a])
    return [fr.world_set(m) for m in sorted(_algebra_masks(fr, masks))]


@dataclass(frozen=True)
class ForcingFailure:
    schema_id: str
    assignment: dict
    world: str

    def __str__(self):
        sets = ", ".join(
            f"{mv}:={{{' '.join(sorted(ws))}}}" for mv, ws in sorted(self.assignment.items())
        )
        return f"{self.schema_id} fails at {self.world} under {sets}"


def _forcing_failure(model: Model, logic, world_filter, masks=None) -> Optional[ForcingFailure]:
    fr = model.frame
    if masks is None:
        masks = sorted(_algebra_masks(fr, model.val_mask.values()))
    for schema in logic:
        mvs = schema.metavariables
        families = [masks] * len(mvs)
        total, patterns = assignments.explicit_patterns(fr.n, mvs, families)
        exts = assignments.evaluate(fr, schema.body, patterns, total)
        full = (1 << total) - 1
        for j in world_filter:
            if exts[j] != full:
                bad = full ^ exts[j]
                index = (bad & -bad).bit_length() - 1
                assign = assignments.decode_explicit_assignment(index, mvs, families)
                return ForcingFailure(
                    schema.id,
                    {mv: fr.world_set(m) for mv, m in assign.items()},
                    fr.worlds[j],
                )
    return None


def world_forces_logic(model: Model, world: str, logic: Iterable[Schema]) -> CheckResult:
    """Does the world force every definable-algebra instance of every schema?

    Instances in the model's language denote definable sets, so quantifying
    metavariables over the algebra is exactly forcing of all instantiations.
    """
    if world not in model.frame.index:
        raise StructureError(f"unknown world {world!r}")
    failure = _forcing_failure(model, list(logic), [model.frame.index[world]])
    return CheckResult(failure is None, failure)


def model_forces_logic(model: Model, logic: Iterable[Schema]) -> CheckResult:
    """world_forces_logic at every world, in one bit-parallel pass."""
    failure = _forcing_failure(model, list(logic), range(model.frame.n))
    return CheckResult(failure is None, failure)


def refine_partition(fr: Frame, block: list[int]) -> list[tuple[int, ...]]:
    """Coarsest stable refinement of a world partition under the modal view.

    Two worlds stay together while they share a block, reach the same blocks
    through R, and their S-sections hit the same block sets.  The fixpoint is
    the modal-equivalence partition of any model whose atom profiles induce
    the starting partition; the definable algebra of such a model is exactly
    the family of unions of the returned blocks.
    """
    sections = [
        [(x, fr.ssucc_ix.get((j, x), ())) for x in fr.rsucc_ix[j]]
        for j in range(fr.n)
    ]
    n_blocks = len(set(block))
    while True:
        sigs = {}
        for j in range(fr.n):
            sig = (
                block[j],
                frozenset(
                    (block[x], frozenset(block[y] for y in targets))
                    for x, targets in sections[j]
                ),
            )
            sigs.setdefault(sig, []).append(j)
        if len(sigs) == n_blocks:
            return sorted(tuple(g) for g in sigs.values())
        n_blocks = len(sigs)
        new = [0] * fr.n
        for b, members in enumerate(sorted(sigs.values())):
            for j in members:
                new[j] = b
        block = new


def frame_twin_blocks(fr: Frame) -> list[tuple[int, ...]]:
    """Modal-equivalence blocks achievable with a blank valuation: if these
    are all singletons, every model on this frame has the powerset as its
    definable algebra."""
    return refine_partition(fr, [0] * fr.n)


def _require_valid(fr: Frame):
    cached = getattr(fr, "_valid_cache", None)
    if cached is None:
        cached = not validate_frame(fr)
        fr._valid_cache = cached
    if not cached:
        raise StructureError(f"invalid frame: {validate_frame(fr)[0]}")
