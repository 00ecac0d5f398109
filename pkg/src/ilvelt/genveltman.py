"""Set-valued Veltman frames: S relates a base world and a source world to a
nonempty set of worlds.

Frame conditions, writing x S_w Y for (w, x, Y) in S:

    (i)    R transitive and acyclic
    (iiia) x S_w Y  =>  wRx and wRy for every y in Y
    (iiib) wRx  =>  x S_w {x}              (quasi-reflexivity)
    (iiic) x S_w Y, y in Y, y S_w Z, y not in Z  =>  x S_w Z   (quasi-transitivity)
    (iiid) wRx, xRy  =>  x S_w {y}
    and every target set is nonempty.

The deciders for the M0 / P0 / R conditions and for the "W fails" property
live here, next to satisfaction and the lifting of ordinary models.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Optional

from . import assignments
from .formula import Atom, Bottom, Box, Formula, Implies, Rhd, Schema, subformulas
from .veltman import (
    CheckResult,
    ClosureError,
    CounterAssignment,
    Frame,
    Model,
    StructureError,
    Violation,
    _check_world_ids,
    _transitive_closure,
)


class GenFrame:
    def __init__(self, worlds: Iterable[str], R: Iterable[tuple], S: Iterable[tuple]):
        self.worlds = list(worlds)
        _check_world_ids(self.worlds)
        self.index = {w: i for i, w in enumerate(self.worlds)}
        self.n = len(self.worlds)
        self.R = frozenset(R)
        triples = []
        for w, x, Y in S:
            Y = frozenset(Y)
            if not Y:
                raise StructureError(f"empty S target set at ({w},{x})")
            triples.append((w, x, Y))
        self.S = frozenset(triples)
        for x, y in self.R:
            if x not in self.index or y not in self.index:
                raise StructureError(f"R pair ({x},{y}) uses undeclared world")
        for w, x, Y in self.S:
            for v in (w, x, *Y):
                if v not in self.index:
                    raise StructureError(f"S triple at ({w},{x}) uses undeclared world {v!r}")

        ix = self.index
        self.rsucc_ix = [[] for _ in range(self.n)]
        self.rmask = [0] * self.n
        for x, y in sorted(self.R, key=lambda p: (ix[p[0]], ix[p[1]])):
            self.rsucc_ix[ix[x]].append(ix[y])
            self.rmask[ix[x]] |= 1 << ix[y]
        # target sets per (base, source), as masks in ascending order
        self.smasks: dict[tuple[int, int], list[int]] = {}
        for w, x, Y in self.S:
            m = 0
            for y in Y:
                m |= 1 << ix[y]
            self.smasks.setdefault((ix[w], ix[x]), []).append(m)
        for key in self.smasks:
            self.smasks[key] = sorted(set(self.smasks[key]))
        # inclusion-minimal targets: Y <= ext test only needs these
        self.smin: dict[tuple[int, int], list[int]] = {}
        self.smin_ix: dict[tuple[int, int], list[tuple[int, ...]]] = {}
        for key, masks in self.smasks.items():
            mins = [m for m in masks if not any(o != m and o & ~m == 0 for o in masks)]
            self.smin[key] = mins
            self.smin_ix[key] = [
                tuple(j for j in range(self.n) if (m >> j) & 1) for m in mins
            ]

    def world_set(self, mask: int) -> frozenset:
        return frozenset(self.worlds[j] for j in range(self.n) if (mask >> j) & 1)

    def mask_of(self, worlds: Iterable[str]) -> int:
        m = 0
        for w in worlds:
            m |= 1 << self.index[w]
        return m

    def targets(self, w: str, x: str) -> list[frozenset]:
        """All Y with x S_w Y, in mask order."""
        key = (self.index[w], self.index[x])
        return [self.world_set(m) for m in self.smasks.get(key, [])]

    def encoding(self):
        ix = self.index
        return (
            self.n,
            tuple(sorted((ix[x], ix[y]) for x, y in self.R)),
            tuple(
                sorted(
                    (ix[w], ix[x], m)
                    for (w, x, Y) in self.S
                    for m in [sum(1 << ix[y] for y in Y)]
                )
            ),
        )

    def __eq__(self, other):
        return (
            isinstance(other, GenFrame)
            and self.worlds == other.worlds
            and self.R == other.R
            and self.S == other.S
        )

    def __hash__(self):
        return hash((tuple(self.worlds), self.R, self.S))

    def __repr__(self):
        return f"GenFrame({self.n} worlds, |R|={len(self.R)}, |S|={len(self.S)})"


def validate_genframe(g: GenFrame) -> list[Violation]:
    """Empty list iff g is a set-valued Veltman frame."""
    out = []
    closed = _transitive_closure(set(g.R))
    for x in g.worlds:
        if (x, x) in closed:
            out.append(Violation("R-acyclic", (x,)))
            break
    for x, y in sorted(g.R, key=lambda p: (g.index[p[0]], g.index[p[1]])):
        for z in g.rsucc_ix[g.index[y]]:
            if (x, g.worlds[z]) not in g.R:
                out.append(Violation("R-transitive", (x, y, g.worlds[z])))
        xi, yi = g.index[x], g.index[y]
        if (1 << yi) not in g.smasks.get((xi, yi), []):
            out.append(Violation("quasi-reflexive", (x, y)))
        for z in g.rsucc_ix[yi]:
            if (1 << z) not in g.smasks.get((xi, yi), []):
                out.append(Violation("chain-singletons", (x, y, g.worlds[z])))
    for w, x, Y in sorted(g.S, key=lambda t: (g.index[t[0]], g.index[t[1]], sorted(map(g.index.get, t[2])))):
        if (w, x) not in g.R:
            out.append(Violation("S-inside-R-base", (w, x)))
        for y in sorted(Y, key=g.index.get):
            if (w, y) not in g.R:
                out.append(Violation("S-inside-R-target", (w, x, y)))
    for (wi, xi), masks in sorted(g.smasks.items()):
        for m in masks:
            for yi in range(g.n):
                if not (m >> yi) & 1:
                    continue
                for zm in g.smasks.get((wi, yi), []):
                    if (zm >> yi) & 1:
                        continue
                    if zm not in g.smasks[(wi, xi)]:
                        out.append(
                            Violation(
                                "quasi-transitive",
                                (g.worlds[wi], g.worlds[xi], g.worlds[yi], g.world_set(zm)),
                            )
                        )
    return out


def close_genframe(seed: GenFrame) -> GenFrame:
    """Least set-valued frame containing the seed.

    R gains the pairs condition (iiia) demands for the seed triples plus
    transitivity; S gains the quasi-reflexive and chain singletons and the
    quasi-transitivity closure.  Raises ClosureError on an R-cycle.
    """
    R = set(seed.R)
    for w, x, Y in seed.S:
        R.add((w, x))
        for y in Y:
            R.add((w, y))
    R = _transitive_closure(R)
    for x in seed.worlds:
        if (x, x) in R:
            raise ClosureError(f"R-closure creates a cycle through {x!r}")

    S = {(w, x, frozenset(Y)) for w, x, Y in seed.S}
    for w, x in R:
        S.add((w, x, frozenset([x])))
        for y in seed.worlds:
            if (x, y) in R:
                S.add((w, x, frozenset([y])))
    changed = True
    while changed:
        changed = False
        by_base: dict[str, dict[str, set]] = {}
        for w, x, Y in S:
            by_base.setdefault(w, {}).setdefault(x, set()).add(Y)
        for w, per_source in by_base.items():
            for x, fam in per_source.items():
                for Y in list(fam):
                    for y in Y:
                        for Z in per_source.get(y, ()):
                            if y not in Z and (w, x, Z) not in S:
                                S.add((w, x, Z))
                                changed = True
    out = GenFrame(seed.worlds, R, S)
    leftover = validate_genframe(out)
    if leftover:
        raise ClosureError(f"seed not closable: {leftover[0]}")
    return out


class GenModel:
    def __init__(self, genframe: GenFrame, valuation: dict[str, Iterable[str]]):
        # reuse Model's valuation checks against a throwaway ordinary frame
        probe = Model(Frame(genframe.worlds, [], []), valuation)
        self.genframe = genframe
        self.valuation = probe.valuation
        self.val_mask = probe.val_mask

    def __repr__(self):
        return f"GenModel({self.genframe!r}, atoms={sorted(self.valuation)})"


def _gen_extensions(model: GenModel, f: Formula) -> dict[Formula, int]:
    g = model.genframe
    full = (1 << g.n) - 1
    ext: dict[Formula, int] = {}
    for sub in subformulas(f):
        if isinstance(sub, Bottom):
            ext[sub] = 0
        elif isinstance(sub, Atom):
            if sub.name not in model.val_mask:
                raise StructureError(f"atom {sub.name!r} not in the valuation")
            ext[sub] = model.val_mask[sub.name]
        elif isinstance(sub, Implies):
            ext[sub] = (full ^ ext[sub.left]) | ext[sub.right]
        elif isinstance(sub, Box):
            body = ext[sub.body]
            ext[sub] = sum(1 << j for j in range(g.n) if g.rmask[j] & ~body == 0)
        elif isinstance(sub, Rhd):
            le, re_ = ext[sub.left], ext[sub.right]
            mask = 0
            for j in range(g.n):
                ok = True
                for u in g.rsucc_ix[j]:
                    if (le >> u) & 1 and not any(
                        m & ~re_ == 0 for m in g.smin.get((j, u), ())
                    ):
                        ok = False
                        break
                if ok:
                    mask |= 1 << j
            ext[sub] = mask
    return ext


def geval(model: GenModel, world: str, f: Formula) -> bool:
    """Truth at a world; the rhd clause asks for a target set inside B."""
    if world not in model.genframe.index:
        raise StructureError(f"unknown world {world!r}")
    return bool(_gen_extensions(model, f)[f] >> model.genframe.index[world] & 1)


def lift(model: Model) -> GenModel:
    """Ordinary model -> set-valued model with S' = {(w,x,Y) : Y inside S_w(x)}.

    Forcing is preserved: geval on the lift agrees with eval on the original.
    """
    from .veltman import validate_frame

    violations = validate_frame(model.frame)
    if violations:
        raise StructureError(f"invalid frame: {violations[0]}")
    fr = model.frame
    triples = []
    for (wi, xi), targets in fr.ssucc_ix.items():
        w, x = fr.worlds[wi], fr.worlds[xi]
        members = [fr.worlds[t] for t in targets]
        for r in range(1, len(members) + 1):
            for combo in combinations(members, r):
                triples.append((w, x, frozenset(combo)))
    gf = GenFrame(fr.worlds, fr.R, triples)
    return GenModel(gf, {a: ws for a, ws in model.valuation.items()})


def genframe_valid_schema(g: GenFrame, schema: Schema) -> CheckResult:
    """Brute force over all subset assignments and worlds, as on frames."""
    _require_valid(g)
    mvs = schema.metavariables
    ok, failure = assignments.valid_under_subsets(g, schema.body, mvs)
    if ok:
        return CheckResult(True)
    index, world_ix = failure
    masks = assignments.decode_subset_assignment(index, g.n, mvs)
    witness = CounterAssignment(
        {mv: g.world_set(m) for mv, m in masks.items()}, g.worlds[world_ix]
    )
    return CheckResult(False, witness)


# ---------------------------------------------------------------------------
# Frame conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionWitness:
    """Failing instance of an M0/P0-style condition."""

    w: str
    x: str
    y: str
    Y: frozenset
    Z: Optional[frozenset] = None

    def __str__(self):
        extra = f" Z={{{' '.join(sorted(self.Z))}}}" if self.Z is not None else ""
        return f"w={self.w} x={self.x} y={self.y} Y={{{' '.join(sorted(self.Y))}}}{extra}"


def _chains(g: GenFrame):
    for wi in range(g.n):
        for xi in g.rsucc_ix[wi]:
            for yi in g.rsucc_ix[xi]:
                yield wi, xi, yi


def check_M0_condition(g: GenFrame) -> CheckResult:
    """wRxRy S_w Y  =>  some Y' <= Y with x S_w Y' whose members only reach
    R-successors of x."""
    _require_valid(g)
    for wi, xi, yi in _chains(g):
        xmask = g.rmask[xi]
        for Y in g.smasks.get((wi, yi), ()):
            found = False
            for Yp in g.smasks.get((wi, xi), ()):
                if Yp & ~Y:
                    continue
                if all(
                    g.rmask[j] & ~xmask == 0 for j in range(g.n) if (Yp >> j) & 1
                ):
                    found = True
                    break
            if not found:
                return CheckResult(
                    False,
                    ConditionWitness(
                        g.worlds[wi], g.worlds[xi], g.worlds[yi], g.world_set(Y)
                    ),
                )
    return CheckResult(True)


def _choice_images(g: GenFrame, Y_mask: int) -> Optional[list[int]]:
    """Masks {c(y) : y in Y} for all choice functions picking one R-successor
    per member of Y; None when some member has no successor (no Z exists)."""
    succ_lists = []
    for j in range(g.n):
        if (Y_mask >> j) & 1:
            if not g.rsucc_ix[j]:
                return None
            succ_lists.append(g.rsucc_ix[j])
    images = set()
    for combo in product(*succ_lists):
        m = 0
        for z in combo:
            m |= 1 << z
        images.add(m)
    return sorted(images)


def check_P0_condition(g: GenFrame) -> CheckResult:
    """wRxRy S_w Y and every member of Y reaches into Z  =>  some Z' <= Z with
    y S_x Z'.

    Z ranges over images of choice functions only: the requirement is monotone
    in Z, so minimal Z's decide it.
    """
    _require_valid(g)
    for wi, xi, yi in _chains(g):
        for Y in g.smasks.get((wi, yi), ()):
            images = _choice_images(g, Y)
            if images is None:
                continue
            for Z in images:
                if not any(Zp & ~Z == 0 for Zp in g.smasks.get((xi, yi), ())):
                    return CheckResult(
                        False,
                        ConditionWitness(
                            g.worlds[wi],
                            g.worlds[xi],
                            g.worlds[yi],
                            g.world_set(Y),
                            g.world_set(Z),
                        ),
                    )
    return CheckResult(True)


@dataclass(frozen=True)
class ChoiceSet:
    base: str
    source: str
    members: frozenset

    def __str__(self):
        return f"{{{' '.join(sorted(self.members))}}} for ({self.base},{self.source})"


def choice_sets(g: GenFrame, w: str, x: str, minimal: bool = True) -> list[ChoiceSet]:
    """Hitting sets of {Y : x S_w Y}; with minimal=True only the
    inclusion-minimal ones.  Candidates are drawn from the union of the
    target sets, in mask order."""
    if (w, x) not in g.R:
        raise StructureError(f"choice sets need {w!r} R {x!r}")
    key = (g.index[w], g.index[x])
    family = g.smasks.get(key, [])
    union = 0
    for m in family:
        union |= m
    out = []
    # iterate subsets of the union in ascending mask order
    sub = 0
    members = [j for j in range(g.n) if (union >> j) & 1]
    for count in range(1 << len(members)):
        mask = 0
        for b, j in enumerate(members):
            if (count >> b) & 1:
                mask |= 1 << j
        if any(not mask & Ym for Ym in family):
            continue
        if minimal:
            # minimal iff dropping any single member breaks some target set
            removable = any(
                all((mask & ~(1 << j)) & Ym for Ym in family)
                for j in members
                if (mask >> j) & 1
            )
            if removable:
                continue
        out.append(mask)
    out = sorted(set(out))
    return [ChoiceSet(w, x, g.world_set(m)) for m in out]


@dataclass(frozen=True)
class RConditionWitness:
    """Least failing (w,x,y,Y) of the R condition with every minimal choice
    set for (x,y) that defeats it."""

    w: str
    x: str
    y: str
    Y: frozenset
    failing_choice_sets: tuple[frozenset, ...]

    def __str__(self):
        gammas = " ".join("{" + " ".join(sorted(c)) + "}" for c in self.failing_choice_sets)
        return (
            f"w={self.w} x={self.x} y={self.y} Y={{{' '.join(sorted(self.Y))}}}"
            f" failing choice sets: {gammas}"
        )


def check_R_condition(g: GenFrame) -> CheckResult:
    """wRxRy S_w Y  =>  for every choice set Gamma for (x,y) there is
    Y' <= Y with x S_w Y' whose members' R-successors all lie in Gamma.

    Minimal choice sets suffice: enlarging Gamma only weakens the demand.
    The witness carries every failing minimal choice set of the least failing
    quadruple, since any of them is a legitimate refutation.
    """
    _require_valid(g)
    for wi, xi, yi in _chains(g):
        for Y in g.smasks.get((wi, yi), ()):
            failing = []
            for cs in choice_sets(g, g.worlds[xi], g.worlds[yi], minimal=True):
                gamma = g.mask_of(cs.members)
                ok = False
                for Yp in g.smasks.get((wi, xi), ()):
                    if Yp & ~Y:
                        continue
                    if all(
                        g.rmask[j] & ~gamma == 0
                        for j in range(g.n)
                        if (Yp >> j) & 1
                    ):
                        ok = True
                        break
                if not ok:
                    failing.append(cs.members)
            if failing:
                return CheckResult(
                    False,
                    RConditionWitness(
                        g.worlds[wi],
                        g.worlds[xi],
                        g.worlds[yi],
                        g.world_set(Y),
                        tuple(failing),
                    ),
                )
    return CheckResult(True)


@dataclass(frozen=True)
class NotWWitness:
    """Finite presentation of the infinite-sequence witness: from z0 every
    chosen target set steps back into Z forever."""

    w: str
    z0: str
    Z: frozenset
    family: tuple[frozenset, ...]

    def __str__(self):
        fam = " ".join("{" + " ".join(sorted(Y)) + "}" for Y in self.family)
        return f"w={self.w} z0={self.z0} Z={{{' '.join(sorted(self.Z))}}} family: {fam}"


def check_not_W(g: GenFrame) -> CheckResult:
    """Does the frame refute W?  True iff the cyclic witness exists.

    For each root (w, z0) and each candidate support Q inside the successors
    of w, let D(Q) be the worlds with some S_w-target inside Q.  The witness
    exists iff z0 lies in D(Q) and every S_w-target of z0 inside Q has a
    member with an R-successor back in D(Q); quasi-transitivity then extends
    the stepping to the whole system, which is what the returned witness
    spells out.  Agreement with the brute-force W oracle is the contract.
    """
    _require_valid(g)
    for wi in range(g.n):
        succ = g.rsucc_ix[wi]
        if not succ:
            continue
        mins = {z: g.smin.get((wi, z), []) for z in succ}
        alls = {z: g.smasks.get((wi, z), []) for z in succ}
        for z0 in succ:
            if not mins[z0]:
                continue
            members = succ
            for count in range(1 << len(members)):
                Q = 0
                for b, j in enumerate(members):
                    if (count >> b) & 1:
                        Q |= 1 << j
                dq = 0
                for z in succ:
                    if any(m & ~Q == 0 for m in mins[z]):
                        dq |= 1 << z
                if not (dq >> z0) & 1:
                    continue
                back = 0
                for j in range(g.n):
                    if g.rmask[j] & dq:
                        back |= 1 << j
                if any(m & ~Q == 0 and not m & back for m in mins[z0]):
                    continue
                family = [m for m in alls[z0] if m & ~Q == 0]
                z_rep = 1 << z0
                for m in family:
                    for j in range(g.n):
                        if (m >> j) & 1:
                            z_rep |= g.rmask[j] & dq
                return CheckResult(
                    True,
                    NotWWitness(
                        g.worlds[wi],
                        g.worlds[z0],
                        g.world_set(z_rep),
                        tuple(g.world_set(m) for m in family),
                    ),
                )
    return CheckResult(False)


def _require_valid(g: GenFrame):
    cached = getattr(g, "_valid_cache", None)
    if cached is None:
        cached = not validate_genframe(g)
        g._valid_cache = cached
    if not cached:
        raise StructureError(f"invalid generalized frame: {validate_genframe(g)[0]}")
