"""Bounded countermodel search: canonical enumeration, separating structures,
and models that force a logic pointwise while refuting a target schema.

Enumeration is exhaustive and canonical (least labeled representative under
world permutation) up to the sizes where that is affordable: ordinary frames
to 5 worlds, generalized frames to 3.  Beyond that the searches walk a
deterministic guided stream - closures of chain-rooted seed templates followed
by seeded random seeds - so results stay reproducible, but a "none" outcome
beyond the exhaustive sizes means the stream is exhausted, not the space.
Every hit is re-checked by the public deciders before it is returned.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .formula import SCHEMAS, Schema
from .veltman import (
    CheckResult,
    ClosureError,
    Frame,
    Model,
    StructureError,
    check_R_frame_condition,
    frame_valid_schema,
    model_forces_logic,
    validate_frame,
    _forcing_failure,
)
from .genveltman import (
    GenFrame,
    check_M0_condition,
    check_not_W,
    check_P0_condition,
    check_R_condition,
    close_genframe,
    genframe_valid_schema,
    validate_genframe,
)
from . import assignments

EXHAUSTIVE_FRAME_WORLDS = 5
EXHAUSTIVE_GENFRAME_WORLDS = 3

FOUND = "found"
BOUND_EXHAUSTED = "bound exhausted"
BUDGET_EXHAUSTED = "budget exhausted"


def _world_names(n):
    return [f"w{i}" for i in range(n)]


# ---------------------------------------------------------------------------
# Canonical enumeration
# ---------------------------------------------------------------------------

def _strict_orders(n):
    """Canonical strict orders on range(n) with their automorphism groups.

    Each unordered pair is directed one way or left out; transitivity is
    checked directly, and any cycle would force a two-way pair, so survivors
    are exactly the strict partial orders.
    """
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    perms = list(itertools.permutations(range(n)))
    seen = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        rel = set()
        for (i, j), s in zip(pairs, states):
            if s == 1:
                rel.add((i, j))
            elif s == 2:
                rel.add((j, i))
        if any((x, z) not in rel for x, y in rel for y2, z in rel if y == y2):
            continue
        enc = tuple(sorted(rel))
        best = enc
        autos = []
        for p in perms:
            image = tuple(sorted((p[x], p[y]) for x, y in rel))
            if image < best:
                best = None
                break
            if image == enc:
                autos.append(p)
        if best is not None:
            seen.append((rel, autos))
    seen.sort(key=lambda t: tuple(sorted(t[0])))
    return seen


def _transitive_sets(forced, free_pairs):
    """All transitive supersets of `forced` formed by adding free pairs."""
    out = []
    for bits in range(1 << len(free_pairs)):
        rel = set(forced)
        for b, p in enumerate(free_pairs):
            if (bits >> b) & 1:
                rel.add(p)
        if all((x, z) in rel for x, y in rel for y2, z in rel if y == y2):
            out.append(frozenset(rel))
    return out


def _enumerate_frames(n):
    worlds = _world_names(n)
    for rel, autos in _strict_orders(n):
        rsucc = {i: sorted(j for i2, j in rel if i2 == i) for i in range(n)}
        per_world = []
        for x in range(n):
            ups = rsucc[x]
            forced = {(y, y) for y in ups} | {
                (y, z) for y in ups for z in ups if (y, z) in rel
            }
            free = [
                (y, z)
                for y in ups
                for z in ups
                if y != z and (y, z) not in rel
            ]
            per_world.append((x, _transitive_sets(forced, free)))
        variants = []
        for combo in itertools.product(*(opts for _, opts in per_world)):
            triples = frozenset(
                (x, y, z)
                for (x, _), chosen in zip(per_world, combo)
                for y, z in chosen
            )
            enc = tuple(sorted(triples))
            best = True
            for p in autos:
                image = tuple(sorted((p[x], p[y], p[z]) for x, y, z in triples))
                if image < enc:
                    best = False
                    break
            if best:
                variants.append(enc)
        variants.sort()
        for enc in variants:
            yield Frame(
                worlds,
                [(worlds[x], worlds[y]) for x, y in sorted(rel)],
                [(worlds[x], worlds[y], worlds[z]) for x, y, z in enc],
            )


def _mask_worlds(mask, n):
    return tuple(j for j in range(n) if (mask >> j) & 1)


def _enumerate_genframes(n):
    worlds = _world_names(n)
    for rel, autos in _strict_orders(n):
        rsucc = {i: sorted(j for i2, j in rel if i2 == i) for i in range(n)}
        per_base = []
        for w in range(n):
            ups = rsucc[w]
            if not ups:
                continue
            up_mask = 0
            for y in ups:
                up_mask |= 1 << y
            slots = []
            for x in ups:
                forced = {1 << x} | {1 << y for y in rsucc[x]}
                free = []
                sub = up_mask  # walk the nonempty submasks of up_mask
                while sub:
                    if sub not in forced:
                        free.append(sub)
                    sub = (sub - 1) & up_mask
                free.sort()
                slots.append((x, forced, free))
            options = []
            for picks in itertools.product(
                *(range(1 << len(free)) for _, _, free in slots)
            ):
                fam = {}
                for (x, forced, free), bits in zip(slots, picks):
                    chosen = set(forced)
                    for b, mask in enumerate(free):
                        if (bits >> b) & 1:
                            chosen.add(mask)
                    fam[x] = chosen
                ok = True
                for x, Ys in fam.items():
                    for Y in Ys:
                        for y in _mask_worlds(Y, n):
                            for Z in fam.get(y, ()):
                                if not (Z >> y) & 1 and Z not in Ys:
                                    ok = False
                                    break
                            if not ok:
                                break
                        if not ok:
                            break
                    if not ok:
                        break
                if ok:
                    options.append(
                        frozenset((w, x, Y) for x, Ys in fam.items() for Y in Ys)
                    )
            per_base.append(options)
        variants = []
        for combo in itertools.product(*per_base) if per_base else [()]:
            triples = frozenset().union(*combo) if combo else frozenset()
            enc = tuple(sorted(triples))
            best = True
            for p in autos:
                image = tuple(
                    sorted(
                        (
                            p[w],
                            p[x],
                            sum(1 << p[j] for j in _mask_worlds(Y, n)),
                        )
                        for w, x, Y in triples
                    )
                )
                if image < enc:
                    best = False
                    break
            if best:
                variants.append(enc)
        variants.sort()
        for enc in variants:
            yield GenFrame(
                worlds,
                [(worlds[x], worlds[y]) for x, y in sorted(rel)],
                [
                    (worlds[w], worlds[x], frozenset(worlds[j] for j in _mask_worlds(Y, n)))
                    for w, x, Y in enc
                ],
            )


def enumerate_structures(kind: str, max_worlds: int):
    """Stream of canonical validated structures, by size then canonical order."""
    if kind not in ("frame", "genframe"):
        raise ValueError(f"unknown kind {kind!r}")
    for n in range(1, max_worlds + 1):
        if kind == "frame":
            yield from _enumerate_frames(n)
        else:
            yield from _enumerate_genframes(n)


# ---------------------------------------------------------------------------
# Random structures
# ---------------------------------------------------------------------------

def random_frame(n: int, rng: random.Random) -> Frame:
    worlds = _world_names(n)
    order = list(range(n))
    rng.shuffle(order)
    R = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                R.add((worlds[order[i]], worlds[order[j]]))
    seed = Frame(worlds, R, [])
    fr = _close_frame_quiet(seed)
    extra = []
    for x, y in fr.R:
        for z in worlds:
            if (x, z) in fr.R and rng.random() < 0.15:
                extra.append((x, y, z))
    if extra:
        fr = _close_frame_quiet(Frame(worlds, fr.R, set(fr.S) | set(extra)))
    return fr


def random_genframe(n: int, rng: random.Random) -> GenFrame:
    worlds = _world_names(n)
    order = list(range(n))
    rng.shuffle(order)
    R = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                R.add((worlds[order[i]], worlds[order[j]]))
    succ = {w: [y for x, y in R if x == w] for w in worlds}
    triples = []
    for _ in range(rng.randint(0, 3)):
        bases = [w for w in worlds if succ[w]]
        if not bases:
            break
        w = rng.choice(bases)
        x = rng.choice(succ[w])
        pool = succ[w]
        size = rng.randint(1, len(pool))
        triples.append((w, x, frozenset(rng.sample(pool, size))))
    return close_genframe(GenFrame(worlds, R, triples))


def _close_frame_quiet(seed: Frame) -> Frame:
    from .veltman import close_frame

    return close_frame(seed)


# ---------------------------------------------------------------------------
# Separating-structure search
# ---------------------------------------------------------------------------

GEN_CONDITIONS = {
    "M0": check_M0_condition,
    "P0": check_P0_condition,
    "R": check_R_condition,
    "NotW": check_not_W,
}

FRAME_CONDITIONS = {
    "R": check_R_frame_condition,
}


def _requirement_checker(kind: str, token: str):
    if kind == "genframe":
        if token in GEN_CONDITIONS:
            return GEN_CONDITIONS[token]
        if token in SCHEMAS:
            return lambda g, s=SCHEMAS[token]: genframe_valid_schema(g, s)
    else:
        if token in FRAME_CONDITIONS:
            return FRAME_CONDITIONS[token]
        if token in SCHEMAS:
            return lambda fr, s=SCHEMAS[token]: frame_valid_schema(fr, s)
    raise ValueError(f"unknown requirement {token!r} for kind {kind!r}")


@dataclass(frozen=True)
class SearchSpec:
    kind: str
    max_worlds: int
    valid: tuple = ()
    invalid: Optional[str] = None
    logic: tuple = ()
    target: Optional[str] = None
    seed: int = 0
    budget_secs: Optional[float] = None

    def __post_init__(self):
        if self.max_worlds < 1:
            raise ValueError("max_worlds must be at least 1")
        if self.kind in ("frame", "genframe"):
            if self.invalid is None:
                raise ValueError("separating search needs an `invalid` target")
            if self.invalid in self.valid:
                raise ValueError("`invalid` target also listed as valid")
        elif self.kind == "model-logic":
            if self.target is None:
                raise ValueError("model-logic search needs a target schema")
            if self.target in self.logic:
                raise ValueError("target schema is part of the logic")
        else:
            raise ValueError(f"unknown search kind {self.kind!r}")


@dataclass
class SearchResult:
    outcome: str
    structure: object = None
    checked: int = 0
    elapsed: float = 0.0
    exhaustive: bool = True
    refutation: object = None

    def __bool__(self):
        return self.outcome == FOUND


def _template_genframes(n, seen):
    """Closures of chain-rooted seeds: w0 R w1 R w2, a first target layer A
    behind (w0,w2,.), an optional second layer B, and bounded extra edges."""
    if n < 4:
        return
    worlds = _world_names(n)
    w0, w1, w2 = worlds[0], worlds[1], worlds[2]
    rest = worlds[3:]
    for alpha in range(1, len(rest) + 1):
        A = rest[:alpha]
        B = rest[alpha:]
        pool = [(a, b) for a in A for b in B]
        pool += [(a, w1) for a in A]
        pool += [(w1, b) for b in B]
        second_targets = [None]
        for r in range(1, len(B) + 1):
            second_targets += [frozenset(c) for c in itertools.combinations(B, r)]
        for bits in range(1 << len(pool)):
            edges = {p for k, p in enumerate(pool) if (bits >> k) & 1}
            for second in second_targets:
                R = {(w0, w1), (w1, w2)} | edges
                S = [(w0, w2, frozenset(A))]
                if second is not None:
                    S.append((w1, w2, second))
                try:
                    g = close_genframe(GenFrame(worlds, R, S))
                except (ClosureError, StructureError):
                    continue
                enc = g.encoding()
                if enc in seen:
                    continue
                seen.add(enc)
                yield g


def _template_frames(n, seen):
    """Chain-rooted ordinary seeds around the five-role shape that can break
    the R frame condition, plus bounded edges through the spare worlds."""
    if n < 5:
        return
    worlds = _world_names(n)
    base_R = {(worlds[0], worlds[1]), (worlds[1], worlds[2]), (worlds[3], worlds[4])}
    base_S = [(worlds[0], worlds[2], worlds[3])]
    spare = worlds[5:]
    pool = []
    for s in spare:
        for i in range(5):
            pool.append((worlds[i], s))
            pool.append((s, worlds[i]))
    pool += [(worlds[0], worlds[3]), (worlds[0], worlds[4]), (worlds[2], worlds[3]),
             (worlds[1], worlds[4]), (worlds[2], worlds[4])]
    extra_triples = [None]
    for a in (worlds[0], worlds[1]):
        for b in worlds[1:]:
            for c in worlds[1:]:
                if b != a and c != a:
                    extra_triples.append((a, b, c))
    for bits in range(1 << min(len(pool), 12)):
        edges = {p for k, p in enumerate(pool[:12]) if (bits >> k) & 1}
        for extra in extra_triples:
            R = base_R | edges
            S = list(base_S)
            if extra is not None:
                S.append(extra)
            try:
                fr = _close_frame_quiet(Frame(worlds, R, S))
            except (ClosureError, StructureError):
                continue
            enc = fr.encoding()
            if enc in seen:
                continue
            seen.add(enc)
            yield fr


def _root_star_frames(n, seen, max_edges=3, max_seeds=3):
    """Frames with a root above everything, a few edges among the rest, and
    a few single-target S-seeds out of the root.

    The shape of choice for models that force a logic while refuting a
    schema at the root.  Candidates come out by total edge-plus-seed count,
    so structurally smallest first.
    """
    worlds = _world_names(n)
    root = worlds[0]
    others = worlds[1:]
    base_R = [(root, w) for w in others]
    pairs = [(x, y) for x in others for y in others if x != y]
    bases = {}

    def closed_base(edges):
        if edges not in bases:
            try:
                base = _close_frame_quiet(Frame(worlds, base_R + list(edges), []))
            except (ClosureError, StructureError):
                bases[edges] = None
                return None
            base_root = {(y, z) for x, y, z in base.S if x == root}
            rest = [t for t in base.S if t[0] != root]
            live = [p for p in pairs if p not in base_root]
            bases[edges] = (base.R, base_root, rest, live)
        return bases[edges]

    for complexity in range(0, max_edges + max_seeds + 1):
        for n_edges in range(max(0, complexity - max_seeds), min(complexity, max_edges) + 1):
            n_seeds = complexity - n_edges
            for edges in itertools.combinations(pairs, n_edges):
                got = closed_base(edges)
                if got is None:
                    continue
                R, base_root, rest, live = got
                for seeds in itertools.combinations(live, n_seeds):
                    pairs_root = set(base_root) | set(seeds)
                    while True:
                        extra = {
                            (x, z)
                            for x, y in pairs_root
                            for y2, z in pairs_root
                            if y == y2 and (x, z) not in pairs_root
                        }
                        if not extra:
                            break
                        pairs_root |= extra
                    fr = Frame(
                        worlds, R, rest + [(root, y, z) for y, z in pairs_root]
                    )
                    enc = fr.encoding()
                    if enc in seen:
                        continue
                    seen.add(enc)
                    yield fr


def _candidate_stream(kind, n, rng, seen, random_samples, template="separating"):
    exhaustive_limit = (
        EXHAUSTIVE_FRAME_WORLDS if kind == "frame" else EXHAUSTIVE_GENFRAME_WORLDS
    )
    if n <= exhaustive_limit:
        if kind == "frame":
            yield from _enumerate_frames(n)
        else:
            yield from _enumerate_genframes(n)
        return
    if kind == "frame":
        if template == "model":
            yield from _root_star_frames(n, seen)
        else:
            yield from _template_frames(n, seen)
    else:
        yield from _template_genframes(n, seen)
    for _ in range(random_samples):
        try:
            st = random_frame(n, rng) if kind == "frame" else random_genframe(n, rng)
        except (ClosureError, StructureError):
            continue
        enc = st.encoding()
        if enc in seen:
            continue
        seen.add(enc)
        yield st


def find_separating_structure(
    spec: SearchSpec, random_samples: int = 4000, workers: int = 1
) -> SearchResult:
    """Least structure in the deterministic stream meeting `valid` and
    refuting `invalid`.  Exhaustive (hence genuinely minimal, and a reliable
    "none") up to 5 ordinary / 3 generalized worlds per size; guided beyond.
    """
    validators = [_requirement_checker(spec.kind, t) for t in spec.valid]
    refuter = _requirement_checker(spec.kind, spec.invalid)
    start = time.monotonic()
    deadline = start + spec.budget_secs if spec.budget_secs else None
    rng = random.Random(spec.seed)
    checked = 0
    exhaustive = True
    exhaustive_limit = (
        EXHAUSTIVE_FRAME_WORLDS if spec.kind == "frame" else EXHAUSTIVE_GENFRAME_WORLDS
    )
    for n in range(1, spec.max_worlds + 1):
        if n > exhaustive_limit:
            exhaustive = False
        seen = set()
        for st in _candidate_stream(spec.kind, n, rng, seen, random_samples):
            if deadline and time.monotonic() > deadline:
                return SearchResult(
                    BUDGET_EXHAUSTED, checked=checked,
                    elapsed=time.monotonic() - start, exhaustive=False,
                )
            checked += 1
            if bool(refuter(st)):
                continue
            if all(bool(v(st)) for v in validators):
                # self-certify: a fresh validation plus the public deciders
                violations = (
                    validate_frame(st) if spec.kind == "frame" else validate_genframe(st)
                )
                assert not violations
                assert all(bool(v(st)) for v in validators)
                assert not bool(refuter(st))
                return SearchResult(
                    FOUND, st, checked, time.monotonic() - start, exhaustive
                )
    return SearchResult(
        BOUND_EXHAUSTED, checked=checked,
        elapsed=time.monotonic() - start, exhaustive=exhaustive,
    )


# ---------------------------------------------------------------------------
# Incompleteness-model search
# ---------------------------------------------------------------------------

def _algebra_verdict(fr: Frame, masks, logic, target):
    """Forcing of the logic plus a target failure, over one algebra family.

    The whole verdict depends only on the frame and the generated family of
    sets, never on which valuation produced it, so callers can memoize on the
    family."""
    for schema in logic:
        mvs = schema.metavariables
        families = [masks] * len(mvs)
        total, patterns = assignments.explicit_patterns(fr.n, mvs, families)
        exts = assignments.evaluate(fr, schema.body, patterns, total)
        full = (1 << total) - 1
        for j in range(fr.n):
            if exts[j] != full:
                return None
    mvs = target.metavariables
    families = [masks] * len(mvs)
    total, patterns = assignments.explicit_patterns(fr.n, mvs, families)
    exts = assignments.evaluate(fr, target.body, patterns, total)
    full = (1 << total) - 1
    for j in range(fr.n):
        if exts[j] != full:
            bad = full ^ exts[j]
            index = (bad & -bad).bit_length() - 1
            assign = assignments.decode_explicit_assignment(index, mvs, families)
            from .veltman import ForcingFailure

            return ForcingFailure(
                target.id,
                {mv: fr.world_set(m) for mv, m in assign.items()},
                fr.worlds[j],
            )
    return None


def _set_partitions(n):
    """All partitions of range(n) as restricted-growth strings, in order."""
    rgs = [0] * n

    def maxima():
        m = [0] * n
        for i in range(1, n):
            m[i] = max(m[i - 1], rgs[i - 1] + 1)
        return m

    while True:
        yield list(rgs)
        m = maxima()
        for i in range(n - 1, 0, -1):
            if rgs[i] < m[i]:
                rgs[i] += 1
                for j in range(i + 1, n):
                    rgs[j] = 0
                break
        else:
            return


def _valuation_for_blocks(fr, blocks, atoms):
    """A valuation whose atom profiles number the blocks in binary."""
    val = {a: set() for a in atoms}
    for i, group in enumerate(blocks):
        for k, a in enumerate(atoms):
            if (i >> k) & 1:
                val[a].update(fr.worlds[j] for j in group)
    return Model(fr, val)


def _scan_frame_partitions(fr, atoms, logic, target, counter, powerset_rejects):
    """Try every atom-profile partition of the worlds on one frame.

    A model's verdict (logic forced everywhere, target refuted) depends only
    on its definable algebra, which is the family of unions of the
    modal-equivalence blocks, which in turn depend only on the partition the
    atom profiles induce.  So instead of 2^(atoms*worlds) valuations it
    suffices to try the Bell(worlds) partitions, refine each, and memoize
    verdicts per refined partition.
    """
    from .veltman import frame_twin_blocks, refine_partition

    twin_pairs = []
    if powerset_rejects:
        for group in frame_twin_blocks(fr):
            twin_pairs.extend(itertools.combinations(group, 2))
        if not twin_pairs:
            return None, None
    cache = {}
    for rgs in _set_partitions(fr.n):
        n_blocks = len(set(rgs))
        if n_blocks > (1 << len(atoms)):
            continue
        if powerset_rejects and all(rgs[u] != rgs[v] for u, v in twin_pairs):
            # no twinnable pair shares a block: refines to singletons
            continue
        counter[0] += 1
        blocks = refine_partition(fr, list(rgs))
        if powerset_rejects and all(len(g) == 1 for g in blocks):
            continue
        key = tuple(sorted(tuple(g) for g in blocks))
        if key in cache:
            verdict = cache[key]
        else:
            block_masks = [sum(1 << j for j in g) for g in blocks]
            masks = sorted(
                sum(block_masks[b] for b in range(len(blocks)) if (bits >> b) & 1)
                for bits in range(1 << len(blocks))
            )
            verdict = _algebra_verdict(fr, masks, logic, target)
            cache[key] = verdict
        if verdict is not None:
            # number the original partition's blocks, least world first
            groups = {}
            for j, b in enumerate(rgs):
                groups.setdefault(b, []).append(j)
            model = _valuation_for_blocks(fr, list(groups.values()), atoms)
            return model, verdict
    return None, None


def find_incompleteness_model(
    logic: Iterable[str],
    target: str,
    max_worlds: int,
    seed: int = 0,
    random_samples: int = 3000,
    budget_secs: Optional[float] = None,
    atoms=("p", "q", "r"),
) -> SearchResult:
    """A model whose worlds all force the logic's definable-algebra instances
    while some world refutes an algebra instance of the target.

    Frames that frame-validate the target cannot carry such a model and are
    skipped (for target R the polynomial frame condition decides this).  On
    each surviving frame, atom-profile partitions stand in for valuations:
    the verdict depends only on the modal-equivalence blocks a partition
    refines to, so the Bell-number many partitions, memoized per refined
    partition, replace the 2^(atoms*worlds) valuation scan.
    """
    logic_ids = [s if isinstance(s, str) else s.id for s in logic]
    target_id = target if isinstance(target, str) else target.id
    if target_id in logic_ids:
        raise ValueError(f"target {target_id!r} is part of the logic")
    logic_schemas = [SCHEMAS[s] for s in logic_ids]
    target_schema = SCHEMAS[target_id]
    # R and P0 share their frame condition, so on the frames that survive the
    # target filter a powerset algebra can never force a logic containing
    # either: force = frame-validity there, and that is exactly what failed.
    powerset_rejects = target_id in ("R", "P0") and (
        "P0" in logic_ids or "R" in logic_ids
    )

    start = time.monotonic()
    deadline = start + budget_secs if budget_secs else None
    rng = random.Random(seed)
    counter = [0]
    exhaustive = True
    for n in range(1, max_worlds + 1):
        if n > EXHAUSTIVE_FRAME_WORLDS:
            exhaustive = False
        seen = set()
        for fr in _candidate_stream(
            "frame", n, rng, seen, random_samples, template="model"
        ):
            if deadline and time.monotonic() > deadline:
                return SearchResult(
                    BUDGET_EXHAUSTED, checked=counter[0],
                    elapsed=time.monotonic() - start, exhaustive=False,
                )
            if target_id == "R":
                if bool(check_R_frame_condition(fr)):
                    continue
            elif bool(frame_valid_schema(fr, target_schema)):
                continue
            if powerset_rejects:
                from .veltman import frame_twin_blocks

                if all(len(g) == 1 for g in frame_twin_blocks(fr)):
                    continue
            model, refutation = _scan_frame_partitions(
                fr, atoms, logic_schemas, target_schema, counter, powerset_rejects
            )
            if model is not None:
                return SearchResult(
                    FOUND, model, counter[0], time.monotonic() - start,
                    exhaustive, refutation,
                )
    return SearchResult(
        BOUND_EXHAUSTED, checked=counter[0],
        elapsed=time.monotonic() - start, exhaustive=exhaustive,
    )
