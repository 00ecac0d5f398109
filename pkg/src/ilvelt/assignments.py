"""Bit-parallel evaluation of formulas under many subset assignments at once.

Deciding schema validity on a finite frame means checking every assignment of
world-subsets to the schema's metavariables.  Rather than looping over the
2^(n*k) assignments, we evaluate all of them simultaneously: for each world w
and each subformula we keep one big integer whose bit i says whether the
subformula holds at w under assignment number i.  Boolean connectives become
integer bitwise operations; the modal clauses combine the per-world integers
of the subformulas.

Assignment numbering (this fixes what "least counter-assignment" means): with
metavariables m_0 < m_1 < ... (sorted) and worlds w_0 ... w_{n-1} in frame
order, assignment i assigns to m_p the subset whose membership mask is the
bit-slice of i at positions [(k-1-p)*n, (k-p)*n).  Subsets are therefore
ordered by their membership mask (world j <-> bit j), and assignments by the
tuple (mask of m_0, mask of m_1, ...).

The same machinery evaluates "explicit" spaces, where each metavariable ranges
over a given list of candidate subsets (the definable algebra) instead of the
full powerset, and plain model checking, where atoms have fixed extensions.
"""

from __future__ import annotations

from functools import lru_cache

from .formula import Atom, Bottom, Box, Formula, Implies, Rhd

# Above this many assignment bits, the outermost metavariable is split off and
# evaluated block by block to keep the big integers around a megabyte.
_MAX_SPACE_BITS = 20


@lru_cache(maxsize=None)
def _bit_pattern(bit: int, total_bits: int) -> int:
    """Integer with assignment-bit i set exactly when bit `bit` of i is set."""
    period = 1 << (bit + 1)
    pattern = ((1 << (1 << bit)) - 1) << (1 << bit)
    width = period
    while width < total_bits:
        pattern |= pattern << width
        width <<= 1
    return pattern


def subset_patterns(n_worlds: int, mvs: tuple[str, ...]):
    """Per-(metavariable, world) bit patterns over the full powerset space."""
    k = len(mvs)
    total = 1 << (n_worlds * k)
    patterns = {}
    for p, mv in enumerate(mvs):
        for j in range(n_worlds):
            patterns[(mv, j)] = _bit_pattern((k - 1 - p) * n_worlds + j, total)
    return total, patterns


def decode_subset_assignment(index: int, n_worlds: int, mvs: tuple[str, ...]):
    """Invert the assignment numbering: index -> metavariable -> world mask."""
    k = len(mvs)
    out = {}
    for p, mv in enumerate(mvs):
        out[mv] = (index >> ((k - 1 - p) * n_worlds)) & ((1 << n_worlds) - 1)
    return out


def explicit_patterns(n_worlds: int, mvs: tuple[str, ...], families):
    """Patterns where metavariable mvs[p] ranges over the masks families[p].

    Assignment index i is the mixed-radix number with digit p (most significant
    first) selecting families[p][digit].
    """
    k = len(mvs)
    sizes = [len(fam) for fam in families]
    total = 1
    for s in sizes:
        total *= s
    strides = [0] * k
    acc = 1
    for p in range(k - 1, -1, -1):
        strides[p] = acc
        acc *= sizes[p]

    patterns = {}
    for p, mv in enumerate(mvs):
        stride, size = strides[p], sizes[p]
        period = stride * size
        base_block = (1 << stride) - 1
        # 0b...0001000...0001 with ones every `period` bits, `repeats` of them
        repeats = total // period
        replicator = ((1 << (period * repeats)) - 1) // ((1 << period) - 1)
        for j in range(n_worlds):
            pat = 0
            for digit, mask in enumerate(families[p]):
                if (mask >> j) & 1:
                    pat |= base_block << (digit * stride)
            patterns[(mv, j)] = pat * replicator
    return total, patterns


def decode_explicit_assignment(index: int, mvs: tuple[str, ...], families):
    sizes = [len(fam) for fam in families]
    digits = [0] * len(mvs)
    for p in range(len(mvs) - 1, -1, -1):
        digits[p] = index % sizes[p]
        index //= sizes[p]
    return {mv: families[p][digits[p]] for p, mv in enumerate(mvs)}


def evaluate(struct, f: Formula, patterns, total_bits: int, fixed=None):
    """Per-world truth patterns of f across the assignment space.

    `struct` supplies the modal accessibility: it must have `n` (world count),
    `rsucc_ix` (world index -> list of successor indices) and either
    `ssucc_ix` (pair of indices -> target index list, ordinary frames) or
    `smin_ix` (pair -> list of minimal target sets as index tuples,
    generalized frames).  `fixed` maps atom names to world masks for atoms
    that are not metavariables (model checking).
    """
    n = struct.n
    full = (1 << total_bits) - 1
    fixed = fixed or {}
    memo: dict[Formula, list[int]] = {}
    generalized = hasattr(struct, "smin_ix")

    def ext(g: Formula) -> list[int]:
        if g in memo:
            return memo[g]
        if isinstance(g, Bottom):
            out = [0] * n
        elif isinstance(g, Atom):
            if (g.name, 0) in patterns:
                out = [patterns[(g.name, j)] for j in range(n)]
            elif g.name in fixed:
                mask = fixed[g.name]
                out = [full if (mask >> j) & 1 else 0 for j in range(n)]
            else:
                raise KeyError(f"atom {g.name!r} has no extension here")
        elif isinstance(g, Implies):
            le, re_ = ext(g.left), ext(g.right)
            out = [(full ^ le[j]) | re_[j] for j in range(n)]
        elif isinstance(g, Box):
            be = ext(g.body)
            out = []
            for j in range(n):
                acc = full
                for v in struct.rsucc_ix[j]:
                    acc &= be[v]
                out.append(acc)
        elif isinstance(g, Rhd):
            le, re_ = ext(g.left), ext(g.right)
            out = []
            for j in range(n):
                acc = full
                for u in struct.rsucc_ix[j]:
                    if generalized:
                        step = 0
                        for ys in struct.smin_ix.get((j, u), ()):
                            part = full
                            for y in ys:
                                part &= re_[y]
                                if not part:
                                    break
                            step |= part
                            if step == full:
                                break
                    else:
                        step = 0
                        for v in struct.ssucc_ix.get((j, u), ()):
                            step |= re_[v]
                            if step == full:
                                break
                    acc &= (full ^ le[u]) | step
                    if not acc:
                        break
                out.append(acc)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = out
        return out

    return ext(f)


def valid_under_subsets(struct, body: Formula, mvs: tuple[str, ...], fixed=None):
    """(True, None) if body holds at every world under every subset assignment,
    else (False, (assignment_index, world_index)) for the least failing pair."""
    n = struct.n
    k = len(mvs)
    if n * k <= _MAX_SPACE_BITS or k == 0:
        total, patterns = subset_patterns(n, mvs)
        exts = evaluate(struct, body, patterns, total, fixed)
        return _first_failure(exts, total, n)
    # split the outermost (most significant) metavariable into blocks
    head, rest = mvs[0], mvs[1:]
    total, patterns = subset_patterns(n, rest)
    for head_mask in range(1 << n):
        fx = dict(fixed or {})
        fx[head] = head_mask
        block_patterns = dict(patterns)
        for j in range(n):
            block_patterns[(head, j)] = (
                (1 << total) - 1 if (head_mask >> j) & 1 else 0
            )
        exts = evaluate(struct, body, block_patterns, total, fx)
        ok, failure = _first_failure(exts, total, n)
        if not ok:
            index, world = failure
            return False, (index + (head_mask << (n * len(rest))), world)
    return True, None


def _first_failure(exts, total_bits, n):
    full = (1 << total_bits) - 1
    everywhere = full
    for j in range(n):
        everywhere &= exts[j]
    if everywhere == full:
        return True, None
    bad = full ^ everywhere
    index = (bad & -bad).bit_length() - 1
    for j in range(n):
        if not (exts[j] >> index) & 1:
            return False, (index, j)
    raise AssertionError("failure bit without failing world")
