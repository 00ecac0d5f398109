"""Frame-correspondence verification: each condition decider against the
brute-force schema-validity oracle, over enumerated or sampled structures.

A mismatch between a decider and its oracle falsifies the corresponding
lemma, so sweeps treat any mismatch as a hard failure.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .formula import SCHEMAS
from .genveltman import (
    GenFrame,
    check_M0_condition,
    check_not_W,
    check_P0_condition,
    check_R_condition,
    genframe_valid_schema,
)
from .search import enumerate_structures, random_frame, random_genframe
from .veltman import CheckResult, Frame, check_R_frame_condition, frame_valid_schema


def _oracle_valid(schema_id):
    def run(structure):
        if isinstance(structure, GenFrame):
            return genframe_valid_schema(structure, SCHEMAS[schema_id])
        return frame_valid_schema(structure, SCHEMAS[schema_id])

    return run


@dataclass(frozen=True)
class Condition:
    id: str
    kind: str  # "gen" | "ordinary"
    decider: callable
    oracle: callable
    negated_oracle: bool = False  # decider true <=> oracle false


CONDITIONS = {
    "M0set": Condition("M0set", "gen", check_M0_condition, _oracle_valid("M0")),
    "P0set": Condition("P0set", "gen", check_P0_condition, _oracle_valid("P0")),
    "Rset": Condition("Rset", "gen", check_R_condition, _oracle_valid("R")),
    "NotWset": Condition(
        "NotWset", "gen", check_not_W, _oracle_valid("W"), negated_oracle=True
    ),
    "Rordinary": Condition(
        "Rordinary", "ordinary", check_R_frame_condition, _oracle_valid("R")
    ),
}

# short names as the command line spells them
CONDITION_ALIASES = {
    ("gen", "M0"): "M0set",
    ("gen", "P0"): "P0set",
    ("gen", "R"): "Rset",
    ("gen", "NotW"): "NotWset",
    ("ordinary", "R"): "Rordinary",
}


@dataclass(frozen=True)
class CorrespondenceCase:
    condition: str
    structure: object
    verdicts: tuple[bool, bool]  # (condition decider, oracle)
    witness: object = None

    @property
    def mismatch(self) -> bool:
        return self.verdicts[0] != self.verdicts[1]


def verify_correspondence(structure, condition_id: str) -> CorrespondenceCase:
    """Run decider and oracle on one structure; mismatch carries evidence."""
    cond = CONDITIONS.get(condition_id)
    if cond is None:
        raise ValueError(f"unknown condition {condition_id!r}")
    is_gen = isinstance(structure, GenFrame)
    if cond.kind == "gen" and not is_gen:
        raise ValueError(f"{condition_id} needs a generalized frame")
    if cond.kind == "ordinary" and is_gen:
        raise ValueError(f"{condition_id} needs an ordinary frame")
    decided: CheckResult = cond.decider(structure)
    oracle: CheckResult = cond.oracle(structure)
    oracle_verdict = (not bool(oracle)) if cond.negated_oracle else bool(oracle)
    witness = None
    if bool(decided) != oracle_verdict:
        witness = {
            "decider": decided.witness,
            "oracle": oracle.witness,
        }
    return CorrespondenceCase(
        condition_id, structure, (bool(decided), oracle_verdict), witness
    )


@dataclass
class SweepReport:
    kind: str
    mode: str
    checked: int = 0
    mismatches: int = 0
    first_mismatch: Optional[CorrespondenceCase] = None
    elapsed: float = 0.0
    condition_ids: tuple = ()

    def summary_line(self) -> str:
        return f"mismatches={self.mismatches} checked={self.checked}"


def _structures(kind, max_worlds, mode, seed, count):
    if mode == "exhaustive":
        yield from enumerate_structures(
            "genframe" if kind == "gen" else "frame", max_worlds
        )
    else:
        rng = random.Random(seed)
        made = 0
        while made < count:
            try:
                if kind == "gen":
                    yield random_genframe(max_worlds, rng)
                else:
                    yield random_frame(max_worlds, rng)
            except Exception:
                continue
            made += 1


def _check_batch(args):
    kind, encoded, condition_ids = args
    out = []
    for enc in encoded:
        structure = _decode(kind, enc)
        for cid in condition_ids:
            case = verify_correspondence(structure, cid)
            if case.mismatch:
                out.append((enc, cid))
    return len(encoded), out


def _encode(st):
    if isinstance(st, GenFrame):
        return (
            "gen",
            tuple(st.worlds),
            tuple(sorted(st.R)),
            tuple(sorted((w, x, tuple(sorted(Y))) for w, x, Y in st.S)),
        )
    return ("ord", tuple(st.worlds), tuple(sorted(st.R)), tuple(sorted(st.S)))


def _decode(kind, enc):
    tag, worlds, R, S = enc
    if tag == "gen":
        return GenFrame(worlds, R, [(w, x, frozenset(Y)) for w, x, Y in S])
    return Frame(worlds, R, S)


def sweep(
    kind: str,
    max_worlds: int,
    condition_ids,
    mode: str = "exhaustive",
    seed: int = 42,
    count: int = 500,
    workers: int = 1,
) -> SweepReport:
    """Compare deciders and oracles across structures; expect 0 mismatches.

    `mode="exhaustive"` walks every canonical structure up to max_worlds;
    `mode="random"` draws `count` seeded samples of exactly that size.
    """
    if mode not in ("exhaustive", "random"):
        raise ValueError(f"unknown mode {mode!r}")
    condition_ids = tuple(condition_ids)
    for cid in condition_ids:
        cond = CONDITIONS.get(cid)
        if cond is None:
            raise ValueError(f"unknown condition {cid!r}")
        if cond.kind != kind:
            raise ValueError(f"condition {cid} does not apply to kind {kind!r}")
    report = SweepReport(kind, mode, condition_ids=condition_ids)
    start = time.monotonic()
    stream = _structures(kind, max_worlds, mode, seed, count)
    if workers <= 1:
        for structure in stream:
            report.checked += 1
            for cid in condition_ids:
                case = verify_correspondence(structure, cid)
                if case.mismatch:
                    report.mismatches += 1
                    if report.first_mismatch is None:
                        report.first_mismatch = case
    else:
        batch, batch_size = [], 64
        jobs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for structure in stream:
                batch.append(_encode(structure))
                if len(batch) == batch_size:
                    jobs.append(pool.submit(_check_batch, (kind, batch, condition_ids)))
                    batch = []
            if batch:
                jobs.append(pool.submit(_check_batch, (kind, batch, condition_ids)))
            for job in jobs:
                done, bad = job.result()
                report.checked += done
                for enc, cid in bad:
                    report.mismatches += 1
                    if report.first_mismatch is None:
                        report.first_mismatch = verify_correspondence(
                            _decode(kind, enc), cid
                        )
    report.elapsed = time.monotonic() - start
    return report
