"""Hilbert-style derivation checking for the interpretability logic and its
extension schemata.

A derivation is a numbered sequence of formulas, each justified as a
tautology, an axiom instance, modus ponens from two earlier steps, or
necessitation of an earlier step.  The file format, one step per line:

    logic: R, W
    1. p -> p            ; taut
    2. []p -> p |> p     ; ax J1 [A:=p, B:=p]
    3. ...               ; mp 1 2
    4. ...               ; nec 3

Tautologies are decided by truth table after abstracting every maximal boxed
or rhd subformula as a fresh propositional unit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Union

from .formula import (
    Atom,
    Bottom,
    Box,
    Formula,
    IL_AXIOMS,
    Implies,
    InstantiationError,
    ParseError,
    Rhd,
    SCHEMAS,
    instantiate,
    parse,
)


@dataclass(frozen=True)
class Taut:
    def __str__(self):
        return "taut"


@dataclass(frozen=True)
class Axiom:
    schema_id: str
    subst: tuple  # sorted (metavariable, formula) pairs

    def __str__(self):
        inside = ", ".join(f"{m}:={_print(f)}" for m, f in self.subst)
        return f"ax {self.schema_id} [{inside}]"


@dataclass(frozen=True)
class MP:
    premise: int      # step holding phi
    implication: int  # step holding phi -> psi

    def __str__(self):
        return f"mp {self.premise} {self.implication}"


@dataclass(frozen=True)
class Nec:
    premise: int

    def __str__(self):
        return f"nec {self.premise}"


Justification = Union[Taut, Axiom, MP, Nec]


@dataclass(frozen=True)
class Derivation:
    logic: tuple[str, ...]
    steps: tuple[tuple[Formula, Justification], ...]
    name: str = ""


@dataclass(frozen=True)
class StepFailure:
    step: int  # 1-based
    reason: str

    def __str__(self):
        return f"step {self.step}: {self.reason}"


def _print(f):
    from .formula import print_formula

    return print_formula(f)


# ---------------------------------------------------------------------------
# Tautology checking
# ---------------------------------------------------------------------------

def _abstraction_units(f: Formula, units: list):
    """Maximal box/rhd subformulas and atoms, outside any modality."""
    if isinstance(f, (Box, Rhd, Atom)):
        if f not in units:
            units.append(f)
    elif isinstance(f, Implies):
        _abstraction_units(f.left, units)
        _abstraction_units(f.right, units)


def taut_check(f: Formula) -> bool:
    """Classical tautology over the modal abstraction of f."""
    units: list[Formula] = []
    _abstraction_units(f, units)

    def truth(g, env):
        if isinstance(g, Bottom):
            return False
        if g in env:
            return env[g]
        # only Implies can remain: units cover everything else
        return (not truth(g.left, env)) or truth(g.right, env)

    for values in itertools.product((False, True), repeat=len(units)):
        if not truth(f, dict(zip(units, values))):
            return False
    return True


# ---------------------------------------------------------------------------
# Derivation checking
# ---------------------------------------------------------------------------

def _axiom_pool(logic):
    pool = set(IL_AXIOMS)
    pool.update(logic)
    return pool


def check_derivation(d: Derivation) -> Optional[StepFailure]:
    """None when every step is justified; otherwise the first failure."""
    if not d.steps:
        return StepFailure(0, "derivation has no steps")
    pool = _axiom_pool(d.logic)
    for i, (formula, just) in enumerate(d.steps, start=1):
        if isinstance(just, Taut):
            if not taut_check(formula):
                return StepFailure(i, f"not a tautology: {_print(formula)}")
        elif isinstance(just, Axiom):
            if just.schema_id not in pool:
                return StepFailure(i, f"schema {just.schema_id} not in the logic")
            try:
                expected = instantiate(SCHEMAS[just.schema_id], dict(just.subst))
            except (KeyError, InstantiationError) as exc:
                return StepFailure(i, str(exc))
            if expected != formula:
                return StepFailure(
                    i,
                    f"not that instance: expected {_print(expected)},"
                    f" wrote {_print(formula)}",
                )
        elif isinstance(just, MP):
            for ref in (just.premise, just.implication):
                if not 1 <= ref < i:
                    return StepFailure(i, f"reference {ref} is not an earlier step")
            premise = d.steps[just.premise - 1][0]
            implication = d.steps[just.implication - 1][0]
            if not isinstance(implication, Implies):
                return StepFailure(
                    i, f"step {just.implication} is not an implication"
                )
            if implication.left != premise or implication.right != formula:
                return StepFailure(
                    i,
                    f"modus ponens mismatch: step {just.implication} is"
                    f" {_print(implication)}, step {just.premise} is {_print(premise)}",
                )
        elif isinstance(just, Nec):
            if not 1 <= just.premise < i:
                return StepFailure(i, f"reference {just.premise} is not an earlier step")
            if formula != Box(d.steps[just.premise - 1][0]):
                return StepFailure(
                    i, f"not the necessitation of step {just.premise}"
                )
        else:
            return StepFailure(i, f"unknown justification {just!r}")
    return None


# ---------------------------------------------------------------------------
# Derivation file format
# ---------------------------------------------------------------------------

class DerivationFormatError(ValueError):
    def __init__(self, message, line_no=None):
        where = f" (line {line_no})" if line_no else ""
        super().__init__(f"{message}{where}")


def _parse_subst(text, line_no):
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise DerivationFormatError("axiom substitution needs [A:=..., ...]", line_no)
    out = []
    for part in text[1:-1].split(","):
        part = part.strip()
        if not part:
            continue
        if ":=" not in part:
            raise DerivationFormatError(f"bad binding {part!r}", line_no)
        mv, rhs = part.split(":=", 1)
        mv = mv.strip()
        try:
            out.append((mv, parse(rhs)))
        except ParseError as exc:
            raise DerivationFormatError(f"bad formula in binding: {exc}", line_no)
    return tuple(sorted(out))


def parse_derivation(text: str, name: str = "") -> Derivation:
    logic: tuple[str, ...] = ()
    steps = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("logic:"):
            ids = [t.strip() for t in line[len("logic:"):].split(",") if t.strip()]
            for sid in ids:
                if sid not in SCHEMAS:
                    raise DerivationFormatError(f"unknown schema {sid!r}", line_no)
            logic = tuple(ids)
            continue
        if "." not in line or ";" not in line:
            raise DerivationFormatError("step shape is `N. <formula> ; <just>`", line_no)
        num_text, rest = line.split(".", 1)
        try:
            num = int(num_text)
        except ValueError:
            raise DerivationFormatError(f"bad step number {num_text!r}", line_no)
        if num != len(steps) + 1:
            raise DerivationFormatError(
                f"step number {num} out of order (expected {len(steps) + 1})", line_no
            )
        formula_text, just_text = rest.rsplit(";", 1)
        try:
            formula = parse(formula_text)
        except ParseError as exc:
            raise DerivationFormatError(str(exc), line_no)
        just_text = just_text.strip()
        if just_text == "taut":
            just: Justification = Taut()
        elif just_text.startswith("ax"):
            body = just_text[2:].strip()
            if "[" in body:
                sid, subst_text = body.split("[", 1)
                subst = _parse_subst("[" + subst_text, line_no)
            else:
                sid, subst = body, ()
            just = Axiom(sid.strip(), subst)
        elif just_text.startswith("mp"):
            refs = just_text[2:].split()
            if len(refs) != 2:
                raise DerivationFormatError("mp takes two step numbers", line_no)
            just = MP(int(refs[0]), int(refs[1]))
        elif just_text.startswith("nec"):
            refs = just_text[3:].split()
            if len(refs) != 1:
                raise DerivationFormatError("nec takes one step number", line_no)
            just = Nec(int(refs[0]))
        else:
            raise DerivationFormatError(f"unknown justification {just_text!r}", line_no)
        steps.append((formula, just))
    return Derivation(logic, tuple(steps), name)


def load_derivation(path) -> Derivation:
    with open(path, encoding="utf-8") as fh:
        return parse_derivation(fh.read(), name=str(path))


def _fixture_text(name: str) -> str:
    return resources.files("ilvelt").joinpath("fixtures", name).read_text()


def load_fixture(name: str) -> Derivation:
    return parse_derivation(_fixture_text(name), name=name)


EQUIVALENCE_FIXTURES = (
    "rstar_from_rw.der",
    "r_from_rstar.der",
    "w_bot_from_rstar.der",
    "w_from_rstar.der",
)

DERIVED_PRINCIPLE_FIXTURES = (
    "p0_from_r.der",
    "m0_from_r.der",
)


def check_equivalence_fixtures() -> Optional[tuple[str, StepFailure]]:
    """Check the four fixtures behind `extension by R and W equals extension
    by R*`; None when all pass, else (fixture, first failure)."""
    for name in EQUIVALENCE_FIXTURES:
        failure = check_derivation(load_fixture(name))
        if failure is not None:
            return name, failure
    return None
