"""Command-line entry point.

Exit codes: 0 when the checked property holds, 1 when it fails (a witness is
printed), 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import correspond, framefile, hilbert, search
from .formula import ParseError, SCHEMAS, parse, print_formula
from .genveltman import (
    GenModel,
    check_M0_condition,
    check_not_W,
    check_P0_condition,
    check_R_condition,
    genframe_valid_schema,
    geval,
    lift,
    validate_genframe,
)
from .veltman import (
    Model,
    StructureError,
    check_R_frame_condition,
    eval_formula,
    frame_valid_schema,
    validate_frame,
    world_forces_logic,
)

USAGE_ERROR = 2


def _emit(args, ok: bool, text: str, **payload):
    print(text)
    if args.json:
        payload.update(command=args.command, ok=ok)
        print(json.dumps(payload, sort_keys=True))
    return 0 if ok else 1


def _load(args):
    try:
        return framefile.load_structure(args.file, kind=args.kind)
    except (OSError, framefile.FormatError, StructureError) as exc:
        raise _Usage(str(exc))


class _Usage(Exception):
    pass


def _cmd_parse(args):
    try:
        f = parse(args.formula)
    except ParseError as exc:
        raise _Usage(str(exc))
    return _emit(args, True, print_formula(f), formula=print_formula(f))


def _cmd_check_model(args):
    sf = _load(args)
    try:
        model = sf.model()
        f = parse(args.formula)
        if sf.kind == "gen":
            value = geval(model, args.world, f)
        else:
            value = eval_formula(model, args.world, f)
    except (ParseError, StructureError) as exc:
        raise _Usage(str(exc))
    return _emit(
        args, value,
        f"{args.world} {'satisfies' if value else 'refutes'} {print_formula(f)}",
        world=args.world, value=value,
    )


def _cmd_frame_valid(args):
    sf = _load(args)
    if args.schema not in SCHEMAS:
        raise _Usage(f"unknown schema {args.schema!r}")
    schema = SCHEMAS[args.schema]
    try:
        if sf.kind == "gen":
            result = genframe_valid_schema(sf.structure, schema)
        else:
            result = frame_valid_schema(sf.structure, schema)
    except StructureError as exc:
        raise _Usage(str(exc))
    if result:
        return _emit(args, True, f"{args.schema} is valid on the structure",
                     schema=args.schema, valid=True)
    return _emit(args, False,
                 f"{args.schema} fails: {result.witness}",
                 schema=args.schema, valid=False, witness=str(result.witness))


_GEN_CONDITIONS = {
    "M0": check_M0_condition,
    "P0": check_P0_condition,
    "R": check_R_condition,
    "NotW": check_not_W,
}


def _cmd_condition(args):
    sf = _load(args)
    try:
        if sf.kind == "gen":
            decider = _GEN_CONDITIONS.get(args.name)
            if decider is None:
                raise _Usage(
                    f"unknown generalized condition {args.name!r}"
                    " (choose from M0, P0, R, NotW)"
                )
        else:
            if args.name != "R":
                raise _Usage("ordinary frames only have the R condition")
            decider = check_R_frame_condition
        result = decider(sf.structure)
    except StructureError as exc:
        raise _Usage(str(exc))
    holds = bool(result)
    text = f"condition {args.name}: {'holds' if holds else 'fails'}"
    if result.witness is not None:
        text += f"\nwitness: {result.witness}"
    return _emit(args, holds, text, condition=args.name, holds=holds,
                 witness=str(result.witness) if result.witness is not None else None)


def _cmd_forces_logic(args):
    sf = _load(args)
    if sf.kind != "ordinary":
        raise _Usage("forces-logic works on ordinary models")
    schemas = _parse_logic(args.logic)
    try:
        result = world_forces_logic(sf.model(), args.world, schemas)
    except StructureError as exc:
        raise _Usage(str(exc))
    if result:
        return _emit(args, True, f"{args.world} forces the logic",
                     world=args.world, forces=True)
    return _emit(args, False, f"{args.world} does not force the logic: {result.witness}",
                 world=args.world, forces=False, witness=str(result.witness))


def _parse_logic(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok not in SCHEMAS:
            raise _Usage(f"unknown schema {tok!r}")
        out.append(SCHEMAS[tok])
    if not out:
        raise _Usage("empty logic")
    return out


def _cmd_lift(args):
    sf = _load(args)
    if sf.kind != "ordinary":
        raise _Usage("lift takes an ordinary structure")
    try:
        model = Model(sf.structure, sf.valuation or {})
        lifted = lift(model)
    except StructureError as exc:
        raise _Usage(str(exc))
    text = framefile.format_structure(lifted.genframe, lifted.valuation)
    sys.stdout.write(text)
    if args.json:
        print(json.dumps({"command": "lift", "ok": True, "worlds": lifted.genframe.n},
                         sort_keys=True))
    return 0


def _cmd_correspond(args):
    kind = {"gen": "gen", "ordinary": "ordinary"}[args.kind]
    ids = []
    for tok in args.conditions.split(","):
        tok = tok.strip()
        if not tok:
            continue
        cid = correspond.CONDITION_ALIASES.get((kind, tok), tok)
        if cid not in correspond.CONDITIONS:
            raise _Usage(f"unknown condition {tok!r} for kind {kind}")
        ids.append(cid)
    if not ids:
        raise _Usage("no conditions given")
    mode = "random" if args.random else "exhaustive"
    report = correspond.sweep(
        kind, args.max, ids, mode=mode, seed=args.seed, count=args.samples,
        workers=args.workers,
    )
    lines = [
        f"kind={kind} mode={mode} max_worlds={args.max}"
        f" conditions={','.join(ids)} elapsed={report.elapsed:.2f}s",
        report.summary_line(),
    ]
    if report.first_mismatch is not None:
        lines.append(f"first mismatch: {report.first_mismatch.condition}"
                     f" verdicts={report.first_mismatch.verdicts}")
    ok = report.mismatches == 0
    return _emit(args, ok, "\n".join(lines), checked=report.checked,
                 mismatches=report.mismatches)


def _cmd_search(args):
    budget = args.budget
    if budget is None:
        env = os.environ.get("ILVELT_BUDGET_SECS")
        budget = float(env) if env else None
    if args.kind == "model-logic":
        logic = [s.id for s in _parse_logic(args.logic or "")]
        if not args.target:
            raise _Usage("model-logic search needs --target")
        if args.target not in SCHEMAS:
            raise _Usage(f"unknown schema {args.target!r}")
        try:
            result = search.find_incompleteness_model(
                logic, args.target, args.max_worlds, seed=args.seed,
                budget_secs=budget,
            )
        except ValueError as exc:
            raise _Usage(str(exc))
        if result:
            model = result.structure
            sys.stdout.write(framefile.format_structure(model.frame, model.valuation))
            print(f"# refutation: {result.refutation}")
        summary = (
            f"outcome={result.outcome} checked={result.checked}"
            f" elapsed={result.elapsed:.2f}s exhaustive={result.exhaustive}"
        )
        print(summary)
        if args.json:
            print(json.dumps({"command": "search", "ok": bool(result),
                              "outcome": result.outcome, "checked": result.checked},
                             sort_keys=True))
        return 0 if result else 1
    tokens = [t.strip() for t in (args.valid or "").split(",") if t.strip()]
    if not args.invalid:
        raise _Usage("separating search needs --invalid")
    try:
        spec = search.SearchSpec(
            kind=args.kind, max_worlds=args.max_worlds,
            valid=tuple(tokens), invalid=args.invalid,
            seed=args.seed, budget_secs=budget,
        )
        result = search.find_separating_structure(spec, workers=args.workers)
    except ValueError as exc:
        raise _Usage(str(exc))
    if result:
        sys.stdout.write(framefile.format_structure(result.structure))
    print(
        f"outcome={result.outcome} checked={result.checked}"
        f" elapsed={result.elapsed:.2f}s exhaustive={result.exhaustive}"
    )
    if args.json:
        print(json.dumps({"command": "search", "ok": bool(result),
                          "outcome": result.outcome, "checked": result.checked},
                         sort_keys=True))
    return 0 if result else 1


def _cmd_prove(args):
    try:
        derivation = hilbert.load_derivation(args.file)
    except (OSError, hilbert.DerivationFormatError) as exc:
        raise _Usage(str(exc))
    failure = hilbert.check_derivation(derivation)
    if failure is None:
        last = derivation.steps[-1][0]
        return _emit(args, True,
                     f"ok: {len(derivation.steps)} steps derive {print_formula(last)}",
                     steps=len(derivation.steps))
    return _emit(args, False, f"rejected at {failure}", step=failure.step,
                 reason=failure.reason)


def build_parser():
    top = argparse.ArgumentParser(
        prog="ilvelt",
        description="Model checking for interpretability logics over Veltman structures",
    )
    top.add_argument("--json", action="store_true", help="also print a JSON summary")
    subs = top.add_subparsers(dest="command", required=True)

    p = subs.add_parser("parse", help="parse a formula and print it canonically")
    p.add_argument("formula")
    p.set_defaults(run=_cmd_parse)

    p = subs.add_parser("check-model", help="evaluate a formula at a world")
    p.add_argument("file")
    p.add_argument("--world", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--kind", choices=["gen", "ordinary"])
    p.set_defaults(run=_cmd_check_model)

    p = subs.add_parser("frame-valid", help="brute-force schema validity on a structure")
    p.add_argument("file")
    p.add_argument("--schema", required=True)
    p.add_argument("--kind", choices=["gen", "ordinary"])
    p.set_defaults(run=_cmd_frame_valid)

    p = subs.add_parser("condition", help="decide a frame condition")
    p.add_argument("file")
    p.add_argument("--name", required=True, help="M0, P0, R or NotW (gen); R (ordinary)")
    p.add_argument("--kind", choices=["gen", "ordinary"])
    p.set_defaults(run=_cmd_condition)

    p = subs.add_parser("forces-logic", help="does a world force a logic's instances")
    p.add_argument("file")
    p.add_argument("--world", required=True)
    p.add_argument("--logic", required=True, help="comma-separated schema ids")
    p.add_argument("--kind", choices=["gen", "ordinary"])
    p.set_defaults(run=_cmd_forces_logic)

    p = subs.add_parser("lift", help="lift an ordinary structure to a set-valued one")
    p.add_argument("file")
    p.add_argument("--kind", choices=["gen", "ordinary"])
    p.set_defaults(run=_cmd_lift)

    p = subs.add_parser("correspond", help="sweep condition deciders against oracles")
    p.add_argument("--kind", choices=["gen", "ordinary"], required=True)
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--random", action="store_true")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(run=_cmd_correspond)

    p = subs.add_parser("search", help="bounded countermodel search")
    p.add_argument("--kind", choices=["frame", "genframe", "model-logic"], required=True)
    p.add_argument("--max-worlds", type=int, required=True)
    p.add_argument("--valid", help="comma-separated requirements that must hold")
    p.add_argument("--invalid", help="requirement that must fail")
    p.add_argument("--logic", help="model-logic: comma-separated schema ids")
    p.add_argument("--target", help="model-logic: schema that must fail")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float, default=None,
                   help="seconds before giving up (default ILVELT_BUDGET_SECS)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(run=_cmd_search)

    p = subs.add_parser("prove", help="check a Hilbert-style derivation file")
    p.add_argument("file")
    p.set_defaults(run=_cmd_prove)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.run(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
