"""Command-line front end.

Exit codes: 0 = holds / no deadlock / transform verified; 1 = violated,
deadlock found, or verification failed (witness written); 2 = usage or input
error; 3 = unsupported task; 4 = resource limit exceeded.
"""
from __future__ import annotations

import argparse
import signal
import sys as _sys
from dataclasses import dataclass

from .checker import (DEFAULT_NODE_LIMIT, check, format_witness,
                      global_deadlock, local_deadlock)
from .constructions import (TransformContract, grow_run, shrink_run,
                            verify_transform)
from .cutoffs import (CutoffQuery, cutoff, cutoff_ek, param_deadlock, pmcp,
                      synthesize, validate_cutoff)
from .errors import (GuardmcError, ParseError, ResourceLimitError,
                     SemanticError, UnsupportedTaskError)
from .lab import FAMILY_NAMES, FamilySpec, check_family, family, random_system
from .model import format_system, parse_system
from .speclang import instantiate, parse_spec

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_UNSUPPORTED, EXIT_RESOURCE = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class JobSpec:
    """One parsed invocation: what to run and on which inputs."""
    command: str
    system: object = None
    spec: object = None
    n: int = None
    fairness: str = "none"
    initializing: bool = False
    n_max: int = None
    limit_nodes: int = DEFAULT_NODE_LIMIT


def _read_spec_arg(text, fairness, initializing):
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            text = fh.read()
    return parse_spec(text, fairness, initializing)


def _read_system(path):
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())


def _emit(out, lines_mode, human, machine):
    print("\n".join(machine if lines_mode else human), file=out)


def _cmd_check(args, out):
    sysm = _read_system(args.system)
    spec = _read_spec_arg(args.spec, args.fairness, args.initializing)
    v = check(sysm, args.n, instantiate(spec, args.n), spec.fairness,
              spec.initializing, args.limit_nodes)
    verdict = "holds" if v.holds else "fails"
    human = [f"{verdict} at n = {args.n}"]
    machine = [f"verdict={verdict}", f"n={args.n}"]
    if v.witness is not None:
        human += ["witness:", format_witness(sysm, v.witness)]
        machine += ["witness:", format_witness(sysm, v.witness)]
    _emit(out, args.format == "lines", human, machine)
    return EXIT_OK if v.holds else EXIT_VIOLATED


def _cmd_deadlock(args, out):
    sysm = _read_system(args.system)
    w = global_deadlock(sysm, args.n, args.limit_nodes)
    kind = "global"
    if w is None:
        w = local_deadlock(sysm, args.n, args.fairness, args.initializing,
                           args.limit_nodes)
        kind = "local"
    if w is None:
        _emit(out, args.format == "lines", [f"no deadlock at n = {args.n}"],
              ["verdict=deadlock-free"])
        return EXIT_OK
    _emit(out, args.format == "lines",
          [f"{kind} deadlock at n = {args.n}", format_witness(sysm, w)],
          [f"verdict={kind}-deadlock", format_witness(sysm, w)])
    return EXIT_VIOLATED


def _cmd_cutoff(args, out):
    if args.baseline:
        print(cutoff_ek(args.semantics, args.target, args.size_b), file=out)
        return EXIT_OK
    res = cutoff(CutoffQuery(args.semantics, args.task, args.size_b, args.k))
    print(res.value, file=out)
    for cv in sorted(res.caveats):
        print(f"caveat: {cv}", file=_sys.stderr)
    return EXIT_OK


def _cmd_pmcp(args, out):
    sysm = _read_system(args.system)
    spec = _read_spec_arg(args.spec, args.fairness, args.initializing)
    v = pmcp(sysm, spec, args.limit_nodes)
    c = v.stats["cutoff"]
    verdict = "holds" if v.holds else "fails"
    human = [f"{verdict} for all n >= {c}"]
    machine = [f"verdict={verdict}", f"cutoff={c}"]
    if v.witness is not None:
        human += ["witness:", format_witness(sysm, v.witness)]
        machine += ["witness:", format_witness(sysm, v.witness)]
    _emit(out, args.format == "lines", human, machine)
    return EXIT_OK if v.holds else EXIT_VIOLATED


def _cmd_param_deadlock(args, out):
    sysm = _read_system(args.system)
    v = param_deadlock(sysm, args.fairness, args.limit_nodes)
    c = v.stats["cutoff"]
    if v.holds:
        _emit(out, args.format == "lines",
              [f"deadlock-free for all n >= {c}"],
              ["verdict=deadlock-free", f"cutoff={c}"])
        return EXIT_OK
    _emit(out, args.format == "lines",
          [f"deadlock at the cutoff instance n = {c}",
           format_witness(sysm, v.witness)],
          ["verdict=deadlock", f"cutoff={c}", format_witness(sysm, v.witness)])
    return EXIT_VIOLATED


def _cmd_validate_cutoff(args, out):
    sysm = _read_system(args.system)
    if args.spec is not None:
        job = _read_spec_arg(args.spec, args.fairness, args.initializing)
    else:
        job = ("deadlock-nofair" if args.fairness == "none"
               else "deadlock-strongfair")
    rep = validate_cutoff(sysm, job, args.n_max, args.jobs)
    if args.format == "csv":
        print("n,verdict,nodes", file=out)
        for n, verdict, nodes, _ in rep.rows:
            print(f"{n},{'holds' if verdict else 'fails'},{nodes}", file=out)
    else:
        print(f"cutoff {rep.cutoff_value}, empirical n0 {rep.empirical_n0}",
              file=out)
        for n, verdict, nodes, millis in rep.rows:
            print(f"  n={n}: {'holds' if verdict else 'fails'}"
                  f" ({nodes} nodes, {millis} ms)", file=out)
        for note in rep.notes:
            print(f"note: {note}", file=_sys.stderr)
    if rep.alarms:
        print(f"ALARM: verdict deviates at n in {rep.alarms}",
              file=_sys.stderr)
        return EXIT_VIOLATED
    return EXIT_OK


def _source_run(sysm, n, task, fairness, initializing, limit):
    if task == "props":
        v = check(sysm, n, instantiate(parse_spec("E true"), n), fairness,
                  initializing, limit)
        return v.witness if v.holds else None
    w = global_deadlock(sysm, n, limit)
    if w is None:
        w = local_deadlock(sysm, n, fairness, initializing, limit)
    return w


def _cmd_construct(args, out):
    if args.system is not None:
        sysm = _read_system(args.system)
    else:
        one_conj = args.task == "deadlock"
        sysm = random_system(args.seed, 3, 2, args.semantics,
                             one_conj=one_conj and args.semantics == "conjunctive")
    initializing = sysm.semantics == "conjunctive" and args.fairness != "none"
    x = _source_run(sysm, args.n, args.task, args.fairness, initializing,
                    args.limit_nodes)
    if x is None:
        print(f"no {args.task} run of the requested class at n = {args.n}",
              file=_sys.stderr)
        return EXIT_VIOLATED
    if args.mode == "shrink":
        y = shrink_run(sysm, x, args.task, args.fairness, args.tracked)
    else:
        y = grow_run(sysm, x, args.task, args.fairness, args.tracked)
    tracked = (tuple(range(args.tracked + 1)) if args.task == "props" else ())
    preserve = frozenset({"global-deadlock"} if args.task == "deadlock"
                         else set())
    rep = verify_transform(sysm, x, y, TransformContract(
        tracked, args.fairness, preserve, y.n, initializing))
    for name, passed, detail in rep.clauses:
        print(f"{name}: {'pass' if passed else 'FAIL'} ({detail})", file=out)
    if args.dump_run:
        with open(args.dump_run, "w", encoding="utf-8") as fh:
            fh.write("source:\n" + format_witness(sysm, x))
            fh.write("\ntarget:\n" + format_witness(sysm, y))
    return EXIT_OK if rep.ok else EXIT_VIOLATED


def _cmd_family(args, out):
    f = FamilySpec(args.name, args.k)
    sysm, spec = family(f)
    text = format_system(sysm)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, file=out)
    if args.check:
        rep = check_family(f, args.margin)
        for n, verdict, _ in rep.rows:
            print(f"n={n}: {'holds' if verdict else 'fails'}", file=out)
        for d in rep.defects:
            print(f"defect: {d}", file=_sys.stderr)
        return EXIT_OK if rep.ok else EXIT_VIOLATED
    return EXIT_OK


def _cmd_synth(args, out):
    spec = _read_spec_arg(args.spec, args.fairness, args.initializing)
    res = synthesize(spec, args.bound_a, args.bound_b, args.semantics,
                     args.budget, args.max_trans, args.jobs)
    if res.system is not None:
        print(format_system(res.system), file=out)
        print(f"examined {res.examined} candidates", file=_sys.stderr)
        return EXIT_OK
    why = ("bounded space exhausted" if res.exhausted
           else "candidate budget spent")
    print(f"no realization found ({why}, {res.examined} candidates)",
          file=_sys.stderr)
    return EXIT_VIOLATED


def _common(p, system=True, n=False, system_required=None):
    if system:
        required = n if system_required is None else system_required
        p.add_argument("--system", required=required,
                       help="system description file")
    if n:
        p.add_argument("--n", type=int, required=True,
                       help="number of B-processes")
    p.add_argument("--fairness", choices=("none", "uncond", "strong"),
                   default="none")
    p.add_argument("--initializing", action="store_true")
    p.add_argument("--limit-nodes", type=int, default=DEFAULT_NODE_LIMIT)
    p.add_argument("--limit-seconds", type=float, default=None)
    p.add_argument("--format", choices=("human", "lines", "csv"),
                   default="human")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="guardmc",
        description="parameterized verification of guarded protocols")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="model-check one instance")
    p.add_argument("--spec", required=True, help="spec text, or @file")
    _common(p, n=True)
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("deadlock", help="deadlock search on one instance")
    _common(p, n=True)
    p.set_defaults(fn=_cmd_deadlock)

    p = sub.add_parser("cutoff", help="look up a cutoff value")
    p.add_argument("--semantics", required=True,
                   choices=("disjunctive", "conjunctive"))
    p.add_argument("--task", default="props-nofair",
                   choices=("props-nofair", "deadlock-nofair", "props-uncond",
                            "deadlock-strongfair"))
    p.add_argument("--size-b", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--baseline", action="store_true",
                   help="older closed-system baseline instead of the table")
    p.add_argument("--target", default="A-and-one-B",
                   choices=("A-and-one-B", "A-only", "one-B"))
    p.set_defaults(fn=_cmd_cutoff, limit_seconds=None)

    p = sub.add_parser("pmcp", help="decide a spec for every instance size")
    p.add_argument("--spec", required=True)
    _common(p)
    p.set_defaults(fn=_cmd_pmcp)

    p = sub.add_parser("param-deadlock",
                       help="decide deadlock freedom for every instance size")
    _common(p)
    p.set_defaults(fn=_cmd_param_deadlock)

    p = sub.add_parser("validate-cutoff",
                       help="brute-force instances against the cutoff verdict")
    p.add_argument("--spec", default=None)
    p.add_argument("--deadlock", action="store_true")
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    _common(p)
    p.set_defaults(fn=_cmd_validate_cutoff)

    p = sub.add_parser("construct",
                       help="shrink or grow a run and verify the transform")
    p.add_argument("--task", required=True, choices=("props", "deadlock"))
    p.add_argument("--mode", default="shrink", choices=("shrink", "grow"))
    p.add_argument("--tracked", type=int, default=1)
    p.add_argument("--seed", type=int, default=0,
                   help="random system when --system is absent")
    p.add_argument("--semantics", default="disjunctive",
                   choices=("disjunctive", "conjunctive"))
    p.add_argument("--dump-run", default=None)
    _common(p, n=True, system_required=False)
    p.set_defaults(fn=_cmd_construct)

    p = sub.add_parser("family", help="emit or check a tightness family")
    p.add_argument("--name", required=True, choices=FAMILY_NAMES)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--emit", default=None, help="write the system to a file")
    p.add_argument("--check", action="store_true")
    p.add_argument("--margin", type=int, default=0)
    p.set_defaults(fn=_cmd_family, limit_seconds=None)

    p = sub.add_parser("synth", help="enumerate templates realizing a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--semantics", required=True,
                   choices=("disjunctive", "conjunctive"))
    p.add_argument("--bound-a", type=int, default=1)
    p.add_argument("--bound-b", type=int, default=3)
    p.add_argument("--budget", type=int, default=20000)
    p.add_argument("--max-trans", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    _common(p, system=False)
    p.set_defaults(fn=_cmd_synth)
    return ap


def run(argv, out=_sys.stdout) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    job = JobSpec(args.command, getattr(args, "system", None),
                  getattr(args, "spec", None), getattr(args, "n", None),
                  getattr(args, "fairness", "none"),
                  getattr(args, "initializing", False),
                  getattr(args, "n_max", None),
                  getattr(args, "limit_nodes", DEFAULT_NODE_LIMIT))
    old = None
    try:
        if job.command in ("pmcp", "param-deadlock") and job.n is not None:
            raise SemanticError("--n makes no sense for parameterized commands")
        if getattr(args, "limit_seconds", None):
            def _alarm(signum, frame):
                raise ResourceLimitError("time limit exceeded")
            old = signal.signal(signal.SIGALRM, _alarm)
            signal.setitimer(signal.ITIMER_REAL, args.limit_seconds)
        return args.fn(args, out)
    except UnsupportedTaskError as e:
        print(f"unsupported: {e}", file=_sys.stderr)
        return EXIT_UNSUPPORTED
    except ResourceLimitError as e:
        print(f"resource limit: {e}", file=_sys.stderr)
        return EXIT_RESOURCE
    except (ParseError, SemanticError, OSError) as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_USAGE
    except GuardmcError as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_VIOLATED
    finally:
        if old is not None:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, old)


def main():
    _sys.exit(run(_sys.argv[1:]))


if __name__ == "__main__":
    main()
