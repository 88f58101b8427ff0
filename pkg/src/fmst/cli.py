"""Command line interface: ``fmst <command> FILE ...``.

Exit codes: 0 the property holds, 1 it fails, 2 usage or input error,
3 a state cap was exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

from . import __version__
from .core import Program, SessionMap, SessionType
from .errors import FmstError, StateCapExceeded
from .parser import load_file, parse_session_map, parse_session_type, render_map, render_type
from .redsys import to_dot
from .runtime import Machine, simulate
from .subtyping import analyse as analyse_subtyping
from .subtyping import discriminator
from .typecheck import check_program
from .typelts import analyse as analyse_lts
from .typelts import bounded, dual, full_graph

OK, FAIL, USAGE, CAP = 0, 1, 2, 3


def _num(x: float | None):
    if x is None:
        return None
    return "inf" if x == math.inf else int(x)


def _emit(args, text: str, data: dict) -> None:
    if args.json:
        print(json.dumps(data, sort_keys=True, ensure_ascii=False))
    else:
        print(text)


def _type(prog: Program, text: str) -> SessionType:
    env = prog.type_env
    if text in env:
        return env[text]
    return parse_session_type(text, env)


def _map(prog: Program, name: str | None) -> SessionMap:
    maps = prog.map_env
    if name is None:
        if not maps:
            raise FmstError("the file declares no session map")
        return prog.maps[0][1]  # type: ignore[return-value]
    if name in maps:
        return maps[name]
    return parse_session_map(name, prog.type_env)


def _one_line(text: str) -> str:
    return "; ".join(text.splitlines())


# commands


def cmd_check(args, prog: Program) -> int:
    rep = check_program(prog)
    lines = []
    for r in rep.definitions.values():
        if r.well_typed:
            lines.append(f"{r.name}: well-typed, rank {_num(r.rank)}")
        else:
            e = r.errors[0]
            lines.append(f"{r.name}: ill-typed ({e.kind}: {e.message})")
            if args.verbose:
                lines.extend(f"  {err}" for err in r.errors)
        lines.extend(f"  warning: {w}" for w in r.warnings)
    _emit(args, "\n".join(lines), rep.as_json())
    return OK if rep.ok else FAIL


def cmd_subtype(args, prog: Program) -> int:
    s, t = _type(prog, args.left), _type(prog, args.right)
    res = analyse_subtyping(s, t)
    if res.fair:
        text = f"fair subtype, rank {res.rank}"
    else:
        text = f"not a fair subtype ({res.reason})"
    if not res.left_bounded:
        text += "\nnote: left type unbounded"
    data = {"fair": res.fair, "rank": res.rank, "reason": res.reason, "left_bounded": res.left_bounded}
    if args.table:
        data["pairs"] = res.table()
        if not args.json:
            text += "".join(
                f"\n  {row['left']}  <=  {row['right']}  [{row['rule']}] weight {row['weight'] if row['weight'] is not None else 'inf'}"
                for row in data["pairs"]
            )
    _emit(args, text, data)
    return OK if res.fair else FAIL


def cmd_coherence(args, prog: Program) -> int:
    rep = analyse_lts(_map(prog, args.map))
    text = f"coherent, rank {_num(rep.rank)}" if rep.coherent else "incoherent"
    _emit(args, text, rep.as_json())
    return OK if rep.coherent else FAIL


def cmd_rank(args, prog: Program) -> int:
    rep = analyse_lts(_map(prog, args.map))
    _emit(args, f"rank {_num(rep.rank)}", {"rank": _num(rep.rank)})
    return OK if rep.rank != math.inf else FAIL


def cmd_bounded(args, prog: Program) -> int:
    ok = bounded(_type(prog, args.type))
    _emit(args, "bounded" if ok else "unbounded", {"bounded": ok})
    return OK if ok else FAIL


def _roles(text: str) -> list[str]:
    return [r.strip() for r in text.split(",") if r.strip()]


def cmd_dual(args, prog: Program) -> int:
    m = dual(args.role, _type(prog, args.type), _roles(args.roles))
    _emit(args, render_map(m), {"map": render_map(m)})
    return OK


def cmd_discriminate(args, prog: Program) -> int:
    m = discriminator(args.role, _type(prog, args.left), _type(prog, args.right))
    _emit(args, render_map(m), {"map": render_map(m)})
    return OK


def cmd_lts(args, prog: Program) -> int:
    m = _map(prog, args.map)
    if args.dot:
        g, labels = full_graph(m)
        sys.stdout.write(to_dot(g, label=lambda k: render_map(k), edge_labels=labels))
        return OK
    rep = analyse_lts(m)
    text = f"states {rep.states}, transitions {rep.transitions}, " + (
        f"coherent, rank {_num(rep.rank)}" if rep.coherent else "incoherent"
    )
    _emit(args, text, rep.as_json())
    return OK if rep.coherent else FAIL


def cmd_simulate(args, prog: Program) -> int:
    m = Machine(prog, macro=args.macro)
    tr = simulate(
        prog, args.entry, scheduler=args.scheduler, seed=args.seed, max_steps=args.max_steps, machine=m
    )
    if args.json:
        for line in tr.as_json_lines():
            print(json.dumps(line, sort_keys=True, ensure_ascii=False))
    else:
        if args.trace:
            for i, e in enumerate(tr.entries, 1):
                mu = f"  measure ({_num(e.measure[0])}, {_num(e.measure[1])})" if e.measure is not None else ""
                print(f"{i}. {e.rule}: {e.description}{mu}")
                if args.verbose:
                    print(f"   {_one_line(e.state)}")
        print(f"{tr.outcome} after {tr.steps} steps")
    return OK if tr.outcome == "Terminated" else FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--verbose", action="store_true", help="more detail")

    p = argparse.ArgumentParser(prog="fmst", description="Fair termination analyses for multiparty sessions.")
    p.add_argument("--version", action="version", version=f"fmst {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("file", help=".fmst source file")
        sp.set_defaults(fn=fn)
        return sp

    add("check", cmd_check, "type check every definition")
    sp = add("subtype", cmd_subtype, "decide fair subtyping")
    sp.add_argument("--left", required=True, help="type name or expression")
    sp.add_argument("--right", required=True, help="type name or expression")
    sp.add_argument("--table", action="store_true", help="print the weight of every pair")
    for name, fn, help_ in (
        ("coherence", cmd_coherence, "decide coherence of a session map"),
        ("rank", cmd_rank, "rank of a session map"),
    ):
        sp = add(name, fn, help_)
        sp.add_argument("--map", help="map name or literal (default: the first map)")
    sp = add("bounded", cmd_bounded, "decide whether a type is bounded")
    sp.add_argument("--type", required=True)
    sp = add("dual", cmd_dual, "coherent completion of a bounded type")
    sp.add_argument("--type", required=True)
    sp.add_argument("--role", required=True, help="role played by the type")
    sp.add_argument("--roles", required=True, help="comma separated roles of the dual")
    sp = add("discriminate", cmd_discriminate, "counterexample map for a divergent pair")
    sp.add_argument("--left", required=True)
    sp.add_argument("--right", required=True)
    sp.add_argument("--role", required=True, help="role played by the types")
    sp = add("lts", cmd_lts, "explore the transition system of a session map")
    sp.add_argument("--map")
    sp.add_argument("--dot", action="store_true", help="GraphViz output")
    sp = add("simulate", cmd_simulate, "run a parameterless definition")
    sp.add_argument("--entry", default="Main")
    sp.add_argument("--scheduler", choices=["random", "guided"], default="guided")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-steps", type=int, default=10_000)
    sp.add_argument("--macro", action="store_true", help="fuse tag choice and communication")
    sp.add_argument("--trace", action="store_true", help="print every reduction")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else USAGE
    try:
        prog = load_file(args.file)
        return args.fn(args, prog)
    except StateCapExceeded as e:
        print(str(e), file=sys.stderr)
        return CAP
    except FmstError as e:
        print(str(e), file=sys.stderr)
        return USAGE
    except OSError as e:
        print(f"fmst: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
