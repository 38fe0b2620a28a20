"""Command-line entry points.

    stratac run --scenario shipboard --seed 7 --headless
    stratac run --scenario team-search --seed 3 --serve 127.0.0.1:8750 --interactive
    stratac replay <record-dir>
    stratac validate-ontology <pack.kp> [...]
    stratac interpret --packs base.kp ship.kp   (utterances on stdin)
    stratac generate --packs base.kp ship.kp    (GMR JSON on stdin)
    stratac dump-bt --scenario shipboard <robot-id>

Exit status: 0 on success (for `run`: all milestones pass), 1 on failure,
2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ontology as onto_mod
from .frames import SituationModel, mr_from_json, render_mr
from .harness import SCENARIOS, RunController, replay, run
from .language import Utterance, generate, interpret
from .ontology import KnowledgeError


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.command is None:
        parser.print_help()
        return 2
    return args.fn(args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratac")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--interactive", action="store_true")
    p_run.add_argument("--serve", metavar="HOST:PORT", default=None)
    p_run.add_argument("--headless", action="store_true")
    p_run.add_argument("--record", metavar="DIR", default=None,
                       help="directory for the run record (default records/<scenario>-<seed>)")
    p_run.add_argument("--static-root", metavar="DIR", default=None,
                       help="serve console assets from this directory")
    p_run.add_argument("--linger", action="store_true",
                       help="keep serving after the run finishes")
    p_run.add_argument("--tick-rate", type=float, default=None, metavar="HZ",
                       help="world ticks per second (default: 20 when interactive, "
                            "unlimited otherwise)")
    p_run.set_defaults(fn=_cmd_run)

    p_replay = sub.add_parser("replay", help="re-run a record and compare byte-for-byte")
    p_replay.add_argument("record", metavar="RECORD-DIR")
    p_replay.set_defaults(fn=_cmd_replay)

    p_val = sub.add_parser("validate-ontology", help="validate knowledge packs")
    p_val.add_argument("packs", nargs="+", metavar="PACK")
    p_val.set_defaults(fn=_cmd_validate)

    p_int = sub.add_parser("interpret", help="utterances (stdin) -> frame blocks")
    p_int.add_argument("--packs", nargs="+", required=True)
    p_int.add_argument("--json", action="store_true", help="emit machine form")
    p_int.set_defaults(fn=_cmd_interpret)

    p_gen = sub.add_parser("generate", help="GMR JSON (stdin) -> utterance")
    p_gen.add_argument("--packs", nargs="+", required=True)
    p_gen.set_defaults(fn=_cmd_generate)

    p_bt = sub.add_parser("dump-bt", help="print a robot's behavior tree")
    p_bt.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p_bt.add_argument("robot", metavar="ROBOT-ID")
    p_bt.set_defaults(fn=_cmd_dump_bt)
    return parser


def _cmd_run(args) -> int:
    scenario = SCENARIOS[args.scenario]()
    mode = "interactive" if args.interactive else "scripted"
    controller = RunController()
    server = None
    if args.tick_rate is not None:
        tick_seconds = 1.0 / args.tick_rate if args.tick_rate > 0 else 0.0
    else:
        tick_seconds = 1.0 / 20 if args.interactive else 0.0

    if args.serve:
        host, _, port = args.serve.partition(":")
        from .gateway import Gateway, GatewayServer
        from .harness import RunState
        state = RunState(scenario, args.seed, mode)
        static_root = Path(args.static_root) if args.static_root else None
        gateway = Gateway(state, controller, interactive=args.interactive,
                          static_root=static_root)
        server = GatewayServer(gateway, host or "127.0.0.1", int(port or 0))
        server.start()
        print(f"gateway listening on http://{server.address[0]}:{server.address[1]}",
              file=sys.stderr)
        state = run(scenario, args.seed, mode=mode, controller=controller,
                    on_event=gateway.on_event,
                    on_tick_end=lambda s: gateway.publish_snapshot(),
                    state=state, tick_seconds=tick_seconds)
        gateway.finish()
    else:
        state = run(scenario, args.seed, mode=mode, controller=controller,
                    tick_seconds=tick_seconds)

    record_dir = Path(args.record) if args.record else \
        Path("records") / f"{scenario.name}-seed{args.seed}"
    state.persist(record_dir)
    for name, ok in state.milestone_results:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"record written to {record_dir}")
    if server is not None and args.linger:
        print("serving until interrupted (Ctrl+C)", file=sys.stderr)
        try:
            import time
            while True:
                time.sleep(0.5)
        except KeyboardInterrupt:
            pass
    if server is not None:
        server.stop()
    return 0 if state.ok else 1


def _cmd_replay(args) -> int:
    divergence = replay(Path(args.record))
    if divergence is None:
        print("replay identical")
        return 0
    print(divergence.report())
    return 1


def _cmd_validate(args) -> int:
    try:
        onto, lex = onto_mod.load([Path(p) for p in args.packs])
    except KnowledgeError as exc:
        report = {"ok": False, "violations": exc.violations}
        print(json.dumps(report, indent=2, sort_keys=True))
        return 1
    report = {"ok": True, "concepts": len(onto.concepts),
              "scripts": len(onto.scripts), "rules": len(lex.rules),
              "templates": len(lex.templates)}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_interpret(args) -> int:
    onto, lex = onto_mod.load([Path(p) for p in args.packs])
    situation = SituationModel(onto)
    speaker = situation.new_instance("HUMAN")
    addressee = situation.new_instance("ROBOT")
    status = 0
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        tmr = interpret(Utterance("stdin", text), lex, situation,
                        speaker=speaker, addressee=addressee)
        if args.json:
            from .frames import mr_to_json
            print(json.dumps(mr_to_json(tmr), sort_keys=True))
        else:
            print(render_mr(tmr))
            print()
    return status


def _cmd_generate(args) -> int:
    onto, lex = onto_mod.load([Path(p) for p in args.packs])
    status = 0
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        gmr = mr_from_json(json.loads(text))
        try:
            utterance, _ = generate(gmr, lex, onto, author="cli")
            print(utterance.text)
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = 1
    return status


def _cmd_dump_bt(args) -> int:
    from .tactical import TacticalTask, dump_tree
    from .bridge import Bridge
    from .world import load_world
    scenario = SCENARIOS[args.scenario]()
    world = load_world(scenario.world_file)
    if args.robot not in world.robots:
        print(f"no robot {args.robot!r} in scenario {scenario.name}", file=sys.stderr)
        return 1
    body = world.robots[args.robot]
    task = TacticalTask(args.robot, body.kind, body.capabilities, body.sensor_radius,
                        set(world.obstacles),
                        {n: sorted(c) for n, c in world.rooms.items()},
                        (world.width, world.height), body.position, Bridge(args.robot))
    print(dump_tree(task.tree))
    return 0


if __name__ == "__main__":
    sys.exit(main())
