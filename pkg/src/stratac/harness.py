"""Scenario definitions and end-to-end run orchestration.

The harness owns the world clock: each tick it injects due human turns,
pumps the team bus, runs every agent's strategic phase (one decision
each), runs every robot's tactical phase (at most one actuation each),
then steps the world.  Everything is keyed and iterated in sorted order,
so a (scenario, seed, human script) triple reproduces its run record
byte for byte.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import ontology as onto_mod
from .bridge import Bridge, CommandMessage, StatusReport
from .frames import (ConceptRef, Corefer, Frame, FrameId, FrameRef, Literal,
                     MeaningRep, MRKind, NumericRange, Scalar,
                     content_signature, mr_to_json)
from .language import Utterance
from .strategic import StrategicAgent
from .tactical import TacticalTask
from .team import TeamConfig, TeamCoordinator
from .world import GridWorld, load_world

DATA_DIR = Path(__file__).resolve().parent / "data"
PACKS = DATA_DIR / "packs"
WORLDS = DATA_DIR / "worlds"

SCHEMA_VERSION = 1


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class ScriptedTurn:
    speaker: str
    text: str
    trigger: tuple   # ("start",) | ("after-gmr", root, theme-or-None) | ("at-tick", n)


@dataclass
class Scenario:
    name: str
    world_file: Path
    packs: dict[str, list[Path]]          # agent id -> pack paths
    robot_agents: list[str]               # agent ids that are robots (== robot ids)
    humans: list[str]
    addressee: str                        # robot that interprets human speech
    human_script: list[ScriptedTurn]
    tick_budget: int
    team: Optional[TeamConfig] = None
    seed_fn: Optional[Callable] = None    # (agent_id, StrategicAgent, GridWorld) -> None
    milestones: list = field(default_factory=list)   # (name, fn(RunState) -> bool)
    success: Optional[Callable] = None    # fn(RunState) -> bool


@dataclass
class GatewayEvent:
    seq: int
    kind: str
    tick: int
    payload: dict

    def line(self) -> str:
        return json.dumps({"seq": self.seq, "kind": self.kind, "tick": self.tick,
                           "payload": self.payload}, sort_keys=True)


class RunState:
    """Everything a live run accumulates; milestones read from here."""

    def __init__(self, scenario: Scenario, seed: int, mode: str):
        self.scenario = scenario
        self.seed = seed
        self.mode = mode
        self.world: Optional[GridWorld] = None
        self.agents: dict[str, StrategicAgent] = {}
        self.tacticals: dict[str, TacticalTask] = {}
        self.bridges: dict[str, Bridge] = {}
        self.coordinator: Optional[TeamCoordinator] = None
        self.transcript: list[tuple[int, str, str]] = []
        self.tmrs: list[tuple[int, str, MeaningRep]] = []
        self.gmrs: list[tuple[int, str, MeaningRep]] = []
        self.commands: list[tuple[int, str, CommandMessage]] = []
        self.statuses: list[tuple[int, str, StatusReport]] = []
        self.events: list[GatewayEvent] = []
        self.tick = 0
        self.finished = False
        self.milestone_results: list[tuple[str, bool]] = []
        self.ok = False
        self.warnings: list[str] = []
        self._next_seq = 0
        self._trace_cursor: dict[str, int] = {}
        self._fired_turns = 0
        self._intake: list[tuple[str, str]] = []
        self._agenda_cache: dict[str, str] = {}
        import threading
        self._intake_lock = threading.Lock()

    # -- events ---------------------------------------------------------------

    def emit(self, kind: str, payload: dict, tick: Optional[int] = None) -> None:
        event = GatewayEvent(self._next_seq, kind, self.tick if tick is None else tick,
                             payload)
        self._next_seq += 1
        self.events.append(event)

    def submit_utterance(self, speaker: str, text: str) -> None:
        """Gateway intake for interactive runs (called from gateway threads)."""
        with self._intake_lock:
            self._intake.append((speaker, text))

    def drain_intake(self) -> list[tuple[str, str]]:
        with self._intake_lock:
            due = list(self._intake)
            self._intake.clear()
        return due

    # -- record ----------------------------------------------------------------

    def record_files(self) -> dict[str, str]:
        files = {
            "transcript.log": "".join(f"{t}|{s}|{x}\n" for t, s, x in self.transcript),
            "events.log": "".join(e.line() + "\n" for e in (self.world.events if self.world else [])),
            "gateway.jsonl": "".join(e.line() + "\n" for e in self.events),
            "milestones.txt": "".join(f"{name}|{'PASS' if ok else 'FAIL'}\n"
                                      for name, ok in self.milestone_results),
            "meta.json": json.dumps({
                "schema": SCHEMA_VERSION, "scenario": self.scenario.name,
                "seed": self.seed, "mode": self.mode, "ticks": self.tick,
                "ok": self.ok,
                "human_script": [{"speaker": s, "text": x, "tick": t}
                                 for t, s, x in self.transcript
                                 if s in self.scenario.humans],
            }, sort_keys=True) + "\n",
        }
        for agent_id, agent in sorted(self.agents.items()):
            files[f"trace-{agent_id}.log"] = "".join(l + "\n" for l in agent.trace_lines())
        return files

    def persist(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, contents in sorted(self.record_files().items()):
            (out_dir / name).write_text(contents)

    # -- snapshots (gateway) ------------------------------------------------------

    def snapshot(self) -> dict:
        agents = {}
        for agent_id, agent in sorted(self.agents.items()):
            thoughts = agent.trace[-12:]
            agents[agent_id] = {
                "agenda": agent.agenda_view(),
                "thoughts": [{"tick": e.tick, "kind": e.kind, "payload": e.payload}
                             for e in thoughts],
                "blackboard": self.tacticals[agent_id].bb.snapshot()
                if agent_id in self.tacticals else {},
                "tree": _tree_json(self.tacticals.get(agent_id)),
            }
        world = self.world
        return {
            "schema": SCHEMA_VERSION,
            "tick": self.tick,
            "agents": agents,
            "world": {
                "width": world.width if world else 0,
                "height": world.height if world else 0,
                "obstacles": sorted([list(c) for c in world.obstacles]) if world else [],
                "rooms": {n: sorted([list(c) for c in cells])
                          for n, cells in (world.rooms.items() if world else [])},
                "objects": [{"id": o.id, "type": o.type,
                             "position": [o.position[0], o.position[1]],
                             "held_by": o.held_by}
                            for _, o in sorted(world.objects.items())] if world else [],
                "robots": [{"id": r.id, "kind": r.kind,
                            "position": [r.position[0], r.position[1]],
                            "battery": round(r.battery, 6), "holding": r.holding}
                           for _, r in sorted(world.robots.items())] if world else [],
                "humans": [{"id": h.id, "position": [h.position[0], h.position[1]]}
                           for _, h in sorted(world.humans.items())] if world else [],
            },
            "transcript_tail": [{"tick": t, "speaker": s, "text": x}
                                for t, s, x in self.transcript[-10:]],
            "vmrs": [mr_to_json(mr) for _, _, mr in self.ordered_vmrs()[-5:]],
            "finished": self.finished,
        }

    def ordered_vmrs(self) -> list:
        out = []
        for agent_id, agent in sorted(self.agents.items()):
            for mr in agent.vmrs:
                out.append((0, agent_id, mr))
        return out


def _tree_json(task: Optional[TacticalTask]) -> Optional[dict]:
    if task is None:
        return None
    from .tactical import tree_to_json
    return tree_to_json(task.tree)


# ---------------------------------------------------------------------------
# the run loop
# ---------------------------------------------------------------------------

class RunController:
    """Pause/resume/step gate used by the gateway's control endpoint."""

    def __init__(self):
        import threading
        self._lock = threading.Lock()
        self._paused = False
        self._steps = 0

    def control(self, action: str) -> None:
        with self._lock:
            if action == "pause":
                self._paused = True
            elif action == "resume":
                self._paused = False
            elif action == "step":
                self._steps += 1

    def wait_if_paused(self) -> None:
        import time
        while True:
            with self._lock:
                if not self._paused:
                    return
                if self._steps > 0:
                    self._steps -= 1
                    return
            time.sleep(0.005)


def run(scenario: Scenario, seed: int, mode: str = "scripted",
        controller: Optional[RunController] = None,
        on_event: Optional[Callable] = None,
        on_tick_end: Optional[Callable] = None,
        tick_budget: Optional[int] = None,
        state: Optional[RunState] = None,
        tick_seconds: float = 0.0) -> RunState:
    if state is None:
        state = RunState(scenario, seed, mode)
    world = load_world(scenario.world_file)
    world.rng.seed(seed)
    state.world = world

    if scenario.team is not None:
        state.coordinator = TeamCoordinator(scenario.team)

    for agent_id in sorted(scenario.robot_agents):
        onto, lex = onto_mod.load(scenario.packs[agent_id])
        bridge = Bridge(agent_id, on_warning=state.warnings.append)
        rooms = {name: sorted(cells) for name, cells in world.rooms.items()}
        agent = StrategicAgent(agent_id, onto, lex, bridge=bridge, rooms=rooms)
        if state.coordinator is not None:
            agent.team_state = state.coordinator
        for human in scenario.humans:
            fid = agent.register_participant(human, "HUMAN")
            if human in world.humans:
                pos = world.humans[human].position
                agent.situation.frame(fid).add("position", Literal(f"{pos[0]},{pos[1]}"))
        for other in sorted(scenario.robot_agents):
            if other != agent_id:
                agent.register_participant(other, "ROBOT")
        body = world.robots[agent_id]
        agent.situation.frame(agent.self_fid).add(
            "position", Literal(f"{body.position[0]},{body.position[1]}"))
        if scenario.seed_fn is not None:
            scenario.seed_fn(agent_id, agent, world)
        task = TacticalTask(agent_id, body.kind, body.capabilities,
                            body.sensor_radius, set(world.obstacles),
                            rooms, (world.width, world.height),
                            body.position, bridge)
        state.agents[agent_id] = agent
        state.tacticals[agent_id] = task
        state.bridges[agent_id] = bridge
        state._trace_cursor[agent_id] = 0

    def emit(kind: str, payload: dict) -> None:
        state.emit(kind, payload)
        if on_event is not None:
            on_event(state.events[-1])

    for agent_id, agent in state.agents.items():
        agent.on_vmr = (lambda mr, _aid=agent_id:
                        emit("VMR", {"agent": _aid, "mr": mr_to_json(mr)}))

    budget = tick_budget if tick_budget is not None else scenario.tick_budget

    def say(speaker: str, text: str) -> None:
        state.transcript.append((state.tick, speaker, text))
        emit("UTTERANCE", {"speaker": speaker, "text": text})
        if speaker in scenario.humans:
            agent = state.agents.get(scenario.addressee)
            if agent is not None:
                tmr = agent.hear(Utterance(speaker, text, state.tick), state.tick)
                state.tmrs.append((state.tick, scenario.addressee, tmr))

    for state.tick in range(budget):
        if controller is not None:
            controller.wait_if_paused()
        if tick_seconds > 0.0:
            import time
            time.sleep(tick_seconds)

        # 1. due scripted turns (one per tick keeps dialogue order readable)
        if mode == "scripted" and state._fired_turns < len(scenario.human_script):
            turn = scenario.human_script[state._fired_turns]
            if _trigger_ready(turn.trigger, state):
                state._fired_turns += 1
                say(turn.speaker, turn.text)
        # 2. interactive intake
        for speaker, text in state.drain_intake():
            say(speaker, text)

        # 3. team bus deliveries
        if state.coordinator is not None:
            for agent_id in sorted(state.agents):
                agent = state.agents[agent_id]
                for msg in state.coordinator.bus.deliveries_for(agent_id, state.tick):
                    state.coordinator.on_team_message(agent, msg, state.tick)

        # 4. strategic phase
        for agent_id in sorted(state.agents):
            agent = state.agents[agent_id]
            bridge = state.bridges[agent_id]
            for report in bridge.drain_statuses():
                state.statuses.append((state.tick, agent_id, report))
                emit("STATUS", {"robot": agent_id, "report": report.to_json()})
                agent.on_status(report, state.tick)
            agent.on_percepts(bridge.drain_percepts(), state.tick)
            decision = agent.advance(state.tick)
            if decision.kind == "speak":
                state.gmrs.append((state.tick, agent_id, decision.gmr))
                say(agent_id, decision.utterance.text)
            elif decision.kind == "command":
                state.commands.append((state.tick, agent_id, decision.command))
                emit("COMMAND", {"robot": agent_id,
                                 "command": decision.command.to_json()})
            _flush_thoughts(state, agent_id, emit)
            _flush_agenda(state, agent_id, emit)

        # 5. tactical phase
        actuations = {}
        for agent_id in sorted(state.tacticals):
            task = state.tacticals[agent_id]
            act = task.on_tick(world.sense(agent_id), state.tick)
            if act is not None:
                actuations[agent_id] = act

        # 6. world step
        for event in world.step(actuations):
            emit("WORLD-EVENT", {"line": event.line()})

        if on_tick_end is not None:
            on_tick_end(state)

        # strategic thoughts can also be appended by status handling next tick;
        # evaluate termination on the post-step state
        if scenario.success is not None and scenario.success(state):
            state.finished = True
            state.tick += 1
            break
    else:
        state.finished = False

    # drain any trailing thoughts so the record is complete
    for agent_id in sorted(state.agents):
        _flush_thoughts(state, agent_id, emit)

    state.milestone_results = _evaluate_milestones(scenario, state)
    state.ok = state.finished and all(ok for _, ok in state.milestone_results)
    for name, ok in state.milestone_results:
        emit("MILESTONE", {"name": name, "ok": ok})
    return state


def _flush_thoughts(state: RunState, agent_id: str, emit) -> None:
    agent = state.agents[agent_id]
    cursor = state._trace_cursor[agent_id]
    for entry in agent.trace[cursor:]:
        emit("THOUGHT", {"agent": agent_id, "tick": entry.tick,
                         "kind": entry.kind, "payload": entry.payload})
    state._trace_cursor[agent_id] = len(agent.trace)


def _flush_agenda(state: RunState, agent_id: str, emit) -> None:
    view = json.dumps(state.agents[agent_id].agenda_view(), sort_keys=True)
    if state._agenda_cache.get(agent_id) != view:
        state._agenda_cache[agent_id] = view
        emit("AGENDA-DELTA", {"agent": agent_id,
                              "agenda": state.agents[agent_id].agenda_view()})


def _trigger_ready(trigger: tuple, state: RunState) -> bool:
    kind = trigger[0]
    if kind == "start":
        return True
    if kind == "at-tick":
        return state.tick >= trigger[1]
    if kind == "after-gmr":
        root_concept, theme_concept = trigger[1], trigger[2]
        for _, _, gmr in state.gmrs:
            root = gmr.frame(gmr.root)
            if root.concept != root_concept:
                continue
            if theme_concept is None:
                return True
            theme = root.first("theme")
            if isinstance(theme, FrameRef):
                target = gmr.frames.get(theme.target)
                if target is not None and target.concept == theme_concept:
                    return True
        return False
    raise HarnessError(f"unknown trigger {trigger}")


def _evaluate_milestones(scenario: Scenario, state: RunState) -> list[tuple[str, bool]]:
    results = []
    failed = False
    for name, check in scenario.milestones:
        if failed:
            results.append((name, False))
            continue
        try:
            ok = bool(check(state))
        except Exception:
            ok = False
        results.append((name, ok))
        if not ok:
            failed = True
    return results


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

@dataclass
class Divergence:
    stream: str
    line_no: int
    expected: str
    got: str

    def report(self) -> str:
        return (f"divergence in {self.stream} at line {self.line_no}:\n"
                f"  expected: {self.expected}\n"
                f"  got:      {self.got}")


def replay(record_dir: Path, scenario_by_name: Optional[dict] = None) -> Optional[Divergence]:
    """Re-run a persisted record and byte-compare every stream."""
    record_dir = Path(record_dir)
    meta = json.loads((record_dir / "meta.json").read_text())
    lookup = scenario_by_name or SCENARIOS
    factory = lookup[meta["scenario"]]
    scenario = factory()
    if meta["mode"] != "scripted":
        scenario.human_script = [
            ScriptedTurn(u["speaker"], u["text"], ("at-tick", u["tick"]))
            for u in meta.get("human_script", [])]
    state = run(scenario, meta["seed"], mode="scripted",
                tick_budget=None)
    fresh = state.record_files()
    for name in sorted(fresh):
        want_path = record_dir / name
        if not want_path.exists():
            return Divergence(name, 0, "<file present>", "<missing>")
        want = want_path.read_text()
        got = fresh[name]
        if want != got:
            want_lines = want.splitlines()
            got_lines = got.splitlines()
            for i, (a, b) in enumerate(zip(want_lines, got_lines), start=1):
                if a != b:
                    return Divergence(name, i, a, b)
            longer = max(len(want_lines), len(got_lines))
            return Divergence(name, longer,
                              want_lines[longer - 1] if len(want_lines) >= longer else "<eof>",
                              got_lines[longer - 1] if len(got_lines) >= longer else "<eof>")
    return None


# ---------------------------------------------------------------------------
# scenario definitions
# ---------------------------------------------------------------------------

def _ship_seed(agent_id: str, agent: StrategicAgent, world: GridWorld) -> None:
    agent.seed_entity("ENGINE", {"position": Literal("3,2")})
    agent.seed_entity("THERMOSTAT", {"age": Scalar(0.9), "position": Literal("4,2")})
    fact = {"location": ConceptRef("STORES")}
    agent.seed_memory("THERMOSTAT", fact)


def shipboard_scenario() -> Scenario:
    packs = [PACKS / "base.kp", PACKS / "ship.kp"]
    script = [
        ScriptedTurn("daniel", "The engine is overheating.", ("start",)),
        ScriptedTurn("daniel", "How old is the thermostat?",
                     ("after-gmr", "ALTERNATIVE", None)),
        ScriptedTurn("daniel", "Fetch a new thermostat.",
                     ("after-gmr", "INFORM", "AGE")),
        ScriptedTurn("daniel", "It is gray and small.",
                     ("after-gmr", "REQUEST-INFO", "APPEARANCE")),
    ]
    return Scenario(
        name="shipboard",
        world_file=WORLDS / "ship.world",
        packs={"ugv-1": packs},
        robot_agents=["ugv-1"],
        humans=["daniel"],
        addressee="ugv-1",
        human_script=script,
        tick_budget=5000,
        seed_fn=_ship_seed,
        milestones=_shipboard_milestones(),
        success=_shipboard_success,
    )


def _shipboard_success(state: RunState) -> bool:
    agent = state.agents["ugv-1"]
    fetched = any(g.concept == "FETCH-OBJECT" and g.status == "SATISFIED"
                  for g in agent.agenda.goals.values())
    reported = any(_gmr_theme_concept(g) == "FETCH-COMPLETE" for _, _, g in state.gmrs)
    return fetched and reported and not agent.pending_speaks


def _gmr_theme_concept(gmr: MeaningRep) -> str:
    root = gmr.frame(gmr.root)
    theme = root.first("theme")
    if isinstance(theme, FrameRef) and theme.target in gmr.frames:
        return gmr.frames[theme.target].concept
    return ""


def _expected_m1_signature() -> tuple:
    frames = {}
    desc = Frame(FrameId("DESCRIBE-MECHANICAL-PROBLEM", 1))
    over = Frame(FrameId("OVERHEAT", 1))
    eng = Frame(FrameId("ENGINE", 2))
    desc.add("agent", FrameRef(FrameId("HUMAN", 1)))
    desc.add("beneficiary", FrameRef(FrameId("ROBOT", 1)))
    desc.add("theme", FrameRef(over.id))
    over.add("theme", FrameRef(eng.id))
    eng.add("corefer", Corefer(FrameId("ENGINE", 1)))
    for f in (desc, over, eng):
        frames[f.id] = f
    mr = MeaningRep(MRKind.TMR, desc.id, frames)
    return content_signature(mr)


def _expected_m2_signature() -> tuple:
    frames = {}
    alt = Frame(FrameId("ALTERNATIVE", 1))
    m1 = Frame(FrameId("MODALITY", 1))
    m2 = Frame(FrameId("MODALITY", 2))
    obstruct = Frame(FrameId("OBSTRUCT", 1))
    repair = Frame(FrameId("STATE-OF-REPAIR", 1))
    alt.add("domain", FrameRef(m1.id))
    alt.add("range", FrameRef(m2.id))
    for mod, scope in ((m1, obstruct), (m2, repair)):
        mod.add("type", Literal("EPISTEMIC"))
        mod.add("value", Scalar(0.5))
        mod.add("scope", FrameRef(scope.id))
    obstruct.add("theme", ConceptRef("PIPE"))
    repair.add("domain", ConceptRef("THERMOSTAT"))
    repair.add("range", NumericRange(hi=0.7))
    for f in (alt, m1, m2, obstruct, repair):
        frames[f.id] = f
    return content_signature(MeaningRep(MRKind.GMR, alt.id, frames))


def _shipboard_milestones() -> list:
    def m1_tmr(state: RunState) -> bool:
        expected = _expected_m1_signature()
        for _, _, tmr in state.tmrs:
            if tmr.frame(tmr.root).concept != "DESCRIBE-MECHANICAL-PROBLEM":
                continue
            if content_signature(tmr) != expected:
                return False
            for frame in tmr.frames.values():
                if frame.concept == "ENGINE":
                    return frame.has("corefer")
        return False

    def m2_gmr(state: RunState) -> bool:
        expected = _expected_m2_signature()
        return any(content_signature(g) == expected for _, _, g in state.gmrs)

    def m5_tmr(state: RunState) -> bool:
        for _, _, tmr in state.tmrs:
            root = tmr.frame(tmr.root)
            if root.concept != "REQUEST-ACTION-FETCH":
                continue
            theme = root.first("theme")
            if not isinstance(theme, FrameRef):
                continue
            target = tmr.frames.get(theme.target)
            if target is None or target.concept != "THERMOSTAT":
                continue
            if target.first("age") == NumericRange(0.0001, 0.1):
                return True
        return False

    def fetch_decomposition(state: RunState) -> bool:
        agent = state.agents["ugv-1"]
        for goal in agent.agenda.goals.values():
            if goal.concept != "FETCH-OBJECT":
                continue
            plan = agent.agenda.plan_for(goal.id)
            if plan is None:
                return False
            labels = [s.label for s in plan.steps if s.spec.kind == "do"]
            verbs = []
            for _, _, cmd in state.commands:
                verbs.append(cmd.verb)
            return labels == ["SEARCH", "HOLD", "RETURN", "DROP"] and \
                verbs == ["SEARCH", "PICKUP", "RETURN", "DROP"]
        return False

    def final_world(state: RunState) -> bool:
        world = state.world
        spare = world.objects["thermostat-spare"]
        daniel = world.humans["daniel"].position
        dist = abs(spare.position[0] - daniel[0]) + abs(spare.position[1] - daniel[1])
        return spare.held_by is None and dist == 1

    def grounding_cycle(state: RunState) -> bool:
        halted = [r for _, _, r in state.statuses if r.status == "HALTED-CANDIDATE"]
        agent = state.agents["ugv-1"]
        confirmed = [e for e in agent.trace if e.kind == "CANDIDATE-CONFIRMED"]
        return len(halted) == 1 and len(confirmed) == 1 and len(agent.vmrs) == 1

    return [
        ("m1-tmr-isomorphic", m1_tmr),
        ("diagnosis-gmr-isomorphic", m2_gmr),
        ("m5-fetch-request-age-range", m5_tmr),
        ("fetch-decomposition", fetch_decomposition),
        ("thermostat-delivered-adjacent", final_world),
        ("one-grounding-cycle", grounding_cycle),
    ]


def _team_seed(agent_id: str, agent: StrategicAgent, world: GridWorld) -> None:
    return None


def team_search_scenario() -> Scenario:
    leader_packs = [PACKS / "base.kp", PACKS / "team-leader.kp", PACKS / "team-member.kp"]
    member_packs = [PACKS / "base.kp", PACKS / "team-member.kp"]
    config = TeamConfig(
        members={"ugv-1": "LEADER", "drone-1": "SUBORDINATE", "danny": "HUMAN"},
        competences={"ugv-1": ["entryway", "living-room"],
                     "drone-1": ["bedroom", "living-room"]},
    )
    script = [
        ScriptedTurn("danny", "Where are my keys?", ("start",)),
        ScriptedTurn("danny", "I last saw them in the entryway.",
                     ("after-gmr", "REQUEST-INFO", "APPEARANCE")),
        ScriptedTurn("danny", "They are silver.",
                     ("after-gmr", "REQUEST-INFO", "APPEARANCE")),
    ]
    return Scenario(
        name="team-search",
        world_file=WORLDS / "apartment.world",
        packs={"ugv-1": leader_packs, "drone-1": member_packs},
        robot_agents=["ugv-1", "drone-1"],
        humans=["danny"],
        addressee="ugv-1",
        human_script=script,
        tick_budget=10000,
        team=config,
        seed_fn=_team_seed,
        milestones=_team_milestones(),
        success=_team_success,
    )


def _team_success(state: RunState) -> bool:
    if state.coordinator is None or not state.coordinator.found_done:
        return False
    leader = state.agents["ugv-1"]
    goal_ok = any(g.concept == "FIND-LOST-OBJECT" and g.status == "SATISFIED"
                  for g in leader.agenda.goals.values())
    m9 = any(_gmr_theme_concept(g) == "OBJECT-FOUND" for _, _, g in state.gmrs)
    drone_idle = state.tacticals["drone-1"].active_command is None
    return goal_ok and m9 and drone_idle and not leader.pending_speaks


def _team_milestones() -> list:
    def team_goal_posted(state: RunState) -> bool:
        leader = state.agents["ugv-1"]
        return any(e.kind == "GOAL-POSTED" and
                   e.payload.get("goal-concept") == "FIND-LOST-OBJECT"
                   for e in leader.trace)

    def two_questions_before_dispatch(state: RunState) -> bool:
        first_search = min((t for t, _, c in state.commands if c.verb == "SEARCH"),
                           default=None)
        if first_search is None:
            return False
        questions = []
        for t, _, gmr in state.gmrs:
            root = gmr.frame(gmr.root)
            if root.concept == "REQUEST-INFO" and t < first_search:
                questions.append(_gmr_theme_concept(gmr))
        return sorted(questions) == ["APPEARANCE", "LAST-SEEN-LOCATION"]

    def entryway_first(state: RunState) -> bool:
        for _, robot, cmd in state.commands:
            if cmd.verb == "SEARCH" and robot == "ugv-1":
                return cmd.params.get("rooms", [None])[0] == "entryway"
        return False

    def one_found_one_abort(state: RunState) -> bool:
        log = state.coordinator.bus.log
        founds = [m for m in log if m.kind == "FOUND"]
        aborts = [m for m in log if m.kind == "ABORT"]
        if len(founds) != 1 or len(aborts) != 1:
            return False
        abort_tick = aborts[0].tick
        standby = [c.issued_tick for c in state.bridges["drone-1"].command_log
                   if c.verb == "STANDBY"]
        # the drone must reach standby within two message rounds of the abort
        latency = state.coordinator.config.latency
        return bool(standby) and standby[0] <= abort_tick + 2 * latency

    def notification_content(state: RunState) -> bool:
        for _, _, gmr in state.gmrs:
            root = gmr.frame(gmr.root)
            if root.concept != "INFORM":
                continue
            theme = root.first("theme")
            if not isinstance(theme, FrameRef):
                continue
            evt = gmr.frames.get(theme.target)
            if evt is None or evt.concept != "OBJECT-FOUND":
                continue
            obj = evt.first("theme")
            loc = evt.first("location")
            obj_ok = isinstance(obj, FrameRef) and \
                gmr.frames.get(obj.target) is not None and \
                gmr.frames[obj.target].concept == "KEY"
            loc_ok = isinstance(loc, ConceptRef) and loc.concept == "ENTRYWAY"
            if obj_ok and loc_ok:
                return True
        return False

    return [
        ("team-goal-posted", team_goal_posted),
        ("two-precondition-questions", two_questions_before_dispatch),
        ("entryway-searched-first", entryway_first),
        ("single-found-single-abort", one_found_one_abort),
        ("human-notification-content", notification_content),
    ]


SCENARIOS: dict[str, Callable[[], Scenario]] = {
    "shipboard": shipboard_scenario,
    "team-search": team_search_scenario,
}
