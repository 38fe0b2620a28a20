"""Inter-agent coordination: roles, area assignment, findings, abort.

A simulated in-process bus carries typed notices between agents with a
one-tick delivery latency, FIFO per sender/recipient pair.  The leader
decomposes the search area by competence (human-hinted rooms first),
subordinates report area coverage, and the first confirmed find aborts
everyone else.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .frames import ConceptRef, Frame, FrameRef, Literal, NumericRange, Scalar, parse_filler
from .ontology import Step
from .strategic import Plan, PlanStep, StrategicAgent

ROLES = ("LEADER", "SUBORDINATE", "HUMAN")
NOTICE_KINDS = ("ASSIGN", "AREA-CLEAR", "FOUND", "ABORT")

BROADCAST = "BROADCAST"


class TeamError(Exception):
    pass


@dataclass
class TeamConfig:
    members: dict[str, str]                  # agent id -> role
    competences: dict[str, list[str]]        # robot id -> room names it can search
    latency: int = 1

    def __post_init__(self) -> None:
        leaders = [a for a, r in self.members.items() if r == "LEADER"]
        robots = [a for a, r in self.members.items() if r in ("LEADER", "SUBORDINATE")]
        if len(leaders) != 1:
            raise TeamError(f"exactly one leader required, got {leaders}")
        for robot in robots:
            if not self.competences.get(robot):
                raise TeamError(f"robot {robot} has no competent area")

    @property
    def leader(self) -> str:
        return next(a for a, r in self.members.items() if r == "LEADER")

    @property
    def robots(self) -> list[str]:
        return sorted(a for a, r in self.members.items()
                      if r in ("LEADER", "SUBORDINATE"))

    @property
    def humans(self) -> list[str]:
        return sorted(a for a, r in self.members.items() if r == "HUMAN")


@dataclass(frozen=True)
class TeamMessage:
    sender: str
    to: str                    # agent id or BROADCAST
    kind: str                  # one of NOTICE_KINDS
    payload: dict
    tick: int
    seq: int = 0

    def to_json(self) -> dict:
        return {"from": self.sender, "to": self.to, "kind": self.kind,
                "payload": self.payload, "tick": self.tick, "seq": self.seq}


class TeamBus:
    """Deterministic delivery: messages sent at tick T arrive at T+latency,
    ordered by (send tick, sender, sequence)."""

    def __init__(self, config: TeamConfig):
        self.config = config
        self._queue: list[TeamMessage] = []
        self._next_seq = 0
        self.log: list[TeamMessage] = []

    def send(self, sender: str, to: str, kind: str, payload: dict, tick: int) -> TeamMessage:
        if sender not in self.config.members:
            raise TeamError(f"sender {sender} is not a team member")
        if to != BROADCAST and to not in self.config.members:
            raise TeamError(f"unknown recipient {to}")
        msg = TeamMessage(sender, to, kind, payload, tick, self._next_seq)
        self._next_seq += 1
        self._queue.append(msg)
        self.log.append(msg)
        return msg

    def deliveries_for(self, agent_id: str, tick: int) -> list[TeamMessage]:
        due, rest = [], []
        for msg in self._queue:
            arrives = msg.tick + self.config.latency
            mine = msg.to == agent_id or (msg.to == BROADCAST and msg.sender != agent_id)
            if mine and arrives <= tick:
                due.append(msg)
            elif mine:
                rest.append(msg)
            else:
                rest.append(msg)
        self._queue = rest
        due.sort(key=lambda m: (m.tick, m.sender, m.seq))
        return due


def assign_areas(config: TeamConfig, rooms: list[str],
                 hint: Optional[str] = None) -> dict[str, list[str]]:
    """Greedy deterministic split of rooms over competent robots.

    Hinted rooms go first, to the competent robot with the lightest load;
    then single-competence rooms; the rest balance by count with ties
    broken by robot id.  Every searchable room is assigned exactly once;
    rooms nobody can search are returned under the pseudo-robot "".
    """
    robots = config.robots
    assignment: dict[str, list[str]] = {r: [] for r in robots}
    unassigned: list[str] = []
    remaining = list(dict.fromkeys(rooms))

    def competent(room: str) -> list[str]:
        return [r for r in robots if room in config.competences.get(r, [])]

    def give(room: str, robot: str) -> None:
        assignment[robot].append(room)
        remaining.remove(room)

    if hint and hint in remaining:
        options = competent(hint)
        if options:
            options.sort(key=lambda r: (len(assignment[r]), r))
            give(hint, options[0])
    for room in list(remaining):
        options = competent(room)
        if len(options) == 1:
            give(room, options[0])
        elif not options:
            unassigned.append(room)
            remaining.remove(room)
    for room in list(remaining):
        options = competent(room)
        options.sort(key=lambda r: (len(assignment[r]), r))
        give(room, options[0])
    if unassigned:
        assignment[""] = unassigned
    return assignment


class TeamCoordinator:
    """Shared per-run team state: the bus, found/abort flags, coverage."""

    def __init__(self, config: TeamConfig):
        self.config = config
        self.bus = TeamBus(config)
        self.found_done = False
        self.abort_sent = False
        self.coverage: dict[str, list[str]] = {}
        self.trace_hook = None     # optional: (agent_id, kind, payload) -> None

    # -- leader side -----------------------------------------------------------

    def assign_and_dispatch(self, leader: StrategicAgent, plan: Plan,
                            entity: Optional[Frame], hint_concept: Optional[str],
                            tick: int) -> dict[str, list[str]]:
        rooms: list[str] = []
        for robot in self.config.robots:
            for room in self.config.competences[robot]:
                if room not in rooms:
                    rooms.append(room)
        hint = hint_concept.lower() if hint_concept else None
        assignment = assign_areas(self.config, sorted(rooms), hint)
        spec = _object_spec(entity)
        for robot in self.config.robots:
            areas = assignment.get(robot, [])
            if not areas:
                continue
            if robot == leader.agent_id:
                plan.outputs["assigned-rooms"] = areas
                search = Step("do", "SEARCH",
                              {"object": "$object", "rooms": "$assigned"},
                              label="SEARCH")
                index = next(i for i, s in enumerate(plan.steps)
                             if s.spec.kind == "assign-areas") + 1
                plan.steps.insert(index, PlanStep(index, search))
            else:
                self.bus.send(leader.agent_id, robot, "ASSIGN",
                              {"rooms": areas, "object": spec}, tick)
        return assignment

    # -- events from agents --------------------------------------------------------

    def on_step_done(self, agent: StrategicAgent, plan: Plan, step: PlanStep,
                     tick: int) -> None:
        if step.spec.target != "SEARCH":
            return
        if "found" in plan.outputs:
            self.handle_found(agent, plan, tick)
        elif "exhausted" in plan.outputs:
            rooms = plan.outputs["exhausted"].get("rooms", [])
            if agent.agent_id == self.config.leader:
                self.coverage.setdefault(agent.agent_id, []).extend(rooms)
            else:
                self.bus.send(agent.agent_id, self.config.leader, "AREA-CLEAR",
                              {"rooms": rooms}, tick)

    def handle_found(self, finder: StrategicAgent, plan: Plan, tick: int) -> None:
        if finder.agent_id not in self.config.robots:
            finder.think(tick, "CANDIDATE-REJECTED",
                         {"concept": "FOUND", "reason": "not-a-team-member"})
            return
        if self.found_done:
            return
        self.found_done = True
        candidate = plan.outputs.get("found") or {}
        room_concept = _room_concept_of(finder, candidate.get("position"))
        entity = finder.situation.frames.get(
            finder.situation.resolve(plan.bindings["object"].target)) \
            if "object" in plan.bindings else None
        for robot in self.config.robots:
            if robot != finder.agent_id:
                self.bus.send(finder.agent_id, robot, "FOUND",
                              {"object": _object_spec(entity),
                               "room": room_concept}, tick)
        if not self.abort_sent:
            self.abort_sent = True
            self.bus.send(finder.agent_id, BROADCAST, "ABORT", {}, tick)
        humans = self.config.humans
        if humans and entity is not None:
            finder.queue_speak(finder.build_found_report(entity, room_concept, humans[0]))
        if finder.agent_id == self.config.leader:
            self._mark_team_found(finder)

    def on_team_message(self, agent: StrategicAgent, msg: TeamMessage, tick: int) -> None:
        if msg.kind == "ASSIGN":
            spec = msg.payload.get("object", {})
            fid = agent.situation.new_instance(spec.get("concept", "OBJECT"))
            frame = agent.situation.frame(fid)
            for prop, values in sorted(spec.get("features", {}).items()):
                for value in values:
                    frame.add(prop, _filler_from_spec(value))
            areas = [ConceptRef(r.upper().replace(" ", "-")) for r in msg.payload["rooms"]]
            agent.post_goal("SEARCH-AREA",
                            {"agent": FrameRef(agent.self_fid),
                             "object": FrameRef(fid), "areas": areas},
                            100.0, f"team:{msg.sender}", tick)
        elif msg.kind == "ABORT":
            for goal in agent.agenda.live_goals():
                if goal.concept != "SEARCH-AREA":
                    continue
                goal.status = "ABANDONED"
                agent.think(tick, "GOAL-ABANDONED",
                            {"goal-id": goal.id, "goal-concept": goal.concept,
                             "reason": "team-abort"})
                if agent.bridge is not None:
                    agent.bridge.send_command("STANDBY", {}, tick)
        elif msg.kind == "FOUND":
            if agent.agent_id == self.config.leader:
                self._mark_team_found(agent)
        elif msg.kind == "AREA-CLEAR":
            if agent.agent_id == self.config.leader:
                self.coverage.setdefault(msg.sender, []).extend(msg.payload.get("rooms", []))

    def _mark_team_found(self, leader: StrategicAgent) -> None:
        for plans in leader.agenda.plans.values():
            for plan in plans:
                if any(s.spec.kind == "await-found" for s in plan.steps):
                    plan.outputs["team-found"] = True


def _object_spec(entity: Optional[Frame]) -> dict:
    if entity is None:
        return {}
    features: dict[str, list] = {}
    for prop, fillers in sorted(entity.slots.items()):
        if prop in ("corefer", "position", "location", "last-seen-location"):
            continue
        rendered = []
        for f in fillers:
            if isinstance(f, Literal):
                rendered.append(f.text)
            elif isinstance(f, Scalar):
                rendered.append(f.value)
            elif isinstance(f, NumericRange):
                rendered.append(f.render())
        if rendered:
            features[prop] = rendered
    return {"concept": entity.concept, "features": features}


def _filler_from_spec(value):
    if isinstance(value, (int, float)):
        return Scalar(float(value))
    return parse_filler(str(value))


def _room_concept_of(agent: StrategicAgent, position) -> str:
    if position is None:
        return ""
    cell = (position[0], position[1])
    for name in sorted(agent.rooms):
        if cell in {tuple(c) for c in agent.rooms[name]}:
            return name.upper().replace(" ", "-")
    return ""
