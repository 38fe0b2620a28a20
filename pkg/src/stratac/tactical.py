"""Reactive control: behavior trees over a typed blackboard.

Every robot runs the same safety-first tree template: collision handling
leftmost, then robot needs, then execution of the current strategic
command, with exploration as the rightmost fallback.  The tree is ticked
once per simulation step; left siblings re-evaluate every tick, so a
newly raised obstacle flag preempts a running action before it can
actuate.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .bridge import Bridge, CommandMessage, GroundingVerdict, PerceptPacket
from .world import Actuation, Cell, DIRS, SenseResult


class TacticalError(Exception):
    pass


class TickStatus(Enum):
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"
    RUNNING = "RUNNING"


class NodeKind(Enum):
    SEQUENCE = "SEQUENCE"
    FALLBACK = "FALLBACK"
    CONDITION = "CONDITION"
    ACTION = "ACTION"
    DECORATOR = "DECORATOR"


@dataclass
class BTNode:
    kind: NodeKind
    name: str
    children: list["BTNode"] = field(default_factory=list)
    fn: Optional[Callable] = None          # CONDITION: bb -> bool; ACTION: ctx -> TickStatus
    decorator: str = ""                    # "invert" | "force-success"
    last_status: Optional[TickStatus] = None

    def __post_init__(self) -> None:
        if self.kind in (NodeKind.CONDITION, NodeKind.ACTION):
            if self.children:
                raise TacticalError(f"{self.name}: leaves cannot have children")
            if self.fn is None:
                raise TacticalError(f"{self.name}: leaf needs a function")
        elif self.kind is NodeKind.DECORATOR:
            if len(self.children) != 1:
                raise TacticalError(f"{self.name}: decorator needs exactly one child")
        else:
            if not self.children:
                raise TacticalError(f"{self.name}: composite needs at least one child")


def sequence(name: str, *children: BTNode) -> BTNode:
    return BTNode(NodeKind.SEQUENCE, name, list(children))


def fallback(name: str, *children: BTNode) -> BTNode:
    return BTNode(NodeKind.FALLBACK, name, list(children))


def condition(name: str, fn: Callable) -> BTNode:
    return BTNode(NodeKind.CONDITION, name, fn=fn)


def action(name: str, fn: Callable) -> BTNode:
    return BTNode(NodeKind.ACTION, name, fn=fn)


class ActuatorPort:
    """Collects the single actuation a robot may emit per tick."""

    def __init__(self, robot_id: str):
        self.robot_id = robot_id
        self.pending: Optional[Actuation] = None

    def emit(self, act: Actuation) -> None:
        if self.pending is not None:
            raise TacticalError(f"{self.robot_id}: second actuation in one tick")
        self.pending = act

    def take(self) -> Optional[Actuation]:
        act = self.pending
        self.pending = None
        return act


@dataclass
class TickContext:
    bb: "Blackboard"
    port: ActuatorPort
    tick: int = 0


def tick(node: BTNode, ctx: TickContext) -> TickStatus:
    """Standard reactive tick semantics, restart-on-preempt."""
    if node.kind is NodeKind.SEQUENCE:
        status = TickStatus.SUCCESS
        for child in node.children:
            status = tick(child, ctx)
            if status is not TickStatus.SUCCESS:
                break
    elif node.kind is NodeKind.FALLBACK:
        status = TickStatus.FAILURE
        for child in node.children:
            status = tick(child, ctx)
            if status is not TickStatus.FAILURE:
                break
    elif node.kind is NodeKind.CONDITION:
        status = TickStatus.SUCCESS if node.fn(ctx.bb) else TickStatus.FAILURE
    elif node.kind is NodeKind.ACTION:
        status = node.fn(ctx)
        if not isinstance(status, TickStatus):
            raise TacticalError(f"{node.name}: action returned {status!r}")
    else:
        inner = tick(node.children[0], ctx)
        if node.decorator == "invert":
            status = {TickStatus.SUCCESS: TickStatus.FAILURE,
                      TickStatus.FAILURE: TickStatus.SUCCESS}.get(inner, inner)
        elif node.decorator == "force-success":
            status = TickStatus.SUCCESS if inner is not TickStatus.RUNNING else inner
        else:
            status = inner
    node.last_status = status
    return status


def dump_tree(node: BTNode, depth: int = 0) -> str:
    mark = f" [{node.last_status.value}]" if node.last_status else ""
    lines = [f"{'  ' * depth}{node.kind.value} {node.name}{mark}"]
    for child in node.children:
        lines.append(dump_tree(child, depth + 1))
    return "\n".join(lines)


def tree_to_json(node: BTNode) -> dict:
    return {"kind": node.kind.value, "name": node.name,
            "status": node.last_status.value if node.last_status else None,
            "children": [tree_to_json(c) for c in node.children]}


# ---------------------------------------------------------------------------
# blackboard
# ---------------------------------------------------------------------------

SECTIONS = ("condition", "state", "command", "percept")


class Blackboard:
    """Typed key-value store; every key is declared before use."""

    def __init__(self, percept_capacity: int = 32):
        self._types: dict[str, type] = {}
        self._sections: dict[str, str] = {}
        self._values: dict[str, object] = {}
        self.percepts: deque = deque(maxlen=percept_capacity)

    def declare(self, key: str, type_: type, section: str, initial) -> None:
        if section not in SECTIONS:
            raise TacticalError(f"unknown blackboard section {section}")
        if key in self._types:
            raise TacticalError(f"blackboard key {key} already declared")
        self._types[key] = type_
        self._sections[key] = section
        self._values[key] = initial

    def get(self, key: str):
        if key not in self._types:
            raise TacticalError(f"undeclared blackboard key {key}")
        return self._values[key]

    def set(self, key: str, value) -> None:
        if key not in self._types:
            raise TacticalError(f"undeclared blackboard key {key}")
        expected = self._types[key]
        if value is not None and not isinstance(value, expected):
            raise TacticalError(
                f"blackboard key {key} expects {expected.__name__}, got {type(value).__name__}")
        self._values[key] = value

    def section(self, name: str) -> dict:
        return {k: self._values[k] for k, s in sorted(self._sections.items()) if s == name}

    def snapshot(self) -> dict:
        """JSON-safe view, partitioned by section."""
        return {section: {k: _jsonable(v) for k, v in self.section(section).items()}
                for section in SECTIONS}


def _jsonable(value):
    if isinstance(value, set):
        return sorted(_jsonable(v) for v in value)
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


# ---------------------------------------------------------------------------
# safety-first tree template
# ---------------------------------------------------------------------------

def build_safety_template(capabilities: tuple[str, ...], needs: tuple[str, ...],
                          controllers: "Controllers") -> BTNode:
    """Root arrangement, left to right: collision avoidance, needs,
    command execution, exploration fallback."""
    if not capabilities:
        raise TacticalError("capability set must be nonempty")
    sections = [
        sequence("collision-avoidance",
                 condition("obstacle-detected?", lambda bb: bb.get("obstacle-detected")),
                 action("brake-and-replan", controllers.brake_and_replan)),
    ]
    if needs:
        need_nodes = []
        if "battery" in needs:
            need_nodes.append(
                sequence("battery-floor",
                         condition("battery-low?", lambda bb: bb.get("battery-low")),
                         action("go-recharge", controllers.go_recharge)))
        if need_nodes:
            sections.append(fallback("robot-needs", *need_nodes)
                            if len(need_nodes) > 1 else need_nodes[0])
    sections.append(
        sequence("action-command",
                 condition("command-active?", lambda bb: bb.get("command-active")),
                 action("execute-command", controllers.execute_command)))
    sections.append(
        fallback("exploration",
                 sequence("explore-when-enabled",
                          condition("explore-enabled?", lambda bb: bb.get("explore-enabled")),
                          action("explore", controllers.explore)),
                 action("idle", lambda ctx: TickStatus.SUCCESS)))
    return fallback("root", *sections)


# ---------------------------------------------------------------------------
# percept filtering (the tactical attention service)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttentionRule:
    kind: str        # "search-target" | "obstacle" | "human" | "object"
    priority: float


DEFAULT_RULES = (
    AttentionRule("search-target", 1.0),
    AttentionRule("obstacle", 1.0),
    AttentionRule("human", 0.6),
    AttentionRule("object", 0.2),
)

ATTENTION_THRESHOLD = 0.5


def filter_percepts(detections: list[dict], new_obstacles: list[Cell],
                    target_types: tuple[str, ...], rules: tuple[AttentionRule, ...],
                    threshold: float = ATTENTION_THRESHOLD) -> list[tuple[float, dict]]:
    """Score raw detections; drop those below threshold.

    Returns (priority, item) pairs sorted by priority descending, then by
    the item's stable identity.
    """
    by_kind = {r.kind: r.priority for r in rules}
    scored: list[tuple[float, dict]] = []
    for det in detections:
        if det.get("kind") == "human":
            pri = by_kind.get("human", 0.0)
        elif det.get("type") in target_types:
            pri = by_kind.get("search-target", 0.0)
        else:
            pri = by_kind.get("object", 0.0)
        if pri >= threshold:
            scored.append((pri, det))
    for cell in new_obstacles:
        pri = by_kind.get("obstacle", 0.0)
        if pri >= threshold:
            scored.append((pri, {"kind": "obstacle", "cell": [cell[0], cell[1]]}))
    scored.sort(key=lambda pair: (-pair[0], str(sorted(pair[1].items()))))
    return scored


# ---------------------------------------------------------------------------
# primitive controllers and the per-robot tactical task
# ---------------------------------------------------------------------------

def _manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def coverage_waypoints(room_cells: list[Cell], radius: int, origin: Cell) -> list[Cell]:
    """Greedy coverage set: every room cell ends up within sensor radius of
    some waypoint; waypoints ordered nearest-first from the origin."""
    remaining = set(room_cells)
    waypoints = []
    r2 = radius * radius
    for cell in sorted(room_cells, key=lambda c: (_manhattan(origin, c), c[1], c[0])):
        if cell not in remaining:
            continue
        waypoints.append(cell)
        remaining -= {c for c in remaining
                      if (c[0] - cell[0]) ** 2 + (c[1] - cell[1]) ** 2 <= r2}
    return waypoints


class Controllers:
    """Primitive controller implementations bound to one robot's state."""

    def __init__(self, robot: "TacticalTask"):
        self.robot = robot

    # -- safety ----------------------------------------------------------------

    def brake_and_replan(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        pending = bb.get("pending-obstacles") or []
        self.robot.known_obstacles.update(tuple(c) for c in pending)
        bb.set("pending-obstacles", [])
        bb.set("obstacle-detected", False)
        return TickStatus.SUCCESS

    def go_recharge(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        pos = bb.get("pose")
        station = self.robot.station
        if pos == station:
            ctx.port.emit(Actuation("RECHARGE"))
            if bb.get("battery") >= 0.999:
                bb.set("battery-low", False)
                return TickStatus.SUCCESS
            return TickStatus.RUNNING
        return self._step_toward(ctx, station)

    # -- command execution -------------------------------------------------------

    def execute_command(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        verb = bb.get("cmd-verb")
        handler = {
            "MOVE-TO": self._exec_move_to,
            "RETURN": self._exec_return,
            "SEARCH": self._exec_search,
            "PICKUP": self._exec_pickup,
            "DROP": self._exec_drop,
            "STANDBY": self._exec_standby,
            "HOLD": self._exec_pickup,
        }.get(verb)
        if handler is None:
            self.robot.finish_command("FAILED", {"reason": f"no-controller:{verb}"})
            return TickStatus.FAILURE
        return handler(ctx)

    def explore(self, ctx: TickContext) -> TickStatus:
        # deterministic wander: cycle through open neighbors in NESW order
        bb = ctx.bb
        pos = bb.get("pose")
        for direction in "NESW":
            dx, dy = DIRS[direction]
            target = (pos[0] + dx, pos[1] + dy)
            if self.robot.passable(target):
                ctx.port.emit(Actuation("MOVE", direction=direction))
                return TickStatus.RUNNING
        return TickStatus.FAILURE

    # -- verb handlers -----------------------------------------------------------

    def _exec_move_to(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        waypoint = tuple(bb.get("cmd-waypoint"))
        if bb.get("pose") == waypoint:
            self.robot.finish_command("DONE", {"at": list(waypoint)})
            return TickStatus.SUCCESS
        return self._step_toward(ctx, waypoint)

    def _exec_return(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        waypoint = tuple(bb.get("cmd-waypoint"))
        pos = bb.get("pose")
        if _manhattan(pos, waypoint) <= 1:
            self.robot.finish_command("DONE", {"at": list(pos)})
            return TickStatus.SUCCESS
        return self._step_toward(ctx, waypoint, stop_adjacent=True)

    def _exec_standby(self, ctx: TickContext) -> TickStatus:
        self.robot.finish_command("DONE", {})
        return TickStatus.SUCCESS

    def _exec_pickup(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        object_id = bb.get("cmd-object-id")
        target = tuple(bb.get("cmd-object-position"))
        if bb.get("holding") == object_id:
            self.robot.finish_command("DONE", {"holding": object_id})
            return TickStatus.SUCCESS
        pos = bb.get("pose")
        if _manhattan(pos, target) <= 1:
            ctx.port.emit(Actuation("PICKUP", object_id=object_id))
            return TickStatus.RUNNING
        return self._step_toward(ctx, target, stop_adjacent=True)

    def _exec_drop(self, ctx: TickContext) -> TickStatus:
        bb = ctx.bb
        object_id = bb.get("cmd-object-id")
        if bb.get("holding") != object_id:
            # state shows the drop landed
            self.robot.finish_command("DONE", {"dropped": object_id})
            return TickStatus.SUCCESS
        near = bb.get("cmd-waypoint")
        pos = bb.get("pose")
        if near is not None and _manhattan(pos, tuple(near)) > 1:
            return self._step_toward(ctx, tuple(near), stop_adjacent=True)
        ctx.port.emit(Actuation("DROP", object_id=object_id, cell=pos))
        return TickStatus.RUNNING

    def _exec_search(self, ctx: TickContext) -> TickStatus:
        return run_search_plan(ctx, self.robot)

    # -- movement ------------------------------------------------------------

    def _step_toward(self, ctx: TickContext, target: Cell,
                     stop_adjacent: bool = False) -> TickStatus:
        robot = self.robot
        pos = ctx.bb.get("pose")
        goals = {target}
        if stop_adjacent:
            goals = {(target[0] + dx, target[1] + dy) for dx, dy in DIRS.values()}
            goals = {g for g in goals if robot.passable(g)}
            if not goals:
                self.robot.finish_command("FAILED", {"reason": "unreachable",
                                                     "target": list(target)})
                return TickStatus.FAILURE
        direction = robot.first_step(pos, goals)
        if direction is None:
            self.robot.finish_command("FAILED", {"reason": "no-path",
                                                 "target": list(target)})
            ctx.bb.set("fault", "no-path")
            return TickStatus.FAILURE
        ctx.port.emit(Actuation("MOVE", direction=direction))
        return TickStatus.RUNNING


def run_search_plan(ctx: TickContext, robot: "TacticalTask") -> TickStatus:
    """Waypoint-queue search with halt-for-grounding.

    Substitutes the hard question (that one labeled object) with an easy
    one (any type-matching object), halting so the strategic layer can
    verify the candidate.  EXHAUSTED exactly when the queue empties.
    """
    bb = ctx.bb
    if bb.get("search-halted"):
        return TickStatus.RUNNING
    target_types = tuple(bb.get("search-types") or ())
    rejected = set(bb.get("search-rejected") or [])
    area = bb.get("search-area") or set()
    # only sightings inside the designated search area count as candidates
    found_now = [d for d in (bb.get("last-detections") or [])
                 if d.get("type") in target_types
                 and d.get("label") not in rejected
                 and tuple(d.get("position", (-1, -1))) in area]
    if found_now:
        found_now.sort(key=lambda d: (_manhattan(bb.get("pose"), tuple(d["position"])),
                                      d.get("label", "")))
        candidate = found_now[0]
        bb.set("search-halted", True)
        bb.set("search-candidate", candidate)
        robot.emit_status("HALTED-CANDIDATE", {"candidate": candidate})
        return TickStatus.RUNNING
    queue = list(bb.get("search-queue") or [])
    while queue and tuple(queue[0]) == bb.get("pose"):
        queue.pop(0)
        bb.set("search-visited", bb.get("search-visited") + 1)
        bb.set("search-queue", queue)
    if not queue:
        robot.finish_command("DONE", {
            "outcome": "EXHAUSTED",
            "visited": bb.get("search-visited"),
            "rooms": list(bb.get("search-rooms") or []),
        })
        return TickStatus.SUCCESS
    controllers = robot.controllers
    return controllers._step_toward(ctx, tuple(queue[0]))


class TacticalTask:
    """One robot's tactical loop: percept intake, command unpacking, one
    tree tick, at most one actuation out."""

    def __init__(self, robot_id: str, kind: str, capabilities: tuple[str, ...],
                 sensor_radius: int, static_obstacles: set[Cell],
                 rooms: dict[str, list[Cell]], bounds: tuple[int, int],
                 station: Cell, bridge: Bridge,
                 needs: tuple[str, ...] = ("battery",),
                 rules: tuple[AttentionRule, ...] = DEFAULT_RULES,
                 battery_floor: float = 0.15,
                 percept_capacity: int = 32):
        self.robot_id = robot_id
        self.kind = kind
        self.capabilities = capabilities
        self.sensor_radius = sensor_radius
        self.known_obstacles = set(static_obstacles)
        self.rooms = rooms
        self.bounds = bounds
        self.station = station
        self.bridge = bridge
        self.rules = rules
        self.battery_floor = battery_floor
        self.active_command: Optional[CommandMessage] = None
        self.tick_count = 0

        self.bb = Blackboard(percept_capacity)
        bb = self.bb
        bb.declare("obstacle-detected", bool, "condition", False)
        bb.declare("battery-low", bool, "condition", False)
        bb.declare("command-active", bool, "condition", False)
        bb.declare("explore-enabled", bool, "condition", False)
        bb.declare("fault", str, "state", "")
        bb.declare("pose", tuple, "state", station)
        bb.declare("holding", str, "state", None)
        bb.declare("battery", float, "state", 1.0)
        bb.declare("pending-obstacles", list, "state", [])
        bb.declare("last-detections", list, "percept", [])
        bb.declare("cmd-verb", str, "command", None)
        bb.declare("cmd-id", int, "command", None)
        bb.declare("cmd-waypoint", tuple, "command", None)
        bb.declare("cmd-object-id", str, "command", None)
        bb.declare("cmd-object-position", tuple, "command", None)
        bb.declare("search-types", tuple, "command", None)
        bb.declare("search-expected", dict, "command", None)
        bb.declare("search-queue", list, "command", None)
        bb.declare("search-rooms", list, "command", None)
        bb.declare("search-area", set, "command", None)
        bb.declare("search-rejected", list, "command", None)
        bb.declare("search-visited", int, "command", 0)
        bb.declare("search-halted", bool, "command", False)
        bb.declare("search-candidate", dict, "command", None)

        self.controllers = Controllers(self)
        self.tree = build_safety_template(capabilities, needs, self.controllers)
        self.port = ActuatorPort(robot_id)

    # -- helpers ---------------------------------------------------------------

    def passable(self, cell: Cell) -> bool:
        x, y = cell
        if not (0 <= x < self.bounds[0] and 0 <= y < self.bounds[1]):
            return False
        if self.kind == "DRONE":
            return True
        return cell not in self.known_obstacles

    def first_step(self, start: Cell, goals: set[Cell]) -> Optional[str]:
        """BFS over the known map; deterministic NESW expansion order."""
        if start in goals:
            return None
        frontier = deque([start])
        came: dict[Cell, tuple[Cell, str]] = {start: (start, "")}
        while frontier:
            cell = frontier.popleft()
            for direction in "NESW":
                dx, dy = DIRS[direction]
                nxt = (cell[0] + dx, cell[1] + dy)
                if nxt in came or not self.passable(nxt):
                    continue
                came[nxt] = (cell, direction)
                if nxt in goals:
                    # walk back to the first move out of start
                    node = nxt
                    while came[node][0] != start:
                        node = came[node][0]
                    return came[node][1]
                frontier.append(nxt)
        return None

    def emit_status(self, status: str, payload: dict) -> None:
        if self.active_command is not None:
            self.bridge.report(self.active_command.id, status, payload, self.tick_count)

    def finish_command(self, status: str, payload: dict) -> None:
        if self.active_command is None:
            return
        self.bridge.report(self.active_command.id, status, payload, self.tick_count)
        self.active_command = None
        self._clear_command_slots()

    def _clear_command_slots(self) -> None:
        for key in ("cmd-verb", "cmd-id", "cmd-waypoint", "cmd-object-id",
                    "cmd-object-position", "search-types", "search-expected",
                    "search-queue", "search-rooms", "search-rejected",
                    "search-candidate", "search-area"):
            self.bb.set(key, None)
        self.bb.set("search-visited", 0)
        self.bb.set("search-halted", False)
        self.bb.set("command-active", False)

    # -- command intake ----------------------------------------------------------

    def apply_command(self, cmd: CommandMessage) -> None:
        """Unpack a command into blackboard slots (all-or-nothing)."""
        if cmd.verb not in self.capabilities and cmd.verb != "STANDBY":
            self.bridge.report(cmd.id, "FAILED",
                              {"reason": "unsupported-verb",
                               "capabilities": list(self.capabilities)},
                              self.tick_count)
            return
        staged = self._stage_slots(cmd)
        if staged is None:
            self.bridge.report(cmd.id, "FAILED", {"reason": "bad-params"},
                              self.tick_count)
            return
        if self.active_command is not None:
            self.bridge.report(self.active_command.id, "SUPERSEDED", {},
                              self.tick_count)
            self.active_command = None
            self._clear_command_slots()
        self.active_command = cmd
        self.bridge.report(cmd.id, "ACCEPTED", {}, self.tick_count)
        for key, value in staged.items():
            self.bb.set(key, value)
        self.bb.set("command-active", True)

    def _stage_slots(self, cmd: CommandMessage) -> Optional[dict]:
        p = cmd.params
        staged = {"cmd-verb": cmd.verb, "cmd-id": cmd.id}
        try:
            if cmd.verb in ("MOVE-TO", "RETURN"):
                staged["cmd-waypoint"] = tuple(p["waypoint"])
            elif cmd.verb in ("PICKUP", "HOLD"):
                staged["cmd-object-id"] = p["object-id"]
                staged["cmd-object-position"] = tuple(p["position"])
            elif cmd.verb == "DROP":
                staged["cmd-object-id"] = p["object-id"]
                if p.get("near") is not None:
                    staged["cmd-waypoint"] = tuple(p["near"])
            elif cmd.verb == "SEARCH":
                rooms = list(p["rooms"])
                staged["search-rooms"] = rooms
                staged["search-types"] = tuple(p["types"])
                staged["search-expected"] = dict(p.get("expected", {}))
                staged["search-rejected"] = list(p.get("rejected", []))
                queue: list[Cell] = []
                area: set[Cell] = set()
                pos = self.bb.get("pose")
                for room in rooms:
                    cells = [tuple(c) for c in self.rooms.get(room, [])]
                    area.update(cells)
                    queue.extend(coverage_waypoints(cells, self.sensor_radius, pos))
                staged["search-queue"] = [list(c) for c in queue]
                staged["search-area"] = area
                staged["search-visited"] = 0
                staged["search-halted"] = False
            elif cmd.verb == "STANDBY":
                pass
            else:
                return None
        except (KeyError, TypeError):
            return None
        return staged

    def apply_verdict(self, verdict: GroundingVerdict) -> None:
        if self.active_command is None or verdict.command_id != self.active_command.id:
            return
        if not self.bb.get("search-halted"):
            return
        if verdict.verdict == "CONFIRMED":
            candidate = self.bb.get("search-candidate")
            self.finish_command("DONE", {"outcome": "FOUND", "candidate": candidate})
        else:
            rejected = list(self.bb.get("search-rejected") or [])
            rejected.append(verdict.label_code)
            self.bb.set("search-rejected", rejected)
            self.bb.set("search-halted", False)
            self.bb.set("search-candidate", None)

    # -- the per-tick loop ---------------------------------------------------------

    def on_tick(self, sense: SenseResult, tick_no: int) -> Optional[Actuation]:
        self.tick_count = tick_no
        bb = self.bb

        # 1. percept intake
        bb.set("pose", sense.pose)
        bb.set("holding", sense.holding)
        bb.set("battery", sense.battery)
        if sense.battery < self.battery_floor:
            bb.set("battery-low", True)
        new_obstacles = [c for c in sense.obstacles if c not in self.known_obstacles]
        if new_obstacles:
            bb.set("obstacle-detected", True)
            bb.set("pending-obstacles", [list(c) for c in new_obstacles])
        detections = [{"object_id": d.object_id, "type": d.type,
                       "position": [d.position[0], d.position[1]],
                       "features": d.features, "label": d.label_code}
                      for d in sense.detections]
        detections.extend({"kind": "human", "object_id": hid, "type": "HUMAN",
                           "position": [pos[0], pos[1]], "features": {}, "label": ""}
                          for hid, pos in sense.humans)
        bb.set("last-detections", detections)
        bb.percepts.append((tick_no, detections))

        # 2. command intake
        for message in self.bridge.drain_commands():
            if isinstance(message, CommandMessage):
                self.apply_command(message)
            elif isinstance(message, GroundingVerdict):
                self.apply_verdict(message)

        # 3. attention: forward filtered percepts
        target_types = tuple(self.bb.get("search-types") or ())
        scored = filter_percepts(detections, new_obstacles, target_types, self.rules)
        state = {"pose": [sense.pose[0], sense.pose[1]],
                 "holding": sense.holding, "battery": round(sense.battery, 6)}
        items = tuple(dict(item, priority=pri) for pri, item in scored)
        priority = scored[0][0] if scored else 0.0
        self.bridge.send_percepts(PerceptPacket(tick_no, priority, items, state))

        # 4. tick the tree; collect at most one actuation
        obstacle_held = bb.get("obstacle-detected")
        tick(self.tree, TickContext(self.bb, self.port, tick_no))
        act = self.port.take()
        if act is not None and act.verb == "MOVE" and obstacle_held:
            raise TacticalError(f"{self.robot_id}: move emitted under obstacle flag")
        return act
