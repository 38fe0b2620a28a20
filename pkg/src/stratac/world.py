"""Deterministic tick-based grid world.

Rooms, labeled objects, and robot embodiments (ground vehicle, drone,
fixed arm) on an ASCII-declared grid.  One actuation per robot per tick,
resolved in robot-id order; identical (world file, seed, actuation
script) always yields the identical event log, byte for byte.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

Cell = tuple[int, int]

DIRS = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}

ROBOT_KINDS = ("UGV", "DRONE", "ARM")
DEFAULT_CAPABILITIES = {
    "UGV": ("MOVE-TO", "SEARCH", "SCAN", "PICKUP", "DROP", "RETURN", "EXPLORE", "STANDBY"),
    "DRONE": ("MOVE-TO", "SEARCH", "SCAN", "HOVER", "RETURN", "EXPLORE", "STANDBY"),
    "ARM": ("PICKUP", "DROP", "SCAN", "STANDBY"),
}


class WorldError(Exception):
    pass


@dataclass
class WorldObject:
    id: str
    type: str
    features: dict[str, object] = field(default_factory=dict)
    label_code: str = ""
    position: Cell = (0, 0)
    held_by: Optional[str] = None


@dataclass
class RobotBody:
    id: str
    kind: str
    position: Cell
    heading: str = "N"
    sensor_radius: int = 3
    capabilities: tuple[str, ...] = ()
    holding: Optional[str] = None
    battery: float = 1.0
    station: Cell = (0, 0)


@dataclass
class HumanBody:
    id: str
    position: Cell


@dataclass(frozen=True)
class Actuation:
    verb: str                 # MOVE | PICKUP | DROP | NOOP
    direction: str = ""       # MOVE
    object_id: str = ""       # PICKUP / DROP
    cell: Optional[Cell] = None   # DROP target (defaults to robot cell)


@dataclass(frozen=True)
class WorldEvent:
    tick: int
    robot: str
    kind: str                 # MOVED BLOCKED PICKED DROPPED REJECTED BATTERY-EMPTY INJECT
    detail: str = ""

    def line(self) -> str:
        return f"tick={self.tick} robot={self.robot} kind={self.kind} {self.detail}".rstrip()


@dataclass
class Detection:
    object_id: str
    type: str
    position: Cell
    features: dict[str, object]
    label_code: str


@dataclass
class SenseResult:
    detections: list[Detection]
    obstacles: list[Cell]
    humans: list[tuple[str, Cell]]
    pose: Cell
    holding: Optional[str]
    battery: float


class GridWorld:
    def __init__(self, width: int, height: int, seed: int = 0,
                 battery_drain: float = 0.0005):
        self.width = width
        self.height = height
        self.rooms: dict[str, set[Cell]] = {}
        self.obstacles: set[Cell] = set()
        self.objects: dict[str, WorldObject] = {}
        self.robots: dict[str, RobotBody] = {}
        self.humans: dict[str, HumanBody] = {}
        self.clock = 0
        self.rng = random.Random(seed)
        self.seed = seed
        self.battery_drain = battery_drain
        self.events: list[WorldEvent] = []
        self._pending_injections: list[tuple[str, tuple]] = []

    # -- setup ---------------------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def add_room(self, name: str, cells: Iterable[Cell]) -> None:
        cells = set(cells)
        for other, existing in self.rooms.items():
            overlap = cells & existing
            if overlap:
                raise WorldError(f"room {name} overlaps {other} at {sorted(overlap)[0]}")
        self.rooms[name] = cells

    def room_of(self, cell: Cell) -> Optional[str]:
        for name in sorted(self.rooms):
            if cell in self.rooms[name]:
                return name
        return None

    def add_object(self, obj: WorldObject) -> None:
        if not self.in_bounds(obj.position):
            raise WorldError(f"object {obj.id} out of bounds at {obj.position}")
        if obj.label_code and any(o.label_code == obj.label_code for o in self.objects.values()):
            raise WorldError(f"duplicate label code {obj.label_code}")
        self.objects[obj.id] = obj

    def add_robot(self, robot: RobotBody) -> None:
        if not self.in_bounds(robot.position):
            raise WorldError(f"robot {robot.id} out of bounds at {robot.position}")
        if not robot.capabilities:
            robot.capabilities = DEFAULT_CAPABILITIES[robot.kind]
        robot.station = robot.position
        self.robots[robot.id] = robot

    def add_human(self, human: HumanBody) -> None:
        self.humans[human.id] = human

    # -- stepping ------------------------------------------------------------

    def inject(self, kind: str, *args) -> None:
        """Queue a test-time event; applied atomically before the next tick."""
        if kind not in ("add-obstacle", "move-object", "drain-battery"):
            raise WorldError(f"unknown injection {kind}")
        if kind == "add-obstacle" and not self.in_bounds(args[0]):
            raise WorldError(f"injection out of bounds: {args[0]}")
        if kind == "move-object":
            if args[0] not in self.objects:
                raise WorldError(f"no such object: {args[0]}")
            if not self.in_bounds(args[1]):
                raise WorldError(f"injection out of bounds: {args[1]}")
        if kind == "drain-battery" and args[0] not in self.robots:
            raise WorldError(f"no such robot: {args[0]}")
        self._pending_injections.append((kind, args))

    def _apply_injections(self) -> list[WorldEvent]:
        out = []
        for kind, args in self._pending_injections:
            if kind == "add-obstacle":
                self.obstacles.add(args[0])
                detail = f"cell={args[0][0]},{args[0][1]}"
            elif kind == "move-object":
                self.objects[args[0]].position = args[1]
                detail = f"object={args[0]} to={args[1][0]},{args[1][1]}"
            else:
                self.robots[args[0]].battery = float(args[1])
                detail = f"level={args[1]}"
            out.append(WorldEvent(self.clock, args[0] if kind == "drain-battery" else "-",
                                  "INJECT", f"what={kind} {detail}"))
        self._pending_injections.clear()
        return out

    def step(self, actuations: dict[str, Actuation]) -> list[WorldEvent]:
        """Advance one tick: apply injections, then each robot's actuation."""
        events = self._apply_injections()
        for robot_id in sorted(actuations):
            if robot_id not in self.robots:
                raise WorldError(f"no such robot: {robot_id}")
        for robot_id in sorted(self.robots):
            act = actuations.get(robot_id)
            if act is None or act.verb == "NOOP":
                continue
            events.append(self._actuate(self.robots[robot_id], act))
        self.clock += 1
        self.events.extend(events)
        return events

    def _actuate(self, robot: RobotBody, act: Actuation) -> WorldEvent:
        if robot.battery <= 0.0:
            return WorldEvent(self.clock, robot.id, "BATTERY-EMPTY")
        robot.battery = max(0.0, robot.battery - self.battery_drain)
        if act.verb == "MOVE":
            return self._move(robot, act.direction)
        if act.verb == "PICKUP":
            return self._pickup(robot, act.object_id)
        if act.verb == "DROP":
            return self._drop(robot, act.object_id, act.cell)
        if act.verb == "RECHARGE":
            if robot.position == robot.station:
                robot.battery = 1.0
                return WorldEvent(self.clock, robot.id, "RECHARGED")
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=not-at-station")
        return WorldEvent(self.clock, robot.id, "REJECTED", f"reason=unknown-verb verb={act.verb}")

    def _move(self, robot: RobotBody, direction: str) -> WorldEvent:
        if robot.kind == "ARM":
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=fixed-base")
        if direction not in DIRS:
            return WorldEvent(self.clock, robot.id, "REJECTED",
                              f"reason=bad-direction dir={direction}")
        dx, dy = DIRS[direction]
        target = (robot.position[0] + dx, robot.position[1] + dy)
        blocked = not self.in_bounds(target) or \
            (robot.kind == "UGV" and target in self.obstacles)
        if blocked:
            return WorldEvent(self.clock, robot.id, "BLOCKED",
                              f"dir={direction} at={target[0]},{target[1]}")
        prev = robot.position
        robot.position = target
        robot.heading = direction
        if robot.holding:
            self.objects[robot.holding].position = target
        return WorldEvent(self.clock, robot.id, "MOVED",
                          f"from={prev[0]},{prev[1]} to={target[0]},{target[1]}")

    def _reach(self, robot: RobotBody) -> set[Cell]:
        x, y = robot.position
        return {(x, y), (x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)}

    def _pickup(self, robot: RobotBody, object_id: str) -> WorldEvent:
        if "PICKUP" not in robot.capabilities:
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=no-capability")
        if robot.holding:
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=already-holding")
        obj = self.objects.get(object_id)
        if obj is None or obj.held_by is not None:
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=no-such-object")
        if obj.position not in self._reach(robot):
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=out-of-reach")
        obj.held_by = robot.id
        obj.position = robot.position
        robot.holding = object_id
        return WorldEvent(self.clock, robot.id, "PICKED", f"object={object_id}")

    def _drop(self, robot: RobotBody, object_id: str, cell: Optional[Cell]) -> WorldEvent:
        if robot.holding != object_id or object_id not in self.objects:
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=not-holding")
        target = cell if cell is not None else robot.position
        if target not in self._reach(robot) or not self.in_bounds(target) \
                or target in self.obstacles:
            return WorldEvent(self.clock, robot.id, "REJECTED", "reason=bad-drop-cell")
        obj = self.objects[object_id]
        obj.held_by = None
        obj.position = target
        robot.holding = None
        return WorldEvent(self.clock, robot.id, "DROPPED",
                          f"object={object_id} at={target[0]},{target[1]}")

    # -- sensing -------------------------------------------------------------

    def sense(self, robot_id: str) -> SenseResult:
        """Noise-free detections within sensor radius and line of sight.

        Drones sense over ground obstacles; ground robots need a clear
        supercover ray.
        """
        robot = self.robots[robot_id]
        over_obstacles = robot.kind == "DRONE"
        detections = []
        for obj_id in sorted(self.objects):
            obj = self.objects[obj_id]
            if obj.held_by is not None and obj.held_by != robot_id:
                continue
            if self._visible(robot, obj.position, over_obstacles):
                detections.append(Detection(obj.id, obj.type, obj.position,
                                            dict(obj.features), obj.label_code))
        obstacles = sorted(c for c in self.obstacles
                           if _within(robot.position, c, robot.sensor_radius))
        humans = [(h.id, h.position) for h in
                  sorted(self.humans.values(), key=lambda h: h.id)
                  if self._visible(robot, h.position, over_obstacles)]
        return SenseResult(detections, obstacles, humans, robot.position,
                           robot.holding, robot.battery)

    def _visible(self, robot: RobotBody, cell: Cell, over_obstacles: bool) -> bool:
        if not _within(robot.position, cell, robot.sensor_radius):
            return False
        if over_obstacles:
            return True
        return line_of_sight(robot.position, cell, self.obstacles)

    # -- invariant helpers -----------------------------------------------------

    def object_census(self) -> dict[str, Cell]:
        return {oid: obj.position for oid, obj in sorted(self.objects.items())}


def _within(a: Cell, b: Cell, radius: int) -> bool:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 <= radius * radius


def supercover_cells(a: Cell, b: Cell) -> list[Cell]:
    """Every cell the segment between the two cell centers passes through.

    Corner crossings include both side cells, so the set is symmetric in
    the endpoints.
    """
    (x0, y0), (x1, y1) = a, b
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    cells = [(x0, y0)]
    x, y = x0, y0
    ix = iy = 0
    while ix < nx or iy < ny:
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            # corner crossing: both neighbors, then the diagonal
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


def line_of_sight(a: Cell, b: Cell, obstacles: set[Cell]) -> bool:
    """Clear iff no strictly-intermediate supercover cell is an obstacle."""
    for cell in supercover_cells(a, b):
        if cell in (a, b):
            continue
        if cell in obstacles:
            return False
    return True


# ---------------------------------------------------------------------------
# world files
# ---------------------------------------------------------------------------

_KV_RE = re.compile(r"(\w[\w-]*)=(\S+)")


def load_world(path) -> GridWorld:
    return parse_world(Path(path).read_text(), name=Path(path).name)


def parse_world(text: str, name: str = "<world>") -> GridWorld:
    """Parse a world file: an ASCII map section plus declaration lines.

    Map characters: '#' obstacle, '.' floor, '+' door (floor).  Rooms are
    rectangles "room <name> <x0> <y0> <x1> <y1>" (inclusive).  Objects,
    robots, and humans are placed by coordinates.
    """
    lines = text.splitlines()
    grid_lines: list[str] = []
    decls: list[tuple[int, str]] = []
    in_map = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip()
        if not in_map and line.strip().startswith("#"):
            continue
        if line.strip() == "map":
            in_map = True
            continue
        if in_map:
            if line.strip() == "endmap":
                in_map = False
                continue
            grid_lines.append(line)
            continue
        if line.strip():
            decls.append((lineno, line.strip()))
    if not grid_lines:
        raise WorldError(f"{name}: no map section")
    width = max(len(l) for l in grid_lines)
    height = len(grid_lines)

    seed = 0
    drain = 0.0005
    for _, decl in decls:
        if decl.startswith("seed "):
            seed = int(decl.split()[1])
        if decl.startswith("battery-drain "):
            drain = float(decl.split()[1])
    world = GridWorld(width, height, seed=seed, battery_drain=drain)
    for y, row in enumerate(grid_lines):
        for x, ch in enumerate(row):
            if ch == "#":
                world.obstacles.add((x, y))
            elif ch not in ". +":
                raise WorldError(f"{name}: bad map character {ch!r} at {x},{y}")

    for lineno, decl in decls:
        words = decl.split()
        head = words[0]
        try:
            if head == "room":
                _, rname, x0, y0, x1, y1 = words
                cells = [(x, y)
                         for x in range(int(x0), int(x1) + 1)
                         for y in range(int(y0), int(y1) + 1)
                         if (x, y) not in world.obstacles]
                world.add_room(rname, cells)
            elif head == "object":
                _, oid, otype, x, y, *rest = words
                kv = dict(_KV_RE.findall(" ".join(rest)))
                label = kv.pop("label", "")
                features = {k: _feature_value(v) for k, v in kv.items()}
                world.add_object(WorldObject(oid, otype, features, label,
                                             (int(x), int(y))))
            elif head == "robot":
                _, rid, kind, x, y, *rest = words
                if kind not in ROBOT_KINDS:
                    raise WorldError(f"unknown robot kind {kind}")
                kv = dict(_KV_RE.findall(" ".join(rest)))
                caps = tuple(kv["caps"].split(",")) if "caps" in kv else ()
                world.add_robot(RobotBody(rid, kind, (int(x), int(y)),
                                          sensor_radius=int(kv.get("radius", 3)),
                                          capabilities=caps))
            elif head == "human":
                _, hid, x, y = words
                world.add_human(HumanBody(hid, (int(x), int(y))))
            elif head in ("seed", "battery-drain"):
                pass
            else:
                raise WorldError(f"unknown declaration {head!r}")
        except (ValueError, IndexError) as e:
            raise WorldError(f"{name}:{lineno}: bad declaration {decl!r}: {e}") from e
        except WorldError as e:
            raise WorldError(f"{name}:{lineno}: {e}") from e
    return world


def _feature_value(text: str):
    try:
        return float(text)
    except ValueError:
        return text
