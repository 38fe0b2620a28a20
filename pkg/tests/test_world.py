import random

import pytest

from stratac.world import (Actuation, GridWorld, RobotBody, WorldError,
                           WorldObject, line_of_sight, load_world, parse_world,
                           supercover_cells)

from conftest import WORLD_DIR


def _tiny_world(**kw) -> GridWorld:
    w = GridWorld(8, 6, **kw)
    for x in range(8):
        w.obstacles.add((x, 0))
        w.obstacles.add((x, 5))
    for y in range(6):
        w.obstacles.add((0, y))
        w.obstacles.add((7, y))
    return w


def _los_oracle(a, b, obstacles) -> bool:
    """Independent line-of-sight check: a cell blocks iff the segment between
    cell centers intersects its closed unit square (slab method)."""
    (x0, y0), (x1, y1) = a, b
    dx, dy = x1 - x0, y1 - y0
    for (cx, cy) in obstacles:
        if (cx, cy) in (a, b):
            continue
        tmin, tmax = 0.0, 1.0
        ok = True
        for start, delta, lo, hi in ((x0, dx, cx - 0.5, cx + 0.5),
                                     (y0, dy, cy - 0.5, cy + 0.5)):
            if delta == 0:
                if not (lo <= start <= hi):
                    ok = False
                    break
            else:
                t1, t2 = (lo - start) / delta, (hi - start) / delta
                if t1 > t2:
                    t1, t2 = t2, t1
                tmin, tmax = max(tmin, t1), min(tmax, t2)
                if tmin > tmax:
                    ok = False
                    break
        if ok:
            return False
    return True


class TestStep:
    def test_ugv_blocked_by_obstacle(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 1)))
        events = w.step({"ugv-1": Actuation("MOVE", direction="N")})
        assert events[0].kind == "BLOCKED"
        assert w.robots["ugv-1"].position == (1, 1)

    def test_drone_traverses_over_obstacles(self):
        w = _tiny_world()
        w.obstacles.add((2, 2))
        w.add_robot(RobotBody("drone-1", "DRONE", (1, 2)))
        events = w.step({"drone-1": Actuation("MOVE", direction="E")})
        assert events[0].kind == "MOVED"
        assert w.robots["drone-1"].position == (2, 2)

    def test_pickup_adjacent_and_carry(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (2, 2)))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(3, 2)))
        events = w.step({"ugv-1": Actuation("PICKUP", object_id="t-1")})
        assert events[0].kind == "PICKED"
        w.step({"ugv-1": Actuation("MOVE", direction="S")})
        assert w.objects["t-1"].position == w.robots["ugv-1"].position == (2, 3)

    def test_pickup_out_of_reach_rejected_without_state_change(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 1)))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(5, 4)))
        events = w.step({"ugv-1": Actuation("PICKUP", object_id="t-1")})
        assert events[0].kind == "REJECTED"
        assert w.objects["t-1"].held_by is None
        assert w.robots["ugv-1"].holding is None

    def test_drop_places_object(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (2, 2)))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(2, 2)))
        w.step({"ugv-1": Actuation("PICKUP", object_id="t-1")})
        events = w.step({"ugv-1": Actuation("DROP", object_id="t-1", cell=(3, 2))})
        assert events[0].kind == "DROPPED"
        assert w.objects["t-1"].position == (3, 2)
        assert w.objects["t-1"].held_by is None

    def test_arm_cannot_move(self):
        w = _tiny_world()
        w.add_robot(RobotBody("arm-1", "ARM", (4, 2)))
        events = w.step({"arm-1": Actuation("MOVE", direction="E")})
        assert events[0].kind == "REJECTED"

    def test_determinism_10k_ticks_with_periodic_sense_oracle(self):
        logs = []
        for _ in range(2):
            w = _tiny_world(seed=42)
            w.add_robot(RobotBody("a-ugv", "UGV", (1, 1)))
            w.add_robot(RobotBody("b-drone", "DRONE", (6, 4)))
            w.add_object(WorldObject("k-1", "KEY", position=(3, 3)))
            rng = random.Random(99)
            lines = []
            for tick in range(10000):
                acts = {}
                for rid in ("a-ugv", "b-drone"):
                    roll = rng.random()
                    if roll < 0.7:
                        acts[rid] = Actuation("MOVE", direction=rng.choice("NESW"))
                    elif roll < 0.8:
                        acts[rid] = Actuation("PICKUP", object_id="k-1")
                    elif roll < 0.9 and w.robots[rid].holding:
                        acts[rid] = Actuation("DROP", object_id="k-1")
                for e in w.step(acts):
                    lines.append(e.line())
                if tick % 100 == 0:
                    self._check_sense_against_oracle(w)
            logs.append("\n".join(lines))
        assert logs[0] == logs[1]

    @staticmethod
    def _check_sense_against_oracle(w):
        for rid, robot in w.robots.items():
            got = {d.object_id for d in w.sense(rid).detections}
            expected = set()
            for oid, obj in w.objects.items():
                if obj.held_by not in (None, rid):
                    continue
                dx = obj.position[0] - robot.position[0]
                dy = obj.position[1] - robot.position[1]
                if dx * dx + dy * dy > robot.sensor_radius ** 2:
                    continue
                if robot.kind == "DRONE" or _los_oracle(robot.position, obj.position,
                                                        w.obstacles):
                    expected.add(oid)
            assert got == expected, (rid, got, expected)

    def test_event_order_is_robot_id_order(self):
        w = _tiny_world()
        w.add_robot(RobotBody("z-ugv", "UGV", (1, 1)))
        w.add_robot(RobotBody("a-ugv", "UGV", (5, 4)))
        events = w.step({"z-ugv": Actuation("MOVE", direction="E"),
                         "a-ugv": Actuation("MOVE", direction="W")})
        assert [e.robot for e in events] == ["a-ugv", "z-ugv"]

    def test_conservation_object_count_and_held_position(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (2, 2)))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(2, 2)))
        before = set(w.objects)
        w.step({"ugv-1": Actuation("PICKUP", object_id="t-1")})
        rng = random.Random(1)
        for _ in range(50):
            w.step({"ugv-1": Actuation("MOVE", direction=rng.choice("NESW"))})
            assert set(w.objects) == before
            assert w.objects["t-1"].position == w.robots["ugv-1"].position


class TestSense:
    def test_detects_with_label_code(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (2, 2), sensor_radius=3))
        w.add_object(WorldObject("t-1", "THERMOSTAT", {"age": 0.05}, "T-204", (4, 2)))
        result = w.sense("ugv-1")
        assert [d.label_code for d in result.detections] == ["T-204"]

    def test_object_behind_obstacle_hidden_from_ugv(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 2), sensor_radius=4))
        w.obstacles.add((2, 2))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(3, 2)))
        assert w.sense("ugv-1").detections == []

    def test_drone_sees_over_obstacles(self):
        w = _tiny_world()
        w.add_robot(RobotBody("drone-1", "DRONE", (1, 2), sensor_radius=4))
        w.obstacles.add((2, 2))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(3, 2)))
        assert len(w.sense("drone-1").detections) == 1

    def test_empty_radius_empty_list(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 1), sensor_radius=2))
        w.add_object(WorldObject("t-1", "THERMOSTAT", position=(6, 4)))
        assert w.sense("ugv-1").detections == []

    def test_sense_agrees_with_brute_force_oracle(self):
        rng = random.Random(17)
        for trial in range(20):
            w = GridWorld(12, 12)
            for _ in range(14):
                w.obstacles.add((rng.randrange(12), rng.randrange(12)))
            pos = (rng.randrange(12), rng.randrange(12))
            while pos in w.obstacles:
                pos = (rng.randrange(12), rng.randrange(12))
            w.add_robot(RobotBody("ugv-1", "UGV", pos, sensor_radius=5))
            for i in range(6):
                w.add_object(WorldObject(f"o-{i}", "KEY",
                                         position=(rng.randrange(12), rng.randrange(12))))
            got = {d.object_id for d in w.sense("ugv-1").detections}
            expected = set()
            for oid, obj in w.objects.items():
                dx = obj.position[0] - pos[0]
                dy = obj.position[1] - pos[1]
                if dx * dx + dy * dy <= 25 and _los_oracle(pos, obj.position, w.obstacles):
                    expected.add(oid)
            assert got == expected, f"trial {trial}"


class TestLineOfSight:
    def test_supercover_symmetric(self):
        rng = random.Random(3)
        for _ in range(200):
            a = (rng.randrange(10), rng.randrange(10))
            b = (rng.randrange(10), rng.randrange(10))
            assert set(supercover_cells(a, b)) == set(supercover_cells(b, a))

    def test_matches_segment_box_oracle(self):
        rng = random.Random(31)
        for _ in range(300):
            a = (rng.randrange(9), rng.randrange(9))
            b = (rng.randrange(9), rng.randrange(9))
            obstacles = {(rng.randrange(9), rng.randrange(9)) for _ in range(8)}
            assert line_of_sight(a, b, obstacles) == _los_oracle(a, b, obstacles), \
                (a, b, sorted(obstacles))


class TestInject:
    def test_add_obstacle_applies_before_next_tick(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 1)))
        w.inject("add-obstacle", (2, 1))
        events = w.step({"ugv-1": Actuation("MOVE", direction="E")})
        assert [e.kind for e in events] == ["INJECT", "BLOCKED"]

    def test_move_object(self):
        w = _tiny_world()
        w.add_object(WorldObject("k-1", "KEY", position=(3, 3)))
        w.inject("move-object", "k-1", (1, 1))
        w.step({})
        assert w.objects["k-1"].position == (1, 1)

    def test_drain_battery(self):
        w = _tiny_world()
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 1)))
        w.inject("drain-battery", "ugv-1", 0.05)
        w.step({})
        assert w.robots["ugv-1"].battery == 0.05

    def test_out_of_bounds_rejected(self):
        w = _tiny_world()
        with pytest.raises(WorldError):
            w.inject("add-obstacle", (99, 99))


class TestWorldFiles:
    def test_ship_world_loads_with_rooms_and_spare(self):
        w = load_world(WORLD_DIR / "ship.world")
        assert set(w.rooms) == {"engine-room", "corridor", "stores"}
        spare = w.objects["thermostat-spare"]
        assert spare.type == "THERMOSTAT" and spare.label_code == "T-204"
        assert w.room_of(spare.position) == "stores"
        assert "ugv-1" in w.robots and "daniel" in w.humans

    def test_apartment_world_loads(self):
        w = load_world(WORLD_DIR / "apartment.world")
        assert set(w.rooms) == {"entryway", "living-room", "bedroom"}
        assert w.room_of(w.objects["keys-danny"].position) == "entryway"
        assert w.robots["drone-1"].kind == "DRONE"

    def test_rooms_disjoint_enforced(self):
        text = ("map\n####\n#..#\n####\nendmap\n"
                "room a 1 1 2 1\nroom b 2 1 2 1\n")
        with pytest.raises(WorldError):
            parse_world(text)

    def test_bad_map_character(self):
        with pytest.raises(WorldError):
            parse_world("map\n#X#\nendmap\n")
