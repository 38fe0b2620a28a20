import random

import pytest

from stratac.bridge import Bridge
from stratac.tactical import (ActuatorPort, AttentionRule, Blackboard, BTNode,
                              NodeKind, TacticalError, TacticalTask,
                              TickContext, TickStatus, action,
                              condition, coverage_waypoints, dump_tree, fallback,
                              filter_percepts, sequence, tick)
from stratac.world import Actuation, GridWorld, RobotBody, WorldObject


# ---------------------------------------------------------------------------
# independent reference evaluator: a little stack machine over a tree spec,
# deliberately not recursive like the engine under test
# ---------------------------------------------------------------------------

S, F, R = TickStatus.SUCCESS, TickStatus.FAILURE, TickStatus.RUNNING


def reference_eval(spec, leaf_results):
    """spec: ("seq"|"fb", [children]) or ("leaf", leaf_id)."""
    CALL, COMBINE = 0, 1
    stack = [(CALL, spec, None)]
    results = []
    while stack:
        mode, node, state = stack.pop()
        if mode == CALL:
            kind = node[0]
            if kind == "leaf":
                results.append(leaf_results[node[1]])
                continue
            stack.append((COMBINE, node, 0))
        else:
            kind, children = node
            idx = state
            if idx > 0:
                last = results.pop()
                stop = (kind == "seq" and last is not S) or \
                       (kind == "fb" and last is not F)
                if stop or idx == len(children):
                    results.append(last)
                    continue
            elif not children:
                results.append(S if kind == "seq" else F)
                continue
            stack.append((COMBINE, node, idx + 1))
            stack.append((CALL, children[idx], None))
    return results[0]


def random_tree_spec(rng, max_nodes=15):
    counter = [0]
    leaves = []

    def build(budget):
        counter[0] += 1
        if budget <= 1 or rng.random() < 0.4:
            leaf_id = len(leaves)
            leaves.append(leaf_id)
            return ("leaf", leaf_id), 1
        kind = rng.choice(["seq", "fb"])
        n_children = rng.randint(1, 3)
        children = []
        used = 1
        for _ in range(n_children):
            if used >= budget:
                break
            child, size = build(budget - used)
            children.append(child)
            used += size
        if not children:
            leaf_id = len(leaves)
            leaves.append(leaf_id)
            return ("leaf", leaf_id), 1
        return (kind, children), used

    spec, _ = build(max_nodes)
    return spec, leaves


def spec_to_nodes(spec, leaf_results):
    kind = spec[0]
    if kind == "leaf":
        leaf_id = spec[1]
        result = leaf_results[leaf_id]
        if result is R:
            return action(f"leaf-{leaf_id}", lambda ctx, r=result: r)
        if random.Random(leaf_id).random() < 0.5:
            return condition(f"leaf-{leaf_id}", lambda bb, r=result: r is S)
        return action(f"leaf-{leaf_id}", lambda ctx, r=result: r)
    ctor = sequence if kind == "seq" else fallback
    return ctor(kind, *[spec_to_nodes(c, leaf_results) for c in spec[1]])


class TestTickSemantics:
    def test_single_success_action(self):
        tree = sequence("root", action("ok", lambda ctx: S))
        assert tick(tree, TickContext(Blackboard(), ActuatorPort("r"))) is S

    def test_sequence_fails_on_first_failure(self):
        calls = []
        tree = sequence("root",
                        action("a", lambda ctx: calls.append("a") or S),
                        action("b", lambda ctx: calls.append("b") or F),
                        action("c", lambda ctx: calls.append("c") or S))
        assert tick(tree, TickContext(Blackboard(), ActuatorPort("r"))) is F
        assert calls == ["a", "b"]

    def test_fallback_succeeds_on_first_success(self):
        calls = []
        tree = fallback("root",
                        action("a", lambda ctx: calls.append("a") or F),
                        action("b", lambda ctx: calls.append("b") or S),
                        action("c", lambda ctx: calls.append("c") or S))
        assert tick(tree, TickContext(Blackboard(), ActuatorPort("r"))) is S
        assert calls == ["a", "b"]

    def test_running_propagates(self):
        tree = sequence("root", action("busy", lambda ctx: R))
        assert tick(tree, TickContext(Blackboard(), ActuatorPort("r"))) is R

    def test_left_siblings_reevaluated_each_tick(self):
        flag = {"obstacle": False}
        log = []
        tree = fallback(
            "root",
            sequence("safety",
                     condition("obstacle?", lambda bb: flag["obstacle"]),
                     action("brake", lambda ctx: log.append("brake") or S)),
            action("work", lambda ctx: log.append("work") or R))
        ctx = TickContext(Blackboard(), ActuatorPort("r"))
        assert tick(tree, ctx) is R
        flag["obstacle"] = True
        assert tick(tree, ctx) is S
        assert log == ["work", "brake"]

    def test_leaves_cannot_have_children(self):
        with pytest.raises(TacticalError):
            BTNode(NodeKind.ACTION, "bad", [action("x", lambda ctx: S)],
                   fn=lambda ctx: S)

    def test_random_trees_match_reference_evaluator(self):
        rng = random.Random(12)
        for trial in range(300):
            spec, leaves = random_tree_spec(rng)
            leaf_results = {l: rng.choice([S, F, R]) for l in leaves}
            tree = spec_to_nodes(spec, leaf_results)
            got = tick(tree, TickContext(Blackboard(), ActuatorPort("r")))
            assert got is reference_eval(spec, leaf_results), f"trial {trial}"

    def test_tick_determinism_same_script_same_result(self):
        rng = random.Random(77)
        spec, leaves = random_tree_spec(rng)
        leaf_results = {l: rng.choice([S, F, R]) for l in leaves}
        results = {tick(spec_to_nodes(spec, leaf_results),
                        TickContext(Blackboard(), ActuatorPort("r")))
                   for _ in range(5)}
        assert len(results) == 1


class TestActuatorPort:
    def test_second_emit_rejected(self):
        port = ActuatorPort("r")
        port.emit(Actuation("MOVE", direction="N"))
        with pytest.raises(TacticalError):
            port.emit(Actuation("MOVE", direction="S"))


class TestSafetyTemplate:
    def _sections(self, tree):
        return [child.name for child in tree.children]

    def test_four_sections_in_order(self):
        task = _make_task()
        assert self._sections(task.tree) == [
            "collision-avoidance", "battery-floor", "action-command", "exploration"]

    def test_empty_needs_elides_section(self):
        task = _make_task(needs=())
        assert self._sections(task.tree) == [
            "collision-avoidance", "action-command", "exploration"]

    def test_template_order_over_random_capability_sets(self):
        rng = random.Random(5)
        all_caps = ["MOVE-TO", "SEARCH", "PICKUP", "DROP", "RETURN", "SCAN",
                    "HOVER", "EXPLORE", "STANDBY"]
        expected_order = ["collision-avoidance", "robot-needs", "battery-floor",
                          "action-command", "exploration"]
        for trial in range(100):
            caps = tuple(rng.sample(all_caps, rng.randint(1, len(all_caps))))
            needs = ("battery",) if rng.random() < 0.5 else ()
            task = _make_task(caps=caps, needs=needs)
            names = self._sections(task.tree)
            ranks = [expected_order.index(n) for n in names]
            assert ranks == sorted(ranks), f"trial {trial}: {names}"
            assert names[0] == "collision-avoidance"
            assert names[-1] == "exploration"

    def test_dump_tree_is_indented_text(self):
        task = _make_task()
        text = dump_tree(task.tree)
        assert text.splitlines()[0].startswith("FALLBACK root")
        assert any(line.startswith("  SEQUENCE collision-avoidance")
                   for line in text.splitlines())


def _make_task(caps=("MOVE-TO", "SEARCH", "PICKUP", "DROP", "RETURN", "STANDBY"),
               needs=("battery",), kind="UGV", rooms=None, bounds=(8, 6),
               station=(1, 1), obstacles=None):
    bridge = Bridge("ugv-1")
    task = TacticalTask("ugv-1", kind, caps, 3,
                        set(obstacles or _border_cells(bounds)),
                        rooms or {}, bounds, station, bridge, needs=needs)
    return task


def _border_cells(bounds):
    w, h = bounds
    cells = set()
    for x in range(w):
        cells |= {(x, 0), (x, h - 1)}
    for y in range(h):
        cells |= {(0, y), (w - 1, y)}
    return cells


def _sense(task, world: GridWorld):
    return world.sense(task.robot_id)


def _world_for(task_station=(1, 1)):
    w = GridWorld(8, 6)
    for c in _border_cells((8, 6)):
        w.obstacles.add(c)
    w.add_robot(RobotBody("ugv-1", "UGV", task_station, sensor_radius=3))
    return w


class TestCommands:
    def test_move_to_completes(self):
        task = _make_task()
        world = _world_for()
        task.bridge.send_command("MOVE-TO", {"waypoint": [4, 2]}, 0)
        for t in range(30):
            act = task.on_tick(_sense(task, world), t)
            if act:
                world.step({"ugv-1": act})
            else:
                world.step({})
            statuses = task.bridge.drain_statuses()
            if any(s.status == "DONE" for s in statuses):
                break
        assert world.robots["ugv-1"].position == (4, 2)

    def test_unsupported_verb_nack_with_capabilities(self):
        task = _make_task(caps=("MOVE-TO",), kind="DRONE")
        world = _world_for()
        task.bridge.send_command("PICKUP", {"object-id": "x", "position": [2, 2]}, 0)
        task.on_tick(_sense(task, world), 0)
        reports = task.bridge.drain_statuses()
        assert reports[0].status == "FAILED"
        assert reports[0].payload["reason"] == "unsupported-verb"
        assert "MOVE-TO" in reports[0].payload["capabilities"]

    def test_new_command_supersedes_before_accept(self):
        task = _make_task()
        world = _world_for()
        first = task.bridge.send_command("MOVE-TO", {"waypoint": [4, 2]}, 0)
        task.on_tick(_sense(task, world), 0)
        second = task.bridge.send_command("DROP", {"object-id": "t"}, 1)
        task.on_tick(_sense(task, world), 1)
        flow = [(s.command_id, s.status) for s in task.bridge.drain_statuses()]
        assert (first.id, "SUPERSEDED") in flow
        assert (second.id, "ACCEPTED") in flow
        assert flow.index((first.id, "SUPERSEDED")) < flow.index((second.id, "ACCEPTED"))

    def test_drop_unpacks_slots(self):
        task = _make_task()
        cmd = task.bridge.send_command("DROP", {"object-id": "key-1", "near": [2, 2]}, 0)
        task.apply_command(cmd)
        assert task.bb.get("cmd-verb") == "DROP"
        assert task.bb.get("cmd-object-id") == "key-1"
        assert task.bb.get("cmd-waypoint") == (2, 2)
        assert task.bb.get("command-active") is True

    def test_command_unpacking_all_or_nothing(self):
        task = _make_task()
        world = _world_for()
        task.bridge.send_command("SEARCH", {"rooms": ["nowhere"]}, 0)  # missing types
        task.on_tick(_sense(task, world), 0)
        reports = task.bridge.drain_statuses()
        assert reports[0].status == "FAILED"
        assert task.bb.get("cmd-verb") is None
        assert task.bb.get("search-rooms") is None


class TestSafetyPreemption:
    def test_obstacle_flag_preempts_running_move(self):
        task = _make_task()
        world = _world_for()
        task.bridge.send_command("MOVE-TO", {"waypoint": [6, 4]}, 0)
        act = task.on_tick(_sense(task, world), 0)
        assert act is not None and act.verb == "MOVE"
        world.step({"ugv-1": act})
        world.inject("add-obstacle", (3, 2))
        world.step({})
        act = task.on_tick(_sense(task, world), 2)
        assert act is None  # brake tick: no actuation while the flag holds
        act = task.on_tick(_sense(task, world), 3)
        assert act is not None  # replanned next tick

    def test_randomized_injections_never_move_under_flag(self):
        rng = random.Random(41)
        for trial in range(40):
            task = _make_task()
            world = _world_for()
            task.bridge.send_command("MOVE-TO", {"waypoint": [6, 4]}, 0)
            for t in range(25):
                if rng.random() < 0.3:
                    cell = (rng.randint(1, 6), rng.randint(1, 4))
                    if cell != world.robots["ugv-1"].position:
                        world.inject("add-obstacle", cell)
                        world.step({})
                # on_tick raises TacticalError if a MOVE escapes under the flag
                act = task.on_tick(_sense(task, world), t)
                world.step({"ugv-1": act} if act else {})


class TestSearch:
    def _searching_task(self, objects, rooms=None):
        w = GridWorld(10, 8)
        for x in range(10):
            w.obstacles |= {(x, 0), (x, 7)}
        for y in range(8):
            w.obstacles |= {(0, y), (9, y)}
        rooms = rooms or {"store": [(x, y) for x in range(5, 9) for y in range(1, 7)]}
        for name, cells in rooms.items():
            w.add_room(name, cells)
        w.add_robot(RobotBody("ugv-1", "UGV", (1, 1), sensor_radius=2))
        for obj in objects:
            w.add_object(obj)
        task = TacticalTask("ugv-1", "UGV",
                            ("MOVE-TO", "SEARCH", "PICKUP", "DROP", "RETURN", "STANDBY"),
                            2, set(w.obstacles), {n: list(c) for n, c in w.rooms.items()},
                            (10, 8), (1, 1), Bridge("ugv-1"))
        return task, w

    def _run(self, task, world, ticks=200):
        reports = []
        for t in range(ticks):
            act = task.on_tick(world.sense("ugv-1"), t)
            world.step({"ugv-1": act} if act else {})
            reports.extend(task.bridge.drain_statuses())
            if any(r.status in ("DONE", "FAILED") for r in reports):
                break
        return reports

    def test_halts_on_type_match(self):
        task, world = self._searching_task(
            [WorldObject("t-1", "THERMOSTAT", {"age": 0.05}, "T-204", (7, 3))])
        task.bridge.send_command("SEARCH", {"rooms": ["store"],
                                            "types": ["THERMOSTAT"]}, 0)
        reports = self._run(task, world)
        halted = [r for r in reports if r.status == "HALTED-CANDIDATE"]
        assert len(halted) == 1
        assert halted[0].payload["candidate"]["label"] == "T-204"

    def test_exhausted_after_exactly_queue_visits(self):
        task, world = self._searching_task([])
        task.bridge.send_command("SEARCH", {"rooms": ["store"],
                                            "types": ["THERMOSTAT"]}, 0)
        task.on_tick(world.sense("ugv-1"), 0)
        queue_len = len(task.bb.get("search-queue"))
        reports = self._run(task, world)
        done = [r for r in reports if r.status == "DONE"]
        assert done and done[0].payload["outcome"] == "EXHAUSTED"
        assert done[0].payload["visited"] == queue_len

    def test_rejected_candidate_resumes_and_halts_on_second(self):
        task, world = self._searching_task(
            [WorldObject("t-1", "THERMOSTAT", {"age": 0.9}, "T-101", (6, 2)),
             WorldObject("t-2", "THERMOSTAT", {"age": 0.05}, "T-204", (8, 5))])
        cmd = task.bridge.send_command("SEARCH", {"rooms": ["store"],
                                                  "types": ["THERMOSTAT"]}, 0)
        from stratac.bridge import GroundingVerdict
        halted_labels = []
        for t in range(300):
            act = task.on_tick(world.sense("ugv-1"), t)
            world.step({"ugv-1": act} if act else {})
            for r in task.bridge.drain_statuses():
                if r.status == "HALTED-CANDIDATE":
                    label = r.payload["candidate"]["label"]
                    halted_labels.append(label)
                    verdict = "CONFIRMED" if label == "T-204" else "REJECTED"
                    task.bridge.send_verdict(GroundingVerdict(cmd.id, verdict, label))
                if r.status == "DONE":
                    assert r.payload["outcome"] == "FOUND"
                    assert halted_labels == ["T-101", "T-204"]
                    return
        pytest.fail("search never confirmed the second candidate")


class TestCoverageWaypoints:
    def test_every_cell_covered(self):
        rng = random.Random(9)
        for _ in range(50):
            cells = [(x, y) for x in range(rng.randint(2, 9))
                     for y in range(rng.randint(2, 9))]
            radius = rng.randint(1, 4)
            wps = coverage_waypoints(cells, radius, (0, 0))
            r2 = radius * radius
            for c in cells:
                assert any((c[0] - w[0]) ** 2 + (c[1] - w[1]) ** 2 <= r2 for w in wps)

    def test_nearest_first_ordering(self):
        cells = [(x, y) for x in range(6) for y in range(6)]
        wps = coverage_waypoints(cells, 2, (0, 0))
        dists = [abs(w[0]) + abs(w[1]) for w in wps]
        assert dists == sorted(dists)


class TestAttention:
    def test_search_target_max_priority(self):
        scored = filter_percepts(
            [{"object_id": "t-1", "type": "THERMOSTAT", "position": [1, 1],
              "features": {}, "label": "T-1"}],
            [], ("THERMOSTAT",), (AttentionRule("search-target", 1.0),
                                  AttentionRule("object", 0.2)))
        assert scored[0][0] == 1.0

    def test_static_furniture_dropped(self):
        scored = filter_percepts(
            [{"object_id": "s-1", "type": "SHELF", "position": [1, 1],
              "features": {}, "label": ""}],
            [], ("THERMOSTAT",), (AttentionRule("search-target", 1.0),
                                  AttentionRule("object", 0.2)))
        assert scored == []

    def test_matches_rule_engine_oracle(self):
        rng = random.Random(23)
        rules = (AttentionRule("search-target", 1.0), AttentionRule("obstacle", 1.0),
                 AttentionRule("human", 0.6), AttentionRule("object", 0.2))
        types = ["THERMOSTAT", "KEY", "SHELF", "TABLE", "PIPE"]
        detections = []
        for i in range(100):
            kind = rng.choice(["object", "human"])
            det = {"object_id": f"o{i}", "type": rng.choice(types),
                   "position": [rng.randint(0, 9), rng.randint(0, 9)],
                   "features": {}, "label": f"L{i}"}
            if kind == "human":
                det["kind"] = "human"
            detections.append(det)
        targets = ("THERMOSTAT", "KEY")
        got = filter_percepts(detections, [], targets, rules)
        # oracle: re-apply the rule table independently
        expected = set()
        for det in detections:
            if det.get("kind") == "human":
                pri = 0.6
            elif det["type"] in targets:
                pri = 1.0
            else:
                pri = 0.2
            if pri >= 0.5:
                expected.add((pri, det["object_id"]))
        assert {(p, d["object_id"]) for p, d in got} == expected


class TestNeeds:
    def test_battery_drain_routes_to_recharge(self):
        world = _world_for()
        world.battery_drain = 0.0
        task = _make_task()
        task.bridge.send_command("MOVE-TO", {"waypoint": [6, 4]}, 0)
        for t in range(3):
            act = task.on_tick(_sense(task, world), t)
            world.step({"ugv-1": act} if act else {})
        away = world.robots["ugv-1"].position
        assert away != (1, 1)
        world.inject("drain-battery", "ugv-1", 0.05)
        world.step({})
        recharged = False
        for t in range(3, 40):
            act = task.on_tick(_sense(task, world), t)
            events = world.step({"ugv-1": act} if act else {})
            if any(e.kind == "RECHARGED" for e in events):
                recharged = True
                break
        assert recharged
        assert world.robots["ugv-1"].position == (1, 1)   # back at its station
        assert world.robots["ugv-1"].battery == 1.0
        task.on_tick(_sense(task, world), 40)   # flag clears on the next tick
        assert task.bb.get("battery-low") is False
