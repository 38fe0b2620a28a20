"""The bidirectional strategic/tactical interface.

Three message flows per robot: commands down (single producer), status
reports and percept packets up (multiple producers).  Delivery is FIFO
per direction with sequence stamps; terminal statuses are enforced
exactly once per command; channels are bounded, and overflow surfaces
as a warning instead of blocking.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .frames import (Literal, MeaningRep, MRKind, Provenance, Scalar,
                     SituationModel)

COMMAND_VERBS = ("SEARCH", "HOLD", "PICKUP", "RETURN", "DROP", "MOVE-TO", "STANDBY")
TERMINAL_STATUSES = ("DONE", "FAILED", "SUPERSEDED")
STATUSES = ("ACCEPTED", "RUNNING", "HALTED-CANDIDATE") + TERMINAL_STATUSES


class BridgeError(Exception):
    pass


@dataclass(frozen=True)
class CommandMessage:
    id: int
    verb: str
    params: dict
    issued_tick: int

    def to_json(self) -> dict:
        return {"id": self.id, "verb": self.verb, "params": self.params,
                "issued_tick": self.issued_tick}


@dataclass(frozen=True)
class GroundingVerdict:
    command_id: int
    verdict: str          # "CONFIRMED" | "REJECTED"
    label_code: str = ""

    def to_json(self) -> dict:
        return {"command_id": self.command_id, "verdict": self.verdict,
                "label_code": self.label_code}


@dataclass(frozen=True)
class StatusReport:
    command_id: int
    status: str
    payload: dict = field(default_factory=dict)
    tick: int = 0
    seq: int = 0

    def to_json(self) -> dict:
        return {"command_id": self.command_id, "status": self.status,
                "payload": self.payload, "tick": self.tick, "seq": self.seq}


@dataclass(frozen=True)
class PerceptPacket:
    tick: int
    priority: float
    items: tuple
    robot_state: dict = field(default_factory=dict)
    seq: int = 0

    def to_json(self) -> dict:
        return {"tick": self.tick, "priority": self.priority,
                "items": list(self.items), "robot_state": self.robot_state,
                "seq": self.seq}


@dataclass(frozen=True)
class Receipt:
    seq: int
    accepted: bool


class Channel:
    """Bounded FIFO with sequence stamps.  Never blocks: overflow drops the
    message and fires the warning hook."""

    def __init__(self, capacity: int = 1024, on_overflow: Optional[Callable] = None):
        self.capacity = capacity
        self._queue: deque = deque()
        self._next_seq = 0
        self._on_overflow = on_overflow
        self.closed = False

    def send(self, message) -> Receipt:
        if self.closed:
            raise BridgeError("channel closed")
        seq = self._next_seq
        self._next_seq += 1
        if len(self._queue) >= self.capacity:
            if self._on_overflow:
                self._on_overflow(message)
            return Receipt(seq, accepted=False)
        self._queue.append((seq, message))
        return Receipt(seq, accepted=True)

    def send_stamped(self, factory) -> object:
        """Send factory(seq); returns the stamped message (or None on overflow)."""
        if self.closed:
            raise BridgeError("channel closed")
        seq = self._next_seq
        self._next_seq += 1
        message = factory(seq)
        if len(self._queue) >= self.capacity:
            if self._on_overflow:
                self._on_overflow(message)
            return None
        self._queue.append((seq, message))
        return message

    def drain(self) -> list:
        if self.closed:
            raise BridgeError("channel closed")
        out = [m for _, m in self._queue]
        self._queue.clear()
        return out


class Bridge:
    """One strategic/tactical channel pair for a single robot."""

    def __init__(self, robot_id: str, capacity: int = 1024,
                 on_warning: Optional[Callable[[str], None]] = None):
        self.robot_id = robot_id
        warn = (lambda m: on_warning(f"bridge overflow for {robot_id}: {m}")) \
            if on_warning else None
        self.commands = Channel(capacity, warn)
        self.statuses = Channel(capacity, warn)
        self.percepts = Channel(capacity, warn)
        self._next_command_id = 1
        self._terminated: set[int] = set()
        self._issued: set[int] = set()
        self.command_log: list[CommandMessage] = []
        self.status_log: list[StatusReport] = []

    # -- strategic side ------------------------------------------------------

    def send_command(self, verb: str, params: dict, tick: int) -> CommandMessage:
        if verb not in COMMAND_VERBS:
            raise BridgeError(f"unknown command verb {verb}")
        cmd = CommandMessage(self._next_command_id, verb, params, tick)
        self._next_command_id += 1
        self._issued.add(cmd.id)
        self.command_log.append(cmd)
        self.commands.send(cmd)
        return cmd

    def send_verdict(self, verdict: GroundingVerdict) -> None:
        self.commands.send(verdict)

    def drain_statuses(self) -> list[StatusReport]:
        return self.statuses.drain()

    def drain_percepts(self) -> list[PerceptPacket]:
        """Percept packets ordered by (priority desc, tick, seq)."""
        packets = self.percepts.drain()
        return sorted(packets, key=lambda p: (-p.priority, p.tick, p.seq))

    # -- tactical side ---------------------------------------------------------

    def drain_commands(self) -> list:
        return self.commands.drain()

    def report(self, command_id: int, status: str, payload: Optional[dict] = None,
               tick: int = 0) -> StatusReport:
        if status not in STATUSES:
            raise BridgeError(f"unknown status {status}")
        if command_id in self._terminated:
            raise BridgeError(f"command {command_id} already has a terminal status")
        if status in TERMINAL_STATUSES:
            self._terminated.add(command_id)
        report = self.statuses.send_stamped(
            lambda seq: StatusReport(command_id, status, payload or {}, tick, seq))
        if report is None:
            report = StatusReport(command_id, status, payload or {}, tick, -1)
        self.status_log.append(report)
        return report

    def send_percepts(self, packet: PerceptPacket) -> Optional[PerceptPacket]:
        return self.percepts.send_stamped(
            lambda seq: PerceptPacket(packet.tick, packet.priority, packet.items,
                                      packet.robot_state, seq))


def detection_to_vmr(detection: dict, situation: SituationModel, author: str,
                     tick: int = 0) -> MeaningRep:
    """Wrap a detection record in a VMR and register it in the situation.

    The label code links the object to its feature record, standing in for
    a machine-readable tag on the physical object.
    """
    concept = detection.get("type", "")
    if situation.ontology is not None and not situation.ontology.has_concept(concept):
        concept = "OBJECT"
    fid = situation.new_instance(concept, Provenance.VMR, tick)
    frame = situation.frame(fid)
    pos = detection.get("position")
    if pos is not None:
        frame.add("position", Literal(f"{pos[0]},{pos[1]}"))
    for prop in sorted(detection.get("features", {})):
        value = detection["features"][prop]
        if isinstance(value, (int, float)):
            frame.add(prop, Scalar(float(value)))
        else:
            frame.add(prop, Literal(str(value)))
    if detection.get("label"):
        frame.add("label-code", Literal(detection["label"]))
    return MeaningRep(MRKind.VMR, fid, {fid: frame},
                      source=f"detection:{detection.get('object_id', '?')}",
                      author=author)
