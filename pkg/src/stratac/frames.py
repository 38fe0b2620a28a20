"""Frame graphs and the stores built from them.

Every piece of knowledge an agent handles -- interpreted utterances,
visual detections, content to be verbalized, plans, memories -- is a
graph of frames: instanced concepts with property slots.  This module
defines the frame atoms, the three meaning-representation kinds built
from them, the per-agent situation model and episodic memory, and the
two serializations (an aligned text block form and a JSON form) that
round-trip losslessly.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union


class FrameError(Exception):
    """Raised for malformed frames, unknown concepts, or bad fillers."""


class Provenance(str, Enum):
    TMR = "TMR"
    VMR = "VMR"
    GMR = "GMR"
    PLAN = "PLAN"
    MEMORY = "MEMORY"
    INFERENCE = "INFERENCE"


class MRKind(str, Enum):
    TMR = "TMR"
    VMR = "VMR"
    GMR = "GMR"


_FRAME_ID_RE = re.compile(r"^([A-Z][A-Z0-9-]*)\.(\d+)$")


@dataclass(frozen=True, order=True)
class FrameId:
    """An instanced concept, rendered "CONCEPT.n"."""

    concept: str
    ordinal: int

    def __post_init__(self) -> None:
        if self.ordinal < 1:
            raise FrameError(f"ordinal must be positive: {self.concept}.{self.ordinal}")

    def __str__(self) -> str:
        return f"{self.concept}.{self.ordinal}"

    @classmethod
    def parse(cls, text: str) -> "FrameId":
        m = _FRAME_ID_RE.match(text)
        if not m:
            raise FrameError(f"not a frame id: {text!r}")
        return cls(m.group(1), int(m.group(2)))


@dataclass(frozen=True)
class NumericRange:
    """A numeric interval; either bound may be absent (unbounded).

    Persisted text notation: "lo<>hi" for two-sided ranges (both bounds
    exclusive), "<x" / ">x" for one-sided exclusive, "<=x" / ">=x" for
    one-sided inclusive.  Inclusive two-sided bounds are marked with
    "=" next to the bound: "lo=<>hi", "lo<>=hi".
    """

    lo: Optional[float] = None
    hi: Optional[float] = None
    lo_inclusive: bool = False
    hi_inclusive: bool = False

    def __post_init__(self) -> None:
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise FrameError(f"range lo > hi: {self.lo} > {self.hi}")

    def contains(self, value: float) -> bool:
        if self.lo is not None:
            if value < self.lo or (value == self.lo and not self.lo_inclusive):
                return False
        if self.hi is not None:
            if value > self.hi or (value == self.hi and not self.hi_inclusive):
                return False
        return True

    def render(self) -> str:
        if self.lo is not None and self.hi is not None:
            lo_mark = "=" if self.lo_inclusive else ""
            hi_mark = "=" if self.hi_inclusive else ""
            return f"{_num(self.lo)}{lo_mark}<>{hi_mark}{_num(self.hi)}"
        if self.hi is not None:
            op = "<=" if self.hi_inclusive else "<"
            return f"{op}{_num(self.hi)}"
        if self.lo is not None:
            op = ">=" if self.lo_inclusive else ">"
            return f"{op}{_num(self.lo)}"
        return "<>"

    @classmethod
    def parse(cls, text: str) -> "NumericRange":
        text = text.strip()
        if "<>" in text:
            left, right = text.split("<>", 1)
            lo_inclusive = left.endswith("=")
            hi_inclusive = right.startswith("=")
            left = left.rstrip("=")
            right = right.lstrip("=")
            lo = float(left) if left else None
            hi = float(right) if right else None
            return cls(lo, hi, lo_inclusive and lo is not None, hi_inclusive and hi is not None)
        if text.startswith("<="):
            return cls(hi=float(text[2:]), hi_inclusive=True)
        if text.startswith(">="):
            return cls(lo=float(text[2:]), lo_inclusive=True)
        if text.startswith("<"):
            return cls(hi=float(text[1:]))
        if text.startswith(">"):
            return cls(lo=float(text[1:]))
        raise FrameError(f"not a range: {text!r}")


def _num(x: float) -> str:
    """Render a float without a trailing .0 for whole numbers."""
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class FrameRef:
    target: FrameId


@dataclass(frozen=True)
class ConceptRef:
    concept: str


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Scalar:
    value: float


@dataclass(frozen=True)
class Corefer:
    target: FrameId


SlotFiller = Union[FrameRef, ConceptRef, Literal, Scalar, NumericRange, Corefer]

_BARE_LITERAL_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")


def render_filler(filler: SlotFiller) -> str:
    if isinstance(filler, FrameRef):
        return f"#{filler.target}"
    if isinstance(filler, ConceptRef):
        return f"@{filler.concept}"
    if isinstance(filler, Corefer):
        return f"->{filler.target}"
    if isinstance(filler, Scalar):
        return _num(filler.value)
    if isinstance(filler, NumericRange):
        return filler.render()
    if isinstance(filler, Literal):
        if _BARE_LITERAL_RE.match(filler.text):
            return filler.text
        return json.dumps(filler.text)
    raise FrameError(f"unknown filler type: {filler!r}")


def parse_filler(text: str) -> SlotFiller:
    text = text.strip()
    if not text:
        raise FrameError("empty filler")
    if text.startswith("#"):
        return FrameRef(FrameId.parse(text[1:]))
    if text.startswith("@"):
        return ConceptRef(text[1:])
    if text.startswith("->"):
        return Corefer(FrameId.parse(text[2:]))
    if text.startswith('"'):
        return Literal(json.loads(text))
    if "<>" in text or text[0] in "<>":
        return NumericRange.parse(text)
    try:
        return Scalar(float(text))
    except ValueError:
        return Literal(text)


@dataclass
class Frame:
    """An instanced concept with property slots."""

    id: FrameId
    slots: dict[str, list[SlotFiller]] = field(default_factory=dict)
    provenance: Provenance = Provenance.INFERENCE
    tick: int = 0

    @property
    def concept(self) -> str:
        return self.id.concept

    def add(self, prop: str, filler: SlotFiller) -> "Frame":
        self.slots.setdefault(prop, []).append(filler)
        return self

    def get(self, prop: str) -> list[SlotFiller]:
        return self.slots.get(prop, [])

    def first(self, prop: str) -> Optional[SlotFiller]:
        fillers = self.slots.get(prop)
        return fillers[0] if fillers else None

    def has(self, prop: str) -> bool:
        return bool(self.slots.get(prop))

    def refs(self) -> Iterator[FrameId]:
        """All frame ids this frame points at (refs and corefs)."""
        for fillers in self.slots.values():
            for f in fillers:
                if isinstance(f, (FrameRef, Corefer)):
                    yield f.target

    def copy(self) -> "Frame":
        return Frame(self.id, {k: list(v) for k, v in self.slots.items()}, self.provenance, self.tick)


@dataclass
class MeaningRep:
    """A closed frame graph of one of the three kinds (TMR/VMR/GMR)."""

    kind: MRKind
    root: FrameId
    frames: dict[FrameId, Frame]
    source: str = ""
    author: str = ""

    def frame(self, fid: FrameId) -> Frame:
        try:
            return self.frames[fid]
        except KeyError:
            raise FrameError(f"frame not in MR: {fid}") from None

    def dangling_refs(self, store: Optional["SituationModel"] = None) -> list[FrameId]:
        """Frame refs reachable from the frame set that resolve nowhere.

        Closure is checked against the MR's own frames plus, when given,
        the situation model.
        """
        missing = []
        for fr in self.frames.values():
            for target in fr.refs():
                if target in self.frames:
                    continue
                if store is not None and store.contains(target):
                    continue
                missing.append(target)
        return missing

    def ordered_frames(self) -> list[Frame]:
        """Root first, then remaining frames in insertion order."""
        out = [self.frames[self.root]] if self.root in self.frames else []
        for fid, fr in self.frames.items():
            if fid != self.root:
                out.append(fr)
        return out


# ---------------------------------------------------------------------------
# text block serialization (the human-readable form)
# ---------------------------------------------------------------------------

def render_frame_block(frame: Frame) -> str:
    lines = [f"#{frame.id}"]
    if frame.slots:
        width = max(len(p) for p in frame.slots)
        for prop, fillers in frame.slots.items():
            for f in fillers:
                lines.append(f" {prop.ljust(width)} {render_filler(f)}")
    return "\n".join(lines)


def render_mr(mr: MeaningRep) -> str:
    return "\n".join(render_frame_block(f) for f in mr.ordered_frames())


def parse_frame_blocks(text: str, provenance: Provenance = Provenance.INFERENCE,
                       tick: int = 0) -> list[Frame]:
    """Parse one or more text frame blocks back into frames."""
    frames: list[Frame] = []
    current: Optional[Frame] = None
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line.strip():
            continue
        if not line.startswith(" ") and line.startswith("#"):
            current = Frame(FrameId.parse(line[1:].strip()), provenance=provenance, tick=tick)
            frames.append(current)
        else:
            if current is None:
                raise FrameError(f"slot line before any frame header: {line!r}")
            parts = line.strip().split(None, 1)
            if len(parts) != 2:
                raise FrameError(f"bad slot line: {line!r}")
            current.add(parts[0], parse_filler(parts[1]))
    return frames


# ---------------------------------------------------------------------------
# JSON serialization (the machine form used on the gateway)
# ---------------------------------------------------------------------------

def filler_to_json(filler: SlotFiller) -> dict:
    if isinstance(filler, FrameRef):
        return {"frame": str(filler.target)}
    if isinstance(filler, ConceptRef):
        return {"concept": filler.concept}
    if isinstance(filler, Corefer):
        return {"corefer": str(filler.target)}
    if isinstance(filler, Scalar):
        return {"value": filler.value}
    if isinstance(filler, Literal):
        return {"text": filler.text}
    if isinstance(filler, NumericRange):
        return {"range": {"lo": filler.lo, "hi": filler.hi,
                          "lo_inclusive": filler.lo_inclusive,
                          "hi_inclusive": filler.hi_inclusive}}
    raise FrameError(f"unknown filler type: {filler!r}")


def filler_from_json(obj: dict) -> SlotFiller:
    if "frame" in obj:
        return FrameRef(FrameId.parse(obj["frame"]))
    if "concept" in obj:
        return ConceptRef(obj["concept"])
    if "corefer" in obj:
        return Corefer(FrameId.parse(obj["corefer"]))
    if "value" in obj:
        return Scalar(float(obj["value"]))
    if "text" in obj:
        return Literal(obj["text"])
    if "range" in obj:
        r = obj["range"]
        return NumericRange(r.get("lo"), r.get("hi"),
                            bool(r.get("lo_inclusive")), bool(r.get("hi_inclusive")))
    raise FrameError(f"unknown filler json: {obj!r}")


def frame_to_json(frame: Frame) -> dict:
    return {
        "id": str(frame.id),
        "provenance": frame.provenance.value,
        "tick": frame.tick,
        "slots": {p: [filler_to_json(f) for f in fs] for p, fs in frame.slots.items()},
    }


def frame_from_json(obj: dict) -> Frame:
    fr = Frame(FrameId.parse(obj["id"]),
               provenance=Provenance(obj.get("provenance", "INFERENCE")),
               tick=int(obj.get("tick", 0)))
    for prop, fillers in obj.get("slots", {}).items():
        for f in fillers:
            fr.add(prop, filler_from_json(f))
    return fr


def mr_to_json(mr: MeaningRep) -> dict:
    return {
        "kind": mr.kind.value,
        "root": str(mr.root),
        "source": mr.source,
        "author": mr.author,
        "frames": [frame_to_json(f) for f in mr.ordered_frames()],
    }


def mr_from_json(obj: dict) -> MeaningRep:
    frames = {}
    for fo in obj["frames"]:
        fr = frame_from_json(fo)
        frames[fr.id] = fr
    return MeaningRep(MRKind(obj["kind"]), FrameId.parse(obj["root"]), frames,
                      obj.get("source", ""), obj.get("author", ""))


# ---------------------------------------------------------------------------
# content equivalence (frame-graph isomorphism ignoring ordinals)
# ---------------------------------------------------------------------------

#: Speech-act wrapper stripped before comparing content: a bare assertion
#: graph and the same graph under a plain INFORM are the same content.
DEFAULT_WRAPPER = "INFORM"


def content_signature(mr: MeaningRep, root: Optional[FrameId] = None,
                      strip_wrapper: bool = True) -> tuple:
    """Canonical, ordinal-free signature of the graph reachable from root.

    Two meaning representations are content-equivalent iff their
    signatures compare equal.  Cycles (coreference back-links) are cut by
    numbering frames in first-visit order.
    """
    root = root or mr.root
    if strip_wrapper and root in mr.frames:
        rf = mr.frames[root]
        if rf.concept == DEFAULT_WRAPPER and rf.has("theme"):
            theme = rf.first("theme")
            if isinstance(theme, FrameRef) and theme.target in mr.frames:
                root = theme.target
    order: dict[FrameId, int] = {}

    def visit(fid: FrameId) -> tuple:
        if fid in order:
            return ("cycle", order[fid])
        if fid not in mr.frames:
            # reference out of the MR (e.g. into the situation model):
            # identified by concept only, ordinals are not content
            return ("ext", fid.concept)
        order[fid] = len(order)
        fr = mr.frames[fid]
        slot_sigs = []
        for prop in sorted(fr.slots):
            if prop == "corefer":
                # a coreference link is a situational binding, not content
                continue
            for f in fr.slots[prop]:
                slot_sigs.append((prop, filler_sig(f)))
        return ("frame", fr.concept, tuple(sorted(slot_sigs)))

    def filler_sig(f: SlotFiller) -> tuple:
        if isinstance(f, FrameRef):
            return ("ref",) + (visit(f.target),)
        if isinstance(f, Corefer):
            return ("coref", f.target.concept)
        if isinstance(f, ConceptRef):
            return ("concept", f.concept)
        if isinstance(f, Scalar):
            return ("value", f.value)
        if isinstance(f, Literal):
            return ("text", f.text)
        if isinstance(f, NumericRange):
            return ("range", f.lo, f.hi, f.lo_inclusive, f.hi_inclusive)
        raise FrameError(f"unknown filler type: {f!r}")

    return visit(root)


def content_equivalent(a: MeaningRep, b: MeaningRep) -> bool:
    return content_signature(a) == content_signature(b)


# ---------------------------------------------------------------------------
# stores
# ---------------------------------------------------------------------------

@dataclass
class CorefResult:
    kind: str  # "BOUND" | "AMBIGUOUS" | "NONE"
    target: Optional[FrameId] = None
    candidates: list[FrameId] = field(default_factory=list)


class SituationModel:
    """Frame store of entities and events in the current task context.

    Owns the per-concept instance counters for one agent's lifetime, so
    every frame the agent mints (situation entities, MR frames, memories)
    gets a dense, monotone ordinal per concept.
    """

    def __init__(self, ontology=None):
        self.ontology = ontology
        self.frames: dict[FrameId, Frame] = {}
        self.coref_links: dict[FrameId, FrameId] = {}
        self._counters: dict[str, int] = {}

    def contains(self, fid: FrameId) -> bool:
        return fid in self.frames

    def frame(self, fid: FrameId) -> Frame:
        try:
            return self.frames[fid]
        except KeyError:
            raise FrameError(f"frame not in situation model: {fid}") from None

    def new_instance(self, concept: str, provenance: Provenance = Provenance.INFERENCE,
                     tick: int = 0) -> FrameId:
        if self.ontology is not None and not self.ontology.has_concept(concept):
            from .ontology import OntologyError
            raise OntologyError(f"unknown concept: {concept}")
        n = self._counters.get(concept, 0) + 1
        self._counters[concept] = n
        fid = FrameId(concept, n)
        self.frames[fid] = Frame(fid, provenance=provenance, tick=tick)
        return fid

    def add_frame(self, frame: Frame) -> None:
        """Register an externally built frame, advancing the counter past it."""
        self.frames[frame.id] = frame
        if frame.id.ordinal > self._counters.get(frame.concept, 0):
            self._counters[frame.concept] = frame.id.ordinal

    def link_coref(self, source: FrameId, target: FrameId) -> None:
        if source not in self.frames or target not in self.frames:
            raise FrameError(f"coref link endpoints must exist: {source} -> {target}")
        self.coref_links[source] = target

    def resolve(self, fid: FrameId) -> FrameId:
        """Follow coref links to the canonical frame."""
        seen = set()
        while fid in self.coref_links and fid not in seen:
            seen.add(fid)
            fid = self.coref_links[fid]
        return fid

    def instances_of(self, concept: str, include_descendants: bool = False) -> list[Frame]:
        names = {concept}
        if include_descendants and self.ontology is not None:
            names |= self.ontology.descendants(concept)
        found = [f for f in self.frames.values() if f.concept in names]
        found.sort(key=lambda f: (f.tick, f.id.concept, f.id.ordinal))
        return found

    def query(self, concept: str, constraints: Optional[dict] = None) -> list[Frame]:
        """Instances of concept (or descendants) satisfying all slot predicates.

        Constraint values: None (slot present), a SlotFiller (equality), a
        NumericRange (scalar containment), or a callable filler -> bool.
        """
        if self.ontology is not None and not self.ontology.has_concept(concept):
            from .ontology import OntologyError
            raise OntologyError(f"unknown concept: {concept}")
        if constraints and self.ontology is not None:
            for prop in constraints:
                if not self.ontology.has_property(prop):
                    raise FrameError(f"unknown property in constraint: {prop}")
        out = []
        for fr in self.instances_of(concept, include_descendants=True):
            if _matches(fr, constraints or {}):
                out.append(fr)
        return out

    def resolve_coreference(self, frame: Frame) -> CorefResult:
        """Bind a definite reference against the situation.

        Widening order: exact concept, then ontological descendants, then
        ancestors one level up.  Candidate order is deterministic in the
        recency index (creation tick, then concept, then ordinal).
        """
        stages: list[list[Frame]] = [self.instances_of(frame.concept)]
        if self.ontology is not None:
            desc = [f for f in self.instances_of(frame.concept, include_descendants=True)
                    if f.concept != frame.concept]
            stages.append(desc)
            parents = self.ontology.parents_of(frame.concept)
            ups = []
            for p in sorted(parents):
                ups.extend(f for f in self.instances_of(p) if f.concept != frame.concept)
            stages.append(ups)
        for candidates in stages:
            candidates = [c for c in candidates if c.id != frame.id]
            if len(candidates) == 1:
                return CorefResult("BOUND", target=candidates[0].id)
            if len(candidates) > 1:
                return CorefResult("AMBIGUOUS", candidates=[c.id for c in candidates])
        return CorefResult("NONE")

    def merge_mr(self, mr: MeaningRep) -> None:
        """Merge an MR's frames into the situation (idempotent per frame id)."""
        for fid, fr in mr.frames.items():
            if fid not in self.frames:
                self.add_frame(fr)

    def snapshot(self) -> "SituationModel":
        """Deep, immutable-by-convention copy handed to observers."""
        dup = SituationModel(self.ontology)
        dup.frames = {fid: fr.copy() for fid, fr in self.frames.items()}
        dup.coref_links = dict(self.coref_links)
        dup._counters = dict(self._counters)
        return dup


def _matches(frame: Frame, constraints: dict) -> bool:
    for prop, want in constraints.items():
        fillers = frame.get(prop)
        if not fillers:
            return False
        if want is None:
            continue
        if isinstance(want, NumericRange):
            if not any(isinstance(f, Scalar) and want.contains(f.value) for f in fillers):
                return False
        elif callable(want):
            if not any(want(f) for f in fillers):
                return False
        else:
            if want not in fillers:
                return False
    return True


class EpisodicMemory:
    """Append-only store of past events and facts, ordered by tick."""

    def __init__(self):
        self._entries: list[tuple[int, Frame]] = []

    def remember(self, event: Frame, tick: int) -> int:
        if self._entries and tick < self._entries[-1][0]:
            raise FrameError(f"memory ticks must be monotone: {tick} after {self._entries[-1][0]}")
        self._entries.append((tick, event.copy()))
        return len(self._entries) - 1

    def recall(self, concept: str, constraints: Optional[dict] = None,
               ontology=None) -> list[Frame]:
        """All matching entries, newest first."""
        names = {concept}
        if ontology is not None:
            if not ontology.has_concept(concept):
                from .ontology import OntologyError
                raise OntologyError(f"unknown concept: {concept}")
            names |= ontology.descendants(concept)
        hits = [fr for _, fr in self._entries
                if fr.concept in names and _matches(fr, constraints or {})]
        hits.reverse()
        return hits

    def entries(self) -> list[tuple[int, Frame]]:
        return [(t, f.copy()) for t, f in self._entries]

    def serialize(self) -> str:
        return json.dumps([{"tick": t, "frame": frame_to_json(f)} for t, f in self._entries],
                          sort_keys=True)
