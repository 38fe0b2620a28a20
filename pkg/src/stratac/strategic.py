"""The deliberative agent loop.

One strategic task per agent: it interprets what it hears, merges meaning
representations into its situation model, posts goals, instantiates plans
from scripts, repairs unmet preconditions by consulting memory and then
asking a teammate, dispatches atomic steps as bridge commands, grounds
perceived candidates against expectations, and records every agenda
transition in a replayable reasoning trace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .bridge import Bridge, CommandMessage, GroundingVerdict, PerceptPacket, StatusReport
from .bridge import detection_to_vmr
from .frames import (ConceptRef, Corefer, Frame, FrameId, FrameRef, Literal,
                     MeaningRep, MRKind, NumericRange, Provenance, Scalar,
                     SituationModel, SlotFiller, content_signature)
from .frames import EpisodicMemory
from .language import (GenerationError, Utterance, generate, interpret)
from .ontology import Lexicon, Ontology, Precondition, Script, Step

GOAL_STATUSES = ("PENDING", "ACTIVE", "SATISFIED", "ABANDONED", "BLOCKED")
STEP_STATUSES = ("BLOCKED", "READY", "DISPATCHED", "DONE", "FAILED")

THOUGHT_KINDS = ("GOAL-POSTED", "PLAN-CREATED", "PRECOND-UNMET", "PRECOND-SATISFIED",
                 "METAPLAN-APPLIED", "COMMAND-ISSUED", "CANDIDATE-CONFIRMED",
                 "CANDIDATE-REJECTED", "GOAL-SATISFIED", "GOAL-ABANDONED")


class StrategicError(Exception):
    pass


@dataclass
class Goal:
    id: int
    concept: str
    params: dict[str, SlotFiller]
    priority: float
    source: str
    status: str = "PENDING"


@dataclass
class PlanStep:
    index: int
    spec: Step
    status: str = "READY"
    command_id: Optional[int] = None

    @property
    def label(self) -> str:
        return self.spec.label


@dataclass
class Plan:
    id: int
    goal_id: int
    from_script: str
    bindings: dict[str, SlotFiller]
    steps: list[PlanStep]
    unmet: list[Precondition] = field(default_factory=list)
    outputs: dict[str, object] = field(default_factory=dict)
    blocked: bool = False
    failed: bool = False
    satisfied_from: dict[str, str] = field(default_factory=dict)

    def next_step(self) -> Optional[PlanStep]:
        if self.blocked or self.failed:
            return None
        for step in self.steps:
            if step.status == "FAILED":
                return None
            if step.status == "DISPATCHED":
                return step
            if step.status == "READY":
                return step
        return None

    def complete(self) -> bool:
        return all(s.status == "DONE" for s in self.steps)


@dataclass
class ThoughtEntry:
    tick: int
    kind: str
    payload: dict

    def line(self) -> str:
        import json
        return f"{self.tick}|{self.kind}|{json.dumps(self.payload, sort_keys=True)}"


@dataclass
class AwaitedSlot:
    plan_id: int
    precondition: Precondition
    asked: str
    target: FrameId
    question_concept: str


class Agenda:
    def __init__(self):
        self.goals: dict[int, Goal] = {}
        self.plans: dict[int, list[Plan]] = {}

    def ordered_goals(self) -> list[Goal]:
        return sorted(self.goals.values(), key=lambda g: (-g.priority, g.id))

    def plan_for(self, goal_id: int) -> Optional[Plan]:
        plans = self.plans.get(goal_id, [])
        return plans[-1] if plans else None

    def live_goals(self) -> list[Goal]:
        return [g for g in self.ordered_goals() if g.status in ("PENDING", "ACTIVE")]

    def view(self) -> dict:
        out = []
        for goal in self.ordered_goals():
            plan = self.plan_for(goal.id)
            out.append({
                "id": goal.id, "concept": goal.concept, "priority": goal.priority,
                "status": goal.status,
                "plan": None if plan is None else {
                    "id": plan.id, "script": plan.from_script,
                    "blocked": plan.blocked,
                    "steps": [{"label": s.label, "kind": s.spec.kind,
                               "target": s.spec.target, "status": s.status}
                              for s in plan.steps],
                },
            })
        return {"goals": out}


@dataclass
class Decision:
    kind: str                                  # "command" | "speak" | "wait" | "conclude"
    command: Optional[CommandMessage] = None
    utterance: Optional[Utterance] = None
    gmr: Optional[MeaningRep] = None
    goal: Optional[Goal] = None


def reconstruct_agenda(entries: list[ThoughtEntry]) -> dict[int, str]:
    """Fold the trace into final goal statuses (the replay check)."""
    status: dict[int, str] = {}
    for e in entries:
        gid = e.payload.get("goal-id")
        if gid is None:
            continue
        if e.kind == "GOAL-POSTED":
            status[gid] = "PENDING"
        elif e.kind == "PLAN-CREATED":
            status[gid] = "ACTIVE"
        elif e.kind == "GOAL-SATISFIED":
            status[gid] = "SATISFIED"
        elif e.kind == "GOAL-ABANDONED":
            status[gid] = "ABANDONED"
    return status


FEATURE_LIKE_PROPS = ("color", "size", "age")


class StrategicAgent:
    def __init__(self, agent_id: str, ontology: Ontology, lexicon: Lexicon,
                 bridge: Optional[Bridge] = None,
                 rooms: Optional[dict[str, list]] = None,
                 team_send: Optional[Callable] = None):
        self.agent_id = agent_id
        self.ontology = ontology
        self.lexicon = lexicon
        self.bridge = bridge
        self.rooms = rooms or {}
        self.team_send = team_send
        self.situation = SituationModel(ontology)
        self.memory = EpisodicMemory()
        self.agenda = Agenda()
        self.trace: list[ThoughtEntry] = []
        self.pending_speaks: list[MeaningRep] = []
        self.awaiting: list[AwaitedSlot] = []
        self.participants: dict[str, FrameId] = {}
        self.self_fid = self.situation.new_instance("ROBOT")
        self.participants[agent_id] = self.self_fid
        self._next_goal_id = 1
        self._next_plan_id = 1
        self._seen_sources: set = set()
        self._command_steps: dict[int, tuple[Plan, PlanStep]] = {}
        self.vmrs: list[MeaningRep] = []
        self.on_vmr: Optional[Callable[[MeaningRep], None]] = None
        self.team_state = None   # wired by the team coordinator, if any

    # -- wiring ----------------------------------------------------------------

    def register_participant(self, agent_id: str, concept: str) -> FrameId:
        if agent_id not in self.participants:
            self.participants[agent_id] = self.situation.new_instance(concept)
        return self.participants[agent_id]

    def seed_entity(self, concept: str, slots: dict[str, SlotFiller]) -> FrameId:
        fid = self.situation.new_instance(concept)
        frame = self.situation.frame(fid)
        for prop, filler in slots.items():
            frame.add(prop, filler)
        return fid

    def seed_memory(self, concept: str, slots: dict[str, SlotFiller], tick: int = 0) -> None:
        frame = Frame(FrameId(concept, len(self.memory.entries()) + 1),
                      provenance=Provenance.MEMORY)
        for prop, filler in slots.items():
            frame.add(prop, filler)
        self.memory.remember(frame, tick)

    def think(self, tick: int, kind: str, payload: dict) -> None:
        self.trace.append(ThoughtEntry(tick, kind, payload))

    # -- perception -------------------------------------------------------------

    def hear(self, utterance: Utterance, tick: int) -> MeaningRep:
        speaker = self.participants.get(utterance.speaker)
        if speaker is None:
            speaker = self.register_participant(utterance.speaker, "HUMAN")
        tmr = interpret(utterance, self.lexicon, self.situation,
                        speaker=speaker, addressee=self.self_fid, tick=tick)
        self.perceive(tmr, tick)
        return tmr

    def perceive(self, mr: MeaningRep, tick: int) -> None:
        self.situation.merge_mr(mr)
        dangling = mr.dangling_refs(self.situation)
        if dangling:
            raise StrategicError(
                f"meaning representation is not closed: dangling refs {dangling}")
        root = mr.frame(mr.root)
        if root.concept == "INFORM" and self._route_answer(mr, tick):
            return
        if root.concept == "ACKNOWLEDGE":
            return
        if root.concept != "UNINTERPRETED-UTTERANCE":
            # duplicate content posts no new goal; repeated gibberish still
            # deserves a fresh clarification request
            signature = (root.concept, content_signature(mr, strip_wrapper=False))
            if signature in self._seen_sources:
                return
            self._seen_sources.add(signature)
        concept = self.ontology.concepts.get(root.concept)
        if concept is None:
            return
        rules = list(concept.goal_rules)
        for rule in rules:
            if not self._rule_applies(rule, root, mr):
                continue
            params = {"agent": FrameRef(self.self_fid)}
            speaker = root.first("agent")
            if isinstance(speaker, FrameRef):
                params["requester"] = speaker
                params["beneficiary"] = speaker
            for key, path in rule.bindings.items():
                filler = self._follow(root, path, mr)
                if filler is not None:
                    params[key] = filler
            self.post_goal(rule.goal, params, rule.priority, mr.source, tick)

    def post_goal(self, concept: str, params: dict[str, SlotFiller], priority: float,
                  source: str, tick: int) -> Optional[Goal]:
        # duplicate triggering content is screened upstream (perceive keeps a
        # content-signature ledger), so identical params here are legitimate
        goal = Goal(self._next_goal_id, concept, params, priority, source)
        self._next_goal_id += 1
        self.agenda.goals[goal.id] = goal
        self.think(tick, "GOAL-POSTED", {"goal-id": goal.id, "goal-concept": concept,
                                         "priority": priority, "source": source})
        return goal

    def _rule_applies(self, rule, root: Frame, mr: MeaningRep) -> bool:
        theme = root.first("theme")
        theme_frame = None
        if isinstance(theme, FrameRef):
            theme_frame = mr.frames.get(theme.target) or self.situation.frames.get(theme.target)
        if rule.theme_is:
            if theme_frame is None or not self.ontology.subsumes(rule.theme_is,
                                                                 theme_frame.concept):
                return False
        if rule.theme_not:
            if theme_frame is not None and self.ontology.subsumes(rule.theme_not,
                                                                  theme_frame.concept):
                return False
        if rule.when in ("theme-value-known", "theme-value-unknown"):
            if theme_frame is None:
                return False
            known = self._attribute_value(theme_frame) is not None
            return known if rule.when == "theme-value-known" else not known
        return True

    def _attribute_value(self, attribute: Frame) -> Optional[SlotFiller]:
        """Value of an attribute frame (e.g. the AGE of its domain object)."""
        prop = self.ontology.concepts[attribute.concept].attribute_prop
        if not prop:
            return None
        domain = attribute.first("domain")
        if not isinstance(domain, (FrameRef, Corefer)):
            return None
        entity = self.situation.frames.get(self.situation.resolve(domain.target))
        if entity is None:
            return None
        value, _ = self._value_of(entity, prop)
        return value

    def _value_of(self, entity: Frame, prop: str) -> tuple[Optional[SlotFiller], str]:
        """Look a property up in the situation, then in episodic memory."""
        if prop in self.ontology.feature_groups:
            members = self.ontology.feature_groups[prop].props
            for member in members:
                if entity.has(member):
                    return entity.first(member), "situation"
            found = None
            for member in members:
                hits = self.memory.recall(entity.concept, {member: None}, self.ontology)
                if hits:
                    value = hits[0].first(member)
                    entity.add(member, value)
                    found = found or value
            return (found, "memory") if found is not None else (None, "")
        if entity.has(prop):
            return entity.first(prop), "situation"
        hits = self.memory.recall(entity.concept, {prop: None}, self.ontology)
        if hits:
            value = hits[0].first(prop)
            entity.add(prop, value)
            return value, "memory"
        return None, ""

    def _follow(self, root: Frame, path: str, mr: MeaningRep) -> Optional[SlotFiller]:
        frame = root
        parts = path.split(".")
        for i, prop in enumerate(parts):
            filler = frame.first(prop)
            if filler is None:
                return None
            if i == len(parts) - 1:
                return filler
            if not isinstance(filler, FrameRef):
                return None
            frame = mr.frames.get(filler.target) or self.situation.frames.get(filler.target)
            if frame is None:
                return None
        return None

    # -- answer routing -----------------------------------------------------------

    def _route_answer(self, mr: MeaningRep, tick: int) -> bool:
        root = mr.frame(mr.root)
        speaker = root.first("agent")
        speaker_id = None
        for aid, fid in self.participants.items():
            if isinstance(speaker, FrameRef) and fid == speaker.target:
                speaker_id = aid
        theme = root.first("theme")
        if not isinstance(theme, FrameRef):
            return False
        theme_frame = mr.frames.get(theme.target)
        if theme_frame is None:
            return False
        for awaited in list(self.awaiting):
            if awaited.asked != speaker_id:
                continue
            if not self._fill_awaited(awaited, theme_frame, tick):
                continue
            self.awaiting.remove(awaited)
            plan = self._plan_by_id(awaited.plan_id)
            if plan is not None:
                unmet = self.check_preconditions(plan, tick, quiet=True)
                if not unmet:
                    plan.blocked = False
                self.queue_speak(self._build_acknowledge(awaited.asked))
            return True
        return False

    def _fill_awaited(self, awaited: AwaitedSlot, theme: Frame, tick: int) -> bool:
        entity = self.situation.frames.get(self.situation.resolve(awaited.target))
        if entity is None:
            return False
        prop = awaited.precondition.prop
        if theme.concept == awaited.question_concept:
            value = theme.first("range")
            if value is None:
                return False
            target_prop = self.ontology.concepts[theme.concept].attribute_prop or prop
            if isinstance(value, ConceptRef) or not isinstance(value, Corefer):
                entity.add(target_prop, value)
            self.think(tick, "PRECOND-SATISFIED",
                       {"about": str(entity.id), "property": prop, "from": "answer"})
            return True
        related = self.ontology.subsumes(theme.concept, entity.concept) or \
            self.ontology.subsumes(entity.concept, theme.concept)
        if related:
            copied = False
            props = list(self.ontology.feature_groups.get(prop).props) \
                if prop in self.ontology.feature_groups else [prop]
            for member in props + ["age"]:
                for filler in theme.get(member):
                    entity.add(member, filler)
                    copied = True
            if copied:
                self.think(tick, "PRECOND-SATISFIED",
                           {"about": str(entity.id), "property": prop, "from": "answer"})
            return copied
        return False

    def _plan_by_id(self, plan_id: int) -> Optional[Plan]:
        for plans in self.agenda.plans.values():
            for plan in plans:
                if plan.id == plan_id:
                    return plan
        return None

    # -- planning ---------------------------------------------------------------

    def instantiate_plan(self, goal: Goal, tick: int) -> Optional[Plan]:
        scripts = self.ontology.scripts_for_goal(goal.concept)
        tried = {p.from_script for p in self.agenda.plans.get(goal.id, [])}
        script = next((s for s in scripts if s.name not in tried), None)
        if script is None:
            goal.status = "BLOCKED" if not tried else "ABANDONED"
            kind = "GOAL-ABANDONED" if goal.status == "ABANDONED" else "PRECOND-UNMET"
            self.think(tick, kind, {"goal-id": goal.id, "goal-concept": goal.concept,
                                    "reason": "no-script"})
            return None
        bindings: dict[str, SlotFiller] = {}
        for param in script.params:
            filler = goal.params.get(param.name)
            if filler is None and param.name in ("beneficiary", "requester"):
                filler = goal.params.get("requester") or goal.params.get("beneficiary")
            if filler is not None:
                bindings[param.name] = filler
        steps = [PlanStep(i, spec) for i, spec in enumerate(self._flatten(script, bindings))]
        plan = Plan(self._next_plan_id, goal.id, script.name, bindings, steps)
        self._next_plan_id += 1
        self.agenda.plans.setdefault(goal.id, []).append(plan)
        goal.status = "ACTIVE"
        self.think(tick, "PLAN-CREATED", {"goal-id": goal.id, "plan-id": plan.id,
                                          "script": script.name})
        unmet = self.check_preconditions(plan, tick)
        if unmet:
            self.apply_metaplan(plan, unmet, tick)
        return plan

    def _flatten(self, script: Script, bindings: dict[str, SlotFiller]) -> list[Step]:
        out: list[Step] = []
        for step in script.steps:
            if step.kind != "call":
                out.append(step)
                continue
            sub = self.ontology.scripts[step.target]
            for sub_step in sub.steps:
                rebound = dict(sub_step.bindings)
                for key, expr in sub_step.bindings.items():
                    root = expr.split(".", 1)[0]
                    if root.startswith("$"):
                        sub_param = root[1:]
                        call_expr = step.bindings.get(sub_param)
                        if call_expr is not None:
                            rebound[key] = call_expr + expr[len(root):]
                out.append(Step(sub_step.kind, sub_step.target, rebound,
                                label=step.target, where=sub_step.where))
        return out

    def check_preconditions(self, plan: Plan, tick: int, quiet: bool = False) -> list[Precondition]:
        unmet: list[Precondition] = []
        for pre in self._script_preconditions(plan):
            entity = self._bound_entity(plan, pre.param)
            if entity is None:
                unmet.append(pre)
                continue
            value, source = self._value_of(entity, pre.prop)
            if pre.requirement == "KNOWN":
                ok = value is not None
            else:
                rng = NumericRange.parse(pre.requirement)
                ok = isinstance(value, Scalar) and rng.contains(value.value)
            if ok:
                if source == "memory" and pre.prop not in plan.satisfied_from:
                    plan.satisfied_from[pre.prop] = "memory"
                    if not quiet:
                        self.think(tick, "PRECOND-SATISFIED",
                                   {"about": str(entity.id), "property": pre.prop,
                                    "from": "memory"})
            else:
                unmet.append(pre)
                if not quiet:
                    self.think(tick, "PRECOND-UNMET",
                               {"goal-id": plan.goal_id, "plan-id": plan.id,
                                "about": str(entity.id), "property": pre.prop})
        plan.unmet = unmet
        return unmet

    def _script_preconditions(self, plan: Plan) -> list[Precondition]:
        return self.ontology.scripts[plan.from_script].preconditions

    def _bound_entity(self, plan: Plan, param: str) -> Optional[Frame]:
        filler = plan.bindings.get(param)
        if isinstance(filler, (FrameRef, Corefer)):
            return self.situation.frames.get(self.situation.resolve(filler.target))
        return None

    def apply_metaplan(self, plan: Plan, unmet: list[Precondition], tick: int) -> None:
        try:
            meta = self.ontology.metascript_for("UNMET-PRECONDITION")
        except Exception:
            plan.failed = True
            goal = self.agenda.goals[plan.goal_id]
            goal.status = "ABANDONED"
            self.think(tick, "GOAL-ABANDONED", {"goal-id": goal.id,
                                                "goal-concept": goal.concept,
                                                "reason": "no-metascript"})
            return
        goal = self.agenda.goals[plan.goal_id]
        asked = self._agent_id_for(goal.params.get("requester"))
        still_unmet = []
        for pre in unmet:
            entity = self._bound_entity(plan, pre.param)
            if entity is None:
                continue
            if "memory-lookup" in meta.procedure:
                value, _ = self._value_of(entity, pre.prop)
                if value is not None:
                    plan.satisfied_from[pre.prop] = "memory"
                    self.think(tick, "PRECOND-SATISFIED",
                               {"about": str(entity.id), "property": pre.prop,
                                "from": "memory"})
                    continue
            still_unmet.append(pre)
            if "ask-teammate" in meta.procedure and asked is not None:
                question_concept = self.ontology.question_concept(pre.prop)
                if not question_concept:
                    continue
                gmr = self._build_question(question_concept, entity, asked)
                self.queue_speak(gmr)
                self.awaiting.append(AwaitedSlot(plan.id, pre, asked, entity.id,
                                                 question_concept))
                self.think(tick, "METAPLAN-APPLIED",
                           {"goal-id": goal.id, "plan-id": plan.id,
                            "how": "ask a teammate", "property": pre.prop})
        plan.unmet = still_unmet
        plan.blocked = bool(still_unmet)

    def _agent_id_for(self, filler) -> Optional[str]:
        if not isinstance(filler, (FrameRef, Corefer)):
            return None
        for aid, fid in self.participants.items():
            if fid == filler.target:
                return aid
        return None

    # -- GMR builders -------------------------------------------------------------

    def _identity_copy(self, entity: Frame, adjectives: bool = True) -> Frame:
        """A minimal stand-in for an entity inside a GMR: identity, the
        adjective-renderable slots the speaker wants verbalized, and a
        coreference mark (situation entities are discourse-known, so the
        generator uses a definite article)."""
        copy = Frame(entity.id, provenance=Provenance.GMR, tick=entity.tick)
        if adjectives:
            for prop in FEATURE_LIKE_PROPS:
                for filler in entity.get(prop):
                    if _has_surface(self.lexicon, prop, filler):
                        copy.add(prop, filler)
        copy.add("corefer", Corefer(entity.id))
        return copy

    def _speech_act(self, concept: str, beneficiary_id: str) -> tuple[FrameId, Frame, dict]:
        fid = self.situation.new_instance(concept, Provenance.GMR)
        frame = self.situation.frame(fid)
        frame.add("agent", FrameRef(self.self_fid))
        ben = self.participants.get(beneficiary_id)
        if ben is not None:
            frame.add("beneficiary", FrameRef(ben))
        return fid, frame, {fid: frame}

    def _build_question(self, question_concept: str, entity: Frame,
                        asked: str) -> MeaningRep:
        fid, frame, frames = self._speech_act("REQUEST-INFO", asked)
        att_id = self.situation.new_instance(question_concept, Provenance.GMR)
        att = self.situation.frame(att_id)
        att.add("domain", FrameRef(entity.id))
        frame.add("theme", FrameRef(att_id))
        frames[att_id] = att
        frames[entity.id] = self._identity_copy(entity)
        return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)

    def _build_acknowledge(self, beneficiary_id: str) -> MeaningRep:
        fid, _, frames = self._speech_act("ACKNOWLEDGE", beneficiary_id)
        return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)

    def _build_clarify(self, beneficiary_id: str) -> MeaningRep:
        fid, _, frames = self._speech_act("REQUEST-REPEAT", beneficiary_id)
        return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)

    def _build_causes_report(self, hypotheses: list[tuple[FrameId, FrameId]],
                             beneficiary_id: str) -> MeaningRep:
        if len(hypotheses) != 2:
            raise GenerationError(
                f"cause reports are realized for exactly two hypotheses, got {len(hypotheses)}")
        alt_id = self.situation.new_instance("ALTERNATIVE", Provenance.GMR)
        alt = self.situation.frame(alt_id)
        frames = {alt_id: alt}
        for slot, (mod_id, cause_id) in zip(("domain", "range"), hypotheses):
            alt.add(slot, FrameRef(mod_id))
            frames[mod_id] = self.situation.frame(mod_id)
            frames[cause_id] = self.situation.frame(cause_id)
        return MeaningRep(MRKind.GMR, alt_id, frames, author=self.agent_id)

    def _build_answer(self, query: Frame, value: Optional[SlotFiller],
                      beneficiary_id: str) -> MeaningRep:
        fid, frame, frames = self._speech_act("INFORM", beneficiary_id)
        if value is None:
            unk = self.situation.new_instance("UNKNOWN-VALUE", Provenance.GMR)
            frame.add("theme", FrameRef(unk))
            frames[unk] = self.situation.frame(unk)
            return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)
        att_id = self.situation.new_instance(query.concept, Provenance.GMR)
        att = self.situation.frame(att_id)
        domain = query.first("domain")
        if isinstance(domain, (FrameRef, Corefer)):
            target = self.situation.resolve(domain.target)
            entity = self.situation.frames.get(target)
            att.add("domain", FrameRef(target))
            if entity is not None:
                frames[target] = self._identity_copy(entity, adjectives=False)
        att.add("range", value)
        frame.add("theme", FrameRef(att_id))
        frames[att_id] = att
        return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)

    def _build_completion(self, entity: Frame, beneficiary_id: str) -> MeaningRep:
        fid, frame, frames = self._speech_act("INFORM", beneficiary_id)
        evt = self.situation.new_instance("FETCH-COMPLETE", Provenance.GMR)
        self.situation.frame(evt).add("theme", FrameRef(entity.id))
        frame.add("theme", FrameRef(evt))
        frames[evt] = self.situation.frame(evt)
        frames[entity.id] = self._identity_copy(entity, adjectives=False)
        return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)

    def build_found_report(self, entity: Frame, room_concept: str,
                           beneficiary_id: str) -> MeaningRep:
        fid, frame, frames = self._speech_act("INFORM", beneficiary_id)
        evt = self.situation.new_instance("OBJECT-FOUND", Provenance.GMR)
        evt_frame = self.situation.frame(evt)
        evt_frame.add("theme", FrameRef(entity.id))
        evt_frame.add("location", ConceptRef(room_concept))
        frame.add("theme", FrameRef(evt))
        frames[evt] = evt_frame
        frames[entity.id] = self._identity_copy(entity, adjectives=False)
        return MeaningRep(MRKind.GMR, fid, frames, author=self.agent_id)

    def queue_speak(self, gmr: MeaningRep) -> None:
        self.pending_speaks.append(gmr)

    # -- status and percepts ---------------------------------------------------------

    def on_status(self, report: StatusReport, tick: int) -> None:
        entry = self._command_steps.get(report.command_id)
        if entry is None:
            return
        plan, step = entry
        if report.status == "HALTED-CANDIDATE":
            self._ground(plan, step, report, tick)
        elif report.status == "DONE":
            step.status = "DONE"
            outcome = report.payload.get("outcome")
            if outcome == "FOUND":
                plan.outputs["found"] = report.payload.get("candidate")
            elif outcome == "EXHAUSTED":
                plan.outputs["exhausted"] = report.payload
            self._after_step_done(plan, step, tick)
        elif report.status == "FAILED":
            step.status = "FAILED"
            plan.failed = True
            goal = self.agenda.goals[plan.goal_id]
            retry = self.instantiate_plan(goal, tick) \
                if goal.status in ("ACTIVE", "PENDING") else None
            if retry is None and goal.status not in ("SATISFIED", "ABANDONED"):
                goal.status = "ABANDONED"
                self.think(tick, "GOAL-ABANDONED",
                           {"goal-id": goal.id, "goal-concept": goal.concept,
                            "reason": report.payload.get("reason", "command-failed")})

    def _after_step_done(self, plan: Plan, step: PlanStep, tick: int) -> None:
        if self.team_state is not None:
            self.team_state.on_step_done(self, plan, step, tick)

    def _ground(self, plan: Plan, step: PlanStep, report: StatusReport, tick: int) -> None:
        candidate = report.payload.get("candidate") or {}
        vmr = detection_to_vmr(candidate, self.situation, self.agent_id, tick)
        self.vmrs.append(vmr)
        if self.on_vmr is not None:
            self.on_vmr(vmr)
        expected = self._expected_frame(plan)
        verdict = self.ground_candidate(vmr, expected)
        label = candidate.get("label", "")
        if verdict == "CONFIRMED":
            plan.outputs["candidate"] = candidate
            self.think(tick, "CANDIDATE-CONFIRMED",
                       {"concept": vmr.frame(vmr.root).concept, "label": label,
                        "goal-id": plan.goal_id})
        else:
            self.think(tick, "CANDIDATE-REJECTED",
                       {"concept": vmr.frame(vmr.root).concept, "label": label,
                        "goal-id": plan.goal_id})
        if self.bridge is not None and step.command_id is not None:
            self.bridge.send_verdict(GroundingVerdict(step.command_id, verdict, label))

    def _expected_frame(self, plan: Plan) -> Optional[Frame]:
        filler = plan.bindings.get("object") or plan.bindings.get("theme")
        if isinstance(filler, (FrameRef, Corefer)):
            return self.situation.frames.get(self.situation.resolve(filler.target))
        return None

    def ground_candidate(self, vmr: MeaningRep, expected: Optional[Frame]) -> str:
        """Slot-wise verification of a candidate VMR against expectations."""
        try:
            root = vmr.frame(vmr.root)
        except Exception:
            return "REJECTED"
        if expected is None:
            return "REJECTED"
        if not self.ontology.subsumes(expected.concept, root.concept) and \
                not self.ontology.subsumes(root.concept, expected.concept):
            return "REJECTED"
        if not root.has("label-code"):
            return "REJECTED"   # identity must be verifiable via the label link
        for prop, fillers in expected.slots.items():
            if prop in ("corefer", "location", "last-seen-location", "position"):
                continue
            for want in fillers:
                if isinstance(want, NumericRange):
                    got = root.first(prop)
                    if not isinstance(got, Scalar) or not want.contains(got.value):
                        return "REJECTED"
                elif isinstance(want, (Literal, Scalar)):
                    if want not in root.get(prop):
                        return "REJECTED"
        return "CONFIRMED"

    def on_percepts(self, packets: list[PerceptPacket], tick: int) -> None:
        for packet in packets:
            state = packet.robot_state
            if state:
                self._set_position(self.self_fid, state.get("pose"))
            for item in packet.items:
                if item.get("kind") == "human":
                    fid = self.participants.get(item.get("object_id", ""))
                    if fid is not None:
                        self._set_position(fid, item.get("position"))

    def _set_position(self, fid: FrameId, pos) -> None:
        if pos is None:
            return
        frame = self.situation.frames.get(fid)
        if frame is None:
            return
        frame.slots["position"] = [Literal(f"{pos[0]},{pos[1]}")]

    # -- the decision loop -------------------------------------------------------

    def advance(self, tick: int) -> Decision:
        for goal in self.agenda.live_goals():
            if self.agenda.plan_for(goal.id) is None:
                self.instantiate_plan(goal, tick)
        if self.pending_speaks:
            gmr = self.pending_speaks.pop(0)
            return self._speak(gmr, tick)
        command_in_flight = any(
            step.status == "DISPATCHED" and step.spec.kind == "do"
            for plans in self.agenda.plans.values() for plan in plans
            for step in plan.steps)
        for goal in self.agenda.live_goals():
            plan = self.agenda.plan_for(goal.id)
            if plan is None or plan.blocked or plan.failed:
                continue
            step = plan.next_step()
            if step is None:
                if plan.complete():
                    return self._conclude(goal, plan, tick)
                continue
            if step.status == "DISPATCHED":
                continue
            if step.spec.kind == "do":
                if command_in_flight:
                    continue
                return self._dispatch(plan, step, tick)
            if step.spec.kind == "report":
                return self._report(plan, step, tick)
            if step.spec.kind == "find-causes":
                self._find_causes(plan, step, tick)
                return Decision("wait")
            if step.spec.kind == "lookup-answer":
                self._lookup_answer(plan, step)
                return Decision("wait")
            if step.spec.kind == "assign-areas":
                self._assign_areas(plan, step, tick)
                return Decision("wait")
            if step.spec.kind == "await-found":
                if plan.outputs.get("team-found"):
                    step.status = "DONE"
                continue
        return Decision("wait")

    def _speak(self, gmr: MeaningRep, tick: int) -> Decision:
        utterance, _ = generate(gmr, self.lexicon, self.ontology, author=self.agent_id)
        utterance.tick = tick
        return Decision("speak", utterance=utterance, gmr=gmr)

    def _conclude(self, goal: Goal, plan: Plan, tick: int) -> Decision:
        goal.status = "SATISFIED"
        self.think(tick, "GOAL-SATISFIED", {"goal-id": goal.id,
                                            "goal-concept": goal.concept})
        return Decision("conclude", goal=goal)

    def _dispatch(self, plan: Plan, step: PlanStep, tick: int) -> Decision:
        params = self._command_params(plan, step)
        if params is None or self.bridge is None:
            step.status = "FAILED"
            plan.failed = True
            goal = self.agenda.goals[plan.goal_id]
            goal.status = "ABANDONED"
            self.think(tick, "GOAL-ABANDONED",
                       {"goal-id": goal.id, "goal-concept": goal.concept,
                        "reason": "unresolvable-command"})
            return Decision("wait")
        cmd = self.bridge.send_command(step.spec.target, params, tick)
        step.status = "DISPATCHED"
        step.command_id = cmd.id
        self._command_steps[cmd.id] = (plan, step)
        self.think(tick, "COMMAND-ISSUED",
                   {"goal-id": plan.goal_id, "plan-id": plan.id, "step": step.label,
                    "verb": cmd.verb, "command-id": cmd.id})
        return Decision("command", command=cmd)

    def _report(self, plan: Plan, step: PlanStep, tick: int) -> Decision:
        goal = self.agenda.goals[plan.goal_id]
        beneficiary = self._agent_id_for(
            plan.bindings.get("beneficiary") or plan.bindings.get("requester")
            or goal.params.get("beneficiary"))
        builder = step.spec.target
        if builder == "causes":
            output = plan.outputs.get(step.spec.bindings.get("content", "$hypotheses").lstrip("$"))
            gmr = self._build_causes_report(output or [], beneficiary)
        elif builder == "answer":
            query, value = plan.outputs.get("answer", (None, None))
            if query is None:
                query_filler = plan.bindings.get("query")
                query = self.situation.frames.get(query_filler.target) \
                    if isinstance(query_filler, FrameRef) else None
            gmr = self._build_answer(query, value, beneficiary)
        elif builder == "completion":
            entity = self._bound_entity(plan, "object")
            gmr = self._build_completion(entity, beneficiary)
        elif builder == "found":
            entity = self._bound_entity(plan, "object")
            room = plan.outputs.get("found-room", "")
            gmr = self.build_found_report(entity, room, beneficiary)
        elif builder == "clarify":
            gmr = self._build_clarify(beneficiary)
        else:
            raise StrategicError(f"unknown report builder {builder}")
        step.status = "DONE"
        return self._speak(gmr, tick)

    def _find_causes(self, plan: Plan, step: PlanStep, tick: int) -> None:
        of = step.spec.bindings.get("of", "").lstrip("$")
        entity = self._bound_entity(plan, of)
        concept = entity.concept if entity is not None else ""
        hypotheses = self.ontology.causes_of(concept, self.situation, tick) \
            if concept else []
        out_name = step.spec.bindings.get("as", "out")
        plan.outputs[out_name] = hypotheses
        step.status = "DONE"

    def _lookup_answer(self, plan: Plan, step: PlanStep) -> None:
        of = step.spec.bindings.get("of", "").lstrip("$")
        query = self._bound_entity(plan, of)
        value = self._attribute_value(query) if query is not None else None
        plan.outputs["answer"] = (query, value)
        step.status = "DONE"

    def _assign_areas(self, plan: Plan, step: PlanStep, tick: int) -> None:
        if self.team_state is None:
            step.status = "FAILED"
            plan.failed = True
            return
        entity = self._bound_entity(plan, step.spec.bindings.get("object", "$object").lstrip("$"))
        hint = None
        if entity is not None:
            hint_filler = entity.first("last-seen-location")
            if isinstance(hint_filler, ConceptRef):
                hint = hint_filler.concept
        self.team_state.assign_and_dispatch(self, plan, entity, hint, tick)
        step.status = "DONE"

    def _command_params(self, plan: Plan, step: PlanStep) -> Optional[dict]:
        verb = step.spec.target
        bindings = step.spec.bindings
        try:
            if verb == "SEARCH":
                entity = self._resolve_binding_entity(plan, bindings.get("object", ""))
                rooms = self._rooms_from_binding(plan, bindings)
                types = sorted(self.ontology.descendants(entity.concept))
                expected = _jsonable_slots(entity)
                return {"rooms": rooms, "types": types, "expected": expected}
            if verb in ("RETURN", "MOVE-TO"):
                target = self._resolve_binding_entity(plan, bindings.get("waypoint", ""))
                pos = _parse_position(target)
                if pos is None:
                    return None
                return {"waypoint": [pos[0], pos[1]]}
            if verb == "PICKUP":
                candidate = plan.outputs.get("candidate")
                if not candidate:
                    return None
                return {"object-id": candidate["object_id"],
                        "position": candidate["position"]}
            if verb == "DROP":
                candidate = plan.outputs.get("candidate") or {}
                near = self._resolve_binding_entity(plan, bindings.get("near", ""))
                pos = _parse_position(near)
                params = {"object-id": candidate.get("object_id", "")}
                if pos is not None:
                    params["near"] = [pos[0], pos[1]]
                return params
            if verb == "STANDBY":
                return {}
        except (KeyError, AttributeError):
            return None
        return None

    def _resolve_binding_entity(self, plan: Plan, expr: str) -> Optional[Frame]:
        if not expr.startswith("$"):
            return None
        parts = expr[1:].split(".")
        filler = plan.bindings.get(parts[0])
        frame = None
        if isinstance(filler, (FrameRef, Corefer)):
            frame = self.situation.frames.get(self.situation.resolve(filler.target))
        for prop in parts[1:]:
            if frame is None:
                return None
            nxt = frame.first(prop)
            if isinstance(nxt, (FrameRef, Corefer)):
                frame = self.situation.frames.get(self.situation.resolve(nxt.target))
            elif isinstance(nxt, ConceptRef):
                pseudo = Frame(FrameId(nxt.concept, 1))
                frame = pseudo
            else:
                return None
        return frame

    def _rooms_from_binding(self, plan: Plan, bindings: dict) -> list[str]:
        if "rooms" in bindings:
            rooms = plan.outputs.get("assigned-rooms")
            if rooms:
                return list(rooms)
            filler = plan.bindings.get(bindings["rooms"].lstrip("$"))
            if isinstance(filler, list):
                return [c.concept.lower() for c in filler if isinstance(c, ConceptRef)]
            if isinstance(filler, ConceptRef):
                return [filler.concept.lower()]
            return []
        if "room" in bindings:
            entity = self._resolve_binding_entity(plan, bindings["room"])
            if entity is not None:
                return [entity.concept.lower()]
        return []

    # -- snapshots ------------------------------------------------------------------

    def agenda_view(self) -> dict:
        return self.agenda.view()

    def trace_lines(self) -> list[str]:
        return [e.line() for e in self.trace]


def _has_surface(lexicon: Lexicon, prop: str, filler: SlotFiller) -> bool:
    for senses in lexicon.senses.values():
        for sense in senses:
            if sense.kind in ("feature", "range") and sense.prop == prop \
                    and sense.filler == filler:
                return True
    return False


def _jsonable_slots(entity: Frame) -> dict:
    out = {}
    for prop, fillers in sorted(entity.slots.items()):
        if prop in ("corefer", "position"):
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
            out[prop] = rendered
    return out


def _parse_position(frame: Optional[Frame]):
    if frame is None:
        return None
    pos = frame.first("position")
    if isinstance(pos, Literal) and "," in pos.text:
        x, y = pos.text.split(",", 1)
        return int(x), int(y)
    return None
