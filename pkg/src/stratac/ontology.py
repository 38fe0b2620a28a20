"""Concept hierarchy, causal links, scripts, meta-scripts, and the lexicon.

Knowledge is authored in plain-text pack files (see docs/knowledge-packs.md
for the grammar) and loaded into immutable structures shared read-only by
every agent.  Validation is exhaustive: a pack either loads with zero
violations or the loader reports every problem it found, each with a
file:line origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from . import kpack
from .frames import (FrameId, FrameRef, Literal, NumericRange, Provenance,
                     Scalar, SlotFiller, parse_filler)

ROOT_CONCEPT = "ALL"

CAUSAL_RELATIONS = ("CAUSED-BY", "PRECONDITION-OF", "SIGN-OF")
META_TRIGGERS = ("UNMET-PRECONDITION", "NEW-TEAM-GOAL", "CANDIDATE-CONFIRMATION")
META_CAPABILITIES = ("memory-lookup", "ask-teammate", "decompose-areas", "confirm-features")
STEP_KINDS = ("do", "call", "report", "find-causes", "lookup-answer", "assign-areas", "await-found")
REPORT_BUILDERS = ("causes", "answer", "completion", "found", "clarify")


class OntologyError(Exception):
    pass


class KnowledgeError(Exception):
    """Pack validation failure carrying every violation, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass
class CausalLink:
    relation: str
    concept: str
    bindings: dict[str, SlotFiller] = field(default_factory=dict)
    weight: float = 1.0


@dataclass
class GoalRule:
    """Posting rule attached to a speech-act concept: seeing an instance
    of the concept posts a goal with bindings drawn from the instance."""
    goal: str
    priority: float
    bindings: dict[str, str] = field(default_factory=dict)   # goal param -> slot path
    when: Optional[str] = None  # "theme-value-known" | "theme-value-unknown" | None
    theme_is: str = ""          # only fire when the theme concept is subsumed by this
    theme_not: str = ""         # never fire when the theme concept is subsumed by this


@dataclass
class Concept:
    name: str
    parents: list[str] = field(default_factory=list)
    constraints: dict[str, str] = field(default_factory=dict)
    causal_links: list[CausalLink] = field(default_factory=list)
    goal_rules: list[GoalRule] = field(default_factory=list)
    lexeme: Optional[str] = None
    attribute_prop: str = ""     # for ATTRIBUTE concepts: the property they reify


@dataclass
class Param:
    name: str
    concept: str


@dataclass
class Precondition:
    param: str
    prop: str            # property name or feature-group name
    requirement: str     # "KNOWN" or a range in text form
    where: str = ""


@dataclass
class Step:
    kind: str
    target: str = ""                      # verb / script / template, per kind
    bindings: dict[str, str] = field(default_factory=dict)
    label: str = ""                       # plan-level step name (call sites keep theirs)
    where: str = ""


@dataclass
class Script:
    name: str
    achieves: str
    params: list[Param] = field(default_factory=list)
    preconditions: list[Precondition] = field(default_factory=list)
    steps: list[Step] = field(default_factory=list)

    def param(self, name: str) -> Optional[Param]:
        for p in self.params:
            if p.name == name:
                return p
        return None


@dataclass
class MetaScript:
    name: str
    trigger: str
    procedure: list[str] = field(default_factory=list)


@dataclass
class WordSense:
    surface: str                 # lowercased token or phrase
    kind: str                    # "concept" | "feature" | "range" | "condition"
    concept: str = ""            # for concept/condition senses
    prop: str = ""               # for feature/range senses
    filler: Optional[SlotFiller] = None
    role: str = ""               # condition senses: slot the subject fills
    crange: Optional[NumericRange] = None  # condition senses: range slot value


@dataclass
class GrammarRule:
    name: str
    pattern: list                # list of pattern tokens (see language module)
    productions: list            # list of (var, concept_or_ref, {prop: filler spec})
    definite: set[str] = field(default_factory=set)
    indefinite: set[str] = field(default_factory=set)
    generic: set[str] = field(default_factory=set)   # vars realized as concept refs
    where: str = ""


@dataclass
class Template:
    name: str
    concept: str
    conditions: dict[str, str] = field(default_factory=dict)  # slot -> concept name or "*"
    texts: list[str] = field(default_factory=list)
    where: str = ""

    @property
    def specificity(self) -> int:
        return 1 + len(self.conditions)


@dataclass
class FeatureGroup:
    name: str
    props: list[str]
    ask: str = ""


class Lexicon:
    """Word senses, grammar rules, and realization templates."""

    def __init__(self):
        self.senses: dict[str, list[WordSense]] = {}
        self.rules: list[GrammarRule] = []
        self.templates: dict[str, Template] = {}
        self.templates_by_concept: dict[str, list[Template]] = {}
        self.max_phrase_len = 1

    def add_sense(self, sense: WordSense) -> None:
        self.senses.setdefault(sense.surface, []).append(sense)
        self.max_phrase_len = max(self.max_phrase_len, len(sense.surface.split()))

    def senses_of(self, surface: str) -> list[WordSense]:
        return self.senses.get(surface.lower(), [])

    def add_template(self, t: Template) -> None:
        self.templates[t.name] = t
        self.templates_by_concept.setdefault(t.concept, []).append(t)


class Ontology:
    """Immutable-after-load concept store with goal-indexed scripts."""

    def __init__(self):
        self.concepts: dict[str, Concept] = {ROOT_CONCEPT: Concept(ROOT_CONCEPT)}
        self.properties: dict[str, str] = {}          # name -> filler kind
        self.property_ask: dict[str, str] = {}        # name -> question concept
        self.feature_groups: dict[str, FeatureGroup] = {}
        self.scripts: dict[str, Script] = {}
        self._scripts_by_goal: dict[str, list[str]] = {}
        self.metascripts: dict[str, MetaScript] = {}
        self._ancestors: dict[str, frozenset[str]] = {}

    # -- hierarchy ---------------------------------------------------------

    def has_concept(self, name: str) -> bool:
        return name in self.concepts

    def has_property(self, name: str) -> bool:
        return name in self.properties or name in self.feature_groups

    def parents_of(self, name: str) -> list[str]:
        self._require(name)
        return list(self.concepts[name].parents)

    def ancestors(self, name: str) -> frozenset[str]:
        """All concepts on any parent path, including the concept itself."""
        self._require(name)
        cached = self._ancestors.get(name)
        if cached is not None:
            return cached
        out = {name}
        for p in self.concepts[name].parents:
            out |= self.ancestors(p)
        result = frozenset(out)
        self._ancestors[name] = result
        return result

    def descendants(self, name: str) -> set[str]:
        self._require(name)
        return {c for c in self.concepts if name in self.ancestors(c)}

    def subsumes(self, ancestor: str, descendant: str) -> bool:
        self._require(ancestor)
        return ancestor in self.ancestors(descendant)

    def _require(self, name: str) -> None:
        if name not in self.concepts:
            raise OntologyError(f"unknown concept: {name}")

    # -- causal search -----------------------------------------------------

    def causes_of(self, state_concept: str, store, tick: int = 0) -> list[tuple[FrameId, FrameId]]:
        """Hypothesis frames for a state: one per CAUSED-BY/SIGN-OF link.

        Each candidate cause is wrapped in a MODALITY frame with an
        epistemic value proportional to its link weight (uniform 1/n when
        unweighted).  Frames are minted in the given store.
        """
        self._require(state_concept)
        links = [l for c in sorted(self.ancestors(state_concept))
                 for l in self.concepts[c].causal_links
                 if l.relation in ("CAUSED-BY", "SIGN-OF")]
        # declaration order within the concept itself wins; ancestor links follow
        own = [l for l in self.concepts[state_concept].causal_links
               if l.relation in ("CAUSED-BY", "SIGN-OF")]
        inherited = [l for l in links if l not in own]
        links = own + inherited
        if not links:
            return []
        total = sum(l.weight for l in links)
        out = []
        for link in links:
            cause_id = store.new_instance(link.concept, Provenance.INFERENCE, tick)
            cause = store.frame(cause_id)
            for prop, filler in link.bindings.items():
                cause.add(prop, filler)
            mod_id = store.new_instance("MODALITY", Provenance.INFERENCE, tick)
            mod = store.frame(mod_id)
            mod.add("type", Literal("EPISTEMIC"))
            mod.add("value", Scalar(link.weight / total))
            mod.add("scope", FrameRef(cause_id))
            out.append((mod_id, cause_id))
        return out

    # -- scripts -----------------------------------------------------------

    def scripts_for_goal(self, goal: str) -> list[Script]:
        self._require(goal)
        return [self.scripts[n] for n in self._scripts_by_goal.get(goal, [])]

    def metascript_for(self, trigger: str) -> MetaScript:
        if trigger not in self.metascripts:
            raise OntologyError(f"no meta-script for trigger: {trigger}")
        return self.metascripts[trigger]

    def question_concept(self, prop_or_group: str) -> str:
        if prop_or_group in self.feature_groups:
            return self.feature_groups[prop_or_group].ask
        return self.property_ask.get(prop_or_group, "")

    def lexeme_of(self, concept: str) -> str:
        self._require(concept)
        lex = self.concepts[concept].lexeme
        return lex if lex else concept.lower().replace("-", " ")


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def load(paths: Iterable[Union[str, Path]]) -> tuple[Ontology, Lexicon]:
    """Load and validate pack files into an (Ontology, Lexicon) pair."""
    blocks = kpack.parse_pack_files(paths)
    return assemble(blocks)


def load_text(text: str, filename: str = "<pack>") -> tuple[Ontology, Lexicon]:
    return assemble(kpack.parse_pack_text(text, filename))


def assemble(blocks: list[kpack.Block]) -> tuple[Ontology, Lexicon]:
    onto = Ontology()
    lex = Lexicon()
    errors: list[str] = []

    handlers = {
        "property": _read_property,
        "feature-group": _read_feature_group,
        "concept": _read_concept,
        "script": _read_script,
        "meta": _read_meta,
        "word": _read_word,
        "rule": _read_rule,
        "template": _read_template,
    }
    # two passes so forward references between blocks are fine: first
    # declare names, then read bodies and validate.
    for block in blocks:
        if block.kind not in handlers:
            errors.append(f"{block.where()}: unknown directive {block.kind!r}")
            continue
        if block.kind == "concept":
            # repeated concept blocks augment the first (authoring is additive)
            onto.concepts.setdefault(block.name, Concept(block.name))
        elif block.kind == "property":
            onto.properties[block.name] = block.args[0] if block.args else "any"
        elif block.kind == "feature-group":
            kv = {k: v for k, v in (a.split("=", 1) for a in block.args if "=" in a)}
            props = [a for a in block.args if "=" not in a]
            onto.feature_groups[block.name] = FeatureGroup(block.name, props, kv.get("ask", ""))
        elif block.kind == "script":
            if block.name in onto.scripts:
                errors.append(f"{block.where()}: duplicate script {block.name}")
            onto.scripts[block.name] = Script(block.name, achieves="")

    for block in blocks:
        handler = handlers.get(block.kind)
        if handler:
            handler(block, onto, lex, errors)

    _validate(onto, lex, errors)
    if errors:
        raise KnowledgeError(errors)
    return onto, lex


def _read_property(block: kpack.Block, onto: Ontology, lex: Lexicon, errors: list[str]) -> None:
    for arg in block.args:
        if arg.startswith("ask="):
            onto.property_ask[block.name] = arg[4:]


def _read_feature_group(block, onto, lex, errors) -> None:
    group = onto.feature_groups[block.name]
    for prop in group.props:
        if prop not in onto.properties:
            errors.append(f"{block.where()}: feature-group {block.name} uses undeclared property {prop}")


def _read_concept(block, onto, lex, errors) -> None:
    concept = onto.concepts[block.name]
    for line in block.body:
        words = line.words
        head = words[0]
        if head == "parent":
            concept.parents.append(words[1])
        elif head == "constraint":
            if len(words) < 3:
                errors.append(f"{line.where()}: constraint needs property and filler spec")
                continue
            concept.constraints[words[1]] = words[2]
        elif head in ("cause", "sign-of", "precondition-of"):
            relation = {"cause": "CAUSED-BY", "sign-of": "SIGN-OF",
                        "precondition-of": "PRECONDITION-OF"}[head]
            if len(words) < 2:
                errors.append(f"{line.where()}: {head} needs a concept")
                continue
            try:
                kv = kpack.parse_kv(words[2:])
            except kpack.PackSyntaxError as e:
                errors.append(f"{line.where()}: {e}")
                continue
            weight = float(kv.pop("weight", "1"))
            bindings = {}
            for prop, text in kv.items():
                try:
                    bindings[prop] = parse_filler(text)
                except Exception as e:
                    errors.append(f"{line.where()}: bad filler {text!r}: {e}")
            concept.causal_links.append(CausalLink(relation, words[1], bindings, weight))
        elif head == "posts-goal":
            kv = kpack.parse_kv(words[2:])
            priority = float(kv.pop("priority", "50"))
            when = kv.pop("when", None)
            theme_is = kv.pop("theme-is", "")
            theme_not = kv.pop("theme-not", "")
            concept.goal_rules.append(GoalRule(words[1], priority, kv, when,
                                               theme_is, theme_not))
        elif head == "lexeme":
            concept.lexeme = " ".join(words[1:])
        elif head == "attribute-property":
            concept.attribute_prop = words[1]
        else:
            errors.append(f"{line.where()}: unknown concept attribute {head!r}")


def _read_script(block, onto, lex, errors) -> None:
    script = onto.scripts[block.name]
    for line in block.body:
        words = line.words
        head = words[0]
        if head == "achieves":
            script.achieves = words[1]
        elif head == "param":
            if len(words) != 3:
                errors.append(f"{line.where()}: param needs name and concept")
                continue
            script.params.append(Param(words[1], words[2]))
        elif head == "precondition":
            if len(words) < 4:
                errors.append(f"{line.where()}: precondition needs param, property, requirement")
                continue
            req = " ".join(words[3:])
            if req.lower() == "known":
                req = "KNOWN"
            script.preconditions.append(Precondition(words[1], words[2], req, line.where()))
        elif head == "step":
            if len(words) < 2 or words[1] not in STEP_KINDS:
                errors.append(f"{line.where()}: step kind must be one of {STEP_KINDS}")
                continue
            kind = words[1]
            rest = words[2:]
            target = ""
            if kind in ("do", "call", "report") and rest:
                target = rest[0]
                rest = rest[1:]
            try:
                bindings = kpack.parse_kv(rest)
            except kpack.PackSyntaxError as e:
                errors.append(f"{line.where()}: {e}")
                continue
            script.steps.append(Step(kind, target, bindings, label=target or kind,
                                     where=line.where()))
        else:
            errors.append(f"{line.where()}: unknown script attribute {head!r}")


def _read_meta(block, onto, lex, errors) -> None:
    trigger = ""
    procedure: list[str] = []
    for line in block.body:
        words = line.words
        if words[0] == "trigger":
            trigger = words[1]
        elif words[0] == "step":
            procedure.append(words[1])
        else:
            errors.append(f"{line.where()}: unknown meta attribute {words[0]!r}")
    if trigger not in META_TRIGGERS:
        errors.append(f"{block.where()}: meta {block.name} has invalid trigger {trigger!r}")
        return
    if not procedure:
        errors.append(f"{block.where()}: meta {block.name} has an empty procedure")
        return
    for step in procedure:
        if step not in META_CAPABILITIES:
            errors.append(f"{block.where()}: meta step {step!r} is not a declared capability")
    if trigger in onto.metascripts:
        errors.append(f"{block.where()}: duplicate meta-script for trigger {trigger}")
    onto.metascripts[trigger] = MetaScript(block.name, trigger, procedure)


def _read_word(block, onto, lex, errors) -> None:
    surface = block.name.replace("_", " ").lower()
    args = block.args
    if not args:
        errors.append(f"{block.where()}: word {surface!r} needs a sense")
        return
    kind = args[0]
    if kind == "concept":
        if len(args) != 2:
            errors.append(f"{block.where()}: word {surface!r}: concept sense needs a name")
            return
        lex.add_sense(WordSense(surface, "concept", concept=args[1]))
    elif kind in ("feature", "range"):
        kv = kpack.parse_kv(args[1:])
        if len(kv) != 1:
            errors.append(f"{block.where()}: word {surface!r}: {kind} sense needs one prop=value")
            return
        prop, text = next(iter(kv.items()))
        try:
            filler = NumericRange.parse(text) if kind == "range" else parse_filler(text)
        except Exception as e:
            errors.append(f"{block.where()}: word {surface!r}: {e}")
            return
        lex.add_sense(WordSense(surface, kind, prop=prop, filler=filler))
    elif kind == "condition":
        if len(args) < 2:
            errors.append(f"{block.where()}: word {surface!r}: condition sense needs a concept")
            return
        kv = kpack.parse_kv(args[2:])
        crange = None
        if "range" in kv:
            try:
                crange = NumericRange.parse(kv["range"])
            except Exception as e:
                errors.append(f"{block.where()}: word {surface!r}: {e}")
                return
        lex.add_sense(WordSense(surface, "condition", concept=args[1],
                                role=kv.get("role", ""), crange=crange))
    else:
        errors.append(f"{block.where()}: word {surface!r}: unknown sense kind {kind!r}")


def _read_rule(block, onto, lex, errors) -> None:
    from .language import parse_pattern  # pattern syntax lives with the matcher
    pattern = None
    productions: list = []
    definite: set[str] = set()
    indefinite: set[str] = set()
    generic: set[str] = set()
    for line in block.body:
        words = line.words
        if words[0] == "pattern":
            try:
                pattern = parse_pattern(words[1:])
            except ValueError as e:
                errors.append(f"{line.where()}: {e}")
        elif words[0] == "frame":
            if len(words) < 3:
                errors.append(f"{line.where()}: frame production needs var and concept")
                continue
            var, concept = words[1], words[2]
            try:
                kv = kpack.parse_kv(words[3:])
            except kpack.PackSyntaxError as e:
                errors.append(f"{line.where()}: {e}")
                continue
            productions.append((var, concept, kv))
        elif words[0] == "definite":
            definite.update(words[1:])
        elif words[0] == "indefinite":
            indefinite.update(words[1:])
        elif words[0] == "generic":
            generic.update(words[1:])
        else:
            errors.append(f"{line.where()}: unknown rule attribute {words[0]!r}")
    if pattern is None:
        errors.append(f"{block.where()}: rule {block.name} has no pattern")
        return
    if not productions:
        errors.append(f"{block.where()}: rule {block.name} has no productions")
        return
    lex.rules.append(GrammarRule(block.name, pattern, productions, definite,
                                 indefinite, generic, block.where()))


def _read_template(block, onto, lex, errors) -> None:
    concept = ""
    conditions: dict[str, str] = {}
    texts: list[str] = []
    for line in block.body:
        words = line.words
        if words[0] == "match":
            concept = words[1]
            try:
                conditions = kpack.parse_kv(words[2:])
            except kpack.PackSyntaxError as e:
                errors.append(f"{line.where()}: {e}")
        elif words[0] == "text":
            texts.append(line.text[len("text "):].strip())
        else:
            errors.append(f"{line.where()}: unknown template attribute {words[0]!r}")
    if not concept:
        errors.append(f"{block.where()}: template {block.name} has no match line")
        return
    if not texts:
        errors.append(f"{block.where()}: template {block.name} has no text")
        return
    lex.add_template(Template(block.name, concept, conditions, texts, block.where()))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _validate(onto: Ontology, lex: Lexicon, errors: list[str]) -> None:
    # hierarchy: parents exist, DAG rooted at ALL
    for c in onto.concepts.values():
        if c.name != ROOT_CONCEPT and not c.parents:
            c.parents.append(ROOT_CONCEPT)
        for p in c.parents:
            if p not in onto.concepts:
                errors.append(f"concept {c.name}: dangling parent {p}")
    cycle = _find_cycle(onto)
    if cycle:
        errors.append(f"hierarchy cycle: {' -> '.join(cycle)}")
        return  # ancestor computations below would not terminate

    for c in onto.concepts.values():
        for prop in c.constraints:
            if not onto.has_property(prop):
                errors.append(f"concept {c.name}: constraint on undeclared property {prop}")
        if c.attribute_prop and not onto.has_property(c.attribute_prop):
            errors.append(f"concept {c.name}: attribute-property {c.attribute_prop} undeclared")
        for link in c.causal_links:
            if link.concept not in onto.concepts:
                errors.append(f"concept {c.name}: causal link to unknown concept {link.concept}")
            for prop in link.bindings:
                if not onto.has_property(prop):
                    errors.append(f"concept {c.name}: causal binding on undeclared property {prop}")
        for rule in c.goal_rules:
            if rule.goal not in onto.concepts:
                errors.append(f"concept {c.name}: posts-goal to unknown concept {rule.goal}")

    for s in onto.scripts.values():
        if not s.achieves:
            errors.append(f"script {s.name}: missing achieves")
        elif s.achieves not in onto.concepts:
            errors.append(f"script {s.name}: achieves unknown concept {s.achieves}")
        else:
            onto._scripts_by_goal.setdefault(s.achieves, []).append(s.name)
        param_names = {p.name for p in s.params}
        for p in s.params:
            if p.concept not in onto.concepts:
                errors.append(f"script {s.name}: param {p.name} of unknown concept {p.concept}")
        for pre in s.preconditions:
            if pre.param not in param_names:
                errors.append(f"{pre.where}: precondition on undeclared param {pre.param}")
            if not onto.has_property(pre.prop):
                errors.append(f"{pre.where}: precondition on undeclared property {pre.prop}")
        outputs = set()
        for step in s.steps:
            for key, expr in step.bindings.items():
                root = expr.split(".", 1)[0]
                if root.startswith("$") and root[1:] not in param_names | outputs:
                    errors.append(f"{step.where}: binding {expr!r} references unknown param")
            if step.kind == "call" and step.target not in onto.scripts:
                errors.append(f"{step.where}: call of unknown script {step.target}")
            if step.kind == "report" and step.target not in REPORT_BUILDERS:
                errors.append(f"{step.where}: report uses unknown builder {step.target!r}")
            if step.kind in ("find-causes", "lookup-answer"):
                outputs.add(step.bindings.get("as", "out"))

    for senses in lex.senses.values():
        for sense in senses:
            if sense.kind in ("concept", "condition") and sense.concept not in onto.concepts:
                errors.append(f"word {sense.surface!r}: unknown concept {sense.concept}")
            if sense.kind in ("feature", "range") and not onto.has_property(sense.prop):
                errors.append(f"word {sense.surface!r}: undeclared property {sense.prop}")

    for rule in lex.rules:
        for tok in rule.pattern:
            cat = getattr(tok, "category", None)
            if cat and cat not in ("prop", "cond", "num", "word") and cat not in onto.concepts:
                errors.append(f"{rule.where}: pattern slot category {cat} is not a concept")
        for _, concept, kv in rule.productions:
            if concept != "_" and not concept.startswith("$") and concept not in onto.concepts:
                errors.append(f"{rule.where}: production concept {concept} unknown")
            for prop in kv:
                if prop in ("subject", "features"):
                    continue  # reserved expansion keys, not slot names
                if not onto.has_property(prop):
                    errors.append(f"{rule.where}: production property {prop} undeclared")

    for t in lex.templates.values():
        if t.concept not in onto.concepts:
            errors.append(f"{t.where}: template matches unknown concept {t.concept}")
        for prop in t.conditions:
            if not onto.has_property(prop):
                errors.append(f"{t.where}: template condition on undeclared property {prop}")


def _find_cycle(onto: Ontology) -> Optional[list[str]]:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in onto.concepts}
    stack: list[str] = []

    def dfs(name: str) -> Optional[list[str]]:
        color[name] = GRAY
        stack.append(name)
        for p in onto.concepts[name].parents:
            if p not in color:
                continue
            if color[p] == GRAY:
                return stack[stack.index(p):] + [p]
            if color[p] == WHITE:
                found = dfs(p)
                if found:
                    return found
        stack.pop()
        color[name] = BLACK
        return None

    for name in onto.concepts:
        if color[name] == WHITE:
            found = dfs(name)
            if found:
                return found
    return None
