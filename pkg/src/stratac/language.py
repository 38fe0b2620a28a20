"""Constrained-language interpreter and semantic generator.

Interpretation turns an utterance into a TMR by matching pack-declared
grammar rules over lexicon senses; generation realizes a GMR through
surface templates and picks the best candidate with a deterministic
scorer.  Both directions are closed-vocabulary by design: input the
grammar cannot parse yields an "uninterpreted" TMR rather than a guess,
and every generated sentence must re-interpret to content equivalent to
the GMR it came from.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .frames import (ConceptRef, Corefer, Frame, FrameId, FrameRef, Literal,
                     MeaningRep, MRKind, NumericRange, Provenance, Scalar,
                     SituationModel, SlotFiller, content_equivalent, parse_filler)
from .ontology import GrammarRule, Lexicon, Ontology, Template, WordSense

UNINTERPRETED = "UNINTERPRETED-UTTERANCE"


class LanguageError(Exception):
    pass


class GenerationError(LanguageError):
    """Raised when a GMR frame has no realization (names the frame)."""


@dataclass
class Utterance:
    speaker: str
    text: str
    tick: int = 0

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise LanguageError("empty utterance")


@dataclass
class CandidateUtterance:
    text: str
    score: float
    features: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# pattern syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    word: str


@dataclass(frozen=True)
class Alt:
    options: tuple[str, ...]


@dataclass(frozen=True)
class Opt:
    word: str


@dataclass(frozen=True)
class Slot:
    var: str
    category: str     # concept name, or "prop" | "cond" | "num"
    repeat: bool = False
    min_zero: bool = False


_SLOT_RE = re.compile(r"^\$([a-z][a-z0-9-]*):([A-Za-z][A-Za-z0-9-]*)([+*])?$")


def parse_pattern(words: list[str]) -> list:
    """Parse a rule pattern: literals, $var:CAT slots, ( a | b ) and [ opt ]."""
    out: list = []
    i = 0
    while i < len(words):
        w = words[i]
        if w == "(":
            j = words.index(")", i)
            options = tuple(x for x in words[i + 1:j] if x != "|")
            if not options:
                raise ValueError("empty alternation")
            out.append(Alt(options))
            i = j + 1
        elif w == "[":
            j = words.index("]", i)
            inner = [x for x in words[i + 1:j]]
            if len(inner) != 1:
                raise ValueError("optional group takes exactly one word")
            out.append(Opt(inner[0]))
            i = j + 1
        elif w.startswith("$"):
            m = _SLOT_RE.match(w)
            if not m:
                raise ValueError(f"bad slot token: {w!r}")
            mark = m.group(3)
            out.append(Slot(m.group(1), m.group(2),
                            repeat=mark in ("+", "*"), min_zero=mark == "*"))
            i += 1
        else:
            out.append(Lit(w.lower()))
            i += 1
    return out


# ---------------------------------------------------------------------------
# tokenizing and matching
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z][a-z'-]*|\d+(?:\.\d+)?")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class SlotMatch:
    senses: list[WordSense] = field(default_factory=list)
    number: Optional[float] = None

    @property
    def sense(self) -> WordSense:
        return self.senses[0]


def match_rule(rule: GrammarRule, tokens: list[str], lexicon: Lexicon,
               ontology: Ontology) -> Optional[dict[str, SlotMatch]]:
    """Backtracking match of a rule pattern over the token list."""

    def concept_options(pos: int, category: str):
        limit = min(lexicon.max_phrase_len, len(tokens) - pos)
        for length in range(limit, 0, -1):
            phrase = " ".join(tokens[pos:pos + length])
            for sense in lexicon.senses_of(phrase):
                if sense.kind == "concept" and ontology.subsumes(category, sense.concept):
                    yield sense, length

    def typed_options(pos: int, kinds: tuple[str, ...]):
        limit = min(lexicon.max_phrase_len, len(tokens) - pos)
        for length in range(limit, 0, -1):
            phrase = " ".join(tokens[pos:pos + length])
            for sense in lexicon.senses_of(phrase):
                if sense.kind in kinds:
                    yield sense, length

    def step(pi: int, ti: int, bound: dict) -> Optional[dict]:
        if pi == len(rule.pattern):
            return dict(bound) if ti == len(tokens) else None
        tok = rule.pattern[pi]
        if isinstance(tok, Lit):
            if ti < len(tokens) and tokens[ti] == tok.word:
                return step(pi + 1, ti + 1, bound)
            return None
        if isinstance(tok, Alt):
            if ti < len(tokens) and tokens[ti] in tok.options:
                return step(pi + 1, ti + 1, bound)
            return None
        if isinstance(tok, Opt):
            if ti < len(tokens) and tokens[ti] == tok.word:
                result = step(pi + 1, ti + 1, bound)
                if result is not None:
                    return result
            return step(pi + 1, ti, bound)
        assert isinstance(tok, Slot)
        if tok.category == "num":
            if ti < len(tokens):
                try:
                    value = float(tokens[ti])
                except ValueError:
                    return None
                bound[tok.var] = SlotMatch(number=value)
                result = step(pi + 1, ti + 1, bound)
                if result is not None:
                    return result
                del bound[tok.var]
            return None
        if tok.category == "cond":
            for sense, length in typed_options(ti, ("condition",)):
                bound[tok.var] = SlotMatch([sense])
                result = step(pi + 1, ti + length, bound)
                if result is not None:
                    return result
                del bound[tok.var]
            return None
        if tok.category == "prop":
            if not tok.repeat:
                for sense, length in typed_options(ti, ("feature", "range")):
                    bound[tok.var] = SlotMatch([sense])
                    result = step(pi + 1, ti + length, bound)
                    if result is not None:
                        return result
                    del bound[tok.var]
                # a bare (non-repeating) prop slot is optional when absent
                return step(pi + 1, ti, bound)

            def more(ti2: int, acc: list[WordSense]) -> Optional[dict]:
                if acc or tok.min_zero:
                    bound[tok.var] = SlotMatch(list(acc))
                    result = step(pi + 1, ti2, bound)
                    if result is not None:
                        return result
                    del bound[tok.var]
                start = ti2
                if acc and start < len(tokens) and tokens[start] == "and":
                    start += 1
                for sense, length in typed_options(start, ("feature", "range")):
                    acc.append(sense)
                    result = more(start + length, acc)
                    if result is not None:
                        return result
                    acc.pop()
                return None

            return more(ti, [])
        # concept category
        for sense, length in concept_options(ti, tok.category):
            bound[tok.var] = SlotMatch([sense])
            result = step(pi + 1, ti + length, bound)
            if result is not None:
                return result
            del bound[tok.var]
        return None

    if any(isinstance(t, Slot) and t.category not in ("prop", "cond", "num")
           and not ontology.has_concept(t.category) for t in rule.pattern):
        return None
    return step(0, 0, {})


# ---------------------------------------------------------------------------
# interpretation
# ---------------------------------------------------------------------------

def interpret(utterance: Utterance, lexicon: Lexicon, situation: SituationModel,
              speaker: Optional[FrameId] = None, addressee: Optional[FrameId] = None,
              rules: Optional[list[GrammarRule]] = None, tick: int = 0) -> MeaningRep:
    """Utterance -> TMR.  Unparseable input yields an uninterpreted TMR."""
    ontology = situation.ontology
    if ontology is None:
        raise LanguageError("interpretation needs an ontology-backed situation model")
    tokens = tokenize(utterance.text)
    rules = lexicon.rules if rules is None else rules

    for rule in rules:
        bound = match_rule(rule, tokens, lexicon, ontology)
        if bound is not None:
            return _build_tmr(rule, bound, utterance, lexicon, situation,
                              speaker, addressee, tick)

    unknown = [t for t in tokens if not lexicon.senses_of(t)]
    fid = situation.new_instance(UNINTERPRETED, Provenance.TMR, tick)
    frame = situation.frame(fid)
    frame.provenance = Provenance.TMR
    frame.add("raw-text", Literal(utterance.text))
    if speaker is not None:
        frame.add("agent", FrameRef(speaker))
    for word in unknown:
        frame.add("unknown-word", Literal(word))
    return MeaningRep(MRKind.TMR, fid, {fid: frame},
                      source=f"utt:{utterance.tick}", author=utterance.speaker)


def _build_tmr(rule: GrammarRule, bound: dict[str, SlotMatch], utterance: Utterance,
               lexicon: Lexicon, situation: SituationModel, speaker, addressee,
               tick: int) -> MeaningRep:
    frames: dict[FrameId, Frame] = {}
    by_var: dict[str, FrameId] = {}
    root_id: Optional[FrameId] = None

    # first pass: mint a frame per production (generic vars stay conceptual)
    for var, concept, _ in rule.productions:
        name = var.lstrip("$")
        if name in rule.generic:
            continue
        if concept == "_" or concept.startswith("$"):
            match = bound.get(name)
            if match is None:
                raise LanguageError(f"rule {rule.name}: production var {var} not bound")
            concept = match.sense.concept
        fid = situation.new_instance(concept, Provenance.TMR, tick)
        frames[fid] = situation.frame(fid)
        by_var[name] = fid
        if root_id is None:
            root_id = fid

    def var_filler(name: str) -> SlotFiller:
        if name in rule.generic:
            sense = bound[name].sense
            return ConceptRef(sense.concept)
        if name in by_var:
            return FrameRef(by_var[name])
        raise LanguageError(f"rule {rule.name}: unknown production var ${name}")

    def resolve_expr(expr: str) -> SlotFiller:
        if expr == "@speaker":
            if speaker is None:
                raise LanguageError(f"rule {rule.name} needs a speaker instance")
            return FrameRef(speaker)
        if expr == "@addressee":
            if addressee is None:
                raise LanguageError(f"rule {rule.name} needs an addressee instance")
            return FrameRef(addressee)
        if expr.startswith("$"):
            name = expr[1:]
            if name in bound and bound[name].number is not None:
                return Scalar(bound[name].number)
            return var_filler(name)
        return parse_filler(expr)

    # second pass: fill slots
    for var, _, kv in rule.productions:
        name = var.lstrip("$")
        if name in rule.generic:
            continue
        frame = frames[by_var[name]]
        for key, expr in kv.items():
            if key == "subject":
                sense = bound[name].sense
                subject = resolve_expr(expr)
                if sense.role:
                    frame.add(sense.role, subject)
                if sense.crange is not None:
                    frame.add("domain", subject)
                    frame.add("range", sense.crange)
                continue
            if key == "features":
                fname = expr.lstrip("$")
                for fsense in bound[fname].senses if fname in bound else []:
                    frame.add(fsense.prop, fsense.filler)
                continue
            frame.add(key, resolve_expr(expr))

    # definite references go through coreference resolution
    for name in sorted(rule.definite):
        if name not in by_var:
            continue
        frame = frames[by_var[name]]
        result = situation.resolve_coreference(frame)
        if result.kind == "BOUND":
            frame.add("corefer", Corefer(result.target))
            situation.link_coref(frame.id, result.target)

    assert root_id is not None
    return MeaningRep(MRKind.TMR, root_id, frames,
                      source=f"utt:{utterance.tick}", author=utterance.speaker)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def generate(gmr: MeaningRep, lexicon: Lexicon, ontology: Ontology,
             author: str = "", check_roundtrip: bool = True) -> tuple[Utterance, list[CandidateUtterance]]:
    """GMR -> utterance.  Deterministic selection over template candidates."""
    if gmr.kind != MRKind.GMR:
        raise GenerationError(f"not a GMR: kind={gmr.kind.value}")
    candidates = realize_candidates(gmr, lexicon, ontology)
    if not candidates:
        raise GenerationError(f"no realization for frame {gmr.root}")
    ordered = sorted(candidates, key=lambda c: (-c.score, len(c.text), c.text))
    chosen: Optional[CandidateUtterance] = None
    if check_roundtrip:
        for cand in ordered:
            if _roundtrip_ok(cand.text, gmr, lexicon, ontology):
                chosen = cand
                break
        if chosen is None:
            raise GenerationError(
                f"no candidate for {gmr.root} re-interprets to equivalent content")
    else:
        chosen = select_candidate(candidates)
    return Utterance(author, chosen.text), candidates


def realize_candidates(gmr: MeaningRep, lexicon: Lexicon,
                       ontology: Ontology) -> list[CandidateUtterance]:
    root = gmr.frame(gmr.root)
    out: list[CandidateUtterance] = []
    for template in _matching_templates(root, gmr, lexicon, ontology):
        for text in template.texts:
            try:
                surface = _fill_template(text, root, gmr, lexicon, ontology)
            except GenerationError:
                continue
            score = template.specificity * 10.0 - 0.001 * len(surface)
            out.append(CandidateUtterance(surface, score,
                                          {"template": template.name}))
    return out


def select_candidate(candidates: list[CandidateUtterance]) -> CandidateUtterance:
    """Argmax by score; ties broken by shortest text, then lexicographic."""
    if not candidates:
        raise LanguageError("no candidates to select from")
    return min(candidates, key=lambda c: (-c.score, len(c.text), c.text))


def _matching_templates(root: Frame, gmr: MeaningRep, lexicon: Lexicon,
                        ontology: Ontology) -> list[Template]:
    found = []
    for concept in [root.concept] + sorted(ontology.ancestors(root.concept) - {root.concept}):
        for template in lexicon.templates_by_concept.get(concept, []):
            if _conditions_hold(template, root, gmr, ontology):
                found.append(template)
    return found


def _conditions_hold(template: Template, root: Frame, gmr: MeaningRep,
                     ontology: Ontology) -> bool:
    for prop, spec in template.conditions.items():
        fillers = root.get(prop)
        if not fillers:
            return False
        if spec == "*":
            continue
        ok = False
        for f in fillers:
            if isinstance(f, FrameRef):
                target = gmr.frames.get(f.target)
                if target is not None and ontology.subsumes(spec, target.concept):
                    ok = True
            elif isinstance(f, ConceptRef) and ontology.has_concept(spec):
                if ontology.subsumes(spec, f.concept):
                    ok = True
            elif isinstance(f, Literal) and f.text == spec:
                ok = True
        if not ok:
            return False
    return True


_PLACEHOLDER_RE = re.compile(r"\{(np|cond|value|lex)\s+([a-z-]+(?:\.[a-z-]+)*)\}")


def _fill_template(text: str, root: Frame, gmr: MeaningRep, lexicon: Lexicon,
                   ontology: Ontology) -> str:
    def replace(m: re.Match) -> str:
        kind, path = m.group(1), m.group(2)
        filler = _follow_path(root, path, gmr)
        if kind == "np":
            return _np(filler, gmr, lexicon, ontology)
        if kind == "cond":
            return _condition_clause(filler, gmr, lexicon, ontology)
        if kind == "value":
            return _value_text(filler)
        if kind == "lex":
            return _lexeme_of_filler(filler, gmr, ontology)
        raise GenerationError(f"unknown placeholder kind {kind}")

    surface = _PLACEHOLDER_RE.sub(replace, text)
    surface = re.sub(r"\s+", " ", surface).strip()
    return surface[:1].upper() + surface[1:] if surface else surface


def _follow_path(root: Frame, path: str, gmr: MeaningRep) -> SlotFiller:
    frame = root
    parts = path.split(".")
    for i, prop in enumerate(parts):
        filler = frame.first(prop)
        if filler is None:
            raise GenerationError(f"frame {frame.id} has no slot {prop!r}")
        if i == len(parts) - 1:
            return filler
        if not isinstance(filler, FrameRef) or filler.target not in gmr.frames:
            raise GenerationError(f"path {path!r} leaves the meaning representation")
        frame = gmr.frames[filler.target]
    raise GenerationError(f"empty path {path!r}")


def _indefinite_article(noun: str) -> str:
    return "an" if noun[:1] in "aeiou" else "a"


def _np(filler: SlotFiller, gmr: MeaningRep, lexicon: Lexicon,
        ontology: Ontology) -> str:
    if isinstance(filler, ConceptRef):
        noun = ontology.lexeme_of(filler.concept)
        if ontology.has_concept("ROOM") and ontology.subsumes("ROOM", filler.concept):
            return f"the {noun}"
        return f"{_indefinite_article(noun)} {noun}"
    if isinstance(filler, (FrameRef, Corefer)):
        frame = gmr.frames.get(filler.target)
        if frame is None:
            raise GenerationError(f"np target {filler.target} not in meaning representation")
        noun = ontology.lexeme_of(frame.concept)
        adjectives = _adjectives(frame, lexicon)
        phrase = " ".join(adjectives + [noun])
        if frame.has("corefer"):
            return f"the {phrase}"
        return f"{_indefinite_article(phrase)} {phrase}"
    raise GenerationError(f"cannot render noun phrase for {filler!r}")


def _adjectives(frame: Frame, lexicon: Lexicon) -> list[str]:
    found = []
    for prop in sorted(frame.slots):
        if prop == "corefer":
            continue
        for filler in frame.slots[prop]:
            surface = _surface_for_assertion(prop, filler, lexicon)
            if surface:
                found.append(surface)
    return found


def _surface_for_assertion(prop: str, filler: SlotFiller, lexicon: Lexicon) -> Optional[str]:
    for senses in lexicon.senses.values():
        for sense in senses:
            if sense.kind in ("feature", "range") and sense.prop == prop \
                    and sense.filler == filler:
                return sense.surface
    return None


def _condition_clause(filler: SlotFiller, gmr: MeaningRep, lexicon: Lexicon,
                      ontology: Ontology) -> str:
    if not isinstance(filler, FrameRef) or filler.target not in gmr.frames:
        raise GenerationError(f"condition clause needs an in-graph frame: {filler!r}")
    frame = gmr.frames[filler.target]
    for senses in lexicon.senses.values():
        for sense in senses:
            if sense.kind != "condition" or sense.concept != frame.concept:
                continue
            if sense.crange is not None:
                if frame.first("range") != sense.crange:
                    continue
                subject = frame.first("domain")
            else:
                subject = frame.first(sense.role) if sense.role else None
            if subject is None:
                continue
            verb = "are" if _is_plural(subject, gmr, ontology) else "is"
            return f"{_np(subject, gmr, lexicon, ontology)} {verb} {sense.surface}"
    raise GenerationError(f"no condition wording for frame {frame.id}")


def _is_plural(filler: SlotFiller, gmr: MeaningRep, ontology: Ontology) -> bool:
    concept = None
    if isinstance(filler, ConceptRef):
        concept = filler.concept
    elif isinstance(filler, (FrameRef, Corefer)) and filler.target in gmr.frames:
        concept = gmr.frames[filler.target].concept
    if concept is None:
        return False
    return ontology.lexeme_of(concept).endswith("s")


def _value_text(filler: SlotFiller) -> str:
    if isinstance(filler, Scalar):
        from .frames import _num
        return _num(filler.value)
    if isinstance(filler, Literal):
        return filler.text
    if isinstance(filler, NumericRange):
        return filler.render()
    raise GenerationError(f"cannot render value for {filler!r}")


def _lexeme_of_filler(filler: SlotFiller, gmr: MeaningRep, ontology: Ontology) -> str:
    if isinstance(filler, ConceptRef):
        return ontology.lexeme_of(filler.concept)
    if isinstance(filler, (FrameRef, Corefer)) and filler.target in gmr.frames:
        return ontology.lexeme_of(gmr.frames[filler.target].concept)
    raise GenerationError(f"cannot render lexeme for {filler!r}")


def _roundtrip_ok(text: str, gmr: MeaningRep, lexicon: Lexicon,
                  ontology: Ontology) -> bool:
    scratch = SituationModel(ontology)

    def participant(prop: str, default: str) -> Optional[FrameId]:
        filler = gmr.frames[gmr.root].first(prop) if gmr.root in gmr.frames else None
        concept = filler.target.concept if isinstance(filler, FrameRef) else default
        if not ontology.has_concept(concept):
            return None
        return scratch.new_instance(concept)

    speaker = participant("agent", "ROBOT")
    addressee = participant("beneficiary", "HUMAN")
    tmr = interpret(Utterance("generator-check", text), lexicon, scratch,
                    speaker=speaker, addressee=addressee)
    if tmr.frame(tmr.root).concept == UNINTERPRETED:
        return False
    return content_equivalent(tmr, gmr)


# ---------------------------------------------------------------------------
# thought paraphrasing (reasoning-trace rendering)
# ---------------------------------------------------------------------------

def paraphrase_thought(entry, ontology: Ontology) -> str:
    """One deterministic English line per reasoning-trace entry."""
    kind = getattr(entry, "kind", "")
    payload = dict(getattr(entry, "payload", {}) or {})
    template = _THOUGHT_TEMPLATES.get(kind)
    if template is None:
        return f"{kind}: {json.dumps(payload, sort_keys=True)}"
    return template(payload, ontology)


def _goal_phrase(payload: dict, ontology: Ontology) -> str:
    concept = payload.get("goal-concept", "")
    if concept and ontology.has_concept(concept):
        return ontology.lexeme_of(concept)
    return concept.lower() or "the goal"


_THOUGHT_TEMPLATES = {
    "GOAL-POSTED": lambda p, o: f"I put the goal of {_goal_phrase(p, o)} on my agenda.",
    "PLAN-CREATED": lambda p, o: f"I created a plan from the {p.get('script', '?')} script.",
    "PRECOND-UNMET": lambda p, o: (
        f"I cannot start yet: the {p.get('property', '?')} of {p.get('about', 'the object')} "
        f"is not known."),
    "PRECOND-SATISFIED": lambda p, o: (
        f"The {p.get('property', '?')} of {p.get('about', 'the object')} is now known "
        f"(from {p.get('from', 'the situation')})."),
    "METAPLAN-APPLIED": lambda p, o: (
        f"I will {p.get('how', 'apply a meta-plan')} to satisfy the missing precondition."),
    "COMMAND-ISSUED": lambda p, o: (
        f"I told my controller to {str(p.get('verb', '?')).lower().replace('-', ' ')} "
        f"(command {p.get('command-id', '?')})."),
    "CANDIDATE-CONFIRMED": lambda p, o: (
        f"The candidate {str(p.get('concept', 'object')).lower()} matches what I expected."),
    "CANDIDATE-REJECTED": lambda p, o: (
        f"The candidate {str(p.get('concept', 'object')).lower()} does not match; "
        f"I will keep searching."),
    "GOAL-SATISFIED": lambda p, o: f"I achieved the goal of {_goal_phrase(p, o)}.",
    "GOAL-ABANDONED": lambda p, o: f"I abandoned the goal of {_goal_phrase(p, o)}.",
}
