import json
import random

import pytest

from stratac.frames import (ConceptRef, Corefer, EpisodicMemory, Frame, FrameError,
                            FrameId, FrameRef, Literal, MeaningRep, MRKind,
                            NumericRange, Provenance, Scalar, SituationModel,
                            content_equivalent,
                            mr_from_json, mr_to_json, parse_filler,
                            parse_frame_blocks, render_filler, render_frame_block,
                            render_mr)


def test_frame_id_render_and_parse():
    fid = FrameId("DESCRIBE-MECHANICAL-PROBLEM", 1)
    assert str(fid) == "DESCRIBE-MECHANICAL-PROBLEM.1"
    assert FrameId.parse("ENGINE.12") == FrameId("ENGINE", 12)
    with pytest.raises(FrameError):
        FrameId.parse("engine.1")
    with pytest.raises(FrameError):
        FrameId("ENGINE", 0)


class TestNumericRange:
    def test_two_sided_open(self):
        r = NumericRange.parse("0.0001<>0.1")
        assert r.lo == 0.0001 and r.hi == 0.1
        assert not r.lo_inclusive and not r.hi_inclusive
        assert r.contains(0.05)
        assert not r.contains(0.1)
        assert not r.contains(0.0001)
        assert r.render() == "0.0001<>0.1"

    def test_one_sided(self):
        assert NumericRange.parse("<0.7").contains(0.69)
        assert not NumericRange.parse("<0.7").contains(0.7)
        assert NumericRange.parse("<=0.7").contains(0.7)
        assert NumericRange.parse(">0.7").contains(0.9)
        assert NumericRange.parse(">=0.7").render() == ">=0.7"

    def test_inclusive_two_sided_round_trip(self):
        r = NumericRange(0.0, 1.0, True, True)
        assert NumericRange.parse(r.render()) == r

    def test_invalid(self):
        with pytest.raises(FrameError):
            NumericRange(2.0, 1.0)


def test_filler_render_parse_round_trip():
    fillers = [
        FrameRef(FrameId("OVERHEAT", 1)),
        ConceptRef("THERMOSTAT"),
        Corefer(FrameId("ENGINE", 1)),
        Scalar(0.5),
        Scalar(3.0),
        Literal("EPISTEMIC"),
        Literal("has spaces"),
        NumericRange(hi=0.7),
        NumericRange(0.0001, 0.1),
    ]
    for f in fillers:
        assert parse_filler(render_filler(f)) == f


def test_frame_block_layout_matches_paper_style(ship_situation):
    sit = ship_situation
    over = sit.new_instance("OVERHEAT")
    desc = sit.new_instance("DESCRIBE-MECHANICAL-PROBLEM")
    frame = sit.frame(desc)
    frame.add("agent", FrameRef(FrameId("HUMAN", 1)))
    frame.add("beneficiary", FrameRef(FrameId("ROBOT", 1)))
    frame.add("theme", FrameRef(over))
    text = render_frame_block(frame)
    assert text.splitlines()[0] == "#DESCRIBE-MECHANICAL-PROBLEM.1"
    assert " agent       #HUMAN.1" in text
    parsed = parse_frame_blocks(text)
    assert parsed[0].slots == frame.slots


def test_mr_json_round_trip(ship_situation):
    sit = ship_situation
    over = sit.new_instance("OVERHEAT")
    eng = sit.new_instance("ENGINE")
    sit.frame(over).add("theme", FrameRef(eng))
    sit.frame(eng).add("age", NumericRange(hi=0.1))
    mr = MeaningRep(MRKind.TMR, over, {over: sit.frame(over), eng: sit.frame(eng)},
                    source="utt:1", author="daniel")
    again = mr_from_json(json.loads(json.dumps(mr_to_json(mr))))
    assert render_mr(again) == render_mr(mr)
    assert again.kind == MRKind.TMR and again.root == over


class TestInstancing:
    def test_first_instance_is_one(self, ship_situation):
        assert ship_situation.new_instance("ENGINE") == FrameId("ENGINE", 1)

    def test_second_instance_increments(self, ship_situation):
        ship_situation.new_instance("ENGINE")
        assert ship_situation.new_instance("ENGINE") == FrameId("ENGINE", 2)

    def test_unknown_concept_rejected(self, ship_situation):
        from stratac.ontology import OntologyError
        with pytest.raises(OntologyError):
            ship_situation.new_instance("FLYING-SAUCER")

    def test_interleaved_ordinals_dense_per_concept(self, ship_situation):
        # oracle: independent per-concept counters over the same call sequence
        rng = random.Random(7)
        concepts = ["ENGINE", "THERMOSTAT", "KEY"]
        expected = {c: 0 for c in concepts}
        for _ in range(1000):
            c = rng.choice(concepts)
            expected[c] += 1
            assert ship_situation.new_instance(c) == FrameId(c, expected[c])
        for c in concepts:
            ordinals = sorted(f.ordinal for f in ship_situation.frames if f.concept == c)
            assert ordinals == list(range(1, expected[c] + 1))


class TestCoreference:
    def test_single_candidate_binds(self, ship_situation):
        sit = ship_situation
        target = sit.new_instance("ENGINE")
        mention = sit.new_instance("ENGINE")
        result = sit.resolve_coreference(sit.frame(mention))
        assert result.kind == "BOUND" and result.target == target

    def test_empty_situation_gives_none(self, ship_situation):
        mention = ship_situation.new_instance("ENGINE")
        assert ship_situation.resolve_coreference(ship_situation.frame(mention)).kind == "NONE"

    def test_three_candidates_ambiguous(self, ship_situation):
        sit = ship_situation
        keys = [sit.new_instance("KEY") for _ in range(3)]
        mention = sit.new_instance("KEY")
        result = sit.resolve_coreference(sit.frame(mention))
        assert result.kind == "AMBIGUOUS"
        assert result.candidates == keys

    def test_descendant_widening(self, ship_situation):
        sit = ship_situation
        thermo = sit.new_instance("THERMOSTAT")
        mention = sit.new_instance("DEVICE")
        result = sit.resolve_coreference(sit.frame(mention))
        assert result.kind == "BOUND" and result.target == thermo

    def test_deterministic_under_unrelated_insertions(self, ship_knowledge):
        onto, _ = ship_knowledge
        outcomes = []
        for unrelated_first in (True, False):
            sit = SituationModel(onto)
            if unrelated_first:
                sit.new_instance("TABLE")
                engine = sit.new_instance("ENGINE")
            else:
                engine = sit.new_instance("ENGINE")
                sit.new_instance("TABLE")
            mention = sit.new_instance("ENGINE")
            result = sit.resolve_coreference(sit.frame(mention))
            outcomes.append((result.kind, result.target.concept))
        assert outcomes[0] == outcomes[1] == ("BOUND", "ENGINE")


class TestEpisodicMemory:
    def test_location_fact_recalled(self, ship_situation):
        mem = EpisodicMemory()
        fact = Frame(FrameId("THERMOSTAT", 1), provenance=Provenance.MEMORY)
        fact.add("location", ConceptRef("STORES"))
        mem.remember(fact, tick=0)
        hits = mem.recall("THERMOSTAT", {"location": None})
        assert len(hits) == 1
        assert hits[0].first("location") == ConceptRef("STORES")

    def test_recall_on_empty_is_empty(self):
        assert EpisodicMemory().recall("THERMOSTAT") == []

    def test_recall_matches_linear_scan_oracle(self):
        rng = random.Random(3)
        mem = EpisodicMemory()
        shadow = []
        concepts = ["KEY", "ENGINE", "THERMOSTAT"]
        for i in range(50):
            concept = rng.choice(concepts)
            frame = Frame(FrameId(concept, i + 1))
            frame.add("value", Scalar(rng.random()))
            mem.remember(frame, tick=i)
            shadow.append(frame)
        for concept in concepts:
            expected = [f.id for f in reversed(shadow) if f.concept == concept]
            assert [f.id for f in mem.recall(concept)] == expected

    def test_append_only_serialization_unchanged_by_recall(self):
        mem = EpisodicMemory()
        frame = Frame(FrameId("KEY", 1))
        frame.add("color", Literal("silver"))
        mem.remember(frame, tick=1)
        before = mem.serialize()
        mem.recall("KEY")
        mem.recall("KEY", {"color": None})
        assert mem.serialize() == before


class TestQuery:
    def test_filter_by_color(self, ship_situation):
        sit = ship_situation
        for color in ("silver", "silver", "gold"):
            fid = sit.new_instance("KEY")
            sit.frame(fid).add("color", Literal(color))
        hits = sit.query("KEY", {"color": Literal("silver")})
        assert len(hits) == 2
        assert all(f.first("color") == Literal("silver") for f in hits)

    def test_no_constraints_returns_all(self, ship_situation):
        sit = ship_situation
        ids = {sit.new_instance("KEY") for _ in range(3)}
        assert {f.id for f in sit.query("KEY")} == ids

    def test_range_predicate(self, ship_situation):
        sit = ship_situation
        for age in (0.05, 0.5):
            fid = sit.new_instance("THERMOSTAT")
            sit.frame(fid).add("age", Scalar(age))
        hits = sit.query("THERMOSTAT", {"age": NumericRange(hi=0.1)})
        assert len(hits) == 1
        assert hits[0].first("age") == Scalar(0.05)

    def test_descendants_included(self, ship_situation):
        sit = ship_situation
        sit.new_instance("THERMOSTAT")
        sit.new_instance("ENGINE")
        assert len(sit.query("DEVICE")) == 2

    def test_unknown_property_rejected(self, ship_situation):
        sit = ship_situation
        sit.new_instance("KEY")
        with pytest.raises(FrameError):
            sit.query("KEY", {"wingspan": None})


def test_mr_closure_detects_dangling_ref(ship_situation):
    sit = ship_situation
    over = sit.new_instance("OVERHEAT")
    sit.frame(over).add("theme", FrameRef(FrameId("ENGINE", 99)))
    mr = MeaningRep(MRKind.TMR, over, {over: sit.frame(over)})
    assert mr.dangling_refs(sit) == [FrameId("ENGINE", 99)]
    eng = sit.new_instance("ENGINE")
    sit.frames[FrameId("ENGINE", 99)] = sit.frames.pop(eng)
    assert mr.dangling_refs(sit) == []


def test_content_equivalence_ignores_ordinals_and_coref(ship_knowledge):
    onto, _ = ship_knowledge

    def build(offset: int, with_coref: bool) -> MeaningRep:
        sit = SituationModel(onto)
        for _ in range(offset):
            sit.new_instance("OVERHEAT")
        over = sit.new_instance("OVERHEAT")
        eng = sit.new_instance("ENGINE")
        sit.frame(over).add("theme", FrameRef(eng))
        if with_coref:
            sit.frame(eng).add("corefer", Corefer(FrameId("ENGINE", 1)))
        return MeaningRep(MRKind.TMR, over,
                          {over: sit.frame(over), eng: sit.frame(eng)})

    assert content_equivalent(build(0, True), build(5, False))


def test_content_equivalence_strips_default_wrapper(ship_situation):
    sit = ship_situation
    over = sit.new_instance("OVERHEAT")
    inform = sit.new_instance("INFORM")
    sit.frame(inform).add("theme", FrameRef(over))
    bare = MeaningRep(MRKind.GMR, over, {over: sit.frame(over)})
    wrapped = MeaningRep(MRKind.TMR, inform,
                         {inform: sit.frame(inform), over: sit.frame(over)})
    assert content_equivalent(bare, wrapped)
