import pytest
from hypothesis import given, strategies as st

from classim.model import (
    ArgumentationLevel,
    ClassimError,
    ClassroomContext,
    ContextDistillation,
    DialogueTurn,
    EmojiState,
    EmptyTopic,
    Engagement,
    MathLevel,
    OutOfRangeGrade,
    ParticipationPattern,
    Speaker,
    StudentProfile,
    Suggestion,
    TRQFLabel,
    ToulminLabel,
    UnnormalizedDistillation,
    assign_display_name,
    validate_context,
)


def test_enum_variant_counts():
    assert len(EmojiState) == 5
    assert len(TRQFLabel) == 3
    assert len(ToulminLabel) == 6
    assert len(MathLevel) == 5
    assert len(ArgumentationLevel) == 9
    assert len(ParticipationPattern) == 3


def test_ordinal_enums_follow_listing_order():
    assert MathLevel.BEGINNER < MathLevel.PROFICIENT
    assert list(MathLevel) == sorted(MathLevel)
    assert ArgumentationLevel.NONE < ArgumentationLevel.STATEMENT_ONLY
    assert ArgumentationLevel.JUSTIFICATION < ArgumentationLevel.CLARIFICATION
    assert list(ArgumentationLevel) == sorted(ArgumentationLevel)
    assert Engagement.LOW < Engagement.MEDIUM < Engagement.HIGH


def test_validate_context_accepts_valid():
    ctx = validate_context(ClassroomContext(
        grade_level=7, math_topic="Ratios and Division",
        class_description="", distilled=ContextDistillation.uniform()))
    assert ctx.grade_level == 7
    assert ctx.math_topic == "Ratios and Division"


def test_validate_context_normalizes_whitespace():
    ctx = validate_context(ClassroomContext(
        grade_level=7, math_topic="  Ratios   and\tDivision ",
        class_description="two  spaces"))
    assert ctx.math_topic == "Ratios and Division"
    assert ctx.class_description == "two spaces"


@pytest.mark.parametrize("grade", [0, 13, -1])
def test_validate_context_rejects_grade(grade):
    with pytest.raises(OutOfRangeGrade):
        validate_context(ClassroomContext(
            grade_level=grade, math_topic="x", class_description=""))


def test_validate_context_rejects_empty_topic():
    with pytest.raises(EmptyTopic):
        validate_context(ClassroomContext(
            grade_level=7, math_topic="   ", class_description=""))


def test_unnormalized_distillation_rejected():
    with pytest.raises(UnnormalizedDistillation):
        ContextDistillation(
            engagement={Engagement.LOW: 0.5, Engagement.MEDIUM: 0.4,
                        Engagement.HIGH: 0.2},
            math_level={m: 0.2 for m in MathLevel},
            argumentation_level={a: 1 / 9 for a in ArgumentationLevel})


def test_negative_histogram_mass_rejected():
    with pytest.raises(UnnormalizedDistillation):
        ContextDistillation(
            engagement={Engagement.LOW: -0.5, Engagement.MEDIUM: 1.0,
                        Engagement.HIGH: 0.5},
            math_level={m: 0.2 for m in MathLevel},
            argumentation_level={a: 1 / 9 for a in ArgumentationLevel})


def _profile(**overrides):
    base = dict(
        profile_id="lesson01-S1",
        display_name="Ava",
        participation_pattern=ParticipationPattern.VOLUNTARY,
        engagement=Engagement.HIGH,
        math_level=MathLevel.INTERMEDIATE,
        argumentation_level=ArgumentationLevel.JUSTIFICATION,
        typical_utterances=("I think it's 3n because there are three.",),
        source_lesson="lesson01",
    )
    base.update(overrides)
    return StudentProfile(**base)


def test_profile_requires_typical_utterances():
    with pytest.raises(ClassimError):
        _profile(typical_utterances=())


def test_profile_round_trip():
    p = _profile()
    assert StudentProfile.from_json_dict(p.to_json_dict()) == p


def test_context_round_trip():
    raw = ClassroomContext(
        grade_level=8, math_topic="Writing Variable Expressions",
        class_description="strong algebra foundations",
        distilled=ContextDistillation.uniform())
    assert ClassroomContext.from_json_dict(raw.to_json_dict()) == raw
    ctx = validate_context(raw)
    from classim.model import ValidatedContext
    assert ValidatedContext.from_json_dict(ctx.to_json_dict()) == ctx


def test_distillation_round_trip():
    d = ContextDistillation.uniform()
    assert ContextDistillation.from_json_dict(d.to_json_dict()) == d


def test_enum_serialization_is_pascal_case():
    assert EmojiState.NEUTRAL.value == "Neutral"
    assert MathLevel.BEGINNER_INTERMEDIATE.value == "BeginnerIntermediate"
    assert ArgumentationLevel.REASONING_WITH_JUSTIFICATION.value \
        == "ReasoningWithJustification"
    assert ParticipationPattern.TEACHER_CALL.value == "TeacherCall"


def test_teacher_turn_rejects_toulmin_labels_and_affect():
    with pytest.raises(ClassimError):
        DialogueTurn(turn_id=0, speaker=Speaker.teacher(), text="hi",
                     toulmin_labels=(ToulminLabel.CLAIM,))
    with pytest.raises(ClassimError):
        DialogueTurn(turn_id=0, speaker=Speaker.teacher(), text="hi",
                     affect=EmojiState.NEUTRAL)


def test_student_turn_rejects_trqf_labels():
    with pytest.raises(ClassimError):
        DialogueTurn(turn_id=0, speaker=Speaker.student("p1"), text="hi",
                     trqf_labels=(TRQFLabel.EPISTEMIC,))


def test_turn_round_trip():
    t = DialogueTurn(
        turn_id=3, speaker=Speaker.student("lesson01-S1"), text="It's five.",
        affect=EmojiState.HAPPY,
        toulmin_labels=(ToulminLabel.CLAIM, ToulminLabel.CLAIM,
                        ToulminLabel.DATA))
    assert DialogueTurn.from_json_dict(t.to_json_dict()) == t
    teacher = DialogueTurn(
        turn_id=4, speaker=Speaker.teacher(), text="Why?",
        trqf_labels=(TRQFLabel.EPISTEMIC,))
    assert DialogueTurn.from_json_dict(teacher.to_json_dict()) == teacher


def test_turn_multisets_allow_repeats():
    t = DialogueTurn(
        turn_id=0, speaker=Speaker.teacher(), text="Why? And why again?",
        trqf_labels=(TRQFLabel.EPISTEMIC, TRQFLabel.EPISTEMIC))
    assert t.trqf_multiset()[TRQFLabel.EPISTEMIC] == 2


def test_suggestion_contract():
    s = Suggestion(
        reasoning="Push students to justify their answers.",
        recommended_questions=("How do you know?", "Can you show us why?"))
    assert Suggestion.from_json_dict(s.to_json_dict()) == s


@pytest.mark.parametrize("reasoning,questions", [
    ("No terminator", ("A?", "B?")),
    ("Contains a question? Yes.", ("A?", "B?")),
    ("Two sentences. Here.", ("A?", "B?")),
    ("Fine sentence.", ("Not a question.", "B?")),
])
def test_suggestion_rejects_bad_shapes(reasoning, questions):
    with pytest.raises(ClassimError):
        Suggestion(reasoning=reasoning, recommended_questions=questions)


@given(st.integers(min_value=0, max_value=200))
def test_display_names_unique_per_round(position):
    name = assign_display_name(position)
    assert name
    # within one pool round, names never collide
    if position < 30:
        others = {assign_display_name(i) for i in range(30)}
        assert len(others) == 30


@given(st.lists(
    st.floats(min_value=0, max_value=1, allow_nan=False), min_size=3,
    max_size=3))
def test_histogram_validation_total(masses):
    hist = dict(zip(Engagement, masses))
    total = sum(masses)
    uniform5 = {m: 0.2 for m in MathLevel}
    uniform9 = {a: 1 / 9 for a in ArgumentationLevel}
    if abs(total - 1.0) > 1e-9:
        with pytest.raises(UnnormalizedDistillation):
            ContextDistillation(hist, uniform5, uniform9)
    else:
        ContextDistillation(hist, uniform5, uniform9)
