"""Shared domain vocabulary: contexts, profiles, turns, labels, affect states.

Every other module consumes these types. All types are immutable value
objects after validation and safe to share across threads.

Canonical serialization is JSON with snake_case keys; enum variants
serialize as the exact PascalCase strings defined here. This shape is a
bit-exact contract for the UI and the committed fixtures.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

HISTOGRAM_TOLERANCE = 1e-9


class ClassimError(Exception):
    """Base class for all domain errors."""


class OutOfRangeGrade(ClassimError):
    def __init__(self, grade: int):
        super().__init__(f"grade_level must be in [1, 12], got {grade}")
        self.grade = grade


class EmptyTopic(ClassimError):
    def __init__(self):
        super().__init__("math_topic must be nonempty")


class UnnormalizedDistillation(ClassimError):
    def __init__(self, dimension: str, total: float):
        super().__init__(
            f"distilled {dimension} histogram sums to {total!r}, expected 1.0"
        )
        self.dimension = dimension
        self.total = total


class OrderedLabel(str, Enum):
    """String enum whose variants carry a total order by listing position."""

    @property
    def rank(self) -> int:
        return list(type(self)).index(self)

    def __lt__(self, other):  # type: ignore[override]
        if isinstance(other, type(self)):
            return self.rank < other.rank
        return NotImplemented

    def __le__(self, other):  # type: ignore[override]
        if isinstance(other, type(self)):
            return self.rank <= other.rank
        return NotImplemented

    def __gt__(self, other):  # type: ignore[override]
        if isinstance(other, type(self)):
            return self.rank > other.rank
        return NotImplemented

    def __ge__(self, other):  # type: ignore[override]
        if isinstance(other, type(self)):
            return self.rank >= other.rank
        return NotImplemented


class ParticipationPattern(str, Enum):
    TEACHER_CALL = "TeacherCall"
    VOLUNTARY = "Voluntary"
    MIXED = "Mixed"


class Engagement(OrderedLabel):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class MathLevel(OrderedLabel):
    BEGINNER = "Beginner"
    BEGINNER_INTERMEDIATE = "BeginnerIntermediate"
    INTERMEDIATE = "Intermediate"
    INTERMEDIATE_PROFICIENT = "IntermediateProficient"
    PROFICIENT = "Proficient"


class ArgumentationLevel(OrderedLabel):
    NONE = "None"
    STATEMENT_ONLY = "StatementOnly"
    SIMPLE_REASONING = "SimpleReasoning"
    PARTIAL_REASONING = "PartialReasoning"
    JUSTIFICATION = "Justification"
    APPLICATION_REASONING = "ApplicationReasoning"
    REASONING_WITH_JUSTIFICATION = "ReasoningWithJustification"
    GUIDANCE_REASONING = "GuidanceReasoning"
    CLARIFICATION = "Clarification"


class EmojiState(str, Enum):
    NEUTRAL = "Neutral"
    HAPPY = "Happy"
    CURIOUS = "Curious"
    CONFUSED = "Confused"
    THINKING = "Thinking"


class TRQFLabel(str, Enum):
    EPISTEMIC = "Epistemic"
    TELEOLOGICAL = "Teleological"
    COMMUNICATIVE = "Communicative"


class ToulminLabel(str, Enum):
    CLAIM = "Claim"
    DATA = "Data"
    WARRANT = "Warrant"
    BACKING = "Backing"
    QUALIFIER = "Qualifier"
    REBUTTAL = "Rebuttal"


def _check_histogram(name: str, hist: Mapping, variants: Sequence) -> dict:
    """Validate a target distribution: full support, nonnegative, sums to 1."""
    out = {}
    for v in variants:
        mass = float(hist.get(v, 0.0))
        if mass < 0:
            raise UnnormalizedDistillation(name, mass)
        out[v] = mass
    total = sum(out.values())
    if abs(total - 1.0) > HISTOGRAM_TOLERANCE:
        raise UnnormalizedDistillation(name, total)
    return out


@dataclass(frozen=True)
class ContextDistillation:
    """Target distributions distilled from the free-text class description.

    Each histogram is keyed by the full variant set of its dimension,
    nonnegative, and sums to 1 within 1e-9.
    """

    engagement: Mapping[Engagement, float]
    math_level: Mapping[MathLevel, float]
    argumentation_level: Mapping[ArgumentationLevel, float]

    def __post_init__(self):
        object.__setattr__(
            self, "engagement",
            _check_histogram("engagement", self.engagement, list(Engagement)))
        object.__setattr__(
            self, "math_level",
            _check_histogram("math_level", self.math_level, list(MathLevel)))
        object.__setattr__(
            self, "argumentation_level",
            _check_histogram("argumentation_level", self.argumentation_level,
                             list(ArgumentationLevel)))

    @staticmethod
    def uniform() -> "ContextDistillation":
        return ContextDistillation(
            engagement={e: 1 / len(Engagement) for e in Engagement},
            math_level={m: 1 / len(MathLevel) for m in MathLevel},
            argumentation_level={
                a: 1 / len(ArgumentationLevel) for a in ArgumentationLevel},
        )

    def to_json_dict(self) -> dict:
        return {
            "engagement": {e.value: self.engagement[e] for e in Engagement},
            "math_level": {m.value: self.math_level[m] for m in MathLevel},
            "argumentation_level": {
                a.value: self.argumentation_level[a] for a in ArgumentationLevel},
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ContextDistillation":
        return ContextDistillation(
            engagement={Engagement(k): v for k, v in d["engagement"].items()},
            math_level={MathLevel(k): v for k, v in d["math_level"].items()},
            argumentation_level={
                ArgumentationLevel(k): v
                for k, v in d["argumentation_level"].items()},
        )


@dataclass(frozen=True)
class ClassroomContext:
    """Classroom configuration: grade, topic, description, and its distillation."""

    grade_level: int
    math_topic: str
    class_description: str
    distilled: Optional[ContextDistillation] = None

    def to_json_dict(self) -> dict:
        return {
            "grade_level": self.grade_level,
            "math_topic": self.math_topic,
            "class_description": self.class_description,
            "distilled": self.distilled.to_json_dict() if self.distilled else None,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ClassroomContext":
        distilled = d.get("distilled")
        return ClassroomContext(
            grade_level=d["grade_level"],
            math_topic=d["math_topic"],
            class_description=d.get("class_description", ""),
            distilled=ContextDistillation.from_json_dict(distilled)
            if distilled else None,
        )


@dataclass(frozen=True)
class ValidatedContext:
    """A ClassroomContext that has passed validate_context.

    Guaranteed: grade in [1, 12], nonempty whitespace-normalized topic, and
    a present, normalized distillation. Retrieval requires this type.
    """

    grade_level: int
    math_topic: str
    class_description: str
    distilled: ContextDistillation

    def to_json_dict(self) -> dict:
        return {
            "grade_level": self.grade_level,
            "math_topic": self.math_topic,
            "class_description": self.class_description,
            "distilled": self.distilled.to_json_dict(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ValidatedContext":
        return ValidatedContext(
            grade_level=d["grade_level"],
            math_topic=d["math_topic"],
            class_description=d.get("class_description", ""),
            distilled=ContextDistillation.from_json_dict(d["distilled"]),
        )


def validate_context(raw: ClassroomContext) -> ValidatedContext:
    """Check all ClassroomContext invariants and normalize whitespace.

    Raises OutOfRangeGrade, EmptyTopic, or UnnormalizedDistillation. A
    missing distillation is filled with the uniform default (callers that
    want keyword-based distillation distill before validating).
    """
    if not (1 <= raw.grade_level <= 12):
        raise OutOfRangeGrade(raw.grade_level)
    topic = " ".join(raw.math_topic.split())
    if not topic:
        raise EmptyTopic()
    description = " ".join(raw.class_description.split())
    distilled = raw.distilled if raw.distilled is not None \
        else ContextDistillation.uniform()
    return ValidatedContext(
        grade_level=raw.grade_level,
        math_topic=topic,
        class_description=description,
        distilled=distilled,
    )


@dataclass(frozen=True)
class StudentProfile:
    """Five-dimension student profile extracted from a lesson transcript.

    The unit of retrieval; profile_id is unique within a dataset.
    """

    profile_id: str
    display_name: str
    participation_pattern: ParticipationPattern
    engagement: Engagement
    math_level: MathLevel
    argumentation_level: ArgumentationLevel
    typical_utterances: tuple[str, ...]
    source_lesson: str

    def __post_init__(self):
        if not self.profile_id:
            raise ClassimError("profile_id must be nonempty")
        if not self.typical_utterances:
            raise ClassimError(
                f"profile {self.profile_id}: typical_utterances must be nonempty")
        object.__setattr__(
            self, "typical_utterances", tuple(self.typical_utterances))

    def to_json_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "display_name": self.display_name,
            "participation_pattern": self.participation_pattern.value,
            "engagement": self.engagement.value,
            "math_level": self.math_level.value,
            "argumentation_level": self.argumentation_level.value,
            "typical_utterances": list(self.typical_utterances),
            "source_lesson": self.source_lesson,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "StudentProfile":
        return StudentProfile(
            profile_id=d["profile_id"],
            display_name=d["display_name"],
            participation_pattern=ParticipationPattern(d["participation_pattern"]),
            engagement=Engagement(d["engagement"]),
            math_level=MathLevel(d["math_level"]),
            argumentation_level=ArgumentationLevel(d["argumentation_level"]),
            typical_utterances=tuple(d["typical_utterances"]),
            source_lesson=d["source_lesson"],
        )


TEACHER = "Teacher"


@dataclass(frozen=True)
class Speaker:
    """Turn attribution: the teacher, or a student identified by profile_id."""

    role: str  # "Teacher" | "Student"
    profile_id: Optional[str] = None

    def __post_init__(self):
        if self.role not in ("Teacher", "Student"):
            raise ClassimError(f"unknown speaker role {self.role!r}")
        if self.role == "Student" and not self.profile_id:
            raise ClassimError("Student speaker requires a profile_id")
        if self.role == "Teacher" and self.profile_id is not None:
            raise ClassimError("Teacher speaker carries no profile_id")

    @property
    def is_teacher(self) -> bool:
        return self.role == "Teacher"

    @staticmethod
    def teacher() -> "Speaker":
        return Speaker(role="Teacher")

    @staticmethod
    def student(profile_id: str) -> "Speaker":
        return Speaker(role="Student", profile_id=profile_id)

    def to_json_dict(self) -> dict:
        d: dict = {"role": self.role}
        if self.profile_id is not None:
            d["profile_id"] = self.profile_id
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "Speaker":
        return Speaker(role=d["role"], profile_id=d.get("profile_id"))


@dataclass(frozen=True)
class DialogueTurn:
    """One attributed utterance, with affect and optional framework labels.

    A turn may carry multiple labels of the same framework; labels are
    multisets. TRQF labels appear only on teacher turns and Toulmin labels
    only on student turns.
    """

    turn_id: int
    speaker: Speaker
    text: str
    affect: Optional[EmojiState] = None
    trqf_labels: tuple[TRQFLabel, ...] = ()
    toulmin_labels: tuple[ToulminLabel, ...] = ()

    def __post_init__(self):
        if not self.text:
            raise ClassimError(f"turn {self.turn_id}: text must be nonempty")
        object.__setattr__(self, "trqf_labels", tuple(self.trqf_labels))
        object.__setattr__(self, "toulmin_labels", tuple(self.toulmin_labels))
        if self.speaker.is_teacher:
            if self.toulmin_labels:
                raise ClassimError(
                    f"turn {self.turn_id}: Toulmin labels on a teacher turn")
            if self.affect is not None:
                raise ClassimError(
                    f"turn {self.turn_id}: affect on a teacher turn")
        else:
            if self.trqf_labels:
                raise ClassimError(
                    f"turn {self.turn_id}: TRQF labels on a student turn")

    def trqf_multiset(self) -> Counter:
        return Counter(self.trqf_labels)

    def toulmin_multiset(self) -> Counter:
        return Counter(self.toulmin_labels)

    def with_labels(self, *, trqf: Sequence[TRQFLabel] = (),
                    toulmin: Sequence[ToulminLabel] = ()) -> "DialogueTurn":
        return DialogueTurn(
            turn_id=self.turn_id, speaker=self.speaker, text=self.text,
            affect=self.affect, trqf_labels=tuple(trqf),
            toulmin_labels=tuple(toulmin))

    def to_json_dict(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "speaker": self.speaker.to_json_dict(),
            "text": self.text,
            "affect": self.affect.value if self.affect else None,
            "trqf_labels": [l.value for l in self.trqf_labels],
            "toulmin_labels": [l.value for l in self.toulmin_labels],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DialogueTurn":
        affect = d.get("affect")
        return DialogueTurn(
            turn_id=d["turn_id"],
            speaker=Speaker.from_json_dict(d["speaker"]),
            text=d["text"],
            affect=EmojiState(affect) if affect else None,
            trqf_labels=tuple(TRQFLabel(x) for x in d.get("trqf_labels", [])),
            toulmin_labels=tuple(
                ToulminLabel(x) for x in d.get("toulmin_labels", [])),
        )


@dataclass(frozen=True)
class Suggestion:
    """Real-time questioning guidance: one reasoning sentence plus exactly
    two recommended questions for the next turn."""

    reasoning: str
    recommended_questions: tuple[str, str]

    def __post_init__(self):
        object.__setattr__(
            self, "recommended_questions", tuple(self.recommended_questions))
        if not self.reasoning.endswith(".") or "?" in self.reasoning:
            raise ClassimError(
                "reasoning must be a single declarative sentence ending with '.'")
        # one sentence: no internal sentence terminator before the final "."
        body = self.reasoning[:-1]
        if any(t in body for t in (". ", "! ", "?")) or body.endswith((".", "!")):
            raise ClassimError("reasoning must be exactly one sentence")
        if len(self.recommended_questions) != 2:
            raise ClassimError("exactly two recommended questions required")
        for q in self.recommended_questions:
            if not q.endswith("?"):
                raise ClassimError(f"recommended question must end with '?': {q!r}")

    def to_json_dict(self) -> dict:
        return {
            "reasoning": self.reasoning,
            "recommended_questions": list(self.recommended_questions),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "Suggestion":
        return Suggestion(
            reasoning=d["reasoning"],
            recommended_questions=tuple(d["recommended_questions"]),
        )


# Fixed pool for display names, decoupled from source transcripts so that
# datasets never leak source-data identities.
DISPLAY_NAME_POOL: tuple[str, ...] = (
    "Ava", "Ben", "Cora", "Dev", "Elena", "Finn", "Grace", "Hugo",
    "Iris", "Jonas", "Kira", "Liam", "Mina", "Noah", "Opal", "Priya",
    "Quinn", "Rosa", "Sam", "Tara", "Uma", "Victor", "Wren", "Xander",
    "Yara", "Zane", "Amara", "Bodhi", "Celia", "Dario",
)


def assign_display_name(position: int) -> str:
    """Deterministic display name for the profile at a dataset position."""
    pool = DISPLAY_NAME_POOL
    name = pool[position % len(pool)]
    round_no = position // len(pool)
    return name if round_no == 0 else f"{name} {round_no + 1}"
