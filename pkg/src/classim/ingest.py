"""Student-profile dataset construction from classroom transcripts.

Transcript fixture format: UTF-8 text, one utterance per line, formatted
``TAG: utterance`` with TAG in {T, S1..Sn, O}. Segmentation attributes
speaker roles from the tag table; profile extraction populates the five
profile dimensions per student.

Two extractor implementations exist behind one interface:

* ScriptedExtractor: a deterministic rule table (documented on the class),
  a reproducible surrogate for model-based summarization. Identical input
  yields a byte-identical dataset file.
* ModelBackedExtractor: delegates to a text-completion provider; its
  output passes through the same validators, and rejected profiles land
  in a review file instead of the dataset.
"""

from __future__ import annotations

import json
import os
import re
import statistics
import tempfile
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .model import (
    ArgumentationLevel,
    ClassimError,
    Engagement,
    MathLevel,
    ParticipationPattern,
    StudentProfile,
    assign_display_name,
)


class MalformedLine(ClassimError):
    def __init__(self, line_no: int, line: str = ""):
        super().__init__(f"line {line_no} lacks a 'TAG:' separator: {line!r}")
        self.line_no = line_no


class UnknownStudent(ClassimError):
    def __init__(self, student_key: str, lesson_id: str = ""):
        super().__init__(
            f"no student segments for {student_key!r}"
            + (f" in lesson {lesson_id!r}" if lesson_id else ""))
        self.student_key = student_key


class ExtractorFailure(ClassimError):
    def __init__(self, cause: Exception):
        super().__init__(f"profile extractor failed: {cause}")
        self.cause = cause


class DuplicateProfileId(ClassimError):
    def __init__(self, profile_id: str):
        super().__init__(f"duplicate profile_id {profile_id!r} in dataset")
        self.profile_id = profile_id


class LessonIngestError(ClassimError):
    """A segmentation or extraction error, annotated with its lesson."""

    def __init__(self, lesson_id: str, cause: ClassimError):
        super().__init__(f"lesson {lesson_id!r}: {cause}")
        self.lesson_id = lesson_id
        self.cause = cause


ROLE_TEACHER = "Teacher"
ROLE_STUDENT = "Student"
ROLE_OTHER = "Other"

_STUDENT_TAG = re.compile(r"^S\d+$")


@dataclass(frozen=True)
class TranscriptSegment:
    """One attributed utterance of a lesson transcript."""

    lesson_id: str
    index: int
    speaker_tag: str
    role: str
    text: str


def _resolve_role(tag: str) -> str:
    if tag == "T":
        return ROLE_TEACHER
    if _STUDENT_TAG.match(tag):
        return ROLE_STUDENT
    return ROLE_OTHER


def segment_transcript(raw: str, lesson_id: str) -> list[TranscriptSegment]:
    """Split a transcript into ordered, role-attributed segments.

    One segment per nonempty line; raises MalformedLine for nonempty lines
    without a ``TAG:`` separator. Line numbers are 1-based over all lines
    including blanks.
    """
    segments: list[TranscriptSegment] = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tag, sep, utterance = stripped.partition(":")
        tag = tag.strip()
        utterance = utterance.strip()
        if not sep or not tag or " " in tag or not utterance:
            raise MalformedLine(line_no, line)
        segments.append(TranscriptSegment(
            lesson_id=lesson_id,
            index=len(segments),
            speaker_tag=tag,
            role=_resolve_role(tag),
            text=utterance,
        ))
    return segments


def student_keys(segments: Sequence[TranscriptSegment]) -> list[str]:
    """Distinct student tags of a lesson, in numeric tag order."""
    keys = {s.speaker_tag for s in segments if s.role == ROLE_STUDENT}
    return sorted(keys, key=lambda k: int(k[1:]))


class ProfileExtractor:
    """Interface: turn a student's lesson evidence into a StudentProfile."""

    def extract(self, segments: Sequence[TranscriptSegment], student_key: str,
                name_position: int = 0) -> StudentProfile:
        raise NotImplementedError


def _tokens(text: str) -> list[str]:
    return text.split()

_BACKCHANNELS = {
    "yes", "no", "yeah", "okay", "ok", "um", "uh", "hmm", "mhm", "maybe",
}

_CLAIM_VERBS = (" is ", " are ", " equals ", "i think", "i got", "it's ")
_GENERAL_RULE = ("always", "whenever", "any number", "every time", "in general")
_APPLICATION = ("we can use", "so we can", "that works for", "apply")
_GUIDANCE = ("what if", "have you tried", "why don't you try", "you could")
_CLARIFICATION = ("you said", "your answer", "what do you mean", "mean by")


def _argumentation_level(utterances: Sequence[str]) -> ArgumentationLevel:
    """First-match keyword ladder over a student's utterances.

    Evaluated top-down; the first rule that fires on any utterance wins:

    1. Clarification: a question about another speaker's statement
       (ends with "?" and contains one of: "you said", "your answer",
       "what do you mean", "mean by").
    2. GuidanceReasoning: steers another's approach ("what if",
       "have you tried", "why don't you try", "you could").
    3. ReasoningWithJustification: a claim-verb + "because" utterance
       plus a general-rule word anywhere ("always", "whenever",
       "any number", "every time", "in general").
    4. ApplicationReasoning: "because" plus an application phrase
       ("we can use", "so we can", "that works for", "apply").
    5. Justification: claim verb and "because" in one utterance.
    6. PartialReasoning: a "because" whose trailing clause has fewer
       than 3 tokens (reasoning started but not completed).
    7. SimpleReasoning: contains "because", "so that", or "since".
    8. StatementOnly: any utterance beyond bare backchannels
       (yes/no/okay/um and similar single words).
    9. None: only backchannels.
    """
    lowered = [u.lower() for u in utterances]

    def q_about_other(u: str) -> bool:
        return u.rstrip().endswith("?") and any(c in u for c in _CLARIFICATION)

    if any(q_about_other(u) for u in lowered):
        return ArgumentationLevel.CLARIFICATION
    if any(any(g in u for g in _GUIDANCE) for u in lowered):
        return ArgumentationLevel.GUIDANCE_REASONING

    def has_claim(u: str) -> bool:
        head = u.split("because", 1)[0]
        return any(v in f" {head}" for v in _CLAIM_VERBS)

    justified = [u for u in lowered if "because" in u and has_claim(u)]
    if justified and any(any(g in u for g in _GENERAL_RULE) for u in lowered):
        return ArgumentationLevel.REASONING_WITH_JUSTIFICATION
    if any("because" in u and any(a in u for a in _APPLICATION)
           for u in lowered):
        return ArgumentationLevel.APPLICATION_REASONING
    if justified:
        return ArgumentationLevel.JUSTIFICATION

    def partial(u: str) -> bool:
        if "because" not in u:
            return False
        tail = u.rsplit("because", 1)[1].strip(" .!,?")
        return len(_tokens(tail)) < 3

    if any(partial(u) for u in lowered):
        return ArgumentationLevel.PARTIAL_REASONING
    if any("because" in u or "so that" in u or "since" in u for u in lowered):
        return ArgumentationLevel.SIMPLE_REASONING
    if any(u.strip(" .!,?") not in _BACKCHANNELS for u in lowered):
        return ArgumentationLevel.STATEMENT_ONLY
    return ArgumentationLevel.NONE


class ScriptedExtractor(ProfileExtractor):
    """Deterministic rule-table extractor.

    Rules (applied per student, over all lesson segments):

    * participation_pattern: let f = fraction of the student's turns that
      directly follow a teacher turn containing the student's tag as a
      whole word. f > 0.7 -> TeacherCall; f < 0.3 -> Voluntary; else Mixed.
    * engagement: per-lesson terciles of utterance counts (inclusive-method
      tercile cut points lo, hi over all students of the lesson):
      count <= lo -> Low, count >= hi -> High, else Medium. If lo == hi
      (degenerate lesson), everyone is Medium.
    * math_level: mean tokens per utterance, binned over
      [<=4, <=8, <=14, <=22, >22] onto the five levels in order.
    * argumentation_level: first-match keyword ladder, see
      _argumentation_level.
    * typical_utterances: the student's utterances, longest first
      (ties by transcript order), at most 5, verbatim.
    """

    def extract(self, segments: Sequence[TranscriptSegment], student_key: str,
                name_position: int = 0) -> StudentProfile:
        own = [s for s in segments if s.speaker_tag == student_key]
        if not own:
            lesson = segments[0].lesson_id if segments else ""
            raise UnknownStudent(student_key, lesson)
        lesson_id = own[0].lesson_id
        utterances = [s.text for s in own]

        tag_pattern = re.compile(rf"\b{re.escape(student_key)}\b")
        called = 0
        for seg in own:
            prev = segments[seg.index - 1] if seg.index > 0 else None
            if prev and prev.role == ROLE_TEACHER and tag_pattern.search(prev.text):
                called += 1
        f = called / len(own)
        if f > 0.7:
            participation = ParticipationPattern.TEACHER_CALL
        elif f < 0.3:
            participation = ParticipationPattern.VOLUNTARY
        else:
            participation = ParticipationPattern.MIXED

        counts = {}
        for s in segments:
            if s.role == ROLE_STUDENT:
                counts[s.speaker_tag] = counts.get(s.speaker_tag, 0) + 1
        engagement = _tercile_engagement(counts, counts[student_key])

        mean_len = statistics.mean(len(_tokens(u)) for u in utterances)
        if mean_len <= 4:
            math_level = MathLevel.BEGINNER
        elif mean_len <= 8:
            math_level = MathLevel.BEGINNER_INTERMEDIATE
        elif mean_len <= 14:
            math_level = MathLevel.INTERMEDIATE
        elif mean_len <= 22:
            math_level = MathLevel.INTERMEDIATE_PROFICIENT
        else:
            math_level = MathLevel.PROFICIENT

        typical = sorted(
            range(len(utterances)),
            key=lambda i: (-len(utterances[i]), i))[:5]
        return StudentProfile(
            profile_id=f"{lesson_id}-{student_key}",
            display_name=assign_display_name(name_position),
            participation_pattern=participation,
            engagement=engagement,
            math_level=math_level,
            argumentation_level=_argumentation_level(utterances),
            typical_utterances=tuple(utterances[i] for i in typical),
            source_lesson=lesson_id,
        )


def _tercile_engagement(counts: dict, own_count: int) -> Engagement:
    values = sorted(counts.values())
    if len(values) == 1:
        return Engagement.MEDIUM
    lo, hi = statistics.quantiles(values, n=3, method="inclusive")
    if lo == hi:
        return Engagement.MEDIUM
    if own_count <= lo:
        return Engagement.LOW
    if own_count >= hi:
        return Engagement.HIGH
    return Engagement.MEDIUM


_MODEL_PROMPT = """\
Summarize the student below from their classroom utterances.
Reply with JSON only, with keys participation_pattern (TeacherCall|Voluntary|Mixed),
engagement (Low|Medium|High),
math_level (Beginner|BeginnerIntermediate|Intermediate|IntermediateProficient|Proficient),
argumentation_level (None|StatementOnly|SimpleReasoning|PartialReasoning|Justification|ApplicationReasoning|ReasoningWithJustification|GuidanceReasoning|Clarification).

Student {key} utterances:
{utterances}
"""


class ModelBackedExtractor(ProfileExtractor):
    """Extractor that asks a completion provider for the four categorical
    dimensions; typical_utterances stay transcript-derived so the verbatim
    invariant holds regardless of backend."""

    def __init__(self, provider):
        self.provider = provider

    def extract(self, segments: Sequence[TranscriptSegment], student_key: str,
                name_position: int = 0) -> StudentProfile:
        base = ScriptedExtractor().extract(segments, student_key, name_position)
        utterances = "\n".join(f"- {u}" for u in base.typical_utterances)
        prompt = _MODEL_PROMPT.format(key=student_key, utterances=utterances)
        try:
            raw = self.provider.complete(prompt)
            parsed = json.loads(raw)
            return StudentProfile(
                profile_id=base.profile_id,
                display_name=base.display_name,
                participation_pattern=ParticipationPattern(
                    parsed["participation_pattern"]),
                engagement=Engagement(parsed["engagement"]),
                math_level=MathLevel(parsed["math_level"]),
                argumentation_level=ArgumentationLevel(
                    parsed["argumentation_level"]),
                typical_utterances=base.typical_utterances,
                source_lesson=base.source_lesson,
            )
        except Exception as exc:  # provider/parse errors surface with cause
            raise ExtractorFailure(exc) from exc


def extract_profile(segments: Sequence[TranscriptSegment], student_key: str,
                    extractor: ProfileExtractor,
                    name_position: int = 0) -> StudentProfile:
    """Extract one student's profile from a lesson's segments."""
    return extractor.extract(segments, student_key, name_position)


@dataclass(frozen=True)
class ProfileDataset:
    """All profiles extracted from a lesson corpus, in build order."""

    profiles: tuple[StudentProfile, ...]

    def __post_init__(self):
        seen = set()
        for p in self.profiles:
            if p.profile_id in seen:
                raise DuplicateProfileId(p.profile_id)
            seen.add(p.profile_id)

    def write_jsonl(self, path: str) -> None:
        """Atomic write: temp file in the target directory, then rename."""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                for p in self.profiles:
                    fh.write(json.dumps(
                        p.to_json_dict(), ensure_ascii=False,
                        sort_keys=True) + "\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def read_jsonl(path: str) -> "ProfileDataset":
        profiles = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    profiles.append(StudentProfile.from_json_dict(
                        json.loads(line)))
        return ProfileDataset(profiles=tuple(profiles))


def build_dataset(lessons: Iterable[tuple[str, str]],
                  extractor: ProfileExtractor,
                  out_path: Optional[str] = None) -> ProfileDataset:
    """Extract one profile per distinct (lesson, student) pair.

    ``lessons`` yields (lesson_id, raw transcript text). Segment and
    extraction errors propagate with lesson context. When out_path is
    given the dataset is persisted as JSON Lines, one profile per line;
    a duplicate profile_id aborts before anything is written.
    """
    profiles: list[StudentProfile] = []
    position = 0
    for lesson_id, raw in lessons:
        try:
            segments = segment_transcript(raw, lesson_id)
            for key in student_keys(segments):
                profiles.append(extractor.extract(segments, key, position))
                position += 1
        except ClassimError as exc:
            raise LessonIngestError(lesson_id, exc) from exc
    dataset = ProfileDataset(profiles=tuple(profiles))
    if out_path is not None:
        dataset.write_jsonl(out_path)
    return dataset


def load_lessons_dir(directory: str) -> list[tuple[str, str]]:
    """Read every *.txt lesson in a directory, sorted by filename."""
    lessons = []
    for name in sorted(os.listdir(directory)):
        if name.endswith(".txt"):
            path = os.path.join(directory, name)
            with open(path, encoding="utf-8") as fh:
                lessons.append((os.path.splitext(name)[0], fh.read()))
    return lessons
