"""Turn-based classroom simulation.

A session holds an immutable context and roster, an append-only
transcript, and the live affect map. All randomness flows through a
counter-based generator: draw number ``rng_cursor`` under seed ``seed``
is a pure function of the pair, so replaying the same teacher-turn
sequence with the same seed reproduces a byte-identical transcript, and
crash recovery can resume mid-stream from (seed, rng_cursor) alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .model import (
    ArgumentationLevel,
    ClassimError,
    DialogueTurn,
    EmojiState,
    Engagement,
    ParticipationPattern,
    Speaker,
    StudentProfile,
    ValidatedContext,
)
from .retrieval import ProfileIndex, RosterSelection, select_roster

RESPONDENT_COUNT_CHOICES = (1, 2, 3, 4)
LISTENER_THINKING_PROBABILITY = 0.2
FILLER_PROBABILITY = 0.3

ENGAGEMENT_WEIGHT = {
    Engagement.HIGH: 3, Engagement.MEDIUM: 2, Engagement.LOW: 1}
PARTICIPATION_WEIGHT = {
    ParticipationPattern.VOLUNTARY: 3,
    ParticipationPattern.MIXED: 2,
    ParticipationPattern.TEACHER_CALL: 1,
}


class UnknownAddressee(ClassimError):
    def __init__(self, profile_id: str):
        super().__init__(f"addressed student {profile_id!r} is not in the roster")
        self.profile_id = profile_id


class GeneratorFailure(ClassimError):
    def __init__(self, cause: Exception):
        super().__init__(f"response generator failed: {cause}")
        self.cause = cause


def seeded_draw(seed: int, cursor: int) -> float:
    """Draw number ``cursor`` under ``seed``, uniform in [0, 1).

    Counter-based: hash the (seed, cursor) pair, so any draw is
    reproducible without replaying earlier ones.
    """
    digest = hashlib.sha256(f"{seed}:{cursor}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


@dataclass(frozen=True)
class GeneratedResponse:
    """One student's reply to a teacher turn: text plus updated affect."""

    profile_id: str
    text: str
    affect: EmojiState

    def __post_init__(self):
        if not self.text:
            raise ClassimError("generated response text must be nonempty")

    def to_json_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "text": self.text,
            "affect": self.affect.value,
        }


class ResponseGenerator:
    """Interface: produce a student's reply given profile, context, and the
    transcript tail. ``draw`` pulls the next seeded uniform draw."""

    def generate(self, profile: StudentProfile, context: ValidatedContext,
                 transcript_tail: Sequence[DialogueTurn],
                 draw: Callable[[], float]) -> GeneratedResponse:
        raise NotImplementedError


@dataclass
class SessionState:
    """Mutable simulation state; one logical writer per session."""

    session_id: str
    context: ValidatedContext
    roster: RosterSelection
    profiles: dict  # profile_id -> StudentProfile, exactly the roster
    problem_statement: str
    seed: int
    rng_cursor: int = 0
    transcript: list = field(default_factory=list)
    affect: dict = field(default_factory=dict)
    suggestions_enabled: bool = True

    def draw(self) -> float:
        value = seeded_draw(self.seed, self.rng_cursor)
        self.rng_cursor += 1
        return value

    def next_turn_id(self) -> int:
        return self.transcript[-1].turn_id + 1 if self.transcript else 0

    def append_turn(self, turn: DialogueTurn) -> None:
        if self.transcript and turn.turn_id <= self.transcript[-1].turn_id:
            raise ClassimError("turn_ids must be strictly increasing")
        self.transcript.append(turn)

    def roster_profiles(self) -> list[StudentProfile]:
        return [self.profiles[pid] for pid in self.roster.members]


def default_problem_statement(context: ValidatedContext) -> str:
    return (f"Today we're working on {context.math_topic}. "
            "Let's look at the first problem together.")


def start_session(
    context: ValidatedContext,
    index: ProfileIndex,
    seed: int,
    session_id: str = "session",
    roster_size: int = 20,
    problem_statement: Optional[str] = None,
) -> SessionState:
    """Create a session: select the roster, set every student's affect to
    Neutral, and seed the configured math problem statement as the default
    opening teacher prompt. The transcript starts empty (students are
    silent until the teacher speaks)."""
    roster = select_roster(index, context, roster_size=roster_size, seed=seed)
    return SessionState(
        session_id=session_id,
        context=context,
        roster=roster,
        profiles={pid: index.get(pid) for pid in roster.members},
        problem_statement=problem_statement or default_problem_statement(context),
        seed=seed,
        affect={pid: EmojiState.NEUTRAL for pid in roster.members},
    )


def _select_respondents(state: SessionState,
                        max_respondents: Optional[int] = None) -> list[str]:
    """Seeded weighted sampling without replacement.

    Procedure (documented so an oracle can replay it): one draw picks
    n uniformly from {1, 2, 3, 4}; then n times, a draw r in [0, 1)
    scaled by the total remaining weight walks the roster in roster
    order accumulating weights w = engagement_weight * participation_weight
    (High/Medium/Low = 3/2/1, Voluntary/Mixed/TeacherCall = 3/2/1) and
    picks the first member whose cumulative weight exceeds r.
    """
    n = RESPONDENT_COUNT_CHOICES[
        int(state.draw() * len(RESPONDENT_COUNT_CHOICES))]
    n = min(n, len(state.roster.members))
    if max_respondents is not None:
        n = min(n, max(1, max_respondents))
    remaining = list(state.roster.members)
    picked: list[str] = []
    for _ in range(n):
        weights = []
        for pid in remaining:
            p = state.profiles[pid]
            weights.append(ENGAGEMENT_WEIGHT[p.engagement]
                           * PARTICIPATION_WEIGHT[p.participation_pattern])
        total = sum(weights)
        r = state.draw() * total
        acc = 0.0
        chosen_idx = len(remaining) - 1
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                chosen_idx = i
                break
        picked.append(remaining.pop(chosen_idx))
    return picked


def post_teacher_turn(
    state: SessionState,
    text: str,
    generator: ResponseGenerator,
    addressed: Optional[Sequence[str]] = None,
    max_respondents: Optional[int] = None,
) -> tuple[list[GeneratedResponse], dict]:
    """Append a teacher turn, generate the respondents' replies, and drift
    listeners' affect.

    Respondents are ``addressed`` when given (validated against the
    roster), otherwise drawn by the documented weighted-sampling
    procedure. Non-respondents currently Neutral move to Thinking with
    seeded probability 0.2. Returns the responses and the full updated
    affect map."""
    if not text:
        raise ClassimError("teacher turn text must be nonempty")
    if addressed is not None:
        for pid in addressed:
            if pid not in state.affect:
                raise UnknownAddressee(pid)

    state.append_turn(DialogueTurn(
        turn_id=state.next_turn_id(), speaker=Speaker.teacher(), text=text))

    respondents = list(addressed) if addressed is not None \
        else _select_respondents(state, max_respondents)

    responses: list[GeneratedResponse] = []
    tail = state.transcript[-6:]
    for pid in respondents:
        try:
            resp = generator.generate(
                state.profiles[pid], state.context, tail, state.draw)
        except ClassimError:
            raise
        except Exception as exc:
            raise GeneratorFailure(exc) from exc
        if not isinstance(resp.affect, EmojiState):
            resp = GeneratedResponse(  # malformed affect coerced, never fatal
                profile_id=resp.profile_id, text=resp.text,
                affect=EmojiState.NEUTRAL)
        responses.append(resp)
        state.affect[pid] = resp.affect
        state.append_turn(DialogueTurn(
            turn_id=state.next_turn_id(),
            speaker=Speaker.student(pid),
            text=resp.text,
            affect=resp.affect,
        ))

    respondent_set = set(respondents)
    for pid in state.roster.members:
        if pid in respondent_set:
            continue
        if state.affect[pid] is EmojiState.NEUTRAL \
                and state.draw() < LISTENER_THINKING_PROBABILITY:
            state.affect[pid] = EmojiState.THINKING
    return responses, dict(state.affect)


CONTRACTIONS = (
    ("do not", "don't"),
    ("does not", "doesn't"),
    ("did not", "didn't"),
    ("cannot", "can't"),
    ("can not", "can't"),
    ("it is", "it's"),
    ("It is", "It's"),
    ("that is", "that's"),
    ("That is", "That's"),
    ("we are", "we're"),
    ("We are", "We're"),
    ("I am", "I'm"),
    ("is not", "isn't"),
    ("I have", "I've"),
)

FILLERS = ("um,", "well,", "I think")

# last-teacher-question category guess -> reply templates by reasoning tier
_TEMPLATES = {
    "method": {
        "high": "I {verb} because that keeps both sides equal, and it works for any number.",
        "mid": "I tried to {verb} first, because that looked simpler.",
        "low": "I just {verb}, I guess.",
    },
    "explain": {
        "high": "It's {answer} because when you check it against the problem, it fits.",
        "mid": "I got {answer}, because of the last step.",
        "low": "Um, {answer}? I'm not sure how to say it.",
    },
    "general": {
        "high": "I think it's {answer} because the same rule worked on the other one.",
        "mid": "Maybe {answer}, because it looks like the example.",
        "low": "{answer}.",
    },
}

_HARD_QUESTION_CUES = ("why", "how", "explain", "prove", "convince")


def _question_category(text: str) -> str:
    lowered = text.lower()
    if "why did you" in lowered or "why do we" in lowered:
        return "method"
    if "explain" in lowered or "how do you know" in lowered:
        return "explain"
    return "general"


def _reasoning_tier(level: ArgumentationLevel) -> str:
    if level >= ArgumentationLevel.JUSTIFICATION:
        return "high"
    if level >= ArgumentationLevel.SIMPLE_REASONING:
        return "mid"
    return "low"


def apply_contractions(text: str) -> str:
    for full, short in CONTRACTIONS:
        text = text.replace(full, short)
    return text


class ScriptedGenerator(ResponseGenerator):
    """Deterministic template engine.

    Text: with one draw, either surface one of the profile's typical
    utterances (draw < 0.5 and one exists) or fill a template keyed by
    (reasoning tier, last-teacher-question category guess); then apply
    the fixed contraction table and, when a further draw < 0.3, prepend a
    filler picked by one more draw. Affect by rule: reasoning tier high ->
    Happy or Thinking (one draw); tier low on a hard question -> Confused;
    otherwise Curious or Neutral (one draw)."""

    def generate(self, profile: StudentProfile, context: ValidatedContext,
                 transcript_tail: Sequence[DialogueTurn],
                 draw: Callable[[], float]) -> GeneratedResponse:
        question = next(
            (t.text for t in reversed(transcript_tail)
             if t.speaker.is_teacher), "")
        category = _question_category(question)
        tier = _reasoning_tier(profile.argumentation_level)
        hard = any(c in question.lower() for c in _HARD_QUESTION_CUES)

        use_typical = draw() < 0.5 and profile.typical_utterances
        if use_typical:
            pick = int(draw() * len(profile.typical_utterances))
            text = profile.typical_utterances[pick]
        else:
            template = _TEMPLATES[category][tier]
            text = template.format(
                verb="multiplied both sides",
                answer="the same as before")
        text = apply_contractions(text)
        if draw() < FILLER_PROBABILITY:
            filler = FILLERS[int(draw() * len(FILLERS))]
            text = f"{filler} {text}"

        if tier == "high":
            affect = EmojiState.HAPPY if draw() < 0.5 else EmojiState.THINKING
        elif tier == "low" and hard:
            affect = EmojiState.CONFUSED
        else:
            affect = EmojiState.CURIOUS if draw() < 0.5 else EmojiState.NEUTRAL
        return GeneratedResponse(
            profile_id=profile.profile_id, text=text, affect=affect)


class ModelBackedGenerator(ResponseGenerator):
    """Generator that asks a completion provider for text and affect in one
    structured call; a malformed affect token is coerced to Neutral rather
    than failing the session."""

    def __init__(self, provider):
        self.provider = provider

    def generate(self, profile: StudentProfile, context: ValidatedContext,
                 transcript_tail: Sequence[DialogueTurn],
                 draw: Callable[[], float]) -> GeneratedResponse:
        import json as _json
        history = "\n".join(
            f"{'Teacher' if t.speaker.is_teacher else 'Student'}: {t.text}"
            for t in transcript_tail)
        prompt = (
            "You are a grade {g} student in a {topic} lesson. "
            "Profile: engagement {e}, math level {m}, argumentation {a}. "
            "Speak naturally with fillers and contractions.\n"
            "Conversation so far:\n{h}\n"
            'Reply with JSON {{"text": ..., "affect": '
            '"Neutral|Happy|Curious|Confused|Thinking"}}.'
        ).format(g=context.grade_level, topic=context.math_topic,
                 e=profile.engagement.value, m=profile.math_level.value,
                 a=profile.argumentation_level.value, h=history)
        raw = self.provider.complete(prompt)
        try:
            parsed = _json.loads(raw)
            text = str(parsed["text"])
        except Exception as exc:
            raise GeneratorFailure(exc) from exc
        try:
            affect = EmojiState(parsed.get("affect"))
        except ValueError:
            affect = EmojiState.NEUTRAL
        return GeneratedResponse(
            profile_id=profile.profile_id, text=text, affect=affect)
