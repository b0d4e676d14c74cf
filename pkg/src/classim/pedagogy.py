"""Question and argument coding, live suggestions, annotation verification,
and end-of-session feedback.

Two coding frameworks are implemented:

* Teacher questions are coded Epistemic (probing how a student knows),
  Teleological (probing why a method or goal was chosen), or Communicative
  (prompting articulation to others).
* Student responses are decomposed into Claim, Data, Warrant, Backing,
  Qualifier, Rebuttal.

The scripted classifiers are pure functions of (text, context window)
driven by the cue tables below, which are this repo's operative
definitions of the categories. Suggestions shown to the user never name
the frameworks: a forbidden-term filter enforces that contract.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import metrics as metrics_mod
from .model import (
    ClassimError,
    DialogueTurn,
    Suggestion,
    TRQFLabel,
    ToulminLabel,
)


class ClassifierFailure(ClassimError):
    def __init__(self, cause: Exception):
        super().__init__(f"classifier backend failed: {cause}")
        self.cause = cause


class WrongFramework(ClassimError):
    def __init__(self, msg: str):
        super().__init__(msg)


class FormatViolation(ClassimError):
    def __init__(self, msg: str):
        super().__init__(msg)


class PreconditionViolation(ClassimError):
    pass


# Terms that would expose the underlying frameworks to the user. "claim",
# "data", and "backing" are everyday words a natural suggestion may use,
# so they are deliberately absent. Overridable via a config text file
# (one term per line, see load_forbidden_terms).
DEFAULT_FORBIDDEN_TERMS = (
    "Toulmin",
    "TRQF",
    "Teacher Rational Questioning",
    "epistemic",
    "teleological",
    "communicative",
    "warrant",
    "rebuttal",
    "qualifier",
)


def load_forbidden_terms(path: str) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        terms = [line.strip() for line in fh if line.strip()]
    return tuple(terms)


def forbidden_terms_in(text: str,
                       terms: Sequence[str] = DEFAULT_FORBIDDEN_TERMS) -> list[str]:
    """Case-insensitive whole-word (or whole-phrase) scan."""
    hits = []
    for term in terms:
        if re.search(rf"\b{re.escape(term)}\b", text, re.IGNORECASE):
            hits.append(term)
    return hits


# Cue tables: lowercase substring cues per category. A teacher turn is
# split on "?" and each question segment is coded independently, so one
# turn with several questions yields a multiset with repeats.
TRQF_CUES: dict[TRQFLabel, tuple[str, ...]] = {
    TRQFLabel.EPISTEMIC: (
        "how do you know", "why do you think", "what makes you think",
        "how can you be sure", "are you sure", "how did you get",
        "is that always true", "what do you notice",
    ),
    TRQFLabel.TELEOLOGICAL: (
        "why did you", "why did we", "why choose", "why use",
        "what was your goal", "what were you trying",
        "why that way", "why start",
    ),
    TRQFLabel.COMMUNICATIVE: (
        "explain to the class", "tell the class", "tell us more",
        "say more", "share your", "explain your idea", "in your own words",
        "can you repeat", "explain it to", "tell everyone", "who can restate",
    ),
}

# Fallback for a question segment no cue matches: "why"/"how" openers
# probe the student's knowing (Epistemic); directive verbs prompt
# articulation (Communicative); any other elicitation defaults to
# Epistemic, since it asks what the student holds to be true.
_DIRECTIVE_VERBS = ("tell", "share", "explain", "describe", "show us")

TOULMIN_CUES: dict[ToulminLabel, tuple[str, ...]] = {
    ToulminLabel.CLAIM: (
        "it's ", "it is ", "that's ", "the answer", " is ", " are ",
        " equals ", "i got", "i think",
    ),
    ToulminLabel.DATA: ("because",),
    ToulminLabel.WARRANT: (
        "always", "whenever", "any number", "every time", "that means",
        "in general", "works for any", "if you",
    ),
    ToulminLabel.BACKING: (
        "by definition", "the rule says", "teacher said", "the book",
        "it's a rule", "a convention", "the definition of",
    ),
    ToulminLabel.QUALIFIER: (
        "maybe", "probably", "i guess", "might", "i think", "not sure",
    ),
    ToulminLabel.REBUTTAL: (
        "unless", "except when", "disagree", "that's not right",
        "doesn't work", "not always",
    ),
}

_OFF_TASK = re.compile(
    r"^(yes|no|yeah|okay|ok|um+|uh+|hmm+|what|huh|idk|i don'?t know)[.!?]?$",
    re.IGNORECASE)


@dataclass(frozen=True)
class CueHit:
    label: object  # TRQFLabel | ToulminLabel
    cue: str


class QuestionClassifier:
    """Interface: code one teacher move against its transcript context."""

    def classify(self, text: str,
                 transcript_context: Sequence[DialogueTurn] = ()) -> Counter:
        raise NotImplementedError


class ResponseClassifier:
    def classify(self, text: str,
                 transcript_context: Sequence[DialogueTurn] = ()) -> Counter:
        raise NotImplementedError


def _question_segments(text: str) -> list[str]:
    parts = [p.strip() for p in text.split("?")]
    return [p for p in parts if p]


class ScriptedQuestionClassifier(QuestionClassifier):
    """Cue-table coder for teacher questions; multi-label per segment."""

    def classify(self, text: str,
                 transcript_context: Sequence[DialogueTurn] = ()) -> Counter:
        if not text:
            raise PreconditionViolation("question text must be nonempty")
        return Counter(hit.label for hit in self.explain(text))

    def explain(self, text: str) -> list[CueHit]:
        hits: list[CueHit] = []
        interrogative = "?" in text
        for segment in _question_segments(text):
            lowered = segment.lower()
            fired = False
            for label, cues in TRQF_CUES.items():
                for cue in cues:
                    if cue in lowered:
                        hits.append(CueHit(label, cue))
                        fired = True
                        break
            if fired:
                continue
            if not interrogative and not any(
                    v in lowered for v in _DIRECTIVE_VERBS):
                continue  # not an interrogative/directive move
            if any(v in lowered for v in _DIRECTIVE_VERBS):
                hits.append(CueHit(
                    TRQFLabel.COMMUNICATIVE, "directive articulation move"))
            else:
                hits.append(CueHit(
                    TRQFLabel.EPISTEMIC, "generic elicitation default"))
        return hits


class ScriptedResponseClassifier(ResponseClassifier):
    """Cue-table coder for student responses; possibly empty (off-task)."""

    def classify(self, text: str,
                 transcript_context: Sequence[DialogueTurn] = ()) -> Counter:
        if not text:
            raise PreconditionViolation("response text must be nonempty")
        return Counter(hit.label for hit in self.explain(text))

    def explain(self, text: str) -> list[CueHit]:
        stripped = text.strip()
        if _OFF_TASK.match(stripped):
            return []
        lowered = f" {stripped.lower()}"
        # claims are read off the main clause, not the "because ..." support
        head = lowered.split("because", 1)[0]
        hits: list[CueHit] = []
        for label, cues in TOULMIN_CUES.items():
            haystack = head if label is ToulminLabel.CLAIM else lowered
            for cue in cues:
                if cue in haystack:
                    hits.append(CueHit(label, cue))
                    break
        return hits


class ModelBackedQuestionClassifier(QuestionClassifier):
    def __init__(self, provider):
        self.provider = provider

    def classify(self, text: str,
                 transcript_context: Sequence[DialogueTurn] = ()) -> Counter:
        if not text:
            raise PreconditionViolation("question text must be nonempty")
        prompt = (
            "Code every question in the teacher move below with one or more "
            "of: Epistemic, Teleological, Communicative. Reply with a JSON "
            f"list of labels.\nMove: {text}")
        try:
            labels = json.loads(self.provider.complete(prompt))
            return Counter(TRQFLabel(l) for l in labels)
        except Exception as exc:
            raise ClassifierFailure(exc) from exc


class ModelBackedResponseClassifier(ResponseClassifier):
    def __init__(self, provider):
        self.provider = provider

    def classify(self, text: str,
                 transcript_context: Sequence[DialogueTurn] = ()) -> Counter:
        if not text:
            raise PreconditionViolation("response text must be nonempty")
        prompt = (
            "Code the student response below with zero or more of: Claim, "
            "Data, Warrant, Backing, Qualifier, Rebuttal. Reply with a JSON "
            f"list of labels.\nResponse: {text}")
        try:
            labels = json.loads(self.provider.complete(prompt))
            return Counter(ToulminLabel(l) for l in labels)
        except Exception as exc:
            raise ClassifierFailure(exc) from exc


def classify_question(text: str,
                      transcript_context: Sequence[DialogueTurn] = (),
                      classifier: Optional[QuestionClassifier] = None) -> Counter:
    return (classifier or ScriptedQuestionClassifier()).classify(
        text, transcript_context)


def classify_response(text: str,
                      transcript_context: Sequence[DialogueTurn] = (),
                      classifier: Optional[ResponseClassifier] = None) -> Counter:
    return (classifier or ScriptedResponseClassifier()).classify(
        text, transcript_context)


@dataclass(frozen=True)
class AnnotationVerdict:
    """Agreement between a user's labels and the system's for one turn."""

    turn_id: int
    user_labels: Counter
    system_labels: Counter
    agreement: str  # "Match" | "Partial" | "Mismatch"
    explanation: str

    def to_json_dict(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "user_labels": sorted(l.value for l in self.user_labels.elements()),
            "system_labels": sorted(
                l.value for l in self.system_labels.elements()),
            "agreement": self.agreement,
            "explanation": self.explanation,
        }


def _agreement(user: Counter, system: Counter) -> str:
    if user == system:
        return "Match"
    if user & system:
        return "Partial"
    return "Mismatch"


def verify_annotation(turn: DialogueTurn, user_labels: Sequence,
                      question_classifier: Optional[QuestionClassifier] = None,
                      response_classifier: Optional[ResponseClassifier] = None,
                      ) -> AnnotationVerdict:
    """Compare the user's labels to the system coding of one turn.

    Raises WrongFramework when labels from the other framework are
    offered for the turn's role."""
    user = Counter(user_labels)
    if turn.speaker.is_teacher:
        if any(isinstance(l, ToulminLabel) for l in user):
            raise WrongFramework(
                "argument-element labels offered for a teacher turn")
        clf = question_classifier or ScriptedQuestionClassifier()
        system = clf.classify(turn.text)
        cues = clf.explain(turn.text) if hasattr(clf, "explain") else []
    else:
        if any(isinstance(l, TRQFLabel) for l in user):
            raise WrongFramework(
                "question-type labels offered for a student turn")
        clf = response_classifier or ScriptedResponseClassifier()
        system = clf.classify(turn.text)
        cues = clf.explain(turn.text) if hasattr(clf, "explain") else []
    agreement = _agreement(user, system)
    if cues:
        cue_note = "; ".join(
            f"{h.label.value}: \"{h.cue}\"" for h in cues)
        explanation = f"System coding fired on: {cue_note}."
    else:
        explanation = "No coding cue fired; the system read this as off-task."
    return AnnotationVerdict(
        turn_id=turn.turn_id, user_labels=user, system_labels=system,
        agreement=agreement, explanation=explanation)


def _recent_exchange(transcript: Sequence[DialogueTurn]):
    """Last teacher turn and the student turns that followed it."""
    last_teacher = None
    for i in range(len(transcript) - 1, -1, -1):
        if transcript[i].speaker.is_teacher:
            last_teacher = i
            break
    if last_teacher is None:
        return None, []
    return transcript[last_teacher], list(transcript[last_teacher + 1:])


def suggest(state, question_classifier: Optional[QuestionClassifier] = None,
            response_classifier: Optional[ResponseClassifier] = None,
            forbidden_terms: Sequence[str] = DEFAULT_FORBIDDEN_TERMS,
            ) -> Suggestion:
    """One reasoning sentence plus two recommended questions, conditioned
    on the latest codings and the session context.

    Scripted rule order: unsupported claims -> push for justification;
    heavy hedging -> push for commitment; open disagreement -> explore it;
    no method-probing asked yet -> probe strategy; otherwise broaden
    participation. Output is checked against the forbidden-term filter."""
    transcript = state.transcript
    if not any(t.speaker.is_teacher for t in transcript):
        raise PreconditionViolation(
            "suggestions require at least one teacher turn")
    qclf = question_classifier or ScriptedQuestionClassifier()
    rclf = response_classifier or ScriptedResponseClassifier()

    teacher_turn, student_turns = _recent_exchange(transcript)
    recent = Counter()
    for t in student_turns:
        recent += rclf.classify(t.text)
    asked = Counter()
    for t in transcript:
        if t.speaker.is_teacher:
            asked += qclf.classify(t.text)

    support = (recent[ToulminLabel.DATA] + recent[ToulminLabel.WARRANT]
               + recent[ToulminLabel.BACKING])
    if recent[ToulminLabel.CLAIM] > 0 and support == 0:
        suggestion = Suggestion(
            reasoning="Students are stating answers without support, so "
                      "press them to justify their thinking.",
            recommended_questions=(
                "How do you know that's true?",
                "Can you explain how you got that answer?",
            ))
    elif recent[ToulminLabel.QUALIFIER] >= 2:
        suggestion = Suggestion(
            reasoning="Several students sound unsure, so help them test "
                      "their ideas against the problem.",
            recommended_questions=(
                "What would convince you that your answer is right?",
                "Can you check it with a different example?",
            ))
    elif recent[ToulminLabel.REBUTTAL] > 0:
        suggestion = Suggestion(
            reasoning="A disagreement just surfaced, and comparing the "
                      "competing ideas can deepen the argument.",
            recommended_questions=(
                "Who sees it differently, and what leads you there?",
                "Can both of these answers be right at the same time?",
            ))
    elif asked[TRQFLabel.TELEOLOGICAL] == 0:
        suggestion = Suggestion(
            reasoning="You have not yet probed why students chose their "
                      "methods, and asking about strategy opens their "
                      "reasoning.",
            recommended_questions=(
                "Why did you choose that step?",
                "What made you start with that operation?",
            ))
    else:
        suggestion = Suggestion(
            reasoning="The discussion could use more voices, so draw in "
                      "students who have not spoken yet.",
            recommended_questions=(
                "Who can add to that idea?",
                "Does anyone see another way to solve it?",
            ))

    hits = forbidden_terms_in(
        suggestion.reasoning + " " + " ".join(suggestion.recommended_questions),
        forbidden_terms)
    if hits:
        raise FormatViolation(
            f"suggestion leaked framework terms: {', '.join(hits)}")
    return suggestion


class SuggestionGenerator:
    """Model-backed suggestion with one automatic repair attempt before a
    FormatViolation surfaces."""

    def __init__(self, provider,
                 forbidden_terms: Sequence[str] = DEFAULT_FORBIDDEN_TERMS):
        self.provider = provider
        self.forbidden_terms = forbidden_terms

    def generate(self, state) -> Suggestion:
        prompt = self._prompt(state)
        raw = self.provider.complete(prompt)
        try:
            return self._parse(raw)
        except ClassimError:
            repaired = self.provider.complete(
                prompt + "\nYour previous reply violated the format contract "
                "(one declarative sentence, two questions, no framework "
                f"vocabulary). Previous reply: {raw}\nTry again.")
            try:
                return self._parse(repaired)
            except ClassimError as exc:
                raise FormatViolation(
                    f"model suggestion failed format contract twice: {exc}"
                ) from exc

    def _prompt(self, state) -> str:
        tail = "\n".join(
            f"{'Teacher' if t.speaker.is_teacher else 'Student'}: {t.text}"
            for t in state.transcript[-8:])
        return (
            "Given this classroom exchange, reply with JSON "
            '{"reasoning": one declarative sentence, '
            '"recommended_questions": [two questions]} '
            "advising the teacher's next questioning move. Do not name any "
            "coding framework.\n" + tail)

    def _parse(self, raw: str) -> Suggestion:
        try:
            d = json.loads(raw)
            suggestion = Suggestion(
                reasoning=d["reasoning"],
                recommended_questions=tuple(d["recommended_questions"]))
        except ClassimError:
            raise
        except Exception as exc:
            raise FormatViolation(f"unparseable suggestion payload: {exc}")
        hits = forbidden_terms_in(
            suggestion.reasoning + " "
            + " ".join(suggestion.recommended_questions),
            self.forbidden_terms)
        if hits:
            raise FormatViolation(
                f"suggestion leaked framework terms: {', '.join(hits)}")
        return suggestion


@dataclass(frozen=True)
class FeedbackReport:
    """End-of-session reflection feedback."""

    session_metrics: metrics_mod.SessionMetrics
    improvement_suggestions: tuple[str, ...]
    self_reflection: str

    def to_json_dict(self) -> dict:
        return {
            "session_metrics": self.session_metrics.to_json_dict(),
            "improvement_suggestions": list(self.improvement_suggestions),
            "self_reflection": self.self_reflection,
        }


# user-facing phrasing per question category, framework-term free
_CATEGORY_PROMPTS = {
    TRQFLabel.EPISTEMIC: (
        "questions that probe how students know what they know",
        '"How do you know that\'s true?"'),
    TRQFLabel.TELEOLOGICAL: (
        "questions that probe why students chose their methods",
        '"Why did you choose that step?"'),
    TRQFLabel.COMMUNICATIVE: (
        "prompts that ask students to articulate ideas to the class",
        '"Can you explain your idea to the class?"'),
}


def overall_feedback(state, self_reflection: str) -> FeedbackReport:
    """Scripted feedback: count table, evenness, and at least two
    improvement suggestions referencing specific turns. The first
    suggestion targets the least-used question category."""
    if not self_reflection or not self_reflection.strip():
        raise PreconditionViolation("self_reflection must be nonempty")
    labeled = [t for t in state.transcript
               if t.trqf_labels or t.toulmin_labels]
    if not labeled:
        raise PreconditionViolation(
            "feedback requires at least one annotated exchange")
    session_metrics = metrics_mod.aggregate([state.transcript])

    suggestions: list[str] = []
    lowest = min(TRQFLabel, key=lambda l: (session_metrics.trqf_counts[l],
                                           l.value))
    phrasing, example = _CATEGORY_PROMPTS[lowest]
    teacher_turns = [t for t in state.transcript if t.speaker.is_teacher]
    anchor = teacher_turns[-1].turn_id if teacher_turns else 0
    suggestions.append(
        f"You used {phrasing} least "
        f"({session_metrics.trqf_counts[lowest]} of "
        f"{sum(session_metrics.trqf_counts.values())} coded questions); "
        f"after moves like turn {anchor}, try {example}.")

    bare_claims = [
        t.turn_id for t in state.transcript
        if ToulminLabel.CLAIM in t.toulmin_labels
        and not (set(t.toulmin_labels)
                 & {ToulminLabel.DATA, ToulminLabel.WARRANT,
                    ToulminLabel.BACKING})]
    if bare_claims:
        refs = ", ".join(str(i) for i in bare_claims[:3])
        suggestions.append(
            f"Answers at turn(s) {refs} came without support; a follow-up "
            "like \"What makes you sure?\" would push students to justify.")
    else:
        first = state.transcript[0].turn_id
        suggestions.append(
            f"Keep connecting student ideas to each other, as you began "
            f"around turn {first}; inviting students to restate peers' "
            "reasoning strengthens the discussion.")
    return FeedbackReport(
        session_metrics=session_metrics,
        improvement_suggestions=tuple(suggestions),
        self_reflection=self_reflection.strip(),
    )


def answer_followup(report: FeedbackReport, question: str,
                    transcript: Sequence[DialogueTurn] = ()) -> str:
    """Scripted follow-up answering, grounded in the report and transcript."""
    if not question or not question.strip():
        raise PreconditionViolation("follow-up question must be nonempty")
    q = question.lower()
    m = report.session_metrics
    if "evenness" in q or "diversity" in q or "balance" in q:
        trqf = "n/a" if m.trqf_evenness is None else f"{m.trqf_evenness:.2f}"
        toulmin = "n/a" if m.toulmin_evenness is None \
            else f"{m.toulmin_evenness:.2f}"
        return (f"Your question variety scored {trqf} and your students' "
                f"argument variety scored {toulmin} on a 0-to-1 evenness "
                "scale, where 1 means all categories were used equally.")
    if "improve" in q or "better" in q or "next" in q:
        return " ".join(report.improvement_suggestions)
    if "count" in q or "how many" in q:
        total_q = sum(m.trqf_counts.values())
        total_r = sum(m.toulmin_counts.values())
        return (f"The session had {m.n_student_responses} student responses, "
                f"{total_q} coded teacher questions, and {total_r} coded "
                "argument elements.")
    return ("Here is the short version of your report: "
            + report.improvement_suggestions[0])
