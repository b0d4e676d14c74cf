"""Roster selection: match profiles to a classroom context.

Replaces embedding retrieval with a deterministic, scoreable procedure: a
closed-form taxonomic scorer over the three ordinal dimensions, followed
by engagement-stratified top-k selection. An embedding-style backend can
be slotted in behind ScoringBackend; it must produce scores in [0, 1] and
then reuses the identical stratification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .model import (
    ArgumentationLevel,
    ClassimError,
    ContextDistillation,
    Engagement,
    MathLevel,
    StudentProfile,
    ValidatedContext,
)

WEIGHT_ENGAGEMENT = 0.4
WEIGHT_MATH = 0.3
WEIGHT_ARGUMENTATION = 0.3

DEFAULT_ROSTER_SIZE = 20


class InsufficientProfiles(ClassimError):
    def __init__(self, have: int, need: int):
        super().__init__(f"need {need} profiles for a roster, have {have}")
        self.have = have
        self.need = need


@dataclass(frozen=True)
class ProfileIndex:
    """Immutable profile collection with id lookup."""

    profiles: tuple[StudentProfile, ...]

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(
            self, "_by_id", {p.profile_id: p for p in self.profiles})

    def __len__(self) -> int:
        return len(self.profiles)

    def get(self, profile_id: str) -> StudentProfile:
        return self._by_id[profile_id]

    def __contains__(self, profile_id: str) -> bool:
        return profile_id in self._by_id

    @staticmethod
    def from_jsonl(path: str) -> "ProfileIndex":
        from .ingest import ProfileDataset
        return ProfileIndex(profiles=ProfileDataset.read_jsonl(path).profiles)


@dataclass(frozen=True)
class RosterSelection:
    """Selected roster: distinct member ids with their match scores."""

    members: tuple[str, ...]
    scores: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if len(set(self.members)) != len(self.members):
            raise ClassimError("roster members must be distinct")
        for m in self.members:
            s = self.scores[m]
            if not math.isfinite(s):
                raise ClassimError(f"non-finite score for {m}")

    def to_json_dict(self) -> dict:
        return {
            "members": list(self.members),
            "scores": {m: self.scores[m] for m in self.members},
        }

    @staticmethod
    def from_json_dict(d: dict) -> "RosterSelection":
        return RosterSelection(
            members=tuple(d["members"]), scores=dict(d["scores"]))


def _mean_rank(hist: Mapping) -> float:
    return sum(v.rank * mass for v, mass in hist.items())


def _dimension_distance(value_rank: int, target_mean: float, span: int) -> float:
    return abs(value_rank - target_mean) / span


def score_profile(profile: StudentProfile, context: ValidatedContext) -> float:
    """Match score in [0, 1]: 1 minus the weighted normalized distance
    between the profile's (engagement, math level, argumentation level)
    and the context target distributions' mean ranks.

    Weights are 0.4 / 0.3 / 0.3; each dimension's distance is the absolute
    rank gap divided by the dimension's rank span. Pure function.
    """
    d = context.distilled
    de = _dimension_distance(
        profile.engagement.rank, _mean_rank(d.engagement), len(Engagement) - 1)
    dm = _dimension_distance(
        profile.math_level.rank, _mean_rank(d.math_level), len(MathLevel) - 1)
    da = _dimension_distance(
        profile.argumentation_level.rank, _mean_rank(d.argumentation_level),
        len(ArgumentationLevel) - 1)
    score = 1.0 - (WEIGHT_ENGAGEMENT * de + WEIGHT_MATH * dm
                   + WEIGHT_ARGUMENTATION * da)
    # rank gaps can exceed the span-normalized unit only by rounding noise
    return min(1.0, max(0.0, score))


class ScoringBackend:
    """Interface for profile-context match scoring; scores must lie in [0, 1]."""

    def score(self, profile: StudentProfile, context: ValidatedContext) -> float:
        raise NotImplementedError


class TaxonomicScorer(ScoringBackend):
    """Default closed-form backend: score_profile."""

    def score(self, profile: StudentProfile, context: ValidatedContext) -> float:
        return score_profile(profile, context)


def select_roster(
    index: ProfileIndex,
    context: ValidatedContext,
    roster_size: int = DEFAULT_ROSTER_SIZE,
    seed: int = 0,
    backend: Optional[ScoringBackend] = None,
) -> RosterSelection:
    """Stratified top-k roster selection.

    Candidates are ranked by (score desc, profile_id asc). A diversity
    floor guarantees at least ceil(roster_size / 5) members from each
    engagement stratum whenever the stratum has that many candidates;
    remaining slots fill by global rank. Deterministic given (index,
    context, roster_size); ``seed`` is reserved for an optional
    score-jitter mode that is off by default.
    """
    del seed  # reserved for jitter mode
    if len(index) < roster_size:
        raise InsufficientProfiles(len(index), roster_size)
    scorer = backend or TaxonomicScorer()
    scores = {p.profile_id: scorer.score(p, context) for p in index.profiles}
    ranked = sorted(
        index.profiles, key=lambda p: (-scores[p.profile_id], p.profile_id))

    floor = math.ceil(roster_size / 5)
    chosen: list[str] = []
    chosen_set: set[str] = set()
    for stratum in Engagement:
        stratum_ranked = [p for p in ranked if p.engagement is stratum]
        for p in stratum_ranked[:floor]:
            if len(chosen) < roster_size:
                chosen.append(p.profile_id)
                chosen_set.add(p.profile_id)
    for p in ranked:
        if len(chosen) >= roster_size:
            break
        if p.profile_id not in chosen_set:
            chosen.append(p.profile_id)
            chosen_set.add(p.profile_id)
    # canonical member order: global rank
    order = {p.profile_id: i for i, p in enumerate(ranked)}
    chosen.sort(key=lambda pid: order[pid])
    return RosterSelection(
        members=tuple(chosen),
        scores={pid: scores[pid] for pid in chosen},
    )


# Keyword rules for distilling a free-text class description into target
# distributions. Each rule shifts one dimension's mass toward an end of
# its scale; multiple firing rules average their shifted histograms with
# the base. Without any firing keyword the histograms stay uniform.
ENGAGEMENT_KEYWORDS_HIGH = (
    "highly engaged", "very engaged", "eager", "enthusiastic", "active")
ENGAGEMENT_KEYWORDS_LOW = (
    "disengaged", "low engagement", "quiet", "reluctant", "passive")
MATH_KEYWORDS_HIGH = (
    "strong", "advanced", "proficient", "gifted", "solid foundations")
MATH_KEYWORDS_LOW = ("struggle", "struggling", "behind", "weak", "remedial")
ARGUMENTATION_KEYWORDS_HIGH = (
    "justify", "debate", "argue", "explain their reasoning")
ARGUMENTATION_KEYWORDS_LOW = (
    "rarely explain", "one-word answers", "short answers")


def _shifted(variants: Sequence, direction: int) -> dict:
    # linear ramp toward the indicated end, normalized
    n = len(variants)
    weights = [i + 1 for i in range(n)] if direction > 0 \
        else [n - i for i in range(n)]
    total = sum(weights)
    return {v: w / total for v, w in zip(variants, weights)}


def _distill_dimension(text: str, variants: Sequence,
                       high_kw: Sequence[str], low_kw: Sequence[str]) -> dict:
    hits = []
    if any(k in text for k in high_kw):
        hits.append(_shifted(variants, +1))
    if any(k in text for k in low_kw):
        hits.append(_shifted(variants, -1))
    if not hits:
        return {v: 1 / len(variants) for v in variants}
    return {v: sum(h[v] for h in hits) / len(hits) for v in variants}


def scripted_distill(class_description: str) -> ContextDistillation:
    """Keyword-rule distillation of a class description.

    A mixed description ("half highly engaged, half struggling") fires
    both directions of a dimension and averages the two shifted
    histograms; a silent dimension stays uniform.
    """
    text = class_description.lower()
    return ContextDistillation(
        engagement=_distill_dimension(
            text, list(Engagement),
            ENGAGEMENT_KEYWORDS_HIGH, ENGAGEMENT_KEYWORDS_LOW),
        math_level=_distill_dimension(
            text, list(MathLevel), MATH_KEYWORDS_HIGH, MATH_KEYWORDS_LOW),
        argumentation_level=_distill_dimension(
            text, list(ArgumentationLevel),
            ARGUMENTATION_KEYWORDS_HIGH, ARGUMENTATION_KEYWORDS_LOW),
    )
