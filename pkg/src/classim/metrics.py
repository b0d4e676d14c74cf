"""Quantitative discourse diagnostics.

Per-category counts over question and argument codings, plus normalized
Shannon evenness per framework: H = (-sum p_i ln p_i) / ln k, where k is
the framework's fixed category count (3 for question codes, 6 for argument
elements), not the number of observed categories. Zero-count categories
contribute 0 (the 0*ln 0 := 0 limit convention). All functions are pure.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .model import ClassimError, DialogueTurn, TRQFLabel, ToulminLabel


class ZeroTotal(ClassimError):
    def __init__(self):
        super().__init__("evenness undefined for an all-zero count vector")


class DegenerateK(ClassimError):
    def __init__(self, k: int):
        super().__init__(f"evenness requires k >= 2 categories, got {k}")
        self.k = k


def normalized_evenness(counts: Mapping, k: int) -> float:
    """Normalized Shannon evenness of category counts, in [0, 1].

    1.0 at uniform counts, 0.0 when a single category holds all mass.
    Raises DegenerateK when k < 2 and ZeroTotal when all counts are zero.
    """
    if k < 2:
        raise DegenerateK(k)
    values = [float(c) for c in counts.values()]
    if any(c < 0 for c in values):
        raise ClassimError("counts must be nonnegative")
    total = sum(values)
    if total <= 0:
        raise ZeroTotal()
    entropy = -sum(
        (c / total) * math.log(c / total) for c in values if c > 0)
    return entropy / math.log(k)


@dataclass(frozen=True)
class SessionMetrics:
    """Counts and evenness for one session (or an aggregate of sessions).

    Evenness fields are None exactly when the corresponding total is zero.
    """

    n_student_responses: int
    trqf_counts: Mapping[TRQFLabel, int]
    toulmin_counts: Mapping[ToulminLabel, int]
    trqf_evenness: Optional[float]
    toulmin_evenness: Optional[float]

    def to_json_dict(self) -> dict:
        return {
            "n_student_responses": self.n_student_responses,
            "trqf_counts": {l.value: self.trqf_counts[l] for l in TRQFLabel},
            "toulmin_counts": {
                l.value: self.toulmin_counts[l] for l in ToulminLabel},
            "trqf_evenness": _round3(self.trqf_evenness),
            "toulmin_evenness": _round3(self.toulmin_evenness),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SessionMetrics":
        return SessionMetrics(
            n_student_responses=d["n_student_responses"],
            trqf_counts={TRQFLabel(k): v for k, v in d["trqf_counts"].items()},
            toulmin_counts={
                ToulminLabel(k): v for k, v in d["toulmin_counts"].items()},
            trqf_evenness=d.get("trqf_evenness"),
            toulmin_evenness=d.get("toulmin_evenness"),
        )


def _round3(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(x, 3)


def _evenness_or_none(counts: Mapping, k: int) -> Optional[float]:
    try:
        return normalized_evenness(counts, k)
    except ZeroTotal:
        return None


def metrics_from_counts(
    n_student_responses: int,
    trqf_counts: Mapping[TRQFLabel, int],
    toulmin_counts: Mapping[ToulminLabel, int],
) -> SessionMetrics:
    """Assemble SessionMetrics from raw count maps, filling evenness."""
    trqf = {l: int(trqf_counts.get(l, 0)) for l in TRQFLabel}
    toulmin = {l: int(toulmin_counts.get(l, 0)) for l in ToulminLabel}
    return SessionMetrics(
        n_student_responses=n_student_responses,
        trqf_counts=trqf,
        toulmin_counts=toulmin,
        trqf_evenness=_evenness_or_none(trqf, len(TRQFLabel)),
        toulmin_evenness=_evenness_or_none(toulmin, len(ToulminLabel)),
    )


def aggregate(sessions: Iterable[Sequence[DialogueTurn]]) -> SessionMetrics:
    """Sum label multisets over all turns of all sessions.

    Counts are multiset cardinalities (one turn may contribute several
    codes of one framework); n_student_responses counts student turns.
    """
    n_responses = 0
    trqf: Counter = Counter()
    toulmin: Counter = Counter()
    for transcript in sessions:
        for turn in transcript:
            if turn.speaker.is_teacher:
                trqf.update(turn.trqf_labels)
            else:
                n_responses += 1
                toulmin.update(turn.toulmin_labels)
    return metrics_from_counts(n_responses, trqf, toulmin)


def text_report(metrics: SessionMetrics, title: str = "Session") -> str:
    """Plain-text report with a count table and evenness per framework."""
    lines = [
        f"{title} discourse metrics",
        f"  Elicited student responses (N): {metrics.n_student_responses}",
        "  Teacher question codes:",
    ]
    for l in TRQFLabel:
        lines.append(f"    {l.value:<14} {metrics.trqf_counts[l]}")
    ev = metrics.trqf_evenness
    lines.append(
        f"    evenness       {'n/a' if ev is None else format(ev, '.2f')}")
    lines.append("  Student response codes:")
    for l in ToulminLabel:
        lines.append(f"    {l.value:<14} {metrics.toulmin_counts[l]}")
    ev = metrics.toulmin_evenness
    lines.append(
        f"    evenness       {'n/a' if ev is None else format(ev, '.2f')}")
    return "\n".join(lines) + "\n"


def json_report(metrics: SessionMetrics) -> str:
    return json.dumps(metrics.to_json_dict(), indent=2) + "\n"
