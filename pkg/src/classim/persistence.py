"""Append-only per-session event logs with deterministic replay.

Each session owns one directory holding ``events.jsonl``. Replaying the
log against the same profile index and the scripted generator
reconstructs the session state byte-identically, which is both the crash
recovery path and the persistence format.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

from .engine import (
    ResponseGenerator,
    ScriptedGenerator,
    SessionState,
    post_teacher_turn,
    start_session,
)
from .model import ClassimError, TRQFLabel, ToulminLabel, ValidatedContext
from .retrieval import ProfileIndex

EVENTS_FILENAME = "events.jsonl"


class CorruptLog(ClassimError):
    def __init__(self, position: int):
        super().__init__(f"undecodable event at line {position}")
        self.position = position


def session_log_path(data_dir: str, session_id: str) -> str:
    return os.path.join(data_dir, session_id, EVENTS_FILENAME)


@dataclass
class EventLog:
    """Append-only JSON Lines event sink for one session."""

    path: str

    def append(self, event: dict) -> None:
        os.makedirs(os.path.dirname(self.path), exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True)
                     + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def read_events(path: str) -> tuple[list[dict], Optional[int]]:
    """Parse an event log.

    Returns (events, corrupt_position). A truncated or undecodable final
    line is tolerated: its 1-based line number is reported and recovery
    proceeds with every complete event before it. Corruption anywhere
    else raises CorruptLog."""
    events: list[dict] = []
    corrupt: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError:
            if line_no == len(lines):
                corrupt = line_no
                break
            raise CorruptLog(line_no)
    return events, corrupt


def record_session_started(log: EventLog, state: SessionState,
                           roster_size: int) -> None:
    log.append({
        "type": "session_started",
        "session_id": state.session_id,
        "context": state.context.to_json_dict(),
        "seed": state.seed,
        "roster_size": roster_size,
        "problem_statement": state.problem_statement,
        "suggestions_enabled": state.suggestions_enabled,
    })


def record_teacher_turn(log: EventLog, text: str,
                        addressed: Optional[list] = None,
                        max_respondents: Optional[int] = None) -> None:
    log.append({
        "type": "teacher_turn",
        "text": text,
        "addressed": list(addressed) if addressed is not None else None,
        "max_respondents": max_respondents,
    })


def record_annotation(log: EventLog, turn_id: int, framework: str,
                      labels: list[str]) -> None:
    log.append({
        "type": "annotation",
        "turn_id": turn_id,
        "framework": framework,
        "labels": labels,
    })


def apply_annotation(state: SessionState, turn_id: int, framework: str,
                     labels: list[str]) -> None:
    """Attach system labels to the identified turn in place."""
    for i, turn in enumerate(state.transcript):
        if turn.turn_id == turn_id:
            if framework == "trqf":
                state.transcript[i] = turn.with_labels(
                    trqf=[TRQFLabel(l) for l in labels])
            else:
                state.transcript[i] = turn.with_labels(
                    toulmin=[ToulminLabel(l) for l in labels])
            return
    raise ClassimError(f"no turn with id {turn_id}")


def replay_session(
    events: list[dict],
    index: ProfileIndex,
    generator: Optional[ResponseGenerator] = None,
) -> SessionState:
    """Rebuild a session by replaying its event log."""
    if not events or events[0].get("type") != "session_started":
        raise ClassimError("event log must begin with session_started")
    head = events[0]
    state = start_session(
        context=ValidatedContext.from_json_dict(head["context"]),
        index=index,
        seed=head["seed"],
        session_id=head["session_id"],
        roster_size=head["roster_size"],
        problem_statement=head["problem_statement"],
    )
    state.suggestions_enabled = head.get("suggestions_enabled", True)
    gen = generator or ScriptedGenerator()
    for event in events[1:]:
        kind = event.get("type")
        if kind == "teacher_turn":
            post_teacher_turn(
                state, event["text"], gen,
                addressed=event.get("addressed"),
                max_respondents=event.get("max_respondents"))
        elif kind == "annotation":
            apply_annotation(state, event["turn_id"], event["framework"],
                             event["labels"])
        else:
            raise ClassimError(f"unknown event type {kind!r}")
    return state


def recover_session(
    data_dir: str,
    session_id: str,
    index: ProfileIndex,
    generator: Optional[ResponseGenerator] = None,
) -> tuple[Optional[SessionState], Optional[int]]:
    """Recover a session from disk.

    Returns (state, corrupt_position); corrupt_position is the 1-based
    line of a tolerated truncated trailing event, or None. An empty log
    (crash before the first event landed) recovers to a fresh start:
    state is None and the caller treats the id as brand new."""
    path = session_log_path(data_dir, session_id)
    events, corrupt = read_events(path)
    if not events:
        return None, corrupt
    return replay_session(events, index, generator), corrupt
