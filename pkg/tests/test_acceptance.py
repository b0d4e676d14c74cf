"""Acceptance gate: one test per top-level product criterion.

Each test prints a single [PASS] line with its headline numbers; a failed
assertion means the criterion does not hold.
"""

import json
import math
import os
import random
import signal
import socket
import subprocess
import sys
import time

import httpx
import pytest

from classim.engine import ScriptedGenerator, post_teacher_turn, start_session
from classim.metrics import aggregate, normalized_evenness
from classim.model import (
    DialogueTurn,
    EmojiState,
    Speaker,
    TRQFLabel,
    ToulminLabel,
)
from classim.pedagogy import classify_question, classify_response, \
    forbidden_terms_in, suggest
from classim.persistence import read_events, replay_session, session_log_path
from tests.conftest import GOLD_CORPUS, LESSONS_DIR, STUDY_COUNTS
from tests.test_retrieval import _oracle_roster, _random_context


def _participant_transcript(entry):
    """Encode one participant's count row as a minimal transcript: a
    teacher turn carrying the full question-label multiset, then
    n_responses student turns, the first carrying the argument labels."""
    trqf = [TRQFLabel(k) for k, c in entry["trqf"].items() for _ in range(c)]
    toulmin = [ToulminLabel(k)
               for k, c in entry["toulmin"].items() for _ in range(c)]
    turns = [DialogueTurn(turn_id=0, speaker=Speaker.teacher(),
                          text="Coded questions.", trqf_labels=tuple(trqf))]
    for i in range(entry["n_responses"]):
        turns.append(DialogueTurn(
            turn_id=i + 1, speaker=Speaker.student("p"),
            text="Coded response.", affect=EmojiState.NEUTRAL,
            toulmin_labels=tuple(toulmin) if i == 0 else ()))
    return turns


def test_study_counts_reproduction():
    start = time.perf_counter()
    with open(STUDY_COUNTS, encoding="utf-8") as fh:
        study = json.load(fh)
    results = {}
    for condition, rows in study["conditions"].items():
        m = aggregate([_participant_transcript(r) for r in rows])
        expected = study["expected"][condition]
        assert m.n_student_responses == expected["n_responses"]
        assert sum(m.trqf_counts.values()) == expected["trqf_total"]
        assert sum(m.toulmin_counts.values()) == expected["toulmin_total"]
        assert abs(round(m.trqf_evenness, 2)
                   - expected["trqf_evenness_2dp"]) <= 0.005
        assert abs(round(m.toulmin_evenness, 2)
                   - expected["toulmin_evenness_2dp"]) <= 0.005
        results[condition] = m
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\n[PASS] study-count reproduction: N=76/89, totals 49/68 and "
          f"177/235, evenness "
          f"{results['baseline'].trqf_evenness:.2f}/"
          f"{results['interactive'].trqf_evenness:.2f} and "
          f"{results['baseline'].toulmin_evenness:.2f}/"
          f"{results['interactive'].toulmin_evenness:.2f} "
          f"({elapsed * 1000:.0f} ms)")


def test_evenness_property_suite():
    rng = random.Random(1)
    checked = 0
    for _ in range(1000):
        k = rng.randint(2, 8)
        counts = [rng.randint(0, 400) for _ in range(k)]
        if sum(counts) == 0:
            counts[rng.randrange(k)] = 1
        keyed = dict(enumerate(counts))
        e = normalized_evenness(keyed, k)
        assert 0.0 <= e <= 1.0 + 1e-12
        shuffled = list(counts)
        rng.shuffle(shuffled)
        assert abs(normalized_evenness(dict(enumerate(shuffled)), k)
                   - e) <= 1e-12
        scale = rng.randint(1, 50)
        assert abs(normalized_evenness(
            {i: c * scale for i, c in keyed.items()}, k) - e) <= 1e-12
        checked += 1
    for k in range(2, 9):
        assert normalized_evenness({i: 7 for i in range(k)}, k) \
            == pytest.approx(1.0, abs=1e-12)
        assert normalized_evenness(
            {i: (5 if i == 0 else 0) for i in range(k)}, k) == 0.0
    print(f"\n[PASS] evenness properties: bounds, permutation and scale "
          f"invariance (1e-12), uniform=1, degenerate=0 over "
          f"{checked} randomized vectors")


def test_retrieval_oracle_equivalence(index):
    from classim.retrieval import select_roster

    rng = random.Random(3)
    contexts = [_random_context(rng) for _ in range(10)]
    for ctx in contexts:
        sel = select_roster(index, ctx, roster_size=20)
        oracle_members, oracle_scores = _oracle_roster(
            index.profiles, ctx, 20)
        assert list(sel.members) == oracle_members
        for m in sel.members:
            assert math.isclose(sel.scores[m], oracle_scores[m],
                                abs_tol=1e-12)
        again = select_roster(index, ctx, roster_size=20)
        assert json.dumps(sel.to_json_dict(), sort_keys=True) \
            == json.dumps(again.to_json_dict(), sort_keys=True)
    # monotonicity spot-check: moving the context toward a profile's own
    # levels never lowers that profile's score
    from classim.retrieval import score_profile
    from classim.model import Engagement
    from tests.test_retrieval import _context
    p = index.profiles[0]
    aligned = _context(p.engagement, p.math_level, p.argumentation_level)
    for other in (Engagement.LOW, Engagement.MEDIUM, Engagement.HIGH):
        shifted = _context(other, p.math_level, p.argumentation_level)
        assert score_profile(p, aligned) >= score_profile(p, shifted)
    print("\n[PASS] retrieval: select_roster matches the independent "
          "brute-force oracle on 10 randomized contexts over the "
          "30-profile index, deterministic and monotone")


def test_simulation_fuzz_suite(index):
    from tests.test_retrieval import _random_context as random_ctx

    start = time.perf_counter()
    rng = random.Random(9)
    gen = ScriptedGenerator()
    violations = 0
    sessions = 200
    for s in range(sessions):
        ctx = random_ctx(rng)
        seed = rng.randrange(2**31)
        state = start_session(ctx, index, seed=seed, session_id=f"f{s}")
        n_turns = rng.randint(1, 20)
        turns = []
        for i in range(n_turns):
            text = rng.choice([
                "Why did you choose that step?",
                "How do you know that's true?",
                "Can you explain your idea to the class?",
                f"What is {rng.randint(2, 99)} divided by 2?",
            ])
            turns.append(text)
            responses, affect = post_teacher_turn(state, text, gen)
            # affect validity and attribution
            if not all(isinstance(a, EmojiState) for a in affect.values()):
                violations += 1
            for r in responses:
                if r.profile_id not in state.roster.members:
                    violations += 1
        ids = [t.turn_id for t in state.transcript]
        if ids != sorted(set(ids)):
            violations += 1
        # suggestion contract + forbidden-term filter
        suggestion = suggest(state)
        blob = suggestion.reasoning + " " \
            + " ".join(suggestion.recommended_questions)
        if forbidden_terms_in(blob) \
                or len(suggestion.recommended_questions) != 2:
            violations += 1
        # replay determinism on a sample of sessions
        if s % 20 == 0:
            twin = start_session(ctx, index, seed=seed, session_id=f"f{s}")
            for text in turns:
                post_teacher_turn(twin, text, gen)
            if twin.transcript != state.transcript \
                    or twin.affect != state.affect:
                violations += 1
    elapsed = time.perf_counter() - start
    assert violations == 0
    assert elapsed < 60.0
    print(f"\n[PASS] simulation fuzz: {sessions} sessions, up to 20 turns "
          f"each, 0 invariant violations in {elapsed:.1f} s")


def test_classifier_gold_corpus():
    from collections import Counter

    exact = total = 0
    with open(GOLD_CORPUS, encoding="utf-8") as fh:
        for line in fh:
            item = json.loads(line)
            if item["role"] == "teacher":
                system = classify_question(item["text"])
                gold = Counter(TRQFLabel(l) for l in item["labels"])
            else:
                system = classify_response(item["text"])
                gold = Counter(ToulminLabel(l) for l in item["labels"])
            exact += system == gold
            total += 1
    rate = exact / total
    assert rate >= 0.90
    print(f"\n[PASS] gold corpus: {exact}/{total} exact-match "
          f"({rate:.1%}) >= 90%")


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_healthy(base: str, proc, timeout: float = 30.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise RuntimeError(f"server exited early: {proc.returncode}")
        try:
            if httpx.get(f"{base}/healthz", timeout=1.0).status_code == 200:
                return
        except httpx.HTTPError:
            time.sleep(0.1)
    raise RuntimeError("server did not become healthy")


def test_offline_end_to_end(tmp_path, dataset):
    profiles_path = tmp_path / "profiles.jsonl"
    dataset.write_jsonl(str(profiles_path))
    data_dir = tmp_path / "data"
    port = _free_port()
    base = f"http://127.0.0.1:{port}"
    env = dict(os.environ)
    env.pop("MODEL_API_KEY", None)  # offline: no credentials, no network
    argv = [sys.executable, "-m", "classim.cli", "serve",
            "--profiles", str(profiles_path), "--backend", "scripted",
            "--port", str(port), "--data-dir", str(data_dir)]

    proc = subprocess.Popen(argv, env=env, stdout=subprocess.DEVNULL,
                            stderr=subprocess.DEVNULL)
    try:
        _wait_healthy(base, proc)
        r = httpx.post(f"{base}/sessions", json={
            "context": {"grade_level": 7, "math_topic": "Ratios",
                        "class_description": "an eager class"},
            "seed": 4})
        assert r.status_code == 200
        sid = r.json()["session_id"]
        for i in range(5):
            r = httpx.post(f"{base}/sessions/{sid}/turns",
                           json={"text": f"How do you know, round {i}?"})
            assert 200 <= r.status_code < 300
        r = httpx.get(f"{base}/sessions/{sid}/suggestion")
        assert 200 <= r.status_code < 300
        turns = httpx.get(
            f"{base}/sessions/{sid}/transcript").json()["turns"]
        for t in turns[:4]:
            label = ["Epistemic"] if t["speaker"]["role"] == "Teacher" \
                else ["Claim"]
            r = httpx.post(f"{base}/sessions/{sid}/annotations",
                           json={"turn_id": t["turn_id"], "labels": label})
            assert 200 <= r.status_code < 300
        r = httpx.post(f"{base}/sessions/{sid}/reflection",
                       json={"text": "I asked the same question five times."})
        assert 200 <= r.status_code < 300
        r = httpx.get(f"{base}/sessions/{sid}/metrics")
        assert 200 <= r.status_code < 300

        before = httpx.get(f"{base}/sessions/{sid}/transcript").content

        # hard crash mid-session, then restart on the same data dir
        proc.send_signal(signal.SIGKILL)
        proc.wait(timeout=10)
        port2 = _free_port()
        base2 = f"http://127.0.0.1:{port2}"
        argv[argv.index(str(port))] = str(port2)
        proc = subprocess.Popen(argv, env=env, stdout=subprocess.DEVNULL,
                                stderr=subprocess.DEVNULL)
        _wait_healthy(base2, proc)
        after = httpx.get(f"{base2}/sessions/{sid}/transcript").content
        assert after == before
    finally:
        proc.kill()
        proc.wait(timeout=10)
    print("\n[PASS] offline end-to-end: create -> 5 turns -> suggestion -> "
          "4 annotations -> reflection -> metrics all 2xx; transcript "
          "byte-identical after kill -9 and restart")


def test_ingest_determinism(tmp_path):
    from classim.ingest import ProfileDataset
    from classim.model import StudentProfile

    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (out1, out2):
        subprocess.run(
            [sys.executable, "-m", "classim.cli", "ingest",
             "--in", LESSONS_DIR, "--out", str(out),
             "--extractor", "scripted"],
            check=True, capture_output=True)
    assert out1.read_bytes() == out2.read_bytes()
    ds = ProfileDataset.read_jsonl(str(out1))
    for p in ds.profiles:  # every profile survives the full validator
        StudentProfile.from_json_dict(p.to_json_dict())
    print(f"\n[PASS] ingest determinism: two runs byte-identical, "
          f"{len(ds.profiles)} profiles all pass validators")
