import json

import pytest
from fastapi.testclient import TestClient

from classim.providers import (
    BACKEND_MODEL,
    BACKEND_SCRIPTED,
    ProviderConfig,
    ProviderFailure,
)
from classim.service import create_app

VALID_CONTEXT = {
    "grade_level": 7,
    "math_topic": "Ratios and Division",
    "class_description": "a mixed class, moderately engaged",
}


@pytest.fixture
def client(index, tmp_path):
    app = create_app(index, ProviderConfig(backend=BACKEND_SCRIPTED),
                     str(tmp_path))
    return TestClient(app)


def _create(client, **overrides):
    body = {"context": VALID_CONTEXT, "seed": 3}
    body.update(overrides)
    r = client.post("/sessions", json=body)
    assert r.status_code == 200, r.text
    return r.json()


class TestSessionLifecycle:
    def test_healthz(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200
        assert r.json() == {"status": "ok", "backend": "Scripted"}

    def test_create_session_roster_of_twenty(self, client):
        data = _create(client)
        assert len(data["roster"]) == 20
        assert data["suggestions_enabled"] is True
        assert "Ratios and Division" in data["problem_statement"]
        for entry in data["roster"]:
            assert entry["affect"] == "Neutral"
            assert 0.0 <= entry["score"] <= 1.0
            assert entry["display_name"]

    def test_create_rejects_bad_grade(self, client):
        r = client.post("/sessions", json={
            "context": dict(VALID_CONTEXT, grade_level=0)})
        assert r.status_code == 422

    def test_create_rejects_empty_topic(self, client):
        r = client.post("/sessions", json={
            "context": dict(VALID_CONTEXT, math_topic="  ")})
        assert r.status_code == 422

    def test_create_rejects_oversized_roster(self, client):
        r = client.post("/sessions", json={
            "context": VALID_CONTEXT, "roster_size": 500})
        assert r.status_code == 422

    def test_unknown_session_is_404(self, client):
        for method, path in [
                ("get", "/sessions/nope/transcript"),
                ("get", "/sessions/nope/suggestion"),
                ("get", "/sessions/nope/metrics")]:
            r = getattr(client, method)(path)
            assert r.status_code == 404


class TestTurns:
    def test_post_turn_generates_responses(self, client):
        sid = _create(client)["session_id"]
        r = client.post(f"/sessions/{sid}/turns",
                        json={"text": "What is 12 divided by 3?"})
        assert r.status_code == 200
        data = r.json()
        assert 1 <= len(data["responses"]) <= 4
        for resp in data["responses"]:
            assert resp["text"]
            assert resp["degraded"] is False
        assert len(data["affect"]) == 20

    def test_addressed_turn(self, client):
        created = _create(client)
        sid = created["session_id"]
        target = created["roster"][0]["profile_id"]
        r = client.post(f"/sessions/{sid}/turns",
                        json={"text": "What do you think?",
                              "addressed": [target]})
        assert r.status_code == 200
        assert [x["profile_id"] for x in r.json()["responses"]] == [target]

    def test_unknown_addressee_404(self, client):
        sid = _create(client)["session_id"]
        r = client.post(f"/sessions/{sid}/turns",
                        json={"text": "And you?", "addressed": ["ghost"]})
        assert r.status_code == 404

    def test_empty_text_422(self, client):
        sid = _create(client)["session_id"]
        r = client.post(f"/sessions/{sid}/turns", json={"text": ""})
        assert r.status_code == 422

    def test_transcript_grows(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Why?"})
        r = client.get(f"/sessions/{sid}/transcript")
        turns = r.json()["turns"]
        assert turns[0]["speaker"]["role"] == "Teacher"
        assert len(turns) >= 2


class TestSuggestions:
    def test_suggestion_contract(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns",
                    json={"text": "What is 8 divided by 2?"})
        r = client.get(f"/sessions/{sid}/suggestion")
        assert r.status_code == 200
        data = r.json()
        assert data["reasoning"].endswith(".")
        assert len(data["recommended_questions"]) == 2
        assert all(q.endswith("?") for q in data["recommended_questions"])

    def test_disabled_sessions_403(self, client):
        sid = _create(client, suggestions_enabled=False)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Why?"})
        r = client.get(f"/sessions/{sid}/suggestion")
        assert r.status_code == 403

    def test_before_first_turn_422(self, client):
        sid = _create(client)["session_id"]
        r = client.get(f"/sessions/{sid}/suggestion")
        assert r.status_code == 422


class TestAnnotations:
    def test_verdict_round_trip(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns",
                    json={"text": "How do you know that's true?"})
        r = client.post(f"/sessions/{sid}/annotations",
                        json={"turn_id": 0, "labels": ["Epistemic"]})
        assert r.status_code == 200
        assert r.json()["agreement"] == "Match"
        # system labels are now attached to the stored turn
        turns = client.get(f"/sessions/{sid}/transcript").json()["turns"]
        assert turns[0]["trqf_labels"] == ["Epistemic"]

    def test_student_turn_annotation(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Thoughts?"})
        r = client.post(f"/sessions/{sid}/annotations",
                        json={"turn_id": 1, "labels": ["Claim"]})
        assert r.status_code == 200
        assert r.json()["agreement"] in {"Match", "Partial", "Mismatch"}

    def test_wrong_framework_422(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Why?"})
        r = client.post(f"/sessions/{sid}/annotations",
                        json={"turn_id": 0, "labels": ["Claim"]})
        assert r.status_code == 422

    def test_unknown_label_422(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Why?"})
        r = client.post(f"/sessions/{sid}/annotations",
                        json={"turn_id": 0, "labels": ["Banana"]})
        assert r.status_code == 422

    def test_unknown_turn_404(self, client):
        sid = _create(client)["session_id"]
        r = client.post(f"/sessions/{sid}/annotations",
                        json={"turn_id": 42, "labels": []})
        assert r.status_code == 404


class TestReflectionAndMetrics:
    def _annotated_session(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns",
                    json={"text": "How do you know that's true?"})
        client.post(f"/sessions/{sid}/annotations",
                    json={"turn_id": 0, "labels": ["Epistemic"]})
        client.post(f"/sessions/{sid}/annotations",
                    json={"turn_id": 1, "labels": ["Claim"]})
        return sid

    def test_reflection_yields_feedback(self, client):
        sid = self._annotated_session(client)
        r = client.post(f"/sessions/{sid}/reflection",
                        json={"text": "I leaned on recall questions."})
        assert r.status_code == 200
        data = r.json()
        assert len(data["improvement_suggestions"]) >= 2
        assert data["session_metrics"]["trqf_counts"]["Epistemic"] == 1

    def test_reflection_requires_annotation(self, client):
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Why?"})
        r = client.post(f"/sessions/{sid}/reflection", json={"text": "hm"})
        assert r.status_code == 422

    def test_followup_requires_reflection_first(self, client):
        sid = self._annotated_session(client)
        r = client.post(f"/sessions/{sid}/reflection/followups",
                        json={"question": "How can I improve?"})
        assert r.status_code == 422
        client.post(f"/sessions/{sid}/reflection", json={"text": "ok then"})
        r = client.post(f"/sessions/{sid}/reflection/followups",
                        json={"question": "How can I improve?"})
        assert r.status_code == 200
        assert r.json()["answer"]

    def test_metrics_endpoint(self, client):
        sid = self._annotated_session(client)
        r = client.get(f"/sessions/{sid}/metrics")
        assert r.status_code == 200
        data = r.json()
        assert data["trqf_counts"]["Epistemic"] == 1
        assert data["n_student_responses"] >= 1


class TestRecovery:
    def test_new_app_instance_recovers_from_disk(self, index, tmp_path):
        config = ProviderConfig(backend=BACKEND_SCRIPTED)
        client1 = TestClient(create_app(index, config, str(tmp_path)))
        sid = _create(client1)["session_id"]
        client1.post(f"/sessions/{sid}/turns", json={"text": "Why twelve?"})
        client1.post(f"/sessions/{sid}/annotations",
                     json={"turn_id": 0, "labels": ["Epistemic"]})
        before = client1.get(f"/sessions/{sid}/transcript").json()

        # a fresh process with the same data dir sees the same session
        client2 = TestClient(create_app(index, config, str(tmp_path)))
        after = client2.get(f"/sessions/{sid}/transcript").json()
        assert after == before

    def test_recovered_session_accepts_new_turns(self, index, tmp_path):
        config = ProviderConfig(backend=BACKEND_SCRIPTED)
        client1 = TestClient(create_app(index, config, str(tmp_path)))
        sid = _create(client1)["session_id"]
        client1.post(f"/sessions/{sid}/turns", json={"text": "First?"})

        client2 = TestClient(create_app(index, config, str(tmp_path)))
        r = client2.post(f"/sessions/{sid}/turns", json={"text": "Second?"})
        assert r.status_code == 200
        turns = client2.get(f"/sessions/{sid}/transcript").json()["turns"]
        teacher_texts = [t["text"] for t in turns
                         if t["speaker"]["role"] == "Teacher"]
        assert teacher_texts == ["First?", "Second?"]


class _FailingProvider:
    calls = 0

    def complete(self, prompt):
        type(self).calls += 1
        raise ProviderFailure(RuntimeError("endpoint unreachable"))


class TestModelBackendDegradation:
    @pytest.fixture
    def model_client(self, index, tmp_path, monkeypatch):
        config = ProviderConfig(backend=BACKEND_MODEL,
                                endpoint="http://localhost:9/complete",
                                model_name="m1", timeout_ms=100,
                                max_retries=0)
        app = create_app(index, config, str(tmp_path))
        app.state.service.provider = _FailingProvider()
        return TestClient(app)

    def test_failed_provider_degrades_not_fails(self, model_client):
        _FailingProvider.calls = 0
        sid = _create(model_client)["session_id"]
        r = model_client.post(f"/sessions/{sid}/turns",
                              json={"text": "What is 12 divided by 3?"})
        assert r.status_code == 200
        assert _FailingProvider.calls >= 1
        for resp in r.json()["responses"]:
            assert resp["degraded"] is True
            assert resp["text"]  # scripted fallback still speaks

    def test_scripted_backend_never_calls_provider(self, client):
        _FailingProvider.calls = 0
        sid = _create(client)["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "Why?"})
        assert _FailingProvider.calls == 0
        assert client.app.state.service.provider is None
