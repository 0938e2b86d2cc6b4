"""Mock and remote scoring backends."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from degentweb.scorer import (
    HUMAN_TEXT_MARKER,
    LABEL_HUMAN,
    LABEL_LLM,
    LLM_TEXT_MARKER,
    MockProfile,
    MockScorer,
    RemoteScorer,
    ScoreRequest,
    ScoreResponse,
    ScorerError,
    flip_probability,
    label_from_markers,
    mock_score,
    score_pages,
    score_texts,
)


class TestRequestResponseTypes:
    def test_empty_request_rejected(self):
        with pytest.raises(ValueError):
            ScoreRequest(texts=())

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            ScoreRequest(texts=("ok", ""))

    def test_non_finite_scores_rejected(self):
        with pytest.raises(ValueError):
            ScoreResponse(scores=(0.9, float("nan")))

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            MockProfile(human_mean=0.7, llm_mean=0.8)
        with pytest.raises(ValueError):
            MockProfile(noise_sd=0.0)
        with pytest.raises(ValueError):
            MockProfile(page_accuracy_target=0.4)


class TestMockScore:
    def test_deterministic(self):
        a = mock_score("some page text", seed=99)
        b = mock_score("some page text", seed=99)
        assert a == b
        assert mock_score("some page text", seed=100) != a

    def test_same_text_twice_in_request(self):
        backend = MockScorer(seed=5)
        response = score_texts(backend, ScoreRequest(("dup", "dup", "other")))
        assert response.scores[0] == response.scores[1]

    def test_label_hint_degenerate_noise(self):
        profile = MockProfile(noise_sd=1e-12)
        score = mock_score("anything", seed=1, profile=profile,
                           label_hint=LABEL_LLM)
        assert abs(score - profile.llm_mean) < 1e-10
        score = mock_score("anything", seed=1, profile=profile,
                           label_hint=LABEL_HUMAN)
        assert abs(score - profile.human_mean) < 1e-10

    def test_label_hint_never_flipped(self):
        # With hints, every one of many draws stays on its own side even
        # though the flip rate would have moved ~5% of marker labels.
        profile = MockProfile(noise_sd=0.001)
        for i in range(500):
            s = mock_score(f"text {i}", seed=7, profile=profile,
                           label_hint=LABEL_LLM)
            assert abs(s - profile.llm_mean) < 0.01

    def test_unknown_hint_rejected(self):
        with pytest.raises(ValueError):
            mock_score("x", seed=0, label_hint="robot")

    def test_markers(self):
        assert label_from_markers("abc" + LLM_TEXT_MARKER + "def") == LABEL_LLM
        assert label_from_markers(HUMAN_TEXT_MARKER) == LABEL_HUMAN
        assert label_from_markers("plain") is None

    def test_flip_probability_at_defaults(self):
        # Base separability Phi(2) ~ 0.97725; solving for the 0.93 target
        # gives ~0.0495.
        assert flip_probability(MockProfile()) == pytest.approx(0.0495, abs=1e-3)
        wide = MockProfile(human_mean=2.0, llm_mean=0.0, noise_sd=0.01,
                           page_accuracy_target=1.0)
        assert flip_probability(wide) == 0.0

    def test_threshold_accuracy_near_target(self):
        # 10,000 marker-labeled draws; best single threshold should land
        # within +-1.5 points of the 93% target.
        profile = MockProfile()
        scored = []
        for i in range(5000):
            scored.append((mock_score(f"h{i} " + HUMAN_TEXT_MARKER, 11, profile), 1))
            scored.append((mock_score(f"l{i} " + LLM_TEXT_MARKER, 11, profile), -1))
        scored.sort()
        n = len(scored)
        # Sweep all cut positions: below the cut -> llm, above -> human.
        llm_below = 0
        human_total = sum(1 for _, y in scored if y == 1)
        llm_total = n - human_total
        best = 0
        for i, (_, y) in enumerate(scored):
            if y == -1:
                llm_below += 1
            human_above = human_total - (i + 1 - llm_below)
            best = max(best, (llm_below + human_above) / n)
        assert abs(best - profile.page_accuracy_target) <= 0.015

    def test_concatenation_invariance(self):
        backend = MockScorer(seed=3)
        first = score_texts(backend, ScoreRequest(("a", "b"))).scores
        second = score_texts(backend, ScoreRequest(("c",))).scores
        joint = score_texts(backend, ScoreRequest(("a", "b", "c"))).scores
        assert joint == first + second

    def test_token_counts_heuristic(self):
        assert MockScorer().count_tokens(["Hello, world!"]) == [4]


# ---------------------------------------------------------------------------
# Remote backend against a scripted local HTTP server
# ---------------------------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # silence test output
        pass

    def _read_json(self) -> dict:
        length = int(self.headers["Content-Length"])
        return json.loads(self.rfile.read(length))

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, {"status": "ok", "model": "stub"})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        state = self.server.state  # type: ignore[attr-defined]
        with state["lock"]:
            state["calls"].append(self.path)
            remaining = state["fail_next"].get(self.path, 0)
            if remaining > 0:
                state["fail_next"][self.path] = remaining - 1
                self._send(503, {"error": "degraded"})
                return
        data = self._read_json()
        texts = data["texts"]
        if self.path == "/score":
            scores = [0.5 + len(t) / 1000.0 for t in texts]
            if state["short_response"]:
                scores = scores[:-1]
            self._send(200, {"scores": scores})
        elif self.path == "/count_tokens":
            self._send(200, {"counts": [len(t.split()) for t in texts]})
        else:
            self._send(404, {"error": "not found"})


@pytest.fixture()
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.state = {"lock": threading.Lock(), "calls": [],
                    "fail_next": {}, "short_response": False}
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()


def make_client(server, **kwargs) -> RemoteScorer:
    host, port = server.server_address
    sleeps: list[float] = []
    kwargs.setdefault("sleep", sleeps.append)
    client = RemoteScorer(f"http://{host}:{port}", **kwargs)
    client.recorded_sleeps = sleeps  # type: ignore[attr-defined]
    return client


class TestRemoteScorer:
    def test_batching_preserves_order(self, stub_server):
        client = make_client(stub_server, batch_size=16, concurrency=4)
        texts = ["x" * (i + 1) for i in range(40)]
        scores = client.score_texts(texts)
        assert scores == [0.5 + (i + 1) / 1000.0 for i in range(40)]
        assert stub_server.state["calls"].count("/score") == 3

    def test_retry_then_success(self, stub_server):
        stub_server.state["fail_next"]["/score"] = 2
        client = make_client(stub_server, max_attempts=3, backoff_base=0.5)
        assert client.score_texts(["abc"]) == [0.503]
        assert client.recorded_sleeps == [0.5, 1.0]

    def test_failure_after_retries_identifies_indices(self, stub_server):
        stub_server.state["fail_next"]["/score"] = 99
        client = make_client(stub_server, batch_size=4, concurrency=1,
                             max_attempts=3)
        with pytest.raises(ScorerError) as exc_info:
            client.score_texts(["a", "b", "c", "d", "e"])
        assert len(exc_info.value.failed_indices) in (4, 1)
        assert "after 3 attempts" in str(exc_info.value)

    def test_short_response_rejected(self, stub_server):
        stub_server.state["short_response"] = True
        client = make_client(stub_server, max_attempts=1)
        with pytest.raises(ScorerError):
            client.score_texts(["one", "two"])

    def test_count_tokens_and_health(self, stub_server):
        client = make_client(stub_server)
        assert client.count_tokens(["a b c", "d"]) == [3, 1]
        assert client.health() == {"status": "ok", "model": "stub"}

    def test_concatenation_invariance_remote(self, stub_server):
        client = make_client(stub_server, batch_size=2)
        a = score_pages(client, ["aa", "bbb"])
        b = score_pages(client, ["cccc"])
        joint = score_pages(client, ["aa", "bbb", "cccc"])
        assert joint == a + b

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            RemoteScorer("http://x", batch_size=0)
