"""Record the exact HTTP requests the pipeline's remote-scorer client sends.

Run once from the package root with the `degentweb` package installed:

    python tools/record_primary_requests.py

The client is pointed at a capturing stand-in for the HTTP session, so
every recorded entry holds the literal method, path, headers, and body
bytes that would hit the wire — including batch splits and non-ASCII
escaping.  Tests replay these byte streams against the service app and
check the responses are schema-valid, so client and service can never
drift apart silently.
"""
from __future__ import annotations

import json
from pathlib import Path

import requests

from degentweb.scorer import RemoteScorer

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / \
    "primary_requests.json"
BASE = "http://scorer.invalid"


class _CapturingSession:
    """Prepares real requests (for their exact bytes) and answers canned."""

    def __init__(self) -> None:
        self.recorded: list[dict] = []

    def post(self, url: str, *, json: object, timeout: float):
        prepared = requests.Request("POST", url, json=json).prepare()
        body = prepared.body
        if isinstance(body, str):  # requests may hand back str for ASCII
            body = body.encode("utf-8")
        self.recorded.append({
            "method": "POST",
            "path": url[len(BASE):],
            "content_type": prepared.headers["Content-Type"],
            "body": body.decode("utf-8"),
        })
        n = len(json["texts"])
        payload = ({"scores": [0.5] * n} if url.endswith("/score")
                   else {"counts": [1] * n})
        return _CannedResponse(payload)

    def get(self, url: str, timeout: float):
        self.recorded.append({"method": "GET", "path": url[len(BASE):],
                              "content_type": None, "body": None})
        return _CannedResponse({"status": "ok", "model": "recorded"})


class _CannedResponse:
    status_code = 200

    def __init__(self, payload: dict) -> None:
        self._payload = payload

    def json(self) -> dict:
        return self._payload

    def raise_for_status(self) -> None:
        pass


def main() -> None:
    snippets = json.loads(
        (Path(__file__).resolve().parent.parent / "src" / "scorer_service"
         / "data" / "fixture_snippets.json").read_text(encoding="utf-8"))
    texts = snippets["human"] + snippets["generated"]

    session = _CapturingSession()
    client = RemoteScorer(BASE, batch_size=16, concurrency=1,
                          session=session)
    client.score_texts(texts)
    client.count_tokens(texts + ["", "naïve café — déjà vu"])
    client.health()

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"base_url": BASE,
                               "requests": session.recorded},
                              indent=2) + "\n", encoding="utf-8")
    print(f"recorded {len(session.recorded)} requests -> {OUT}")


if __name__ == "__main__":
    main()
