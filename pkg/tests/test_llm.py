from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from memcog.errors import ClientError, FixtureMissingError
from memcog.llm import (
    FixtureClient,
    LiveClient,
    LMRequest,
    RecordingClient,
    extract_json,
    request_digest,
)


def test_request_digest_stable_and_order_sensitive():
    a = LMRequest.build("sys", [("user", "hello")])
    b = LMRequest.build("sys", [("user", "hello")])
    c = LMRequest.build("sys", [("user", "hello!")])
    assert request_digest(a) == request_digest(b)
    assert request_digest(a) != request_digest(c)


def test_fixture_client_round_trip(tmp_path):
    client = FixtureClient({})
    request = LMRequest.build("sys", [("user", "ping")])
    client.record(request, "pong")
    client.save(tmp_path / "responses.json")
    reloaded = FixtureClient(tmp_path / "responses.json")
    assert reloaded.complete(request).text == "pong"
    with pytest.raises(FixtureMissingError):
        reloaded.complete(LMRequest.build("sys", [("user", "other")]))


def test_fixture_client_rejects_bad_source(tmp_path):
    with pytest.raises(ClientError):
        FixtureClient(tmp_path / "missing")
    bad = tmp_path / "bad.json"
    bad.write_text('["not", "a", "map"]')
    with pytest.raises(ClientError):
        FixtureClient(bad)


def test_recording_client_captures():
    inner = FixtureClient({})
    request = LMRequest.build("sys", [("user", "q")])
    inner.record(request, "a")
    recorder = RecordingClient(inner)
    assert recorder.complete(request).text == "a"
    assert recorder.captured == {request_digest(request): "a"}


# ---------------------------------------------------------------------------
# Live client against a local stub endpoint
# ---------------------------------------------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    behavior = "ok"

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        if self.headers.get("Authorization") != "Bearer sekrit":
            self.send_response(401)
            self.end_headers()
            return
        if _StubHandler.behavior == "ok":
            body = json.dumps({
                "choices": [{"message": {
                    "content": f"echo:{payload['messages'][-1]['content']}"
                }}]
            }).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        else:
            body = json.dumps({"unexpected": True}).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)


@pytest.fixture()
def stub_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/chat"
    server.shutdown()
    server.server_close()


def test_live_client_happy_path(stub_endpoint):
    _StubHandler.behavior = "ok"
    client = LiveClient(endpoint=stub_endpoint, api_key="sekrit", model="stub")
    response = client.complete(LMRequest.build("sys", [("user", "hi there")]))
    assert response.text == "echo:hi there"


def test_live_client_bad_payload_shape(stub_endpoint):
    _StubHandler.behavior = "malformed"
    client = LiveClient(endpoint=stub_endpoint, api_key="sekrit", model="stub")
    with pytest.raises(ClientError):
        client.complete(LMRequest.build("sys", [("user", "hi")]))


def test_live_client_auth_failure(stub_endpoint):
    _StubHandler.behavior = "ok"
    client = LiveClient(endpoint=stub_endpoint, api_key="wrong", model="stub")
    with pytest.raises(ClientError):
        client.complete(LMRequest.build("sys", [("user", "hi")]))


def test_live_client_requires_configuration(monkeypatch):
    monkeypatch.delenv("MEMCOG_LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("MEMCOG_LLM_API_KEY", raising=False)
    with pytest.raises(ClientError):
        LiveClient()


# ---------------------------------------------------------------------------
# JSON extraction
# ---------------------------------------------------------------------------

def test_extract_json_tolerates_prose():
    assert extract_json('Here you go: [1, 2, 3] hope that helps') == [1, 2, 3]
    assert extract_json('{"a": 1}') == {"a": 1}
    assert extract_json('prefix {"a": [1]} suffix') == {"a": [1]}
    with pytest.raises(ValueError):
        extract_json("no json here")
