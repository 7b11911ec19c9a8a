from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from treenav.clock import VirtualClock
from treenav.llm_gateway import ScriptedBackend, script_backend
from treenav.orchestrator import Orchestrator, OrchestratorConfig
from treenav.service import ServiceConfig, create_app
from treenav.tree_core import tree_to_json

TREE_CSV = "\n".join(
    [
        "transition_key,node_from,node_to,question,answer,extra_context,flags",
        't1,A,B,any pain?,yes,,"{""risk"": ""low""}"',
        "t2,A,C,any pain?,no,,",
        "t3,B,D,worse at night?,yes,,",
    ]
)

LOOP_JSON = json.dumps(
    {
        "tree_id": "loopy",
        "version": 0,
        "entry": "A",
        "edges": [
            {"transition_key": "t1", "node_from": "A", "node_to": "B", "question": "q", "answer": "b"},
            {"transition_key": "t2", "node_from": "B", "node_to": "A", "question": "q", "answer": "a"},
        ],
        "node_meta": {},
    }
)


@pytest.fixture()
def backend():
    return ScriptedBackend(clock=VirtualClock())


@pytest.fixture()
def client(tmp_path, backend):
    config = ServiceConfig(store_root=tmp_path / "store", backend=script_backend(backend))
    app = create_app(config)
    with TestClient(app) as c:
        yield c


def upload_tree(client, *, source=TREE_CSV, fmt="csv", tree_id="branch", entry=None):
    return client.post(
        "/trees",
        json={"source": source, "format": fmt, "tree_id": tree_id, "entry": entry},
    )


def open_session(client, tree_id="branch", context=None):
    response = client.post(
        "/sessions", json={"tree_id": tree_id, "external_context": context or {}}
    )
    assert response.status_code == 200, response.text
    return response.json()["session_id"]


def eval_reply(next_state: str, scratchpad: str = "sp") -> str:
    return json.dumps({"scratchpad": scratchpad, "next_state": next_state})


class TestHealthAndUpload:
    def test_healthz(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_csv_upload_accepted(self, client):
        response = upload_tree(client)
        assert response.status_code == 202
        doc = response.json()
        assert doc["tree_id"] == "branch"
        assert doc["version"] == 1
        assert doc["edge_count"] == 3
        assert doc["validation"]["is_valid"]

    def test_json_upload(self, client, branch):
        response = upload_tree(
            client, source=tree_to_json(branch), fmt="json", tree_id="branch-json"
        )
        assert response.status_code == 202

    def test_invalid_tree_rejected_with_full_report(self, client):
        response = upload_tree(client, source=LOOP_JSON, fmt="json", tree_id="loopy")
        assert response.status_code == 422
        doc = response.json()
        assert doc["version"] is None  # nothing was stored
        assert doc["validation"]["unescapable_loops"] == [["A", "B"]]

    def test_malformed_csv_maps_to_422(self, client):
        response = upload_tree(client, source="t1,A", tree_id="bad")
        assert response.status_code == 422
        assert response.json()["code"] == "missing_field"

    def test_report_route(self, client):
        upload_tree(client)
        response = client.get("/trees/branch/versions/1/report")
        assert response.status_code == 200
        assert response.json() == {
            "is_valid": True,
            "orphans": [],
            "dangling_edges": [],
            "unescapable_loops": [],
        }

    def test_report_unknown_version_404(self, client):
        upload_tree(client)
        response = client.get("/trees/branch/versions/9/report")
        assert response.status_code == 404
        assert response.json()["code"] == "not_found"


class TestSessionsAndMessages:
    def test_create_session_starts_at_entry(self, client):
        upload_tree(client)
        response = client.post("/sessions", json={"tree_id": "branch"})
        doc = response.json()
        assert doc["current_node"] == "A"
        assert doc["tree_version"] == 1

    def test_create_session_unknown_tree_404(self, client):
        response = client.post("/sessions", json={"tree_id": "ghost"})
        assert response.status_code == 404

    def test_arbor_message_round_trip(self, client, backend):
        upload_tree(client)
        session_id = open_session(client)
        backend.queue("evaluation", eval_reply("t1"))
        backend.queue("evaluation", eval_reply("B"))
        backend.queue("generation", "worse at night?")

        response = client.post(
            f"/sessions/{session_id}/messages",
            json={"text": "yes, hurts", "strategy": "arbor"},
        )
        assert response.status_code == 200, response.text
        doc = response.json()
        assert doc["strategy"] == "arbor"
        assert doc["final_node"] == "B"
        assert [h["chosen"] for h in doc["hops"]] == ["t1", "stay"]
        assert doc["message"] == "worse at night?"

    def test_baseline_message_round_trip(self, client, backend):
        upload_tree(client)
        session_id = open_session(client)
        backend.queue(
            "baseline", json.dumps({"message": "ok", "new_current_node": "C"})
        )
        response = client.post(
            f"/sessions/{session_id}/messages",
            json={"text": "no pain", "strategy": "baseline"},
        )
        doc = response.json()
        assert doc["strategy"] == "baseline"
        assert doc["node_valid"] is True
        assert doc["final_node"] == "C"

    def test_message_to_unknown_session_404(self, client):
        response = client.post(
            "/sessions/nope/messages", json={"text": "hi", "strategy": "arbor"}
        )
        assert response.status_code == 404

    def test_empty_text_422_via_request_model(self, client):
        upload_tree(client)
        session_id = open_session(client)
        response = client.post(f"/sessions/{session_id}/messages", json={"text": ""})
        assert response.status_code == 422

    def test_unknown_strategy_422(self, client):
        upload_tree(client)
        session_id = open_session(client)
        response = client.post(
            f"/sessions/{session_id}/messages",
            json={"text": "hi", "strategy": "telepathy"},
        )
        assert response.status_code == 422

    def test_backend_failure_maps_to_502(self, client, backend):
        upload_tree(client)
        session_id = open_session(client)
        # empty script → BackendError("exhausted") → 502
        response = client.post(
            f"/sessions/{session_id}/messages", json={"text": "hi"}
        )
        assert response.status_code == 502
        assert response.json()["code"] == "backend_error"

    def test_session_info(self, client, backend):
        upload_tree(client)
        session_id = open_session(client)
        backend.queue("evaluation", eval_reply("t1"))
        backend.queue("evaluation", eval_reply("B"))
        backend.queue("generation", "m")
        client.post(f"/sessions/{session_id}/messages", json={"text": "yes"})
        doc = client.get(f"/sessions/{session_id}").json()
        assert doc["current_node"] == "B"


class TestTrace:
    def test_trace_lists_hops(self, client, backend):
        upload_tree(client)
        session_id = open_session(client)
        backend.queue("evaluation", eval_reply("t1"))
        backend.queue("evaluation", eval_reply("B"))
        backend.queue("generation", "m")
        client.post(f"/sessions/{session_id}/messages", json={"text": "yes"})

        doc = client.get(f"/sessions/{session_id}/trace").json()
        assert doc["session_id"] == session_id
        assert [h["chosen"] for h in doc["hops"]] == ["t1", "stay"]
        assert all(h["turn"] == 1 for h in doc["hops"])

    def test_trace_unknown_session_404(self, client):
        assert client.get("/sessions/ghost/trace").status_code == 404

    def test_trace_empty_before_any_turn(self, client):
        upload_tree(client)
        session_id = open_session(client)
        assert client.get(f"/sessions/{session_id}/trace").json()["hops"] == []


class _GateBackend(ScriptedBackend):
    """Scripted backend that parks the first serve() until released."""

    def __init__(self):
        super().__init__(clock=VirtualClock())
        self.entered = threading.Event()
        self.release = threading.Event()
        self._first = True

    def serve(self, request, estimator):
        if self._first:
            self._first = False
            self.entered.set()
            assert self.release.wait(timeout=10)
        return super().serve(request, estimator)


class TestConcurrency:
    def test_second_message_during_turn_gets_409(self, tmp_path):
        backend = _GateBackend()
        app = create_app(
            ServiceConfig(store_root=tmp_path / "store", backend=script_backend(backend))
        )
        with TestClient(app) as client:
            upload_tree(client)
            session_id = open_session(client)
            backend.queue("evaluation", eval_reply("A"))
            backend.queue("generation", "m")

            first: dict = {}

            def send_first():
                first["response"] = client.post(
                    f"/sessions/{session_id}/messages", json={"text": "one"}
                )

            worker = threading.Thread(target=send_first)
            worker.start()
            assert backend.entered.wait(timeout=10)
            try:
                busy = client.post(
                    f"/sessions/{session_id}/messages", json={"text": "two"}
                )
            finally:
                backend.release.set()
                worker.join(timeout=10)

            assert busy.status_code == 409
            assert busy.json()["code"] == "session_busy"
            assert first["response"].status_code == 200


class TestParity:
    def test_api_turn_equals_direct_call(self, tmp_path, branch):
        """The HTTP layer adds nothing: same scripted replies, same outcome."""

        def run(through_api: bool) -> dict:
            backend = ScriptedBackend(clock=VirtualClock())
            backend.queue("evaluation", eval_reply("t1", "why not"))
            backend.queue("evaluation", eval_reply("B", "hold"))
            backend.queue("generation", "and now?")
            root = tmp_path / ("api" if through_api else "direct")
            if through_api:
                app = create_app(
                    ServiceConfig(store_root=root, backend=script_backend(backend))
                )
                with TestClient(app) as client:
                    upload_tree(client, source=tree_to_json(branch), fmt="json")
                    session_id = open_session(client, tree_id="branch")
                    doc = client.post(
                        f"/sessions/{session_id}/messages", json={"text": "yes"}
                    ).json()
                    doc.pop("strategy")
                    return doc
            from treenav.edge_store import TreeStore

            store = TreeStore(root)
            store.put_tree(branch)
            orchestrator = Orchestrator(
                store, OrchestratorConfig(backend=script_backend(backend))
            )
            session = orchestrator.create_session("branch")
            return orchestrator.handle_turn(session.session_id, "yes").to_doc()

        assert run(through_api=True) == run(through_api=False)


class TestAuth:
    @pytest.fixture()
    def locked_client(self, tmp_path, backend):
        config = ServiceConfig(
            store_root=tmp_path / "store",
            backend=script_backend(backend),
            auth_token="hunter2",
        )
        with TestClient(create_app(config)) as c:
            yield c

    def test_missing_token_401(self, locked_client):
        assert locked_client.post("/trees", json={"source": "x", "format": "csv"}).status_code == 401

    def test_wrong_token_401(self, locked_client):
        response = locked_client.post(
            "/trees",
            json={"source": TREE_CSV, "format": "csv", "tree_id": "b"},
            headers={"Authorization": "Bearer wrong"},
        )
        assert response.status_code == 401

    def test_correct_token_passes(self, locked_client):
        response = locked_client.post(
            "/trees",
            json={"source": TREE_CSV, "format": "csv", "tree_id": "b"},
            headers={"Authorization": "Bearer hunter2"},
        )
        assert response.status_code == 202

    def test_healthz_stays_open(self, locked_client):
        assert locked_client.get("/healthz").status_code == 200
