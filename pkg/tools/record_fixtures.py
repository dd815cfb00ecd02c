#!/usr/bin/env python3
"""Record audit-service wire exchanges for the frontend contract tests.

Drives the real service through a scripted review scenario (including a
planted duplicate query) and writes every request/response pair to
frontend/tests/fixtures/recorded.json. Rerun after changing the service
schemas; the frontend contract tests validate against this recording.
"""
from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from vtgkit.audit import AuditStore, create_app
from vtgkit.dataset import AnnotationRecord, Dataset, VideoMeta
from vtgkit.spans import TimeSpan

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "recorded.json"

TOKENS = {"tok-alice": "alice", "tok-bob": "bob"}


def build_dataset() -> Dataset:
    videos = {
        "v1": VideoMeta("v1", 30.0),
        "v2": VideoMeta("v2", 60.0),
    }
    annotations = [
        AnnotationRecord("a101", "v1", "person opens door", TimeSpan(2.0, 8.0)),
        AnnotationRecord("a102", "v1", "person opens the door", TimeSpan(12.0, 18.0)),
        AnnotationRecord("a103", "v2", "a dog catches a frisbee mid-air", TimeSpan(5.0, 15.0)),
    ]
    return Dataset("recorded", videos, annotations)


def main() -> None:
    store = AuditStore(build_dataset())
    client = TestClient(create_app(store, TOKENS))
    exchanges: list[dict] = []

    def call(worker: str, method: str, path: str, body: dict | None = None) -> dict:
        headers = {"Authorization": f"Bearer tok-{worker}"}
        if method == "GET":
            response = client.get(path, headers=headers)
        else:
            response = client.post(path, json=body, headers=headers)
        exchanges.append({
            "seq": len(exchanges) + 1,
            "worker": worker,
            "method": method,
            "path": path,
            "request_body": body,
            "status": response.status_code,
            "response_body": response.json(),
        })
        assert response.status_code == 200, (path, response.status_code, response.text)
        return response.json()

    call("alice", "GET", "/healthz")
    created = call("alice", "POST", "/batches",
                   {"annotation_ids": ["a101", "a102", "a103"], "qc_threshold": 0.5})
    batch_id = created["batch"]["batch_id"]

    # review phase: a102 is the planted duplicate of a101
    reviews = {
        "a101": {"diagnosis": "no_error", "correction": None},
        "a102": {
            "diagnosis": ["duplicate_query"],
            "correction": {
                "new_query": "person opens the door a second time before leaving",
                "new_span": [12.0, 18.0],
                "discarded": False,
            },
        },
        "a103": {"diagnosis": "no_error", "correction": None},
    }
    while True:
        assigned = call("alice", "POST", "/assign", {"phase": "review"})
        task = assigned["task"]
        if task is None:
            break
        call("alice", "POST", f"/tasks/{task['task_id']}/review", reviews[task["annotation_id"]])

    while True:
        assigned = call("bob", "POST", "/assign", {"phase": "validate"})
        task = assigned["task"]
        if task is None:
            break
        call("bob", "POST", f"/tasks/{task['task_id']}/validate",
             {"verdict": "correct", "reason": None})

    call("alice", "POST", f"/batches/{batch_id}/qc")
    call("alice", "GET", "/export/refined")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"schema_version": 1, "exchanges": exchanges}, indent=2,
                              sort_keys=True) + "\n", encoding="utf-8")
    print(f"recorded {len(exchanges)} exchanges -> {OUT}")


if __name__ == "__main__":
    main()
