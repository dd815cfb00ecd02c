from __future__ import annotations

import json
import random
import threading

import pytest
from fastapi.testclient import TestClient

from conftest import build_dataset
from vtgkit.audit import AuditError, AuditStore, Correction, create_app


def store_with(n: int = 10, root=None) -> AuditStore:
    rows = [("v%d" % (i // 2), 60.0, f"a{i:03d}", f"a person does action {i}",
             float(i), float(i) + 5.0) for i in range(n)]
    store = AuditStore(build_dataset("audit", rows), root=root)
    for w in ("alice", "bob", "carol"):
        store.register_worker(w)
    return store


def drive_batch(store: AuditStore, batch, reviewer="alice", validator="bob",
                verdicts=None, corrections=None):
    """Review everything as one worker, validate as another."""
    corrections = corrections or {}
    verdicts = verdicts or {}
    while (task := store.assign_next(reviewer, "review")) is not None:
        corr = corrections.get(task.annotation_id)
        if corr is None:
            store.submit_review(task.task_id, reviewer, "no_error")
        else:
            diagnosis, correction = corr
            store.submit_review(task.task_id, reviewer, diagnosis, correction)
    while (task := store.assign_next(validator, "validate")) is not None:
        verdict = verdicts.get(task.annotation_id, "correct")
        reason = "wrong" if verdict == "incorrect" else None
        store.submit_validation(task.task_id, validator, verdict, reason)


class TestBatching:
    def test_create_batch_counts(self):
        store = store_with(10)
        ids = [a.annotation_id for a in store.dataset.annotations][:5]
        batch = store.create_batch(ids, qc_threshold=0.1)
        assert len(batch.task_ids) == 5
        assert all(store.tasks[t].state == "pending" for t in batch.task_ids)

    def test_empty_batch_rejected(self):
        store = store_with(4)
        with pytest.raises(AuditError):
            store.create_batch([])

    def test_double_enrollment_rejected(self):
        store = store_with(4)
        store.create_batch(["a000", "a001"])
        with pytest.raises(AuditError, match="already enrolled"):
            store.create_batch(["a001", "a002"])

    def test_unknown_annotation_rejected(self):
        store = store_with(4)
        with pytest.raises(AuditError, match="unknown annotation_id"):
            store.create_batch(["ghost"])


class TestAssignment:
    def test_sole_worker_validate_starves(self):
        store = store_with(4)
        store.create_batch(["a000", "a001"])
        while (task := store.assign_next("alice", "review")) is not None:
            store.submit_review(task.task_id, "alice", "no_error")
        assert store.assign_next("alice", "validate") is None

    def test_validator_never_reviewer_over_simulation(self):
        store = store_with(10)
        store.create_batch([f"a{i:03d}" for i in range(10)])
        workers = ["alice", "bob", "carol"]
        rng = random.Random(0)
        # interleave review and validation in random worker order
        for _ in range(200):
            w = rng.choice(workers)
            task = store.assign_next(w, rng.choice(["review", "validate"]))
            if task is None:
                continue
            if task.state == "in_review":
                store.submit_review(task.task_id, w, "no_error")
            else:
                store.submit_validation(task.task_id, w, "correct")
        for task in store.tasks.values():
            if task.validator_id is not None:
                assert task.validator_id != task.reviewer_id

    def test_empty_queue_returns_none(self):
        store = store_with(4)
        assert store.assign_next("alice", "review") is None

    def test_no_double_assignment_under_threads(self):
        store = store_with(50)
        store.create_batch([f"a{i:03d}" for i in range(50)])
        for i in range(8):
            store.register_worker(f"w{i}")
        grabbed: list[str] = []
        lock = threading.Lock()

        def grab(worker):
            while True:
                task = store.assign_next(worker, "review")
                if task is None:
                    return
                with lock:
                    grabbed.append(task.task_id)

        threads = [threading.Thread(target=grab, args=(f"w{i}",)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(grabbed) == 50
        assert len(set(grabbed)) == 50


class TestReviewRules:
    def test_review_requires_correction_on_error(self):
        store = store_with(4)
        store.create_batch(["a000"])
        task = store.assign_next("alice", "review")
        with pytest.raises(AuditError, match="correction is required"):
            store.submit_review(task.task_id, "alice", ["unclear_query"])

    def test_wrong_worker_cannot_submit(self):
        store = store_with(4)
        store.create_batch(["a000"])
        task = store.assign_next("alice", "review")
        with pytest.raises(AuditError):
            store.submit_review(task.task_id, "bob", "no_error")

    def test_span_outside_duration_rejected(self):
        store = store_with(4)
        store.create_batch(["a000"])
        task = store.assign_next("alice", "review")
        with pytest.raises(AuditError, match="outside video duration"):
            store.submit_review(task.task_id, "alice", ["inaccurate_segment"],
                                Correction(new_span=(10.0, 80.0)))

    def test_video_group_hint_recorded(self):
        store = store_with(4)
        store.create_batch(["a000"])
        task = store.tasks[store.batches["batch-0001"].task_ids[0]]
        assert task.video_group == ["a001"]  # same video v0


class TestBatchQC:
    def test_accepted_below_threshold(self):
        store = store_with(20)
        batch = store.create_batch([f"a{i:03d}" for i in range(20)], qc_threshold=0.1)
        drive_batch(store, batch)
        status, rate = store.batch_qc(batch.batch_id)
        assert status == "accepted" and rate == 0.0

    def test_rejected_above_threshold(self):
        store = store_with(20)
        batch = store.create_batch([f"a{i:03d}" for i in range(20)], qc_threshold=0.1)
        verdicts = {f"a{i:03d}": "incorrect" for i in range(3)}  # 3/20 = 0.15 > 0.1
        drive_batch(store, batch, verdicts=verdicts)
        status, rate = store.batch_qc(batch.batch_id)
        assert status == "rejected" and rate == pytest.approx(0.15)

    def test_exactly_at_threshold_accepted(self):
        store = store_with(20)
        batch = store.create_batch([f"a{i:03d}" for i in range(20)], qc_threshold=0.1)
        verdicts = {f"a{i:03d}": "incorrect" for i in range(2)}  # 2/20 = 0.1, strict
        drive_batch(store, batch, verdicts=verdicts)
        status, _ = store.batch_qc(batch.batch_id)
        assert status == "accepted"

    def test_rejection_resets_all_tasks_and_archives(self):
        store = store_with(10)
        batch = store.create_batch([f"a{i:03d}" for i in range(10)], qc_threshold=0.0)
        verdicts = {"a000": "incorrect"}
        drive_batch(store, batch, verdicts=verdicts)
        status, _ = store.batch_qc(batch.batch_id)
        assert status == "rejected"
        for task_id in batch.task_ids:
            task = store.tasks[task_id]
            assert task.state == "pending"
            assert task.reviewer_id is None and task.validator_id is None
            assert len(task.archive) == 1  # prior submission archived, not deleted
        # batch reopens for re-annotation
        assert store.batches[batch.batch_id].status == "open"
        drive_batch(store, batch, reviewer="bob", validator="carol")
        status, _ = store.batch_qc(batch.batch_id)
        assert status == "accepted"

    def test_qc_requires_all_validated(self):
        store = store_with(4)
        batch = store.create_batch(["a000", "a001"])
        with pytest.raises(AuditError, match="validated"):
            store.batch_qc(batch.batch_id)


class TestExport:
    def _accepted_store(self):
        store = store_with(6)
        batch = store.create_batch([f"a{i:03d}" for i in range(6)], qc_threshold=0.5)
        corrections = {
            "a000": (["unclear_query"], Correction(new_query="a person closes the cabinet door")),
            "a001": (["inaccurate_segment"], Correction(new_span=(2.0, 9.0))),
            "a002": (["no_occurrence"], Correction(discarded=True)),
        }
        drive_batch(store, batch, corrections=corrections)
        store.batch_qc(batch.batch_id)
        return store

    def test_corrections_applied_and_ledger_counts(self):
        store = self._accepted_store()
        records, ledger = store.export_refined("refined")
        assert ledger["n_exported"] == 5  # one discarded
        assert ledger["rewritten_queries"] == 1
        assert ledger["refined_time_segments"] == 1
        by_id = {r["annotation_id"]: r for r in records}
        assert by_id["a000"]["query"] == "a person closes the cabinet door"
        assert by_id["a001"]["span"] == [2.0, 9.0]
        assert "a002" not in by_id
        assert all(r["provenance"] == "human_refined" for r in records)

    def test_no_corrections_identical_but_provenance(self):
        store = store_with(4)
        batch = store.create_batch([f"a{i:03d}" for i in range(4)])
        drive_batch(store, batch)
        store.batch_qc(batch.batch_id)
        records, ledger = store.export_refined("refined")
        assert ledger["rewritten_queries"] == 0 and ledger["refined_time_segments"] == 0
        for record, ann in zip(records, store.dataset.annotations):
            assert record["query"] == ann.query
            assert record["span"] == [ann.span.start, ann.span.end]
            assert record["provenance"] == "human_refined"

    def test_export_requires_accepted_batches(self):
        store = store_with(4)
        store.create_batch(["a000"])
        with pytest.raises(AuditError, match="not yet accepted"):
            store.export_refined("refined")

    def test_reexport_byte_identical(self):
        store = self._accepted_store()
        one = json.dumps(store.export_refined("refined"), sort_keys=True)
        two = json.dumps(store.export_refined("refined"), sort_keys=True)
        assert one == two


class TestPersistence:
    def test_replay_rebuilds_state(self, tmp_path):
        store = store_with(6, root=tmp_path)
        batch = store.create_batch([f"a{i:03d}" for i in range(6)])
        drive_batch(store, batch)
        store.batch_qc(batch.batch_id)
        export_before = store.export_refined("refined")

        reopened = AuditStore(store.dataset, root=tmp_path)
        assert reopened.export_refined("refined") == export_before
        assert {t.state for t in reopened.tasks.values()} == {"validated"}


class TestHttpApi:
    TOKENS = {"tok-alice": "alice", "tok-bob": "bob"}

    def client(self, store=None):
        store = store or store_with(6)
        app = create_app(store, self.TOKENS)
        return TestClient(app), store

    def auth(self, who):
        return {"Authorization": f"Bearer tok-{who}"}

    def test_requires_token(self):
        client, _ = self.client()
        assert client.post("/assign", json={"phase": "review"}).status_code == 401
        bad = client.post("/assign", json={"phase": "review"},
                          headers={"Authorization": "Bearer nope"})
        assert bad.status_code == 401

    def test_full_flow_over_http(self):
        client, store = self.client()
        r = client.post("/batches", json={"annotation_ids": ["a000", "a001"],
                                          "qc_threshold": 0.5}, headers=self.auth("alice"))
        assert r.status_code == 200
        batch_id = r.json()["batch"]["batch_id"]
        assert r.json()["schema_version"] == 1

        while True:
            r = client.post("/assign", json={"phase": "review"}, headers=self.auth("alice"))
            task = r.json()["task"]
            if task is None:
                break
            r = client.post(f"/tasks/{task['task_id']}/review",
                            json={"diagnosis": "no_error"}, headers=self.auth("alice"))
            assert r.status_code == 200
            assert r.json()["task"]["state"] == "reviewed"

        while True:
            r = client.post("/assign", json={"phase": "validate"}, headers=self.auth("bob"))
            task = r.json()["task"]
            if task is None:
                break
            r = client.post(f"/tasks/{task['task_id']}/validate",
                            json={"verdict": "correct"}, headers=self.auth("bob"))
            assert r.status_code == 200

        r = client.post(f"/batches/{batch_id}/qc", headers=self.auth("alice"))
        assert r.json()["status"] == "accepted"

        r = client.get("/export/refined", headers=self.auth("alice"))
        assert r.status_code == 200
        body = r.json()
        assert body["ledger"]["n_exported"] == len(store.dataset.annotations)

    def test_domain_errors_are_409(self):
        client, _ = self.client()
        r = client.post("/batches", json={"annotation_ids": ["ghost"]},
                        headers=self.auth("alice"))
        assert r.status_code == 409
        assert "unknown annotation_id" in r.json()["detail"]

    def test_structurally_invalid_request_is_422(self):
        client, _ = self.client()
        r = client.post("/assign", json={"phase": "sideways"}, headers=self.auth("alice"))
        assert r.status_code == 422
