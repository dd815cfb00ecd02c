"""Event-sourced state for the diagnose-then-refine audit workflow.

Single-writer embedded store: every mutation appends an event to an
append-only JSONL log and updates the in-memory materialized state under
one lock. Reopening a store replays the log. Annotation history is never
deleted; batch rejection archives prior submissions and reopens tasks.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from ..dataset import Dataset, ErrorKind, record_to_json_obj
from ..spans import TimeSpan

TASK_STATES = ("pending", "in_review", "reviewed", "in_validation", "validated", "rejected")
BATCH_STATES = ("open", "validating", "accepted", "rejected")
PHASES = ("review", "validate")

NO_ERROR = "no_error"


class AuditError(ValueError):
    pass


@dataclass
class Correction:
    new_query: str | None = None
    new_span: tuple[float, float] | None = None
    discarded: bool = False

    def to_dict(self) -> dict:
        return {"new_query": self.new_query,
                "new_span": list(self.new_span) if self.new_span else None,
                "discarded": self.discarded}

    @classmethod
    def from_dict(cls, obj: dict | None) -> "Correction | None":
        if obj is None:
            return None
        span = obj.get("new_span")
        return cls(new_query=obj.get("new_query"),
                   new_span=(float(span[0]), float(span[1])) if span else None,
                   discarded=bool(obj.get("discarded", False)))


@dataclass
class AuditTask:
    task_id: str
    annotation_id: str
    batch_id: str
    state: str = "pending"
    reviewer_id: str | None = None
    validator_id: str | None = None
    diagnosis: list[str] | None = None  # ErrorKind values, or [NO_ERROR]
    correction: Correction | None = None
    verdict: str | None = None  # correct | incorrect
    verdict_reason: str | None = None
    video_group: list[str] = field(default_factory=list)  # same-video annotation ids, display hint
    archive: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "annotation_id": self.annotation_id,
            "batch_id": self.batch_id,
            "state": self.state,
            "reviewer_id": self.reviewer_id,
            "validator_id": self.validator_id,
            "diagnosis": self.diagnosis,
            "correction": self.correction.to_dict() if self.correction else None,
            "verdict": self.verdict,
            "verdict_reason": self.verdict_reason,
            "video_group": self.video_group,
        }


@dataclass
class Batch:
    batch_id: str
    task_ids: list[str]
    qc_threshold: float
    status: str = "open"

    def to_dict(self) -> dict:
        return {"batch_id": self.batch_id, "task_ids": self.task_ids,
                "qc_threshold": self.qc_threshold, "status": self.status}


class AuditStore:
    """Materialized audit state over an append-only event log."""

    def __init__(self, dataset: Dataset, root: str | Path | None = None):
        self.dataset = dataset
        self._lock = threading.Lock()
        self.tasks: dict[str, AuditTask] = {}
        self.batches: dict[str, Batch] = {}
        self.workers: set[str] = set()
        self._enrolled: set[str] = set()  # annotation ids in an open/validating batch
        self._seq = 0
        self._log_path: Path | None = None
        if root is not None:
            root = Path(root)
            root.mkdir(parents=True, exist_ok=True)
            self._log_path = root / "events.jsonl"
            if self._log_path.exists():
                with self._log_path.open(encoding="utf-8") as f:
                    for line in f:
                        line = line.strip()
                        if line:
                            event = json.loads(line)
                            self._apply(event)
                            self._seq = event["seq"]

    # -- event machinery ------------------------------------------------

    def _emit(self, kind: str, **payload: Any) -> None:
        self._seq += 1
        event = {"seq": self._seq, "kind": kind, **payload}
        self._apply(event)
        if self._log_path is not None:
            with self._log_path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(event) + "\n")

    def _apply(self, event: dict) -> None:
        kind = event["kind"]
        if kind == "worker_registered":
            self.workers.add(event["worker_id"])
        elif kind == "batch_created":
            batch = Batch(event["batch_id"], list(event["annotation_ids"]), event["qc_threshold"])
            task_ids = []
            for ann_id in event["annotation_ids"]:
                task_id = f"{batch.batch_id}:{ann_id}"
                video_id = self.dataset.annotation_by_id(ann_id).video_id
                group = [a.annotation_id for a in self.dataset.annotations
                         if a.video_id == video_id and a.annotation_id != ann_id]
                self.tasks[task_id] = AuditTask(task_id, ann_id, batch.batch_id, video_group=group)
                task_ids.append(task_id)
                self._enrolled.add(ann_id)
            batch.task_ids = task_ids
            self.batches[batch.batch_id] = batch
        elif kind == "task_assigned":
            task = self.tasks[event["task_id"]]
            if event["phase"] == "review":
                task.state = "in_review"
                task.reviewer_id = event["worker_id"]
            else:
                task.state = "in_validation"
                task.validator_id = event["worker_id"]
        elif kind == "review_submitted":
            task = self.tasks[event["task_id"]]
            task.state = "reviewed"
            task.diagnosis = event["diagnosis"]
            task.correction = Correction.from_dict(event["correction"])
        elif kind == "validation_submitted":
            task = self.tasks[event["task_id"]]
            task.state = "validated"
            task.verdict = event["verdict"]
            task.verdict_reason = event.get("reason")
            batch = self.batches[task.batch_id]
            if all(self.tasks[t].state == "validated" for t in batch.task_ids):
                batch.status = "validating"
        elif kind == "batch_qc_done":
            batch = self.batches[event["batch_id"]]
            batch.status = event["status"]
            if event["status"] == "rejected":
                for task_id in batch.task_ids:
                    task = self.tasks[task_id]
                    task.archive.append(task.to_dict())
                    task.state = "pending"
                    task.reviewer_id = None
                    task.validator_id = None
                    task.diagnosis = None
                    task.correction = None
                    task.verdict = None
                    task.verdict_reason = None
                batch.status = "open"  # rejected batches reopen for re-annotation
            elif event["status"] == "accepted":
                for ann_id in (self.tasks[t].annotation_id for t in batch.task_ids):
                    self._enrolled.discard(ann_id)
        else:  # pragma: no cover
            raise AuditError(f"unknown event kind {kind!r}")

    # -- operations -----------------------------------------------------

    def register_worker(self, worker_id: str) -> None:
        with self._lock:
            if worker_id not in self.workers:
                self._emit("worker_registered", worker_id=worker_id)

    def _require_worker(self, worker_id: str) -> None:
        if worker_id not in self.workers:
            raise AuditError(f"unknown worker {worker_id!r}")

    def create_batch(self, annotation_ids: list[str], qc_threshold: float = 0.1) -> Batch:
        with self._lock:
            if not annotation_ids:
                raise AuditError("a batch needs at least one annotation")
            if not 0.0 <= qc_threshold <= 1.0:
                raise AuditError("qc_threshold must be in [0, 1]")
            if len(set(annotation_ids)) != len(annotation_ids):
                raise AuditError("duplicate annotation_ids in batch")
            for ann_id in annotation_ids:
                try:
                    self.dataset.annotation_by_id(ann_id)
                except KeyError:
                    raise AuditError(f"unknown annotation_id {ann_id!r}") from None
                if ann_id in self._enrolled:
                    raise AuditError(f"annotation {ann_id!r} is already enrolled in an open batch")
            batch_id = f"batch-{len(self.batches) + 1:04d}"
            self._emit("batch_created", batch_id=batch_id,
                       annotation_ids=list(annotation_ids), qc_threshold=qc_threshold)
            return self.batches[batch_id]

    def assign_next(self, worker_id: str, phase: str) -> AuditTask | None:
        """Exclusive assignment; in the validate phase a worker never
        receives a task they reviewed themselves."""
        with self._lock:
            self._require_worker(worker_id)
            if phase not in PHASES:
                raise AuditError(f"phase must be one of {PHASES}")
            for task_id in sorted(self.tasks):
                task = self.tasks[task_id]
                if phase == "review" and task.state == "pending":
                    self._emit("task_assigned", task_id=task_id, worker_id=worker_id, phase="review")
                    return self.tasks[task_id]
                if phase == "validate" and task.state == "reviewed" and task.reviewer_id != worker_id:
                    self._emit("task_assigned", task_id=task_id, worker_id=worker_id, phase="validate")
                    return self.tasks[task_id]
            return None

    def submit_review(
        self,
        task_id: str,
        worker_id: str,
        diagnosis: list[str] | str,
        correction: Correction | None = None,
    ) -> AuditTask:
        with self._lock:
            self._require_worker(worker_id)
            task = self.tasks.get(task_id)
            if task is None:
                raise AuditError(f"unknown task {task_id!r}")
            if task.state != "in_review" or task.reviewer_id != worker_id:
                raise AuditError(f"task {task_id} is not under review by {worker_id}")

            if diagnosis == NO_ERROR or diagnosis == [NO_ERROR]:
                kinds: list[str] = [NO_ERROR]
            else:
                if isinstance(diagnosis, str):
                    diagnosis = [diagnosis]
                kinds = sorted({ErrorKind(k).value for k in diagnosis})
                if not kinds:
                    raise AuditError("diagnosis must name error kinds or be no_error")

            if kinds != [NO_ERROR]:
                if correction is None:
                    raise AuditError("a correction is required when errors are diagnosed")
                if not (correction.discarded or correction.new_query or correction.new_span):
                    raise AuditError("correction must rewrite the query, refine the span, or discard")
            if correction is not None and correction.new_span is not None:
                ann = self.dataset.annotation_by_id(task.annotation_id)
                duration = self.dataset.videos[ann.video_id].duration
                start, end = correction.new_span
                if not (0 <= start < end <= duration):
                    raise AuditError(f"corrected span ({start}, {end}) outside video duration {duration}")

            self._emit("review_submitted", task_id=task_id, diagnosis=kinds,
                       correction=correction.to_dict() if correction else None)
            return self.tasks[task_id]

    def submit_validation(self, task_id: str, worker_id: str, verdict: str, reason: str | None = None) -> AuditTask:
        with self._lock:
            self._require_worker(worker_id)
            task = self.tasks.get(task_id)
            if task is None:
                raise AuditError(f"unknown task {task_id!r}")
            if task.state != "in_validation" or task.validator_id != worker_id:
                raise AuditError(f"task {task_id} is not under validation by {worker_id}")
            if verdict not in ("correct", "incorrect"):
                raise AuditError("verdict must be 'correct' or 'incorrect'")
            if verdict == "incorrect" and not reason:
                raise AuditError("an incorrect verdict needs a reason")
            self._emit("validation_submitted", task_id=task_id, verdict=verdict, reason=reason)
            return self.tasks[task_id]

    def batch_qc(self, batch_id: str) -> tuple[str, float]:
        """Accept or reject a fully validated batch by its error rate.

        The rate counts validator-flagged-incorrect tasks; strictly
        exceeding the threshold rejects the batch and reopens every task.
        """
        with self._lock:
            batch = self.batches.get(batch_id)
            if batch is None:
                raise AuditError(f"unknown batch {batch_id!r}")
            if batch.status not in ("open", "validating"):
                raise AuditError(f"batch {batch_id} already finalized ({batch.status})")
            tasks = [self.tasks[t] for t in batch.task_ids]
            if any(t.state != "validated" for t in tasks):
                raise AuditError("batch QC requires every task to be validated")
            flagged = sum(1 for t in tasks if t.verdict == "incorrect")
            rate = flagged / len(tasks)
            status = "rejected" if rate > batch.qc_threshold else "accepted"
            self._emit("batch_qc_done", batch_id=batch_id, status=status, error_rate=rate)
            return status, rate

    def export_refined(self, dataset_name: str) -> tuple[list[dict], dict]:
        """Apply accepted corrections and emit (records, provenance ledger).

        Pure function of the audit state: corrections applied, discarded
        records omitted, audited records marked human_refined.
        """
        with self._lock:
            not_accepted = [b.batch_id for b in self.batches.values() if b.status != "accepted"]
            if not_accepted:
                raise AuditError(f"batches not yet accepted: {sorted(not_accepted)}")

            latest: dict[str, AuditTask] = {}
            for task_id in sorted(self.tasks):
                task = self.tasks[task_id]
                latest[task.annotation_id] = task

            rewritten = 0
            refined = 0
            discarded = 0
            records = []
            for ann in self.dataset.annotations:
                task = latest.get(ann.annotation_id)
                query, span, provenance = ann.query, ann.span, ann.provenance
                if task is not None:
                    provenance = "human_refined"
                    corr = task.correction
                    if corr is not None:
                        if corr.discarded:
                            discarded += 1
                            continue
                        if corr.new_query:
                            query = corr.new_query
                            rewritten += 1
                        elif corr.new_span:
                            refined += 1
                        if corr.new_span:
                            span = TimeSpan(*corr.new_span)
                record = replace(ann, query=query, span=span, provenance=provenance)
                records.append(record_to_json_obj(record, self.dataset.videos[ann.video_id]))
            ledger = {
                "dataset": dataset_name,
                "n_exported": len(records),
                "n_discarded": discarded,
                "rewritten_queries": rewritten,
                "refined_time_segments": refined,
            }
            return records, ledger
