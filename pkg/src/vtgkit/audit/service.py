"""HTTP+JSON API over the audit store.

Workers authenticate with static bearer tokens; every mutating call is
serialized through the store's single writer. Response bodies carry
``schema_version`` so clients can contract-test against recordings.
"""
from __future__ import annotations

from typing import Literal

from fastapi import Depends, FastAPI, HTTPException, Request
from pydantic import BaseModel, Field

from .store import AuditError, AuditStore, Correction

SCHEMA_VERSION = 1


class CorrectionBody(BaseModel):
    new_query: str | None = None
    new_span: tuple[float, float] | None = None
    discarded: bool = False


class CreateBatchBody(BaseModel):
    annotation_ids: list[str] = Field(min_length=1)
    qc_threshold: float = Field(default=0.1, ge=0.0, le=1.0)


class AssignBody(BaseModel):
    phase: Literal["review", "validate"]


class ReviewBody(BaseModel):
    diagnosis: list[str] | Literal["no_error"]
    correction: CorrectionBody | None = None


class ValidateBody(BaseModel):
    verdict: Literal["correct", "incorrect"]
    reason: str | None = None


def create_app(store: AuditStore, worker_tokens: dict[str, str]) -> FastAPI:
    """worker_tokens maps bearer token -> worker_id."""
    app = FastAPI(title="vtgkit audit service")
    for worker_id in worker_tokens.values():
        store.register_worker(worker_id)

    def current_worker(request: Request) -> str:
        auth = request.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            raise HTTPException(status_code=401, detail="bearer token required")
        token = auth.split(None, 1)[1]
        worker_id = worker_tokens.get(token)
        if worker_id is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return worker_id

    def versioned(payload: dict) -> dict:
        return {"schema_version": SCHEMA_VERSION, **payload}

    @app.exception_handler(AuditError)
    async def audit_error_handler(_request, exc: AuditError):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/healthz")
    async def healthz():
        return versioned({"status": "ok", "dataset": store.dataset.name})

    @app.post("/batches")
    async def create_batch(body: CreateBatchBody, worker: str = Depends(current_worker)):
        batch = store.create_batch(body.annotation_ids, body.qc_threshold)
        return versioned({"batch": batch.to_dict()})

    @app.post("/assign")
    async def assign(body: AssignBody, worker: str = Depends(current_worker)):
        task = store.assign_next(worker, body.phase)
        return versioned({"task": task.to_dict() if task else None})

    @app.post("/tasks/{task_id}/review")
    async def review(task_id: str, body: ReviewBody, worker: str = Depends(current_worker)):
        correction = None
        if body.correction is not None:
            correction = Correction(
                new_query=body.correction.new_query,
                new_span=body.correction.new_span,
                discarded=body.correction.discarded,
            )
        task = store.submit_review(task_id, worker, body.diagnosis, correction)
        return versioned({"task": task.to_dict()})

    @app.post("/tasks/{task_id}/validate")
    async def validate(task_id: str, body: ValidateBody, worker: str = Depends(current_worker)):
        task = store.submit_validation(task_id, worker, body.verdict, body.reason)
        return versioned({"task": task.to_dict()})

    @app.post("/batches/{batch_id}/qc")
    async def qc(batch_id: str, worker: str = Depends(current_worker)):
        status, rate = store.batch_qc(batch_id)
        return versioned({"batch_id": batch_id, "status": status, "error_rate": rate})

    @app.get("/export/{dataset_name}")
    async def export(dataset_name: str, worker: str = Depends(current_worker)):
        records, ledger = store.export_refined(dataset_name)
        return versioned({"records": records, "ledger": ledger})

    @app.get("/tasks/{task_id}")
    async def get_task(task_id: str, worker: str = Depends(current_worker)):
        task = store.tasks.get(task_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        return versioned({"task": task.to_dict()})

    @app.get("/batches/{batch_id}")
    async def get_batch(batch_id: str, worker: str = Depends(current_worker)):
        batch = store.batches.get(batch_id)
        if batch is None:
            raise HTTPException(status_code=404, detail=f"unknown batch {batch_id!r}")
        return versioned({"batch": batch.to_dict()})

    return app
