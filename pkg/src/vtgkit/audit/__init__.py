from .store import AuditError, AuditStore, AuditTask, Batch, Correction
from .service import create_app

__all__ = ["AuditError", "AuditStore", "AuditTask", "Batch", "Correction", "create_app"]
