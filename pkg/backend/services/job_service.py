"""In-memory tracking of background experiment jobs."""
import logging
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, Optional

from fastapi import HTTPException

from backend.models import JobState, JobStatusResponse, RunRecord

logger = logging.getLogger(__name__)


@dataclass
class Job:
    job_id: str
    kind: str
    status: JobState = JobState.PENDING
    progress: str = ""
    error: Optional[str] = None
    record: Optional[RunRecord] = None
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


class JobService:
    """Registers jobs, runs them and keeps their status and results."""

    def __init__(self):
        self._jobs: Dict[str, Job] = {}
        self._lock = threading.Lock()

    def create(self, kind: str) -> Job:
        job = Job(job_id=str(uuid.uuid4()), kind=kind)
        with self._lock:
            self._jobs[job.job_id] = job
        return job

    def _get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(
                status_code=404,
                detail=f"Job with ID {job_id} not found"
            )
        return job

    def update_progress(self, job_id: str, message: str):
        job = self._get(job_id)
        with self._lock:
            job.progress = message

    def run(self, job_id: str, task: Callable[[Callable[[str], None]], RunRecord]):
        """
        Execute a job; ``task`` receives a progress callback and returns the RunRecord.

        Args:
            job_id: Unique job identifier
            task: Experiment to run
        """
        job = self._get(job_id)
        with self._lock:
            job.status = JobState.RUNNING
        try:
            record = task(lambda message: self.update_progress(job_id, message))
        except Exception as e:
            logger.exception("Job %s failed", job_id)
            with self._lock:
                job.status = JobState.FAILED
                job.error = str(e)
            return
        with self._lock:
            job.record = record
            job.status = JobState.COMPLETED
            job.progress = "Finished"

    def get_status(self, job_id: str) -> JobStatusResponse:
        job = self._get(job_id)
        return JobStatusResponse(
            job_id=job.job_id,
            kind=job.kind,
            status=job.status,
            progress=job.progress,
            error=job.error,
            created_at=job.created_at,
        )

    def get_record(self, job_id: str) -> RunRecord:
        job = self._get(job_id)
        if job.status != JobState.COMPLETED or job.record is None:
            raise HTTPException(
                status_code=404,
                detail=f"Job {job_id} has no result yet (status: {job.status.value})"
            )
        return job.record


# Global service instance
job_service = JobService()
