"""REST backend for the human error-annotation workflow.

Predictions are sampled into annotation tasks; annotators flag fluency and
adequacy issues and may override the automatic circularity detection.
Labels land in an append-only JSON-lines store (crash-safe, diffable) and
are idempotent per (task_id, annotator) with last-write-wins.  Shares are
computed over labeled tasks only, mirroring how hand-annotated samples are
usually tallied.
"""

from __future__ import annotations

import json
import logging
import random
import socket
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse

from .aggregation import Triplet
from .errors import EmptyPredictions, PortInUse
from .harness import GoldItem
from .metrics import detect_circularity
from .util import format_share

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    word: str
    sense_id: str
    predicted_definition: str
    gold_definition: str | None
    usage: str | None
    model_tag: str


@dataclass(frozen=True)
class AnnotationLabel:
    task_id: str
    fluency_issue: bool
    adequacy_issue: bool
    circular_override: bool | None
    annotator: str
    timestamp: str


@dataclass(frozen=True)
class ModelShares:
    model_tag: str
    total_tasks: int
    labeled_tasks: int
    fluency_share: float | None
    adequacy_share: float | None
    circularity_share: float | None

    def as_dict(self) -> dict:
        def fmt(value: float | None) -> str | None:
            return None if value is None else format_share(value)

        return {
            "model_tag": self.model_tag,
            "total_tasks": self.total_tasks,
            "labeled_tasks": self.labeled_tasks,
            "fluency_share": self.fluency_share,
            "adequacy_share": self.adequacy_share,
            "circularity_share": self.circularity_share,
            "formatted": {
                "fluency": fmt(self.fluency_share),
                "adequacy": fmt(self.adequacy_share),
                "circularity": fmt(self.circularity_share),
            },
        }


def sample_tasks(
    predictions: Sequence[Triplet],
    gold: Sequence[GoldItem],
    n: int,
    seed: int,
    model_tag: str,
    usages: Mapping[tuple[str, str], str] | None = None,
) -> list[AnnotationTask]:
    """Deterministic sample of annotation tasks.

    ``n = 0`` means the entire prediction set in original order; ``n >= 1``
    draws min(n, size) items without replacement using the seed.
    """
    if not predictions:
        raise EmptyPredictions("nothing to sample")
    if n < 0:
        raise ValueError("n must be >= 0")
    gold_by_key = {(g.word, g.sense_id): g.definition for g in gold}
    usages = usages or {}

    if n == 0:
        chosen = list(predictions)
    else:
        chosen = random.Random(seed).sample(list(predictions), min(n, len(predictions)))

    tasks = []
    seen_ids: set[str] = set()
    for item in chosen:
        task_id = f"{model_tag}:{item.word}:{item.sense_id}"
        if task_id in seen_ids:
            raise ValueError(f"duplicate prediction for {item.word}/{item.sense_id}")
        seen_ids.add(task_id)
        key = (item.word, item.sense_id)
        tasks.append(
            AnnotationTask(
                task_id=task_id,
                word=item.word,
                sense_id=item.sense_id,
                predicted_definition=item.definition,
                gold_definition=gold_by_key.get(key),
                usage=usages.get(key),
                model_tag=model_tag,
            )
        )
    return tasks


class LabelStore:
    """Append-only JSON-lines label log; replaying it reconstructs the state."""

    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._effective: dict[tuple[str, str], AnnotationLabel] = {}
        if self._path is not None and self._path.exists():
            for line in self._path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line:
                    self._apply(AnnotationLabel(**json.loads(line)))

    def _apply(self, label: AnnotationLabel) -> None:
        self._effective[(label.task_id, label.annotator)] = label

    def append(self, label: AnnotationLabel) -> None:
        with self._lock:
            self._apply(label)
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(label), ensure_ascii=False) + "\n")

    def effective_labels(self) -> list[AnnotationLabel]:
        with self._lock:
            return sorted(
                self._effective.values(), key=lambda lab: (lab.task_id, lab.annotator)
            )

    def labels_by_task(self) -> dict[str, AnnotationLabel]:
        """Latest effective label per task (any annotator; append order wins)."""
        with self._lock:
            by_task: dict[str, AnnotationLabel] = {}
            for label in self._effective.values():
                by_task[label.task_id] = label
            return by_task


def compute_shares(
    labels: Sequence[AnnotationLabel],
    tasks: Sequence[AnnotationTask],
    stem_min: int = 4,
) -> dict[str, ModelShares]:
    """Per-model fluency/adequacy/circularity shares over labeled tasks.

    Circularity defaults to the automatic detector and honors human
    overrides; denominators are labeled-task counts only.  Models without a
    single label get absent shares.
    """
    latest: dict[str, AnnotationLabel] = {}
    for label in labels:
        latest[label.task_id] = label

    shares: dict[str, ModelShares] = {}
    for tag in sorted({t.model_tag for t in tasks}):
        model_tasks = [t for t in tasks if t.model_tag == tag]
        labeled = [(t, latest[t.task_id]) for t in model_tasks if t.task_id in latest]
        if not labeled:
            shares[tag] = ModelShares(tag, len(model_tasks), 0, None, None, None)
            continue
        denominator = len(labeled)
        fluency = sum(1 for _, lab in labeled if lab.fluency_issue)
        adequacy = sum(1 for _, lab in labeled if lab.adequacy_issue)
        circular = 0
        for task, lab in labeled:
            if lab.circular_override is not None:
                circular += int(lab.circular_override)
            else:
                circular += int(
                    detect_circularity(task.predicted_definition, task.word, stem_min)
                )
        shares[tag] = ModelShares(
            model_tag=tag,
            total_tasks=len(model_tasks),
            labeled_tasks=denominator,
            fluency_share=100.0 * fluency / denominator,
            adequacy_share=100.0 * adequacy / denominator,
            circularity_share=100.0 * circular / denominator,
        )
    return shares


@dataclass
class AnnotationSession:
    tasks: list[AnnotationTask]
    store: LabelStore
    stem_min: int = 4

    def task_by_id(self, task_id: str) -> AnnotationTask | None:
        return next((t for t in self.tasks if t.task_id == task_id), None)


def _task_payload(session: AnnotationSession, task: AnnotationTask) -> dict:
    labeled = task.task_id in session.store.labels_by_task()
    return {
        "task_id": task.task_id,
        "word": task.word,
        "sense_id": task.sense_id,
        "predicted_definition": task.predicted_definition,
        "gold_definition": task.gold_definition,
        "usage": task.usage,
        "model_tag": task.model_tag,
        "auto_circular": detect_circularity(
            task.predicted_definition, task.word, session.stem_min
        ),
        "status": "labeled" if labeled else "pending",
    }


def _parse_label_body(body: object) -> dict:
    """Validate a POST /labels payload; raises ValueError with a message."""
    if not isinstance(body, dict):
        raise ValueError("body must be a JSON object")
    if not isinstance(body.get("task_id"), str) or not body["task_id"]:
        raise ValueError("task_id must be a non-empty string")
    for flag in ("fluency_issue", "adequacy_issue"):
        if not isinstance(body.get(flag), bool):
            raise ValueError(f"{flag} must be a boolean")
    override = body.get("circular_override")
    if override is not None and not isinstance(override, bool):
        raise ValueError("circular_override must be a boolean or null")
    annotator = body.get("annotator", "anonymous")
    if not isinstance(annotator, str) or not annotator:
        raise ValueError("annotator must be a non-empty string")
    return {
        "task_id": body["task_id"],
        "fluency_issue": body["fluency_issue"],
        "adequacy_issue": body["adequacy_issue"],
        "circular_override": override,
        "annotator": annotator,
    }


def create_app(session: AnnotationSession) -> FastAPI:
    """Build the FastAPI app exposing the annotation endpoints."""
    app = FastAPI(title="definition annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/tasks")
    def list_tasks():
        payloads = [_task_payload(session, t) for t in session.tasks]
        pending = [p for p in payloads if p["status"] == "pending"]
        labeled = [p for p in payloads if p["status"] == "labeled"]
        return {"tasks": pending + labeled, "pending": len(pending), "labeled": len(labeled)}

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        task = session.task_by_id(task_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        return _task_payload(session, task)

    @app.post("/labels")
    async def post_label(request: Request):
        try:
            fields = _parse_label_body(await request.json())
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if session.task_by_id(fields["task_id"]) is None:
            raise HTTPException(
                status_code=404, detail=f"unknown task {fields['task_id']!r}"
            )
        record = AnnotationLabel(
            timestamp=datetime.now(timezone.utc).isoformat(), **fields
        )
        session.store.append(record)
        return {"ok": True, "effective_labels": len(session.store.effective_labels())}

    @app.get("/report")
    def report():
        shares = compute_shares(
            session.store.effective_labels(), session.tasks, session.stem_min
        )
        by_task = session.store.labels_by_task()
        return {
            "models": {tag: s.as_dict() for tag, s in shares.items()},
            "labeled": sum(1 for t in session.tasks if t.task_id in by_task),
            "total": len(session.tasks),
        }

    @app.get("/export")
    def export():
        lines = [
            json.dumps(asdict(label), ensure_ascii=False)
            for label in session.store.effective_labels()
        ]
        return PlainTextResponse(
            "".join(line + "\n" for line in lines), media_type="application/x-ndjson"
        )

    return app


def serve(session: AnnotationSession, port: int, host: str = "127.0.0.1") -> None:
    """Run the annotation service until interrupted.

    Binds the socket first (raising PortInUse on conflict, race-free) and
    prints the resolved address on stdout; ``port = 0`` picks a free port.
    """
    import uvicorn

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
    sock.listen(128)
    bound_port = sock.getsockname()[1]
    print(f"annotation service listening on http://{host}:{bound_port}", flush=True)

    app = create_app(session)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    try:
        server.run(sockets=[sock])
    finally:
        sock.close()
