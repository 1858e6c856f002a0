"""Active-learning annotation backend.

Serves sentences one at a time, attaches model suggestions in assisted mode,
accepts consensus label submissions, and retrains on the full labeled pool
every `retrain_batch` committed sentences, starting cold (no suggestions
until the first retrain).  Blind sessions never expose suggestions at any
point, which keeps test-set labeling unbiased.
"""

from __future__ import annotations

import io
import secrets
import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, Sentence, load_dataset, relabel, sentence_to_json
from .featurize import HashedContextEncoder
from .models import RnnConfig, build_rnn

RETRAIN_BATCH = 50


class SessionError(Exception):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


class StubSuggester:
    """Instant retrain stand-in: suggests each word's trigger rate in the pool."""

    def __init__(self, seed: int = 1):
        self.rates: dict[str, float] = {}

    def fit(self, pool: list[Sentence]):
        counts: dict[str, list[int]] = {}
        for s in pool:
            for t in s.tokens:
                counts.setdefault(t.text, []).append(t.label)
        self.rates = {w: float(np.mean(ys)) for w, ys in counts.items()}

    def predict(self, sentence: Sentence) -> list[float]:
        return [self.rates.get(t.text, 0.0) for t in sentence.tokens]


class RnnSuggester:
    """Retrains the contextual-feature sequence model on the labeled pool."""

    def __init__(self, seed: int = 1, max_epochs: int = 60, patience: int = 20):
        self.seed = seed
        self.max_epochs = max_epochs
        self.patience = patience
        self.model = None

    def fit(self, pool: list[Sentence]):
        import torch

        torch.manual_seed(self.seed)
        config = RnnConfig(hidden_units=(15,), feature_set="{B,S}")
        dataset = Dataset(sentences=tuple(pool))
        model = build_rnn(config, dataset, encoder=HashedContextEncoder())
        model.fit(pool, patience=self.patience, max_epochs=self.max_epochs,
                  seed=self.seed)
        self.model = model

    def predict(self, sentence: Sentence) -> list[float]:
        (probs,) = self.model.predict_proba([sentence])
        return [float(p) for p in probs]

    def save(self, directory):
        self.model.save(directory)


@dataclass
class _PendingReview:
    # latest labels per reviewer for the sentence currently under review
    labels_by_reviewer: dict[str, tuple[int, ...]] = field(default_factory=dict)


class AnnotationSession:
    """Single-writer annotation state machine.

    Submissions are serialized by an internal lock; suggestion reads hit an
    immutable snapshot; retrain runs in the background and publishes its
    model with an atomic swap.
    """

    def __init__(
        self,
        session_id: str,
        dataset: Dataset,
        mode: str = "assisted",
        reviewers_required: int = 1,
        retrain_batch: int = RETRAIN_BATCH,
        suggester_factory=None,
        shuffle_seed: int | None = None,
        async_retrain: bool = True,
    ):
        if mode not in ("assisted", "blind"):
            raise SessionError("bad_mode", f"unknown mode {mode!r}")
        if reviewers_required < 1:
            raise SessionError("bad_reviewers", "reviewers_required must be >= 1")
        self.id = session_id
        self.mode = mode
        self.reviewers_required = reviewers_required
        self.retrain_batch = retrain_batch
        self.suggester_factory = suggester_factory or StubSuggester
        self.async_retrain = async_retrain

        order = list(dataset.sentences)
        if shuffle_seed is not None:
            rng = np.random.default_rng(shuffle_seed)
            order = [order[i] for i in rng.permutation(len(order))]
        self.queue: deque[Sentence] = deque(order)
        self.flagged: set[str] = set()
        self.labeled: list[Sentence] = []
        self.since_last_retrain = 0
        self.retrain_count = 0
        self.retrain_running = False
        self.snapshot = None  # cold start: no model, no suggestions
        self._tokens: dict[str, str] = {}  # task token -> sentence id
        self._pending: dict[str, _PendingReview] = {}
        self._lock = threading.RLock()
        self._retrain_thread: threading.Thread | None = None

    # -- task serving -----------------------------------------------------

    def next_task(self) -> dict:
        """Next sentence to label, with a fresh single-use task token.

        The queue head stays in place until its review resolves so that
        multiple reviewers can fetch the same sentence.
        """
        with self._lock:
            if not self.queue:
                return {"complete": True}
            sentence = self.queue[0]
            token = secrets.token_urlsafe(16)
            self._tokens[token] = sentence.id
            task = {
                "task_token": token,
                "sentence_id": sentence.id,
                "tokens": list(sentence.texts),
                "flagged": sentence.id in self.flagged,
            }
            snapshot = self.snapshot
            if self.mode == "assisted" and snapshot is not None:
                task["suggestions"] = snapshot.predict(sentence)
            return task

    # -- submission -------------------------------------------------------

    def submit(self, task_token: str, labels, reviewer: str = "r1") -> dict:
        with self._lock:
            sid = self._tokens.pop(task_token, None)
            if sid is None:
                raise SessionError("bad_token", "unknown or already-used task token")
            if not self.queue or self.queue[0].id != sid:
                raise SessionError("stale_token", "task is no longer active")
            sentence = self.queue[0]
            labels = tuple(int(x) for x in labels)
            if len(labels) != len(sentence):
                raise SessionError(
                    "bad_labels",
                    f"expected {len(sentence)} labels, got {len(labels)}",
                )
            if any(x not in (0, 1) for x in labels):
                raise SessionError("bad_labels", "labels must be 0 or 1")

            pending = self._pending.setdefault(sid, _PendingReview())
            pending.labels_by_reviewer[reviewer] = labels
            if len(pending.labels_by_reviewer) < self.reviewers_required:
                return {"status": "awaiting_consensus"}

            votes = set(pending.labels_by_reviewer.values())
            del self._pending[sid]
            self._invalidate_tokens(sid)
            self.queue.popleft()
            if len(votes) > 1:
                # no consensus: back of the queue, flagged for re-review
                self.flagged.add(sid)
                self.queue.append(sentence)
                return {"status": "awaiting_consensus", "requeued": True}

            self.labeled.append(relabel(sentence, labels))
            self.flagged.discard(sid)
            self.since_last_retrain += 1
            if self.since_last_retrain >= self.retrain_batch:
                self.since_last_retrain = 0
                self._start_retrain()
                return {"status": "retrain_started"}
            return {"status": "committed"}

    def _invalidate_tokens(self, sentence_id: str):
        stale = [t for t, sid in self._tokens.items() if sid == sentence_id]
        for t in stale:
            del self._tokens[t]

    # -- retraining -------------------------------------------------------

    def _start_retrain(self):
        pool = list(self.labeled)
        if self.async_retrain:
            self.retrain_running = True
            thread = threading.Thread(target=self._retrain_job, args=(pool,),
                                      daemon=True)
            self._retrain_thread = thread
            thread.start()
        else:
            self._retrain_job(pool)

    def _retrain_job(self, pool: list[Sentence]):
        try:
            suggester = self.suggester_factory()
            suggester.fit(pool)
        except Exception:
            # training failure keeps the old snapshot serving
            with self._lock:
                self.retrain_running = False
            return
        with self._lock:
            self.snapshot = suggester  # atomic swap
            self.retrain_count += 1
            self.retrain_running = False

    def retrain(self):
        """Synchronous retrain on the full labeled pool (explicit trigger)."""
        if not self.labeled:
            raise SessionError("empty_pool", "no labeled sentences yet")
        self._retrain_job(list(self.labeled))
        return self.snapshot

    def wait_for_retrain(self, timeout: float = 60.0):
        thread = self._retrain_thread
        if thread is not None:
            thread.join(timeout)

    # -- status / export --------------------------------------------------

    def status(self) -> dict:
        with self._lock:
            return {
                "session_id": self.id,
                "mode": self.mode,
                "labeled_count": len(self.labeled),
                "queue_size": len(self.queue),
                "since_last_retrain": self.since_last_retrain,
                "retrain_batch": self.retrain_batch,
                "retrain_count": self.retrain_count,
                "retrain_running": self.retrain_running,
                "reviewers_required": self.reviewers_required,
            }

    def export(self) -> str:
        """Committed sentences as JSONL in the corpus file format."""
        with self._lock:
            if not self.labeled:
                raise SessionError("empty_pool", "no committed sentences", 409)
            out = io.StringIO()
            for s in self.labeled:
                out.write(sentence_to_json(s) + "\n")
            return out.getvalue()


_SUGGESTERS = {"stub": StubSuggester, "rnn": RnnSuggester}


def create_app(sessions: dict[str, AnnotationSession] | None = None):
    """FastAPI wire layer over the session state machine."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse

    app = FastAPI(title="oed annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.sessions = sessions if sessions is not None else {}

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.code, "message": exc.message},
        )

    def _get(session_id: str) -> AnnotationSession:
        session = app.state.sessions.get(session_id)
        if session is None:
            raise SessionError("not_found", f"no session {session_id!r}", 404)
        return session

    @app.post("/sessions")
    async def create_session(body: dict):
        path = body.get("dataset")
        if not path:
            raise SessionError("bad_request", "missing 'dataset' path")
        try:
            dataset = load_dataset(path)
        except (OSError, ValueError) as e:
            raise SessionError("bad_dataset", str(e))
        model = body.get("model", "stub")
        if model not in _SUGGESTERS:
            raise SessionError("bad_model", f"unknown model {model!r}")
        session_id = body.get("id") or secrets.token_hex(8)
        session = AnnotationSession(
            session_id,
            dataset,
            mode=body.get("mode", "assisted"),
            reviewers_required=int(body.get("reviewers_required", 1)),
            retrain_batch=int(body.get("retrain_batch", RETRAIN_BATCH)),
            suggester_factory=_SUGGESTERS[model],
            shuffle_seed=body.get("shuffle_seed"),
        )
        app.state.sessions[session_id] = session
        return {"session_id": session_id, **session.status()}

    @app.get("/sessions/{session_id}/next")
    async def next_task(session_id: str):
        return _get(session_id).next_task()

    @app.post("/sessions/{session_id}/submit")
    async def submit(session_id: str, body: dict):
        token = body.get("task_token")
        labels = body.get("labels")
        if token is None or labels is None:
            raise SessionError("bad_request", "need 'task_token' and 'labels'")
        return _get(session_id).submit(
            token, labels, reviewer=body.get("reviewer", "r1")
        )

    @app.get("/sessions/{session_id}/status")
    async def status(session_id: str):
        return _get(session_id).status()

    @app.get("/sessions/{session_id}/export")
    async def export(session_id: str):
        return PlainTextResponse(_get(session_id).export(),
                                 media_type="application/x-ndjson")

    return app


def serve(host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)
