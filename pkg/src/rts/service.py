"""HTTP service exposing datasets and workflow sessions to the web client.

The layer is deliberately thin: every numeric result in a response is
produced by the core modules, every mutating endpoint maps to exactly
one workflow transition, and nothing lives in process memory between
requests except an immutable dataset cache - restarting the service
between any two requests changes no outcome.

Request bodies are parsed by hand so that malformed JSON, wrong shapes
and oversized payloads all surface as the documented error contract:
{code, message} with 400 (PayloadInvalid and friends), 404 (NotFound),
409 (IllegalTransition, ConcurrentWrite) or 413 (PayloadTooLarge).
Writers take a per-session lock file, so a second concurrent mutation
of the same session gets 409 instead of interleaving.

Session ids are sequential per store (s-0001, ...) and dataset ids are
content hashes, so a scripted interaction replayed against a fresh
store reproduces identical documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .datamodel import Dataset, load_dataset, validate_dataset
from .errors import NotFound, PayloadInvalid, PayloadTooLarge, RtsError
from .features import build_catalog
from .ranker import TrainConfig
from .rng import fnv1a64
from .session import (
    EventKind,
    Session,
    SessionState,
    SessionStore,
    WorkflowEvent,
    export_document,
    new_session,
    transition,
)
from .verification import TAU_ADEQUATE, TAU_MARGINAL, draw_verification

DEFAULT_STORE_DIR = "rts-store"
DEFAULT_UI_DIR = "frontend/dist"

MIN_VERIFICATION_DRAW = 2

_ERROR_STATUS = {
    "NotFound": 404,
    "IllegalTransition": 409,
    "ConcurrentWrite": 409,
    "PayloadTooLarge": 413,
    "StoreCorrupt": 500,
}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    store_dir: str = DEFAULT_STORE_DIR
    tau_adequate: float = TAU_ADEQUATE
    tau_marginal: float = TAU_MARGINAL
    train: TrainConfig = field(default_factory=TrainConfig)
    max_body_bytes: int = 2_000_000
    ui_dir: str = DEFAULT_UI_DIR
    max_iterations: int = 5

    def __post_init__(self) -> None:
        if not 0 <= self.tau_adequate <= self.tau_marginal <= 1:
            raise ValueError("thresholds must satisfy 0 <= tau_adequate <= tau_marginal <= 1")
        if self.max_body_bytes < 1:
            raise ValueError("max_body_bytes must be positive")

    @staticmethod
    def from_file(path: str | Path) -> "ServiceConfig":
        doc = json.loads(Path(path).read_text())
        train_raw = doc.pop("train", {})
        return ServiceConfig(train=TrainConfig(**train_raw), **doc)


class DatasetStore:
    """Content-addressed dataset files: the id is a hash of the raw bytes."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Dataset] = {}

    def _path(self, dataset_id: str) -> Path:
        return self.directory / f"{dataset_id}.json"

    def add(self, raw: bytes) -> tuple[str, Dataset]:
        dataset = load_dataset(raw)
        dataset_id = f"d-{fnv1a64(raw)}"
        path = self._path(dataset_id)
        if not path.exists():
            path.write_bytes(raw)
        self._cache[dataset_id] = dataset
        return dataset_id, dataset

    def get(self, dataset_id: str) -> Dataset:
        if dataset_id in self._cache:
            return self._cache[dataset_id]
        path = self._path(dataset_id)
        if not path.exists():
            raise NotFound(f"no dataset '{dataset_id}'")
        dataset = load_dataset(path)
        self._cache[dataset_id] = dataset
        return dataset


def session_snapshot(s: Session) -> dict:
    """The session view returned by every session endpoint."""
    return {
        "id": s.id,
        "state": s.state.value,
        "dataset_ref": s.dataset_ref,
        "scope": s.scope.to_dict() if s.scope else None,
        "labels": s.labels.to_list(),
        "iteration": s.iteration,
        "max_iterations": s.max_iterations,
        "suite_size": len(s.suite.entries) if s.suite else None,
        "training_meta": (
            {
                "epochs_run": s.model.training_meta.epochs_run,
                "final_loss": s.model.training_meta.final_loss,
                "n_in": s.model.training_meta.n_in,
                "n_out": s.model.training_meta.n_out,
            }
            if s.model
            else None
        ),
        "reports": [r.to_dict() for r in s.reports],
        "selection": s.selection.to_dict() if s.selection else None,
        "reflection": s.reflection,
        "improvement_notes": s.improvement_notes,
        "audit_length": len(s.audit),
    }


def decision_options(s: Session) -> list[str]:
    """Decisions currently offered, abort first once iterating is exhausted."""
    report = s.latest_report()
    at_limit = s.iteration >= s.max_iterations
    adequate = report is not None and report.verdict == "adequate"
    if at_limit:
        return ["accept", "abort"] if adequate else ["abort", "accept"]
    if adequate:
        return ["accept", "iterate", "abort"]
    return ["iterate", "abort", "accept"]


class Engine:
    """Store-backed workflow driver shared by the HTTP app and tests."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        root = Path(config.store_dir)
        self.datasets = DatasetStore(root / "datasets")
        self.sessions = SessionStore(root / "sessions")

    def add_dataset(self, raw: bytes) -> dict:
        dataset_id, dataset = self.datasets.add(raw)
        report = validate_dataset(dataset)
        return {"dataset_id": dataset_id, "validation": report.to_dict()}

    def catalog(self, dataset_id: str, release: str) -> dict:
        dataset = self.datasets.get(dataset_id)
        catalog = build_catalog(dataset, release)
        return {"release": release, "groups": catalog.to_list()}

    def create_session(self, dataset_id: str, actor: str) -> Session:
        dataset = self.datasets.get(dataset_id)
        report = validate_dataset(dataset)
        if report.corrupt:
            codes = ", ".join(sorted({i.code for i in report.issues if i.severity == "error"}))
            raise PayloadInvalid(f"dataset is corrupt ({codes}); fix it before starting")
        with self.sessions.claim("create"):
            session_id = self.sessions.next_session_id()
            s = new_session(session_id, max_iterations=self.config.max_iterations)
            s = transition(
                s,
                WorkflowEvent(
                    kind=EventKind.LOAD_DATA,
                    payload={"dataset_ref": dataset_id},
                    actor=actor,
                ),
                dataset,
            )
            self.sessions.persist(s)
        return s

    def get_session(self, session_id: str) -> Session:
        return self.sessions.restore(session_id)

    def apply(self, session_id: str, kind: EventKind, payload: dict, actor: str) -> Session:
        """Apply one transition under the session's writer claim."""
        with self.sessions.claim(session_id):
            s = self.sessions.restore(session_id)
            dataset = self.datasets.get(s.dataset_ref) if s.dataset_ref else None
            s = transition(s, WorkflowEvent(kind=kind, payload=payload, actor=actor), dataset)
            self.sessions.persist(s)
        return s

    def label(self, session_id: str, entries: list, role: str, relabel: bool, actor: str) -> Session:
        if relabel:
            kind = EventKind.RELABEL
        elif role == "training":
            kind = EventKind.LABEL_TRAINING
        elif role == "verification":
            kind = EventKind.LABEL_VERIFICATION
        else:
            raise PayloadInvalid(f"role must be training/verification, got '{role}'")
        return self.apply(session_id, kind, {"entries": entries}, actor)

    def train(self, session_id: str, overrides: Mapping, actor: str) -> Session:
        try:
            cfg = replace(self.config.train, **dict(overrides))
        except (TypeError, ValueError) as exc:
            raise PayloadInvalid(f"bad train config: {exc}") from exc
        return self.apply(session_id, EventKind.TRAIN, {"config": cfg.to_dict()}, actor)

    def draw(self, session_id: str, k: int, seed: int) -> dict:
        s = self.sessions.restore(session_id)
        if s.state not in (SessionState.TRAINED, SessionState.VERIFICATION_LABELED):
            raise PayloadInvalid(
                f"verification draws need a trained, unassessed session (state {s.state.value})"
            )
        if k < MIN_VERIFICATION_DRAW:
            raise PayloadInvalid(f"k must be at least {MIN_VERIFICATION_DRAW}")
        labeled = frozenset(s.labels.ids())
        draw = draw_verification(s.suite, k, seed, exclude_ids=labeled)
        dataset = self.datasets.get(s.dataset_ref)
        by_id = dataset.test_by_id()
        ranks = s.suite.by_id()
        return {
            **draw.to_dict(),
            "tests": [
                {
                    "test_id": tid,
                    "rank": ranks[tid].rank,
                    "title": by_id[tid].title,
                    "snippet": by_id[tid].description[:160],
                }
                for tid in draw.test_ids
            ],
        }

    def adequacy(self, session_id: str, actor: str) -> tuple[Session, dict]:
        """Assess on first read after verification labeling; afterwards
        return the latest stored report."""
        s = self.sessions.restore(session_id)
        if s.state is SessionState.VERIFICATION_LABELED:
            s = self.apply(
                session_id,
                EventKind.ASSESS,
                {
                    "tau_adequate": self.config.tau_adequate,
                    "tau_marginal": self.config.tau_marginal,
                },
                actor,
            )
        report = s.latest_report()
        if report is None:
            raise PayloadInvalid(
                f"no adequacy report yet (state {s.state.value}); label verification tests first"
            )
        return s, {
            "report": report.to_dict(),
            "iteration": s.iteration,
            "max_iterations": s.max_iterations,
            "decision_options": decision_options(s),
        }

    def export(self, session_id: str) -> dict:
        return export_document(self.sessions.restore(session_id))


def _want_int(doc: Mapping, key: str) -> int:
    value = doc.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise PayloadInvalid(f"'{key}' must be an integer")
    return value


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    engine = Engine(config)
    app = FastAPI(title="regression test selection service", docs_url=None, redoc_url=None)

    @app.exception_handler(RtsError)
    async def _rts_error(_request: Request, exc: RtsError) -> JSONResponse:
        status = _ERROR_STATUS.get(exc.code, 400)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"code": "PayloadInvalid", "message": str(exc)}
        )

    @app.middleware("http")
    async def _limit_body(request: Request, call_next):
        # header check only; streamed bodies are re-checked after reading,
        # since consuming the stream here would starve the handlers
        declared = request.headers.get("content-length")
        if declared and declared.isdigit() and int(declared) > config.max_body_bytes:
            return JSONResponse(
                status_code=413,
                content={
                    "code": "PayloadTooLarge",
                    "message": f"request body exceeds {config.max_body_bytes} bytes",
                },
            )
        return await call_next(request)

    async def _read_body(request: Request) -> bytes:
        raw = await request.body()
        if len(raw) > config.max_body_bytes:
            raise PayloadTooLarge(f"request body exceeds {config.max_body_bytes} bytes")
        return raw

    async def _json_body(request: Request) -> dict:
        raw = await _read_body(request)
        if not raw:
            return {}
        try:
            doc = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise PayloadInvalid("request body must be valid JSON")
        if not isinstance(doc, dict):
            raise PayloadInvalid("request body must be a JSON object")
        return doc

    def _actor(request: Request) -> str:
        return request.headers.get("x-actor", "operator")

    @app.post("/datasets", status_code=201)
    async def post_dataset(request: Request):
        raw = await _read_body(request)
        if not raw:
            raise PayloadInvalid("request body must contain the dataset JSON")
        return engine.add_dataset(raw)

    @app.get("/datasets/{dataset_id}/catalog")
    async def get_catalog(dataset_id: str, release: str | None = None):
        if not release:
            raise PayloadInvalid("query parameter 'release' is required")
        return engine.catalog(dataset_id, release)

    @app.post("/sessions", status_code=201)
    async def post_session(request: Request):
        doc = await _json_body(request)
        dataset_id = doc.get("dataset_id")
        if not isinstance(dataset_id, str) or not dataset_id:
            raise PayloadInvalid("'dataset_id' is required")
        return session_snapshot(engine.create_session(dataset_id, _actor(request)))

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return session_snapshot(engine.get_session(session_id))

    @app.post("/sessions/{session_id}/scope")
    async def post_scope(session_id: str, request: Request):
        doc = await _json_body(request)
        return session_snapshot(
            engine.apply(session_id, EventKind.SCOPE_FEATURES, doc, _actor(request))
        )

    @app.post("/sessions/{session_id}/labels")
    async def post_labels(session_id: str, request: Request):
        doc = await _json_body(request)
        entries = doc.get("entries")
        if not isinstance(entries, list):
            raise PayloadInvalid("expected an 'entries' array")
        roles = {e.get("role") for e in entries if isinstance(e, Mapping)}
        relabel = bool(doc.get("relabel", False))
        if relabel:
            role = "any"
        elif len(roles) != 1:
            raise PayloadInvalid("one label batch must carry exactly one role")
        else:
            role = roles.pop()
        return session_snapshot(
            engine.label(session_id, entries, role, relabel, _actor(request))
        )

    @app.post("/sessions/{session_id}/train")
    async def post_train(session_id: str, request: Request):
        doc = await _json_body(request)
        overrides = doc.get("config", {})
        if not isinstance(overrides, Mapping):
            raise PayloadInvalid("'config' must be an object")
        return session_snapshot(engine.train(session_id, overrides, _actor(request)))

    @app.get("/sessions/{session_id}/ranking")
    async def get_ranking(session_id: str):
        s = engine.get_session(session_id)
        if s.suite is None:
            raise PayloadInvalid(f"no ranking yet (state {s.state.value}); train first")
        ranks = s.suite.by_id()
        overlay = [
            {"test_id": e.test_id, "rank": ranks[e.test_id].rank, "label": e.label}
            for e in s.labels.verification()
            if e.test_id in ranks
        ]
        return {"entries": s.suite.to_list(), "overlay": overlay}

    @app.post("/sessions/{session_id}/verification/draw")
    async def post_draw(session_id: str, request: Request):
        doc = await _json_body(request)
        return engine.draw(session_id, _want_int(doc, "k"), _want_int(doc, "seed"))

    @app.get("/sessions/{session_id}/adequacy")
    async def get_adequacy(session_id: str, request: Request):
        _s, payload = engine.adequacy(session_id, _actor(request))
        return payload

    @app.post("/sessions/{session_id}/decision")
    async def post_decision(session_id: str, request: Request):
        doc = await _json_body(request)
        return session_snapshot(
            engine.apply(session_id, EventKind.DECIDE, doc, _actor(request))
        )

    @app.post("/sessions/{session_id}/posttest")
    async def post_posttest(session_id: str, request: Request):
        doc = await _json_body(request)
        return session_snapshot(
            engine.apply(session_id, EventKind.RECORD_POSTTEST, doc, _actor(request))
        )

    @app.get("/sessions/{session_id}/export")
    async def get_export(session_id: str):
        return engine.export(session_id)

    ui_dir = Path(config.ui_dir)
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
