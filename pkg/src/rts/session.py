"""The selection workflow as a persisted state machine with an audit trail.

One session drives one release through: load data, scope features, label
training tests, train, label drawn verification tests, assess adequacy,
then decide - accept (place the cutoff), iterate (add labels, retrain),
or abort - and finally record the post-test reflection.

Transitions are pure: `transition` returns a new Session and never
mutates its input, so an illegal event leaves the session untouched.
Every successful transition appends exactly one audit record carrying
the full event payload plus an FNV-1a digest of it. Because training is
deterministic and payloads are complete, replaying the audit trail from
a fresh session reconstructs the final state (see `replay_audit`).

Persistence is one JSON document per session in a store directory; a
digest mismatch on any audit record marks the document corrupt. Writers
claim a per-session lock file, so two concurrent mutations of the same
session cannot interleave.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from .datamodel import Dataset
from .errors import (
    ConcurrentWrite,
    IllegalTransition,
    NotFound,
    PayloadInvalid,
    StoreCorrupt,
    UnknownTestId,
)
from .features import FeatureScope, build_catalog, extract_features, validate_scope
from .ranker import (
    LABEL_IN,
    LABEL_OUT,
    ROLE_TRAINING,
    ROLE_VERIFICATION,
    LabelEntry,
    LabelSet,
    RankedSuite,
    RankModel,
    TrainConfig,
    rank,
    train,
)
from .rng import fnv1a64
from .verification import (
    TAU_ADEQUATE,
    TAU_MARGINAL,
    AdequacyReport,
    SelectionResult,
    assess_adequacy,
    choose_cutoff,
)

DEFAULT_MAX_ITERATIONS = 5
DEFAULT_ACTOR = "operator"

DECISION_ACCEPT = "accept"
DECISION_ITERATE = "iterate"
DECISION_ABORT = "abort"


class SessionState(str, Enum):
    CREATED = "Created"
    DATA_LOADED = "DataLoaded"
    FEATURES_SCOPED = "FeaturesScoped"
    TRAINING_LABELED = "TrainingLabeled"
    TRAINED = "Trained"
    VERIFICATION_LABELED = "VerificationLabeled"
    ASSESSED = "Assessed"
    ACCEPTED = "Accepted"
    ITERATING = "Iterating"
    ABORTED = "Aborted"
    POSTTEST_RECORDED = "PostTestRecorded"


class EventKind(str, Enum):
    LOAD_DATA = "LOAD_DATA"
    SCOPE_FEATURES = "SCOPE_FEATURES"
    LABEL_TRAINING = "LABEL_TRAINING"
    LABEL_VERIFICATION = "LABEL_VERIFICATION"
    RELABEL = "RELABEL"
    TRAIN = "TRAIN"
    ASSESS = "ASSESS"
    DECIDE = "DECIDE"
    RECORD_POSTTEST = "RECORD_POSTTEST"


# Complete transition table. DECIDE's target depends on the decision in
# the payload; every other pair has a fixed target. Label and relabel
# events loop on the labeled states so labels can arrive in batches and
# be corrected before moving on; both loops are audited like any other
# transition.
TRANSITIONS: dict[tuple[SessionState, EventKind], tuple[SessionState, ...]] = {
    (SessionState.CREATED, EventKind.LOAD_DATA): (SessionState.DATA_LOADED,),
    (SessionState.DATA_LOADED, EventKind.SCOPE_FEATURES): (SessionState.FEATURES_SCOPED,),
    (SessionState.FEATURES_SCOPED, EventKind.LABEL_TRAINING): (SessionState.TRAINING_LABELED,),
    (SessionState.TRAINING_LABELED, EventKind.LABEL_TRAINING): (SessionState.TRAINING_LABELED,),
    (SessionState.TRAINING_LABELED, EventKind.RELABEL): (SessionState.TRAINING_LABELED,),
    (SessionState.TRAINING_LABELED, EventKind.TRAIN): (SessionState.TRAINED,),
    (SessionState.TRAINED, EventKind.LABEL_VERIFICATION): (SessionState.VERIFICATION_LABELED,),
    (SessionState.VERIFICATION_LABELED, EventKind.LABEL_VERIFICATION): (
        SessionState.VERIFICATION_LABELED,
    ),
    (SessionState.VERIFICATION_LABELED, EventKind.RELABEL): (
        SessionState.VERIFICATION_LABELED,
    ),
    (SessionState.VERIFICATION_LABELED, EventKind.ASSESS): (SessionState.ASSESSED,),
    (SessionState.ASSESSED, EventKind.DECIDE): (
        SessionState.ACCEPTED,
        SessionState.ITERATING,
        SessionState.ABORTED,
    ),
    (SessionState.ITERATING, EventKind.LABEL_TRAINING): (SessionState.TRAINING_LABELED,),
    (SessionState.ACCEPTED, EventKind.RECORD_POSTTEST): (SessionState.POSTTEST_RECORDED,),
    (SessionState.ABORTED, EventKind.RECORD_POSTTEST): (SessionState.POSTTEST_RECORDED,),
}


@dataclass(frozen=True)
class AuditRecord:
    timestamp: str
    actor: str
    event: str
    payload: dict
    digest: str

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "actor": self.actor,
            "event": self.event,
            "payload": self.payload,
            "digest": self.digest,
        }


@dataclass(frozen=True)
class WorkflowEvent:
    kind: EventKind
    payload: dict
    actor: str = DEFAULT_ACTOR
    timestamp: str | None = None  # stamped at transition time when None


@dataclass(frozen=True)
class Session:
    id: str
    state: SessionState = SessionState.CREATED
    dataset_ref: str | None = None
    scope: FeatureScope | None = None
    labels: LabelSet = LabelSet()
    model: RankModel | None = None
    suite: RankedSuite | None = None
    reports: tuple[AdequacyReport, ...] = ()
    selection: SelectionResult | None = None
    iteration: int = 0
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    audit: tuple[AuditRecord, ...] = ()
    reflection: str | None = None
    improvement_notes: str | None = None

    def latest_report(self) -> AdequacyReport | None:
        return self.reports[-1] if self.reports else None

    def training_ids(self) -> set[str]:
        return {e.test_id for e in self.labels.training()}


def new_session(session_id: str, max_iterations: int = DEFAULT_MAX_ITERATIONS) -> Session:
    return Session(id=session_id, max_iterations=max_iterations)


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def payload_digest(payload: dict) -> str:
    return fnv1a64(canonical_json(payload).encode("utf-8"))


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_label_entries(payload: dict, role: str) -> list[LabelEntry]:
    raw = payload.get("entries")
    if not isinstance(raw, list):
        raise PayloadInvalid("expected an 'entries' array")
    entries = []
    for item in raw:
        if not isinstance(item, Mapping) or "test_id" not in item or "label" not in item:
            raise PayloadInvalid("each entry needs test_id and label")
        if item["label"] not in (LABEL_IN, LABEL_OUT):
            raise PayloadInvalid(f"label must be in/out, got '{item['label']}'")
        entries.append(LabelEntry(item["test_id"], item["label"], role))
    return entries


def _apply_load_data(s: Session, payload: dict, dataset: Dataset | None) -> Session:
    ref = payload.get("dataset_ref")
    if not isinstance(ref, str) or not ref:
        raise PayloadInvalid("expected a non-empty 'dataset_ref'")
    return replace(s, dataset_ref=ref)


def _apply_scope(s: Session, payload: dict, dataset: Dataset) -> Session:
    target = payload.get("target_release")
    deselected = payload.get("deselected_groups", [])
    if not isinstance(target, str) or not isinstance(deselected, list):
        raise PayloadInvalid("expected 'target_release' string and 'deselected_groups' array")
    scope = FeatureScope(target_release=target, deselected_groups=frozenset(deselected))
    validate_scope(build_catalog(dataset, target), scope)
    return replace(s, scope=scope)


def _apply_label_training(s: Session, payload: dict, dataset: Dataset) -> Session:
    entries = _parse_label_entries(payload, ROLE_TRAINING)
    known = dataset.test_by_id()
    for e in entries:
        if e.test_id not in known:
            raise UnknownTestId(f"training label for unknown test '{e.test_id}'")
    try:
        labels = s.labels.with_added(entries)
    except ValueError as exc:
        raise PayloadInvalid(str(exc)) from exc
    return replace(s, labels=labels)


def _apply_label_verification(s: Session, payload: dict) -> Session:
    entries = _parse_label_entries(payload, ROLE_VERIFICATION)
    in_suite = set(s.suite.ids())
    for e in entries:
        if e.test_id not in in_suite:
            raise UnknownTestId(f"verification label for test '{e.test_id}' not in suite")
    try:
        labels = s.labels.with_added(entries)
    except ValueError as exc:
        raise PayloadInvalid(str(exc)) from exc
    return replace(s, labels=labels)


def _apply_relabel(s: Session, payload: dict) -> Session:
    raw = payload.get("entries")
    if not isinstance(raw, list) or not raw:
        raise PayloadInvalid("expected a non-empty 'entries' array")
    labels = s.labels
    for item in raw:
        if not isinstance(item, Mapping) or "test_id" not in item or "label" not in item:
            raise PayloadInvalid("each entry needs test_id and label")
        if item["label"] not in (LABEL_IN, LABEL_OUT):
            raise PayloadInvalid(f"label must be in/out, got '{item['label']}'")
        labels = labels.with_relabel(item["test_id"], item["label"])
    return replace(s, labels=labels)


def _apply_train(s: Session, payload: dict, dataset: Dataset) -> Session:
    cfg_raw = payload.get("config", {})
    if not isinstance(cfg_raw, Mapping):
        raise PayloadInvalid("'config' must be an object")
    try:
        cfg = TrainConfig(**dict(cfg_raw))
    except (TypeError, ValueError) as exc:
        raise PayloadInvalid(f"bad train config: {exc}") from exc
    matrix = extract_features(dataset, s.scope)
    model = train(matrix, s.labels, cfg)
    suite = rank(model, dataset, s.scope, s.training_ids())
    return replace(s, model=model, suite=suite)


def _apply_assess(s: Session, payload: dict) -> Session:
    tau_adequate = payload.get("tau_adequate", TAU_ADEQUATE)
    tau_marginal = payload.get("tau_marginal", TAU_MARGINAL)
    if not (0 <= tau_adequate <= tau_marginal <= 1):
        raise PayloadInvalid("thresholds must satisfy 0 <= tau_adequate <= tau_marginal <= 1")
    report = assess_adequacy(s.suite, s.labels, tau_adequate, tau_marginal)
    return replace(s, reports=s.reports + (report,))


def _apply_decide(s: Session, payload: dict) -> tuple[Session, SessionState]:
    decision = payload.get("decision")
    if decision == DECISION_ACCEPT:
        cutoff_rank = payload.get("cutoff_rank")
        if not isinstance(cutoff_rank, int) or isinstance(cutoff_rank, bool):
            raise PayloadInvalid("accept needs an integer 'cutoff_rank'")
        if not 1 <= cutoff_rank <= len(s.suite.entries):
            raise PayloadInvalid(f"cutoff_rank {cutoff_rank} outside the ranked suite")
        allow_override = bool(payload.get("allow_override", False))
        selection = choose_cutoff(s.suite, s.latest_report(), cutoff_rank, allow_override)
        return replace(s, selection=selection), SessionState.ACCEPTED
    if decision == DECISION_ITERATE:
        if s.iteration >= s.max_iterations:
            raise IllegalTransition(
                s.state.value,
                f"DECIDE(iterate) at the iteration limit ({s.max_iterations}); abort instead",
            )
        return replace(s, iteration=s.iteration + 1), SessionState.ITERATING
    if decision == DECISION_ABORT:
        return s, SessionState.ABORTED
    raise PayloadInvalid(f"decision must be accept/iterate/abort, got '{decision}'")


def _apply_posttest(s: Session, payload: dict) -> Session:
    reflection = payload.get("reflection")
    notes = payload.get("improvement_notes")
    if not isinstance(reflection, str) or not isinstance(notes, str):
        raise PayloadInvalid("expected 'reflection' and 'improvement_notes' strings")
    return replace(s, reflection=reflection, improvement_notes=notes)


def transition(s: Session, event: WorkflowEvent, dataset: Dataset | None = None) -> Session:
    """Apply one workflow event, returning the next session.

    Raises IllegalTransition for a (state, event) pair outside the table
    and PayloadInvalid (or a domain error) for a legal event with a bad
    payload; in every error case the input session is unchanged. Events
    that need the dataset (scoping, labeling, training) receive it as an
    argument; the session itself stores only the dataset_ref.
    """
    key = (s.state, event.kind)
    if key not in TRANSITIONS:
        raise IllegalTransition(s.state.value, event.kind.value)
    if not isinstance(event.payload, dict):
        raise PayloadInvalid("event payload must be an object")

    needs_dataset = event.kind in (
        EventKind.SCOPE_FEATURES,
        EventKind.LABEL_TRAINING,
        EventKind.TRAIN,
    )
    if needs_dataset and dataset is None:
        raise PayloadInvalid(f"{event.kind.value} requires the referenced dataset")

    target = TRANSITIONS[key][0]
    if event.kind == EventKind.LOAD_DATA:
        nxt = _apply_load_data(s, event.payload, dataset)
    elif event.kind == EventKind.SCOPE_FEATURES:
        nxt = _apply_scope(s, event.payload, dataset)
    elif event.kind == EventKind.LABEL_TRAINING:
        nxt = _apply_label_training(s, event.payload, dataset)
    elif event.kind == EventKind.LABEL_VERIFICATION:
        nxt = _apply_label_verification(s, event.payload)
    elif event.kind == EventKind.RELABEL:
        nxt = _apply_relabel(s, event.payload)
    elif event.kind == EventKind.TRAIN:
        nxt = _apply_train(s, event.payload, dataset)
    elif event.kind == EventKind.ASSESS:
        nxt = _apply_assess(s, event.payload)
    elif event.kind == EventKind.DECIDE:
        nxt, target = _apply_decide(s, event.payload)
    elif event.kind == EventKind.RECORD_POSTTEST:
        nxt = _apply_posttest(s, event.payload)
    else:  # pragma: no cover - table and dispatch are kept in sync
        raise IllegalTransition(s.state.value, event.kind.value)

    record = AuditRecord(
        timestamp=event.timestamp or _now_iso(),
        actor=event.actor,
        event=event.kind.value,
        payload=event.payload,
        digest=payload_digest(event.payload),
    )
    return replace(nxt, state=target, audit=s.audit + (record,))


def record_posttest(
    s: Session, reflection: str, improvement_notes: str, actor: str = DEFAULT_ACTOR
) -> Session:
    """Convenience wrapper for the final workflow step."""
    return transition(
        s,
        WorkflowEvent(
            kind=EventKind.RECORD_POSTTEST,
            payload={"reflection": reflection, "improvement_notes": improvement_notes},
            actor=actor,
        ),
    )


def replay_audit(
    session_id: str,
    records: tuple[AuditRecord, ...],
    dataset_provider: Callable[[str], Dataset],
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Session:
    """Rebuild a session by re-applying its audit trail from scratch.

    Works because payloads are complete and training is deterministic:
    the same events in the same order produce the same model, suite,
    reports and selection. Timestamps are taken from the records, so the
    result is structurally equal to the original session.
    """
    s = new_session(session_id, max_iterations=max_iterations)
    dataset: Dataset | None = None
    for rec in records:
        event = WorkflowEvent(
            kind=EventKind(rec.event),
            payload=rec.payload,
            actor=rec.actor,
            timestamp=rec.timestamp,
        )
        if event.kind == EventKind.LOAD_DATA:
            s = transition(s, event)
            dataset = dataset_provider(s.dataset_ref)
        else:
            s = transition(s, event, dataset)
    return s


def export_document(s: Session) -> dict:
    """The selection hand-off document for downstream test execution.

    Available once a cutoff was accepted; the ranked list marks every
    test at or above the cutoff as selected.
    """
    if s.selection is None or s.suite is None or s.scope is None:
        raise IllegalTransition(s.state.value, "EXPORT")
    report = s.latest_report()
    sel = s.selection
    return {
        "release": s.scope.target_release,
        "session_id": s.id,
        "ranked": [
            {
                "rank": e["rank"],
                "test_id": e["test_id"],
                "score": e["score"],
                "selected": e["rank"] <= sel.cutoff_rank,
            }
            for e in s.suite.to_list()
        ],
        "cutoff_rank": sel.cutoff_rank,
        "t_e_test_id": sel.t_e_test_id,
        "override_used": sel.override_used,
        "adequacy": {"pair_overlap": report.pair_overlap, "verdict": report.verdict},
    }


def session_to_dict(s: Session) -> dict:
    return {
        "id": s.id,
        "state": s.state.value,
        "dataset_ref": s.dataset_ref,
        "scope": s.scope.to_dict() if s.scope else None,
        "labels": s.labels.to_list(),
        "model": s.model.to_dict() if s.model else None,
        "suite": s.suite.to_list() if s.suite else None,
        "reports": [r.to_dict() for r in s.reports],
        "selection": s.selection.to_dict() if s.selection else None,
        "iteration": s.iteration,
        "max_iterations": s.max_iterations,
        "audit": [a.to_dict() for a in s.audit],
        "reflection": s.reflection,
        "improvement_notes": s.improvement_notes,
    }


def session_from_dict(doc: Mapping) -> Session:
    scope_raw = doc.get("scope")
    suite_raw = doc.get("suite")
    audit = []
    for raw in doc.get("audit", []):
        record = AuditRecord(
            timestamp=raw["timestamp"],
            actor=raw["actor"],
            event=raw["event"],
            payload=raw["payload"],
            digest=raw["digest"],
        )
        if payload_digest(record.payload) != record.digest:
            raise StoreCorrupt(
                f"audit digest mismatch on event {record.event} at {record.timestamp}"
            )
        audit.append(record)
    return Session(
        id=doc["id"],
        state=SessionState(doc["state"]),
        dataset_ref=doc.get("dataset_ref"),
        scope=(
            FeatureScope(
                target_release=scope_raw["target_release"],
                deselected_groups=frozenset(scope_raw["deselected_groups"]),
            )
            if scope_raw
            else None
        ),
        labels=LabelSet.from_list(doc.get("labels", [])),
        model=RankModel.from_dict(doc["model"]) if doc.get("model") else None,
        suite=RankedSuite.from_list(suite_raw) if suite_raw else None,
        reports=tuple(AdequacyReport.from_dict(r) for r in doc.get("reports", [])),
        selection=(
            SelectionResult.from_dict(doc["selection"]) if doc.get("selection") else None
        ),
        iteration=int(doc.get("iteration", 0)),
        max_iterations=int(doc.get("max_iterations", DEFAULT_MAX_ITERATIONS)),
        audit=tuple(audit),
        reflection=doc.get("reflection"),
        improvement_notes=doc.get("improvement_notes"),
    )


class SessionClaim:
    """Exclusive per-session writer claim, held as an O_EXCL lock file."""

    def __init__(self, path: Path):
        self._path = path
        self._fd: int | None = None

    def __enter__(self) -> "SessionClaim":
        try:
            self._fd = os.open(self._path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConcurrentWrite(
                f"session is locked by another writer ({self._path.name})"
            ) from None
        return self

    def __exit__(self, *exc_info) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None
        try:
            self._path.unlink()
        except FileNotFoundError:
            pass


class SessionStore:
    """One JSON document per session under a directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.json"

    def persist(self, s: Session) -> Path:
        path = self._path(s.id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(session_to_dict(s), ensure_ascii=False, indent=1))
        os.replace(tmp, path)
        return path

    def restore(self, session_id: str) -> Session:
        path = self._path(session_id)
        if not path.exists():
            raise NotFound(f"no session '{session_id}'")
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreCorrupt(f"cannot read session '{session_id}': {exc}") from exc
        return session_from_dict(doc)

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("s-*.json"))

    def next_session_id(self) -> str:
        """Sequential ids (s-0001, s-0002, ...) so reruns on a fresh store
        produce identical identifiers."""
        highest = 0
        for sid in self.list_ids():
            suffix = sid.split("-", 1)[1]
            if suffix.isdigit():
                highest = max(highest, int(suffix))
        return f"s-{highest + 1:04d}"

    def claim(self, session_id: str) -> SessionClaim:
        return SessionClaim(self.directory / f"{session_id}.lock")
