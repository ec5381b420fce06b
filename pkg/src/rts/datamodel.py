"""Project data working copy: tests, requirements, defects, relations, history.

The dataset file format is UTF-8 JSON with top-level keys `schema_version`
(integer, currently 1), `project`, `releases` (array of strings, oldest
first), `tests`, `requirements` and `defects`. Snake_case keys, lowercase
verdicts. This schema is the contract consumed by every other module.

Loading is strict about structure (missing required fields and wrong types
raise SchemaViolation naming the offending path) but permissive about
content: referential problems such as duplicate ids or dangling references
are the business of validate_dataset, which reports them instead of raising.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import MalformedInput, SchemaViolation

VERDICTS = ("pass", "fail", "skipped")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class HistoryEntry:
    """Outcome of one test at one release.

    A fail verdict implies the test was executed, and revealed defects imply
    a fail verdict; violations of either rule are flagged by validation as
    CONTRADICTORY_HISTORY rather than rejected at load time.
    """

    release: str
    executed: bool
    verdict: str
    revealed_defect_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class TestCase:
    id: str
    title: str
    description: str = ""
    requirement_ids: tuple[str, ...] = ()
    defect_ids: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    history: tuple[HistoryEntry, ...] = ()


@dataclass(frozen=True)
class Requirement:
    id: str
    title: str
    description: str = ""
    changed_in_releases: tuple[str, ...] = ()


@dataclass(frozen=True)
class Defect:
    id: str
    title: str
    severity: int = 0
    found_in_release: str = ""


@dataclass(frozen=True)
class Dataset:
    """Immutable working copy of one project's test management data."""

    schema_version: int
    project: str
    releases: tuple[str, ...]
    tests: tuple[TestCase, ...]
    requirements: tuple[Requirement, ...]
    defects: tuple[Defect, ...]

    def test_by_id(self) -> dict[str, TestCase]:
        return {t.id: t for t in self.tests}

    def release_index(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.releases)}


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    code: str
    entity_id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def corrupt(self) -> bool:
        return any(i.severity == "error" for i in self.issues)

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def to_dict(self) -> dict:
        return {
            "corrupt": self.corrupt,
            "issues": [
                {
                    "severity": i.severity,
                    "code": i.code,
                    "entity_id": i.entity_id,
                    "message": i.message,
                }
                for i in self.issues
            ],
        }


Source = Union[str, Path, bytes, bytearray, io.IOBase]


_MISSING = object()


def _require(obj: dict, key: str, kind: type, path: str, default=_MISSING):
    if key not in obj:
        if default is not _MISSING:
            return default
        raise SchemaViolation(f"{path}.{key}", "missing required field")
    value = obj[key]
    if kind is bool:
        if not isinstance(value, bool):
            raise SchemaViolation(f"{path}.{key}", "expected a boolean")
    elif kind is int:
        # bool is an int subclass; an integer field must not accept true/false
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaViolation(f"{path}.{key}", "expected an integer")
    elif not isinstance(value, kind):
        raise SchemaViolation(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _string_list(obj: dict, key: str, path: str, required: bool = False) -> tuple[str, ...]:
    if key not in obj:
        if required:
            raise SchemaViolation(f"{path}.{key}", "missing required field")
        return ()
    value = obj[key]
    if not isinstance(value, list):
        raise SchemaViolation(f"{path}.{key}", "expected an array of strings")
    for i, item in enumerate(value):
        if not isinstance(item, str):
            raise SchemaViolation(f"{path}.{key}[{i}]", "expected a string")
    return tuple(value)


def _parse_history(raw: list, path: str) -> tuple[HistoryEntry, ...]:
    entries = []
    for i, item in enumerate(raw):
        p = f"{path}[{i}]"
        if not isinstance(item, dict):
            raise SchemaViolation(p, "expected an object")
        verdict = _require(item, "verdict", str, p)
        if verdict not in VERDICTS:
            raise SchemaViolation(f"{p}.verdict", f"expected one of {'/'.join(VERDICTS)}")
        entries.append(
            HistoryEntry(
                release=_require(item, "release", str, p),
                executed=_require(item, "executed", bool, p),
                verdict=verdict,
                revealed_defect_ids=_string_list(item, "revealed_defect_ids", p),
            )
        )
    return tuple(entries)


def _parse_test(raw: dict, path: str) -> TestCase:
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    history_raw = raw.get("history", [])
    if not isinstance(history_raw, list):
        raise SchemaViolation(f"{path}.history", "expected an array")
    return TestCase(
        id=_require(raw, "id", str, path),
        title=_require(raw, "title", str, path),
        description=_require(raw, "description", str, path, default=""),
        requirement_ids=_string_list(raw, "requirement_ids", path),
        defect_ids=_string_list(raw, "defect_ids", path),
        tags=_string_list(raw, "tags", path),
        history=_parse_history(history_raw, f"{path}.history"),
    )


def _parse_requirement(raw: dict, path: str) -> Requirement:
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    return Requirement(
        id=_require(raw, "id", str, path),
        title=_require(raw, "title", str, path),
        description=_require(raw, "description", str, path, default=""),
        changed_in_releases=_string_list(raw, "changed_in_releases", path),
    )


def _parse_defect(raw: dict, path: str) -> Defect:
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    return Defect(
        id=_require(raw, "id", str, path),
        title=_require(raw, "title", str, path),
        severity=_require(raw, "severity", int, path, default=0),
        found_in_release=_require(raw, "found_in_release", str, path, default=""),
    )


def _read_source(source: Source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, Path)):
        try:
            return Path(source).read_bytes()
        except OSError as exc:
            raise MalformedInput(f"cannot read {source}: {exc}") from exc
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, str):
            return data.encode("utf-8")
        return bytes(data)
    raise MalformedInput(f"unsupported source type {type(source).__name__}")


def parse_dataset(doc: dict) -> Dataset:
    """Build a Dataset from an already-parsed JSON document."""
    if not isinstance(doc, dict):
        raise MalformedInput("top-level value must be an object")
    version = _require(doc, "schema_version", int, "$")
    if version != SCHEMA_VERSION:
        raise SchemaViolation("$.schema_version", f"unsupported version {version}")
    for key in ("tests", "requirements", "defects", "releases"):
        if key in doc and not isinstance(doc[key], list):
            raise SchemaViolation(f"$.{key}", "expected an array")
    return Dataset(
        schema_version=version,
        project=_require(doc, "project", str, "$", default=""),
        releases=_string_list(doc, "releases", "$"),
        tests=tuple(_parse_test(t, f"$.tests[{i}]") for i, t in enumerate(doc.get("tests", []))),
        requirements=tuple(
            _parse_requirement(r, f"$.requirements[{i}]")
            for i, r in enumerate(doc.get("requirements", []))
        ),
        defects=tuple(
            _parse_defect(d, f"$.defects[{i}]") for i, d in enumerate(doc.get("defects", []))
        ),
    )


def load_dataset(source: Source) -> Dataset:
    """Load a dataset from a file path, byte string or readable stream.

    Unknown fields are ignored and field order is irrelevant. Raises
    MalformedInput when the bytes are not a JSON object, SchemaViolation
    (naming the path of the first violation) when required structure is
    missing or mistyped.
    """
    data = _read_source(source)
    if not data.strip():
        raise MalformedInput("empty input")
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"not valid UTF-8 JSON: {exc}") from exc
    return parse_dataset(doc)


def dataset_to_dict(d: Dataset) -> dict:
    """Serialize back to the documented file schema (load/serialize round-trips)."""
    return {
        "schema_version": d.schema_version,
        "project": d.project,
        "releases": list(d.releases),
        "tests": [
            {
                "id": t.id,
                "title": t.title,
                "description": t.description,
                "requirement_ids": list(t.requirement_ids),
                "defect_ids": list(t.defect_ids),
                "tags": list(t.tags),
                "history": [
                    {
                        "release": h.release,
                        "executed": h.executed,
                        "verdict": h.verdict,
                        "revealed_defect_ids": list(h.revealed_defect_ids),
                    }
                    for h in t.history
                ],
            }
            for t in d.tests
        ],
        "requirements": [
            {
                "id": r.id,
                "title": r.title,
                "description": r.description,
                "changed_in_releases": list(r.changed_in_releases),
            }
            for r in d.requirements
        ],
        "defects": [
            {
                "id": f.id,
                "title": f.title,
                "severity": f.severity,
                "found_in_release": f.found_in_release,
            }
            for f in d.defects
        ],
    }


def dumps_dataset(d: Dataset) -> str:
    return json.dumps(dataset_to_dict(d), ensure_ascii=False, indent=2)


def _duplicate_ids(ids: list[str]) -> list[str]:
    seen: set[str] = set()
    dups: list[str] = []
    for i in ids:
        if i in seen and i not in dups:
            dups.append(i)
        seen.add(i)
    return dups


def validate_dataset(d: Dataset) -> ValidationReport:
    """Deterministic referential and plausibility check.

    Error codes (any one marks the dataset corrupt): DUP_ID, DANGLING_REF,
    EMPTY_SUITE. Warning codes: EMPTY_DESCRIPTION, NO_HISTORY,
    MOSTLY_EMPTY_TEXT (over half of all test descriptions empty),
    CONTRADICTORY_HISTORY (verdict/executed inconsistency).
    """
    issues: list[Issue] = []
    err = lambda code, eid, msg: issues.append(Issue("error", code, eid, msg))
    warn = lambda code, eid, msg: issues.append(Issue("warning", code, eid, msg))

    if not d.tests:
        err("EMPTY_SUITE", "", "dataset contains no tests")

    for kind, ids in (
        ("test", [t.id for t in d.tests]),
        ("requirement", [r.id for r in d.requirements]),
        ("defect", [f.id for f in d.defects]),
    ):
        for dup in _duplicate_ids(ids):
            err("DUP_ID", dup, f"{kind} id '{dup}' is not unique")
        for i in ids:
            if not i:
                err("DUP_ID", i, f"{kind} with empty id")

    known_reqs = {r.id for r in d.requirements}
    known_defects = {f.id for f in d.defects}
    known_releases = set(d.releases)

    empty_descriptions = 0
    for t in d.tests:
        for rid in t.requirement_ids:
            if rid not in known_reqs:
                err("DANGLING_REF", t.id, f"unknown requirement '{rid}'")
        for fid in t.defect_ids:
            if fid not in known_defects:
                err("DANGLING_REF", t.id, f"unknown defect '{fid}'")
        for h in t.history:
            if h.release not in known_releases:
                err("DANGLING_REF", t.id, f"history references unknown release '{h.release}'")
            for fid in h.revealed_defect_ids:
                if fid not in known_defects:
                    err("DANGLING_REF", t.id, f"history reveals unknown defect '{fid}'")
            if h.verdict == "fail" and not h.executed:
                warn("CONTRADICTORY_HISTORY", t.id, f"fail verdict at '{h.release}' without execution")
            if h.revealed_defect_ids and h.verdict != "fail":
                warn(
                    "CONTRADICTORY_HISTORY",
                    t.id,
                    f"defects revealed at '{h.release}' without a fail verdict",
                )
        if not t.description.strip():
            empty_descriptions += 1
            warn("EMPTY_DESCRIPTION", t.id, "test has an empty description")
        if not t.history:
            warn("NO_HISTORY", t.id, "test has no execution history")

    for r in d.requirements:
        for rel in r.changed_in_releases:
            if rel not in known_releases:
                err("DANGLING_REF", r.id, f"changed in unknown release '{rel}'")
    for f in d.defects:
        if f.found_in_release and f.found_in_release not in known_releases:
            err("DANGLING_REF", f.id, f"found in unknown release '{f.found_in_release}'")

    if d.tests and empty_descriptions * 2 > len(d.tests):
        warn(
            "MOSTLY_EMPTY_TEXT",
            "",
            f"{empty_descriptions} of {len(d.tests)} test descriptions are empty",
        )

    return ValidationReport(issues=tuple(issues))
