"""Shared fixtures: hand-built miniature datasets and the synthetic corpora."""
from __future__ import annotations

import pytest

from rts.corpus import planted_corpus, shuffled_corpus
from rts.datamodel import Dataset, Defect, HistoryEntry, Requirement, TestCase

# feature group names for a description-only scope
NON_TEXT_GROUPS = frozenset(
    {"n_requirements", "n_defects", "n_changed_requirements", "hist_fail_rate", "tags"}
)


def make_test(
    tid: str,
    title: str = "",
    description: str = "",
    requirement_ids: tuple[str, ...] = (),
    defect_ids: tuple[str, ...] = (),
    tags: tuple[str, ...] = (),
    history: tuple[HistoryEntry, ...] = (),
) -> TestCase:
    return TestCase(
        id=tid,
        title=title,
        description=description,
        requirement_ids=requirement_ids,
        defect_ids=defect_ids,
        tags=tags,
        history=history,
    )


def make_dataset(
    tests: tuple[TestCase, ...],
    requirements: tuple[Requirement, ...] = (),
    defects: tuple[Defect, ...] = (),
    releases: tuple[str, ...] = ("r1", "r2"),
    project: str = "mini",
) -> Dataset:
    return Dataset(
        schema_version=1,
        project=project,
        releases=releases,
        tests=tests,
        requirements=requirements,
        defects=defects,
    )


def flow_dataset() -> Dataset:
    """Ten tests whose descriptions cleanly split into risky and calm text.

    Training labels on c1/c2/m1/m2 leave a six-test ranked suite where the
    crash tests outscore the calm ones; x1/x2 stay unlabeled throughout.
    """
    texts = {
        "T_c1": "crash overflow alpha",
        "T_c2": "crash overflow beta",
        "T_c3": "crash overflow gamma",
        "T_c4": "crash overflow delta",
        "T_m1": "calm steady epsilon",
        "T_m2": "calm steady zeta",
        "T_m3": "calm steady eta",
        "T_m4": "calm steady theta",
        "T_x1": "crash overflow iota",
        "T_x2": "calm steady kappa",
    }
    tests = tuple(
        make_test(
            tid,
            title="Check",
            description=desc,
            history=(HistoryEntry("r1", True, "pass"),),
        )
        for tid, desc in texts.items()
    )
    return make_dataset(tests, releases=("r1", "r2"))


def backtest_dataset() -> Dataset:
    """Two textually risky tests, two calm ones, three releases.

    The window before r3 labels the crash tests in and the calm tests out;
    at r3 one crash test fails and reveals the only fault. r1 has no prior
    window, so a backtest over r1 is skipped for degenerate labels.
    """
    tests = (
        make_test(
            "T_crash_a",
            title="Crash check",
            description="crash overflow alpha",
            history=(
                HistoryEntry("r1", True, "fail", ("D1",)),
                HistoryEntry("r2", True, "pass"),
                HistoryEntry("r3", True, "fail", ("D3",)),
            ),
        ),
        make_test(
            "T_crash_b",
            title="Crash check",
            description="crash overflow beta",
            history=(
                HistoryEntry("r1", True, "pass"),
                HistoryEntry("r2", True, "fail", ("D2",)),
                HistoryEntry("r3", True, "pass"),
            ),
        ),
        make_test(
            "T_calm_a",
            title="Calm check",
            description="calm steady gamma",
            history=(
                HistoryEntry("r1", True, "pass"),
                HistoryEntry("r2", True, "pass"),
                HistoryEntry("r3", True, "pass"),
            ),
        ),
        make_test(
            "T_calm_b",
            title="Calm check",
            description="calm steady delta",
            history=(
                HistoryEntry("r1", True, "pass"),
                HistoryEntry("r2", True, "pass"),
                HistoryEntry("r3", True, "pass"),
            ),
        ),
    )
    return make_dataset(tests, releases=("r1", "r2", "r3"))


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Four tests, two releases, one requirement, one defect; fully consistent."""
    req = Requirement(
        id="R1",
        title="Login requirement",
        description="users can log in",
        changed_in_releases=("r2",),
    )
    defect = Defect(id="D1", title="Login broken", severity=2, found_in_release="r1")
    tests = (
        make_test(
            "T1",
            title="Login test",
            description="login fails on submit",
            requirement_ids=("R1",),
            defect_ids=("D1",),
            history=(
                HistoryEntry("r1", True, "fail", ("D1",)),
                HistoryEntry("r2", True, "pass"),
            ),
        ),
        make_test(
            "T2",
            title="Logout test",
            description="logout works correctly",
            requirement_ids=("R1",),
            tags=("ui",),
            history=(
                HistoryEntry("r1", True, "pass"),
                HistoryEntry("r2", True, "pass"),
            ),
        ),
        make_test(
            "T3",
            title="Report test",
            description="report renders table",
            tags=("ui", "batch"),
            history=(HistoryEntry("r2", True, "pass"),),
        ),
        make_test(
            "T4",
            title="Export test",
            description="export writes csv file",
            history=(HistoryEntry("r2", False, "skipped"),),
        ),
    )
    return make_dataset(tests, requirements=(req,), defects=(defect,))


@pytest.fixture(scope="session")
def planted():
    return planted_corpus()


@pytest.fixture(scope="session")
def shuffled():
    return shuffled_corpus()
