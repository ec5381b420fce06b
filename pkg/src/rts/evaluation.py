"""APFD, the random-ordering baseline, and historical backtests.

APFD (average percentage of faults detected) rewards orderings that
reveal faults early: 1 - sum(TF_i)/(n*m) + 1/(2n), where TF_i is the
1-based rank of the first test revealing fault i. Faults revealed by no
test in the evaluated ordering are excluded from m and reported, since
the formula is undefined for them.

A backtest replays the pipeline against a past release: training labels
are derived from the verdicts of the two releases before it, the model
ranks every test that has history at the release, and APFD measures how
early the ordering finds the faults that release actually revealed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .datamodel import Dataset
from .errors import DegenerateLabels, NoFaults, UnknownRelease, UnknownTestId
from .features import FeatureScope, extract_features
from .ranker import (
    LABEL_IN,
    LABEL_OUT,
    ROLE_TRAINING,
    LabelEntry,
    LabelSet,
    TrainConfig,
    score,
    train,
)
from .rng import SplitMix64

TRAINING_WINDOW = 2  # releases strictly before the target used for labels

LABELING_HISTORY_VERDICT = "history_verdict"


@dataclass(frozen=True)
class FaultMatrix:
    """First-failure ranks of one ordering against one release's faults."""

    n: int
    first_failures: dict[str, int]  # fault id -> 1-based TF rank
    excluded_faults: tuple[str, ...]

    @property
    def m(self) -> int:
        return len(self.first_failures)


@dataclass(frozen=True)
class ReleaseResult:
    release: str
    apfd: float
    n: int
    m: int
    excluded_fault_count: int


@dataclass(frozen=True)
class BacktestReport:
    per_release: tuple[ReleaseResult, ...]
    skipped: tuple[tuple[str, str], ...] = ()  # (release, reason)

    @property
    def empty(self) -> bool:
        return not self.per_release

    @property
    def mean_apfd(self) -> float:
        if self.empty:
            raise NoFaults("no release produced an evaluable ranking")
        return sum(r.apfd for r in self.per_release) / len(self.per_release)

    def to_dict(self) -> dict:
        return {
            "per_release": [
                {
                    "release": r.release,
                    "apfd": r.apfd,
                    "n": r.n,
                    "m": r.m,
                    "excluded_fault_count": r.excluded_fault_count,
                }
                for r in self.per_release
            ],
            "mean_apfd": None if self.empty else self.mean_apfd,
            "skipped": [{"release": rel, "reason": reason} for rel, reason in self.skipped],
            "empty": self.empty,
        }


def _revealed_by_test(t, release: str) -> set[str]:
    faults: set[str] = set()
    for h in t.history:
        if h.release == release:
            faults.update(h.revealed_defect_ids)
    return faults


def build_fault_matrix(ordering: list[str], d: Dataset, release: str) -> FaultMatrix:
    """Map each fault revealed at `release` to its first revealing rank.

    The fault universe covers every defect revealed at the release by any
    test in the dataset; faults whose revealing tests are all absent from
    the ordering are excluded rather than silently dropped.
    """
    if release not in d.releases:
        raise UnknownRelease(f"release '{release}' not in dataset")
    known = d.test_by_id()
    rank_of: dict[str, int] = {}
    for i, tid in enumerate(ordering):
        if tid not in known:
            raise UnknownTestId(f"ordering contains unknown test '{tid}'")
        rank_of.setdefault(tid, i + 1)

    first: dict[str, int] = {}
    universe: set[str] = set()
    for t in d.tests:
        revealed = _revealed_by_test(t, release)
        if not revealed:
            continue
        universe.update(revealed)
        rank = rank_of.get(t.id)
        if rank is None:
            continue
        for fault in revealed:
            prior = first.get(fault)
            if prior is None or rank < prior:
                first[fault] = rank

    excluded = tuple(sorted(universe - first.keys()))
    return FaultMatrix(n=len(ordering), first_failures=first, excluded_faults=excluded)


def apfd(fm: FaultMatrix) -> float:
    if fm.m == 0:
        raise NoFaults("no faults detected by the ordering; APFD undefined")
    if fm.n < 1:
        raise ValueError("ordering must contain at least one test")
    return 1.0 - sum(fm.first_failures.values()) / (fm.n * fm.m) + 1.0 / (2 * fm.n)


def tests_with_history(d: Dataset, release: str) -> list[str]:
    """Ids of tests having any history entry at the release, in dataset order."""
    return [t.id for t in d.tests if any(h.release == release for h in t.history)]


def random_baseline(d: Dataset, release: str, trials: int, seed: int) -> float:
    """Mean APFD over seeded uniform random orderings of the release's tests."""
    if release not in d.releases:
        raise UnknownRelease(f"release '{release}' not in dataset")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    pool = tests_with_history(d, release)
    # fault -> pool positions of its revealing tests, precomputed once
    pool_pos = {tid: i for i, tid in enumerate(pool)}
    revealers: dict[str, list[int]] = {}
    for t in d.tests:
        for fault in _revealed_by_test(t, release):
            if t.id in pool_pos:
                revealers.setdefault(fault, []).append(pool_pos[t.id])
    if not revealers:
        raise NoFaults(f"no faults revealed at release '{release}'")

    n = len(pool)
    m = len(revealers)
    rng = SplitMix64(seed)
    positions = list(range(n))
    total = 0.0
    for _ in range(trials):
        rng.shuffle(positions)
        # positions[i] = rank-1 of pool slot i under this permutation
        tf_sum = 0
        for slots in revealers.values():
            tf_sum += min(positions[s] for s in slots) + 1
        total += 1.0 - tf_sum / (n * m) + 1.0 / (2 * n)
    return total / trials


def derive_labels(d: Dataset, release: str, window: int = TRAINING_WINDOW) -> LabelSet:
    """Training labels from the verdicts of the releases before `release`.

    A test that failed in any window release is in; one that executed and
    passed (and never failed there) is out; everything else is unlabeled.
    """
    order = d.release_index()
    if release not in order:
        raise UnknownRelease(f"release '{release}' not in dataset")
    idx = order[release]
    window_releases = set(d.releases[max(0, idx - window) : idx])

    entries: list[LabelEntry] = []
    for t in d.tests:
        failed = False
        passed = False
        for h in t.history:
            if h.release not in window_releases or not h.executed:
                continue
            if h.verdict == "fail":
                failed = True
            elif h.verdict == "pass":
                passed = True
        if failed:
            entries.append(LabelEntry(t.id, LABEL_IN, ROLE_TRAINING))
        elif passed:
            entries.append(LabelEntry(t.id, LABEL_OUT, ROLE_TRAINING))
    return LabelSet(entries=tuple(entries))


def backtest(
    d: Dataset,
    scope_template: FeatureScope,
    cfg: TrainConfig,
    releases: list[str],
    labeling_rule: str = LABELING_HISTORY_VERDICT,
) -> BacktestReport:
    """Evaluate the pipeline against past releases.

    Per release: derive labels from the two prior releases, train, rank
    every test with history at the release by model score (ties by test
    id), and compute APFD against the faults the release revealed. A
    release where training or the metric is impossible is skipped with a
    reason instead of failing the whole run.
    """
    if labeling_rule != LABELING_HISTORY_VERDICT:
        raise ValueError(f"unknown labeling rule '{labeling_rule}'")
    for release in releases:
        if release not in d.releases:
            raise UnknownRelease(f"release '{release}' not in dataset")

    results: list[ReleaseResult] = []
    skipped: list[tuple[str, str]] = []
    for release in releases:
        scope = FeatureScope(
            target_release=release, deselected_groups=scope_template.deselected_groups
        )
        labels = derive_labels(d, release)
        matrix = extract_features(d, scope)
        try:
            model = train(matrix, labels, cfg)
        except DegenerateLabels as exc:
            skipped.append((release, f"DegenerateLabels: {exc}"))
            continue

        pool = set(tests_with_history(d, release))
        scored = [
            (score(model, row), tid)
            for tid, row in zip(matrix.test_ids, matrix.rows)
            if tid in pool
        ]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        ordering = [tid for _, tid in scored]
        fm = build_fault_matrix(ordering, d, release)
        try:
            value = apfd(fm)
        except NoFaults as exc:
            skipped.append((release, f"NoFaults: {exc}"))
            continue
        results.append(
            ReleaseResult(
                release=release,
                apfd=value,
                n=fm.n,
                m=fm.m,
                excluded_fault_count=len(fm.excluded_faults),
            )
        )
    return BacktestReport(per_release=tuple(results), skipped=tuple(skipped))
