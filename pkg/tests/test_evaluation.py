"""Tests for APFD, fault matrices, the random baseline, and backtests."""
from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NON_TEXT_GROUPS, backtest_dataset, make_dataset, make_test
from rts.datamodel import HistoryEntry
from rts.errors import NoFaults, UnknownRelease, UnknownTestId
from rts.evaluation import (
    FaultMatrix,
    apfd,
    backtest,
    build_fault_matrix,
    derive_labels,
    random_baseline,
)
from rts.evaluation import tests_with_history as history_pool
from rts.features import FeatureScope, extract_features
from rts.ranker import LABEL_IN, LABEL_OUT, ROLE_TRAINING, TrainConfig, score, train
from rts.rng import SplitMix64


def _dataset_with_faults(n_tests: int, revealers: dict[str, list[int]], release: str = "rr"):
    """n_tests tests named T0..; revealers maps fault id -> revealing test indices."""
    revealed_by: dict[int, list[str]] = {}
    for fault, idxs in revealers.items():
        for i in idxs:
            revealed_by.setdefault(i, []).append(fault)
    tests = []
    for i in range(n_tests):
        faults = tuple(sorted(revealed_by.get(i, [])))
        verdict = "fail" if faults else "pass"
        tests.append(
            make_test(f"T{i}", history=(HistoryEntry(release, True, verdict, faults),))
        )
    return make_dataset(tuple(tests), releases=(release,))


def _oracle_matrix(ordering: list[str], d, release: str) -> FaultMatrix:
    """Per-fault front-to-back scan; independent of the implementation's bookkeeping."""
    revealed_at: dict[str, set[str]] = {}
    for t in d.tests:
        for h in t.history:
            if h.release == release:
                revealed_at.setdefault(t.id, set()).update(h.revealed_defect_ids)
    universe = sorted({f for faults in revealed_at.values() for f in faults})
    first: dict[str, int] = {}
    excluded: list[str] = []
    for fault in universe:
        rank = None
        for i, tid in enumerate(ordering):
            if fault in revealed_at.get(tid, ()):
                rank = i + 1
                break
        if rank is None:
            excluded.append(fault)
        else:
            first[fault] = rank
    return FaultMatrix(n=len(ordering), first_failures=first, excluded_faults=tuple(excluded))


class TestBuildFaultMatrix:
    def test_first_revealing_rank_wins(self):
        # the fault is revealed at ranks 4 and 7; TF is the earlier one
        d = _dataset_with_faults(10, {"F1": [3, 6]})
        fm = build_fault_matrix([f"T{i}" for i in range(10)], d, "rr")
        assert fm.first_failures == {"F1": 4}
        assert fm.n == 10
        assert fm.m == 1
        assert fm.excluded_faults == ()

    def test_fault_with_no_ranked_revealer_is_excluded(self):
        d = _dataset_with_faults(4, {"F1": [0], "F2": [3]})
        fm = build_fault_matrix(["T0", "T1", "T2"], d, "rr")
        assert fm.first_failures == {"F1": 1}
        assert fm.excluded_faults == ("F2",)
        assert fm.m == 1
        assert fm.n == 3

    def test_no_faults_at_release_gives_empty_matrix(self):
        d = _dataset_with_faults(3, {})
        fm = build_fault_matrix(["T0", "T1", "T2"], d, "rr")
        assert fm.m == 0
        with pytest.raises(NoFaults):
            apfd(fm)

    def test_unknown_release_rejected(self):
        d = _dataset_with_faults(2, {"F1": [0]})
        with pytest.raises(UnknownRelease):
            build_fault_matrix(["T0"], d, "nope")

    def test_unknown_test_in_ordering_rejected(self):
        d = _dataset_with_faults(2, {"F1": [0]})
        with pytest.raises(UnknownTestId):
            build_fault_matrix(["T0", "T9"], d, "rr")

    def test_n_counts_the_ordering_not_the_dataset(self):
        d = _dataset_with_faults(5, {"F1": [1]})
        fm = build_fault_matrix(["T1", "T0"], d, "rr")
        assert fm.n == 2
        assert fm.first_failures == {"F1": 1}


class TestApfdExamples:
    def test_ten_tests_four_faults(self):
        fm = FaultMatrix(n=10, first_failures={"a": 1, "b": 3, "c": 5, "d": 7}, excluded_faults=())
        assert apfd(fm) == pytest.approx(0.65, abs=1e-12)

    def test_single_test_single_fault(self):
        fm = FaultMatrix(n=1, first_failures={"a": 1}, excluded_faults=())
        assert apfd(fm) == pytest.approx(0.5, abs=1e-12)

    def test_two_faults_found_by_the_first_test(self):
        fm = FaultMatrix(n=5, first_failures={"a": 1, "b": 1}, excluded_faults=())
        assert apfd(fm) == pytest.approx(0.9, abs=1e-12)

    def test_upper_bound_attained_when_all_faults_found_first(self):
        fm = FaultMatrix(n=8, first_failures={"a": 1, "b": 1, "c": 1}, excluded_faults=())
        assert apfd(fm) == pytest.approx(1 - 1 / 16, abs=1e-15)

    def test_lower_bound_attained_when_all_faults_found_last(self):
        fm = FaultMatrix(n=8, first_failures={"a": 8, "b": 8}, excluded_faults=())
        assert apfd(fm) == pytest.approx(1 / 16, abs=1e-15)

    def test_empty_ordering_with_faults_rejected(self):
        fm = FaultMatrix(n=0, first_failures={"a": 1}, excluded_faults=())
        with pytest.raises(ValueError):
            apfd(fm)


@st.composite
def _fault_instances(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    n_faults = draw(st.integers(min_value=0, max_value=5))
    revealers = {
        f"F{j}": draw(
            st.lists(st.integers(min_value=0, max_value=n - 1), min_size=1, max_size=n, unique=True)
        )
        for j in range(n_faults)
    }
    ranked = draw(st.permutations([f"T{i}" for i in range(n)]))
    kept = draw(st.integers(min_value=1, max_value=n))
    return n, revealers, list(ranked)[:kept]


class TestApfdProperties:
    @given(_fault_instances())
    @settings(max_examples=200, deadline=None)
    def test_matches_front_to_back_scan_oracle(self, instance):
        n, revealers, ordering = instance
        d = _dataset_with_faults(n, revealers)
        fm = build_fault_matrix(ordering, d, "rr")
        oracle = _oracle_matrix(ordering, d, "rr")
        assert fm.first_failures == oracle.first_failures
        assert fm.excluded_faults == oracle.excluded_faults
        assert fm.n == oracle.n
        if oracle.m == 0:
            with pytest.raises(NoFaults):
                apfd(fm)
        else:
            assert apfd(fm) == apfd(oracle)

    @given(
        n=st.integers(min_value=1, max_value=50),
        data=st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounds_are_inclusive(self, n, data):
        m = data.draw(st.integers(min_value=1, max_value=6))
        tfs = data.draw(
            st.lists(st.integers(min_value=1, max_value=n), min_size=m, max_size=m)
        )
        fm = FaultMatrix(n=n, first_failures={f"F{j}": tf for j, tf in enumerate(tfs)}, excluded_faults=())
        value = apfd(fm)
        assert 1 / (2 * n) - 1e-12 <= value <= 1 - 1 / (2 * n) + 1e-12

    @given(
        n=st.integers(min_value=2, max_value=40),
        data=st.data(),
    )
    @settings(max_examples=150, deadline=None)
    def test_strictly_decreasing_in_any_single_first_failure(self, n, data):
        m = data.draw(st.integers(min_value=1, max_value=4))
        tfs = [data.draw(st.integers(min_value=1, max_value=n)) for _ in range(m)]
        bump = data.draw(st.integers(min_value=0, max_value=m - 1))
        if tfs[bump] == n:
            tfs[bump] -= 1
        base = FaultMatrix(n=n, first_failures={f"F{j}": tf for j, tf in enumerate(tfs)}, excluded_faults=())
        later = dict(base.first_failures)
        later[f"F{bump}"] += 1
        worse = FaultMatrix(n=n, first_failures=later, excluded_faults=())
        assert apfd(worse) < apfd(base)

    @given(
        n=st.integers(min_value=1, max_value=9),
        data=st.data(),
    )
    @settings(max_examples=150, deadline=None)
    def test_reversing_a_single_revealer_ordering_complements_the_score(self, n, data):
        m = data.draw(st.integers(min_value=1, max_value=n))
        revealer_idxs = data.draw(
            st.lists(st.integers(min_value=0, max_value=n - 1), min_size=m, max_size=m, unique=True)
        )
        d = _dataset_with_faults(n, {f"F{j}": [i] for j, i in enumerate(revealer_idxs)})
        ordering = [f"T{i}" for i in range(n)]
        forward = apfd(build_fault_matrix(ordering, d, "rr"))
        backward = apfd(build_fault_matrix(list(reversed(ordering)), d, "rr"))
        assert forward + backward == pytest.approx(1.0, abs=1e-12)


class TestTestsWithHistory:
    def test_dataset_order_and_release_filter(self):
        tests = (
            make_test("TB", history=(HistoryEntry("r2", True, "pass"),)),
            make_test("TA", history=(HistoryEntry("r1", True, "pass"),)),
            make_test("TC", history=(HistoryEntry("r1", False, "skipped"),)),
        )
        d = make_dataset(tests)
        assert history_pool(d, "r1") == ["TA", "TC"]
        assert history_pool(d, "r2") == ["TB"]


class TestRandomBaseline:
    def test_single_trial_matches_reconstructed_permutation(self):
        d = _dataset_with_faults(7, {"F1": [2], "F2": [5, 6]})
        seed = 4242
        pool = history_pool(d, "rr")
        rng = SplitMix64(seed)
        positions = list(range(len(pool)))
        rng.shuffle(positions)
        ordering = [""] * len(pool)
        for i, tid in enumerate(pool):
            ordering[positions[i]] = tid
        expected = apfd(build_fault_matrix(ordering, d, "rr"))
        assert random_baseline(d, "rr", trials=1, seed=seed) == expected

    def test_same_seed_reproduces_same_mean(self):
        d = _dataset_with_faults(6, {"F1": [4]})
        a = random_baseline(d, "rr", trials=50, seed=9)
        b = random_baseline(d, "rr", trials=50, seed=9)
        assert a == b

    def test_different_seeds_diverge(self):
        d = _dataset_with_faults(25, {"F1": [12]})
        means = {random_baseline(d, "rr", trials=1, seed=s) for s in range(8)}
        assert len(means) > 1

    def test_single_revealer_mean_near_half(self):
        d = _dataset_with_faults(6, {"F1": [2]})
        mean = random_baseline(d, "rr", trials=1000, seed=7)
        assert 0.45 <= mean <= 0.55

    def test_multi_revealer_mean_matches_order_statistic(self):
        # three revealers among six tests: E[min rank] = (6+1)/(3+1) = 1.75
        d = _dataset_with_faults(6, {"F1": [0, 2, 4]})
        mean = random_baseline(d, "rr", trials=2000, seed=11)
        expected = 1 - 1.75 / 6 + 1 / 12
        assert mean == pytest.approx(expected, abs=0.03)
        assert mean > 0.5

    def test_no_faults_rejected(self):
        d = _dataset_with_faults(3, {})
        with pytest.raises(NoFaults):
            random_baseline(d, "rr", trials=10, seed=1)

    def test_unknown_release_rejected(self):
        d = _dataset_with_faults(3, {"F1": [0]})
        with pytest.raises(UnknownRelease):
            random_baseline(d, "zz", trials=10, seed=1)

    def test_zero_trials_rejected(self):
        d = _dataset_with_faults(3, {"F1": [0]})
        with pytest.raises(ValueError):
            random_baseline(d, "rr", trials=0, seed=1)


def _labeled_history_dataset():
    """Four releases; verdict patterns chosen to exercise the label window."""
    tests = (
        make_test(
            "T_oldfail",
            history=(
                HistoryEntry("r1", True, "fail", ("D1",)),
                HistoryEntry("r2", True, "pass"),
                HistoryEntry("r3", True, "pass"),
            ),
        ),
        make_test(
            "T_recentfail",
            history=(
                HistoryEntry("r1", True, "pass"),
                HistoryEntry("r3", True, "fail", ("D2",)),
            ),
        ),
        make_test(
            "T_passing",
            history=(
                HistoryEntry("r2", True, "pass"),
                HistoryEntry("r3", True, "pass"),
            ),
        ),
        make_test(
            "T_skipped",
            history=(
                HistoryEntry("r2", False, "skipped"),
                HistoryEntry("r3", False, "skipped"),
            ),
        ),
        make_test("T_nohistory"),
    )
    return make_dataset(tests, releases=("r1", "r2", "r3", "r4"))


class TestDeriveLabels:
    def test_window_covers_two_releases_before_target(self):
        d = _labeled_history_dataset()
        labels = derive_labels(d, "r4")
        by_id = {e.test_id: e for e in labels.entries}
        # r1's failure fell out of the window; r2/r3 passes make it out
        assert by_id["T_oldfail"].label == LABEL_OUT
        assert by_id["T_recentfail"].label == LABEL_IN
        assert by_id["T_passing"].label == LABEL_OUT
        assert "T_skipped" not in by_id
        assert "T_nohistory" not in by_id

    def test_failure_beats_pass_inside_the_window(self):
        d = _labeled_history_dataset()
        labels = derive_labels(d, "r3")
        by_id = {e.test_id: e.label for e in labels.entries}
        # window {r1, r2}: the r1 failure is visible again
        assert by_id["T_oldfail"] == LABEL_IN
        assert by_id["T_recentfail"] == LABEL_OUT

    def test_all_entries_carry_the_training_role(self):
        d = _labeled_history_dataset()
        labels = derive_labels(d, "r4")
        assert labels.entries
        assert all(e.role == ROLE_TRAINING for e in labels.entries)

    def test_first_release_has_an_empty_window(self):
        d = _labeled_history_dataset()
        assert derive_labels(d, "r1").entries == ()

    def test_window_override_narrows_the_lookback(self):
        d = _labeled_history_dataset()
        labels = derive_labels(d, "r3", window=1)
        by_id = {e.test_id: e.label for e in labels.entries}
        # only r2 is visible, where T_oldfail passed
        assert by_id["T_oldfail"] == LABEL_OUT
        assert "T_recentfail" not in by_id

    def test_unknown_release_rejected(self):
        d = _labeled_history_dataset()
        with pytest.raises(UnknownRelease):
            derive_labels(d, "r9")


_DESC_ONLY = FeatureScope(target_release="r3", deselected_groups=frozenset(NON_TEXT_GROUPS))


class TestBacktest:
    def test_ranks_risky_text_first_on_the_evaluated_release(self):
        d = backtest_dataset()
        report = backtest(d, _DESC_ONLY, TrainConfig(), ["r3"])
        assert report.skipped == ()
        (result,) = report.per_release
        assert result.release == "r3"
        assert result.n == 4
        assert result.m == 1
        assert result.excluded_fault_count == 0
        # the failing crash test must precede both calm tests: TF <= 2
        assert result.apfd >= 1 - 2 / 4 + 1 / 8 - 1e-12

    def test_matches_manually_driven_pipeline(self):
        d = backtest_dataset()
        report = backtest(d, _DESC_ONLY, TrainConfig(), ["r3"])
        labels = derive_labels(d, "r3")
        matrix = extract_features(d, _DESC_ONLY)
        model = train(matrix, labels, TrainConfig())
        pool = set(history_pool(d, "r3"))
        scored = sorted(
            ((score(model, row), tid) for tid, row in zip(matrix.test_ids, matrix.rows) if tid in pool),
            key=lambda pair: (-pair[0], pair[1]),
        )
        expected = apfd(build_fault_matrix([tid for _, tid in scored], d, "r3"))
        assert report.per_release[0].apfd == expected

    def test_release_without_window_labels_is_skipped(self):
        d = backtest_dataset()
        report = backtest(d, _DESC_ONLY, TrainConfig(), ["r1"])
        assert report.empty
        assert len(report.skipped) == 1
        release, reason = report.skipped[0]
        assert release == "r1"
        assert reason.startswith("DegenerateLabels:")

    def test_release_revealing_no_faults_is_skipped(self):
        tests = (
            make_test(
                "T_in",
                description="crash overflow",
                history=(
                    HistoryEntry("r1", True, "fail", ("D1",)),
                    HistoryEntry("r2", True, "fail"),
                ),
            ),
            make_test(
                "T_out",
                description="calm steady",
                history=(
                    HistoryEntry("r1", True, "pass"),
                    HistoryEntry("r2", True, "pass"),
                ),
            ),
        )
        d = make_dataset(tests, releases=("r1", "r2"))
        scope = FeatureScope(target_release="r2", deselected_groups=frozenset(NON_TEXT_GROUPS))
        report = backtest(d, scope, TrainConfig(), ["r2"])
        assert report.empty
        release, reason = report.skipped[0]
        assert release == "r2"
        assert reason.startswith("NoFaults:")

    def test_mixed_run_keeps_results_and_skips_apart(self):
        d = backtest_dataset()
        report = backtest(d, _DESC_ONLY, TrainConfig(), ["r1", "r3"])
        assert [r.release for r in report.per_release] == ["r3"]
        assert [rel for rel, _ in report.skipped] == ["r1"]
        assert not report.empty
        assert report.mean_apfd == report.per_release[0].apfd

    def test_empty_release_list_gives_empty_report(self):
        d = backtest_dataset()
        report = backtest(d, _DESC_ONLY, TrainConfig(), [])
        assert report.empty
        assert report.skipped == ()
        with pytest.raises(NoFaults):
            _ = report.mean_apfd
        assert report.to_dict() == {"per_release": [], "mean_apfd": None, "skipped": [], "empty": True}

    def test_unknown_release_rejected_before_any_work(self):
        d = backtest_dataset()
        with pytest.raises(UnknownRelease, match="zz"):
            backtest(d, _DESC_ONLY, TrainConfig(), ["r3", "zz"])

    def test_unknown_labeling_rule_rejected(self):
        d = backtest_dataset()
        with pytest.raises(ValueError):
            backtest(d, _DESC_ONLY, TrainConfig(), ["r3"], labeling_rule="astrology")

    def test_report_serialization_round_trip_fields(self):
        d = backtest_dataset()
        report = backtest(d, _DESC_ONLY, TrainConfig(), ["r1", "r3"])
        doc = report.to_dict()
        assert doc["empty"] is False
        assert doc["mean_apfd"] == pytest.approx(report.mean_apfd)
        assert doc["per_release"][0]["release"] == "r3"
        assert doc["skipped"] == [{"release": "r1", "reason": report.skipped[0][1]}]
