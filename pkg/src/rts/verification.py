"""Randomized verification draws, adequacy assessment, and the cutoff.

The human labels a random sample of ranked tests; this module compares
those labels against the model's ordering. The mixing of the two label
classes is quantified as pair overlap: the fraction of (in, out) pairs
where the out-labeled test scores at least as high as the in-labeled one
(score ties count as overlap). Zero overlap means the classes are fully
separated and yields the decision interval, the rank gap between the
lowest-ranked in-dot and the highest-ranked out-dot, inside which the
human places the cutoff.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    CutoffOutsideInterval,
    DegenerateLabels,
    EmptySuite,
    InadequateRanking,
    UnknownTestId,
)
from .ranker import LABEL_IN, LABEL_OUT, LabelSet, RankedSuite
from .rng import SplitMix64

TAU_ADEQUATE = 0.0
TAU_MARGINAL = 0.1

VERDICT_ADEQUATE = "adequate"
VERDICT_MARGINAL = "marginal"
VERDICT_INADEQUATE = "inadequate"

SMALL_CLASS_SIZE = 5


@dataclass(frozen=True)
class VerificationDraw:
    test_ids: tuple[str, ...]
    seed: int
    requested_k: int

    def to_dict(self) -> dict:
        return {
            "test_ids": list(self.test_ids),
            "seed": self.seed,
            "requested_k": self.requested_k,
        }


@dataclass(frozen=True)
class AdequacyReport:
    pair_overlap: float
    pair_auc: float
    separated: bool
    interval_d: tuple[int, int] | None  # (low_rank, high_rank), 1-based
    verdict: str
    small_sample_warning: bool

    def to_dict(self) -> dict:
        return {
            "pair_overlap": self.pair_overlap,
            "pair_auc": self.pair_auc,
            "separated": self.separated,
            "interval_d": (
                {"low_rank": self.interval_d[0], "high_rank": self.interval_d[1]}
                if self.interval_d
                else None
            ),
            "verdict": self.verdict,
            "small_sample_warning": self.small_sample_warning,
        }

    @staticmethod
    def from_dict(raw: Mapping) -> "AdequacyReport":
        interval = raw.get("interval_d")
        return AdequacyReport(
            pair_overlap=float(raw["pair_overlap"]),
            pair_auc=float(raw["pair_auc"]),
            separated=bool(raw["separated"]),
            interval_d=(
                (int(interval["low_rank"]), int(interval["high_rank"])) if interval else None
            ),
            verdict=raw["verdict"],
            small_sample_warning=bool(raw["small_sample_warning"]),
        )


@dataclass(frozen=True)
class SelectionResult:
    cutoff_rank: int
    t_e_test_id: str
    selected_ids: tuple[str, ...]
    excluded_ids: tuple[str, ...]
    override_used: bool

    def to_dict(self) -> dict:
        return {
            "cutoff_rank": self.cutoff_rank,
            "t_e_test_id": self.t_e_test_id,
            "selected_ids": list(self.selected_ids),
            "excluded_ids": list(self.excluded_ids),
            "override_used": self.override_used,
        }

    @staticmethod
    def from_dict(raw: Mapping) -> "SelectionResult":
        return SelectionResult(
            cutoff_rank=int(raw["cutoff_rank"]),
            t_e_test_id=raw["t_e_test_id"],
            selected_ids=tuple(raw["selected_ids"]),
            excluded_ids=tuple(raw["excluded_ids"]),
            override_used=bool(raw["override_used"]),
        )


def draw_verification(
    suite: RankedSuite,
    requested_k: int,
    seed: int,
    exclude_ids: frozenset[str] = frozenset(),
) -> VerificationDraw:
    """Uniform sample without replacement from the ranked suite.

    Driven by a documented 64-bit generator (see rng module), so the seed
    fully reproduces the draw. Ids in exclude_ids (already labeled in an
    earlier round) never appear again. When requested_k covers the whole
    remaining pool, the pool is returned in suite order.
    """
    if requested_k < 1:
        raise ValueError("requested_k must be at least 1")
    pool = [tid for tid in suite.ids() if tid not in exclude_ids]
    if not pool:
        raise EmptySuite("no unlabeled tests left to draw from")
    if requested_k >= len(pool):
        return VerificationDraw(test_ids=tuple(pool), seed=seed, requested_k=requested_k)
    rng = SplitMix64(seed)
    drawn = rng.sample(pool, requested_k)
    return VerificationDraw(test_ids=tuple(drawn), seed=seed, requested_k=requested_k)


def overlap_fraction(in_scores: Sequence[float], out_scores: Sequence[float]) -> float:
    """Fraction of (in, out) pairs with score(out) >= score(in).

    Sort-and-bisect, O((a+b) log b); the brute-force double loop is kept
    as an independent oracle in the test suite.
    """
    if not in_scores or not out_scores:
        raise DegenerateLabels("both classes needed to compute pair overlap")
    outs = sorted(out_scores)
    total = len(in_scores) * len(outs)
    overlapping = sum(len(outs) - bisect_left(outs, s) for s in in_scores)
    return overlapping / total


def assess_adequacy(
    suite: RankedSuite,
    labels: LabelSet,
    tau_adequate: float = TAU_ADEQUATE,
    tau_marginal: float = TAU_MARGINAL,
) -> AdequacyReport:
    """Compare verification labels against the ranking.

    Reads only suite scores and ranks; any strictly monotone rescoring
    yields the same report. The decision interval is present only when
    the classes are fully separated (zero overlap).
    """
    entries = labels.verification()
    by_id = suite.by_id()
    for e in entries:
        if e.test_id not in by_id:
            raise UnknownTestId(f"verification label for test '{e.test_id}' not in suite")
    ins = [by_id[e.test_id] for e in entries if e.label == LABEL_IN]
    outs = [by_id[e.test_id] for e in entries if e.label == LABEL_OUT]
    if not ins or not outs:
        raise DegenerateLabels(
            f"need both verification classes, got {len(ins)} in / {len(outs)} out"
        )

    pair_overlap = overlap_fraction([e.score for e in ins], [e.score for e in outs])
    separated = pair_overlap == 0.0
    interval = None
    if separated:
        low_rank = max(e.rank for e in ins)
        high_rank = min(e.rank for e in outs)
        interval = (low_rank, high_rank)

    if pair_overlap <= tau_adequate:
        verdict = VERDICT_ADEQUATE
    elif pair_overlap <= tau_marginal:
        verdict = VERDICT_MARGINAL
    else:
        verdict = VERDICT_INADEQUATE

    return AdequacyReport(
        pair_overlap=pair_overlap,
        pair_auc=1.0 - pair_overlap,
        separated=separated,
        interval_d=interval,
        verdict=verdict,
        small_sample_warning=len(ins) < SMALL_CLASS_SIZE or len(outs) < SMALL_CLASS_SIZE,
    )


def choose_cutoff(
    suite: RankedSuite,
    report: AdequacyReport,
    cutoff_rank: int,
    allow_override: bool = False,
) -> SelectionResult:
    """Place the cutoff: everything ranked at or above it is selected.

    Without override the cutoff must sit inside the decision interval
    (inclusive of low_rank, exclusive of high_rank) of a separated report.
    With override any in-suite rank is accepted and the result is flagged.
    """
    n = len(suite.entries)
    if not 1 <= cutoff_rank <= n:
        raise ValueError(f"cutoff_rank {cutoff_rank} outside suite of {n} tests")

    override_used = False
    if not report.separated:
        if not allow_override:
            raise InadequateRanking(
                f"ranking is not separated (verdict {report.verdict}); override required"
            )
        override_used = True
    else:
        low, high = report.interval_d
        if not low <= cutoff_rank < high:
            if not allow_override:
                raise CutoffOutsideInterval(
                    f"cutoff {cutoff_rank} outside decision interval [{low}, {high})"
                )
            override_used = True

    ids = suite.ids()
    return SelectionResult(
        cutoff_rank=cutoff_rank,
        t_e_test_id=ids[cutoff_rank - 1],
        selected_ids=ids[:cutoff_rank],
        excluded_ids=ids[cutoff_rank:],
        override_used=override_used,
    )
