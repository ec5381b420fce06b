"""Synthetic corpora with a planted textual failure signal.

The planted corpus wires failure probability to description content: a
"risky" vocabulary marks tests covering fragile, frequently changed
requirements, and a test's chance of failing any release climbs steeply
with the number of risky tokens in its description. Failures are drawn
independently per release, every revealed defect is revealed by exactly
one test, and all ids are referentially consistent, so the corpus passes
validation and supports ranking, adequacy and APFD experiments end to
end. The shuffled variant permutes descriptions across tests, destroying
the text signal while keeping everything else identical - a chance-level
control corpus.

All generation is driven by the deterministic generator in `rng`, so a
seed pins every token, link and verdict. The corruption helpers break a
healthy dataset in one specific, validator-detectable way each.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .datamodel import Dataset, Defect, HistoryEntry, Requirement, TestCase
from .rng import SplitMix64

DEFAULT_CORPUS_SEED = 104729

DESCRIPTION_TOKENS = 12
RISKY_VOCAB_SIZE = 30
SAFE_VOCAB_SIZE = 40
# descriptions come from a small pool of per-level templates and titles
# from one shared pool, so text identifies a risk level but never a
# single test; a model cannot memorize individual training tests
TEMPLATES_PER_LEVEL = {0: 6, 1: 2, 2: 2, 3: 2, 4: 2, 5: 2, 6: 2}
TITLE_POOL_SIZE = 10
EXECUTION_RATE = 0.97

# failure probability by risky-token count; steep so failures concentrate
# at the top of a ranking that recovers the token count
FAIL_RATE = {0: 0.005, 1: 0.01, 2: 0.02, 3: 0.05, 4: 0.15, 5: 0.45, 6: 0.85}

FRAGILE_REQUIREMENTS = 12
STABLE_REQUIREMENTS = 28

TAG_POOL = ("ui", "api", "batch", "nightly", "smoke")

_SYLLABLES = (
    "ba", "do", "fi", "ka", "lu", "mo", "ne", "pi", "ra", "su",
    "ta", "vo", "wi", "zu", "ge", "hy",
)


@dataclass(frozen=True)
class SyntheticCorpus:
    dataset: Dataset
    risk_levels: dict[str, int]  # test id -> 0 (safe) through 6
    risky_vocabulary: tuple[str, ...]


def _words(rng: SplitMix64, count: int, taken: set[str]) -> list[str]:
    """Distinct pseudo-words of three syllables, avoiding `taken`."""
    words: list[str] = []
    while len(words) < count:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def planted_corpus(
    seed: int = DEFAULT_CORPUS_SEED,
    n_risky: int = 200,
    n_safe: int = 200,
    n_releases: int = 6,
) -> SyntheticCorpus:
    """Generate the planted-signal corpus (400 tests, 6 releases by default)."""
    rng = SplitMix64(seed)
    releases = tuple(f"r{k + 1}" for k in range(n_releases))

    taken: set[str] = set()
    risky_vocab = _words(rng, RISKY_VOCAB_SIZE, taken)
    safe_vocab = _words(rng, SAFE_VOCAB_SIZE, taken)

    fragile = [f"REQ-{j:02d}" for j in range(FRAGILE_REQUIREMENTS)]
    stable = [
        f"REQ-{j:02d}"
        for j in range(FRAGILE_REQUIREMENTS, FRAGILE_REQUIREMENTS + STABLE_REQUIREMENTS)
    ]
    requirements = []
    for rid in fragile:
        requirements.append(
            Requirement(
                id=rid,
                title=" ".join(rng.sample(safe_vocab, 2)),
                description=" ".join(rng.sample(safe_vocab, 5)),
                changed_in_releases=releases,
            )
        )
    for rid in stable:
        changed = (rng.choice(releases),) if rng.random() < 0.5 else ()
        requirements.append(
            Requirement(
                id=rid,
                title=" ".join(rng.sample(safe_vocab, 2)),
                description=" ".join(rng.sample(safe_vocab, 5)),
                changed_in_releases=changed,
            )
        )

    templates: dict[int, list[str]] = {}
    for level, count in TEMPLATES_PER_LEVEL.items():
        pool: list[str] = []
        for _ in range(count):
            tokens = rng.sample(risky_vocab, level) + rng.sample(
                safe_vocab, DESCRIPTION_TOKENS - level
            )
            rng.shuffle(tokens)
            pool.append(" ".join(tokens))
        templates[level] = pool
    title_pool = []
    for _ in range(TITLE_POOL_SIZE):
        words = rng.sample(safe_vocab, 2)
        title_pool.append(f"{words[0].capitalize()} {words[1]}")

    n_tests = n_risky + n_safe
    risk_levels: dict[str, int] = {}
    tests: list[TestCase] = []
    defects: list[Defect] = []

    for i in range(n_tests):
        tid = f"T{i:04d}"
        risk = 1 + i % 6 if i < n_risky else 0
        risk_levels[tid] = risk

        description = rng.choice(templates[risk])
        title = rng.choice(title_pool)

        if risk > 0:
            req_ids = rng.sample(fragile, min(len(fragile), 1 + risk // 3))
            if rng.random() < 0.5:
                req_ids = req_ids + rng.sample(stable, 1)
        else:
            req_ids = rng.sample(stable, 1 + rng.below(3))

        tags = () if rng.random() < 0.3 else tuple(rng.sample(TAG_POOL, 1 + rng.below(2)))

        history: list[HistoryEntry] = []
        defect_ids: list[str] = []
        p_fail = FAIL_RATE[risk]
        for release in releases:
            executed = rng.random() < EXECUTION_RATE
            if not executed:
                history.append(HistoryEntry(release, False, "skipped"))
                continue
            if rng.random() < p_fail:
                did = f"D-{release}-{tid}"
                defects.append(
                    Defect(
                        id=did,
                        title=f"Failure of {tid} at {release}",
                        severity=rng.randint(1, 5),
                        found_in_release=release,
                    )
                )
                defect_ids.append(did)
                history.append(HistoryEntry(release, True, "fail", (did,)))
            else:
                history.append(HistoryEntry(release, True, "pass"))

        tests.append(
            TestCase(
                id=tid,
                title=title,
                description=description,
                requirement_ids=tuple(req_ids),
                defect_ids=tuple(defect_ids),
                tags=tags,
                history=tuple(history),
            )
        )

    dataset = Dataset(
        schema_version=1,
        project="synthetic-planted",
        releases=releases,
        tests=tuple(tests),
        requirements=tuple(requirements),
        defects=tuple(defects),
    )
    return SyntheticCorpus(
        dataset=dataset, risk_levels=risk_levels, risky_vocabulary=tuple(risky_vocab)
    )


def shuffled_corpus(seed: int = DEFAULT_CORPUS_SEED) -> SyntheticCorpus:
    """The planted corpus with descriptions permuted across tests.

    Failure behavior, history, links and titles stay put; only the
    description text moves, so no textual signal survives.
    """
    base = planted_corpus(seed)
    rng = SplitMix64(seed ^ 0xD1CE)
    descriptions = [t.description for t in base.dataset.tests]
    rng.shuffle(descriptions)
    shuffled_tests = tuple(
        replace(t, description=desc) for t, desc in zip(base.dataset.tests, descriptions)
    )
    return SyntheticCorpus(
        dataset=replace(base.dataset, tests=shuffled_tests, project="synthetic-shuffled"),
        risk_levels=base.risk_levels,
        risky_vocabulary=base.risky_vocabulary,
    )


def _corrupt_dup_id(d: Dataset) -> Dataset:
    if len(d.tests) < 2:
        raise ValueError("need two tests to duplicate an id")
    clone = replace(d.tests[1], id=d.tests[0].id)
    return replace(d, tests=(d.tests[0], clone) + d.tests[2:])


def _corrupt_dangling_ref(d: Dataset) -> Dataset:
    if not d.tests:
        raise ValueError("need a test to attach a dangling reference")
    first = d.tests[0]
    broken = replace(first, requirement_ids=first.requirement_ids + ("REQ-MISSING",))
    return replace(d, tests=(broken,) + d.tests[1:])


def _corrupt_empty_suite(d: Dataset) -> Dataset:
    return replace(d, tests=())


def _corrupt_mostly_empty_text(d: Dataset) -> Dataset:
    blank = len(d.tests) // 2 + 1  # strictly more than half
    tests = tuple(
        replace(t, description="") if i < blank else t for i, t in enumerate(d.tests)
    )
    return replace(d, tests=tests)


def _corrupt_contradictory_history(d: Dataset) -> Dataset:
    for i, t in enumerate(d.tests):
        if t.history:
            h = t.history[0]
            broken = replace(
                t,
                history=(HistoryEntry(h.release, False, "fail", h.revealed_defect_ids),)
                + t.history[1:],
            )
            return replace(d, tests=d.tests[:i] + (broken,) + d.tests[i + 1 :])
    raise ValueError("no test with history to contradict")


CORRUPTION_KINDS = {
    "DUP_ID": _corrupt_dup_id,
    "DANGLING_REF": _corrupt_dangling_ref,
    "EMPTY_SUITE": _corrupt_empty_suite,
    "MOSTLY_EMPTY_TEXT": _corrupt_mostly_empty_text,
    "CONTRADICTORY_HISTORY": _corrupt_contradictory_history,
}


def inject_corruption(d: Dataset, kind: str) -> Dataset:
    """Return a copy of d broken in exactly one validator-detectable way."""
    try:
        breaker = CORRUPTION_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown corruption kind '{kind}'") from None
    return breaker(d)
