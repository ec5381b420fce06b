"""Feature extraction with a human-scopable catalog.

Six fixed feature groups are derived from the dataset: tf-idf text over
title+description, three link/change counters, the historical fail rate,
and a one-hot tag block. The user narrows this catalog by deselecting
groups; deselected groups contribute no columns. All outputs are
deterministic: columns are ordered by group, then lexicographically
within a group.

The text pipeline is fixed for reproducibility: lowercase, split on every
non-alphanumeric character, drop tokens shorter than 2 characters,
tf(t, doc) = count/token_count (0 for an empty doc),
idf(t) = ln((1+N)/(1+df)) + 1 with N the number of tests, cell = tf*idf.
No stop words, no stemming: the corpus language is not assumed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import log

from .datamodel import Dataset, TestCase
from .errors import ScopeMismatch, UnknownRelease

GROUP_DESC_TEXT = "desc_text"
GROUP_N_REQUIREMENTS = "n_requirements"
GROUP_N_DEFECTS = "n_defects"
GROUP_N_CHANGED_REQUIREMENTS = "n_changed_requirements"
GROUP_HIST_FAIL_RATE = "hist_fail_rate"
GROUP_TAGS = "tags"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class FeatureGroup:
    name: str
    kind: str  # "text_tfidf" | "numeric" | "categorical"
    source: str


@dataclass(frozen=True)
class FeatureCatalog:
    groups: tuple[FeatureGroup, ...]

    def names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.groups)

    def to_list(self) -> list[dict]:
        return [{"name": g.name, "kind": g.kind, "source": g.source} for g in self.groups]


@dataclass(frozen=True)
class FeatureScope:
    """The user's feature selection: everything minus deselected_groups."""

    target_release: str
    deselected_groups: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "target_release": self.target_release,
            "deselected_groups": sorted(self.deselected_groups),
        }


@dataclass(frozen=True)
class FeatureMatrix:
    """Sparse per-test feature vectors plus everything needed to featurize
    unseen tests the same way: the frozen text vocabulary (token -> column,
    document frequency), raw min/max per numeric column, and the scope.
    """

    test_ids: tuple[str, ...]
    column_names: tuple[str, ...]
    rows: tuple[dict[int, float], ...]
    vocabulary: dict[str, dict[str, tuple[int, int]]]
    numeric_bounds: dict[str, tuple[float, float]]
    n_docs: int
    scope: FeatureScope


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop tokens under 2 chars."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


def build_catalog(d: Dataset, target_release: str) -> FeatureCatalog:
    """The fixed six-group catalog offered for scoping at a target release."""
    if target_release not in d.releases:
        raise UnknownRelease(f"release '{target_release}' not in dataset")
    return FeatureCatalog(
        groups=(
            FeatureGroup(GROUP_DESC_TEXT, "text_tfidf", "title, description"),
            FeatureGroup(GROUP_N_REQUIREMENTS, "numeric", "requirement_ids"),
            FeatureGroup(GROUP_N_DEFECTS, "numeric", "defect_ids"),
            FeatureGroup(GROUP_N_CHANGED_REQUIREMENTS, "numeric", "requirement_ids, changed_in_releases"),
            FeatureGroup(GROUP_HIST_FAIL_RATE, "numeric", "history"),
            FeatureGroup(GROUP_TAGS, "categorical", "tags"),
        )
    )


def validate_scope(catalog: FeatureCatalog, scope: FeatureScope) -> None:
    names = set(catalog.names())
    unknown = scope.deselected_groups - names
    if unknown:
        raise ScopeMismatch(f"deselected groups not in catalog: {sorted(unknown)}")
    if not (names - scope.deselected_groups):
        raise ScopeMismatch("scope deselects every feature group")


def _idf(n_docs: int, df: int) -> float:
    return log((1 + n_docs) / (1 + df)) + 1.0


def _numeric_raw(group: str, t: TestCase, d: Dataset, target_release: str) -> float:
    if group == GROUP_N_REQUIREMENTS:
        return float(len(t.requirement_ids))
    if group == GROUP_N_DEFECTS:
        return float(len(t.defect_ids))
    if group == GROUP_N_CHANGED_REQUIREMENTS:
        by_id = {r.id: r for r in d.requirements}
        return float(
            sum(
                1
                for rid in t.requirement_ids
                if rid in by_id and target_release in by_id[rid].changed_in_releases
            )
        )
    if group == GROUP_HIST_FAIL_RATE:
        order = d.release_index()
        cutoff = order.get(target_release)
        executions = 0
        fails = 0
        for h in t.history:
            idx = order.get(h.release)
            if idx is None or cutoff is None or idx >= cutoff:
                continue
            if h.executed:
                executions += 1
                if h.verdict == "fail":
                    fails += 1
        return fails / executions if executions else 0.0
    raise ValueError(f"not a numeric group: {group}")


def extract_features(d: Dataset, scope: FeatureScope) -> FeatureMatrix:
    """Featurize every test in d under the given scope.

    Row order follows d.tests. Numeric columns are min-max scaled into
    [0,1] over the matrix (constant columns scale to 0). Text and tag
    vocabularies are frozen into the result for inference-time use.
    """
    catalog = build_catalog(d, scope.target_release)
    validate_scope(catalog, scope)
    selected = [g for g in catalog.groups if g.name not in scope.deselected_groups]

    n = len(d.tests)
    column_names: list[str] = []
    rows: list[dict[int, float]] = [dict() for _ in range(n)]
    vocabulary: dict[str, dict[str, tuple[int, int]]] = {}
    numeric_bounds: dict[str, tuple[float, float]] = {}

    docs = [tokenize(f"{t.title} {t.description}") for t in d.tests]

    for group in selected:
        if group.kind == "text_tfidf":
            df: dict[str, int] = {}
            for tokens in docs:
                for tok in set(tokens):
                    df[tok] = df.get(tok, 0) + 1
            vocab: dict[str, tuple[int, int]] = {}
            for tok in sorted(df):
                col = len(column_names)
                column_names.append(f"{group.name}:{tok}")
                vocab[tok] = (col, df[tok])
            vocabulary[group.name] = vocab
            for i, tokens in enumerate(docs):
                if not tokens:
                    continue
                counts: dict[str, int] = {}
                for tok in tokens:
                    counts[tok] = counts.get(tok, 0) + 1
                denom = len(tokens)
                for tok, c in counts.items():
                    col, dfreq = vocab[tok]
                    rows[i][col] = (c / denom) * _idf(n, dfreq)
        elif group.kind == "numeric":
            col = len(column_names)
            column_names.append(group.name)
            raw = [_numeric_raw(group.name, t, d, scope.target_release) for t in d.tests]
            lo = min(raw, default=0.0)
            hi = max(raw, default=0.0)
            numeric_bounds[group.name] = (lo, hi)
            span = hi - lo
            for i, v in enumerate(raw):
                scaled = (v - lo) / span if span > 0 else 0.0
                if scaled != 0.0:
                    rows[i][col] = scaled
        else:  # categorical one-hot over the tag vocabulary
            tags = sorted({tag for t in d.tests for tag in t.tags})
            vocab = {}
            for tag in tags:
                col = len(column_names)
                column_names.append(f"{group.name}:{tag}")
                vocab[tag] = (col, sum(1 for t in d.tests if tag in t.tags))
            vocabulary[group.name] = vocab
            for i, t in enumerate(d.tests):
                for tag in t.tags:
                    if tag in vocab:
                        rows[i][vocab[tag][0]] = 1.0

    return FeatureMatrix(
        test_ids=tuple(t.id for t in d.tests),
        column_names=tuple(column_names),
        rows=tuple(rows),
        vocabulary=vocabulary,
        numeric_bounds=numeric_bounds,
        n_docs=n,
        scope=scope,
    )


def vectorize_unseen(
    matrix: FeatureMatrix, t: TestCase, d: Dataset, scope: FeatureScope
) -> dict[int, float]:
    """Featurize one test against a frozen matrix.

    Tokens and tags absent from the stored vocabulary are ignored; numeric
    values are clamped to the stored raw min/max before scaling, so the
    vector always aligns with matrix.column_names.
    """
    if scope != matrix.scope:
        raise ScopeMismatch("scope differs from the one the matrix was built with")

    vec: dict[int, float] = {}

    text_vocab = matrix.vocabulary.get(GROUP_DESC_TEXT)
    if text_vocab is not None:
        tokens = tokenize(f"{t.title} {t.description}")
        if tokens:
            counts: dict[str, int] = {}
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
            denom = len(tokens)
            for tok, c in counts.items():
                hit = text_vocab.get(tok)
                if hit is not None:
                    col, dfreq = hit
                    vec[col] = (c / denom) * _idf(matrix.n_docs, dfreq)

    col_index = {name: i for i, name in enumerate(matrix.column_names)}
    for group, (lo, hi) in matrix.numeric_bounds.items():
        raw = _numeric_raw(group, t, d, scope.target_release)
        raw = min(max(raw, lo), hi)
        span = hi - lo
        scaled = (raw - lo) / span if span > 0 else 0.0
        if scaled != 0.0:
            vec[col_index[group]] = scaled

    tag_vocab = matrix.vocabulary.get(GROUP_TAGS)
    if tag_vocab is not None:
        for tag in t.tags:
            hit = tag_vocab.get(tag)
            if hit is not None:
                vec[hit[0]] = 1.0

    return vec
