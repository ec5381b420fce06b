"""Deterministic scoring model and the monotone ranked suite.

The model is L2-regularized logistic regression trained by full-batch
gradient descent from a zero start. The objective is convex and the
optimizer never randomizes, so identical inputs produce bit-identical
models. A loss increase halves the learning rate and reverts the step,
which makes the per-epoch training loss non-increasing for any data scale.

Ranking applies the trained model to every test that was not used for
training and sorts by descending score; equal scores are ordered by
ascending test id so the resulting sequence is a total order.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, exp
from typing import Mapping, Sequence, Union

import numpy as np

from .datamodel import Dataset
from .errors import DegenerateLabels, DimensionMismatch, ScopeMismatch, UnknownTestId
from .features import FeatureMatrix, FeatureScope, extract_features

LABEL_IN = "in"
LABEL_OUT = "out"
ROLE_TRAINING = "training"
ROLE_VERIFICATION = "verification"

SCORE_FLOOR = 1e-9
SCORE_CEIL = 1.0 - 1e-9


@dataclass(frozen=True)
class LabelEntry:
    test_id: str
    label: str  # "in" | "out"
    role: str  # "training" | "verification"

    def __post_init__(self) -> None:
        if self.label not in (LABEL_IN, LABEL_OUT):
            raise ValueError(f"label must be in/out, got '{self.label}'")
        if self.role not in (ROLE_TRAINING, ROLE_VERIFICATION):
            raise ValueError(f"role must be training/verification, got '{self.role}'")


@dataclass(frozen=True)
class LabelSet:
    """Cumulative human labels; one entry per test id across both roles."""

    entries: tuple[LabelEntry, ...] = ()

    def __post_init__(self) -> None:
        ids = [e.test_id for e in self.entries]
        if len(ids) != len(set(ids)):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate label for test '{dup}'")

    def training(self) -> tuple[LabelEntry, ...]:
        return tuple(e for e in self.entries if e.role == ROLE_TRAINING)

    def verification(self) -> tuple[LabelEntry, ...]:
        return tuple(e for e in self.entries if e.role == ROLE_VERIFICATION)

    def ids(self) -> set[str]:
        return {e.test_id for e in self.entries}

    def get(self, test_id: str) -> LabelEntry | None:
        for e in self.entries:
            if e.test_id == test_id:
                return e
        return None

    def with_added(self, new: Sequence[LabelEntry]) -> "LabelSet":
        """Append entries; rejects ids that are already labeled."""
        existing = self.ids()
        for e in new:
            if e.test_id in existing:
                raise ValueError(f"test '{e.test_id}' is already labeled")
            existing.add(e.test_id)
        return LabelSet(entries=self.entries + tuple(new))

    def with_relabel(self, test_id: str, label: str) -> "LabelSet":
        """Flip one existing label, keeping its role and position."""
        if self.get(test_id) is None:
            raise UnknownTestId(f"no label to change for test '{test_id}'")
        return LabelSet(
            entries=tuple(
                LabelEntry(e.test_id, label, e.role) if e.test_id == test_id else e
                for e in self.entries
            )
        )

    def to_list(self) -> list[dict]:
        return [
            {"test_id": e.test_id, "label": e.label, "role": e.role} for e in self.entries
        ]

    @staticmethod
    def from_list(raw: Sequence[Mapping]) -> "LabelSet":
        return LabelSet(
            entries=tuple(LabelEntry(r["test_id"], r["label"], r["role"]) for r in raw)
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_epochs: int = 500
    l2_lambda: float = 1e-3
    tolerance: float = 1e-7

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be a positive integer")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "l2_lambda": self.l2_lambda,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class TrainingMeta:
    epochs_run: int
    final_loss: float
    n_in: int
    n_out: int


@dataclass(frozen=True)
class RankModel:
    weights: tuple[float, ...]
    bias: float
    column_names: tuple[str, ...]
    training_meta: TrainingMeta

    def to_dict(self) -> dict:
        return {
            "column_names": list(self.column_names),
            "weights": list(self.weights),
            "bias": self.bias,
            "training_meta": {
                "epochs_run": self.training_meta.epochs_run,
                "final_loss": self.training_meta.final_loss,
                "n_in": self.training_meta.n_in,
                "n_out": self.training_meta.n_out,
            },
        }

    @staticmethod
    def from_dict(raw: Mapping) -> "RankModel":
        meta = raw["training_meta"]
        return RankModel(
            weights=tuple(float(w) for w in raw["weights"]),
            bias=float(raw["bias"]),
            column_names=tuple(raw["column_names"]),
            training_meta=TrainingMeta(
                epochs_run=int(meta["epochs_run"]),
                final_loss=float(meta["final_loss"]),
                n_in=int(meta["n_in"]),
                n_out=int(meta["n_out"]),
            ),
        )


@dataclass(frozen=True)
class RankedEntry:
    rank: int  # 1-based
    test_id: str
    score: float


@dataclass(frozen=True)
class RankedSuite:
    """The inference set sorted by non-increasing score (ties by test id)."""

    entries: tuple[RankedEntry, ...]

    def ids(self) -> tuple[str, ...]:
        return tuple(e.test_id for e in self.entries)

    def by_id(self) -> dict[str, RankedEntry]:
        return {e.test_id: e for e in self.entries}

    def to_list(self) -> list[dict]:
        return [
            {"rank": e.rank, "test_id": e.test_id, "score": round(e.score, 9)}
            for e in self.entries
        ]

    @staticmethod
    def from_list(raw: Sequence[Mapping]) -> "RankedSuite":
        return RankedSuite(
            entries=tuple(
                RankedEntry(int(r["rank"]), r["test_id"], float(r["score"])) for r in raw
            )
        )


Vector = Union[Mapping[int, float], Sequence[float], np.ndarray]


def _densify(rows: Union[Sequence[Vector], np.ndarray], n_cols: int) -> np.ndarray:
    if isinstance(rows, np.ndarray):
        if rows.ndim != 2 or rows.shape[1] != n_cols:
            raise DimensionMismatch(f"expected shape (*, {n_cols}), got {rows.shape}")
        return rows.astype(float)
    x = np.zeros((len(rows), n_cols))
    for i, row in enumerate(rows):
        if isinstance(row, Mapping):
            for col, value in row.items():
                if not 0 <= col < n_cols:
                    raise DimensionMismatch(f"column {col} outside width {n_cols}")
                x[i, col] = value
        else:
            if len(row) != n_cols:
                raise DimensionMismatch(f"row {i} has {len(row)} values, expected {n_cols}")
            x[i, :] = row
    return x


def loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    rows: Union[Sequence[Vector], np.ndarray],
    labels: Sequence[int],
    l2_lambda: float,
) -> tuple[float, np.ndarray, float]:
    """Mean logistic cross-entropy plus (l2_lambda/2)*||w||^2, with gradients.

    Labels are encoded in=1, out=0. The loss uses the softplus identity
    log(1+e^z) - y*z, which never overflows for large |z|.
    """
    w = np.asarray(weights, dtype=float)
    if len(rows) != len(labels):
        raise DimensionMismatch(f"{len(rows)} rows but {len(labels)} labels")
    if len(labels) < 1:
        raise DimensionMismatch("need at least one labeled row")
    x = _densify(rows, w.shape[0])
    y = np.asarray(labels, dtype=float)

    z = x @ w + bias
    # softplus(z) - y*z, computed as max(z,0) + log1p(exp(-|z|)) - y*z
    per_row = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - y * z
    loss = float(per_row.mean() + 0.5 * l2_lambda * float(w @ w))

    p = _sigmoid_array(z)
    residual = p - y
    gradient = x.T @ residual / len(y) + l2_lambda * w
    bias_gradient = float(residual.mean())
    return loss, gradient, bias_gradient


def _sigmoid_array(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train(matrix: FeatureMatrix, labels: LabelSet, cfg: TrainConfig = TrainConfig()) -> RankModel:
    """Fit the model on the training-role labels of `labels`.

    Full-batch gradient descent from zero weights; a step that increases
    the loss is reverted and retried with half the learning rate; stops
    when an accepted step improves the loss by less than cfg.tolerance
    or after cfg.max_epochs epochs.
    """
    training = labels.training()
    index = {tid: i for i, tid in enumerate(matrix.test_ids)}
    for e in training:
        if e.test_id not in index:
            raise UnknownTestId(f"training label for unknown test '{e.test_id}'")
    y = [1 if e.label == LABEL_IN else 0 for e in training]
    n_in = sum(y)
    n_out = len(y) - n_in
    if n_in == 0 or n_out == 0:
        raise DegenerateLabels(f"need both classes, got {n_in} in / {n_out} out")

    rows = [matrix.rows[index[e.test_id]] for e in training]
    n_cols = len(matrix.column_names)
    w = np.zeros(n_cols)
    b = 0.0
    lr = cfg.learning_rate
    loss, grad, bgrad = loss_and_gradient(w, b, rows, y, cfg.l2_lambda)

    epochs = 0
    while epochs < cfg.max_epochs:
        epochs += 1
        cand_w = w - lr * grad
        cand_b = b - lr * bgrad
        new_loss, new_grad, new_bgrad = loss_and_gradient(cand_w, cand_b, rows, y, cfg.l2_lambda)
        if new_loss > loss:
            lr *= 0.5  # revert the step, retry smaller
            continue
        improvement = loss - new_loss
        w, b, loss, grad, bgrad = cand_w, cand_b, new_loss, new_grad, new_bgrad
        if improvement < cfg.tolerance:
            break

    return RankModel(
        weights=tuple(float(v) for v in w),
        bias=float(b),
        column_names=matrix.column_names,
        training_meta=TrainingMeta(
            epochs_run=epochs, final_loss=float(loss), n_in=n_in, n_out=n_out
        ),
    )


def score(model: RankModel, v: Vector) -> float:
    """Sigmoid of the dot product, clamped into the open interval (0,1)."""
    d = len(model.weights)
    if isinstance(v, Mapping):
        z = model.bias
        for col, value in v.items():
            if not 0 <= col < d:
                raise DimensionMismatch(f"column {col} outside width {d}")
            z += model.weights[col] * value
    else:
        if len(v) != d:
            raise DimensionMismatch(f"vector has {len(v)} values, expected {d}")
        z = model.bias + float(np.asarray(v, dtype=float) @ np.asarray(model.weights))
    # branching on the sign keeps the exp argument non-positive: no overflow
    if z >= 0:
        s = 1.0 / (1.0 + exp(-z))
    else:
        ez = exp(z)
        s = ez / (1.0 + ez)
    return min(max(s, SCORE_FLOOR), SCORE_CEIL)


def rank(
    model: RankModel, d: Dataset, scope: FeatureScope, training_ids: set[str]
) -> RankedSuite:
    """Score and sort every test outside the training set."""
    matrix = extract_features(d, scope)
    if matrix.column_names != model.column_names:
        raise ScopeMismatch("model was trained with different feature columns")
    scored = [
        (score(model, row), tid)
        for tid, row in zip(matrix.test_ids, matrix.rows)
        if tid not in training_ids
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return RankedSuite(
        entries=tuple(
            RankedEntry(rank=i + 1, test_id=tid, score=s) for i, (s, tid) in enumerate(scored)
        )
    )


@dataclass(frozen=True)
class LearningCurve:
    points: tuple[tuple[float, float], ...]  # (fraction, pair-AUC)
    saturated: bool


def learning_curve(
    matrix: FeatureMatrix,
    labels: LabelSet,
    cfg: TrainConfig = TrainConfig(),
    fractions: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
) -> LearningCurve:
    """Pair-AUC on the verification labels as the training set grows.

    Each fraction trains on the first ceil(fraction*k) entries of each
    class, in label order, so successive points are nested subsets. The
    curve is saturated when the last increment gains less than 0.01 AUC.
    """
    from .verification import overlap_fraction  # deferred: verification imports this module

    training = labels.training()
    ins = [e for e in training if e.label == LABEL_IN]
    outs = [e for e in training if e.label == LABEL_OUT]
    if len(ins) < 4 or len(outs) < 4:
        raise DegenerateLabels(f"need at least 4 labels per class, got {len(ins)}/{len(outs)}")
    verification = labels.verification()
    v_in = [e.test_id for e in verification if e.label == LABEL_IN]
    v_out = [e.test_id for e in verification if e.label == LABEL_OUT]
    if not v_in or not v_out:
        raise DegenerateLabels("verification labels must cover both classes")

    index = {tid: i for i, tid in enumerate(matrix.test_ids)}
    for tid in (*v_in, *v_out):
        if tid not in index:
            raise UnknownTestId(f"verification label for unknown test '{tid}'")

    points: list[tuple[float, float]] = []
    for fraction in fractions:
        k_in = min(len(ins), ceil(fraction * len(ins)))
        k_out = min(len(outs), ceil(fraction * len(outs)))
        subset = LabelSet(entries=tuple(ins[:k_in] + outs[:k_out]))
        model = train(matrix, subset, cfg)
        in_scores = [score(model, matrix.rows[index[t]]) for t in v_in]
        out_scores = [score(model, matrix.rows[index[t]]) for t in v_out]
        auc = 1.0 - overlap_fraction(in_scores, out_scores)
        points.append((float(fraction), auc))

    saturated = len(points) >= 2 and (points[-1][1] - points[-2][1]) < 0.01
    return LearningCurve(points=tuple(points), saturated=saturated)
