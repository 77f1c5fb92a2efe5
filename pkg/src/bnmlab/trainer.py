"""Training loop and metric suite for the batch objectives.

Each step draws one labelled and one unlabelled batch, minimises

    cross_entropy(labelled) + lam * objective(unlabelled)

with plain SGD, and logs metrics on a fixed cadence. Batch sampling, metric
evaluation, and parameter init consume separate streams derived from one
seed, so swapping the objective (or setting lam to zero) can never shift
the batch sequence; paired method comparisons rely on that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .model import (
    Classifier,
    backward_ce,
    backward_objective,
    combine_grads,
    cross_entropy,
    forward,
    sgd_step,
)
from .objectives import ObjectiveKind, evaluate
from .rng import STREAM_BATCH, STREAM_EVAL, Xoshiro256pp, stream
from .scenarios import Dataset, PrototypeInit, eligible_indices, sample_batch, sample_indices

DIVERSITY_EVAL_BATCHES = 20


class TrainDivergedError(RuntimeError):
    """A loss stopped being finite; message carries the diagnostic state."""


@dataclass(frozen=True)
class TrainConfig:
    objective: ObjectiveKind = ObjectiveKind.NONE
    lam: float = 1.0
    b_labeled: int = 36
    b_unlabeled: int = 36
    lr: float = 0.1
    steps: int = 2000
    eval_every: int = 50
    seed: int = 1
    rank_tol: float = 0.1

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be non-negative")
        if self.b_labeled < 1 or self.b_unlabeled < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.steps < 1 or self.eval_every < 1:
            raise ValueError("steps and eval_every must be >= 1")
        if not 0.0 < self.rank_tol < 1.0:
            raise ValueError("rank_tol must lie in (0, 1)")


@dataclass(frozen=True)
class RunRecord:
    step: int
    loss_cls: float
    loss_obj: float
    acc_unlabeled: float
    per_class_recall: tuple[float, ...]
    diversity_ratio: float
    minority_ratio: float
    unknown_ratio: float


def category_ratio(c: Classifier, x, class_set) -> float:
    """Fraction of rows whose argmax prediction falls in class_set."""
    classes = set(class_set)
    if not classes:
        raise ValueError("class_set must be non-empty")
    preds = forward(c, x).probs.argmax(axis=1)
    return float(np.isin(preds, list(classes)).mean())


def diversity_ratio(
    c: Classifier,
    d: Dataset,
    b: int,
    n_batches: int,
    rng: Xoshiro256pp,
    exclude: tuple[int, ...] = (),
) -> float:
    """Mean distinct predicted categories over mean distinct true categories.

    Both counts come from the same n_batches unlabelled batches; argmax ties
    break toward the lowest class index.
    """
    pool = eligible_indices(d, "unlabeled", exclude)
    pred_counts, true_counts = [], []
    for _ in range(n_batches):
        idx = sample_indices(pool, b, rng)
        preds = forward(c, d.unlabeled_x[idx]).probs.argmax(axis=1)
        truth = d.unlabeled_y[idx].argmax(axis=1)
        pred_counts.append(len(set(preds.tolist())))
        true_counts.append(len(set(truth.tolist())))
    return float(np.mean(pred_counts) / np.mean(true_counts))


def _per_class_recall(preds: np.ndarray, truth: np.ndarray, n_classes: int) -> tuple[float, ...]:
    recalls = []
    for j in range(n_classes):
        mask = truth == j
        recalls.append(float((preds[mask] == j).mean()) if mask.any() else 0.0)
    return tuple(recalls)


def _make_record(
    step: int,
    loss_cls: float,
    loss_obj: float,
    c: Classifier,
    d: Dataset,
    cfg: TrainConfig,
    eval_x: np.ndarray,
    eval_true: np.ndarray,
    eval_rng: Xoshiro256pp,
    flagged: tuple[int, ...],
) -> RunRecord:
    spec = d.spec
    preds = forward(c, eval_x).probs.argmax(axis=1)
    acc = float((preds == eval_true).mean())
    recalls = _per_class_recall(preds, eval_true, spec.n_classes)
    div = diversity_ratio(c, d, cfg.b_unlabeled, DIVERSITY_EVAL_BATCHES, eval_rng, flagged)
    minority = (
        float(np.isin(preds, list(spec.minority_classes)).mean()) if spec.minority_classes else 0.0
    )
    unknown = (
        float(np.isin(preds, list(spec.unknown_classes)).mean()) if spec.unknown_classes else 0.0
    )
    return RunRecord(
        step=step,
        loss_cls=loss_cls,
        loss_obj=loss_obj,
        acc_unlabeled=acc,
        per_class_recall=recalls,
        diversity_ratio=div,
        minority_ratio=minority,
        unknown_ratio=unknown,
    )


def train(
    c0: Classifier,
    d: Dataset,
    cfg: TrainConfig,
    proto: PrototypeInit | None = None,
    on_batch: Callable[[int, np.ndarray, np.ndarray, Classifier], None] | None = None,
) -> tuple[Classifier, list[RunRecord]]:
    """Run the loop; returns the final classifier and the metric records.

    proto supplies held-out indices to keep away from training batches and
    evaluation (open-set prototype initialisation). on_batch, when given, is
    called before each update with (step, labelled idx, unlabelled idx, the
    pre-update classifier); used by audits.
    """
    if c0.n_classes != d.spec.n_classes:
        raise ValueError("classifier and dataset disagree on the class count")
    if c0.in_dim != d.labeled_x.shape[1]:
        raise ValueError("classifier and dataset disagree on the feature dimension")
    flagged = proto.flagged if proto is not None else ()

    batch_rng = stream(cfg.seed, STREAM_BATCH)
    eval_rng = stream(cfg.seed, STREAM_EVAL)
    eval_idx = eligible_indices(d, "unlabeled", flagged)
    eval_x = d.unlabeled_x[eval_idx]
    eval_true = d.unlabeled_y[eval_idx].argmax(axis=1)

    # lam == 0 means the objective term is absent from the optimised scalar,
    # so it is skipped outright; the run must be indistinguishable from an
    # objective-free run, records included.
    use_obj = cfg.objective is not ObjectiveKind.NONE and cfg.lam > 0.0

    c = c0
    records: list[RunRecord] = []
    for step in range(1, cfg.steps + 1):
        xl, yl, idx_l = sample_batch(d, "labeled", cfg.b_labeled, batch_rng, return_indices=True)
        xu, _, idx_u = sample_batch(
            d, "unlabeled", cfg.b_unlabeled, batch_rng, exclude=flagged, return_indices=True
        )
        if on_batch is not None:
            on_batch(step, idx_l, idx_u, c)

        tl = forward(c, xl)
        loss_cls = cross_entropy(tl.probs, yl)
        grads = backward_ce(c, tl, yl)
        loss_obj = 0.0
        if use_obj:
            tu = forward(c, xu)
            ev = evaluate(cfg.objective, tu.probs)
            loss_obj = ev.value
            grads = combine_grads(grads, backward_objective(c, tu, ev.grad), cfg.lam)

        if not (math.isfinite(loss_cls) and math.isfinite(loss_obj)):
            raise TrainDivergedError(
                f"non-finite loss at step {step}: loss_cls={loss_cls!r} "
                f"loss_obj={loss_obj!r} objective={cfg.objective.value} lam={cfg.lam} "
                f"lr={cfg.lr} max|w1|={np.abs(c.w1).max()!r}"
            )
        c = sgd_step(c, grads, cfg.lr)

        if step % cfg.eval_every == 0:
            records.append(
                _make_record(
                    step, loss_cls, loss_obj, c, d, cfg, eval_x, eval_true, eval_rng, flagged
                )
            )
    return c, records


def minority_recall(record: RunRecord, d: Dataset) -> float:
    """Mean recall over the dataset's minority classes (0 when none exist)."""
    classes = d.spec.minority_classes
    if not classes:
        return 0.0
    return float(np.mean([record.per_class_recall[j] for j in classes]))


COMPARE_METRICS = (
    "loss_cls",
    "loss_obj",
    "acc",
    "div_ratio",
    "minority_recall",
    "minority_ratio",
    "unknown_ratio",
)


@dataclass(frozen=True)
class MethodSummary:
    label: str
    config: TrainConfig
    finals: tuple[RunRecord | None, ...]  # None marks a failed seed
    cell_records: tuple[tuple[RunRecord, ...] | None, ...]
    errors: tuple[str, ...]
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(1 for f in self.finals if f is None)


def _record_metrics(rec: RunRecord, d: Dataset) -> dict[str, float]:
    return {
        "loss_cls": rec.loss_cls,
        "loss_obj": rec.loss_obj,
        "acc": rec.acc_unlabeled,
        "div_ratio": rec.diversity_ratio,
        "minority_recall": minority_recall(rec, d),
        "minority_ratio": rec.minority_ratio,
        "unknown_ratio": rec.unknown_ratio,
    }


def compare(
    methods: Sequence[TrainConfig],
    d: Dataset,
    c0: Classifier,
    n_seeds: int = 4,
    proto: PrototypeInit | None = None,
    labels: Sequence[str] | None = None,
) -> list[MethodSummary]:
    """Train every config over n_seeds paired seeds and summarise the finals.

    Seed i shifts each config's seed by i, so all methods see identical batch
    sequences per seed (configs are expected to differ only in objective and
    lam). A failed run marks its cell and leaves the rest of the table alive.
    """
    if labels is None:
        labels = [_auto_label(cfg) for cfg in methods]
    if len(labels) != len(methods):
        raise ValueError("need exactly one label per method")

    summaries = []
    for label, cfg in zip(labels, methods):
        finals: list[RunRecord | None] = []
        cells: list[tuple[RunRecord, ...] | None] = []
        errors: list[str] = []
        for i in range(n_seeds):
            cfg_i = replace(cfg, seed=(cfg.seed + i) & 0xFFFFFFFFFFFFFFFF)
            try:
                _, records = train(c0, d, cfg_i, proto=proto)
                finals.append(records[-1] if records else None)
                cells.append(tuple(records))
                if not records:
                    errors.append(f"seed {i}: no evaluation records")
            except (TrainDivergedError, ValueError) as exc:
                finals.append(None)
                cells.append(None)
                errors.append(f"seed {i}: {exc}")
        rows = [_record_metrics(r, d) for r in finals if r is not None]
        mean, std = {}, {}
        for key in COMPARE_METRICS:
            vals = [row[key] for row in rows]
            mean[key] = float(np.mean(vals)) if vals else float("nan")
            std[key] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        summaries.append(
            MethodSummary(
                label=label,
                config=cfg,
                finals=tuple(finals),
                cell_records=tuple(cells),
                errors=tuple(errors),
                mean=mean,
                std=std,
            )
        )
    return summaries


def _auto_label(cfg: TrainConfig) -> str:
    if cfg.objective is ObjectiveKind.NONE:
        return "none"
    return f"{cfg.objective.value}_lam{cfg.lam:g}"


def format_float(x: float) -> str:
    return f"{x:.9g}"


def records_csv_lines(records: Sequence[RunRecord], n_classes: int) -> list[str]:
    """Render records as CSV lines (header first; 9 significant digits)."""
    header = (
        ["step", "loss_cls", "loss_obj", "acc"]
        + [f"recall_{j}" for j in range(n_classes)]
        + ["div_ratio", "minority_ratio", "unknown_ratio"]
    )
    lines = [",".join(header)]
    for r in records:
        fields = (
            [str(r.step), format_float(r.loss_cls), format_float(r.loss_obj),
             format_float(r.acc_unlabeled)]
            + [format_float(v) for v in r.per_class_recall]
            + [format_float(r.diversity_ratio), format_float(r.minority_ratio),
               format_float(r.unknown_ratio)]
        )
        lines.append(",".join(fields))
    return lines


def compare_csv_lines(summaries: Sequence[MethodSummary]) -> list[str]:
    header = ["method", "n_seeds", "n_failed"]
    for key in COMPARE_METRICS:
        header += [f"{key}_mean", f"{key}_std"]
    lines = [",".join(header)]
    for s in summaries:
        fields = [s.label, str(len(s.finals)), str(s.n_failed)]
        for key in COMPARE_METRICS:
            fields += [format_float(s.mean[key]), format_float(s.std[key])]
        lines.append(",".join(fields))
    return lines


def compare_table_text(summaries: Sequence[MethodSummary]) -> str:
    """Human-readable mean +/- std table for terminal output."""
    cols = ["method"] + list(COMPARE_METRICS)
    rows = [cols]
    for s in summaries:
        row = [s.label]
        for key in COMPARE_METRICS:
            row.append(f"{s.mean[key]:.4f}+/-{s.std[key]:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(cols))]
    out = []
    for r in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(out)
