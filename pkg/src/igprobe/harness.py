"""Quality-sweep evaluation and per-image attribution batches.

Pipeline order is degrade-then-resize: compression happens at the native
dataset resolution, bicubic resampling to the scorer input comes after.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .attribution import AttributionMap, PathSpec, integrated_gradients
from .codec import ORIGINAL, QualityLevel, degrade_jpeg, resize_bicubic
from .data import Dataset, DatasetItem, gen_synthetic, load_dataset  # noqa: F401
from .model import GradFn, ScorerModel, forward, model_gradfn, softmax
from .provider import ProviderSpec, provider_connect  # noqa: F401
from .tensor import argmax

ScorerLike = Union[ScorerModel, GradFn]


def quality_key(q: QualityLevel) -> str:
    return ORIGINAL if q == ORIGINAL else str(int(q))


def parse_quality(text: str) -> QualityLevel:
    t = text.strip().lower()
    return ORIGINAL if t == ORIGINAL else int(t)


def macro_precision(predictions, truths, num_classes: int) -> float:
    """Unweighted mean over classes of TP/(TP+FP); never-predicted classes
    contribute 0."""
    if len(predictions) != len(truths):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(truths)} truths")
    if not len(truths):
        raise ValueError("empty prediction list")
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    total = 0.0
    for c in range(num_classes):
        tp = sum(1 for p, t in zip(predictions, truths) if p == c and t == c)
        predicted = sum(1 for p in predictions if p == c)
        if predicted:
            total += tp / predicted
    return total / num_classes


def accuracy(predictions, truths, num_classes: int | None = None) -> float:
    if len(predictions) != len(truths):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(truths)} truths")
    if not len(truths):
        raise ValueError("empty prediction list")
    return sum(1 for p, t in zip(predictions, truths) if p == t) / len(truths)


METRICS = {"macro_precision": macro_precision, "accuracy": accuracy}


@dataclass
class PrecisionRow:
    model_name: str
    scores: dict[QualityLevel, float]


@dataclass
class PrecisionTable:
    rows: list[PrecisionRow]
    qualities: list[QualityLevel]

    def __post_init__(self):
        if not self.qualities:
            raise ValueError("no qualities")
        for row in self.rows:
            missing = [q for q in self.qualities if q not in row.scores]
            if missing:
                raise ValueError(f"row {row.model_name!r} missing scores for {missing}")


@dataclass
class AttributionRecord:
    id: str
    true_label: str
    predicted_labels: list[str]  # one per quality, ORIGINAL included
    predicted_scores: list[float]  # softmax at the true label, per quality
    ig_values: list[float]  # attribution sum, per degraded quality


@dataclass
class AttributionBatch:
    records: list[AttributionRecord]
    maps: list[dict[QualityLevel, AttributionMap]]
    qualities: list[QualityLevel]


def _check_qualities(qualities) -> list[QualityLevel]:
    qualities = list(qualities)
    if ORIGINAL not in qualities:
        raise ValueError("quality list must include the original level")
    return qualities


def _check_classes(scorer: ScorerLike, dataset: Dataset) -> None:
    if isinstance(scorer, ScorerModel):
        n = scorer.num_classes
    else:
        names = getattr(scorer, "class_names", None)
        n = len(names) if names else None
    if n is not None and n != dataset.num_classes:
        raise ValueError(f"scorer expects {n} classes, dataset has {dataset.num_classes}")


def _input_hw(scorer: ScorerLike, resize_to) -> tuple[int, int] | None:
    if resize_to is not None:
        h, w = resize_to
        return int(h), int(w)
    shape = getattr(scorer, "input_shape", None)
    if shape is not None:
        return int(shape[0]), int(shape[1])
    return None


def prepare_input(image: np.ndarray, quality: QualityLevel,
                  resize_to: tuple[int, int] | None = None) -> np.ndarray:
    """Degrade at native resolution, then resize to the scorer input."""
    out = degrade_jpeg(image, quality)
    if resize_to is not None and out.shape[:2] != tuple(resize_to):
        out = resize_bicubic(out, resize_to[0], resize_to[1])
    return out


def _eval(scorer: ScorerLike, image: np.ndarray, label: int) -> tuple[np.ndarray, float]:
    """Logits plus the true-label softmax score."""
    if isinstance(scorer, ScorerModel):
        logits = forward(scorer, image)
    else:
        logits = scorer(image, label).logits
    return logits, float(softmax(logits)[label])


def _pool_map(fn, items, jobs: int | None):
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def sweep_precision(scorers: Union[ScorerLike, Mapping[str, ScorerLike]],
                    dataset: Dataset, qualities,
                    resize_to: tuple[int, int] | None = None,
                    metric: str = "macro_precision",
                    jobs: int | None = None) -> PrecisionTable:
    """Degrade, resize, classify and score the whole dataset per quality.

    ``scorers`` is one scorer (row named "model") or a name -> scorer map;
    each produces one table row.
    """
    qualities = _check_qualities(qualities)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    score_fn = METRICS[metric]
    if not isinstance(scorers, Mapping):
        scorers = {"model": scorers}

    rows = []
    for name, scorer in scorers.items():
        _check_classes(scorer, dataset)
        hw = _input_hw(scorer, resize_to)
        scores: dict[QualityLevel, float] = {}
        for q in qualities:
            def classify(item: DatasetItem, _q=q):
                try:
                    prepared = prepare_input(item.image, _q, hw)
                    logits, _ = _eval(scorer, prepared, item.label)
                    return argmax(logits)
                except Exception as exc:
                    raise RuntimeError(
                        f"scoring failed on image {item.id!r} at quality "
                        f"{quality_key(_q)}: {exc}") from exc
            preds = _pool_map(classify, dataset.items, jobs)
            truths = [it.label for it in dataset.items]
            scores[q] = score_fn(preds, truths, dataset.num_classes)
        rows.append(PrecisionRow(model_name=name, scores=scores))
    return PrecisionTable(rows=rows, qualities=qualities)


def attribute_batch(scorer: ScorerLike, dataset: Dataset, qualities,
                    steps: int = 50, scheme: str = "trapezoid",
                    resize_to: tuple[int, int] | None = None,
                    jobs: int | None = None) -> AttributionBatch:
    """Per image: baseline = resized original, one attribution map per
    degraded quality with the degraded-and-resized image as target."""
    qualities = _check_qualities(qualities)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    _check_classes(scorer, dataset)
    gradfn = model_gradfn(scorer) if isinstance(scorer, ScorerModel) else scorer
    hw = _input_hw(scorer, resize_to)

    def one(item: DatasetItem):
        try:
            baseline = prepare_input(item.image, ORIGINAL, hw)
            labels, scores, igs = [], [], []
            maps: dict[QualityLevel, AttributionMap] = {}
            for q in qualities:
                target = baseline if q == ORIGINAL else prepare_input(item.image, q, hw)
                logits, true_score = _eval(gradfn, target, item.label)
                labels.append(argmax(logits))
                scores.append(true_score)
                if q != ORIGINAL:
                    att = integrated_gradients(
                        gradfn,
                        PathSpec(baseline=baseline, target=target,
                                 steps=steps, scheme=scheme),
                        item.label)
                    maps[q] = att
                    igs.append(att.sum)
        except Exception as exc:
            raise RuntimeError(f"attribution failed on image {item.id!r}: {exc}") from exc
        record = AttributionRecord(
            id=item.id,
            true_label=dataset.class_names[item.label],
            predicted_labels=[dataset.class_names[p] for p in labels],
            predicted_scores=scores,
            ig_values=igs)
        return record, maps

    results = _pool_map(one, dataset.items, jobs)
    return AttributionBatch(records=[r for r, _ in results],
                            maps=[m for _, m in results],
                            qualities=qualities)


def write_precision_csv(table: PrecisionTable, path) -> None:
    """Long format, one (model, quality, score) row per cell."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "quality", "score"])
    for row in table.rows:
        for q in table.qualities:
            writer.writerow([row.model_name, quality_key(q), repr(row.scores[q])])
    Path(path).write_text(buf.getvalue())


def read_precision_csv(path) -> PrecisionTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["model", "quality", "score"]:
            raise ValueError(f"{path}: expected header model,quality,score, got {header}")
        cells = [(row[0], parse_quality(row[1]), float(row[2])) for row in reader if row]
    qualities: list[QualityLevel] = []
    by_model: dict[str, dict[QualityLevel, float]] = {}
    for model, q, score in cells:
        if q not in qualities:
            qualities.append(q)
        by_model.setdefault(model, {})[q] = score
    rows = [PrecisionRow(model_name=m, scores=s) for m, s in by_model.items()]
    return PrecisionTable(rows=rows, qualities=qualities)


def write_attribution_csv(batch: AttributionBatch, path) -> None:
    qs = batch.qualities
    degraded = [q for q in qs if q != ORIGINAL]
    header = (["id", "true"]
              + [f"predicted_{quality_key(q)}" for q in qs]
              + [f"score_{quality_key(q)}" for q in qs]
              + [f"ig_{quality_key(q)}" for q in degraded])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for rec in batch.records:
        writer.writerow([rec.id, rec.true_label]
                        + rec.predicted_labels
                        + [f"{s:.6f}" for s in rec.predicted_scores]
                        + [f"{v:.6f}" for v in rec.ig_values])
    Path(path).write_text(buf.getvalue())
