"""Confusion matrices, weighted metrics, and subject-independent cross-validation.

Per-class precision/recall/F1 are combined with weights equal to each
class's share of the reference labels. Cross-validation partitions whole
subjects into k folds; each iteration tests on one fold, validates on the
next (cyclically), and trains on the rest, so no subject ever straddles
splits. Rounds reshuffle the folds with a shifted seed and everything is
averaged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .features_low import FrameConfig, recording_low_features
from .ingest import Recording, class_names, stages_to_indices
from .network import NetSpec, network_forward, predict_stages
from .pipeline import FittedPipeline, fit_pipeline, make_sequences
from .training import TrainConfig, init_params, train


def confusion_matrix(reference: np.ndarray, predicted: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts matrix with reference stages as rows, predictions as columns."""
    ref = np.asarray(reference, dtype=np.int64)
    pred = np.asarray(predicted, dtype=np.int64)
    if ref.shape != pred.shape or ref.ndim != 1:
        raise ValueError(f"length mismatch: {ref.shape} vs {pred.shape}")
    if ref.size == 0:
        raise ValueError("empty label sequences")
    if np.any((ref < 0) | (ref >= num_classes) | (pred < 0) | (pred >= num_classes)):
        raise ValueError("class index out of range")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (ref, pred), 1)
    return cm


def per_class_metrics(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class (precision, recall, F1); zero-denominator entries are 0."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    predicted = cm.sum(axis=0)
    reference = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(reference > 0, tp / reference, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    return precision, recall, f1


def weighted_metrics(cm: np.ndarray) -> tuple[float, float, float]:
    """Reference-proportion-weighted (precision, recall, F1)."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    weights = cm.sum(axis=1) / total
    precision, recall, f1 = per_class_metrics(cm)
    return (
        float(weights @ precision),
        float(weights @ recall),
        float(weights @ f1),
    )


def kfold_split(subject_ids: list[str], k: int, seed: int) -> list[list[str]]:
    """Seeded shuffle, then round-robin deal into k folds (sizes differ <= 1)."""
    if len(subject_ids) < k:
        raise ValueError(f"need at least k={k} subjects, got {len(subject_ids)}")
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.Generator(np.random.Philox(seed))
    shuffled = [subject_ids[j] for j in rng.permutation(len(subject_ids))]
    return [shuffled[j::k] for j in range(k)]


@dataclass(frozen=True)
class FoldResult:
    """One train/validate/test iteration's outcome."""

    round_index: int
    fold_index: int
    test_subjects: tuple[str, ...]
    cm: np.ndarray
    precision: float
    recall: float
    f1: float
    pipeline: FittedPipeline
    passes_run: int


@dataclass(frozen=True)
class CvReport:
    """All fold results plus the aggregate means."""

    num_classes: int
    k: int
    rounds: int
    folds: tuple[FoldResult, ...]
    precision: float
    recall: float
    f1: float


def cross_validate(
    recordings: list[Recording],
    frame: FrameConfig,
    num_words: int,
    net_layers: tuple[tuple[str, int], ...],
    train_cfg: TrainConfig,
    k: int = 8,
    rounds: int = 3,
    seed: int = 0,
    num_classes: int = 5,
) -> CvReport:
    """Subject-independent k-fold CV over several rounds.

    Low-level features depend only on each recording's own signals, so they
    are extracted once up front. Everything fitted (dictionary, z-score
    stats, network) comes from the six training folds of each iteration.
    Per-iteration seeds are spawned from (seed, round, fold) so results
    never depend on execution order; fold shuffling uses seed + round.
    """
    ids = [r.subject_id for r in recordings]
    if len(set(ids)) != len(ids):
        raise ValueError("subject ids must be unique")
    by_id = {r.subject_id: i for i, r in enumerate(recordings)}
    lows = [recording_low_features(r, frame) for r in recordings]
    labels = [stages_to_indices(r.labels, num_classes) for r in recordings]

    results: list[FoldResult] = []
    for round_index in range(rounds):
        folds = kfold_split(ids, k, seed + round_index)
        for fold_index in range(k):
            test_ids = folds[fold_index]
            val_ids = folds[(fold_index + 1) % k]
            train_ids = [
                sid
                for j in range(k)
                if j not in (fold_index, (fold_index + 1) % k)
                for sid in folds[j]
            ]
            seeds = np.random.SeedSequence(
                seed, spawn_key=(round_index, fold_index)
            ).generate_state(3)
            kmeans_seed, init_seed, sgd_seed = (int(s) for s in seeds)

            train_lows = [lows[by_id[s]] for s in train_ids]
            pipeline = fit_pipeline(train_lows, num_words, seed=kmeans_seed)

            def seqs(id_list):
                return make_sequences(
                    [lows[by_id[s]] for s in id_list],
                    [labels[by_id[s]] for s in id_list],
                    pipeline,
                    num_classes,
                )

            spec = NetSpec(
                input_dim=pipeline.final_dim,
                num_classes=num_classes,
                layers=net_layers,
            )
            net = init_params(spec, seed=init_seed, init_std=train_cfg.init_std)
            cfg = replace(train_cfg, seed=sgd_seed)
            trained, history = train(net, seqs(train_ids), seqs(val_ids), cfg)

            refs, preds = [], []
            for sid in test_ids:
                probs, _ = network_forward(trained, pipeline.transform(lows[by_id[sid]]))
                preds.append(predict_stages(probs))
                refs.append(labels[by_id[sid]])
            cm = confusion_matrix(np.concatenate(refs), np.concatenate(preds), num_classes)
            p, r, f1 = weighted_metrics(cm)
            results.append(
                FoldResult(
                    round_index=round_index,
                    fold_index=fold_index,
                    test_subjects=tuple(test_ids),
                    cm=cm,
                    precision=p,
                    recall=r,
                    f1=f1,
                    pipeline=pipeline,
                    passes_run=len(history),
                )
            )

    return CvReport(
        num_classes=num_classes,
        k=k,
        rounds=rounds,
        folds=tuple(results),
        precision=float(np.mean([f.precision for f in results])),
        recall=float(np.mean([f.recall for f in results])),
        f1=float(np.mean([f.f1 for f in results])),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_cv_csv(report: CvReport, path: str) -> None:
    """Per-iteration class-wise and weighted metrics, plus an aggregate row."""
    names = class_names(report.num_classes)
    cols = ["round", "fold"]
    for n in names:
        cols += [f"P_{n}", f"R_{n}", f"F1_{n}"]
    cols += ["weighted_P", "weighted_R", "weighted_F1"]
    lines = [",".join(cols)]
    per_class_rows = []
    for f in report.folds:
        p, r, f1 = per_class_metrics(f.cm)
        per_class_rows.append((p, r, f1))
        cells = [str(f.round_index), str(f.fold_index)]
        for j in range(report.num_classes):
            cells += [_fmt(p[j]), _fmt(r[j]), _fmt(f1[j])]
        cells += [_fmt(f.precision), _fmt(f.recall), _fmt(f.f1)]
        lines.append(",".join(cells))
    cells = ["all", "all"]
    for j in range(report.num_classes):
        cells += [
            _fmt(np.mean([row[0][j] for row in per_class_rows])),
            _fmt(np.mean([row[1][j] for row in per_class_rows])),
            _fmt(np.mean([row[2][j] for row in per_class_rows])),
        ]
    cells += [_fmt(report.precision), _fmt(report.recall), _fmt(report.f1)]
    lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_document(report: CvReport) -> str:
    """Deterministic JSON summary of a report."""
    doc = {
        "schema_version": 1,
        "num_classes": report.num_classes,
        "k": report.k,
        "rounds": report.rounds,
        "aggregate": {
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
        },
        "iterations": [
            {
                "round": f.round_index,
                "fold": f.fold_index,
                "test_subjects": list(f.test_subjects),
                "precision": f.precision,
                "recall": f.recall,
                "f1": f.f1,
                "confusion": f.cm.tolist(),
                "passes_run": f.passes_run,
            }
            for f in report.folds
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def write_cv_summary(report: CvReport, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(summary_document(report))
