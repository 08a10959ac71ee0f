"""Parsing, validation, and epoching of raw sleep recordings.

One recording is a night of data for a single subject: timestamped heart
rate samples (beats/minute, irregular since the band emits one sample per
detected beat), triaxial wrist actigraphy (nominally 32 Hz, unit g), and one
sleep stage label per 30 s epoch. This module owns the on-disk CSV formats:

    heart rate:  header ``t_seconds,bpm``
    actigraphy:  header ``t_seconds,x_g,y_g,z_g``
    labels:      header ``epoch_index,stage`` with stage in
                 {W, N1, N2, N3, REM}, or the multi-scorer form
                 ``epoch_index,stage_1,...,stage_s`` which is reduced to a
                 consensus by plurality vote with previous-epoch tie-break.

All operations are pure; a Recording is immutable after construction.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

EPOCH_SECONDS = 30.0
ACTIGRAPHY_RATE_HZ = 32.0
RATE_TOLERANCE = 0.05


class DataValidationError(ValueError):
    """Raised when an input file or signal violates the format contract."""


class SleepStage(Enum):
    """The five canonical scoring stages."""

    W = "W"
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"
    REM = "REM"


class FourClassStage(Enum):
    """Merged label space with wake and N1 collapsed into one class."""

    WN1 = "W+N1"
    N2 = "N2"
    N3 = "N3"
    REM = "REM"


STAGE_ORDER = (SleepStage.W, SleepStage.N1, SleepStage.N2, SleepStage.N3, SleepStage.REM)
FOUR_CLASS_ORDER = (FourClassStage.WN1, FourClassStage.N2, FourClassStage.N3, FourClassStage.REM)

_STAGE_BY_NAME = {s.value: s for s in STAGE_ORDER}
_STAGE_INDEX = {s: i for i, s in enumerate(STAGE_ORDER)}

_FOUR_CLASS_MAP = {
    SleepStage.W: FourClassStage.WN1,
    SleepStage.N1: FourClassStage.WN1,
    SleepStage.N2: FourClassStage.N2,
    SleepStage.N3: FourClassStage.N3,
    SleepStage.REM: FourClassStage.REM,
}
_FOUR_CLASS_INDEX = {s: i for i, s in enumerate(FOUR_CLASS_ORDER)}


def map_to_four_class(stage: SleepStage) -> FourClassStage:
    """Project a canonical stage onto the merged 4-class space (W and N1 fuse)."""
    return _FOUR_CLASS_MAP[stage]


def class_names(num_classes: int) -> tuple[str, ...]:
    """Class labels in index order for the 4- or 5-class mode."""
    if num_classes == 5:
        return tuple(s.value for s in STAGE_ORDER)
    if num_classes == 4:
        return tuple(s.value for s in FOUR_CLASS_ORDER)
    raise ValueError(f"num_classes must be 4 or 5, got {num_classes}")


def stages_to_indices(labels, num_classes: int) -> np.ndarray:
    """Convert a stage sequence to integer class indices for the given mode."""
    if num_classes == 5:
        return np.array([_STAGE_INDEX[s] for s in labels], dtype=np.int64)
    if num_classes == 4:
        return np.array([_FOUR_CLASS_INDEX[map_to_four_class(s)] for s in labels], dtype=np.int64)
    raise ValueError(f"num_classes must be 4 or 5, got {num_classes}")


@dataclass(frozen=True)
class HeartRateSeries:
    """Irregularly sampled heart rate: strictly increasing times, bpm > 0."""

    t: np.ndarray
    bpm: np.ndarray


@dataclass(frozen=True)
class ActigraphySeries:
    """Triaxial wrist acceleration. ``xyz`` has shape (n, 3), unit g."""

    t: np.ndarray
    xyz: np.ndarray
    nominal_rate: float = ACTIGRAPHY_RATE_HZ


@dataclass(frozen=True)
class Recording:
    """One subject's validated night: signals plus one label per epoch.

    Signals are truncated to the label span at load time; construction
    rejects anything that does not reach the final epoch. Treat instances
    as immutable.
    """

    subject_id: str
    hr: HeartRateSeries
    act: ActigraphySeries
    labels: tuple[SleepStage, ...]
    epoch_seconds: float = EPOCH_SECONDS

    @property
    def num_epochs(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class RrEpoch:
    """RR intervals (seconds) of the heart rate samples inside one epoch.

    ``rr`` may be empty when the band dropped out for a whole epoch; such
    epochs are flagged by ``is_empty`` and filled by ``impute_empty_rr``
    before feature extraction.
    """

    rr: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def is_empty(self) -> bool:
        return self.rr.size == 0


def hr_to_rr(hr: float) -> float:
    """Convert an instantaneous heart rate (beats/minute) to an RR interval (s).

    The interval between beats at ``hr`` beats per minute is ``60 / hr``.
    """
    if hr <= 0:
        raise DataValidationError(f"non-positive heart rate: {hr}")
    return 60.0 / hr


def epoch_rr(rec: Recording) -> list[RrEpoch]:
    """Bucket heart rate samples into per-epoch RR interval lists.

    A sample at time t belongs to epoch floor(t / epoch_seconds); epoch
    windows are half-open [k*e, (k+1)*e) so every in-span sample lands in
    exactly one epoch. Epochs with no samples come back empty and flagged.
    """
    n = rec.num_epochs
    rr = 60.0 / rec.hr.bpm
    idx = np.floor(rec.hr.t / rec.epoch_seconds).astype(np.int64)
    epochs = []
    for k in range(n):
        epochs.append(RrEpoch(rr=rr[idx == k]))
    return epochs


def epoch_actigraphy(rec: Recording) -> list[np.ndarray]:
    """Bucket actigraphy samples per epoch; each entry has shape (n_k, 3)."""
    n = rec.num_epochs
    idx = np.floor(rec.act.t / rec.epoch_seconds).astype(np.int64)
    return [rec.act.xyz[idx == k] for k in range(n)]


def impute_empty_rr(epochs: list[RrEpoch]) -> list[RrEpoch]:
    """Fill empty epochs with a copy of the nearest non-empty epoch's RR list.

    Ties in distance break toward the earlier epoch. Raises if every epoch
    is empty (nothing to copy from).
    """
    non_empty = [k for k, e in enumerate(epochs) if not e.is_empty]
    if not non_empty:
        raise DataValidationError("all epochs are empty; cannot impute RR intervals")
    if len(non_empty) == len(epochs):
        return list(epochs)
    positions = np.array(non_empty)
    out = []
    for k, e in enumerate(epochs):
        if e.is_empty:
            nearest = positions[np.argmin(np.abs(positions - k))]
            out.append(RrEpoch(rr=epochs[nearest].rr.copy()))
        else:
            out.append(e)
    return out


def merge_scorer_labels(hypnograms: list[list[SleepStage]]) -> list[SleepStage]:
    """Reduce several scorers' hypnograms to a single consensus sequence.

    Each epoch takes the stage with strictly the most votes. When several
    stages tie for the most votes the consensus repeats the previous epoch's
    consensus stage; a tie at the very first epoch resolves to W (recordings
    begin pre-sleep).
    """
    if not hypnograms:
        raise DataValidationError("need at least one hypnogram")
    length = len(hypnograms[0])
    for h in hypnograms[1:]:
        if len(h) != length:
            raise DataValidationError(
                f"hypnogram lengths differ: {len(h)} vs {length}"
            )
    consensus: list[SleepStage] = []
    for t in range(length):
        votes = [h[t] for h in hypnograms]
        counts: dict[SleepStage, int] = {}
        for v in votes:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        winners = [s for s in STAGE_ORDER if counts.get(s, 0) == top]
        if len(winners) == 1:
            consensus.append(winners[0])
        elif t == 0:
            consensus.append(SleepStage.W)
        else:
            consensus.append(consensus[t - 1])
    return consensus


def _check_monotone(t: np.ndarray, what: str) -> None:
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise DataValidationError(f"{what} timestamps are not strictly increasing")


def _truncate(t: np.ndarray, span: float) -> np.ndarray:
    """Boolean mask keeping samples inside [0, span)."""
    return (t >= 0.0) & (t < span)


def load_heart_rate_csv(path: str) -> HeartRateSeries:
    """Parse a heart-rate CSV (header ``t_seconds,bpm``)."""
    t, bpm = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t_seconds", "bpm"]:
            raise DataValidationError(f"{path}: expected header 't_seconds,bpm'")
        for row in reader:
            if not row:
                continue
            try:
                t.append(float(row[0]))
                bpm.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise DataValidationError(f"{path}: bad row {row!r}") from exc
    if not t:
        raise DataValidationError(f"{path}: no heart rate samples")
    return HeartRateSeries(t=np.array(t), bpm=np.array(bpm))


def load_actigraphy_csv(path: str, nominal_rate: float = ACTIGRAPHY_RATE_HZ) -> ActigraphySeries:
    """Parse an actigraphy CSV (header ``t_seconds,x_g,y_g,z_g``)."""
    t, xyz = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["t_seconds", "x_g", "y_g", "z_g"]
        if header is None or [c.strip() for c in header] != expected:
            raise DataValidationError(f"{path}: expected header 't_seconds,x_g,y_g,z_g'")
        for row in reader:
            if not row:
                continue
            try:
                t.append(float(row[0]))
                xyz.append((float(row[1]), float(row[2]), float(row[3])))
            except (ValueError, IndexError) as exc:
                raise DataValidationError(f"{path}: bad row {row!r}") from exc
    if not t:
        raise DataValidationError(f"{path}: no actigraphy samples")
    return ActigraphySeries(t=np.array(t), xyz=np.array(xyz), nominal_rate=nominal_rate)


def load_labels_csv(path: str) -> list[SleepStage]:
    """Parse a label CSV, merging multi-scorer columns when present.

    Indices must be contiguous from 0. The single-scorer header is
    ``epoch_index,stage``; multi-scorer files carry one column per scorer.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0].strip() != "epoch_index":
            raise DataValidationError(f"{path}: expected header 'epoch_index,stage[,...]'")
        n_scorers = len(header) - 1
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != n_scorers + 1:
                raise DataValidationError(f"{path}: bad row {row!r}")
            rows.append(row)
    if not rows:
        raise DataValidationError(f"{path}: no labels")
    hypnograms: list[list[SleepStage]] = [[] for _ in range(n_scorers)]
    for expected_idx, row in enumerate(rows):
        try:
            idx = int(row[0])
        except ValueError as exc:
            raise DataValidationError(f"{path}: bad epoch index {row[0]!r}") from exc
        if idx != expected_idx:
            raise DataValidationError(
                f"{path}: epoch indices must be contiguous from 0, got {idx} at row {expected_idx}"
            )
        for s in range(n_scorers):
            name = row[s + 1].strip()
            if name not in _STAGE_BY_NAME:
                raise DataValidationError(f"{path}: unknown stage {name!r}")
            hypnograms[s].append(_STAGE_BY_NAME[name])
    if n_scorers == 1:
        return hypnograms[0]
    return merge_scorer_labels(hypnograms)


def load_recording(
    hr_path: str,
    act_path: str,
    label_path: str,
    subject_id: str,
    epoch_seconds: float = EPOCH_SECONDS,
) -> Recording:
    """Load and validate one recording from its three CSV files.

    Signals are truncated to the label span; a signal whose last sample does
    not reach the final epoch is rejected as too short. Heart rate must be
    strictly positive and the actigraphy's mean sample rate must sit within
    5% of its nominal rate.
    """
    for p, what in ((hr_path, "heart rate"), (act_path, "actigraphy"), (label_path, "labels")):
        if not os.path.exists(p):
            raise DataValidationError(f"missing {what} file: {p}")
    labels = load_labels_csv(label_path)
    hr = load_heart_rate_csv(hr_path)
    act = load_actigraphy_csv(act_path)

    _check_monotone(hr.t, "heart rate")
    _check_monotone(act.t, "actigraphy")
    if np.any(hr.bpm <= 0):
        raise DataValidationError("non-positive heart rate sample")
    if not np.all(np.isfinite(hr.t)) or not np.all(np.isfinite(hr.bpm)):
        raise DataValidationError("non-finite heart rate data")
    if not np.all(np.isfinite(act.t)) or not np.all(np.isfinite(act.xyz)):
        raise DataValidationError("non-finite actigraphy data")

    span = len(labels) * epoch_seconds
    hr_keep = _truncate(hr.t, span)
    act_keep = _truncate(act.t, span)
    hr = HeartRateSeries(t=hr.t[hr_keep], bpm=hr.bpm[hr_keep])
    act = ActigraphySeries(t=act.t[act_keep], xyz=act.xyz[act_keep], nominal_rate=act.nominal_rate)

    last_epoch_start = (len(labels) - 1) * epoch_seconds
    if hr.t.size == 0 or hr.t[-1] < last_epoch_start:
        raise DataValidationError("heart rate signal shorter than label span")
    if act.t.size == 0 or act.t[-1] < last_epoch_start:
        raise DataValidationError("actigraphy signal shorter than label span")

    if act.t.size < 2:
        raise DataValidationError("actigraphy needs at least two samples")
    mean_rate = (act.t.size - 1) / (act.t[-1] - act.t[0])
    if abs(mean_rate - act.nominal_rate) / act.nominal_rate > RATE_TOLERANCE:
        raise DataValidationError(
            f"actigraphy rate {mean_rate:.3f} Hz deviates more than "
            f"{RATE_TOLERANCE:.0%} from nominal {act.nominal_rate} Hz"
        )

    return Recording(
        subject_id=subject_id,
        hr=hr,
        act=act,
        labels=tuple(labels),
        epoch_seconds=epoch_seconds,
    )


def _fmt(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


def save_recording(rec: Recording, directory: str) -> dict[str, str]:
    """Write a recording to ``<subject>_hr/act/labels.csv``; returns the paths.

    Floats are written in round-trip form so a load reproduces the arrays
    bit for bit.
    """
    os.makedirs(directory, exist_ok=True)
    paths = {
        "hr": os.path.join(directory, f"{rec.subject_id}_hr.csv"),
        "act": os.path.join(directory, f"{rec.subject_id}_act.csv"),
        "labels": os.path.join(directory, f"{rec.subject_id}_labels.csv"),
    }
    with open(paths["hr"], "w", newline="") as fh:
        fh.write("t_seconds,bpm\n")
        for t, bpm in zip(rec.hr.t, rec.hr.bpm):
            fh.write(f"{_fmt(t)},{_fmt(bpm)}\n")
    with open(paths["act"], "w", newline="") as fh:
        fh.write("t_seconds,x_g,y_g,z_g\n")
        for t, (x, y, z) in zip(rec.act.t, rec.act.xyz):
            fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(y)},{_fmt(z)}\n")
    with open(paths["labels"], "w", newline="") as fh:
        fh.write("epoch_index,stage\n")
        for k, s in enumerate(rec.labels):
            fh.write(f"{k},{s.value}\n")
    return paths


def discover_cohort(directory: str) -> list[str]:
    """Subject ids found in a cohort directory (files named ``<id>_hr.csv``)."""
    ids = []
    for name in sorted(os.listdir(directory)):
        if name.endswith("_hr.csv"):
            ids.append(name[: -len("_hr.csv")])
    return ids


def load_cohort(directory: str, epoch_seconds: float = EPOCH_SECONDS) -> list[Recording]:
    """Load every recording in a cohort directory, sorted by subject id."""
    ids = discover_cohort(directory)
    if not ids:
        raise DataValidationError(f"no recordings found in {directory}")
    recs = []
    for sid in ids:
        recs.append(
            load_recording(
                os.path.join(directory, f"{sid}_hr.csv"),
                os.path.join(directory, f"{sid}_act.csv"),
                os.path.join(directory, f"{sid}_labels.csv"),
                subject_id=sid,
                epoch_seconds=epoch_seconds,
            )
        )
    return recs
