"""Low-level per-epoch features: mean RR, a DCT frequency stack, actigraphy cepstra.

Each scored epoch is described by a 220-dim vector (at defaults) built from
three blocks:

    mean_rr   10 dims   mean RR interval of each epoch in a 10-epoch frame
    freq     120 dims   per frame epoch: first 5 DCT coefficients of the RR
                        sequence plus their first and second differences
                        (5 + 4 + 3 = 12), concatenated over the frame
    act_ceps  90 dims   per axis of the current epoch only: first-difference
                        the acceleration, take the real cepstrum, keep the
                        first 30 coefficients

Heart rate context comes from the whole frame; actigraphy stays local to
the epoch being described.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import Recording, RrEpoch, epoch_actigraphy, epoch_rr, impute_empty_rr
from .transforms import dct2, real_cepstrum


@dataclass(frozen=True)
class FrameConfig:
    """Sizes of the three low-level feature blocks."""

    frame_epochs: int = 10
    freq_components: int = 5
    cepstrum_components: int = 30

    def __post_init__(self):
        if self.frame_epochs < 1:
            raise ValueError("frame_epochs must be >= 1")
        if self.freq_components < 3:
            raise ValueError("freq_components must be >= 3 so the second difference is non-empty")
        if self.cepstrum_components < 1:
            raise ValueError("cepstrum_components must be >= 1")

    @property
    def dim(self) -> int:
        f, n, c = self.frame_epochs, self.freq_components, self.cepstrum_components
        return f + f * (3 * n - 3) + 3 * c


@dataclass(frozen=True)
class LowLevelFeature:
    """The three feature blocks for one epoch; ``vector`` is their concatenation."""

    mean_rr: np.ndarray
    freq: np.ndarray
    act_ceps: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.mean_rr, self.freq, self.act_ceps])


def frame_indices(t: int, total: int, frame_epochs: int) -> np.ndarray:
    """Contiguous frame of epoch indices around t, shifted to fit in range.

    For even widths the window is asymmetric ([t-5, t+4] at width 10); near
    the record edges it slides inward rather than padding, so it always
    holds frame_epochs real epochs and always contains t.
    """
    if total < frame_epochs:
        raise ValueError(f"recording has {total} epochs, frame needs {frame_epochs}")
    if not 0 <= t < total:
        raise ValueError(f"epoch index {t} out of range [0, {total})")
    start = min(max(t - frame_epochs // 2, 0), total - frame_epochs)
    return np.arange(start, start + frame_epochs)


def mean_rr_features(frame: list[RrEpoch]) -> np.ndarray:
    """Arithmetic mean RR interval of each epoch in the frame, in frame order."""
    return np.array([float(np.mean(e.rr)) for e in frame])


def dominant_freq_features(epoch: RrEpoch, n: int) -> np.ndarray:
    """Leading DCT coefficients of the epoch's RR sequence plus differences.

    The first n coefficients capture the slow trend of the interval series
    (energy compaction pushes signal into the leading bins). The coefficient
    vector is zero-padded to n when the epoch holds fewer than n samples,
    then first and second adjacent differences are appended: n + (n-1) +
    (n-2) values.
    """
    coeffs = dct2(epoch.rr)
    d = np.zeros(n)
    take = min(n, coeffs.size)
    d[:take] = coeffs[:take]
    return np.concatenate([d, np.diff(d), np.diff(d, n=2)])


def actigraphy_features(samples: np.ndarray, cepstrum_components: int) -> np.ndarray:
    """Leading cepstral coefficients of each axis's first-differenced signal.

    ``samples`` has shape (m, 3) for one epoch, m >= 2. Differencing removes
    the gravity offset so the cepstrum sees movement, not posture. Axes are
    concatenated x|y|z, 3 * cepstrum_components dims total; coefficient runs
    shorter than requested (tiny epochs) are zero-padded.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError(f"expected (m, 3) samples, got {samples.shape}")
    if samples.shape[0] < 2:
        raise ValueError("actigraphy epoch needs at least 2 samples")
    blocks = []
    for axis in range(3):
        ceps = real_cepstrum(np.diff(samples[:, axis]))
        block = np.zeros(cepstrum_components)
        take = min(cepstrum_components, ceps.size)
        block[:take] = ceps[:take]
        blocks.append(block)
    return np.concatenate(blocks)


def low_level_for_epoch(
    rr_epochs: list[RrEpoch],
    act_epochs: list[np.ndarray],
    t: int,
    cfg: FrameConfig,
) -> LowLevelFeature:
    """Assemble the full low-level vector for epoch t.

    ``rr_epochs`` must already be imputed (no empty epochs). Heart rate
    blocks read the whole frame around t; the actigraphy block reads epoch
    t alone.
    """
    idx = frame_indices(t, len(rr_epochs), cfg.frame_epochs)
    frame = [rr_epochs[j] for j in idx]
    freq = np.concatenate([dominant_freq_features(e, cfg.freq_components) for e in frame])
    return LowLevelFeature(
        mean_rr=mean_rr_features(frame),
        freq=freq,
        act_ceps=actigraphy_features(act_epochs[t], cfg.cepstrum_components),
    )


def recording_low_features(rec: Recording, cfg: FrameConfig) -> np.ndarray:
    """Low-level feature matrix for a whole recording, shape (num_epochs, dim)."""
    rr_epochs = impute_empty_rr(epoch_rr(rec))
    act_epochs = epoch_actigraphy(rec)
    rows = [low_level_for_epoch(rr_epochs, act_epochs, t, cfg).vector for t in range(rec.num_epochs)]
    return np.stack(rows, axis=0)
