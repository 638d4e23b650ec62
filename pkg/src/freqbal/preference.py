"""Modality-preference scores over band maps, and their smoothed history.

The main score is the frequency ratio metric: the L1 norm of the low band
divided cellwise by the flipped high band (plus a stabilizer). Ablation
variants keep only the low band, the plain sum of both bands, or a fixed
convex blend of the two. A per-modality bank smooths the score across
mini-batches with an exponential moving average.
"""

from dataclasses import dataclass

import numpy as np

from .spectral import FrequencyMaps, SpectralConfig, compute_maps_batch

METRIC_KINDS = ("frm", "mp_low", "mp_sum", "mp_weighted")


def frm(maps: FrequencyMaps, sigma: float = 1e-8) -> float:
    """Ratio score: sum of |low[a,b] / (high[-1-a, -1-b] + sigma)|.

    The high map is flipped along both axes before the cellwise division,
    pairing each low coefficient with its mirrored high counterpart.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return float(_frm_nd(maps.low, maps.high, sigma))


def mp_low(maps: FrequencyMaps) -> float:
    """Low-band L1 norm."""
    return float(np.abs(maps.low).sum())


def mp_sum(maps: FrequencyMaps) -> float:
    """Plain sum of low- and high-band L1 norms."""
    return float(np.abs(maps.low).sum() + np.abs(maps.high).sum())


def mp_weighted(maps: FrequencyMaps, omega_band: float = 0.9) -> float:
    """Convex blend omega*|low| + (1-omega)*|high| of the band L1 norms."""
    if not 0.0 <= omega_band <= 1.0:
        raise ValueError(f"omega_band must lie in [0,1], got {omega_band}")
    return float(omega_band * np.abs(maps.low).sum() + (1.0 - omega_band) * np.abs(maps.high).sum())


def score_maps(maps: FrequencyMaps, kind: str, sigma: float = 1e-8, omega_band: float = 0.9) -> float:
    if kind == "frm":
        return frm(maps, sigma)
    if kind == "mp_low":
        return mp_low(maps)
    if kind == "mp_sum":
        return mp_sum(maps)
    if kind == "mp_weighted":
        return mp_weighted(maps, omega_band)
    raise ValueError(f"unknown metric kind {kind!r}; expected one of {METRIC_KINDS}")


def batch_preference(batch, cfg: SpectralConfig, kind: str = "frm", omega_band: float = 0.9) -> float:
    """Mean per-sample score of one modality's mini-batch of planes.

    `batch` is an (N, H, W) stack (a single plane is promoted). Per-sample
    scores go through the full patch pipeline; the batch score is their
    arithmetic mean, so it is invariant to batch size for identical
    samples.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 2:
        batch = batch[None]
    if batch.ndim != 3 or batch.shape[0] == 0:
        raise ValueError(f"expected a non-empty (N, H, W) batch, got shape {batch.shape}")
    low, high = compute_maps_batch(batch, cfg)
    if kind == "frm":
        per_sample = _frm_nd(low, high, cfg.sigma)
    elif kind == "mp_low":
        per_sample = np.abs(low).sum(axis=(1, 2))
    elif kind == "mp_sum":
        per_sample = np.abs(low).sum(axis=(1, 2)) + np.abs(high).sum(axis=(1, 2))
    elif kind == "mp_weighted":
        if not 0.0 <= omega_band <= 1.0:
            raise ValueError(f"omega_band must lie in [0,1], got {omega_band}")
        per_sample = omega_band * np.abs(low).sum(axis=(1, 2)) + (1.0 - omega_band) * np.abs(
            high
        ).sum(axis=(1, 2))
    else:
        raise ValueError(f"unknown metric kind {kind!r}; expected one of {METRIC_KINDS}")
    return float(per_sample.mean())


def _frm_nd(low, high, sigma):
    # Trailing two axes are the map; leading axes broadcast (batch).
    flipped = high[..., ::-1, ::-1]
    return np.abs(low / (flipped + sigma)).sum(axis=(-2, -1))


@dataclass
class FrmBank:
    """Exponential moving average of one modality's score across batches.

    The first observation is taken verbatim; afterwards the bank blends
    omega parts history with (1-omega) parts current. The held value is
    always a convex combination of everything observed, so it stays inside
    the observed range. Updates must be serialized per modality.
    """

    omega: float = 0.5
    value: float = 0.0
    count: int = 0

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must lie in [0,1], got {self.omega}")

    def update(self, current: float) -> float:
        if not np.isfinite(current) or current < 0:
            raise ValueError(f"score must be finite and >= 0, got {current}")
        if self.count == 0:
            self.value = float(current)
        else:
            self.value = self.omega * self.value + (1.0 - self.omega) * float(current)
        self.count += 1
        return self.value
