"""Deterministic multimodal datasets with controlled band energies.

Each modality is built directly in patch-DCT space. One band (the signal
band) carries a per-class coefficient template blended with per-sample
Gaussian noise at the configured snr; the other band carries pure noise.
Both bands are rescaled per sample so their image-level L1 mass hits the
configured targets exactly, and pixels are the inverse patch DCT. Running
the spectral pipeline over a generated image therefore recovers the target
band energies up to float rounding, which makes the preference ordering of
a generated dataset known by construction.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorio
from .spectral import idct2


@dataclass(frozen=True)
class ModalitySpec:
    """Band-energy targets and class-signal placement for one modality.

    low_energy / high_energy: target L1 mass of each band per image.
    signal_band: which band carries the class template ("low" or "high").
    snr: template-to-noise blend inside the signal band; 0 means the
    signal band is pure noise.
    """

    low_energy: float
    high_energy: float
    signal_band: str = "low"
    snr: float = 1.0

    def __post_init__(self):
        if self.low_energy < 0 or self.high_energy < 0:
            raise ValueError("band energies must be >= 0")
        if self.low_energy + self.high_energy <= 0:
            raise ValueError("at least one band needs positive energy")
        if self.signal_band not in ("low", "high"):
            raise ValueError(f"signal_band must be 'low' or 'high', got {self.signal_band!r}")
        if self.snr < 0:
            raise ValueError(f"snr must be >= 0, got {self.snr}")


@dataclass
class SynthDataset:
    """Per-modality image stacks with shared labels and a fixed split.

    The first n_train samples are the training split; the rest are test.
    """

    images: list
    labels: np.ndarray
    n_train: int
    n_classes: int
    specs: tuple
    seed: int

    @property
    def n_modalities(self) -> int:
        return len(self.images)

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def n_test(self) -> int:
        return self.n_samples - self.n_train

    @property
    def dims(self):
        return self.images[0].shape[1:]

    def train_split(self):
        return [m[: self.n_train] for m in self.images], self.labels[: self.n_train]

    def test_split(self):
        return [m[self.n_train :] for m in self.images], self.labels[self.n_train :]


def generate(
    specs,
    n_train: int = 2000,
    n_test: int = 500,
    n_classes: int = 4,
    dims=(32, 32),
    seed: int = 0,
    p: int = 8,
    q: int = 2,
) -> SynthDataset:
    """Build a dataset; deterministic for a given seed.

    dims must be divisible by the generation patch side p. Labels are
    exactly class-balanced and shared across modalities.
    """
    specs = tuple(specs)
    if not specs:
        raise ValueError("need at least one modality spec")
    h, w = dims
    if h % p or w % p:
        raise ValueError(f"dims {dims} not divisible by patch side {p}")
    n = n_train + n_test
    if n < 1:
        raise ValueError("need at least one sample")
    gh, gw = h // p, w // p
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % n_classes)

    images = []
    for spec in specs:
        templates = rng.normal(size=(n_classes, gh, gw, q, q))
        signal = spec.snr * templates[labels] + rng.normal(size=(n, gh, gw, q, q))
        noise = rng.normal(size=(n, gh, gw, q, q))
        if spec.signal_band == "low":
            low = _rescale_band(signal, spec.low_energy)
            high = _rescale_band(noise, spec.high_energy)
        else:
            low = _rescale_band(noise, spec.low_energy)
            high = _rescale_band(signal, spec.high_energy)
        coeffs = np.zeros((n, gh, gw, p, p))
        coeffs[..., :q, :q] = low
        coeffs[..., p - q :, p - q :] = high
        patches = idct2(coeffs)
        images.append(patches.swapaxes(2, 3).reshape(n, h, w))

    return SynthDataset(
        images=images,
        labels=labels,
        n_train=n_train,
        n_classes=n_classes,
        specs=specs,
        seed=seed,
    )


def _rescale_band(blocks, target: float) -> np.ndarray:
    if target == 0:
        return np.zeros_like(blocks)
    mass = np.abs(blocks).sum(axis=(1, 2, 3, 4), keepdims=True)
    if np.any(mass == 0):
        raise ValueError("degenerate band draw; cannot hit a positive energy target")
    return blocks * (target / mass)


def apply_mask(sample, mask):
    """Zero the planes of absent modalities; present planes are copied."""
    sample = list(sample)
    mask = list(mask)
    if len(mask) != len(sample):
        raise ValueError(f"mask length {len(mask)} for {len(sample)} modalities")
    if not any(mask):
        raise ValueError("at least one modality must be present")
    return [
        np.array(plane, dtype=np.float64, copy=True) if present else np.zeros_like(plane, dtype=np.float64)
        for plane, present in zip(sample, mask)
    ]


def imbalanced_specs():
    """The reference imbalanced preset: low-band masses 100:10:1.

    Modality 0 holds its class signal in the dominant low band, so it
    trains fastest, collapses the shared error signal early, and scores
    the highest preference value. Modality 1 carries a faint high-band
    signal: slow to learn, it stays under-trained unless training is
    rebalanced, and its mid-range relative ratio is where the preference
    variants disagree most about how much to boost it. Modality 2 is a
    cleanly learnable mid-strength branch.
    """
    return (
        ModalitySpec(low_energy=100.0, high_energy=2.0, signal_band="low", snr=0.5),
        ModalitySpec(low_energy=10.0, high_energy=28.0, signal_band="high", snr=0.6),
        ModalitySpec(low_energy=1.0, high_energy=25.0, signal_band="high", snr=2.0),
    )


def lowband_specs():
    """A symmetric preset with all class signal in the low bands."""
    return (
        ModalitySpec(low_energy=30.0, high_energy=3.0, signal_band="low", snr=2.0),
        ModalitySpec(low_energy=30.0, high_energy=3.0, signal_band="low", snr=2.0),
        ModalitySpec(low_energy=30.0, high_energy=3.0, signal_band="low", snr=2.0),
    )


def save_dataset(out_dir, ds: SynthDataset) -> None:
    """Persist per-modality stacks as raw float32 matrices plus a manifest.

    Each modality file holds one flattened image per row; the manifest
    records the plane dims, split sizes, specs, and seed for replay.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h, w = ds.dims
    for i, stack in enumerate(ds.images):
        tensorio.write_raw(out / f"mod{i}.f32", stack.reshape(ds.n_samples, h * w))
    tensorio.write_raw(out / "labels.f32", ds.labels.astype(np.float64)[None, :])
    tensorio.write_manifest(
        out / "dataset.json",
        {
            "n_train": ds.n_train,
            "n_test": ds.n_test,
            "n_classes": ds.n_classes,
            "height": h,
            "width": w,
            "seed": ds.seed,
            "specs": [
                {
                    "low_energy": s.low_energy,
                    "high_energy": s.high_energy,
                    "signal_band": s.signal_band,
                    "snr": s.snr,
                }
                for s in ds.specs
            ],
        },
    )


def load_dataset(in_dir) -> SynthDataset:
    src = Path(in_dir)
    meta = tensorio.read_manifest(src / "dataset.json")
    h, w = int(meta["height"]), int(meta["width"])
    n = int(meta["n_train"]) + int(meta["n_test"])
    specs = tuple(
        ModalitySpec(
            low_energy=s["low_energy"],
            high_energy=s["high_energy"],
            signal_band=s["signal_band"],
            snr=s["snr"],
        )
        for s in meta["specs"]
    )
    images = []
    for i in range(len(specs)):
        stack = tensorio.read_raw(src / f"mod{i}.f32")
        if stack.shape != (n, h * w):
            raise ValueError(f"mod{i}.f32: expected {(n, h * w)}, got {stack.shape}")
        images.append(stack.reshape(n, h, w))
    labels = tensorio.read_raw(src / "labels.f32").reshape(-1).astype(np.int64)
    return SynthDataset(
        images=images,
        labels=labels,
        n_train=int(meta["n_train"]),
        n_classes=int(meta["n_classes"]),
        specs=specs,
        seed=int(meta["seed"]),
    )
