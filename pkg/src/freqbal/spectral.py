"""Patch-DCT band maps and FFT windowed filtering for grayscale planes.

The patch pipeline tiles an image into non-overlapping p x p patches,
applies an orthonormal 2-D DCT-II to each, takes the top-left q x q corner
of every coefficient block as its low-frequency component and the
bottom-right q x q corner as its high-frequency component, and reassembles
the corners by patch position into two maps of shape (H*q/p, W*q/p).

The FFT filters operate on the whole plane instead: the spectrum is
shifted so DC sits at (H//2, W//2) and an n x n window centered there is
either kept (low pass) or zeroed (high pass).

All functions are pure; arrays are never modified in place.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SpectralConfig",
    "FrequencyMaps",
    "partition_patches",
    "merge_patches",
    "dct2",
    "idct2",
    "extract_bands",
    "assemble_maps",
    "compute_maps",
    "compute_maps_batch",
    "fft_filter",
    "spectral_energy",
    "to_plane",
    "center_crop",
]


@dataclass(frozen=True)
class SpectralConfig:
    """Patch geometry and score parameters shared across the pipeline.

    p: patch side in pixels; q: band block side in coefficients;
    sigma: stabilizer added to the flipped high band in the ratio score;
    omega_bank: history weight of the smoothed score bank.
    """

    p: int = 8
    q: int = 2
    sigma: float = 1e-8
    omega_bank: float = 0.5
    allow_overlap: bool = False

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"patch side must be >= 2, got {self.p}")
        if self.q < 1:
            raise ValueError(f"block side must be >= 1, got {self.q}")
        if 2 * self.q > self.p and not self.allow_overlap:
            raise ValueError(
                f"q={self.q} overlaps the low/high corners for p={self.p}; "
                "requires allow_overlap"
            )
        if self.q > self.p:
            raise ValueError(f"block side q={self.q} cannot exceed patch side p={self.p}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.omega_bank <= 1.0:
            raise ValueError(f"omega_bank must lie in [0,1], got {self.omega_bank}")


@dataclass(frozen=True)
class FrequencyMaps:
    """Low- and high-band coefficient maps of one plane, same shape each."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        if self.low.shape != self.high.shape:
            raise ValueError(f"band maps differ in shape: {self.low.shape} vs {self.high.shape}")


@lru_cache(maxsize=None)
def _dct_basis(p: int) -> np.ndarray:
    # Orthonormal DCT-II: row k holds c_k * cos(pi*(2n+1)*k / (2p)),
    # c_0 = sqrt(1/p), c_k = sqrt(2/p). Basis is orthogonal, so the
    # transform preserves the Frobenius norm exactly.
    k = np.arange(p)[:, None]
    n = np.arange(p)[None, :]
    basis = np.cos(np.pi * (2 * n + 1) * k / (2.0 * p)) * np.sqrt(2.0 / p)
    basis[0, :] = np.sqrt(1.0 / p)
    basis.setflags(write=False)
    return basis


def _check_plane(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("plane contains non-finite values")
    return img


def partition_patches(img, p: int) -> np.ndarray:
    """Tile a plane into non-overlapping p x p patches, row-major.

    Returns an array of shape (H/p * W/p, p, p). Both sides must divide
    evenly; callers crop or reject first.
    """
    img = _check_plane(img)
    h, w = img.shape
    if h % p or w % p:
        raise ValueError(f"plane {h}x{w} not divisible by patch side {p}")
    gh, gw = h // p, w // p
    return img.reshape(gh, p, gw, p).swapaxes(1, 2).reshape(gh * gw, p, p)


def merge_patches(patches, grid: tuple[int, int]) -> np.ndarray:
    """Inverse of partition_patches for a (rows, cols) patch grid."""
    patches = np.asarray(patches, dtype=np.float64)
    gh, gw = grid
    if patches.ndim != 3 or patches.shape[0] != gh * gw:
        raise ValueError(f"need {gh * gw} patches for grid {grid}, got {patches.shape}")
    p = patches.shape[1]
    return patches.reshape(gh, gw, p, p).swapaxes(1, 2).reshape(gh * p, gw * p)


def dct2(patch) -> np.ndarray:
    """Orthonormal 2-D DCT-II of the trailing two (square) axes."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim < 2 or patch.shape[-1] != patch.shape[-2]:
        raise ValueError(f"dct2 needs square trailing axes, got shape {patch.shape}")
    b = _dct_basis(patch.shape[-1])
    return b @ patch @ b.T


def idct2(coeffs) -> np.ndarray:
    """Inverse of dct2 (exact up to float rounding)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim < 2 or coeffs.shape[-1] != coeffs.shape[-2]:
        raise ValueError(f"idct2 needs square trailing axes, got shape {coeffs.shape}")
    b = _dct_basis(coeffs.shape[-1])
    return b.T @ coeffs @ b


def extract_bands(coeffs, q: int, allow_overlap: bool = False):
    """Slice the top-left (low) and bottom-right (high) q x q corners.

    Works on any (..., p, p) coefficient array. With q > p/2 the corners
    would share cells, which is rejected unless allow_overlap is set (the
    sweep harness exposes this deliberately degenerate regime).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    p = coeffs.shape[-1]
    if coeffs.ndim < 2 or coeffs.shape[-2] != p:
        raise ValueError(f"expected square trailing axes, got shape {coeffs.shape}")
    if q < 1 or q > p:
        raise ValueError(f"block side q={q} out of range for p={p}")
    if 2 * q > p and not allow_overlap:
        raise ValueError(f"q={q} overlaps the corners for p={p}; pass allow_overlap to force")
    low = coeffs[..., :q, :q].copy()
    high = coeffs[..., p - q :, p - q :].copy()
    return low, high


def assemble_maps(low_blocks, high_blocks, grid: tuple[int, int]) -> FrequencyMaps:
    """Reassemble per-patch corner blocks into whole-plane band maps.

    Blocks arrive in row-major patch order; the block of patch (r, c)
    occupies map region [r*q, (r+1)*q) x [c*q, (c+1)*q).
    """
    return FrequencyMaps(
        low=_tile_blocks(low_blocks, grid),
        high=_tile_blocks(high_blocks, grid),
    )


def _tile_blocks(blocks, grid: tuple[int, int]) -> np.ndarray:
    blocks = np.asarray(blocks, dtype=np.float64)
    gh, gw = grid
    if blocks.ndim != 3 or blocks.shape[0] != gh * gw:
        raise ValueError(f"need {gh * gw} blocks for grid {grid}, got shape {blocks.shape}")
    q = blocks.shape[1]
    if blocks.shape[2] != q:
        raise ValueError(f"blocks must be square, got shape {blocks.shape}")
    return blocks.reshape(gh, gw, q, q).swapaxes(1, 2).reshape(gh * q, gw * q)


def compute_maps(img, cfg: SpectralConfig) -> FrequencyMaps:
    """Full patch pipeline for one plane: partition, DCT, corners, tile."""
    img = _check_plane(img)
    low, high = compute_maps_batch(img[None], cfg)
    return FrequencyMaps(low=low[0], high=high[0])


def compute_maps_batch(imgs, cfg: SpectralConfig):
    """Vectorized pipeline over a stack of planes of shape (N, H, W).

    Returns (low, high) arrays of shape (N, H*q/p, W*q/p).
    """
    imgs = np.asarray(imgs, dtype=np.float64)
    if imgs.ndim != 3:
        raise ValueError(f"expected (N, H, W), got shape {imgs.shape}")
    n, h, w = imgs.shape
    p, q = cfg.p, cfg.q
    if h % p or w % p:
        raise ValueError(f"planes {h}x{w} not divisible by patch side {p}")
    gh, gw = h // p, w // p
    patches = imgs.reshape(n, gh, p, gw, p).swapaxes(2, 3)
    coeffs = dct2(patches)
    low, high = extract_bands(coeffs, q, allow_overlap=cfg.allow_overlap)
    low = low.swapaxes(2, 3).reshape(n, gh * q, gw * q)
    high = high.swapaxes(2, 3).reshape(n, gh * q, gw * q)
    return low, high


def fft_filter(img, kind: str, n: int) -> np.ndarray:
    """Keep (low_pass) or discard (high_pass) the centered n x n spectrum window.

    The spectrum is fftshifted so DC lands at (H//2, W//2); the window of
    side n starts at center - n//2 on each axis, putting any odd-window
    asymmetry toward the bottom/right. Complementary kinds with the same n
    sum back to the input exactly (up to float rounding).
    """
    img = _check_plane(img)
    h, w = img.shape
    if kind not in ("low_pass", "high_pass"):
        raise ValueError(f"unknown filter kind {kind!r}")
    if n < 1 or n > min(h, w):
        raise ValueError(f"window side {n} out of range for {h}x{w} plane")
    spec = np.fft.fftshift(np.fft.fft2(img))
    cy, cx = h // 2, w // 2
    rows = slice(cy - n // 2, cy - n // 2 + n)
    cols = slice(cx - n // 2, cx - n // 2 + n)
    if kind == "low_pass":
        kept = np.zeros_like(spec)
        kept[rows, cols] = spec[rows, cols]
    else:
        kept = spec.copy()
        kept[rows, cols] = 0.0
    return np.fft.ifft2(np.fft.ifftshift(kept)).real


def spectral_energy(img) -> float:
    """Total spectral power, sum |FFT|^2 / N; equals the spatial sum of squares."""
    img = _check_plane(img)
    spec = np.fft.fft2(img)
    return float(np.sum(np.abs(spec) ** 2) / img.size)


def to_plane(arr) -> np.ndarray:
    """Reduce an (H, W) or (H, W, C) array to one plane by channel averaging."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3:
        return arr.mean(axis=2)
    raise ValueError(f"expected (H, W) or (H, W, C), got shape {arr.shape}")


def center_crop(img, multiple: int) -> np.ndarray:
    """Crop a plane to the largest centered region divisible by `multiple`."""
    img = _check_plane(img)
    h, w = img.shape
    h2, w2 = (h // multiple) * multiple, (w // multiple) * multiple
    if h2 == 0 or w2 == 0:
        raise ValueError(f"plane {h}x{w} smaller than one {multiple}x{multiple} patch")
    top, left = (h - h2) // 2, (w - w2) // 2
    return img[top : top + h2, left : left + w2].copy()
