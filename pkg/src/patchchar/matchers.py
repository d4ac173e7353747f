"""Patch-distance suite: SSD, NCC, ordinal measures, rank-set projection,
DCT transforms and DCT-ordinal signatures.

Invariance ladder (exact, see tests): SSD is zero iff the patches are
identical; NCC is 1 under positive affine photometric maps; the Spearman and
Hamming ordinal measures are invariant under strictly monotone maps; the
DCT-ordinal distance is invariant under positive affine maps; the rank-set
projection distance is zero iff the second patch is order-consistent with
the first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .errors import ParameterError, ZeroVarianceError
from .image import Patch, fractional_ranks


def _check_sizes(p1: Patch, p2: Patch):
    if p1.size != p2.size:
        raise ParameterError(f"patch size mismatch: {p1.size} vs {p2.size}")


def ssd(p1: Patch, p2: Patch) -> float:
    """Sum of squared differences."""
    _check_sizes(p1, p2)
    d = p1.values - p2.values
    return float(np.dot(d, d))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    # single-sqrt denominator so corr(x, x) evaluates to exactly 1.0
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.dot(dx, dx))
    sy = float(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("correlation undefined for a constant vector")
    return float(np.dot(dx, dy)) / float(np.sqrt(sx * sy))


def ncc(p1: Patch, p2: Patch) -> float:
    """Pearson correlation of the pixel vectors."""
    _check_sizes(p1, p2)
    return _pearson(p1.values, p2.values)


def spearman_rho(p1: Patch, p2: Patch) -> float:
    """Pearson correlation of the fractional rank vectors (ties averaged)."""
    _check_sizes(p1, p2)
    return _pearson(fractional_ranks(p1.values), fractional_ranks(p2.values))


def abs_spearman(p1: Patch, p2: Patch) -> float:
    return abs(spearman_rho(p1, p2))


def ordinal_hamming(p1: Patch, p2: Patch) -> int:
    """Count of positions where the two fractional rank vectors differ."""
    _check_sizes(p1, p2)
    r1 = fractional_ranks(p1.values)
    r2 = fractional_ranks(p2.values)
    return int(np.count_nonzero(r1 != r2))


def pool_adjacent_violators(y: np.ndarray) -> np.ndarray:
    """Isotonic (non-decreasing) least-squares fit of y, unit weights."""
    n = y.shape[0]
    level = y.astype(np.float64).copy()
    weight = np.ones(n)
    # index of the block each stack slot describes
    nblocks = 0
    vals = np.empty(n)
    wts = np.empty(n)
    lens = np.empty(n, dtype=np.intp)
    for i in range(n):
        vals[nblocks] = level[i]
        wts[nblocks] = weight[i]
        lens[nblocks] = 1
        nblocks += 1
        while nblocks > 1 and vals[nblocks - 2] > vals[nblocks - 1]:
            tot = wts[nblocks - 2] + wts[nblocks - 1]
            vals[nblocks - 2] = (
                wts[nblocks - 2] * vals[nblocks - 2] + wts[nblocks - 1] * vals[nblocks - 1]
            ) / tot
            wts[nblocks - 2] = tot
            lens[nblocks - 2] += lens[nblocks - 1]
            nblocks -= 1
    return np.repeat(vals[:nblocks], lens[:nblocks])


def rank_consistency_distance(q_b: Patch, q_c: Patch, literal: bool = False) -> float:
    """Distance of the current patch to the order cone of the background patch.

    The current values are reordered by the background's sort permutation,
    projected onto the non-decreasing cone with pool-adjacent-violators, and
    the permutation inverted. Default returns mean squared distance between
    the current patch and its projection (distance-to-cone semantics);
    ``literal=True`` selects the mean squared difference between the
    background patch and the projection instead.
    """
    _check_sizes(q_b, q_c)
    order = np.argsort(q_b.values, kind="stable")
    fit_sorted = pool_adjacent_violators(q_c.values[order])
    q_hat = np.empty_like(fit_sorted)
    q_hat[order] = fit_sorted
    ref = q_b.values if literal else q_c.values
    d = ref - q_hat
    return float(np.dot(d, d)) / d.shape[0]


# ---------------------------------------------------------------------------
# DCT block transforms and ordinal signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoeffBlock:
    """s x s coefficients in the orthonormal 2D DCT-II basis."""

    size: int
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.shape != (self.size, self.size):
            raise ValueError(f"expected {self.size}x{self.size} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def dc(self) -> float:
        return float(self.coefficients[0, 0])


@dataclass(frozen=True)
class DctSignature:
    """Zig-zag indices of the k largest-positive and k most-negative AC
    coefficients (DC excluded; zero coefficients never qualify)."""

    k: int
    pos_idx: tuple[int, ...]
    neg_idx: tuple[int, ...]


def dct2(p: Patch) -> CoeffBlock:
    """Orthonormal 2D DCT-II of the patch."""
    return CoeffBlock(p.size, dctn(p.as_block(), norm="ortho"))


def idct2(c: CoeffBlock) -> Patch:
    block = idctn(np.asarray(c.coefficients), norm="ortho")
    return Patch(size=c.size, values=block.reshape(-1), origin=(c.size // 2, c.size // 2))


def zigzag_indices(s: int) -> np.ndarray:
    """(row, col) pairs of an s x s block in zig-zag scan order."""
    out = np.empty((s * s, 2), dtype=np.intp)
    n = 0
    for d in range(2 * s - 1):
        rng = range(d + 1) if d % 2 == 0 else range(d, -1, -1)
        for r in rng:
            c = d - r
            if r < s and c < s:
                out[n] = (r, c)
                n += 1
    return out[:n]


def _ac_zigzag(c: CoeffBlock) -> np.ndarray:
    zz = zigzag_indices(c.size)[1:]  # drop DC
    return c.coefficients[zz[:, 0], zz[:, 1]]


def dct_signature(c: CoeffBlock, k: int) -> DctSignature:
    """Indices (1-based zig-zag positions, DC excluded) of the dominant
    contrasting coefficient pairs; ties broken by earlier zig-zag position."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    ac = _ac_zigzag(c)
    # stable sort on -value keeps earlier zig-zag positions first among ties
    pos_order = np.argsort(-ac, kind="stable")
    pos = [int(i) + 1 for i in pos_order[:k] if ac[i] > 0]
    neg_order = np.argsort(ac, kind="stable")
    neg = [int(i) + 1 for i in neg_order[:k] if ac[i] < 0]
    return DctSignature(k=k, pos_idx=tuple(pos), neg_idx=tuple(neg))


def dct_ro_distance(p1: Patch, p2: Patch, k: int = 3) -> float:
    """Rank-order mismatch of AC coefficients over the union of the two
    patches' dominant signatures, normalized by the union size."""
    _check_sizes(p1, p2)
    c1, c2 = dct2(p1), dct2(p2)
    sig1 = dct_signature(c1, k)
    sig2 = dct_signature(c2, k)
    union = sorted(set(sig1.pos_idx) | set(sig1.neg_idx) | set(sig2.pos_idx) | set(sig2.neg_idx))
    if not union:
        return 0.0
    r1 = fractional_ranks(_ac_zigzag(c1))
    r2 = fractional_ranks(_ac_zigzag(c2))
    idx = np.asarray(union, dtype=np.intp) - 1
    return float(np.count_nonzero(r1[idx] != r2[idx])) / len(union)


def dct_energy_difference(ref: CoeffBlock, cur: CoeffBlock, bins: int = 4) -> float:
    """Max over radial-frequency rings of the absolute AC energy difference,
    with each block's AC coefficients normalized by its DC coefficient."""
    if ref.size != cur.size:
        raise ParameterError(f"block size mismatch: {ref.size} vs {cur.size}")
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    s = ref.size
    if ref.dc == 0.0 or cur.dc == 0.0:
        raise ZeroVarianceError("cannot normalize by a zero DC coefficient")
    u, v = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    radius = np.hypot(u, v)
    rmax = radius.max()
    ring = np.minimum((radius / rmax * bins).astype(np.intp), bins - 1)
    ac_mask = radius > 0
    energies = np.zeros((2, bins))
    for i, block in enumerate((ref, cur)):
        norm = block.coefficients / block.dc
        np.add.at(energies[i], ring[ac_mask], norm[ac_mask] ** 2)
    return float(np.abs(energies[0] - energies[1]).max())


# ---------------------------------------------------------------------------
# Registry: stable metric names used by the CLI and config files.
# ---------------------------------------------------------------------------

METRICS = {
    "ssd": ssd,
    "ncc": ncc,
    "rho": spearman_rho,
    "abs_rho": abs_spearman,
    "ro_hamming": ordinal_hamming,
    "ro_proj": rank_consistency_distance,
    "dct_ro": dct_ro_distance,
    "dct_energy": lambda p1, p2: dct_energy_difference(dct2(p1), dct2(p2)),
}

# Direction in which each metric moves when the patch has truly changed.
POLARITY = {
    "ssd": "higher",
    "ncc": "lower",
    "rho": "lower",
    "abs_rho": "lower",
    "ro_hamming": "higher",
    "ro_proj": "higher",
    "dct_ro": "higher",
    "dct_energy": "higher",
}


def get_metric(name: str):
    try:
        return METRICS[name]
    except KeyError:
        raise ParameterError(
            f"unknown metric {name!r}; registered: {', '.join(sorted(METRICS))}"
        ) from None
