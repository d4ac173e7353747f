"""Gray image and patch representations, rank statistics and netpbm IO.

Pixel values live in [0, 1] as float64 throughout; 8-bit quantization only
happens at file IO (or deliberately inside the sensor model).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ImageFormatError, OutOfBoundsError


class SpatialContext(Enum):
    HOMOGENEOUS = "homogeneous"
    DIFFUSE = "diffuse"
    EDGE = "edge"
    CORNER = "corner"
    SHADOW_BOUNDARY = "shadow_boundary"
    SHADOW = "shadow"
    SPECULAR = "specular"
    OCCLUDED = "occluded"


# Byte codes used when exporting a label map as a P5 image.
LABEL_CODES = {
    SpatialContext.HOMOGENEOUS: 10,
    SpatialContext.DIFFUSE: 20,
    SpatialContext.EDGE: 30,
    SpatialContext.CORNER: 40,
    SpatialContext.SHADOW_BOUNDARY: 50,
    SpatialContext.SHADOW: 60,
    SpatialContext.SPECULAR: 70,
    SpatialContext.OCCLUDED: 80,
}
CODE_TO_LABEL = {v: k for k, v in LABEL_CODES.items()}


@dataclass(frozen=True)
class GrayImage:
    """2D scalar field in [0, 1]. Immutable after construction."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Patch:
    """Square window of pixels with its center position in the source image."""

    size: int
    values: np.ndarray
    origin: tuple[int, int]

    def __post_init__(self):
        if self.size < 3 or self.size % 2 == 0:
            raise ValueError(f"patch size must be an odd integer >= 3, got {self.size}")
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != self.size * self.size:
            raise ValueError(
                f"expected {self.size * self.size} values, got {vals.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("patch contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def as_block(self) -> np.ndarray:
        return self.values.reshape(self.size, self.size)


@dataclass(frozen=True)
class RankVector:
    """Fractional (average) ranks of a value vector; ties get the mean of
    the positions they span, so the rank sum is always n(n+1)/2."""

    ranks: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranks, dtype=np.float64).reshape(-1)
        n = r.shape[0]
        if abs(r.sum() - n * (n + 1) / 2) > 1e-9:
            raise ValueError("rank sum does not equal n(n+1)/2")
        r.setflags(write=False)
        object.__setattr__(self, "ranks", r)


def fractional_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) of a 1D array, ties averaged."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.shape[0]
    order = np.argsort(v, kind="stable")
    sv = v[order]
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sv[j + 1] == sv[i]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def rank_vector(p: Patch) -> RankVector:
    return RankVector(fractional_ranks(p.values))


def extract_patch(img: GrayImage, center: tuple[int, int], s: int) -> Patch:
    """Copy the s x s window centered at (row, col). No border padding."""
    if s < 3 or s % 2 == 0:
        raise ValueError(f"patch size must be an odd integer >= 3, got {s}")
    row, col = center
    half = s // 2
    if row - half < 0 or col - half < 0 or row + half >= img.height or col + half >= img.width:
        raise OutOfBoundsError(
            f"{s}x{s} window at center ({row}, {col}) exceeds "
            f"{img.height}x{img.width} image bounds"
        )
    window = img.data[row - half : row + half + 1, col - half : col + half + 1]
    return Patch(size=s, values=window.copy().reshape(-1), origin=(row, col))


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]) / 8.0
_SOBEL_Y = _SOBEL_X.T


def _convolve2d_same(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    # nearest-edge padding keeps the window self-contained
    pad = np.pad(a, 1, mode="edge")
    out = np.zeros_like(a)
    for di in range(3):
        for dj in range(3):
            out += k[di, dj] * pad[di : di + a.shape[0], dj : dj + a.shape[1]]
    return out


def structure_tensor_eigenvalues(img: GrayImage, center: tuple[int, int], s: int):
    """Eigenvalues (descending) of the window-averaged structure tensor."""
    window = extract_patch(img, center, s).as_block()
    gx = _convolve2d_same(window, _SOBEL_X)
    gy = _convolve2d_same(window, _SOBEL_Y)
    jxx = float(np.mean(gx * gx))
    jyy = float(np.mean(gy * gy))
    jxy = float(np.mean(gx * gy))
    tr = jxx + jyy
    disc = np.sqrt(max((jxx - jyy) ** 2 + 4.0 * jxy * jxy, 0.0))
    return (tr + disc) / 2.0, (tr - disc) / 2.0


def classify_context(
    img: GrayImage,
    center: tuple[int, int],
    s: int,
    tau_low: float = 1e-4,
    tau_high: float = 1e-2,
) -> SpatialContext:
    """Structure-tensor heuristic over the window.

    Only ever returns Homogeneous / Edge / Corner / Diffuse; shadow, specular
    and occlusion labels come from scene ground truth, never from here.
    """
    lam1, lam2 = structure_tensor_eigenvalues(img, center, s)
    if lam1 < tau_low and lam2 < tau_low:
        return SpatialContext.HOMOGENEOUS
    if lam1 >= tau_high and lam2 < tau_low:
        return SpatialContext.EDGE
    if lam1 >= tau_high and lam2 >= tau_high:
        return SpatialContext.CORNER
    return SpatialContext.DIFFUSE


# ---------------------------------------------------------------------------
# netpbm IO: PGM (P2/P5) and PPM (P3/P6) readers, P5 writer.
# ---------------------------------------------------------------------------

# integer numerators over 1000 so equal r=g=b recovers the value exactly
_LUMA = (299.0, 587.0, 114.0)


class _TokenReader:
    """Whitespace/comment-aware token scanner that tracks byte offsets."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        while self.pos < len(self.data):
            c = self.data[self.pos : self.pos + 1]
            if c.isspace():
                self.pos += 1
            elif c == b"#":
                nl = self.data.find(b"\n", self.pos)
                self.pos = len(self.data) if nl < 0 else nl + 1
            else:
                break

    def next_token(self) -> bytes:
        self.skip_space()
        if self.pos >= len(self.data):
            raise ImageFormatError("unexpected end of header", offset=self.pos)
        start = self.pos
        while self.pos < len(self.data) and not self.data[self.pos : self.pos + 1].isspace():
            self.pos += 1
        return self.data[start : self.pos]

    def next_int(self, what: str) -> int:
        start = self.pos
        tok = self.next_token()
        try:
            return int(tok)
        except ValueError:
            raise ImageFormatError(f"invalid {what} token {tok!r}", offset=start) from None


def load_image(path) -> GrayImage:
    """Read a PGM (P2/P5) or PPM (P3/P6) file into a GrayImage.

    Color input is reduced to gray with 0.299/0.587/0.114 luminance weights;
    samples are scaled by maxval into [0, 1].
    """
    with open(path, "rb") as fh:
        data = fh.read()
    rd = _TokenReader(data)
    magic = rd.next_token()
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic!r}", offset=0)
    width = rd.next_int("width")
    height = rd.next_int("height")
    maxval = rd.next_int("maxval")
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"invalid dimensions {width}x{height}", offset=rd.pos)
    if maxval == 0:
        raise ImageFormatError("maxval 0 is invalid", offset=rd.pos)
    if maxval > 65535:
        raise ImageFormatError(f"maxval {maxval} exceeds 65535", offset=rd.pos)

    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P5", b"P6"):
        # exactly one whitespace byte separates maxval from the raster
        if rd.pos >= len(data) or not data[rd.pos : rd.pos + 1].isspace():
            raise ImageFormatError("missing raster separator", offset=rd.pos)
        rd.pos += 1
        bytes_per = 1 if maxval < 256 else 2
        expected = count * bytes_per
        raster = data[rd.pos : rd.pos + expected]
        if len(raster) < expected:
            raise ImageFormatError(
                f"truncated raster: expected {expected} bytes, received {len(raster)}",
                offset=rd.pos + len(raster),
            )
        dtype = np.dtype(">u2") if bytes_per == 2 else np.uint8
        samples = np.frombuffer(raster, dtype=dtype, count=count).astype(np.float64)
    else:
        samples = np.empty(count, dtype=np.float64)
        for i in range(count):
            samples[i] = rd.next_int("sample")

    if np.any(samples > maxval):
        raise ImageFormatError(f"sample exceeds maxval {maxval}", offset=rd.pos)
    samples /= maxval
    if channels == 3:
        rgb = samples.reshape(height, width, 3)
        gray = (
            _LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]
        ) / 1000.0
    else:
        gray = samples.reshape(height, width)
    return GrayImage(gray)


def save_image(img: GrayImage, path) -> None:
    """Write binary PGM (P5), maxval 255, value v stored as the nearest
    integer to v * 255 (exact halves round down: 0.5 -> 127)."""
    raster = np.ceil(img.data * 255.0 - 0.5).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster.tobytes())


def save_label_map(labels: np.ndarray, path) -> None:
    """Write a per-pixel SpatialContext code map as a P5 image."""
    arr = np.asarray(labels, dtype=np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())
