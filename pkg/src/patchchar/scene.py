"""Procedural synthetic scenes with ground-truth context labels.

A scene is a flat (2D) stand-in for a rendered 3D world: an albedo/texture
base, separable direct and ambient illumination gain fields, a depth field
for the fog model, and a per-pixel spatial-context label map assigned by
construction. The two-component illumination (ambient + scaled direct) is
the minimal mechanism that makes shadow boundaries order-inconsistent under
global light change while diffuse interiors stay consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError
from .image import LABEL_CODES, GrayImage, SpatialContext
from .perturb import FogParams, SensorModel, fog, sensor


@dataclass(frozen=True)
class RegionSpec:
    """One textured rectangle of the layout.

    kind: constant | gradient | grating | checkerboard | noise | mirror
    rect: (top, left, height, width)
    params: texture parameters (see _make_texture)
    label: optional label override (e.g. "specular" for a mirror region)
    """

    kind: str
    rect: tuple[int, int, int, int]
    params: dict = field(default_factory=dict)
    label: str | None = None


@dataclass(frozen=True)
class ShadowSpec:
    """Half-plane shadow with a linear penumbra ramp.

    The shadow falls on the side of the line where `axis` coordinate exceeds
    `offset + penumbra` (axis is "row" or "col"). Rows/cols in
    [offset, offset + penumbra) form the penumbra band.
    """

    axis: str
    offset: int
    penumbra: int

    def __post_init__(self):
        if self.axis not in ("row", "col"):
            raise ParameterError(f"shadow axis must be 'row' or 'col', got {self.axis!r}")
        if self.penumbra < 1:
            raise ParameterError(f"penumbra width must be >= 1, got {self.penumbra}")


@dataclass(frozen=True)
class OccluderSpec:
    """Foreground rectangle pasted over rendered frames (geometric change)."""

    rect: tuple[int, int, int, int]
    texture: RegionSpec


@dataclass(frozen=True)
class LocalLight:
    """Radial lamp with linear falloff (night / street-light model)."""

    center: tuple[float, float]
    radius: float
    intensity: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError(f"light radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class TemporalState:
    """Temporal part of the contextual variable: global light multiplier,
    optional local light, optional fog."""

    direct_level: float = 0.0
    local_light: LocalLight | None = None
    fog: FogParams | None = None

    def __post_init__(self):
        if not np.isfinite(self.direct_level) or self.direct_level < 0:
            raise ParameterError(f"direct_level must be finite and >= 0, got {self.direct_level}")


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    regions: tuple[RegionSpec, ...]
    shadow: ShadowSpec | None = None
    occluder: OccluderSpec | None = None
    depth_scale: float = 50.0
    seed: int = 0


@dataclass(frozen=True)
class Scene:
    base: GrayImage
    illum_direct: GrayImage
    illum_ambient: GrayImage
    depth: GrayImage
    labels: np.ndarray  # uint8 codes from image.LABEL_CODES
    depth_scale: float
    occluder: OccluderSpec | None = None

    def label_mask(self, ctx: SpatialContext) -> np.ndarray:
        return self.labels == LABEL_CODES[ctx]


_TEXTURE_LABEL = {
    "constant": SpatialContext.HOMOGENEOUS,
    "gradient": SpatialContext.HOMOGENEOUS,
    "grating": SpatialContext.EDGE,
    "checkerboard": SpatialContext.CORNER,
    "noise": SpatialContext.DIFFUSE,
    "mirror": SpatialContext.DIFFUSE,
}

_LABEL_BY_NAME = {ctx.value: ctx for ctx in SpatialContext}


def _make_texture(region: RegionSpec, rng: np.random.Generator, done: list[np.ndarray]) -> np.ndarray:
    _, _, h, w = region.rect
    p = region.params
    if region.kind == "constant":
        return np.full((h, w), float(p.get("value", 0.2)))
    if region.kind == "gradient":
        lo, hi = float(p.get("lo", 0.05)), float(p.get("hi", 0.33))
        axis = p.get("axis", "col")
        n = w if axis == "col" else h
        ramp = np.linspace(lo, hi, n)
        tex = np.tile(ramp, (h, 1)) if axis == "col" else np.tile(ramp[:, None], (1, w))
        ripple = float(p.get("ripple", 0.0))
        if ripple > 0.0:
            # gentle diagonal undulation; keeps the region low-contrast while
            # guaranteeing some variation inside every medium-sized window
            period = float(p.get("ripple_period", 16.0))
            rr, cc = np.ogrid[:h, :w]
            tex = tex + ripple * np.sin(2.0 * np.pi * (rr + cc) / period)
        return tex
    if region.kind == "grating":
        mean = float(p.get("mean", 0.19))
        amp = float(p.get("amplitude", 0.13))
        period = float(p.get("period", 16.0))
        axis = p.get("axis", "col")
        n = w if axis == "col" else h
        wave = mean + amp * np.sin(2.0 * np.pi * np.arange(n) / period)
        return np.tile(wave, (h, 1)) if axis == "col" else np.tile(wave[:, None], (1, w))
    if region.kind == "checkerboard":
        cell = int(p.get("cell", 8))
        lo, hi = float(p.get("lo", 0.05)), float(p.get("hi", 0.30))
        jitter = float(p.get("jitter", 0.0))
        nr, nc = -(-h // cell), -(-w // cell)
        if p.get("randomize", True):
            cells = rng.uniform(lo, hi, size=(nr, nc))
        else:
            cells = np.where((np.add.outer(np.arange(nr), np.arange(nc)) % 2) == 0, lo, hi)
        tex = np.repeat(np.repeat(cells, cell, axis=0), cell, axis=1)[:h, :w]
        if jitter > 0:
            tex = tex + rng.uniform(-jitter, jitter, size=(h, w))
        return tex
    if region.kind == "noise":
        lo, hi = float(p.get("lo", 0.06)), float(p.get("hi", 0.32))
        return rng.uniform(lo, hi, size=(h, w))
    if region.kind == "mirror":
        src = done[int(p.get("source", 0))]
        tex = src[:h, :w]
        if tex.shape != (h, w):
            tex = np.tile(src, (-(-h // src.shape[0]), -(-w // src.shape[1])))[:h, :w]
        if p.get("flip", True):
            tex = tex[:, ::-1]
        return tex.copy()
    raise ParameterError(f"unknown texture kind {region.kind!r}")


def _check_rect(rect, height, width, what):
    top, left, h, w = rect
    if h < 0 or w < 0 or top < 0 or left < 0 or top + h > height or left + w > width:
        raise ParameterError(f"{what} rect {rect} outside {height}x{width} canvas")


def generate_scene(spec: SceneSpec, seed: int | None = None) -> Scene:
    """Build the scene deterministically from (spec, seed).

    Label priority where constructs overlap: Occluded > ShadowBoundary >
    Shadow > texture label. Direct illumination is 0 in the umbra, ramps
    linearly across the penumbra and is 1 outside; ambient is 1 everywhere.
    """
    if seed is None:
        seed = spec.seed
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    h, w = spec.height, spec.width
    base = np.full((h, w), 0.2)
    labels = np.full((h, w), LABEL_CODES[SpatialContext.HOMOGENEOUS], dtype=np.uint8)

    done: list[np.ndarray] = []
    for region in spec.regions:
        _check_rect(region.rect, h, w, "region")
        top, left, rh, rw = region.rect
        tex = _make_texture(region, rng, done)
        done.append(tex)
        base[top : top + rh, left : left + rw] = tex
        if region.label is not None:
            try:
                ctx = _LABEL_BY_NAME[region.label]
            except KeyError:
                raise ParameterError(f"unknown label override {region.label!r}") from None
        else:
            ctx = _TEXTURE_LABEL[region.kind]
        labels[top : top + rh, left : left + rw] = LABEL_CODES[ctx]

    illum_direct = np.ones((h, w))
    if spec.shadow is not None:
        sh = spec.shadow
        coord = np.arange(h) if sh.axis == "row" else np.arange(w)
        # ramp: 1 above the band, linear 1 -> 0 across it, 0 (umbra) beyond
        ramp = np.clip(1.0 - (coord - sh.offset + 1.0) / sh.penumbra, 0.0, 1.0)
        in_band = (coord >= sh.offset) & (coord < sh.offset + sh.penumbra)
        in_umbra = coord >= sh.offset + sh.penumbra
        if sh.axis == "row":
            illum_direct *= ramp[:, None]
            labels[in_band, :] = LABEL_CODES[SpatialContext.SHADOW_BOUNDARY]
            labels[in_umbra, :] = LABEL_CODES[SpatialContext.SHADOW]
        else:
            illum_direct *= ramp[None, :]
            labels[:, in_band] = LABEL_CODES[SpatialContext.SHADOW_BOUNDARY]
            labels[:, in_umbra] = LABEL_CODES[SpatialContext.SHADOW]

    if spec.occluder is not None:
        _check_rect(spec.occluder.rect, h, w, "occluder")
        top, left, rh, rw = spec.occluder.rect
        labels[top : top + rh, left : left + rw] = LABEL_CODES[SpatialContext.OCCLUDED]

    depth = np.tile(np.linspace(0.0, 1.0, h)[:, None], (1, w))
    return Scene(
        base=GrayImage(base),
        illum_direct=GrayImage(illum_direct),
        illum_ambient=GrayImage(np.ones((h, w))),
        depth=GrayImage(depth),
        labels=labels,
        depth_scale=spec.depth_scale,
        occluder=spec.occluder,
    )


def render_state(
    scene: Scene,
    state: TemporalState,
    sensor_model: SensorModel | None = None,
    seed: int = 0,
) -> GrayImage:
    """pixel = base * (ambient + direct_level * direct + local term), then
    fog, then the sensor model, clamped to [0, 1]."""
    gain = scene.illum_ambient.data + state.direct_level * scene.illum_direct.data
    if state.local_light is not None:
        ll = state.local_light
        rows = np.arange(scene.base.height)[:, None]
        cols = np.arange(scene.base.width)[None, :]
        dist = np.hypot(rows - ll.center[0], cols - ll.center[1])
        gain = gain + ll.intensity * np.clip(1.0 - dist / ll.radius, 0.0, None)
    img = GrayImage(np.clip(scene.base.data * gain, 0.0, 1.0))
    if state.fog is not None:
        img = fog(img, scene.depth, scene.depth_scale, state.fog)
    if sensor_model is not None:
        img = sensor(img, sensor_model, seed)
    return img


def apply_occlusion(img: GrayImage, rect, fg_texture: RegionSpec, seed: int) -> GrayImage:
    """Replace the rectangle with a sample of the foreground texture."""
    _check_rect(rect, img.height, img.width, "occluder")
    top, left, rh, rw = rect
    if rh == 0 or rw == 0:
        return img
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    tex = _make_texture(replace(fg_texture, rect=(0, 0, rh, rw)), rng, [])
    out = img.data.copy()
    out[top : top + rh, left : left + rw] = np.clip(tex, 0.0, 1.0)
    return GrayImage(out)


def default_scene_spec(width: int = 256, height: int = 256, seed: int = 0) -> SceneSpec:
    """256x256 six-context layout: a 2x2 texture grid on top, a weakly
    textured strip at the bottom crossed by the shadow half-plane, and an
    occluder rectangle inside the diffuse region."""
    if width < 128 or height < 128:
        raise ParameterError("default layout needs at least a 128x128 canvas")
    gh = (height * 200) // 256  # grid height; shadow strip below
    mid_r, mid_c = gh // 2, width // 2
    strip = height - gh
    penumbra = 6
    regions = (
        RegionSpec("gradient", (0, 0, mid_r, mid_c),
                   {"lo": 0.05, "hi": 0.30, "ripple": 0.03, "ripple_period": 24}),
        RegionSpec("noise", (0, mid_c, mid_r, width - mid_c), {"lo": 0.06, "hi": 0.32}),
        RegionSpec("grating", (mid_r, 0, gh - mid_r, mid_c),
                   {"mean": 0.19, "amplitude": 0.13, "period": 16}),
        RegionSpec("checkerboard", (mid_r, mid_c, gh - mid_r, width - mid_c),
                   {"cell": 8, "lo": 0.05, "hi": 0.30, "jitter": 0.025}),
        RegionSpec("noise", (gh, 0, strip, width), {"lo": 0.25, "hi": 0.33}),
    )
    occluder = OccluderSpec(
        rect=(20, mid_c + 22, 50, 64),
        texture=RegionSpec("noise", (0, 0, 50, 64), {"lo": 0.40, "hi": 0.80}),
    )
    shadow = ShadowSpec(axis="row", offset=gh - 2, penumbra=penumbra)
    return SceneSpec(
        width=width,
        height=height,
        regions=regions,
        shadow=shadow,
        occluder=occluder,
        seed=seed,
    )
