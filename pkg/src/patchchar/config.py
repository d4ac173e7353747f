"""Declarative experiment configuration (TOML key/value with nested tables)."""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace

from .changedetect import DetectorConfig
from .characterize import DEFAULT_FAMILY_LEVELS, DEFAULT_SIZES
from .errors import ConfigError, ParameterError
from .matchers import METRICS
from .perturb import SensorModel
from .scene import OccluderSpec, RegionSpec, SceneSpec, ShadowSpec, default_scene_spec


@dataclass(frozen=True)
class RocRecipe:
    n_samples: int = 400
    patch_size: int = 13
    gain_lo: float = 0.7
    gain_hi: float = 1.3
    noise_kind: str = "gaussian"
    noise_level: float = 0.06
    texture_lo: float = 0.15
    texture_hi: float = 0.95


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 42
    out: str = "out"
    jobs: int = 1
    metrics: tuple[str, ...] = ("abs_rho",)
    scene: SceneSpec = field(default_factory=default_scene_spec)
    family_name: str = "daylight"
    family_params: dict = field(default_factory=dict)
    levels: tuple[float, ...] | None = None  # None -> family default
    sensor: SensorModel | None = field(
        default_factory=lambda: SensorModel(thermal_sigma=2.0 / 255.0, quant_bits=8)
    )
    sizes: tuple[int, ...] = DEFAULT_SIZES
    samples_per_context: int = 100
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    roc: RocRecipe = field(default_factory=RocRecipe)

    def resolved_levels(self) -> tuple[float, ...]:
        if self.levels is not None:
            return self.levels
        try:
            return DEFAULT_FAMILY_LEVELS[self.family_name]
        except KeyError:
            raise ConfigError(
                f"no default levels for family {self.family_name!r}; set [family] levels"
            ) from None


def _scene_from_table(tbl: dict) -> SceneSpec:
    width = int(tbl.get("width", 256))
    height = int(tbl.get("height", 256))
    seed = int(tbl.get("seed", 0))
    if tbl.get("preset", "default") == "default" and "regions" not in tbl:
        return default_scene_spec(width=width, height=height, seed=seed)
    regions = tuple(
        RegionSpec(
            kind=r["kind"],
            rect=tuple(r["rect"]),
            params=dict(r.get("params", {})),
            label=r.get("label"),
        )
        for r in tbl.get("regions", [])
    )
    shadow = None
    if "shadow" in tbl:
        s = tbl["shadow"]
        shadow = ShadowSpec(
            axis=s.get("axis", "row"),
            offset=int(s["offset"]),
            penumbra=int(s.get("penumbra", 5)),
        )
    occluder = None
    if "occluder" in tbl:
        o = tbl["occluder"]
        tex = o.get("texture", {"kind": "noise", "params": {"lo": 0.4, "hi": 0.8}})
        rect = tuple(o["rect"])
        occluder = OccluderSpec(
            rect=rect,
            texture=RegionSpec(
                kind=tex["kind"],
                rect=(0, 0, rect[2], rect[3]),
                params=dict(tex.get("params", {})),
            ),
        )
    return SceneSpec(
        width=width, height=height, regions=regions, shadow=shadow,
        occluder=occluder, depth_scale=float(tbl.get("depth_scale", 50.0)), seed=seed,
    )


def _sensor_from_table(tbl: dict) -> SensorModel | None:
    if not tbl.get("enabled", True):
        return None
    return SensorModel(
        gain=float(tbl.get("gain", 1.0)),
        offset=float(tbl.get("offset", 0.0)),
        exposure=float(tbl.get("exposure", 1.0)),
        response=tbl.get("response", "identity"),
        gamma=float(tbl.get("gamma", 1.0)),
        s_alpha=float(tbl.get("s_alpha", 4.0)),
        shot_scale=float(tbl.get("shot_scale", 0.0)),
        thermal_sigma=float(tbl.get("thermal_sigma", 2.0 / 255.0)),
        quant_bits=int(tbl.get("quant_bits", 8)),
    )


def load_config(path: str | None) -> ExperimentConfig:
    """Parse a TOML config file; missing keys fall back to defaults."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            tbl = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    try:
        updates = {}
        if "seed" in tbl:
            updates["seed"] = int(tbl["seed"])
        if "out" in tbl:
            updates["out"] = str(tbl["out"])
        if "jobs" in tbl:
            updates["jobs"] = int(tbl["jobs"])
        if "metrics" in tbl:
            metrics = tuple(tbl["metrics"])
            for m in metrics:
                if m not in METRICS:
                    raise ConfigError(
                        f"unknown metric {m!r}; registered: {', '.join(sorted(METRICS))}"
                    )
            updates["metrics"] = metrics
        if "scene" in tbl:
            updates["scene"] = _scene_from_table(tbl["scene"])
        if "family" in tbl:
            fam = tbl["family"]
            updates["family_name"] = fam.get("name", cfg.family_name)
            updates["family_params"] = {
                k: v for k, v in fam.items() if k not in ("name", "levels")
            }
            if "levels" in fam:
                updates["levels"] = tuple(float(x) for x in fam["levels"])
        if "sensor" in tbl:
            updates["sensor"] = _sensor_from_table(tbl["sensor"])
        if "sweep" in tbl:
            sw = tbl["sweep"]
            if "sizes" in sw:
                updates["sizes"] = tuple(int(x) for x in sw["sizes"])
            if "samples_per_context" in sw:
                updates["samples_per_context"] = int(sw["samples_per_context"])
        if "detector" in tbl:
            d = tbl["detector"]
            updates["detector"] = DetectorConfig(
                metric=d.get("metric", "abs_rho"),
                block_size=int(d.get("block_size", 13)),
                threshold=float(d.get("threshold", 0.8)),
                threshold_policy=d.get("policy", "fixed"),
                kappa=float(d.get("kappa", 3.0)),
            )
        if "roc" in tbl:
            r = tbl["roc"]
            updates["roc"] = RocRecipe(
                n_samples=int(r.get("n_samples", 400)),
                patch_size=int(r.get("patch_size", 13)),
                gain_lo=float(r.get("gain_lo", 0.7)),
                gain_hi=float(r.get("gain_hi", 1.3)),
                noise_kind=r.get("noise_kind", "gaussian"),
                noise_level=float(r.get("noise_level", 0.06)),
                texture_lo=float(r.get("texture_lo", 0.15)),
                texture_hi=float(r.get("texture_hi", 0.95)),
            )
        return replace(cfg, **updates)
    except (KeyError, TypeError, ValueError, ParameterError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


DEFAULT_CONFIG_TOML = """\
# patchchar experiment configuration (all values shown are the defaults)

seed = 42
out = "out"
jobs = 1
metrics = ["abs_rho"]

[scene]
preset = "default"   # or provide [[scene.regions]] tables
width = 256
height = 256
seed = 0
depth_scale = 50.0

[family]
name = "daylight"    # identity | daylight | night | fog
# levels = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
# night params: center = [128.0, 128.0], radius = 200.0
# fog params: airlight = 0.8, direct_level = 1.0

[sensor]
enabled = true
gain = 1.0
offset = 0.0
exposure = 1.0
response = "identity"  # identity | gamma | s_curve
gamma = 1.0
s_alpha = 4.0
shot_scale = 0.0
thermal_sigma = 0.00784313725490196   # 2/255
quant_bits = 8

[sweep]
sizes = [5, 9, 13, 17, 21]
samples_per_context = 100

[detector]
metric = "abs_rho"
block_size = 13
threshold = 0.8
policy = "fixed"       # fixed | calibrated
kappa = 3.0

[roc]
n_samples = 400
patch_size = 13
gain_lo = 0.7
gain_hi = 1.3
noise_kind = "gaussian"  # gaussian | salt_pepper | speckle
noise_level = 0.06
texture_lo = 0.15
texture_hi = 0.95
"""


def dump_defaults(path: str) -> None:
    with open(path, "w") as fh:
        fh.write(DEFAULT_CONFIG_TOML)
