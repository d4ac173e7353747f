"""Quasi-invariant patch matching and simulation-driven performance
characterization: synthetic scenes, physics-inspired perturbations,
criterion-manifold sweeps, ROC analysis and block-level change detection."""

from .image import GrayImage, Patch, RankVector, SpatialContext
from .scene import Scene, SceneSpec, TemporalState, default_scene_spec, generate_scene
from .perturb import FogParams, NoiseSpec, SensorModel

__all__ = [
    "GrayImage",
    "Patch",
    "RankVector",
    "SpatialContext",
    "Scene",
    "SceneSpec",
    "TemporalState",
    "default_scene_spec",
    "generate_scene",
    "FogParams",
    "NoiseSpec",
    "SensorModel",
]

__version__ = "0.1.0"
