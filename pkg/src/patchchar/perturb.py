"""Photometric, atmospheric, sensor and stochastic perturbation operators.

Conventions:
  * every operator clamps its output to [0, 1] (fixed clamping points keep
    tests bit-reproducible);
  * stochastic operators take an explicit 64-bit seed and draw from a
    counter-based Philox generator, so output does not depend on pixel
    iteration order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .image import GrayImage


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


@dataclass(frozen=True)
class FogParams:
    """Homogeneous isotropic medium: extinction coefficient (per meter) and
    the constant airlight that single scattering collapses to."""

    beta: float
    airlight: float

    def __post_init__(self):
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 <= self.airlight <= 1.0:
            raise ParameterError(f"airlight must be in [0, 1], got {self.airlight}")


@dataclass(frozen=True)
class SensorModel:
    """Digitization pipeline: exposure, white balance, signal-dependent shot
    noise, thermal noise, response curve, quantization.

    shot_scale is the variance-per-unit-signal of the shot noise (Gaussian
    approximation with variance proportional to the pre-response signal).
    """

    gain: float = 1.0
    offset: float = 0.0
    exposure: float = 1.0
    response: str = "identity"  # identity | gamma | s_curve
    gamma: float = 1.0
    s_alpha: float = 4.0
    shot_scale: float = 0.0
    thermal_sigma: float = 0.0
    quant_bits: int = 8

    def __post_init__(self):
        if self.exposure <= 0:
            raise ParameterError(f"exposure must be > 0, got {self.exposure}")
        if self.response not in ("identity", "gamma", "s_curve"):
            raise ParameterError(f"unknown response {self.response!r}")
        if self.response == "gamma" and self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.shot_scale < 0 or self.thermal_sigma < 0:
            raise ParameterError("noise scales must be >= 0")
        if not 1 <= self.quant_bits <= 16:
            raise ParameterError(f"quant_bits must be in 1..16, got {self.quant_bits}")


# indicative per-kind levels used by the ROC defaults: gaussian sigma,
# salt & pepper replacement fraction, speckle variance
DEFAULT_NOISE_LEVELS = {"gaussian": 0.06, "salt_pepper": 0.05, "speckle": 0.1}


@dataclass(frozen=True)
class NoiseSpec:
    """One of the classical i.i.d. perturbations: gaussian / salt_pepper / speckle."""

    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "salt_pepper", "speckle"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.level < 0 or (self.kind == "salt_pepper" and self.level > 1):
            raise ParameterError(f"noise level {self.level} out of range for {self.kind}")

    def apply(self, img: GrayImage) -> GrayImage:
        if self.kind == "gaussian":
            return add_gaussian(img, self.level, self.seed)
        if self.kind == "salt_pepper":
            return add_salt_pepper(img, self.level, self.seed)
        return add_speckle(img, self.level, self.seed)


def gain_offset(img: GrayImage, a: float, b: float) -> GrayImage:
    """pixel <- clamp(a * pixel + b)."""
    return GrayImage(np.clip(a * img.data + b, 0.0, 1.0))


def gamma_map(img: GrayImage, gamma: float) -> GrayImage:
    """pixel <- pixel ** gamma; order preserving for any gamma > 0."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    return GrayImage(np.power(img.data, gamma))


def monotone_lut(img: GrayImage, lut) -> GrayImage:
    """8-bit quantize, map through a 256-entry non-decreasing table, rescale."""
    table = np.asarray(lut, dtype=np.float64).reshape(-1)
    if table.shape[0] != 256:
        raise ParameterError(f"lut must have 256 entries, got {table.shape[0]}")
    if np.any(np.diff(table) < 0):
        raise ParameterError("lut must be non-decreasing")
    idx = np.round(img.data * 255.0).astype(np.intp)
    lo, hi = table.min(), table.max()
    span = hi - lo if hi > lo else 1.0
    return GrayImage((table[idx] - lo) / span)


def fog(img: GrayImage, depth: GrayImage, depth_scale: float, params: FogParams) -> GrayImage:
    """Attenuation plus airlight: I' = I * exp(-beta d) + A * (1 - exp(-beta d))."""
    if depth.data.shape != img.data.shape:
        raise ParameterError(
            f"depth shape {depth.data.shape} does not match image {img.data.shape}"
        )
    if params.beta == 0.0:
        return img
    t = np.exp(-params.beta * depth.data * depth_scale)
    return GrayImage(img.data * t + params.airlight * (1.0 - t))


def _response(v: np.ndarray, model: SensorModel) -> np.ndarray:
    if model.response == "identity":
        return v
    if model.response == "gamma":
        return np.power(np.clip(v, 0.0, None), model.gamma)
    a = model.s_alpha
    return 0.5 + np.tanh(a * (v - 0.5)) / (2.0 * np.tanh(a / 2.0))


def sensor(img: GrayImage, model: SensorModel, seed: int) -> GrayImage:
    """Apply the digitization pipeline; deterministic given the seed."""
    rng = _rng(seed)
    e = model.gain * (img.data * model.exposure) + model.offset
    if model.shot_scale > 0:
        std = np.sqrt(model.shot_scale * np.clip(e, 0.0, None))
        e = e + rng.standard_normal(e.shape) * std
    if model.thermal_sigma > 0:
        e = e + rng.standard_normal(e.shape) * model.thermal_sigma
    v = _response(e, model)
    levels = 2**model.quant_bits - 1
    v = np.round(v * levels) / levels
    return GrayImage(np.clip(v, 0.0, 1.0))


def add_gaussian(img: GrayImage, sigma: float, seed: int) -> GrayImage:
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    rng = _rng(seed)
    return GrayImage(np.clip(img.data + rng.standard_normal(img.data.shape) * sigma, 0.0, 1.0))


def add_salt_pepper(img: GrayImage, density: float, seed: int) -> GrayImage:
    """Each pixel independently replaced by 0 or 1 (equal odds) with prob. density."""
    if not 0.0 <= density <= 1.0:
        raise ParameterError(f"density must be in [0, 1], got {density}")
    if density == 0:
        return img
    rng = _rng(seed)
    hit = rng.random(img.data.shape) < density
    salt = rng.random(img.data.shape) < 0.5
    out = img.data.copy()
    out[hit] = salt[hit].astype(np.float64)
    return GrayImage(out)


def add_speckle(img: GrayImage, variance: float, seed: int) -> GrayImage:
    """Multiplicative noise: pixel * (1 + N(0, variance))."""
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return img
    rng = _rng(seed)
    noise = rng.standard_normal(img.data.shape) * np.sqrt(variance)
    return GrayImage(np.clip(img.data * (1.0 + noise), 0.0, 1.0))
