"""Performance-characterization engine.

Sweeps a criterion function over (spatial context, perturbation level, patch
size), projects the resulting manifold, summarizes per-context statistics,
computes ROC curves and cross-dataset rank agreement.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ZeroVarianceError
from .image import GrayImage, Patch, SpatialContext, extract_patch
from .matchers import get_metric
from .perturb import FogParams, NoiseSpec, SensorModel
from .scene import (
    LocalLight,
    Scene,
    TemporalState,
    apply_occlusion,
    render_state,
)

DEFAULT_CONTEXTS = (
    SpatialContext.HOMOGENEOUS,
    SpatialContext.DIFFUSE,
    SpatialContext.EDGE,
    SpatialContext.CORNER,
    SpatialContext.SHADOW_BOUNDARY,
    SpatialContext.OCCLUDED,
)

DEFAULT_SIZES = (5, 9, 13, 17, 21)


@dataclass(frozen=True)
class PerturbationFamily:
    """Named map from a scalar level to a temporal state."""

    name: str
    make_state: object  # Callable[[float], TemporalState]

    def __call__(self, level: float) -> TemporalState:
        return self.make_state(level)


def make_family(name: str, params: dict | None = None) -> PerturbationFamily:
    """Instantiate a registered perturbation family.

    identity: level ignored, ambient reference conditions.
    daylight: level = global direct-light multiplier.
    night:    level = local-light intensity (params: center, radius).
    fog:      level = extinction coefficient (params: airlight, direct_level).
    """
    p = dict(params or {})
    if name == "identity":
        return PerturbationFamily(name, lambda level: TemporalState(direct_level=0.0))
    if name == "daylight":
        return PerturbationFamily(name, lambda level: TemporalState(direct_level=level))
    if name == "night":
        center = tuple(p.get("center", (128.0, 128.0)))
        radius = float(p.get("radius", 200.0))
        return PerturbationFamily(
            name,
            lambda level: TemporalState(
                direct_level=0.0,
                local_light=LocalLight(center=center, radius=radius, intensity=level),
            ),
        )
    if name == "fog":
        airlight = float(p.get("airlight", 0.8))
        direct = float(p.get("direct_level", 1.0))
        return PerturbationFamily(
            name,
            lambda level: TemporalState(
                direct_level=direct, fog=FogParams(beta=level, airlight=airlight)
            ),
        )
    raise ParameterError(
        f"unknown perturbation family {name!r}; registered: identity, daylight, night, fog"
    )


DEFAULT_FAMILY_LEVELS = {
    "identity": (0.0,),
    "daylight": tuple(np.linspace(0.2, 2.0, 10)),
    "night": tuple(np.linspace(2.0, 12.0, 10)),
    "fog": tuple(np.linspace(0.007, 0.07, 10)),
}


@dataclass(frozen=True)
class CriterionManifold:
    """Mean criterion per (context, level, size) cell, with per-cell sample
    counts and standard deviations. Cells that could not be sampled carry
    count 0 and NaN statistics."""

    contexts: tuple[SpatialContext, ...]
    levels: tuple[float, ...]
    sizes: tuple[int, ...]
    values: np.ndarray
    counts: np.ndarray
    spread: np.ndarray

    def __post_init__(self):
        shape = (len(self.contexts), len(self.levels), len(self.sizes))
        for name in ("values", "counts", "spread"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != {shape}")


@dataclass(frozen=True)
class ReducedManifold:
    """Manifold with one axis integrated out (count-weighted mean)."""

    axes: tuple[str, ...]
    coords: dict
    values: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class ContextRanking:
    contexts: tuple[SpatialContext, ...]
    ranks: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.ranks) != list(range(1, len(self.contexts) + 1)):
            raise ValueError(f"ranks {self.ranks} are not a permutation of 1..n")


@dataclass(frozen=True)
class ContextSummary:
    contexts: tuple[SpatialContext, ...]
    means: np.ndarray
    stds: np.ndarray
    ranking: ContextRanking


@dataclass(frozen=True)
class RocCurve:
    """Detection tradeoff curve; points sorted by threshold, AUC equals the
    Mann-Whitney statistic (ties weighted 0.5)."""

    thresholds: np.ndarray
    points: np.ndarray  # (m, 2) of (fpr, tpr)
    auc: float


def _derive_cell_seed(seed: int, *coords: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *coords])
    return np.random.Generator(np.random.Philox(ss))


def _valid_centers(labels: np.ndarray, code: int, size: int) -> np.ndarray:
    """Centers whose full window lies inside the label region.

    Interior sampling keeps boundary contamination (windows straddling an
    occluder edge or a region seam) out of the per-context statistics; a
    context whose region cannot contain the window yields no centers.
    """
    h, w = labels.shape
    if size > h or size > w:
        return np.empty((0, 2), dtype=np.intp)
    mismatch = (labels != code).astype(np.int64)
    ii = np.pad(mismatch.cumsum(axis=0).cumsum(axis=1), ((1, 0), (1, 0)))
    window_sums = (
        ii[size:, size:] - ii[:-size, size:] - ii[size:, :-size] + ii[:-size, :-size]
    )
    return np.argwhere(window_sums == 0) + size // 2


def render_level_frame(
    scene: Scene,
    family: PerturbationFamily,
    level: float,
    level_index: int,
    sensor_model: SensorModel | None,
    seed: int,
) -> GrayImage:
    """Render one temporal state: illumination + fog, then the static
    occluder, then the sensor model. Per-state seed = master XOR index."""
    state_seed = (seed ^ level_index) & 0xFFFFFFFFFFFFFFFF
    img = render_state(scene, family(level), sensor_model=None)
    if scene.occluder is not None:
        # occluder texture is fixed across levels (static geometric change)
        img = apply_occlusion(img, scene.occluder.rect, scene.occluder.texture, seed ^ 0x0CC1)
    if sensor_model is not None:
        from .perturb import sensor

        img = sensor(img, sensor_model, state_seed)
    return img


def reference_frame(scene: Scene) -> GrayImage:
    """Ambient reference render: no direct light, no occluder, no sensor."""
    return render_state(scene, TemporalState(direct_level=0.0))


def sweep_manifold(
    scene: Scene,
    family: PerturbationFamily,
    levels,
    sizes,
    metric_name: str,
    samples_per_context: int,
    seed: int,
    sensor_model: SensorModel | None = None,
    contexts=DEFAULT_CONTEXTS,
    jobs: int = 1,
) -> CriterionManifold:
    """Tabulate the criterion over (context, level, size).

    Patch centers are drawn uniformly without replacement from pixels whose
    full window lies inside the context's label region; cells with no valid
    center are reported with count 0. Per-cell seeds derive
    from (seed, cell coordinates), so results do not depend on evaluation
    order or worker count.
    """
    levels = tuple(float(x) for x in levels)
    sizes = tuple(int(x) for x in sizes)
    if not levels:
        raise ParameterError("levels must be non-empty")
    for s in sizes:
        if s < 3 or s % 2 == 0:
            raise ParameterError(f"patch sizes must be odd integers >= 3, got {s}")
    metric = get_metric(metric_name)
    contexts = tuple(contexts)
    from .image import LABEL_CODES

    reference = reference_frame(scene)
    frames = [
        render_level_frame(scene, family, lv, li, sensor_model, seed)
        for li, lv in enumerate(levels)
    ]

    shape = (len(contexts), len(levels), len(sizes))
    values = np.full(shape, np.nan)
    counts = np.zeros(shape, dtype=np.intp)
    spread = np.full(shape, np.nan)

    def run_cell(cell):
        ci, li, si = cell
        size = sizes[si]
        centers = _valid_centers(scene.labels, LABEL_CODES[contexts[ci]], size)
        if centers.shape[0] == 0:
            return ci, li, si, np.nan, np.nan, 0
        rng = _derive_cell_seed(seed, ci, li, si)
        take = min(samples_per_context, centers.shape[0])
        chosen = centers[rng.choice(centers.shape[0], size=take, replace=False)]
        frame = frames[li]
        scores = []
        for row, col in chosen:
            ref_patch = extract_patch(reference, (int(row), int(col)), size)
            cur_patch = extract_patch(frame, (int(row), int(col)), size)
            try:
                scores.append(float(metric(ref_patch, cur_patch)))
            except ZeroVarianceError:
                continue  # excluded sample
        if not scores:
            return ci, li, si, np.nan, np.nan, 0
        arr = np.asarray(scores)
        return ci, li, si, float(arr.mean()), float(arr.std()), arr.shape[0]

    cells = [
        (ci, li, si)
        for ci in range(len(contexts))
        for li in range(len(levels))
        for si in range(len(sizes))
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]
    for ci, li, si, mean, std, count in results:
        values[ci, li, si] = mean
        spread[ci, li, si] = std
        counts[ci, li, si] = count

    if counts.sum() == 0:
        raise DegenerateInputError("no cell produced a valid sample")
    return CriterionManifold(
        contexts=contexts, levels=levels, sizes=sizes,
        values=values, counts=counts, spread=spread,
    )


_AXIS_INDEX = {"contexts": 0, "levels": 1, "sizes": 2}


def _apply_exclusions(m: CriterionManifold, exclude):
    exclude = tuple(exclude or ())
    keep = [i for i, c in enumerate(m.contexts) if c not in exclude]
    if not keep:
        raise ParameterError("cannot exclude every context")
    return (
        tuple(m.contexts[i] for i in keep),
        m.values[keep],
        m.counts[keep],
    )


def _weighted_mean(values, counts, axis):
    w = counts.astype(np.float64)
    wv = np.where(counts > 0, np.nan_to_num(values) * w, 0.0)
    tot = w.sum(axis=axis)
    with np.errstate(invalid="ignore"):
        out = np.where(tot > 0, wv.sum(axis=axis) / np.where(tot > 0, tot, 1.0), np.nan)
    return out, tot.astype(np.intp)


def marginalize(m: CriterionManifold, axis: str, exclude=()) -> ReducedManifold:
    """Count-weighted mean over one axis, after dropping excluded contexts."""
    if axis not in _AXIS_INDEX:
        raise ParameterError(f"axis must be one of {sorted(_AXIS_INDEX)}, got {axis!r}")
    contexts, values, counts = _apply_exclusions(m, exclude)
    out, tot = _weighted_mean(values, counts, _AXIS_INDEX[axis])
    names = ["contexts", "levels", "sizes"]
    names.remove(axis)
    coords = {"contexts": contexts, "levels": m.levels, "sizes": m.sizes}
    del coords[axis]
    return ReducedManifold(axes=tuple(names), coords=coords, values=out, counts=tot)


def summarize(m: CriterionManifold) -> ContextSummary:
    """Count-weighted per-context mean/std across levels and sizes, plus a
    ranking by descending mean (ties broken by declaration order)."""
    w = m.counts.astype(np.float64)
    valid = m.counts > 0
    vals = np.nan_to_num(m.values)
    sprd = np.nan_to_num(m.spread)
    tot = w.sum(axis=(1, 2))
    safe_tot = np.where(tot > 0, tot, 1.0)
    mean = np.where(tot > 0, (vals * w).sum(axis=(1, 2)) / safe_tot, np.nan)
    # pooled second moment: E[x^2] = spread^2 + mean^2 per cell
    m2 = ((sprd**2 + vals**2) * w).sum(axis=(1, 2)) / safe_tot
    var = np.clip(m2 - mean**2, 0.0, None)
    std = np.where(tot > 0, np.sqrt(var), np.nan)

    order = sorted(
        range(len(m.contexts)),
        key=lambda i: (-(mean[i] if np.isfinite(mean[i]) else -np.inf), i),
    )
    ranks = [0] * len(m.contexts)
    for pos, i in enumerate(order):
        ranks[i] = pos + 1
    ranking = ContextRanking(contexts=m.contexts, ranks=tuple(ranks))
    return ContextSummary(contexts=m.contexts, means=mean, stds=std, ranking=ranking)


def optimal_patch_size(m: CriterionManifold, exclude=()) -> int:
    """Argmax over sizes of the (contexts, levels)-marginal; ties prefer the
    smaller size."""
    contexts, values, counts = _apply_exclusions(m, exclude)
    per_size, _ = _weighted_mean(values, counts, (0, 1))
    best = 0
    for i in range(1, len(m.sizes)):
        if np.isfinite(per_size[i]) and (
            not np.isfinite(per_size[best]) or per_size[i] > per_size[best]
        ):
            best = i
    return m.sizes[best]


def roc(scores_changed, scores_unchanged, polarity: str = "higher") -> RocCurve:
    """ROC over all distinct score thresholds.

    polarity "higher": a sample is flagged changed when score >= threshold;
    "lower": flagged when score <= threshold. AUC is the Mann-Whitney
    statistic (cross-class ties weighted 0.5).
    """
    if polarity not in ("higher", "lower"):
        raise ParameterError(f"polarity must be 'higher' or 'lower', got {polarity!r}")
    ch = np.asarray(list(scores_changed), dtype=np.float64)
    un = np.asarray(list(scores_unchanged), dtype=np.float64)
    if ch.size == 0 or un.size == 0:
        raise DegenerateInputError("both score lists must be non-empty")
    sign = 1.0 if polarity == "higher" else -1.0
    c = sign * ch
    u = sign * un

    uniq = np.unique(np.concatenate([c, u]))[::-1]
    pts = [(0.0, 0.0)]
    thresholds = [np.inf]
    for t in uniq:
        pts.append((float(np.mean(u >= t)), float(np.mean(c >= t))))
        thresholds.append(t)

    us = np.sort(u)
    below = np.searchsorted(us, c, side="left")
    ties = np.searchsorted(us, c, side="right") - below
    auc = float((below + 0.5 * ties).sum() / (c.size * u.size))
    return RocCurve(
        thresholds=sign * np.asarray(thresholds),
        points=np.asarray(pts),
        auc=auc,
    )


def rank_agreement(a: ContextRanking, b: ContextRanking) -> float:
    """Spearman correlation between two rank permutations:
    1 - 6 * sum(d^2) / (n (n^2 - 1))."""
    if set(a.contexts) != set(b.contexts):
        raise ParameterError("rankings cover different context sets")
    pos_b = {c: r for c, r in zip(b.contexts, b.ranks)}
    d2 = sum((ra - pos_b[c]) ** 2 for c, ra in zip(a.contexts, a.ranks))
    n = len(a.contexts)
    if n < 2:
        raise ParameterError("need at least two contexts to correlate rankings")
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


# ---------------------------------------------------------------------------
# ROC study over a simulated patch population
# ---------------------------------------------------------------------------


def _pool_texture(rng: np.random.Generator, size: int, lo: float, hi: float) -> np.ndarray:
    kind = rng.integers(0, 4)
    span = hi - lo
    if kind == 0:  # broadband noise
        return rng.uniform(lo, hi, size=(size, size))
    if kind == 1:  # oriented grating + mild noise
        period = rng.uniform(4.0, float(size))
        phase = rng.uniform(0.0, 2 * np.pi)
        axis = np.arange(size)
        wave = 0.5 + 0.5 * np.sin(2 * np.pi * axis / period + phase)
        tex = np.tile(wave, (size, 1)) if rng.random() < 0.5 else np.tile(wave[:, None], (1, size))
        return lo + span * np.clip(tex + rng.normal(0, 0.05, (size, size)), 0.0, 1.0)
    if kind == 2:  # random-cell checkerboard
        cell = int(rng.integers(2, max(3, size // 3)))
        nr = -(-size // cell)
        cells = rng.uniform(0.0, 1.0, size=(nr, nr))
        tex = np.repeat(np.repeat(cells, cell, axis=0), cell, axis=1)[:size, :size]
        return lo + span * np.clip(tex + rng.normal(0, 0.03, (size, size)), 0.0, 1.0)
    ramp = np.linspace(0.0, 1.0, size)  # smooth gradient + noise
    tex = np.add.outer(ramp * rng.uniform(-1, 1), ramp * rng.uniform(-1, 1))
    tex = (tex - tex.min()) / max(tex.max() - tex.min(), 1e-9)
    return lo + span * np.clip(tex + rng.normal(0, 0.04, (size, size)), 0.0, 1.0)


def roc_study(
    metric_names,
    n_samples: int = 400,
    size: int = 13,
    seed: int = 0,
    gain_range: tuple[float, float] | None = (0.7, 1.3),
    noise: NoiseSpec | None = None,
    texture_range: tuple[float, float] = (0.15, 0.95),
) -> dict[str, RocCurve]:
    """ROC per metric over a simulated patch population.

    Unchanged samples are background patches under the photometric gain and
    noise perturbation only; changed samples additionally replace the patch
    content with an unrelated texture (occlusion-style geometric change).
    """
    metric_names = list(metric_names)
    metrics = {name: get_metric(name) for name in metric_names}
    if n_samples < 1:
        raise DegenerateInputError("need at least one sample")
    rng = _derive_cell_seed(seed, 0xB0C)
    lo, hi = texture_range

    scores = {name: {"changed": [], "unchanged": []} for name in metric_names}
    for i in range(n_samples):
        ref_tex = _pool_texture(rng, size, lo, hi)
        fg_tex = _pool_texture(rng, size, lo, hi)
        a = rng.uniform(*gain_range) if gain_range is not None else 1.0
        cur_un = np.clip(a * ref_tex, 0.0, 1.0)
        cur_ch = np.clip(a * fg_tex, 0.0, 1.0)
        if noise is not None:
            cur_un = NoiseSpec(noise.kind, noise.level, seed=noise.seed + 2 * i).apply(
                GrayImage(cur_un)
            ).data
            cur_ch = NoiseSpec(noise.kind, noise.level, seed=noise.seed + 2 * i + 1).apply(
                GrayImage(cur_ch)
            ).data
        center = (size // 2, size // 2)
        p_ref = Patch(size, ref_tex.reshape(-1), center)
        p_un = Patch(size, cur_un.reshape(-1), center)
        p_ch = Patch(size, cur_ch.reshape(-1), center)
        for name, fn in metrics.items():
            try:
                scores[name]["unchanged"].append(float(fn(p_ref, p_un)))
            except ZeroVarianceError:
                pass
            try:
                scores[name]["changed"].append(float(fn(p_ref, p_ch)))
            except ZeroVarianceError:
                pass

    from .matchers import POLARITY

    return {
        name: roc(sc["changed"], sc["unchanged"], POLARITY[name])
        for name, sc in scores.items()
    }


# ---------------------------------------------------------------------------
# CSV export (bit-reproducible: fixed formats, 9 significant digits)
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.9g}"


def write_manifold_csv(m: CriterionManifold, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["context", "level", "size", "mean", "std", "count"])
        for ci, ctx in enumerate(m.contexts):
            for li, lv in enumerate(m.levels):
                for si, sz in enumerate(m.sizes):
                    out.writerow([
                        ctx.value, _fmt(lv), sz,
                        _fmt(m.values[ci, li, si]),
                        _fmt(m.spread[ci, li, si]),
                        int(m.counts[ci, li, si]),
                    ])


def write_marginal_csv(r: ReducedManifold, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([*r.axes, "mean", "count"])
        c0 = list(r.coords[r.axes[0]])
        c1 = list(r.coords[r.axes[1]])
        for i, a in enumerate(c0):
            for j, b in enumerate(c1):
                av = a.value if isinstance(a, SpatialContext) else _fmt(float(a))
                bv = b.value if isinstance(b, SpatialContext) else _fmt(float(b))
                out.writerow([av, bv, _fmt(r.values[i, j]), int(r.counts[i, j])])


def write_summary_csv(s: ContextSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["context", "mean", "std", "rank"])
        for i, ctx in enumerate(s.contexts):
            out.writerow([ctx.value, _fmt(s.means[i]), _fmt(s.stds[i]), s.ranking.ranks[i]])


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["threshold", "fpr", "tpr"])
        for t, (fpr, tpr) in zip(curve.thresholds, curve.points):
            tstr = "inf" if np.isposinf(t) else ("-inf" if np.isneginf(t) else _fmt(t))
            out.writerow([tstr, _fmt(fpr), _fmt(tpr)])
        out.writerow(["auc", _fmt(curve.auc), ""])
