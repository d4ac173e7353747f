"""Synthetic scene generation, illumination states and occlusion."""

import numpy as np
import pytest

from patchchar.errors import ParameterError
from patchchar.image import LABEL_CODES, SpatialContext, extract_patch
from patchchar.matchers import abs_spearman
from patchchar.perturb import FogParams
from patchchar.scene import (
    LocalLight,
    OccluderSpec,
    RegionSpec,
    SceneSpec,
    ShadowSpec,
    TemporalState,
    apply_occlusion,
    default_scene_spec,
    generate_scene,
    render_state,
)


class TestGenerateScene:
    def test_single_constant_region(self):
        spec = SceneSpec(
            width=16, height=16,
            regions=(RegionSpec("constant", (0, 0, 16, 16), {"value": 0.3}),),
        )
        scene = generate_scene(spec, seed=1)
        assert np.all(scene.base.data == 0.3)
        assert np.all(scene.labels == LABEL_CODES[SpatialContext.HOMOGENEOUS])
        assert np.all(scene.illum_direct.data == 1.0)
        assert np.all(scene.illum_ambient.data == 1.0)

    def test_shadow_band_labels_and_ramp(self):
        spec = SceneSpec(
            width=8, height=20,
            regions=(RegionSpec("constant", (0, 0, 20, 8), {"value": 0.5}),),
            shadow=ShadowSpec(axis="row", offset=10, penumbra=5),
        )
        scene = generate_scene(spec, seed=0)
        codes = scene.labels[:, 0]
        assert np.all(codes[:10] == LABEL_CODES[SpatialContext.HOMOGENEOUS])
        assert np.all(codes[10:15] == LABEL_CODES[SpatialContext.SHADOW_BOUNDARY])
        assert np.all(codes[15:] == LABEL_CODES[SpatialContext.SHADOW])
        direct = scene.illum_direct.data[:, 0]
        assert np.all(direct[:10] == 1.0)
        assert np.all(np.diff(direct[9:15]) < 0)  # strictly falling across the band
        assert np.all(direct[15:] == 0.0)

    def test_label_priority_occluder_over_shadow(self):
        spec = SceneSpec(
            width=10, height=10,
            regions=(RegionSpec("constant", (0, 0, 10, 10)),),
            shadow=ShadowSpec(axis="row", offset=2, penumbra=2),
            occluder=OccluderSpec((0, 0, 10, 4), RegionSpec("constant", (0, 0, 10, 4))),
        )
        scene = generate_scene(spec, seed=0)
        assert np.all(scene.labels[:, :4] == LABEL_CODES[SpatialContext.OCCLUDED])
        assert np.all(scene.labels[2:4, 4:] == LABEL_CODES[SpatialContext.SHADOW_BOUNDARY])

    def test_deterministic_per_seed(self):
        spec = default_scene_spec()
        a = generate_scene(spec, seed=9)
        b = generate_scene(spec, seed=9)
        c = generate_scene(spec, seed=10)
        assert np.array_equal(a.base.data, b.base.data)
        assert np.array_equal(a.labels, b.labels)
        assert not np.array_equal(a.base.data, c.base.data)

    def test_region_outside_canvas_rejected(self):
        spec = SceneSpec(
            width=8, height=8,
            regions=(RegionSpec("constant", (0, 0, 9, 8)),),
        )
        with pytest.raises(ParameterError):
            generate_scene(spec, seed=0)

    def test_default_layout_has_all_six_contexts(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        present = set(np.unique(scene.labels))
        wanted = {
            LABEL_CODES[ctx]
            for ctx in (
                SpatialContext.HOMOGENEOUS,
                SpatialContext.DIFFUSE,
                SpatialContext.EDGE,
                SpatialContext.CORNER,
                SpatialContext.SHADOW_BOUNDARY,
                SpatialContext.OCCLUDED,
            )
        }
        assert wanted <= present

    def test_label_mask_matches_codes(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        mask = scene.label_mask(SpatialContext.DIFFUSE)
        assert np.array_equal(mask, scene.labels == LABEL_CODES[SpatialContext.DIFFUSE])


class TestRenderState:
    @pytest.fixture
    def scene(self):
        return generate_scene(default_scene_spec(), seed=3)

    def test_umbra_pixels_invariant_to_direct_level(self, scene):
        umbra = scene.label_mask(SpatialContext.SHADOW)
        lo = render_state(scene, TemporalState(direct_level=0.2))
        hi = render_state(scene, TemporalState(direct_level=1.8))
        assert np.array_equal(lo.data[umbra], hi.data[umbra])

    def test_values_monotone_in_direct_level(self, scene):
        lo = render_state(scene, TemporalState(direct_level=0.3))
        hi = render_state(scene, TemporalState(direct_level=0.9))
        assert np.all(hi.data >= lo.data)

    def test_zero_level_equals_ambient_only(self, scene):
        out = render_state(scene, TemporalState(direct_level=0.0))
        assert np.array_equal(out.data, np.clip(scene.base.data, 0.0, 1.0))

    def test_diffuse_patch_order_preserved_across_levels(self, scene):
        # inside the diffuse region (away from shadow/occluder) the two-level
        # renders differ by a single positive gain, so rank order is exact
        lo = render_state(scene, TemporalState(direct_level=0.4))
        hi = render_state(scene, TemporalState(direct_level=1.6))
        center = (90, 220)
        assert scene.label_mask(SpatialContext.DIFFUSE)[center]
        p_lo = extract_patch(lo, center, 9)
        p_hi = extract_patch(hi, center, 9)
        assert abs_spearman(p_lo, p_hi) == 1.0

    def test_local_light_brightens_neighbourhood_only(self, scene):
        light = LocalLight(center=(128.0, 128.0), radius=40.0, intensity=3.0)
        base = render_state(scene, TemporalState(direct_level=0.1))
        lit = render_state(scene, TemporalState(direct_level=0.1, local_light=light))
        rows = np.arange(scene.base.height)[:, None]
        cols = np.arange(scene.base.width)[None, :]
        far = np.hypot(rows - 128.0, cols - 128.0) >= 40.0
        assert np.array_equal(lit.data[far], base.data[far])
        assert np.any(lit.data[~far] > base.data[~far])

    def test_fog_state_matches_direct_operator(self, scene):
        from patchchar.perturb import fog

        params = FogParams(beta=0.03, airlight=0.8)
        clear = render_state(scene, TemporalState(direct_level=1.0))
        hazy = render_state(scene, TemporalState(direct_level=1.0, fog=params))
        expect = fog(clear, scene.depth, scene.depth_scale, params)
        assert np.array_equal(hazy.data, expect.data)

    def test_negative_direct_level_rejected(self):
        with pytest.raises(ParameterError):
            TemporalState(direct_level=-0.1)


class TestApplyOcclusion:
    def test_zero_area_is_identity(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        img = render_state(scene, TemporalState(direct_level=1.0))
        tex = RegionSpec("constant", (0, 0, 0, 0), {"value": 0.9})
        assert apply_occlusion(img, (5, 5, 0, 0), tex, 1) is img

    def test_full_frame_replacement(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        img = render_state(scene, TemporalState(direct_level=1.0))
        tex = RegionSpec("constant", (0, 0, 256, 256), {"value": 0.9})
        out = apply_occlusion(img, (0, 0, 256, 256), tex, 1)
        assert np.all(out.data == 0.9)

    def test_pixels_outside_rect_untouched(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        img = render_state(scene, TemporalState(direct_level=1.0))
        tex = RegionSpec("noise", (0, 0, 10, 10), {"lo": 0.4, "hi": 0.8})
        out = apply_occlusion(img, (30, 40, 10, 10), tex, 5)
        mask = np.ones(img.data.shape, dtype=bool)
        mask[30:40, 40:50] = False
        assert np.array_equal(out.data[mask], img.data[mask])
        assert not np.array_equal(out.data[~mask], img.data[~mask])

    def test_deterministic_per_seed(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        img = render_state(scene, TemporalState(direct_level=1.0))
        tex = RegionSpec("noise", (0, 0, 10, 10), {"lo": 0.4, "hi": 0.8})
        a = apply_occlusion(img, (30, 40, 10, 10), tex, 5)
        b = apply_occlusion(img, (30, 40, 10, 10), tex, 5)
        c = apply_occlusion(img, (30, 40, 10, 10), tex, 6)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_rect_outside_image_rejected(self):
        scene = generate_scene(default_scene_spec(), seed=0)
        img = render_state(scene, TemporalState(direct_level=1.0))
        tex = RegionSpec("constant", (0, 0, 10, 10))
        with pytest.raises(ParameterError):
            apply_occlusion(img, (250, 250, 10, 10), tex, 0)
