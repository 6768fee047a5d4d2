import numpy as np
import pytest

from fpntrack.errors import InvalidInputError
from fpntrack.pyramid import BoundingBox, extract_template
from fpntrack.scenarios import correlated_identities, distractor_scene, linear_trajectory
from fpntrack.synth import (
    SceneObject,
    SceneSpec,
    cosine_confidence,
    jittered_boxes,
    render_frame,
    synth_candidates,
)


def unit(depth, axis=0):
    v = np.zeros(depth)
    v[axis] = 1.0
    return v


def single_object_spec(noise=0.0, depth=8):
    # a 24x24 box lands on pyramid level 2 (stride 4); center (30, 30)
    # coincides with a cell center there, so the peak is sampled exactly
    traj = linear_trajectory(BoundingBox(30 - 12, 30 - 12, 24, 24), 0, 0)
    obj = SceneObject(identity=unit(depth), trajectory=traj, is_target=True)
    return SceneSpec(64, 64, 4, [obj], noise_sigma=noise)


class TestRenderFrame:
    def test_zero_noise_center_cell_equals_identity(self):
        spec = single_object_spec()
        pyr, boxes, _ = render_frame(spec, 0)
        feat = extract_template(pyr, boxes[0])
        assert np.allclose(feat, unit(8).astype(np.float32))
        assert abs(float(feat[0]) - 1.0) < 1e-7

    def test_empty_scene_is_pure_noise(self):
        spec = SceneSpec(64, 64, 2, [], noise_sigma=0.5, seed=3)
        pyr, boxes, masks = render_frame(spec, 0)
        assert boxes == [] and masks == []
        assert np.abs(pyr.levels[0].data).sum() > 0

    def test_deterministic_under_seed(self):
        spec = distractor_scene(11)
        a, _, _ = render_frame(spec, 2)
        b, _, _ = render_frame(spec, 2)
        for fa, fb in zip(a.levels, b.levels):
            assert np.array_equal(fa.data, fb.data)

    def test_frames_differ_with_noise(self):
        spec = single_object_spec(noise=0.1)
        a, _, _ = render_frame(spec, 0)
        b, _, _ = render_frame(spec, 1)
        assert not np.array_equal(a.levels[0].data, b.levels[0].data)

    def test_occlusion_by_list_order(self):
        depth = 4
        box = BoundingBox(20, 20, 24, 24)
        behind = SceneObject(unit(depth, 0), linear_trajectory(box, 0, 0), is_target=True)
        front = SceneObject(unit(depth, 1), linear_trajectory(box, 0, 0))
        spec = SceneSpec(64, 64, 1, [behind, front])
        pyr, boxes, _ = render_frame(spec, 0)
        feat = extract_template(pyr, box)
        assert feat[1] > 0 and feat[0] == 0

    def test_frame_out_of_range(self):
        with pytest.raises(InvalidInputError):
            render_frame(single_object_spec(), 99)

    def test_masks_are_rasterized_boxes(self):
        spec = single_object_spec()
        _, boxes, masks = render_frame(spec, 0)
        arr = masks[0].to_array()
        assert arr.shape == (64, 64)
        assert arr[32, 32] and not arr[0, 0]


class TestSceneSpecValidation:
    def test_two_targets_rejected(self):
        t = linear_trajectory(BoundingBox(0, 0, 8, 8), 0, 0)
        objs = [SceneObject(unit(4), t, True), SceneObject(unit(4, 1), t, True)]
        with pytest.raises(InvalidInputError):
            SceneSpec(32, 32, 1, objs)

    def test_nonunit_identity_rejected(self):
        with pytest.raises(InvalidInputError):
            SceneObject(np.ones(4), linear_trajectory(BoundingBox(0, 0, 8, 8), 0, 0))


class TestCandidates:
    def test_no_jitter_single_candidate_equals_groundtruth(self):
        spec = single_object_spec()
        pyr, boxes, _ = render_frame(spec, 0)
        dets = synth_candidates(pyr, boxes, unit(8), jitter=0.0, k=1, seed=0)
        assert len(dets) == 1
        assert dets[0].box == boxes[0]
        assert dets[0].confidence == pytest.approx(1.0)

    def test_deterministic_under_seed(self):
        spec = distractor_scene(5)
        pyr, boxes, _ = render_frame(spec, 0)
        a = synth_candidates(pyr, boxes, spec.objects[0].identity, 0.1, 4, seed=9)
        b = synth_candidates(pyr, boxes, spec.objects[0].identity, 0.1, 4, seed=9)
        assert [(d.box, d.confidence) for d in a] == [(d.box, d.confidence) for d in b]

    def test_absent_target_leaves_only_distractor_candidates(self):
        spec = distractor_scene(3)
        spec.objects[0].trajectory = linear_trajectory(
            BoundingBox(8, 36, 24, 24), 2, 0, absent=range(spec.num_frames)
        )
        pyr, boxes, _ = render_frame(spec, 1)
        assert boxes[0] is None
        dets = synth_candidates(pyr, boxes, spec.objects[0].identity, 0.05, 3, seed=1)
        # every candidate derives from the distractor; none can outscore their max
        assert len(dets) == 3
        best = max(d.confidence for d in dets)
        assert all(d.confidence <= best for d in dets)

    def test_candidate_count(self):
        spec = distractor_scene(0)
        pyr, boxes, _ = render_frame(spec, 0)
        dets = synth_candidates(pyr, boxes, unit(16), 0.05, 3, seed=0)
        assert len(dets) == 6  # two visible objects, three candidates each


class TestIdentities:
    def test_zero_overlap_identities_are_orthogonal(self):
        t, d = correlated_identities(16, 0.0, seed=2)
        assert abs(float(t @ d)) < 1e-9

    def test_requested_overlap_is_hit(self):
        t, d = correlated_identities(16, 0.8, seed=2)
        assert float(t @ d) == pytest.approx(0.8, abs=1e-9)

    def test_clean_scene_template_matches_identity(self):
        # no noise, orthogonal distractor: extracted target template has
        # cosine 1 with the target identity and 0 with the distractor
        t, d = correlated_identities(8, 0.0, seed=4)
        target = SceneObject(t, linear_trajectory(BoundingBox(8, 8, 16, 16), 0, 0), True)
        other = SceneObject(d, linear_trajectory(BoundingBox(40, 40, 16, 16), 0, 0))
        spec = SceneSpec(64, 64, 1, [target, other], noise_sigma=0.0)
        pyr, boxes, _ = render_frame(spec, 0)
        feat = extract_template(pyr, boxes[0]).astype(np.float64)
        feat /= np.linalg.norm(feat)
        assert float(feat @ t) == pytest.approx(1.0, abs=1e-6)
        assert float(feat @ d) == pytest.approx(0.0, abs=1e-6)


class TestCosineConfidence:
    def test_aligned_scores_one(self):
        assert cosine_confidence(np.array([2.0, 0.0]), np.array([1.0, 0.0])) == 1.0

    def test_opposed_scores_zero(self):
        assert cosine_confidence(np.array([-1.0, 0.0]), np.array([1.0, 0.0])) == 0.0

    def test_zero_vector_scores_zero(self):
        assert cosine_confidence(np.zeros(3), np.ones(3)) == 0.0


def test_jittered_boxes_skips_absent():
    out = jittered_boxes([None, BoundingBox(0, 0, 4, 4)], 0.0, 2, seed=0)
    assert len(out) == 2
