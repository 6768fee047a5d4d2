import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fpntrack.attention import attend_pyramid, reweight, similarity, similarity_pyramid
from fpntrack.errors import InvalidInputError
from fpntrack.pyramid import FeatureMap, assign_level, center_cell
from fpntrack.scenarios import distractor_scene
from fpntrack.synth import philox, render_frame
from fpntrack.templates import build_template
from tests.test_pyramid import make_pyramid

finite_features = arrays(
    np.float32,
    (3, 4, 2),
    elements=st.floats(-10, 10, width=32),
)


class TestSimilarity:
    def test_inner_product_per_cell(self):
        fm = FeatureMap(2, np.zeros((2, 2, 2), dtype=np.float32))
        fm.data[0, 1] = [2.0, 0.0]
        sim = similarity(fm, np.array([1.0, 0.0]))
        assert sim.scores[0, 1] == 2.0
        assert sim.scores[0, 0] == 0.0

    def test_zero_template_gives_zero_map(self):
        fm = FeatureMap(2, np.ones((3, 3, 4), dtype=np.float32))
        sim = similarity(fm, np.zeros(4))
        assert np.all(sim.scores == 0)

    def test_orthogonal_scores_zero(self):
        fm = FeatureMap(2, np.zeros((1, 1, 2), dtype=np.float32))
        fm.data[0, 0] = [0.0, 3.0]
        assert similarity(fm, np.array([1.0, 0.0])).scores[0, 0] == 0.0

    def test_depth_mismatch_rejected(self):
        fm = FeatureMap(2, np.ones((2, 2, 3), dtype=np.float32))
        with pytest.raises(InvalidInputError):
            similarity(fm, np.ones(4))

    @given(finite_features, st.floats(-5, 5), st.floats(-5, 5))
    def test_linear_in_template(self, data, a, b):
        fm = FeatureMap(2, data)
        t1 = np.array([1.0, -0.5])
        t2 = np.array([0.25, 2.0])
        lhs = similarity(fm, a * t1 + b * t2).scores
        rhs = a * similarity(fm, t1).scores + b * similarity(fm, t2).scores
        assert np.allclose(lhs, rhs, atol=1e-4)


class TestReweight:
    def test_scales_cell_by_score(self):
        fm = FeatureMap(2, np.zeros((1, 2, 2), dtype=np.float32))
        fm.data[0, 0] = [2.0, 0.0]
        sim = similarity(fm, np.array([1.0, 0.0]))  # score 2 at (0, 0)
        out = reweight(fm, sim)
        assert out.data[0, 0].tolist() == [4.0, 0.0]

    def test_uniform_ones_is_identity(self):
        rng = philox(0)
        fm = FeatureMap(3, rng.normal(size=(4, 4, 3)).astype(np.float32))
        from fpntrack.attention import SimilarityMap

        out = reweight(fm, SimilarityMap(3, np.ones((4, 4))))
        assert np.array_equal(out.data, fm.data)

    def test_zero_score_zeroes_cell(self):
        fm = FeatureMap(2, np.ones((2, 2, 2), dtype=np.float32))
        sim = similarity(fm, np.zeros(2))
        out = reweight(fm, sim)
        assert np.all(out.data == 0)

    def test_shape_mismatch_rejected(self):
        from fpntrack.attention import SimilarityMap

        fm = FeatureMap(2, np.ones((2, 2, 2), dtype=np.float32))
        with pytest.raises(InvalidInputError):
            reweight(fm, SimilarityMap(2, np.ones((3, 3))))


class TestAttendPyramid:
    def test_detection_mode_is_bitwise_identity(self):
        pyr = make_pyramid(fill=lambda lvl: lvl * 0.25)
        out = attend_pyramid(pyr, np.ones(3), mode="detection")
        for a, b in zip(pyr.levels, out.levels):
            assert np.array_equal(a.data, b.data)

    def test_orthogonal_template_zeroes_everything(self):
        pyr = make_pyramid()
        for fm in pyr.levels:
            fm.data[..., 0] = 1.0
        out = attend_pyramid(pyr, np.array([0.0, 1.0, 0.0]), mode="tracking")
        for fm in out.levels:
            assert np.all(fm.data == 0)

    def test_bad_mode_rejected(self):
        pyr = make_pyramid()
        with pytest.raises(InvalidInputError):
            attend_pyramid(pyr, np.ones(3), mode="both")

    def test_homogeneous_in_template_scale(self):
        rng = philox(5)
        pyr = make_pyramid(fill=None)
        for fm in pyr.levels:
            fm.data[:] = rng.normal(size=fm.data.shape).astype(np.float32)
        t = rng.normal(size=3)
        base = similarity_pyramid(pyr, t)
        scaled = similarity_pyramid(pyr, 3.0 * t)
        for s_base, s_scaled in zip(base, scaled):
            assert np.allclose(s_scaled.scores, 3.0 * s_base.scores, rtol=1e-5)
            assert s_base.argmax_cell() == s_scaled.argmax_cell()

    def test_ridge_attention_peaks_inside_target_box(self):
        # the discriminative template focuses the assigned-level similarity
        # map on the target despite a strong distractor
        for seed in range(8):
            spec = distractor_scene(seed)
            pyr, boxes, _ = render_frame(spec, 0)
            box = boxes[0]
            template = build_template(pyr, box, "ridge")
            level = assign_level(box, pyr.num_levels)
            sim = similarity(pyr.level_map(level), template)
            row, col = sim.argmax_cell()
            stride = pyr.stride(level)
            cy, cx = (row + 0.5) * stride, (col + 0.5) * stride
            assert box.contains(cx, cy)
