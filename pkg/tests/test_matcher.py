import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fields import (
    bidirectional_oracle,
    border_oracle,
    cc_oracle,
    coordinate_field,
    exhaustive_min_cost,
    random_flow_pair,
    smooth_field_pair,
)
from patchbatch.errors import ConfigError, DimensionError
from patchbatch.flow import DescriptorField, FlowField
from patchbatch.matcher import (
    MatchConfig,
    bidirectional_filter,
    border_filter,
    connected_component_filter,
    match_costs,
    patchmatch,
    search_radii,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        MatchConfig(iterations=0)
    with pytest.raises(ConfigError):
        MatchConfig(search_radius=0)


def test_search_radii_halve_to_one():
    assert search_radii(10) == [10, 5, 2, 1]
    assert search_radii(1) == [1]
    assert search_radii(500)[-1] == 1


class TestPatchMatch:
    def test_self_match_converges_to_zero(self):
        field = coordinate_field(12, 12)
        flow = patchmatch(field, field, MatchConfig(seed=1))
        assert np.all(flow.u == 0) and np.all(flow.v == 0) and flow.valid.all()

    def test_constructed_shift(self):
        dst = coordinate_field(12, 12)
        src = coordinate_field(12, 12, x0=3)
        flow = patchmatch(src, dst, MatchConfig(seed=2))
        overlap = np.s_[:, :9]
        assert np.all(flow.u[overlap] == 3) and np.all(flow.v[overlap] == 0)

    def test_dimension_mismatch(self):
        a = DescriptorField(np.zeros((4, 4, 3)))
        b = DescriptorField(np.zeros((4, 4, 2)))
        with pytest.raises(DimensionError):
            patchmatch(a, b, MatchConfig())

    def test_reaches_exhaustive_optimum_on_smooth_fields(self):
        hits = total = 0
        for seed in range(20):
            src, dst, _ = smooth_field_pair(np.random.default_rng(seed))
            flow = patchmatch(src, dst, MatchConfig(iterations=2, search_radius=10, seed=seed))
            best = exhaustive_min_cost(src, dst)
            hits += int(np.sum(match_costs(src, dst, flow) <= best + 1e-9))
            total += best.size
        assert hits / total >= 0.9

    @pytest.mark.parametrize("seed", range(5))
    def test_costs_monotone_across_sweeps(self, seed):
        rng = np.random.default_rng(seed)
        src = DescriptorField(rng.standard_normal((10, 13, 4)))
        dst = DescriptorField(rng.standard_normal((11, 9, 4)))
        history = []
        flow = patchmatch(src, dst, MatchConfig(iterations=4, search_radius=6, seed=seed), history=history)
        assert len(history) == 5
        for before, after in zip(history, history[1:]):
            assert np.all(after <= before)
        np.testing.assert_allclose(history[-1], match_costs(src, dst, flow), rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(1, 9), st.integers(1, 9), st.integers(1, 9), st.integers(1, 9),
        st.integers(1, 20), st.integers(1, 3), st.integers(0, 2**16),
    )
    def test_offsets_stay_in_bounds(self, hs, ws, hd, wd, radius, iters, seed):
        rng = np.random.default_rng(seed)
        src = DescriptorField(rng.standard_normal((hs, ws, 3)))
        dst = DescriptorField(rng.standard_normal((hd, wd, 3)))
        flow = patchmatch(src, dst, MatchConfig(iterations=iters, search_radius=radius, seed=seed))
        ys, xs = np.mgrid[0:hs, 0:ws]
        tx, ty = xs + flow.u, ys + flow.v
        assert np.all((tx >= 0) & (tx < wd) & (ty >= 0) & (ty < hd))

    def test_deterministic(self):
        src, dst, _ = smooth_field_pair(np.random.default_rng(3))
        a = patchmatch(src, dst, MatchConfig(seed=9))
        b = patchmatch(src, dst, MatchConfig(seed=9))
        np.testing.assert_array_equal(a.u, b.u)
        np.testing.assert_array_equal(a.v, b.v)


class TestBidirectional:
    def test_exact_inverse_survives(self):
        shape = (5, 6)
        fwd = FlowField(np.zeros(shape, int), np.zeros(shape, int))
        assert bidirectional_filter(fwd, fwd.copy()).valid.all()
        ys, xs = np.mgrid[0:5, 0:6]
        fwd = FlowField(np.where(xs < 5, 1, -5), np.zeros(shape, int))
        bwd = FlowField(np.where(xs > 0, -1, 5), np.zeros(shape, int))
        assert bidirectional_filter(fwd, bwd).valid.all()

    def test_zero_backward_kills_unit_forward(self):
        shape = (4, 4)
        fwd = FlowField(np.ones(shape, int), np.zeros(shape, int))
        bwd = FlowField(np.zeros(shape, int), np.zeros(shape, int))
        assert not bidirectional_filter(fwd, bwd).valid.any()

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            bidirectional_filter(FlowField(np.zeros((3, 3)), np.zeros((3, 3))), FlowField(np.zeros((3, 4)), np.zeros((3, 4))))

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_direct_oracle(self, seed):
        rng = np.random.default_rng(seed)
        fwd, bwd = random_flow_pair(rng, int(rng.integers(2, 12)), int(rng.integers(2, 12)))
        out = bidirectional_filter(fwd, bwd)
        np.testing.assert_array_equal(out.valid, bidirectional_oracle(fwd, bwd))
        np.testing.assert_array_equal(out.u, fwd.u)
        assert not np.any(out.valid & ~fwd.valid)

    @pytest.mark.parametrize("seed", range(20))
    def test_symmetric_correspondences(self, seed):
        rng = np.random.default_rng(1000 + seed)
        fwd, bwd = random_flow_pair(rng, 9, 11)

        def pairs(a, b):
            kept = bidirectional_filter(a, b)
            ys, xs = np.nonzero(kept.valid)
            return {((y, x), (y + int(kept.v[y, x]), x + int(kept.u[y, x]))) for y, x in zip(ys, xs)}

        forward = pairs(fwd, bwd)
        backward = pairs(bwd, fwd)
        assert forward == {(q, p) for p, q in backward}


class TestConnectedComponents:
    def test_large_blob_unchanged(self):
        valid = np.zeros((6, 6), bool)
        valid[1:5, 1:4] = True
        flow = FlowField(np.zeros((6, 6)), np.zeros((6, 6)), valid)
        np.testing.assert_array_equal(connected_component_filter(flow, 12).valid, valid)

    def test_isolated_pixel_removed(self):
        valid = np.zeros((5, 5), bool)
        valid[2, 2] = True
        valid[0, 0:2] = True
        out = connected_component_filter(FlowField(np.zeros((5, 5)), np.zeros((5, 5)), valid), 2)
        assert not out.valid[2, 2] and out.valid[0, 0] and out.valid[0, 1]

    def test_diagonal_neighbours_not_connected(self):
        valid = np.eye(4, dtype=bool)
        out = connected_component_filter(FlowField(np.zeros((4, 4)), np.zeros((4, 4)), valid), 2)
        assert not out.valid.any()

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_flood_fill_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h, w = (int(s) for s in rng.integers(1, 20, size=2))
        valid = rng.random((h, w)) < rng.uniform(0.3, 0.7)
        threshold = int(rng.integers(0, 12))
        flow = FlowField(rng.integers(-3, 4, (h, w)), rng.integers(-3, 4, (h, w)), valid)
        out = connected_component_filter(flow, threshold)
        np.testing.assert_array_equal(out.valid, cc_oracle(valid, threshold))
        assert not np.any(out.valid & ~valid)


class TestBorder:
    def test_margin_zero_identity(self):
        valid = np.random.default_rng(0).random((5, 7)) < 0.5
        out = border_filter(FlowField(np.zeros((5, 7)), np.zeros((5, 7)), valid), 0)
        np.testing.assert_array_equal(out.valid, valid)

    def test_half_size_margin_clears_all(self):
        out = border_filter(FlowField(np.zeros((6, 6)), np.zeros((6, 6))), 3)
        assert not out.valid.any()
        out = border_filter(FlowField(np.zeros((6, 6)), np.zeros((6, 6))), 50)
        assert not out.valid.any()

    def test_margin_one_on_four_by_four(self):
        out = border_filter(FlowField(np.zeros((4, 4)), np.zeros((4, 4))), 1)
        assert out.valid.sum() == 4 and out.valid[1:3, 1:3].all()

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_direct_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h, w = (int(s) for s in rng.integers(1, 15, size=2))
        valid = rng.random((h, w)) < 0.7
        margin = int(rng.integers(0, 8))
        out = border_filter(FlowField(np.zeros((h, w)), np.zeros((h, w)), valid), margin)
        np.testing.assert_array_equal(out.valid, border_oracle(valid, margin))
