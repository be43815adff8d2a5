import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import (chebyshev_dilate, loop_channel_max, loop_size, loop_tki, plain_mean,
                     sort_median, sorted_top_k)
from semgeo.concepts import (DEFAULT_INTERVALS, DEFAULT_K, DEFAULT_S_MIN, CiAggregate, CiRecord,
                             aggregate, beta_delta, channel_max, check_intervals, ci_score,
                             concept_mask, dilate, image_ci_records, rank_concepts, relative_size,
                             tki, top_k_mask)
from semgeo.errors import ConfigError, InputError


def test_defaults():
    assert DEFAULT_K == 1000
    assert DEFAULT_S_MIN == 0.05
    assert DEFAULT_INTERVALS == ((0, 25), (25, 750), (750, 2500))


class TestChannelMax:
    def test_single_channel_identity(self):
        raw = np.random.default_rng(0).normal(size=(4, 5, 1))
        np.testing.assert_array_equal(channel_max(raw), raw[:, :, 0])

    def test_definition(self):
        assert channel_max(np.array([[[-1.0, 0.5, 0.2]]]))[0, 0] == 0.5

    def test_loop_oracle(self):
        raw = np.random.default_rng(1).normal(size=(8, 8, 3))
        np.testing.assert_array_equal(channel_max(raw), loop_channel_max(raw))


class TestTopK:
    def test_all(self):
        assert top_k_mask(np.random.default_rng(2).random((6, 7)), 42).all()

    def test_decreasing(self):
        e = np.arange(20, 0, -1, dtype=float).reshape(4, 5)
        m = top_k_mask(e, 5)
        assert m.ravel()[:5].all() and not m.ravel()[5:].any()

    def test_constant_row_major(self):
        m = top_k_mask(np.ones((4, 4)), 3)
        np.testing.assert_array_equal(m, sorted_top_k(np.ones((4, 4)), 3))
        assert list(np.flatnonzero(m)) == [0, 1, 2]

    @pytest.mark.parametrize("k", [0, 17])
    def test_k_out_of_range(self, k):
        with pytest.raises(ConfigError):
            top_k_mask(np.ones((4, 4)), k)

    def test_rejects_nan(self):
        e = np.ones((3, 3))
        e[1, 1] = np.nan
        with pytest.raises(InputError):
            top_k_mask(e, 2)

    @settings(max_examples=60)
    @given(arrays(np.float32, (9, 11), elements=st.integers(-3, 3).map(float)), st.integers(1, 99))
    def test_matches_sort_oracle_with_ties(self, e, k):
        np.testing.assert_array_equal(top_k_mask(e, k), sorted_top_k(e, k))


class TestMasks:
    def test_concept_mask(self):
        seg = np.full((3, 3), 7)
        assert concept_mask(seg, 7).all()
        assert not concept_mask(seg, 3).any()

    def test_checkerboard_complement(self):
        seg = (np.indices((6, 6)).sum(axis=0) % 2) * 5
        a, b = concept_mask(seg, 0), concept_mask(seg, 5)
        np.testing.assert_array_equal(a, ~b)
        assert relative_size(a) == loop_size(a) == 0.5

    def test_relative_size(self):
        assert relative_size(np.ones((3, 4), bool)) == 1.0
        assert relative_size(np.zeros((3, 4), bool)) == 0.0
        m = np.zeros((10, 10), bool)
        m[:5] = True
        assert relative_size(m) == 0.5

    @settings(max_examples=40)
    @given(arrays(np.int64, (7, 9), elements=st.integers(0, 5)))
    def test_sizes_sum_to_one(self, seg):
        total = math.fsum(relative_size(seg == s) for s in np.unique(seg))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestDilate:
    def test_identity(self):
        m = np.random.default_rng(5).random((10, 10)) < 0.2
        np.testing.assert_array_equal(dilate(m, 0), m)

    def test_single_pixel_block(self):
        m = np.zeros((7, 7), bool)
        m[3, 3] = True
        d = dilate(m, 1)
        assert d[2:5, 2:5].all() and d.sum() == 9

    def test_border_clipped(self):
        m = np.zeros((5, 5), bool)
        m[0, 0] = True
        assert dilate(m, 3).sum() == 16

    def test_negative_beta(self):
        with pytest.raises(ConfigError):
            dilate(np.zeros((2, 2), bool), -1)

    @settings(max_examples=60)
    @given(arrays(np.bool_, (12, 10)), st.integers(0, 6))
    def test_oracle_and_monotone(self, m, beta):
        d = dilate(m, beta)
        np.testing.assert_array_equal(d, chebyshev_dilate(m, beta))
        assert not (m & ~d).any()
        assert not (d & ~dilate(m, beta + 1)).any()


class TestTki:
    def test_inside_is_one(self):
        e = np.zeros((8, 8))
        e[2:4, 2:4] = 1
        mask = np.zeros((8, 8), bool)
        mask[1:5, 1:5] = True
        assert tki(mask, top_k_mask(e, 4), 4) == 1.0

    def test_disjoint_is_zero(self):
        top = np.zeros((4, 4), bool)
        top[0, :2] = True
        assert tki(~top, top, 2) == 0.0

    def test_loop_oracle(self):
        rng = np.random.default_rng(9)
        m = rng.random((16, 16)) < 0.4
        top = top_k_mask(rng.random((16, 16)), 40)
        assert tki(m, top, 40) == loop_tki(m, top, 40)

    def test_errors(self):
        with pytest.raises(InputError):
            tki(np.ones((3, 3), bool), np.ones((3, 4), bool), 12)
        with pytest.raises(InputError):
            tki(np.ones((3, 3), bool), np.ones((3, 3), bool), 4)


class TestCiScore:
    def test_full_coverage(self):
        e = np.random.default_rng(0).random((10, 10))
        r = ci_score(e, np.zeros((10, 10), int), 0, k=10)
        assert (r.tki, r.relative_size, r.ci) == (1.0, 1.0, 1.0)

    def test_constructed_32x32(self):
        e = np.zeros((32, 32))
        seg = np.zeros((32, 32), int)
        seg[8:16, 8:16] = 3  # 64 px
        e[10:14, 10:14] = 1.0  # 16 px inside the concept
        r = ci_score(e, seg, 3, k=16)
        assert (r.tki, r.relative_size, r.ci) == (1.0, 0.0625, 16.0)

    def test_filtered_below_s_min(self):
        seg = np.zeros((10, 10), int)
        seg[0, :4] = 1
        assert ci_score(np.ones((10, 10)), seg, 1, k=5) is None
        assert ci_score(np.ones((10, 10)), seg, 1, k=5, beta=1) is not None

    def test_bad_s_min(self):
        with pytest.raises(ConfigError):
            ci_score(np.ones((2, 2)), np.zeros((2, 2), int), 0, k=1, s_min=0)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        e = rng.normal(size=(20, 20))
        seg = rng.integers(0, 4, (20, 20))
        for s in range(4):
            a = ci_score(e, seg, s, k=50)
            b = ci_score(np.exp(3 * e) + 7, seg, s, k=50)
            assert a == b

    def test_image_records_match_ci_score(self):
        rng = np.random.default_rng(8)
        e = rng.random((24, 24))
        seg = rng.integers(0, 12, (24, 24))
        seg[:6] = 20
        for beta in (0, 2):
            recs = image_ci_records("img", e, seg, 12.5, k=64, beta=beta, names={20: "sky"})
            by_concept = {r.concept: r for r in recs}
            for s in np.unique(seg):
                ref = ci_score(e, seg, s, k=64, beta=beta)
                key = "sky" if s == 20 else int(s)
                if ref is None:
                    assert key not in by_concept
                else:
                    r = by_concept[key]
                    assert (r.tki, r.relative_size, r.ci) == (ref.tki, ref.relative_size, ref.ci)
                    assert r.beta == beta and r.gcd_error_km == 12.5

    def test_image_records_concept_subset(self):
        seg = np.repeat(np.arange(4), 4).reshape(4, 4)
        recs = image_ci_records("i", np.ones((4, 4)), seg, k=4, concepts=[1, 3, 9])
        assert [r.concept for r in recs] == [1, 3]


def rec(concept, ci, err, sid="x"):
    return CiRecord(sid, concept, 0.1, ci / 10, ci, err)


class TestAggregate:
    def test_single(self):
        (a,) = aggregate([rec("sky", 3.0, 1.0)], min_images=1)
        assert a.median == a.mean == 3.0 and a.count == 1

    def test_outlier(self):
        (a,) = aggregate([rec("s", v, 5.0) for v in (1, 2, 100)], min_images=1)
        assert a.median == 2.0
        assert a.mean == pytest.approx(103 / 3)

    def test_half_open(self):
        aggs = aggregate([rec("s", 1.0, 25.0), rec("s", 1.0, 2500.0)], min_images=1)
        assert [a.interval for a in aggs] == [(25.0, 750.0)]

    def test_min_images(self):
        recs = [rec("a", float(i), 1.0) for i in range(30)] + [rec("b", 1.0, 1.0)] * 60
        assert [a.concept for a in aggregate(recs, min_images=50)] == ["b"]
        assert [a.concept for a in aggregate(recs, min_images=10)] == ["a", "b"]

    def test_overlap_rejected(self):
        with pytest.raises(ConfigError):
            check_intervals([(0, 25), (20, 750)])
        with pytest.raises(ConfigError):
            check_intervals([(25, 750), (0, 25)])

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.sampled_from("abc"), st.floats(0, 20), st.floats(0, 3000)), max_size=80))
    def test_sort_oracle(self, rows):
        aggs = aggregate([rec(c, v, e) for c, v, e in rows], min_images=1)
        for a in aggs:
            vals = [v for c, v, e in rows if c == a.concept and a.interval[0] <= e < a.interval[1]]
            assert a.count == len(vals)
            assert a.median == sort_median(vals)
            assert a.mean == plain_mean(vals)

    def test_rank(self):
        aggs = [CiAggregate(c, (0.0, 25.0), 10, m, m) for c, m in [("a", 1.0), ("b", 3.0), ("c", 2.0)]]
        assert [a.concept for a in rank_concepts(aggs, (0, 25), 2)] == ["b", "c"]
        assert [a.concept for a in rank_concepts(aggs, (0, 25), 1, lowest=True)] == ["a"]


class TestBetaDelta:
    def aggs(self, bump=0.0):
        return [CiAggregate("sky", (0.0, 25.0), 60, 1.0 + bump, 1.0),
                CiAggregate("sky", (25.0, 750.0), 60, 2.0, 2.0),
                CiAggregate("tree", (0.0, 25.0), 60, 0.5, 0.5)]

    def test_identical(self):
        assert all(d.delta == 0 for d in beta_delta(self.aggs(), self.aggs()))

    def test_one_bin(self):
        ds = {(d.concept, d.interval): d.delta for d in beta_delta(self.aggs(0.5), self.aggs())}
        assert ds[("sky", (0.0, 25.0))] == 0.5
        assert ds[("sky", (25.0, 750.0))] == 0 and ds[("tree", (0.0, 25.0))] == 0

    def test_key_mismatch(self):
        with pytest.raises(InputError, match="tree"):
            beta_delta(self.aggs()[:2], self.aggs())
        assert len(beta_delta(self.aggs()[:2], self.aggs(), strict=False)) == 2
