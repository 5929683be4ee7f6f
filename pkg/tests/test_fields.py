import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gcops import (
    BinaryField,
    DegenerateChannel,
    EmptyRegion,
    RegionMismatch,
    coverage,
    empirical_d,
)


def checkerboard(shape):
    idx = np.indices(shape).sum(axis=0)
    return idx % 2 == 0


class TestBinaryField:
    def test_from_mask_full_region(self):
        f = BinaryField.from_mask(np.zeros((4, 4), dtype=bool) | True)
        assert f.full_region
        assert f.n == 16
        assert f.shape == (4, 4)
        assert f.dims == 2

    def test_masks_are_frozen(self):
        f = BinaryField.from_mask(checkerboard((4, 4)))
        with pytest.raises(ValueError):
            f.mask[0, 0] = False
        with pytest.raises(ValueError):
            f.region[0, 0] = False

    def test_region_shape_must_match(self):
        with pytest.raises(RegionMismatch):
            BinaryField(np.ones((4, 4), bool), np.ones((4, 5), bool))

    def test_only_2d_or_3d(self):
        with pytest.raises(ValueError):
            BinaryField.from_mask(np.ones(10, bool))
        with pytest.raises(ValueError):
            BinaryField.from_mask(np.ones((2, 2, 2, 2), bool))

    def test_empty_region_rejected(self):
        with pytest.raises(EmptyRegion):
            BinaryField(np.zeros((4, 4), bool), np.zeros((4, 4), bool))

    def test_foreground_outside_region_rejected(self):
        mask = np.zeros((4, 4), bool)
        mask[0, 0] = True
        region = np.ones((4, 4), bool)
        region[0, 0] = False
        with pytest.raises(ValueError):
            BinaryField(mask, region)

    def test_crop(self):
        mask = np.zeros((6, 6), bool)
        mask[2:4, 2:4] = True
        f = BinaryField.from_mask(mask)
        w = f.crop((2, 2), (2, 2))
        assert w.shape == (2, 2)
        assert w.mask.all()
        assert coverage(w) == 1.0

    def test_crop_to_empty_region_raises(self):
        region = np.zeros((6, 6), bool)
        region[:2, :2] = True
        f = BinaryField(np.zeros((6, 6), bool), region)
        with pytest.raises(EmptyRegion):
            f.crop((3, 3), (2, 2))

    def test_equality_is_by_content(self):
        a = BinaryField.from_mask(checkerboard((4, 4)))
        b = BinaryField.from_mask(checkerboard((4, 4)))
        c = BinaryField.from_mask(~checkerboard((4, 4)))
        assert a == b
        assert a != c


class TestCoverage:
    def test_all_foreground(self):
        assert coverage(BinaryField.from_mask(np.ones((5, 5), bool))) == 1.0

    def test_half_plane(self):
        mask = np.zeros((4, 8), bool)
        mask[:, :4] = True
        assert coverage(BinaryField.from_mask(mask)) == 0.5

    def test_respects_region(self):
        mask = np.zeros((4, 4), bool)
        mask[0, 0] = True
        region = np.zeros((4, 4), bool)
        region[0, :2] = True
        f = BinaryField(mask, region)
        assert coverage(f) == 0.5


class TestEmpiricalD:
    def test_identical_half_masks(self):
        # p1 = p2 = p12 = 1/2, so d = 1/2 - 1/4 = 1/4 exactly
        mask = np.zeros((8, 8), bool)
        mask[:4] = True
        a = BinaryField.from_mask(mask)
        stats = empirical_d(a, a)
        assert stats.p1_hat == 0.5
        assert stats.p2_hat == 0.5
        assert stats.p12_hat == 0.5
        assert stats.d_hat == 0.25
        assert stats.n == 64

    def test_complementary_masks(self):
        mask = checkerboard((8, 8))
        a = BinaryField.from_mask(mask)
        b = BinaryField.from_mask(~mask)
        stats = empirical_d(a, b)
        assert stats.p12_hat == 0.0
        assert stats.d_hat == -0.25

    def test_symmetric_in_channels(self):
        rng = np.random.default_rng(3)
        a = BinaryField.from_mask(rng.random((16, 16)) < 0.4)
        b = BinaryField.from_mask(rng.random((16, 16)) < 0.3)
        assert empirical_d(a, b).d_hat == empirical_d(b, a).d_hat

    def test_translation_invariant(self):
        rng = np.random.default_rng(4)
        ma = rng.random((16, 16)) < 0.4
        mb = rng.random((16, 16)) < 0.4
        d0 = empirical_d(
            BinaryField.from_mask(ma), BinaryField.from_mask(mb)
        ).d_hat
        d1 = empirical_d(
            BinaryField.from_mask(np.roll(ma, (3, 5), (0, 1))),
            BinaryField.from_mask(np.roll(mb, (3, 5), (0, 1))),
        ).d_hat
        assert d0 == d1

    def test_unbiased_under_independence(self):
        # independent Bernoulli(0.2) channels: E[d_hat] = 0 up to the
        # plug-in O(1/n) bias, far below the Monte-Carlo resolution here
        rng = np.random.default_rng(5)
        reps = 1000
        values = np.empty(reps)
        for i in range(reps):
            a = BinaryField.from_mask(rng.random((128, 128)) < 0.2)
            b = BinaryField.from_mask(rng.random((128, 128)) < 0.2)
            values[i] = empirical_d(a, b).d_hat
        se = values.std(ddof=1) / np.sqrt(reps)
        assert abs(values.mean()) < 4.0 * se

    def test_region_mismatch(self):
        a = BinaryField.from_mask(checkerboard((4, 4)))
        region = np.ones((4, 4), bool)
        region[0, 0] = False
        mask = checkerboard((4, 4)) & region
        b = BinaryField(mask, region)
        with pytest.raises(RegionMismatch):
            empirical_d(a, b)

    def test_degenerate_channels(self):
        ok = BinaryField.from_mask(checkerboard((4, 4)))
        empty = BinaryField.from_mask(np.zeros((4, 4), bool))
        full = BinaryField.from_mask(np.ones((4, 4), bool))
        with pytest.raises(DegenerateChannel, match="first.*all-background"):
            empirical_d(empty, ok)
        with pytest.raises(DegenerateChannel, match="second.*all-foreground"):
            empirical_d(ok, full)

    def test_three_dimensional(self):
        rng = np.random.default_rng(6)
        a = BinaryField.from_mask(rng.random((8, 8, 8)) < 0.5)
        b = BinaryField.from_mask(rng.random((8, 8, 8)) < 0.5)
        stats = empirical_d(a, b)
        assert stats.n == 512
        assert stats.d_hat == stats.p12_hat - stats.p1_hat * stats.p2_hat


@settings(max_examples=50, deadline=None)
@given(data=st.data(), shape=st.tuples(st.integers(3, 12), st.integers(3, 12)))
def test_coverage_identities(data, shape):
    make = arrays(dtype=bool, shape=st.just(shape)).filter(
        lambda m: m.any() and not m.all()
    )
    a = BinaryField.from_mask(data.draw(make))
    b = BinaryField.from_mask(data.draw(make))
    stats = empirical_d(a, b)
    assert stats.d_hat == stats.p12_hat - stats.p1_hat * stats.p2_hat
    # joint coverage respects the Frechet bounds (lower one up to rounding)
    assert stats.p12_hat <= min(stats.p1_hat, stats.p2_hat)
    assert stats.p12_hat >= max(0.0, stats.p1_hat + stats.p2_hat - 1.0) - 1e-12
    # d_hat is bounded by a quarter in absolute value
    assert abs(stats.d_hat) <= 0.25 + 1e-15
