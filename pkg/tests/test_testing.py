import math

import numpy as np
import pytest

from gcops import (
    BinaryField,
    DomainError,
    LagTooLarge,
    NonPositiveVariance,
    autocov,
    gcops_test,
    s_hat,
)
from gcops.covariance import CovarianceField, lag_norms, select_delta
from gcops.testing import phi, phi_inv


def random_field(seed, shape=(64, 64), p=0.3):
    rng = np.random.default_rng(seed)
    return BinaryField.from_mask(rng.random(shape) < p)


class TestPhi:
    def test_center(self):
        assert phi(0.0) == 0.5

    def test_known_quantile(self):
        assert phi(1.959964) == pytest.approx(0.975, abs=1e-6)

    def test_symmetry(self):
        for x in (0.3, 1.0, 2.5):
            assert phi(-x) == pytest.approx(1.0 - phi(x), abs=1e-15)

    def test_inverse_roundtrip(self):
        for x in (-2.0, -0.5, 0.0, 1.3):
            assert phi_inv(phi(x)) == pytest.approx(x, abs=1e-12)

    def test_inverse_domain(self):
        for q in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(DomainError):
                phi_inv(q)


class TestSHat:
    def test_zero_radius_is_variance_product(self):
        c1 = autocov(random_field(21), max_lag=4)
        c2 = autocov(random_field(22), max_lag=4)
        assert s_hat(c1, c2, 0.0) == c1.c0 * c2.c0

    def test_impulse_second_factor(self):
        # if one cube is zero away from the origin, the radius cannot matter
        c1 = autocov(random_field(23), max_lag=3)
        values = np.zeros((7, 7))
        values[3, 3] = 0.21
        c2 = CovarianceField(
            values=values, counts=np.ones((7, 7), dtype=np.int64), max_lag=3
        )
        assert s_hat(c1, c2, 3.0) == c1.c0 * 0.21

    def test_matches_lag_enumeration_bitwise(self):
        # the ball of radius 3 in 2D holds exactly 29 lags; summing the same
        # products in the same order must give the same float
        c1 = autocov(random_field(24), max_lag=5)
        c2 = autocov(random_field(25), max_lag=5)
        delta = 3.0
        norms = lag_norms(5, 2)
        products = []
        for idx in np.ndindex(norms.shape):
            if norms[idx] <= delta:
                products.append(c1.values[idx] * c2.values[idx])
        assert len(products) == 29
        assert s_hat(c1, c2, delta) == np.sum(np.array(products))

    def test_radius_beyond_cube_rejected(self):
        c1 = autocov(random_field(26), max_lag=3)
        with pytest.raises(LagTooLarge):
            s_hat(c1, c1, 3.5)

    def test_negative_radius_rejected(self):
        c1 = autocov(random_field(27), max_lag=3)
        with pytest.raises(ValueError):
            s_hat(c1, c1, -1.0)

    def test_mixed_cube_sizes_crop_to_common_ball(self):
        f = random_field(28)
        c_small = autocov(f, max_lag=3)
        c_large = autocov(f, max_lag=6)
        assert s_hat(c_small, c_large, 2.0) == s_hat(c_small, c_small, 2.0)


class TestGcopsTest:
    def test_orthogonal_half_planes_score_zero(self):
        # left half vs top half: p12 = p1 * p2 exactly, so t = 0 and the
        # bilateral p-value is 1
        mask_a = np.zeros((64, 64), bool)
        mask_a[:, :32] = True
        mask_b = np.zeros((64, 64), bool)
        mask_b[:32, :] = True
        report = gcops_test(
            BinaryField.from_mask(mask_a), BinaryField.from_mask(mask_b)
        )
        assert report.stats.d_hat == 0.0
        assert report.t == 0.0
        assert report.p_bilateral == 1.0
        assert report.p_coloc == 0.5
        assert report.p_anticoloc == 0.5

    def test_identical_channels_maximally_colocalized(self):
        f = random_field(30, shape=(128, 128))
        report = gcops_test(f, f)
        assert report.delta == 0.0
        assert report.t == pytest.approx(math.sqrt(report.stats.n), rel=1e-6)
        assert report.p_coloc < 1e-15
        assert report.p_anticoloc > 1.0 - 1e-15

    def test_complementary_channels_maximally_avoidant(self):
        f = random_field(31, shape=(128, 128), p=0.5)
        g = BinaryField.from_mask(~f.mask)
        report = gcops_test(f, g)
        assert report.t == pytest.approx(-math.sqrt(report.stats.n), rel=1e-6)
        assert report.p_anticoloc < 1e-15

    def test_swap_symmetry(self):
        a = random_field(32)
        b = random_field(33)
        r_ab = gcops_test(a, b)
        r_ba = gcops_test(b, a)
        assert r_ab.t == r_ba.t
        assert r_ab.delta == r_ba.delta
        assert r_ab.s_hat == r_ba.s_hat
        assert r_ab.p_coloc == r_ba.p_coloc

    def test_pvalue_relations(self):
        for seed in (34, 35, 36):
            r = gcops_test(random_field(seed), random_field(seed + 100))
            assert r.p_bilateral == 2.0 * min(r.p_coloc, r.p_anticoloc)
            assert r.p_coloc + r.p_anticoloc == pytest.approx(1.0, abs=1e-14)

    def test_decision_matches_quantile_rule(self):
        for seed in (37, 38, 39, 40):
            r = gcops_test(random_field(seed), random_field(seed + 200))
            for level in (0.01, 0.05, 0.1, 0.5):
                by_p = r.p_bilateral < level
                by_t = abs(r.t) > phi_inv(1.0 - level / 2.0)
                assert by_p == by_t

    def test_delta_override_and_report_fields(self):
        a = random_field(41)
        b = random_field(42)
        r = gcops_test(a, b, delta=2.0, max_lag=6)
        assert r.delta == 2.0
        assert r.max_lag_used == 6
        c1 = autocov(a, max_lag=6)
        c2 = autocov(b, max_lag=6)
        assert r.s_hat == s_hat(c1, c2, 2.0)

    def test_delta_mode_is_forwarded(self):
        rng = np.random.default_rng(43)
        base = rng.random((16, 16))
        smooth = np.kron(base, np.ones((8, 8)))  # 8-pixel blocks
        a = BinaryField.from_mask(smooth > 0.5)
        b = BinaryField.from_mask(smooth > 0.6)
        c1 = autocov(a, max_lag=16)
        c2 = autocov(b, max_lag=16)
        for mode in ("max", "prefix"):
            r = gcops_test(a, b, max_lag=16, delta_mode=mode)
            assert r.delta == select_delta(c1, c2, mode=mode)

    def test_saturation_warning(self):
        rng = np.random.default_rng(44)
        smooth = np.kron(rng.random((8, 8)), np.ones((16, 16)))
        a = BinaryField.from_mask(smooth > 0.4)
        b = BinaryField.from_mask(smooth > 0.5)
        r = gcops_test(a, b, max_lag=4)
        assert r.delta >= 3.0
        assert any("stored ball" in w for w in r.warnings)
        quiet = gcops_test(random_field(45), random_field(46))
        assert not any("stored ball" in w for w in quiet.warnings)

    def test_small_region_warning(self):
        mask = np.zeros((32, 32), bool)
        mask[4:20, 4:20] = True  # one object of 256 sites in a 1024 window
        a = BinaryField.from_mask(mask)
        b = random_field(47, shape=(32, 32), p=0.5)
        r = gcops_test(a, b, delta=0.0)
        assert any("normal approximation" in w for w in r.warnings)

    def test_nonpositive_variance_is_an_error(self):
        # horizontal vs vertical parity stripes: at delta = 1 the cross
        # products cancel past zero, S = 1/16 - 1/8 - 1/8 = -3/16
        idx = np.indices((16, 16))
        a = BinaryField.from_mask(idx[0] % 2 == 0)
        b = BinaryField.from_mask(idx[1] % 2 == 0)
        with pytest.raises(NonPositiveVariance) as info:
            gcops_test(a, b, delta=1.0, max_lag=2)
        assert info.value.s_hat == pytest.approx(-0.1875, abs=1e-12)
        assert info.value.delta == 1.0

    def test_independent_channels_are_not_rejected_typically(self):
        reject = 0
        reps = 60
        rng = np.random.default_rng(48)
        for _ in range(reps):
            a = BinaryField.from_mask(rng.random((64, 64)) < 0.3)
            b = BinaryField.from_mask(rng.random((64, 64)) < 0.3)
            if gcops_test(a, b).p_bilateral < 0.05:
                reject += 1
        # binomial(60, 0.05): more than 12 rejections has probability ~ 2e-6
        assert reject <= 12
