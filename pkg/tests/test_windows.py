import math

import numpy as np
import pytest

from gcops import (
    BinaryField,
    LengthMismatch,
    NoScores,
    ScanResult,
    WindowLargerThanImage,
    WindowResult,
    WindowSpec,
    scan,
    shift_scan,
    smooth_scores,
)
from gcops import testing
from gcops.fields import CoverageStats
from gcops.windows import default_window_size


def bernoulli_field(rng, shape=(128, 128), p=0.3):
    return BinaryField.from_mask(rng.random(shape) < p)


def fake_scan(shape, centers, scores, level=0.05):
    entries = []
    for center, score in zip(centers, scores):
        stats = CoverageStats(0.1, 0.1, 0.01, 0.0, 100)
        report = testing.TestReport(
            stats=stats,
            delta=0.0,
            s_hat=1.0,
            t=float(score),
            p_bilateral=1.0,
            p_coloc=0.5,
            p_anticoloc=0.5,
            max_lag_used=4,
        )
        entries.append(
            WindowResult(
                origin=tuple(int(c) for c in center),
                center=tuple(float(c) for c in center),
                report=report,
            )
        )
    return ScanResult(shape=shape, level=level, entries=tuple(entries))


class TestWindowSpec:
    def test_defaults(self):
        assert default_window_size(2) == (50, 50)
        assert default_window_size(3) == (10, 50, 50)
        spec = WindowSpec(size=(50, 50))
        assert spec.stride == 25
        assert spec.placement == "grid"

    def test_validation(self):
        with pytest.raises(ValueError):
            WindowSpec(size=(0, 50))
        with pytest.raises(ValueError):
            WindowSpec(size=(50, 50), stride=0)
        with pytest.raises(ValueError):
            WindowSpec(size=(50, 50), placement="spiral")
        with pytest.raises(ValueError):
            WindowSpec(size=(50, 50), placement="random")


class TestScan:
    def test_grid_window_count(self):
        # 256 pixels, 50-wide windows, stride 34: origins 0,34,...,204 give
        # 7 positions per axis, 49 windows
        rng = np.random.default_rng(50)
        a = bernoulli_field(rng, (256, 256))
        b = bernoulli_field(rng, (256, 256))
        result = scan(a, b, WindowSpec(size=(50, 50), stride=34))
        assert len(result.entries) == 49
        origins = {e.origin for e in result.entries}
        assert (0, 0) in origins
        assert (204, 204) in origins

    def test_grid_count_formula(self):
        rng = np.random.default_rng(51)
        a = bernoulli_field(rng, (120, 90))
        b = bernoulli_field(rng, (120, 90))
        result = scan(a, b, WindowSpec(size=(50, 40), stride=25))
        per_axis = [(120 - 50) // 25 + 1, (90 - 40) // 25 + 1]
        assert len(result.entries) == per_axis[0] * per_axis[1]

    def test_centers(self):
        rng = np.random.default_rng(52)
        a = bernoulli_field(rng, (64, 64))
        b = bernoulli_field(rng, (64, 64))
        result = scan(a, b, WindowSpec(size=(32, 32), stride=32))
        first = result.entries[0]
        assert first.origin == (0, 0)
        assert first.center == (15.5, 15.5)

    def test_random_placement_is_seeded(self):
        rng = np.random.default_rng(53)
        a = bernoulli_field(rng, (128, 128))
        b = bernoulli_field(rng, (128, 128))
        spec = WindowSpec(size=(40, 40), placement="random", count=12, seed=7)
        r1 = scan(a, b, spec)
        r2 = scan(a, b, spec)
        assert [e.origin for e in r1.entries] == [e.origin for e in r2.entries]
        assert len(r1.entries) == 12
        for origin in (e.origin for e in r1.entries):
            assert all(0 <= o <= 128 - 40 for o in origin)

    def test_window_must_fit(self):
        rng = np.random.default_rng(54)
        a = bernoulli_field(rng, (32, 32))
        with pytest.raises(WindowLargerThanImage):
            scan(a, a, WindowSpec(size=(50, 50)))

    def test_degenerate_windows_are_skipped(self):
        # foreground only in the left half: right-half windows have a
        # constant channel and must be skipped, not crash the scan
        mask = np.zeros((64, 64), bool)
        rng = np.random.default_rng(55)
        mask[:, :32] = rng.random((64, 32)) < 0.5
        a = BinaryField.from_mask(mask)
        b = bernoulli_field(rng, (64, 64), p=0.5)
        result = scan(a, b, WindowSpec(size=(32, 32), stride=32))
        reasons = {e.origin: e.skip_reason for e in result.entries}
        assert reasons[(0, 0)] is None
        assert reasons[(0, 32)] == "DegenerateChannel"
        assert len(result.completed) + len(result.skipped) == 4

    def test_identical_channels_hit_everywhere(self):
        rng = np.random.default_rng(56)
        a = bernoulli_field(rng, (100, 100), p=0.5)
        result = scan(a, a, WindowSpec(size=(50, 50), stride=25))
        assert len(result.hits) == len(result.entries) == 9
        for entry in result.entries:
            assert entry.report.p_coloc < 1e-12

    def test_null_hit_rate(self):
        # 49 null windows at level 0.05: a run with more than 8 hits has
        # probability under 1e-3, and the average should sit near 2.45
        hit_counts = []
        rng = np.random.default_rng(57)
        spec = WindowSpec(size=(50, 50), stride=34)
        for _ in range(50):
            a = bernoulli_field(rng, (256, 256))
            b = bernoulli_field(rng, (256, 256))
            result = scan(a, b, spec)
            assert len(result.entries) == 49
            hit_counts.append(len(result.hits))
        mean_hits = np.mean(hit_counts)
        assert 0.7 * 2.45 < mean_hits < 1.3 * 2.45
        assert max(hit_counts) <= 10

    def test_test_options_are_forwarded(self):
        rng = np.random.default_rng(58)
        a = bernoulli_field(rng, (64, 64))
        b = bernoulli_field(rng, (64, 64))
        result = scan(a, b, WindowSpec(size=(32, 32), stride=32), delta=2.0)
        for entry in result.completed:
            assert entry.report.delta == 2.0


class TestSmoothScores:
    def test_single_window_gives_constant_field(self):
        result = fake_scan((40, 40), centers=[(19.5, 19.5)], scores=[1.7])
        smoothed = smooth_scores(result)
        assert smoothed.shape == (40, 40)
        np.testing.assert_allclose(smoothed, 1.7, atol=1e-12)
        assert result.smoothed is smoothed

    def test_equal_scores_give_constant_field(self):
        result = fake_scan((30, 30), [(5.0, 5.0), (20.0, 25.0)], [0.8, 0.8])
        np.testing.assert_allclose(smooth_scores(result), 0.8, atol=1e-12)

    def test_far_windows_dominate_locally(self):
        result = fake_scan((200, 200), [(10.0, 10.0), (180.0, 180.0)], [2.0, -1.0])
        smoothed = smooth_scores(result, bandwidth=5.0)
        assert smoothed[10, 10] == pytest.approx(2.0, abs=1e-9)
        assert smoothed[180, 180] == pytest.approx(-1.0, abs=1e-9)

    def test_bounded_by_score_range(self):
        rng = np.random.default_rng(59)
        centers = [(float(x), float(y)) for x, y in rng.integers(0, 64, (15, 2))]
        scores = rng.normal(size=15)
        result = fake_scan((64, 64), centers, scores)
        smoothed = smooth_scores(result, bandwidth=8.0)
        assert smoothed.min() >= scores.min() - 1e-12
        assert smoothed.max() <= scores.max() + 1e-12

    def test_midpoint_of_two_windows(self):
        result = fake_scan((40, 40), [(10.0, 20.0), (30.0, 20.0)], [1.0, 3.0])
        smoothed = smooth_scores(result, bandwidth=10.0)
        assert smoothed[20, 20] == pytest.approx(2.0, abs=1e-12)

    def test_all_skipped_raises(self):
        entries = (
            WindowResult(origin=(0, 0), center=(5.0, 5.0), skip_reason="X"),
        )
        result = ScanResult(shape=(20, 20), level=0.05, entries=entries)
        with pytest.raises(NoScores):
            smooth_scores(result)

    def test_bad_bandwidth(self):
        result = fake_scan((20, 20), [(5.0, 5.0)], [1.0])
        with pytest.raises(ValueError):
            smooth_scores(result, bandwidth=0.0)

    def test_3d_field(self):
        result = fake_scan((8, 16, 16), [(4.0, 8.0, 8.0)], [1.2])
        smoothed = smooth_scores(result)
        assert smoothed.shape == (8, 16, 16)
        np.testing.assert_allclose(smoothed, 1.2, atol=1e-12)


def make_sequence(rng, length, shape=(48, 48)):
    return [BinaryField.from_mask(rng.random(shape) < 0.4) for _ in range(length)]


class TestShiftScan:
    def test_synchronized_sequences_peak_at_zero(self):
        rng = np.random.default_rng(60)
        seq = make_sequence(rng, 10)
        curve = shift_scan(seq, list(seq), max_shift=3)
        assert curve.shifts == tuple(range(-3, 4))
        assert curve.peak_shift == 0
        peak_mean = curve.means[curve.shifts.index(0)]
        assert peak_mean == pytest.approx(math.sqrt(48 * 48), rel=1e-6)

    def test_delayed_channel_peaks_at_minus_lag(self):
        # seq_b shows the events of seq_a three frames later; pairing frame
        # t+dt of the reference with frame t of the other, the identical
        # pairs line up at dt = -3
        rng = np.random.default_rng(61)
        seq_a = make_sequence(rng, 12)
        seq_b = make_sequence(rng, 3) + seq_a[:-3]
        curve = shift_scan(seq_a, seq_b, max_shift=5)
        assert curve.peak_shift == -3

    def test_frame_counts(self):
        rng = np.random.default_rng(62)
        seq_a = make_sequence(rng, 9)
        seq_b = make_sequence(rng, 9)
        curve = shift_scan(seq_a, seq_b, max_shift=4)
        for dt, scores in zip(curve.shifts, curve.frame_scores):
            assert len(scores) == 9 - abs(dt)

    def test_independent_sequences_stay_flat(self):
        rng = np.random.default_rng(63)
        curve = shift_scan(
            make_sequence(rng, 14), make_sequence(rng, 14), max_shift=4
        )
        assert max(abs(m) for m in curve.means) < 1.0

    def test_degenerate_frames_are_counted_not_scored(self):
        rng = np.random.default_rng(64)
        seq_a = make_sequence(rng, 6)
        seq_b = make_sequence(rng, 6)
        seq_a[2] = BinaryField.from_mask(np.zeros((48, 48), bool))
        curve = shift_scan(seq_a, seq_b, max_shift=1)
        at_zero = curve.shifts.index(0)
        assert curve.skipped[at_zero] == 1
        assert len(curve.frame_scores[at_zero]) == 5

    def test_length_mismatch(self):
        rng = np.random.default_rng(65)
        with pytest.raises(LengthMismatch):
            shift_scan(make_sequence(rng, 5), make_sequence(rng, 6), max_shift=2)

    def test_max_shift_bounds(self):
        rng = np.random.default_rng(66)
        seq = make_sequence(rng, 5)
        with pytest.raises(ValueError):
            shift_scan(seq, list(seq), max_shift=5)
        with pytest.raises(ValueError):
            shift_scan(seq, list(seq), max_shift=-1)
