import numpy as np
import pytest

from calibdis import core, worlds


def worked_example_world():
    # one input: labels (0.7, 0.3), both members predict (0.2, 0.8)
    return worlds.FiniteWorld(
        x_masses=np.array([1.0]),
        label_table=np.array([[0.7, 0.3]]),
        member_tables=np.array([[[0.2, 0.8]], [[0.2, 0.8]]]),
    )


class TestSplitMix64:
    def test_vector_matches_scalar(self):
        a = worlds.SplitMix64(42)
        b = worlds.SplitMix64(42)
        block = a.floats(257)
        singles = np.array([b.next_float() for _ in range(257)])
        assert np.array_equal(block, singles)
        assert a.state == b.state

    def test_state_resumes(self):
        a = worlds.SplitMix64(7)
        first = a.floats(10)
        b = worlds.SplitMix64(7)
        b.floats(4)
        assert np.array_equal(b.floats(6), first[4:])

    def test_range(self):
        r = worlds.SplitMix64(1)
        vals = r.floats(1000)
        assert vals.min() >= 0.0 and vals.max() < 1.0
        assert all(0 <= r.next_below(13) < 13 for _ in range(50))

    def test_empty_block(self):
        r = worlds.SplitMix64(3)
        s = r.state
        assert r.floats(0).size == 0
        assert r.state == s


class TestWorldValidation:
    def test_shapes_checked(self):
        with pytest.raises(ValueError):
            worlds.FiniteWorld(np.array([0.5, 0.5]),
                               np.array([[0.5, 0.5]]),
                               np.ones((1, 1, 2)))
        with pytest.raises(ValueError):
            worlds.FiniteWorld(np.array([1.0]),
                               np.array([[1.0]]),
                               np.ones((1, 1, 1)))

    def test_masses_must_sum(self):
        with pytest.raises(ValueError):
            worlds.FiniteWorld(np.array([0.6, 0.6]),
                               np.array([[0.5, 0.5], [0.5, 0.5]]),
                               np.full((1, 2, 2), 0.5))

    def test_rows_must_sum(self):
        with pytest.raises(ValueError):
            worlds.FiniteWorld(np.array([1.0]),
                               np.array([[0.9, 0.3]]),
                               np.full((1, 1, 2), 0.5))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            worlds.FiniteWorld(np.array([1.5, -0.5]),
                               np.array([[0.5, 0.5], [0.5, 0.5]]),
                               np.full((2, 2, 2), 0.5))

    def test_default_member_masses(self):
        w = worked_example_world()
        assert np.allclose(w.member_masses, [0.5, 0.5])
        assert (w.x_count, w.class_count, w.member_count) == (1, 2, 2)


class TestMarginalAndTop:
    def test_marginal_mixes_members(self):
        w = worlds.FiniteWorld(
            np.array([1.0]),
            np.array([[0.5, 0.5]]),
            np.array([[[1.0, 0.0]], [[0.0, 1.0]]]),
            member_masses=np.array([0.75, 0.25]),
        )
        assert np.allclose(worlds.world_marginal(w), [[0.75, 0.25]])

    def test_top_one_hot_ties_low(self):
        w = worlds.FiniteWorld(
            np.array([1.0]),
            np.array([[0.5, 0.5]]),
            np.array([[[0.5, 0.5]]]),
        )
        t = worlds.world_apply_top(w)
        assert np.array_equal(t.member_tables, [[[1.0, 0.0]]])


class TestExactReport:
    def test_worked_example_values(self):
        rep = worlds.exact_report(worked_example_world())
        assert abs(rep.acc - 0.38) < 1e-12
        assert abs(rep.pred_acc - 0.68) < 1e-12
        assert abs(rep.test_error - 0.62) < 1e-12
        assert abs(rep.dis - 0.32) < 1e-12
        assert abs(rep.gde_gap - 0.30) < 1e-12
        assert abs(rep.top1_acc - 0.3) < 1e-12
        assert abs(rep.top1_conf - 0.8) < 1e-12

    def test_level_masses_partition(self):
        rep = worlds.exact_report(worlds.build_random_world(5, 4, 12, 3))
        assert abs(rep.levelsets.label_masses.sum() - 1.0) < 1e-12
        assert abs(rep.levelsets.self_masses.sum() - 1.0) < 1e-12

    def test_identities(self):
        for seed in range(5):
            rep = worlds.exact_report(worlds.build_random_world(seed, 3, 9, 4))
            assert abs(rep.dis - (1.0 - rep.pred_acc)) < 1e-12
            assert abs(rep.test_error - (1.0 - rep.acc)) < 1e-12
            assert abs(rep.gde_gap - abs(rep.test_error - rep.dis)) < 1e-12


class TestTheoremSuite:
    def test_random_worlds_pass(self):
        for seed in range(8):
            world = worlds.build_random_world(seed, 3, 10, 4,
                                              uniform_member_masses=(seed % 2 == 0))
            report = worlds.verify_theorems(world)
            assert report.ok, [c.name for c in report.failures]
            assert len(report.checks) >= 15

    def test_failures_surface(self):
        bad = worlds.TheoremCheck(name="x", passed=False, slack=-1.0,
                                  tolerance=0.0)
        good = worlds.TheoremCheck(name="y", passed=True, slack=1.0,
                                   tolerance=0.0)
        rep = worlds.TheoremReport(checks=(bad, good))
        assert not rep.ok
        assert rep.failures == (bad,)

    def test_tautology_on_any_world(self):
        for seed in range(5):
            w = worlds.build_random_world(seed, 4, 7, 2)
            assert worlds.check_tautology(w).passed


class TestCalibratedBuilders:
    def test_matched_mode(self):
        for seed in range(5):
            w = worlds.build_classwise_calibrated_world(seed, 3, 8, 4)
            assert worlds.check_classwise_calibration(w).passed
            rep = worlds.exact_report(w)
            assert rep.cace_exact < 1e-10
            assert rep.gde_gap < 1e-10

    def test_levelset_mixed_mode(self):
        for seed in range(5):
            w = worlds.build_classwise_calibrated_world(
                seed, 3, 8, 4, mode="levelset-mixed")
            assert worlds.check_classwise_calibration(w).passed
            rep = worlds.exact_report(w)
            assert rep.cace_exact < 1e-10
            # no single x matches its label row, only the level aggregate
            mismatch = np.abs(w.label_table - worlds.world_marginal(w))
            assert mismatch.max(axis=1).min() > 1e-6

    def test_levelset_mixed_needs_even_x(self):
        with pytest.raises(ValueError):
            worlds.build_classwise_calibrated_world(0, 3, 7, 4,
                                                    mode="levelset-mixed")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            worlds.build_classwise_calibrated_world(0, 3, 8, 4, mode="exotic")

    def test_random_worlds_are_not_calibrated(self):
        hits = sum(
            worlds.check_classwise_calibration(
                worlds.build_random_world(seed, 3, 10, 4)).passed
            for seed in range(5))
        assert hits == 0


class TestTwoRegime:
    def test_structure(self):
        w = worlds.build_two_regime_world()
        assert (w.x_count, w.class_count, w.member_count) == (6, 3, 3)
        marg = worlds.world_marginal(w)
        pred_err = 1.0 - np.sum(marg * marg, axis=1)
        assert np.allclose(pred_err[:3], 0.185, atol=1e-12)
        assert np.allclose(pred_err[3:], 0.54, atol=1e-12)

    def test_matched_stratum_calibrated_mixture_not(self):
        w = worlds.build_two_regime_world()
        assert not worlds.check_classwise_calibration(w).passed
        rep = worlds.exact_report(w)
        assert rep.cace_exact > 0.01
        # the label perturbation is orthogonal to the marginal, so the
        # accuracy / predicted-accuracy gap still vanishes everywhere
        assert rep.gde_gap < 1e-12
        marg = worlds.world_marginal(w)
        per_x_gap = np.abs((w.label_table * marg).sum(axis=1)
                           - (marg * marg).sum(axis=1))
        assert per_x_gap.max() < 1e-12

    def test_theorems_hold(self):
        assert worlds.verify_theorems(worlds.build_two_regime_world()).ok


class TestBalancedOrder:
    def test_small_case(self):
        order = worlds._balanced_label_order(np.array([2, 1, 1]))
        assert order.tolist() == [0, 1, 2, 0]

    def test_histogram_matches(self):
        counts = np.array([7, 3, 5])
        order = worlds._balanced_label_order(counts)
        assert np.array_equal(np.bincount(order, minlength=3), counts)


class TestExpansion:
    def test_exact_empirical_masses(self):
        w = worlds.build_two_regime_world()
        copies = np.array([100, 100, 100, 40, 40, 40])
        ds = worlds.expand_world_dataset(w, copies)
        assert ds.sample_count == 420
        # per-x label histograms equal the exact per-class counts
        start = 0
        for x in range(w.x_count):
            seg = ds.labels[start:start + copies[x]]
            assert np.array_equal(
                np.bincount(seg, minlength=3),
                np.rint(w.label_table[x] * copies[x]).astype(int))
            assert np.array_equal(ds.probs[:, start, :], w.member_tables[:, x, :])
            start += copies[x]

    def test_estimators_match_exact_report(self):
        w = worlds.build_two_regime_world()
        ds = worlds.expand_world_dataset(w, [100, 100, 100, 40, 40, 40])
        rep = worlds.exact_report(w)
        marg = core.marginal(ds)
        from calibdis import calibration as cal
        assert abs(float(np.mean(core.per_sample_accuracy(marg, ds.labels)))
                   - rep.acc) < 1e-12
        assert abs(core.expected_test_error(ds).mean - rep.test_error) < 1e-12
        assert abs(core.expected_disagreement(ds) - rep.dis) < 1e-12
        assert abs(cal.cace_levelset(marg, ds.labels) - rep.cace_exact) < 1e-12
        assert abs(cal.ecace_levelset(marg, ds.labels) - rep.ecace_exact) < 1e-9

    def test_rejects_nonintegral_counts(self):
        w = worlds.build_two_regime_world()
        with pytest.raises(ValueError):
            worlds.expand_world_dataset(w, [7, 7, 7, 7, 7, 7])

    def test_rejects_nonuniform_member_masses(self):
        w = worlds.FiniteWorld(
            np.array([1.0]), np.array([[0.5, 0.5]]),
            np.full((2, 1, 2), 0.5), member_masses=np.array([0.9, 0.1]))
        with pytest.raises(ValueError):
            worlds.expand_world_dataset(w, [10])

    def test_rejects_bad_copy_vector(self):
        w = worlds.build_two_regime_world()
        with pytest.raises(ValueError):
            worlds.expand_world_dataset(w, [100, 100, 100])


class TestSampling:
    def test_deterministic(self):
        w = worlds.build_random_world(3, 3, 6, 2)
        a = worlds.sample_dataset(w, 200, seed=99)
        b = worlds.sample_dataset(w, 200, seed=99)
        assert np.array_equal(a.probs, b.probs)
        assert np.array_equal(a.labels, b.labels)
        c = worlds.sample_dataset(w, 200, seed=100)
        assert not np.array_equal(a.labels, c.labels)

    def test_rows_copied_exactly(self):
        w = worlds.build_random_world(4, 3, 5, 2)
        ds = worlds.sample_dataset(w, 50, seed=1)
        cols = {tuple(np.round(w.member_tables[:, x, :].ravel(), 15))
                for x in range(w.x_count)}
        for i in range(ds.sample_count):
            assert tuple(np.round(ds.probs[:, i, :].ravel(), 15)) in cols

    def test_frequencies_approach_masses(self):
        w = worlds.build_random_world(5, 2, 3, 2)
        ds = worlds.sample_dataset(w, 20000, seed=7)
        key = ds.probs[0, :, 0]
        levels = np.round(w.member_tables[0, :, 0], 12)
        freq = np.array([(np.round(key, 12) == lv).mean() for lv in levels])
        assert np.abs(freq - w.x_masses).max() < 0.02

    def test_requires_uniform_member_masses(self):
        w = worlds.FiniteWorld(
            np.array([1.0]), np.array([[0.5, 0.5]]),
            np.full((2, 1, 2), 0.5), member_masses=np.array([0.9, 0.1]))
        with pytest.raises(ValueError):
            worlds.sample_dataset(w, 10, seed=0)

    def test_requires_positive_count(self):
        w = worlds.build_random_world(6, 2, 2, 2)
        with pytest.raises(ValueError):
            worlds.sample_dataset(w, 0, seed=0)

    def test_sampled_dataset_passes_identity_suite(self):
        w = worlds.build_random_world(8, 3, 6, 3)
        ds = worlds.sample_dataset(w, 300, seed=11)
        report = worlds.verify_dataset(ds)
        assert report.ok, [c.name for c in report.failures]
