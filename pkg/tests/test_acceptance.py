"""Acceptance gate: the package's headline guarantees, one printed line each.

Each test checks one guarantee end to end at its stated tolerance and
prints a single PASS/FAIL line (collected into the terminal summary).
Tolerances and time limits are pinned here on purpose; loosening them is
a behavior change, not a test fix.
"""

import pathlib
import subprocess
import sys
import time

import numpy as np

import conftest
from calibdis import calibration as cal
from calibdis import core, formats, info, rejection, worlds

FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures"


def _report(name, ok, detail=""):
    line = "%s %-46s %s" % ("PASS" if ok else "FAIL", name, detail)
    print(line)
    conftest.record_acceptance(line)
    assert ok, line


def _sampled_datasets(count=20, n=250):
    out = []
    for i in range(count):
        world = worlds.build_random_world(300 + i, 2 + i % 4, 4 + i % 6,
                                          2 + i % 4)
        out.append(worlds.sample_dataset(world, n, seed=900 + i))
    return out


def test_worked_example_closed_forms():
    world = worlds.FiniteWorld(
        x_masses=np.array([1.0]),
        label_table=np.array([[0.7, 0.3]]),
        member_tables=np.array([[[0.2, 0.8]], [[0.2, 0.8]]]),
    )
    worlds.exact_report(world)  # steady-state timing only
    t0 = time.perf_counter()
    rep = worlds.exact_report(world)
    elapsed = time.perf_counter() - t0
    dev = max(abs(rep.acc - 0.38), abs(rep.top1_acc - 0.3),
              abs(rep.pred_acc - 0.68), abs(rep.top1_conf - 0.8),
              abs(rep.gde_gap - 0.30))
    ok = dev <= 1e-12 and elapsed < 1e-3
    _report("worked-example-closed-forms", ok,
            "max dev %.2e, %.3f ms" % (dev, elapsed * 1e3))


def test_calibrated_worlds_have_zero_cace_and_zero_gap():
    t0 = time.perf_counter()
    worst_cace = worst_gap = 0.0
    for seed in range(100):
        mode = "matched" if seed % 2 == 0 else "levelset-mixed"
        k = 2 + seed % 4
        x = 2 * (1 + seed % 10)
        m = 1 + seed % 6
        world = worlds.build_classwise_calibrated_world(seed, k, x, m, mode)
        rep = worlds.exact_report(world)
        worst_cace = max(worst_cace, rep.cace_exact)
        worst_gap = max(worst_gap, rep.gde_gap)
    elapsed = time.perf_counter() - t0
    ok = worst_cace <= 1e-10 and worst_gap <= 1e-10 and elapsed < 5.0
    _report("calibrated-worlds-zero-cace-zero-gap", ok,
            "100 worlds, max cace %.2e, max gap %.2e, %.2f s"
            % (worst_cace, worst_gap, elapsed))


def test_chained_bounds_on_random_worlds():
    t0 = time.perf_counter()
    min_cw = min_ca = min_two = np.inf
    violations = 0
    for seed in range(200):
        world = worlds.build_random_world(seed, 2 + seed % 4, 3 + seed % 8,
                                          1 + seed % 5)
        rep = worlds.exact_report(world)
        s1 = rep.cwce_exact - rep.cace_exact
        s2 = rep.cace_exact - rep.gde_gap
        s3 = 2.0 - rep.cace_exact
        min_cw, min_ca, min_two = min(min_cw, s1), min(min_ca, s2), min(min_two, s3)
        if s1 < -1e-12 or s2 < -1e-12 or s3 < -1e-12:
            violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 10.0
    _report("chained-calibration-bounds", ok,
            "200 worlds, 0 violations expected (got %d); min slacks "
            "cwce-cace %.2e, cace-gap %.2e, 2-cace %.2e; %.2f s"
            % (violations, min_cw, min_ca, min_two, elapsed))


def test_disagreement_equals_complement_of_predicted_accuracy():
    worst = 0.0
    for seed in range(200):
        world = worlds.build_random_world(seed, 2 + seed % 3, 3 + seed % 6,
                                          2 + seed % 4)
        for w in (world, worlds.world_apply_top(world)):
            rep = worlds.exact_report(w)
            worst = max(worst, abs(rep.dis - (1.0 - rep.pred_acc)))
    for ds in _sampled_datasets():
        for d in (ds, core.apply_top(ds)):
            dis = core.expected_disagreement(d, mode="ordered-pairs")
            pred = float(np.mean(core.per_sample_pred_acc(core.marginal(d))))
            worst = max(worst, abs(dis - (1.0 - pred)))
    ok = worst <= 1e-12
    _report("disagreement-is-predicted-error", ok,
            "200 worlds + 20 datasets with argmax variants, max dev %.2e"
            % worst)


def test_linearized_bald_forms_and_top_disagreement():
    worst_forms = worst_top = 0.0
    for ds in _sampled_datasets():
        var = info.approx_bald(ds, form="variance").values
        ent = info.approx_bald(ds, form="entropy-difference").values
        worst_forms = max(worst_forms, float(np.max(np.abs(var - ent))))
        top = core.apply_top(ds)
        ab = info.approx_bald(top, form="variance").values
        dis = core.per_sample_disagreement(core.marginal(top))
        worst_top = max(worst_top, float(np.max(np.abs(ab - dis))))
    ok = worst_forms <= 1e-12 and worst_top <= 1e-12
    _report("variance-form-of-linearized-bald", ok,
            "20 datasets, form dev %.2e, argmax-disagreement dev %.2e"
            % (worst_forms, worst_top))


def test_level_set_tautology_zero_violations():
    violations = 0
    worst = 0.0
    for seed in range(50):
        world = worlds.build_random_world(1000 + seed, 2 + seed % 4,
                                          3 + seed % 10, 1 + seed % 5)
        check = worlds.check_tautology(world, tol=1e-12)
        if not check.passed:
            violations += 1
        worst = max(worst, check.tolerance - check.slack)
    ok = violations == 0
    _report("level-set-tautology", ok,
            "50 worlds, %d violations, max dev %.2e" % (violations, worst))


def test_entropic_calibration_bound():
    min_slack = np.inf
    violations = 0
    cfg = info.InfoConfig()
    for seed in range(100):
        world = worlds.build_random_world(2000 + seed, 2 + seed % 4,
                                          3 + seed % 8, 1 + seed % 6)
        rep = worlds.exact_report(world, cfg)
        slack = rep.ecace_exact - rep.entropic_gde_gap / cfg.ic_top
        min_slack = min(min_slack, slack)
        if slack < -1e-12:
            violations += 1
    ok = violations == 0
    _report("entropic-gap-bounded-by-ecace", ok,
            "100 worlds, %d violations, min slack %.2e"
            % (violations, min_slack))


def test_binned_estimators_converge_on_sampled_data(convergence_world):
    t0 = time.perf_counter()
    exact = worlds.exact_report(convergence_world)
    worst_ratio = 0.0
    details = []
    ok = True
    for n in (10 ** 3, 10 ** 4, 10 ** 5):
        limit = 5.0 / np.sqrt(n)
        for seed in (101, 202, 303):
            ds = worlds.sample_dataset(convergence_world, n, seed)
            marg = core.marginal(ds)
            err_cace = abs(cal.cace(marg, ds.labels) - exact.cace_exact)
            err_cwce = abs(cal.cwce(marg, ds.labels) - exact.cwce_exact)
            worst = max(err_cace, err_cwce)
            worst_ratio = max(worst_ratio, worst / limit)
            if worst >= limit:
                ok = False
                details.append("N=%d seed=%d err=%.4f limit=%.4f"
                               % (n, seed, worst, limit))
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    _report("sampled-estimator-convergence", ok,
            "9 datasets, worst error at %.2f of the allowed envelope, %.2f s%s"
            % (worst_ratio, elapsed,
               ("; " + "; ".join(details)) if details else ""))


def test_single_bin_qweighted_recovers_gap_everywhere(worked_example_ds,
                                                      distinct_rows_ds):
    datasets = [worked_example_ds, distinct_rows_ds,
                formats.read_dump(str(FIXTURES / "worked_example.bin")),
                formats.read_dump(str(FIXTURES / "random_dump.bin"))]
    datasets += _sampled_datasets()
    datasets += [core.apply_top(ds) for ds in list(datasets)]
    single = np.array([0.0, 1.0])
    worst = 0.0
    for ds in datasets:
        marg = core.marginal(ds)
        v = cal.cace_qweighted(marg, ds.labels, edges=single)
        worst = max(worst, abs(v - core.gde_gap(marg, ds.labels)))
    ok = worst <= 1e-12
    _report("single-bin-qweighted-equals-gap", ok,
            "%d datasets, max dev %.2e" % (len(datasets), worst))


def test_cli_outputs_are_byte_deterministic(tmp_path):
    dump = str(FIXTURES / "random_dump.bin")
    module = [sys.executable, "-m", "calibdis.cli"]

    def run(args, threads_env=None):
        import os
        env = dict(os.environ)
        if threads_env is not None:
            env["NUMBA_NUM_THREADS"] = str(threads_env)
        proc = subprocess.run(module + args, capture_output=True, text=True,
                              env=env)
        assert proc.returncode == 0, proc.stderr
        return proc

    metric_outs = []
    for i, env_threads in enumerate((None, None, 1, 4)):
        out = tmp_path / ("m%d.txt" % i)
        run(["metrics", "--predictions", dump, "--out", str(out)],
            threads_env=env_threads)
        metric_outs.append(out.read_bytes())
    metrics_ok = all(b == metric_outs[0] for b in metric_outs)

    curve_outs = []
    meta_outs = []
    for i, threads in enumerate((1, 1, 4)):
        out = tmp_path / ("c%d.csv" % i)
        run(["rejection", "--predictions", dump, "--score", "pred-error",
             "--grid", "20", "--threads", str(threads), "--out", str(out)])
        curve_outs.append(out.read_bytes())
        meta_outs.append((tmp_path / ("c%d.csv.meta.txt" % i)).read_bytes())
    curves_ok = all(b == curve_outs[0] for b in curve_outs)
    meta_ok = all(b == meta_outs[0] for b in meta_outs)

    ok = metrics_ok and curves_ok and meta_ok
    _report("byte-deterministic-cli-outputs", ok,
            "metrics x4 identical=%s, curves x3 (threads 1,1,4) identical=%s"
            % (metrics_ok, curves_ok))


def test_two_regime_curve_calibration_rises_gap_flat():
    world = worlds.build_two_regime_world()
    ds = worlds.expand_world_dataset(world, [100, 100, 100, 40, 40, 40])
    curve = rejection.rejection_curve(
        ds, rejection.SweepSpec(kind="quantile", grid_count=21),
        score_kind="pred-error")
    ece_col = [r.ece for r in curve.rows]
    cace_col = [r.cace for r in curve.rows]
    cwce_col = [r.cwce for r in curve.rows]
    gap_col = [r.gde_gap for r in curve.rows]

    def nondecreasing(col):
        return all(b >= a - 1e-12 for a, b in zip(col, col[1:]))

    rising = (nondecreasing(ece_col) and nondecreasing(cace_col)
              and nondecreasing(cwce_col))
    grew = (ece_col[-1] > ece_col[0] + 1e-3
            and cace_col[-1] > cace_col[0] + 1e-3)
    flat_gap = max(abs(g) for g in gap_col) <= 1e-9
    ok = rising and grew and flat_gap
    _report("two-regime-curve-shape", ok,
            "ece %.4f->%.4f cace %.4f->%.4f cwce %.4f->%.4f, max |gap| %.2e"
            % (ece_col[0], ece_col[-1], cace_col[0], cace_col[-1],
               cwce_col[0], cwce_col[-1], max(abs(g) for g in gap_col)))
