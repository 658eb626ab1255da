"""Damped least squares, bootstrap pipelines and the affinity chain."""

import math
import warnings

import numpy as np
import pytest

from qpsense.errors import (DegenerateFitError, DomainError, EstimationError,
                            ParseError)
from qpsense.kinetics import observable_rate
from qpsense.photon_stats import ProbeModel, sample_transmitted
from qpsense.rng import substream
from qpsense import estimation
from qpsense.estimation import (BootstrapConfig, ExperimentDataset, LMOptions,
                                align_dataset, auto_align,
                                bootstrap_sensorgram,
                                classical_surrogate_sensorgram,
                                estimate_affinity, estimate_ks,
                                fit_sensorgram, levenberg_marquardt,
                                linear_fit, read_dataset_csv,
                                steady_state_bin, write_dataset_csv,
                                write_results_csv, write_run_manifest)

QUANTUM = ProbeModel.HERALDED_SINGLE_PHOTON
CLASSICAL = ProbeModel.COHERENT_UNIT_MEAN


def exponential_model(times, p):
    return p[0] + p[1] * (1.0 - np.exp(-p[2] * times))


def exponential_jacobian(times, p):
    decay = np.exp(-p[2] * times)
    return np.column_stack((np.ones_like(times), 1.0 - decay,
                            p[1] * times * decay))


def fd_jacobian(residual_fn, p, h_rel=1e-6):
    """Oracle: central finite differences with per-parameter relative step."""
    r0 = residual_fn(p)
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = h_rel * max(abs(p[j]), 1.0)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (residual_fn(up) - residual_fn(dn)) / (2.0 * h)
    return jac


def make_dataset(truth, times, nu, mu, model, seed, path=(3,)):
    values = exponential_model(times, np.asarray(truth))
    samples = [sample_transmitted(float(t), nu, model,
                                  substream(seed, *path, k), size=mu) / nu
               for k, t in enumerate(values)]
    return ExperimentDataset(times=times, samples=samples, nu=nu)


def noiseless_dataset(truth, times, nu=150, mu=8):
    values = exponential_model(times, np.asarray(truth))
    return ExperimentDataset(times=times,
                             samples=[np.full(mu, v) for v in values], nu=nu)


# --- Levenberg-Marquardt ---------------------------------------------------


def test_lm_noiseless_round_trip():
    truth = np.array([0.06, 0.04, 0.0413])
    times = np.linspace(0.0, 102.0, 40)
    data = exponential_model(times, truth)
    fit = levenberg_marquardt(
        lambda p: exponential_model(times, p) - data,
        lambda p: exponential_jacobian(times, p),
        np.array([0.05, 0.05, 0.1]))
    assert fit.converged
    assert np.max(np.abs(fit.params - truth) / truth) < 1e-8


def test_lm_linear_model_converges_immediately():
    x = np.linspace(0.0, 10.0, 20)
    y = 3.0 * x
    fit = levenberg_marquardt(lambda p: p[0] * x - y,
                              lambda p: x[:, None], np.array([1.0]))
    assert fit.converged
    assert fit.iterations <= 2
    assert abs(fit.params[0] - 3.0) < 1e-12


def test_lm_jacobian_matches_finite_differences():
    times = np.linspace(0.0, 102.0, 18)
    rng = substream(606, 6, 0)
    for _ in range(100):
        p = np.array([rng.uniform(0.01, 0.2), rng.uniform(0.01, 0.2),
                      rng.uniform(0.005, 0.5)])
        analytic = exponential_jacobian(times, p)
        numeric = fd_jacobian(lambda q: exponential_model(times, q), p)
        assert np.max(np.abs(analytic - numeric)) < 1e-5


def test_lm_pathological_residual_reports_non_convergence():
    # every trial step lands on a NaN residual, so no step is ever accepted
    start = np.array([1.0, 1.0])

    def residual(p):
        if np.array_equal(p, start):
            return np.array([1.0, 2.0, 3.0])
        return np.full(3, np.nan)

    fit = levenberg_marquardt(residual, lambda p: np.ones((3, 2)), start)
    assert not fit.converged
    assert fit.iterations == 0


def test_lm_residual_history_monotone():
    rng = substream(606, 6, 1)
    times = np.linspace(0.0, 102.0, 30)
    data = exponential_model(times, np.array([0.06, 0.04, 0.0413]))
    data = data + rng.normal(0.0, 2e-3, times.size)
    fit = fit_sensorgram(times, data)
    assert fit.converged
    assert np.all(np.diff(fit.residual_history) <= 1e-15)


def test_lm_param_std_matches_ols_on_linear_model():
    rng = substream(606, 6, 2)
    x = np.linspace(-3.0, 3.0, 25)
    y = 1.5 * x + 0.3 + rng.normal(0.0, 0.1, x.size)
    fit = levenberg_marquardt(
        lambda p: p[0] + p[1] * x - y,
        lambda p: np.column_stack((np.ones_like(x), x)),
        np.array([0.0, 0.0]))
    line = linear_fit(x, y)
    assert fit.params[1] == pytest.approx(line.slope, rel=1e-10)
    assert fit.param_std[1] == pytest.approx(line.slope_std, rel=1e-8)
    assert fit.param_std[0] == pytest.approx(line.intercept_std, rel=1e-8)


def test_lm_zero_dof_gives_zero_std():
    times = np.array([0.0, 10.0, 40.0])
    data = exponential_model(times, np.array([0.06, 0.04, 0.05]))
    fit = fit_sensorgram(times, data)
    assert np.all(fit.param_std == 0.0)


def test_lm_rejects_bad_start():
    with pytest.raises(DomainError):
        levenberg_marquardt(lambda p: np.array([np.nan]),
                            lambda p: np.array([[1.0]]), np.array([1.0]))
    with pytest.raises(DomainError):
        levenberg_marquardt(lambda p: np.array([0.0]),
                            lambda p: np.array([[1.0]]), np.array([]))


def test_lm_options_are_honoured():
    x = np.linspace(0.0, 1.0, 10)
    fit = levenberg_marquardt(lambda p: p[0] * x - 2.0 * x,
                              lambda p: x[:, None], np.array([0.0]),
                              LMOptions(max_iterations=1))
    assert fit.iterations <= 1


# --- linear fit ------------------------------------------------------------


def test_linear_fit_exact_line():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    line = linear_fit(x, 2.0 * x + 1.0)
    assert line.slope == pytest.approx(2.0, abs=1e-14)
    assert line.intercept == pytest.approx(1.0, abs=1e-14)
    assert line.slope_std == pytest.approx(0.0, abs=1e-10)
    assert line.intercept_std == pytest.approx(0.0, abs=1e-10)


def test_linear_fit_symmetric_points():
    line = linear_fit([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0])
    assert line.slope == pytest.approx(1.0) and line.intercept == \
        pytest.approx(0.0, abs=1e-15)


def test_linear_fit_hand_worked_standard_errors():
    # residuals (1,-1,0,-1,1) are orthogonal to the design, so the fit stays
    # y=x with RSS=4: slope_std=sqrt((4/3)/10), intercept_std=sqrt((4/3)/5)
    xs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    ys = xs + np.array([1.0, -1.0, 0.0, -1.0, 1.0])
    line = linear_fit(xs, ys)
    assert line.slope == pytest.approx(1.0, abs=1e-14)
    assert line.intercept == pytest.approx(0.0, abs=1e-14)
    assert line.slope_std == pytest.approx(0.3651483716701107, rel=1e-12)
    assert line.intercept_std == pytest.approx(0.5163977794943222, rel=1e-12)


def test_linear_fit_degenerate():
    with pytest.raises(DegenerateFitError):
        linear_fit([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DegenerateFitError):
        linear_fit([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


# --- datasets --------------------------------------------------------------


def test_dataset_validation_and_statistics():
    ds = ExperimentDataset(times=[3.0, 9.0, 15.0],
                           samples=[np.array([0.0, 1.0]),
                                    np.array([0.5, 0.5]),
                                    np.array([0.25])], nu=4)
    assert ds.n_bins == 3
    assert ds.set_counts().tolist() == [2, 2, 1]
    assert ds.bin_means().tolist() == [0.5, 0.5, 0.25]
    assert ds.bin_stds().tolist() == [0.5, 0.0, 0.0]
    with pytest.raises(DomainError):
        ExperimentDataset(times=[3.0, 9.0, 16.0],
                          samples=[np.ones(2)] * 3, nu=4)
    with pytest.raises(DomainError):
        ExperimentDataset(times=[3.0], samples=[np.array([-0.1])], nu=4)
    with pytest.raises(DomainError):
        ExperimentDataset(times=[3.0], samples=[np.array([np.nan])], nu=4)


def test_dataset_csv_round_trip(tmp_path):
    truth = [0.06, 0.04, 0.05]
    ds = make_dataset(truth, np.arange(5) * 6.0 + 3.0, 150, 20, QUANTUM, 42)
    path = tmp_path / "ds.csv"
    write_dataset_csv(str(path), ds)
    back = read_dataset_csv(str(path), 150, ligand_conc=1e-5, label="x")
    assert np.array_equal(back.times, ds.times)
    for a, b in zip(back.samples, ds.samples):
        assert np.array_equal(a, b)
    assert back.ligand_conc == 1e-5 and back.label == "x"


def test_dataset_csv_errors(tmp_path):
    path = tmp_path / "ds.csv"
    path.write_text("time_s,set_index,T_i\n")
    with pytest.raises(ParseError):
        read_dataset_csv(str(path), 150)
    path.write_text("time_s,set_index,T_i\n3.0,0,0.05\n3.0,1,bogus\n")
    with pytest.raises(ParseError, match=r"ds\.csv:3"):
        read_dataset_csv(str(path), 150)


def test_alignment():
    ds = ExperimentDataset(times=[3.0, 9.0],
                           samples=[np.array([0.10, 0.12]),
                                    np.array([0.2, 0.2])], nu=10,
                           label="run")
    shifted = align_dataset(ds, time_shift_s=1.0, baseline_shift=-0.01)
    assert shifted.times.tolist() == [2.0, 8.0]
    assert shifted.samples[0].tolist() == pytest.approx([0.09, 0.11])
    ref = ExperimentDataset(times=[3.0, 9.0],
                            samples=[np.array([0.06, 0.06]),
                                     np.array([0.2, 0.2])], nu=10, label="r")
    aligned, offsets = auto_align([ref, ds])
    assert offsets["run"]["baseline_shift"] == pytest.approx(-0.05)
    assert aligned[1].samples[0].mean() == pytest.approx(0.06)
    with pytest.raises(DomainError):
        auto_align([ref], reference_index=3)


# --- resampling ------------------------------------------------------------


def test_bootstrap_single_value_bins():
    ds = ExperimentDataset(times=[3.0, 9.0],
                           samples=[np.array([0.06]), np.array([0.08])],
                           nu=150)
    draw = bootstrap_sensorgram(ds, substream(7, 5, 0))
    assert draw.tolist() == [0.06, 0.08]


def test_bootstrap_is_deterministic_and_unbiased():
    ds = make_dataset([0.06, 0.04, 0.05], np.arange(4) * 6.0 + 3.0, 150, 50,
                      QUANTUM, 43)
    a = bootstrap_sensorgram(ds, substream(7, 5, 1))
    b = bootstrap_sensorgram(ds, substream(7, 5, 1))
    assert np.array_equal(a, b)
    rng = substream(7, 5, 2)
    draws = np.array([bootstrap_sensorgram(ds, rng) for _ in range(100_000)])
    means = ds.bin_means()
    sigma = ds.bin_stds() / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - means) < 4.0 * sigma)


def test_classical_surrogate_statistics():
    rng = substream(7, 5, 3)
    zero = classical_surrogate_sensorgram(np.zeros(4), 150, rng)
    assert np.array_equal(zero, np.zeros(4))
    draws = np.array([classical_surrogate_sensorgram(
        np.array([0.06]), 150, substream(7, 5, 4, i))[0]
        for i in range(100_000)])
    assert draws.std() == pytest.approx(0.02, rel=0.02)
    assert abs(draws.mean() - 0.06) < 4.0 * 0.02 / math.sqrt(draws.size)
    pois = np.array([classical_surrogate_sensorgram(
        np.array([0.06]), 150, substream(7, 5, 5, i), law="poisson")[0]
        for i in range(20_000)])
    assert pois.std() == pytest.approx(0.02, rel=0.05)
    with pytest.raises(DomainError):
        classical_surrogate_sensorgram(np.array([-0.1]), 150, rng)
    with pytest.raises(DomainError):
        classical_surrogate_sensorgram(np.array([0.1]), 150, rng, law="beta")


# --- ks pipeline -----------------------------------------------------------


def test_estimate_ks_noiseless_dataset():
    truth = [0.06, 0.04, 0.0413]
    ds = noiseless_dataset(truth, np.arange(17) * 6.0 + 3.0)
    est = estimate_ks(ds, BootstrapConfig(m=10, p=25, rng_seed=1), QUANTUM)
    # every repetition fits identical data; the spread is at most the ulp
    # rounding of np.mean over 25 equal values
    assert est.std < 1e-15
    assert est.n_failed == 0
    assert est.mean == pytest.approx(0.0413, rel=1e-7)


def test_estimate_ks_quantum_beats_classical():
    times = np.arange(17) * 6.0 + 3.0
    ds = make_dataset([0.06, 0.04, 0.0411], times, 150, 2000, QUANTUM, 2026)
    config = BootstrapConfig(m=175, p=2500, rng_seed=9)
    q = estimate_ks(ds, config, QUANTUM)
    c = estimate_ks(ds, config, CLASSICAL)
    assert abs(q.mean - 0.0411) < 3.0 * q.std
    assert abs(c.mean - 0.0411) < 3.0 * c.std
    assert q.std < c.std
    assert q.values.size == 2500


def test_estimate_ks_poisson_surrogate():
    times = np.arange(17) * 6.0 + 3.0
    ds = make_dataset([0.06, 0.04, 0.0411], times, 150, 500, QUANTUM, 2027)
    est = estimate_ks(ds, BootstrapConfig(m=50, p=200, rng_seed=3), CLASSICAL,
                      surrogate="poisson")
    assert est.mean == pytest.approx(0.0411, rel=0.25)


def test_estimate_ks_parallel_matches_serial():
    times = np.arange(10) * 6.0 + 3.0
    ds = make_dataset([0.06, 0.04, 0.05], times, 150, 100, QUANTUM, 2028)
    config = BootstrapConfig(m=20, p=40, rng_seed=5)
    serial = estimate_ks(ds, config, QUANTUM, n_jobs=1)
    parallel = estimate_ks(ds, config, QUANTUM, n_jobs=2)
    assert np.array_equal(serial.values, parallel.values)
    assert serial.mean == parallel.mean and serial.std == parallel.std


def test_estimate_ks_failure_paths(monkeypatch):
    # noiseless data so every unpatched fit genuinely converges; a noisy
    # 6-bin dataset adds real failures on top of the injected ones
    times = np.arange(10) * 6.0 + 3.0
    ds = noiseless_dataset([0.06, 0.04, 0.05], times)

    def always_fail(times, values, options=None):
        fit = fit_sensorgram(times, values, options)
        fit.converged = False
        return fit

    monkeypatch.setattr(estimation, "fit_sensorgram", always_fail)
    with pytest.raises(EstimationError):
        estimate_ks(ds, BootstrapConfig(m=5, p=10, rng_seed=6), QUANTUM)

    calls = {"n": 0}

    def fail_first_two(times, values, options=None):
        fit = fit_sensorgram(times, values, options)
        calls["n"] += 1
        if calls["n"] <= 2:
            fit.converged = False
        return fit

    monkeypatch.setattr(estimation, "fit_sensorgram", fail_first_two)
    with pytest.warns(UserWarning, match="2 of 100"):
        est = estimate_ks(ds, BootstrapConfig(m=5, p=100, rng_seed=6),
                          QUANTUM)
    assert est.n_failed == 2
    assert est.values.size == 98


# --- affinity pipeline -----------------------------------------------------


def affinity_family(noise_seed=None, mu=500, duration_s=300.0):
    """4-concentration family at KA=6.72e4, kd=0.01, alpha=18.9497.

    The grid starts at t=0 so the first-bin baseline read is unbiased; a
    grid of bin centers (3, 9, ...) would shrink every amplitude by
    exp(-3*ks), which tilts the reciprocal line even at zero noise.
    """
    affinity, kd, alpha = 6.72e4, 0.01, 18.9497
    ka = affinity * kd
    concs = [4.659e-5, 3.106e-5, 2.330e-5, 1.553e-5]
    times = np.arange(round(duration_s / 6.0)) * 6.0
    datasets = []
    for i, conc in enumerate(concs):
        ks = observable_rate(ka, conc, kd)
        occupancy = affinity * conc / (1.0 + affinity * conc)
        truth = [0.06, occupancy / alpha, ks]
        if noise_seed is None:
            ds = noiseless_dataset(truth, times, mu=mu)
        else:
            ds = make_dataset(truth, times, 150, mu, QUANTUM, noise_seed,
                              path=(3, i))
        ds.ligand_conc = conc
        datasets.append(ds)
    return datasets, ka, kd, affinity


def test_estimate_affinity_zero_noise_exact():
    datasets, ka, kd, affinity = affinity_family(duration_s=600.0)
    ks_ref = observable_rate(ka, datasets[0].ligand_conc, kd)
    est = estimate_affinity(datasets, np.array([ks_ref]),
                            BootstrapConfig(m=20, p=30, rng_seed=11),
                            QUANTUM, steady_time_s=594.0)
    # identical draws every repetition; np.mean of a constant array can
    # round within an ulp, so the stds are bounded rather than exactly 0
    assert est.affinity_std < 1e-6
    assert est.kd_std < 1e-12
    assert est.ka_std < 1e-9
    # the 594 s readout sits within 3e-6 of the asymptote
    assert est.affinity_mean == pytest.approx(affinity, rel=1e-4)
    assert est.kd_mean == pytest.approx(kd, rel=1e-4)
    assert est.ka_mean == pytest.approx(ka, rel=1e-4)
    assert est.alpha_mean == pytest.approx(18.9497, rel=1e-4)
    assert est.n_used == 30 and est.n_discarded == 0


def test_estimate_affinity_synthetic_recovery():
    datasets, ka, kd, affinity = affinity_family(noise_seed=2030)
    config = BootstrapConfig(m=175, p=400, rng_seed=12)
    ks_est = estimate_ks(datasets[0], BootstrapConfig(m=175, p=400,
                                                      rng_seed=12), QUANTUM)
    est = estimate_affinity(datasets, ks_est.values, config, QUANTUM,
                            steady_time_s=291.0)
    assert abs(est.kd_mean - kd) < 3.0 * est.kd_std
    assert abs(est.ka_mean - ka) < 3.0 * est.ka_std
    assert abs(est.affinity_mean - affinity) < 3.0 * est.affinity_std
    assert est.n_used + est.n_discarded == config.p


def test_estimate_affinity_cycles_short_ks_distribution():
    datasets, ka, kd, affinity = affinity_family(duration_s=600.0)
    ks_ref = observable_rate(ka, datasets[0].ligand_conc, kd)
    est = estimate_affinity(datasets, np.array([ks_ref, 2.0 * ks_ref]),
                            BootstrapConfig(m=5, p=4, rng_seed=13),
                            QUANTUM, steady_time_s=594.0)
    assert est.n_used == 4
    # reps 0..3 draw ks_values[rep % 2], so kd alternates kd1, 2*kd1
    kd1 = ks_ref / (affinity * datasets[0].ligand_conc + 1.0)
    assert est.kd_std > 0.0
    assert est.kd_mean == pytest.approx(1.5 * kd1, rel=1e-3)
    assert est.kd_std == pytest.approx(kd1 / np.sqrt(3.0), rel=1e-3)


def test_estimate_affinity_discards_and_errors():
    times = np.array([3.0, 9.0, 15.0])
    good = [np.full(6, 0.06), np.full(6, 0.08), np.full(6, 0.10)]
    flat = [np.full(6, 0.06), np.full(6, 0.06), np.full(6, 0.06)]
    datasets = []
    for conc in (4.659e-5, 3.106e-5, 2.330e-5):
        ds = ExperimentDataset(times=times, samples=[s.copy() for s in flat],
                               nu=150, ligand_conc=conc)
        datasets.append(ds)
    # steady level equals the baseline, so every amplitude is non-positive
    with pytest.raises(EstimationError):
        estimate_affinity(datasets, np.array([0.04]),
                          BootstrapConfig(m=4, p=10, rng_seed=14), QUANTUM,
                          steady_time_s=15.0)
    noisy = []
    for conc in (4.659e-5, 3.106e-5, 2.330e-5):
        samples = [s.copy() for s in good]
        samples[2] = np.array([0.055, 0.065] * 3)  # straddles the baseline
        noisy.append(ExperimentDataset(times=times, samples=samples, nu=150,
                                       ligand_conc=conc))
    with pytest.warns(UserWarning, match="discarded"):
        est = estimate_affinity(noisy, np.array([0.04]),
                                BootstrapConfig(m=1, p=60, rng_seed=15),
                                QUANTUM, steady_time_s=15.0)
    assert est.n_discarded > 0
    assert est.n_used + est.n_discarded == 60


def test_estimate_affinity_preconditions():
    datasets, ka, kd, _ = affinity_family()
    with pytest.raises(DomainError):
        estimate_affinity(datasets[:2], np.array([0.04]),
                          BootstrapConfig(m=2, p=2, rng_seed=1), QUANTUM)
    missing = [ExperimentDataset(times=ds.times, samples=ds.samples,
                                 nu=ds.nu) for ds in datasets]
    with pytest.raises(DomainError):
        estimate_affinity(missing, np.array([0.04]),
                          BootstrapConfig(m=2, p=2, rng_seed=1), QUANTUM)


def test_steady_state_bin_picks_nearest():
    ds = noiseless_dataset([0.06, 0.04, 0.05], np.arange(17) * 6.0 + 3.0)
    assert steady_state_bin(ds, 94.0) == 15
    assert steady_state_bin(ds, 3.0) == 0
    assert steady_state_bin(ds, 1e6) == 16


# --- result files ----------------------------------------------------------


def test_results_csv_golden(tmp_path):
    path = tmp_path / "results.csv"
    write_results_csv(str(path), [("ks[1.5%]", "quantum", 0.0413, 0.0039,
                                   15000)])
    assert path.read_text() == (
        "parameter,mode,mean,std,n\n"
        "ks[1.5%],quantum,0.0413,0.0039,15000\n")


def test_run_manifest_round_trip(tmp_path):
    import json
    path = tmp_path / "run.json"
    payload = {"seed": 7, "discards": {"quantum": 0}}
    write_run_manifest(str(path), payload)
    assert json.loads(path.read_text()) == payload
