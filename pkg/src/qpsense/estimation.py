"""Rate and affinity estimation from per-set transmission records.

The measured object is a dataset holding, for every time bin, all per-set
transmission estimates of that bin.  A bootstrap repetition draws m
resampled sensorgrams, averages them and fits the exponential binding model
with a damped least-squares solver; the spread of the fitted rate over p
repetitions is its uncertainty.  The classical comparison repeats the
pipeline with surrogate sensorgrams at the shot-noise level built from the
same per-bin means.  Steady-state amplitudes across concentrations feed a
double-reciprocal line whose slope and intercept give the affinity, from
which the association and dissociation rates follow.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._io import fmt, parse_float, parse_int, read_table
from .errors import DegenerateFitError, DomainError, EstimationError, ParseError
from .kinetics import affinity_from_reciprocal_fit, rates_from_affinity
from .photon_stats import ProbeModel
from .rng import NS_AFFINITY, NS_KS, substream

DATASET_CSV_HEADER = "time_s,set_index,T_i"
RESULTS_CSV_HEADER = "parameter,mode,mean,std,n"

# Fraction of failed bootstrap fits (or discarded affinity repetitions)
# above which the pipeline emits a warning.
FIT_FAILURE_WARN_FRACTION = 0.01
AFFINITY_DISCARD_WARN_FRACTION = 0.05

_MODE_INDEX = {ProbeModel.HERALDED_SINGLE_PHOTON: 0,
               ProbeModel.COHERENT_UNIT_MEAN: 1}


# ---------------------------------------------------------------------------
# Damped least squares


@dataclass(frozen=True)
class LMOptions:
    """Termination and damping controls for levenberg_marquardt."""

    max_iterations: int = 200
    gradient_tol: float = 1e-10
    step_tol: float = 1e-12
    damping_init: float = 1e-8
    damping_increase: float = 10.0
    damping_decrease: float = 10.0
    damping_max: float = 1e10


@dataclass
class FitResult:
    """Outcome of a nonlinear or linear least-squares fit."""

    params: np.ndarray
    param_std: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    gradient_norm: float
    residual_history: np.ndarray


def levenberg_marquardt(residual_fn, jacobian_fn, initial_params,
                        options: LMOptions | None = None) -> FitResult:
    """Minimise ||residual_fn(p)||^2 by damped normal-equation iterations.

    The damping factor multiplies the diagonal of the Gauss-Newton Hessian;
    it shrinks after every accepted step and grows when a trial step would
    increase the residual.  Termination: gradient norm below gradient_tol,
    relative step below step_tol, or max_iterations.  A singular system at
    maximum damping yields converged=False rather than an exception.

    Args:
        residual_fn: maps parameter vector to residual vector.
        jacobian_fn: maps parameter vector to the residual Jacobian.
        initial_params: starting point.
        options: LMOptions; defaults used when None.

    Returns:
        FitResult with parameter standard errors taken from the diagonal of
        the inverse Gauss-Newton Hessian scaled by the residual variance.
    """
    opt = options or LMOptions()
    p = np.asarray(initial_params, dtype=float).copy()
    if p.ndim != 1 or p.size == 0:
        raise DomainError("initial_params must be a non-empty vector")
    r = np.asarray(residual_fn(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("residual is not finite at the starting point")
    cost = float(r @ r)
    history = [np.sqrt(cost)]
    lam = opt.damping_init
    iterations = 0
    converged = False
    grad_norm = np.inf

    for _ in range(opt.max_iterations):
        jac = np.asarray(jacobian_fn(p), dtype=float)
        grad = jac.T @ r
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < opt.gradient_tol:
            converged = True
            break
        hess = jac.T @ jac
        diag = np.diag(hess).copy()
        floor = diag.max()
        if floor <= 0 or not np.isfinite(floor):
            floor = 1.0
        diag[diag <= 0] = floor

        accepted = False
        while lam <= opt.damping_max:
            try:
                step = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= opt.damping_increase
                continue
            trial = p + step
            with np.errstate(over="ignore", invalid="ignore"):
                r_trial = np.asarray(residual_fn(trial), dtype=float)
                cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                p, r, cost = trial, r_trial, cost_trial
                history.append(np.sqrt(cost))
                lam = max(lam / opt.damping_decrease, 1e-16)
                accepted = True
                break
            lam *= opt.damping_increase
        if not accepted:
            break
        iterations += 1
        step_size = float(np.linalg.norm(step))
        if step_size < opt.step_tol * max(float(np.linalg.norm(p)), 1e-300):
            converged = True
            break
    else:
        # Loop exhausted max_iterations without meeting a tolerance.
        jac = np.asarray(jacobian_fn(p), dtype=float)
        grad_norm = float(np.max(np.abs(jac.T @ r)))

    jac = np.asarray(jacobian_fn(p), dtype=float)
    param_std = _gauss_newton_std(jac, cost, p.size, r.size)
    return FitResult(params=p, param_std=param_std,
                     residual_norm=float(np.sqrt(cost)),
                     iterations=iterations, converged=converged,
                     gradient_norm=grad_norm,
                     residual_history=np.asarray(history))


def _gauss_newton_std(jac: np.ndarray, cost: float, n_params: int,
                      n_points: int) -> np.ndarray:
    dof = n_points - n_params
    if dof <= 0:
        return np.zeros(n_params)
    sigma2 = cost / dof
    try:
        cov = sigma2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full(n_params, np.inf)
    diag = np.diag(cov).copy()
    diag[diag < 0] = 0.0
    return np.sqrt(diag)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_std: float
    intercept_std: float
    n_points: int


def linear_fit(xs, ys) -> LinearFit:
    """Ordinary least squares line with parameter standard errors.

    Needs at least three points and non-degenerate abscissae.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("xs and ys must be equal-length vectors")
    n = x.size
    if n < 3:
        raise DegenerateFitError("need at least 3 points for a line fit")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateFitError("xs are degenerate (zero spread)")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    rss = float(np.sum((y - slope * x - intercept) ** 2))
    s2 = rss / (n - 2)
    return LinearFit(slope=slope, intercept=intercept,
                     slope_std=float(np.sqrt(s2 / sxx)),
                     intercept_std=float(
                         np.sqrt(s2 * (1.0 / n + x.mean() ** 2 / sxx))),
                     n_points=n)


# ---------------------------------------------------------------------------
# Datasets


@dataclass
class ExperimentDataset:
    """All per-set transmission estimates of one concentration run.

    times holds the uniformly spaced bin centres; samples holds one array of
    per-set estimates for each bin.  nu is the probes-per-set count the
    estimates were formed with, needed by the shot-noise surrogate.
    """

    times: np.ndarray
    samples: list[np.ndarray]
    nu: int
    ligand_conc: float | None = None
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise DomainError("times must be a non-empty vector")
        if len(self.samples) != self.times.size:
            raise DomainError("one sample array per time bin required")
        if self.nu < 1:
            raise DomainError("nu must be at least 1")
        diffs = np.diff(self.times)
        if np.any(diffs <= 0):
            raise DomainError("bin times must be strictly increasing")
        if diffs.size and not np.allclose(diffs, diffs[0], rtol=1e-9,
                                          atol=1e-12):
            raise DomainError("bins must be uniformly spaced")
        self.samples = [np.asarray(s, dtype=float) for s in self.samples]
        for s in self.samples:
            if s.ndim != 1 or s.size == 0:
                raise DomainError("each bin needs at least one set value")
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise DomainError("set values must be finite and non-negative")
        if self.ligand_conc is not None and self.ligand_conc < 0:
            raise DomainError("ligand_conc must be non-negative")
        counts = {s.size for s in self.samples}
        self._matrix = (np.stack(self.samples)
                        if len(counts) == 1 else None)

    @property
    def n_bins(self) -> int:
        return self.times.size

    def set_counts(self) -> np.ndarray:
        return np.array([s.size for s in self.samples])

    def bin_means(self) -> np.ndarray:
        return np.array([float(s.mean()) for s in self.samples])

    def bin_stds(self) -> np.ndarray:
        # Population normalisation, matching the per-set statistics.
        return np.array([float(s.std()) for s in self.samples])


def write_dataset_csv(path: str, dataset: ExperimentDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DATASET_CSV_HEADER + "\n")
        for t, values in zip(dataset.times, dataset.samples):
            ts = fmt(t)
            for i, v in enumerate(values):
                fh.write(f"{ts},{i},{fmt(v)}\n")


def read_dataset_csv(path: str, nu: int, ligand_conc: float | None = None,
                     label: str = "") -> ExperimentDataset:
    rows = read_table(path, DATASET_CSV_HEADER)
    if not rows:
        raise ParseError("dataset holds no rows", path, 2)
    per_bin: dict[float, list[tuple[int, float]]] = {}
    for lineno, (t, idx, v) in rows:
        time = parse_float(t, path, lineno, "time_s")
        set_index = parse_int(idx, path, lineno, "set_index")
        value = parse_float(v, path, lineno, "T_i")
        per_bin.setdefault(time, []).append((set_index, value))
    times = np.array(sorted(per_bin))
    samples = []
    for time in times:
        entries = sorted(per_bin[time])
        samples.append(np.array([v for _, v in entries]))
    return ExperimentDataset(times=times, samples=samples, nu=nu,
                             ligand_conc=ligand_conc, label=label)


def align_dataset(dataset: ExperimentDataset, time_shift_s: float = 0.0,
                  baseline_shift: float = 0.0) -> ExperimentDataset:
    """Shift a dataset to a common injection time and baseline level.

    Explicit preprocessing: times move by -time_shift_s and every set value
    by +baseline_shift.  The caller is expected to log the offsets.
    """
    return ExperimentDataset(
        times=dataset.times - time_shift_s,
        samples=[s + baseline_shift for s in dataset.samples],
        nu=dataset.nu, ligand_conc=dataset.ligand_conc, label=dataset.label)


def auto_align(datasets, reference_index: int = 0):
    """Baseline-align datasets to the first-bin mean of a reference.

    Returns:
        (aligned datasets, offsets) where offsets maps dataset label (or
        index) to the applied {"time_shift_s", "baseline_shift"}.
    """
    if not 0 <= reference_index < len(datasets):
        raise DomainError("reference_index out of range")
    ref_level = float(datasets[reference_index].samples[0].mean())
    aligned = []
    offsets = {}
    for i, ds in enumerate(datasets):
        shift = ref_level - float(ds.samples[0].mean())
        aligned.append(align_dataset(ds, 0.0, shift))
        offsets[ds.label or str(i)] = {"time_shift_s": 0.0,
                                       "baseline_shift": shift}
    return aligned, offsets


# ---------------------------------------------------------------------------
# Bootstrap resampling


@dataclass(frozen=True)
class BootstrapConfig:
    """Averaging depth m, repetition count p and the run seed."""

    m: int = 175
    p: int = 15000
    rng_seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.p < 1:
            raise DomainError("m and p must be at least 1")


def bootstrap_sensorgram(dataset: ExperimentDataset,
                         rng: np.random.Generator) -> np.ndarray:
    """One resampled sensorgram: a uniform draw from each bin's set values."""
    out = np.empty(dataset.n_bins)
    if dataset._matrix is not None:
        idx = rng.integers(0, dataset._matrix.shape[1], dataset.n_bins)
        out[:] = dataset._matrix[np.arange(dataset.n_bins), idx]
    else:
        for i, s in enumerate(dataset.samples):
            out[i] = s[rng.integers(0, s.size)]
    return out


def classical_surrogate_sensorgram(mean_sensorgram, nu: int,
                                   rng: np.random.Generator,
                                   law: str = "gaussian") -> np.ndarray:
    """Shot-noise-level surrogate around a mean sensorgram.

    law="gaussian" adds N(0, sqrt(mean/nu)) per bin without clamping, the
    coherent-probe uncertainty at the per-set level; law="poisson" draws the
    physical Poisson count instead.
    """
    means = np.asarray(mean_sensorgram, dtype=float)
    if np.any(means < 0):
        raise DomainError("mean transmissions must be non-negative")
    if nu < 1:
        raise DomainError("nu must be at least 1")
    if law == "gaussian":
        return means + rng.normal(0.0, np.sqrt(means / nu))
    if law == "poisson":
        return rng.poisson(means * nu) / nu
    raise DomainError(f"unknown surrogate law {law!r}")


def _draw_mean_sensorgram(dataset: ExperimentDataset, m: int,
                          mode: ProbeModel, surrogate: str,
                          rng: np.random.Generator) -> np.ndarray:
    """Average of m resampled (or surrogate) sensorgrams, vectorised."""
    n = dataset.n_bins
    if mode is ProbeModel.HERALDED_SINGLE_PHOTON:
        if dataset._matrix is not None:
            mu = dataset._matrix.shape[1]
            idx = rng.integers(0, mu, size=(m, n))
            draws = dataset._matrix[np.arange(n)[None, :], idx]
        else:
            draws = np.empty((m, n))
            for i, s in enumerate(dataset.samples):
                draws[:, i] = s[rng.integers(0, s.size, m)]
        return draws.mean(axis=0)
    means = dataset.bin_means()
    if surrogate == "gaussian":
        noise = rng.normal(0.0, 1.0, size=(m, n)) * np.sqrt(means / dataset.nu)
        return means + noise.mean(axis=0)
    if surrogate == "poisson":
        counts = rng.poisson(means * dataset.nu, size=(m, n))
        return counts.mean(axis=0) / dataset.nu
    raise DomainError(f"unknown surrogate law {surrogate!r}")


# ---------------------------------------------------------------------------
# Sensorgram fitting


def _model(times: np.ndarray, params: np.ndarray) -> np.ndarray:
    return params[0] + params[1] * (1.0 - np.exp(-params[2] * times))


def _jacobian(times: np.ndarray, params: np.ndarray) -> np.ndarray:
    decay = np.exp(-params[2] * times)
    return np.column_stack((np.ones_like(times), 1.0 - decay,
                            params[1] * times * decay))


def initial_guess(times, values) -> np.ndarray:
    """Starting point for the exponential model fit.

    Baseline from the first bin, amplitude from last minus first, rate from
    the reciprocal of the time at which half the rise is reached.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    baseline = values[0]
    amplitude = values[-1] - values[0]
    t_half = 0.0
    if amplitude > 0:
        crossing = np.nonzero(values - baseline >= 0.5 * amplitude)[0]
        if crossing.size:
            t_half = times[crossing[0]]
    if t_half <= 0:
        t_half = max(times[-1], 1e-6) / 2.0
    return np.array([baseline, amplitude, 1.0 / t_half])


def fit_sensorgram(times, values,
                   options: LMOptions | None = None) -> FitResult:
    """Fit baseline + amplitude * (1 - exp(-ks t)) to a mean sensorgram."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size != values.size or times.size < 3:
        raise DomainError("need at least 3 bins to fit the 3-parameter model")

    def residual(params):
        with np.errstate(over="ignore", invalid="ignore"):
            return _model(times, params) - values

    def jacobian(params):
        with np.errstate(over="ignore", invalid="ignore"):
            return _jacobian(times, params)

    return levenberg_marquardt(residual, jacobian,
                               initial_guess(times, values), options)


# ---------------------------------------------------------------------------
# Rate pipeline


@dataclass
class KsEstimate:
    """Bootstrap distribution of the observable rate for one dataset."""

    mean: float
    std: float
    values: np.ndarray
    n_failed: int
    mode: ProbeModel


def _ks_repetition(dataset: ExperimentDataset, config: BootstrapConfig,
                   mode: ProbeModel, surrogate: str, rep: int):
    rng = substream(config.rng_seed, NS_KS, _MODE_INDEX[mode], rep)
    y = _draw_mean_sensorgram(dataset, config.m, mode, surrogate, rng)
    fit = fit_sensorgram(dataset.times, y)
    return fit.params[2], fit.converged


def _ks_chunk(payload):
    (times, samples, nu, m, p_lo, p_hi, seed, mode_value, surrogate) = payload
    dataset = ExperimentDataset(times=times, samples=list(samples), nu=nu)
    config = BootstrapConfig(m=m, p=1, rng_seed=seed)
    mode = ProbeModel(mode_value)
    values = np.empty(p_hi - p_lo)
    ok = np.empty(p_hi - p_lo, dtype=bool)
    for j in range(p_lo, p_hi):
        values[j - p_lo], ok[j - p_lo] = _ks_repetition(
            dataset, config, mode, surrogate, j)
    return values, ok


def estimate_ks(dataset: ExperimentDataset, config: BootstrapConfig,
                mode: ProbeModel, surrogate: str = "gaussian",
                n_jobs: int = 1) -> KsEstimate:
    """Bootstrap distribution of ks for one concentration run.

    Each repetition averages m resampled sensorgrams (single-photon mode) or
    m shot-noise surrogates around the bin means (coherent mode) and fits
    the exponential model.  Repetition j always uses the substream
    (seed, ks-namespace, mode, j), so results do not depend on n_jobs.

    Raises:
        EstimationError: every repetition failed to converge.

    Warns:
        UserWarning when more than 1% of fits fail; failed fits are excluded
        from the returned distribution.
    """
    if dataset.n_bins < 3:
        raise DomainError("need at least 3 bins to estimate ks")
    p = config.p
    if n_jobs > 1:
        bounds = np.linspace(0, p, n_jobs + 1).astype(int)
        payloads = [(dataset.times, dataset.samples, dataset.nu, config.m,
                     int(lo), int(hi), config.rng_seed, mode.value, surrogate)
                    for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_ks_chunk, payloads))
        values = np.concatenate([v for v, _ in parts])
        ok = np.concatenate([o for _, o in parts])
    else:
        values = np.empty(p)
        ok = np.empty(p, dtype=bool)
        for j in range(p):
            values[j], ok[j] = _ks_repetition(dataset, config, mode,
                                              surrogate, j)
    n_failed = int(np.sum(~ok))
    if n_failed == p:
        raise EstimationError("every bootstrap fit failed to converge")
    if n_failed > FIT_FAILURE_WARN_FRACTION * p:
        warnings.warn(f"{n_failed} of {p} bootstrap fits failed to converge",
                      stacklevel=2)
    good = values[ok]
    std = float(good.std(ddof=1)) if good.size > 1 else 0.0
    return KsEstimate(mean=float(good.mean()), std=std, values=good,
                      n_failed=n_failed, mode=mode)


# ---------------------------------------------------------------------------
# Affinity pipeline


@dataclass
class AffinityEstimate:
    """Bootstrap summary of affinity, rates and the reciprocal intercept."""

    affinity_mean: float
    affinity_std: float
    ka_mean: float
    ka_std: float
    kd_mean: float
    kd_std: float
    alpha_mean: float
    alpha_std: float
    n_used: int
    n_discarded: int
    mode: ProbeModel


def steady_state_bin(dataset: ExperimentDataset,
                     steady_time_s: float) -> int:
    """Index of the bin whose centre lies closest to the readout time."""
    return int(np.argmin(np.abs(dataset.times - steady_time_s)))


def estimate_affinity(datasets, ks_values, config: BootstrapConfig,
                      mode: ProbeModel, reference_index: int = 0,
                      steady_time_s: float = 94.0,
                      use_raw_steady_state: bool = False,
                      surrogate: str = "gaussian") -> AffinityEstimate:
    """Bootstrap the double-reciprocal chain into affinity and rates.

    Per repetition, a steady-state amplitude is resampled for every
    concentration (mean of m draws at the readout bin, baseline-subtracted
    unless use_raw_steady_state), the reciprocal line 1/amplitude versus
    1/concentration is fitted, and the affinity together with one draw from
    the ks distribution of the reference concentration yields (ka, kd).
    Repetitions with a non-positive amplitude, slope or intercept are
    discarded and counted.

    Args:
        datasets: one ExperimentDataset per concentration, each with
            ligand_conc set; at least three.
        ks_values: bootstrap draws of ks for the reference concentration.
        config: bootstrap depth/repetitions/seed.
        mode: probe model whose noise law is used for resampling.
        reference_index: dataset whose concentration anchors the rate split.
        steady_time_s: readout time of the steady-state bin.
        use_raw_steady_state: use the raw bin level instead of the
            baseline-subtracted amplitude.
        surrogate: classical-mode surrogate noise law.
    """
    datasets = list(datasets)
    if len(datasets) < 3:
        raise DomainError("need at least 3 concentrations")
    if not 0 <= reference_index < len(datasets):
        raise DomainError("reference_index out of range")
    ks_values = np.asarray(ks_values, dtype=float)
    if ks_values.size == 0:
        raise DomainError("ks_values must not be empty")
    concs = []
    for ds in datasets:
        if ds.ligand_conc is None or ds.ligand_conc <= 0:
            raise DomainError("every dataset needs a positive ligand_conc")
        concs.append(ds.ligand_conc)
    inv_conc = 1.0 / np.asarray(concs)
    ref_conc = datasets[reference_index].ligand_conc

    bins = [steady_state_bin(ds, steady_time_s) for ds in datasets]
    baselines = np.array([float(ds.samples[0].mean()) for ds in datasets])
    mode_idx = _MODE_INDEX[mode]
    quantum = mode is ProbeModel.HERALDED_SINGLE_PHOTON

    affinities, kas, kds, alphas = [], [], [], []
    n_discarded = 0
    for rep in range(config.p):
        rng = substream(config.rng_seed, NS_AFFINITY, mode_idx, rep)
        amplitudes = np.empty(len(datasets))
        for i, ds in enumerate(datasets):
            values = ds.samples[bins[i]]
            if quantum:
                level = float(
                    values[rng.integers(0, values.size, config.m)].mean())
            else:
                mean_level = float(values.mean())
                level = float(classical_surrogate_sensorgram(
                    np.full(config.m, mean_level), ds.nu, rng,
                    surrogate).mean())
            amplitudes[i] = level if use_raw_steady_state \
                else level - baselines[i]
        if np.any(amplitudes <= 0):
            n_discarded += 1
            continue
        line = linear_fit(inv_conc, 1.0 / amplitudes)
        if line.slope <= 0 or line.intercept <= 0:
            n_discarded += 1
            continue
        affinity, alpha = affinity_from_reciprocal_fit(line.slope,
                                                       line.intercept)
        ks = float(ks_values[rep % ks_values.size])
        kd, ka = rates_from_affinity(ks, affinity, ref_conc)
        affinities.append(affinity)
        kas.append(ka)
        kds.append(kd)
        alphas.append(alpha)

    if not affinities:
        raise EstimationError("every affinity repetition was discarded")
    if n_discarded > AFFINITY_DISCARD_WARN_FRACTION * config.p:
        warnings.warn(
            f"{n_discarded} of {config.p} affinity repetitions discarded",
            stacklevel=2)

    def summary(values):
        arr = np.asarray(values)
        return float(arr.mean()), (float(arr.std(ddof=1))
                                   if arr.size > 1 else 0.0)

    aff = summary(affinities)
    ka = summary(kas)
    kd = summary(kds)
    alpha = summary(alphas)
    return AffinityEstimate(affinity_mean=aff[0], affinity_std=aff[1],
                            ka_mean=ka[0], ka_std=ka[1],
                            kd_mean=kd[0], kd_std=kd[1],
                            alpha_mean=alpha[0], alpha_std=alpha[1],
                            n_used=len(affinities),
                            n_discarded=n_discarded, mode=mode)


# ---------------------------------------------------------------------------
# Result files


def write_results_csv(path: str, rows) -> None:
    """Write (parameter, mode, mean, std, n) result rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(RESULTS_CSV_HEADER + "\n")
        for parameter, mode, mean, std, n in rows:
            fh.write(f"{parameter},{mode},{fmt(mean)},{fmt(std)},{int(n)}\n")


def write_run_manifest(path: str, payload: dict) -> None:
    """JSON run manifest: seed, config echo, discard counts and the like."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
