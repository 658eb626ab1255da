"""Typed run configuration on top of the flat key-value format.

A run is described by one file: sampling layout, signal source (direct
kinetics shortcut or the optical stack), ground-truth rates with the
injection recipes, bootstrap settings and the estimation conventions.  The
manifest written by every command is itself a valid config, so a run can be
reproduced byte-for-byte by pointing the CLI at its manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._io import fmt
from .errors import ConfigError, DomainError
from .estimation import BootstrapConfig
from .kinetics import InjectionRecipe, KineticParams, cavity_concentration
from .photon_stats import ProbeModel, SamplingPlan
from .spr_optics import EfficiencyBudget, LayerStack, stack_from_kv, stack_to_kv

MODES = ("quantum", "classical", "both")
SOURCES = ("direct", "stack")


def _get(kv: dict[str, str], key: str, default: str | None = None) -> str:
    if key in kv:
        return kv[key]
    if default is None:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def _get_float(kv, key, default=None) -> float:
    raw = _get(kv, key, default)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: not a number: {raw!r}") from None


def _get_int(kv, key, default=None) -> int:
    raw = _get(kv, key, default)
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: not an integer: {raw!r}") from None


def _get_bool(kv, key, default=None) -> bool:
    raw = _get(kv, key, default).lower()
    if raw in ("true", "yes", "1"):
        return True
    if raw in ("false", "no", "0"):
        return False
    raise ConfigError(f"config key {key!r}: not a boolean: {raw!r}")


@dataclass
class TimetagSettings:
    enabled: bool = False
    herald_rate_hz: float = 5e4
    window_ps: int = 4000
    jitter_ps: int = 1000
    background_rate_hz: float = 0.0


@dataclass
class RunConfig:
    """Fully resolved run description.

    Exactly one signal source is active: the direct kinetics shortcut
    (baseline plus model amplitude) or the optical stack path.  The seed is
    mandatory; every random quantity of a run derives from it.
    """

    seed: int
    out_dir: str
    mode: str
    threads: int
    plan: SamplingPlan
    probe: ProbeModel
    source: str
    baseline: float
    duration_s: float
    ka: float
    kd: float
    alpha: float
    recipes: list[tuple[str, InjectionRecipe]]
    bootstrap: BootstrapConfig
    steady_time_s: float
    use_raw_steady_state: bool
    reference_dataset: int
    classical_surrogate: str
    align: bool
    stack: LayerStack | None = None
    drop_fraction: float = 0.4
    delta_n_max: float = 0.01
    budget: EfficiencyBudget | None = None
    timetag: TimetagSettings = field(default_factory=TimetagSettings)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}")
        if self.source not in SOURCES:
            raise ConfigError(f"signal.source must be one of {SOURCES}")
        if self.source == "stack" and (self.stack is None
                                       or self.budget is None):
            raise ConfigError("stack source needs stack.* and budget.* keys")
        if self.threads < 1:
            raise ConfigError("run.threads must be at least 1")
        if not self.recipes:
            raise ConfigError("at least one injection recipe is required")
        if not 0 <= self.reference_dataset < len(self.recipes):
            raise ConfigError("estimation.reference_dataset out of range")
        if self.classical_surrogate not in ("gaussian", "poisson"):
            raise ConfigError(
                "estimation.classical_surrogate must be gaussian or poisson")
        if self.duration_s < 0:
            raise ConfigError("signal.duration_s must be non-negative")
        if self.ka < 0 or self.kd < 0 or self.alpha <= 0:
            raise ConfigError("kinetics rates must be non-negative, alpha > 0")
        if not 0 <= self.baseline <= 1:
            raise ConfigError("signal.baseline must lie in [0, 1]")

    def modes(self) -> list[ProbeModel]:
        if self.mode == "quantum":
            return [ProbeModel.HERALDED_SINGLE_PHOTON]
        if self.mode == "classical":
            return [ProbeModel.COHERENT_UNIT_MEAN]
        return [ProbeModel.HERALDED_SINGLE_PHOTON,
                ProbeModel.COHERENT_UNIT_MEAN]

    def concentration_truths(self):
        """Per-recipe (label, concentration, ground-truth params).

        The steady-state amplitude follows the reciprocal law
        amplitude = affinity * L / (alpha * (1 + affinity * L)).
        """
        out = []
        affinity = self.ka / self.kd if self.kd > 0 else None
        for label, recipe in self.recipes:
            conc = cavity_concentration(recipe)
            if affinity is None:
                raise ConfigError("kinetics.kd must be positive")
            occupancy = affinity * conc / (1.0 + affinity * conc)
            amplitude = occupancy / self.alpha
            params = KineticParams(ka=self.ka, kd=self.kd, ligand_conc=conc,
                                   amplitude=amplitude)
            out.append((label, conc, params))
        return out


def config_from_kv(kv: dict[str, str],
                   overrides: dict[str, str] | None = None) -> RunConfig:
    """Build a RunConfig from parsed key-value pairs.

    Unknown keys are ignored so manifests carrying extra bookkeeping keys
    load cleanly.  Domain violations in derived objects surface as
    ConfigError.
    """
    kv = dict(kv)
    if overrides:
        kv.update({k: v for k, v in overrides.items() if v is not None})
    if "run.seed" not in kv:
        raise ConfigError("missing required config key 'run.seed'")
    try:
        plan = SamplingPlan(nu=_get_int(kv, "sampling.nu", "150"),
                            mu=_get_int(kv, "sampling.mu", "2000"),
                            bin_seconds=_get_float(kv, "sampling.bin_seconds",
                                                   "6.0"))
        probe_raw = _get(kv, "signal.probe", "quantum")
        try:
            probe = ProbeModel(probe_raw)
        except ValueError:
            raise ConfigError(
                f"signal.probe must be quantum or classical, got {probe_raw!r}"
            ) from None
        n_recipes = _get_int(kv, "recipe.count", "0")
        recipes = []
        for i in range(n_recipes):
            recipes.append((
                _get(kv, f"recipe.{i}.label", str(i)),
                InjectionRecipe(
                    dry_mass_g=_get_float(kv, f"recipe.{i}.dry_mass_g"),
                    molar_mass_g_per_mol=_get_float(
                        kv, f"recipe.{i}.molar_mass_g_per_mol"),
                    solvent_volume_l=_get_float(
                        kv, f"recipe.{i}.solvent_volume_l"),
                    injected_volume_l=_get_float(
                        kv, f"recipe.{i}.injected_volume_l"),
                    cavity_volume_l=_get_float(
                        kv, f"recipe.{i}.cavity_volume_l"),
                )))
        source = _get(kv, "signal.source", "direct")
        stack = None
        budget = None
        if source == "stack" or "stack.layer.count" in kv:
            if "stack.layer.count" in kv:
                stack = stack_from_kv(kv)
                budget = EfficiencyBudget(
                    prism_bulk=_get_float(kv, "budget.prism_bulk", "1.0"),
                    prism_surfaces=_get_float(kv, "budget.prism_surfaces",
                                              "1.0"),
                    detector_and_coupling=_get_float(
                        kv, "budget.detector_and_coupling", "1.0"),
                    residual=_get_float(kv, "budget.residual", "1.0"),
                )
        bootstrap = BootstrapConfig(
            m=_get_int(kv, "bootstrap.m", "175"),
            p=_get_int(kv, "bootstrap.p", "15000"),
            rng_seed=_get_int(kv, "bootstrap.seed", kv["run.seed"]),
        )
        timetag = TimetagSettings(
            enabled=_get_bool(kv, "timetag.enabled", "false"),
            herald_rate_hz=_get_float(kv, "timetag.herald_rate_hz", "50000"),
            window_ps=_get_int(kv, "timetag.window_ps", "4000"),
            jitter_ps=_get_int(kv, "timetag.jitter_ps", "1000"),
            background_rate_hz=_get_float(kv, "timetag.background_rate_hz",
                                          "0.0"),
        )
        return RunConfig(
            seed=_get_int(kv, "run.seed"),
            out_dir=_get(kv, "run.out_dir", "out"),
            mode=_get(kv, "run.mode", "both"),
            threads=_get_int(kv, "run.threads", "1"),
            plan=plan,
            probe=probe,
            source=source,
            baseline=_get_float(kv, "signal.baseline", "0.06"),
            duration_s=_get_float(kv, "signal.duration_s", "102.0"),
            ka=_get_float(kv, "kinetics.ka", "672.2"),
            kd=_get_float(kv, "kinetics.kd", "0.01"),
            alpha=_get_float(kv, "kinetics.alpha", "18.9497"),
            recipes=recipes,
            bootstrap=bootstrap,
            steady_time_s=_get_float(kv, "estimation.steady_time_s", "94.0"),
            use_raw_steady_state=_get_bool(
                kv, "estimation.use_raw_steady_state", "false"),
            reference_dataset=_get_int(kv, "estimation.reference_dataset",
                                       "0"),
            classical_surrogate=_get(kv, "estimation.classical_surrogate",
                                     "gaussian"),
            align=_get_bool(kv, "estimation.align", "false"),
            stack=stack,
            drop_fraction=_get_float(kv, "optics.drop_fraction", "0.4"),
            delta_n_max=_get_float(kv, "optics.delta_n_max", "0.01"),
            budget=budget,
            timetag=timetag,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_kv(cfg: RunConfig, version: str) -> dict[str, str]:
    """Resolved config echo; loading it back reproduces the run exactly."""
    kv: dict[str, str] = {
        "run.version": version,
        "run.seed": str(cfg.seed),
        "run.out_dir": cfg.out_dir,
        "run.mode": cfg.mode,
        "run.threads": str(cfg.threads),
        "sampling.nu": str(cfg.plan.nu),
        "sampling.mu": str(cfg.plan.mu),
        "sampling.bin_seconds": fmt(cfg.plan.bin_seconds),
        "signal.source": cfg.source,
        "signal.probe": cfg.probe.value,
        "signal.baseline": fmt(cfg.baseline),
        "signal.duration_s": fmt(cfg.duration_s),
        "kinetics.ka": fmt(cfg.ka),
        "kinetics.kd": fmt(cfg.kd),
        "kinetics.alpha": fmt(cfg.alpha),
        "recipe.count": str(len(cfg.recipes)),
    }
    for i, (label, r) in enumerate(cfg.recipes):
        kv[f"recipe.{i}.label"] = label
        kv[f"recipe.{i}.dry_mass_g"] = fmt(r.dry_mass_g)
        kv[f"recipe.{i}.molar_mass_g_per_mol"] = fmt(r.molar_mass_g_per_mol)
        kv[f"recipe.{i}.solvent_volume_l"] = fmt(r.solvent_volume_l)
        kv[f"recipe.{i}.injected_volume_l"] = fmt(r.injected_volume_l)
        kv[f"recipe.{i}.cavity_volume_l"] = fmt(r.cavity_volume_l)
    if cfg.stack is not None:
        kv.update(stack_to_kv(cfg.stack))
        kv["optics.drop_fraction"] = fmt(cfg.drop_fraction)
        kv["optics.delta_n_max"] = fmt(cfg.delta_n_max)
        kv["budget.prism_bulk"] = fmt(cfg.budget.prism_bulk)
        kv["budget.prism_surfaces"] = fmt(cfg.budget.prism_surfaces)
        kv["budget.detector_and_coupling"] = fmt(
            cfg.budget.detector_and_coupling)
        kv["budget.residual"] = fmt(cfg.budget.residual)
    kv.update({
        "bootstrap.m": str(cfg.bootstrap.m),
        "bootstrap.p": str(cfg.bootstrap.p),
        "bootstrap.seed": str(cfg.bootstrap.rng_seed),
        "estimation.steady_time_s": fmt(cfg.steady_time_s),
        "estimation.use_raw_steady_state": str(
            cfg.use_raw_steady_state).lower(),
        "estimation.reference_dataset": str(cfg.reference_dataset),
        "estimation.classical_surrogate": cfg.classical_surrogate,
        "estimation.align": str(cfg.align).lower(),
        "timetag.enabled": str(cfg.timetag.enabled).lower(),
        "timetag.herald_rate_hz": fmt(cfg.timetag.herald_rate_hz),
        "timetag.window_ps": str(cfg.timetag.window_ps),
        "timetag.jitter_ps": str(cfg.timetag.jitter_ps),
        "timetag.background_rate_hz": fmt(cfg.timetag.background_rate_hz),
    })
    return kv


def default_config_text() -> str:
    """Complete example configuration mirroring the reference instrument."""
    return """\
# Run control
run.seed = 20260823
run.out_dir = out
run.mode = both            # quantum | classical | both
run.threads = 1

# Per-bin sampling: mu sets of nu probes every bin
sampling.nu = 150
sampling.mu = 2000
sampling.bin_seconds = 6.0

# Signal source: direct exponential model, or the optical stack path
signal.source = direct     # direct | stack
signal.probe = quantum     # noise law used when simulating
signal.baseline = 0.06
signal.duration_s = 102.0

# Ground-truth kinetics; alpha is the reciprocal-law intercept that sets
# the steady-state amplitude per concentration
kinetics.ka = 672.2
kinetics.kd = 0.01
kinetics.alpha = 18.9497

# Ligand injections (BSA-like): stock = mass / (molar mass * solvent volume),
# diluted by injected/(injected + cavity)
recipe.count = 4
recipe.0.label = 1.5%
recipe.0.dry_mass_g = 0.15
recipe.0.molar_mass_g_per_mol = 66430.0
recipe.0.solvent_volume_l = 0.01
recipe.0.injected_volume_l = 0.00013
recipe.0.cavity_volume_l = 0.0005
recipe.1.label = 1%
recipe.1.dry_mass_g = 0.1
recipe.1.molar_mass_g_per_mol = 66430.0
recipe.1.solvent_volume_l = 0.01
recipe.1.injected_volume_l = 0.00013
recipe.1.cavity_volume_l = 0.0005
recipe.2.label = 0.75%
recipe.2.dry_mass_g = 0.075
recipe.2.molar_mass_g_per_mol = 66430.0
recipe.2.solvent_volume_l = 0.01
recipe.2.injected_volume_l = 0.00013
recipe.2.cavity_volume_l = 0.0005
recipe.3.label = 0.5%
recipe.3.dry_mass_g = 0.05
recipe.3.molar_mass_g_per_mol = 66430.0
recipe.3.solvent_volume_l = 0.01
recipe.3.injected_volume_l = 0.00013
recipe.3.cavity_volume_l = 0.0005

# Optical stack (used when signal.source = stack): gold film on a glass
# prism, water-like buffer
stack.prism_index = 1.5106
stack.analyte_index = 1.329
stack.wavelength_nm = 810.0
stack.layer.count = 1
stack.layer.0.eps_real = -24.1
stack.layer.0.eps_imag = 1.65
stack.layer.0.thickness_nm = 50.0
optics.drop_fraction = 0.4
optics.delta_n_max = 0.01
budget.prism_bulk = 0.71
budget.prism_surfaces = 0.90141
budget.detector_and_coupling = 0.2
budget.residual = 0.8206   # trims the off-resonance ceiling to the observed level

# Bootstrap depth
bootstrap.m = 175
bootstrap.p = 15000
bootstrap.seed = 20260823

# Estimation conventions
estimation.steady_time_s = 94.0
estimation.use_raw_steady_state = false
estimation.reference_dataset = 0
estimation.classical_surrogate = gaussian
estimation.align = false

# Raw time-tag generation (off by default; heavy output)
timetag.enabled = false
timetag.herald_rate_hz = 50000.0
timetag.window_ps = 4000
timetag.jitter_ps = 1000
timetag.background_rate_hz = 0.0
"""
