"""Pseudo-first-order binding kinetics and the transmission sensorgram model.

A ligand at fixed concentration binds to an immobilised receptor layer; the
bound fraction relaxes exponentially toward equilibrium at the observable
rate ks = ka * ligand_conc + kd.  The sensor converts the bound fraction into
an optical transmission

    T(t) = baseline + amplitude * (1 - exp(-ks * t)),

and the double-reciprocal line 1/T_inf = alpha / affinity * (1 / L) + alpha
links steady-state amplitudes across concentrations back to the affinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import fmt, parse_float, read_table
from .errors import DegenerateFitError, DomainError

# Relative tolerance for consistency between stored and derived rate fields.
AFFINITY_CONSISTENCY_RTOL = 1e-9

SENSORGRAM_CSV_HEADER = "time_s,T_mean,T_std"


@dataclass(frozen=True)
class KineticParams:
    """Ground-truth rates for one ligand concentration.

    ka is the association rate (1/(M s)), kd the dissociation rate (1/s),
    ligand_conc the cavity ligand concentration (M) and amplitude the
    asymptotic transmission rise.  affinity (ka/kd, 1/M) and the observable
    rate ks (1/s) may be supplied; when omitted they are derived.  Supplied
    values must agree with the derived ones to AFFINITY_CONSISTENCY_RTOL.
    """

    ka: float
    kd: float
    ligand_conc: float
    amplitude: float
    affinity: float | None = None
    ks: float | None = None

    def __post_init__(self):
        for name in ("ka", "kd", "ligand_conc"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if not 0.0 <= self.amplitude <= 1.0:
            raise DomainError("amplitude must lie in [0, 1]")
        ks = observable_rate(self.ka, self.ligand_conc, self.kd)
        if self.ks is None:
            object.__setattr__(self, "ks", ks)
        elif not math.isclose(self.ks, ks, rel_tol=AFFINITY_CONSISTENCY_RTOL):
            raise DomainError(f"ks={self.ks} inconsistent with ka*L+kd={ks}")
        if self.kd > 0:
            affinity = self.ka / self.kd
            if self.affinity is None:
                object.__setattr__(self, "affinity", affinity)
            elif not math.isclose(
                self.affinity, affinity, rel_tol=AFFINITY_CONSISTENCY_RTOL
            ):
                raise DomainError(
                    f"affinity={self.affinity} inconsistent with ka/kd={affinity}"
                )


@dataclass(frozen=True)
class InjectionRecipe:
    """How a ligand solution is prepared and injected into the sample cavity."""

    dry_mass_g: float
    molar_mass_g_per_mol: float
    solvent_volume_l: float
    injected_volume_l: float
    cavity_volume_l: float

    def __post_init__(self):
        if self.dry_mass_g < 0:
            raise DomainError("dry_mass_g must be non-negative")
        for name in ("molar_mass_g_per_mol", "solvent_volume_l",
                     "injected_volume_l", "cavity_volume_l"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.injected_volume_l > self.solvent_volume_l:
            raise DomainError("cannot inject more solution than was prepared")


@dataclass
class Sensorgram:
    """Time series of mean transmission with a per-point uncertainty."""

    times: np.ndarray
    t_mean: np.ndarray
    t_std: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.t_mean = np.asarray(self.t_mean, dtype=float)
        self.t_std = np.asarray(self.t_std, dtype=float)
        n = self.times.size
        if self.t_mean.size != n or self.t_std.size != n:
            raise DomainError("sensorgram columns must have equal length")
        if n == 0:
            raise DomainError("sensorgram must contain at least one point")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("sensorgram times must be strictly increasing")
        if np.any(self.t_std < 0):
            raise DomainError("uncertainties must be non-negative")


def observable_rate(ka: float, ligand_conc: float, kd: float) -> float:
    """Relaxation rate ks = ka * ligand_conc + kd of the bound fraction."""
    if ka < 0 or ligand_conc < 0 or kd < 0:
        raise DomainError("rates and concentration must be non-negative")
    return ka * ligand_conc + kd


def model_transmission(t, baseline: float, amplitude: float, ks: float):
    """Transmission baseline + amplitude * (1 - exp(-ks t)).

    Accepts a scalar or array time; times must be non-negative and the
    asymptote baseline + amplitude must not exceed 1.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    if baseline < 0 or amplitude < 0 or ks < 0:
        raise DomainError("baseline, amplitude and ks must be non-negative")
    if baseline + amplitude > 1.0:
        raise DomainError("baseline + amplitude must not exceed 1")
    out = baseline + amplitude * (1.0 - np.exp(-ks * t))
    return out if out.ndim else float(out)


def generate_sensorgram(params: KineticParams, baseline: float,
                        times) -> Sensorgram:
    """Noiseless model sensorgram on a strictly increasing time grid."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise DomainError("time grid must not be empty")
    values = model_transmission(times, baseline, params.amplitude, params.ks)
    return Sensorgram(times, np.atleast_1d(values), np.zeros(times.size))


def cavity_concentration(recipe: InjectionRecipe) -> float:
    """Molar ligand concentration in the cavity after injection.

    The stock concentration dry_mass / (molar_mass * solvent_volume) is
    diluted by the injected-to-total volume ratio of the cavity.
    """
    stock = recipe.dry_mass_g / (
        recipe.molar_mass_g_per_mol * recipe.solvent_volume_l
    )
    dilution = recipe.injected_volume_l / (
        recipe.injected_volume_l + recipe.cavity_volume_l
    )
    return stock * dilution


def affinity_from_reciprocal_fit(slope: float, intercept: float):
    """Invert the double-reciprocal line into (affinity, alpha).

    With 1/T_inf = alpha / affinity * (1 / L) + alpha, the fitted intercept
    is alpha and affinity = intercept / slope.

    Returns:
        (affinity, alpha) tuple.
    """
    if slope <= 0 or intercept <= 0:
        raise DegenerateFitError(
            "reciprocal fit needs positive slope and intercept")
    return intercept / slope, intercept


def rates_from_affinity(ks: float, affinity: float, ligand_conc: float):
    """Split an observable rate into (kd, ka) given the affinity.

    kd = ks / (affinity * ligand_conc + 1) and ka = affinity * kd, so that
    observable_rate(ka, ligand_conc, kd) returns ks again.
    """
    if ks < 0:
        raise DomainError("ks must be non-negative")
    if affinity <= 0 or ligand_conc < 0:
        raise DomainError("affinity must be positive, ligand_conc non-negative")
    kd = ks / (affinity * ligand_conc + 1.0)
    return kd, affinity * kd


def write_sensorgram_csv(path: str, sensorgram: Sensorgram) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SENSORGRAM_CSV_HEADER + "\n")
        for t, m, s in zip(sensorgram.times, sensorgram.t_mean,
                           sensorgram.t_std):
            fh.write(f"{fmt(t)},{fmt(m)},{fmt(s)}\n")


def read_sensorgram_csv(path: str) -> Sensorgram:
    rows = read_table(path, SENSORGRAM_CSV_HEADER)
    times, means, stds = [], [], []
    for lineno, (t, m, s) in rows:
        times.append(parse_float(t, path, lineno, "time_s"))
        means.append(parse_float(m, path, lineno, "T_mean"))
        stds.append(parse_float(s, path, lineno, "T_std"))
    return Sensorgram(np.array(times), np.array(means), np.array(stds))
