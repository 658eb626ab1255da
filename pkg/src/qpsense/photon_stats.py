"""Probe statistics for transmission measurements.

A measurement set sends nu probes through the sensor and counts the
transmitted ones.  Heralded single-photon probes give a binomial count with
variance nu * T * (1 - T); a coherent probe of unit mean photon number gives
a Poisson count with variance nu * T (the shot-noise limit).  The ratio of
the two per-set uncertainties, 1 / sqrt(1 - T), is the precision enhancement
of the single-photon probe.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError


class ProbeModel(Enum):
    """Noise law of the light source used for one transmission sample."""

    HERALDED_SINGLE_PHOTON = "quantum"
    COHERENT_UNIT_MEAN = "classical"


@dataclass(frozen=True)
class SamplingPlan:
    """Per-bin sampling layout: mu sets of nu probes every bin_seconds."""

    nu: int
    mu: int
    bin_seconds: float = 6.0

    def __post_init__(self):
        if self.nu < 1 or self.mu < 1:
            raise DomainError("nu and mu must be at least 1")
        if self.bin_seconds <= 0:
            raise DomainError("bin_seconds must be positive")


@dataclass(frozen=True)
class SetStatistics:
    """Mean and spread of per-set transmission estimates within one bin."""

    mean_t: float
    std_t: float
    n_sets: int

    def __post_init__(self):
        if not 0.0 <= self.mean_t <= 1.0:
            raise DomainError("mean transmission must lie in [0, 1]")
        if self.std_t < 0:
            raise DomainError("std must be non-negative")
        if self.n_sets < 1:
            raise DomainError("need at least one set")


def sample_transmitted(transmission: float, nu: int, model: ProbeModel,
                       rng: np.random.Generator, size=None):
    """Number of transmitted probes out of nu, under the given noise law.

    Binomial(nu, T) for heralded single photons, Poisson(nu * T) for the
    coherent probe.  Deterministic given the generator state.

    Args:
        transmission: channel transmission T in [0, 1].
        nu: probes per measurement set.
        model: noise law.
        rng: explicit random generator.
        size: None for a single int, else an output shape.

    Returns:
        int or int ndarray of transmitted counts.
    """
    if not 0.0 <= transmission <= 1.0:
        raise DomainError("transmission must lie in [0, 1]")
    if nu < 1:
        raise DomainError("nu must be at least 1")
    if model is ProbeModel.HERALDED_SINGLE_PHOTON:
        out = rng.binomial(nu, transmission, size=size)
    elif model is ProbeModel.COHERENT_UNIT_MEAN:
        out = rng.poisson(nu * transmission, size=size)
    else:
        raise DomainError(f"unknown probe model {model!r}")
    return int(out) if size is None else out


def estimate_transmission(n_transmitted, nu: int):
    """Per-set transmission estimate n_transmitted / nu.

    Counts may exceed nu for coherent probes; they must be non-negative.
    """
    n = np.asarray(n_transmitted)
    if np.any(n < 0):
        raise DomainError("counts must be non-negative")
    if nu < 1:
        raise DomainError("nu must be at least 1")
    out = n / float(nu)
    return out if out.ndim else float(out)


def set_statistics(samples) -> SetStatistics:
    """Mean and population standard deviation of per-set estimates.

    The spread is normalised by the number of sets (not n - 1), matching the
    definition used for the per-bin uncertainty.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("need at least one sample")
    return SetStatistics(float(samples.mean()), float(samples.std()),
                         samples.size)


def transmission_std_quantum(transmission, nu: int):
    """Per-set std sqrt(T (1 - T) / nu) of the single-photon probe."""
    t = np.asarray(transmission, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise DomainError("transmission must lie in [0, 1]")
    if nu < 1:
        raise DomainError("nu must be at least 1")
    out = np.sqrt(t * (1.0 - t) / nu)
    return out if out.ndim else float(out)


def transmission_std_classical(transmission, nu: int):
    """Per-set shot-noise std sqrt(T / nu) of the coherent probe."""
    t = np.asarray(transmission, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise DomainError("transmission must lie in [0, 1]")
    if nu < 1:
        raise DomainError("nu must be at least 1")
    out = np.sqrt(t / nu)
    return out if out.ndim else float(out)


def enhancement(transmission):
    """Precision gain 1 / sqrt(1 - T) of single-photon over coherent probes.

    Diverges as T approaches 1; T = 1 is rejected.
    """
    t = np.asarray(transmission, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise DomainError("transmission must lie in [0, 1]")
    if np.any(t == 1.0):
        raise DomainError("enhancement is singular at T = 1")
    out = 1.0 / np.sqrt(1.0 - t)
    return out if out.ndim else float(out)
