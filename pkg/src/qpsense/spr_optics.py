"""Attenuated-total-reflection optics of the plasmonic sensor head.

Light enters through a high-index prism, reflects off a thin metal film and
leaves toward the detector; the analyte sits on the far side of the film.
p-polarised reflectance is computed with the characteristic-matrix method
for an arbitrary layer stack.  Beyond the critical angle the reflectance
shows the plasmon dip; the sensor operates on the dip's left flank at a
configured fractional drop below the off-resonance plateau, where a small
analyte index change gives a large reflectance change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import fmt
from .errors import DomainError, NoResonanceError
from .kvconfig import load_kv

SWEEP_CSV_HEADER = "theta_rad,R"

# Resonance search resolution; the dip is then polished by golden section.
_COARSE_POINTS = 4001
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LayerStack:
    """Prism / thin films / analyte geometry at a fixed vacuum wavelength.

    Layers are (complex relative permittivity, thickness in nm) pairs ordered
    from the prism side.  The prism index must exceed the analyte index so a
    total-internal-reflection plateau exists.
    """

    prism_index: float
    layers: tuple[tuple[complex, float], ...]
    analyte_index: float
    wavelength_nm: float

    def __post_init__(self):
        if self.prism_index <= 0 or self.analyte_index <= 0:
            raise DomainError("refractive indices must be positive")
        if self.prism_index <= self.analyte_index:
            raise DomainError("prism index must exceed analyte index")
        if self.wavelength_nm <= 0:
            raise DomainError("wavelength must be positive")
        object.__setattr__(
            self,
            "layers",
            tuple((complex(e), float(d)) for e, d in self.layers),
        )
        for eps, d in self.layers:
            if not (math.isfinite(eps.real) and math.isfinite(eps.imag)):
                raise DomainError("layer permittivity must be finite")
            if not math.isfinite(d) or d <= 0:
                raise DomainError("layer thickness must be positive")

    def critical_angle(self) -> float:
        return math.asin(self.analyte_index / self.prism_index)

    def with_analyte_index(self, n_analyte: float) -> "LayerStack":
        return LayerStack(self.prism_index, self.layers, n_analyte,
                          self.wavelength_nm)


@dataclass(frozen=True)
class EfficiencyBudget:
    """Multiplicative loss factors between sensor reflectance and detection.

    prism_bulk is the transmission through the prism glass, prism_surfaces
    the additional uncoated-surface factor, detector_and_coupling the fibre
    coupling and detection efficiency, and residual a trim for unmodelled
    losses.  All factors lie in (0, 1].
    """

    prism_bulk: float
    prism_surfaces: float
    detector_and_coupling: float
    residual: float = 1.0

    def __post_init__(self):
        for name in ("prism_bulk", "prism_surfaces", "detector_and_coupling",
                     "residual"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1]")

    def product(self) -> float:
        return (self.prism_bulk * self.prism_surfaces
                * self.detector_and_coupling * self.residual)


def multilayer_reflectance(prism_index: float, eps_layers, thicknesses_nm,
                           eps_final: complex, wavelength_nm: float, theta):
    """p-polarised intensity reflectance of a planar multilayer.

    Characteristic-matrix formulation: each film contributes
    [[cos b, -i sin b / q], [-i q sin b, cos b]] with b = kz d and
    q = kz / eps, and the half-spaces close the recursion.  Vectorised over
    the incidence angle theta (radians, measured in the prism).
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta >= np.pi / 2):
        raise DomainError("incidence angle must lie in [0, pi/2)")
    if prism_index <= 0 or wavelength_nm <= 0:
        raise DomainError("prism index and wavelength must be positive")
    eps_layers = [complex(e) for e in eps_layers]
    thicknesses_nm = [float(d) for d in thicknesses_nm]
    if len(eps_layers) != len(thicknesses_nm):
        raise DomainError("one thickness per layer permittivity required")
    for e in eps_layers + [complex(eps_final)]:
        if not (math.isfinite(e.real) and math.isfinite(e.imag)):
            raise DomainError("permittivities must be finite")

    k0 = 2.0 * np.pi / wavelength_nm
    eps_prism = complex(prism_index ** 2)
    kx = k0 * prism_index * np.sin(theta)

    def kz(eps):
        # Principal branch keeps Im(kz) >= 0: decay into lossy or
        # evanescent regions.
        return np.sqrt(eps * k0 ** 2 - kx ** 2 + 0j)

    q_in = kz(eps_prism) / eps_prism
    q_out = kz(complex(eps_final)) / complex(eps_final)

    m11 = np.ones_like(kx, dtype=complex)
    m12 = np.zeros_like(m11)
    m21 = np.zeros_like(m11)
    m22 = np.ones_like(m11)
    for eps, d in zip(eps_layers, thicknesses_nm):
        kzj = kz(eps)
        qj = kzj / eps
        beta = kzj * d
        c = np.cos(beta)
        s = np.sin(beta)
        a12 = -1j * s / qj
        a21 = -1j * qj * s
        m11, m12, m21, m22 = (m11 * c + m12 * a21, m11 * a12 + m12 * c,
                              m21 * c + m22 * a21, m21 * a12 + m22 * c)

    num = q_in * (m11 + m12 * q_out) - (m21 + m22 * q_out)
    den = q_in * (m11 + m12 * q_out) + (m21 + m22 * q_out)
    r = np.abs(num / den) ** 2
    return r if r.ndim else float(r)


def reflectance(stack: LayerStack, theta):
    """Intensity reflectance of the stack at prism-side incidence theta."""
    eps = [e for e, _ in stack.layers]
    d = [t for _, t in stack.layers]
    return multilayer_reflectance(stack.prism_index, eps, d,
                                  stack.analyte_index ** 2,
                                  stack.wavelength_nm, theta)


def _golden_section(f, a: float, b: float, tol: float) -> float:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def find_resonance_angle(stack: LayerStack, angle_tol: float = 1e-12) -> float:
    """Angle of the reflectance minimum beyond the critical angle.

    A coarse scan brackets the dip and golden-section search refines it.

    Raises:
        NoResonanceError: reflectance has no interior minimum there (for
        example a bare lossless interface, which stays at R = 1).
    """
    theta_c = stack.critical_angle()
    grid = np.linspace(theta_c + 1e-6, np.pi / 2 - 1e-6, _COARSE_POINTS)
    r = reflectance(stack, grid)
    i = int(np.argmin(r))
    if i == 0 or i == grid.size - 1:
        raise NoResonanceError("no interior reflectance minimum found")
    if min(r[0], r[-1]) - r[i] < 1e-9:
        raise NoResonanceError("reflectance dip is not resolved")
    return _golden_section(lambda t: reflectance(stack, t),
                           grid[i - 1], grid[i + 1], angle_tol)


def off_resonance_level(stack: LayerStack):
    """Plateau reflectance and its angle on the left flank of the dip.

    Returns:
        (R_plateau, theta_plateau, theta_min) tuple.
    """
    theta_min = find_resonance_angle(stack)
    theta_c = stack.critical_angle()
    grid = np.linspace(theta_c + 1e-6, theta_min, _COARSE_POINTS)
    r = reflectance(stack, grid)
    j = int(np.argmax(r))
    return float(r[j]), float(grid[j]), theta_min


def operating_point(stack: LayerStack, drop_fraction: float,
                    angle_tol: float = 1e-10) -> float:
    """Left-flank angle where R has dropped by drop_fraction off the plateau.

    Solves R(theta) = (1 - drop_fraction) * R_plateau by bisection to
    angle_tol radians, taking the smallest such angle between the plateau
    and the dip.  drop_fraction = 0 returns the plateau edge itself.

    Raises:
        DomainError: the requested level lies below the dip minimum.
    """
    if not 0.0 <= drop_fraction < 1.0:
        raise DomainError("drop_fraction must lie in [0, 1)")
    r_off, theta_peak, theta_min = off_resonance_level(stack)
    if drop_fraction == 0.0:
        return theta_peak
    target = (1.0 - drop_fraction) * r_off
    if target <= reflectance(stack, theta_min):
        raise DomainError(
            f"drop of {drop_fraction} falls below the dip minimum")
    grid = np.linspace(theta_peak, theta_min, _COARSE_POINTS)
    r = reflectance(stack, grid)
    below = np.nonzero(r <= target)[0]
    k = int(below[0])
    lo, hi = grid[k - 1], grid[k]
    f_lo = reflectance(stack, lo) - target
    while hi - lo > angle_tol:
        mid = 0.5 * (lo + hi)
        f_mid = reflectance(stack, mid) - target
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def system_transmission(reflectance_value, budget: EfficiencyBudget):
    """Detected fraction: sensor reflectance times the loss budget."""
    r = np.asarray(reflectance_value, dtype=float)
    if np.any(r < 0) or np.any(r > 1):
        raise DomainError("reflectance must lie in [0, 1]")
    out = r * budget.product()
    return out if out.ndim else float(out)


def analyte_index_trajectory(fraction_bound, n_buffer: float,
                             delta_n_max: float):
    """Analyte index n_buffer + fraction_bound * delta_n_max.

    Linear-response map from receptor occupation to the effective index seen
    by the evanescent field; fraction_bound must lie in [0, 1].
    """
    f = np.asarray(fraction_bound, dtype=float)
    if np.any(f < 0) or np.any(f > 1):
        raise DomainError("fraction_bound must lie in [0, 1]")
    if n_buffer <= 0:
        raise DomainError("buffer index must be positive")
    if delta_n_max < 0:
        raise DomainError("delta_n_max must be non-negative")
    out = n_buffer + f * delta_n_max
    return out if out.ndim else float(out)


def stack_from_kv(kv: dict[str, str], prefix: str = "stack") -> LayerStack:
    """Build a LayerStack from flat config keys under the given prefix."""
    def get(key: str) -> str:
        full = f"{prefix}.{key}"
        if full not in kv:
            raise DomainError(f"missing stack config key {full!r}")
        return kv[full]

    n_layers = int(get("layer.count"))
    layers = []
    for i in range(n_layers):
        eps = complex(float(get(f"layer.{i}.eps_real")),
                      float(get(f"layer.{i}.eps_imag")))
        layers.append((eps, float(get(f"layer.{i}.thickness_nm"))))
    return LayerStack(
        prism_index=float(get("prism_index")),
        layers=tuple(layers),
        analyte_index=float(get("analyte_index")),
        wavelength_nm=float(get("wavelength_nm")),
    )


def stack_to_kv(stack: LayerStack, prefix: str = "stack") -> dict[str, str]:
    kv = {
        f"{prefix}.prism_index": fmt(stack.prism_index),
        f"{prefix}.analyte_index": fmt(stack.analyte_index),
        f"{prefix}.wavelength_nm": fmt(stack.wavelength_nm),
        f"{prefix}.layer.count": str(len(stack.layers)),
    }
    for i, (eps, d) in enumerate(stack.layers):
        kv[f"{prefix}.layer.{i}.eps_real"] = fmt(eps.real)
        kv[f"{prefix}.layer.{i}.eps_imag"] = fmt(eps.imag)
        kv[f"{prefix}.layer.{i}.thickness_nm"] = fmt(d)
    return kv


def load_stack(path: str, prefix: str = "stack") -> LayerStack:
    return stack_from_kv(load_kv(path), prefix)


def write_angle_sweep(path: str, stack: LayerStack, thetas) -> None:
    thetas = np.asarray(thetas, dtype=float)
    r = np.atleast_1d(reflectance(stack, thetas))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SWEEP_CSV_HEADER + "\n")
        for t, rv in zip(thetas, r):
            fh.write(f"{fmt(t)},{fmt(rv)}\n")
