"""Radiated power, radiation resistance and input impedance of folded arrays."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, InvalidExcitationError, InvalidImpedanceError
from .fields import FAR_FIELD_RADIUS, SynthesisMode, array_field, mu_coefficients, pattern_factor
from .geometry import (ETA0, ArraySpec, ElementFrame, FoldSpec, fold_layout, frame_excitations,
                       stack_frames, unit_vector)

# E0 is quoted at this radius; the physical field keeps that scale at any evaluation radius
REFERENCE_RADIUS = 1.0
DEFAULT_ORDER = 64
DEFAULT_NPHI = 128
# the smooth coherent field of a 4x4 array is already resolved at this grid
PHYSICAL_ORDER, PHYSICAL_NPHI = 32, 64
DEFAULT_TOL = 1e-6
MAX_ORDER = 1024
SYSTEM_IMPEDANCE = 50.0
REACTANCE_BOUND = 5.0


def chi(alpha_x, alpha_y, alpha_z):
    """Folding factor of the closed-form radiated power (broadcasts)."""
    sx, cx = np.sin(alpha_x), np.cos(alpha_x)
    sy, cy = np.sin(alpha_y), np.cos(alpha_y)
    sz, cz = np.sin(alpha_z), np.cos(alpha_z)
    chi1 = cx * cz - sx * sy * sz
    chi2 = cy ** 2 * sz ** 2
    chi3 = sx ** 2 * cy ** 2
    chi4 = sy ** 2
    chi5 = cx * sz + sx * sy * cz
    return (64 * chi1 ** 2 + 24 * chi2 + 64 * chi3 + 16 * chi4 + 32 * chi5 ** 2
            + 16 * chi1 * cy * cz + 16 * chi5 * cy * sz)


def _chi_and_current(spec, frames):
    _, _, alphas = stack_frames(frames)
    current = frame_excitations(spec, frames)
    return chi(alphas[:, 0], alphas[:, 1], alphas[:, 2]), np.abs(current) ** 2


def radiated_power_closed(spec: ArraySpec, frames: Sequence[ElementFrame]) -> float:
    """Closed-form total radiated power in watts."""
    c, i2 = _chi_and_current(spec, frames)
    return float(np.sum(math.pi ** 2 * spec.field_scale ** 2 * i2 * c) / (60 * ETA0))


def sphere_nodes(order: int, n_phi: int):
    """Gauss-Legendre in ``cos(theta)`` times uniform ``phi``.

    Returns ``theta``, ``phi`` (both ``(order, n_phi)``) and solid-angle weights
    summing to ``4 pi``.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    phi = (np.arange(n_phi) + 0.5) * (2 * math.pi / n_phi)
    theta = np.arccos(x)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    weights = np.repeat(w[:, None], n_phi, axis=1) * (2 * math.pi / n_phi)
    return tt, pp, weights


def _integrand_paper(spec, frames, tt, pp, approximate):
    _, _, alphas = stack_frames(frames)
    current = frame_excitations(spec, frames)
    th = tt[..., None]
    ph = pp[..., None]
    mu = mu_coefficients(th, ph, alphas[:, 0], alphas[:, 1], alphas[:, 2])
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    kappa1 = ct * cp * mu[..., 0] + ct * sp * mu[..., 1] - st * mu[..., 2]
    kappa2 = -sp * mu[..., 0] + cp * mu[..., 1]
    if approximate:
        f2 = 1.0
    else:
        f2 = pattern_factor(tt, pp, spec)[..., None] ** 2
    per_element = np.abs(current) ** 2 * f2 * (kappa1 ** 2 + kappa2 ** 2)
    return spec.field_scale ** 2 / (2 * ETA0) * np.sum(per_element, axis=-1)


def _integrand_physical(spec, frames, tt, pp):
    e = array_field(frames, spec, unit_vector(tt, pp), FAR_FIELD_RADIUS, SynthesisMode.PHYSICAL)
    return np.sum(np.abs(e) ** 2, axis=-1) / (2 * ETA0)


def _quadrature_once(spec, frames, mode, approximate, order, n_phi):
    tt, pp, w = sphere_nodes(order, n_phi)
    if mode is SynthesisMode.PAPER_LITERAL:
        f = _integrand_paper(spec, frames, tt, pp, approximate)
    else:
        f = _integrand_physical(spec, frames, tt, pp)
    return float(np.sum(w * f) * REFERENCE_RADIUS ** 2)


def radiated_power_quadrature(spec: ArraySpec, frames: Sequence[ElementFrame], mode=SynthesisMode.PAPER_LITERAL,
                              approximate: bool = True, order: int = DEFAULT_ORDER, n_phi: int = DEFAULT_NPHI,
                              tol: float = DEFAULT_TOL, max_order: int = MAX_ORDER) -> float:
    """Radiated power by numerical integration over the sphere.

    Parameters
    ----------
    mode : SynthesisMode
        ``PAPER_LITERAL`` integrates the incoherent per-element sum of
        ``kappa1**2 + kappa2**2``; ``PHYSICAL`` integrates ``|E|**2`` of the
        coherent array field.
    approximate : bool
        Paper-literal only: replace ``sinc(gamma)`` and ``cos(rho)`` by 1.
    order, n_phi : int
        Starting Gauss-Legendre order in theta and number of phi points; both
        double until successive results agree to ``tol``.

    Raises
    ------
    ConvergenceError
        If ``max_order`` is reached first.
    """
    mode = SynthesisMode.parse(mode)
    history = []
    prev = _quadrature_once(spec, frames, mode, approximate, order, n_phi)
    history.append((order, n_phi, prev))
    while order * 2 <= max_order:
        order, n_phi = order * 2, n_phi * 2
        value = _quadrature_once(spec, frames, mode, approximate, order, n_phi)
        history.append((order, n_phi, value))
        scale = max(abs(value), abs(prev))
        if scale == 0.0 or abs(value - prev) <= tol * scale:
            return value
        prev = value
    changes = [abs(b[2] - a[2]) / max(abs(b[2]), 1e-300) for a, b in zip(history, history[1:])]
    raise ConvergenceError("radiated-power quadrature did not converge",
                           {"history": history, "relative_changes": changes, "tol": tol})


def directivity(spec: ArraySpec, frames: Sequence[ElementFrame], theta, phi, p_rad: float | None = None) -> np.ndarray:
    """Directivity (linear) of the physical array field toward ``(theta, phi)``."""
    if p_rad is None:
        p_rad = radiated_power_quadrature(spec, frames, SynthesisMode.PHYSICAL,
                                          order=PHYSICAL_ORDER, n_phi=PHYSICAL_NPHI)
    e = array_field(frames, spec, unit_vector(theta, phi), FAR_FIELD_RADIUS, SynthesisMode.PHYSICAL)
    intensity = REFERENCE_RADIUS ** 2 * np.sum(np.abs(e) ** 2, axis=-1) / (2 * ETA0)
    return 4 * math.pi * intensity / p_rad


def radiation_resistance(spec: ArraySpec, frames: Sequence[ElementFrame]) -> float:
    """Radiation resistance in ohms from the port voltage and the folding factors.

    Raises
    ------
    InvalidExcitationError
        If every excitation current is zero.
    """
    c, i2 = _chi_and_current(spec, frames)
    denom = float(np.sum(i2 * math.pi ** 2 * spec.field_scale ** 2 * c))
    if not np.any(i2 > 0) or denom == 0.0:
        raise InvalidExcitationError("radiation resistance needs a nonzero excitation")
    return 60 * spec.rows * spec.cols * spec.port_voltage ** 2 * ETA0 / denom


def calibrate(spec: ArraySpec, target: float = SYSTEM_IMPEDANCE) -> ArraySpec:
    """Return ``spec`` with the port voltage that gives ``target`` ohms unfolded.

    The resulting ``V0 / E0`` ratio is then held fixed for every fold.
    """
    flat = fold_layout(spec, FoldSpec())
    unit = replace(spec, port_voltage=1.0)
    r1 = radiation_resistance(unit, flat)
    return replace(spec, port_voltage=math.sqrt(target / r1))


def input_impedance(r_rad: float, p_in: float, p_tot: float, x_ant: float = 0.0) -> complex:
    """Input impedance from the radiation resistance and the power ratio.

    Raises
    ------
    InvalidImpedanceError
        If ``p_tot`` is not positive.
    """
    if not p_tot > 0:
        raise InvalidImpedanceError(f"total radiated power must be positive, got {p_tot!r}")
    return complex(r_rad * p_in / p_tot, x_ant)


@dataclass(frozen=True, eq=False)
class PowerReport:
    p_quadrature: float
    p_closed: float
    chi_per_element: np.ndarray
    eta: float = ETA0

    @property
    def ratio(self) -> float:
        """Quadrature over closed form; reported, never folded back in."""
        return self.p_quadrature / self.p_closed if self.p_closed else float("nan")

    def to_dict(self) -> dict:
        return {"p_quadrature_w": self.p_quadrature, "p_closed_w": self.p_closed,
                "quadrature_to_closed_ratio": self.ratio,
                "chi_per_element": np.asarray(self.chi_per_element).tolist(), "eta_ohm": self.eta}


@dataclass(frozen=True)
class ImpedanceReport:
    r_rad: float
    z_ant: complex
    x_ant: float
    p_in: float

    def to_dict(self) -> dict:
        return {"r_rad_ohm": self.r_rad, "z_ant_re_ohm": self.z_ant.real, "z_ant_im_ohm": self.z_ant.imag,
                "x_ant_ohm": self.x_ant, "p_in_w": self.p_in}


def power_report(spec: ArraySpec, frames: Sequence[ElementFrame], mode=SynthesisMode.PAPER_LITERAL,
                 approximate: bool = True, **quad) -> PowerReport:
    c, _ = _chi_and_current(spec, frames)
    grid = np.zeros((spec.rows, spec.cols))
    for f, value in zip(frames, c):
        grid[f.row, f.col] = value
    return PowerReport(radiated_power_quadrature(spec, frames, mode, approximate, **quad),
                       radiated_power_closed(spec, frames), grid)


def impedance_report(spec: ArraySpec, frames: Sequence[ElementFrame], p_in_ratio: float = 1.0,
                     x_ant: float = 0.0) -> ImpedanceReport:
    """Radiation resistance and input impedance; ``P_in = p_in_ratio * P_tot``."""
    r_rad = radiation_resistance(spec, frames)
    p_tot = radiated_power_closed(spec, frames)
    p_in = p_in_ratio * p_tot
    return ImpedanceReport(r_rad, input_impedance(r_rad, p_in, p_tot, x_ant), float(x_ant), p_in)
