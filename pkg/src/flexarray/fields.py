"""Element and array field synthesis for folded patch arrays.

Two summation rules are offered.  ``SynthesisMode.PAPER_LITERAL`` adds the
rotated element vectors through the closed-form ``mu`` coefficients with every
element seen from the common origin, so there is no inter-element phase.
``SynthesisMode.PHYSICAL`` rotates each element pattern into the global frame
and weights it by the exact spherical-wave phase and amplitude of its
displaced position, which is what makes a curved array steer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, FarFieldError
from .geometry import (ArraySpec, ElementFrame, FoldSpec, change_of_basis, direction_angles,
                       fold_layout, frame_excitations, stack_frames, unit_vector)

SINC_SERIES_LIMIT = 1e-6
# default observation radius for beam metrics; spherical-wave focusing terms stay below 1e-11
FAR_FIELD_RADIUS = 1e6


class SynthesisMode(str, enum.Enum):
    PAPER_LITERAL = "paper"
    PHYSICAL = "physical"

    @classmethod
    def parse(cls, value) -> "SynthesisMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown synthesis mode {value!r}; expected 'paper' or 'physical'") from None


def sinc(x):
    """``sin(x)/x`` with a two-term series near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SINC_SERIES_LIMIT
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def pattern_factor(theta, phi, spec: ArraySpec):
    """Scalar factor ``sinc(gamma) * cos(rho)`` shared by both field components."""
    st = np.sin(theta)
    gamma = spec.beta * spec.patch_width / 2 * st * np.sin(phi)
    rho = spec.beta * spec.patch_length / 2 * st * np.cos(phi)
    return sinc(gamma) * np.cos(rho)


def element_field_local(theta, phi, spec: ArraySpec):
    """Far-field ``(E_theta, E_phi)`` of one patch in its own frame.

    Parameters
    ----------
    theta, phi : float or array_like
        Observation angles in the element frame, radians.
    spec : ArraySpec
        Supplies ``E0``, ``W``, ``L`` and the wavenumber.

    Returns
    -------
    (E_theta, E_phi) : tuple of ndarray
    """
    f = spec.field_scale * pattern_factor(theta, phi, spec)
    return np.cos(phi) * f, -np.cos(theta) * np.sin(phi) * f


def _local_cartesian_field(dirs_local, spec):
    theta, phi = direction_angles(dirs_local)
    e_theta, e_phi = element_field_local(theta, phi, spec)
    sph = np.stack([np.zeros_like(e_theta), e_theta, e_phi], axis=-1)
    return np.einsum("...ij,...j->...i", change_of_basis(theta, phi), sph)


def element_field_global(frame: ElementFrame, theta, phi, spec: ArraySpec) -> np.ndarray:
    """Field of one element expressed in global Cartesian components.

    The global direction is carried into the element frame, the local pattern
    is evaluated there, converted to Cartesian and rotated back.
    """
    if frame.alphas == (0.0, 0.0, 0.0):
        e_theta, e_phi = element_field_local(theta, phi, spec)
        sph = np.stack(np.broadcast_arrays(np.zeros_like(e_theta), e_theta, e_phi), axis=-1)
        return np.einsum("...ij,...j->...i", change_of_basis(theta, phi), sph)
    rot = frame.rotation
    d_local = unit_vector(theta, phi) @ rot
    return _local_cartesian_field(d_local, spec) @ rot.T


def mu_coefficients(theta, phi, alpha_x, alpha_y, alpha_z) -> np.ndarray:
    """Bending coefficients ``(mu1, mu2, mu3)`` of the closed-form array sum."""
    sx, cx = np.sin(alpha_x), np.cos(alpha_x)
    sy, cy = np.sin(alpha_y), np.cos(alpha_y)
    sz, cz = np.sin(alpha_z), np.cos(alpha_z)
    two_ct = 2 * np.cos(theta)
    cp_st = np.cos(phi) * np.sin(theta)
    mu1 = two_ct * (cx * cz - sx * sy * sz) + cp_st * cy * sz
    mu2 = -two_ct * sx * cy - cp_st * sy
    mu3 = two_ct * (cx * sz + sx * sy * cz) - cp_st * cy * cz
    return np.stack(np.broadcast_arrays(mu1, mu2, mu3), axis=-1)


@dataclass(frozen=True, eq=False)
class FieldSample:
    theta: float
    phi: float
    r: float
    E: np.ndarray

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.E))


@dataclass(frozen=True, eq=False)
class RadiationPattern:
    """Complex field on a ``theta x phi`` grid at fixed radius.

    ``field`` has shape ``(len(theta), len(phi), 3)``.
    """

    theta: np.ndarray
    phi: np.ndarray
    r: float
    field: np.ndarray
    freq: float
    mode: SynthesisMode
    fold: FoldSpec | None = None

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.field, axis=-1)

    def rows(self):
        """Yield ``(theta, phi, E, |E|)`` in theta-major order."""
        mag = self.magnitude
        for a, t in enumerate(self.theta):
            for b, p in enumerate(self.phi):
                yield float(t), float(p), self.field[a, b], float(mag[a, b])


def check_far_field(spec: ArraySpec, r: float) -> None:
    if not r > spec.diagonal:
        raise FarFieldError(f"radius {r:g} m is not beyond the array diagonal {spec.diagonal:g} m")


def array_field(frames: Sequence[ElementFrame], spec: ArraySpec, dirs, r: float,
                mode=SynthesisMode.PHYSICAL) -> np.ndarray:
    """Total complex field for a batch of unit directions ``dirs`` (``(..., 3)``)."""
    mode = SynthesisMode.parse(mode)
    check_far_field(spec, r)
    dirs = np.asarray(dirs, dtype=float)
    shape = dirs.shape[:-1]
    d = dirs.reshape(-1, 3)
    pos, rot, alphas = stack_frames(frames)
    current = frame_excitations(spec, frames)
    if mode is SynthesisMode.PAPER_LITERAL:
        theta, phi = direction_angles(d)
        mu = mu_coefficients(theta[:, None], phi[:, None], alphas[:, 0], alphas[:, 1], alphas[:, 2])
        weight = spec.field_scale * pattern_factor(theta, phi, spec)
        total = weight[:, None] * np.einsum("n,knc->kc", current, mu)
    else:
        # (K, N, 3) local directions, one per element
        d_local = np.einsum("kc,ncl->knl", d, rot)
        e_local = _local_cartesian_field(d_local, spec)
        e_global = np.einsum("nij,knj->kni", rot, e_local)
        dist = np.linalg.norm(r * d[:, None, :] - pos[None, :, :], axis=-1)
        # dist - r without cancellation, so the path phase keeps full precision at large r
        excess = (np.sum(pos * pos, axis=-1)[None, :] - 2 * r * (d @ pos.T)) / (r + dist)
        phase = np.exp(-1j * spec.beta * r) * np.exp(-1j * spec.beta * excess)
        weight = current[None, :] * phase * (r / dist)
        total = np.einsum("kn,knc->kc", weight, e_global)
    return total.reshape(shape + (3,))


def total_field(frames: Sequence[ElementFrame], spec: ArraySpec, theta: float, phi: float,
                r: float, mode=SynthesisMode.PHYSICAL) -> FieldSample:
    """Field of the whole array at ``(r, theta, phi)``.

    Raises
    ------
    FarFieldError
        If ``r`` does not exceed the array diagonal.
    """
    e = array_field(frames, spec, unit_vector(theta, phi), r, mode)
    return FieldSample(float(theta), float(phi), float(r), e)


def _check_grid(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} grid must be a non-empty 1-D sequence")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise DomainError(f"{name} grid must be strictly increasing")
    return arr


def pattern(frames: Sequence[ElementFrame], spec: ArraySpec, theta_grid, phi_grid, r: float,
            mode=SynthesisMode.PHYSICAL, fold: FoldSpec | None = None) -> RadiationPattern:
    """Evaluate the total field at every node of a ``theta x phi`` grid (radians).

    Negative ``theta`` is allowed and reads as the cut through ``phi + pi``.
    """
    mode = SynthesisMode.parse(mode)
    theta = _check_grid(theta_grid, "theta")
    phi = _check_grid(phi_grid, "phi")
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    field = array_field(frames, spec, unit_vector(tt, pp), r, mode)
    return RadiationPattern(theta, phi, float(r), field, spec.freq, mode, fold)


def _parabolic_offset(left, mid, right):
    denom = left - 2 * mid + right
    if denom >= 0:
        return 0.0, mid
    off = 0.5 * (left - right) / denom
    return off, mid - 0.25 * (left - right) * off


def beam_peak(pat: RadiationPattern) -> tuple[float, float, float]:
    """Main-beam direction and magnitude of a sampled pattern.

    Grid argmax refined by a parabola through the neighbours along theta and
    along phi.  Exact ties go to the smallest theta, then the smallest phi.
    """
    mag = pat.magnitude
    top = mag.max()
    a, b = np.argwhere(mag >= top * (1 - 1e-12))[0]
    theta, phi, value = float(pat.theta[a]), float(pat.phi[b]), float(mag[a, b])
    gain = 0.0
    if 0 < a < len(pat.theta) - 1:
        step = pat.theta[a + 1] - pat.theta[a]
        if np.isclose(step, pat.theta[a] - pat.theta[a - 1]):
            off, peak = _parabolic_offset(mag[a - 1, b], value, mag[a + 1, b])
            theta += off * step
            gain += peak - value
    if 0 < b < len(pat.phi) - 1:
        step = pat.phi[b + 1] - pat.phi[b]
        if np.isclose(step, pat.phi[b] - pat.phi[b - 1]):
            off, peak = _parabolic_offset(mag[a, b - 1], value, mag[a, b + 1])
            phi += off * step
            gain += peak - value
    return theta, phi, value + gain


@dataclass(frozen=True)
class BeamDirection:
    theta: float
    phi: float
    magnitude: float

    @property
    def vector(self) -> np.ndarray:
        return unit_vector(self.theta, self.phi)

    @property
    def tilt(self) -> tuple[float, float]:
        """Signed tilt of the beam projected on the x-z and y-z planes, radians."""
        x, y, z = self.vector
        return math.atan2(x, z), math.atan2(y, z)


def _tangent_basis(d):
    helper = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, d)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(d, e1)


def locate_beam(frames: Sequence[ElementFrame], spec: ArraySpec, mode=SynthesisMode.PHYSICAL,
                r: float = FAR_FIELD_RADIUS, coarse_step: float = math.radians(2.0),
                fine_halfwidth: float = math.radians(2.5), fine_step: float = math.radians(0.05)) -> BeamDirection:
    """Main beam over the forward hemisphere.

    A coarse ``theta x phi`` scan is refined on a small tangent-plane grid
    around the coarse maximum, then interpolated with :func:`beam_peak`.
    """
    theta = np.arange(0.0, math.pi / 2 + 1e-12, coarse_step / 2)
    phi = np.arange(-math.pi, math.pi - 1e-12, coarse_step)
    coarse = pattern(frames, spec, theta, phi, r, mode)
    mag = coarse.magnitude
    a, b = np.argwhere(mag >= mag.max() * (1 - 1e-12))[0]
    d0 = unit_vector(theta[a], phi[b])
    e1, e2 = _tangent_basis(d0)
    offsets = np.arange(-fine_halfwidth, fine_halfwidth + fine_step / 2, fine_step)
    u, v = np.meshgrid(np.tan(offsets), np.tan(offsets), indexing="ij")
    dirs = d0 + u[..., None] * e1 + v[..., None] * e2
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    fine = array_field(frames, spec, dirs, r, mode)
    local = RadiationPattern(offsets, offsets, r, fine, spec.freq, SynthesisMode.parse(mode))
    ou, ov, peak = beam_peak(local)
    d = d0 + math.tan(ou) * e1 + math.tan(ov) * e2
    t, p = direction_angles(d / np.linalg.norm(d))
    if t < 1e-7:
        p = 0.0  # azimuth is undefined on the axis
    return BeamDirection(float(t), float(p), float(peak))


def angular_separation(a: BeamDirection, b: BeamDirection) -> float:
    cos = float(np.clip(np.dot(a.vector, b.vector), -1.0, 1.0))
    return math.acos(cos)


@dataclass(frozen=True)
class SquintResult:
    freqs: tuple
    beams: tuple

    @property
    def squint(self) -> float:
        """Largest pairwise angle between beam directions, radians."""
        worst = 0.0
        for i, a in enumerate(self.beams):
            for b in self.beams[i + 1:]:
                worst = max(worst, angular_separation(a, b))
        return worst

    def rows(self):
        return [(f, b.theta, b.phi) for f, b in zip(self.freqs, self.beams)]


def beam_squint(spec: ArraySpec, fold: FoldSpec, freqs, mode=SynthesisMode.PHYSICAL,
                anchor="edge", r: float = FAR_FIELD_RADIUS) -> SquintResult:
    """Main-beam direction at each frequency for fixed physical geometry."""
    frames = fold_layout(spec, fold, anchor)
    beams = [locate_beam(frames, spec.with_freq(float(f)), mode, r) for f in freqs]
    return SquintResult(tuple(float(f) for f in freqs), tuple(beams))
