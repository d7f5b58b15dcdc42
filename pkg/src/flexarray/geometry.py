"""Array definition, fold geometry and the rotation / change-of-basis transforms.

Conventions
-----------
Elements are indexed ``(i, j)`` with row ``i`` along global ``y`` and column
``j`` along global ``x``; the flat array lies in the ``z = 0`` plane with its
broadside along ``+z``.  A fold ``xi1`` bends every row into a circular arc in
the x-z plane, ``xi2`` bends every column into an arc in the y-z plane.
Positive angles are convex toward ``+z``.

The local-to-global rotation of an element is the product of basic rotations
that :func:`rotation_matrix_inv` spells out entry by entry.  Note that in that
factorization ``alpha_x`` turns about the z axis, ``alpha_y`` about x and
``alpha_z`` about y: ``R = Rz(alpha_x) @ Rx(alpha_y) @ Ry(alpha_z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy import constants

from .errors import DomainError

SPEED_OF_LIGHT = constants.c
ETA0 = 376.73
DESIGN_FREQUENCY = 100e9
SUBSTRATE_EPS_R = 3.1
SUBSTRATE_HEIGHT = 100e-6
FOLD_LIMIT = math.radians(330.0)

# x-direction arc is applied first, the y-direction arc then rotates the frames.
FOLD_ORDER = ("x", "y")

Anchor = Literal["edge", "center"]


def patch_dimensions(freq: float, eps_r: float = SUBSTRATE_EPS_R,
                     height: float = SUBSTRATE_HEIGHT) -> tuple[float, float]:
    """Half-wave rectangular patch sizing (transmission-line model).

    Returns
    -------
    (width, length) : tuple of float
        Patch width and resonant length in meters.

    Raises
    ------
    DomainError
        For non-positive frequency, height or ``eps_r <= 1``.
    """
    if not (freq > 0 and height > 0 and eps_r > 1):
        raise DomainError(f"patch sizing needs freq > 0, height > 0 and eps_r > 1 (got {freq!r}, {height!r}, {eps_r!r})")
    lam = SPEED_OF_LIGHT / freq
    width = lam / 2 * math.sqrt(2 / (eps_r + 1))
    eps_eff = (eps_r + 1) / 2 + (eps_r - 1) / 2 / math.sqrt(1 + 12 * height / width)
    w_h = width / height
    delta_l = 0.412 * height * ((eps_eff + 0.3) * (w_h + 0.264)) / ((eps_eff - 0.258) * (w_h + 0.8))
    length = lam / (2 * math.sqrt(eps_eff)) - 2 * delta_l
    return width, length


@dataclass(frozen=True, eq=False)
class ArraySpec:
    """Physical definition of an ``rows x cols`` patch array.

    Attributes
    ----------
    rows, cols : int
        Grid size ``m`` and ``n``.
    patch_width, patch_length : float
        Patch ``W`` (along y) and ``L`` (along x), meters.
    pitch_x, pitch_y : float
        Element center spacing, meters.
    freq : float
        Operating frequency, Hz.
    excitations : ndarray
        Complex excitation currents, shape ``(rows, cols)``.
    field_scale : float
        ``E0``, field strength in V/m at the 1 m reference radius.
    port_voltage : float
        ``V0``, voltage at the edge of the input port.
    """

    rows: int
    cols: int
    patch_width: float
    patch_length: float
    pitch_x: float
    pitch_y: float
    freq: float
    excitations: np.ndarray = field(default=None)
    field_scale: float = 1.0
    port_voltage: float = 1.0

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols or self.rows < 1 or self.cols < 1:
            raise DomainError(f"array needs at least one row and column, got {self.rows}x{self.cols}")
        for name in ("patch_width", "patch_length", "pitch_x", "pitch_y", "freq"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        if self.excitations is None:
            exc = np.ones((self.rows, self.cols), dtype=complex)
        else:
            exc = np.array(self.excitations, dtype=complex)
            if exc.ndim == 0:
                exc = np.full((self.rows, self.cols), complex(exc))
        if exc.shape != (self.rows, self.cols):
            raise DomainError(f"excitation shape {exc.shape} does not match ({self.rows}, {self.cols})")
        exc.setflags(write=False)
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        object.__setattr__(self, "excitations", exc)

    @classmethod
    def default(cls, rows: int = 4, cols: int = 4, freq: float = DESIGN_FREQUENCY,
                eps_r: float = SUBSTRATE_EPS_R, height: float = SUBSTRATE_HEIGHT, **overrides) -> "ArraySpec":
        """Half-wave pitch array of half-wave patches sized at ``freq``."""
        width, length = patch_dimensions(freq, eps_r, height)
        pitch = SPEED_OF_LIGHT / freq / 2
        kwargs = dict(rows=rows, cols=cols, patch_width=width, patch_length=length,
                      pitch_x=pitch, pitch_y=pitch, freq=freq)
        kwargs.update(overrides)
        return cls(**kwargs)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.freq

    @property
    def beta(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def diagonal(self) -> float:
        """Diagonal of the flat substrate footprint (one pitch per element)."""
        return math.hypot(self.cols * self.pitch_x, self.rows * self.pitch_y)

    def with_freq(self, freq: float) -> "ArraySpec":
        return replace(self, freq=freq)

    def with_excitations(self, excitations) -> "ArraySpec":
        return replace(self, excitations=excitations)


@dataclass(frozen=True)
class FoldSpec:
    """Total bend ``xi1`` along x and ``xi2`` along y, radians."""

    xi1: float = 0.0
    xi2: float = 0.0

    def __post_init__(self):
        for name in ("xi1", "xi2"):
            value = getattr(self, name)
            if not np.isfinite(value) or abs(value) > FOLD_LIMIT + 1e-12:
                raise DomainError(f"{name}={math.degrees(value):.3f} deg exceeds the +/-330 deg bend limit")

    @classmethod
    def from_degrees(cls, xi1: float = 0.0, xi2: float = 0.0) -> "FoldSpec":
        return cls(math.radians(xi1), math.radians(xi2))

    @property
    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.xi1), math.degrees(self.xi2)

    @property
    def label(self) -> str:
        a, b = self.degrees
        return f"x{a:g},y{b:g}"


@dataclass(frozen=True, eq=False)
class ElementFrame:
    """Position and local-frame rotation angles of one element."""

    row: int
    col: int
    position: np.ndarray
    alpha_x: float
    alpha_y: float
    alpha_z: float

    @property
    def alphas(self) -> tuple[float, float, float]:
        return self.alpha_x, self.alpha_y, self.alpha_z

    @property
    def rotation(self) -> np.ndarray:
        """Local-to-global rotation matrix."""
        return rotation_matrix_inv(self.alpha_x, self.alpha_y, self.alpha_z)


def rotation_matrix_inv(alpha_x, alpha_y, alpha_z) -> np.ndarray:
    """Local-to-global rotation ``R_tot^-1`` built from three rotation angles.

    Broadcasts over array arguments; the trailing two axes of the result hold
    the 3x3 matrix.
    """
    sx, cx = np.sin(alpha_x), np.cos(alpha_x)
    sy, cy = np.sin(alpha_y), np.cos(alpha_y)
    sz, cz = np.sin(alpha_z), np.cos(alpha_z)
    rows = [
        [cx * cz - sx * sy * sz, -sx * cy, cx * sz + sx * sy * cz],
        [sx * cz + cx * sy * sz, cx * cy, sx * sz - cx * sy * cz],
        [-cy * sz, sy, cy * cz],
    ]
    shape = np.broadcast(sx, sy, sz).shape
    return np.stack([np.stack([np.broadcast_to(v, shape) for v in row], axis=-1) for row in rows], axis=-2)


def rotation_angles(matrix) -> tuple:
    """Inverse of :func:`rotation_matrix_inv`: recover ``(alpha_x, alpha_y, alpha_z)``.

    ``alpha_y`` is taken in ``[-pi/2, pi/2]``; at the gimbal-lock point
    ``|alpha_y| = pi/2`` the split between ``alpha_x`` and ``alpha_z`` is
    arbitrary and ``alpha_z`` is set to zero.
    """
    m = np.asarray(matrix, dtype=float)
    alpha_y = np.arcsin(np.clip(m[..., 2, 1], -1.0, 1.0))
    cy = np.cos(alpha_y)
    locked = cy < 1e-12
    alpha_x = np.where(locked, np.arctan2(m[..., 1, 0], m[..., 0, 0]), np.arctan2(-m[..., 0, 1], m[..., 1, 1]))
    alpha_z = np.where(locked, 0.0, np.arctan2(-m[..., 2, 0], m[..., 2, 2]))
    return alpha_x, alpha_y, alpha_z


def change_of_basis(theta, phi) -> np.ndarray:
    """Spherical-to-Cartesian matrix ``T_CB`` with columns ``(r_hat, theta_hat, phi_hat)``."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    zero = np.zeros(np.broadcast(st, sp).shape)
    rows = [
        [st * cp, ct * cp, -sp],
        [st * sp, ct * sp, cp],
        [ct, -st, zero],
    ]
    shape = zero.shape
    return np.stack([np.stack([np.broadcast_to(v, shape) for v in row], axis=-1) for row in rows], axis=-2)


def unit_vector(theta, phi) -> np.ndarray:
    """Cartesian unit vector(s) for direction ``(theta, phi)``, trailing axis of length 3."""
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)


def direction_angles(vectors) -> tuple[np.ndarray, np.ndarray]:
    """``(theta, phi)`` of Cartesian direction(s); ``phi`` in ``(-pi, pi]``."""
    v = np.asarray(vectors, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    theta = np.arccos(np.clip(v[..., 2] / norm, -1.0, 1.0))
    phi = np.arctan2(v[..., 1], v[..., 0])
    return theta, phi


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    one, zero = np.ones_like(c), np.zeros_like(c)
    return np.stack([np.stack([one, zero, zero], -1),
                     np.stack([zero, c, -s], -1),
                     np.stack([zero, s, c], -1)], -2)


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    one, zero = np.ones_like(c), np.zeros_like(c)
    return np.stack([np.stack([c, zero, s], -1),
                     np.stack([zero, one, zero], -1),
                     np.stack([-s, zero, c], -1)], -2)


def bend_arc(xi: float, count: int, pitch: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform-curvature arc through ``count`` elements spaced ``pitch`` along the arc.

    Returns tangent angles, in-plane coordinate and height of each element,
    centered so the arc midpoint sits at the origin.  The tangent angle of
    element ``k`` is ``xi * (k / (count - 1) - 1/2)`` and the radius is
    ``(count - 1) * pitch / xi``.
    """
    k = np.arange(count, dtype=float)
    offset = k - (count - 1) / 2
    if count == 1 or xi == 0.0:
        return np.zeros(count), offset * pitch, np.zeros(count)
    tangent = xi * offset / (count - 1)
    # R sin t and R (cos t - 1) with R t = offset * pitch, written to stay finite as xi -> 0
    arc = offset * pitch
    u = arc * np.sinc(tangent / np.pi)
    w = -arc * np.sin(tangent / 2) * np.sinc(tangent / (2 * np.pi))
    return tangent, u, w


def layout_arrays(spec: ArraySpec, fold: FoldSpec, anchor: Anchor = "edge") -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fold layout: positions ``(m, n, 3)`` and rotations ``(m, n, 3, 3)``.

    Positions form a translation surface: every row is the x-arc shifted by
    the y-arc, so spacing along both bend directions equals the pitch.  Frames
    are the x-arc rotation followed by the y-arc rotation.  With
    ``anchor="edge"`` the whole layout is turned so element ``(0, 0)`` keeps
    the flat orientation (the array is held at its first corner); with
    ``anchor="center"`` the arc midpoints stay flat.
    """
    tx, ux, wx = bend_arc(fold.xi1, spec.cols, spec.pitch_x)
    ty, uy, wy = bend_arc(fold.xi2, spec.rows, spec.pitch_y)
    pos = np.zeros((spec.rows, spec.cols, 3))
    pos[..., 0] = ux[None, :]
    pos[..., 1] = uy[:, None]
    pos[..., 2] = wx[None, :] + wy[:, None]
    # a y-arc tilting toward +y is a negative turn about x
    rot = _rot_x(-ty)[:, None] @ _rot_y(tx)[None, :]
    if anchor == "edge":
        g = rot[0, 0].T
        rot = g @ rot
        pos = pos @ g.T
    elif anchor != "center":
        raise DomainError(f"unknown anchor {anchor!r}")
    return pos, rot


def fold_layout(spec: ArraySpec, fold: FoldSpec, anchor: Anchor = "edge") -> list[ElementFrame]:
    """Per-element positions and rotation angles of the folded array.

    Parameters
    ----------
    spec : ArraySpec
    fold : FoldSpec
    anchor : {"edge", "center"}
        Which part of the array keeps the flat orientation.

    Returns
    -------
    list of ElementFrame
        Row-major, length ``rows * cols``.
    """
    if not isinstance(fold, FoldSpec):
        raise DomainError("fold must be a FoldSpec")
    pos, rot = layout_arrays(spec, fold, anchor)
    ax, ay, az = rotation_angles(rot)
    frames = []
    for i in range(spec.rows):
        for j in range(spec.cols):
            frames.append(ElementFrame(i, j, pos[i, j].copy(), float(ax[i, j]), float(ay[i, j]), float(az[i, j])))
    return frames


def stack_frames(frames: Sequence[ElementFrame]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element positions ``(N, 3)``, rotations ``(N, 3, 3)`` and angles ``(N, 3)``."""
    pos = np.array([f.position for f in frames], dtype=float).reshape(-1, 3)
    alphas = np.array([f.alphas for f in frames], dtype=float).reshape(-1, 3)
    rot = rotation_matrix_inv(alphas[:, 0], alphas[:, 1], alphas[:, 2])
    return pos, rot, alphas


def frame_excitations(spec: ArraySpec, frames: Sequence[ElementFrame]) -> np.ndarray:
    """Excitation current of each frame, in frame order."""
    return np.array([spec.excitations[f.row, f.col] for f in frames], dtype=complex)
