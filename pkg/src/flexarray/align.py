"""Beam alignment by curvature: search fold space for a target direction.

The objective is the physical field magnitude toward the target, which for a
fixed receiver is proportional to the square root of received power.  A
coarse factorial grid over ``(xi1, xi2)`` is refined by coordinate descent
with golden-section line searches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .fields import FAR_FIELD_RADIUS, BeamDirection, SynthesisMode, angular_separation, array_field, locate_beam
from .geometry import FOLD_LIMIT, ArraySpec, FoldSpec, fold_layout, unit_vector
from .link import (LinkBudget, Modulation, ber_from_snr, budget_snr, dbm_to_watts, mismatch_factor,
                   thermal_noise_power)
from .power import directivity, impedance_report

GOLDEN = (math.sqrt(5) - 1) / 2
DEFAULT_BOUNDS = (math.radians(-180.0), math.radians(180.0))
UNREACHABLE_TOL = math.radians(5.0)
MIN_IMPROVEMENT = 1e-9


def default_budget(spec: ArraySpec, p_t_max_dbm: float = 10.0, distance: float = 4.5,
                   bandwidth: float = 5e9, noise_figure_db: float = 10.0,
                   p_noise_tx_received_dbm: float = -90.0, z_pa: complex = 50.0) -> LinkBudget:
    """Indoor 100 GHz link with an unfolded copy of the array at the receiver.

    Defaults put the unfolded link near 20 dB SNR.
    """
    flat = fold_layout(spec, FoldSpec())
    g_r = float(directivity(spec, flat, 0.0, 0.0))
    return LinkBudget(p_t_max=float(dbm_to_watts(p_t_max_dbm)), g_t_folded=g_r, g_r=g_r,
                      wavelength=spec.wavelength, distance=distance, z_pa=z_pa, z_ant=z_pa,
                      p_noise_tx_received=float(dbm_to_watts(p_noise_tx_received_dbm)),
                      p_noise_out=thermal_noise_power(bandwidth, noise_figure_db), bandwidth=bandwidth)


@dataclass(frozen=True)
class FoldEvaluation:
    """Radiation and link figures of one fold state (one sweep row)."""

    fold: FoldSpec
    beam: BeamDirection
    e_peak: float
    r_ant: float
    x_ant: float
    gain: float
    snr: float
    ber: dict = field(default_factory=dict)

    @property
    def z_ant(self) -> complex:
        return complex(self.r_ant, self.x_ant)

    @property
    def snr_db(self) -> float:
        return 10 * math.log10(self.snr) if self.snr > 0 else float("-inf")


def _link(budget: LinkBudget, gain: float, z_ant: complex, modulations, strict_paper=False):
    b = budget.with_(g_t_folded=float(gain), z_ant=z_ant)
    s = budget_snr(b, strict_paper)
    return s, {m.m_order: ber_from_snr(m, s) for m in modulations}


def _modulations(modulations) -> tuple:
    return tuple(m if isinstance(m, Modulation) else Modulation(int(m)) for m in modulations)


def evaluate_fold(spec: ArraySpec, fold: FoldSpec, budget: LinkBudget, modulations=(4, 16, 64),
                  mode=SynthesisMode.PHYSICAL, anchor="edge", rx_direction=None,
                  p_in_ratio: float = 1.0, x_ant: float = 0.0, gain: float | None = None,
                  strict_paper: bool = False) -> FoldEvaluation:
    """Beam, impedance and link chain for a single fold.

    The receiver sits on the main beam unless ``rx_direction`` (``theta, phi``)
    is given.  ``gain`` fixes the transmit gain instead of using the folded
    array's directivity toward the receiver.
    """
    frames = fold_layout(spec, fold, anchor)
    beam = locate_beam(frames, spec, mode)
    imp = impedance_report(spec, frames, p_in_ratio, x_ant)
    rx = (beam.theta, beam.phi) if rx_direction is None else rx_direction
    if gain is None:
        gain = float(directivity(spec, frames, *rx))
    s, ber = _link(budget, gain, imp.z_ant, _modulations(modulations), strict_paper)
    return FoldEvaluation(fold, beam, beam.magnitude, imp.z_ant.real, imp.z_ant.imag, gain, s, ber)


def sweep(spec: ArraySpec, xi1_grid, xi2_grid, budget: LinkBudget, modulations=(4, 16, 64),
          mode=SynthesisMode.PHYSICAL, anchor="edge", threads: int = 1, **kwargs) -> list[FoldEvaluation]:
    """Full factorial fold sweep, ``xi1`` outer and ``xi2`` inner (radians)."""
    xi1 = list(np.atleast_1d(xi1_grid))
    xi2 = list(np.atleast_1d(xi2_grid))
    if not xi1 or not xi2:
        raise DomainError("sweep grids must be non-empty")
    folds = [FoldSpec(float(a), float(b)) for a in xi1 for b in xi2]

    def run(fold):
        return evaluate_fold(spec, fold, budget, modulations, mode, anchor, **kwargs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, folds))
    return [run(f) for f in folds]


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]`` to an interval narrower than ``tol``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass(frozen=True)
class AlignmentResult:
    """Best fold for a target direction.

    ``gain_db`` is the target-direction field relative to the unfolded
    broadside peak, in dB.
    """

    fold: FoldSpec
    beam: BeamDirection
    target: tuple
    objective: float
    gain_db: float
    z_ant: complex
    snr: float
    ber: dict
    reachable: bool
    evaluations: int

    @property
    def pointing_error(self) -> float:
        t = BeamDirection(self.target[0], self.target[1], 0.0)
        return angular_separation(self.beam, t)


class _Objective:
    def __init__(self, spec, target, mode, anchor, penalty, budget):
        self.spec, self.mode, self.anchor = spec, mode, anchor
        self.dir = unit_vector(*target)
        self.penalty = penalty
        self.budget = budget
        self.count = 0
        self.cache = {}

    def __call__(self, xi1, xi2):
        key = (float(xi1), float(xi2))
        if key in self.cache:
            return self.cache[key]
        self.count += 1
        frames = fold_layout(self.spec, FoldSpec(*key), self.anchor)
        value = float(np.linalg.norm(array_field(frames, self.spec, self.dir, FAR_FIELD_RADIUS, self.mode)))
        if self.penalty:
            z = impedance_report(self.spec, frames).z_ant
            value *= mismatch_factor(self.budget.z_pa, z)
        self.cache[key] = value
        return value


def align_beam(spec: ArraySpec, target_theta: float, target_phi: float, bounds=None,
               budget: LinkBudget | None = None, modulations=(4, 16, 64), mode=SynthesisMode.PHYSICAL,
               anchor="edge", coarse_step: float = math.radians(5.0), resolution: float = math.radians(0.1),
               mismatch_penalty: bool = False, max_sweeps: int = 30, strict_paper: bool = False,
               p_in_ratio: float = 1.0, x_ant: float = 0.0) -> AlignmentResult:
    """Fold the array so its field toward ``(target_theta, target_phi)`` is largest.

    Parameters
    ----------
    bounds : ((lo1, hi1), (lo2, hi2)) or (lo, hi), optional
        Search box in radians for ``xi1`` and ``xi2``; default +/-180 deg.
    mismatch_penalty : bool
        Multiply the objective by the PA-antenna mismatch factor.

    Returns
    -------
    AlignmentResult
        ``reachable`` is False when the achieved beam is more than 5 deg
        from the target; the best-effort fold is still returned.
    """
    mode = SynthesisMode.parse(mode)
    if bounds is None:
        bounds = DEFAULT_BOUNDS
    if np.ndim(bounds) == 1:
        bounds = (tuple(bounds), tuple(bounds))
    (lo1, hi1), (lo2, hi2) = [(max(float(lo), -FOLD_LIMIT), min(float(hi), FOLD_LIMIT)) for lo, hi in bounds]
    if not (lo1 <= hi1 and lo2 <= hi2):
        raise DomainError("empty search bounds")
    if budget is None:
        budget = default_budget(spec)
    obj = _Objective(spec, (target_theta, target_phi), mode, anchor, mismatch_penalty, budget)

    def axis(lo, hi):
        n = int(math.floor((hi - lo) / coarse_step + 1e-9))
        pts = lo + coarse_step * np.arange(n + 1)
        if 0.0 not in pts and lo < 0.0 < hi:
            pts = np.sort(np.append(pts, 0.0))
        return [float(p) for p in pts]

    best = None
    for a in axis(lo1, hi1):
        for b in axis(lo2, hi2):
            v = obj(a, b)
            if best is None or v > best[2]:
                best = (a, b, v)
    x1, x2, val = best

    for _ in range(max_sweeps):
        moved = 0.0
        for k in (0, 1):
            cur = x1 if k == 0 else x2
            lo, hi = (lo1, hi1) if k == 0 else (lo2, hi2)
            a, b = max(lo, cur - coarse_step), min(hi, cur + coarse_step)
            if k == 0:
                new, v = golden_section_max(lambda t: obj(t, x2), a, b, resolution / 2)
            else:
                new, v = golden_section_max(lambda t: obj(x1, t), a, b, resolution / 2)
            if v > val * (1 + MIN_IMPROVEMENT):
                moved = max(moved, abs(new - cur))
                val = v
                if k == 0:
                    x1 = new
                else:
                    x2 = new
        if moved < resolution:
            break

    fold = FoldSpec(x1, x2)
    frames = fold_layout(spec, fold, anchor)
    beam = locate_beam(frames, spec, mode)
    flat_peak = float(np.linalg.norm(array_field(fold_layout(spec, FoldSpec(), anchor), spec,
                                                 unit_vector(0.0, 0.0), FAR_FIELD_RADIUS, mode)))
    target_field = float(np.linalg.norm(array_field(frames, spec, unit_vector(target_theta, target_phi),
                                                    FAR_FIELD_RADIUS, mode)))
    z = impedance_report(spec, frames, p_in_ratio, x_ant).z_ant
    gain = float(directivity(spec, frames, target_theta, target_phi))
    s, ber = _link(budget, gain, z, _modulations(modulations), strict_paper)
    reachable = angular_separation(beam, BeamDirection(target_theta, target_phi, 0.0)) <= UNREACHABLE_TOL
    return AlignmentResult(fold, beam, (float(target_theta), float(target_phi)), val,
                           20 * math.log10(target_field / flat_peak), z, s, ber, reachable, obj.count)
