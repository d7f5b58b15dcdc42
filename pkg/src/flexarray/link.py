"""Friis link budget with impedance mismatch, receiver SNR, EVM and M-QAM BER."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants
from scipy.special import erfc

from .errors import DomainError, InvalidImpedanceError

BOLTZMANN = constants.k
T0 = 290.0
SUPPORTED_ORDERS = (4, 16, 64)


def db(x):
    return 10 * np.log10(x)


def undb(x_db):
    return 10 ** (np.asarray(x_db, dtype=float) / 10)


def dbm_to_watts(p_dbm):
    return 1e-3 * undb(p_dbm)


def watts_to_dbm(p_w):
    return db(np.asarray(p_w, dtype=float) / 1e-3)


@dataclass(frozen=True)
class Modulation:
    """Square M-QAM with ``L = sqrt(M)`` levels per dimension."""

    m_order: int

    def __post_init__(self):
        if self.m_order not in SUPPORTED_ORDERS:
            raise DomainError(f"unsupported QAM order {self.m_order}; expected one of {SUPPORTED_ORDERS}")

    @property
    def levels(self) -> int:
        return math.isqrt(self.m_order)

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.m_order))

    @property
    def name(self) -> str:
        return f"{self.m_order}-QAM"


@dataclass(frozen=True)
class LinkBudget:
    """Inputs of the received-power and SNR chain (SI units, linear gains)."""

    p_t_max: float
    g_t_folded: float
    g_r: float
    wavelength: float
    distance: float
    z_pa: complex = 50.0
    z_ant: complex = 50.0
    p_noise_tx_received: float = 0.0
    p_noise_out: float = 0.0
    bandwidth: float = 10e9

    def __post_init__(self):
        for name in ("p_t_max", "g_t_folded", "g_r", "p_noise_tx_received", "p_noise_out"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be a non-negative number, got {value!r}")
        for name in ("wavelength", "distance", "bandwidth"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")

    def with_(self, **changes) -> "LinkBudget":
        return replace(self, **changes)


def mismatch_factor(z_pa, z_ant) -> float:
    """Power transfer factor ``16 Zpa^2 Zant^2 / (Zpa + Zant)^4`` on impedance magnitudes."""
    a, b = abs(z_pa), abs(z_ant)
    if a + b == 0.0:
        raise InvalidImpedanceError("mismatch factor undefined for two zero impedances")
    return 16 * a ** 2 * b ** 2 / (a + b) ** 4


def path_gain(wavelength: float, distance: float, strict_paper: bool = False) -> float:
    """Free-space path gain ``(lambda / (4 pi d))**2``.

    ``strict_paper=True`` returns ``lambda / (4 pi d)**2`` instead, which is
    not dimensionless and exists only to reproduce the printed expression.
    """
    if not distance > 0:
        raise DomainError(f"distance must be positive, got {distance!r}")
    if strict_paper:
        return wavelength / (4 * math.pi * distance) ** 2
    return (wavelength / (4 * math.pi * distance)) ** 2


def received_power(budget: LinkBudget, strict_paper: bool = False) -> float:
    """Received power in watts (Friis with mismatch)."""
    return (budget.p_t_max * budget.g_t_folded * budget.g_r
            * path_gain(budget.wavelength, budget.distance, strict_paper)
            * mismatch_factor(budget.z_pa, budget.z_ant))


def snr(p_r: float, p_noise_tx_received: float, p_noise_out: float) -> float:
    """Receiver SNR (linear) against received TX noise plus output noise."""
    noise = p_noise_tx_received + p_noise_out
    if not noise > 0:
        raise DomainError("total noise power must be positive")
    return p_r / noise


def budget_snr(budget: LinkBudget, strict_paper: bool = False) -> float:
    return snr(received_power(budget, strict_paper), budget.p_noise_tx_received, budget.p_noise_out)


def thermal_noise_power(bandwidth: float, noise_figure_db: float = 0.0, gain: float = 1.0,
                        temperature: float = T0) -> float:
    """``k T B F G``.  A convenience default for the output-noise input; not part of the BER model."""
    return BOLTZMANN * temperature * bandwidth * float(undb(noise_figure_db)) * gain


def evm_from_snr(snr_linear) -> float:
    """RMS error-vector magnitude approximated as ``1/sqrt(SNR)``."""
    s = np.asarray(snr_linear, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("EVM needs a positive SNR")
    out = 1.0 / np.sqrt(s)
    return float(out) if out.ndim == 0 else out


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt 2) / 2``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2))


def ber_analytic(mod: Modulation, evm):
    """Approximate bit-error probability of square M-QAM from the RMS EVM.

    Written with both ``L`` and ``log2 M`` as in the usual expression even
    though ``log2 M = 2 log2 L`` for square constellations.
    """
    evm = np.asarray(evm, dtype=float)
    L = mod.levels
    log_l = math.log2(L)
    log_m = math.log2(mod.m_order)
    with np.errstate(divide="ignore"):
        arg = np.sqrt(3 * log_l / (L ** 2 - 1) * 2 / (evm ** 2 * log_m))
    p = 2 * (1 - 1 / L) / log_l * q_function(arg)
    return float(p) if p.ndim == 0 else p


def ber_from_snr(mod: Modulation, snr_linear):
    """:func:`ber_analytic` with ``EVM = 1/sqrt(SNR)`` substituted; defined at ``SNR = 0``."""
    s = np.asarray(snr_linear, dtype=float)
    if np.any(s < 0):
        raise DomainError("SNR must be non-negative")
    L = mod.levels
    log_l = math.log2(L)
    arg = np.sqrt(3 * log_l / (L ** 2 - 1) * 2 * s / math.log2(mod.m_order))
    p = 2 * (1 - 1 / L) / log_l * q_function(arg)
    return float(p) if p.ndim == 0 else p
