"""Monte Carlo Gray-coded square QAM over a complex AWGN channel.

Bit ``k`` of a symbol word is sent MSB first.  The first half of the word
selects the in-phase level, the second half the quadrature level; each half
is a Gray code whose all-zero word maps to the most positive level, so 4-QAM
``00`` is ``(1 + 1j) / sqrt(2)``.

Batches draw from independent ``numpy`` ``PCG64`` streams spawned from the
master seed, so results depend only on ``(modulation, snr, n_bits, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, FramingError
from .link import Modulation, ber_from_snr

BATCH_BITS = 1 << 21
MIN_BITS = 10_000
Z95 = 1.959963984540054


def _gray(n):
    return n ^ (n >> 1)


class QamConstellation:
    """Unit-average-energy Gray square QAM.

    Attributes
    ----------
    points : ndarray
        Complex point of each integer symbol word, shape ``(M,)``.
    level_words : ndarray
        Per-dimension bit word of each level, levels ordered from most
        positive to most negative.
    """

    def __init__(self, order: int):
        self.modulation = Modulation(order)
        self.order = order
        L = self.modulation.levels
        self.half_bits = int(math.log2(L))
        self.bits_per_symbol = 2 * self.half_bits
        self.scale = math.sqrt(2 * (order - 1) / 3)
        amplitudes = (L - 1) - 2 * np.arange(L)
        self.level_words = np.array([_gray(k) for k in range(L)])
        self._amp_of_word = np.empty(L)
        self._amp_of_word[self.level_words] = amplitudes
        words = np.arange(order)
        self.points = (self._amp_of_word[words >> self.half_bits]
                       + 1j * self._amp_of_word[words & (L - 1)]) / self.scale
        # decision candidates sorted by bit word, so argmin resolves ties to the smaller word
        self._candidates = self._amp_of_word / self.scale

    def __repr__(self):
        return f"QamConstellation({self.order})"

    def word_bits(self, words) -> np.ndarray:
        words = np.asarray(words)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((words[..., None] >> shifts) & 1).astype(np.uint8)


@lru_cache(maxsize=None)
def constellation(order: int) -> QamConstellation:
    return QamConstellation(order)


def modulate(bits, const: QamConstellation) -> np.ndarray:
    """Map a bit sequence onto constellation points.

    Raises
    ------
    FramingError
        If the number of bits is not a multiple of ``log2 M``.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = const.bits_per_symbol
    if bits.size % k:
        raise FramingError(f"{bits.size} bits do not fill whole {const.order}-QAM symbols of {k} bits")
    weights = 1 << np.arange(k - 1, -1, -1)
    words = bits.reshape(-1, k) @ weights
    return const.points[words]


def awgn(symbols, snr_linear: float, seed=None) -> np.ndarray:
    """Add circular complex Gaussian noise of total variance ``1 / snr`` per symbol.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.  An
    infinite SNR returns an unchanged copy.
    """
    if not snr_linear > 0:
        raise DomainError(f"SNR must be positive, got {snr_linear!r}")
    symbols = np.asarray(symbols, dtype=complex)
    if math.isinf(snr_linear):
        return symbols.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma = math.sqrt(0.5 / snr_linear)
    noise = rng.standard_normal((2,) + symbols.shape)
    return symbols + sigma * (noise[0] + 1j * noise[1])


def _decide(values, const):
    dist = np.abs(values[..., None] - const._candidates)
    return np.argmin(dist, axis=-1)


def demodulate(noisy, const: QamConstellation) -> np.ndarray:
    """Minimum-distance decisions returned as a flat bit array.

    A square grid makes the nearest point separable, so I and Q are sliced
    independently; exact ties go to the lexicographically smaller word.
    """
    noisy = np.asarray(noisy, dtype=complex).ravel()
    words = (_decide(noisy.real, const) << const.half_bits) | _decide(noisy.imag, const)
    return const.word_bits(words).ravel()


@dataclass(frozen=True)
class BerResult:
    """Outcome of one Monte Carlo run.

    ``ci95_halfwidth`` is the normal-approximation half width
    ``1.96 sqrt(p (1 - p) / n)``; with zero errors it is instead the one-sided
    95 % upper bound ``3 / n`` (rule of three).
    """

    modulation: Modulation
    snr: float
    bits_sent: int
    bit_errors: int
    ber_estimate: float
    ci95_halfwidth: float
    seed: int

    @property
    def snr_db(self) -> float:
        return 10 * math.log10(self.snr) if self.snr > 0 else float("-inf")

    @property
    def ber_analytic(self) -> float:
        return ber_from_snr(self.modulation, self.snr)

    def sigma(self, p: float | None = None) -> float:
        """Binomial standard deviation of the estimate around ``p`` (default: analytic)."""
        p = self.ber_analytic if p is None else p
        return math.sqrt(p * (1 - p) / self.bits_sent)


def ber_monte_carlo(mod, snr_linear: float, n_bits: int, seed: int = 0, batch_bits: int = BATCH_BITS) -> BerResult:
    """End-to-end bit-error count of modulate -> AWGN -> demodulate.

    ``n_bits`` is rounded down to whole symbols.
    """
    if isinstance(mod, int):
        mod = Modulation(mod)
    if n_bits < MIN_BITS:
        raise DomainError(f"n_bits must be at least {MIN_BITS}, got {n_bits}")
    const = constellation(mod.m_order)
    k = const.bits_per_symbol
    n_symbols = n_bits // k
    per_batch = max(1, batch_bits // k)
    n_batches = -(-n_symbols // per_batch)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    errors = 0
    for b, stream in enumerate(streams):
        count = min(per_batch, n_symbols - b * per_batch)
        rng = np.random.default_rng(stream)
        bits = rng.integers(0, 2, size=count * k, dtype=np.uint8)
        rx = demodulate(awgn(modulate(bits, const), snr_linear, rng), const)
        errors += int(np.count_nonzero(rx != bits))
    sent = n_symbols * k
    p = errors / sent
    half = Z95 * math.sqrt(p * (1 - p) / sent) if errors else 3.0 / sent
    return BerResult(mod, float(snr_linear), sent, errors, p, half, int(seed))
