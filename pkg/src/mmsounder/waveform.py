"""Zadoff-Chu sounding waveform and circular correlation.

Correlation values are left unnormalized: a unit-amplitude sequence
correlated with itself peaks at ``n_zc``. Conversion to power happens once,
in :mod:`mmsounder.sounder`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, LengthMismatchError, ValidationError

#: Upper limit of the transmit SDR sample rate (Hz).
MAX_SAMPLE_RATE = 160e6

DEFAULT_N_ZC = 8192
DEFAULT_ROOT = 1729
DEFAULT_SAMPLE_RATE = 65.536e6


@dataclass(frozen=True)
class ZcConfig:
    """Parameters of a Zadoff-Chu sounding sequence."""

    n_zc: int = DEFAULT_N_ZC
    u: int = DEFAULT_ROOT
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if int(self.n_zc) != self.n_zc or self.n_zc <= 0:
            raise InvalidConfigError(f"n_zc must be a positive integer, got {self.n_zc!r}")
        if int(self.u) != self.u or not 0 < self.u < self.n_zc:
            raise InvalidConfigError(f"root index u={self.u!r} must satisfy 0 < u < n_zc={self.n_zc}")
        if math.gcd(int(self.n_zc), int(self.u)) != 1:
            raise InvalidConfigError(f"gcd(n_zc={self.n_zc}, u={self.u}) != 1")
        if not 0 < self.sample_rate < MAX_SAMPLE_RATE:
            raise InvalidConfigError(
                f"sample_rate must lie in (0, {MAX_SAMPLE_RATE:g}) Hz, got {self.sample_rate!r}"
            )

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def period_duration(self) -> float:
        """Duration of one sounding sequence in seconds."""
        return self.n_zc / self.sample_rate


@dataclass(frozen=True, eq=False)
class ComplexSequence:
    """Complex baseband samples with their sample period (seconds)."""

    samples: np.ndarray
    sample_period: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("samples must be a non-empty 1-D array")
        if not self.sample_period > 0:
            raise ValidationError("sample_period must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size * self.sample_period

    def with_samples(self, samples) -> ComplexSequence:
        return ComplexSequence(samples, self.sample_period)


def _as_array(seq) -> np.ndarray:
    if isinstance(seq, ComplexSequence):
        return seq.samples
    return np.asarray(seq, dtype=np.complex128)


def zc_phase_numerator(n_zc: int, u: int) -> np.ndarray:
    """Integer phase numerators ``k[n]`` with ``x[n] = exp(-j*pi*k[n]/n_zc)``.

    Odd lengths use ``u*n*(n+1)``; even lengths use ``u*n*n`` (the standard
    even-length Chu form). Both are reduced modulo ``2*n_zc`` so the phase is
    evaluated on a small argument without losing precision.
    """
    n = np.arange(n_zc, dtype=np.int64)
    offset = n_zc % 2
    # reduce before multiplying by u: intermediates stay below 2*n_zc**2
    two_n = 2 * n_zc
    k = (n * (n + offset)) % two_n
    return (k * (u % two_n)) % two_n


def generate_zc(config: ZcConfig) -> ComplexSequence:
    """Root Zadoff-Chu sequence of length ``config.n_zc``.

    Parameters
    ----------
    config : ZcConfig
        Sequence length, root index and sample rate.

    Returns
    -------
    ComplexSequence
        Unit-modulus samples with ideal periodic autocorrelation.
    """
    k = zc_phase_numerator(config.n_zc, config.u)
    samples = np.exp(-1j * np.pi * k / config.n_zc)
    return ComplexSequence(samples, config.sample_period)


def periodic_signal(seq: ComplexSequence, n_periods: int) -> ComplexSequence:
    """Repeat ``seq`` cyclically ``n_periods`` times."""
    if int(n_periods) != n_periods or n_periods < 1:
        raise ValidationError(f"n_periods must be a positive integer, got {n_periods!r}")
    return seq.with_samples(np.tile(seq.samples, int(n_periods)))


def cyclic_shift(seq, shift: int) -> np.ndarray:
    """Delay ``seq`` by ``shift`` samples with wrap-around."""
    return np.roll(_as_array(seq), shift)


def _split_periods(rx, ref) -> tuple[np.ndarray, np.ndarray]:
    rx = _as_array(rx)
    ref = _as_array(ref)
    n = ref.size
    if n == 0 or rx.size == 0 or rx.size % n:
        raise LengthMismatchError(
            f"rx length {rx.size} is not a positive multiple of ref length {n}"
        )
    return rx.reshape(-1, n), ref


def circular_xcorr(rx, ref) -> np.ndarray:
    """Per-period circular cross-correlation.

    ``c[p, m] = sum_n rx_p[n] * conj(ref[(n - m) mod N])`` for every
    length-``N`` period ``rx_p`` of ``rx``. Computed with FFTs.

    Returns
    -------
    ndarray, shape (n_periods, N)
    """
    periods, ref = _split_periods(rx, ref)
    return correlate_spectrum(periods, np.conj(np.fft.fft(ref)))


def correlate_spectrum(periods: np.ndarray, ref_spectrum_conj: np.ndarray) -> np.ndarray:
    """Circular correlation of the rows of ``periods`` against a reference
    given by its conjugated DFT (reused across many dwells)."""
    return np.fft.ifft(np.fft.fft(periods, axis=-1) * ref_spectrum_conj, axis=-1)


def circular_xcorr_direct(rx, ref) -> np.ndarray:
    """O(N^2) direct-sum version of :func:`circular_xcorr` (test oracle)."""
    periods, ref = _split_periods(rx, ref)
    n = ref.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n  # [m, n] -> (n - m) mod N
    shifted_conj = np.conj(ref[idx])
    return periods @ shifted_conj.T
