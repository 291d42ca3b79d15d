"""
Small-scale fading and CQI reporting.

Every tap is a Jakes process built as a sum of sinusoids with complex
Gaussian weights: arrival angles are stratified uniform on the circle, so the
ensemble autocorrelation is exactly J0(2 pi f_d tau) and each tap is exactly
complex Gaussian (Rayleigh envelope) for any number of oscillators.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

# ITU / 3GPP Typical Urban, 20 taps: (delay in microseconds, relative power in dB)
ITU_TU20 = (
    (0.000, -5.7), (0.217, -7.6), (0.512, -10.1), (0.514, -10.2), (0.517, -10.2),
    (0.674, -11.5), (0.882, -13.4), (1.230, -16.3), (1.287, -16.9), (1.311, -17.1),
    (1.349, -17.4), (1.533, -19.0), (1.535, -19.0), (1.622, -19.8), (1.818, -21.5),
    (1.836, -21.6), (1.884, -22.1), (1.943, -22.6), (2.048, -23.5), (2.140, -24.3),
)

# re-evaluate the phasors exactly every this many incremental steps
_REANCHOR_STEPS = 1000


@dataclass(frozen=True)
class PowerDelayProfile:
    delays_s: np.ndarray
    powers: np.ndarray        # linear, normalised to sum 1

    @classmethod
    def from_table(cls, rows=ITU_TU20) -> "PowerDelayProfile":
        delays = np.array([d for d, _ in rows]) * 1e-6
        p = 10 ** (np.array([p for _, p in rows]) / 10)
        return cls(delays, p / p.sum())

    @property
    def n_paths(self) -> int:
        return len(self.delays_s)


class FadingLink:
    """
    A bank of independent multipath fading links of arbitrary ``shape``.

    ``taps()`` returns ``shape + (n_paths,)`` complex gains at the current
    time. Advance with :func:`advance_fading`.
    """

    def __init__(self, pdp: PowerDelayProfile, doppler_hz: float, rng: np.random.Generator,
                 shape=(), n_oscillators: int = 16, dtype=np.complex128):
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        full = shape + (pdp.n_paths, n_oscillators)
        self.pdp = pdp
        self.doppler_hz = float(doppler_hz)
        self.shape = shape
        self.t = 0.0
        scale = np.sqrt(pdp.powers[:, None] / (2 * n_oscillators))
        self._weights = ((rng.standard_normal(full) + 1j * rng.standard_normal(full)) * scale).astype(dtype)
        alpha = 2 * np.pi * (np.arange(n_oscillators) + rng.random(full)) / n_oscillators
        self._omega = (2 * np.pi * self.doppler_hz * np.cos(alpha)).astype(np.float64)
        self._state = self._weights.copy()
        self._ones = np.ones(n_oscillators, dtype=dtype)
        self._step_dt = None
        self._rot = None
        self._steps = 0

    @property
    def n_paths(self) -> int:
        return self.pdp.n_paths

    def taps(self) -> np.ndarray:
        return self._state @ self._ones

    def taps_at(self, t: float) -> np.ndarray:
        """Exact evaluation at an arbitrary time, without moving the link."""
        return (self._weights * np.exp(1j * self._omega * t)) @ self._ones

    def advance(self, t: float) -> "FadingLink":
        if t < self.t:
            raise ValueError("fading time must be nondecreasing")
        dt = t - self.t
        if dt == 0:
            return self
        self._steps += 1
        if self._steps % _REANCHOR_STEPS == 0 or (self._step_dt is not None and abs(dt - self._step_dt) > 1e-9 * self._step_dt):
            self._state = self._weights * np.exp(1j * self._omega * t).astype(self._weights.dtype)
        else:
            if self._rot is None:
                self._step_dt = dt
                self._rot = np.exp(1j * self._omega * dt).astype(self._weights.dtype)
            self._state *= self._rot
        self.t = t
        return self


def init_fading(pdp: PowerDelayProfile, doppler_hz: float, rng: np.random.Generator,
                shape=(), n_oscillators: int = 16, dtype=np.complex128) -> FadingLink:
    if doppler_hz < 0:
        raise ValueError("doppler_hz must be >= 0")
    return FadingLink(pdp, doppler_hz, rng, shape, n_oscillators, dtype)


def advance_fading(link: FadingLink, t: float) -> FadingLink:
    return link.advance(t)


def steering(delays_s: np.ndarray, sample_freqs_hz: np.ndarray, dtype=np.complex128) -> np.ndarray:
    """(n_paths, n_freqs) matrix mapping taps to frequency response."""
    return np.exp(-2j * np.pi * np.outer(delays_s, sample_freqs_hz)).astype(dtype)


def freq_response(link_or_taps, sample_freqs_hz, delays_s=None) -> np.ndarray:
    """``H(f) = sum_p tap_p exp(-j 2 pi f delay_p)``, shape ``(..., n_freqs)``."""
    if isinstance(link_or_taps, FadingLink):
        taps, delays = link_or_taps.taps(), link_or_taps.pdp.delays_s
    else:
        taps, delays = np.asarray(link_or_taps), np.asarray(delays_s)
    dtype = np.result_type(taps.dtype, np.complex64)
    return taps @ steering(delays, np.asarray(sample_freqs_hz, dtype=float), dtype)


def prb_sample_freqs(n_prb: int, subcarriers_per_prb: int = 12, spacing_hz: float = 15e3,
                     active_subcarriers: int = 600, samples_per_prb: int = 1) -> np.ndarray:
    """Baseband frequencies of the representative samples, PRB-major order."""
    if samples_per_prb == 1:
        offsets = np.array([(subcarriers_per_prb - 1) / 2])
    else:
        offsets = (np.arange(samples_per_prb) + 0.5) * subcarriers_per_prb / samples_per_prb - 0.5
    sc = np.arange(n_prb)[:, None] * subcarriers_per_prb + offsets[None, :]
    return ((sc - active_subcarriers / 2 + 0.5) * spacing_hz).ravel()


# ---------------------------------------------------------------------------
# CQI reporting

@dataclass(frozen=True)
class CqiReport:
    generated_tti: int
    applied_tti: int
    single_db: np.ndarray            # (n_ue, n_prb)
    dual_db: np.ndarray | None       # (n_ue, n_prb, 2) or None without spatial multiplexing


def quantize_cqi_db(sinr_db, step_db: float = 1.0, lo_db: float = -10.0, hi_db: float = 30.0):
    q = np.floor(np.asarray(sinr_db, dtype=float) / step_db) * step_db
    return np.clip(q, lo_db, hi_db)


def measure_cqi(single_db, dual_db, tti: int, period: int = 5, delay: int = 2,
                step_db: float = 1.0, lo_db: float = -10.0, hi_db: float = 30.0) -> CqiReport | None:
    """Quantised report on reporting TTIs, ``None`` otherwise."""
    if tti % period:
        return None
    return CqiReport(tti, tti + delay, quantize_cqi_db(single_db, step_db, lo_db, hi_db),
                     None if dual_db is None else quantize_cqi_db(dual_db, step_db, lo_db, hi_db))


class CqiPipeline:
    """Holds reports in flight and exposes the newest one already applied."""

    def __init__(self, period=5, delay=2, step_db=1.0, lo_db=-10.0, hi_db=30.0):
        self.period, self.delay = period, delay
        self.q = (step_db, lo_db, hi_db)
        self._pending = deque()
        self.current: CqiReport | None = None

    def step(self, tti: int, single_db, dual_db) -> CqiReport | None:
        """Generate (if due) and apply reports; returns a report newly applied at ``tti``."""
        report = measure_cqi(single_db, dual_db, tti, self.period, self.delay, *self.q)
        if report is not None:
            self._pending.append(report)
        applied = None
        while self._pending and self._pending[0].applied_tti <= tti:
            applied = self.current = self._pending.popleft()
        return applied
