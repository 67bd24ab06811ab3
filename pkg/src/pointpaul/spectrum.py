"""Spectral peak estimation for uniformly sampled trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid


@dataclass(frozen=True)
class SpectrumPeak:
    frequency: float  # rad/s
    amplitude: float  # same unit as the signal

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError("frequency must be >= 0")


def amplitude_spectrum(t, x, pad: int = 4):
    """Hann-windowed one-sided amplitude spectrum.

    Returns (omega, amplitude) with amplitude scaled so that a pure tone
    A cos(w t) shows a peak of height A.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if t.size < 8:
        raise ValueError("need at least 8 samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
        raise ValueError("samples must be uniformly spaced")
    w = np.hanning(x.size)
    n_fft = 1 << int(math.ceil(math.log2(x.size * pad)))
    spec = np.fft.rfft((x - x.mean()) * w, n_fft)
    amp = 2.0 * np.abs(spec) / w.sum()
    omega = 2.0 * np.pi * np.fft.rfftfreq(n_fft, dt)
    return omega, amp


def _interpolate(omega, amp, i):
    # parabola through log-magnitudes; close to exact for the Gaussian-like
    # main lobe of a Hann window
    if i == 0 or i == amp.size - 1:
        return SpectrumPeak(float(omega[i]), float(amp[i]))
    la, lb, lc = np.log(amp[i - 1:i + 2] + 1e-300)
    denom = la - 2.0 * lb + lc
    if denom >= 0:
        return SpectrumPeak(float(omega[i]), float(amp[i]))
    p = 0.5 * (la - lc) / denom
    step = omega[1] - omega[0]
    return SpectrumPeak(float(omega[i] + p * step),
                        float(np.exp(lb - 0.25 * (la - lc) * p)))


def dominant_peak(t, x, omega_min: float = 0.0, omega_max: float = math.inf,
                  pad: int = 4) -> SpectrumPeak:
    """Strongest spectral line with angular frequency in [omega_min, omega_max]."""
    omega, amp = amplitude_spectrum(t, x, pad)
    idx = np.flatnonzero((omega >= omega_min) & (omega <= omega_max))
    if idx.size == 0:
        raise ValueError("no spectral bins in the requested band")
    i = idx[np.argmax(amp[idx])]
    return _interpolate(omega, amp, i)


def demodulate(t, x, omega: float) -> float:
    """Amplitude of the component of ``x`` at angular frequency ``omega``.

    Plain lock-in over the record; the record should span an integer number
    of periods of ``omega``.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float) - np.mean(x)
    c = trapezoid(x * np.cos(omega * t), t)
    s = trapezoid(x * np.sin(omega * t), t)
    return 2.0 * math.hypot(c, s) / (t[-1] - t[0])


def sideband_ratio(t, x, omega_secular: float, omega_rf: float):
    """Secular line and the micromotion sideband ratio of a trapped trajectory.

    Returns (secular_peak, ratio) where ratio is the summed amplitude of the
    lines at omega_rf -/+ omega_secular divided by the secular amplitude.
    For small q this approaches q/2.
    """
    half = 0.5 * omega_secular
    sec = dominant_peak(t, x, omega_secular - half, omega_secular + half)
    lower = dominant_peak(t, x, omega_rf - sec.frequency - half, omega_rf - sec.frequency + half)
    upper = dominant_peak(t, x, omega_rf + sec.frequency - half, omega_rf + sec.frequency + half)
    return sec, (lower.amplitude + upper.amplitude) / sec.amplitude
