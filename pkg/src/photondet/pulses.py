"""Control-photon envelopes and the source-cavity decay they induce.

A pulse is a real envelope xi(t) supported on [0, t_end] with unit integrated
intensity.  The emitting cavity reproduces the envelope exactly when its decay
rate follows

    kappa(t) = |xi(t)|^2 / integral_t^{t_end} |xi(s)|^2 ds,

the inverse-tail (hazard) form: the cavity population then tracks the tail
integral and the emitted flux kappa <a^dag a> equals |xi|^2.  For an
untruncated decaying exponential this reduces to the constant kappa = Gamma.
The t -> t_end divergence is regularized by capping at KAPPA_MAX and freezing
emission (kappa = 0) once the remaining tail drops below TAIL_FLOOR.

Catalog shapes are truncated to [0, t_end] and renormalized there, so the
integrated emitted flux is 1 up to the floor.  Tail integrals are analytic
for the catalog shapes and trapezoid-based for tabulated envelopes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

KAPPA_MAX = 1.0e3
TAIL_FLOOR = 1.0e-8


def _as_float_array(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class GaussianPulse:
    """xi(t) = (gamma^2/2pi)^(1/4) exp(-gamma^2 (t - t_peak)^2 / 4)."""

    gamma: float
    t_peak: float
    t_end: float
    scale: float | None = None

    kind = "gaussian"

    def __post_init__(self):
        _check_shape_params(self.gamma, self.t_end)
        if self.scale is None:
            object.__setattr__(self, "scale", 1.0 / np.sqrt(self._raw_tail(0.0)))

    def _raw_xi(self, t):
        amp = (self.gamma**2 / (2 * np.pi)) ** 0.25
        return amp * np.exp(-self.gamma**2 * (t - self.t_peak) ** 2 / 4)

    def _raw_tail(self, t):
        # |xi|^2 is gamma * phi(gamma (t - t_peak)) with phi the standard
        # normal pdf, so the tail is a difference of normal CDFs
        hi = ndtr(self.gamma * (self.t_end - self.t_peak))
        return hi - ndtr(self.gamma * (t - self.t_peak))

    def xi(self, t):
        t = _as_float_array(t)
        inside = (t >= 0) & (t <= self.t_end)
        return np.where(inside, self.scale * self._raw_xi(t), 0.0)

    def intensity_tail(self, t):
        t = _as_float_array(t)
        tc = np.clip(t, 0.0, self.t_end)
        return self.scale**2 * self._raw_tail(tc) * (t <= self.t_end)

    def normalized(self) -> "GaussianPulse":
        return _renormalized(self)


@dataclass(frozen=True)
class DecayingExpPulse:
    """xi(t) = sqrt(gamma) exp(-gamma t / 2) for t <= t_cut, else 0."""

    gamma: float
    t_cut: float
    t_end: float
    scale: float | None = None

    kind = "decaying_exp"

    def __post_init__(self):
        _check_shape_params(self.gamma, self.t_end, self.t_cut)
        if self.scale is None:
            object.__setattr__(self, "scale", 1.0 / np.sqrt(self._raw_tail(0.0)))

    def _raw_xi(self, t):
        return np.sqrt(self.gamma) * np.exp(-self.gamma * t / 2)

    def _raw_tail(self, t):
        # integral of gamma e^{-gamma s} from t to t_cut
        return np.exp(-self.gamma * t) - np.exp(-self.gamma * self.t_cut)

    def xi(self, t):
        t = _as_float_array(t)
        inside = (t >= 0) & (t <= self.t_cut)
        return np.where(inside, self.scale * self._raw_xi(t), 0.0)

    def intensity_tail(self, t):
        t = _as_float_array(t)
        tc = np.clip(t, 0.0, self.t_cut)
        return self.scale**2 * self._raw_tail(tc) * (t <= self.t_cut)

    def normalized(self) -> "DecayingExpPulse":
        return _renormalized(self)


@dataclass(frozen=True)
class RisingExpPulse:
    """xi(t) = sqrt(gamma) exp(gamma (t - t_cut) / 2) for t <= t_cut, else 0.

    A rising edge that terminates abruptly at t_cut; the mirror image of the
    decaying exponential.
    """

    gamma: float
    t_cut: float
    t_end: float
    scale: float | None = None

    kind = "rising_exp"

    def __post_init__(self):
        _check_shape_params(self.gamma, self.t_end, self.t_cut)
        if self.scale is None:
            object.__setattr__(self, "scale", 1.0 / np.sqrt(self._raw_tail(0.0)))

    def _raw_xi(self, t):
        return np.sqrt(self.gamma) * np.exp(self.gamma * (t - self.t_cut) / 2)

    def _raw_tail(self, t):
        return 1.0 - np.exp(self.gamma * (np.minimum(t, self.t_cut) - self.t_cut))

    def xi(self, t):
        t = _as_float_array(t)
        inside = (t >= 0) & (t <= self.t_cut)
        return np.where(inside, self.scale * self._raw_xi(t), 0.0)

    def intensity_tail(self, t):
        t = _as_float_array(t)
        tc = np.clip(t, 0.0, self.t_cut)
        return self.scale**2 * self._raw_tail(tc) * (t <= self.t_cut)

    def normalized(self) -> "RisingExpPulse":
        return _renormalized(self)


class TabulatedPulse:
    """Envelope given as (t, xi) samples, linearly interpolated.

    Samples outside [0, t_end] are clipped away; the shape is renormalized on
    construction so the trapezoid intensity integral is 1.
    """

    kind = "custom-tabulated"

    def __init__(self, ts, xis, t_end: float | None = None):
        ts = np.asarray(ts, dtype=float)
        xis = np.asarray(xis, dtype=float)
        if ts.ndim != 1 or ts.shape != xis.shape or ts.size < 2:
            raise ValueError("need matching 1d sample arrays with at least 2 points")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if t_end is None:
            t_end = float(ts[-1])
        self.t_end = t_end
        keep = (ts >= 0) & (ts <= t_end)
        ts, xis = ts[keep], xis[keep]
        norm = np.sqrt(np.trapezoid(xis**2, ts))
        if norm == 0:
            raise ValueError("envelope is identically zero")
        self._ts = ts
        self._xis = xis / norm
        p = self._xis**2
        # reverse cumulative trapezoid: tail[i] = integral_{ts[i]}^{t_end}
        seg = 0.5 * (p[1:] + p[:-1]) * np.diff(ts)
        tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        self._tail = tail

    def xi(self, t):
        t = _as_float_array(t)
        out = np.interp(t, self._ts, self._xis, left=0.0, right=0.0)
        return np.where((t >= self._ts[0]) & (t <= self._ts[-1]), out, 0.0)

    def intensity_tail(self, t):
        t = _as_float_array(t)
        out = np.interp(t, self._ts, self._tail, left=self._tail[0], right=0.0)
        return np.where(t < 0, self._tail[0], out)

    def normalized(self) -> "TabulatedPulse":
        return self


def _check_shape_params(gamma, t_end, t_cut=None):
    if gamma <= 0:
        raise ValueError("bandwidth must be positive")
    if t_end <= 0:
        raise ValueError("domain end must be positive")
    if t_cut is not None and not 0 < t_cut <= t_end:
        raise ValueError("truncation time must lie in (0, t_end]")


def _renormalized(pulse):
    total = float(pulse.intensity_tail(0.0))
    if total <= 0:
        raise ValueError("envelope is identically zero")
    return dataclasses.replace(pulse, scale=pulse.scale / np.sqrt(total))


def load_tabulated(path, t_end: float | None = None) -> TabulatedPulse:
    """Read a two-column (t, xi) text table."""
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (t, xi)")
    return TabulatedPulse(data[:, 0], data[:, 1], t_end)


def make_pulse(kind: str, gamma: float, t_ref: float, t_end: float):
    """Catalog factory; t_ref is the peak (gaussian) or cutoff (exponentials)."""
    if kind == "gaussian":
        return GaussianPulse(gamma, t_ref, t_end)
    if kind == "decaying_exp":
        return DecayingExpPulse(gamma, t_ref, t_end)
    if kind == "rising_exp":
        return RisingExpPulse(gamma, t_ref, t_end)
    raise ValueError(f"unknown pulse kind {kind!r}")


def kappa_from_xi(pulse, t):
    """Inverse-tail decay rate, capped at KAPPA_MAX, frozen below TAIL_FLOOR."""
    t = _as_float_array(t)
    p = np.abs(pulse.xi(t)) ** 2
    r = pulse.intensity_tail(t)
    live = r > TAIL_FLOOR
    k = np.zeros(np.broadcast(p, r).shape)
    np.divide(p, r, out=k, where=live)
    return np.minimum(k, KAPPA_MAX)


def sqrt_kappa_on_grid(pulse, ts) -> np.ndarray:
    return np.sqrt(kappa_from_xi(pulse, ts))
