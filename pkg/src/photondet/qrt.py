"""Deterministic detection statistics from two-time correlations.

The filtered signal S = int f(t) j(t) dt is Gaussian-distributed to excellent
approximation, so its detection statistics follow from the first two moments
of the current, and those follow from the unconditional evolution plus the
regression kernel

    K(t1, t2) = delta(t2 - t1) + eta * Tr[y_op Y(t1 -> t2)],

where Y is the regression matrix e^{i phi} c rho(t1) + e^{-i phi} rho(t1) c^dag
propagated by the same generator as rho (it is not Hermitian, which is why the
propagators here never assume Hermiticity).  Two routes are provided:

* snr_deterministic: an adjoint pass.  The double integral
  J = int_{t1<t2} f f K is rewritten with the backward variable
  v(t1) = int_{t2>t1} f(t2) e^{A^T (t2-t1)} w_y dt2, which obeys
  dv/dt1 = -f w_y - A(t1)^T v, so one forward and one backward sweep give the
  variance at full step resolution, with no coarse kernel grid in between.

* two_time_cavity / two_time_fock: the kernel tabulated on an explicit
  (t1, t2) grid, with the delta ridge kept separate so quadrature can add it
  analytically.  Useful for inspection, export, and cross-checking the
  adjoint numbers; all rows advance together so each step costs one matrix
  product.

Vacuum input gives zero mean current and a delta-only kernel (the probe tone
cannot populate the readout transition from the ground manifold), so the
vacuum variance is the shot noise int f^2 dt exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import realrep
from .me import CavityTrajectory, evolve_cavity_me, evolve_fock_me, time_grid
from .pulses import kappa_from_xi
from .system import CavityModel, FockModel


def _trapz(values: np.ndarray, dt: float) -> float:
    return float(np.trapezoid(values, dx=dt))


@dataclass(frozen=True)
class SnrResult:
    """Signal statistics of a filtered homodyne record.

    e_y and j_corr are efficiency-independent: E[S | 1 photon] =
    sqrt(eta) e_y, E[S^2 | 1] = shot + 2 eta j_corr.  Vacuum input has zero
    mean and variance equal to shot.  snr_main divides the one-photon mean by
    the combined spread of both hypotheses; snr_sub subtracts the vacuum mean
    first (identical here since that mean vanishes).
    """

    eta: float
    e_y: float
    j_corr: float
    shot: float

    def signal_mean(self, eta: float | None = None) -> float:
        eta = self.eta if eta is None else eta
        return np.sqrt(eta) * self.e_y

    def signal_var(self, eta: float | None = None) -> float:
        eta = self.eta if eta is None else eta
        return self.shot + 2.0 * eta * self.j_corr - eta * self.e_y**2

    def snr(self, eta: float | None = None) -> float:
        eta = self.eta if eta is None else eta
        denom = self.signal_var(eta) + self.shot
        return self.signal_mean(eta) / np.sqrt(denom)

    @property
    def snr_main(self) -> float:
        return self.snr()

    @property
    def snr_sub(self) -> float:
        mean0, var0 = 0.0, self.shot
        return (self.signal_mean() - mean0) / np.sqrt(self.signal_var() + var0)


def snr_deterministic(
    model,
    pulse,
    t_end: float,
    filter_values: np.ndarray,
    *,
    dt: float = 1e-3,
    n_photon: int = 1,
    forward=None,
) -> SnrResult:
    """Adjoint-pass SNR for a filter sampled on the simulation grid.

    filter_values must have one entry per grid point (len = round(t_end/dt)+1).
    A precomputed forward trajectory with states can be passed to amortize
    parameter scans over filters.  Accepts either source model; the hierarchy
    variant runs the adjoint over all four components.
    """
    if isinstance(model, FockModel):
        return _snr_fock(model, pulse, t_end, filter_values, dt, n_photon, forward)
    return _snr_cavity(model, pulse, t_end, filter_values, dt, n_photon, forward)


def _snr_cavity(
    model: CavityModel,
    pulse,
    t_end: float,
    filter_values: np.ndarray,
    dt: float,
    n_photon: int,
    forward: CavityTrajectory | None,
) -> SnrResult:
    ts = time_grid(t_end, dt)
    f = np.asarray(filter_values, dtype=float)
    if f.shape != ts.shape:
        raise ValueError(f"filter has {f.shape[0]} samples, grid has {ts.shape[0]}")
    if forward is None:
        forward = evolve_cavity_me(
            model, pulse, t_end, dt=dt, n_photon=n_photon, keep_states=True
        )
    if forward.xs is None:
        raise ValueError("forward trajectory must be run with keep_states")
    xs = forward.xs
    n_steps = len(ts) - 1

    rp = model.real_superops()
    rp_t = [r.T.copy() for r in rp]
    m_meas = model.measurement_superop()
    w_y = model.weights(model.y_op)

    s_half = np.sqrt(kappa_from_xi(pulse, np.arange(2 * n_steps + 1) * (dt / 2.0)))

    def a_t(v: np.ndarray, s: float) -> np.ndarray:
        out = rp_t[0] @ v
        for p in range(1, len(rp_t)):
            if s != 0.0:
                out += (s**p) * (rp_t[p] @ v)
        return out

    # backward sweep for v(t1), accumulating the correlation integral
    v = np.zeros(xs.shape[1])
    integrand = np.empty(n_steps + 1)
    integrand[n_steps] = f[n_steps] * float(v @ (m_meas @ xs[n_steps]))
    for k in range(n_steps - 1, -1, -1):
        s0, sm, s1 = s_half[2 * k + 2], s_half[2 * k + 1], s_half[2 * k]
        f0, f1 = f[k + 1], f[k]
        fm = 0.5 * (f0 + f1)
        k1 = f0 * w_y + a_t(v, s0)
        k2 = fm * w_y + a_t(v + 0.5 * dt * k1, sm)
        k3 = fm * w_y + a_t(v + 0.5 * dt * k2, sm)
        k4 = f1 * w_y + a_t(v + dt * k3, s1)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        integrand[k] = f[k] * float(v @ (m_meas @ xs[k]))

    e_y = _trapz(f * forward.y_mean, dt)
    j_corr = _trapz(integrand, dt)
    shot = _trapz(f * f, dt)
    return SnrResult(eta=model.config.eta, e_y=e_y, j_corr=j_corr, shot=shot)


def _snr_fock(
    model: FockModel,
    pulse,
    t_end: float,
    filter_values: np.ndarray,
    dt: float,
    n_photon: int,
    forward,
) -> SnrResult:
    from .me import hierarchy_source_superops

    ts = time_grid(t_end, dt)
    f = np.asarray(filter_values, dtype=float)
    if f.shape != ts.shape:
        raise ValueError(f"filter has {f.shape[0]} samples, grid has {ts.shape[0]}")
    n_steps = len(ts) - 1
    stride = next(s for s in (10, 5, 2, 1) if n_steps % s == 0)
    if forward is None:
        forward = evolve_fock_me(
            model, pulse, t_end, dt=dt, n_photon=n_photon,
            keep_states=True, stride=stride,
        )
    if forward.blocks is None:
        raise ValueError("forward trajectory must be run with keep_states")
    stride = forward.stride
    if n_steps % stride != 0:
        raise ValueError("forward snapshot stride does not divide the grid")

    r_t = model.real_superops()[0].T.copy()
    sp, sm = hierarchy_source_superops(model)
    sp_t, sm_t = sp.T.copy(), sm.T.copy()
    m_meas = model.measurement_superop()
    w_y = model.weights(model.y_op)
    xi_half = np.asarray(pulse.xi(np.arange(2 * n_steps + 1) * (dt / 2.0)), float)
    if n_photon == 0:
        xi_half = np.zeros_like(xi_half)

    def gen_t(v: np.ndarray, xi: float, fval: float) -> np.ndarray:
        # transpose of the hierarchy generator, plus the filter source on
        # the component the current reads out
        out = r_t @ v
        if xi != 0.0:
            out[:, 0] += (0.5 * xi) * (sp_t @ v[:, 1] + sm_t @ v[:, 2])
            out[:, 1] += xi * (sp_t @ v[:, 3])
            out[:, 2] += xi * (sm_t @ v[:, 3])
        out[:, 3] += fval * w_y
        return out

    n_nodes = n_steps // stride + 1
    integrand = np.zeros(n_nodes)
    v = np.zeros((model.dim**2, 4))
    for k in range(n_steps - 1, -1, -1):
        x0, xm, x1 = xi_half[2 * k + 2], xi_half[2 * k + 1], xi_half[2 * k]
        f0, f1 = f[k + 1], f[k]
        fm = 0.5 * (f0 + f1)
        k1 = gen_t(v, x0, f0)
        k2 = gen_t(v + 0.5 * dt * k1, xm, fm)
        k3 = gen_t(v + 0.5 * dt * k2, xm, fm)
        k4 = gen_t(v + dt * k3, x1, f1)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if k % stride == 0:
            node = k // stride
            integrand[node] = f[k] * float(np.sum(v * (m_meas @ forward.blocks[node])))

    e_y = _trapz(f * forward.y_mean, dt)
    j_corr = _trapz(integrand, dt * stride)
    shot = _trapz(f * f, dt)
    return SnrResult(eta=model.config.eta, e_y=e_y, j_corr=j_corr, shot=shot)


@dataclass(frozen=True)
class TwoTimeKernel:
    """Current autocorrelation on a square time grid.

    values holds the smooth part eta * Tr[y_op Y(t1 -> t2)], symmetrized;
    the singular ridge delta_mass * delta(t2 - t1) is kept separate so
    quadratures stay exact.  values is real symmetric for any physical model.
    """

    ts: np.ndarray
    values: np.ndarray
    delta_mass: float
    eta: float

    def quad_weights(self) -> np.ndarray:
        dt = self.ts[1] - self.ts[0]
        w = np.full(len(self.ts), dt)
        w[0] = w[-1] = 0.5 * dt
        return w

    def filtered_var(self, filter_values: np.ndarray) -> float:
        """Var of S = int f j dt under vacuum-free kernel quadrature."""
        f = np.asarray(filter_values, dtype=float)
        if f.shape != self.ts.shape:
            raise ValueError("filter grid mismatch")
        fw = f * self.quad_weights()
        smooth = float(fw @ self.values @ fw)
        shot = self.delta_mass * float(np.sum(self.quad_weights() * f * f))
        return smooth + shot

    def to_csv(self, path) -> None:
        n = len(self.ts)
        t1 = np.repeat(self.ts, n)
        t2 = np.tile(self.ts, n)
        np.savetxt(
            path,
            np.column_stack([t1, t2, self.values.reshape(-1)]),
            delimiter=",",
            header=f"t1,t2,value\n# delta_mass={self.delta_mass},eta={self.eta}",
            comments="",
        )


def _kernel_grid(t_end: float, dt: float, stride: int):
    ts = time_grid(t_end, dt)
    n_steps = len(ts) - 1
    if n_steps % stride != 0:
        raise ValueError("stride must divide the number of steps")
    rows = np.arange(0, n_steps + 1, stride)
    return ts, n_steps, rows


def two_time_cavity(
    model: CavityModel,
    pulse,
    t_end: float,
    *,
    dt: float = 1e-3,
    stride: int = 20,
    n_photon: int = 1,
) -> TwoTimeKernel:
    """Tabulated kernel for the single-mode source model.

    Rows share propagation: row i is seeded with M rho(t1_i) when the sweep
    reaches t1_i and all live rows advance through the same RK4 step.
    """
    ts, n_steps, rows = _kernel_grid(t_end, dt, stride)
    forward = evolve_cavity_me(
        model, pulse, t_end, dt=dt, n_photon=n_photon, keep_states=True
    )
    rp = model.real_superops()
    m_meas = model.measurement_superop()
    w_y = model.weights(model.y_op)
    s_half = np.sqrt(kappa_from_xi(pulse, np.arange(2 * n_steps + 1) * (dt / 2.0)))

    def gen(y: np.ndarray, s: float) -> np.ndarray:
        out = rp[0] @ y
        for p in range(1, len(rp)):
            if s != 0.0:
                out += (s**p) * (rp[p] @ y)
        return out

    n_rows = len(rows)
    d2 = model.dim**2
    y_rows = np.zeros((d2, n_rows))
    n_live = 0
    eta = model.config.eta
    values = np.zeros((n_rows, n_rows))
    for k in range(n_steps + 1):
        if n_live < n_rows and k == rows[n_live]:
            y_rows[:, n_live] = m_meas @ forward.xs[k]
            n_live += 1
        if k % stride == 0:
            i2 = k // stride
            values[:n_live, i2] = eta * (w_y @ y_rows[:, :n_live])
        if k == n_steps:
            break
        live = y_rows[:, :n_live]
        s0, sm, s1 = s_half[2 * k], s_half[2 * k + 1], s_half[2 * k + 2]
        k1 = gen(live, s0)
        k2 = gen(live + 0.5 * dt * k1, sm)
        k3 = gen(live + 0.5 * dt * k2, sm)
        k4 = gen(live + dt * k3, s1)
        y_rows[:, :n_live] = live + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    iu = np.triu_indices(n_rows, 1)
    values[(iu[1], iu[0])] = values[iu]
    values = 0.5 * (values + values.T)
    return TwoTimeKernel(ts=ts[rows], values=values, delta_mass=1.0, eta=eta)


def two_time_fock(
    model: FockModel,
    pulse,
    t_end: float,
    *,
    dt: float = 1e-3,
    stride: int = 20,
    n_photon: int = 1,
) -> TwoTimeKernel:
    """Tabulated kernel with the wavepacket treated exactly.

    Each row carries a full four-component regression hierarchy seeded from
    the forward hierarchy at t1 and driven by the same envelope sources in
    t2; the kernel reads off the top component.
    """
    from .me import hierarchy_source_superops

    ts, n_steps, rows = _kernel_grid(t_end, dt, stride)
    forward = evolve_fock_me(
        model, pulse, t_end, dt=dt, n_photon=n_photon,
        keep_states=True, stride=stride,
    )
    r = model.real_superops()[0]
    sp, sm = hierarchy_source_superops(model)
    m_meas = model.measurement_superop()
    w_y = model.weights(model.y_op)
    xi_half = np.asarray(pulse.xi(np.arange(2 * n_steps + 1) * (dt / 2.0)), float)
    if n_photon == 0:
        xi_half = np.zeros_like(xi_half)

    d2 = model.dim**2
    n_rows = len(rows)
    y_rows = np.zeros((d2, 4, n_rows))
    n_live = 0
    eta = model.config.eta
    values = np.zeros((n_rows, n_rows))

    def gen(y: np.ndarray, xi: float) -> np.ndarray:
        m = y.shape[2]
        out = (r @ y.reshape(d2, 4 * m)).reshape(d2, 4, m)
        if xi != 0.0:
            s_pa = (sp @ y[:, [0, 1], :].reshape(d2, 2 * m)).reshape(d2, 2, m)
            s_mb = (sm @ y[:, [0, 2], :].reshape(d2, 2 * m)).reshape(d2, 2, m)
            out[:, 1, :] += (0.5 * xi) * s_pa[:, 0, :]
            out[:, 2, :] += (0.5 * xi) * s_mb[:, 0, :]
            out[:, 3, :] += xi * (s_pa[:, 1, :] + s_mb[:, 1, :])
        return out

    for k in range(n_steps + 1):
        if n_live < n_rows and k == rows[n_live]:
            y_rows[:, :, n_live] = m_meas @ forward.blocks[k // stride]
            n_live += 1
        if k % stride == 0:
            values[:n_live, k // stride] = eta * (w_y @ y_rows[:, 3, :n_live])
        if k == n_steps:
            break
        live = y_rows[:, :, :n_live]
        x0, xm, x1 = xi_half[2 * k], xi_half[2 * k + 1], xi_half[2 * k + 2]
        k1 = gen(live, x0)
        k2 = gen(live + 0.5 * dt * k1, xm)
        k3 = gen(live + 0.5 * dt * k2, xm)
        k4 = gen(live + dt * k3, x1)
        y_rows[:, :, :n_live] = live + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    iu = np.triu_indices(n_rows, 1)
    values[(iu[1], iu[0])] = values[iu]
    values = 0.5 * (values + values.T)
    return TwoTimeKernel(ts=ts[rows], values=values, delta_mass=1.0, eta=eta)


def snr_from_kernel(
    kernel: TwoTimeKernel,
    filter_values: np.ndarray,
    mean_y: np.ndarray,
) -> float:
    """SNR by kernel quadrature; mean_y on the kernel grid."""
    f = np.asarray(filter_values, dtype=float)
    w = kernel.quad_weights()
    mean1 = np.sqrt(kernel.eta) * float(np.sum(w * f * mean_y))
    var1 = kernel.filtered_var(f) - mean1**2
    var0 = kernel.delta_mass * float(np.sum(w * f * f))
    return mean1 / np.sqrt(var1 + var0)
