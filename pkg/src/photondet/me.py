"""Deterministic (unconditional) evolution engines.

Fixed-step RK4 throughout, with the time-dependent envelope evaluated at the
substage times.  Reduced-space models run in the real Hermitian-basis
representation (states are real coordinate vectors, the generator a small set
of real matrices, observables dot products); full-tensor-space models fall
back to direct d x d complex arithmetic through LiouvillianSpec.apply, which
avoids materializing superoperators that would not fit in memory.

The Fock-wavepacket hierarchy evolves (rho_00, rho_01, rho_11); rho_10 is
reconstructed as the adjoint of rho_01.  With the real envelope shapes used
here the off-diagonal block splits into two Hermitian components A, B with
rho_01 = A + iB, so the whole hierarchy stays in real arithmetic:

    dA/dt   = L A   + (xi/2) Sp rho_00
    dB/dt   = L B   + (xi/2) Sm rho_00
    drho_11 = L rho_11 + xi (Sp A + Sm B)

where Sp rho = [rho, Lam_10] + [Lam_01, rho] and Sm rho = i([rho, Lam_10] -
[Lam_01, rho]) are both Hermiticity-preserving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import realrep
from .pulses import kappa_from_xi
from .system import CavityModel, FockModel

TRACE_TOL = 1e-6


class IntegrationError(RuntimeError):
    """Raised when the fixed-step solution degrades past tolerance."""


def time_grid(t_end: float, dt: float) -> np.ndarray:
    n = int(round(t_end / dt))
    if n < 1:
        raise ValueError("time grid is empty")
    return np.arange(n + 1) * dt


def _check_trace(trace: np.ndarray, dt: float, what: str):
    drift = np.abs(trace - 1.0).max()
    if drift > TRACE_TOL:
        raise IntegrationError(
            f"{what}: trace drifted by {drift:.2e} (tolerance {TRACE_TOL}); "
            f"rerun with a smaller step than dt={dt}"
        )


@dataclass
class CavityTrajectory:
    """Unconditional solution of the cavity-source master equation."""

    ts: np.ndarray
    y_mean: np.ndarray            # <y>(t)
    pexc: np.ndarray              # (n_times, n_transmons)
    trace: np.ndarray
    flux: np.ndarray              # control-line output flux <c_out^dag c_out>
    xs: np.ndarray | None = None  # real coordinates, (n_times, dim^2)
    rhos: np.ndarray | None = None  # complex states on the full tensor space

    @property
    def integrated_flux(self) -> np.ndarray:
        out = np.zeros_like(self.flux)
        out[1:] = np.cumsum(0.5 * (self.flux[1:] + self.flux[:-1]) * np.diff(self.ts))
        return out

    def state(self, i: int, model: CavityModel) -> np.ndarray:
        if self.rhos is not None:
            return self.rhos[i]
        return realrep.coords_to_matrix(self.xs[i], model.basis_transform, model.dim)


def _flux_weights(model, u) -> list[tuple[int, np.ndarray]]:
    return [(p, realrep.expectation_weights(w, u)) for p, w in model.control_flux_terms]


def evolve_cavity_me(
    model: CavityModel,
    pulse,
    t_end: float,
    *,
    dt: float = 1e-3,
    n_photon: int = 1,
    rho0: np.ndarray | None = None,
    keep_states: bool | None = None,
) -> CavityTrajectory:
    """RK4 solution recording <y>, per-transmon excitation, trace and flux."""
    ts = time_grid(t_end, dt)
    n_steps = len(ts) - 1
    s_half = np.sqrt(kappa_from_xi(pulse, np.arange(2 * n_steps + 1) * (dt / 2.0)))
    if rho0 is None:
        rho0 = model.initial_state(n_photon)
    if keep_states is None:
        keep_states = not model.space.full

    if model.space.full:
        return _evolve_cavity_direct(model, rho0, ts, s_half, dt, keep_states)

    u = model.basis_transform
    rp = model.real_superops()
    x = realrep.real_coords(rho0, u)
    w_y = model.weights(model.y_op)
    w_tr = realrep.trace_weights(model.dim, u)
    w_pexc = np.stack([model.weights(p) for p in model.pexc])
    w_flux = _flux_weights(model, u)

    def rhs(x, s):
        out = rp[0] @ x
        for p in range(1, len(rp)):
            if s != 0.0:
                out += (s**p) * (rp[p] @ x)
        return out

    xs = np.empty((n_steps + 1, x.size)) if keep_states else None
    y_mean = np.empty(n_steps + 1)
    pexc = np.empty((n_steps + 1, len(model.pexc)))
    trace = np.empty(n_steps + 1)
    flux = np.empty(n_steps + 1)

    def record(i, x, s):
        if xs is not None:
            xs[i] = x
        y_mean[i] = w_y @ x
        pexc[i] = w_pexc @ x
        trace[i] = w_tr @ x
        flux[i] = sum((s**p) * (w @ x) for p, w in w_flux)

    record(0, x, s_half[0])
    h = dt
    for i in range(n_steps):
        s0, sm, s1 = s_half[2 * i], s_half[2 * i + 1], s_half[2 * i + 2]
        k1 = rhs(x, s0)
        k2 = rhs(x + 0.5 * h * k1, sm)
        k3 = rhs(x + 0.5 * h * k2, sm)
        k4 = rhs(x + h * k3, s1)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        record(i + 1, x, s1)

    _check_trace(trace, dt, "cavity-source evolution")
    return CavityTrajectory(ts, y_mean, pexc, trace, flux, xs=xs)


def _evolve_cavity_direct(model, rho0, ts, s_half, dt, keep_states):
    """Full-tensor-space path: direct complex generator application."""
    lio = model.lio
    rho = rho0.astype(complex)
    n_steps = len(ts) - 1
    rhos = np.empty((n_steps + 1, model.dim, model.dim), complex) if keep_states else None
    y_mean = np.empty(n_steps + 1)
    pexc = np.empty((n_steps + 1, len(model.pexc)))
    trace = np.empty(n_steps + 1)
    flux = np.empty(n_steps + 1)

    def record(i, rho, s):
        if rhos is not None:
            rhos[i] = rho
        y_mean[i] = np.trace(model.y_op @ rho).real
        pexc[i] = [np.trace(p @ rho).real for p in model.pexc]
        trace[i] = np.trace(rho).real
        flux[i] = sum((s**p) * np.trace(w @ rho).real for p, w in model.control_flux_terms)

    record(0, rho, s_half[0])
    for i in range(n_steps):
        s0, sm, s1 = s_half[2 * i], s_half[2 * i + 1], s_half[2 * i + 2]
        k1 = lio.apply(rho, s0)
        k2 = lio.apply(rho + 0.5 * dt * k1, sm)
        k3 = lio.apply(rho + 0.5 * dt * k2, sm)
        k4 = lio.apply(rho + dt * k3, s1)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        record(i + 1, rho, s1)

    _check_trace(trace, dt, "cavity-source evolution (full space)")
    return CavityTrajectory(ts, y_mean, pexc, trace, flux, rhos=rhos)


# Fock-wavepacket hierarchy


def hierarchy_source_superops(model: FockModel) -> tuple[np.ndarray, np.ndarray]:
    """Real matrices of Sp: rho -> [rho, Lam10] + [Lam01, rho] and
    Sm: rho -> i([rho, Lam10] - [Lam01, rho])."""
    d = model.dim
    eye = np.eye(d)
    l01, l10 = model.lambda_01, model.lambda_10
    # vec([rho, Lam10]) and vec([Lam01, rho]) in column-stacking convention
    k1 = np.kron(l10.T, eye) - np.kron(eye, l10)
    k2 = np.kron(eye, l01) - np.kron(l01.T, eye)
    u = model.basis_transform
    return realrep.real_superop(k1 + k2, u), realrep.real_superop(1j * (k1 - k2), u)


@dataclass
class FockTrajectory:
    """Unconditional solution of the single-photon hierarchy.

    States are stored as real coordinate blocks X[i] with columns
    (rho_00, A, B, rho_11), rho_01 = A + iB, possibly subsampled by `stride`.
    """

    ts: np.ndarray
    y_mean: np.ndarray
    pexc: np.ndarray
    trace: np.ndarray             # trace of rho_11
    trace_00: np.ndarray
    flux: np.ndarray              # output flux |xi_out|^2 on the control line
    stride: int = 1
    blocks: np.ndarray | None = None   # (n_stored, dim^2, 4)

    @property
    def integrated_flux(self) -> np.ndarray:
        out = np.zeros_like(self.flux)
        out[1:] = np.cumsum(0.5 * (self.flux[1:] + self.flux[:-1]) * np.diff(self.ts))
        return out

    def hierarchy(self, i_stored: int, model: FockModel) -> dict:
        u, d = model.basis_transform, model.dim
        x = self.blocks[i_stored]
        a = realrep.coords_to_matrix(x[:, 1], u, d)
        b = realrep.coords_to_matrix(x[:, 2], u, d)
        return {
            (0, 0): realrep.coords_to_matrix(x[:, 0], u, d),
            (0, 1): a + 1j * b,
            (1, 0): a - 1j * b,
            (1, 1): realrep.coords_to_matrix(x[:, 3], u, d),
        }


def evolve_fock_me(
    model: FockModel,
    pulse,
    t_end: float,
    *,
    dt: float = 1e-3,
    n_photon: int = 1,
    keep_states: bool = False,
    stride: int = 10,
) -> FockTrajectory:
    """RK4 solution of the coupled hierarchy; expectations from rho_11."""
    if model.space.full:
        raise ValueError("hierarchy engine runs in the reduced representation")
    ts = time_grid(t_end, dt)
    n_steps = len(ts) - 1
    xi_half = pulse.xi(np.arange(2 * n_steps + 1) * (dt / 2.0))
    if np.iscomplexobj(xi_half):
        raise ValueError("hierarchy engine expects a real envelope")
    if n_photon == 0:
        xi_half = np.zeros_like(xi_half)
    elif n_photon != 1:
        raise ValueError("single-photon wavepackets only")

    u = model.basis_transform
    r = model.real_superops()[0]
    sp, sm = hierarchy_source_superops(model)
    w_y = model.weights(model.y_op)
    w_tr = realrep.trace_weights(model.dim, u)
    w_pexc = np.stack([model.weights(p) for p in model.pexc])
    # output flux |xi_out|^2 = E11[Lam10 Lam01] + 2 xi Re E01[Lam01] + xi^2
    w_num = model.weights(model.lambda_10 @ model.lambda_01)
    w01 = realrep.expectation_weights(model.lambda_01, u)
    w01_re, w01_im = w01.real.copy(), w01.imag.copy()

    x0 = realrep.real_coords(model.ground_state(), u)
    x = np.zeros((x0.size, 4))
    x[:, 0] = x0
    x[:, 3] = x0

    def rhs(x, xi):
        out = r @ x
        if xi != 0.0:
            spa = sp @ x[:, [0, 1]]   # Sp rho00, Sp A
            smb = sm @ x[:, [0, 2]]   # Sm rho00, Sm B
            out[:, 1] += (0.5 * xi) * spa[:, 0]
            out[:, 2] += (0.5 * xi) * smb[:, 0]
            out[:, 3] += xi * (spa[:, 1] + smb[:, 1])
        return out

    n_stored = n_steps // stride + 1 if keep_states else 0
    blocks = np.empty((n_stored, x0.size, 4)) if keep_states else None
    y_mean = np.empty(n_steps + 1)
    pexc = np.empty((n_steps + 1, len(model.pexc)))
    trace = np.empty(n_steps + 1)
    trace_00 = np.empty(n_steps + 1)
    flux = np.empty(n_steps + 1)

    def record(i, x, xi):
        if keep_states and i % stride == 0:
            blocks[i // stride] = x
        x11 = x[:, 3]
        y_mean[i] = w_y @ x11
        pexc[i] = w_pexc @ x11
        trace[i] = w_tr @ x11
        trace_00[i] = w_tr @ x[:, 0]
        cross = w01_re @ x[:, 1] + w01_im @ x[:, 2]
        flux[i] = w_num @ x11 + 2.0 * xi * cross + xi * xi

    record(0, x, xi_half[0])
    h = dt
    for i in range(n_steps):
        xi0, xim, xi1 = xi_half[2 * i], xi_half[2 * i + 1], xi_half[2 * i + 2]
        k1 = rhs(x, xi0)
        k2 = rhs(x + 0.5 * h * k1, xim)
        k3 = rhs(x + 0.5 * h * k2, xim)
        k4 = rhs(x + h * k3, xi1)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        record(i + 1, x, xi1)

    _check_trace(trace, dt, "hierarchy evolution (rho_11)")
    _check_trace(trace_00, dt, "hierarchy evolution (rho_00)")
    return FockTrajectory(
        ts, y_mean, pexc, trace, trace_00, flux, stride=stride, blocks=blocks
    )


def trajectory_csv(traj, path):
    """Write (t, y_mean, pexc_1..N, trace, flux, integrated_flux)."""
    n = traj.pexc.shape[1]
    cols = [traj.ts, traj.y_mean] + [traj.pexc[:, k] for k in range(n)]
    cols += [traj.trace, traj.flux, traj.integrated_flux]
    header = ",".join(
        ["t", "y_mean"] + [f"pexc_{k + 1}" for k in range(n)]
        + ["trace", "flux", "integrated_flux"]
    )
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="")
