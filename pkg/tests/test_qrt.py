"""Regression kernel and adjoint variance: three routes to the same moments.

The oracle here propagates the non-Hermitian regression matrix M rho(t1)
directly in complex arithmetic through LiouvillianSpec.apply, independently of
the batched real-representation row machinery under test.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from photondet import me, qrt
from photondet.pulses import GaussianPulse, kappa_from_xi
from photondet.system import ChainConfig, build_cavity_model, build_fock_model

GAUSS = GaussianPulse(0.8, 4.0, 12.0)
T_END = 12.0
DT = 1e-3


def _cfg(eta=1.0):
    return ChainConfig(gamma_c=(1.0,), omega_p=np.sqrt(0.12), eta=eta)


def _boxcar(ts, t_start=4.0, t_stop=8.0):
    return ((ts >= t_start) & (ts <= t_stop)).astype(float)


def _propagate_regression(model, pulse, rho, k_from, k_to, dt):
    """Complex RK4 of the generator applied to a non-Hermitian matrix."""
    s_half = np.sqrt(kappa_from_xi(pulse, np.arange(2 * k_to + 1) * (dt / 2.0)))
    for k in range(k_from, k_to):
        s0, sm, s1 = s_half[2 * k], s_half[2 * k + 1], s_half[2 * k + 2]
        k1 = model.lio.apply(rho, s0)
        k2 = model.lio.apply(rho + 0.5 * dt * k1, sm)
        k3 = model.lio.apply(rho + 0.5 * dt * k2, sm)
        k4 = model.lio.apply(rho + dt * k3, s1)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def test_kernel_matches_direct_propagation():
    model = build_cavity_model(_cfg())
    stride = 600
    kernel = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=stride)
    forward = me.evolve_cavity_me(model, GAUSS, T_END, dt=DT, keep_states=True)
    z = np.exp(1j * model.config.phi)
    for i1, i2 in ((5, 9), (3, 17)):
        rho1 = forward.state(i1 * stride, model)
        seed = z * model.c_probe @ rho1 + np.conj(z) * rho1 @ model.c_probe.conj().T
        prop = _propagate_regression(model, GAUSS, seed, i1 * stride, i2 * stride, DT)
        expect = model.config.eta * np.trace(model.y_op @ prop).real
        assert abs(kernel.values[i1, i2] - expect) < 1e-9
        assert abs(kernel.values[i2, i1] - expect) < 1e-9


def test_kernel_shape_and_symmetry():
    model = build_cavity_model(_cfg(eta=0.7))
    kernel = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=600)
    assert kernel.ts.shape == (21,)
    assert kernel.values.shape == (21, 21)
    assert np.array_equal(kernel.values, kernel.values.T)
    assert kernel.delta_mass == 1.0
    assert kernel.eta == 0.7


def test_vacuum_kernel_is_delta_only():
    model = build_cavity_model(_cfg())
    kernel = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=600,
                                 n_photon=0)
    assert np.abs(kernel.values).max() < 1e-12
    f = _boxcar(kernel.ts)
    shot = float(np.sum(kernel.quad_weights() * f * f))
    assert abs(kernel.filtered_var(f) - shot) < 1e-12


def test_kernel_stride_refinement():
    model = build_cavity_model(_cfg())
    coarse = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=600)
    fine = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=300)
    # node values are stride-independent; only the quadrature grid changes
    assert np.abs(coarse.values - fine.values[::2, ::2]).max() < 1e-11


def test_fock_kernel_matches_cavity():
    cav = qrt.two_time_cavity(build_cavity_model(_cfg()), GAUSS, T_END,
                              dt=DT, stride=150)
    fock = qrt.two_time_fock(build_fock_model(_cfg()), GAUSS, T_END,
                             dt=DT, stride=150)
    assert_allclose(cav.ts, fock.ts, atol=1e-12)
    assert np.abs(cav.values - fock.values).max() < 1e-4


def test_adjoint_matches_kernel_quadrature():
    model = build_cavity_model(_cfg())
    ts = me.time_grid(T_END, DT)
    res = qrt.snr_deterministic(model, GAUSS, T_END, _boxcar(ts), dt=DT)
    kernel = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=40)
    forward = me.evolve_cavity_me(model, GAUSS, T_END, dt=DT)
    snr_q = qrt.snr_from_kernel(kernel, _boxcar(kernel.ts), forward.y_mean[::40])
    assert abs(res.snr() - snr_q) < 2e-3


def test_fock_adjoint_matches_cavity():
    ts = me.time_grid(T_END, DT)
    f = _boxcar(ts)
    cav = qrt.snr_deterministic(build_cavity_model(_cfg()), GAUSS, T_END, f)
    fock = qrt.snr_deterministic(build_fock_model(_cfg()), GAUSS, T_END, f)
    assert abs(cav.e_y - fock.e_y) < 1e-4
    assert cav.shot == fock.shot
    assert abs(cav.snr() - fock.snr()) < 1e-3


def test_snr_is_analytic_in_eta():
    # one adjoint pass prices every efficiency; rebuilding must agree exactly
    ts = me.time_grid(T_END, DT)
    f = _boxcar(ts)
    full = qrt.snr_deterministic(build_cavity_model(_cfg(eta=1.0)), GAUSS, T_END, f)
    half = qrt.snr_deterministic(build_cavity_model(_cfg(eta=0.5)), GAUSS, T_END, f)
    assert_allclose(full.snr(0.5), half.snr(), rtol=1e-13)
    assert_allclose(full.signal_mean(0.5), half.signal_mean(), rtol=1e-13)
    etas = np.linspace(0.1, 1.0, 10)
    snrs = [full.snr(e) for e in etas]
    assert all(b > a for a, b in zip(snrs, snrs[1:]))
    # moment identities behind the quoted statistics
    assert full.signal_var(0.4) == full.shot + 0.8 * full.j_corr - 0.4 * full.e_y**2
    assert full.snr_main == full.snr_sub  # vacuum mean is exactly zero


def test_kernel_csv(tmp_path):
    model = build_cavity_model(_cfg())
    kernel = qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=1200)
    path = tmp_path / "kernel.csv"
    kernel.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t1,t2,value"
    assert lines[1] == "# delta_mass=1.0,eta=1.0"
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    assert data.shape == (121, 3)
    assert_allclose(data[:, 2].reshape(11, 11), kernel.values, atol=1e-8)


def test_grid_validation():
    model = build_cavity_model(_cfg())
    with pytest.raises(ValueError):
        qrt.two_time_cavity(model, GAUSS, T_END, dt=DT, stride=7)
    with pytest.raises(ValueError):
        qrt.snr_deterministic(model, GAUSS, T_END, np.ones(5))
