"""Chain composition: configs, loss bookkeeping, and the assembled generator.

test_generator_matches_monolithic_form is the regression that matters: the
normal-form Liouvillian (merged dissipators + cascade couplings + effective
Hamiltonian) must agree with the textbook master equation assembled directly
from the composed network's channels, including circulator loss and dephasing.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_density_matrix
from photondet.hilbert import (
    HilbertSpace,
    cavity_lowering,
    level_projector,
    lowering_12,
    transmon_label,
)
from photondet.slh import evaluate_channel, source_cavity_triplet
from photondet.system import (
    ChainConfig,
    _compose_chain,
    add_dephasing,
    build_cavity_model,
    build_fock_model,
)


def _dissipator(l, rho):
    ld = l.conj().T
    return l @ rho @ ld - 0.5 * (ld @ l @ rho + rho @ ld @ l)


def test_config_defaults_and_validation():
    cfg = ChainConfig(gamma_c=(1.0, 1.9), omega_p=0.35)
    assert cfg.gamma_p == (2.0, 3.8)
    assert cfg.n_transmons == 2
    with pytest.raises(ValueError):
        ChainConfig(gamma_c=(), omega_p=0.3)
    with pytest.raises(ValueError):
        ChainConfig(gamma_c=(1.0,), omega_p=0.3, gamma_p=(2.0, 2.0))
    with pytest.raises(ValueError):
        ChainConfig(gamma_c=(0.0,), omega_p=0.3)
    with pytest.raises(ValueError):
        ChainConfig(gamma_c=(1.0,), omega_p=0.3, p_loss=1.0)
    with pytest.raises(ValueError):
        ChainConfig(gamma_c=(1.0,), omega_p=0.3, eta=0.0)
    with pytest.raises(ValueError):
        ChainConfig(gamma_c=(1.0,), omega_p=0.3, gamma_phi=-0.1)


def test_probe_drive_in_hamiltonian():
    # the displaced probe folds into H as omega_p sqrt(gamma_p) (L12 + L21)
    cfg = ChainConfig(gamma_c=(1.0,), omega_p=0.35)
    model = build_cavity_model(cfg)
    lam = model.space.site_operator(transmon_label(1), lowering_12())
    expect = 0.35 * np.sqrt(2.0) * (lam + lam.conj().T)
    assert_allclose(model.lio.hamiltonian_matrix(0.9), expect, atol=1e-13)


def test_lossy_chain_conserves_source_coupling():
    # the photon leaves the source exactly once however many ports scatter it
    cfg = ChainConfig(gamma_c=(1.0, 1.9, 2.2), omega_p=0.35, p_loss=0.07)
    space = HilbertSpace.single_excitation_space(3, source_cavity=True)
    net = _compose_chain(space, cfg, source_cavity_triplet(space))
    a = space.site_operator("source", cavity_lowering())
    total = 0.0
    for ch in net.couplings:
        for m in ch:
            if m.op is not None and np.array_equal(m.op, a):
                assert m.power == 1
                total += abs(m.coeff) ** 2
    assert abs(total - 1.0) < 1e-13


@pytest.mark.parametrize("p_loss", [0.0, 0.08])
def test_probe_output_weights(p_loss):
    # transmon j's probe emission crosses N - j downstream circulators
    cfg = ChainConfig(gamma_c=(1.0, 1.9, 2.2), omega_p=0.35, p_loss=p_loss)
    model = build_cavity_model(cfg)
    t = np.sqrt(1.0 - p_loss)
    expect = sum(
        t ** (3 - j) * np.sqrt(cfg.gamma_p[j - 1])
        * model.space.site_operator(transmon_label(j), lowering_12())
        for j in (1, 2, 3)
    )
    assert_allclose(model.c_probe, expect, atol=1e-13)


@pytest.mark.parametrize("p_loss,gamma_phi", [(0.0, 0.0), (0.1, 0.0), (0.08, 0.05)])
def test_generator_matches_monolithic_form(p_loss, gamma_phi):
    cfg = ChainConfig(
        gamma_c=(1.0, 1.6),
        omega_p=0.4,
        delta_c=0.15,
        delta_p=-0.2,
        p_loss=p_loss,
        gamma_phi=gamma_phi,
    )
    model = build_cavity_model(cfg)
    space = model.space
    net = _compose_chain(space, cfg, source_cavity_triplet(space))
    rng = np.random.default_rng(17)
    rho = random_density_matrix(rng, space.dim)
    for s in (0.0, 0.45, 1.2):
        h = net.hamiltonian_matrix(s)
        expect = -1j * (h @ rho - rho @ h)
        for ch in range(net.n_channels):
            expect += _dissipator(evaluate_channel(net.couplings[ch], space.dim, s), rho)
        for k in (1, 2):
            op = 2.0 * space.site_operator(transmon_label(k), level_projector(1)) \
                + 4.0 * space.site_operator(transmon_label(k), level_projector(2))
            expect += (gamma_phi / 2.0) * _dissipator(op, rho)
        assert_allclose(model.lio.apply(rho, s), expect, atol=1e-12)


def test_fock_model_static_generator():
    cfg = ChainConfig(gamma_c=(1.0, 1.9), omega_p=0.4)
    model = build_fock_model(cfg)
    assert model.lio.max_power == 0
    expect = sum(
        np.sqrt(cfg.gamma_c[j])
        * model.space.site_operator(transmon_label(j + 1), np.array(
            [[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex))
        for j in range(2)
    )
    assert_allclose(model.lambda_01, expect, atol=1e-13)
    assert_allclose(model.lambda_10, model.lambda_01.conj().T, atol=1e-13)


def test_fock_model_rejects_loss():
    with pytest.raises(ValueError):
        build_fock_model(ChainConfig(gamma_c=(1.0,), omega_p=0.4, p_loss=0.05))


def test_measurement_superop_action():
    cfg = ChainConfig(gamma_c=(1.0,), omega_p=0.35, phi=np.pi / 2)
    model = build_cavity_model(cfg)
    rng = np.random.default_rng(4)
    rho = random_density_matrix(rng, model.dim)
    u = model.basis_transform
    from photondet import realrep

    x = realrep.real_coords(rho, u)
    out = realrep.coords_to_matrix(model.measurement_superop() @ x, u, model.dim)
    z = np.exp(1j * cfg.phi)
    expect = z * model.c_probe @ rho + np.conj(z) * rho @ model.c_probe.conj().T
    assert_allclose(out, expect, atol=1e-12)
    # and tr of that is <y>
    assert_allclose(np.trace(out).real,
                    np.trace(model.y_op @ rho).real, atol=1e-12)


def test_initial_states():
    cfg = ChainConfig(gamma_c=(1.0, 1.9), omega_p=0.35)
    model = build_cavity_model(cfg)
    r1 = model.initial_state(1)
    r0 = model.initial_state(0)
    assert np.trace(r1) == 1.0 and np.trace(r0) == 1.0
    assert_allclose(np.trace(model.number_op @ r1), 1.0, atol=1e-14)
    assert_allclose(np.trace(model.number_op @ r0), 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        model.initial_state(2)
    fock = build_fock_model(cfg)
    hier = fock.initial_hierarchy()
    assert_allclose(hier[(0, 0)], hier[(1, 1)], atol=0)
    assert not hier[(0, 1)].any()


def test_add_dephasing_changes_generator():
    cfg = ChainConfig(gamma_c=(1.0,), omega_p=0.35)
    base = build_cavity_model(cfg)
    deph = add_dephasing(base, 0.2)
    assert deph.config.gamma_phi == 0.2
    rng = np.random.default_rng(2)
    rho = random_density_matrix(rng, base.dim)
    op = 2.0 * base.space.site_operator(transmon_label(1), level_projector(1)) \
        + 4.0 * base.space.site_operator(transmon_label(1), level_projector(2))
    diff = deph.lio.apply(rho, 0.3) - base.lio.apply(rho, 0.3)
    assert_allclose(diff, 0.1 * _dissipator(op, rho), atol=1e-12)
