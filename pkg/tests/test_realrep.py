import numpy as np
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from conftest import random_density_matrix, random_hermitian
from photondet.realrep import (
    complex_coords,
    coords_to_matrix,
    expectation_weights,
    hermitian_basis,
    real_coords,
    real_superop,
    trace_weights,
)


@given(st.sampled_from([2, 3, 4, 9]))
def test_basis_is_unitary(dim):
    u = hermitian_basis(dim)
    assert_allclose(u.conj().T @ u, np.eye(dim * dim), atol=1e-13)


@given(st.integers(0, 10_000), st.sampled_from([2, 3, 5]))
def test_coords_round_trip(seed, dim):
    rng = np.random.default_rng(seed)
    u = hermitian_basis(dim)
    rho = random_density_matrix(rng, dim)
    x = real_coords(rho, u)
    assert x.dtype == np.float64
    assert_allclose(coords_to_matrix(x, u, dim), rho, atol=1e-13)


@given(st.integers(0, 10_000), st.sampled_from([2, 3, 5]))
def test_expectation_weights(seed, dim):
    rng = np.random.default_rng(seed)
    u = hermitian_basis(dim)
    rho = random_density_matrix(rng, dim)
    a = random_hermitian(rng, dim)
    w = expectation_weights(a, u)
    assert_allclose(w @ real_coords(rho, u), np.trace(a @ rho).real, atol=1e-12)


def test_trace_weights():
    dim = 4
    rng = np.random.default_rng(7)
    u = hermitian_basis(dim)
    rho = random_density_matrix(rng, dim)
    assert_allclose(trace_weights(dim, u) @ real_coords(rho, u), 1.0, atol=1e-13)


@given(st.integers(0, 10_000))
def test_real_superop_acts_like_complex(seed):
    # a Lindblad-type map in vec form stays real and reproduces the action
    rng = np.random.default_rng(seed)
    dim = 3
    u = hermitian_basis(dim)
    l = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    ld = l.conj().T
    eye = np.eye(dim)
    lv = (np.kron(eye, l) @ np.kron(ld.T, eye)
          - 0.5 * np.kron(eye, ld @ l) - 0.5 * np.kron((ld @ l).T, eye))
    r = real_superop(lv, u)
    assert r.dtype == np.float64
    rho = random_density_matrix(rng, dim)
    direct = l @ rho @ ld - 0.5 * (ld @ l @ rho + rho @ ld @ l)
    assert_allclose(coords_to_matrix(r @ real_coords(rho, u), u, dim), direct,
                    atol=1e-12)


def test_complex_coords_on_nonhermitian():
    # complex_coords must carry the full matrix, not just its Hermitian part
    rng = np.random.default_rng(3)
    dim = 3
    u = hermitian_basis(dim)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    z = complex_coords(m, u)
    back = (u @ z).reshape(dim, dim, order="F")
    assert_allclose(back, m, atol=1e-13)
