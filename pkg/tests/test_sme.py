"""Stochastic trajectory engine: reproducibility, noise hygiene, and
consistency of the conditioned ensemble with the unconditional solution."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from photondet import detect, me, sme
from photondet.pulses import GaussianPulse
from photondet.system import ChainConfig, build_cavity_model, build_fock_model

GAUSS = GaussianPulse(0.8, 4.0, 12.0)
T_END = 12.0


def _cfg(n=1):
    return ChainConfig(gamma_c=(1.0, 1.9)[:n], omega_p=np.sqrt(0.12))


def _boxcar_bank(t_start=4.0, t_stop=8.0):
    return detect.filter_bank([detect.boxcar(t_start, t_stop)], T_END, 1e-3)


def test_batches_are_deterministic():
    model = build_cavity_model(_cfg())
    kw = dict(dt=1e-3, filters=_boxcar_bank())
    a = sme.run_batch(model, GAUSS, T_END, 8, 100, **kw)
    b = sme.run_batch(model, GAUSS, T_END, 8, 100, **kw)
    assert np.array_equal(a.signals, b.signals)
    assert np.array_equal(a.mean_y, b.mean_y)
    assert a.dw_stats == b.dw_stats
    assert a.rng_algorithm == "philox4x64"
    r1 = sme.simulate_trajectory(model, GAUSS, T_END, 123)
    r2 = sme.simulate_trajectory(model, GAUSS, T_END, 123)
    assert np.array_equal(r1.samples, r2.samples)


def test_chunk_size_does_not_change_results():
    model = build_cavity_model(_cfg())
    kw = dict(dt=1e-3, filters=_boxcar_bank())
    a = sme.run_batch(model, GAUSS, T_END, 32, 500, chunk=8, **kw)
    b = sme.run_batch(model, GAUSS, T_END, 32, 500, chunk=256, **kw)
    assert np.array_equal(a.signals, b.signals)
    assert_allclose(a.mean_y, b.mean_y, atol=1e-12)


def test_worker_count_does_not_change_results():
    model = build_cavity_model(_cfg())
    kw = dict(dt=1e-3, filters=_boxcar_bank(), chunk=8)
    a = sme.run_batch(model, GAUSS, T_END, 32, 500, workers=1, **kw)
    b = sme.run_batch(model, GAUSS, T_END, 32, 500, workers=2, **kw)
    assert np.array_equal(a.signals, b.signals)
    assert a.dw_stats == b.dw_stats


def test_noise_increment_statistics():
    model = build_cavity_model(_cfg())
    out = sme.run_batch(model, GAUSS, T_END, 64, 7000, filters=_boxcar_bank())
    s, sq, n = out.dw_stats
    assert n == 64 * 12000
    mean = s / n
    var = sq / n - mean**2
    assert abs(mean) < 4 * np.sqrt(1e-3 / n)
    assert abs(var / 1e-3 - 1.0) < 0.02


def test_vacuum_signal_moments():
    # no photon: the filtered signal is pure shot noise
    model = build_cavity_model(_cfg())
    out = sme.run_batch(model, GAUSS, T_END, 256, 40_000, n_photon=0,
                        filters=_boxcar_bank())
    s = out.valid_signals()[0]
    shot = 4.0  # integral of the squared boxcar over [4, 8]
    assert abs(s.mean()) < 4 * np.sqrt(shot / 256)
    assert 0.75 < s.var(ddof=1) / shot < 1.3


def test_ensemble_mean_matches_unconditional():
    model = build_cavity_model(_cfg())
    out = sme.run_batch(model, GAUSS, T_END, 400, 2000, filters=_boxcar_bank())
    ref = me.evolve_cavity_me(model, GAUSS, T_END).y_mean
    diff = out.mean_y - ref
    assert np.sqrt((diff**2).mean()) < 0.03
    assert np.abs(diff).max() < 0.08


def test_fock_and_cavity_unravelings_agree():
    # same physics, different source representation and different noise draws
    bank = _boxcar_bank()
    cav = sme.run_batch(build_cavity_model(_cfg()), GAUSS, T_END, 200, 3000,
                        filters=bank)
    fock = sme.run_batch(build_fock_model(_cfg()), GAUSS, T_END, 200, 9000,
                         filters=bank)
    a, b = cav.valid_signals()[0], fock.valid_signals()[0]
    se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    assert abs(a.mean() - b.mean()) < 4 * se


def test_signals_match_records():
    model = build_cavity_model(_cfg())
    filters = detect.filter_bank(
        [detect.boxcar(4.0, 8.0), detect.boxcar(0.0, 12.0)], T_END, 1e-3
    )
    out = sme.run_batch(model, GAUSS, T_END, 4, 300, filters=filters,
                        keep_records=True)
    for j, rec in enumerate(out.records):
        assert rec.seed == 300 + j
        assert len(rec.samples) == 12000
        for i in range(2):
            manual = np.sum(filters[i] * rec.samples) * 1e-3
            assert_allclose(out.signals[i, j], manual, atol=1e-10)


def test_record_csv(tmp_path):
    model = build_cavity_model(_cfg())
    rec = sme.simulate_trajectory(model, GAUSS, 2.0, 42, dt=1e-2)
    path = tmp_path / "record.csv"
    sme.record_csv(rec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,j"
    assert lines[1].startswith("# rng=philox4x64,seed=42")
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    assert data.shape == (200, 2)
    assert_allclose(data[:, 1], rec.samples, atol=1e-8)


def test_diverged_trajectories_are_flagged():
    # Euler step far past the stability limit of the probe relaxation
    model = build_cavity_model(ChainConfig(gamma_c=(3.8,), omega_p=np.sqrt(0.12)))
    out = sme.run_batch(model, GAUSS, T_END, 4, 0, dt=1.0, filters=None)
    assert out.n_invalid == 4
    assert not out.valid.any()


def test_input_validation():
    model = build_cavity_model(_cfg())
    with pytest.raises(ValueError):
        sme.run_batch(model, GAUSS, T_END, 0, 0)
    full = build_cavity_model(_cfg(), full=True)
    with pytest.raises(ValueError):
        sme.run_batch(full, GAUSS, T_END, 2, 0)
