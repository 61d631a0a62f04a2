"""Detection statistics on filtered signals, plus the parameter search."""

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy.special import ndtr

from photondet import detect
from photondet.sme import HomodyneRecord


def _record(samples, dt=1e-3):
    return HomodyneRecord(
        seed=0, dt=dt, samples=np.asarray(samples, float),
        n_photon=1, eta=1.0, phi=np.pi / 2,
    )


# ---------------------------------------------------------------------------
# filters and signals

def test_boxcar_sampling():
    f = detect.boxcar(1.0, 3.0)
    ts = np.array([0.5, 1.0, 2.0, 3.0, 3.5])
    assert_allclose(f.sample(ts), [0.0, 1.0, 1.0, 1.0, 0.0])
    assert abs(f.shot(1e-3, 5.0) - 2.0) < 2e-3


def test_matched_filter_normalization():
    ts = np.linspace(0.0, 10.0, 101)
    mean_j = -3.0 * np.exp(-((ts - 5.0) ** 2))
    f = detect.matched(ts, mean_j)
    assert np.abs(f.sample(ts)).max() == 1.0
    # shape is preserved up to the scale
    assert_allclose(f.sample(ts), mean_j / 3.0, atol=1e-12)


def test_filter_validation():
    with pytest.raises(ValueError):
        detect.boxcar(3.0, 1.0)
    with pytest.raises(ValueError):
        detect.FilterSpec("matched", 0.0, 1.0)
    with pytest.raises(ValueError):
        detect.FilterSpec("hann", 0.0, 1.0)
    with pytest.raises(ValueError):
        detect.matched(np.array([0.0, 1.0]), np.array([0.0, 0.0]))


def test_signal_linearity_and_window_check():
    rng = np.random.default_rng(0)
    samples = rng.normal(size=2000)
    rec = _record(samples)
    s_full = detect.signal(rec, detect.boxcar(0.0, 2.0))
    s_a = detect.signal(rec, detect.boxcar(0.0, 1.0))
    s_b = detect.signal(rec, detect.boxcar(1.0, 2.0))
    # windows overlap in the single shared sample at t = 1.0
    overlap = samples[1000] * 1e-3
    assert abs(s_a + s_b - overlap - s_full) < 1e-12
    with pytest.raises(ValueError):
        detect.signal(rec, detect.boxcar(1.0, 4.0))


def test_filter_bank_shape():
    bank = detect.filter_bank(
        [detect.boxcar(0.0, 1.0), detect.boxcar(1.0, 2.0)], 2.0, 1e-3
    )
    assert bank.shape == (2, 2000)


# ---------------------------------------------------------------------------
# SNR estimates

def test_snr_empirical_synthetic_normals():
    rng = np.random.default_rng(11)
    n = 4000
    s1 = rng.normal(2.0, np.sqrt(4.5), n)
    s0 = rng.normal(0.0, 2.0, n)
    out = detect.snr_empirical(s1, s0, shot=4.0, n_boot=200)
    expect = 2.0 / np.sqrt(8.5)
    assert abs(out.main - expect) < 4 * out.se_main
    assert abs(out.sym - expect) < 4 * out.se_sym
    assert 0.0 < out.se_sym < 0.05
    assert out.n_boot == 200


def test_snr_empirical_identical_classes():
    rng = np.random.default_rng(1)
    s = rng.normal(size=100)
    out = detect.snr_empirical(s, s, shot=1.0, n_boot=50)
    assert out.sym == 0.0
    with pytest.raises(ValueError):
        detect.snr_empirical(np.array([1.0]), s, shot=1.0)


def test_fit_sqrtN_exact():
    ns = np.arange(1, 9)
    assert abs(detect.fit_sqrtN(ns, 0.7 * np.sqrt(ns)) - 0.7) < 1e-14
    with pytest.raises(ValueError):
        detect.fit_sqrtN([1, 2], [0.1, 0.2])


@given(st.floats(0.1, 5.0), st.integers(0, 1000))
def test_fit_sqrtN_scale_equivariant(scale, seed):
    rng = np.random.default_rng(seed)
    ns = np.arange(1, 7)
    snrs = 0.6 * np.sqrt(ns) + rng.normal(0, 0.05, 6)
    assert_allclose(detect.fit_sqrtN(ns, scale * snrs),
                    scale * detect.fit_sqrtN(ns, snrs), rtol=1e-12)
    lstsq = np.linalg.lstsq(np.sqrt(ns)[:, None], snrs, rcond=None)[0][0]
    assert_allclose(detect.fit_sqrtN(ns, snrs), lstsq, rtol=1e-10)


# ---------------------------------------------------------------------------
# thresholds and fidelity

def test_common_threshold_separated_classes():
    theta, p = detect.common_threshold([0.0, 1.0, 2.0], [10.0, 11.0])
    assert p == 1.0
    assert theta == 6.0  # tie broken toward the class-mean midpoint
    assert detect.fidelity_common([0.0, 1.0, 2.0], [10.0, 11.0]) == (1.0, 0.0)


def test_common_threshold_counts():
    s0 = [0.0, 1.0, 4.0]
    s1 = [2.0, 3.0, 5.0]
    theta, p = detect.common_threshold(s0, s1)
    # best single cut keeps 2/3 of each class correct
    below0 = np.mean(np.asarray(s0) < theta)
    above1 = np.mean(np.asarray(s1) > theta)
    assert_allclose(p, 0.5 * (below0 + above1), atol=1e-12)
    assert p == pytest.approx(5.0 / 6.0)


def test_pair_thresholds_zero_rejection_when_target_met():
    rng = np.random.default_rng(5)
    s0 = rng.normal(0.0, 1.0, 300)
    s1 = rng.normal(6.0, 1.0, 300)
    t0, t1, p, rej = detect.pair_thresholds(s0, s1, 0.99)
    assert rej == 0.0
    assert p >= 0.99
    assert t0 <= t1


def test_pair_thresholds_rejection_grows_with_target():
    rng = np.random.default_rng(6)
    s0 = rng.normal(0.0, 1.0, 800)
    s1 = rng.normal(1.5, 1.0, 800)
    out_low = detect.pair_thresholds(s0, s1, 0.90)
    out_high = detect.pair_thresholds(s0, s1, 0.97)
    assert out_low[3] < out_high[3]
    assert out_low[2] >= 0.90 and out_high[2] >= 0.97
    # accepted-sample fidelity matches a direct recount at the returned pair
    t0, t1, p, rej = out_high
    acc0 = (s0 <= t0).sum() + (s0 >= t1).sum()
    acc1 = (s1 <= t0).sum() + (s1 >= t1).sum()
    correct = (s0 <= t0).sum() + (s1 >= t1).sum()
    assert_allclose(p, correct / (acc0 + acc1), atol=1e-9)
    assert_allclose(rej, 1.0 - (acc0 + acc1) / 1600.0, atol=1e-9)


def test_pair_thresholds_unreachable():
    s = np.arange(10.0)
    with pytest.raises(ValueError):
        detect.pair_thresholds(s, s, 0.9)


def test_normal_fit_fidelity_equal_variance():
    assert_allclose(detect.normal_fit_fidelity(0.0, 1.0, 2.0, 1.0), ndtr(1.0),
                    atol=1e-12)


def test_normal_fit_fidelity_unequal_variance_is_optimal():
    m0, v0, m1, v1 = 0.0, 1.0, 3.0, 6.0
    p = detect.normal_fit_fidelity(m0, v0, m1, v1)
    thetas = np.linspace(m0, m1, 20_001)
    grid = 0.5 * (ndtr((thetas - m0) / np.sqrt(v0))
                  + 1.0 - ndtr((thetas - m1) / np.sqrt(v1)))
    assert p >= grid.max() - 1e-9
    assert p < detect.normal_fit_fidelity(m0, v0, m1, v0)  # extra spread hurts


def test_gaussian_inferred_fidelity_monte_carlo():
    assert detect.gaussian_inferred_fidelity(0.0) == 0.5
    rng = np.random.default_rng(2024)
    n = 1_000_000
    for snr in (0.7, 1.86):
        d = np.sqrt(2.0) * snr
        s1 = rng.normal(d, 1.0, n)
        s0 = rng.normal(0.0, 1.0, n)
        p_emp = 0.5 * ((s0 < d / 2).mean() + (s1 > d / 2).mean())
        assert abs(detect.gaussian_inferred_fidelity(snr) - p_emp) < 3e-3
    grid = [detect.gaussian_inferred_fidelity(s) for s in np.linspace(0, 3, 13)]
    assert all(b > a for a, b in zip(grid, grid[1:]))
    with pytest.raises(ValueError):
        detect.gaussian_inferred_fidelity(-0.1)


# ---------------------------------------------------------------------------
# sliding window

def test_sliding_window_full_span_equals_signal():
    rng = np.random.default_rng(3)
    rec = _record(rng.normal(size=3000))
    series = detect.sliding_window(rec, 3.0, 3.0)
    assert series.taus.shape == (1,)
    assert_allclose(series.values[0],
                    detect.signal(rec, detect.boxcar(0.0, 3.0)), atol=1e-10)


def test_sliding_window_noise_bound():
    # pure shot noise: every window stays within 4 sqrt(t_m) for this seed
    rng = np.random.default_rng(7)
    dt = 1e-3
    rec = _record(rng.normal(0.0, 1.0 / np.sqrt(dt), 12_000), dt=dt)
    series = detect.sliding_window(rec, 1.0, 1.0)
    assert np.abs(series.values).max() < 4.0
    assert len(series.taus) == 12


def test_sliding_window_finds_the_pulse():
    dt = 1e-3
    ts = np.arange(12_000) * dt
    bump = 3.0 * np.exp(-((ts - 5.0) ** 2) / 0.5)
    rec = _record(bump, dt=dt)
    series = detect.sliding_window(rec, 2.0, 0.1)
    assert abs(series.peak_tau - 4.0) <= 0.1
    with pytest.raises(ValueError):
        detect.sliding_window(rec, 13.0, 1.0)


# ---------------------------------------------------------------------------
# summaries

def test_summarize_and_exports(tmp_path):
    rng = np.random.default_rng(9)
    s0 = rng.normal(0.0, 2.0, 500)
    s1 = rng.normal(2.0, 2.1, 500)
    out = detect.summarize(s0, s1, shot=4.0, target_p=0.9, bins=40)
    assert out.counts0.sum() == 500
    assert out.counts1.sum() == 500
    assert len(out.bin_edges) == 41
    assert 0.5 <= out.p_common <= 1.0
    assert out.pair is not None and out.pair[2] >= 0.9

    jpath = tmp_path / "summary.json"
    out.to_json(jpath)
    data = json.loads(jpath.read_text())
    assert data["n0"] == 500 and data["n1"] == 500
    assert data["pair"]["p"] >= 0.9
    assert_allclose(data["snr_sym"], out.snr.sym, atol=1e-12)

    hpath = tmp_path / "hist.csv"
    out.histogram_csv(hpath)
    rows = np.loadtxt(hpath, delimiter=",", skiprows=1)
    assert rows.shape == (40, 4)
    assert rows[:, 2].sum() == 500 and rows[:, 3].sum() == 500


# ---------------------------------------------------------------------------
# optimizer

def test_optimizer_quadratic():
    def objective(p):
        return -((p["x"] - 0.3) ** 2) - 2.0 * (p["y"] + 0.2) ** 2

    out = detect.optimize_parameters(
        objective, {"x": 0.9, "y": 0.5},
        {"x": (-1.0, 1.0), "y": (-1.0, 1.0)},
    )
    assert not out.aborted
    assert abs(out.best["x"] - 0.3) < 1e-3
    assert abs(out.best["y"] + 0.2) < 1e-3
    assert out.value > -1e-5
    rerun = detect.optimize_parameters(
        objective, {"x": 0.9, "y": 0.5},
        {"x": (-1.0, 1.0), "y": (-1.0, 1.0)},
    )
    assert rerun.best == out.best  # fixed-seed restarts, fully deterministic


def test_optimizer_respects_bounds():
    def objective(p):
        return p["x"]  # pushes against the upper bound

    out = detect.optimize_parameters(objective, {"x": 0.0}, {"x": (-1.0, 0.75)})
    assert abs(out.best["x"] - 0.75) < 1e-6


def test_optimizer_aborts_on_nonfinite():
    out = detect.optimize_parameters(
        lambda p: float("nan"), {"x": 0.0}, {"x": (-1.0, 1.0)}
    )
    assert out.aborted
    assert out.value == -np.inf
    assert len(out.trace) >= 1
