"""Turning homodyne records into detection decisions.

Everything here is classical statistics on the filtered signals
S = int f(t) j(t) dt: SNR estimates with bootstrap errors, threshold choices
(a single threshold, or a pair bracketing an inconclusive band that gets
rejected), Gaussian-inference shortcuts, the chi * sqrt(N) scaling fit, a
sliding window for asynchronous arrival, and a derivative-free parameter
optimizer driven by the deterministic SNR.

Conventions: class 0 is vacuum input, class 1 is one photon; equal priors.
snr_main divides the one-photon mean by the combined spread with the vacuum
variance replaced by its exact value (the shot noise int f^2 dt); snr_sym
uses sample statistics of both classes.  The two coincide in this model
because the vacuum current has zero mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .sme import HomodyneRecord


# ---------------------------------------------------------------------------
# filters

@dataclass(frozen=True)
class FilterSpec:
    """Weight function f(t), nonzero on [t_start, t_stop].

    kind "boxcar" is 1 on the window; "matched" and "custom" interpolate a
    stored table (for matched filters the table is the expected current, so
    the overall scale is irrelevant to any SNR and is normalized to unit
    peak).
    """

    kind: str
    t_start: float
    t_stop: float
    table_ts: np.ndarray | None = None
    table_values: np.ndarray | None = None

    def __post_init__(self):
        if not (self.t_stop > self.t_start >= 0.0):
            raise ValueError("need t_stop > t_start >= 0")
        if self.kind not in ("boxcar", "matched", "custom"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind != "boxcar" and self.table_ts is None:
            raise ValueError("tabulated filter needs a table")

    def sample(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        inside = (ts >= self.t_start) & (ts <= self.t_stop)
        if self.kind == "boxcar":
            return inside.astype(float)
        f = np.interp(ts, self.table_ts, self.table_values, left=0.0, right=0.0)
        return np.where(inside, f, 0.0)

    def shot(self, dt: float, t_end: float) -> float:
        """int f^2 dt on the simulation grid (t_m for a boxcar)."""
        n = int(round(t_end / dt))
        ts = np.arange(n + 1) * dt
        f = self.sample(ts)
        return float(np.trapezoid(f * f, dx=dt))


def boxcar(t_start: float, t_stop: float) -> FilterSpec:
    return FilterSpec("boxcar", t_start, t_stop)


def matched(ts, mean_j, t_start=None, t_stop=None) -> FilterSpec:
    """Filter proportional to the expected current E[j(t)]."""
    ts = np.asarray(ts, dtype=float)
    mean_j = np.asarray(mean_j, dtype=float)
    peak = np.abs(mean_j).max()
    if peak == 0.0:
        raise ValueError("mean current is identically zero")
    t0 = ts[0] if t_start is None else t_start
    t1 = ts[-1] if t_stop is None else t_stop
    return FilterSpec("matched", t0, t1, table_ts=ts, table_values=mean_j / peak)


def filter_bank(filters, t_end: float, dt: float) -> np.ndarray:
    """Stack filters sampled at step starts, for the trajectory engine."""
    n = int(round(t_end / dt))
    ts = np.arange(n) * dt
    return np.stack([f.sample(ts) for f in filters])


def signal(record: HomodyneRecord, filt: FilterSpec) -> float:
    """S = sum f(t_k) j_k dt over the record."""
    t_len = len(record.samples) * record.dt
    if filt.t_stop > t_len + record.dt:
        raise ValueError("filter window extends past the record")
    f = filt.sample(record.ts)
    return float(np.sum(f * record.samples) * record.dt)


# ---------------------------------------------------------------------------
# SNR estimates

@dataclass(frozen=True)
class EmpiricalSnr:
    main: float
    sym: float
    se_main: float
    se_sym: float
    n_boot: int


def _snr_pair(s1, s0, shot):
    m1, m0 = s1.mean(), s0.mean()
    v1, v0 = s1.var(ddof=1), s0.var(ddof=1)
    main = m1 / np.sqrt(v1 + shot)
    sym = (m1 - m0) / np.sqrt(v1 + v0)
    return main, sym


def snr_empirical(
    signals1: np.ndarray,
    signals0: np.ndarray,
    shot: float,
    *,
    n_boot: int = 500,
    seed: int = 12345,
) -> EmpiricalSnr:
    """Sample SNR in both conventions plus bootstrap standard errors."""
    s1 = np.asarray(signals1, float)
    s0 = np.asarray(signals0, float)
    if len(s1) < 2 or len(s0) < 2:
        raise ValueError("need at least two samples per class")
    main, sym = _snr_pair(s1, s0, shot)
    rng = np.random.default_rng(seed)
    boots = np.empty((n_boot, 2))
    for b in range(n_boot):
        r1 = s1[rng.integers(0, len(s1), len(s1))]
        r0 = s0[rng.integers(0, len(s0), len(s0))]
        boots[b] = _snr_pair(r1, r0, shot)
    se_main, se_sym = boots.std(axis=0, ddof=1)
    return EmpiricalSnr(float(main), float(sym), float(se_main), float(se_sym), n_boot)


def fit_sqrtN(ns, snrs) -> float:
    """Least-squares slope chi of SNR ~ chi sqrt(N)."""
    ns = np.asarray(ns, float)
    snrs = np.asarray(snrs, float)
    if len(ns) < 3:
        raise ValueError("need at least three points")
    root = np.sqrt(ns)
    return float(np.dot(snrs, root) / np.dot(root, root))


# ---------------------------------------------------------------------------
# thresholds and fidelity

def _candidate_cuts(s0, s1):
    pooled = np.sort(np.concatenate([s0, s1]))
    mids = 0.5 * (pooled[1:] + pooled[:-1])
    lo = pooled[0] - 1.0
    hi = pooled[-1] + 1.0
    return np.concatenate([[lo], mids, [hi]])


def common_threshold(signals0, signals1) -> tuple[float, float]:
    """Threshold maximizing the correct-assignment probability.

    Ties are broken toward the midpoint of the class means.
    """
    s0 = np.sort(np.asarray(signals0, float))
    s1 = np.sort(np.asarray(signals1, float))
    cuts = _candidate_cuts(s0, s1)
    below0 = np.searchsorted(s0, cuts) / len(s0)
    above1 = 1.0 - np.searchsorted(s1, cuts) / len(s1)
    p = 0.5 * (below0 + above1)
    best = p.max()
    ties = np.flatnonzero(p >= best - 1e-12)
    mid = 0.5 * (s0.mean() + s1.mean())
    theta = cuts[ties[np.argmin(np.abs(cuts[ties] - mid))]]
    return float(theta), float(best)


def pair_thresholds(
    signals0,
    signals1,
    target_p: float,
    *,
    n_grid: int = 250,
) -> tuple[float, float, float, float]:
    """Smallest-rejection pair (theta0 <= theta1) reaching target fidelity.

    Samples below theta0 are assigned 0, above theta1 assigned 1, the band in
    between is rejected as inconclusive.  Fidelity is evaluated on accepted
    samples only.  Returns (theta0, theta1, fidelity, rejection_fraction).
    """
    s0 = np.sort(np.asarray(signals0, float))
    s1 = np.sort(np.asarray(signals1, float))
    n0, n1 = len(s0), len(s1)
    cuts = np.quantile(np.concatenate([s0, s1]), np.linspace(0.0, 1.0, n_grid))
    cuts = np.unique(cuts)
    # cumulative class counts below each cut
    c0 = np.searchsorted(s0, cuts)
    c1 = np.searchsorted(s1, cuts)
    best = None
    for i in range(len(cuts)):
        ok0 = c0[i]                 # class 0 accepted correct
        bad1 = c1[i]                # class 1 accepted wrong (below theta0)
        ok1 = n1 - c1[i:]           # class 1 accepted correct per theta1
        bad0 = n0 - c0[i:]          # class 0 accepted wrong
        acc = ok0 + bad1 + ok1 + bad0
        with np.errstate(invalid="ignore", divide="ignore"):
            p = (ok0 + ok1) / acc
        rej = 1.0 - acc / (n0 + n1)
        good = np.flatnonzero((p >= target_p) & (acc > 0))
        if len(good):
            j = good[np.argmin(rej[good])]
            cand = (rej[j], -p[j], cuts[i], cuts[i + j])
            if best is None or cand < best:
                best = cand
    if best is None:
        raise ValueError(f"target fidelity {target_p} unreachable")
    rej, negp, t0, t1 = best
    return float(t0), float(t1), float(-negp), float(rej)


def fidelity_common(signals0, signals1) -> tuple[float, float]:
    """(P, rejection=0) under the best single threshold."""
    _, p = common_threshold(signals0, signals1)
    return p, 0.0


def normal_fit_fidelity(m0, v0, m1, v1) -> float:
    """Assignment fidelity of two fitted normals under the best threshold.

    The optimum threshold equates the class likelihoods; for unequal
    variances that is a quadratic, and the root between the means is the
    relevant one.
    """
    s0, s1 = np.sqrt(v0), np.sqrt(v1)
    if m1 < m0:
        m0, v0, s0, m1, v1, s1 = m1, v1, s1, m0, v0, s0
    if abs(v0 - v1) < 1e-12 * max(v0, v1):
        theta = 0.5 * (m0 + m1)
    else:
        a = 1.0 / v0 - 1.0 / v1
        b = -2.0 * (m0 / v0 - m1 / v1)
        c = m0**2 / v0 - m1**2 / v1 - 2.0 * np.log(s1 / s0)
        roots = np.roots([a, b, c])
        roots = roots[np.isreal(roots)].real
        inside = roots[(roots > m0) & (roots < m1)]
        theta = inside[0] if len(inside) else 0.5 * (m0 + m1)
    return float(0.5 * (ndtr((theta - m0) / s0) + 1.0 - ndtr((theta - m1) / s1)))


def gaussian_inferred_fidelity(snr: float) -> float:
    """Fidelity inferred from the SNR alone, equal-variance normal model."""
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    return normal_fit_fidelity(0.0, 1.0, np.sqrt(2.0) * snr, 1.0)


# ---------------------------------------------------------------------------
# sliding window

@dataclass(frozen=True)
class SlidingSeries:
    taus: np.ndarray
    values: np.ndarray

    @property
    def peak_tau(self) -> float:
        return float(self.taus[np.argmax(self.values)])


def sliding_window(record: HomodyneRecord, t_m: float, stride: float) -> SlidingSeries:
    """Boxcar signal S(tau) for window starts tau, via cumulative sums."""
    dt = record.dt
    n = len(record.samples)
    m = int(round(t_m / dt))
    if m > n:
        raise ValueError("window longer than record")
    step = max(1, int(round(stride / dt)))
    cum = np.concatenate([[0.0], np.cumsum(record.samples) * dt])
    starts = np.arange(0, n - m + 1, step)
    return SlidingSeries(taus=starts * dt, values=cum[starts + m] - cum[starts])


# ---------------------------------------------------------------------------
# summaries

@dataclass
class DetectionSummary:
    """Histogram-level description of one detection experiment."""

    signals0: np.ndarray
    signals1: np.ndarray
    shot: float
    snr: EmpiricalSnr
    threshold: float
    p_common: float
    pair: tuple[float, float, float, float] | None
    bin_edges: np.ndarray
    counts0: np.ndarray
    counts1: np.ndarray

    def to_json(self, path) -> None:
        data = {
            "n0": len(self.signals0),
            "n1": len(self.signals1),
            "mean0": float(self.signals0.mean()),
            "mean1": float(self.signals1.mean()),
            "var0": float(self.signals0.var(ddof=1)),
            "var1": float(self.signals1.var(ddof=1)),
            "shot": self.shot,
            "snr_main": self.snr.main,
            "snr_sym": self.snr.sym,
            "snr_se": self.snr.se_sym,
            "threshold": self.threshold,
            "p_common": self.p_common,
        }
        if self.pair is not None:
            t0, t1, p, rej = self.pair
            data["pair"] = {
                "theta0": t0, "theta1": t1, "p": p, "rejection": rej,
            }
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def histogram_csv(self, path) -> None:
        rows = np.column_stack([
            self.bin_edges[:-1], self.bin_edges[1:], self.counts0, self.counts1,
        ])
        np.savetxt(
            path, rows, delimiter=",",
            header="bin_left,bin_right,count_0,count_1", comments="",
            fmt=["%.8g", "%.8g", "%d", "%d"],
        )


def summarize(
    signals0,
    signals1,
    shot: float,
    *,
    target_p: float | None = None,
    bins: int = 60,
    n_boot: int = 500,
    seed: int = 12345,
) -> DetectionSummary:
    s0 = np.asarray(signals0, float)
    s1 = np.asarray(signals1, float)
    snr = snr_empirical(s1, s0, shot, n_boot=n_boot, seed=seed)
    theta, p = common_threshold(s0, s1)
    pair = None
    if target_p is not None:
        pair = pair_thresholds(s0, s1, target_p)
    lo = min(s0.min(), s1.min())
    hi = max(s0.max(), s1.max())
    edges = np.linspace(lo, hi, bins + 1)
    counts0, _ = np.histogram(s0, edges)
    counts1, _ = np.histogram(s1, edges)
    return DetectionSummary(
        signals0=s0, signals1=s1, shot=shot, snr=snr,
        threshold=theta, p_common=p, pair=pair,
        bin_edges=edges, counts0=counts0, counts1=counts1,
    )


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class OptimizeResult:
    best: dict
    value: float
    trace: list = field(default_factory=list)
    aborted: bool = False


def optimize_parameters(
    objective,
    x0: dict,
    bounds: dict,
    *,
    max_sweeps: int = 50,
    restarts: int = 3,
    seed: int = 2025,
    rel_tol: float = 1e-4,
) -> OptimizeResult:
    """Maximize objective(params) by bounded coordinate descent.

    Each coordinate gets a 3-point parabolic refinement per sweep, with the
    probe width shrinking geometrically; restarts draw fresh starting points
    inside the bounds from a fixed-seed generator, so the whole search is
    deterministic.  Non-finite objective values shrink the probe and retry;
    if the objective never turns finite the search aborts with its trace.
    """
    names = list(x0)
    rng = np.random.default_rng(seed)
    trace = []

    def run_from(start: dict):
        x = dict(start)
        fx = objective(x)
        trace.append(("start", dict(x), fx))
        if not np.isfinite(fx):
            return x, -np.inf
        widths = {k: 0.25 * (bounds[k][1] - bounds[k][0]) for k in names}
        for sweep in range(max_sweeps):
            improved = 0.0
            for k in names:
                lo, hi = bounds[k]
                h = widths[k]
                for _ in range(6):
                    xm = dict(x); xm[k] = np.clip(x[k] - h, lo, hi)
                    xp = dict(x); xp[k] = np.clip(x[k] + h, lo, hi)
                    fm, fp = objective(xm), objective(xp)
                    if np.isfinite(fm) and np.isfinite(fp):
                        break
                    h *= 0.5
                else:
                    return x, -np.inf
                # parabola through (x-h, x, x+h); fall back to the best probe
                denom = fm - 2.0 * fx + fp
                if denom < 0.0:
                    step = 0.5 * h * (fm - fp) / denom
                    cand = dict(x)
                    cand[k] = np.clip(x[k] + step, lo, hi)
                    fc = objective(cand)
                else:
                    fc = -np.inf
                options = [(fx, x[k]), (fm, xm[k]), (fp, xp[k])]
                if np.isfinite(fc):
                    options.append((fc, cand[k]))
                f_new, x_new = max(options, key=lambda t: t[0])
                if f_new > fx:
                    improved = max(improved, f_new - fx)
                    x[k], fx = x_new, f_new
                widths[k] = max(h * 0.6, 1e-3 * (hi - lo))
            trace.append((f"sweep{sweep}", dict(x), fx))
            if improved < rel_tol * max(abs(fx), 1.0):
                break
        return x, fx

    starts = [dict(x0)]
    for _ in range(max(0, restarts - 1)):
        starts.append({
            k: rng.uniform(bounds[k][0], bounds[k][1]) for k in names
        })
    best_x, best_f = None, -np.inf
    for s in starts:
        x, fx = run_from(s)
        if fx > best_f:
            best_x, best_f = x, fx
    if best_x is None or not np.isfinite(best_f):
        return OptimizeResult(best=dict(x0), value=-np.inf, trace=trace, aborted=True)
    return OptimizeResult(best=best_x, value=best_f, trace=trace)
