"""Conditional dynamics under continuous homodyne detection.

Euler-Maruyama unraveling of the unconditional generators, in the real
Hermitian-basis representation, with the state renormalized after every step
(the discretized nonlinear update does not preserve the trace exactly).  The
homodyne record is

    j_k dt = sqrt(eta) <y>_k dt + dW_k,     dW_k ~ Normal(0, dt)

with <y> from the conditioned state (the top-level hierarchy matrix in the
Fock variant, which also supplies the nonlinear expectation shared by all
four generalized density matrices; one Wiener path drives the whole
hierarchy).

Trajectories are independent: trajectory i of a batch draws its noise from a
counter-based Philox generator keyed by seed0 + i, so batch results do not
depend on chunking or worker count.  Chunks of trajectories advance together
so each step is a handful of real dgemms.

Batches are typically reduced on the fly to filtered signals S = int f j dt
for a bank of filters; full records are kept only on request (they are large).
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import realrep
from .me import time_grid
from .pulses import kappa_from_xi
from .system import CavityModel, FockModel

log = logging.getLogger(__name__)

RNG_ALGORITHM = "philox4x64"
TRACE_DIVERGENCE = 1e-3
DEFAULT_CHUNK = 256


def trajectory_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class HomodyneRecord:
    """One measurement record; samples[k] is j over [t_k, t_k + dt)."""

    seed: int
    dt: float
    samples: np.ndarray
    n_photon: int
    eta: float
    phi: float
    valid: bool = True

    @property
    def ts(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


@dataclass
class BatchResult:
    """Reduction of a trajectory batch.

    signals has one row per filter, one column per trajectory, aligned with
    seeds; mean_y is the ensemble average of the conditioned <y>(t) over the
    valid trajectories; dw_stats = (sum, sum of squares, count) of all noise
    increments, kept for sanity checks on the generator.
    """

    seeds: np.ndarray
    signals: np.ndarray
    valid: np.ndarray
    mean_y: np.ndarray
    dw_stats: tuple[float, float, int]
    rng_algorithm: str = RNG_ALGORITHM
    records: list[HomodyneRecord] | None = None

    @property
    def n_invalid(self) -> int:
        return int((~self.valid).sum())

    def valid_signals(self) -> np.ndarray:
        return self.signals[:, self.valid]


def _cavity_step_data(model: CavityModel, pulse, ts):
    rp = model.real_superops()
    s = np.sqrt(kappa_from_xi(pulse, ts))
    powers = np.stack([s**p for p in range(len(rp))], axis=1)  # (n_times, n_pow)
    return rp, powers


def _chunk_cavity(model, pulse, t_end, dt, n_photon, seeds, filters, keep_records):
    ts = time_grid(t_end, dt)
    n_steps = len(ts) - 1
    u = model.basis_transform
    rp, powers = _cavity_step_data(model, pulse, ts)
    m_meas = model.measurement_superop()
    w_y = model.weights(model.y_op)
    w_tr = realrep.trace_weights(model.dim, u)
    x0 = realrep.real_coords(model.initial_state(n_photon), u)

    b = len(seeds)
    x = np.tile(x0[:, None], (1, b))
    sqeta = np.sqrt(model.config.eta)
    noise = np.empty((n_steps, b))
    for i, seed in enumerate(seeds):
        noise[:, i] = trajectory_rng(int(seed)).standard_normal(n_steps)
    noise *= np.sqrt(dt)

    n_f = filters.shape[0] if filters is not None else 0
    signals = np.zeros((n_f, b))
    sum_y = np.zeros(n_steps + 1)
    valid = np.ones(b, dtype=bool)
    records = np.empty((n_steps, b)) if keep_records else None

    r_tot = np.empty_like(rp[0])
    for k in range(n_steps):
        np.multiply(rp[0], powers[k, 0], out=r_tot)
        for p in range(1, len(rp)):
            if powers[k, p] != 0.0:
                r_tot += powers[k, p] * rp[p]
        y_exp = w_y @ x
        sum_y[k] += y_exp[valid].sum()
        dw = noise[k]
        x += dt * (r_tot @ x) + (sqeta * dw) * (m_meas @ x - y_exp * x)
        tr = w_tr @ x
        bad = ~np.isfinite(tr) | (np.abs(tr - 1.0) > TRACE_DIVERGENCE)
        if bad.any():
            # reset diverged lanes so the rest of the chunk stays finite
            valid &= ~bad
            x[:, bad] = x0[:, None]
            tr[bad] = 1.0
        x /= tr
        j = sqeta * y_exp + dw / dt
        if n_f:
            signals += np.outer(filters[:, k] * dt, j)
        if keep_records:
            records[k] = j
    sum_y[n_steps] += (w_y @ x)[valid].sum()

    n_valid = int(valid.sum())
    mean_contrib = np.zeros(n_steps + 1) if n_valid == 0 else sum_y
    dw_stats = (float(noise.sum()), float((noise**2).sum()), noise.size)
    return signals, valid, mean_contrib, n_valid, dw_stats, records


def _chunk_fock(model, pulse, t_end, dt, n_photon, seeds, filters, keep_records):
    from .me import hierarchy_source_superops

    ts = time_grid(t_end, dt)
    n_steps = len(ts) - 1
    u = model.basis_transform
    r = model.real_superops()[0]
    sp, sm = hierarchy_source_superops(model)
    m_meas = model.measurement_superop()
    w_y = model.weights(model.y_op)
    w_tr = realrep.trace_weights(model.dim, u)
    xi = np.asarray(pulse.xi(ts), dtype=float)
    if n_photon == 0:
        xi = np.zeros_like(xi)
    elif n_photon != 1:
        raise ValueError("single-photon wavepackets only")

    b = len(seeds)
    d2 = model.dim**2
    x0 = realrep.real_coords(model.ground_state(), u)
    x = np.zeros((d2, 4, b))
    x[:, 0, :] = x0[:, None]
    x[:, 3, :] = x0[:, None]
    sqeta = np.sqrt(model.config.eta)
    noise = np.empty((n_steps, b))
    for i, seed in enumerate(seeds):
        noise[:, i] = trajectory_rng(int(seed)).standard_normal(n_steps)
    noise *= np.sqrt(dt)

    n_f = filters.shape[0] if filters is not None else 0
    signals = np.zeros((n_f, b))
    sum_y = np.zeros(n_steps + 1)
    valid = np.ones(b, dtype=bool)
    records = np.empty((n_steps, b)) if keep_records else None

    flat = x.reshape(d2, 4 * b)
    for k in range(n_steps):
        y_exp = w_y @ x[:, 3, :]
        sum_y[k] += y_exp[valid].sum()
        dw = noise[k]
        drift = (r @ flat).reshape(d2, 4, b)
        if xi[k] != 0.0:
            s_pa = (sp @ x[:, [0, 1], :].reshape(d2, 2 * b)).reshape(d2, 2, b)
            s_mb = (sm @ x[:, [0, 2], :].reshape(d2, 2 * b)).reshape(d2, 2, b)
            drift[:, 1, :] += (0.5 * xi[k]) * s_pa[:, 0, :]
            drift[:, 2, :] += (0.5 * xi[k]) * s_mb[:, 0, :]
            drift[:, 3, :] += xi[k] * (s_pa[:, 1, :] + s_mb[:, 1, :])
        meas = (m_meas @ flat).reshape(d2, 4, b) - y_exp[None, None, :] * x
        x += dt * drift + (sqeta * dw)[None, None, :] * meas
        tr = w_tr @ x[:, 3, :]
        bad = ~np.isfinite(tr) | (np.abs(tr - 1.0) > TRACE_DIVERGENCE)
        if bad.any():
            # reset diverged lanes so the rest of the chunk stays finite
            valid &= ~bad
            x[:, 0, bad] = x0[:, None]
            x[:, 1, bad] = 0.0
            x[:, 2, bad] = 0.0
            x[:, 3, bad] = x0[:, None]
            tr[bad] = 1.0
        x /= tr[None, None, :]
        j = sqeta * y_exp + dw / dt
        if n_f:
            signals += np.outer(filters[:, k] * dt, j)
        if keep_records:
            records[k] = j
    sum_y[n_steps] += (w_y @ x[:, 3, :])[valid].sum()

    n_valid = int(valid.sum())
    dw_stats = (float(noise.sum()), float((noise**2).sum()), noise.size)
    return signals, valid, sum_y, n_valid, dw_stats, records


def _run_chunk(args):
    (kind, model, pulse, t_end, dt, n_photon, seeds, filters, keep_records) = args
    fn = _chunk_cavity if kind == "cavity" else _chunk_fock
    return fn(model, pulse, t_end, dt, n_photon, seeds, filters, keep_records)


def simulate_trajectory(
    model,
    pulse,
    t_end: float,
    seed: int,
    *,
    dt: float = 1e-3,
    n_photon: int = 1,
) -> HomodyneRecord:
    """Single conditioned trajectory; returns its homodyne record."""
    kind = "cavity" if isinstance(model, CavityModel) else "fock"
    fn = _chunk_cavity if kind == "cavity" else _chunk_fock
    _, valid, _, _, _, records = fn(
        model, pulse, t_end, dt, n_photon, np.array([seed]), None, True
    )
    return HomodyneRecord(
        seed=seed,
        dt=dt,
        samples=records[:, 0].copy(),
        n_photon=n_photon,
        eta=model.config.eta,
        phi=model.config.phi,
        valid=bool(valid[0]),
    )


def run_batch(
    model,
    pulse,
    t_end: float,
    n_traj: int,
    seed0: int,
    *,
    dt: float = 1e-3,
    n_photon: int = 1,
    filters: np.ndarray | None = None,
    keep_records: bool = False,
    workers: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> BatchResult:
    """Trajectories seeded seed0..seed0+n_traj-1, reduced to filtered signals.

    filters is a (n_filters, n_steps) array; S[i, j] = sum_k filters[i, k]
    j_k dt for trajectory j.  Chunk size is fixed independently of the worker
    count so aggregates are reproducible on any machine.
    """
    if model.space.full:
        raise ValueError("trajectory engine runs in the reduced representation")
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    kind = "cavity" if isinstance(model, CavityModel) else "fock"
    seeds = np.arange(seed0, seed0 + n_traj, dtype=np.int64)
    chunks = [seeds[i : i + chunk] for i in range(0, n_traj, chunk)]
    args = [
        (kind, model, pulse, t_end, dt, n_photon, c, filters, keep_records)
        for c in chunks
    ]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, args))
    else:
        parts = [_run_chunk(a) for a in args]

    n_f = filters.shape[0] if filters is not None else 0
    signals = (
        np.concatenate([p[0] for p in parts], axis=1)
        if n_f
        else np.zeros((0, n_traj))
    )
    valid = np.concatenate([p[1] for p in parts])
    n_valid = sum(p[3] for p in parts)
    mean_y = sum(p[2] for p in parts) / max(n_valid, 1)
    dw_sum = sum(p[4][0] for p in parts)
    dw_sq = sum(p[4][1] for p in parts)
    dw_n = sum(p[4][2] for p in parts)
    records = None
    if keep_records:
        records = []
        for ci, part in enumerate(parts):
            for i, seed in enumerate(chunks[ci]):
                records.append(
                    HomodyneRecord(
                        seed=int(seed),
                        dt=dt,
                        samples=part[5][:, i].copy(),
                        n_photon=n_photon,
                        eta=model.config.eta,
                        phi=model.config.phi,
                        valid=bool(part[1][i]),
                    )
                )
    n_bad = int((~valid).sum())
    if n_bad:
        log.warning("excluded %d/%d diverged trajectories", n_bad, n_traj)
    return BatchResult(seeds, signals, valid, mean_y, (dw_sum, dw_sq, dw_n), records=records)


def record_csv(record: HomodyneRecord, path):
    header = (
        f"rng={RNG_ALGORITHM},seed={record.seed},"
        f"n_photon={record.n_photon},eta={record.eta},phi={record.phi}"
    )
    np.savetxt(
        path,
        np.column_stack([record.ts, record.samples]),
        delimiter=",",
        header="t,j\n# " + header,
        comments="",
    )
