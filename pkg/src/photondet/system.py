"""Detector-chain model builders.

A chain of three-level transmons is cascaded through ideal circulators.  Two
co-propagating fields thread the chain: the control line carrying the photon
to be detected (0-1 transitions) and a coherent probe (1-2 transitions) read
out by homodyne detection after the last transmon.  Circulator imperfections
are modeled as a four-port beamsplitter in front of every transmon that
attenuates both lines by t = sqrt(1 - p_loss) and routes the rest to vacuum.

Two source descriptions are supported, built from the same network algebra:

  * CavityModel: the photon starts in a tunable-decay source cavity ahead of
    the chain; kappa(t) shapes the emitted envelope.  The generator depends on
    time only through powers of sqrt(kappa).
  * FockModel: the chain is driven by a single-photon Fock wavepacket xi(t)
    directly; the generator is static and the wavepacket enters through the
    coupled hierarchy of generalized density matrices.  Loss is not available
    here (the attenuated-input state is no longer a pure Fock state).

The homodyne observable is y = e^{i phi} c + h.c. with c the operator part of
the probe output channel, i.e. sum_j t^(N-j) L_12^(j); the known coherent
offset of the probe is subtracted from the record.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import realrep
from .hilbert import (
    HilbertSpace,
    cavity_lowering,
    level_projector,
    lowering_01,
    lowering_12,
    transmon_label,
)
from .slh import (
    Dissipator,
    LiouvillianSpec,
    SLHTriplet,
    TransmonParams,
    beamsplitter_triplet,
    coherent_probe_triplet,
    concatenate,
    identity_triplet,
    scattering_triplet,
    series,
    source_cavity_triplet,
    to_liouvillian,
    transmon_triplet,
)

ENVELOPE_NAME = "sqrt_kappa"


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of the detector chain and its readout.

    gamma_c lists the control-transition decay rate of each transmon, in
    units of the first one; the probe rates default to gamma_p = 2 gamma_c.
    omega_p is the probe amplitude (the input displacement is i omega_p, so
    omega_p^2 is the probe photon flux).  p_loss is the power lost at each
    circulator; eta the homodyne detection efficiency; phi the local
    oscillator phase.
    """

    gamma_c: tuple[float, ...]
    omega_p: float
    gamma_p: tuple[float, ...] | None = None
    delta_c: float = 0.0
    delta_p: float = 0.0
    p_loss: float = 0.0
    eta: float = 1.0
    phi: float = np.pi / 2
    gamma_phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma_c", tuple(float(g) for g in self.gamma_c))
        if self.gamma_p is None:
            object.__setattr__(self, "gamma_p", tuple(2.0 * g for g in self.gamma_c))
        else:
            object.__setattr__(self, "gamma_p", tuple(float(g) for g in self.gamma_p))
        if len(self.gamma_c) < 1:
            raise ValueError("need at least one transmon")
        if len(self.gamma_p) != len(self.gamma_c):
            raise ValueError("gamma_p and gamma_c must have equal length")
        if any(g <= 0 for g in self.gamma_c + self.gamma_p):
            raise ValueError("decay rates must be positive")
        if not 0.0 <= self.p_loss < 1.0:
            raise ValueError("p_loss must lie in [0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.gamma_phi < 0:
            raise ValueError("dephasing rate must be nonnegative")

    @property
    def n_transmons(self) -> int:
        return len(self.gamma_c)

    def transmon_params(self, k: int) -> TransmonParams:
        return TransmonParams(
            gamma_c=self.gamma_c[k],
            gamma_p=self.gamma_p[k],
            delta_c=self.delta_c,
            delta_p=self.delta_p,
            gamma_phi=self.gamma_phi,
        )


def _compose_chain(space: HilbertSpace, cfg: ChainConfig, source: SLHTriplet) -> SLHTriplet:
    """source (1 channel) + probe, threaded through beamsplitters and transmons.

    Channel layout is (control, probe, *loss ports); each lossy stage adds a
    fresh pair of vacuum ports so the scattering stays unitary.
    """
    d = space.dim
    net = concatenate(source, coherent_probe_triplet(1j * cfg.omega_p, d))
    r = np.sqrt(cfg.p_loss)
    t = np.sqrt(1.0 - cfg.p_loss)
    for k in range(cfg.n_transmons):
        if cfg.p_loss > 0:
            n = net.n_channels
            net = concatenate(net, identity_triplet(2, d))
            s = np.eye(n + 2, dtype=complex)
            s[0, 0] = t
            s[0, n] = r
            s[n, 0] = -r
            s[n, n] = t
            s[1, 1] = t
            s[1, n + 1] = r
            s[n + 1, 1] = -r
            s[n + 1, n + 1] = t
            net = series(scattering_triplet(s, d), net)
        stage = transmon_triplet(cfg.transmon_params(k), space, transmon_label(k + 1))
        if net.n_channels > 2:
            stage = concatenate(stage, identity_triplet(net.n_channels - 2, d))
        net = series(stage, net)
    return net


def _dephasing_dissipators(space: HilbertSpace, cfg: ChainConfig) -> list[Dissipator]:
    """(gamma_phi/2) D[2 sigma_11 + 4 sigma_22] per transmon."""
    out = []
    if cfg.gamma_phi == 0:
        return out
    for k in range(cfg.n_transmons):
        label = transmon_label(k + 1)
        op = 2.0 * space.site_operator(label, level_projector(1)) + 4.0 * space.site_operator(
            label, level_projector(2)
        )
        out.append(Dissipator(0, cfg.gamma_phi / 2.0, op))
    return out


def _channel_flux_terms(net: SLHTriplet, channel: int) -> list[tuple[int, np.ndarray]]:
    """Hermitian terms W_p with <c^dag c> = sum_p s^p tr(W_p rho) for a channel."""
    mono = [m for m in net.couplings[channel] if m.op is not None]
    terms: dict[int, np.ndarray] = {}
    for ma in mono:
        for mb in mono:
            p = ma.power + mb.power
            w = np.conj(ma.coeff) * mb.coeff * (ma.op.conj().T @ mb.op)
            terms[p] = terms.get(p, 0) + w
    return [(p, terms[p]) for p in sorted(terms)]


def _probe_output_operator(net: SLHTriplet) -> np.ndarray:
    """Operator part of the probe output channel (coherent offset dropped)."""
    d = net.dim
    c = np.zeros((d, d), dtype=complex)
    for power, coeff, op in net.couplings[1]:
        if op is None:
            continue
        if power != 0:
            raise ValueError("probe output depends on the source envelope")
        c += coeff * op
    return c


@dataclass
class _ModelBase:
    config: ChainConfig
    space: HilbertSpace
    lio: LiouvillianSpec
    c_probe: np.ndarray            # operator part of the measured channel
    y_op: np.ndarray               # e^{i phi} c + h.c.
    pexc: list[np.ndarray]         # per-transmon |1><1| + |2><2|
    _u: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def basis_transform(self) -> np.ndarray:
        if self._u is None:
            self._u = realrep.hermitian_basis(self.dim)
        return self._u

    def real_superops(self) -> list[np.ndarray]:
        u = self.basis_transform
        return [realrep.real_superop(m, u) for m in self.lio.superoperators()]

    def weights(self, op: np.ndarray) -> np.ndarray:
        return realrep.expectation_weights(op, self.basis_transform)

    def measurement_superop(self) -> np.ndarray:
        """Real matrix of rho -> e^{i phi} c rho + e^{-i phi} rho c^dag."""
        d = self.dim
        eye = np.eye(d)
        z = np.exp(1j * self.config.phi)
        m = z * np.kron(eye, self.c_probe) + np.conj(z) * np.kron(self.c_probe.conj(), eye)
        return realrep.real_superop(m, self.basis_transform)

    def ground_state(self) -> np.ndarray:
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        i = self.space.index(self.space.ground_levels())
        rho[i, i] = 1.0
        return rho


@dataclass
class CavityModel(_ModelBase):
    """Chain fed by a tunable-decay source cavity."""

    number_op: np.ndarray = None
    control_flux_terms: list[tuple[int, np.ndarray]] = None

    def initial_state(self, n_photon: int = 1) -> np.ndarray:
        if n_photon not in (0, 1):
            raise ValueError("source cavity holds 0 or 1 photons")
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        levels = (
            self.space.source_excited_levels() if n_photon else self.space.ground_levels()
        )
        i = self.space.index(levels)
        rho[i, i] = 1.0
        return rho


@dataclass
class FockModel(_ModelBase):
    """Chain driven directly by a single-photon wavepacket."""

    lambda_01: np.ndarray = None   # collective sum_j L_01^(j)
    lambda_10: np.ndarray = None

    def initial_hierarchy(self) -> dict[tuple[int, int], np.ndarray]:
        """GDMs at t = 0: rho_mn = delta_mn * ground.

        The off-diagonal matrices vanish initially because the field trace of
        |m_xi><n_xi| is delta_mn; they build up through the source terms.
        """
        g = self.ground_state()
        z = np.zeros_like(g)
        return {(0, 0): g.copy(), (0, 1): z.copy(), (1, 0): z.copy(), (1, 1): g.copy()}


def build_cavity_model(cfg: ChainConfig, *, full: bool = False) -> CavityModel:
    n = cfg.n_transmons
    space = (
        HilbertSpace.full_space(n, source_cavity=True)
        if full
        else HilbertSpace.single_excitation_space(n, source_cavity=True)
    )
    net = _compose_chain(space, cfg, source_cavity_triplet(space))
    lio = to_liouvillian(net, ENVELOPE_NAME)
    lio.dissipators.extend(_dephasing_dissipators(space, cfg))
    c = _probe_output_operator(net)
    z = np.exp(1j * cfg.phi)
    a = space.site_operator("source", cavity_lowering())
    return CavityModel(
        config=cfg,
        space=space,
        lio=lio,
        c_probe=c,
        y_op=z * c + np.conj(z) * c.conj().T,
        pexc=_excitation_projectors(space, n),
        number_op=a.conj().T @ a,
        control_flux_terms=_channel_flux_terms(net, 0),
    )


def build_fock_model(cfg: ChainConfig, *, full: bool = False) -> FockModel:
    if cfg.p_loss > 0:
        raise ValueError(
            "Fock-wavepacket drive supports lossless circulators only; "
            "use the cavity-source model for p_loss > 0"
        )
    n = cfg.n_transmons
    space = (
        HilbertSpace.full_space(n, source_cavity=False)
        if full
        else HilbertSpace.single_excitation_space(n, source_cavity=False)
    )
    net = _compose_chain(space, cfg, identity_triplet(1, space.dim))
    lio = to_liouvillian(net, None)
    if lio.max_power != 0:
        raise AssertionError("Fock-model generator should be static")
    lio.dissipators.extend(_dephasing_dissipators(space, cfg))
    lam01 = np.zeros((space.dim, space.dim), dtype=complex)
    for k in range(n):
        lam01 += np.sqrt(cfg.gamma_c[k]) * space.site_operator(
            transmon_label(k + 1), lowering_01()
        )
    c = _probe_output_operator(net)
    z = np.exp(1j * cfg.phi)
    return FockModel(
        config=cfg,
        space=space,
        lio=lio,
        c_probe=c,
        y_op=z * c + np.conj(z) * c.conj().T,
        pexc=_excitation_projectors(space, n),
        lambda_01=lam01,
        lambda_10=lam01.conj().T,
    )


def _excitation_projectors(space: HilbertSpace, n: int) -> list[np.ndarray]:
    out = []
    for k in range(n):
        label = transmon_label(k + 1)
        out.append(
            space.site_operator(label, level_projector(1))
            + space.site_operator(label, level_projector(2))
        )
    return out


def add_dephasing(model, gamma_phi: float):
    """New model with pure dephasing at rate gamma_phi on every transmon."""
    cfg = replace(model.config, gamma_phi=gamma_phi)
    if isinstance(model, FockModel):
        return build_fock_model(cfg, full=model.space.full)
    return build_cavity_model(cfg, full=model.space.full)
