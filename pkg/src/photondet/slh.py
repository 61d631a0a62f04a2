"""SLH triplet algebra for cascaded input-output networks.

A component is a triplet G = (S, L, H): scattering matrix S (scalar entries,
one per channel pair), coupling vector L (one operator per channel) and
Hamiltonian H.  Networks are built from two products,

    concatenation  Ga boxplus Gb = (blockdiag(Sa, Sb), (La; Lb), Ha + Hb)
    series         G2 <| G1      = (S2 S1, S2 L1 + L2, H1 + H2 + Hcross)

with Hcross = (1/2i)(L2^dag S2 L1 - L1^dag S2^dag L2).  The master equation
of a composed network is rho' = -i[H, rho] + sum_i D[L_i] rho.

Coupling operators are stored as sums of monomials ``coeff * env(t)**power *
op`` where ``env`` is a single named real scalar envelope (sqrt(kappa(t)) of
the source cavity in this project) and ``op`` is a shared, unscaled matrix.
Scalar channel entries (coherent displacements) carry ``op = None``.  Keeping
coefficients separate from the matrices lets `to_liouvillian` merge terms that
refer to the same elementary operator and emit the master equation in the
cascaded normal form

    rho' = -i[H_eff, rho] + sum_m w_m D[A_m] rho - sum_pairs C[c_up][c_dn] rho

with the feedforward superoperator C[c1][c2] rho = [c2^dag, c1 rho] +
[rho c1^dag, c2], c1 upstream of c2.  Coherent-drive cross terms reduce to
Hamiltonian terms and are folded into H_eff; that is why a probe of amplitude
alpha = i*Omega on a channel with operator Lam shows up as Omega (Lam +
Lam^dag) in H_eff rather than as an explicit drive dissipator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .hilbert import HilbertSpace, cavity_lowering, level_projector, lowering_01, lowering_12

_HERM_ATOL = 1e-11


class Monomial(NamedTuple):
    power: int                # exponent of the scalar envelope
    coeff: complex
    op: np.ndarray | None     # None means coeff * identity (scalar entry)


ChannelOp = tuple[Monomial, ...]


def const_channel(op: np.ndarray, coeff: complex = 1.0) -> ChannelOp:
    return (Monomial(0, coeff, op),)


def scalar_channel(alpha: complex) -> ChannelOp:
    return (Monomial(0, alpha, None),)


def zero_channel() -> ChannelOp:
    return ()


def evaluate_channel(ch: ChannelOp, dim: int, s: float = 0.0) -> np.ndarray:
    """Materialize a monomial sum at envelope value s."""
    out = np.zeros((dim, dim), dtype=complex)
    for power, coeff, op in ch:
        piece = coeff * (s**power)
        if op is None:
            out += piece * np.eye(dim)
        else:
            out += piece * op
    return out


def _scale_channel(ch: ChannelOp, z: complex) -> ChannelOp:
    if z == 0:
        return ()
    return tuple(Monomial(p, z * c, op) for p, c, op in ch)


def _add_channels(*chs: ChannelOp) -> ChannelOp:
    out: list[Monomial] = []
    for ch in chs:
        out.extend(m for m in ch if m.coeff != 0)
    return tuple(out)


@dataclass(frozen=True)
class SLHTriplet:
    """One network component: scattering S, couplings L, Hamiltonian H."""

    s: np.ndarray                     # (n_channels, n_channels) complex scalars
    couplings: tuple[ChannelOp, ...]  # length n_channels
    hamiltonian: ChannelOp            # monomial sum, must evaluate Hermitian
    dim: int

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex)
        object.__setattr__(self, "s", s)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("scattering matrix must be square")
        if s.shape[0] < 1:
            raise ValueError("a component must have at least one channel")
        if s.shape[0] != len(self.couplings):
            raise ValueError(
                f"{s.shape[0]} channels in S but {len(self.couplings)} coupling operators"
            )
        for ch in self.couplings:
            for m in ch:
                if m.op is not None and m.op.shape != (self.dim, self.dim):
                    raise ValueError("coupling operator shape does not match dim")

    @property
    def n_channels(self) -> int:
        return self.s.shape[0]

    def hamiltonian_matrix(self, s: float = 0.0) -> np.ndarray:
        return evaluate_channel(self.hamiltonian, self.dim, s)

    def coupling_matrix(self, channel: int, s: float = 0.0) -> np.ndarray:
        return evaluate_channel(self.couplings[channel], self.dim, s)


def identity_triplet(n_channels: int, dim: int) -> SLHTriplet:
    """Pass-through component I_n: unit scattering, no coupling, no H."""
    if n_channels < 1:
        raise ValueError("identity component needs at least one channel")
    return SLHTriplet(
        np.eye(n_channels, dtype=complex),
        tuple(zero_channel() for _ in range(n_channels)),
        (),
        dim,
    )


def scattering_triplet(s: np.ndarray, dim: int) -> SLHTriplet:
    """Static passive component defined by a unitary scalar S matrix."""
    s = np.asarray(s, dtype=complex)
    if not np.allclose(s.conj().T @ s, np.eye(s.shape[0]), atol=1e-12):
        raise ValueError("scattering matrix must be unitary")
    return SLHTriplet(s, tuple(zero_channel() for _ in range(s.shape[0])), (), dim)


def beamsplitter_triplet(r: float, dim: int) -> SLHTriplet:
    """Two-port beamsplitter, S = [[t, r], [-r, t]] with t = sqrt(1 - r^2).

    Models a lumped loss P_loss = r^2: port 0 carries the signal, port 1 is
    the vacuum port the reflected fraction leaks into.
    """
    if not 0 <= r < 1:
        raise ValueError("reflectivity must satisfy 0 <= r < 1")
    t = np.sqrt(1.0 - r * r)
    return scattering_triplet(np.array([[t, r], [-r, t]]), dim)


def concatenate(ga: SLHTriplet, gb: SLHTriplet) -> SLHTriplet:
    """Ga boxplus Gb: stack channels, ga's channels first."""
    if ga.dim != gb.dim:
        raise ValueError("components act on different spaces")
    n, m = ga.n_channels, gb.n_channels
    s = np.zeros((n + m, n + m), dtype=complex)
    s[:n, :n] = ga.s
    s[n:, n:] = gb.s
    return SLHTriplet(
        s,
        ga.couplings + gb.couplings,
        _add_channels(ga.hamiltonian, gb.hamiltonian),
        ga.dim,
    )


def series(g2: SLHTriplet, g1: SLHTriplet) -> SLHTriplet:
    """G2 <| G1: the output of g1 feeds the input of g2.

    The product of two monomial sums in the Hcross term is expanded pairwise:
    envelope powers add, coefficients multiply, and each product contributes
    the monomial h plus its Hermitian conjugate so H stays Hermitian.
    """
    if g1.n_channels != g2.n_channels:
        raise ValueError(
            f"series product needs equal channel counts, got {g2.n_channels} and {g1.n_channels}"
        )
    if g1.dim != g2.dim:
        raise ValueError("components act on different spaces")
    s = g2.s @ g1.s
    couplings = []
    for i in range(g2.n_channels):
        routed = [_scale_channel(g1.couplings[j], g2.s[i, j]) for j in range(g1.n_channels)]
        couplings.append(_add_channels(*routed, g2.couplings[i]))

    # (1/2i)(L2^dag S2 L1 - h.c.), monomial by monomial
    h_terms: list[Monomial] = []
    for i in range(g2.n_channels):
        for j in range(g1.n_channels):
            sij = g2.s[i, j]
            if sij == 0:
                continue
            for m2 in g2.couplings[i]:
                for m1 in g1.couplings[j]:
                    coeff = np.conj(m2.coeff) * sij * m1.coeff / 2j
                    power = m2.power + m1.power
                    if m2.op is None and m1.op is None:
                        continue  # scalar-scalar cross term is a c-number
                    if m2.op is None:
                        op = m1.op
                    elif m1.op is None:
                        op = m2.op.conj().T
                    else:
                        op = m2.op.conj().T @ m1.op
                    h_terms.append(Monomial(power, coeff, op))
                    h_terms.append(Monomial(power, np.conj(coeff), op.conj().T))
    return SLHTriplet(
        s,
        tuple(couplings),
        _add_channels(g1.hamiltonian, g2.hamiltonian, tuple(h_terms)),
        g1.dim,
    )


# component builders for the detector chain

@dataclass(frozen=True)
class TransmonParams:
    """Rates and detunings of one three-level transmon.

    gamma_c and gamma_p are the radiative relaxation rates of the control
    (0-1) and probe (1-2) transitions; delta_c and delta_p the detunings of
    the two carriers in the co-rotating frame; gamma_phi an optional pure
    dephasing rate.
    """

    gamma_c: float
    gamma_p: float
    delta_c: float = 0.0
    delta_p: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        if self.gamma_c <= 0 or self.gamma_p <= 0:
            raise ValueError("relaxation rates must be positive")
        if self.gamma_phi < 0:
            raise ValueError("dephasing rate must be nonnegative")


def transmon_triplet(p: TransmonParams, space: HilbertSpace, label: str) -> SLHTriplet:
    """Two-channel transmon triplet: channel 0 control (0-1), channel 1 probe (1-2).

    Couplings are L_01 = sqrt(gamma_c)|0><1| and L_12 = sqrt(gamma_p)|1><2|;
    the bare Hamiltonian in the rotating frame of the two carriers is
    -delta_c |0><0| + delta_p |2><2|.
    """
    l01 = np.sqrt(p.gamma_c) * space.site_operator(label, lowering_01())
    l12 = np.sqrt(p.gamma_p) * space.site_operator(label, lowering_12())
    h = _add_channels(
        const_channel(space.site_operator(label, level_projector(0)), -p.delta_c),
        const_channel(space.site_operator(label, level_projector(2)), p.delta_p),
    )
    return SLHTriplet(
        np.eye(2, dtype=complex),
        (const_channel(l01), const_channel(l12)),
        h,
        space.dim,
    )


def source_cavity_triplet(space: HilbertSpace) -> SLHTriplet:
    """One-channel source cavity, coupling sqrt(kappa(t)) a via the envelope."""
    a = space.site_operator("source", cavity_lowering())
    return SLHTriplet(
        np.eye(1, dtype=complex),
        ((Monomial(1, 1.0, a),),),
        (),
        space.dim,
    )


def coherent_probe_triplet(alpha: complex, dim: int) -> SLHTriplet:
    """One-channel coherent drive: L = alpha, a classical displacement."""
    return SLHTriplet(np.eye(1, dtype=complex), (scalar_channel(alpha),), (), dim)


# master-equation normal form

class HamiltonianTerm(NamedTuple):
    power: int
    matrix: np.ndarray


class Dissipator(NamedTuple):
    power: int      # envelope exponent of the rate (monomial power doubled)
    weight: float   # nonnegative rate prefactor
    op: np.ndarray


class CascadeTerm(NamedTuple):
    """Feedforward term -C[c_up A][c_dn B] with w = c_up * conj(c_dn).

    Action on rho:
        w (A rho B^dag - B^dag A rho) + conj(w) (B rho A^dag - rho A^dag B).
    """

    power: int
    w: complex
    op_up: np.ndarray
    op_down: np.ndarray


@dataclass
class LiouvillianSpec:
    """Master-equation generator in cascaded normal form.

    The only time dependence is through integer powers of a single real
    scalar envelope; engines pass its current value ``s`` to `apply` or
    combine the per-power superoperators returned by `superoperators`.
    """

    dim: int
    hamiltonian: list[HamiltonianTerm]
    dissipators: list[Dissipator]
    cascades: list[CascadeTerm]
    envelope_name: str | None = None

    @property
    def max_power(self) -> int:
        powers = [t.power for t in self.hamiltonian]
        powers += [t.power for t in self.dissipators]
        powers += [t.power for t in self.cascades]
        return max(powers, default=0)

    def hamiltonian_matrix(self, s: float = 0.0) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for power, mat in self.hamiltonian:
            h += (s**power) * mat
        return h

    def apply(self, rho: np.ndarray, s: float = 0.0) -> np.ndarray:
        """Direct d x d action of the generator; reference implementation."""
        h = self.hamiltonian_matrix(s)
        out = -1j * (h @ rho - rho @ h)
        for power, weight, a in self.dissipators:
            g = weight * (s**power)
            if g == 0.0:
                continue
            ad = a.conj().T
            ar = a @ rho
            out += g * (ar @ ad - 0.5 * (ad @ ar + rho @ (ad @ a)))
        for power, w, a, b in self.cascades:
            z = w * (s**power)
            if z == 0.0:
                continue
            bd = b.conj().T
            ad = a.conj().T
            # written out in full so the action is valid for non-Hermitian rho
            out += z * (a @ rho @ bd - bd @ (a @ rho))
            out += np.conj(z) * (b @ rho @ ad - rho @ (ad @ b))
        return out

    def superoperators(self) -> list[np.ndarray]:
        """Column-stacked-vec superoperators, one matrix per envelope power."""
        d = self.dim
        eye = np.eye(d)
        mats = [np.zeros((d * d, d * d), dtype=complex) for _ in range(self.max_power + 1)]
        for power, h in self.hamiltonian:
            mats[power] += -1j * (np.kron(eye, h) - np.kron(h.T, eye))
        for power, weight, a in self.dissipators:
            ad_a = a.conj().T @ a
            mats[power] += weight * (
                np.kron(a.conj(), a)
                - 0.5 * np.kron(eye, ad_a)
                - 0.5 * np.kron(ad_a.T, eye)
            )
        for power, w, a, b in self.cascades:
            bd_a = b.conj().T @ a
            ad_b = a.conj().T @ b
            mats[power] += w * (np.kron(b.conj(), a) - np.kron(eye, bd_a))
            mats[power] += np.conj(w) * (np.kron(a.conj(), b) - np.kron(ad_b.T, eye))
        return mats


def to_liouvillian(g: SLHTriplet, envelope_name: str | None = None) -> LiouvillianSpec:
    """Cascaded normal form of the master equation of a composed network.

    Expanding sum_i D[L_i] over channel monomials gives per-monomial
    dissipators plus, for each ordered pair (up, dn) within a channel, cross
    terms satisfying the identity

        cross(up, dn) + cross(dn, up) = -C[c_up A][c_dn B] + i [H_pair, .]

    with H_pair = (1/2i)(conj(c_dn) c_up B^dag A - h.c.), exactly the piece
    the series product adds to H for this pair.  H_pair is recomputed here
    from the channel monomials and subtracted from the composed Hamiltonian,
    so the normal form is exact whatever the provenance of H.  Pairs whose
    upstream entry is a scalar reduce to a Hamiltonian drive; pairs whose
    downstream entry is a scalar cancel entirely (a displacement added after
    a component cannot act back on it).  Dissipators and cascade terms that
    reference the same elementary operators and envelope power are merged,
    which collapses the beamsplitter loss-channel copies onto the main-line
    terms (e.g. kappa (t^2 + r^2) D[a] = kappa D[a]).
    """
    dim = g.dim
    ham: dict[int, np.ndarray] = {}

    def add_ham(power: int, mat: np.ndarray):
        if power in ham:
            ham[power] = ham[power] + mat
        else:
            ham[power] = mat.astype(complex)

    for power, coeff, op in g.hamiltonian:
        if op is not None:
            add_ham(power, coeff * op)

    op_ids: list[np.ndarray] = []

    def op_id(op: np.ndarray) -> int:
        for i, o in enumerate(op_ids):
            if o is op:
                return i
        op_ids.append(op)
        return len(op_ids) - 1

    diss: dict[tuple[int, int], float] = {}
    casc: dict[tuple[int, int, int], complex] = {}

    for ch in g.couplings:
        for m in ch:
            if m.op is None:
                continue  # D[scalar] = 0
            key = (2 * m.power, op_id(m.op))
            diss[key] = diss.get(key, 0.0) + abs(m.coeff) ** 2
        for iu in range(len(ch)):
            for idn in range(iu + 1, len(ch)):
                up, dn = ch[iu], ch[idn]
                if up.op is None and dn.op is None:
                    continue
                power = up.power + dn.power
                w = up.coeff * np.conj(dn.coeff)
                # subtract this pair's series Hamiltonian piece
                if dn.op is None:
                    bd_a = up.op
                elif up.op is None:
                    bd_a = dn.op.conj().T
                else:
                    bd_a = dn.op.conj().T @ up.op
                hp = (w / 2j) * bd_a
                add_ham(power, -hp)
                add_ham(power, -hp.conj().T)
                if dn.op is None:
                    continue  # downstream scalar: cross terms cancel exactly
                if up.op is None:
                    # upstream scalar driving B: pure Hamiltonian drive
                    b = dn.op
                    add_ham(power, 1j * (np.conj(w) * b - w * b.conj().T))
                    continue
                key = (power, op_id(up.op), op_id(dn.op))
                casc[key] = casc.get(key, 0.0) + w

    dissipators = [
        Dissipator(p, weight, op_ids[i]) for (p, i), weight in diss.items() if weight > 0
    ]
    cascades = [
        CascadeTerm(p, w, op_ids[ia], op_ids[ib])
        for (p, ia, ib), w in casc.items()
        if w != 0
    ]
    ham_terms = []
    for p in sorted(ham):
        m = ham[p]
        if not np.any(np.abs(m) > 1e-14):
            continue
        if not np.allclose(m, m.conj().T, atol=_HERM_ATOL):
            raise ValueError("normal form produced a non-Hermitian Hamiltonian term")
        ham_terms.append(HamiltonianTerm(p, m))
    return LiouvillianSpec(dim, ham_terms, dissipators, cascades, envelope_name)
