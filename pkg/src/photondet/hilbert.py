"""Hilbert-space layout and operator embedding for the detector chain.

The system is a chain of N three-level transmons, optionally preceded by a
two-level source cavity that releases the control photon.  Two layouts are
supported:

``full``
    Explicit tensor product of all factors.  Dimension 2 * 3**N with the
    source cavity, 3**N without, so this is only practical for small N and
    is used to validate the reduced layout.

``reduced``
    Every term of the chain dynamics conserves the number of cavity photons
    plus the number of transmons outside their ground state (the probe only
    shuffles population between transmon levels 1 and 2).  Starting from at
    most one excitation the evolution therefore closes on the span of the
    all-ground state, the one-photon source state and the states with a
    single transmon in level 1 or 2: dimension 2 + 2N with the cavity,
    1 + 2N without.

Basis states are level tuples, one entry per factor, ordered so that the
reduced basis is literally a subset of the full product basis.  Operators
are plain complex ndarrays embedded at construction time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

SOURCE_LABEL = "source"


def transmon_label(site: int) -> str:
    """Label of the site-th transmon, 1-based to match chain positions."""
    return f"transmon{site}"


def _excitations(levels: tuple[int, ...]) -> int:
    # source cavity counts its photon, a transmon counts 1 for level 1 or 2
    return sum(1 for l in levels if l > 0)


@dataclass(frozen=True)
class HilbertSpace:
    """Factor layout plus an ordered basis of level tuples."""

    factor_dims: tuple[int, ...]
    factor_labels: tuple[str, ...]
    basis: tuple[tuple[int, ...], ...]
    full: bool
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.factor_dims) != len(self.factor_labels):
            raise ValueError("factor_dims and factor_labels length mismatch")
        if len(set(self.factor_labels)) != len(self.factor_labels):
            raise ValueError("factor labels must be unique")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.basis)})

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def has_source(self) -> bool:
        return SOURCE_LABEL in self.factor_labels

    @property
    def n_transmons(self) -> int:
        return sum(1 for l in self.factor_labels if l.startswith("transmon"))

    @classmethod
    def full_space(cls, n_transmons: int, source_cavity: bool = True) -> "HilbertSpace":
        dims, labels = [], []
        if source_cavity:
            dims.append(2)
            labels.append(SOURCE_LABEL)
        for k in range(1, n_transmons + 1):
            dims.append(3)
            labels.append(transmon_label(k))
        basis = tuple(itertools.product(*[range(d) for d in dims]))
        return cls(tuple(dims), tuple(labels), basis, full=True)

    @classmethod
    def single_excitation_space(
        cls, n_transmons: int, source_cavity: bool = True
    ) -> "HilbertSpace":
        """Reduced layout: all product states with at most one excitation."""
        full = cls.full_space(n_transmons, source_cavity)
        basis = tuple(c for c in full.basis if _excitations(c) <= 1)
        # order: one-photon source state first (if present), then all-ground,
        # then per site level 1 and level 2
        def sort_key(c):
            exc = _excitations(c)
            if exc == 0:
                return (1, 0, 0)
            site = next(i for i, l in enumerate(c) if l > 0)
            if full.factor_labels[site] == SOURCE_LABEL:
                return (0, 0, 0)
            return (2, site, c[site])

        basis = tuple(sorted(basis, key=sort_key))
        return cls(full.factor_dims, full.factor_labels, basis, full=False)

    def index(self, levels: tuple[int, ...]) -> int:
        return self._index[levels]

    def basis_state(self, levels: tuple[int, ...]) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(levels)] = 1.0
        return v

    def ground_levels(self) -> tuple[int, ...]:
        return tuple(0 for _ in self.factor_dims)

    def source_excited_levels(self) -> tuple[int, ...]:
        if not self.has_source:
            raise ValueError("layout has no source cavity factor")
        return tuple(1 if l == SOURCE_LABEL else 0 for l in self.factor_labels)

    def site_operator(self, label: str, op: np.ndarray) -> np.ndarray:
        """Embed a single-factor operator into the chosen basis.

        ``op`` acts on the factor named ``label``; every other factor is
        untouched.  In the reduced layout matrix elements are taken between
        the retained basis states, which equals projecting the full-space
        embedding onto the single-excitation span.
        """
        site = self.factor_labels.index(label)
        d_site = self.factor_dims[site]
        op = np.asarray(op, dtype=complex)
        if op.shape != (d_site, d_site):
            raise ValueError(f"operator shape {op.shape} != factor dim {d_site}")
        if self.full:
            mat = np.array([[1.0]], dtype=complex)
            for i, d in enumerate(self.factor_dims):
                mat = np.kron(mat, op if i == site else np.eye(d))
            return mat
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i, ci in enumerate(self.basis):
            for j, cj in enumerate(self.basis):
                if ci[:site] + ci[site + 1 :] != cj[:site] + cj[site + 1 :]:
                    continue
                out[i, j] = op[ci[site], cj[site]]
        return out

    def reduction_isometry(self, reduced: "HilbertSpace") -> np.ndarray:
        """Matrix P with P @ full_vec = reduced_vec (rows: reduced basis)."""
        if not self.full or reduced.full:
            raise ValueError("expected full source space and reduced target")
        if reduced.factor_dims != self.factor_dims:
            raise ValueError("layouts do not match")
        p = np.zeros((reduced.dim, self.dim))
        for i, c in enumerate(reduced.basis):
            p[i, self.index(c)] = 1.0
        return p


# single-factor matrices used by the chain builders

def lowering_01() -> np.ndarray:
    """|0><1| on a three-level transmon."""
    m = np.zeros((3, 3), dtype=complex)
    m[0, 1] = 1.0
    return m


def lowering_12() -> np.ndarray:
    """|1><2| on a three-level transmon."""
    m = np.zeros((3, 3), dtype=complex)
    m[1, 2] = 1.0
    return m


def level_projector(level: int) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[level, level] = 1.0
    return m


def cavity_lowering() -> np.ndarray:
    """Annihilation operator of the two-level source cavity."""
    m = np.zeros((2, 2), dtype=complex)
    m[0, 1] = 1.0
    return m
