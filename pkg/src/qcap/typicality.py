"""Frequency-typical projectors, typical states, and reduced operations.

A state's l-fold tensor power is diagonal in the product eigenbasis, so a
typical projector is described combinatorially: the set of empirical-frequency
type classes whose frequencies sit within delta of the spectrum. The dense
matrix is materialized only on demand and under the dimension budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import core
from .channels import KrausMap, TRACE_PRESERVING, complementary, make_kraus, stinespring
from ._budget import check_dim

ZERO_EIG = 1e-12
FREQ_SLACK = 1e-12


@dataclass
class ExponentBook:
    """Closed-form exponent bookkeeping for a (d, kappa, l, delta) setting."""

    d: int
    kappa: int
    l: int
    delta: float
    h_l: float
    phi_delta: float


def exponents(d: int, kappa: int, l: int, delta: float) -> ExponentBook:
    """h(l) = (d kappa / l) log2(l+1) and phi(delta) = -delta log2(delta/(d kappa))."""
    if l < 1:
        raise ValueError("l must be >= 1")
    if not (0.0 < delta < 0.5):
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    h_l = d * kappa / l * math.log2(l + 1)
    phi = -delta * math.log2(delta / (d * kappa))
    return ExponentBook(d, kappa, l, delta, h_l, phi)


def canonical_spectrum_basis(rho):
    """Deterministic eigensystem: eigenvalues sorted descending, phases fixed,
    ties broken lexicographically on eigenvector entries."""
    vals, vecs = np.linalg.eigh(core.hermitize(rho))
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    d = vals.size
    for m in range(d):
        col = vecs[:, m]
        nz = np.flatnonzero(np.abs(col) > 1e-10)
        if nz.size:
            phase = col[nz[0]] / abs(col[nz[0]])
            vecs[:, m] = col / phase
    # stable lexicographic tie-break inside degenerate groups
    keys = [tuple(np.round(np.concatenate([vecs[:, m].real, vecs[:, m].imag]), 10)) for m in range(d)]
    groups = np.round(vals, 10)
    order2 = sorted(range(d), key=lambda m: (-groups[m], keys[m]))
    return vals[order2], vecs[:, order2]


@dataclass
class TypicalProjector:
    """Frequency-typical projector of rho^(x)l, held in type-class form."""

    base_dim: int
    l: int
    delta: float
    spectrum: np.ndarray
    basis: np.ndarray
    type_classes: tuple  # ((counts, class_size) for each included type)
    rank: int

    def _class_probability(self, counts) -> float:
        p = 1.0
        for c, lam in zip(counts, self.spectrum):
            if c:
                p *= float(lam) ** c
        return p

    def mass(self) -> float:
        """tr(rho^(x)l q): total probability of the included sequences."""
        return sum(size * self._class_probability(counts)
                   for counts, size in self.type_classes)

    def max_sequence_probability(self) -> float:
        """Largest probability of any included eigenbasis sequence."""
        return max((self._class_probability(counts) for counts, _ in self.type_classes),
                   default=0.0)

    def sequence_indicator(self) -> np.ndarray:
        """0/1 vector over the d^l product-eigenbasis sequences."""
        d, l = self.base_dim, self.l
        seqs = (np.arange(d**l)[:, None] // d ** np.arange(l - 1, -1, -1)) % d
        counts = np.stack([(seqs == i).sum(axis=1) for i in range(d)], axis=1)
        included = {tuple(c) for c, _ in self.type_classes}
        return np.array([tuple(row) in included for row in counts], dtype=float)

    def matrix(self, budget: int | None = None) -> np.ndarray:
        """Dense projector on the d^l space (budget gated)."""
        check_dim(self.base_dim**self.l, budget, "typical projector dimension")
        u_l = core.kron_power(self.basis, self.l)
        ind = self.sequence_indicator()
        return (u_l * ind) @ u_l.conj().T

    def sequence_vectors(self, budget: int | None = None) -> list:
        """Product eigenbasis vectors of every included sequence."""
        check_dim(self.base_dim**self.l, budget, "typical basis dimension")
        included = {tuple(c) for c, _ in self.type_classes}
        vecs = []
        for seq in itertools.product(range(self.base_dim), repeat=self.l):
            counts = tuple(seq.count(i) for i in range(self.base_dim))
            if counts not in included:
                continue
            v = self.basis[:, seq[0]]
            for s in seq[1:]:
                v = np.kron(v, self.basis[:, s])
            vecs.append(v)
        return vecs


def _multinomial(l: int, counts) -> int:
    num = math.factorial(l)
    for c in counts:
        num //= math.factorial(c)
    return num


def frequency_typical_projector(rho, delta: float, l: int) -> TypicalProjector:
    """Projector onto eigenbasis sequences whose empirical frequency vector f
    satisfies ||f - spectrum||_1 <= delta (symbols of zero eigenvalue must not
    occur at all).

    The l1 radius is what makes the phi(delta) exponent tight: entropy
    continuity gives |H(f) - S(rho)| <= phi(delta) whenever delta < 1/2.
    l1 distances between distributions range over [0, 2), so delta may be any
    value in (0, 2); the exponent guarantees are only claimed below 1/2.
    """
    if not (0.0 < delta < 2.0):
        raise ValueError(f"delta must lie in (0, 2), got {delta}")
    if l < 1:
        raise ValueError("l must be >= 1")
    rho = core.as_density(rho)
    d = rho.shape[0]
    vals, vecs = canonical_spectrum_basis(rho)
    vals = np.clip(vals, 0.0, None)

    included = []
    rank = 0
    for counts in _compositions(l, d):
        if any(c != 0 and lam <= ZERO_EIG for c, lam in zip(counts, vals)):
            continue
        l1 = sum(abs(c / l - lam) for c, lam in zip(counts, vals))
        if l1 <= delta + FREQ_SLACK:
            size = _multinomial(l, counts)
            included.append((tuple(counts), size))
            rank += size
    return TypicalProjector(d, l, float(delta), vals, vecs, tuple(included), rank)


def _compositions(l: int, parts: int):
    """All count vectors of length `parts` summing to l."""
    if parts == 1:
        yield (l,)
        return
    for first in range(l + 1):
        for rest in _compositions(l - first, parts - 1):
            yield (first,) + rest


def typical_state(rho, delta: float, l: int, budget: int | None = None) -> np.ndarray:
    """Maximally mixed state q/tr(q) on the typical subspace."""
    tp = frequency_typical_projector(rho, delta, l)
    if tp.rank < 1:
        raise ValueError(f"typical set is empty for delta={delta}, l={l}")
    return tp.matrix(budget) / tp.rank


@dataclass
class ReducedOperation:
    """Tensor-power channel restricted to the environment-typical sector.

    The Kraus count equals the rank of the environment typical projector, and
    the defect N^(x)l - map is completely positive by construction.
    """

    base: KrausMap
    pi_g: np.ndarray
    delta: float
    l: int
    map: KrausMap
    kraus_count: int
    env_projector_rank: int
    env_entropy: float


def reduced_operation(n: KrausMap, pi_g, delta: float, l: int, budget: int | None = None) -> ReducedOperation:
    """Clip the environment of N^(x)l by the typical projector of the
    single-site environment state at the maximally mixed code input."""
    if n.kind != TRACE_PRESERVING:
        raise ValueError("reduced operations are defined for trace-preserving maps")
    pi_g = core.as_density(pi_g)
    d, kd, m = n.dim_in, n.dim_out, n.n_kraus
    check_dim(d**l, budget, "reduced-operation input dimension")
    check_dim(kd**l, budget, "reduced-operation output dimension")
    check_dim((kd * m) ** l, budget, "reduced-operation dilation dimension")

    comp = complementary(n)
    sigma_env = core.hermitize(np.asarray(
        sum(k @ pi_g @ k.conj().T for k in comp.kraus_ops)
    ))
    env_tp = frequency_typical_projector(sigma_env, delta, l)

    v = stinespring(n).isometry
    v_l = core.kron_power(v, l)
    v_grouped = _group_output_env(v_l, kd, m, l)
    v3 = v_grouped.reshape(kd**l, m**l, d**l)

    ops = []
    for w in env_tp.sequence_vectors(budget):
        ops.append(np.einsum("e,ked->kd", w.conj(), v3))
    kraus_count = len(ops)
    if not ops:
        # empty typical sector: the reduced operation is the zero map
        ops = [np.zeros((kd**l, d**l), dtype=complex)]
    reduced = make_kraus(ops)
    return ReducedOperation(
        base=n,
        pi_g=pi_g,
        delta=float(delta),
        l=l,
        map=reduced,
        kraus_count=kraus_count,
        env_projector_rank=env_tp.rank,
        env_entropy=core.von_neumann_entropy(sigma_env),
    )


def _group_output_env(v_l: np.ndarray, kd: int, m: int, l: int) -> np.ndarray:
    """Permute rows of V^(x)l from interleaved (k1 e1 k2 e2 ...) order to
    grouped (k1..kl, e1..el) order."""
    rows = v_l.shape[0]
    src = np.arange(rows)
    k_lin = np.zeros(rows, dtype=np.int64)
    e_lin = np.zeros(rows, dtype=np.int64)
    rem = src.copy()
    digits = []
    for _ in range(l):
        digits.append(rem % (kd * m))
        rem //= kd * m
    for site_digit in reversed(digits):  # most significant site first
        k_lin = k_lin * kd + site_digit // m
        e_lin = e_lin * m + site_digit % m
    dest = k_lin * (m**l) + e_lin
    out = np.zeros_like(v_l)
    out[dest] = v_l
    return out


def clip_output(n_l: KrausMap, q, budget: int | None = None) -> KrausMap:
    """Compose the projection superoperator a -> q a q after the map."""
    if isinstance(q, TypicalProjector):
        q = q.matrix(budget)
    q = core.as_projector(np.asarray(q, dtype=complex), atol=1e-8)
    if q.shape != (n_l.dim_out, n_l.dim_out):
        raise ValueError("projector dimension does not match the map output")
    ops = [q @ k for k in n_l.kraus_ops]
    return make_kraus(ops)


@dataclass
class L2BoundRecord:
    lhs: float
    rhs: float
    ok: bool
    superadditivity_ok: bool


def l2_bound_check(nhat: KrausMap, pi_g_l, s_out: float, phi: float, l: int) -> L2BoundRecord:
    """Check ||nhat(pi_G^l)||_2^2 <= 2^(-l(S_out - phi)) and the supporting
    superadditivity of || . ||_2^2 over the map's Kraus terms."""
    pi_g_l = core.as_matrix(pi_g_l)
    out = np.zeros((nhat.dim_out, nhat.dim_out), dtype=complex)
    term_sq = 0.0
    for k in nhat.kraus_ops:
        t = k @ pi_g_l @ k.conj().T
        out += t
        term_sq += core.hs_norm(t) ** 2
    lhs = core.hs_norm(out) ** 2
    rhs = 2.0 ** (-l * (s_out - phi))
    return L2BoundRecord(
        lhs=lhs,
        rhs=rhs,
        ok=bool(lhs <= rhs + 1e-9),
        superadditivity_ok=bool(lhs + 1e-12 >= term_sq),
    )
