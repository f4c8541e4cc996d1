"""Decoupling states and bound, Haar-random codes, and the one-shot
average-code fidelity bound with its Monte Carlo verification.

The decoupling bound lower-bounds the best recoverable entanglement fidelity
by how close the joint reference-environment state is to a product; the
one-shot bound averages the best code fidelity over Haar-rotated code
subspaces and is verified here by direct Monte Carlo over random codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .channels import (
    CompoundSet,
    KrausMap,
    OptimizerConfig,
    StinespringDilation,
    apply,
    minimal_kraus,
    optimal_code_fidelity,
    stinespring,
    verify_kind,
)


@dataclass
class DecouplingTriple:
    """Reduced states of the normalized joint reference/output/environment
    vector, together with the channel weight w = tr(N(rho))."""

    rho_ae: np.ndarray
    rho_a: np.ndarray
    rho_e: np.ndarray
    w: float
    rho_out: np.ndarray


@dataclass
class HaarSampler:
    """Deterministic Haar-unitary stream: (seed, counter) fixes each draw."""

    dim: int
    seed: int
    counter: int = 0

    def rng_for(self, counter: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(counter,)))

    def at(self, counter: int) -> "HaarSampler":
        return HaarSampler(self.dim, self.seed, counter)


def haar_unitary(sampler: HaarSampler) -> np.ndarray:
    """Draw the next Haar unitary from the sampler's stream (advances counter)."""
    rng = sampler.rng_for(sampler.counter)
    sampler.counter += 1
    return core.haar_unitary_from_rng(sampler.dim, rng)


def embed_unitary(u, ambient_basis) -> np.ndarray:
    """Extend a unitary on a subspace to the ambient space (identity on the
    orthocomplement)."""
    u = core.as_matrix(u)
    b = core.check_subspace_basis(ambient_basis)
    d, k = b.shape
    if u.shape != (k, k):
        raise ValueError(f"unitary shape {u.shape} does not match subspace rank {k}")
    p = b @ b.conj().T
    return b @ u @ b.conj().T + np.eye(d) - p


def decoupling_states(rho, n: KrausMap, dilation: StinespringDilation | None = None) -> DecouplingTriple:
    """Build the normalized joint vector from the channel dilation applied to a
    purification of rho, and return its three reduced states plus the weight."""
    rho = core.as_density(rho)
    dil = dilation or stinespring(n)
    d = rho.shape[0]
    kd = dil.dim_out
    m = dil.dim_env

    psi = core.purify(rho).reshape(d, d)  # (ancilla, system)
    joint = psi @ dil.isometry.T  # (ancilla, out*env)
    pe = core.as_projector(dil.env_projector, atol=1e-8)
    if not np.allclose(pe, np.eye(m)):
        joint = joint.reshape(d, kd, m) @ pe.T
        joint = joint.reshape(d, kd * m)
    w = float(np.linalg.norm(joint) ** 2)
    if w <= 1e-12:
        raise ValueError("channel annihilates the state: tr(N(rho)) ~ 0")
    vec = (joint / np.sqrt(w)).reshape(-1)
    dm = np.outer(vec, vec.conj())
    dims = (d, kd, m)
    return DecouplingTriple(
        rho_ae=core.partial_trace(dm, dims, traced=[1]),
        rho_a=core.partial_trace(dm, dims, traced=[1, 2]),
        rho_e=core.partial_trace(dm, dims, traced=[0, 1]),
        w=w,
        rho_out=core.partial_trace(dm, dims, traced=[0, 2]),
    )


def decoupling_bound(t: DecouplingTriple) -> float:
    """Lower bound w^2 - w ||rho_ae - rho_a (x) rho_e||_1 on the best
    recoverable entanglement fidelity (may be negative, reported as-is).

    The leading factor is w^2, not w: a rank-one projector compression of the
    maximally mixed qubit decouples perfectly (the norm term vanishes) yet its
    best recovery fidelity is exactly w^2 = 1/4, which pins the constant. For
    trace-preserving maps (w = 1) this is the usual decoupling bound.
    """
    gap = t.rho_ae - np.kron(t.rho_a, t.rho_e)
    return t.w * (t.w - core.trace_norm(gap))


def averaged_dilation(cset: CompoundSet) -> StinespringDilation:
    """Dilation of the uniform average channel with environment C^{n_max} (x) C^N.

    phi maps to sum_j sum_i (1/sqrt(N)) (K_{j,i} phi) (x) e_i (x) f_j, with the
    channels ordered so their Kraus counts are nondecreasing.
    """
    channels = sorted(cset.channels, key=lambda ch: ch.n_kraus)
    n_max = channels[-1].n_kraus
    nch = len(channels)
    d, kd = cset.dim_in, cset.dim_out
    dim_env = n_max * nch
    v = np.zeros((kd * dim_env, d), dtype=complex)
    v4 = v.reshape(kd, n_max, nch, d)
    scale = 1.0 / np.sqrt(nch)
    for j, ch in enumerate(channels):
        for i, k in enumerate(ch.kraus_ops):
            v4[:, i, j, :] = scale * k
    return StinespringDilation(v, d, kd, dim_env, np.eye(dim_env, dtype=complex))


@dataclass
class OneShotBoundReport:
    """Building blocks and outcome of one one-shot bound verification."""

    k: int
    n_j: list
    l2_norms: list
    total_weight: float
    rhs: float
    mc_mean: float = float("nan")
    mc_stderr: float = float("nan")
    trials: int = 0
    seed: int = 0
    converged: bool = True
    ok: bool = True
    values: list = field(default_factory=list)


def oneshot_bound_rhs(k: int, maps, pi_g) -> OneShotBoundReport:
    """tr(Nbar(pi_G)) - 2 sum_j sqrt(k n_j) ||N_j(pi_G)||_2 for the uniform
    average Nbar, with n_j the minimal Kraus counts."""
    if k < 1:
        raise ValueError("code dimension k must be >= 1")
    pi_g = core.hermitize(pi_g)
    reduced = [minimal_kraus(m) for m in maps]
    n_j = [m.n_kraus for m in reduced]
    outs = [apply(m, pi_g) for m in reduced]
    l2 = [core.hs_norm(o) for o in outs]
    total = float(np.mean([np.trace(o).real for o in outs]))
    rhs = total - 2.0 * sum(np.sqrt(k * nj) * l for nj, l in zip(n_j, l2))
    return OneShotBoundReport(k=k, n_j=n_j, l2_norms=l2, total_weight=total, rhs=float(rhs))


def mc_code_fidelity(
    maps,
    g_basis,
    k: int,
    trials: int,
    sampler: HaarSampler,
    cfg: OptimizerConfig | None = None,
) -> OneShotBoundReport:
    """Monte Carlo mean of the best-recovery fidelity of Haar-rotated codes.

    Per trial: draw u on the code-carrier subspace, rotate the fixed k-dim
    code, and maximize the entanglement fidelity of the averaged channel over
    recoveries. The report records whether mean + 3 sigma clears the bound.
    """
    cfg = cfg or OptimizerConfig()
    b = core.check_subspace_basis(g_basis)
    d_g = b.shape[1]
    if not (1 <= k <= d_g):
        raise ValueError(f"code dimension {k} out of range for subspace of dim {d_g}")
    if sampler.dim != d_g:
        raise ValueError("sampler dimension must match the code-carrier subspace")
    reduced = [minimal_kraus(m) for m in maps]
    report = oneshot_bound_rhs(k, reduced, core.maximally_mixed(b))

    e_basis = b[:, :k]
    pi_e = core.maximally_mixed(e_basis)
    scale = 1.0 / np.sqrt(len(reduced))

    values = []
    all_converged = True
    for i in range(trials):
        u = core.haar_unitary_from_rng(d_g, sampler.rng_for(i))
        u_full = embed_unitary(u, b)
        ops = [scale * (kk @ u_full) for m in reduced for kk in m.kraus_ops]
        kind, _ = verify_kind(ops)
        nu = KrausMap(tuple(ops), reduced[0].dim_in, reduced[0].dim_out, kind)
        res = optimal_code_fidelity(pi_e, nu, cfg)
        values.append(res.value)
        all_converged &= res.converged

    arr = np.asarray(values)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    report.mc_mean = mean
    report.mc_stderr = stderr
    report.trials = trials
    report.seed = sampler.seed
    report.converged = bool(all_converged)
    report.ok = bool(mean + 3.0 * stderr + 1e-6 >= report.rhs)
    report.values = values
    return report


def cross_term_bound_check(l_mat, d_mat, atol: float = 1e-12):
    """For elementwise-nonnegative matrices with dominated off-diagonals,
    check (1/N) sum_jl sqrt(L_jl D_jl) <= 2 sum_j sqrt(L_jj D_jj)."""
    l_mat = np.asarray(l_mat, dtype=float)
    d_mat = np.asarray(d_mat, dtype=float)
    if l_mat.shape != d_mat.shape or l_mat.ndim != 2 or l_mat.shape[0] != l_mat.shape[1]:
        raise ValueError("expected two square matrices of equal size")
    if (l_mat < -atol).any() or (d_mat < -atol).any():
        raise ValueError("matrices must be elementwise nonnegative")
    n = l_mat.shape[0]
    diag_l = np.diag(l_mat)
    diag_d = np.diag(d_mat)
    for j in range(n):
        for m in range(n):
            if l_mat[j, m] > min(diag_l[j], diag_l[m]) + atol:
                raise ValueError(f"L[{j},{m}] exceeds min(L[{j},{j}], L[{m},{m}])")
            if d_mat[j, m] > max(diag_d[j], diag_d[m]) + atol:
                raise ValueError(f"D[{j},{m}] exceeds max(D[{j},{j}], D[{m},{m}])")
    lhs = float(np.sum(np.sqrt(l_mat * d_mat)) / n)
    rhs = float(2.0 * np.sum(np.sqrt(diag_l * diag_d)))
    return lhs, rhs, bool(lhs <= rhs + 1e-12)


def haar_form_average(x, y, p, g_basis, trials: int, sampler: HaarSampler):
    """Monte Carlo vs closed form for the Haar average of the code sesquilinear
    form b(x, y) = tr(P x† P y) - (1/k) tr(P x†) tr(P y), P = U p U†."""
    x = core.as_matrix(x)
    y = core.as_matrix(y)
    b = core.check_subspace_basis(g_basis)
    p = core.as_projector(p, atol=1e-8)
    d = b.shape[1]
    k = int(round(np.trace(p).real))
    if k < 1 or d < 2:
        raise ValueError("need subspace dim >= 2 and projector rank >= 1")
    if sampler.dim != d:
        raise ValueError("sampler dimension must match the carrier subspace")

    p_g = b @ b.conj().T
    exact = (k**2 - 1) / (d**2 - 1) * np.trace(p_g @ x.conj().T @ p_g @ y)
    exact += (1 - k**2) / (d * (d**2 - 1)) * np.trace(p_g @ x.conj().T) * np.trace(p_g @ y)
    exact = complex(exact)

    samples = np.empty(trials, dtype=complex)
    for i in range(trials):
        u = core.haar_unitary_from_rng(d, sampler.rng_for(i))
        u_full = embed_unitary(u, b)
        pu = u_full @ p @ u_full.conj().T
        t1 = np.trace(pu @ x.conj().T @ pu @ y)
        t2 = np.trace(pu @ x.conj().T) * np.trace(pu @ y)
        samples[i] = t1 - t2 / k
    mc = complex(samples.mean())
    if trials > 1:
        var = samples.real.var(ddof=1) + samples.imag.var(ddof=1)
        stderr = float(np.sqrt(var / trials))
    else:
        stderr = 0.0
    return mc, exact, stderr


def output_overlap_matrices(maps, pi_g):
    """Gram matrix D_jl = <N_j(pi_G), N_l(pi_G)>_HS and the Kraus-count matrix
    L_jl = min(n_j, n_l) (minimal counts)."""
    pi_g = core.hermitize(pi_g)
    reduced = [minimal_kraus(m) for m in maps]
    outs = [apply(m, pi_g) for m in reduced]
    n = len(reduced)
    d_mat = np.zeros((n, n))
    l_mat = np.zeros((n, n))
    for j in range(n):
        for m in range(n):
            d_mat[j, m] = core.hs_inner(outs[j], outs[m]).real
            l_mat[j, m] = min(reduced[j].n_kraus, reduced[m].n_kraus)
    return d_mat, l_mat


def rotated_code_overlap(map_j: KrausMap, map_l: KrausMap, u_full, p):
    """Per-code overlap statistic: the double Kraus sum of the code
    sesquilinear form at x = (K_{j,i} u)† (K_{l,r} u)."""
    p = core.as_projector(p, atol=1e-8)
    k = int(round(np.trace(p).real))
    total = 0.0
    for ki in map_j.kraus_ops:
        ai = ki @ u_full
        for kr in map_l.kraus_ops:
            ar = kr @ u_full
            x = ai.conj().T @ ar
            t1 = np.trace(p @ x.conj().T @ p @ x).real
            t2 = abs(np.trace(p @ x)) ** 2
            total += t1 - t2 / k
    return float(total)
