"""Quantum channels in Kraus form, their dilations, and the information
quantities built on them: entropy exchange, coherent information,
entanglement fidelity, and the best-recovery (code) entanglement fidelity.

Channels are kept as explicit Kraus operator lists. Trace-decreasing maps are
first-class citizens: they arise from projecting channel outputs and the
fidelity machinery is defined on them directly, without renormalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import core
from ._budget import check_dim

TP_ATOL = 1e-9

TRACE_PRESERVING = "trace_preserving"
TRACE_DECREASING = "trace_decreasing"
INVALID = "invalid"


@dataclass
class KrausMap:
    """A completely positive map given by Kraus operators (dim_out x dim_in)."""

    kraus_ops: tuple
    dim_in: int
    dim_out: int
    kind: str

    def __post_init__(self):
        self.kraus_ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        for k in self.kraus_ops:
            if k.shape != (self.dim_out, self.dim_in):
                raise ValueError(
                    f"Kraus operator shape {k.shape} does not match "
                    f"({self.dim_out}, {self.dim_in})"
                )

    @property
    def n_kraus(self) -> int:
        return len(self.kraus_ops)


@dataclass
class StinespringDilation:
    """Isometry V: H -> K (x) E plus an environment projection."""

    isometry: np.ndarray
    dim_in: int
    dim_out: int
    dim_env: int
    env_projector: np.ndarray


@dataclass
class CompoundSet:
    """A finite set of channels sharing input/output dimensions."""

    name: str
    channels: tuple

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if not self.channels:
            raise ValueError("a compound set needs at least one channel")
        d_in = self.channels[0].dim_in
        d_out = self.channels[0].dim_out
        for ch in self.channels:
            if (ch.dim_in, ch.dim_out) != (d_in, d_out):
                raise ValueError("all channels in a compound set must share dimensions")

    @property
    def size(self) -> int:
        return len(self.channels)

    @property
    def dim_in(self) -> int:
        return self.channels[0].dim_in

    @property
    def dim_out(self) -> int:
        return self.channels[0].dim_out


@dataclass
class OptimizerConfig:
    """Knobs for the iterative optimizers; deterministic given the seed."""

    max_iters: int = 2000
    tolerance: float = 1e-7
    restarts: int = 1
    step_rule: str = "backtracking"
    seed: int = 0
    softmin_temp: float = 0.1

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


def verify_kind(kraus_ops, atol: float = TP_ATOL):
    """Classify a Kraus list (or KrausMap) as trace preserving/decreasing/invalid.

    Returns (kind, residual) where residual is the max-norm distance of
    sum K†K from the identity.
    """
    if isinstance(kraus_ops, KrausMap):
        kraus_ops = kraus_ops.kraus_ops
    ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
    d_in = ops[0].shape[1]
    gram = sum(k.conj().T @ k for k in ops)
    residual = float(np.max(np.abs(gram - np.eye(d_in))))
    if residual <= atol:
        return TRACE_PRESERVING, residual
    top = float(np.linalg.eigvalsh((gram + gram.conj().T) / 2)[-1])
    if top <= 1.0 + atol:
        return TRACE_DECREASING, residual
    return INVALID, residual


def make_kraus(kraus_ops, expect: str | None = None, atol: float = TP_ATOL) -> KrausMap:
    """Build a KrausMap, classifying it and rejecting invalid operator lists."""
    ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
    if not ops:
        raise ValueError("need at least one Kraus operator")
    d_out, d_in = ops[0].shape
    for k in ops:
        if k.shape != (d_out, d_in):
            raise ValueError("Kraus operators must share a common shape")
    kind, residual = verify_kind(ops, atol)
    if kind == INVALID:
        raise ValueError(f"Kraus list is not trace nonincreasing (residual {residual:.3e})")
    if expect == TRACE_PRESERVING and kind != TRACE_PRESERVING:
        raise ValueError(f"expected a trace-preserving map (residual {residual:.3e})")
    return KrausMap(tuple(ops), d_in, d_out, kind)


def apply(n: KrausMap, rho) -> np.ndarray:
    """Channel action sum_i K rho K†."""
    rho = core.as_matrix(rho)
    if rho.shape != (n.dim_in, n.dim_in):
        raise ValueError(f"state dim {rho.shape} does not match channel input {n.dim_in}")
    out = np.zeros((n.dim_out, n.dim_out), dtype=complex)
    for k in n.kraus_ops:
        out += k @ rho @ k.conj().T
    return out


def adjoint_apply(n: KrausMap, x) -> np.ndarray:
    """Adjoint map sum_i K† x K."""
    x = core.as_matrix(x)
    out = np.zeros((n.dim_in, n.dim_in), dtype=complex)
    for k in n.kraus_ops:
        out += k.conj().T @ x @ k
    return out


def compose(a: KrausMap, b: KrausMap) -> KrausMap:
    """a after b, with Kraus set {a_i b_j}."""
    if b.dim_out != a.dim_in:
        raise ValueError(f"cannot compose: inner dims {b.dim_out} vs {a.dim_in}")
    ops = [ka @ kb for ka in a.kraus_ops for kb in b.kraus_ops]
    kind, _ = verify_kind(ops)
    return KrausMap(tuple(ops), b.dim_in, a.dim_out, kind)


def tensor_power(n: KrausMap, l: int, budget: int | None = None) -> KrausMap:
    """l-fold tensor power with explicit Kraus words (count n_kraus**l)."""
    if l < 1:
        raise ValueError("tensor power needs l >= 1")
    check_dim(n.dim_in**l, budget, "tensor-power input dimension")
    check_dim(n.dim_out**l, budget, "tensor-power output dimension")
    check_dim(n.n_kraus**l, budget, "tensor-power Kraus word count")
    words = list(n.kraus_ops)
    for _ in range(l - 1):
        words = [np.kron(w, k) for w in words for k in n.kraus_ops]
    kind = n.kind
    return KrausMap(tuple(words), n.dim_in**l, n.dim_out**l, kind)


def average(cset: CompoundSet) -> KrausMap:
    """Uniform mixture channel (1/N) sum_j N_j with Kraus set {K_{j,i}/sqrt(N)}."""
    scale = 1.0 / np.sqrt(cset.size)
    ops = [scale * k for ch in cset.channels for k in ch.kraus_ops]
    kind, _ = verify_kind(ops)
    return KrausMap(tuple(ops), cset.dim_in, cset.dim_out, kind)


def stinespring(n: KrausMap) -> StinespringDilation:
    """Dilation with environment dimension = Kraus count: V phi = sum (K_i phi) (x) e_i.

    For trace-preserving maps V is an isometry; for trace-decreasing maps it is
    a contraction and the environment projection stays the identity.
    """
    m = n.n_kraus
    v = np.zeros((n.dim_out * m, n.dim_in), dtype=complex)
    v3 = v.reshape(n.dim_out, m, n.dim_in)
    for i, k in enumerate(n.kraus_ops):
        v3[:, i, :] = k
    return StinespringDilation(v, n.dim_in, n.dim_out, m, np.eye(m, dtype=complex))


def complementary(n: KrausMap) -> KrausMap:
    """Environment output map rho -> tr_K(V rho V†), as a KrausMap into C^m."""
    m = n.n_kraus
    ops = []
    for k_out in range(n.dim_out):
        c = np.zeros((m, n.dim_in), dtype=complex)
        for i, k in enumerate(n.kraus_ops):
            c[i, :] = k[k_out, :]
        ops.append(c)
    kind, _ = verify_kind(ops)
    return KrausMap(tuple(ops), n.dim_in, m, kind)


def entropy_exchange(rho, n: KrausMap) -> float:
    """Entropy in bits of (id (x) N) applied to a purification of rho.

    Computed through the Kraus overlap matrix W_ij = tr(K_i rho K_j†), whose
    spectrum matches the joint output state. For trace-decreasing maps the
    subnormalized spectrum is used as-is (no renormalization).
    """
    rho = core.as_matrix(rho)
    if rho.shape != (n.dim_in, n.dim_in):
        raise ValueError("state dimension does not match channel input")
    m = n.n_kraus
    w = np.zeros((m, m), dtype=complex)
    pre = [k @ rho for k in n.kraus_ops]
    for i in range(m):
        for j in range(i, m):
            w[i, j] = np.vdot(n.kraus_ops[j], pre[i])
            w[j, i] = np.conj(w[i, j])
    return core.entropy_of_spectrum(np.linalg.eigvalsh(w))


def coherent_information(rho, n: KrausMap) -> float:
    """S(N(rho)) - S_e(rho, N) in bits, for trace-preserving N."""
    if n.kind != TRACE_PRESERVING:
        raise ValueError("coherent information requires a trace-preserving map")
    return core.von_neumann_entropy(apply(n, rho)) - entropy_exchange(rho, n)


def entanglement_fidelity(rho, n: KrausMap) -> float:
    """F_e(rho, N) = sum_i |tr(rho K_i)|^2 for end-to-end maps.

    Equals the purification overlap <psi,(id (x) N)(psi psi†) psi>; defined for
    trace-decreasing maps as well.
    """
    rho = core.as_matrix(rho)
    if n.dim_in != n.dim_out or rho.shape != (n.dim_in, n.dim_in):
        raise ValueError("entanglement fidelity needs an end-to-end map on the state space")
    val = 0.0
    for k in n.kraus_ops:
        t = np.trace(rho @ k)
        val += (t * np.conj(t)).real
    return float(val)


def entanglement_fidelity_via_purification(rho, n: KrausMap) -> float:
    """Direct purification-based evaluation; cross-checks the closed form."""
    rho = core.as_matrix(rho)
    d = rho.shape[0]
    psi = core.purify(rho)
    joint = np.outer(psi, psi.conj())
    out = np.zeros_like(joint)
    eye = np.eye(d, dtype=complex)
    for k in n.kraus_ops:
        big = np.kron(eye, k)
        out += big @ joint @ big.conj().T
    return float(np.vdot(psi, out @ psi).real)


def choi(n: KrausMap) -> np.ndarray:
    """Choi matrix on input (x) output, J = sum_xy |x><y| (x) N(|x><y|)."""
    d_in, d_out = n.dim_in, n.dim_out
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in n.kraus_ops:
        v = k.T.reshape(-1)
        j += np.outer(v, v.conj())
    return j


def choi_to_kraus(j, dims, atol: float = 1e-9, cutoff: float = 1e-12) -> KrausMap:
    """Extract a minimal Kraus list from a PSD Choi matrix on input (x) output."""
    d_in, d_out = int(dims[0]), int(dims[1])
    j = core.as_matrix(j)
    if j.shape != (d_in * d_out, d_in * d_out):
        raise ValueError(f"Choi shape {j.shape} does not match dims {dims}")
    h = (j + j.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    if vals[0] < -atol:
        raise ValueError(f"Choi matrix is not PSD: min eigenvalue {vals[0]:.3e}")
    ops = []
    for mu, v in zip(vals, vecs.T):
        if mu <= cutoff:
            continue
        ops.append(np.sqrt(mu) * v.reshape(d_in, d_out).T)
    if not ops:
        ops = [np.zeros((d_out, d_in), dtype=complex)]
        return KrausMap(tuple(ops), d_in, d_out, TRACE_DECREASING)
    kind, _ = verify_kind(ops, atol=1e-8)
    if kind == INVALID:
        raise ValueError("Choi matrix is not trace nonincreasing")
    return KrausMap(tuple(ops), d_in, d_out, kind)


def minimal_kraus(n: KrausMap) -> KrausMap:
    """Re-express the map with the minimal Kraus count (Choi rank)."""
    reduced = choi_to_kraus(choi(n), (n.dim_in, n.dim_out))
    if len(reduced.kraus_ops) >= n.n_kraus:
        return n
    return replace(reduced, kind=n.kind)


def transfer_matrix(n: KrausMap) -> np.ndarray:
    """Superoperator tensor T[o,o',s,s'] = sum_m K_m[o,s] conj(K_m[o',s'])."""
    t = np.zeros((n.dim_out, n.dim_out, n.dim_in, n.dim_in), dtype=complex)
    for k in n.kraus_ops:
        t += np.einsum("os,pt->opst", k, k.conj())
    return t


def apply_tensor_power(n: KrausMap, l: int, rho_l, budget: int | None = None) -> np.ndarray:
    """Apply N^(x)l to a state on the l-fold input space without Kraus words.

    Contracts the single-site transfer tensor site by site, so the cost is
    polynomial in the output dimension rather than the Kraus word count.
    """
    d, kd = n.dim_in, n.dim_out
    rho_l = core.as_matrix(rho_l)
    if rho_l.shape != (d**l, d**l):
        raise ValueError("state dimension does not match the tensor-power input")
    check_dim(kd**l, budget, "tensor-power output dimension")
    t = transfer_matrix(n)
    x = rho_l
    for site in range(l):
        a = kd**site
        r = d ** (l - site - 1)
        x6 = x.reshape(a, d, r, a, d, r)
        x = np.einsum("opst,asrbtq->aorbpq", t, x6, optimize=True)
        x = x.reshape(a * kd * r, a * kd * r)
    return x


# --- channel zoo -------------------------------------------------------------


def identity_channel(d: int) -> KrausMap:
    return make_kraus([np.eye(d, dtype=complex)], expect=TRACE_PRESERVING)


def unitary_channel(u) -> KrausMap:
    u = core.as_matrix(u)
    return make_kraus([u], expect=TRACE_PRESERVING)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def fully_depolarizing_qubit() -> KrausMap:
    """Constant-output qubit channel rho -> I/2, Kraus {sigma_i / 2}."""
    ops = [np.eye(2, dtype=complex) / 2, PAULI_X / 2, PAULI_Y / 2, PAULI_Z / 2]
    return make_kraus(ops, expect=TRACE_PRESERVING)


def dephasing_channel(p: float, axis: str = "z") -> KrausMap:
    """Qubit dephasing {sqrt(1-p) I, sqrt(p) sigma_axis}."""
    sigma = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}[axis]
    ops = [np.sqrt(1 - p) * np.eye(2, dtype=complex), np.sqrt(p) * sigma]
    return make_kraus(ops, expect=TRACE_PRESERVING)


def erasure_channel(p: float, d: int = 2) -> KrausMap:
    """Erasure channel d -> d+1: with probability p the input is replaced by a
    flag state orthogonal to the embedded input space."""
    embed = np.zeros((d + 1, d), dtype=complex)
    embed[:d, :] = np.eye(d)
    ops = [np.sqrt(1 - p) * embed]
    for i in range(d):
        k = np.zeros((d + 1, d), dtype=complex)
        k[d, i] = np.sqrt(p)
        ops.append(k)
    return make_kraus(ops, expect=TRACE_PRESERVING)


def random_cptp(d_in: int, d_out: int, env_dim: int, rng: np.random.Generator) -> KrausMap:
    """Random channel from a Haar isometry into output (x) environment.

    The environment is enlarged if needed so the isometry exists
    (d_out * env >= d_in).
    """
    env = max(env_dim, -(-d_in // d_out))
    big = core.haar_unitary_from_rng(d_out * env, rng)
    v = big[:, :d_in]
    v3 = v.reshape(d_out, env, d_in)
    ops = [v3[:, e, :] for e in range(env)]
    return make_kraus(ops, expect=TRACE_PRESERVING)


def random_trace_decreasing(d_in: int, d_out: int, env_dim: int, rng: np.random.Generator) -> KrausMap:
    """Random trace-decreasing map: a random channel clipped by a random output
    projector, then scaled."""
    ch = random_cptp(d_in, d_out, env_dim, rng)
    u = core.haar_unitary_from_rng(d_out, rng)
    rank = int(rng.integers(1, d_out + 1))
    q = u[:, :rank] @ u[:, :rank].conj().T
    scale = float(rng.uniform(0.6, 1.0))
    ops = [np.sqrt(scale) * (q @ k) for k in ch.kraus_ops]
    return make_kraus(ops)


# --- recovery optimization ---------------------------------------------------


def transpose_recovery(rho, n: KrausMap) -> KrausMap:
    """Transpose-channel recovery for N at rho, completed to trace preserving.

    Kraus set {rho^(1/2) K_i† N(rho)^(-1/2)} on the support of N(rho); the
    orthocomplement of the support is routed to a fixed pure state.
    """
    rho = core.hermitize(rho)
    sigma = core.hermitize(apply(n, rho))
    inv_sqrt = core.matrix_inv_sqrt_psd(sigma)
    rho_sqrt = core.matrix_sqrt_psd(rho)
    ops = [rho_sqrt @ k.conj().T @ inv_sqrt for k in n.kraus_ops]
    vals, vecs = np.linalg.eigh(sigma)
    rho_vals, rho_vecs = core.sorted_eigh(rho)
    target = rho_vecs[:, 0]
    for lam, v in zip(vals, vecs.T):
        if lam > core.EIG_CUTOFF:
            continue
        ops.append(np.outer(target, v.conj()))
    return make_kraus(ops, expect=TRACE_PRESERVING, atol=1e-7)


@dataclass
class OptimalRecoveryResult:
    value: float
    recovery: KrausMap
    converged: bool
    iterations: int
    objective_history: list = field(default_factory=list)


def _objective_matrix(rho, n: KrausMap) -> np.ndarray:
    """F_e(rho, R∘N) = tr(J_R C): PSD objective matrix on channel-output (x) input."""
    d, kd = n.dim_in, n.dim_out
    c = np.zeros((kd * d, kd * d), dtype=complex)
    for k in n.kraus_ops:
        v = np.conj(k @ rho).reshape(-1)
        c += np.outer(v, v.conj())
    return c


def _psd_project(m: np.ndarray) -> np.ndarray:
    h = (m + m.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.conj().T


def _trace_out_second(j: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    return np.trace(j.reshape(d_in, d_out, d_in, d_out), axis1=1, axis2=3)


def _tp_project(j: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    diff = (np.eye(d_in) - _trace_out_second(j, d_in, d_out)) / d_out
    out = j.copy().reshape(d_in, d_out, d_in, d_out)
    for i in range(d_out):
        out[:, i, :, i] += diff
    return out.reshape(j.shape)


def project_choi_cptp(j, d_in: int, d_out: int, max_iters: int = 150, tol: float = 1e-22) -> np.ndarray:
    """Dykstra alternating projection onto {J PSD} ∩ {tr_out J = I}.

    Returns the PSD-projected iterate of the final cycle, so the result is
    exactly PSD with a trace-constraint residual of the order of the stopping
    criterion.
    """
    j = core.as_matrix(j)
    old_cp = np.zeros_like(j)
    old_tp = np.zeros_like(j)
    last_cp_proj = np.zeros_like(j)
    last = j
    cp = j
    eye = np.eye(d_in)
    for _ in range(max_iters):
        pre_cp = last - old_cp
        cp = _psd_project(pre_cp)
        if np.max(np.abs(_trace_out_second(cp, d_in, d_out) - eye)) < 1e-13:
            return cp
        new_cp = cp - pre_cp
        pre_tp = cp - old_tp
        new = _tp_project(pre_tp, d_in, d_out)
        new_tp = new - pre_tp

        crit = (
            np.vdot(new_cp - old_cp, new_cp - old_cp).real
            + np.vdot(new_tp - old_tp, new_tp - old_tp).real
            + 2 * abs(np.vdot(old_tp, new - last))
            + 2 * abs(np.vdot(old_cp, cp - last_cp_proj))
        )
        old_cp, old_tp, last_cp_proj, last = new_cp, new_tp, cp, new
        if crit < tol:
            break
    return cp


def optimal_code_fidelity(rho, n: KrausMap, cfg: OptimizerConfig | None = None) -> OptimalRecoveryResult:
    """Maximize F_e(rho, R∘N) over recovery channels R by projected ascent on
    the recovery's Choi matrix.

    The objective is linear in the Choi matrix, so projected gradient steps
    with exact projection are monotone; the iteration starts from the
    transpose recovery, which already certifies a lower bound.
    """
    cfg = cfg or OptimizerConfig()
    rho = core.hermitize(rho)
    c = _objective_matrix(rho, n)
    d_in_rec, d_out_rec = n.dim_out, n.dim_in

    j = choi(transpose_recovery(rho, n))
    top = float(np.linalg.eigvalsh(c)[-1])
    step = 0.5 / top if top > 0 else 1.0

    f = float(np.vdot(c, j).real)
    history = [f]
    converged = False
    iterations = 0
    for t in range(cfg.max_iters):
        if f >= 1.0 - 1e-12:
            converged = True
            break
        iterations = t + 1
        j_new = project_choi_cptp(j + step * c, d_in_rec, d_out_rec)
        f_new = float(np.vdot(c, j_new).real)
        if f_new < f:
            # approximate projection produced no progress: fixed point reached
            converged = True
            break
        j = j_new
        history.append(f_new)
        if abs(f_new - f) <= cfg.tolerance:
            converged = True
            f = f_new
            break
        f = f_new

    recovery = choi_to_kraus(j, (d_in_rec, d_out_rec))
    value = entanglement_fidelity(rho, compose(recovery, n))
    return OptimalRecoveryResult(value, recovery, converged, iterations, history)
