"""Dense complex linear algebra and state-level primitives.

Everything operates on explicit numpy arrays: density operators are square
complex matrices (Hermitian, PSD, unit trace), pure states are unit vectors,
subspaces are matrices with orthonormal columns. Validation helpers symmetrize
or reject inputs instead of silently hiding drift.
"""

from __future__ import annotations

import numpy as np

ATOL = 1e-9
EIG_CUTOFF = 1e-12
LOG2E = float(np.log2(np.e))


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of ndim {m.ndim}")
    return m


def as_vector(a) -> np.ndarray:
    v = np.asarray(a, dtype=complex).reshape(-1)
    return v


def hermitize(m, atol: float = ATOL) -> np.ndarray:
    """Symmetrize (M + M†)/2, rejecting matrices with residual above atol."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix is not square: {m.shape}")
    residual = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if residual > atol:
        raise ValueError(f"matrix is not Hermitian: residual {residual:.3e} > {atol:.1e}")
    return (m + m.conj().T) / 2


def as_density(m, atol: float = ATOL) -> np.ndarray:
    """Validate and return a density operator (Hermitian, PSD, unit trace)."""
    rho = hermitize(m, atol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValueError(f"trace is {tr}, not 1 within {atol:.1e}")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -atol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {lo:.3e}")
    return rho


def as_unit_vector(v, atol: float = ATOL) -> np.ndarray:
    vec = as_vector(v)
    nrm = np.linalg.norm(vec)
    if abs(nrm - 1.0) > atol:
        raise ValueError(f"vector norm is {nrm}, not 1 within {atol:.1e}")
    return vec


def as_projector(p, atol: float = ATOL) -> np.ndarray:
    """Validate an orthogonal projector (Hermitian, idempotent)."""
    q = hermitize(p, atol)
    residual = np.max(np.abs(q @ q - q)) if q.size else 0.0
    if residual > atol:
        raise ValueError(f"matrix is not idempotent: residual {residual:.3e}")
    return q


def check_subspace_basis(b, atol: float = ATOL) -> np.ndarray:
    """Validate a (d x k) matrix with orthonormal columns spanning a subspace."""
    mat = as_matrix(b)
    d, k = mat.shape
    if k > d:
        raise ValueError(f"subspace rank {k} exceeds ambient dimension {d}")
    gram = mat.conj().T @ mat
    residual = np.max(np.abs(gram - np.eye(k)))
    if residual > atol:
        raise ValueError(f"columns are not orthonormal: residual {residual:.3e}")
    return mat


def projector_from_basis(b) -> np.ndarray:
    mat = check_subspace_basis(b)
    return mat @ mat.conj().T


def tensor(a, b) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_all(mats) -> np.ndarray:
    out = as_matrix(mats[0])
    for m in mats[1:]:
        out = np.kron(out, as_matrix(m))
    return out


def kron_power(a, l: int) -> np.ndarray:
    if l < 1:
        raise ValueError("power must be >= 1")
    out = np.asarray(a, dtype=complex)
    for _ in range(l - 1):
        out = np.kron(out, a)
    return out


def partial_trace(m, dims, traced) -> np.ndarray:
    """Trace out the named tensor factors of a multipartite operator.

    dims is the tuple of factor dimensions; traced selects factors by index,
    or 'A'/'B' for the bipartite case. The trace of the output equals the
    trace of the input.
    """
    m = as_matrix(m)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"operator shape {m.shape} does not match factor dims {dims}")
    if isinstance(traced, str):
        if len(dims) != 2 or traced not in ("A", "B"):
            raise ValueError("side labels 'A'/'B' require exactly two factors")
        traced = [0] if traced == "A" else [1]
    elif isinstance(traced, (int, np.integer)):
        traced = [int(traced)]
    traced = sorted(set(int(i) for i in traced))
    n = len(dims)
    for i in traced:
        if i < 0 or i >= n:
            raise ValueError(f"traced factor index {i} out of range for {n} factors")
    if len(traced) == n:
        raise ValueError("cannot trace out every factor")

    t = m.reshape(dims + dims)
    remaining = list(dims)
    for idx in reversed(traced):
        t = np.trace(t, axis1=idx, axis2=idx + len(remaining))
        del remaining[idx]
    kept = int(np.prod(remaining))
    return t.reshape(kept, kept)


def sorted_eigh(m, atol: float = ATOL):
    """Eigendecomposition with eigenvalues sorted descending."""
    h = hermitize(m, atol)
    vals, vecs = np.linalg.eigh(h)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def purify(rho) -> np.ndarray:
    """Return a canonical purification on ancilla (x) system.

    Built from the spectral decomposition: psi = sum_m sqrt(lam_m) e_m (x) v_m
    with e_m the standard ancilla basis and v_m the eigenvectors of rho.
    """
    rho = as_density(rho)
    d = rho.shape[0]
    vals, vecs = sorted_eigh(rho)
    vals = np.clip(vals, 0.0, None)
    psi = np.zeros(d * d, dtype=complex)
    for m in range(d):
        if vals[m] <= EIG_CUTOFF:
            continue
        psi += np.sqrt(vals[m]) * np.kron(_basis_vec(d, m), vecs[:, m])
    return psi / np.linalg.norm(psi)


def _basis_vec(d: int, i: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[i] = 1.0
    return e


def schmidt(psi, dims):
    """Schmidt decomposition of a bipartite unit vector.

    Returns (coefficients sorted descending, basis_a columns, basis_b columns)
    with psi = sum_k c_k a_k (x) b_k.
    """
    da, db = int(dims[0]), int(dims[1])
    vec = as_unit_vector(psi)
    if vec.size != da * db:
        raise ValueError(f"vector length {vec.size} does not match dims {da}x{db}")
    m = vec.reshape(da, db)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return s, u, vh.T


def entropy_of_spectrum(vals) -> float:
    """Shannon entropy in bits of a nonnegative spectrum; values <= cutoff are
    treated as exact zeros."""
    lam = np.asarray(vals, dtype=float)
    lam = lam[lam > EIG_CUTOFF]
    if lam.size == 0:
        return 0.0
    return float(-np.sum(lam * np.log2(lam)))


def von_neumann_entropy(rho) -> float:
    """Entropy -tr(rho log2 rho) in bits; accepts subnormalized PSD inputs."""
    h = hermitize(rho)
    return entropy_of_spectrum(np.linalg.eigvalsh(h))


def entropy_blocked(m, zero_tol: float = 1e-14) -> float:
    """Entropy of a Hermitian PSD matrix, splitting into connected sparsity
    blocks before eigendecomposition.

    Structured operators (direct sums in disguise) decompose into many small
    blocks, which keeps large tensor-power entropies tractable; a dense matrix
    degrades to one full eigendecomposition.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    h = as_matrix(m)
    n = h.shape[0]
    if n <= 256:
        return von_neumann_entropy(h)
    scale = np.max(np.abs(h))
    if scale == 0.0:
        return 0.0
    adj = csr_matrix(np.abs(h) > zero_tol * scale)
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp == 1:
        return entropy_of_spectrum(np.linalg.eigvalsh((h + h.conj().T) / 2))
    vals = []
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        sub = h[np.ix_(idx, idx)]
        sub = (sub + sub.conj().T) / 2
        vals.append(np.linalg.eigvalsh(sub))
    return entropy_of_spectrum(np.concatenate(vals))


def trace_norm(a) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(as_matrix(a), compute_uv=False)))


def hs_norm(a) -> float:
    """Hilbert-Schmidt (Frobenius) norm sqrt(tr(a† a))."""
    return float(np.linalg.norm(as_matrix(a)))


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product tr(a† b)."""
    return complex(np.vdot(as_matrix(a), as_matrix(b)))


def maximally_mixed(basis) -> np.ndarray:
    """Maximally mixed state B B†/k on the subspace spanned by the basis columns."""
    b = check_subspace_basis(basis)
    k = b.shape[1]
    return (b @ b.conj().T) / k


def maximally_mixed_dim(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def full_basis(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def matrix_sqrt_psd(m, cutoff: float = EIG_CUTOFF) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitize(m))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def matrix_inv_sqrt_psd(m, cutoff: float = EIG_CUTOFF) -> np.ndarray:
    """Pseudo-inverse square root restricted to the support."""
    vals, vecs = np.linalg.eigh(hermitize(m))
    inv = np.where(vals > cutoff, 1.0 / np.sqrt(np.clip(vals, cutoff, None)), 0.0)
    return (vecs * inv) @ vecs.conj().T


def log2_on_support(m, cutoff: float = EIG_CUTOFF):
    """Return (log2 of m restricted to its support, support projector)."""
    vals, vecs = np.linalg.eigh(hermitize(m))
    on = vals > cutoff
    logs = np.where(on, np.log2(np.clip(vals, cutoff, None)), 0.0)
    log_m = (vecs * logs) @ vecs.conj().T
    supp = (vecs * on.astype(float)) @ vecs.conj().T
    return log_m, supp


def haar_unitary_from_rng(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via complex Ginibre + QR with phase-fixed R."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    phases = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * phases


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank state rho = G G† / tr(G G†) with complex Gaussian G."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2
