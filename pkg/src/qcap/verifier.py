"""Property-based verification of the standalone inequalities, plus the suite
driver that aggregates every check into one machine-readable report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .channels import (
    KrausMap,
    OptimizerConfig,
    compose,
    entanglement_fidelity,
    dephasing_channel,
    make_kraus,
    optimal_code_fidelity,
    random_cptp,
    random_trace_decreasing,
    transpose_recovery,
)
from .decoupling import (
    HaarSampler,
    cross_term_bound_check,
    decoupling_bound,
    decoupling_states,
    haar_form_average,
    mc_code_fidelity,
    output_overlap_matrices,
    rotated_code_overlap,
)

CHECK_ATOL = 1e-9


@dataclass
class LemmaCheckRecord:
    """One verified inequality instance; ok means lhs <= rhs + 1e-9."""

    lemma_id: str
    instance_seed: int
    lhs: float
    rhs: float
    margin: float
    ok: bool

    @classmethod
    def from_sides(cls, lemma_id: str, instance_seed: int, lhs: float, rhs: float):
        return cls(
            lemma_id=lemma_id,
            instance_seed=int(instance_seed),
            lhs=float(lhs),
            rhs=float(rhs),
            margin=float(rhs - lhs),
            ok=bool(lhs <= rhs + CHECK_ATOL),
        )


@dataclass
class SuiteSizes:
    """Instance counts per suite section; zero disables a section."""

    cross_term_pairs: int = 200
    haar_form_configs: tuple = ((2, 1), (3, 2))
    haar_form_trials: int = 2000
    projection_disturbance: int = 100
    cp_cross_term: int = 200
    recovery_decoupling: int = 60
    oneshot_trials: int = 8
    overlap_expectation_trials: int = 400

    @classmethod
    def empty(cls) -> "SuiteSizes":
        return cls(0, (), 0, 0, 0, 0, 0, 0)

    @classmethod
    def full(cls) -> "SuiteSizes":
        return cls(
            cross_term_pairs=1000,
            haar_form_configs=((2, 1), (3, 1), (3, 2), (4, 2)),
            haar_form_trials=100_000,
            projection_disturbance=500,
            cp_cross_term=1000,
            recovery_decoupling=500,
            oneshot_trials=50,
            overlap_expectation_trials=2000,
        )


@dataclass
class SuiteReport:
    records: list = field(default_factory=list)
    passed: int = 0
    failed: int = 0
    master_seed: int = 0
    sizes: dict = field(default_factory=dict)

    def add(self, rec: LemmaCheckRecord):
        self.records.append(rec)
        if rec.ok:
            self.passed += 1
        else:
            self.failed += 1

    @property
    def all_ok(self) -> bool:
        return self.failed == 0

    def smallest_margins(self, lemma_id: str, count: int = 5):
        recs = [r for r in self.records if r.lemma_id == lemma_id]
        return sorted(recs, key=lambda r: r.margin)[:count]


def projection_disturbance_check(rho, a_map: KrausMap, d_map: KrausMap, q,
                                 instance_seed: int = 0) -> LemmaCheckRecord:
    """With f_q the fidelity of the projection-disturbed pipeline and f the
    undisturbed one, check f >= 3 f_q - 2."""
    q = core.as_projector(q, atol=1e-8)
    if q.shape != (a_map.dim_out, a_map.dim_out):
        raise ValueError("projector must act on the front channel's output space")
    q_map = make_kraus([q])
    f_q = entanglement_fidelity(rho, compose(d_map, compose(q_map, a_map)))
    f = entanglement_fidelity(rho, compose(d_map, a_map))
    return LemmaCheckRecord.from_sides("projection_disturbance", instance_seed, 3.0 * f_q - 2.0, f)


def cp_cross_term_check(d_map: KrausMap, x1, x2, z, instance_seed: int = 0) -> LemmaCheckRecord:
    """|<z, D(|x1><x2|) z>| <= sqrt(<z, D(P_x1) z> <z, D(P_x2) z>) for
    orthogonal unit vectors x1, x2."""
    x1 = core.as_unit_vector(x1)
    x2 = core.as_unit_vector(x2)
    z = core.as_unit_vector(z)
    if abs(np.vdot(x1, x2)) > 1e-9:
        raise ValueError("x1 and x2 must be orthogonal")
    cross = np.zeros((d_map.dim_out, d_map.dim_out), dtype=complex)
    p1_out = np.zeros_like(cross)
    p2_out = np.zeros_like(cross)
    for k in d_map.kraus_ops:
        k1 = k @ x1
        k2 = k @ x2
        cross += np.outer(k1, k2.conj())
        p1_out += np.outer(k1, k1.conj())
        p2_out += np.outer(k2, k2.conj())
    lhs = abs(np.vdot(z, cross @ z))
    rhs = np.sqrt(abs(np.vdot(z, p1_out @ z)) * abs(np.vdot(z, p2_out @ z)))
    return LemmaCheckRecord.from_sides("cp_cross_term", instance_seed, lhs, rhs)


def _instance_seed(master_seed: int, section: int, index: int) -> int:
    return master_seed * 1_000_003 + section * 10_007 + index


def admissible_cross_term_pair(rng: np.random.Generator, n: int):
    """Random elementwise-nonnegative (L, D) with off-diagonals clamped into
    the admissible envelope (no rejection loop)."""
    l_mat = rng.uniform(0.0, 4.0, size=(n, n))
    d_mat = rng.uniform(0.0, 4.0, size=(n, n))
    for j in range(n):
        for m in range(n):
            if j == m:
                continue
            l_mat[j, m] = min(l_mat[j, m], l_mat[j, j], l_mat[m, m])
            d_mat[j, m] = min(d_mat[j, m], max(d_mat[j, j], d_mat[m, m]))
    return l_mat, d_mat


def run_suite(master_seed: int = 0, sizes: SuiteSizes | None = None,
              cfg: OptimizerConfig | None = None) -> SuiteReport:
    """Execute all inequality suites with per-instance derived seeds."""
    sizes = sizes or SuiteSizes()
    cfg = cfg or OptimizerConfig(max_iters=300, tolerance=1e-8)
    report = SuiteReport(master_seed=master_seed, sizes=vars(sizes).copy())

    # cross-term matrix bound
    for i in range(sizes.cross_term_pairs):
        seed = _instance_seed(master_seed, 1, i)
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        l_mat, d_mat = admissible_cross_term_pair(rng, n)
        lhs, rhs, _ = cross_term_bound_check(l_mat, d_mat)
        report.add(LemmaCheckRecord.from_sides("cross_term_bound", seed, lhs, rhs))

    # Haar average of the code sesquilinear form: |mc - exact| <= 4 stderr
    for ci, (d, k) in enumerate(sizes.haar_form_configs):
        seed = _instance_seed(master_seed, 2, ci)
        rng = np.random.default_rng(seed)
        x = core.random_hermitian(d, rng) + 1j * core.random_hermitian(d, rng)
        y = core.random_hermitian(d, rng) + 1j * core.random_hermitian(d, rng)
        basis = np.eye(d, dtype=complex)
        p = np.diag([1.0 + 0j] * k + [0.0] * (d - k))
        sampler = HaarSampler(dim=d, seed=seed)
        mc, exact, stderr = haar_form_average(x, y, p, basis, sizes.haar_form_trials, sampler)
        tol = 4.0 * stderr if k < d else 1e-9
        report.add(LemmaCheckRecord.from_sides("haar_form_average", seed, abs(mc - exact), tol))

    # projection disturbance of entanglement fidelity
    for i in range(sizes.projection_disturbance):
        seed = _instance_seed(master_seed, 3, i)
        rng = np.random.default_rng(seed)
        rho = core.random_density(2, rng)
        a_map = random_cptp(2, 3, int(rng.integers(1, 4)), rng)
        d_map = random_cptp(3, 2, int(rng.integers(1, 4)), rng)
        u = core.haar_unitary_from_rng(3, rng)
        rank = int(rng.integers(0, 4))
        q = u[:, :rank] @ u[:, :rank].conj().T if rank else np.zeros((3, 3), dtype=complex)
        report.add(projection_disturbance_check(rho, a_map, d_map, q, seed))

    # Cauchy-Schwarz cross term for CP maps
    for i in range(sizes.cp_cross_term):
        seed = _instance_seed(master_seed, 4, i)
        rng = np.random.default_rng(seed)
        d_map = random_cptp(3, 2, int(rng.integers(1, 4)), rng)
        x1 = core.random_pure(3, rng)
        raw = core.random_pure(3, rng)
        x2 = raw - np.vdot(x1, raw) * x1
        nrm = np.linalg.norm(x2)
        if nrm < 1e-8:
            continue
        x2 /= nrm
        z = core.random_pure(2, rng)
        report.add(cp_cross_term_check(d_map, x1, x2, z, seed))

    # recovery fidelity vs decoupling bound
    for i in range(sizes.recovery_decoupling):
        seed = _instance_seed(master_seed, 5, i)
        rng = np.random.default_rng(seed)
        d_in = int(rng.integers(2, 4))
        d_out = int(rng.integers(2, 4))
        rho = core.random_density(d_in, rng)
        n = random_trace_decreasing(d_in, d_out, int(rng.integers(1, 4)), rng)
        bound = decoupling_bound(decoupling_states(rho, n))
        res = optimal_code_fidelity(rho, n, cfg)
        lower = entanglement_fidelity(rho, compose(transpose_recovery(rho, n), n))
        value = max(res.value, lower)
        report.add(LemmaCheckRecord.from_sides("recovery_vs_decoupling", seed, bound - 1e-6, value))

    # one-shot bound Monte Carlo (small smoke configuration)
    if sizes.oneshot_trials:
        seed = _instance_seed(master_seed, 6, 0)
        maps = [dephasing_channel(0.1, "z"), dephasing_channel(0.1, "x")]
        rep = mc_code_fidelity(maps, np.eye(2, dtype=complex), 1, sizes.oneshot_trials,
                               HaarSampler(dim=2, seed=seed), cfg)
        report.add(LemmaCheckRecord.from_sides(
            "oneshot_bound", seed, rep.rhs, rep.mc_mean + 3.0 * rep.mc_stderr + 1e-6))

    # expected rotated-code overlap does not exceed the output Gram entries
    if sizes.overlap_expectation_trials:
        seed = _instance_seed(master_seed, 7, 0)
        maps = [dephasing_channel(0.1, "z"), dephasing_channel(0.1, "x")]
        basis = np.eye(2, dtype=complex)
        pi_g = core.maximally_mixed(basis)
        d_mat, _ = output_overlap_matrices(maps, pi_g)
        p = np.diag([1.0 + 0j, 1.0])
        sampler = HaarSampler(dim=2, seed=seed)
        for j in range(2):
            for m in range(2):
                samples = []
                for i in range(sizes.overlap_expectation_trials):
                    u = core.haar_unitary_from_rng(2, sampler.rng_for(1000 * (2 * j + m) + i))
                    samples.append(rotated_code_overlap(maps[j], maps[m], u, p))
                arr = np.asarray(samples)
                stderr = arr.std(ddof=1) / np.sqrt(arr.size)
                report.add(LemmaCheckRecord.from_sides(
                    "rotated_overlap_expectation", seed + 2 * j + m,
                    float(arr.mean()), float(d_mat[j, m] + 4.0 * stderr)))

    return report
