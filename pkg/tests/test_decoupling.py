import numpy as np
import pytest

from qcap import core
from qcap import channels as ch
from qcap import decoupling as dec


def test_decoupling_states_identity(rng):
    rho = core.random_density(2, rng)
    t = dec.decoupling_states(rho, ch.identity_channel(2))
    assert abs(t.w - 1.0) < 1e-12
    np.testing.assert_allclose(t.rho_e, [[1.0]], atol=1e-12)
    np.testing.assert_allclose(t.rho_ae, np.kron(t.rho_a, t.rho_e), atol=1e-9)


def test_decoupling_states_weight(rng):
    q = np.diag([1.0, 0]).astype(complex)
    rho = np.eye(2, dtype=complex) / 2
    t = dec.decoupling_states(rho, ch.make_kraus([q]))
    assert abs(t.w - 0.5) < 1e-12


def test_decoupling_states_partial_trace_consistency(rng):
    for _ in range(20):
        n = ch.random_trace_decreasing(2, 3, 2, rng)
        rho = core.random_density(2, rng)
        t = dec.decoupling_states(rho, n)
        np.testing.assert_allclose(
            core.partial_trace(t.rho_ae, (2, t.rho_e.shape[0]), traced="A"), t.rho_e, atol=1e-9)
        np.testing.assert_allclose(
            core.partial_trace(t.rho_ae, (2, t.rho_e.shape[0]), traced="B"), t.rho_a, atol=1e-9)


def test_decoupling_bound_identity_and_depolarizing(rng):
    rho = core.random_density(2, rng)
    assert abs(dec.decoupling_bound(dec.decoupling_states(rho, ch.identity_channel(2))) - 1.0) < 1e-9

    pi2 = np.eye(2, dtype=complex) / 2
    t = dec.decoupling_states(pi2, ch.fully_depolarizing_qubit())
    bound = dec.decoupling_bound(t)  # dense 8x8 trace-norm evaluation
    assert t.rho_ae.shape == (8, 8)
    best = ch.optimal_code_fidelity(pi2, ch.fully_depolarizing_qubit()).value
    assert best >= bound - 1e-6


def test_decoupling_bound_tight_on_projector_compression():
    # rank-one compression of the maximally mixed qubit: perfectly decoupled,
    # best recovery fidelity exactly w^2
    pi2 = np.eye(2, dtype=complex) / 2
    n = ch.make_kraus([np.diag([1.0, 0]).astype(complex)])
    t = dec.decoupling_states(pi2, n)
    bound = dec.decoupling_bound(t)
    assert abs(bound - 0.25) < 1e-12
    assert abs(ch.optimal_code_fidelity(pi2, n).value - 0.25) < 1e-6


def test_recovery_beats_decoupling_bound(rng):
    cfg = ch.OptimizerConfig(max_iters=300, tolerance=1e-8)
    for _ in range(30):
        d_in, d_out = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        rho = core.random_density(d_in, rng)
        n = ch.random_trace_decreasing(d_in, d_out, int(rng.integers(1, 4)), rng)
        bound = dec.decoupling_bound(dec.decoupling_states(rho, n))
        res = ch.optimal_code_fidelity(rho, n, cfg)
        assert res.value >= bound - 1e-6


def test_averaged_dilation(rng):
    ident = ch.identity_channel(2)

    single = dec.averaged_dilation(ch.CompoundSet("one", (ident,)))
    v1 = ch.stinespring(ident).isometry
    assert single.dim_env == 1
    np.testing.assert_allclose(np.abs(single.isometry), np.abs(v1), atol=1e-12)

    cset = ch.CompoundSet("ii", (ident, ident))
    dil = dec.averaged_dilation(cset)
    rho = core.random_density(2, rng)
    np.testing.assert_allclose(
        core.partial_trace(dil.isometry @ rho @ dil.isometry.conj().T, (2, dil.dim_env), traced="B"),
        rho, atol=1e-9)

    cset = ch.CompoundSet("rand", (ch.random_cptp(2, 2, 3, rng), ch.random_cptp(2, 2, 2, rng)))
    dil = dec.averaged_dilation(cset)
    avg = ch.average(cset)
    assert dil.dim_env == 3 * 2
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1
            got = core.partial_trace(dil.isometry @ e @ dil.isometry.conj().T,
                                     (2, dil.dim_env), traced="B")
            np.testing.assert_allclose(got, ch.apply(avg, e), atol=1e-9)


def test_haar_unitary_determinism_and_unitarity():
    s1 = dec.HaarSampler(dim=3, seed=99)
    s2 = dec.HaarSampler(dim=3, seed=99)
    u1, u2 = dec.haar_unitary(s1), dec.haar_unitary(s2)
    np.testing.assert_array_equal(u1, u2)
    assert s1.counter == 1
    u3 = dec.haar_unitary(s1)
    assert np.max(np.abs(u3 - u1)) > 1e-3  # stream advanced
    assert np.max(np.abs(u1.conj().T @ u1 - np.eye(3))) < 1e-10


def test_haar_first_moment():
    # mean of U X U† approximates tr(X)/d * I
    x = np.diag([1.0, 2.0, 3.0]).astype(complex)
    sampler = dec.HaarSampler(dim=3, seed=5)
    total = np.zeros((3, 3), dtype=complex)
    trials = 4000
    for i in range(trials):
        u = core.haar_unitary_from_rng(3, sampler.rng_for(i))
        total += u @ x @ u.conj().T
    mean = total / trials
    target = np.trace(x) / 3 * np.eye(3)
    # entrywise fluctuation scale ~ ||x|| / sqrt(trials)
    assert np.max(np.abs(mean - target)) < 3 * 3.0 / np.sqrt(trials)


def test_embed_unitary(rng):
    b = np.eye(4, dtype=complex)[:, :2]
    np.testing.assert_allclose(dec.embed_unitary(np.eye(2), b), np.eye(4), atol=1e-12)
    u = core.haar_unitary_from_rng(4, rng)
    np.testing.assert_allclose(dec.embed_unitary(u, np.eye(4, dtype=complex)), u, atol=1e-12)
    small = core.haar_unitary_from_rng(2, rng)
    big = dec.embed_unitary(small, b)
    assert np.max(np.abs(big.conj().T @ big - np.eye(4))) < 1e-10


def test_oneshot_rhs_examples():
    rep = dec.oneshot_bound_rhs(2, [ch.identity_channel(16)], core.maximally_mixed_dim(16))
    assert abs(rep.rhs - (1 - np.sqrt(2) / 2)) < 1e-12
    assert rep.n_j == [1]

    rep = dec.oneshot_bound_rhs(1, [ch.identity_channel(4)], core.maximally_mixed_dim(4))
    assert abs(rep.rhs) < 1e-12

    with pytest.raises(ValueError):
        dec.oneshot_bound_rhs(0, [ch.identity_channel(4)], core.maximally_mixed_dim(4))

    rhs = [dec.oneshot_bound_rhs(k, [ch.identity_channel(8)], core.maximally_mixed_dim(8)).rhs
           for k in (1, 2, 4)]
    assert rhs[0] > rhs[1] > rhs[2]


def test_mc_code_fidelity_identity_trivial():
    rep = dec.mc_code_fidelity([ch.identity_channel(4)], np.eye(4, dtype=complex), 2, 5,
                               dec.HaarSampler(dim=4, seed=1))
    assert abs(rep.mc_mean - 1.0) < 1e-9
    assert rep.ok


def test_mc_code_fidelity_deterministic():
    maps = [ch.dephasing_channel(0.2, "z"), ch.dephasing_channel(0.2, "x")]
    r1 = dec.mc_code_fidelity(maps, np.eye(2, dtype=complex), 1, 4, dec.HaarSampler(dim=2, seed=9))
    r2 = dec.mc_code_fidelity(maps, np.eye(2, dtype=complex), 1, 4, dec.HaarSampler(dim=2, seed=9))
    assert r1.values == r2.values


def test_cross_term_bound():
    lhs, rhs, ok = dec.cross_term_bound_check(np.ones((1, 1)), np.ones((1, 1)))
    assert ok and lhs <= rhs

    lhs, rhs, ok = dec.cross_term_bound_check(np.ones((3, 3)), np.ones((3, 3)))
    assert abs(lhs - 3.0) < 1e-12 and abs(rhs - 6.0) < 1e-12 and ok

    with pytest.raises(ValueError):
        dec.cross_term_bound_check(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones((2, 2)))


def test_cross_term_bound_random(rng):
    from qcap.verifier import admissible_cross_term_pair
    for _ in range(200):
        n = int(rng.integers(1, 6))
        l_mat, d_mat = admissible_cross_term_pair(rng, n)
        _, _, ok = dec.cross_term_bound_check(l_mat, d_mat)
        assert ok


def test_haar_form_average_full_subspace_deterministic(rng):
    d = 3
    x = core.random_hermitian(d, rng)
    y = core.random_hermitian(d, rng)
    mc, exact, stderr = dec.haar_form_average(
        x, y, np.eye(d, dtype=complex), np.eye(d, dtype=complex), 20, dec.HaarSampler(dim=d, seed=2))
    assert abs(mc - exact) < 1e-9
    assert stderr < 1e-12

    mc, exact, _ = dec.haar_form_average(
        np.zeros((d, d)), np.zeros((d, d)), np.diag([1.0, 0, 0]).astype(complex),
        np.eye(d, dtype=complex), 10, dec.HaarSampler(dim=d, seed=2))
    assert abs(mc) < 1e-12 and abs(exact) < 1e-12


def test_haar_form_average_mc_matches_closed_form(rng):
    d, k = 3, 2
    x = core.random_hermitian(d, rng) + 1j * core.random_hermitian(d, rng)
    y = core.random_hermitian(d, rng) + 1j * core.random_hermitian(d, rng)
    p = np.diag([1.0, 1.0, 0]).astype(complex)
    mc, exact, stderr = dec.haar_form_average(x, y, p, np.eye(d, dtype=complex), 20000,
                                              dec.HaarSampler(dim=d, seed=21))
    assert abs(mc - exact) <= 4 * stderr


def test_output_overlap_matrices(rng):
    pi2 = np.eye(2, dtype=complex) / 2
    ident = ch.identity_channel(2)
    d_mat, l_mat = dec.output_overlap_matrices([ident, ident], pi2)
    np.testing.assert_allclose(d_mat, 0.5 * np.ones((2, 2)), atol=1e-12)
    np.testing.assert_allclose(l_mat, np.ones((2, 2)))

    d_mat, _ = dec.output_overlap_matrices([ident, ch.fully_depolarizing_qubit()], pi2)
    np.testing.assert_allclose(d_mat, 0.5 * np.ones((2, 2)), atol=1e-12)

    maps = [ch.random_cptp(2, 2, 2, rng) for _ in range(3)]
    d_mat, _ = dec.output_overlap_matrices(maps, pi2)
    assert np.linalg.eigvalsh(d_mat)[0] > -1e-10  # Gram matrix
    for j in range(3):
        for m in range(3):
            assert d_mat[j, m] <= max(d_mat[j, j], d_mat[m, m]) + 1e-10


def test_rotated_overlap_expectation_dephasing():
    # E over codes of the rotated overlap statistic stays below the Gram entry
    maps = [ch.dephasing_channel(0.1, "z"), ch.dephasing_channel(0.1, "x")]
    pi2 = np.eye(2, dtype=complex) / 2
    d_mat, _ = dec.output_overlap_matrices(maps, pi2)
    p = np.eye(2, dtype=complex)
    sampler = dec.HaarSampler(dim=2, seed=31)
    for j in range(2):
        for m in range(2):
            samples = [dec.rotated_code_overlap(maps[j], maps[m],
                                                core.haar_unitary_from_rng(2, sampler.rng_for(i)), p)
                       for i in range(300)]
            arr = np.asarray(samples)
            stderr = arr.std(ddof=1) / np.sqrt(arr.size) if arr.std() > 0 else 0.0
            assert arr.mean() <= d_mat[j, m] + 4 * stderr + 1e-9
