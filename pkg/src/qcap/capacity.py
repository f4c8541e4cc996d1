"""Finite-blocklength capacity quantities: maximin coherent information over a
compound set, typical-state rate sequences, and the end-to-end direct-part
coding experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .channels import (
    CompoundSet,
    KrausMap,
    OptimizerConfig,
    apply,
    apply_tensor_power,
    adjoint_apply,
    average,
    complementary,
    compose,
    coherent_information,
    entanglement_fidelity,
    make_kraus,
    optimal_code_fidelity,
    tensor_power,
)
from .decoupling import HaarSampler, embed_unitary
from .typicality import (
    ExponentBook,
    clip_output,
    exponents,
    frequency_typical_projector,
    reduced_operation,
)
from ._budget import check_dim

# Pinsker-type constant used for reported error-decay bounds; the theory only
# asserts existence of some positive constant.
DEFAULT_EXPONENT_C = 1.0 / (2.0 * math.log(2.0))


@dataclass
class CapacityEstimate:
    """Best found maximin coherent information at block length l."""

    l: int
    value: float  # bits per channel use
    argmax_state: np.ndarray
    per_channel_ic: list
    converged: bool
    restarts_used: int

    def __post_init__(self):
        expected = min(self.per_channel_ic) / self.l
        if abs(self.value - expected) > 1e-9:
            raise ValueError("value must equal min(per_channel_ic)/l")


@dataclass
class DirectPartReport:
    """Outcome of one random-coding direct-part experiment."""

    l: int
    delta: float
    epsilon: float
    k_l: int
    rate: float
    min_fidelity_clipped: float
    min_fidelity_true: float
    epsilon_l: float
    seeds: list
    best_trial: int
    mc_values: list = field(default_factory=list)
    per_channel_clipped: list = field(default_factory=list)
    per_channel_true: list = field(default_factory=list)
    converged: bool = True

    def __post_init__(self):
        if abs(self.rate - math.log2(self.k_l) / self.l) > 1e-12:
            raise ValueError("rate must equal log2(k_l)/l")
        if self.min_fidelity_true < 3.0 * self.min_fidelity_clipped - 2.0 - 1e-9:
            raise ValueError(
                "projection-disturbance linkage violated: "
                f"{self.min_fidelity_true} < 3*{self.min_fidelity_clipped} - 2"
            )


def ic_gradient(rho, n: KrausMap) -> np.ndarray:
    """Euclidean gradient of rho -> I_c(rho, N) via adjoint maps applied to the
    logs of the channel and environment outputs (support-restricted)."""
    rho = core.hermitize(rho)
    comp = complementary(n)
    sigma = core.hermitize(apply(n, rho))
    tau = core.hermitize(apply(comp, rho))
    log_sigma, supp_sigma = core.log2_on_support(sigma)
    log_tau, supp_tau = core.log2_on_support(tau)
    grad = -adjoint_apply(n, log_sigma + core.LOG2E * supp_sigma)
    grad += adjoint_apply(comp, log_tau + core.LOG2E * supp_tau)
    return core.hermitize(grad, atol=1e-7)


def _project_density(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize the trace."""
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 0:
        d = m.shape[0]
        return np.eye(d, dtype=complex) / d
    vals /= total
    return (vecs * vals) @ vecs.conj().T


def _softmin(values: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
    """Smooth minimum -tau log2 sum_j 2^(-v_j/tau) (bits) and its weights."""
    v = np.asarray(values, dtype=float)
    lo = v.min()
    z = 2.0 ** (-(v - lo) / tau)
    w = z / z.sum()
    val = lo - tau * math.log2(z.sum())
    return val, w


def maximin_coherent_info(cset: CompoundSet, l: int, cfg: OptimizerConfig | None = None,
                          budget: int | None = None) -> CapacityEstimate:
    """Maximize min_j I_c(rho, N_j^(x)l) over states by projected ascent on a
    softmin surrogate with annealed temperature, multi-restart."""
    cfg = cfg or OptimizerConfig()
    d = cset.dim_in**l
    check_dim(d, budget, "maximin state dimension")
    powers = [tensor_power(ch, l, budget) for ch in cset.channels]
    comp_powers = [tensor_power(complementary(ch), l, budget) for ch in cset.channels]

    def values_at(rho):
        vals = []
        for p, cp in zip(powers, comp_powers):
            vals.append(core.von_neumann_entropy(apply(p, rho)) - core.von_neumann_entropy(apply(cp, rho)))
        return np.asarray(vals)

    def gradient_at(rho, weights):
        g = np.zeros((d, d), dtype=complex)
        for w, p, cp in zip(weights, powers, comp_powers):
            if w < 1e-12:
                continue
            sigma = core.hermitize(apply(p, rho))
            tau_out = core.hermitize(apply(cp, rho))
            log_s, supp_s = core.log2_on_support(sigma)
            log_t, supp_t = core.log2_on_support(tau_out)
            g += w * (-adjoint_apply(p, log_s + core.LOG2E * supp_s)
                      + adjoint_apply(cp, log_t + core.LOG2E * supp_t))
        g = (g + g.conj().T) / 2
        g -= np.trace(g).real / d * np.eye(d)
        return g

    best_rho = None
    best_min = -np.inf
    converged_any = False
    restarts_used = 0
    for r in range(cfg.restarts):
        restarts_used += 1
        if r == 0:
            rho = core.maximally_mixed_dim(d)
        else:
            rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(r,)))
            rho = core.random_density(d, rng)
        rho = _project_density(0.999999999 * rho + 1e-9 * core.maximally_mixed_dim(d))

        tau = cfg.softmin_temp
        step = 0.5
        vals = values_at(rho)
        f, w = _softmin(vals, tau)
        stalled = 0
        this_converged = False
        for t in range(cfg.max_iters):
            if t > 0 and t % 200 == 0:
                tau = max(tau / 2, 1e-4)
                f, w = _softmin(values_at(rho), tau)
            g = gradient_at(rho, w)
            gn = np.linalg.norm(g)
            if gn < 1e-14:
                this_converged = True
                break
            g = g / gn
            accepted = False
            if cfg.step_rule == "fixed":
                cand = _project_density(rho + step * g)
                cand_vals = values_at(cand)
                f_c, w_c = _softmin(cand_vals, tau)
                if f_c > f:
                    rho, f, w, vals = cand, f_c, w_c, cand_vals
                    accepted = True
            else:
                s = min(step * 2.0, 1.0)
                while s > 1e-8:
                    cand = _project_density(rho + s * g)
                    cand_vals = values_at(cand)
                    f_c, w_c = _softmin(cand_vals, tau)
                    if f_c > f + 1e-14:
                        rho, vals, w = cand, cand_vals, w_c
                        improvement = f_c - f
                        f = f_c
                        step = s
                        accepted = True
                        if improvement < cfg.tolerance and tau <= 1e-4:
                            this_converged = True
                        break
                    s /= 2.0
            if not accepted:
                if tau > 1e-4:
                    tau = max(tau / 2, 1e-4)
                    f, w = _softmin(vals, tau)
                    continue
                this_converged = True
                break
            if this_converged:
                break
        vals = values_at(rho)
        if vals.min() > best_min:
            best_min = float(vals.min())
            best_rho = rho
        converged_any |= this_converged

    per_channel = [float(v) for v in values_at(best_rho)]
    return CapacityEstimate(
        l=l,
        value=min(per_channel) / l,
        argmax_state=best_rho,
        per_channel_ic=per_channel,
        converged=bool(converged_any),
        restarts_used=restarts_used,
    )


def minmax_coherent_info(cset: CompoundSet, l: int, cfg: OptimizerConfig | None = None,
                         budget: int | None = None) -> float:
    """min over channels of the per-channel maximum coherent information
    (bits per use); the order-swapped companion of the maximin value."""
    vals = []
    for ch in cset.channels:
        single = CompoundSet("singleton", (ch,))
        vals.append(maximin_coherent_info(single, l, cfg, budget).value)
    return float(min(vals))


def bsst_sequence(rho, cset: CompoundSet, l_list, delta_rule=None, budget: int | None = None):
    """Per-letter worst-case coherent information of typical states pi_{delta_l,l}.

    Returns (sequence, target): the per-l values together with the single-letter
    target min_j I_c(rho, N_j) the sequence should approach as l grows. The
    default schedule is delta_l = l^(-1/3).
    """
    rho = core.as_density(rho)
    if delta_rule is None:
        delta_rule = lambda l: l ** (-1.0 / 3.0)
    target = min(coherent_information(rho, ch) for ch in cset.channels)

    comps = [complementary(ch) for ch in cset.channels]
    seq = []
    for l in l_list:
        delta_l = float(delta_rule(l))
        check_dim(rho.shape[0] ** l, budget, "typical-state dimension")
        tp = frequency_typical_projector(rho, delta_l, l)
        if tp.rank < 1:
            raise ValueError(f"typical set is empty at l={l}, delta={delta_l}")
        pi_dl = tp.matrix(budget) / tp.rank
        vals = []
        for ch, comp in zip(cset.channels, comps):
            out = apply_tensor_power(ch, l, pi_dl, budget)
            env = apply_tensor_power(comp, l, pi_dl, budget)
            vals.append(core.entropy_blocked(out) - core.entropy_blocked(env))
        seq.append((l, float(min(vals) / l)))
    return seq, float(target)


def error_decay_bound(l: int, delta: float, c: float, num_channels: int,
                      epsilon: float, book: ExponentBook) -> float:
    """3 (2 * 2^(-l(c delta^2 - h(l))) + 2 N sqrt(2^(-l epsilon/2))).

    Vacuous (> 1) whenever c delta^2 <= h(l); callers flag that case.
    """
    if c <= 0:
        raise ValueError("the exponent constant c must be positive")
    first = 2.0 * 2.0 ** (-l * (c * delta**2 - book.h_l))
    second = 2.0 * num_channels * 2.0 ** (-l * epsilon / 4.0)
    return 3.0 * (first + second)


def direct_part_experiment(
    cset: CompoundSet,
    g_basis,
    l: int,
    delta: float,
    epsilon: float,
    trials: int,
    cfg: OptimizerConfig | None = None,
    budget: int | None = None,
) -> DirectPartReport:
    """Random-coding pipeline against the reduced+clipped compound channel.

    Builds the per-channel reduced operations and output typical projectors,
    samples Haar-rotated codes inside the carrier subspace, optimizes one
    recovery against the averaged clipped channel for the best code, then
    scores that code against both the clipped and the true tensor-power
    channels. The report enforces the projection-disturbance linkage
    min_true >= 3 min_clipped - 2.
    """
    cfg = cfg or OptimizerConfig()
    b = core.check_subspace_basis(g_basis)
    d, d_g = b.shape
    kd = cset.dim_out
    check_dim(d**l, budget, "direct-part input dimension")
    check_dim(kd**l, budget, "direct-part output dimension")

    pi_g = core.maximally_mixed(b)
    ics = [coherent_information(pi_g, ch) for ch in cset.channels]
    k_l = math.floor(2.0 ** (l * (min(ics) - epsilon)))
    if k_l < 1:
        raise ValueError(
            f"rate too low: floor(2^(l(min I_c - epsilon))) = {k_l} with "
            f"min I_c = {min(ics):.6f}, epsilon = {epsilon}"
        )
    k_l = min(k_l, d_g**l)

    clipped = []
    for ch in cset.channels:
        red = reduced_operation(ch, pi_g, delta, l, budget)
        q_out = frequency_typical_projector(core.as_density(apply(ch, pi_g)), delta, l)
        clipped.append(clip_output(red.map, q_out, budget))
    avg_clipped = average(CompoundSet("clipped", tuple(clipped)))

    g_l = core.kron_power(b, l)
    f_basis = g_l[:, :k_l]
    pi_f = core.maximally_mixed(f_basis)

    sampler = HaarSampler(dim=d_g**l, seed=cfg.seed)
    best = None
    values = []
    all_converged = True
    for i in range(trials):
        u = core.haar_unitary_from_rng(d_g**l, sampler.rng_for(i))
        u_full = embed_unitary(u, g_l)
        w_map = make_kraus([u_full])
        res = optimal_code_fidelity(pi_f, compose(avg_clipped, w_map), cfg)
        values.append(res.value)
        all_converged &= res.converged
        if best is None or res.value > best[1]:
            best = (i, res.value, res.recovery, u_full)

    best_trial, _, recovery, u_full = best
    w_map = make_kraus([u_full])
    per_clipped = [
        entanglement_fidelity(pi_f, compose(recovery, compose(chh, w_map)))
        for chh in clipped
    ]
    per_true = []
    for ch in cset.channels:
        power = tensor_power(ch, l, budget)
        per_true.append(entanglement_fidelity(pi_f, compose(recovery, compose(power, w_map))))

    book = exponents(d, kd, l, min(delta, 0.499))
    eps_l = error_decay_bound(l, delta, DEFAULT_EXPONENT_C, cset.size, epsilon, book)

    return DirectPartReport(
        l=l,
        delta=float(delta),
        epsilon=float(epsilon),
        k_l=int(k_l),
        rate=math.log2(k_l) / l,
        min_fidelity_clipped=float(min(per_clipped)),
        min_fidelity_true=float(min(per_true)),
        epsilon_l=float(eps_l),
        seeds=[cfg.seed],
        best_trial=int(best_trial),
        mc_values=[float(v) for v in values],
        per_channel_clipped=[float(v) for v in per_clipped],
        per_channel_true=[float(v) for v in per_true],
        converged=bool(all_converged),
    )
