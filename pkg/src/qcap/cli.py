"""Command-line surface: each subcommand wraps one pipeline and emits a
deterministic run report (JSON or CSV) to stdout or --out.

Exit codes: 0 on success, 2 when a verified inequality fails, 1 on input
errors (schema violations, budget overruns, bad flags).
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__, core
from ._budget import BudgetExceededError, dim_budget
from .capacity import (
    bsst_sequence,
    direct_part_experiment,
    maximin_coherent_info,
    minmax_coherent_info,
)
from .channels import (
    OptimizerConfig,
    apply,
    coherent_information,
    entanglement_fidelity,
    entropy_exchange,
    minimal_kraus,
)
from .decoupling import HaarSampler, mc_code_fidelity
from .fileio import (
    ChannelSetError,
    atomic_write,
    canonical_json,
    digest_files,
    parse_channel_set,
    rows_to_csv,
)
from .typicality import exponents, frequency_typical_projector
from .verifier import SuiteSizes, run_suite


class CliInputError(ValueError):
    pass


def _add_common(p: argparse.ArgumentParser, with_file: bool = True):
    if with_file:
        p.add_argument("channels", help="channel-set JSON file (schema v1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--budget-dim", type=int, default=None,
                   help="dense dimension budget (default 4096, env QCAP_BUDGET_DIM)")
    p.add_argument("--emit-timings", action="store_true",
                   help="include wall-clock timings (breaks byte-identical reports)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcap",
                                description="entanglement transmission numerics for compound channels")
    p.add_argument("--version", action="version", version=f"qcap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("info", help="per-channel diagnostics at the maximally mixed input")
    _add_common(sp)

    sp = sub.add_parser("icap", help="maximin coherent information over the compound set")
    _add_common(sp)
    sp.add_argument("--l", type=int, default=1)
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--minmax", action="store_true", help="also report the min-max value")

    sp = sub.add_parser("oneshot", help="one-shot random-code bound and its Monte Carlo mean")
    _add_common(sp)
    sp.add_argument("--k", type=int, required=True, help="code dimension")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--g-dim", type=int, default=None,
                    help="carrier subspace dimension (first basis vectors; default: full space)")

    sp = sub.add_parser("typical", help="typical-projector statistics of each channel output")
    _add_common(sp)
    sp.add_argument("--l", type=int, default=2)
    sp.add_argument("--delta", type=float, default=0.1)

    sp = sub.add_parser("bsst", help="typical-state rate sequence toward the single-letter value")
    _add_common(sp)
    sp.add_argument("--l-list", default="2,4", help="comma-separated block lengths")
    sp.add_argument("--rho-diag", default=None,
                    help="comma-separated diagonal of the reference state (default: maximally mixed)")

    sp = sub.add_parser("direct", help="random-coding direct-part experiment")
    _add_common(sp)
    sp.add_argument("--l", type=int, default=2)
    sp.add_argument("--delta", type=float, default=0.3)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=4)

    sp = sub.add_parser("verify", help="run the inequality verification suite")
    _add_common(sp, with_file=False)
    sp.add_argument("--profile", choices=("empty", "default", "full"), default="default")
    return p


def _cfg(args, restarts: int = 1) -> OptimizerConfig:
    return OptimizerConfig(seed=args.seed, restarts=restarts)


def cmd_info(args):
    cset = parse_channel_set(args.channels)
    pi = core.maximally_mixed_dim(cset.dim_in)
    results = {"set_name": cset.name, "dim_in": cset.dim_in, "dim_out": cset.dim_out,
               "n_channels": cset.size, "channels": []}
    rows = []
    for j, ch in enumerate(cset.channels):
        reduced = minimal_kraus(ch)
        out = apply(ch, pi)
        entry = {
            "index": j,
            "kind": ch.kind,
            "kraus_given": ch.n_kraus,
            "kraus_minimal": reduced.n_kraus,
            "output_entropy": core.von_neumann_entropy(out),
            "entropy_exchange": entropy_exchange(pi, ch),
            "coherent_information": coherent_information(pi, ch),
            "entanglement_fidelity": entanglement_fidelity(pi, ch) if ch.dim_in == ch.dim_out else None,
            "output_l2_norm": core.hs_norm(out),
        }
        results["channels"].append(entry)
        for key in ("output_entropy", "entropy_exchange", "coherent_information", "output_l2_norm"):
            rows.append(("info", 1, j, key, entry[key]))
    return results, rows, True


def cmd_icap(args):
    cset = parse_channel_set(args.channels)
    cfg = _cfg(args, restarts=args.restarts)
    est = maximin_coherent_info(cset, args.l, cfg, budget=args.budget_dim)
    results = {
        "l": est.l,
        "value": est.value,
        "per_channel_ic": est.per_channel_ic,
        "converged": est.converged,
        "restarts_used": est.restarts_used,
        "argmax_state": est.argmax_state,
    }
    if args.minmax:
        results["minmax_value"] = minmax_coherent_info(cset, args.l, cfg, budget=args.budget_dim)
    rows = [("icap", args.l, j, "coherent_information", v)
            for j, v in enumerate(est.per_channel_ic)]
    rows.append(("icap", args.l, "min", "value_per_use", est.value))
    return results, rows, True


def cmd_oneshot(args):
    cset = parse_channel_set(args.channels)
    d = cset.dim_in
    g_dim = args.g_dim or d
    if not (1 <= g_dim <= d):
        raise CliInputError(f"--g-dim must lie in [1, {d}]")
    basis = np.eye(d, dtype=complex)[:, :g_dim]
    sampler = HaarSampler(dim=g_dim, seed=args.seed)
    rep = mc_code_fidelity(list(cset.channels), basis, args.k, args.trials, sampler,
                           _cfg(args))
    results = {
        "k": rep.k, "n_j": rep.n_j, "l2_norms": rep.l2_norms,
        "total_weight": rep.total_weight, "rhs": rep.rhs,
        "mc_mean": rep.mc_mean, "mc_stderr": rep.mc_stderr,
        "trials": rep.trials, "seed": rep.seed,
        "converged": rep.converged, "ok": rep.ok,
    }
    rows = [("oneshot", 1, "all", "rhs", rep.rhs),
            ("oneshot", 1, "all", "mc_mean", rep.mc_mean),
            ("oneshot", 1, "all", "mc_stderr", rep.mc_stderr)]
    return results, rows, rep.ok


def cmd_typical(args):
    cset = parse_channel_set(args.channels)
    pi = core.maximally_mixed_dim(cset.dim_in)
    book = (exponents(cset.dim_in, cset.dim_out, args.l, args.delta)
            if 0 < args.delta < 0.5 else None)
    results = {"l": args.l, "delta": args.delta, "channels": []}
    if book:
        results["h_l"] = book.h_l
        results["phi_delta"] = book.phi_delta
    rows = []
    ok = True
    for j, ch in enumerate(cset.channels):
        out = core.as_density(apply(ch, pi))
        tp = frequency_typical_projector(out, args.delta, args.l)
        entropy = core.von_neumann_entropy(out)
        cap_ok = True
        if book:
            cap = 2.0 ** (-args.l * (entropy - book.phi_delta))
            cap_ok = bool(tp.max_sequence_probability() <= cap + 1e-12)
        ok &= cap_ok
        entry = {"index": j, "rank": tp.rank, "mass": tp.mass(),
                 "output_entropy": entropy,
                 "max_sequence_probability": tp.max_sequence_probability(),
                 "eigenvalue_cap_ok": cap_ok}
        results["channels"].append(entry)
        rows.extend((("typical", args.l, j, key, entry[key])
                     for key in ("rank", "mass", "output_entropy")))
    return results, rows, ok


def cmd_bsst(args):
    cset = parse_channel_set(args.channels)
    d = cset.dim_in
    if args.rho_diag:
        diag = np.array([float(x) for x in args.rho_diag.split(",")], dtype=float)
        if diag.size != d or abs(diag.sum() - 1.0) > 1e-9 or (diag < -1e-12).any():
            raise CliInputError(f"--rho-diag must be {d} nonnegative numbers summing to 1")
        rho = np.diag(diag.astype(complex))
    else:
        rho = core.maximally_mixed_dim(d)
    l_list = [int(x) for x in args.l_list.split(",")]
    seq, target = bsst_sequence(rho, cset, l_list, budget=args.budget_dim)
    results = {
        "l_list": l_list,
        "values": [v for _, v in seq],
        "deltas": [l ** (-1.0 / 3.0) for l in l_list],
        "target": target,
        "gaps": [abs(v - target) for _, v in seq],
    }
    rows = [("bsst", l, "min", "value_per_use", v) for l, v in seq]
    return results, rows, True


def cmd_direct(args):
    cset = parse_channel_set(args.channels)
    basis = np.eye(cset.dim_in, dtype=complex)
    rep = direct_part_experiment(cset, basis, args.l, args.delta, args.epsilon,
                                 args.trials, _cfg(args), budget=args.budget_dim)
    linkage_ok = rep.min_fidelity_true >= 3.0 * rep.min_fidelity_clipped - 2.0 - 1e-9
    results = {
        "l": rep.l, "delta": rep.delta, "epsilon": rep.epsilon,
        "k_l": rep.k_l, "rate": rep.rate,
        "min_fidelity_clipped": rep.min_fidelity_clipped,
        "min_fidelity_true": rep.min_fidelity_true,
        "per_channel_clipped": rep.per_channel_clipped,
        "per_channel_true": rep.per_channel_true,
        "epsilon_l": rep.epsilon_l,
        "epsilon_l_vacuous": rep.epsilon_l > 1.0,
        "seeds": rep.seeds, "best_trial": rep.best_trial,
        "linkage_ok": linkage_ok,
        "converged": rep.converged,
    }
    rows = [("direct", rep.l, j, "fidelity_clipped", v)
            for j, v in enumerate(rep.per_channel_clipped)]
    rows += [("direct", rep.l, j, "fidelity_true", v)
             for j, v in enumerate(rep.per_channel_true)]
    return results, rows, linkage_ok


def cmd_verify(args):
    sizes = {"empty": SuiteSizes.empty(), "default": SuiteSizes(), "full": SuiteSizes.full()}[args.profile]
    rep = run_suite(args.seed, sizes)
    results = {
        "master_seed": rep.master_seed,
        "passed": rep.passed,
        "failed": rep.failed,
        "sizes": {k: list(v) if isinstance(v, tuple) else v for k, v in rep.sizes.items()},
        "records": [vars(r) for r in rep.records],
        "smallest_margins": {
            lemma_id: [vars(r) for r in rep.smallest_margins(lemma_id)]
            for lemma_id in sorted({r.lemma_id for r in rep.records})
        },
    }
    rows = [("verify", 0, r.lemma_id, "margin", r.margin) for r in rep.records]
    return results, rows, rep.all_ok


COMMANDS = {
    "info": (cmd_info, True),
    "icap": (cmd_icap, True),
    "oneshot": (cmd_oneshot, True),
    "typical": (cmd_typical, True),
    "bsst": (cmd_bsst, True),
    "direct": (cmd_direct, True),
    "verify": (cmd_verify, False),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler, needs_file = COMMANDS[args.command]
    start = time.monotonic()
    try:
        results, rows, ok = handler(args)
    except (CliInputError, ChannelSetError, BudgetExceededError, FileNotFoundError, ValueError) as exc:
        print(f"qcap: error: {exc}", file=sys.stderr)
        return 1
    elapsed_ms = (time.monotonic() - start) * 1000.0

    report = {
        "command": args.command,
        "inputs_digest": digest_files([args.channels]) if needs_file else digest_files([]),
        "seed": args.seed,
        "budget_dim": dim_budget(args.budget_dim),
        "results": results,
        "tool_version": __version__,
    }
    if args.emit_timings:
        report["timings_ms"] = elapsed_ms

    text = rows_to_csv(rows) if args.format == "csv" else canonical_json(report) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
