"""Command-line driver: config ingestion, subcommand dispatch, report/plot
emission, and the acceptance-suite runner.

Exit codes: 0 success, 1 validation error (bad config/arguments), 2 numerical
failure (non-convergence, budget exceeded) with diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .model import Grid, ModelError, ModelParams, check_box_fits_potential
from .reporting import RunManifest, StageTimer, write_csv, write_json, write_svg_plot

BUDGETS = ("small", "desk", "large")


from dataclasses import dataclass


@dataclass
class RunOptions:
    seed: int
    threads: int
    budget: str
    dump_paths: bool = False


def cmd_effective(cfg: RunConfig, out: Path, opts: RunOptions,
                  manifest: RunManifest) -> int:
    from .effpot import compute_ediag, compute_pair_potential, export_table_csv
    from .model import validate_profile

    params = cfg.params
    axis_grid = Grid(params.d, cfg.grid.n, cfg.grid.L)
    reports = {}
    for j, profile in enumerate(params.profiles):
        reports[f"profile_{j}"] = validate_profile(profile, axis_grid).as_dict()
    tables = {}
    for i in range(params.N):
        for j in range(i + 1, params.N):
            tables[(i, j)] = compute_pair_potential(params.profiles[i], params.profiles[j], axis_grid)
    e_diag = compute_ediag(params, axis_grid)
    payload = {
        "e_diag": e_diag,
        "profiles": reports,
        "pairs": {f"{i}-{j}": {"w0": t.w0} for (i, j), t in tables.items()},
    }
    p = write_json(out / "effective.json", payload, cfg.raw, opts.seed)
    manifest.record(p)
    for (i, j), t in tables.items():
        path = out / f"pair_w_{i}{j}.csv"
        export_table_csv(t, path)
        manifest.record(path)
    return 0


def cmd_spectrum(cfg: RunConfig, out: Path, opts: RunOptions,
                 manifest: RunManifest) -> int:
    from .spectral import binding_verdict, build_heff, cluster_energies, ground_state

    params, grid, pot = cfg.params, cfg.grid, cfg.potential
    check_box_fits_potential(grid, pot)
    with StageTimer(manifest, "ground_state"):
        h = build_heff(params, grid, pot)
        gs = ground_state(h, tol=1e-8, seed=opts.seed)
    with StageTimer(manifest, "thresholds"):
        rep = cluster_energies(params, grid, pot, tol=1e-8, seed=opts.seed,
                               threads=opts.threads, e_v_full=gs.eigenvalue)
    verdict = binding_verdict(rep, gs.wavefunction(grid).normalized(), grid, params.masses)
    payload = {
        "ground": {"eigenvalue": gs.eigenvalue, "residual": gs.residual,
                   "iterations": gs.iterations, "seed": gs.seed, "gap": gs.gap,
                   "near_degenerate": gs.near_degenerate},
        "threshold": rep.as_dict(),
        "verdict": verdict.as_dict(),
    }
    p = write_json(out / "spectrum.json", payload, cfg.raw, opts.seed)
    manifest.record(p)
    rows = [[str(list(r.beta)), r.e_v_beta, r.e0_complement, r.total] for r in rep.rows]
    manifest.record(write_csv(out / "thresholds.csv",
                              ["beta", "e_v_beta", "e0_complement", "total"], rows))
    return 0


def cmd_stability_scan(cfg: RunConfig, out: Path, opts: RunOptions,
                       manifest: RunManifest) -> int:
    from .stability import coupling_window_scan

    params, grid, pot = cfg.params, cfg.grid, cfg.potential
    scan = cfg.section("scan")
    alphas = scan.get("alphas", [0.0, 1.0, 2.0, 4.0, 8.0])
    kappa = float(scan.get("kappa", params.kappa))
    with StageTimer(manifest, "scan"):
        table = coupling_window_scan(alphas, kappa, params, grid, pot,
                                     tol=1e-8, seed=opts.seed, threads=opts.threads)
    p = write_json(out / "stability_scan.json", table.as_dict(), cfg.raw, opts.seed)
    manifest.record(p)
    header = ["alpha", "e_v", "xi", "g_value", "margin", "bound",
              "participation_ratio", "decay_rate", "bind_margin"]
    rows = [[r.alpha, r.e_v, r.xi, r.g_value, r.margin, int(r.bound),
             r.participation_ratio, r.decay_rate if r.decay_rate is not None else "",
             r.bind_margin] for r in table.rows]
    manifest.record(write_csv(out / "stability_scan.csv", header, rows))
    series = {"alpha": [r.alpha for r in table.rows],
              "margin": [r.margin for r in table.rows],
              "e_v": [r.e_v for r in table.rows]}
    manifest.record(write_svg_plot(out / "stability_scan.svg", series, "alpha",
                                   ["margin", "e_v"], "coupling window scan",
                                   "alpha", "energy", hashsalt=cfg.config_hash()))
    return 0


def cmd_fiber(cfg: RunConfig, out: Path, opts: RunOptions,
              manifest: RunManifest) -> int:
    from .fiber import default_p_samples, dispersion_scan

    params = cfg.params
    fib = cfg.section("fiber")
    n = int(fib.get("n", 512))
    L = float(fib.get("L", 60.0))
    count = int(fib.get("p_samples", 9))
    grid_rel = Grid(params.d * (params.N - 1), n, L)
    samples = default_p_samples(grid_rel, params.d, count)
    with StageTimer(manifest, "dispersion"):
        curve = dispersion_scan(samples, params, grid_rel, tol=1e-8, seed=opts.seed,
                                threads=opts.threads)
    p = write_json(out / "dispersion.json", curve.as_dict(), cfg.raw, opts.seed)
    manifest.record(p)
    pnorm = [float(np.linalg.norm(pv)) for pv in curve.P_samples]
    rows = list(zip(pnorm, [e if e is not None else "" for e in curve.energies]))
    manifest.record(write_csv(out / "dispersion.csv", ["abs_P", "E"], rows))
    ok = [(pn, e) for pn, e in zip(pnorm, curve.energies) if e is not None]
    series = {"abs_P": [a for a, _ in ok], "E(P)": [b for _, b in ok]}
    manifest.record(write_svg_plot(out / "dispersion.svg", series, "abs_P", ["E(P)"],
                                   "fiber dispersion", "|P|", "E(P)",
                                   hashsalt=cfg.config_hash()))
    return 0


def cmd_fk_verify(cfg: RunConfig, out: Path, opts: RunOptions,
                  manifest: RunManifest) -> int:
    from .acceptance import (check_05_levy_fidelity, check_06_feynman_kac,
                             check_07_exceedance_decay, run_check)
    from .levy import dump_paths_csv, sample_paths

    results = [run_check(f) for f in (check_05_levy_fidelity, check_06_feynman_kac,
                                      check_07_exceedance_decay)]
    for r in results:
        print(r.line())
    levy_sec = cfg.section("levy")
    t = float(levy_sec.get("t", 1.0))
    k = int(levy_sec.get("k_steps", 64))
    n_paths = min(int(levy_sec.get("n_paths", 100000)), 20000)
    batch = sample_paths(cfg.params, np.linspace(0.0, t, k + 1), n_paths, opts.seed)
    summary = {
        "checks": [r.as_dict() for r in results],
        "batch": {"n_paths": batch.n_paths, "k_steps": k, "t": t, "seed": opts.seed,
                  "mean_clock": float(batch.subordinator[:, -1, :].mean()),
                  "mean_sq_displacement": float((batch.positions[:, -1] ** 2).sum(axis=(1, 2)).mean())},
    }
    manifest.record(write_json(out / "fk_verify.json", summary, cfg.raw, opts.seed))
    if opts.dump_paths or cfg.section("levy").get("dump_paths", False):
        path = out / "paths.csv"
        dump_paths_csv(batch, path)
        manifest.record(path)
    return 0 if all(r.passed for r in results) else 2


def cmd_fock_certify(cfg: RunConfig, out: Path, opts: RunOptions,
                     manifest: RunManifest) -> int:
    from .fock import certify_energy_comparison, scaling_limit_trend

    params, pot = cfg.params, cfg.potential
    fock = cfg.section("fock")
    # coupled solves take their own (coarser) grid to stay within the budget,
    # plus optional alpha/kappa overrides (the certificate regime is not the
    # scan regime: large kappa makes the field diagonal dominate everything)
    grid = Grid(cfg.grid.dims, int(fock.get("n", 32)), float(fock.get("L", 20.0)))
    params = ModelParams(params.d, params.N, params.masses,
                         float(fock.get("alpha", params.alpha)),
                         float(fock.get("kappa", params.kappa)),
                         params.ir_cutoff, params.profiles)
    ladder = [tuple(r) for r in fock.get("ladder", [[1, 2], [2, 3], [3, 4]])]
    kappa_ladder = fock.get("kappa_ladder", [1.0, 2.0, 4.0, 8.0])
    truncation = tuple(fock.get("trend_truncation", [3, 3]))
    with StageTimer(manifest, "certificate"):
        cert = certify_energy_comparison(params, grid, ladder, pot, seed=opts.seed)
    with StageTimer(manifest, "kappa_trend"):
        trend = scaling_limit_trend(params, grid, kappa_ladder, truncation, pot, seed=opts.seed)
    payload = {"certificate": cert.as_dict(),
               "kappa_trend": [r.as_dict() for r in trend]}
    manifest.record(write_json(out / "fock_certificate.json", payload, cfg.raw, opts.seed))
    rows = [[r.kappa, r.e_trunc, r.target, r.gap] for r in trend]
    manifest.record(write_csv(out / "kappa_trend.csv",
                              ["kappa", "e_trunc", "target", "gap"], rows))
    series = {"kappa": [r.kappa for r in trend], "gap": [r.gap for r in trend]}
    manifest.record(write_svg_plot(out / "kappa_trend.svg", series, "kappa", ["gap"],
                                   "scaling-limit trend", "kappa",
                                   "|E_trunc - (E^V - E_diag)|",
                                   hashsalt=cfg.config_hash()))
    return 0


def cmd_accept(cfg: RunConfig, out: Path, opts: RunOptions,
               manifest: RunManifest) -> int:
    from .acceptance import ALL_CHECKS, run_check

    checks = ALL_CHECKS
    if opts.budget == "small":
        checks = ALL_CHECKS[:6] + ALL_CHECKS[8:10]
    results = []
    for fn in checks:
        res = run_check(fn)
        results.append(res)
        print(res.line(), flush=True)
    payload = {"checks": [r.as_dict() for r in results],
               "all_passed": all(r.passed for r in results)}
    manifest.record(write_json(out / "acceptance.json", payload, cfg.raw, opts.seed))
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} acceptance checks passed")
    return 0 if n_pass == len(results) else 2


COMMANDS = {
    "effective": cmd_effective,
    "spectrum": cmd_spectrum,
    "stability-scan": cmd_stability_scan,
    "fiber": cmd_fiber,
    "fk-verify": cmd_fk_verify,
    "fock-certify": cmd_fock_certify,
    "accept": cmd_accept,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relbind",
        description="numerical laboratory for enhanced binding of relativistic "
                    "particles coupled to a massless scalar field")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--budget", choices=BUDGETS, default="desk")
    parser.add_argument("--dump-paths", action="store_true",
                        help="also write a raw-path CSV (fk-verify)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else cfg.seed
    opts = RunOptions(seed=seed, threads=args.threads, budget=args.budget,
                      dump_paths=args.dump_paths)
    manifest = RunManifest(subcommand=args.subcommand, config_hash=cfg.config_hash(),
                           seeds={"master": seed})
    # canonical config copy next to every report
    canon = out / "config.canonical.json"
    canon.write_text(cfg.canonical_json() + "\n")
    manifest.record(canon)
    try:
        code = COMMANDS[args.subcommand](cfg, out, opts, manifest)
    except (ConfigError, ModelError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # numerical failures keep their diagnostics
        print(f"numerical failure: {err}", file=sys.stderr)
        manifest.write(out)
        return 2
    manifest.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
