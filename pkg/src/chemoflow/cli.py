"""Command-line surface.

Exit codes: 0 all checks passed (or soft/gated), 1 configuration rejected,
2 hard invariant violation, 3 NaN abort (state dump written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .config import ConfigError, load_config
from .harness import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK
from .oracles import gn_estimate_cached


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CHEMOFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            print(f"warning: ignoring malformed CHEMOFLOW_THREADS={env!r}", file=sys.stderr)
    return 1


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, initial=replace(cfg.initial, seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _write_sweep(out_dir: Path, name: str, result) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema": 1,
        "axis": result.axis,
        "summaries": result.summaries,
        "distances": result.distances,
        "verdicts": result.verdicts,
    }
    (out_dir / f"{name}.json").write_text(json.dumps(doc, indent=2))
    import csv

    with open(out_dir / f"{name}.csv", "w", newline="") as fh:
        if result.summaries:
            keys = list(result.summaries[0].keys())
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for row in result.summaries:
                w.writerow(row)


def cmd_run(args) -> int:
    cfg = _load(args)
    result = harness.run_single(cfg, render=not args.no_svg)
    for name, v in result.verdicts.items():
        print(f"{name}: {v}")
    print(f"bundle written to {result.out_dir}")
    return result.exit_code


def cmd_sweep_eps(args) -> int:
    cfg = _load(args)
    eps = [float(x) for x in args.eps]
    result = harness.run_eps_refinement(cfg, eps, threads=_threads(args))
    out = Path(cfg.output_dir)
    _write_sweep(out, "eps_sweep", result)
    if not args.no_svg:
        from . import plots

        plots.render_eps_figure(
            eps, result.distances["density_l1"], result.distances["signal_h1"], out / "eps_sweep.svg"
        )
    print(json.dumps(result.verdicts, indent=2))
    print(f"distances (density L1): {result.distances['density_l1']}")
    return EXIT_OK if result.verdicts["cauchy_decreasing"] else EXIT_INVARIANT


def cmd_sweep_mu(args) -> int:
    cfg = _load(args)
    mu_list = [float(x) for x in args.mu]
    cache = Path(args.gn_cache) if args.gn_cache else Path(cfg.output_dir) / "gn_cache.json"
    gn_est = gn_estimate_cached(
        cache, cfg.domain, probes=cfg.gn.probes, ascent_iters=cfg.gn.ascent_iters,
        seed=cfg.gn.seed, gamma=cfg.params.gamma,
    )
    result = harness.run_mu_sweep(cfg, mu_list, gn_est, threads=_threads(args))
    out = Path(cfg.output_dir)
    _write_sweep(out, "mu_sweep", result)
    if not args.no_svg:
        from . import plots

        plots.render_mu_figure(
            mu_list,
            [s["late_sup_n_linf"] for s in result.summaries],
            [s["late_log_slope"] for s in result.summaries],
            out / "mu_sweep.svg",
        )
    print(json.dumps(result.verdicts, indent=2))
    hard = any(not s["mass_inequality"] or s["energy_dissipation"] == "fail" for s in result.summaries)
    return EXIT_INVARIANT if hard else EXIT_OK


def cmd_mms(args) -> int:
    cfg = _load(args)
    result = harness.run_mms_convergence(cfg, levels=args.levels)
    out = Path(cfg.output_dir)
    _write_sweep(out, "mms", result)
    if not args.no_svg:
        from . import plots

        plots.render_mms_figure(
            result.axis,
            result.distances["diffusion_reaction"],
            result.verdicts["order_diffusion_reaction"],
            "diffusion-reaction",
            out / "mms_diffusion.svg",
        )
        plots.render_mms_figure(
            result.axis,
            result.distances["advection"],
            result.verdicts["order_advection"],
            "advection",
            out / "mms_advection.svg",
        )
    print(json.dumps(result.verdicts, indent=2))
    ok = (
        result.verdicts["order_diffusion_reaction"] >= 1.8
        and result.verdicts["order_advection"] >= 0.8
    )
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_gn_estimate(args) -> int:
    cfg = _load(args)
    cache = Path(args.gn_cache) if args.gn_cache else Path(cfg.output_dir) / "gn_cache.json"
    est = gn_estimate_cached(
        cache, cfg.domain, probes=cfg.gn.probes, ascent_iters=cfg.gn.ascent_iters,
        seed=cfg.gn.seed, gamma=cfg.params.gamma,
    )
    print(
        json.dumps(
            {
                "c_star_lower": est.c_star_lower,
                "mu0": est.mu0,
                "gamma": est.gamma,
                "iterations": est.iterations,
                "warning": est.warning,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_check(args) -> int:
    verdicts, code = harness.check_bundle(args.bundle)
    print(json.dumps(verdicts, indent=2))
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chemoflow",
        description="Desk-scale chemotaxis-fluid simulator and verification harness",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="INI run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the initial-data seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="sweep workers (or CHEMOFLOW_THREADS)")
        p.add_argument("--no-svg", action="store_true", help="skip figure rendering")

    p = sub.add_parser("run", help="single run with all enabled checkers")
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep-eps", help="regularization refinement study")
    common(p)
    p.add_argument("--eps", nargs="+", required=True, help="strictly decreasing eps values")
    p.set_defaults(fn=cmd_sweep_eps)

    p = sub.add_parser("sweep-mu", help="degradation-strength sweep")
    common(p)
    p.add_argument("--mu", nargs="+", required=True, help="mu values")
    p.add_argument("--gn-cache", default=None, help="estimate cache file")
    p.set_defaults(fn=cmd_sweep_mu)

    p = sub.add_parser("mms", help="manufactured-solution convergence")
    common(p)
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(fn=cmd_mms)

    p = sub.add_parser("gn-estimate", help="interpolation-constant lower bound")
    common(p)
    p.add_argument("--gn-cache", default=None)
    p.set_defaults(fn=cmd_gn_estimate)

    p = sub.add_parser("check", help="re-run verdicts on a stored bundle")
    p.add_argument("bundle", help="bundle directory with records.csv/steps.csv")
    p.set_defaults(fn=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
