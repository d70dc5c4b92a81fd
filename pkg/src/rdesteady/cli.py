"""Command-line front end.

    rdesteady steady  --config sim00 --out out/
    rdesteady kappa   --config sim00 --out out/ [--method grid]
    rdesteady eig     --config sim00 --out out/
    rdesteady verify  --config sim01 --out out/
    rdesteady sweep   --config sim00 --out out/ [--stds 0.04 0.02 ...]
    rdesteady peaks   --grid out/steady.csv --out out/
    rdesteady compare a.csv b.csv

Errors are reported as one JSON object on stderr with a nonzero exit code.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import load_config
from .densities import lhs_sample
from .gridio import (build_summary, find_peaks, read_grid_csv, write_grid_csv,
                     write_heatmap_pgm, write_json)
from .model_rm import steady_system
from .randeq import NoiseSpec, normalize, posterior_unnormalized
from .stability import eig_posterior, kappa_direct, kappa_from_grid, kappa_map, sigma2_asymmetry
from .errors import ContractError
from .verify import histogram_newton, histogram_ode, total_variation

log = logging.getLogger("rdesteady")


def _stamp(cfg):
    """Provenance recorded in every artifact."""
    return {"scenario": cfg.name, "scenario_hash": cfg.scenario_hash, "seed": cfg.seed,
            "version": __version__}


def _emit_grid(g, out, stem, cfg, extra=None, pgm=True):
    meta = dict(_stamp(cfg), **(extra or {}))
    write_grid_csv(g, out / f"{stem}.csv", meta)
    if pgm:
        write_heatmap_pgm(g, out / f"{stem}.pgm")


def _samples(cfg):
    return lhs_sample(cfg.law, cfg.n_samples, cfg.seed)


def _steady_posterior(cfg, samples, grid, noise, args):
    raw = posterior_unnormalized(steady_system(), samples, noise, grid,
                                 threads=args.threads, backend=args.backend)
    return normalize(raw)


def _update_summary(out, cfg, **fields):
    """Merge ``fields`` into ``summary.json`` so subcommands can share one file."""
    path = out / "summary.json"
    base = build_summary(cfg.name, cfg.seed, cfg.n_samples, cfg.steady.noise.stds)
    if path.exists():
        old = json.loads(path.read_text())
        if old.get("scenario_hash") == cfg.scenario_hash and old.get("seed") == cfg.seed:
            base = old
    base.update(_stamp(cfg))
    for key, val in fields.items():
        if key == "extra":
            base.setdefault("extra", {}).update(val)
        else:
            base[key] = val
    write_json(base, path)
    return base


def run_steady(cfg, out, args):
    t0 = time.perf_counter()
    st = cfg.steady
    g = _steady_posterior(cfg, _samples(cfg), st.grid, st.noise, args)
    _emit_grid(g, out, "steady", cfg, {"quantity": "steady posterior",
                                       "noise_stds": list(st.noise.stds)})
    peaks = find_peaks(g, st.peak_threshold, st.merge_radius, st.peak_window)
    write_json(dict(_stamp(cfg), threshold_fraction=peaks.threshold_fraction,
                    merge_radius=peaks.merge_radius, peaks=peaks.as_dicts()),
               out / "peaks.json")
    log.info("steady: %d peaks in %.1fs", len(peaks), time.perf_counter() - t0)
    _update_summary(out, cfg, peaks=peaks.as_dicts(),
                    extra={"steady_seconds": time.perf_counter() - t0})
    return g, peaks


def run_kappa(cfg, out, args):
    if cfg.kappa is None:
        raise ContractError("scenario has no [kappa] table")
    t0 = time.perf_counter()
    method = args.method or cfg.kappa.method
    noise = cfg.eig.noise if cfg.eig is not None else None
    sigma_grid = cfg.kappa.sigma_grid or (cfg.eig.sigma_grid if cfg.eig else None)
    if method == "grid" and (noise is None or sigma_grid is None):
        raise ContractError("method 'grid' needs an [eig] table")
    samples = _samples(cfg)
    kw = {"noise": noise, "threads": args.threads, "backend": args.backend}
    if sigma_grid is not None:
        kw["sigma_grid"] = sigma_grid
    kg = kappa_map(cfg.kappa.region, samples, method,
                   progress=lambda j, n: log.debug("kappa row %d/%d", j, n), **kw)
    _emit_grid(kg.as_density_grid(), out, "kappa", cfg, kg.meta)
    probes = []
    if cfg.eig is not None:
        for p in cfg.eig.probes:
            if method == "direct":
                kap = kappa_direct(p.location, samples)
            else:
                kap = kappa_from_grid(eig_posterior(p.location, samples, noise, sigma_grid,
                                                    args.threads, args.backend))
            probes.append({"label": p.label, "x": p.location[0], "y": p.location[1],
                           "kappa": kap})
    log.info("kappa (%s) in %.1fs", method, time.perf_counter() - t0)
    _update_summary(out, cfg, kappa_probes=probes,
                    extra={"kappa_method": method, "kappa_seconds": time.perf_counter() - t0})
    return kg, probes


def run_eig_probes(cfg, out, args):
    if cfg.eig is None:
        raise ContractError("scenario has no [eig] table")
    samples = _samples(cfg)
    report = []
    for p in cfg.eig.probes:
        g = eig_posterior(p.location, samples, cfg.eig.noise, cfg.eig.sigma_grid,
                          args.threads, args.backend)
        asym = sigma2_asymmetry(g)
        kap = kappa_from_grid(g)
        _emit_grid(g, out, f"eig_probe_{p.label}", cfg,
                   {"quantity": "eigenvalue posterior", "location": list(p.location),
                    "noise_stds": list(cfg.eig.noise.stds)})
        report.append({"label": p.label, "x": p.location[0], "y": p.location[1],
                       "kappa": kap, "sigma2_asymmetry": asym})
        log.info("probe %s: kappa=%.4f asymmetry=%.2e", p.label, kap, asym)
    _update_summary(out, cfg, extra={"eig_probes": report})
    return report


def run_verify(cfg, out, args):
    v = cfg.verify
    if v is None:
        raise ContractError("scenario has no [verify] table")
    t0 = time.perf_counter()
    post = _steady_posterior(cfg, _samples(cfg), v.grid, cfg.steady.noise, args)
    _emit_grid(post, out, "verify_posterior", cfg, {"quantity": "steady posterior"})
    hn, rn = histogram_newton(cfg.law, v.n, cfg.seed, v.newton, v.grid, args.threads, args.backend)
    _emit_grid(hn, out, "verify_newton", cfg, {"quantity": "newton histogram", "n": v.n})
    result = {"tv_newton": total_variation(post, hn),
              "newton_failure_rate": rn.failure_rate, "newton": rn.as_dict()}
    if v.n_ode > 0:
        ho, ro = histogram_ode(cfg.law, v.n_ode, cfg.seed, v.ode, v.grid, args.threads,
                               args.backend)
        _emit_grid(ho, out, "verify_ode", cfg, {"quantity": "ode histogram", "n": v.n_ode})
        result.update(tv_ode=total_variation(ho, hn), tv_ode_posterior=total_variation(post, ho),
                      ode_nonconverged_rate=ro.failure_rate, ode=ro.as_dict())
    else:
        result.update(tv_ode=None, ode_nonconverged_rate=None)
    result["seconds"] = time.perf_counter() - t0
    write_json(dict(_stamp(cfg), **result), out / "verify.json")
    log.info("verify: TV(posterior, newton)=%.4f", result["tv_newton"])
    _update_summary(out, cfg, verification={k: result[k] for k in (
        "tv_newton", "tv_ode", "newton_failure_rate", "ode_nonconverged_rate")})
    return result


def sweep_noise(cfg, out, args, stds=None):
    stds = list(stds or cfg.sweep_stds or cfg.steady.noise.stds[:1])
    samples = _samples(cfg)
    runs, prev = [], None
    for s in stds:
        t0 = time.perf_counter()
        g = _steady_posterior(cfg, samples, cfg.steady.grid, NoiseSpec((s,) * 2), args)
        run = {"noise_std": s, "seconds": time.perf_counter() - t0,
               "tv_to_previous": None if prev is None else total_variation(prev, g)}
        runs.append(run)
        log.info("sweep sigma=%g: %.1fs tv=%s", s, run["seconds"], run["tv_to_previous"])
        prev = g
    write_json(dict(_stamp(cfg), runs=runs), out / "sweep.json")
    return runs


def _cmd_peaks(args):
    g = read_grid_csv(args.grid)
    if not g.normalized:
        g = normalize(g)
    peaks = find_peaks(g, args.threshold, args.merge_radius)
    result = dict(source=str(args.grid), threshold_fraction=peaks.threshold_fraction,
                  merge_radius=peaks.merge_radius, peaks=peaks.as_dicts())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(result, Path(args.out) / "peaks.json")
    print(json.dumps(result))


def _cmd_compare(args):
    a, b = read_grid_csv(args.a), read_grid_csv(args.b)
    tv = total_variation(normalize(a), normalize(b))
    print(json.dumps({"a": str(args.a), "b": str(args.b), "total_variation": tv}))


def build_parser():
    p = argparse.ArgumentParser(prog="rdesteady", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario TOML file or shipped scenario name")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--backend", choices=_kernels.available())
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("steady", "steady-state posterior, heatmap and peaks"),
                        ("kappa", "stability probability map"),
                        ("eig", "eigenvalue posteriors at the probe points"),
                        ("verify", "Newton and RK4 histograms against the posterior"),
                        ("sweep", "posterior change as the noise width shrinks")]:
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "kappa":
            sp.add_argument("--method", choices=("direct", "grid"))
        if name == "sweep":
            sp.add_argument("--stds", type=float, nargs="+")
    sp = sub.add_parser("peaks", parents=[common], help="peaks of a grid CSV")
    sp.add_argument("--grid", required=True)
    sp.add_argument("--threshold", type=float, default=0.05)
    sp.add_argument("--merge-radius", type=int, default=3)
    sp = sub.add_parser("compare", parents=[common], help="total variation between two grid CSVs")
    sp.add_argument("a")
    sp.add_argument("b")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.threads < 1:
            raise ContractError("--threads must be >= 1")
        if args.command == "peaks":
            _cmd_peaks(args)
            return 0
        if args.command == "compare":
            _cmd_compare(args)
            return 0
        if not args.config or not args.out:
            raise ContractError(f"{args.command} needs --config and --out")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "steady":
            run_steady(cfg, out, args)
        elif args.command == "kappa":
            run_kappa(cfg, out, args)
        elif args.command == "eig":
            run_eig_probes(cfg, out, args)
        elif args.command == "verify":
            run_verify(cfg, out, args)
        elif args.command == "sweep":
            sweep_noise(cfg, out, args, args.stds)
        return 0
    except Exception as exc:  # reported as JSON, never a traceback
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("cell", "sample", "line"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err, default=str), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
