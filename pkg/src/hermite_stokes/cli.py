"""Command line driver: ``hermite-stokes {basis,verify,threshold,dissipativity,evolve}``.

Exit status: 0 success, 1 invariant failure (or rejected regime), 2
validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from contextlib import contextmanager

from . import __version__
from .basis import build_basis
from .config import ConfigError, defaults, dump_config, load_config, validate
from .dissipativity import (
    ForceModel,
    compute_thresholds,
    f_for_gamma,
    select_lambda0,
    test_dissipativity,
    test_J_time_lipschitz,
)
from .estimates import (
    EstimateContext,
    empirical_c,
    reports_to_csv,
    verify_b_negpow,
    verify_eq4,
    verify_eq6,
    verify_interpolation,
    verify_lemma2,
    verify_thm1,
    verify_thm3,
)
from .evolution import BlowUpError, InitialData, SimConfig, detect_regularity, evolve, rows_to_csv
from .operators import delta_from_epsilon, get_cache, load_cache, save_cache
from .space import get_space

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("hermite_stokes")


class RunManifest:
    """Config snapshot, timings and checksummed artifacts of one command."""

    def __init__(self, command, cfg, out_dir):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.timings = {}
        self.artifacts = []

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - t0

    def write(self, name, text):
        path = os.path.join(self.out_dir, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        self.add(path)
        return path

    def add(self, path):
        self.artifacts.append(path)

    def finish(self):
        items = []
        for p in self.artifacts:
            with open(p, "rb") as fh:
                digest = hashlib.sha256(fh.read()).hexdigest()
            items.append({"path": os.path.relpath(p, self.out_dir), "sha256": digest})
        doc = {
            "command": self.command,
            "version": __version__,
            "seed": self.cfg["run.seed"],
            "config": dump_config(self.cfg),
            "out_dir": os.path.abspath(self.out_dir),
            "timings_s": self.timings,
            "artifacts": items,
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


def _json(obj):
    def fix(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: fix(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [fix(v) for v in x]
        return x
    return json.dumps(fix(obj), indent=2, sort_keys=True, default=float) + "\n"


# -- shared setup -----------------------------------------------------------------

def setup_cache(cfg):
    space = get_space(cfg["run.n_modes"], cfg["run.n_quad"])
    path = cfg["operators.cache"]
    if path and os.path.exists(path):
        return load_cache(path, space)
    cache = get_cache(space)
    if path:
        save_cache(path, cache, delta_from_epsilon(cfg["operators.epsilon"]))
    return cache


def force_from_config(cfg, f_sup):
    kind = cfg["force.kind"]
    amp = cfg["force.amplitude"]
    if amp is None:
        amp = f_sup if kind != "zero" else 0.0
    seed = cfg["force.seed"] if cfg["force.seed"] is not None else cfg["run.seed"]
    return ForceModel(kind, float(amp), cfg["force.theta"], cfg["force.d_lip"], seed)


def params_from_config(cfg, cache):
    """Threshold parameters and the matching force model."""
    eps = cfg["operators.epsilon"]
    delta = delta_from_epsilon(eps)
    nu = cfg["threshold.nu"]
    lam1 = cfg["operators.lambda1_override"] or cache.lambda1_B
    a = cache.a_constant(delta)
    c = cfg["threshold.c"]
    if c is None:
        ctx = EstimateContext(cache, cfg["estimates.decay_rate"])
        c, _ = empirical_c(ctx, eps, cfg["threshold.c_samples"], cfg["run.seed"])
    lam0, n_sel, omega, info = select_lambda0(cache, delta, cfg["threshold.lambda0_mode"],
                                              cfg["threshold.n_sel"], cfg["threshold.omega"], lam1)
    if cfg["threshold.gamma"] is not None:
        f_sup = f_for_gamma(cfg["threshold.gamma"], nu, c, a, lam1, lam0, eps)
    elif cfg["threshold.f_sup"] is not None:
        f_sup = cfg["threshold.f_sup"]
    elif cfg["force.kind"] != "zero" and cfg["force.amplitude"] is not None:
        f_sup = cfg["force.amplitude"]
    else:
        f_sup = 0.0
    force = force_from_config(cfg, f_sup)
    if force.f_sup > f_sup:
        f_sup = force.f_sup
    info["c_source"] = "config" if cfg["threshold.c"] is not None else "empirical"
    info["lambda1_source"] = "override" if cfg["operators.lambda1_override"] else "cache"
    params = compute_thresholds(nu, f_sup, c, a, lam1, lam0, eps, omega, n_sel, info)
    return params, force


# -- commands ---------------------------------------------------------------------

def cmd_basis(cfg, out_dir, args, man):
    n_modes = args.n_modes if args.n_modes is not None else cfg["run.n_modes"]
    n_quad = args.n_quad if args.n_quad is not None else cfg["run.n_quad"]
    if n_modes < 1:
        raise ConfigError("n_modes must be >= 1")
    if n_quad is not None and n_quad < n_modes:
        raise ConfigError("n_quad must be >= n_modes")
    with man.phase("basis"):
        b = build_basis(n_modes, n_quad)
    rows = [["kind", "index", "value", "weight"]]
    rows += [["node", i, f"{x:.17g}", f"{w:.17g}"] for i, (x, w) in enumerate(zip(b.nodes, b.weights))]
    rows += [["eigenvalue", n, f"{e:.17g}", ""] for n, e in enumerate(b.eigs_1d)]
    man.write(args.file or "basis.csv", _csv(rows))
    return EXIT_OK, {"n_modes": n_modes, "n_quad": b.n_quad}


def _csv(rows):
    import io

    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def run_estimates(cfg, cache, man=None):
    """All eight estimate reports for a configuration."""
    eps = cfg["operators.epsilon"]
    delta = delta_from_epsilon(eps)
    seed = cfg["run.seed"]
    ns, ni = cfg["estimates.samples"], cfg["estimates.invariant_samples"]
    ctx = EstimateContext(cache, cfg["estimates.decay_rate"])
    theta, alpha, beta = cfg["estimates.interp"]
    jobs = [
        ("thm1", lambda: verify_thm1(cfg["estimates.thm1_alphas"], ns, seed, ctx)),
        ("interp", lambda: verify_interpolation(theta, alpha, beta, ni, seed, ctx)),
        ("eq4", lambda: verify_eq4(ns, seed, ctx)),
        ("eq5_thm3", lambda: verify_thm3(eps, ns, seed, ctx)),
        ("eq6", lambda: verify_eq6(ns, seed, ctx)),
        ("lemma2", lambda: verify_lemma2(ni, seed, ctx)),
        ("b_negpow", lambda: verify_b_negpow(1 + delta, ni, seed, ctx)),
    ]
    reports = []
    for name, job in jobs:
        if man is not None:
            with man.phase(name):
                reports.append(job())
        else:
            reports.append(job())
    c = max(r.empirical_constant for r in reports if r.estimate_id in ("eq4", "eq5_thm3"))
    sub = dict(cfg)
    sub["threshold.c"] = cfg["threshold.c"] or c
    params, force = params_from_config(sub, cache)
    if force.kind != "hoelder":
        force = ForceModel("hoelder", force.f_sup or 1.0, cfg["force.theta"], cfg["force.d_lip"], force.seed)
    reports.append(test_J_time_lipschitz(force, params, cache, cfg["dissipativity.lipschitz_pairs"], seed))
    return reports


def cmd_verify(cfg, out_dir, args, man):
    with man.phase("cache"):
        cache = setup_cache(cfg)
    reports = run_estimates(cfg, cache, man)
    man.write("estimates.json", _json([r.to_dict() for r in reports]))
    man.write("estimates.csv", reports_to_csv(reports))
    failed = [r.estimate_id for r in reports if not r.passed]
    summary = {r.estimate_id: {"constant": r.empirical_constant, "violations": r.violations}
               for r in reports}
    summary["failed"] = failed
    summary["cache"] = cache.summary(delta_from_epsilon(cfg["operators.epsilon"]))
    return (EXIT_FAIL if failed else EXIT_OK), summary


def cmd_threshold(cfg, out_dir, args, man):
    with man.phase("cache"):
        cache = setup_cache(cfg)
    with man.phase("threshold"):
        params, force = params_from_config(cfg, cache)
    doc = params.to_dict()
    doc["n_modes"] = cache.space.n_modes
    doc["force_kind"] = force.kind
    man.write("threshold.json", _json(doc))
    return (EXIT_OK if params.regime == "dissipative" else EXIT_FAIL), doc


def cmd_dissipativity(cfg, out_dir, args, man):
    with man.phase("cache"):
        cache = setup_cache(cfg)
    params, force = params_from_config(cfg, cache)
    if params.regime == "rejected":
        return EXIT_FAIL, {"regime": "rejected", "gamma": params.gamma}
    out = []
    for notion in cfg["dissipativity.notions"]:
        with man.phase(notion):
            r = test_dissipativity(notion, params, force, cfg["dissipativity.samples"], cfg["run.seed"],
                                   cache, cfg["dissipativity.t"], cfg["dissipativity.linear"])
        man.write(f"pairings_{notion}.csv", r.rows_csv())
        out.append(r)
    doc = {"params": params.to_dict(), "reports": [r.to_dict() for r in out]}
    man.write("dissipativity.json", _json(doc))
    failed = [r.notion for r in out if not r.pass_ and r.notion in cfg["dissipativity.expect"]]
    summary = {r.notion: {"pass": r.pass_, "alpha_measured": r.alpha_measured,
                          "alpha_stated": r.alpha_stated} for r in out}
    summary["failed"] = failed
    return (EXIT_FAIL if failed else EXIT_OK), summary


def sim_config(cfg, force, member=0):
    u0 = InitialData(cfg["evolve.u0"], cfg["run.seed"] + member, cfg["evolve.u0_radius"],
                     cfg["evolve.u0_decay"], cfg["evolve.u0_scale"], cfg["evolve.u0_path"])
    return SimConfig(
        n_modes=cfg["run.n_modes"], n_quad=cfg["run.n_quad"], nu=cfg["threshold.nu"],
        epsilon=cfg["operators.epsilon"], force=force, u0=u0, dt=cfg["evolve.dt"],
        t_end=cfg["evolve.t_end"], checkpoint_every=cfg["evolve.checkpoint_every"],
        diagnostics_every=cfg["evolve.diagnostics_every"], scheme=cfg["evolve.scheme"],
        nonlinear=cfg["evolve.nonlinear"],
    )


def cmd_evolve(cfg, out_dir, args, man):
    with man.phase("cache"):
        cache = setup_cache(cfg)
    params, force = params_from_config(cfg, cache)
    resume = args.resume or cfg["evolve.resume"]
    verdicts = []
    status = EXIT_OK
    n = 1 if resume else cfg["evolve.ensemble"]
    for m in range(n):
        sc = sim_config(cfg, force, m)
        run_dir = os.path.join(out_dir, f"run_{m:03d}") if n > 1 else out_dir
        os.makedirs(run_dir, exist_ok=True)
        blew = False
        with man.phase(f"run_{m:03d}"):
            try:
                res = evolve(sc, params, out_dir=run_dir, resume=resume, space=cache.space)
                rows = res.rows
                for p in res.checkpoints:
                    man.add(p)
            except BlowUpError as exc:
                rows = exc.rows
                blew = True
                status = EXIT_FAIL
                with open(os.path.join(run_dir, "diagnostics.csv"), "w", newline="") as fh:
                    fh.write(rows_to_csv(rows))
        man.add(os.path.join(run_dir, "diagnostics.csv"))
        v = detect_regularity(rows, params, blew)
        v["member"] = m
        v["stiffness"] = sc.stiffness(cache.space)
        verdicts.append(v)
    man.write("verdict.json", _json({"params": params.to_dict(), "runs": verdicts}))
    summary = {"runs": len(verdicts), "blow_up": any(v["blow_up"] for v in verdicts),
               "stayed_in_ball": all(v.get("stayed_in_ball", False) for v in verdicts),
               "max_norm_V_growth": max(v.get("norm_V_growth", 0.0) for v in verdicts)}
    return status, summary


COMMANDS = {
    "basis": cmd_basis,
    "verify": cmd_verify,
    "threshold": cmd_threshold,
    "dissipativity": cmd_dissipativity,
    "evolve": cmd_evolve,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat section.key = value config file")
    common.add_argument("--out", default=None, help="output directory (default: runs/<command>)")
    common.add_argument("--seed", type=int, default=None, help="override run.seed")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    p = argparse.ArgumentParser(prog="hermite-stokes", description=__doc__.splitlines()[0],
                                parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("basis", parents=[common], help="dump nodes, weights and 1D eigenvalues")
    b.add_argument("--n-modes", type=int, default=None)
    b.add_argument("--n-quad", type=int, default=None)
    b.add_argument("--file", default=None, help="CSV name inside the output directory")
    sub.add_parser("verify", parents=[common], help="run the estimate suite")
    sub.add_parser("threshold", parents=[common], help="print the threshold parameters")
    sub.add_parser("dissipativity", parents=[common], help="sample the dissipativity notions")
    e = sub.add_parser("evolve", parents=[common], help="integrate from in-ball data")
    e.add_argument("--resume", default=None, help="checkpoint file to continue from")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else validate(defaults())
        if args.seed is not None:
            cfg["run.seed"] = args.seed
        out_dir = args.out or os.path.join("runs", args.command)
        os.makedirs(out_dir, exist_ok=True)
        man = RunManifest(args.command, cfg, out_dir)
        status, summary = COMMANDS[args.command](cfg, out_dir, args, man)
        man.finish()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        sys.stdout.write(_json(summary))
    return status


if __name__ == "__main__":
    sys.exit(main())
