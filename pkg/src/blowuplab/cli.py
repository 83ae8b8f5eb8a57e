"""Batch entry point: profile | spectrum | corrector | simulate | verify | reconstruct.

Each subcommand reads the shared key=value configuration, consumes the
artifacts of the previous stages from the output directory, and writes its
own versioned outputs there.  Exit codes: 0 success, 2 out of basin,
3 instability, 4 verdict exit, 5 no profile found, 6 missing upstream
artifact, 64 configuration error.  ``BLOWUPLAB_THREADS`` caps the kernel
thread pool; ``--stamp`` adds a timestamp header to the run log (off by
default so outputs are byte-reproducible).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .configio import Config, default_config_text, parse_config
from .errors import (
    BlowupLabError,
    ConfigError,
    InstabilityError,
    MissingArtifactError,
    OutOfBasinError,
)
from .grids import CylGrid, RadialGrid

EXIT_OK = 0
EXIT_BASIN = 2
EXIT_INSTABILITY = 3
EXIT_VERDICT = 4
EXIT_NO_PROFILE = 5
EXIT_MISSING = 6
EXIT_CONFIG = 64


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _profile_path(args):
    return os.path.join(args.out, "profile.csv")


def _load_profile(args):
    path = _profile_path(args)
    if not os.path.exists(path):
        raise MissingArtifactError(f"profile artifact not found: {path}")
    from .profiles import read_profile

    return read_profile(path)


def cmd_profile(args, cfg: Config) -> int:
    from .profiles import (
        ProfileParams,
        find_profiles,
        fit_farfield,
        kappa_profile,
        write_profile,
    )

    params = ProfileParams(
        p=cfg["p"],
        r_start=cfg["profile.r_start"],
        R_shoot=cfg["profile.r_shoot"],
        tol_bisect=cfg["profile.tol_bisect"],
        classifier_threshold=cfg["profile.classifier_threshold"],
    )
    if cfg["profile.kind"] == "kappa":
        prof = kappa_profile(cfg["p"], params)
        profiles = [prof]
        scan_log = "constant profile requested; no scan performed"
    else:
        profiles = find_profiles(
            params,
            cfg["profile.scan_lo"],
            cfg["profile.scan_hi"],
            scan_points=cfg["profile.scan_points"],
        )
        scan_log = (
            f"scan [{cfg['profile.scan_lo']}, {cfg['profile.scan_hi']}] with "
            f"{cfg['profile.scan_points']} points: {len(profiles)} profile(s)"
        )
        if not profiles:
            print(scan_log, file=sys.stderr)
            print("no profile found in the scan window", file=sys.stderr)
            return EXIT_NO_PROFILE
    pick = min(cfg["profile.pick"], len(profiles) - 1)
    prof = profiles[pick]
    os.makedirs(args.out, exist_ok=True)
    write_profile(prof, _profile_path(args))

    grid = RadialGrid.uniform(15.0, 0.0025)
    residual = prof.ode_residual(grid)
    fit = fit_farfield(prof)
    report = [
        f"blowuplab {__version__} profile report",
        scan_log,
        f"kind: {prof.kind}",
        f"axis value a: {prof.a!r}",
        f"far-field coefficient: {prof.c_inf!r}",
        f"tail exponent (fit): {fit.exponent!r}"
        + (" [non-decaying]" if fit.non_decaying else ""),
        f"weighted ODE residual: {residual:.3e}",
    ]
    with open(os.path.join(args.out, "profile_report.txt"), "w") as fh:
        fh.write("\n".join(report) + "\n")
    _say(args, "\n".join(report))
    return EXIT_OK


def _build_spectrum(prof, cfg):
    from .spectral import assemble_radial_operator, solve_spectrum, tensorize

    op = assemble_radial_operator(
        prof, RadialGrid.uniform(cfg["spectrum.r_max"], cfg["spectrum.h"])
    )
    spec = solve_spectrum(op, count=cfg["spectrum.count"])
    ts = tensorize(spec, M_max=cfg["spectrum.m_max"])
    return spec, ts


def cmd_spectrum(args, cfg: Config) -> int:
    from .spectral import check_nondegeneracy, write_spectrum

    prof = _load_profile(args)
    spec, ts = _build_spectrum(prof, cfg)
    nd = check_nondegeneracy(spec, tol=cfg["spectrum.nondegeneracy_tol"])
    path = os.path.join(args.out, "spectrum.json")
    write_spectrum(spec, nd, ts, path)
    _say(
        args,
        f"ell0 = {spec.ell0}; lowest eigenvalues: "
        + ", ".join(f"{v:.6f}" for v in spec.eigenvalues[:4])
        + f"; nondegeneracy: {nd['verdict']}"
        + (" (vacuous)" if nd["vacuous"] else ""),
    )
    return EXIT_OK


def _build_corrector(prof, cfg):
    from .corrector import solve_hierarchy

    return solve_hierarchy(
        prof,
        n=cfg["corrector.n"],
        grid=RadialGrid.uniform(15.0, cfg["corrector.h"]),
        delta=cfg["corrector.delta"],
        b_cap=cfg["corrector.b_cap"],
    )


def cmd_corrector(args, cfg: Config) -> int:
    from .corrector import c1_direct, write_corrector

    prof = _load_profile(args)
    cor = _build_corrector(prof, cfg)
    write_corrector(
        cor,
        os.path.join(args.out, "corrector.json"),
        os.path.join(args.out, "corrector_modes.csv"),
    )
    direct = c1_direct(prof, cor.grid)
    _say(
        args,
        f"n = {cor.n}; c_1 = {cor.c1!r} (direct {direct!r}); d_1 = {cor.d1!r}",
    )
    return EXIT_OK


def cmd_simulate(args, cfg: Config) -> int:
    from .corrector import read_corrector_meta
    from .simulator import (
        SimConfig,
        SimLibrary,
        reconstruct_physical,
        run,
        write_reconstruction,
        write_run_csv,
    )

    prof = _load_profile(args)
    for artifact in ("spectrum.json", "corrector.json"):
        if not os.path.exists(os.path.join(args.out, artifact)):
            raise MissingArtifactError(f"missing upstream artifact {artifact}")
    spec, ts = _build_spectrum(prof, cfg)
    cor = _build_corrector(prof, cfg)
    meta = read_corrector_meta(os.path.join(args.out, "corrector.json"))
    if abs(meta["c"][0] - cor.c1) > 1e-8:
        raise MissingArtifactError(
            "corrector artifact inconsistent with the configured build"
        )
    lib = SimLibrary(prof, spec, ts, cor)

    b0 = cfg["simulate.b0"]
    sim_cfg = SimConfig(
        p=cfg["p"],
        s0=cfg["simulate.s0"],
        b0=None if b0 == "auto" else float(b0),
        r_max=cfg["simulate.r_max"],
        n_r=cfg["simulate.n_r"],
        z_max=cfg["simulate.z_max"],
        n_z=cfg["simulate.n_z"],
        ds=cfg["simulate.ds"],
        steps=cfg["simulate.steps"],
        K=cfg["simulate.K"],
        q=cfg["simulate.q"],
        n=cfg["corrector.n"],
        delta_q=cfg["simulate.delta_q"],
        mode_damping=cfg["simulate.mode_damping"],
        seed=args.seed if args.seed is not None else cfg["seed"],
        perturb_eps=cfg["simulate.perturb_eps"],
        out_every=cfg["simulate.out_every"],
        lambda_floor=cfg["simulate.lambda_floor"],
        verdict_exit_patience=cfg["simulate.verdict_exit_patience"],
        phys_check_every=cfg["simulate.phys_check_every"],
        phys_steps=cfg["simulate.phys_steps"],
        strict_exponents=cfg["simulate.strict_exponents"],
    )
    try:
        series = run(sim_cfg, lib)
    except InstabilityError as exc:
        if exc.series is not None:
            write_run_csv(exc.series, os.path.join(args.out, "run.csv"), stamp=cfg["stamp"])
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    write_run_csv(series, os.path.join(args.out, "run.csv"), stamp=cfg["stamp"])
    _say(
        args,
        f"{len(series.records['s'])} records; exit {series.exit_reason}; "
        f"final s = {series.s[-1]:.2f}, b c1 s = "
        f"{series.b[-1] * series.c1 * series.s[-1]:.4f}",
    )
    try:
        doc = reconstruct_physical(
            series.s,
            series.log_lam,
            series.b,
            window_fraction=cfg["reconstruct.window_fraction"],
        )
        write_reconstruction(doc, os.path.join(args.out, "reconstruction.json"))
        _say(args, f"T = {doc['T']:.6e}; c* = {doc['c_star']:.6f}")
    except BlowupLabError as exc:
        _say(args, f"reconstruction skipped: {exc}")
    if series.exit_reason == "verdict_exit":
        return EXIT_VERDICT
    return EXIT_OK


def cmd_reconstruct(args, cfg: Config) -> int:
    from .simulator import read_run_csv, reconstruct_physical, write_reconstruction

    path = os.path.join(args.out, "run.csv")
    if not os.path.exists(path):
        raise MissingArtifactError(f"missing run log {path}")
    data = read_run_csv(path)
    cols = data["columns"]
    doc = reconstruct_physical(
        cols["s"],
        np.log(cols["lambda"]),
        cols["b"],
        window_fraction=cfg["reconstruct.window_fraction"],
    )
    write_reconstruction(doc, os.path.join(args.out, "reconstruction.json"))
    _say(args, f"T = {doc['T']:.6e}; c* = {doc['c_star']:.6f}")
    return EXIT_OK


def cmd_verify(args, cfg: Config) -> int:
    """Fast property matrix across the modules (pass/fail per check)."""
    from .corrector import (
        c1_direct,
        reconnection_residual,
        residual_order_fit,
        solve_hierarchy,
    )
    from .hermite import hermite_eval, hermite_norm_sq
    from .grids import GridFunction, LineGrid, WeightKind
    from .inverter import homogeneous_pair
    from .profiles import kappa_profile
    from .quadrature import coercivity_ratio, weighted_inner
    from .simulator import reconstruct_physical
    from .spectral import assemble_radial_operator, solve_spectrum

    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok)))
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))

    p = cfg["p"]
    kp = kappa_profile(p)
    grid = RadialGrid.uniform(15.0, 0.005)

    zline = LineGrid.symmetric(20.0, 0.01)
    p0 = GridFunction(zline, hermite_eval(0, zline.nodes))
    p2 = GridFunction(zline, hermite_eval(2, zline.nodes))
    orth = abs(weighted_inner(p0, p2, WeightKind.rho_z()))
    nrm = abs(weighted_inner(p2, p2, WeightKind.rho_z()) - hermite_norm_sq(2))
    check("transverse polynomial orthogonality", orth < 1e-8 and nrm < 1e-6,
          f"defects {orth:.1e}, {nrm:.1e}")

    cyl = CylGrid.uniform(r_max=14.0, h_r=0.1, z_max=16.0, h_z=0.1)
    rng = np.random.default_rng(1)
    worst = 0.0
    r, z = cyl.meshes()
    for _ in range(20):
        c = rng.normal(size=(2, 2))
        s = rng.uniform(0.2, 0.5)
        u = GridFunction(cyl, (c[0, 0] + c[1, 0] * r * r + c[0, 1] * z * z)
                         * np.exp(-s * (r * r + z * z)))
        worst = max(worst, coercivity_ratio(u, K=2))
    check("weighted Hardy quotient bound", worst <= 20.0, f"max {worst:.2f}")

    op = assemble_radial_operator(kp, RadialGrid.uniform(15.0, 0.0025))
    spec = solve_spectrum(op, count=6)
    dev = np.max(np.abs(spec.eigenvalues[:4] - np.array([-1.0, 0.0, 1.0, 2.0])))
    check("constant-profile oscillator spectrum", dev < 1e-3, f"dev {dev:.1e}")

    cylg = CylGrid.uniform(r_max=12.0, h_r=0.02, z_max=10.0, h_z=0.02)
    rec = max(reconnection_residual(b, kp, cylg) for b in (1e-3, 1e-2, 1e-1))
    check("reconnecting-family identity (constant profile)", rec < 1e-8, f"max {rec:.1e}")

    pair = homogeneous_pair(2, kp, RadialGrid.uniform(15.0, 0.0025))
    rr = pair.grid.nodes
    sel = (rr >= 0.5) & (rr <= 13.0)
    wd = np.max(np.abs(pair.wronskian_product()[sel] - 1.0))
    check("homogeneous-pair wronskian normalization", wd < 1e-6, f"dev {wd:.1e}")

    cor = solve_hierarchy(kp, n=2, grid=grid)
    c1_h = cor.c1
    c1_d = c1_direct(kp, grid)
    target = 4.0 * p / (p - 1.0)
    ok = abs(c1_h - target) < 1e-6 and abs(c1_d - target) < 1e-6 and abs(cor.d1 - 1.0) < 1e-10
    check("first drift-law coefficients (two paths)", ok,
          f"hierarchy {c1_h!r}, direct {c1_d!r}, d1 {cor.d1!r}")

    slope, sups = residual_order_fit(cor)
    bvals = np.array([1e-2, 10 ** -2.5, 1e-3])
    check("localized residual order", slope >= cor.n + 0.5 or np.all(sups <= bvals ** (cor.n + 1)),
          f"slope {slope:.2f}")

    s_arr = np.linspace(50.0, 80.0, 2001)
    doc = reconstruct_physical(s_arr, -s_arr / 2.0, 1.0 / (target * s_arr))
    check("free-boundary synthetic identity",
          abs(doc["c_star"] - np.sqrt(target)) < 1e-3,
          f"c* {doc['c_star']:.6f} vs sqrt(c1) {np.sqrt(target):.6f}")

    failed = [name for name, ok in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blowuplab",
        description="numerical laboratory for anisotropic self-similar blow-up",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("--config", default=None, help="key=value configuration file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the seed")
        sp.add_argument("--quiet", action="store_true", help="suppress stdout chatter")
        if name == "config":
            sp.add_argument("--defaults", action="store_true")
    return parser


def cmd_config(args, cfg: Config) -> int:
    """Print the full default configuration."""
    print(default_config_text(), end="")
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "spectrum": cmd_spectrum,
    "corrector": cmd_corrector,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
    "config": cmd_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    try:
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MISSING
    except OutOfBasinError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BASIN
    except InstabilityError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INSTABILITY
    except BlowupLabError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
