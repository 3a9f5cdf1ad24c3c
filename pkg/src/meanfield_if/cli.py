"""Command line entry point: bounds, solve, particles, validate, figure1, regions.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 blow-up with
--fail-on-blowup. Times on the command line and in CSV files are physical
(before the noise time change).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import GridParams, RunConfig, build_run_config, load_config
from .errors import ConfigError, SolverError
from .manifest import ExperimentManifest, output_dir, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_BLOWUP = 0, 2, 3, 4
CURVE_HEADER = ("t", "e", "eprime", "flux")
DENSITY_HEADER = ("t", "y", "p")
DIAG_HEADER = ("iter", "delta", "factor")
PARTICLE_HEADER = ("t", "eN", "cascade_size", "cascade_rounds")
REGIONS_HEADER = ("alpha", "classification", "blowup_time")


class _Blowup(Exception):
    pass


def _model_flags(p: argparse.ArgumentParser, alpha_default=True):
    g = p.add_argument_group("model")
    g.add_argument("--config", help="key=value configuration file")
    g.add_argument("--alpha", type=float)
    g.add_argument("--x0", type=float)
    g.add_argument("--T", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--drift", choices=("zero", "linear"))
    g.add_argument("--lambda", dest="lam", type=float, help="rate of the linear drift")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory (default: $MEANFIELD_IF_OUTPUT_DIR or ./out)")
    g.add_argument("--fail-on-blowup", action="store_true")
    g.add_argument("--plot-stub", action="store_true", help="also write a matplotlib script")


def _grid_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("grid")
    g.add_argument("--dt", type=float)
    g.add_argument("--dy", type=float)
    g.add_argument("--ymin", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--coupling", choices=("cascade", "sweeps", "lagged"), default="cascade")
    g.add_argument("--inner-picard", type=int, default=0,
                   help="number of inner sweeps per step (selects sweeps coupling)")
    g.add_argument("--blowup-cap", type=float)
    g.add_argument("--snapshots", type=str, help="comma-separated density snapshot times")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meanfield-if", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate the a-priori constants")
    _model_flags(p)
    p.add_argument("--c-prime", type=float)
    p.add_argument("--C-T", dest="C_T", type=float)
    p.add_argument("--cprime-samples", type=int, default=200_000)

    p = sub.add_parser("solve", help="mean-field solve (Picard chain or direct)")
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--method", choices=("picard", "direct"), default="direct")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--T1", type=float, default=1.0, help="initial Picard window length")

    p = sub.add_parser("particles", help="finite-N network simulation")
    _model_flags(p)
    p.add_argument("--N", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--bridge", action="store_true", help="Brownian-bridge crossing correction")
    p.add_argument("--cascade", choices=("synchronous", "sequential"), default="synchronous")
    p.add_argument("--delta-blow", type=float, default=0.05)
    p.add_argument("--hist-times", type=str, help="comma-separated histogram times")

    p = sub.add_parser("validate", help="run check suites")
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--suite", choices=("all", "holder", "decay", "barrier", "cross"),
                   default="all")
    p.add_argument("--c-prime", type=float)

    p = sub.add_parser("figure1", help="firing curves at alpha = 0.38 and 0.39")
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--alphas", type=str, default="0.38,0.39")
    p.add_argument("--particles", action="store_true", help="also run the particle system")
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--pdt", type=float, default=1e-4, help="particle time step")

    p = sub.add_parser("regions", help="blow-up classification over an alpha grid")
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--alphas", type=str, default=",".join(f"{a:.2f}" for a in
                                                           np.arange(0.05, 1.0, 0.05)))
    p.add_argument("--N", type=int, default=20_000)
    p.add_argument("--pdt", type=float, default=1e-4, help="particle time step")
    p.add_argument("--workers", type=int, default=1)
    return ap


def _floats(text: str | None):
    if not text:
        return []
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _run_config(args, **defaults) -> RunConfig:
    over = {
        "alpha": args.alpha, "x0": args.x0, "T": args.T, "sigma": args.sigma,
        "epsilon": args.epsilon, "drift.kind": args.drift, "drift.lambda": args.lam,
        "seed": args.seed,
    }
    if hasattr(args, "dy"):
        # --dt is the particle step for the particles command, the PDE step otherwise
        for k in ("dt", "dy", "ymin", "theta"):
            over[f"grid.{k}"] = getattr(args, k)
    raw = dict(load_config(args.config).raw)
    for k, v in defaults.items():
        raw.setdefault(k, str(v))
    for k, v in over.items():
        if v is not None:
            raw[k] = str(v)
    return build_run_config(raw)


def _grid(rc: RunConfig, T: float | None = None):
    from .fokker_planck import DEFAULT_DY, default_grid
    gp: GridParams = rc.grid
    cfg = rc.model
    dt = gp.dt * cfg.time_scale if gp.dt else None
    return default_grid(cfg, dy=gp.dy or DEFAULT_DY, dt=dt, ymin=gp.ymin, T=T)


def _opts(args, rc: RunConfig, snapshot_times=None):
    from .fokker_planck import SchemeOptions
    coupling = "sweeps" if args.inner_picard > 0 else args.coupling
    return SchemeOptions(theta=rc.grid.theta, coupling=coupling,
                         max_sweeps=max(args.inner_picard, 1), blowup_cap=args.blowup_cap,
                         snapshot_times=snapshot_times)


def _require_seed(rc: RunConfig, what: str) -> int:
    if rc.seed is None:
        raise ConfigError(f"{what} is stochastic: --seed is mandatory")
    return rc.seed


def _grid_dict(grid) -> dict:
    return {"y_min": grid.y_min, "dy": grid.dy, "dt": grid.dt, "T": grid.T}


def _curve_rows(curve, flux, scale):
    # times and rates converted back to physical units
    return ((t / scale, e, d * scale, f * scale)
            for t, e, d, f in zip(curve.times, curve.values, curve.derivs, flux))


def _plot_stub(outdir: Path, files: list[str], xcol: str, ycol: str, name: str) -> Path:
    path = outdir / f"plot_{name}.py"
    lines = ["import csv", "import matplotlib.pyplot as plt", "", "fig, ax = plt.subplots()"]
    for f in files:
        lines += [f"with open({f!r}) as fh:", "    rows = list(csv.DictReader(fh))",
                  f"ax.plot([float(r[{xcol!r}]) for r in rows], [float(r[{ycol!r}]) for r in rows],"
                  f" label={f!r})"]
    lines += [f"ax.set_xlabel({xcol!r})", f"ax.set_ylabel({ycol!r})", "ax.legend()",
              f"fig.savefig({name + '.png'!r}, dpi=150)", ""]
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def cmd_bounds(args, rc, man, outdir):
    from .bounds import bounds_report, compute_alpha0, estimate_cprime
    cfg = rc.model
    d = cfg.drift
    c_prime = args.c_prime
    if c_prime is None and d.K > 0:
        c_prime = estimate_cprime(d, samples=args.cprime_samples,
                                  seed=_require_seed(rc, "c' calibration"))
    elif c_prime is None:
        c_prime = 2.0
    if args.alpha is None and "alpha" not in rc.raw:
        eps = min(cfg.epsilon, 1 - 1e-12)
        a0 = compute_alpha0(eps, d.Lambda, d.K, c_prime, cfg.init.positive_part_mean())
        cfg = cfg.with_alpha(0.5 * a0)
    rep = bounds_report(cfg, c_prime=c_prime, C_T=args.C_T)
    rep.notes.append(f"evaluated at alpha={cfg.alpha!r}")
    txt = outdir / "bounds.txt"
    txt.write_text(rep.to_key_values(), encoding="utf-8")
    csvp = write_csv(outdir / "bounds.csv", ("name", "value", "inputs_hash"), rep.csv_rows())
    gcurve = write_csv(outdir / "bounds_g.csv", ("t", "g"),
                       zip(rep.g_times / cfg.time_scale, rep.g_a))
    for p in (txt, csvp, gcurve):
        man.add(p)
    sys.stdout.write(rep.to_key_values())
    return EXIT_OK


def cmd_solve(args, rc, man, outdir):
    from .fixed_point import chain_solve
    from .fokker_planck import solve_nonlinear_fp
    cfg = rc.model
    grid = _grid(rc)
    scale = cfg.time_scale
    snaps = [t * scale for t in _floats(args.snapshots)] or list(np.linspace(0, cfg.T, 5))
    opts = _opts(args, rc, snapshot_times=tuple(snaps))
    man.grid = _grid_dict(grid)
    if args.method == "direct":
        curve, field, blow = solve_nonlinear_fp(cfg, grid=grid, opts=opts)
        flux = field.flux
        fields = [(0.0, field)]
        diag_rows = []
    else:
        curve, blow, chain = chain_solve(cfg, grid=grid, T1_hint=args.T1, tol=args.tol,
                                         opts=opts, keep_fields=True)
        fields = list(zip(chain.starts, chain.fields))
        flux = np.concatenate([f.flux[:-1] for _, f in fields] + [fields[-1][1].flux[-1:]])
        flux = flux[:curve.times.size]
        diag_rows, it = [], 0
        for w in chain.windows:
            for _, d, f in w.rows():
                it += 1
                diag_rows.append((it, d, f))
    man.add(write_csv(outdir / "curve.csv", CURVE_HEADER, _curve_rows(curve, flux, scale)))
    dens = []
    for t in snaps:
        for start, f in fields:
            local = t - start
            if -1e-12 <= local <= f.grid.T + 1e-12:
                idx = np.nonzero(np.abs(f.snap_times - local) <= 0.5 * f.grid.dt)[0]
                if idx.size:
                    dens.extend((t / scale, y, p) for y, p in zip(f.y, f.snapshots[idx[0]]))
                    break
    man.add(write_csv(outdir / "density.csv", DENSITY_HEADER, dens))
    if args.method == "picard":
        man.add(write_csv(outdir / "diagnostics.csv", DIAG_HEADER, diag_rows))
    if args.plot_stub:
        man.add(_plot_stub(outdir, ["curve.csv"], "t", "e", "solve"))
    print(f"e(T)={float(curve.values[-1])!r} blowup={'none' if blow is None else blow / scale}")
    if blow is not None and args.fail_on_blowup:
        raise _Blowup(blow / scale)
    return EXIT_OK


def cmd_particles(args, rc, man, outdir):
    from .particles import simulate
    cfg = rc.model
    seed = _require_seed(rc, "particles")
    scale = cfg.time_scale
    hist_t = [t * scale for t in _floats(args.hist_times)]
    tr = simulate(cfg, args.N, args.dt * scale, cfg.T, seed, threads=args.threads,
                  bridge=args.bridge, mode=args.cascade, delta_blow=args.delta_blow,
                  snapshot_times=hist_t)
    man.seeds = [seed]
    man.grid = {"N": args.N, "dt": args.dt, "T": cfg.T / scale}
    rows = ((t / scale, e, s, r) for t, e, s, r in
            zip(tr.times, tr.eN, np.concatenate([[0], tr.cascade_sizes]),
                np.concatenate([[0], tr.cascade_rounds])))
    man.add(write_csv(outdir / "particles.csv", PARTICLE_HEADER, rows))
    if hist_t:
        hrows = [(t / scale, y, h) for t in hist_t for y, h in zip(*tr.histograms[t])]
        man.add(write_csv(outdir / "histograms.csv", ("t", "y", "density"), hrows))
    if args.plot_stub:
        man.add(_plot_stub(outdir, ["particles.csv"], "t", "eN", "particles"))
    blow = tr.blowup
    print(f"eN(T)={float(tr.eN[-1])!r} max_fraction={tr.max_fraction!r} "
          f"blowup={'none' if blow is None else blow[0] / scale}")
    if blow is not None and args.fail_on_blowup:
        raise _Blowup(blow[0] / scale)
    return EXIT_OK


def cmd_validate(args, rc, man, outdir):
    from .validation import CSV_HEADER, SUITES
    cfg = rc.model
    grid = _grid(rc)
    man.grid = _grid_dict(grid)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    for name in names:
        fn = SUITES[name]
        if name in ("holder", "barrier"):
            reports += fn(cfg, grid if rc.grid.dy or rc.grid.dt else None,
                          c_prime=args.c_prime, seed=rc.seed)
        elif name == "decay":
            reports += fn(cfg, grid if rc.grid.dy or rc.grid.dt else None)
        else:
            reports += fn(cfg, grid)
    man.add(write_csv(outdir / "validate.csv", CSV_HEADER, (r.row() for r in reports)))
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} margin={r.worst_margin:.4g} {r.details}")
    return EXIT_OK


def _pde_blowup(cfg, grid, opts):
    from .fokker_planck import solve_nonlinear_fp
    curve, field, blow = solve_nonlinear_fp(cfg, grid=grid, opts=opts)
    return curve, field, blow


def cmd_figure1(args, rc, man, outdir):
    from .particles import simulate
    base = rc.model
    scale = base.time_scale
    alphas = _floats(args.alphas)
    summary = []
    files = []
    for a in alphas:
        cfg = base.with_alpha(a)
        grid = _grid(RunConfig(cfg, rc.grid, rc.seed, rc.raw))
        curve, field, blow = _pde_blowup(cfg, grid, _opts(args, rc))
        name = f"figure1_pde_alpha{a:g}.csv"
        man.add(write_csv(outdir / name, CURVE_HEADER, _curve_rows(curve, field.flux, scale)))
        files.append(name)
        summary.append((a, "pde", blow is not None, None if blow is None else blow / scale,
                        float(field.exits.max())))
        if args.particles:
            seed = _require_seed(rc, "figure1 --particles")
            tr = simulate(cfg, args.N, args.pdt * scale, cfg.T, seed)
            pname = f"figure1_particles_alpha{a:g}.csv"
            rows = ((t / scale, e, s, r) for t, e, s, r in
                    zip(tr.times, tr.eN, np.concatenate([[0], tr.cascade_sizes]),
                        np.concatenate([[0], tr.cascade_rounds])))
            man.add(write_csv(outdir / pname, PARTICLE_HEADER, rows))
            summary.append((a, "particles", tr.blowup is not None,
                            None if tr.blowup is None else tr.blowup[0] / scale, tr.max_fraction))
    man.add(write_csv(outdir / "figure1_summary.csv",
                      ("alpha", "method", "blowup", "blowup_time", "max_step_fraction"), summary))
    if args.plot_stub:
        man.add(_plot_stub(outdir, files, "t", "e", "figure1"))
    for row in summary:
        print(",".join(str(v) for v in row))
    if args.fail_on_blowup and any(r[2] for r in summary):
        raise _Blowup(min(r[3] for r in summary if r[2]))
    return EXIT_OK


def classify_alpha(cfg, grid_params: GridParams, N: int, pdt: float, seed: int, opts):
    """(classification, blowup_time) from one particle run and one direct solve."""
    from .particles import simulate
    rc = RunConfig(cfg, grid_params, seed, {})
    _, _, pde_blow = _pde_blowup(cfg, _grid(rc), opts)
    tr = simulate(cfg, N, pdt * cfg.time_scale, cfg.T, seed)
    part_blow = tr.blowup[0] if tr.blowup else None
    if (pde_blow is None) == (part_blow is None):
        if pde_blow is None:
            return "no-blow-up", None
        return "blow-up", pde_blow / cfg.time_scale
    return "undecided", None


def cmd_regions(args, rc, man, outdir):
    seed = _require_seed(rc, "regions")
    alphas = _floats(args.alphas)
    if any(not 0 < a < 1 for a in alphas):
        raise ConfigError("alpha grid must lie in (0, 1)")
    opts = _opts(args, rc)
    jobs = [(rc.model.with_alpha(a), rc.grid, args.N, args.pdt, seed, opts) for a in alphas]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            results = list(ex.map(classify_alpha, *zip(*jobs)))
    else:
        results = [classify_alpha(*j) for j in jobs]
    rows = [(a, c, t) for a, (c, t) in zip(alphas, results)]
    man.seeds = [seed]
    man.grid = {"N": args.N, "particle_dt": args.pdt, "T": rc.model.T / rc.model.time_scale}
    man.add(write_csv(outdir / "regions.csv", REGIONS_HEADER, rows))
    for r in rows:
        print(",".join("" if v is None else str(v) for v in r))
    return EXIT_OK


COMMANDS = {"bounds": cmd_bounds, "solve": cmd_solve, "particles": cmd_particles,
            "validate": cmd_validate, "figure1": cmd_figure1, "regions": cmd_regions}

DEFAULTS = {"figure1": {"x0": 0.8, "T": 4.0}, "regions": {"x0": 0.8, "T": 4.0}}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        rc = _run_config(args, **DEFAULTS.get(args.command, {}))
        outdir = output_dir(args.out)
        man = ExperimentManifest(args.command, argv, dict(rc.raw),
                                 [] if rc.seed is None else [rc.seed], {})
        code = COMMANDS[args.command](args, rc, man, outdir)
        man.write(outdir)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Blowup as exc:
        man.write(outdir)
        print(f"blow-up detected at t={exc.args[0]}", file=sys.stderr)
        return EXIT_BLOWUP
    except (SolverError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
