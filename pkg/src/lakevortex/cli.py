"""Command-line entry point: ``lakevortex <command> --config FILE``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 verify-suite
failure. Diagnostics go to stderr; results go to files only.
"""

import argparse
import json
import os
import sys
import time

COMMANDS = ("simulate", "green", "measures", "rings", "riptoy", "verify")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser():
    p = argparse.ArgumentParser(prog="lakevortex", description="Point-vortex simulator for shallow lakes with variable depth")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory (default: output.directory of the config)")
    p.add_argument("--seed", type=int, default=0, help="reserved; recorded in reports")
    p.add_argument("--threads", type=int, default=None, help="worker threads (LAKEVORTEX_THREADS overrides)")
    return p


def resolve_threads(flag):
    env = os.environ.get("LAKEVORTEX_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise SystemExit(f"lakevortex: error: LAKEVORTEX_THREADS must be an integer, got {env!r}")
    else:
        n = flag if flag is not None else 1
    if n < 1:
        raise SystemExit("lakevortex: error: thread count must be >= 1")
    return n


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _need(cfg, *blocks):
    from .errors import ConfigError

    for b in blocks:
        v = getattr(cfg, b)
        if v is None or v == []:
            raise ConfigError("block is required for this command", b)


def cmd_simulate(cfg, out, base, threads, seed):
    from .config import context_of, vortices_of
    from .dynamics import simulate

    _need(cfg, "domain", "bathymetry", "grid", "vortices")
    ctx = context_of(cfg, base, threads)
    state = vortices_of(cfg)
    t0 = time.perf_counter()
    it = cfg.integrator
    traj = simulate(state, ctx, it.dt, it.T, it.sample_every)
    rep = traj.report()
    rep.update({"dt": it.dt, "T": it.T, "mode": ctx.mode, "template": ctx.variant, "seed": seed, "wall_seconds": time.perf_counter() - t0})
    if "csv" in cfg.output.formats:
        traj.write_csv(os.path.join(out, "trajectory.csv"))
    if "json" in cfg.output.formats:
        _write_json(os.path.join(out, "report.json"), rep)


def cmd_green(cfg, out, base, threads, seed):
    from .bathymetry import sample_bathymetry
    from .config import bathymetry_of, grid_of
    from .elliptic import assemble_lb, compare_near_diagonal, solve_dirichlet, spread_delta
    from .fieldio import write_grid_field

    _need(cfg, "domain", "bathymetry", "grid", "green")
    grid = grid_of(cfg)
    bathy = bathymetry_of(cfg, base)
    op = assemble_lb(grid, sample_bathymetry(bathy, grid), bathy=bathy, method=cfg.solver.method)
    src = cfg.green.source
    grid.check_clearance(src, 2 * grid.h, "green.source")
    tol = cfg.solver.tol
    G, info = solve_dirichlet(op, spread_delta(grid, src), tol=tol, return_info=True)
    meta = {"source": list(src), "tol": tol, "iterations": info["iterations"], "residual": info["residual"], "seed": seed}
    if "field" in cfg.output.formats:
        write_grid_field(os.path.join(out, "green.txt"), grid, G)
    if cfg.green.tilde:
        r = spread_delta(grid, src) / op.interior(op.b)
        Gt, tinfo = solve_dirichlet(op, r, tol=tol, return_info=True)
        meta["tilde"] = {"iterations": tinfo["iterations"], "residual": tinfo["residual"]}
        if "field" in cfg.output.formats:
            write_grid_field(os.path.join(out, "green_tilde.txt"), grid, Gt)
    if cfg.green.separations:
        meta["near_diagonal"] = compare_near_diagonal(op, bathy, src, cfg.green.separations, tol=tol)
    _write_json(os.path.join(out, "green.json"), meta)


def cmd_measures(cfg, out, base, threads, seed):
    from .bathymetry import sample_bathymetry
    from .config import bathymetry_of, grid_of
    from .elliptic import assemble_lb
    from .fieldio import write_grid_field
    from .harmonic import harmonic_measures

    _need(cfg, "domain", "bathymetry", "grid")
    grid = grid_of(cfg)
    bathy = bathymetry_of(cfg, base)
    op = assemble_lb(grid, sample_bathymetry(bathy, grid), bathy=bathy, method=cfg.solver.method)
    data = harmonic_measures(op, tol=cfg.solver.tol)
    islands = []
    for l, (curve, loop) in enumerate(zip(grid.domain.islands, data.loops), start=1):
        islands.append({
            "index": l,
            "curve": curve.to_dict(),
            "boundary_nodes": int(((grid.kind == 1) & (grid.label == l)).sum()),
            "loop_edges": len(loop),
        })
        if "field" in cfg.output.formats:
            write_grid_field(os.path.join(out, f"measure_{l}.txt"), grid, data.measures[l - 1])
    _write_json(os.path.join(out, "measures.json"), {"P": data.P.tolist(), "Q": data.Q.tolist(), "island_metadata": islands, "seed": seed})


def cmd_rings(cfg, out, base, threads, seed):
    from .rings import RingSystem, ring_simulate

    _need(cfg, "rings")
    rc = cfg.rings
    rings = RingSystem([r.x for r in rc.rings], [r.y for r in rc.rings], [r.gamma for r in rc.rings], [r.eps for r in rc.rings])
    traj = ring_simulate(rings, rc.dt, rc.T, rc.sample_every, rc.fd_step, rc.kernel)
    if "csv" in cfg.output.formats:
        traj.write_csv(os.path.join(out, "rings.csv"))
    if "json" in cfg.output.formats:
        rep = traj.report()
        rep.update({"dt": rc.dt, "T": rc.T, "kernel": rc.kernel, "seed": seed})
        _write_json(os.path.join(out, "rings.json"), rep)


def cmd_riptoy(cfg, out, base, threads, seed):
    from .rings import RipPairState, rip_event_time, rip_pair_simulate

    _need(cfg, "riptoy")
    rc = cfg.riptoy
    state = RipPairState(rc.x, rc.y, rc.gamma, rc.p)
    traj = rip_pair_simulate(state, rc.dt, rc.T, sample_every=rc.sample_every)
    if "csv" in cfg.output.formats:
        traj.write_csv(os.path.join(out, "riptoy.csv"))
    if "json" in cfg.output.formats:
        rep = traj.report()
        rep.update({"dt": rc.dt, "T": rc.T, "closed_form_blowup_time": rip_event_time(state), "seed": seed})
        _write_json(os.path.join(out, "riptoy.json"), rep)


def cmd_verify(cfg, out, base, threads, seed):
    from .verify import report_json, run_suite

    crit = cfg.verify.criteria if cfg.verify is not None else None
    rep = run_suite(crit)
    with open(os.path.join(out, "verify.json"), "w") as fh:
        fh.write(report_json(rep))
    for c in rep["checks"]:
        print(f"criterion {c['criterion']:2d} {'PASS' if c['passed'] else 'FAIL'}  {c['name']}", file=sys.stderr)
    return 0 if rep["passed"] else 3


HANDLERS = {
    "simulate": cmd_simulate,
    "green": cmd_green,
    "measures": cmd_measures,
    "rings": cmd_rings,
    "riptoy": cmd_riptoy,
    "verify": cmd_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    threads = resolve_threads(args.threads)
    for v in THREAD_VARS:
        os.environ.setdefault(v, str(threads))

    from .config import config_dir, load_config
    from .errors import InputError, NumericalError

    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output.directory
        os.makedirs(out, exist_ok=True)
        code = HANDLERS[args.command](cfg, out, config_dir(args.config), threads, args.seed)
    except InputError as e:
        print(f"lakevortex: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"lakevortex: error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"lakevortex: numerical failure: {e}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
