"""Command line interface: ``elasticsurf <command> ...``.

Exit codes: 0 success, 2 validation failure, 3 non-convergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .diffeo import jacobian_det, step_bound
from .grid import GridError, build_grid
from .harmonics import vectorfield_basis
from .io import (RunConfig, SurfaceFormatError, export_geodesic, load_surface, save_surface)
from .metric import MetricWeights
from .pipelines import karcher_mean, match, srnf_comparison
from .shapes import GENERATORS, synth_shape

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("elasticsurf")


class NotConverged(RuntimeError):
    pass


def _floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str):
    return [int(v) for v in text.split(",") if v.strip()]


def _match_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("matching")
    g.add_argument("--config", help="JSON run config (e.g. a snapshot from a previous run); "
                                    "explicit flags override it")
    g.add_argument("--weights", help="metric weights a,b,c,d (default 0,0.5,1,0)")
    g.add_argument("--T", type=int, help="number of time steps")
    g.add_argument("--deg", type=int, help="max harmonic degree of path perturbations")
    g.add_argument("--deg-bar", type=int, dest="deg_bar",
                   help="max harmonic degree of reparametrization fields")
    g.add_argument("--N", type=int, help="number of outer reparametrization steps")
    g.add_argument("--mode", choices=("param", "joint", "cd", "rigid"))
    g.add_argument("--central-diff", action="store_true", default=None, dest="central_diff",
                   help="symmetric time differences in the energy")
    g.add_argument("--multires", action="store_true", default=None,
                   help="coarse-to-fine matching")
    g.add_argument("--interior", choices=("original", "reparametrized"))
    g.add_argument("--init", choices=("none", "icosahedral"))
    g.add_argument("--max-iter", type=int, dest="max_iter", help="optimizer iteration cap")
    g.add_argument("--normalize", choices=("unit_area", "none"),
                   help="rescale inputs to unit area (default for distances)")


def _run_config(args, default_normalize: str) -> RunConfig:
    base = RunConfig.load(args.config).to_dict() if args.config else {"normalize": default_normalize}
    if args.weights is not None:
        base["weights"] = MetricWeights.parse(args.weights).astuple()
    for key in ("T", "deg", "deg_bar", "N", "mode", "multires", "interior", "init", "normalize"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    if args.central_diff:
        base["derivative"] = "central"
    if args.max_iter is not None:
        base["optimizer"] = dict(base.get("optimizer", {}), max_iter=args.max_iter)
    base.pop("output_dir", None)
    base.pop("inputs", None)
    return RunConfig.from_dict(base)


def _load(path, rc: RunConfig):
    grid, f, _ = load_surface(path, normalize=rc.normalize == "unit_area")
    if rc.n_theta is not None and (grid.n_theta, grid.n_phi) != (rc.n_theta, rc.n_phi):
        raise GridError(f"{path}: grid {grid.n_theta}x{grid.n_phi} does not match config "
                        f"{rc.n_theta}x{rc.n_phi}")
    return f


def _pair(args, default_normalize):
    rc = _run_config(args, default_normalize)
    f1, f2 = _load(args.source, rc), _load(args.target, rc)
    rc = replace(rc, n_theta=int(f1.shape[1]), n_phi=int(f1.shape[0]))
    return rc, f1, f2


def _report(result, out=None):
    out = out or sys.stdout
    print(f"distance {result.distance:.12g}", file=out)
    print(f"energy {result.energy:.12g}", file=out)
    print(f"iterations {result.iterations}", file=out)
    if not result.converged:
        raise NotConverged("final path solve did not converge: " + result.reports[-1].message)


def cmd_geodesic(args):
    rc, f1, f2 = _pair(args, "none")
    res = match(f1, f2, rc.match_config())
    out = Path(args.out)
    rc = replace(rc, output_dir=str(out), inputs={"source": str(Path(args.source).resolve()),
                                                  "target": str(Path(args.target).resolve())})
    arch = export_geodesic(res, out, rc)
    print(f"wrote {len(arch.frames)} frames to {arch.directory}")
    _report(res)


def cmd_distance(args):
    rc, f1, f2 = _pair(args, "unit_area")
    res = match(f1, f2, rc.match_config())
    _report(res)


def cmd_mean(args):
    rc = _run_config(args, "unit_area")
    if len(args.inputs) < 2:
        raise ValueError("mean needs at least two input surfaces")
    surfaces = [_load(p, rc) for p in args.inputs]
    res = karcher_mean(surfaces, rc.match_config(), max_iter=args.max_outer, tol=args.tol)
    save_surface(args.out, res.mean)
    for h in res.history:
        print(json.dumps(h))
    print(f"wrote mean to {args.out} after {res.iterations} iterations")
    if not res.converged:
        raise NotConverged(f"Karcher iteration did not converge in {args.max_outer} steps")


def cmd_srnf_compare(args):
    rc = _run_config(args, "unit_area")
    f1, f2 = _load(args.source, rc), _load(args.target, rc)
    table = srnf_comparison(f1, f2, tuple(_ints(args.T_list)), geodesic=args.geodesic,
                            config=rc.match_config())
    text = table.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)


def cmd_bound_check(args):
    xv = np.loadtxt(args.coefficients, dtype=np.float64, ndmin=1).reshape(-1)
    grid = build_grid(args.n_theta, args.n_phi)
    vb = vectorfield_basis(grid, args.deg_bar)
    if xv.size != len(vb):
        raise ValueError(f"coefficient file has {xv.size} values, deg_bar={args.deg_bar} "
                         f"needs {len(vb)}")
    bound = step_bound(vb, xv)
    print(f"step_bound {bound:.12g}")
    ts = _floats(args.t) if args.t else [0.5 * bound, 0.99 * bound]
    for t in ts:
        dmin = float(jacobian_det(vb, xv, t).min())
        print(f"t {t:.12g} t/bound {t / bound:.6g} min_jacobian {dmin:.12g}")


def cmd_synth(args):
    params = {}
    for item in args.param or []:
        key, _, val = item.partition("=")
        if not _:
            raise ValueError(f"--param expects key=value, got {item!r}")
        params[key] = json.loads(val)
    grid = build_grid(args.n_theta, args.n_phi)
    f = synth_shape(args.kind, grid, **params)
    save_surface(args.out, f, units=args.units, fmt=args.format)
    print(f"wrote {args.kind} on {args.n_theta}x{args.n_phi} grid to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elasticsurf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("geodesic", help="geodesic between two surfaces, exported as OBJ frames")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--out", required=True, help="output directory")
    _match_args(s)
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("distance", help="print the distance between two surfaces")
    s.add_argument("source")
    s.add_argument("target")
    _match_args(s)
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("mean", help="Karcher mean of several surfaces")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out", required=True, help="output grid file")
    s.add_argument("--max-outer", type=int, default=20, dest="max_outer")
    s.add_argument("--tol", type=float, default=1e-2,
                   help="stop when the mean velocity is below tol times the RMS distance")
    _match_args(s)
    s.set_defaults(func=cmd_mean)

    s = sub.add_parser("srnf-compare", help="linear-path lengths, split metric vs SRNF image")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--T-list", default="13,20,99", dest="T_list")
    s.add_argument("--geodesic", action="store_true", help="also compute the geodesic length")
    s.add_argument("--out", help="CSV output file")
    _match_args(s)
    s.set_defaults(func=cmd_srnf_compare)

    s = sub.add_parser("bound-check", help="step bound and Jacobians of a reparametrization field")
    s.add_argument("coefficients", help="text file of vector-field coefficients")
    s.add_argument("--deg-bar", type=int, required=True, dest="deg_bar")
    s.add_argument("--n-theta", type=int, default=24, dest="n_theta")
    s.add_argument("--n-phi", type=int, default=49, dest="n_phi")
    s.add_argument("--t", help="comma-separated step sizes (default: 0.5 and 0.99 of the bound)")
    s.set_defaults(func=cmd_bound_check)

    s = sub.add_parser("synth", help="write a synthetic surface")
    s.add_argument("kind", choices=sorted(GENERATORS))
    s.add_argument("--out", required=True)
    s.add_argument("--n-theta", type=int, default=24, dest="n_theta")
    s.add_argument("--n-phi", type=int, default=49, dest="n_phi")
    s.add_argument("--param", action="append", help="generator parameter key=value (JSON value)")
    s.add_argument("--units", default="1")
    s.add_argument("--format", choices=("binary", "csv"), default="binary")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SurfaceFormatError, GridError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
