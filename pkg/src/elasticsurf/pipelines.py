"""Geodesic matching, initialization, Karcher means and the SRNF length comparison.

Matching modes:

``param``  path straightening between two parametrized surfaces.
``joint``  ``N`` outer steps, each jointly optimizing a small reparametrization
           of the source and the path perturbation.
``cd``     ``N`` outer steps alternating a path solve and a reparametrization
           fit of the source to the first interior sample.
``rigid``  like ``joint`` with an additional rotation of the target.

Every mode finishes with a path solve for the final source, so ``N = 0``
reduces to ``param``.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .diffeo import build_map, compose, interpolate, resample, rotation_map, step_bound
from .energy import (DiscretePath, StepBoundError, energy_parametrized, reparam_functional,
                     rotation_matrix, samples_length, unparametrized_path)
from .grid import DTYPE, GridError, SphericalGrid, as_tensor, build_grid, integrate
from .harmonics import HarmonicBasis, surface_basis, vectorfield_basis
from .metric import SRNF_WEIGHTS, MetricWeights, pullback_norm, srnf, srnf_l2_distance
from .optim import OptimizeConfig, minimize, torch_objective

log = logging.getLogger(__name__)

MATCH_MODES = ("param", "joint", "cd", "rigid")


@dataclass
class MatchConfig:
    weights: MetricWeights = SRNF_WEIGHTS
    T: int = 5
    deg: int = 5
    deg_bar: int = 5
    N: int = 3
    mode: str = "param"
    derivative: str = "forward"
    interior: str = "original"     # anchor interior samples at f1 or at the reparametrized source
    safety: float = 0.9            # reparametrization steps stay below safety * step bound
    init: str = "none"             # "none" or "icosahedral"
    multires: bool = False
    optimizer: OptimizeConfig = field(default_factory=OptimizeConfig)

    def validate(self):
        if self.mode not in MATCH_MODES:
            raise ValueError(f"mode must be one of {MATCH_MODES}, got {self.mode!r}")
        if self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        if self.deg < 1 or self.deg_bar < 1:
            raise ValueError(f"deg and deg_bar must be >= 1, got {self.deg}, {self.deg_bar}")
        if self.N < 0:
            raise ValueError(f"N must be >= 0, got {self.N}")
        if not 0 < self.safety <= 1:
            raise ValueError(f"safety must be in (0, 1], got {self.safety}")
        if self.derivative not in ("forward", "central"):
            raise ValueError(f"derivative must be 'forward' or 'central', got {self.derivative!r}")
        if self.init not in ("none", "icosahedral"):
            raise ValueError(f"init must be 'none' or 'icosahedral', got {self.init!r}")
        return self


@dataclass
class MatchResult:
    geodesic: DiscretePath
    distance: float
    energy: float
    gamma_total: torch.Tensor
    rotation: np.ndarray
    reports: list
    outer_energies: list
    steps: list                    # per outer step: dict(t, bound, energy)
    source: torch.Tensor           # final reparametrized source f1 o gamma_total
    config: MatchConfig | None = None

    @property
    def converged(self) -> bool:
        """Whether the final path solve, which defines the distance, converged.

        Intermediate reparametrization solves often stop early at the
        certified step limit by design; their reports stay in ``reports``.
        """
        return bool(self.reports) and self.reports[-1].converged

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.reports)

    @property
    def rotation_matrix(self) -> torch.Tensor:
        return rotation_matrix(as_tensor(self.rotation))


@functools.lru_cache(maxsize=16)
def _bases(n_theta: int, n_phi: int, deg: int, deg_bar: int):
    grid = build_grid(n_theta, n_phi)
    return grid, surface_basis(grid, deg), vectorfield_basis(grid, deg_bar)


def grid_for(f) -> SphericalGrid:
    f = as_tensor(f)
    if f.ndim != 3 or f.shape[-1] != 3:
        raise GridError(f"expected a surface of shape (n_phi, n_theta, 3), got {tuple(f.shape)}")
    return build_grid(f.shape[1], f.shape[0])


def _setup(f1, f2, cfg: MatchConfig):
    f1, f2 = as_tensor(f1).detach(), as_tensor(f2).detach()
    if f1.shape != f2.shape:
        raise GridError(f"surfaces on different grids: {tuple(f1.shape)} vs {tuple(f2.shape)}")
    grid = grid_for(f1)
    _, sb, vb = _bases(grid.n_theta, grid.n_phi, cfg.deg, cfg.deg_bar)
    return f1, f2, sb.grid, sb, vb


# ---------------------------------------------------------------------------
# building blocks

def _path(grid, sb, start, end, anchor, coeff, T):
    return DiscretePath(grid, start, end, T, coeff=coeff, basis=sb, interior_start=anchor)


def solve_path(w: MetricWeights, grid, sb: HarmonicBasis, start, end, T: int, anchor=None,
               coeff0=None, mode: str = "forward", opt: OptimizeConfig | None = None):
    """Minimize the path energy over ``Coeff`` with fixed end samples."""
    anchor = start if anchor is None else anchor
    L = len(sb)
    shape = (L, T - 1)
    x0 = np.zeros(L * (T - 1)) if coeff0 is None else np.asarray(coeff0, dtype=float).reshape(-1)

    def fn(x):
        return energy_parametrized(w, _path(grid, sb, start, end, anchor, x.reshape(shape), T), mode)

    rep = minimize(torch_objective(fn, x0.size, "path energy"), x0, opt)
    coeff = torch.as_tensor(rep.x_opt.reshape(shape), dtype=DTYPE)
    return coeff, rep


def _identity_map(grid):
    return grid.points()


def _reparametrized(grid, f1, gamma_total, vb, xv, t):
    """``f1 o (gamma_total o gamma)``: one interpolation of ``f1`` however many steps were composed."""
    return resample(grid, f1, compose(grid, gamma_total, build_map(vb, xv, t)))


def _accept(energy_at, e_ref, t0=1.0, halvings=8):
    """Largest ``t = t0 / 2^k`` whose energy does not exceed ``e_ref`` (``0`` if none)."""
    t = t0
    for _ in range(halvings + 1):
        try:
            e = energy_at(t)
        except (StepBoundError, ValueError):
            e = math.inf
        if e <= e_ref * (1 + 1e-12) + 1e-15:
            return t, e
        t *= 0.5
    return 0.0, e_ref


def _finish(w, grid, sb, f1, f2_end, source, coeff, cfg, reports, outer, steps, gamma_total,
            r=None, f2=None):
    if cfg.mode == "rigid":
        coeff, r, rep = _solve_rigid_final(w, grid, sb, f1, f2, source, coeff, r, cfg)
        end = as_tensor(f2) @ rotation_matrix(torch.as_tensor(r)).T
    else:
        end = f2_end
        anchor = f1 if cfg.interior == "original" else source
        coeff, rep = solve_path(w, grid, sb, source, end, cfg.T, anchor, coeff,
                                cfg.derivative, cfg.optimizer)
    reports.append(rep)
    anchor = f1 if cfg.interior == "original" else source
    path = _path(grid, sb, source, end.detach(), anchor, coeff, cfg.T)
    energy = float(energy_parametrized(w, path, cfg.derivative))
    outer.append(energy)
    return MatchResult(path, math.sqrt(max(energy, 0.0)), energy, gamma_total,
                       np.zeros(3) if r is None else np.asarray(r, dtype=float),
                       reports, outer, steps, source, cfg)


def _solve_rigid_final(w, grid, sb, f1, f2, source, coeff, r, cfg):
    L, T = len(sb), cfg.T
    anchor = f1 if cfg.interior == "original" else source

    def fn(x):
        R = rotation_matrix(x[:3])
        end = f2 @ R.T
        return energy_parametrized(w, _path(grid, sb, source, end, anchor,
                                            x[3:].reshape(L, T - 1), T), cfg.derivative)

    x0 = np.concatenate([np.asarray(r, dtype=float), coeff.reshape(-1).numpy()])
    rep = minimize(torch_objective(fn, x0.size, "rigid path energy"), x0, cfg.optimizer)
    return (torch.as_tensor(rep.x_opt[3:].reshape(L, T - 1), dtype=DTYPE),
            rep.x_opt[:3].copy(), rep)


# ---------------------------------------------------------------------------
# algorithms

def match_parametrized(w: MetricWeights, f1, f2, T: int = 5, deg: int = 5,
                       config: MatchConfig | None = None) -> MatchResult:
    """Path straightening between parametrized surfaces; ``dist = sqrt(F)``."""
    cfg = replace(config or MatchConfig(), weights=w, T=T, deg=deg, mode="param").validate()
    f1, f2, grid, sb, _ = _setup(f1, f2, cfg)
    return _finish(w, grid, sb, f1, f2, f1, None, cfg, [], [], [], _identity_map(grid))


def _initial_source(f1, f2, grid, cfg):
    if cfg.init == "icosahedral":
        init = initialize_reparam(f1, f2, grid)
        gamma = rotation_map(grid, init.rotation)
        return resample(grid, f1, gamma).detach(), gamma
    return f1, _identity_map(grid)


def match_unparametrized_joint(w: MetricWeights, f1, f2, T: int = 5, deg: int = 5,
                               deg_bar: int = 5, N: int = 3,
                               config: MatchConfig | None = None) -> MatchResult:
    """Joint optimization over a reparametrization of the source and the path."""
    cfg = replace(config or MatchConfig(), weights=w, T=T, deg=deg, deg_bar=deg_bar, N=N,
                  mode="joint").validate()
    return _outer_joint(f1, f2, cfg)


def match_mod_rigid(w: MetricWeights, f1, f2, T: int = 5, deg: int = 5, deg_bar: int = 5,
                    N: int = 3, config: MatchConfig | None = None) -> MatchResult:
    """Joint optimization additionally over a rotation ``R`` of the target."""
    cfg = replace(config or MatchConfig(), weights=w, T=T, deg=deg, deg_bar=deg_bar, N=N,
                  mode="rigid").validate()
    return _outer_joint(f1, f2, cfg)


def _outer_joint(f1, f2, cfg: MatchConfig, state=None) -> MatchResult:
    w = cfg.weights
    f1, f2, grid, sb, vb = _setup(f1, f2, cfg)
    L, Lb, T = len(sb), len(vb), cfg.T
    rigid = cfg.mode == "rigid"
    if state is None:
        source, gamma_total = _initial_source(f1, f2, grid, cfg)
        coeff = torch.zeros(L, T - 1, dtype=DTYPE)
        r = np.zeros(3)
    else:
        source, gamma_total, coeff, r = state
    reports, outer, steps = [], [], []
    nr = 3 if rigid else 0

    def unpack(x):
        rr = x[:nr] if rigid else None
        return rr, x[nr:nr + Lb], x[nr + Lb:].reshape(L, T - 1)

    def energy(x, src, t=1.0):
        rr, xv, cf = unpack(x)
        end = f2 @ rotation_matrix(rr).T if rigid else f2
        path = unparametrized_path(f1, end, vb, xv, cf, sb, T, t, src, cfg.interior, cfg.safety)
        return energy_parametrized(w, path, cfg.derivative)

    for k in range(cfg.N):
        x0 = np.concatenate([r if rigid else np.zeros(0), np.zeros(Lb), coeff.reshape(-1).numpy()])
        src = source
        rep = minimize(torch_objective(lambda x: energy(x, src), x0.size, f"{cfg.mode} step {k}"),
                       x0, cfg.optimizer)
        reports.append(rep)
        e_start = rep.trace[0].value
        outer.append(e_start)
        xt = torch.as_tensor(rep.x_opt, dtype=DTYPE)
        rr, xv, cf = unpack(xt)
        bound = step_bound(vb, xv)
        t0 = min(1.0, cfg.safety * bound)
        x_fixed = torch.cat([xt[:nr], torch.zeros(Lb, dtype=DTYPE), xt[nr + Lb:]])
        t, e = _accept(lambda t: float(energy(x_fixed, _reparametrized(grid, f1, gamma_total,
                                                                       vb, xv, t))),
                       e_start, t0)
        steps.append({"step": k, "t": t, "bound": bound, "energy": e,
                      "iterations": rep.iterations})
        if t == 0.0:
            log.info("%s step %d: no admissible reparametrization step, stopping", cfg.mode, k)
            break
        gamma_total = compose(grid, gamma_total, build_map(vb, xv, t)).detach()
        source = resample(grid, f1, gamma_total).detach()
        coeff = cf.detach().clone()
        if rigid:
            r = rr.detach().numpy().copy()
        if rep.f_opt >= e_start * (1 - 1e-9):
            break
    return _finish(w, grid, sb, f1, f2, source, coeff, cfg, reports, outer, steps, gamma_total,
                   r=r if rigid else None, f2=f2)


def match_unparametrized_cd(w: MetricWeights, f1, f2, T: int = 5, deg: int = 5,
                            deg_bar: int = 5, N: int = 3,
                            config: MatchConfig | None = None) -> MatchResult:
    """Coordinate descent: alternate path solves and reparametrization fits."""
    cfg = replace(config or MatchConfig(), weights=w, T=T, deg=deg, deg_bar=deg_bar, N=N,
                  mode="cd").validate()
    return _outer_cd(f1, f2, cfg)


def _outer_cd(f1, f2, cfg: MatchConfig, state=None) -> MatchResult:
    w = cfg.weights
    f1, f2, grid, sb, vb = _setup(f1, f2, cfg)
    T = cfg.T
    if state is None:
        source, gamma_total = _initial_source(f1, f2, grid, cfg)
        coeff = None
    else:
        source, gamma_total, coeff, _ = state
    reports, outer, steps = [], [], []

    def path_energy(src, cf):
        anchor = f1 if cfg.interior == "original" else src
        return float(energy_parametrized(w, _path(grid, sb, src, f2, anchor, cf, T),
                                         cfg.derivative))

    for k in range(cfg.N):
        anchor = f1 if cfg.interior == "original" else source
        coeff, rep = solve_path(w, grid, sb, source, f2, T, anchor, coeff, cfg.derivative,
                                cfg.optimizer)
        reports.append(rep)
        e_k = rep.f_opt
        outer.append(e_k)
        f_next = _path(grid, sb, source, f2, anchor, coeff, T).surfaces()[1].detach()
        src = source
        rep_r = minimize(torch_objective(
            lambda xv: reparam_functional(w, src, f_next, vb, xv, 1.0, cfg.safety),
            len(vb), f"reparametrization step {k}"), np.zeros(len(vb)), cfg.optimizer)
        reports.append(rep_r)
        xv = torch.as_tensor(rep_r.x_opt, dtype=DTYPE)
        bound = step_bound(vb, xv)
        t0 = min(1.0, cfg.safety * bound)
        t, e = _accept(lambda t: path_energy(_reparametrized(grid, f1, gamma_total, vb, xv, t),
                                             coeff), e_k, t0)
        steps.append({"step": k, "t": t, "bound": bound, "energy": e,
                      "iterations": rep.iterations + rep_r.iterations})
        if t == 0.0:
            log.info("cd step %d: reparametrization does not lower the energy, stopping", k)
            break
        gamma_total = compose(grid, gamma_total, build_map(vb, xv, t)).detach()
        source = resample(grid, f1, gamma_total).detach()
    return _finish(w, grid, sb, f1, f2, source, coeff, cfg, reports, outer, steps, gamma_total)


def match(f1, f2, config: MatchConfig) -> MatchResult:
    """Dispatch on ``config.mode`` (and ``config.multires``)."""
    cfg = config.validate()
    if cfg.multires:
        return match_multires(f1, f2, cfg)
    if cfg.mode == "param":
        return match_parametrized(cfg.weights, f1, f2, cfg.T, cfg.deg, cfg)
    if cfg.mode == "cd":
        return _outer_cd(f1, f2, cfg)
    return _outer_joint(f1, f2, cfg)


# ---------------------------------------------------------------------------
# multiresolution

def coarse_levels(n_theta: int, n_phi: int, levels: int = 2):
    """Grid dimensions from coarse to fine, halving per level."""
    dims = [(n_theta, n_phi)]
    for _ in range(levels - 1):
        nt, np_ = dims[0]
        nt2, np2 = max(4, nt // 2), max(3, (np_ + 1) // 2)
        if (nt2, np2) == (nt, np_):
            break
        dims.insert(0, (nt2, np2))
    return dims


def transfer_surface(f, grid_to: SphericalGrid):
    """Sample a gridded surface (or sphere map) at the points of another grid."""
    f = as_tensor(f)
    return interpolate(grid_for(f), f, grid_to.points())


def match_multires(f1, f2, cfg: MatchConfig, levels: int = 2) -> MatchResult:
    """Coarse-to-fine matching on halved grids; coefficients and maps carried upward.

    Harmonic coefficients transfer by index (the bases are nested in the
    degree and approximate the same functions on every grid); the
    reparametrization transfers as a sphere map.
    """
    f1, f2 = as_tensor(f1).detach(), as_tensor(f2).detach()
    fine = grid_for(f1)
    dims = coarse_levels(fine.n_theta, fine.n_phi, levels)
    state, res = None, None
    for nt, np_ in dims:
        g = build_grid(nt, np_)
        a = f1 if (nt, np_) == (fine.n_theta, fine.n_phi) else transfer_surface(f1, g)
        b = f2 if (nt, np_) == (fine.n_theta, fine.n_phi) else transfer_surface(f2, g)
        if res is not None:
            gamma = transfer_surface(res.gamma_total, g)
            gamma = gamma / torch.linalg.norm(gamma, dim=-1, keepdim=True)
            state = (resample(g, a, gamma).detach(), gamma, res.geodesic.coeff.detach(),
                     res.rotation)
        lcfg = replace(cfg, multires=False, init=cfg.init if res is None else "none")
        if lcfg.mode == "param":
            if state is None:
                res = match_parametrized(lcfg.weights, a, b, lcfg.T, lcfg.deg, lcfg)
            else:
                w = lcfg.weights
                _, sb, _ = _bases(nt, np_, lcfg.deg, lcfg.deg_bar)
                res = _finish(w, sb.grid, sb, a, b, a, state[2], lcfg, [], [], [], g.points())
        elif lcfg.mode == "cd":
            res = _outer_cd(a, b, lcfg, state)
        else:
            res = _outer_joint(a, b, lcfg, state)
    return res


# ---------------------------------------------------------------------------
# icosahedral initialization

def _axis_rotation(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return rotation_matrix(torch.as_tensor(axis * angle)).numpy()


@functools.lru_cache(maxsize=1)
def icosahedral_rotations() -> tuple:
    """The 60 rotations of the icosahedral group, identity first, in a fixed order."""
    gold = (1 + math.sqrt(5)) / 2
    gens = [_axis_rotation((0, 1, gold), 2 * math.pi / 5),
            np.array([[0.0, 0, 1], [1, 0, 0], [0, 1, 0]]),
            np.diag([-1.0, -1.0, 1.0])]
    group = [np.eye(3)]
    frontier = [np.eye(3)]
    while frontier:
        nxt = []
        for g in frontier:
            for h in gens:
                m = h @ g
                if not any(np.abs(m - e).max() < 1e-9 for e in group):
                    group.append(m)
                    nxt.append(m)
        frontier = nxt
    if len(group) != 60:
        raise RuntimeError(f"icosahedral closure produced {len(group)} elements")
    return tuple(torch.as_tensor(m, dtype=DTYPE) for m in group)


@dataclass
class InitResult:
    index: int
    rotation: torch.Tensor
    mismatches: np.ndarray
    refined: bool = False


def initialize_reparam(f1, f2, grid: SphericalGrid | None = None, refine: bool = False,
                       opt: OptimizeConfig | None = None) -> InitResult:
    """Best icosahedral rotation ``h`` of the parameter sphere for ``f1 o h ~ f2``.

    Candidates are scored by the SRNF L2 mismatch; ties go to the lowest
    index.  With ``refine`` the winner is polished over SO(3).
    """
    f1, f2 = as_tensor(f1).detach(), as_tensor(f2).detach()
    grid = grid or grid_for(f1)
    q2 = srnf(grid, f2)
    mism = np.array([float(srnf_l2_distance(grid, srnf(grid, resample(grid, f1, rotation_map(grid, h))), q2))
                     for h in icosahedral_rotations()])
    k = int(np.argmin(mism))
    R = icosahedral_rotations()[k]
    if not refine:
        return InitResult(k, R, mism)

    def fn(r):
        Rr = rotation_matrix(r) @ R
        q = srnf(grid, resample(grid, f1, rotation_map(grid, Rr)))
        return integrate(grid, ((q - q2) ** 2).sum(-1))

    rep = minimize(torch_objective(fn, 3, "rotation refinement"), np.zeros(3), opt)
    R = (rotation_matrix(torch.as_tensor(rep.x_opt)) @ R).detach()
    return InitResult(k, R, mism, refined=True)


# ---------------------------------------------------------------------------
# Karcher mean

@dataclass
class MeanResult:
    mean: torch.Tensor
    distances: np.ndarray
    iterations: int
    converged: bool
    history: list


def karcher_mean(surfaces, config: MatchConfig | None = None, max_iter: int = 20,
                 tol: float = 1e-2, step: float = 1.0, init=None,
                 atol: float = 1e-10) -> MeanResult:
    """Fixed-point averaging of first-step velocities at the current mean.

    Each sample is matched to the mean (the mean is the path's end sample,
    so it is never reparametrized); the velocity of the last interval,
    reversed and rotated back, is the discrete log map.  The mean moves by
    ``step`` times the averaged velocity; the step is halved whenever the
    summed squared distance goes up.  Stops when the averaged velocity's
    norm at the mean is at most ``tol`` times the RMS distance to the
    samples (a relative test: the registration leaves a velocity floor of
    a fraction of a percent on coarse grids), or below ``atol``.

    The default matching is modulo rotation with one reparametrization
    step per sample and iteration; registrations are redone at every
    iteration, so deeper inner schedules mostly fit discretization error.
    """
    cfg = (config or MatchConfig(mode="rigid", N=1)).validate()
    samples = [as_tensor(s).detach() for s in surfaces]
    if len(samples) < 2:
        raise ValueError("karcher_mean needs at least two surfaces")
    grid = grid_for(samples[0])
    w = cfg.weights
    mean = samples[0].clone() if init is None else as_tensor(init).detach().clone()
    history = []
    best = None
    converged = False

    def evaluate(m):
        vs, ds = [], []
        for s in samples:
            res = match(s, m, cfg)
            f = res.geodesic.surfaces().detach()
            R = res.rotation_matrix
            v = (f[-2] - f[-1]) * cfg.T
            vs.append(v @ R)      # rotate back: R^T applied to row vectors
            ds.append(res.distance)
        return torch.stack(vs).mean(0), np.array(ds)

    v, d = evaluate(mean)
    it = 0
    for it in range(1, max_iter + 1):
        ss = float((d ** 2).sum())
        vnorm = float(pullback_norm(grid, w, mean, v))
        rms = math.sqrt(ss / len(samples))
        history.append({"iteration": it, "sum_sq_dist": ss, "velocity_norm": vnorm,
                        "rms_dist": rms, "step": step})
        if best is None or ss <= best[1]:
            best = (mean, ss, d)
        if vnorm <= tol * rms or vnorm <= atol:
            converged = True
            break
        cand = mean + step * v
        v_c, d_c = evaluate(cand)
        if float((d_c ** 2).sum()) > ss:
            step *= 0.5
            history[-1]["rejected"] = True
            continue
        mean, v, d = cand, v_c, d_c
    mean, _, d = best
    return MeanResult(mean, d, it, converged, history)


# ---------------------------------------------------------------------------
# SRNF comparison

@dataclass
class ComparisonRow:
    T: int
    L_l: float            # split-metric length, forward differences
    L_l_sym: float        # split-metric length, symmetric weighting
    L_L2: float           # L2 length of the SRNF image polygon
    rel_error: float
    rel_error_sym: float


@dataclass
class ComparisonTable:
    rows: list
    srnf_l2: float
    geodesic_length: float | None = None

    def to_csv(self) -> str:
        head = "T,L_l,L_l_sym,L_L2,rel_error,rel_error_sym"
        lines = [head] + [f"{r.T},{r.L_l:.10g},{r.L_l_sym:.10g},{r.L_L2:.10g},"
                          f"{r.rel_error:.6g},{r.rel_error_sym:.6g}" for r in self.rows]
        lines.append(f"# srnf_l2_distance,{self.srnf_l2:.10g}")
        if self.geodesic_length is not None:
            lines.append(f"# geodesic_length,{self.geodesic_length:.10g}")
        return "\n".join(lines) + "\n"


def srnf_image_length(grid: SphericalGrid, samples) -> float:
    q = torch.stack([srnf(grid, f) for f in as_tensor(samples)])
    steps = q[1:] - q[:-1]
    return float(torch.sqrt(integrate(grid, (steps ** 2).sum(-1))).sum())


def srnf_comparison(f1, f2, T_list=(13, 20, 99), geodesic: bool = False,
                    config: MatchConfig | None = None) -> ComparisonTable:
    """Linear-path lengths under the (0, 1/2, 1, 0) split metric vs. the SRNF L2 metric."""
    f1, f2 = as_tensor(f1).detach(), as_tensor(f2).detach()
    grid = grid_for(f1)
    w = SRNF_WEIGHTS
    rows = []
    for T in T_list:
        t = (torch.arange(T + 1, dtype=DTYPE) / T)[:, None, None, None]
        f = (1 - t) * f1 + t * f2
        ll = float(samples_length(grid, w, f, "forward"))
        ls = float(samples_length(grid, w, f, "central"))
        lq = srnf_image_length(grid, f)
        rows.append(ComparisonRow(T, ll, ls, lq, abs(ll - lq) / ll, abs(ls - lq) / ls))
    l2 = float(srnf_l2_distance(grid, srnf(grid, f1), srnf(grid, f2)))
    lg = None
    if geodesic:
        cfg = config or MatchConfig()
        res = match_parametrized(w, f1, f2, cfg.T, cfg.deg, cfg)
        lg = float(samples_length(grid, w, res.geodesic.surfaces().detach(), cfg.derivative))
    return ComparisonTable(rows, l2, lg)


def linear_path_length(w: MetricWeights, f1, f2, T: int, mode: str = "forward") -> float:
    f1, f2 = as_tensor(f1), as_tensor(f2)
    t = (torch.arange(T + 1, dtype=DTYPE) / T)[:, None, None, None]
    return float(samples_length(grid_for(f1), w, (1 - t) * f1 + t * f2, mode))
