"""Quasi-Newton minimization (BFGS / L-BFGS with a strong-Wolfe line search).

Objectives return ``(value, gradient)``.  A non-finite value marks an
infeasible point (for instance a reparametrization beyond its certified
step bound); the line search treats it as "too far" and shrinks the step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch

from .grid import DTYPE
from .metric import RankDeficiencyError

log = logging.getLogger(__name__)


def _domain_errors():
    from .diffeo import ZeroVectorError
    from .energy import StepBoundError
    return (RankDeficiencyError, StepBoundError, ZeroVectorError)


@dataclass
class ObjectiveHandle:
    dimension: int
    evaluate: Callable[[np.ndarray], tuple]
    name: str = "objective"
    metadata: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=np.float64))


def torch_objective(fn, dimension: int, name: str = "objective") -> ObjectiveHandle:
    """Wrap ``fn(x: Tensor) -> scalar Tensor`` so gradients come from autograd.

    Domain failures (rank deficiency, step-bound violation, vanishing
    projection) evaluate to ``inf`` instead of raising.
    """
    errors = _domain_errors()

    def evaluate(x):
        xt = torch.tensor(x, dtype=DTYPE, requires_grad=True)
        try:
            val = fn(xt)
        except errors as exc:
            log.debug("%s infeasible: %s", name, exc)
            return math.inf, np.full(dimension, np.nan)
        (grad,) = torch.autograd.grad(val, xt, allow_unused=True)
        g = np.zeros(dimension) if grad is None else grad.detach().numpy().copy()
        return float(val.detach()), g

    return ObjectiveHandle(dimension, evaluate, name)


@dataclass
class OptimizeConfig:
    max_iter: int = 500
    g_tol: float = 1e-6          # relative to max(1, |f|)
    method: str = "auto"         # "bfgs", "lbfgs" or "auto"
    memory: int = 20
    bfgs_max_dim: int = 200
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 40
    refine_step: bool = True     # one secant refinement of the accepted step

    def resolve_method(self, dim: int) -> str:
        if self.method == "auto":
            return "bfgs" if dim < self.bfgs_max_dim else "lbfgs"
        if self.method not in ("bfgs", "lbfgs"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        return self.method

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizeConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown optimizer keys: {sorted(unknown)}")
        return cls(**known)


@dataclass
class TraceEntry:
    iteration: int
    value: float
    step: float
    grad_norm: float
    slope: float       # directional derivative along the search direction


@dataclass
class OptimizeReport:
    x_opt: np.ndarray
    f_opt: float
    iterations: int
    converged: bool
    gradient_norm: float
    trace: list = field(default_factory=list)
    message: str = ""
    evaluations: int = 0

    def values(self):
        return [e.value for e in self.trace]


class LineSearchFailure(RuntimeError):
    pass


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic through two points with slopes, or ``None``."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def strong_wolfe(phi, f0, g0, alpha0=1.0, c1=1e-4, c2=0.9, max_iter=40, alpha_max=1e10):
    """Find ``alpha`` with sufficient decrease and ``|phi'(alpha)| <= c2 |phi'(0)|``.

    ``phi(alpha)`` returns ``(value, slope, payload)``.  Returns
    ``(alpha, value, slope, payload, n_evals)``.
    """
    if not g0 < 0:
        raise LineSearchFailure(f"not a descent direction (slope {g0:.3g})")
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = alpha0
    evals = 0

    def zoom(lo, flo, glo, hi, fhi, ghi):
        nonlocal evals
        for _ in range(max_iter):
            if math.isfinite(fhi) and math.isfinite(ghi):
                a_j = _cubic_min(lo, flo, glo, hi, fhi, ghi)
            else:
                a_j = None
            left, right = min(lo, hi), max(lo, hi)
            margin = 0.1 * (right - left)
            if a_j is None or not (left + margin <= a_j <= right - margin):
                a_j = 0.5 * (lo + hi)
            fj, gj, pj = phi(a_j)
            evals += 1
            if not math.isfinite(fj) or fj > f0 + c1 * a_j * g0 or fj >= flo:
                hi, fhi, ghi = a_j, fj, gj
            else:
                if abs(gj) <= -c2 * g0:
                    return a_j, fj, gj, pj
                if gj * (hi - lo) >= 0:
                    hi, fhi, ghi = lo, flo, glo
                lo, flo, glo = a_j, fj, gj
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        raise LineSearchFailure("zoom did not find a strong-Wolfe point")

    for i in range(max_iter):
        fa, ga, pa = phi(a)
        evals += 1
        if not math.isfinite(fa) or fa > f0 + c1 * a * g0 or (i > 0 and fa >= f_prev):
            res = zoom(a_prev, f_prev, g_prev, a, fa, ga)
            return res + (evals,)
        if abs(ga) <= -c2 * g0:
            return a, fa, ga, pa, evals
        if ga >= 0:
            res = zoom(a, fa, ga, a_prev, f_prev, g_prev)
            return res + (evals,)
        a_prev, f_prev, g_prev = a, fa, ga
        a = min(2.0 * a, alpha_max)
    raise LineSearchFailure("bracketing phase exhausted")


def minimize(obj: ObjectiveHandle, x0, config: OptimizeConfig | None = None,
             callback=None) -> OptimizeReport:
    """Minimize ``obj`` from ``x0``; never raises on line-search failure."""
    cfg = config or OptimizeConfig()
    x = np.array(x0, dtype=np.float64).reshape(-1)
    if x.size != obj.dimension:
        raise ValueError(f"x0 has length {x.size}, objective dimension {obj.dimension}")
    method = cfg.resolve_method(x.size)
    f, g = obj(x)
    nevals = 1
    if not math.isfinite(f):
        raise ValueError(f"{obj.name}: initial point is infeasible")
    gnorm = float(np.linalg.norm(g))
    trace = [TraceEntry(0, f, 0.0, gnorm, 0.0)]
    H = None
    S, Y, RHO = [], [], []
    converged = gnorm <= cfg.g_tol * max(1.0, abs(f))
    message = "gradient tolerance met" if converged else ""
    it = 0
    while not converged and it < cfg.max_iter:
        it += 1
        if method == "bfgs":
            d = -(g if H is None else H @ g)
        else:
            d = -_two_loop(g, S, Y, RHO)
        slope = float(g @ d)
        if not slope < 0:
            # lost descent through accumulated curvature error; restart from steepest descent
            H, S, Y, RHO = None, [], [], []
            d = -g
            slope = float(g @ d)
        alpha0 = 1.0 if (H is not None or S) else min(1.0, 1.0 / max(gnorm, 1e-300))

        def phi(a, x=x, d=d):
            fa, ga = obj(x + a * d)
            if not math.isfinite(fa):
                return math.inf, math.nan, None
            return fa, float(ga @ d), ga

        try:
            a, f_new, _, g_new, ne = strong_wolfe(phi, f, slope, alpha0, cfg.c1, cfg.c2,
                                                  cfg.max_line_search)
        except LineSearchFailure as exc:
            message = f"line search failed at iteration {it}: {exc}"
            log.info("%s: %s", obj.name, message)
            it -= 1
            break
        nevals += ne
        if cfg.refine_step:
            a, f_new, g_new, ne = _secant_refine(phi, f, slope, a, f_new, g_new, d, cfg.c1)
            nevals += ne
        s = a * d
        y = g_new - g
        x, f, g = x + s, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        trace.append(TraceEntry(it, f, a, gnorm, slope))
        if callback is not None:
            callback(x, f, g)
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            if method == "bfgs":
                if H is None:
                    H = np.eye(x.size) * (sy / float(y @ y))
                rho = 1.0 / sy
                Hy = H @ y
                H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                     + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s))
            else:
                S.append(s)
                Y.append(y)
                RHO.append(1.0 / sy)
                if len(S) > cfg.memory:
                    S.pop(0), Y.pop(0), RHO.pop(0)
        converged = gnorm <= cfg.g_tol * max(1.0, abs(f))
        if converged:
            message = "gradient tolerance met"
    if not converged and not message:
        message = f"iteration cap {cfg.max_iter} reached"
    return OptimizeReport(x, f, it, converged, gnorm, trace, message, nevals)


def _secant_refine(phi, f0, g0, a, fa, ga_vec, d, c1):
    """Try the zero of the secant model of ``phi'`` through ``0`` and ``a``.

    Exact for quadratics, which restores finite termination of BFGS there.
    """
    ga = float(ga_vec @ d)
    if abs(ga) <= 1e-2 * abs(g0) or not ga - g0 > 0:
        return a, fa, ga_vec, 0
    a_s = a * g0 / (g0 - ga)
    if not 0 < a_s < 1e10:
        return a, fa, ga_vec, 0
    fs, gs, ps = phi(a_s)
    if math.isfinite(fs) and fs <= fa and fs <= f0 + c1 * a_s * g0 and abs(gs) < abs(ga):
        return a_s, fs, ps, 1
    return a, fa, ga_vec, 1


def _two_loop(g, S, Y, RHO):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if S:
        q *= float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
    for (s, y, rho), a in zip(zip(S, Y, RHO), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


@dataclass
class GradientCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    rel_error: np.ndarray

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_error.max())


def check_gradient(obj: ObjectiveHandle, x, n_dirs: int = 20, h: float = 1e-5,
                   seed: int = 0) -> GradientCheck:
    """Compare ``<grad, v>`` with ``(F(x + hv) - F(x - hv)) / 2h`` on random unit ``v``.

    ``h`` is scaled by ``max(1, max|x|)``.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    _, g = obj(x)
    step = h * max(1.0, float(np.abs(x).max()) if x.size else 1.0)
    an, nu = [], []
    for _ in range(n_dirs):
        v = rng.standard_normal(x.size)
        v /= np.linalg.norm(v)
        fp, _ = obj(x + step * v)
        fm, _ = obj(x - step * v)
        an.append(float(g @ v))
        nu.append((fp - fm) / (2 * step))
    an, nu = np.array(an), np.array(nu)
    rel = np.abs(an - nu) / np.maximum(np.maximum(np.abs(an), np.abs(nu)), 1e-300)
    return GradientCheck(an, nu, rel)
