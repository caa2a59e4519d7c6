"""Discrete paths of surfaces and their path energies.

A path has ``T + 1`` samples ``f(t_i)``, ``t_i = i / T``.  Interior samples
are an affine blend of two anchor surfaces plus a perturbation
``sum_j Coeff[j, i-1] S_j`` in a :class:`HarmonicBasis`; the end samples are
never touched by ``Coeff``.

Energies are ``sum ||f_t||^2_{f} dT`` under the pullback of the split
metric.  ``mode="forward"`` uses forward differences based at the left
sample; ``mode="central"`` uses central differences at interior samples and
one-sided differences at the ends, with half weights at the ends so the
energy is symmetric under reversing the path.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import torch

from .diffeo import build_map, resample, step_bound
from .grid import DTYPE, GridError, SphericalGrid, as_tensor, differential, integrate
from .harmonics import HarmonicBasis, VectorFieldBasis
from .metric import MetricWeights, RankDeficiencyError, check_rank, split_inner_density

MODES = ("forward", "central")


class StepBoundError(ValueError):
    """A reparametrization was requested beyond its certified step bound."""


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """``f(t_0) = start``, ``f(t_T) = end`` and perturbed affine interior samples.

    ``interior_start``/``interior_end`` are the anchors of the affine part;
    they default to the end samples.  ``coeff`` has shape ``(L, T - 1)``.
    """
    grid: SphericalGrid
    start: torch.Tensor
    end: torch.Tensor
    T: int
    coeff: torch.Tensor | None = None
    basis: HarmonicBasis | None = None
    interior_start: torch.Tensor | None = None
    interior_end: torch.Tensor | None = None
    samples: torch.Tensor | None = None   # explicit samples override the construction

    def __post_init__(self):
        if self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        if self.coeff is not None:
            if self.basis is None:
                raise ValueError("coeff given without a surface basis")
            if tuple(self.coeff.shape) != (len(self.basis), self.T - 1):
                raise ValueError(f"coeff shape {tuple(self.coeff.shape)} != "
                                 f"({len(self.basis)}, {self.T - 1})")

    @property
    def dT(self) -> float:
        return 1.0 / self.T

    @property
    def times(self) -> torch.Tensor:
        return torch.arange(self.T + 1, dtype=DTYPE) / self.T

    def surfaces(self) -> torch.Tensor:
        """All samples stacked as ``(T + 1, n_phi, n_theta, 3)``."""
        if self.samples is not None:
            return self.samples
        a = self.start if self.interior_start is None else self.interior_start
        b = self.end if self.interior_end is None else self.interior_end
        t = self.times[1:-1, None, None, None]
        inner = (1 - t) * a + t * b
        if self.coeff is not None:
            inner = inner + self.basis.combine(self.coeff)
        return torch.cat([self.start[None], inner, self.end[None]])

    def with_coeff(self, coeff) -> "DiscretePath":
        return replace(self, coeff=as_tensor(coeff))

    def reversed(self) -> "DiscretePath":
        """The same samples traversed from ``end`` to ``start``."""
        return path_from_samples(self.grid, self.surfaces().flip(0))


def linear_path(f1, f2, T: int, grid: SphericalGrid | None = None,
                basis: HarmonicBasis | None = None) -> DiscretePath:
    f1, f2 = as_tensor(f1), as_tensor(f2)
    if f1.shape != f2.shape:
        raise GridError(f"endpoint grids differ: {tuple(f1.shape)} vs {tuple(f2.shape)}")
    if grid is None:
        grid = basis.grid if basis is not None else None
    if grid is not None and tuple(f1.shape) != (grid.n_phi, grid.n_theta, 3):
        raise GridError(f"surface shape {tuple(f1.shape)} does not match grid")
    coeff = None if basis is None else torch.zeros(len(basis), T - 1, dtype=DTYPE)
    return DiscretePath(grid, f1, f2, T, coeff=coeff, basis=basis)


def path_from_samples(grid: SphericalGrid, samples) -> DiscretePath:
    """Wrap explicit samples ``(T + 1, n_phi, n_theta, 3)`` as a path with no basis."""
    samples = as_tensor(samples)
    return DiscretePath(grid, samples[0], samples[-1], samples.shape[0] - 1, samples=samples)


# ---------------------------------------------------------------------------
# velocities

def velocities(f: torch.Tensor, mode: str = "forward"):
    """``(base, vel, weight)`` for stacked samples ``f`` of shape ``(T + 1, ...)``.

    The energy is ``sum_k weight[k] ||vel[k]||^2_{base[k]}``.
    """
    T = f.shape[0] - 1
    dT = 1.0 / T
    if mode == "forward":
        vel = (f[1:] - f[:-1]) / dT
        return f[:-1], vel, torch.full((T,), dT, dtype=DTYPE)
    if mode == "central":
        vel = torch.cat([(f[1:2] - f[0:1]) / dT,
                         (f[2:] - f[:-2]) / (2 * dT),
                         (f[-1:] - f[-2:-1]) / dT])
        w = torch.full((T + 1,), dT, dtype=DTYPE)
        w[0] = w[-1] = dT / 2
        return f, vel, w
    raise ValueError(f"unknown derivative mode {mode!r}; expected one of {MODES}")


def velocity(path: DiscretePath, i: int, mode: str = "forward") -> torch.Tensor:
    """Velocity of interval ``i`` (``1 <= i <= T``), ``(f(t_i) - f(t_{i-1})) / dT``.

    In central mode interval ``i`` reports the central difference at
    ``t_{i-1}`` for ``i >= 2`` and the forward difference for ``i = 1``.
    """
    if not 1 <= i <= path.T:
        raise IndexError(f"velocity index {i} outside 1..{path.T}")
    f = path.surfaces()
    if mode == "forward" or i == 1:
        return (f[i] - f[i - 1]) / path.dT
    if mode == "central":
        return (f[i] - f[i - 2]) / (2 * path.dT)
    raise ValueError(f"unknown derivative mode {mode!r}")


def _step_norms2(grid: SphericalGrid, w: MetricWeights, base, vel, check: bool = True):
    alpha = differential(grid, base)
    if check:
        try:
            check_rank(alpha)
        except RankDeficiencyError as exc:
            k = exc.index[0]
            raise RankDeficiencyError(f"time step {k}: {exc}", exc.index) from None
    xi = differential(grid, vel)
    return integrate(grid, split_inner_density(w, alpha, xi, xi))


def samples_energy(grid: SphericalGrid, w: MetricWeights, f, mode: str = "forward",
                   check: bool = True) -> torch.Tensor:
    """Energy of explicit samples ``f`` (``(T + 1, n_phi, n_theta, 3)``)."""
    base, vel, weight = velocities(as_tensor(f), mode)
    return (weight * _step_norms2(grid, w, base, vel, check)).sum()


def samples_length(grid: SphericalGrid, w: MetricWeights, f, mode: str = "forward",
                   check: bool = True) -> torch.Tensor:
    """Path length ``sum ||f_t|| dT`` with the same weights as the energy."""
    base, vel, weight = velocities(as_tensor(f), mode)
    n2 = _step_norms2(grid, w, base, vel, check)
    return (weight * torch.sqrt(torch.clamp(n2, min=0.0))).sum()


def energy_parametrized(w: MetricWeights, path: DiscretePath, mode: str = "forward",
                        check: bool = True) -> torch.Tensor:
    return samples_energy(path.grid, w, path.surfaces(), mode, check)


def path_length(w: MetricWeights, path: DiscretePath, mode: str = "forward") -> torch.Tensor:
    return samples_length(path.grid, w, path.surfaces(), mode)


# ---------------------------------------------------------------------------
# unparametrized and rigid variants

def certified_map(vbasis: VectorFieldBasis, xv, t: float = 1.0, safety: float = 1.0):
    """``Proj(Id + tU)``; raises :class:`StepBoundError` unless ``t < safety * bound``."""
    xv = as_tensor(xv)
    if t != 0 and bool((xv != 0).any()):
        bound = step_bound(vbasis, xv.detach())
        if not t < safety * bound:
            raise StepBoundError(f"t = {t:.6g} violates certified bound "
                                 f"{safety:g} * {bound:.6g}")
    return build_map(vbasis, xv, t)


def unparametrized_path(f1, f2, vbasis: VectorFieldBasis, xv, coeff,
                        sbasis: HarmonicBasis, T: int, t: float = 1.0, f_bar=None,
                        interior: str = "original", safety: float = 1.0) -> DiscretePath:
    """``f(t_0) = f_bar o gamma``, ``f(t_T) = f2`` with affine interior anchored at ``f1``.

    ``interior="reparametrized"`` anchors the interior at ``f_bar o gamma``
    instead of the original ``f1``.
    """
    f1, f2 = as_tensor(f1), as_tensor(f2)
    f_bar = f1 if f_bar is None else as_tensor(f_bar)
    gamma = certified_map(vbasis, xv, t, safety)
    start = resample(vbasis.grid, f_bar, gamma)
    anchor = _anchor(interior, f1, start)
    return DiscretePath(vbasis.grid, start, f2, T, coeff=as_tensor(coeff), basis=sbasis,
                        interior_start=anchor)


def _anchor(interior, f1, start):
    if interior == "original":
        return f1
    if interior == "reparametrized":
        return start
    raise ValueError(f"interior must be 'original' or 'reparametrized', got {interior!r}")


def energy_unparametrized(w: MetricWeights, f1, f2, vbasis: VectorFieldBasis, xv, coeff,
                          sbasis: HarmonicBasis, T: int, t: float = 1.0, f_bar=None,
                          interior: str = "original", mode: str = "forward",
                          safety: float = 1.0) -> torch.Tensor:
    path = unparametrized_path(f1, f2, vbasis, xv, coeff, sbasis, T, t, f_bar, interior, safety)
    return energy_parametrized(w, path, mode)


def reparam_functional(w: MetricWeights, f_bar, f_next, vbasis: VectorFieldBasis, xv,
                       t: float = 1.0, safety: float = 1.0) -> torch.Tensor:
    """``||f_next - f_bar o gamma||^2`` measured at ``f_bar o gamma``."""
    grid = vbasis.grid
    moved = resample(grid, as_tensor(f_bar), certified_map(vbasis, xv, t, safety))
    alpha = differential(grid, moved)
    check_rank(alpha)
    xi = differential(grid, as_tensor(f_next) - moved)
    return integrate(grid, split_inner_density(w, alpha, xi, xi))


def skew(r) -> torch.Tensor:
    r = as_tensor(r)
    z = torch.zeros((), dtype=r.dtype)
    return torch.stack([torch.stack([z, -r[2], r[1]]),
                        torch.stack([r[2], z, -r[0]]),
                        torch.stack([-r[1], r[0], z])])


def rotation_matrix(r) -> torch.Tensor:
    """``exp(skew(r))`` for an axis-angle vector ``r``."""
    return torch.linalg.matrix_exp(skew(r))


def rotation_vector(R) -> torch.Tensor:
    """Axis-angle vector of a rotation (inverse of :func:`rotation_matrix` for angles < pi)."""
    R = as_tensor(R)
    c = torch.clamp((torch.trace(R) - 1) / 2, -1.0, 1.0)
    ang = torch.acos(c)
    v = torch.stack([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if float(ang) < 1e-8:
        return v / 2
    if float(ang) > torch.pi - 1e-6:
        # near a half turn: axis from the symmetric part
        M = (R + R.T) / 2 - c * torch.eye(3, dtype=DTYPE)
        k = int(torch.argmax(torch.diagonal(M)))
        axis = M[k] / torch.linalg.norm(M[k])
        if float((axis * v).sum()) < 0:
            axis = -axis
        return ang * axis
    return ang / (2 * torch.sin(ang)) * v


def rigid_path(f1, f2, vbasis: VectorFieldBasis, xv, coeff, sbasis: HarmonicBasis, T: int,
               r, t: float = 1.0, f_bar=None, interior: str = "original",
               safety: float = 1.0) -> DiscretePath:
    """Unparametrized path whose end sample is ``R f2`` with ``R = exp(skew(r))``."""
    R = rotation_matrix(r)
    end = as_tensor(f2) @ R.T
    return unparametrized_path(f1, end, vbasis, xv, coeff, sbasis, T, t, f_bar, interior, safety)


def energy_rigid(w: MetricWeights, f1, f2, vbasis: VectorFieldBasis, xv, coeff,
                 sbasis: HarmonicBasis, T: int, r, t: float = 1.0, f_bar=None,
                 interior: str = "original", mode: str = "forward",
                 safety: float = 1.0) -> torch.Tensor:
    path = rigid_path(f1, f2, vbasis, xv, coeff, sbasis, T, r, t, f_bar, interior, safety)
    return energy_parametrized(w, path, mode)
