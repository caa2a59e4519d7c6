"""Spherical sampling grid, quadrature and the discrete differential.

Surfaces are stored as arrays of shape ``(n_phi, n_theta, 3)``: row ``i`` is
the polar angle ``phi[i] = (i + 1/2) * pi / n_phi`` and column ``j`` the
azimuth ``theta[j] = 2 * pi * j / n_theta``.  The seam column ``theta = 2*pi``
is not stored; it is the periodic wrap of column 0.  The poles are never
sampled so ``1 / sin(phi)`` is finite everywhere on the grid.

One-form fields are arrays of shape ``(n_phi, n_theta, 3, 2)`` whose columns
are ``(1/sin phi) d/dtheta`` and ``d/dphi`` applied to the three coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

DTYPE = torch.float64


class GridError(ValueError):
    """Raised for invalid grid dimensions or surfaces violating grid invariants."""


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x), dtype=DTYPE)


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    n_theta: int
    n_phi: int
    theta: torch.Tensor = field(repr=False)   # (n_theta,)
    phi: torch.Tensor = field(repr=False)     # (n_phi,)
    weight: torch.Tensor = field(repr=False)  # (n_phi, n_theta)

    @property
    def shape(self):
        return (self.n_phi, self.n_theta)

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.n_theta

    @property
    def dphi(self) -> float:
        return math.pi / self.n_phi

    @property
    def sin_phi(self) -> torch.Tensor:
        return torch.sin(self.phi)[:, None].expand(self.shape)

    @property
    def cos_phi(self) -> torch.Tensor:
        return torch.cos(self.phi)[:, None].expand(self.shape)

    def angles(self):
        """Return ``(theta, phi)`` broadcast to the grid shape."""
        th = self.theta[None, :].expand(self.shape)
        ph = self.phi[:, None].expand(self.shape)
        return th, ph

    def points(self) -> torch.Tensor:
        """The identity embedding of the unit sphere sampled on the grid."""
        return frame(self)[0]

    def same_as(self, other: "SphericalGrid") -> bool:
        return self.n_theta == other.n_theta and self.n_phi == other.n_phi


def build_grid(n_theta: int, n_phi: int) -> SphericalGrid:
    if n_theta < 4 or n_phi < 3:
        raise GridError(
            f"grid dimensions too small: n_theta={n_theta} (min 4), n_phi={n_phi} (min 3)"
        )
    theta = torch.arange(n_theta, dtype=DTYPE) * (2 * math.pi / n_theta)
    phi = (torch.arange(n_phi, dtype=DTYPE) + 0.5) * (math.pi / n_phi)
    dA = (2 * math.pi / n_theta) * (math.pi / n_phi)
    weight = (torch.sin(phi) * dA)[:, None].expand(n_phi, n_theta).clone()
    return SphericalGrid(n_theta, n_phi, theta, phi, weight)


def frame(grid: SphericalGrid):
    """Orthonormal frame ``(e1, e2, e3)`` on the grid, each ``(n_phi, n_theta, 3)``.

    ``e1`` is the outward radial direction, ``e2 = d/dphi`` and
    ``e3 = (1/sin phi) d/dtheta``.
    """
    th, ph = grid.angles()
    st, ct = torch.sin(th), torch.cos(th)
    sp, cp = torch.sin(ph), torch.cos(ph)
    e1 = torch.stack([sp * ct, sp * st, cp], dim=-1)
    e2 = torch.stack([cp * ct, cp * st, -sp], dim=-1)
    e3 = torch.stack([-st, ct, torch.zeros_like(st)], dim=-1)
    return e1, e2, e3


def integrate(grid: SphericalGrid, scalar_field) -> torch.Tensor:
    """Quadrature ``sum(field * weight)`` over the trailing grid axes."""
    f = as_tensor(scalar_field)
    return (f * grid.weight).sum(dim=(-2, -1))


def d_theta(grid: SphericalGrid, f: torch.Tensor) -> torch.Tensor:
    """Periodic central difference along theta (axis -2 of a surface array)."""
    return (torch.roll(f, -1, dims=-2) - torch.roll(f, 1, dims=-2)) / (2 * grid.dtheta)


def d_phi(grid: SphericalGrid, f: torch.Tensor) -> torch.Tensor:
    """Central difference along phi with one-sided second-order end rows (axis -3)."""
    h2 = 2 * grid.dphi
    first = (-3 * f[..., 0:1, :, :] + 4 * f[..., 1:2, :, :] - f[..., 2:3, :, :]) / h2
    inner = (f[..., 2:, :, :] - f[..., :-2, :, :]) / h2
    last = (3 * f[..., -1:, :, :] - 4 * f[..., -2:-1, :, :] + f[..., -3:-2, :, :]) / h2
    return torch.cat([first, inner, last], dim=-3)


def differential(grid: SphericalGrid, f) -> torch.Tensor:
    """Discrete ``df`` as a field of 3x2 matrices in the frame ``(e3, e2)``.

    Accepts batched input ``(..., n_phi, n_theta, 3)``.
    """
    f = as_tensor(f)
    col_theta = d_theta(grid, f) / torch.sin(grid.phi)[:, None, None]
    col_phi = d_phi(grid, f)
    return torch.stack([col_theta, col_phi], dim=-1)


def scalar_gradient(grid: SphericalGrid, s: torch.Tensor):
    """``(ds/dtheta, ds/dphi)`` of a scalar grid field with the same stencils."""
    s3 = s[..., None]
    return d_theta(grid, s3)[..., 0], d_phi(grid, s3)[..., 0]


# ---------------------------------------------------------------------------
# pole handling

def shift_half_turn(f: torch.Tensor, dim: int = -2) -> torch.Tensor:
    """Values at ``theta + pi`` via trigonometric interpolation along ``dim``.

    Exact (a pure roll) when the number of samples is even.
    """
    n = f.shape[dim]
    if n % 2 == 0:
        return torch.roll(f, n // 2, dims=dim)
    c = torch.fft.rfft(f, dim=dim)
    sign = torch.ones(c.shape[dim], dtype=DTYPE)
    sign[1::2] = -1.0
    shape = [1] * c.ndim
    shape[dim] = -1
    return torch.fft.irfft(c * sign.reshape(shape), n=n, dim=dim)


def pole_estimates(f) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-column extrapolated pole values ``(north, south)``, each ``(n_theta, 3)``.

    The two rows nearest a pole and their half-turn images lie on a great
    circle through the pole at offsets ``+-dphi/2, +-3 dphi/2``; the cubic
    through those four samples evaluated at the pole is ``(9 g0 - g1) / 8``
    with ``g`` the even part.
    """
    f = as_tensor(f)
    out = []
    for r0, r1 in ((f[0], f[1]), (f[-1], f[-2])):
        g0 = 0.5 * (r0 + shift_half_turn(r0, dim=0))
        g1 = 0.5 * (r1 + shift_half_turn(r1, dim=0))
        out.append((9 * g0 - g1) / 8)
    return out[0], out[1]


def pole_points(f) -> tuple[torch.Tensor, torch.Tensor]:
    north, south = pole_estimates(f)
    return north.mean(dim=0), south.mean(dim=0)


def diameter(f) -> float:
    f = as_tensor(f).reshape(-1, 3)
    lo, hi = f.min(dim=0).values, f.max(dim=0).values
    return float(torch.linalg.norm(hi - lo))


def default_pole_tol(grid: SphericalGrid) -> float:
    # extrapolation error is O(dphi^4); 1e-8 is only reachable for band-limited data
    return max(1e-8, (2 * grid.dphi) ** 4)


def check_surface(grid: SphericalGrid, f, pole_tol: float | None = None,
                  closing_column=None, seam_tol: float = 1e-8) -> torch.Tensor:
    """Validate a gridded surface, returning it as a tensor.

    ``closing_column`` is the optional explicit ``theta = 2 pi`` column; when
    given it must reproduce column 0.  Violations raise :class:`GridError`
    naming the offending indices.
    """
    f = as_tensor(f)
    if tuple(f.shape) != (grid.n_phi, grid.n_theta, 3):
        raise GridError(f"surface shape {tuple(f.shape)} does not match grid "
                        f"({grid.n_phi}, {grid.n_theta}, 3)")
    if not torch.isfinite(f).all():
        i, j = torch.nonzero(~torch.isfinite(f).all(dim=-1))[0].tolist()
        raise GridError(f"non-finite surface value at row {i}, col {j}")
    diam = diameter(f) or 1.0
    if closing_column is not None:
        c = as_tensor(closing_column)
        gap = torch.linalg.norm(c - f[:, 0], dim=-1)
        bad = torch.nonzero(gap > seam_tol * diam).flatten()
        if len(bad):
            i = int(bad[0])
            raise GridError(f"seam mismatch at row {i}, col 0: |f(2pi) - f(0)| = "
                            f"{float(gap[i]):.3g} exceeds {seam_tol:g} * diameter")
    tol = default_pole_tol(grid) if pole_tol is None else pole_tol
    for name, est, row in zip(("north", "south"), pole_estimates(f), (0, grid.n_phi - 1)):
        spread = torch.linalg.norm(est - est.mean(dim=0), dim=-1)
        j = int(torch.argmax(spread))
        if float(spread[j]) > tol * diam:
            raise GridError(f"{name} pole inconsistent at row {row}, col {j}: "
                            f"spread {float(spread[j]):.3g} exceeds {tol:g} * diameter")
    return f
