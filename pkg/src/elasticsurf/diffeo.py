"""Sphere diffeomorphisms ``gamma = Proj(Id + t U)`` and surface resampling.

``U = sum_k xv[k] v_k`` is a tangent field from a :class:`VectorFieldBasis`.
The map is certified to be a diffeomorphism for ``0 <= t < step_bound``,
where the bound comes from the smallest eigenvalue of the symmetrized
covariant derivative of ``U``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .grid import DTYPE, SphericalGrid, as_tensor, frame, scalar_gradient, shift_half_turn
from .harmonics import VectorFieldBasis


class ZeroVectorError(ValueError):
    """``Id + tU`` vanished somewhere, so the projection is undefined."""


@dataclass(frozen=True)
class GradientTensor:
    """Entries of ``M = nabla U`` in the frame ``(e2, e3)``: rows ``(a, b)`` and ``(c, d)``."""
    a: torch.Tensor
    b: torch.Tensor
    c: torch.Tensor
    d: torch.Tensor

    def divergence(self):
        return self.a + self.d

    def lambda_min(self):
        """Smaller eigenvalue of the symmetrized tensor."""
        return 0.5 * ((self.a + self.d)
                      - torch.sqrt((self.a - self.d) ** 2 + (self.b + self.c) ** 2))


def gradient_tensor_from_components(grid: SphericalGrid, u, v, du, dv) -> GradientTensor:
    """``du``/``dv`` stack ``(d/dtheta, d/dphi)`` of the frame components."""
    s, c = grid.sin_phi, grid.cos_phi
    return GradientTensor(a=du[1], b=dv[1],
                          c=(du[0] - v * c) / s, d=(dv[0] + u * c) / s)


def gradient_tensor(basis: VectorFieldBasis, xv, method: str = "analytic") -> GradientTensor:
    """``nabla U`` on the grid.

    ``method="analytic"`` uses the basis' exact derivatives; ``"stencil"``
    differentiates the sampled components with the grid finite differences.
    """
    u, v, du, dv = basis.combine(xv)
    if method == "stencil":
        du = torch.stack(scalar_gradient(basis.grid, u))
        dv = torch.stack(scalar_gradient(basis.grid, v))
    elif method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    return gradient_tensor_from_components(basis.grid, u, v, du, dv)


def step_bound(basis: VectorFieldBasis, xv, method: str = "analytic") -> float:
    """Largest certified ``t``: ``-1 / inf(lambda_min)``, or ``inf`` if ``lambda_min >= 0``.

    The infimum is taken over grid points, a discretization of the true
    infimum; callers apply a safety factor (0.9 by default in the pipelines).
    """
    M = gradient_tensor(basis, xv, method)
    lam = M.lambda_min().detach()
    scale = max(float(torch.stack([M.a, M.b, M.c, M.d]).detach().abs().max()), 1e-300)
    low = float(lam.min())
    if low >= -1e-12 * scale:
        return math.inf
    return -1.0 / low


def field_vector(grid: SphericalGrid, u, v) -> torch.Tensor:
    """Frame components ``(u, v)`` to ambient vectors ``u e2 + v e3``."""
    _, e2, e3 = frame(grid)
    return u[..., None] * e2 + v[..., None] * e3


def project_to_sphere(W: torch.Tensor) -> torch.Tensor:
    n = torch.linalg.norm(W, dim=-1, keepdim=True)
    if bool((n.detach() < 1e-9).any()):
        idx = tuple(torch.nonzero(n.detach()[..., 0] < 1e-9)[0].tolist())
        raise ZeroVectorError(f"Id + tU vanishes at grid index {idx}")
    return W / n


def build_map(basis: VectorFieldBasis, xv, t: float = 1.0) -> torch.Tensor:
    """``gamma = Proj(Id + t U)`` sampled on the grid, ``(n_phi, n_theta, 3)``."""
    grid = basis.grid
    e1 = grid.points()
    xv = as_tensor(xv)
    if t == 0 or (not xv.requires_grad and not bool((xv != 0).any())):
        return e1
    u, v, _, _ = basis.combine(xv)
    return project_to_sphere(e1 + t * field_vector(grid, u, v))


def jacobian_det(basis: VectorFieldBasis, xv, t: float, method: str = "analytic"):
    """``D = det(1 + tM) + t^2 <JU, (1 + tM) JU>`` at every grid point.

    ``D`` equals ``|W|^3`` times the Jacobian determinant of
    ``gamma = W / |W|``; positivity certifies a local diffeomorphism.
    """
    u, v, _, _ = basis.combine(xv)
    M = gradient_tensor(basis, xv, method)
    det = (1 + t * M.a) * (1 + t * M.d) - t * t * M.b * M.c
    # JU = (-v, u)
    ju0, ju1 = -v, u
    r0 = ju0 + t * (M.a * ju0 + M.b * ju1)
    r1 = ju1 + t * (M.c * ju0 + M.d * ju1)
    return det + t * t * (ju0 * r0 + ju1 * r1)


def _w_at(basis: VectorFieldBasis, xv, t, theta, phi):
    u, v, _, _ = basis.evaluate(theta, phi)
    xv = as_tensor(xv)
    U = (torch.einsum("k,k...->...", xv, u), torch.einsum("k,k...->...", xv, v))
    st, ct, sp, cp = torch.sin(theta), torch.cos(theta), torch.sin(phi), torch.cos(phi)
    e1 = torch.stack([sp * ct, sp * st, cp], -1)
    e2 = torch.stack([cp * ct, cp * st, -sp], -1)
    e3 = torch.stack([-st, ct, torch.zeros_like(st)], -1)
    return e1 + t * (U[0][..., None] * e2 + U[1][..., None] * e3)


def jacobian_det_geometric(basis: VectorFieldBasis, xv, t: float, h: float = 1e-5):
    """``(1/sin phi) W . (W_phi x W_theta)`` with derivatives of ``W = Id + tU``
    taken by central differences of the continuous field (independent of ``M``)."""
    th, ph = basis.grid.angles()
    W = _w_at(basis, xv, t, th, ph)
    W_p = (_w_at(basis, xv, t, th, ph + h) - _w_at(basis, xv, t, th, ph - h)) / (2 * h)
    W_t = (_w_at(basis, xv, t, th + h, ph) - _w_at(basis, xv, t, th - h, ph)) / (2 * h)
    return (W * torch.linalg.cross(W_p, W_t, dim=-1)).sum(-1) / torch.sin(ph)


def map_at(basis: VectorFieldBasis, xv, t, points):
    """Evaluate ``gamma`` at arbitrary unit vectors ``points`` (``(..., 3)``)."""
    theta, phi = to_angles(points)
    return project_to_sphere(_w_at(basis, xv, t, theta, phi))


def invert_map(basis: VectorFieldBasis, xv, t: float = 1.0, iters: int = 500,
               tol: float = 1e-13) -> torch.Tensor:
    """Numerical inverse of ``gamma`` on the grid by fixed-point iteration.

    Iterates ``x <- Proj(|W(x)| y - tU(x))``; a fixed point satisfies
    ``x + tU(x) = |W(x)| y``, i.e. ``gamma(x) = y`` exactly.
    """
    y = basis.grid.points()
    x = y.clone()
    for _ in range(iters):
        theta, phi = to_angles(x)
        W = _w_at(basis, xv, t, theta, phi)
        x_new = project_to_sphere(torch.linalg.norm(W, dim=-1, keepdim=True) * y - (W - x))
        step = float(torch.linalg.norm(x_new - x, dim=-1).max())
        x = x_new
        if step < tol:
            break
    return x


# ---------------------------------------------------------------------------
# resampling f o gamma

def to_angles(points):
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    theta = torch.remainder(torch.atan2(y, x), 2 * math.pi)
    phi = torch.atan2(torch.sqrt(x * x + y * y), z)
    return theta, phi


def _keys_weights(x):
    """Cubic convolution (a = -1/2) weights for offsets -1, 0, 1, 2."""
    x2, x3 = x * x, x * x * x
    return torch.stack([(-x3 + 2 * x2 - x) / 2,
                        (3 * x3 - 5 * x2 + 2) / 2,
                        (-3 * x3 + 4 * x2 + x) / 2,
                        (x3 - x2) / 2], dim=-1)


def pole_padded(f: torch.Tensor) -> torch.Tensor:
    """Pad two rows beyond each pole with the half-turn images of the nearest rows.

    Across a pole the great circle continues at ``theta + pi``, so row ``-k``
    is row ``k - 1`` shifted by a half turn.
    """
    sh = lambda row: shift_half_turn(row, dim=0)
    return torch.cat([sh(f[1])[None], sh(f[0])[None], f,
                      sh(f[-1])[None], sh(f[-2])[None]], dim=0)


def is_identity(grid: SphericalGrid, gamma) -> bool:
    gamma = as_tensor(gamma)
    # never short-circuit a map that carries a gradient
    return not gamma.requires_grad and torch.equal(gamma, grid.points())


def interpolate(grid: SphericalGrid, f, points, padded=None):
    """Bicubic interpolation of grid data ``f`` (``(n_phi, n_theta, C)``) at unit vectors."""
    f = as_tensor(f)
    P = pole_padded(f) if padded is None else padded
    theta, phi = to_angles(points)
    r = phi / grid.dphi - 0.5
    s = theta / grid.dtheta
    r0 = torch.floor(r.detach())
    s0 = torch.floor(s.detach())
    wr = _keys_weights(r - r0)
    ws = _keys_weights(s - s0)
    offs = torch.arange(-1, 3)
    rows = (r0.long()[..., None] + offs + 2).clamp(0, grid.n_phi + 3)
    cols = torch.remainder(s0.long()[..., None] + offs, grid.n_theta)
    vals = P[rows[..., :, None], cols[..., None, :]]          # (..., 4, 4, C)
    return torch.einsum("...i,...j,...ijc->...c", wr, ws, vals)


def resample(grid: SphericalGrid, f, gamma):
    """``f o gamma`` on the grid; the exact identity map returns a copy of ``f``."""
    f = as_tensor(f)
    if is_identity(grid, gamma):
        return f.clone()
    return interpolate(grid, f, as_tensor(gamma))


def compose(grid: SphericalGrid, outer, inner):
    """Grid samples of ``outer o inner`` for two sphere maps."""
    if is_identity(grid, inner):
        return as_tensor(outer).clone()
    if is_identity(grid, outer):
        return as_tensor(inner).clone()
    g = interpolate(grid, outer, inner)
    return g / torch.linalg.norm(g, dim=-1, keepdim=True)


def rotation_map(grid: SphericalGrid, R) -> torch.Tensor:
    """The sphere diffeomorphism ``x -> R x`` sampled on the grid."""
    R = as_tensor(R)
    return grid.points() @ R.T


def max_angle(a, b) -> float:
    """Largest angular gap (radians) between two sphere maps."""
    a, b = as_tensor(a), as_tensor(b)
    # atan2 form stays accurate for tiny angles where acos loses half the digits
    sin = torch.linalg.norm(torch.linalg.cross(a, b, dim=-1), dim=-1)
    return float(torch.atan2(sin, (a * b).sum(-1)).max())


def identity_coefficients(basis: VectorFieldBasis) -> torch.Tensor:
    return torch.zeros(len(basis), dtype=DTYPE)
