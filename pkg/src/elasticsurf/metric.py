"""The split elastic metric on 3x2 one-form fields, and the SRNF map.

All pointwise functions act on the last two axes (``..., 3, 2``) and
broadcast over leading grid/time axes.  For a base point ``alpha`` with
``g = alpha^T alpha``, ``Lambda = g^{-1}`` and area factor
``sqrt(det g)``, the base inner product is

    <xi, eta>_alpha = tr(xi Lambda eta^T) sqrt(det g)

and a tangent splits G-orthogonally into a volume-preserving metric change,
a scale change, a normal (bending) part and a local reparametrization.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .grid import SphericalGrid, as_tensor, differential, integrate

RANK_TOL = 1e-14


class RankDeficiencyError(ValueError):
    """A base one-form is (numerically) not of full rank."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class MetricWeights:
    """Coefficients of the shear, scale, bending and reparametrization terms."""
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d)
        if any(v < 0 for v in vals) or not any(v > 0 for v in vals):
            raise ValueError(f"metric weights must be >= 0 and not all zero, got {vals}")

    @classmethod
    def parse(cls, text: str) -> "MetricWeights":
        parts = [float(p) for p in text.replace(" ", "").split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated weights, got {text!r}")
        return cls(*parts)

    def astuple(self):
        return (self.a, self.b, self.c, self.d)


SRNF_WEIGHTS = MetricWeights(0.0, 0.5, 1.0, 0.0)
FULL_WEIGHTS = MetricWeights(1.0, 1.0, 1.0, 1.0)


@dataclass
class SplitTangent:
    xi_m: torch.Tensor
    xi_scale: torch.Tensor
    xi_perp: torch.Tensor
    xi_0: torch.Tensor

    def parts(self):
        return (self.xi_m, self.xi_scale, self.xi_perp, self.xi_0)

    def total(self):
        return self.xi_m + self.xi_scale + self.xi_perp + self.xi_0


def _t(x):
    return x.transpose(-1, -2)


def gram(alpha):
    """``(g, Lambda, sqrt(det g))`` at every point."""
    g = _t(alpha) @ alpha
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    inv = torch.stack([torch.stack([g[..., 1, 1], -g[..., 0, 1]], -1),
                       torch.stack([-g[..., 1, 0], g[..., 0, 0]], -1)], -2) / det[..., None, None]
    return g, inv, torch.sqrt(det)


def check_rank(alpha, tol: float = RANK_TOL, label: str = ""):
    """Raise :class:`RankDeficiencyError` naming grid indices where ``det g`` is tiny."""
    g = _t(alpha) @ alpha
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    scale = det.detach().abs().mean()
    bad = ~(det.detach() > tol * scale)
    if bad.any():
        idx = tuple(torch.nonzero(bad)[0].tolist())
        where = f" {label}" if label else ""
        raise RankDeficiencyError(
            f"one-form not of full rank{where} at grid index {idx}: "
            f"det(alpha^T alpha) = {float(det[idx]):.3g}", idx)


def pseudo_inverse(alpha):
    return gram(alpha)[1] @ _t(alpha)


def pointwise_inner(alpha, xi, eta, *, cache=None):
    _, inv, area = cache if cache is not None else gram(alpha)
    return torch.einsum("...ij,...jk,...ik->...", xi, inv, eta) * area


def decompose(alpha, xi) -> SplitTangent:
    alpha, xi = as_tensor(alpha), as_tensor(xi)
    _, inv, _ = gram(alpha)
    A = _t(alpha) @ xi                                   # alpha^T xi
    tr = torch.einsum("...ii->...", inv @ A)             # tr(alpha^+ xi)
    scale = 0.5 * tr[..., None, None] * alpha
    sym = 0.5 * alpha @ inv @ (A + _t(A))
    xi_0 = 0.5 * alpha @ inv @ (A - _t(A))
    xi_perp = xi - alpha @ inv @ A
    return SplitTangent(sym - scale, scale, xi_perp, xi_0)


def split_inner_density(w: MetricWeights, alpha, xi, eta):
    """Pointwise polarized split metric (before integration).

    Parts are computed in closed form through 2x2 matrices:
    with ``A = alpha^T xi``, ``B = alpha^T eta`` and ``S = Lambda A``,
    ``<alpha X, alpha Y>_alpha = tr(g X Lambda Y^T) sqrt(det g)``.
    """
    g, inv, area = gram(alpha)
    A = _t(alpha) @ xi
    B = _t(alpha) @ eta if eta is not xi else A
    Sa, Sb = inv @ A, inv @ B
    ta = torch.einsum("...ii->...", Sa)
    tb = torch.einsum("...ii->...", Sb)
    eye = torch.eye(2, dtype=alpha.dtype)
    total = 0.0
    if w.a or w.d:
        # alpha (Lambda sym(A)) components; inner of alpha X and alpha Y is tr(g X Lambda Y^T)
        symA, symB = 0.5 * inv @ (A + _t(A)), 0.5 * inv @ (B + _t(B))
        if w.a:
            Xm = symA - 0.5 * ta[..., None, None] * eye
            Ym = symB - 0.5 * tb[..., None, None] * eye
            total = total + w.a * torch.einsum("...ij,...jk,...kl,...il->...", g, Xm, inv, Ym)
        if w.d:
            X0, Y0 = 0.5 * inv @ (A - _t(A)), 0.5 * inv @ (B - _t(B))
            total = total + w.d * torch.einsum("...ij,...jk,...kl,...il->...", g, X0, inv, Y0)
    if w.b:
        # <(tr_a/2) alpha, (tr_b/2) alpha> = tr_a tr_b / 4 * tr(g Lambda) = tr_a tr_b / 2
        total = total + w.b * 0.5 * ta * tb
    if w.c:
        # xi_perp = xi - alpha S_a; <xi_perp, eta_perp> = tr(xi Lambda eta^T) - tr(A^T Lambda B Lambda)...
        full = torch.einsum("...ij,...jk,...ik->...", xi, inv, eta)
        tang = torch.einsum("...ji,...jk,...kl,...li->...", A, inv, B, inv)
        total = total + w.c * (full - tang)
    return total * area


def base_metric(grid: SphericalGrid, alpha, xi, eta=None, check: bool = True):
    """Integrated ``G_alpha(xi, eta)`` of the unsplit metric."""
    alpha, xi = as_tensor(alpha), as_tensor(xi)
    eta = xi if eta is None else as_tensor(eta)
    if check:
        check_rank(alpha)
    return integrate(grid, pointwise_inner(alpha, xi, eta))


def split_metric(grid: SphericalGrid, w: MetricWeights, alpha, xi, eta=None,
                 check: bool = True):
    """Integrated split metric ``G^{a,b,c,d}_alpha(xi, eta)``."""
    alpha, xi = as_tensor(alpha), as_tensor(xi)
    eta = xi if eta is None else as_tensor(eta)
    if check:
        check_rank(alpha)
    return integrate(grid, split_inner_density(w, alpha, xi, eta))


def split_metric_reference(grid: SphericalGrid, w: MetricWeights, alpha, xi, eta=None):
    """Split metric from explicit 3x2 parts; slower, used to cross-check the closed form."""
    eta = xi if eta is None else eta
    cache = gram(as_tensor(alpha))
    px, pe = decompose(alpha, xi).parts(), decompose(alpha, eta).parts()
    dens = sum(wk * pointwise_inner(alpha, x, e, cache=cache)
               for wk, x, e in zip(w.astuple(), px, pe) if wk)
    return integrate(grid, dens)


def pullback_norm(grid: SphericalGrid, w: MetricWeights, f, u) -> torch.Tensor:
    """``||u||_f = G^{abcd}_{df}(du, du)^{1/2}``."""
    alpha = differential(grid, f)
    check_rank(alpha)
    val = integrate(grid, split_inner_density(w, alpha, differential(grid, u),
                                              differential(grid, u)))
    return torch.sqrt(torch.clamp(val, min=0.0))


# ---------------------------------------------------------------------------
# square root normal function

def srnf_from_differential(alpha, check: bool = True):
    """``q = sqrt(A) n`` with ``A = sqrt(det g)`` and ``n`` outward for the identity sphere."""
    # columns are (theta, phi); phi x theta points outward on the round sphere
    cross = torch.linalg.cross(alpha[..., 1], alpha[..., 0], dim=-1)
    area = torch.linalg.norm(cross, dim=-1)
    if check and not bool((area.detach() > 0).all()):
        idx = tuple(torch.nonzero(~(area.detach() > 0))[0].tolist())
        raise RankDeficiencyError(f"degenerate normal at grid index {idx}", idx)
    return cross / torch.sqrt(area)[..., None]


def srnf(grid: SphericalGrid, f, check: bool = True):
    return srnf_from_differential(differential(grid, f), check=check)


def srnf_l2_distance(grid: SphericalGrid, q1, q2):
    diff = as_tensor(q1) - as_tensor(q2)
    return torch.sqrt(integrate(grid, (diff * diff).sum(-1)))


def area(grid: SphericalGrid, f):
    """Surface area by quadrature of ``sqrt(det g)``."""
    return integrate(grid, gram(differential(grid, f))[2])
