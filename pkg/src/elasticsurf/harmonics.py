"""Real spherical harmonics and the bases built from them.

Ordering is frozen so coefficient vectors stay portable between runs:
degree-major (``l = 1..deg``), order-minor (``m = -l..l``), and then the
innermost slot -- the xyz coordinate for surface perturbations, the
(gradient, skew-gradient) pair for vector fields.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .grid import DTYPE, SphericalGrid, as_tensor, integrate


def _legendre(lmax: int, phi: torch.Tensor):
    """Orthonormal associated Legendre functions of ``cos(phi)`` and their phi-derivatives.

    Keyed by ``(l, m)``, ``0 <= m <= l <= lmax``.  ``P[l, 0]`` has unit L2
    norm on the sphere; for ``m > 0`` the unit-norm harmonic is
    ``sqrt(2) P[l, m] cos(m theta)``.
    """
    x = torch.cos(phi)
    s = torch.sin(phi)
    P = {}
    for m in range(lmax + 1):
        amm = 1.0
        for k in range(1, m + 1):
            amm *= (2 * k + 1) / (2 * k)
        P[m, m] = math.sqrt(amm / (4 * math.pi)) * s ** m
        if m + 1 <= lmax:
            P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    dP = {}
    for (l, m), p in P.items():
        # sin(phi) dP_l/dphi = l x P_l - sqrt((2l+1)(l-m)(l+m)/(2l-1)) P_{l-1}
        acc = l * x * p
        if (l - 1, m) in P:
            acc = acc - math.sqrt((2 * l + 1) * (l - m) * (l + m) / (2 * l - 1)) * P[l - 1, m]
        dP[l, m] = acc / s
    return P, dP


def harmonic_degrees(lmax: int) -> list[tuple[int, int]]:
    return [(l, m) for l in range(1, lmax + 1) for m in range(-l, l + 1)]


def harmonic_index(l: int, m: int) -> int:
    """Position of ``Y_l^m`` among the degree >= 1 harmonics."""
    return l * l - 1 + (m + l)


def real_sph_harm(lmax: int, theta, phi, derivatives: bool = False):
    """Real orthonormal spherical harmonics of degrees ``1..lmax``.

    ``Y_l^m`` is ``sqrt(2) P_l^m cos(m theta)`` for ``m > 0``,
    ``sqrt(2) P_l^|m| sin(|m| theta)`` for ``m < 0`` and ``P_l^0`` for
    ``m = 0``; the output has a leading axis of length ``(lmax+1)^2 - 1``.

    With ``derivatives=True`` returns a dict with keys ``Y, t, p, tt, tp, pp``
    (partial derivatives in theta and phi).
    """
    theta, phi = torch.broadcast_tensors(as_tensor(theta), as_tensor(phi))
    P, dP = _legendre(lmax, phi)
    s = torch.sin(phi)
    cot = torch.cos(phi) / s
    out = {k: [] for k in ("Y", "t", "p", "tt", "tp", "pp")}
    for l in range(1, lmax + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            if m == 0:
                trig, dtrig, c = torch.ones_like(theta), torch.zeros_like(theta), 1.0
            elif m > 0:
                trig, dtrig, c = torch.cos(m * theta), -m * torch.sin(m * theta), math.sqrt(2)
            else:
                trig, dtrig, c = torch.sin(am * theta), am * torch.cos(am * theta), math.sqrt(2)
            p, dp = P[l, am], dP[l, am]
            out["Y"].append(c * p * trig)
            if derivatives:
                # associated Legendre equation
                ddp = -cot * dp - (l * (l + 1) - am * am / s ** 2) * p
                out["t"].append(c * p * dtrig)
                out["p"].append(c * dp * trig)
                out["tt"].append(-am * am * c * p * trig)
                out["tp"].append(c * dp * dtrig)
                out["pp"].append(c * ddp * trig)
    if not derivatives:
        return torch.stack(out["Y"])
    return {k: torch.stack(v) for k, v in out.items()}


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Surface perturbations ``S_j``: harmonic ``j // 3`` placed in coordinate ``j % 3``."""
    grid: SphericalGrid
    deg: int
    harmonics: torch.Tensor = field(repr=False)  # (K, n_phi, n_theta)

    def __len__(self):
        return 3 * self.harmonics.shape[0]

    def element(self, j: int) -> torch.Tensor:
        out = torch.zeros(self.grid.n_phi, self.grid.n_theta, 3, dtype=DTYPE)
        out[..., j % 3] = self.harmonics[j // 3]
        return out

    @property
    def elements(self) -> torch.Tensor:
        """All ``L`` elements stacked as ``(L, n_phi, n_theta, 3)``."""
        return torch.stack([self.element(j) for j in range(len(self))])

    def combine(self, coeff) -> torch.Tensor:
        """``sum_j coeff[j] S_j`` for ``coeff`` of shape ``(L,)`` or ``(L, n)``."""
        coeff = as_tensor(coeff)
        K = self.harmonics.shape[0]
        if coeff.ndim == 1:
            return torch.einsum("kc,kpt->ptc", coeff.reshape(K, 3), self.harmonics)
        return torch.einsum("kcn,kpt->nptc", coeff.reshape(K, 3, -1), self.harmonics)


def surface_basis(grid: SphericalGrid, deg: int, orthonormalize: bool = True) -> HarmonicBasis:
    """Harmonics of degree ``1..deg`` in each coordinate slot (``L = 3((deg+1)^2 - 1)``).

    The midpoint quadrature only makes exact harmonics orthogonal up to
    ``O(dphi^2)``.  With ``orthonormalize`` each fixed-order family is
    Gram-Schmidt orthonormalized in increasing degree under the grid
    weights; the span (and so the search space) is unchanged.
    """
    if deg < 1:
        raise ValueError(f"deg must be >= 1, got {deg}")
    th, ph = grid.angles()
    Y = real_sph_harm(deg, th, ph)
    if orthonormalize:
        Y = Y.clone()
        degrees = harmonic_degrees(deg)
        for m in range(-deg, deg + 1):
            idx = [k for k, (_, mm) in enumerate(degrees) if mm == m]
            block = Y[idx].reshape(len(idx), -1)
            G = block @ (block * grid.weight.reshape(1, -1)).T
            Lc = torch.linalg.cholesky(G)
            Y[idx] = torch.linalg.solve_triangular(Lc, block, upper=False).reshape(
                len(idx), grid.n_phi, grid.n_theta)
    return HarmonicBasis(grid, deg, Y)


@dataclass(frozen=True, eq=False)
class VectorFieldBasis:
    """Tangent fields ``v_k`` on the sphere, normalized in discrete L2.

    Element ``2i`` is the gradient and ``2i + 1`` the skew gradient
    ``e1 x grad`` of harmonic ``i``.  Fields are stored by their ``e2`` and
    ``e3`` components ``u`` and ``v``; ``du``/``dv`` stack the analytic
    ``(d/dtheta, d/dphi)`` derivatives of those components.
    """
    grid: SphericalGrid
    deg_bar: int
    norms: torch.Tensor = field(repr=False)   # (K,) discrete L2 norm of grad Y_i
    u: torch.Tensor = field(repr=False)       # (Lbar, n_phi, n_theta)
    v: torch.Tensor = field(repr=False)
    du: torch.Tensor = field(repr=False)      # (2, Lbar, n_phi, n_theta)
    dv: torch.Tensor = field(repr=False)

    def __len__(self):
        return self.u.shape[0]

    def evaluate(self, theta, phi):
        """``(u, v, du, dv)`` of every element at arbitrary points."""
        u, v, du, dv = _field_components(self.deg_bar, theta, phi)
        scale = self.norms.repeat_interleave(2).reshape((-1,) + (1,) * (u.ndim - 1))
        return u / scale, v / scale, du / scale, dv / scale

    def combine(self, xv):
        """``U = sum_k xv[k] v_k`` on the grid as ``(u, v, du, dv)``."""
        xv = as_tensor(xv)
        return (torch.einsum("k,kpt->pt", xv, self.u),
                torch.einsum("k,kpt->pt", xv, self.v),
                torch.einsum("k,dkpt->dpt", xv, self.du),
                torch.einsum("k,dkpt->dpt", xv, self.dv))


def _field_components(deg_bar: int, theta, phi):
    """Unnormalized gradient / skew-gradient components and their derivatives."""
    H = real_sph_harm(deg_bar, theta, phi, derivatives=True)
    phi_b = torch.broadcast_tensors(as_tensor(theta), as_tensor(phi))[1]
    s, c = torch.sin(phi_b), torch.cos(phi_b)
    # gradient: u = Y_p, v = Y_t / sin
    gu, gv = H["p"], H["t"] / s
    gu_t, gu_p = H["tp"], H["pp"]
    gv_t, gv_p = H["tt"] / s, H["tp"] / s - H["t"] * c / s ** 2
    # skew gradient e1 x (u e2 + v e3) = -v e2 + u e3
    pairs = [(gu, -gv), (gv, gu), (gu_t, -gv_t), (gu_p, -gv_p), (gv_t, gu_t), (gv_p, gu_p)]
    u, v, ut, up, vt, vp = (torch.stack(p, dim=1).flatten(0, 1) for p in pairs)
    return u, v, torch.stack([ut, up]), torch.stack([vt, vp])


def vectorfield_basis(grid: SphericalGrid, deg_bar: int) -> VectorFieldBasis:
    if deg_bar < 1:
        raise ValueError(f"deg_bar must be >= 1, got {deg_bar}")
    th, ph = grid.angles()
    u, v, du, dv = _field_components(deg_bar, th, ph)
    norms = torch.sqrt(integrate(grid, u[0::2] ** 2 + v[0::2] ** 2))
    scale = norms.repeat_interleave(2)[:, None, None]
    return VectorFieldBasis(grid, deg_bar, norms, u / scale, v / scale,
                            du / scale, dv / scale)
