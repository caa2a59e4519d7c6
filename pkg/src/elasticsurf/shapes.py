"""Synthetic genus-0 test surfaces.

Every generator is a function of unit vectors ``p`` on the parameter
sphere, so exact compositions ``f o gamma`` are available by evaluating at
``gamma``'s image points instead of interpolating.
"""
from __future__ import annotations

import math

import numpy as np
import torch

from .grid import DTYPE, SphericalGrid, as_tensor
from .harmonics import real_sph_harm


def _angles(p):
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    theta = torch.atan2(y, x)
    phi = torch.atan2(torch.sqrt(x * x + y * y), z)
    return theta, phi


def sphere(p, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
    return radius * p + as_tensor(center)


def ellipsoid(p, a: float = 1.0, b: float = 1.0, c: float = 1.3):
    return p * as_tensor([a, b, c])


def capsule(p, radius: float = 0.5, height: float = 1.5, sharpness: float = 3.0):
    """Cylinder with rounded caps: ``r = R tanh(s sin phi)/tanh(s)``, ``z = H tanh(s cos phi)/tanh(s)``."""
    rho = torch.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)   # sin phi
    norm = math.tanh(sharpness)
    r = radius * torch.tanh(sharpness * rho) / norm
    z = height * torch.tanh(sharpness * p[..., 2]) / norm
    # unit horizontal direction; rho > 0 away from the poles and r/rho stays finite
    scale = torch.where(rho > 1e-15, r / torch.clamp(rho, min=1e-15),
                        torch.full_like(rho, radius * sharpness / norm))
    return torch.stack([scale * p[..., 0], scale * p[..., 1], z], dim=-1)


def bend(f, curvature: float = 0.0):
    """Bend the z-axis of ``f`` onto an arc of the given curvature in the xz-plane."""
    if curvature == 0:
        return f
    k = curvature
    x, y, z = f[..., 0], f[..., 1], f[..., 2]
    rad = 1.0 / k - x
    return torch.stack([1.0 / k - rad * torch.cos(k * z), y, rad * torch.sin(k * z)], dim=-1)


def twist(f, rate: float = 0.0):
    """Rotate each horizontal slice of ``f`` by ``rate * z``."""
    if rate == 0:
        return f
    ang = rate * f[..., 2]
    c, s = torch.cos(ang), torch.sin(ang)
    x, y = f[..., 0], f[..., 1]
    return torch.stack([c * x - s * y, s * x + c * y, f[..., 2]], dim=-1)


def bent_cylinder(p, radius=0.5, height=1.5, sharpness=3.0, curvature=0.0):
    return bend(capsule(p, radius, height, sharpness), curvature)


def twisted_cylinder(p, radius=0.5, height=1.5, sharpness=3.0, rate=0.0, squash=0.6):
    """Capsule with an elliptic cross-section (so a twist is visible), twisted about z."""
    f = capsule(p, radius, height, sharpness) * as_tensor([1.0, squash, 1.0])
    return twist(f, rate)


def bumpy(p, amplitude: float = 0.1, degree: int = 4, seed: int = 0, radius: float = 1.0):
    """Star-shaped surface ``(radius + amplitude * h(p)) p`` with a random band-limited ``h``."""
    theta, phi = _angles(p)
    Y = real_sph_harm(degree, theta, phi)
    rng = np.random.default_rng(seed)
    c = torch.as_tensor(rng.standard_normal(Y.shape[0]), dtype=DTYPE)
    c = c / torch.linalg.norm(c)
    h = torch.einsum("k,k...->...", c, Y)
    return (radius + amplitude * h)[..., None] * p


GENERATORS = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "capsule": capsule,
    "cylinder": bent_cylinder,
    "bent_cylinder": bent_cylinder,
    "twisted_cylinder": twisted_cylinder,
    "bumpy": bumpy,
}


def shape_function(kind: str, **params):
    """``p -> f(p)`` for a named generator."""
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown shape kind {kind!r}; known: {sorted(GENERATORS)}") from None
    return lambda p: gen(as_tensor(p), **params)


def synth_shape(kind: str, grid: SphericalGrid, **params) -> torch.Tensor:
    """Sample a named generator on ``grid``."""
    return shape_function(kind, **params)(grid.points())
