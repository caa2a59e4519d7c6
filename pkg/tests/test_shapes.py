import math

import pytest
import torch
from scipy.special import ellipeinc, ellipkinc

from elasticsurf.grid import build_grid, check_surface
from elasticsurf.metric import area
from elasticsurf.shapes import GENERATORS, shape_function, synth_shape


def ellipsoid_area(a, b, c):
    """Triaxial ellipsoid surface area through incomplete elliptic integrals."""
    a, b, c = sorted((a, b, c), reverse=True)
    phi = math.acos(c / a)
    m = a * a * (b * b - c * c) / (b * b * (a * a - c * c))
    s = math.sin(phi)
    return 2 * math.pi * c * c + 2 * math.pi * a * b / s * (
        ellipeinc(phi, m) * s * s + ellipkinc(phi, m) * math.cos(phi) ** 2)


@pytest.fixture(scope="module")
def grid():
    return build_grid(48, 97)


def test_sphere_area(grid):
    assert float(area(grid, synth_shape("sphere", grid, radius=2.0))) == pytest.approx(
        16 * math.pi, rel=5e-3)


@pytest.mark.parametrize("axes", [(1.0, 1.0, 1.3), (1.2, 0.9, 1.0), (0.7, 1.5, 1.1)])
def test_ellipsoid_area_against_elliptic_integrals(grid, axes):
    f = synth_shape("ellipsoid", grid, a=axes[0], b=axes[1], c=axes[2])
    assert float(area(grid, f)) == pytest.approx(ellipsoid_area(*axes), rel=5e-3)


def test_zero_curvature_bend_is_capsule(grid):
    assert torch.equal(synth_shape("bent_cylinder", grid, curvature=0.0),
                       synth_shape("capsule", grid))


def test_bend_preserves_axis_length(grid):
    # the bent centre line keeps its arc length
    k = 0.8
    f = synth_shape("bent_cylinder", grid, curvature=k, radius=1e-9)
    z = synth_shape("capsule", grid, radius=1e-9)[..., 2]
    r = torch.linalg.norm(f[..., [0, 2]] - torch.tensor([1 / k, 0.0], dtype=f.dtype), dim=-1)
    assert torch.allclose(r, torch.full_like(r, 1 / k), atol=1e-6)
    ang = torch.atan2(f[..., 2], 1 / k - f[..., 0])
    assert torch.allclose(ang / k, z, atol=1e-6)


def test_twist_keeps_heights_and_radii(grid):
    f0 = synth_shape("twisted_cylinder", grid)
    f1 = synth_shape("twisted_cylinder", grid, rate=1.2)
    assert torch.equal(f0[..., 2], f1[..., 2])
    assert torch.allclose(torch.linalg.norm(f0[..., :2], dim=-1),
                          torch.linalg.norm(f1[..., :2], dim=-1), atol=1e-13)


@pytest.mark.parametrize("kind", sorted(GENERATORS))
def test_generators_pass_grid_checks(kind):
    g = build_grid(12, 25)
    check_surface(g, synth_shape(kind, g))


def test_bumpy_is_reproducible():
    g = build_grid(12, 25)
    assert torch.equal(synth_shape("bumpy", g, seed=4), synth_shape("bumpy", g, seed=4))
    assert not torch.equal(synth_shape("bumpy", g, seed=4), synth_shape("bumpy", g, seed=5))


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown shape kind"):
        shape_function("torus")
