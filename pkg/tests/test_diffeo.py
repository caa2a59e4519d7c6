import math

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from elasticsurf.diffeo import (ZeroVectorError, build_map, compose, gradient_tensor,
                                identity_coefficients, interpolate, invert_map, is_identity,
                                jacobian_det, jacobian_det_geometric, map_at, max_angle,
                                project_to_sphere, resample, rotation_map, step_bound)
from elasticsurf.energy import rotation_matrix
from elasticsurf.grid import DTYPE, build_grid
from elasticsurf.harmonics import vectorfield_basis
from elasticsurf.shapes import shape_function


@pytest.fixture(scope="module")
def setup():
    g = build_grid(24, 49)
    return g, vectorfield_basis(g, 4)


def _xv(vb, seed, scale=0.3):
    x = torch.as_tensor(np.random.default_rng(seed).standard_normal(len(vb)), dtype=DTYPE)
    return scale * x / torch.linalg.norm(x)


def test_zero_field_is_identity(setup):
    g, vb = setup
    gamma = build_map(vb, identity_coefficients(vb))
    assert is_identity(g, gamma)
    assert step_bound(vb, identity_coefficients(vb)) == math.inf


def test_map_stays_on_sphere(setup):
    g, vb = setup
    gamma = build_map(vb, _xv(vb, 0), 0.5)
    assert torch.allclose(torch.linalg.norm(gamma, dim=-1), torch.ones(g.shape, dtype=DTYPE))


@given(st.integers(0, 1000), st.floats(0.05, 0.99))
def test_jacobian_positive_below_bound(seed, frac):
    g = build_grid(12, 25)
    vb = vectorfield_basis(g, 3)
    xv = _xv(vb, seed, 1.0)
    t = frac * step_bound(vb, xv)
    assert float(jacobian_det(vb, xv, t).min()) > 0


def test_algebraic_and_geometric_determinants_agree(setup):
    g, vb = setup
    xv = _xv(vb, 3)
    t = 0.7 * step_bound(vb, xv)
    D = jacobian_det(vb, xv, t)
    assert float((D - jacobian_det_geometric(vb, xv, t)).abs().max()) < 1e-9 * float(D.abs().max())


def test_stencil_gradient_close_to_analytic(setup):
    g, vb = setup
    xv = _xv(vb, 4)
    a, s = gradient_tensor(vb, xv), gradient_tensor(vb, xv, method="stencil")
    scale = float(a.a.abs().max())
    assert float((a.a - s.a).abs().max()) < 0.05 * scale
    with pytest.raises(ValueError):
        gradient_tensor(vb, xv, method="nope")


def test_killing_field_has_infinite_bound():
    # the skew gradient of the l=1, m=0 harmonic rotates about z: no compression
    g = build_grid(12, 25)
    vb = vectorfield_basis(g, 1)
    xv = torch.zeros(len(vb), dtype=DTYPE)
    xv[3] = 1.0           # element 2*i+1 with i = index of (1, 0)
    assert step_bound(vb, xv) == math.inf


def test_map_at_matches_grid_map(setup):
    g, vb = setup
    xv = _xv(vb, 5)
    assert torch.allclose(map_at(vb, xv, 0.8, g.points()), build_map(vb, xv, 0.8), atol=1e-12)


def test_invert_map(setup):
    g, vb = setup
    xv = _xv(vb, 6)
    inv = invert_map(vb, xv, 0.5)
    assert max_angle(map_at(vb, xv, 0.5, inv), g.points()) < 1e-10


def test_project_rejects_zero():
    W = torch.zeros(2, 2, 3, dtype=DTYPE)
    W[..., 0] = 1.0
    W[1, 0] = 0.0
    with pytest.raises(ZeroVectorError, match=r"\(1, 0\)"):
        project_to_sphere(W)


def test_resample_identity_is_copy(setup):
    g, _ = setup
    f = shape_function("bumpy", seed=1)(g.points())
    out = resample(g, f, g.points())
    assert torch.equal(out, f) and out is not f


def test_interpolation_error_is_small_and_decreases():
    fn = shape_function("bumpy", amplitude=0.2, degree=3, seed=2)
    errs = []
    for n in (16, 32, 64):
        g = build_grid(n, n + 1)
        vb = vectorfield_basis(g, 3)
        gamma = build_map(vb, _xv(vb, 7), 0.5)
        errs.append(float((resample(g, fn(g.points()), gamma) - fn(gamma)).abs().max()))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_interpolation_across_the_pole():
    g = build_grid(16, 17)
    fn = shape_function("ellipsoid", a=1.0, b=0.8, c=1.3)
    pts = torch.tensor([[0.01, 0.02, 1.0], [-0.02, 0.01, -1.0]], dtype=DTYPE)
    pts = pts / torch.linalg.norm(pts, dim=-1, keepdim=True)
    assert torch.allclose(interpolate(g, fn(g.points()), pts), fn(pts), atol=1e-4)


def test_rotation_map_and_compose():
    g = build_grid(24, 25)
    R1 = rotation_matrix(torch.tensor([0.2, 0.1, -0.3], dtype=DTYPE))
    R2 = rotation_matrix(torch.tensor([-0.1, 0.4, 0.2], dtype=DTYPE))
    comp = compose(g, rotation_map(g, R1), rotation_map(g, R2))
    assert max_angle(comp, rotation_map(g, R1 @ R2)) < 5e-3
    assert torch.equal(compose(g, rotation_map(g, R1), g.points()), rotation_map(g, R1))
