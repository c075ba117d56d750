import numpy as np
import pytest

from surfstokes.errors import NonConvergence, OutsideTube
from surfstokes.geometry import SurfaceOracle, surface_from_config

from conftest import surface_samples


def test_sphere_radial_point(unit_sphere):
    tp = unit_sphere.closest_point([2.0, 0.0, 0.0])
    np.testing.assert_allclose(tp.p, [1.0, 0.0, 0.0], atol=1e-14)
    assert tp.d == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(tp.nu, [1.0, 0.0, 0.0], atol=1e-14)


def test_ellipsoid_axis_point(ellipsoid):
    tp = ellipsoid.closest_point([1.1, 0.0, 0.0])
    np.testing.assert_allclose(tp.p, [1.1, 0.0, 0.0], atol=1e-12)
    assert abs(tp.d) <= 1e-12
    np.testing.assert_allclose(tp.nu, [1.0, 0.0, 0.0], atol=1e-12)


def test_ellipsoid_generic_point_vs_brute_force(ellipsoid):
    # frozen reference from a 1.2M-point parametric sweep refined with
    # Nelder-Mead on the (theta, phi) chart (agreement 4e-9)
    tp = ellipsoid.closest_point([1.5, 0.3, -0.2])
    np.testing.assert_allclose(
        tp.p, [1.07248801, 0.22472768, -0.15559355], atol=1e-6)
    assert tp.d == pytest.approx(0.4363534807, abs=1e-6)


def test_weingarten_unit_sphere(unit_sphere):
    tp = unit_sphere.closest_point([0.0, 0.0, 1.0])
    np.testing.assert_allclose(tp.H, np.diag([1.0, 1.0, 0.0]), atol=1e-13)


def test_weingarten_sphere_radius_two():
    sph = surface_from_config("sphere:2")
    tp = sph.closest_point([0.0, 0.0, 2.0])
    np.testing.assert_allclose(tp.H, np.diag([0.5, 0.5, 0.0]), atol=1e-13)


def test_weingarten_ellipsoid_pole(ellipsoid):
    # principal curvatures of an axis-aligned ellipsoid at the z-pole are
    # c/a^2 and c/b^2 along x and y
    tp = ellipsoid.closest_point([0.0, 0.0, 1.3])
    np.testing.assert_allclose(
        tp.H, np.diag([1.3 / 1.1**2, 1.3 / 1.2**2, 0.0]), atol=1e-6)


def test_weingarten_fd_cross_check(ellipsoid):
    # independent 4th-order differences of the normal field, step 1e-3
    x = np.array([0.4, -0.7, 0.6])
    p, _, _ = ellipsoid.project(x[None], check_tube=False)
    tp = ellipsoid.closest_point(p[0])
    step = 1e-3
    H = np.empty((3, 3))
    for j in range(3):
        pts = p[0][None, :] + np.array([-2, -1, 1, 2])[:, None] * step * np.eye(3)[j]
        _, _, nus = ellipsoid.project(pts)
        H[:, j] = (nus[0] - 8 * nus[1] + 8 * nus[2] - nus[3]) / (12 * step)
    H = 0.5 * (H + H.T)
    np.testing.assert_allclose(tp.H, H, atol=1e-6)


def test_tube_point_invariants(ellipsoid):
    pts = surface_samples(ellipsoid, 1000, seed=1)
    rng = np.random.default_rng(2)
    offs = rng.uniform(-0.2, 0.2, size=len(pts)) * ellipsoid.min_semi_axis
    _, _, nus = ellipsoid.project(pts)
    x = pts + offs[:, None] * nus
    p, d, nu, H, Pi = ellipsoid.tube_data(x, check_tube=True)
    assert np.abs(np.linalg.norm(nu, axis=1) - 1).max() <= 1e-12
    assert np.abs(np.einsum("nij,nj->ni", H, nu)).max() <= 1e-8
    assert np.abs(Pi @ Pi - Pi).max() <= 1e-12
    assert np.abs(np.swapaxes(Pi, 1, 2) - Pi).max() <= 1e-12
    assert np.abs(np.swapaxes(H, 1, 2) - H).max() <= 1e-12
    resid = x - (p + d[:, None] * nu)
    scale = np.maximum(1.0, np.linalg.norm(x, axis=1))
    assert (np.linalg.norm(resid, axis=1) / scale).max() <= 1e-10


def test_normal_line_identity(ellipsoid):
    pts = surface_samples(ellipsoid, 200, seed=3)
    _, _, nus = ellipsoid.project(pts)
    for s in (-0.05, 0.0, 0.05):
        p2, d2, _ = ellipsoid.project(pts + s * ellipsoid.min_semi_axis * nus)
        assert np.abs(p2 - pts).max() <= 1e-9
        assert np.abs(d2 - s * ellipsoid.min_semi_axis).max() <= 1e-9


def test_extension_constant_along_normals(ellipsoid):
    fld = lambda y: y[:, 0] * y[:, 1]
    pts = surface_samples(ellipsoid, 200, seed=4)
    _, _, nus = ellipsoid.project(pts)
    base = ellipsoid.evaluate_extension(fld, pts)
    for s in (-0.05, 0.05):
        shifted = ellipsoid.evaluate_extension(
            fld, pts + s * ellipsoid.min_semi_axis * nus)
        assert np.abs(shifted - base).max() <= 1e-9


def test_extension_values(unit_sphere):
    const = lambda y: np.full(len(y), 2.5)
    assert unit_sphere.evaluate_extension(const, [[0.3, 0.4, 9.0]])[0] == 2.5
    z3 = lambda y: y[:, 2]
    assert unit_sphere.evaluate_extension(z3, [[0.0, 0.0, 2.0]])[0] == \
        pytest.approx(1.0, abs=1e-14)


def test_non_convergence_at_center(unit_sphere):
    with pytest.raises(NonConvergence):
        unit_sphere.closest_point([0.0, 0.0, 0.0])


def test_outside_tube_enforcement(ellipsoid):
    with pytest.raises(OutsideTube):
        ellipsoid.project([[3.0, 0.0, 0.0]], check_tube=True)
    ellipsoid.project([[3.0, 0.0, 0.0]], check_tube=False)  # accepted


def test_surface_config_parsing():
    o = surface_from_config("sphere:2.5")
    assert o.kind == "sphere" and o.params == (2.5,)
    o = surface_from_config("ellipsoid:1.1,1.2,1.3")
    assert o.kind == "ellipsoid" and o.params == (1.1, 1.2, 1.3)
    with pytest.raises(ValueError):
        surface_from_config("torus:1,2")
    with pytest.raises(ValueError):
        surface_from_config("sphere")
    with pytest.raises(ValueError):
        SurfaceOracle("ellipsoid", (1.0, -1.0, 1.0))
