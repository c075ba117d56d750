import numpy as np
import pytest
from scipy.integrate import quad

from surfstokes.errors import NearTangentPlaneFlip
from surfstokes.manufactured import surface_operators
from surfstokes.meshing import element_map_eval
from surfstokes.quadrature import gauss_legendre_1d
from surfstokes.reference import LOCAL_EDGES, VERTICES
from surfstokes.transforms import (area_ratio_from_data, edge_ref_coords,
                                   edge_transfer_factor, gamma_piola_forward,
                                   gamma_piola_inverse, metric_pack, mu_h,
                                   node_transfer_matrix, piola_pair_from_data,
                                   reference_piola)

from conftest import surface_samples


def _tangent_of(oracle, x, seed=0):
    rng = np.random.default_rng(seed)
    _, _, nu = oracle.project(np.atleast_2d(x))
    v = rng.standard_normal(nu.shape)
    v -= np.einsum("ni,ni->n", v, nu)[:, None] * nu
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# -- area ratio ----------------------------------------------------------------


def test_area_ratio_on_surface_aligned(ellipsoid):
    pts = surface_samples(ellipsoid, 50, seed=11)
    _, d, nu, H, _ = ellipsoid.tube_data(pts)
    mu = area_ratio_from_data(d, nu, H, nu)
    np.testing.assert_allclose(mu, 1.0, atol=1e-10)


def test_area_ratio_concentric_spheres(unit_sphere):
    # a sphere of radius rho mapped to the unit sphere scales areas by
    # (1/rho)^2; equivalently mu = 1/(1+d)^2 at distance d with aligned
    # normals (spec's worked example uses on-surface curvatures and gets
    # (1-d)^2, which contradicts the area identity; see decisions ledger)
    for rho in (0.9, 1.15):
        x = np.array([[0.0, 0.0, rho]])
        _, d, nu, H, _ = unit_sphere.tube_data(x)
        mu = area_ratio_from_data(d, nu, H, nu)
        assert mu[0] == pytest.approx(1.0 / rho**2, rel=1e-12)


def test_area_ratio_integral_identity(unit_sphere, cache):
    # int over the discrete surface of mu equals the exact sphere area
    from surfstokes.quadrature import triangle_quadrature
    mesh = cache.mesh("sphere", 2, 3)
    rule = triangle_quadrature(10)
    geo = mesh.eval_maps(rule.points, nderiv=1)
    pack = metric_pack(geo["J"])
    x = geo["x"].reshape(-1, 3)
    _, d, nu, H, _ = unit_sphere.tube_data(x)
    mu = area_ratio_from_data(d, nu, H, pack["nu_h"].reshape(-1, 3))
    area = np.einsum("q,tq,tq->", rule.weights, pack["sqrt_g"],
                     mu.reshape(pack["sqrt_g"].shape))
    assert area == pytest.approx(4 * np.pi, rel=1e-10)


def test_mu_h_operation(ellipsoid, cache):
    mesh = cache.mesh("ellipsoid", 1, 2)
    val = mu_h(ellipsoid, mesh, 3, [0.3, 0.3])
    assert 0.9 < val < 1.1


# -- gamma Piola ---------------------------------------------------------------


def test_gamma_piola_identity_on_surface(ellipsoid):
    pts = surface_samples(ellipsoid, 30, seed=13)
    v = _tangent_of(ellipsoid, pts, seed=14)
    _, d, nu, H, _ = ellipsoid.tube_data(pts)
    _, L_fwd, L_inv = piola_pair_from_data(d, nu, H, nu)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", L_fwd, v), v,
                               atol=1e-10)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", L_inv, v), v,
                               atol=1e-10)


def test_gamma_piola_roundtrip_and_tangency(ellipsoid, cache, rng):
    mesh = cache.mesh("ellipsoid", 1, 2)
    from surfstokes.quadrature import triangle_quadrature
    rule = triangle_quadrature(4)
    geo = mesh.eval_maps(rule.points, nderiv=1)
    pack = metric_pack(geo["J"])
    x = geo["x"].reshape(-1, 3)
    nu_h = pack["nu_h"].reshape(-1, 3)
    _, d, nu, H, _ = ellipsoid.tube_data(x)
    _, L_fwd, L_inv = piola_pair_from_data(d, nu, H, nu_h)
    # random fields tangent to the elements
    v = rng.standard_normal(x.shape)
    v -= np.einsum("ni,ni->n", v, nu_h)[:, None] * nu_h
    fwd = np.einsum("nij,nj->ni", L_fwd, v)
    assert np.abs(np.einsum("ni,ni->n", fwd, nu)).max() <= 1e-10
    back = np.einsum("nij,nj->ni", L_inv, fwd)
    assert np.abs(back - v).max() <= 1e-10
    assert np.abs(np.einsum("ni,ni->n", back, nu_h)).max() <= 1e-10


def test_gamma_piola_point_ops(ellipsoid, cache):
    mesh = cache.mesh("ellipsoid", 1, 2)
    xhat = [0.25, 0.4]
    _, J, _, _ = element_map_eval(mesh, 5, xhat)
    nu_h = np.cross(J[:, 0], J[:, 1])
    nu_h /= np.linalg.norm(nu_h)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(3)
    v -= (v @ nu_h) * nu_h
    w = gamma_piola_forward(ellipsoid, mesh, 5, xhat, v)
    v2 = gamma_piola_inverse(ellipsoid, mesh, 5, xhat, w)
    np.testing.assert_allclose(v2, v, atol=1e-10)


def test_piola_divergence_identity(ellipsoid, cache, exact):
    # div on the discrete surface of the pulled-back field equals
    # mu times the surface divergence composed with the projection;
    # both sides via independent finite-difference routes
    mesh = cache.mesh("ellipsoid", 2, 2)
    K = 37
    qp = np.array([[0.3, 0.3], [0.2, 0.5], [0.45, 0.15]])
    u = exact.u

    def breve_hat(xh):
        geo = mesh.eval_maps(xh, elems=np.array([K]), nderiv=1)
        pack = metric_pack(geo["J"])
        x = geo["x"].reshape(-1, 3)
        p, d, nu, H, _ = ellipsoid.tube_data(x)
        _, _, L_inv = piola_pair_from_data(d, nu, H, pack["nu_h"].reshape(-1, 3))
        return np.einsum("nij,nj->ni", L_inv, u(p)), pack

    eps = 1e-4
    lhs = []
    for q in qp:
        vals = {}
        for b in range(2):
            for s in (-2, -1, 1, 2):
                dq = q.copy()
                dq[b] += s * eps
                vals[(b, s)], _ = breve_hat(dq[None])
        _, pack = breve_hat(q[None])
        D = np.empty((3, 2))
        for b in range(2):
            D[:, b] = (vals[(b, -2)][0] - 8 * vals[(b, -1)][0]
                       + 8 * vals[(b, 1)][0] - vals[(b, 2)][0]) / (12 * eps)
        grad = D @ pack["GiJt"][0, 0]
        lhs.append(np.trace(grad))
    geo = mesh.eval_maps(qp, elems=np.array([K]), nderiv=1)
    pack = metric_pack(geo["J"])
    x = geo["x"].reshape(-1, 3)
    p, d, nu, H, _ = ellipsoid.tube_data(x)
    mu = area_ratio_from_data(d, nu, H, pack["nu_h"].reshape(-1, 3))
    rhs = mu * surface_operators(ellipsoid, u, p)["div_gamma"]
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


# -- node transfer --------------------------------------------------------------


def test_node_transfer_identity():
    nu = np.array([0.0, 0.0, 1.0])
    M = node_transfer_matrix(nu, nu)
    np.testing.assert_allclose(M @ np.array([1.0, 0.0, 0.0]),
                               [1.0, 0.0, 0.0], atol=1e-15)


def test_node_transfer_hand_value():
    theta = 0.3
    nu_ref = np.array([0.0, 0.0, 1.0])
    nu_K = np.array([np.sin(theta), 0.0, np.cos(theta)])
    x = np.array([0.0, 1.0, 0.0])
    out = node_transfer_matrix(nu_ref, nu_K) @ x
    np.testing.assert_allclose(out, [0.0, np.cos(theta), 0.0], atol=1e-15)
    assert abs(nu_K @ out) <= 1e-15


def test_node_transfer_in_plane_property(rng):
    for _ in range(50):
        nu_ref = rng.standard_normal(3)
        nu_ref /= np.linalg.norm(nu_ref)
        pert = 0.3 * rng.standard_normal(3)
        nu_K = nu_ref + pert
        nu_K /= np.linalg.norm(nu_K)
        x = rng.standard_normal(3)
        x -= (x @ nu_ref) * nu_ref
        out = node_transfer_matrix(nu_ref, nu_K) @ x
        assert abs(nu_K @ out) <= 1e-14


def test_node_transfer_flip_guard():
    with pytest.raises(NearTangentPlaneFlip):
        node_transfer_matrix(np.array([0.0, 0.0, 1.0]),
                             np.array([1.0, 0.0, 0.0]))


# -- edge factor ----------------------------------------------------------------


def test_edge_factor_affine_is_one(ellipsoid, cache):
    mesh = cache.mesh("ellipsoid", 1, 1)
    s = np.linspace(0, 1, 7)
    for e in (0, 5, 31):
        np.testing.assert_allclose(edge_transfer_factor(mesh, e, s), 1.0,
                                   atol=1e-12)


def test_edge_factor_arc_length(unit_sphere, cache):
    # integral of the factor over the base edge equals the arc length of
    # the curved edge from adaptive quadrature
    mesh = cache.mesh("sphere", 1, 2)
    base = mesh.base
    e = 11
    t = int(base.edge_tris[e, 0])
    m = int(base.edge_local[e, 0])
    rev = bool(base.tri_edge_reversed[t, m])
    lo, hi = base.edges[e]
    length = np.linalg.norm(base.vertices[hi] - base.vertices[lo])
    i, j = LOCAL_EDGES[m]
    dref = (VERTICES[j] - VERTICES[i]) * (-1.0 if rev else 1.0)

    def speed(s):
        ref = edge_ref_coords(m, rev, np.array([s]))
        J = mesh.eval_maps(ref, elems=np.array([t]), nderiv=1)["J"][0, 0]
        return np.linalg.norm(J @ dref)

    arc, _ = quad(speed, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    line = gauss_legendre_1d(12)
    via_factor = length * np.sum(
        line.weights * edge_transfer_factor(mesh, e, line.nodes))
    assert via_factor == pytest.approx(arc, abs=1e-10)


# -- reference Piola -------------------------------------------------------------


def test_reference_piola_pseudo_inverse(ellipsoid, cache, rng):
    mesh = cache.mesh("ellipsoid", 1, 3)
    for K in rng.integers(0, mesh.n_triangles, size=5):
        _, J, _, _ = element_map_eval(mesh, int(K), rng.uniform(0.1, 0.4, 2))
        pp = reference_piola(J)
        np.testing.assert_allclose(pp.Pdagger @ pp.P, np.eye(2), atol=1e-12)


def test_reference_piola_divergence_preservation(ellipsoid, cache, rng):
    # div of the Piola-mapped field times the area factor equals the
    # reference divergence (checked pointwise on random elements)
    mesh = cache.mesh("ellipsoid", 1, 2)
    r = 3
    from surfstokes.reference import LagrangeBasis, triangle_nodes
    basis = LagrangeBasis(r, triangle_nodes(r))
    qp = np.array([[0.22, 0.31], [0.5, 0.2], [0.1, 0.6]])
    phi = basis.eval(qp)
    dphi = basis.grad(qp)
    for K in rng.integers(0, mesh.n_triangles, size=10):
        geo = mesh.eval_maps(qp, elems=np.array([int(K)]), nderiv=2)
        pack = metric_pack(geo["J"], geo["dJ"])
        coeffs = rng.standard_normal((basis.n_nodes, 2))
        vhat = np.einsum("iq,ix->qx", phi, coeffs)
        dvhat = np.einsum("iqb,ix->qxb", dphi, coeffs)
        # divergence as trace of the chain-rule surface gradient
        D = (np.einsum("qcxb,qx->qcb", pack["dP"][0], vhat)
             + np.einsum("qcx,qxb->qcb", pack["P"][0], dvhat))
        grad = np.einsum("qcb,qbj->qcj", D, pack["GiJt"][0])
        div_surface = np.einsum("qcc->q", grad)
        div_hat = np.einsum("qxx->q", dvhat)
        rel = np.abs(div_surface * pack["sqrt_g"][0] - div_hat)
        rel /= max(np.abs(div_hat).max(), 1e-30)
        assert rel.max() <= 1e-9
