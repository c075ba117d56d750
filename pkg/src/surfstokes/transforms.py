"""Piola transforms: reference <-> element, discrete surface <-> exact surface.

Three maps are needed.  The reference Piola P = J / sqrt(det(J^T J))
carries 2-vector reference polynomials to tangential fields on a curved
element.  The closest-point Piola maps tangential fields between the
discrete and the exact surface, with area ratio
mu = (nu . nu_h) det(I - d H).  The node-transfer matrix moves nodal
vectors between the tangent planes of two elements meeting at a node;
it is the Piola transform of the projection onto the master element's
tangent plane and is what glues the velocity space together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearTangentPlaneFlip, NonPositiveJacobian, SingularFactor
from .meshing import HighOrderMesh
from .reference import LOCAL_EDGES, VERTICES

_EYE3 = np.eye(3)


@dataclass(frozen=True)
class PiolaAtPoint:
    """Reference-to-element Piola matrix and its pseudo-inverse."""

    P: np.ndarray        # (3, 2)
    Pdagger: np.ndarray  # (2, 3)


@dataclass(frozen=True)
class GammaPiolaAtPoint:
    """Discrete-to-exact-surface Piola data at one point."""

    mu_h: float
    L_fwd: np.ndarray  # (3, 3): tangent-to-discrete -> tangent-to-exact
    L_inv: np.ndarray  # (3, 3): tangent-to-exact -> tangent-to-discrete


def metric_pack(J, dJ=None):
    """Metric quantities from map Jacobians J (..., 3, 2).

    Returns a dict with G, Ginv, sqrt_g, nu_h (unit column cross product,
    outward for consistently oriented meshes), P, GiJt = Ginv J^T, and,
    when dJ is given, dP (..., 3, 2, 2) with dP[..., b] the derivative of
    P in reference direction b.
    """
    G = np.einsum("...ca,...cb->...ab", J, J)
    det_g = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    if np.any(det_g <= 0):
        raise NonPositiveJacobian("metric determinant is not positive")
    sqrt_g = np.sqrt(det_g)
    Ginv = np.empty_like(G)
    Ginv[..., 0, 0] = G[..., 1, 1]
    Ginv[..., 1, 1] = G[..., 0, 0]
    Ginv[..., 0, 1] = -G[..., 0, 1]
    Ginv[..., 1, 0] = -G[..., 1, 0]
    Ginv /= det_g[..., None, None]
    cross = np.cross(J[..., 0], J[..., 1])
    nu_h = cross / sqrt_g[..., None]
    P = J / sqrt_g[..., None, None]
    out = {"G": G, "Ginv": Ginv, "sqrt_g": sqrt_g, "det_g": det_g,
           "nu_h": nu_h, "P": P,
           "GiJt": np.einsum("...ab,...cb->...ac", Ginv, J)}
    if dJ is not None:
        dG = (np.einsum("...cab,...cd->...adb", dJ, J)
              + np.einsum("...ca,...cdb->...adb", J, dJ))
        dg = det_g[..., None] * np.einsum("...ab,...bac->...c", Ginv, dG)
        dsq = 0.5 * dg / sqrt_g[..., None]
        out["dP"] = (dJ / sqrt_g[..., None, None, None]
                     - J[..., None] * (dsq / det_g[..., None])[..., None, None, :])
    return out


def reference_piola(J) -> PiolaAtPoint:
    """Reference Piola matrix and pseudo-inverse at a single point."""
    pack = metric_pack(J)
    P = pack["P"]
    pdag = pack["sqrt_g"][..., None, None] * pack["GiJt"]
    return PiolaAtPoint(P=P, Pdagger=pdag)


def reference_pdagger(pack):
    """Batched pseudo-inverse of the reference Piola from a metric pack."""
    return pack["sqrt_g"][..., None, None] * pack["GiJt"]


# -- discrete <-> exact surface -----------------------------------------------


def area_ratio_from_data(d, nu, H, nu_h):
    """mu = (nu . nu_h) det(I - d H), batched."""
    A = _EYE3 - d[..., None, None] * H
    mu = np.einsum("...i,...i->...", nu, nu_h) * np.linalg.det(A)
    if np.any(mu <= 0):
        raise NonPositiveJacobian(
            f"non-positive area ratio (min {mu.min():.3e})")
    return mu


def piola_pair_from_data(d, nu, H, nu_h):
    """(mu, L_fwd, L_inv) for batches of tube data and element normals."""
    dot = np.einsum("...i,...i->...", nu, nu_h)
    if np.any(dot <= 0.5):
        raise SingularFactor(
            "element normal deviates too far from the exact normal")
    A = _EYE3 - d[..., None, None] * H
    mu = dot * np.linalg.det(A)
    if np.any(mu <= 0):
        raise NonPositiveJacobian(
            f"non-positive area ratio (min {mu.min():.3e})")
    Pi = _EYE3 - nu[..., :, None] * nu[..., None, :]
    L_fwd = (Pi - d[..., None, None] * H) / mu[..., None, None]
    N = _EYE3 - nu[..., :, None] * nu_h[..., None, :] / dot[..., None, None]
    L_inv = mu[..., None, None] * (N @ np.linalg.inv(A))
    return mu, L_fwd, L_inv


def _point_data(oracle, mesh: HighOrderMesh, K: int, xhat):
    data = mesh.eval_maps(np.asarray(xhat, dtype=float).reshape(1, 2),
                          elems=np.array([K]), nderiv=1)
    x = data["x"][0, 0]
    pack = metric_pack(data["J"][0, 0])
    p, d, nu, H, _ = oracle.tube_data(x[None], check_tube=True)
    return x, pack["nu_h"], p[0], d, nu, H


def mu_h(oracle, mesh: HighOrderMesh, K: int, xhat) -> float:
    """Area ratio between the curved element and the exact surface."""
    _, nu_h_, _, d, nu, H = _point_data(oracle, mesh, K, xhat)
    return float(area_ratio_from_data(d, nu, H, nu_h_[None]))


def gamma_piola_at_point(oracle, mesh, K, xhat) -> GammaPiolaAtPoint:
    _, nu_h_, _, d, nu, H = _point_data(oracle, mesh, K, xhat)
    mu, L_fwd, L_inv = piola_pair_from_data(d, nu, H, nu_h_[None])
    return GammaPiolaAtPoint(mu_h=float(mu[0]), L_fwd=L_fwd[0], L_inv=L_inv[0])

def gamma_piola_forward(oracle, mesh, K, xhat, v):
    """Push a tangent vector of element K to a tangent vector of the surface."""
    return gamma_piola_at_point(oracle, mesh, K, xhat).L_fwd @ np.asarray(v)


def gamma_piola_inverse(oracle, mesh, K, xhat, w):
    """Pull a tangent vector of the surface (at the closest point) back to K."""
    return gamma_piola_at_point(oracle, mesh, K, xhat).L_inv @ np.asarray(w)


# -- node transfer ------------------------------------------------------------


def node_transfer_matrix(nu_ref, nu_K):
    """Transfer matrix (nu_ref . nu_K) I - nu_ref (x) nu_K, batched.

    Maps vectors in the plane normal to nu_ref into the plane normal to
    nu_K; it is the in-plane Piola transform of the closest-point
    projection between the two planes.
    """
    nu_ref = np.asarray(nu_ref, dtype=float)
    nu_K = np.asarray(nu_K, dtype=float)
    dot = np.einsum("...i,...i->...", nu_ref, nu_K)
    if np.any(dot <= 0.5):
        raise NearTangentPlaneFlip(
            f"adjacent element normals too far apart (min dot {dot.min():.3f})")
    return (dot[..., None, None] * _EYE3
            - nu_ref[..., :, None] * nu_K[..., None, :])


# -- edge change of variables -------------------------------------------------


def edge_ref_coords(local_edge: int, reversed_: bool, s):
    """Reference coordinates along a local edge at global parameters s."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    i, j = LOCAL_EDGES[local_edge]
    a, b = VERTICES[i], VERTICES[j]
    t = 1.0 - s if reversed_ else s
    return a[None, :] + t[:, None] * (b - a)[None, :]


def edge_transfer_factor(mesh: HighOrderMesh, edge: int, s):
    """Length stretch of the degree-k map along a base edge.

    s parameterizes the base edge from the lower to the higher global
    vertex; the returned factor converts line integrals over the curved
    edge into integrals over the straight base edge.
    """
    base = mesh.base
    t = int(base.edge_tris[edge, 0])
    m = int(base.edge_local[edge, 0])
    rev = bool(base.tri_edge_reversed[t, m])
    ref = edge_ref_coords(m, rev, s)
    data = mesh.eval_maps(ref, elems=np.array([t]), nderiv=1)
    lo, hi = base.edges[edge]
    length = np.linalg.norm(base.vertices[hi] - base.vertices[lo])
    i, j = LOCAL_EDGES[m]
    dref = (VERTICES[j] - VERTICES[i]) * (-1.0 if rev else 1.0)
    tangent = np.einsum("qca,a->qc", data["J"][0], dref)
    return np.linalg.norm(tangent, axis=1) / length
