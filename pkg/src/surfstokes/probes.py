"""Diagnostic probes: geometric decay, conformity jumps, node-transfer defect.

These back the --diagnostics CLI mode and the verification suite; none
of them feed the solver path.
"""

from __future__ import annotations

import numpy as np

from .geometry import SurfaceOracle
from .meshing import HighOrderMesh
from .quadrature import gauss_legendre_1d, triangle_quadrature
from .reference import LOCAL_EDGES, VERTICES
from .spaces import DofHandler, edge_dof_params, velocity_fields_batch
from .transforms import (area_ratio_from_data, edge_ref_coords, metric_pack,
                         node_transfer_matrix, piola_pair_from_data)


def geometric_decay(oracle: SurfaceOracle, mesh: HighOrderMesh,
                    quad_degree: int = 8) -> dict:
    """Max distance, normal error and area-ratio deviation over quad points."""
    rule = triangle_quadrature(quad_degree)
    max_d = max_nu = max_mu = 0.0
    T = mesh.n_triangles
    for a in range(0, T, 512):
        elems = np.arange(a, min(a + 512, T))
        geo = mesh.eval_maps(rule.points, elems=elems, nderiv=1)
        pack = metric_pack(geo["J"])
        x = geo["x"].reshape(-1, 3)
        _, d, nu, H, _ = oracle.tube_data(x, check_tube=True)
        nu_h = pack["nu_h"].reshape(-1, 3)
        mu = area_ratio_from_data(d, nu, H, nu_h)
        max_d = max(max_d, float(np.abs(d).max()))
        max_nu = max(max_nu, float(np.linalg.norm(nu - nu_h, axis=1).max()))
        max_mu = max(max_mu, float(np.abs(mu - 1.0).max()))
    return {"h": mesh.h_max, "max_distance": max_d,
            "max_normal_error": max_nu, "max_area_ratio_error": max_mu}


_REF_OUT_NORMALS = {0: np.array([0.0, -1.0]),
                    1: np.array([-1.0, 0.0]),
                    2: np.array([1.0, 1.0]) / np.sqrt(2.0)}


def _edge_side_eval(handler, coeffs, side, s_params):
    """Velocity values, co-normals and arc weights on one side of all edges."""
    mesh = handler.mesh
    base = mesh.base
    E = base.n_edges
    Q = len(s_params)
    vals = np.empty((E, Q, 3))
    conormals = np.empty((E, Q, 3))
    arc = np.empty((E, Q))
    tris = base.edge_tris[:, side]
    locs = base.edge_local[:, side]
    revs = base.tri_edge_reversed[tris, locs]
    for m in range(3):
        for rev in (False, True):
            sel = np.where((locs == m) & (revs == rev))[0]
            if not len(sel):
                continue
            ref = edge_ref_coords(m, rev, s_params)
            elems = tris[sel]
            v, _ = velocity_fields_batch(handler, coeffs, ref, elems=elems,
                                         with_grad=False)
            vals[sel] = v
            geo = mesh.eval_maps(ref, elems=elems, nderiv=1)
            pack = metric_pack(geo["J"])
            i, j = LOCAL_EDGES[m]
            dref = (VERTICES[j] - VERTICES[i]) * (-1.0 if rev else 1.0)
            tang = np.einsum("tqca,a->tqc", geo["J"], dref)
            arc[sel] = np.linalg.norm(tang, axis=2)
            that = tang / arc[sel][..., None]
            w = np.einsum("tqca,a->tqc", geo["J"], _REF_OUT_NORMALS[m])
            w = w - np.einsum("tqc,tqc->tq", w, that)[..., None] * that
            conormals[sel] = w / np.linalg.norm(w, axis=2, keepdims=True)
    return vals, conormals, arc


def co_normal_jump(handler: DofHandler, coeffs, n_gauss=None):
    """(L2 norm of the co-normal jump over all edges, L2 norm of v)."""
    if n_gauss is None:
        n_gauss = handler.r + 3
    line = gauss_legendre_1d(n_gauss)
    v0, n0, arc = _edge_side_eval(handler, coeffs, 0, line.nodes)
    v1, n1, _ = _edge_side_eval(handler, coeffs, 1, line.nodes)
    jump = (np.einsum("eqc,eqc->eq", v0, n0)
            + np.einsum("eqc,eqc->eq", v1, n1))
    jump_sq = float(np.einsum("q,eq,eq->", line.weights, jump**2, arc))

    rule = triangle_quadrature(2 * handler.r + 2)
    mesh = handler.mesh
    geo = mesh.eval_maps(rule.points, nderiv=1)
    pack = metric_pack(geo["J"])
    vals, _ = velocity_fields_batch(handler, coeffs, rule.points,
                                    with_grad=False)
    v_sq = float(np.einsum("q,tq,tqc,tqc->", rule.weights, pack["sqrt_g"],
                           vals, vals))
    return np.sqrt(jump_sq), np.sqrt(v_sq)


def nodal_conormal_identity(handler: DofHandler, coeffs) -> float:
    """Max of |v1.n1 + v2.n2| over the r+1 velocity nodes of every edge."""
    params = edge_dof_params(handler.r, handler.placement)
    s = np.concatenate([[0.0], params, [1.0]])
    v0, n0, _ = _edge_side_eval(handler, coeffs, 0, s)
    v1, n1, _ = _edge_side_eval(handler, coeffs, 1, s)
    jump = (np.einsum("eqc,eqc->eq", v0, n0)
            + np.einsum("eqc,eqc->eq", v1, n1))
    return float(np.abs(jump).max())


def node_transfer_deviation(handler: DofHandler, oracle: SurfaceOracle,
                            u=None) -> float:
    """Max defect between exact pull-back per element and master transfer.

    For each node and each element containing it, compares the inverse
    closest-point Piola transform of a smooth tangential field taken
    with respect to that element against the node-transfer image of the
    master-element pull-back.
    """
    if u is None:
        def u(y):
            w = np.stack([-y[:, 2]**2, y[:, 0], y[:, 1]], axis=1)
            _, _, nu = oracle.project(y)
            return w - np.einsum("ni,ni->n", w, nu)[:, None] * nu

    nodes = handler.nodes
    x = nodes.positions
    p, d, nu, H, _ = oracle.tube_data(x, check_tube=True)
    up = u(p)
    _, _, L_master = piola_pair_from_data(d, nu, H, handler.masters.nu_ref)
    breve_master = np.einsum("nij,nj->ni", L_master, up)

    en = nodes.elem_nodes  # (T, n_loc)
    _, _, L_elem = piola_pair_from_data(d[en], nu[en], H[en], handler.elem_nu)
    breve_elem = np.einsum("tiab,tib->tia", L_elem, up[en])
    M = node_transfer_matrix(handler.masters.nu_ref[en], handler.elem_nu)
    transferred = np.einsum("tiab,tib->tia", M, breve_master[en])
    return float(np.linalg.norm(breve_elem - transferred, axis=2).max())
