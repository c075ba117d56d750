"""Quadrature-based assembly of the discrete saddle-point system.

The momentum form is int (Def v : Def w + v . w) over the curved mesh,
with Def the projected symmetric tangential gradient; the constraint
form is -int (div v) q.  The pressure mean-value functional is
assembled alongside so the solver can pin the pressure constant with a
Lagrange multiplier.  Element kernels are pure; elements are processed
in chunks that may be dispatched to a thread pool, with results
concatenated in chunk order so assembly is deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .meshing import HighOrderMesh
from .quadrature import (LineRule, QuadratureRule, gauss_legendre_1d,
                         gauss_lobatto_1d, triangle_quadrature)
from .spaces import DofHandler, velocity_shape_data
from .transforms import metric_pack

__all__ = [
    "QuadratureRule", "LineRule", "triangle_quadrature", "gauss_lobatto_1d",
    "gauss_legendre_1d", "StokesData", "SaddleSystem", "assemble_system",
    "assemble_norm_matrices",
]

_CHUNK = 256


@dataclass
class StokesData:
    """Right-hand-side data sampled at physical quadrature points.

    f_h maps points (n, 3) to load vectors (n, 3); g_h maps points and
    element unit normals to the divergence data (n,).  Either may be
    None for homogeneous data.
    """

    f_h: Optional[Callable] = None
    g_h: Optional[Callable] = None


@dataclass
class SaddleSystem:
    """Assembled blocks of the discrete Stokes saddle-point problem."""

    A: sp.csr_matrix        # velocity x velocity, Def:Def + mass
    B: sp.csr_matrix        # pressure x velocity, -int (div v) q
    m: np.ndarray           # pressure mean-value functional int q_j
    fvec: np.ndarray
    gvec: np.ndarray
    n_velocity: int
    n_pressure: int
    quad_degree: int
    Mp: sp.csr_matrix = None  # pressure mass (Schur preconditioning)


def _chunks(n, size=_CHUNK):
    return [np.arange(a, min(a + size, n)) for a in range(0, n, size)]


def _sym_def(grads, nu_h):
    """Projected symmetric gradient Pi_h (grad + grad^T)/2 Pi_h."""
    sym = 0.5 * (grads + np.swapaxes(grads, -1, -2))
    proj = sym - nu_h[:, :, None, None, :, None] * np.einsum(
        "tqc,tqiycj->tqiyj", nu_h, sym)[:, :, :, :, None, :]
    proj -= np.einsum("tqiycj,tqj->tqiyc", proj, nu_h)[..., None] \
        * nu_h[:, :, None, None, None, :]
    return proj


def _element_kernel(mesh, handler, data, rule, elems, mode):
    qpts, qw = rule.points, rule.weights
    geo = mesh.eval_maps(qpts, elems=elems, nderiv=2)
    pack = metric_pack(geo["J"], geo["dJ"])
    wq = qw[None, :] * pack["sqrt_g"]
    vals, grads = velocity_shape_data(handler, pack, qpts, elems)
    psi = handler.p_basis.eval(qpts)

    n_loc = handler.vel_basis.n_nodes
    nd = 2 * n_loc
    Tc = len(elems)
    out = {}
    if mode == "system":
        defs = _sym_def(grads, pack["nu_h"]).reshape(Tc, len(qpts), nd, 9)
        val2 = vals.reshape(Tc, len(qpts), nd, 3)
        Ae = (np.einsum("tq,tqim,tqjm->tij", wq, defs, defs, optimize=True)
              + np.einsum("tq,tqim,tqjm->tij", wq, val2, val2, optimize=True))
        div = np.einsum("tqiycc->tqiy", grads).reshape(Tc, len(qpts), nd)
        Be = -np.einsum("tq,pq,tqj->tpj", wq, psi, div, optimize=True)
        out["Ae"], out["Be"] = Ae, Be
        out["me"] = np.einsum("tq,pq->tp", wq, psi)
        out["Mpe"] = np.einsum("tq,pq,sq->tps", wq, psi, psi)
        if data.f_h is not None:
            f = data.f_h(geo["x"].reshape(-1, 3)).reshape(Tc, len(qpts), 3)
            out["fe"] = np.einsum("tq,tqc,tqimc->tim", wq, f,
                                  vals).reshape(Tc, nd)
        if data.g_h is not None:
            g = data.g_h(geo["x"].reshape(-1, 3),
                         pack["nu_h"].reshape(-1, 3)).reshape(Tc, len(qpts))
            out["ge"] = -np.einsum("tq,tq,pq->tp", wq, g, psi)
    else:  # norm matrices for the inf-sup estimate
        gr = grads.reshape(Tc, len(qpts), nd, 9)
        val2 = vals.reshape(Tc, len(qpts), nd, 3)
        out["He"] = (np.einsum("tq,tqim,tqjm->tij", wq, gr, gr, optimize=True)
                     + np.einsum("tq,tqim,tqjm->tij", wq, val2, val2,
                                 optimize=True))
        out["Mpe"] = np.einsum("tq,pq,sq->tps", wq, psi, psi)
    return out


def _vel_indices(handler, elems):
    nodes = handler.nodes.elem_nodes[elems]
    return np.stack([2 * nodes, 2 * nodes + 1], axis=2).reshape(len(elems), -1)


def _run_chunks(fn, chunks, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


def assemble_system(mesh: HighOrderMesh, handler: DofHandler,
                    data: StokesData, quad_degree: Optional[int] = None,
                    threads: int = 1) -> SaddleSystem:
    """Assemble A, B, the mean functional and the load vectors."""
    if quad_degree is None:
        quad_degree = 2 * handler.r + 2
    rule = triangle_quadrature(quad_degree)
    n_v, n_p = handler.n_velocity, handler.n_pressure
    chunks = _chunks(mesh.n_triangles)
    results = _run_chunks(
        lambda c: _element_kernel(mesh, handler, data, rule, c, "system"),
        chunks, threads)

    rows_A, cols_A, vals_A = [], [], []
    rows_B, cols_B, vals_B = [], [], []
    rows_M, cols_M, vals_M = [], [], []
    m = np.zeros(n_p)
    fvec = np.zeros(n_v)
    gvec = np.zeros(n_p)
    for elems, res in zip(chunks, results):
        vidx = _vel_indices(handler, elems)
        pidx = handler.p_elem_dofs[elems]
        nd = vidx.shape[1]
        rows_A.append(np.repeat(vidx, nd, axis=1).ravel())
        cols_A.append(np.tile(vidx, (1, nd)).ravel())
        vals_A.append(res["Ae"].ravel())
        npl = pidx.shape[1]
        rows_B.append(np.repeat(pidx, nd, axis=1).ravel())
        cols_B.append(np.tile(vidx, (1, npl)).ravel())
        vals_B.append(res["Be"].ravel())
        rows_M.append(np.repeat(pidx, npl, axis=1).ravel())
        cols_M.append(np.tile(pidx, (1, npl)).ravel())
        vals_M.append(res["Mpe"].ravel())
        np.add.at(m, pidx.ravel(), res["me"].ravel())
        if "fe" in res:
            np.add.at(fvec, vidx.ravel(), res["fe"].ravel())
        if "ge" in res:
            np.add.at(gvec, pidx.ravel(), res["ge"].ravel())

    A = sp.coo_matrix((np.concatenate(vals_A),
                       (np.concatenate(rows_A), np.concatenate(cols_A))),
                      shape=(n_v, n_v)).tocsr()
    B = sp.coo_matrix((np.concatenate(vals_B),
                       (np.concatenate(rows_B), np.concatenate(cols_B))),
                      shape=(n_p, n_v)).tocsr()
    Mp = sp.coo_matrix((np.concatenate(vals_M),
                        (np.concatenate(rows_M), np.concatenate(cols_M))),
                       shape=(n_p, n_p)).tocsr()
    return SaddleSystem(A=A, B=B, m=m, fvec=fvec, gvec=gvec,
                        n_velocity=n_v, n_pressure=n_p,
                        quad_degree=quad_degree, Mp=Mp)


def assemble_norm_matrices(mesh: HighOrderMesh, handler: DofHandler,
                           quad_degree: Optional[int] = None,
                           threads: int = 1):
    """Velocity H1-norm matrix and pressure mass matrix (for inf-sup)."""
    if quad_degree is None:
        quad_degree = 2 * handler.r + 2
    rule = triangle_quadrature(quad_degree)
    n_v, n_p = handler.n_velocity, handler.n_pressure
    chunks = _chunks(mesh.n_triangles)
    results = _run_chunks(
        lambda c: _element_kernel(mesh, handler, StokesData(), rule, c,
                                  "norms"),
        chunks, threads)
    rows_H, cols_H, vals_H = [], [], []
    rows_M, cols_M, vals_M = [], [], []
    for elems, res in zip(chunks, results):
        vidx = _vel_indices(handler, elems)
        pidx = handler.p_elem_dofs[elems]
        nd = vidx.shape[1]
        rows_H.append(np.repeat(vidx, nd, axis=1).ravel())
        cols_H.append(np.tile(vidx, (1, nd)).ravel())
        vals_H.append(res["He"].ravel())
        npl = pidx.shape[1]
        rows_M.append(np.repeat(pidx, npl, axis=1).ravel())
        cols_M.append(np.tile(pidx, (1, npl)).ravel())
        vals_M.append(res["Mpe"].ravel())
    H = sp.coo_matrix((np.concatenate(vals_H),
                       (np.concatenate(rows_H), np.concatenate(cols_H))),
                      shape=(n_v, n_v)).tocsr()
    Mp = sp.coo_matrix((np.concatenate(vals_M),
                        (np.concatenate(rows_M), np.concatenate(cols_M))),
                       shape=(n_p, n_p)).tocsr()
    return H, Mp
