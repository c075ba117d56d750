"""Velocity and pressure spaces on the curved mesh.

The velocity space consists of elementwise Piola-mapped degree-r
2-vector polynomials.  Each global node carries two scalar unknowns:
the coefficients of the nodal velocity in an orthonormal frame of the
tangent plane of a fixed master element at that node.  Every other
element touching the node recovers its nodal value through the
node-transfer matrix, which keeps co-normal components single-valued
at nodes and hence the space H(div)-conforming.  Edge nodes can sit at
the mapped Gauss-Lobatto parameters (the choice that makes the scheme
optimally convergent) or at the equispaced Lagrange parameters.

The pressure space is the mapped continuous scalar Lagrange space of
degree r-1 with equispaced nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedDegree
from .meshing import HighOrderMesh, assign_edge_slots
from .quadrature import gauss_lobatto_1d
from .reference import LagrangeBasis, triangle_nodes
from .transforms import metric_pack, node_transfer_matrix, piola_pair_from_data

PLACEMENTS = ("gauss_lobatto", "equispaced")


def edge_dof_params(r: int, placement: str) -> np.ndarray:
    """Interior edge parameters in (0, 1) for the r-1 edge nodes."""
    if placement == "gauss_lobatto":
        return gauss_lobatto_1d(r + 1).nodes[1:-1]
    if placement == "equispaced":
        return np.arange(1, r) / r
    raise ValueError(f"unknown placement {placement!r}")


@dataclass
class NodeSet:
    """Global velocity nodes of the degree-r space on a curved mesh."""

    r: int
    placement: str
    positions: np.ndarray     # (N, 3) on the curved surface
    elem_nodes: np.ndarray    # (T, n_loc) global node per canonical slot
    ref_coords: np.ndarray    # (n_loc, 2) canonical slot coordinates
    n_vertex: int
    n_edge: int
    n_interior: int

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    def node_kind(self, node: int) -> str:
        if node < self.n_vertex:
            return "vertex"
        if node < self.n_vertex + self.n_edge:
            return "edge"
        return "interior"


def enumerate_nodes(mesh: HighOrderMesh, r: int, placement: str,
                    interior: str = "equispaced") -> NodeSet:
    """Nodes of the velocity space: vertices, edge nodes, interior nodes."""
    if r < 2:
        raise UnsupportedDegree("velocity degree must be >= 2")
    if interior != "equispaced":
        raise UnsupportedDegree(
            f"interior placement {interior!r} not implemented")
    params = edge_dof_params(r, placement)
    ref = triangle_nodes(r, params)
    base = mesh.base
    T, V, E = base.n_triangles, base.n_vertices, base.n_edges
    per_edge = r - 1
    n_int = len(ref) - 3 - 3 * per_edge

    elem_nodes = np.empty((T, len(ref)), dtype=int)
    elem_nodes[:, :3] = base.triangles
    slots = assign_edge_slots(base, per_edge).reshape(T, 3 * per_edge)
    elem_nodes[:, 3:3 + 3 * per_edge] = V + slots
    if n_int:
        start = V + E * per_edge
        elem_nodes[:, 3 + 3 * per_edge:] = (
            start + n_int * np.arange(T)[:, None] + np.arange(n_int)[None, :])

    n_nodes = V + E * per_edge + T * n_int
    positions = np.empty((n_nodes, 3))
    vals = mesh.eval_maps(ref, nderiv=0)["x"]
    positions[elem_nodes.ravel()] = vals.reshape(-1, 3)
    return NodeSet(r=r, placement=placement, positions=positions,
                   elem_nodes=elem_nodes, ref_coords=ref,
                   n_vertex=V, n_edge=E * per_edge, n_interior=T * n_int)


@dataclass
class MasterAssignment:
    """Master element, master slot, its normal and a tangent frame per node."""

    master: np.ndarray       # (N,) element id
    master_slot: np.ndarray  # (N,) canonical slot of the node in its master
    nu_ref: np.ndarray       # (N, 3) master element normal at the node
    frames: np.ndarray       # (N, 3, 2) orthonormal basis of the plane _|_ nu_ref


def _element_normals_at_slots(mesh: HighOrderMesh, ref_coords) -> np.ndarray:
    J = mesh.eval_maps(ref_coords, nderiv=1)["J"]
    cross = np.cross(J[..., 0], J[..., 1])
    return cross / np.linalg.norm(cross, axis=-1, keepdims=True)


def _tangent_frames(nu: np.ndarray) -> np.ndarray:
    seeds = np.where((np.abs(nu[:, 2]) <= np.abs(nu[:, 0]))[:, None],
                     np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    f1 = seeds - np.einsum("ni,ni->n", seeds, nu)[:, None] * nu
    f1 /= np.linalg.norm(f1, axis=1, keepdims=True)
    f2 = np.cross(nu, f1)
    return np.stack([f1, f2], axis=2)


def assign_master_elements(mesh: HighOrderMesh,
                           node_set: NodeSet) -> MasterAssignment:
    """Pick the lowest-index incident element as master for every node."""
    elem_nodes = node_set.elem_nodes
    T, n_loc = elem_nodes.shape
    master = np.full(node_set.n_nodes, T, dtype=int)
    np.minimum.at(master, elem_nodes.ravel(),
                  np.repeat(np.arange(T), n_loc))
    owner = elem_nodes[master]  # (N, n_loc) nodes of each node's master
    master_slot = np.argmax(owner == np.arange(node_set.n_nodes)[:, None],
                            axis=1)
    nu_elem = _element_normals_at_slots(mesh, node_set.ref_coords)
    nu_ref = nu_elem[master, master_slot]
    return MasterAssignment(master=master, master_slot=master_slot,
                            nu_ref=nu_ref, frames=_tangent_frames(nu_ref))


@dataclass
class DofHandler:
    """Everything needed to evaluate and couple velocity/pressure unknowns."""

    mesh: HighOrderMesh
    r: int
    placement: str
    nodes: NodeSet
    masters: MasterAssignment
    elem_nu: np.ndarray       # (T, n_loc, 3) element normal at each slot
    coupling: np.ndarray      # (T, n_loc, 2, 2) frame coeffs -> reference value
    vel_basis: LagrangeBasis
    p_basis: LagrangeBasis
    p_elem_dofs: np.ndarray   # (T, n_ploc)
    n_pressure: int
    _transfer: np.ndarray = field(init=False, repr=False)

    @property
    def n_velocity(self) -> int:
        return 2 * self.nodes.n_nodes

    @property
    def node_frames(self) -> np.ndarray:
        return self.masters.frames

    def velocity_dof_indices(self, K: int) -> np.ndarray:
        """Global velocity dof indices of element K, slot-major."""
        nodes = self.nodes.elem_nodes[K]
        return np.stack([2 * nodes, 2 * nodes + 1], axis=1).ravel()


def build_dof_handler(mesh: HighOrderMesh, r: int,
                      placement: str = "gauss_lobatto") -> DofHandler:
    node_set = enumerate_nodes(mesh, r, placement)
    masters = assign_master_elements(mesh, node_set)
    elem_nu = _element_normals_at_slots(mesh, node_set.ref_coords)

    nu_ref = masters.nu_ref[node_set.elem_nodes]        # (T, n_loc, 3)
    frames = masters.frames[node_set.elem_nodes]        # (T, n_loc, 3, 2)
    M = node_transfer_matrix(nu_ref, elem_nu)           # (T, n_loc, 3, 3)
    J = mesh.eval_maps(node_set.ref_coords, nderiv=1)["J"]
    pack = metric_pack(J)
    pdag = pack["sqrt_g"][..., None, None] * pack["GiJt"]  # (T, n_loc, 2, 3)
    coupling = np.einsum("tixc,ticd,tidy->tixy", pdag, M, frames)

    vel_basis = LagrangeBasis(r, node_set.ref_coords)
    deg_p = r - 1
    p_basis = LagrangeBasis(deg_p, triangle_nodes(deg_p))
    base = mesh.base
    T, V, E = base.n_triangles, base.n_vertices, base.n_edges
    per_edge = deg_p - 1
    n_ploc = p_basis.n_nodes
    n_int = n_ploc - 3 - 3 * per_edge
    p_elem = np.empty((T, n_ploc), dtype=int)
    p_elem[:, :3] = base.triangles
    if per_edge:
        slots = assign_edge_slots(base, per_edge).reshape(T, 3 * per_edge)
        p_elem[:, 3:3 + 3 * per_edge] = V + slots
    if n_int:
        start = V + E * per_edge
        p_elem[:, 3 + 3 * per_edge:] = (
            start + n_int * np.arange(T)[:, None] + np.arange(n_int)[None, :])
    n_pressure = V + E * per_edge + T * n_int

    handler = DofHandler(mesh=mesh, r=r, placement=placement, nodes=node_set,
                         masters=masters, elem_nu=elem_nu, coupling=coupling,
                         vel_basis=vel_basis, p_basis=p_basis,
                         p_elem_dofs=p_elem, n_pressure=n_pressure)
    handler._transfer = M
    return handler


def velocity_coupling(handler: DofHandler, K: int) -> np.ndarray:
    """Per-node 2x2 matrices mapping frame coefficients to reference values."""
    return handler.coupling[K]


# -- evaluation ---------------------------------------------------------------


def _gather_frame_coeffs(handler: DofHandler, coeffs, elems):
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1, 2)
    return coeffs[handler.nodes.elem_nodes[elems]]  # (Tc, n_loc, 2)


def velocity_fields_batch(handler: DofHandler, coeffs, ref_pts,
                          elems=None, with_grad: bool = True):
    """Velocity values (T, Q, 3) and surface gradients (T, Q, 3, 3)."""
    mesh = handler.mesh
    if elems is None:
        elems = np.arange(mesh.n_triangles)
    data = mesh.eval_maps(ref_pts, elems=elems, nderiv=2 if with_grad else 1)
    pack = metric_pack(data["J"], data.get("dJ"))
    phi = handler.vel_basis.eval(ref_pts)
    gv = _gather_frame_coeffs(handler, coeffs, elems)
    chat = np.einsum("tixy,tiy->tix", handler.coupling[elems], gv)
    vhat = np.einsum("iq,tix->tqx", phi, chat)
    vals = np.einsum("tqcx,tqx->tqc", pack["P"], vhat)
    if not with_grad:
        return vals, None
    dphi = handler.vel_basis.grad(ref_pts)
    dvhat = np.einsum("iqb,tix->tqxb", dphi, chat)
    D = (np.einsum("tqcxb,tqx->tqcb", pack["dP"], vhat)
         + np.einsum("tqcx,tqxb->tqcb", pack["P"], dvhat))
    grads = np.einsum("tqcb,tqbj->tqcj", D, pack["GiJt"])
    return vals, grads


def velocity_shape_data(handler: DofHandler, pack, ref_pts, elems):
    """Per-dof shape values and gradients for assembly.

    Returns (vals, grads) with vals (Tc, Q, n_loc, 2, 3) and grads
    (Tc, Q, n_loc, 2, 3, 3); the second-to-last axes pair (slot, frame
    component) indexes the element's local dofs.
    """
    phi = handler.vel_basis.eval(ref_pts)
    dphi = handler.vel_basis.grad(ref_pts)
    W = handler.coupling[elems]
    PW = np.einsum("tqcx,tixy->tqicy", pack["P"], W)
    dPW = np.einsum("tqcxb,tixy->tqicyb", pack["dP"], W)
    vals = np.einsum("iq,tqicy->tqiyc", phi, PW)
    D = (np.einsum("iqb,tqicy->tqiycb", dphi, PW)
         + np.einsum("iq,tqicyb->tqiycb", phi, dPW))
    grads = np.einsum("tqiycb,tqbj->tqiycj", D, pack["GiJt"])
    return vals, grads


def evaluate_velocity(handler: DofHandler, coeffs, K: int, xhat):
    """Value and surface gradient of the velocity field at one element point."""
    ref = np.asarray(xhat, dtype=float).reshape(1, 2)
    vals, grads = velocity_fields_batch(handler, coeffs, ref,
                                        elems=np.array([int(K)]))
    return vals[0, 0], grads[0, 0]


def interpolate_velocity(handler: DofHandler, oracle, u) -> np.ndarray:
    """Nodal interpolant: frame coefficients of the pulled-back exact field.

    u maps batches of surface points (n, 3) to tangential vectors (n, 3).
    The nodal value is the inverse closest-point Piola transform of u
    taken with respect to each node's master element.
    """
    x = handler.nodes.positions
    p, d, nu, H, _ = oracle.tube_data(x, check_tube=True)
    _, _, L_inv = piola_pair_from_data(d, nu, H, handler.masters.nu_ref)
    breve = np.einsum("nij,nj->ni", L_inv, u(p))
    g = np.einsum("nic,ni->nc", handler.masters.frames, breve)
    return g.ravel()


def pressure_fields_batch(handler: DofHandler, coeffs, ref_pts,
                          elems=None, with_grad: bool = True):
    """Pressure values (T, Q) and surface gradients (T, Q, 3)."""
    mesh = handler.mesh
    if elems is None:
        elems = np.arange(mesh.n_triangles)
    coeffs = np.asarray(coeffs, dtype=float)
    local = coeffs[handler.p_elem_dofs[elems]]  # (Tc, n_ploc)
    psi = handler.p_basis.eval(ref_pts)
    vals = np.einsum("pq,tp->tq", psi, local)
    if not with_grad:
        return vals, None
    data = mesh.eval_maps(ref_pts, elems=elems, nderiv=1)
    pack = metric_pack(data["J"])
    dpsi = handler.p_basis.grad(ref_pts)
    dq = np.einsum("pqb,tp->tqb", dpsi, local)
    grads = np.einsum("tqbc,tqb->tqc", pack["GiJt"], dq)
    return vals, grads


def evaluate_pressure(handler: DofHandler, coeffs, K: int, xhat):
    """Value and surface gradient of the pressure field at one element point."""
    ref = np.asarray(xhat, dtype=float).reshape(1, 2)
    vals, grads = pressure_fields_batch(handler, coeffs, ref,
                                        elems=np.array([int(K)]))
    return float(vals[0, 0]), grads[0, 0]


def pressure_node_positions(handler: DofHandler) -> np.ndarray:
    """Positions of the global pressure nodes on the curved surface."""
    pos = np.empty((handler.n_pressure, 3))
    vals = handler.mesh.eval_maps(handler.p_basis.nodes, nderiv=0)["x"]
    pos[handler.p_elem_dofs.ravel()] = vals.reshape(-1, 3)
    return pos


def interpolate_pressure(handler: DofHandler, oracle, p) -> np.ndarray:
    """Nodal interpolant of a scalar surface field (via its extension)."""
    pos = pressure_node_positions(handler)
    proj, _, _ = oracle.project(pos, check_tube=True)
    return np.asarray(p(proj), dtype=float)
