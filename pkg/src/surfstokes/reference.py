"""Reference-triangle node layouts and Lagrange basis machinery.

The reference triangle is {x >= 0, y >= 0, x + y <= 1} with local
vertices V0=(0,0), V1=(1,0), V2=(0,1).  Local edges are enumerated in
the fixed order (0,1), (0,2), (1,2); edge nodes are parameterized from
the lower to the higher local vertex.  All node families used here
(equispaced and Gauss-Lobatto edge parameters) are symmetric under
t -> 1-t, which is what lets two elements sharing an edge sample the
same physical points regardless of traversal direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = ((0, 1), (0, 2), (1, 2))


def monomial_exponents(degree: int) -> np.ndarray:
    """Exponent pairs (i, j) with i + j <= degree, graded order."""
    exps = [(i, j) for t in range(degree + 1) for i in range(t, -1, -1)
            for j in (t - i,)]
    return np.array(exps, dtype=int)


def _monomial_values(exps, pts):
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([x**i * y**j for i, j in exps], axis=0)


def _monomial_grads(exps, pts):
    x, y = pts[:, 0], pts[:, 1]
    out = np.zeros((len(exps), len(pts), 2))
    for k, (i, j) in enumerate(exps):
        if i > 0:
            out[k, :, 0] = i * x**(i - 1) * y**j
        if j > 0:
            out[k, :, 1] = j * x**i * y**(j - 1)
    return out


def _monomial_hessians(exps, pts):
    x, y = pts[:, 0], pts[:, 1]
    out = np.zeros((len(exps), len(pts), 2, 2))
    for k, (i, j) in enumerate(exps):
        if i > 1:
            out[k, :, 0, 0] = i * (i - 1) * x**(i - 2) * y**j
        if j > 1:
            out[k, :, 1, 1] = j * (j - 1) * x**i * y**(j - 2)
        if i > 0 and j > 0:
            out[k, :, 0, 1] = out[k, :, 1, 0] = i * j * x**(i - 1) * y**(j - 1)
    return out


def interior_lattice(degree: int) -> np.ndarray:
    """Equispaced strictly interior lattice points of the given degree."""
    pts = [(i / degree, j / degree)
           for i in range(1, degree) for j in range(1, degree - i)]
    return np.array(pts, dtype=float).reshape(-1, 2)


def triangle_nodes(degree: int, edge_params=None) -> np.ndarray:
    """Canonical node layout: vertices, then edge nodes, then interior.

    edge_params are the degree-1 interior parameters in (0, 1) used on
    every local edge (defaults to the equispaced i/degree); the interior
    always uses the equispaced lattice.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if edge_params is None:
        edge_params = np.arange(1, degree) / degree
    edge_params = np.asarray(edge_params, dtype=float)
    if len(edge_params) != degree - 1:
        raise ValueError("need degree-1 edge parameters")
    if degree >= 2 and not np.allclose(np.sort(1.0 - edge_params),
                                       np.sort(edge_params), atol=1e-14):
        raise ValueError("edge parameters must be symmetric under t -> 1-t")
    nodes = [VERTICES]
    for i, j in LOCAL_EDGES:
        a, b = VERTICES[i], VERTICES[j]
        nodes.append(a[None, :] + edge_params[:, None] * (b - a)[None, :])
    nodes.append(interior_lattice(degree))
    return np.concatenate([n for n in nodes if len(n)], axis=0)


@dataclass
class LagrangeBasis:
    """Scalar Lagrange basis on an arbitrary unisolvent triangle node set."""

    degree: int
    nodes: np.ndarray
    _coeffs: np.ndarray = field(init=False, repr=False)
    _exps: np.ndarray = field(init=False, repr=False)
    cond: float = field(init=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self._exps = monomial_exponents(self.degree)
        n = len(self._exps)
        if len(self.nodes) != n:
            raise ValueError(f"need {n} nodes for degree {self.degree}")
        V = _monomial_values(self._exps, self.nodes).T  # V[i, a] = m_a(x_i)
        self.cond = float(np.linalg.cond(V))
        # column a of _coeffs holds the monomial coefficients of L_a
        self._coeffs = np.linalg.inv(V)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def eval(self, pts):
        """Basis values, shape (n_nodes, n_pts)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.einsum("ma,mq->aq", self._coeffs,
                         _monomial_values(self._exps, pts))

    def grad(self, pts):
        """Basis gradients, shape (n_nodes, n_pts, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.einsum("ma,mqd->aqd", self._coeffs,
                         _monomial_grads(self._exps, pts))

    def hess(self, pts):
        """Basis second derivatives, shape (n_nodes, n_pts, 2, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.einsum("ma,mqde->aqde", self._coeffs,
                         _monomial_hessians(self._exps, pts))
