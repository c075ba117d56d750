"""Quadrature rules: collapsed Gauss on the reference triangle, Gauss-Lobatto on [0,1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedDegree


@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight rule on the reference triangle."""

    points: np.ndarray   # (Q, 2)
    weights: np.ndarray  # (Q,)
    exact_degree: int


@dataclass(frozen=True)
class LineRule:
    """Rule on [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree <= degree.

    Tensorized Gauss-Legendre under the Duffy map (u, v) -> (u, v(1-u)):
    a degree-d polynomial becomes degree d+1 in u and d in v, so n points
    per direction with 2n-1 >= d+1 suffice.
    """
    if degree < 0 or degree > 20:
        raise UnsupportedDegree(f"triangle quadrature degree {degree}")
    n = max(1, (degree + 3) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.stack([u.ravel(), (v * (1.0 - u)).ravel()], axis=1)
    wts = (wu * wv * (1.0 - u)).ravel()
    return QuadratureRule(points=pts, weights=wts, exact_degree=degree)


def gauss_lobatto_1d(n: int) -> LineRule:
    """(n)-point Gauss-Lobatto rule on [0, 1], exact to degree 2n-3."""
    if n < 2 or n > 8:
        raise UnsupportedDegree(f"Gauss-Lobatto size {n} (need 2..8)")
    if n == 2:
        nodes = np.array([-1.0, 1.0])
    else:
        # interior nodes are the roots of P'_{n-1}
        leg = np.polynomial.legendre.Legendre.basis(n - 1)
        nodes = np.concatenate([[-1.0], leg.deriv().roots(), [1.0]])
    Pn = np.polynomial.legendre.Legendre.basis(n - 1)(nodes)
    weights = 2.0 / (n * (n - 1) * Pn**2)
    return LineRule(nodes=0.5 * (nodes + 1.0), weights=0.5 * weights,
                    exact_degree=2 * n - 3)


def gauss_legendre_1d(n: int) -> LineRule:
    """n-point Gauss rule on [0, 1], exact to degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return LineRule(nodes=0.5 * (x + 1.0), weights=0.5 * w,
                    exact_degree=2 * n - 1)
