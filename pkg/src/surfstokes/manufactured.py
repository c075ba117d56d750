"""Manufactured solution on the exact surface.

The test velocity is the tangential projection of (-z^2, x, y) and the
test pressure is x y^3 + z.  The matching right-hand sides come from
applying the continuous operator: f = -Pi div Def u + grad p + u and
g = div u, all with respect to the surface.  Surface differential
operators act on the normal-constant extension and are evaluated by
fourth-order central differences with one Richardson extrapolation
(effective order six); the divergence of the deformation tensor nests
two such passes.  This keeps the oracle independent of any symbolic
curvature calculus at an accuracy floor of about 1e-8, far below the
discretization errors probed at desk scale.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import StokesData
from .errors import StepTooSmall
from .geometry import SurfaceOracle
from .transforms import area_ratio_from_data

_EYE3 = np.eye(3)
_FD_CHUNK = 2048


def _fd_jacobian(func, pts, step):
    """Richardson-extrapolated 4th-order Jacobian of an ambient function.

    func maps (n, 3) -> (n, m).  Returns (jac, disagreement) with jac of
    shape (n, m, 3) and disagreement the max abs difference between the
    two extrapolation levels (a cancellation indicator).
    """
    pts = np.atleast_2d(pts)
    n = len(pts)
    mults = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]) * step
    stencil = (pts[:, None, None, :]
               + mults[None, :, None, None] * _EYE3[None, None, :, :])
    vals = func(stencil.reshape(-1, 3))
    vals = vals.reshape(n, 6, 3, -1)  # (point, offset, direction, component)
    d_h = (vals[:, 0] - 8.0 * vals[:, 1] + 8.0 * vals[:, 4]
           - vals[:, 5]) / (12.0 * step)
    d_h2 = (vals[:, 1] - 8.0 * vals[:, 2] + 8.0 * vals[:, 3]
            - vals[:, 4]) / (6.0 * step)
    jac = (16.0 * d_h2 - d_h) / 15.0
    disagreement = float(np.max(np.abs(d_h2 - d_h))) if n else 0.0
    # (n, direction, component) -> (n, component, direction)
    return np.swapaxes(jac, 1, 2), disagreement


def _extension(oracle, fld):
    def ext(x):
        p, _, _ = oracle.project(np.atleast_2d(x), check_tube=True)
        return np.asarray(fld(p))
    return ext


def surface_gradient(oracle: SurfaceOracle, scalar, x, step=None):
    """Tangential gradient of a scalar surface field at on-surface points."""
    if step is None:
        step = 1e-2 * oracle.min_semi_axis
    x = np.atleast_2d(x)
    jac, _ = _fd_jacobian(lambda y: _extension(oracle, scalar)(y)[:, None],
                          x, step)
    grad = jac[:, 0, :]
    _, _, nu = oracle.project(x)
    return grad - np.einsum("ni,ni->n", grad, nu)[:, None] * nu


def surface_operators(oracle: SurfaceOracle, fld, x, step=None):
    """Tangential gradient, divergence and deformation of a vector field.

    fld maps surface points (n, 3) to vectors (n, 3); x must lie on the
    surface.  Returns {'grad_gamma': (n, 3, 3), 'div_gamma': (n,),
    'def_gamma': (n, 3, 3)}.
    """
    if step is None:
        step = 1e-2 * oracle.min_semi_axis
    x = np.atleast_2d(x)
    jac, _ = _fd_jacobian(_extension(oracle, fld), x, step)
    _, _, nu = oracle.project(x)
    Pi = _EYE3 - nu[:, :, None] * nu[:, None, :]
    grad = jac @ Pi
    sym = 0.5 * (grad + np.swapaxes(grad, 1, 2))
    return {
        "grad_gamma": grad,
        "div_gamma": np.einsum("ncc->n", grad),
        "def_gamma": Pi @ sym @ Pi,
    }


@dataclass
class ExactSolution:
    """Closed test problem: fields on the exact surface, batched callables."""

    oracle: SurfaceOracle
    u: Callable      # (n, 3) -> (n, 3), tangential
    p: Callable      # (n, 3) -> (n,)
    f: Callable      # (n, 3) -> (n, 3)
    g: Callable      # (n, 3) -> (n,)
    fd_step: float


def _chunked(fn, pts):
    out = [fn(pts[a:a + _FD_CHUNK])
           for a in range(0, len(pts), _FD_CHUNK)] or [fn(pts)]
    return np.concatenate(out, axis=0)


def build_exact_solution(oracle: SurfaceOracle,
                         fd_step: Optional[float] = None,
                         validate: bool = True) -> ExactSolution:
    """Wire the test fields and their exact right-hand sides."""
    if fd_step is None:
        fd_step = 1e-2 * oracle.min_semi_axis

    def u(y):
        y = np.atleast_2d(y)
        w = np.stack([-y[:, 2]**2, y[:, 0], y[:, 1]], axis=1)
        _, _, nu = oracle.project(y)
        return w - np.einsum("ni,ni->n", w, nu)[:, None] * nu

    def p(y):
        y = np.atleast_2d(y)
        return y[:, 0] * y[:, 1]**3 + y[:, 2]

    def def_field(y):
        return surface_operators(oracle, u, y, fd_step)["def_gamma"]

    def div_def(y):
        y = np.atleast_2d(y)
        ext = _extension(oracle, lambda z: def_field(z).reshape(len(z), 9))
        jac, _ = _fd_jacobian(ext, y, fd_step)
        jac = jac.reshape(len(y), 3, 3, 3)
        _, _, nu = oracle.project(y)
        Pi = _EYE3 - nu[:, :, None] * nu[:, None, :]
        return np.einsum("nijm,nmj->ni", jac, Pi)

    def f_raw(y):
        y = np.atleast_2d(y)
        _, _, nu = oracle.project(y)
        Pi = _EYE3 - nu[:, :, None] * nu[:, None, :]
        dd = div_def(y)
        gp = surface_gradient(oracle, p, y, fd_step)
        return -np.einsum("nij,nj->ni", Pi, dd) + gp + u(y)

    def g_raw(y):
        return surface_operators(oracle, u, y, fd_step)["div_gamma"]

    def f(y):
        return _chunked(f_raw, np.atleast_2d(y))

    def g(y):
        return _chunked(g_raw, np.atleast_2d(y))

    exact = ExactSolution(oracle=oracle, u=u, p=p, f=f, g=g, fd_step=fd_step)
    if validate:
        _validate_exact(exact)
    return exact


def _validate_exact(exact: ExactSolution, n_sample: int = 64):
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(n_sample, 3))
    pts, _, nu = exact.oracle.project(pts, check_tube=False)
    uv = exact.u(pts)
    tangency = np.max(np.abs(np.einsum("ni,ni->n", uv, nu)))
    if tangency > 1e-12:
        raise StepTooSmall(f"u not tangential (max u.nu = {tangency:.2e})")
    fv = exact.f(pts)
    gv = exact.g(pts)
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
        raise StepTooSmall("non-finite manufactured data")
    drift = f_consistency(exact, pts[:16])
    if drift > 1e-6:
        raise StepTooSmall(
            f"finite-difference cancellation: f drifts by {drift:.2e} "
            f"under step halving")


def f_consistency(exact: ExactSolution, pts) -> float:
    """Max change in f when the differentiation step is halved."""
    finer = build_exact_solution(exact.oracle, fd_step=0.5 * exact.fd_step,
                                 validate=False)
    return float(np.max(np.abs(exact.f(pts) - finer.f(pts))))


def manufactured_data(exact: ExactSolution) -> StokesData:
    """Quadrature-point data: f composed with the closest-point map and
    the divergence data scaled by the area ratio, with memoization so
    repeated assemblies over the same points are free."""
    oracle = exact.oracle
    cache_f: dict = {}
    cache_g: dict = {}

    def key_of(*arrays):
        h = hashlib.blake2b(digest_size=16)
        for a in arrays:
            h.update(np.ascontiguousarray(a).tobytes())
        return h.digest()

    def f_h(x):
        x = np.atleast_2d(x)
        key = key_of(x)
        if key not in cache_f:
            p, _, _ = oracle.project(x)
            if len(cache_f) > 512:
                cache_f.clear()
            cache_f[key] = exact.f(p)
        return cache_f[key]

    def g_h(x, nu_h):
        x = np.atleast_2d(x)
        key = key_of(x, nu_h)
        if key not in cache_g:
            p, d, nu, H, _ = oracle.tube_data(x)
            mu = area_ratio_from_data(d, nu, H, nu_h)
            if len(cache_g) > 512:
                cache_g.clear()
            cache_g[key] = mu * exact.g(p)
        return cache_g[key]

    return StokesData(f_h=f_h, g_h=g_h)
