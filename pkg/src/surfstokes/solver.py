"""Direct solve of the saddle-point system and inf-sup constant estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SaddleSystem
from .errors import EigensolveFailure, SingularSystem, SolverDivergence


@dataclass
class SaddleSolution:
    u: np.ndarray
    p: np.ndarray
    multiplier: float
    residual: float


def _kkt_matrix(system: SaddleSystem):
    mcol = sp.csr_matrix(system.m.reshape(-1, 1))
    return sp.bmat([[system.A, system.B.T, None],
                    [system.B, None, mcol],
                    [None, mcol.T, None]], format="csc")


def _check_residual(system, u, p, lam):
    K = _kkt_matrix(system)
    rhs = np.concatenate([system.fvec, system.gvec, [0.0]])
    x = np.concatenate([u, p, [lam]])
    scale = max(np.linalg.norm(rhs), 1.0)
    return K, rhs, x, float(np.linalg.norm(K @ x - rhs) / scale)


_DIRECT_A_LIMIT = 80_000


def _a_block_solver(A):
    """Solver for the SPD velocity block: sparse LU when small enough,
    AMG-preconditioned CG (to near machine precision) otherwise."""
    n = A.shape[0]
    if n <= _DIRECT_A_LIMIT:
        try:
            lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A",
                           options=dict(SymmetricMode=True,
                                        DiagPivotThresh=1e-3))
        except RuntimeError as exc:
            raise SingularSystem(f"A factorization failed: {exc}") from exc
        return lu.solve
    import pyamg

    # pyamg estimates spectral radii with randomized Lanczos; pin the
    # global RNG around setup so repeated solves are bit-identical
    state = np.random.get_state()
    np.random.seed(171717)
    try:
        ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A),
                                               symmetry="hermitian",
                                               max_coarse=500)
        M = ml.aspreconditioner(cycle="V")
    finally:
        np.random.set_state(state)
    Acsr = sp.csr_matrix(A)

    def solve(b):
        try:
            x, info = spla.cg(Acsr, b, rtol=1e-13, atol=0.0, maxiter=400,
                              M=M)
        except TypeError:  # older scipy spells the tolerance 'tol'
            x, info = spla.cg(Acsr, b, tol=1e-13, atol=0.0, maxiter=400,
                              M=M)
        if info != 0:
            raise SolverDivergence(f"inner CG on A stalled (info={info})")
        return x

    return solve


def _solve_schur(system: SaddleSystem) -> SaddleSolution:
    """Pressure-Schur solve: eliminate the SPD A block, then projected CG
    on S = B A^{-1} B^T.  S has the constant pressure as (near-)kernel;
    the multiplier shifts the right side into range(S), CG runs deflated
    against constants, and the zero-mean constraint fixes the additive
    constant afterwards.  Deterministic: fixed operations and stopping
    rule, no randomness.
    """
    a_solve = _a_block_solver(system.A)

    B = system.B
    m = system.m
    n_p = system.n_pressure
    ones = np.ones(n_p)

    def deflate(q):
        return q - (q.sum() / n_p) * ones

    def schur(q):
        return B @ a_solve(B.T @ q)

    b = B @ a_solve(system.fvec) - system.gvec
    lam = -float(b.sum()) / float(m.sum())
    b = deflate(b + lam * m)

    # precondition with the pressure mass (spectrally equivalent to the
    # Schur complement for this inf-sup stable pair); fall back to a
    # Jacobi surrogate built from B and diag(A) when Mp is absent
    if system.Mp is not None:
        mpLU = spla.splu(sp.csc_matrix(system.Mp),
                         permc_spec="MMD_AT_PLUS_A",
                         options=dict(SymmetricMode=True))
        precond = mpLU.solve
    else:
        dA = system.A.diagonal()
        diag_S = np.asarray(B.multiply(B) @ (1.0 / dA)).ravel()
        diag_S[diag_S <= 0] = diag_S[diag_S > 0].min()
        precond = lambda q: q / diag_S

    p = np.zeros(n_p)
    r = b.copy()
    z = deflate(precond(r))
    d = z.copy()
    rz = float(r @ z)
    scale = max(np.sqrt(abs(float(b @ precond(b)))), 1e-300)
    for _ in range(500):
        if np.sqrt(max(rz, 0.0)) <= 1e-13 * scale:
            break
        Sd = schur(d)
        alpha = rz / float(d @ Sd)
        p += alpha * d
        r -= alpha * Sd
        z = deflate(precond(r))
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    else:
        raise SolverDivergence("Schur CG did not converge in 500 iterations")
    p -= (m @ p) / float(m.sum()) * ones
    u = a_solve(system.fvec - B.T @ p)
    return SaddleSolution(u=u, p=p, multiplier=lam, residual=np.nan)


def _solve_direct(system: SaddleSystem) -> SaddleSolution:
    K = _kkt_matrix(system)
    rhs = np.concatenate([system.fvec, system.gvec, [0.0]])
    try:
        lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A",
                       options=dict(SymmetricMode=True,
                                    DiagPivotThresh=1e-3))
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    x = lu.solve(rhs)
    scale = max(np.linalg.norm(rhs), 1.0)
    for _ in range(3):
        residual = np.linalg.norm(K @ x - rhs) / scale
        if residual <= 1e-12:
            break
        x = x + lu.solve(rhs - K @ x)
    n_v, n_p = system.n_velocity, system.n_pressure
    return SaddleSolution(u=x[:n_v], p=x[n_v:n_v + n_p],
                          multiplier=float(x[-1]), residual=np.nan)


def solve_saddle(system: SaddleSystem) -> SaddleSolution:
    """Solve [[A, B^T, 0], [B, 0, m], [0, m^T, 0]] [u, p, lam] = [f, g, 0].

    The SPD A block is eliminated and the pressure Schur complement is
    solved by projected CG; if that stalls, a sparse LU of the full
    system is used instead.  Either way the result is checked against
    the full system to a relative residual of 1e-10 and the zero-mean
    pressure constraint holds through the multiplier row.  All steps
    are deterministic for fixed inputs.
    """
    try:
        sol = _solve_schur(system)
    except SolverDivergence:
        sol = None
    if sol is not None:
        K, rhs, x, residual = _check_residual(system, sol.u, sol.p,
                                              sol.multiplier)
        if residual <= 1e-10:
            return SaddleSolution(u=sol.u, p=sol.p,
                                  multiplier=sol.multiplier,
                                  residual=residual)
    sol = _solve_direct(system)
    _, _, _, residual = _check_residual(system, sol.u, sol.p, sol.multiplier)
    if not np.isfinite(residual) or residual > 1e-10:
        raise SolverDivergence(f"relative residual {residual:.3e} > 1e-10")
    return SaddleSolution(u=sol.u, p=sol.p, multiplier=sol.multiplier,
                          residual=residual)


def estimate_infsup(system: SaddleSystem, h1_matrix, pressure_mass) -> float:
    """Discrete inf-sup constant of the velocity-pressure pair.

    beta is the square root of the smallest nonzero eigenvalue of the
    pressure Schur complement B H^{-1} B^T measured against the
    pressure mass matrix; the constant-pressure mode (eigenvalue zero)
    is discarded.
    """
    try:
        lu = spla.splu(sp.csc_matrix(h1_matrix), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise EigensolveFailure(f"H factorization failed: {exc}") from exc
    Bt = system.B.T.toarray()
    R = system.B @ lu.solve(Bt)
    R = 0.5 * (R + R.T)
    Mp = pressure_mass.toarray()
    try:
        eigvals = scipy.linalg.eigh(R, Mp, eigvals_only=True)
    except scipy.linalg.LinAlgError as exc:
        raise EigensolveFailure(str(exc)) from exc
    if len(eigvals) < 2 or eigvals[1] <= 0:
        raise EigensolveFailure("no positive eigenvalue after deflation")
    if abs(eigvals[0]) > 1e-6 * eigvals[1]:
        raise EigensolveFailure(
            f"constant-pressure mode not cleanly separated "
            f"({eigvals[0]:.3e} vs {eigvals[1]:.3e})")
    return float(np.sqrt(eigvals[1]))
