"""Error norms on the discrete surface, convergence rates, file outputs.

The energy error is the broken H1 seminorm of the difference between
the discrete velocity and the pulled-back exact velocity plus the L2
pressure error, both measured on the curved mesh; the velocity L2
error is measured there as well.  The pulled-back velocity gradient is
obtained by finite differences of its composition with the element
maps, which is exact up to ~1e-12 and independent of the machinery it
checks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientData
from .manufactured import ExactSolution
from .meshing import HighOrderMesh
from .quadrature import triangle_quadrature
from .spaces import DofHandler, pressure_fields_batch, velocity_fields_batch
from .transforms import metric_pack, piola_pair_from_data

_CHUNK = 256
_REF_STEP = 1e-3

CSV_HEADER = ["level", "h", "dofs", "energy_error", "l2_error",
              "energy_eoc", "l2_eoc"]


@dataclass
class ConvergenceRecord:
    level: int
    h: float
    dofs: int
    energy_error: float      # broken H1 seminorm + pressure L2
    l2_error: float          # velocity L2
    solve_time: float = 0.0
    h1_seminorm: float = 0.0
    pressure_l2: float = 0.0


def pulled_back_velocity(exact: ExactSolution, x, nu_h):
    """Inverse closest-point Piola transform of the exact velocity."""
    shape = x.shape[:-1]
    xf = x.reshape(-1, 3)
    p, d, nu, H, _ = exact.oracle.tube_data(xf, check_tube=True)
    _, _, L_inv = piola_pair_from_data(d, nu, H, nu_h.reshape(-1, 3))
    return np.einsum("nij,nj->ni", L_inv, exact.u(p)).reshape(*shape, 3)


def _breve_gradient(mesh, exact, qpts, elems, GiJt):
    """Surface gradient of the pulled-back velocity via reference FD."""
    offs = np.array([-2.0, -1.0, 1.0, 2.0]) * _REF_STEP
    D = np.empty((len(elems), len(qpts), 3, 2))
    for b in range(2):
        samples = []
        for off in offs:
            shifted = qpts.copy()
            shifted[:, b] += off
            geo = mesh.eval_maps(shifted, elems=elems, nderiv=1)
            pack = metric_pack(geo["J"])
            samples.append(pulled_back_velocity(exact, geo["x"],
                                                pack["nu_h"]))
        D[..., b] = (samples[0] - 8.0 * samples[1] + 8.0 * samples[2]
                     - samples[3]) / (12.0 * _REF_STEP)
    return np.einsum("tqcb,tqbj->tqcj", D, GiJt)


def error_norms(mesh: HighOrderMesh, handler: DofHandler, u_coeffs, p_coeffs,
                exact: ExactSolution, quad_degree=None, level: int = 0,
                solve_time: float = 0.0) -> ConvergenceRecord:
    """Energy and L2 errors of a discrete solution against the exact one."""
    if quad_degree is None:
        quad_degree = 2 * handler.r + 4
    rule = triangle_quadrature(quad_degree)
    qpts, qw = rule.points, rule.weights

    h1_sq = l2_sq = p_sq = p_lin = area = 0.0
    T = mesh.n_triangles
    for a in range(0, T, _CHUNK):
        elems = np.arange(a, min(a + _CHUNK, T))
        geo = mesh.eval_maps(qpts, elems=elems, nderiv=1)
        pack = metric_pack(geo["J"])
        wq = qw[None, :] * pack["sqrt_g"]

        uh, guh = velocity_fields_batch(handler, u_coeffs, qpts, elems=elems)
        ph, _ = pressure_fields_batch(handler, p_coeffs, qpts, elems=elems,
                                      with_grad=False)
        breve = pulled_back_velocity(exact, geo["x"], pack["nu_h"])
        gbreve = _breve_gradient(mesh, exact, qpts, elems, pack["GiJt"])
        pe = exact.p(exact.oracle.project(
            geo["x"].reshape(-1, 3))[0]).reshape(ph.shape)

        l2_sq += float(np.einsum("tq,tqc,tqc->", wq, breve - uh, breve - uh))
        dg = gbreve - guh
        h1_sq += float(np.einsum("tq,tqcj,tqcj->", wq, dg, dg))
        dp = pe - ph
        p_sq += float(np.einsum("tq,tq,tq->", wq, dp, dp))
        p_lin += float(np.einsum("tq,tq->", wq, dp))
        area += float(wq.sum())

    p_l2 = float(np.sqrt(max(p_sq - p_lin**2 / area, 0.0)))
    h1 = float(np.sqrt(h1_sq))
    return ConvergenceRecord(
        level=level, h=mesh.h_max,
        dofs=handler.n_velocity + handler.n_pressure,
        energy_error=h1 + p_l2,
        l2_error=float(np.sqrt(l2_sq)),
        solve_time=solve_time, h1_seminorm=h1, pressure_l2=p_l2)


def rates(errors, hs):
    """Convergence rates from successive (error, h) pairs."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(errors) < 2 or len(hs) != len(errors):
        raise InsufficientData("need at least two (error, h) pairs")
    if np.any(np.isclose(hs[:-1], hs[1:])):
        raise InsufficientData("mesh sizes must be distinct")
    vals = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    return [float(v) for v in vals]


def eoc(records):
    """(energy, l2) rate pairs between successive refinement records."""
    if len(records) < 2:
        raise InsufficientData("need at least two records")
    hs = [r.h for r in records]
    e = rates([r.energy_error for r in records], hs)
    l = rates([r.l2_error for r in records], hs)
    return list(zip(e, l))


def write_outputs(records, path, fmt: str = "csv"):
    """Write records (with derived rates) as CSV or JSON."""
    if fmt == "csv":
        _write_csv(records, path)
    elif fmt == "json":
        _write_json(records, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _rate_columns(records):
    if len(records) < 2:
        return [None] * len(records), [None] * len(records)
    pairs = eoc(records)
    energy = [None] + [p[0] for p in pairs]
    l2 = [None] + [p[1] for p in pairs]
    return energy, l2


def _write_csv(records, path):
    energy_eoc, l2_eoc = _rate_columns(records)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec, er, lr in zip(records, energy_eoc, l2_eoc):
            writer.writerow([rec.level, repr(rec.h), rec.dofs,
                             repr(rec.energy_error), repr(rec.l2_error),
                             "" if er is None else repr(er),
                             "" if lr is None else repr(lr)])


def _write_json(records, path):
    energy_eoc, l2_eoc = _rate_columns(records)
    payload = {
        "records": [asdict(r) for r in records],
        "energy_eoc": energy_eoc,
        "l2_eoc": l2_eoc,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_records_json(path):
    with open(path) as fh:
        payload = json.load(fh)
    return [ConvergenceRecord(**rec) for rec in payload["records"]]
