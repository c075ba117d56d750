"""Batch driver for the convergence experiments.

Runs the manufactured-solution study over a range of refinement levels
and writes one CSV/JSON pair per (r, k, placement) configuration.  With
--diagnostics it also runs the geometric-decay, conformity-jump and
inf-sup probes.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import probes
from .assembly import assemble_norm_matrices, assemble_system
from .errors import SurfStokesError
from .geometry import surface_from_config
from .manufactured import build_exact_solution, manufactured_data
from .meshing import base_mesh_from_off, build_high_order_mesh, \
    build_icosphere_base, subdivide, BaseMesh, _orient_outward, \
    _validate_closed
from .postprocess import eoc, error_norms, write_outputs
from .solver import estimate_infsup, solve_saddle
from .spaces import build_dof_handler


@dataclass
class StudyConfig:
    surface: str = "ellipsoid:1.1,1.2,1.3"
    r: int = 2
    k: Optional[int] = None          # defaults to r (isoparametric)
    dofs: str = "gauss-lobatto"
    levels: tuple = (1, 4)
    quad_degree: Optional[int] = None
    out: str = "out"
    diagnostics: bool = False
    threads: int = 1
    base_mesh: Optional[str] = None

    def __post_init__(self):
        if self.k is None:
            self.k = self.r

    @property
    def placement(self) -> str:
        return self.dofs.replace("-", "_")

    @property
    def tag(self) -> str:
        return f"r{self.r}_k{self.k}_{self.placement}"


def _base_mesh(cfg: StudyConfig, oracle, level: int):
    if cfg.base_mesh is None:
        return build_icosphere_base(oracle, level)
    mesh = base_mesh_from_off(cfg.base_mesh, oracle)
    verts, tris = mesh.vertices, mesh.triangles
    for _ in range(level):
        verts, tris = subdivide(verts, tris)
        verts, _, _ = oracle.project(verts, check_tube=False)
    tris = _orient_outward(verts, tris, oracle)
    mesh = BaseMesh(verts, tris)
    _validate_closed(mesh)
    return mesh


def run_study(cfg: StudyConfig):
    """Run the refinement study; returns the list of convergence records."""
    oracle = surface_from_config(cfg.surface)
    exact = build_exact_solution(oracle)
    data = manufactured_data(exact)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = []
    diag = []
    lo, hi = cfg.levels
    for level in range(lo, hi + 1):
        t0 = time.perf_counter()
        base = _base_mesh(cfg, oracle, level)
        mesh = build_high_order_mesh(base, oracle, cfg.k)
        handler = build_dof_handler(mesh, cfg.r, cfg.placement)
        system = assemble_system(mesh, handler, data,
                                 quad_degree=cfg.quad_degree,
                                 threads=cfg.threads)
        sol = solve_saddle(system)
        elapsed = time.perf_counter() - t0
        rec = error_norms(mesh, handler, sol.u, sol.p, exact,
                          level=level, solve_time=elapsed)
        records.append(rec)
        print(f"level {level}: h={rec.h:.4f} dofs={rec.dofs} "
              f"energy={rec.energy_error:.6e} l2={rec.l2_error:.6e} "
              f"({elapsed:.1f}s)")
        if cfg.diagnostics:
            entry = {"level": level}
            entry.update(probes.geometric_decay(oracle, mesh))
            rng = np.random.default_rng(0)
            coeffs = rng.standard_normal(handler.n_velocity)
            jump, vnorm = probes.co_normal_jump(handler, coeffs)
            entry["conormal_jump_rel"] = jump / vnorm
            entry["nodal_conormal_max"] = probes.nodal_conormal_identity(
                handler, coeffs)
            entry["node_transfer_defect"] = probes.node_transfer_deviation(
                handler, oracle)
            if handler.n_velocity <= 6000:
                H, Mp = assemble_norm_matrices(mesh, handler)
                entry["beta_h"] = estimate_infsup(system, H, Mp)
            diag.append(entry)

    for pair in eoc(records) if len(records) > 1 else []:
        print(f"eoc: energy={pair[0]:.3f} l2={pair[1]:.3f}")
    write_outputs(records, out_dir / f"study_{cfg.tag}.csv", "csv")
    write_outputs(records, out_dir / f"study_{cfg.tag}.json", "json")
    if cfg.diagnostics:
        import json
        with open(out_dir / f"diagnostics_{cfg.tag}.json", "w") as fh:
            json.dump(diag, fh, indent=2)
            fh.write("\n")
    return records


def _parse_levels(text: str):
    lo, _, hi = text.partition(":")
    if not hi:
        lo = hi = text
    return int(lo), int(hi)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="surfstokes",
        description="Taylor-Hood surface Stokes convergence studies")
    ap.add_argument("--surface", default="ellipsoid:1.1,1.2,1.3",
                    help="sphere:R or ellipsoid:a,b,c")
    ap.add_argument("--r", type=int, default=2, choices=range(2, 5),
                    help="velocity polynomial degree")
    ap.add_argument("--k", type=int, default=None, choices=range(1, 6),
                    help="surface geometry degree (default: r)")
    ap.add_argument("--dofs", default="gauss-lobatto",
                    choices=["gauss-lobatto", "equispaced"],
                    help="edge degree-of-freedom placement")
    ap.add_argument("--levels", default="1:4", type=_parse_levels,
                    help="refinement range a:b (icosphere subdivisions)")
    ap.add_argument("--quad-degree", type=int, default=None,
                    help="assembly quadrature degree (default 2r+2)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--diagnostics", action="store_true",
                    help="also run geometry/conformity/inf-sup probes")
    ap.add_argument("--threads", type=int, default=1,
                    help="assembly thread count (results independent of it)")
    ap.add_argument("--base-mesh", default=None,
                    help="OFF file to use instead of the icosahedron")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = StudyConfig(surface=args.surface, r=args.r, k=args.k,
                      dofs=args.dofs, levels=args.levels,
                      quad_degree=args.quad_degree, out=args.out,
                      diagnostics=args.diagnostics, threads=args.threads,
                      base_mesh=args.base_mesh)
    try:
        run_study(cfg)
    except (SurfStokesError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
