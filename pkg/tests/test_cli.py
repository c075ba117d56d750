import json

import numpy as np
import pytest

from surfstokes.cli import StudyConfig, build_parser, main, run_study
from surfstokes.meshing import build_icosphere_base, write_off
from surfstokes.postprocess import CSV_HEADER


def test_parser_defaults():
    args = build_parser().parse_args([])
    assert args.surface == "ellipsoid:1.1,1.2,1.3"
    assert args.r == 2 and args.k is None
    assert args.dofs == "gauss-lobatto"
    assert args.levels == (1, 4)


def test_levels_parsing():
    args = build_parser().parse_args(["--levels", "2:3"])
    assert args.levels == (2, 3)
    args = build_parser().parse_args(["--levels", "2"])
    assert args.levels == (2, 2)


def test_run_study_outputs_and_determinism(tmp_path):
    cfg = StudyConfig(levels=(0, 1), out=str(tmp_path / "a"))
    recs = run_study(cfg)
    assert len(recs) == 2
    csv_a = (tmp_path / "a" / "study_r2_k2_gauss_lobatto.csv").read_bytes()
    assert csv_a.decode().splitlines()[0] == ",".join(CSV_HEADER)
    json_path = tmp_path / "a" / "study_r2_k2_gauss_lobatto.json"
    payload = json.loads(json_path.read_text())
    assert len(payload["records"]) == 2
    assert payload["records"][0]["level"] == 0

    cfg2 = StudyConfig(levels=(0, 1), out=str(tmp_path / "b"))
    run_study(cfg2)
    csv_b = (tmp_path / "b" / "study_r2_k2_gauss_lobatto.csv").read_bytes()
    assert csv_a == csv_b


def test_cli_main_and_base_mesh(tmp_path, unit_sphere):
    off = tmp_path / "ico.off"
    write_off(off, build_icosphere_base(unit_sphere, 0))
    code = main(["--surface", "sphere:1", "--levels", "1:1",
                 "--base-mesh", str(off), "--out", str(tmp_path / "run")])
    assert code == 0
    assert (tmp_path / "run" / "study_r2_k2_gauss_lobatto.csv").exists()


def test_cli_error_exit():
    assert main(["--surface", "torus:1,2", "--levels", "0:0"]) == 1


def test_diagnostics_output(tmp_path):
    cfg = StudyConfig(surface="sphere:1", levels=(0, 0),
                      out=str(tmp_path / "d"), diagnostics=True)
    run_study(cfg)
    diag = json.loads(
        (tmp_path / "d" / "diagnostics_r2_k2_gauss_lobatto.json")
        .read_text())
    assert diag[0]["level"] == 0
    assert diag[0]["beta_h"] > 0
    assert diag[0]["conormal_jump_rel"] <= 1e-9
