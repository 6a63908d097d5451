import csv
import json

import numpy as np
import pytest
import yaml

from crossdiff import cli
from crossdiff.config import ConfigError, build, preset_names, resolve
from crossdiff.experiments import catalog
from crossdiff.writers import diagnostics_header, read_vtk_cell_data

SMALL_1D = {
    "name": "small", "domain": [[0, 1]], "cells": [16], "dt": 0.0078125,
    "final_time": 0.0625, "matrix": [[0, 0.2, 1], [0.2, 0, 0.1], [1, 0.1, 0]],
    "astar": 0.1, "initial": "smooth", "reference": "finest",
}
SMALL_2D = {
    "name": "small2d", "domain": [[0, 4], [0, 2]], "cells": [6, 4], "dt": 0.125,
    "final_time": 0.5, "matrix": [[0, 0, 1], [0, 0, 0.1], [1, 0.1, 0]], "astar": 0.1,
    "initial": {"boxes": [[[[0, 2], [0, 1]]], [[[2, 4], [1, 2]]], []], "fill": 2},
    "reaction": {"forward_rate": 1000, "backward_rate": 1}, "reference": "none",
}


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_golden_headers():
    assert diagnostics_header(3) == ["step", "t", "entropy", "relative_entropy",
                                     "dissipation", "mass_1", "mass_2", "mass_3",
                                     "newton_iterations", "path_length"]


def test_every_case_has_preset():
    assert set(preset_names()) == set(catalog())
    for name in preset_names():
        cfg = resolve(name)
        assert cfg.case.name == name


def test_run_1d(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["run", "--config", str(write(tmp_path, SMALL_1D)), "--out", str(out),
                     "--stride", "4"])
    assert code == 0
    rows = read_csv(out / "diagnostics.csv")
    assert rows[0] == diagnostics_header(3)
    assert len(rows) == 1 + 9
    E = [float(r[2]) for r in rows[1:]]
    assert all(b <= a + 1e-10 for a, b in zip(E, E[1:]))
    snaps = sorted(p.name for p in out.glob("snapshot_*.csv"))
    assert snaps == ["snapshot_000000.csv", "snapshot_000004.csv", "snapshot_000008.csv"]
    snap = read_csv(out / "snapshot_000008.csv")
    assert snap[0] == ["x", "u_1", "u_2", "u_3"] and len(snap) == 17
    summary = json.loads((out / "summary.json").read_text())
    assert summary["format"] == "crossdiff-summary" and summary["version"] == 1
    assert summary["passed"] and summary["status"] == "ok"
    assert set(summary["invariants"]) >= {"simplex", "mass", "entropy", "positivity"}


def test_run_2d_vtk(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(write(tmp_path, SMALL_2D)),
                     "--out", str(out), "--stride", "2"]) == 0
    text = (out / "snapshot_000004.vtk").read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 3.0"
    assert text[2:8] == ["ASCII", "DATASET STRUCTURED_POINTS", "DIMENSIONS 7 5 1",
                         "ORIGIN 0.0 0.0 0", "SPACING 0.6666666666666666 0.5 1",
                         "CELL_DATA 24"]
    data = read_vtk_cell_data(out / "snapshot_000004.vtk")
    assert set(data) == {"u_1", "u_2", "u_3"}
    total = data["u_1"] + data["u_2"] + data["u_3"]
    assert np.allclose(total, 1.0, atol=1e-15)
    rows = read_csv(out / "diagnostics.csv")
    rel = [float(r[3]) for r in rows[1:]]
    assert all(b <= a + 1e-8 for a, b in zip(rel, rel[1:]))


def test_reproducible_bit_stable(tmp_path):
    cfg = write(tmp_path, SMALL_1D)
    blobs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out),
                         "--reproducible", "--seed", "9"]) == 0
        blobs.append((out / "diagnostics.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_invalid_matrix_no_output(tmp_path, capsys):
    bad = dict(SMALL_1D, matrix=[[0, 1, 0.5], [0.2, 0, 1], [0.5, 1, 0]])
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(write(tmp_path, bad)), "--out", str(out)]) == 2
    assert not out.exists()
    assert "symmetric" in capsys.readouterr().err


@pytest.mark.parametrize("patch", [
    {"matrix": [[0, -1, 0.5], [-1, 0, 1], [0.5, 1, 0]]},
    {"cells": [16, 4]},
    {"dt": -1.0},
    {"astar": 0.0},
    {"initial": "bumpy"},
    {"unknown_key": 1},
    {"dt": 1.0},
    {"reaction": {"forward_rate": 1, "backward_rate": 1}, "matrix": [[0, 1], [1, 0]]},
])
def test_config_errors(tmp_path, patch):
    data = dict(SMALL_1D, **patch)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(write(tmp_path, data)), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "none.yaml")]) == 2


def test_bad_stride(tmp_path):
    assert cli.main(["run", "--case", "A_reg_smooth", "--stride", "0",
                     "--out", str(tmp_path / "o")]) == 2


def test_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--config", str(write(tmp_path, SMALL_1D)),
                     "--out", str(blocker / "sub")]) == 4


def test_stall_exit_code(tmp_path, monkeypatch):
    from crossdiff import solver

    def fail(self, U_old, dt, lam=1.0, mu=0.0, seed=None):
        return solver.NewtonResult(U_old, False, 1, float("nan"), "forced")

    monkeypatch.setattr(solver.StepSolver, "newton", fail)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(write(tmp_path, SMALL_1D)),
                     "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "stall"


def test_convergence_and_sweep(tmp_path):
    data = dict(SMALL_1D, convergence={"grid_sizes": [8, 16], "reference_size": 64},
                sweep={"cells": 8, "astar": [0.05, 0.5, 5.0], "reference_size": 64})
    cfg = write(tmp_path, data)
    assert cli.main(["convergence", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 0
    rows = read_csv(tmp_path / "c" / "eoc.csv")
    assert rows[0] == ["cells", "error", "eoc"] and len(rows) == 3
    assert rows[1][2] == "nan" and float(rows[2][1]) < float(rows[1][1])
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    rows = read_csv(tmp_path / "s" / "astar_sweep.csv")
    assert rows[0] == ["astar", "error", "ratio"] and len(rows) == 4
    assert min(float(r[2]) for r in rows[1:]) == 1.0


def test_convergence_needs_reference(tmp_path):
    data = dict(SMALL_1D, convergence={"grid_sizes": [8, 16], "reference_size": 24})
    assert cli.main(["convergence", "--config", str(write(tmp_path, data)),
                     "--out", str(tmp_path / "c")]) == 2
    assert not (tmp_path / "c").exists()


def test_validate_reaction(tmp_path, capsys):
    assert cli.main(["validate-reaction", "--samples", "2000", "--seed", "3",
                     "--out", str(tmp_path / "v")]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
    summary = json.loads((tmp_path / "v" / "summary.json").read_text())
    assert summary["report"]["passed"]


def test_inline_astar_rule():
    cfg = build(dict(SMALL_1D, astar={"epsilon": 1e-3}))
    assert cfg.case.astar == 0.1  # eps h^2/dt is tiny, clamps to min a_ij
    with pytest.raises(ConfigError):
        build(dict(SMALL_1D, reference="closed_form"))


def test_preset_override(tmp_path):
    p = write(tmp_path, {"final_time": 0.125})
    cfg = resolve("A_reg_smooth", p)
    assert cfg.case.final_time == 0.125 and cfg.case.name == "A_reg_smooth"
    assert cfg.stride == 1024
