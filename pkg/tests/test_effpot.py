import numpy as np
import pytest

from relbind.effpot import (compute_ediag, compute_pair_potential, export_table_csv,
                            radial_pair_potential, veff_assemble)
from relbind.model import CutoffProfile, Grid, IRViolationError, ModelParams

from conftest import make_params

SHARP01 = CutoffProfile("sharp-flat", Lambda=1.0, sigma_floor=0.1)
SHARP0 = CutoffProfile("sharp-flat", Lambda=1.0, sigma_floor=0.0)


def test_w0_d3_analytic():
    tab = compute_pair_potential(SHARP0, SHARP0, Grid(3, 64, 192.0))
    assert tab.w0 == pytest.approx(-1.0 / (4 * np.pi ** 2), rel=1e-3)


def test_w0_d1_analytic():
    tab = compute_pair_potential(SHARP01, SHARP01, Grid(1, 16384, 16384.0))
    assert tab.w0 == pytest.approx(-np.log(10.0) / np.pi, rel=1e-3)


def test_zero_profile_gives_zero_table():
    zero = CutoffProfile("sharp-flat", Lambda=1.0, scale=0.0)
    tab = compute_pair_potential(zero, SHARP01, Grid(1, 64, 20.0))
    assert np.all(tab.values == 0.0)


def test_d1_sigma0_is_error_path():
    with pytest.raises(IRViolationError):
        compute_pair_potential(SHARP0, SHARP0, Grid(1, 64, 20.0))


def test_table_structure_invariants():
    g = Grid(1, 256, 40.0)
    tab = compute_pair_potential(SHARP01, SHARP01, g)
    vals = tab.values
    assert tab.w0 < 0
    assert np.all(vals >= tab.w0)
    assert vals.flat[0] == tab.w0
    # evenness: W[q] == W[-q mod n] exactly
    assert np.array_equal(vals, np.roll(vals[::-1], 1))


def test_edge_decay_d1_large_box():
    # the sharp sigma-edge gives W a slow tail; the Riemann-Lebesgue witness
    # needs a box much larger than 1/sigma
    g = Grid(1, 4096, 400.0)
    tab = compute_pair_potential(SHARP01, SHARP01, g)
    assert abs(tab.values[g.n // 2]) <= 0.1 * abs(tab.w0)


def test_veff_edge_decay_d3():
    g = Grid(3, 64, 40.0)
    tab = compute_pair_potential(SHARP0, SHARP0, g)
    edge = tab.values[g.n // 2, g.n // 2, g.n // 2]
    assert abs(edge) <= 0.05 * abs(tab.w0)


def test_w0_resolution_convergence():
    # doubling n at fixed L only extends ultraviolet coverage beyond Lambda
    a = compute_pair_potential(SHARP01, SHARP01, Grid(1, 512, 80.0))
    b = compute_pair_potential(SHARP01, SHARP01, Grid(1, 1024, 80.0))
    assert a.w0 == b.w0
    # genuine refinement (halved dk): the sigma-edge error is O(dk)
    coarse = compute_pair_potential(SHARP01, SHARP01, Grid(1, 16384, 2048.0))
    fine = compute_pair_potential(SHARP01, SHARP01, Grid(1, 32768, 4096.0))
    assert coarse.w0 == pytest.approx(fine.w0, rel=0.01)


def test_ediag_values():
    g3 = Grid(3, 64, 192.0)
    p = ModelParams(d=3, N=2, masses=(1.0, 1.0), alpha=1.0, kappa=1.0, ir_cutoff=0.0,
                    profiles=(SHARP0,))
    ed = compute_ediag(p, g3)
    assert ed == pytest.approx(1.0 / (4 * np.pi ** 2), rel=1e-3)
    assert compute_ediag(p.with_alpha(0.0), g3) == 0.0
    assert compute_ediag(p.with_alpha(2.0), g3) == pytest.approx(4.0 * ed, rel=1e-12)


def test_veff_assemble_coincident_and_single():
    params = make_params(d=1, N=2, alpha=2.0)
    ax = Grid(1, 64, 40.0)
    veff = veff_assemble(params, ax)
    X = np.zeros((1, 2, 1))
    w0_rad = veff.radial[(0, 1)](np.array([0.0]))[0]
    assert veff.at_points(X)[0] == pytest.approx(4.0 * w0_rad, rel=1e-12)
    # config-grid array at coincidence equals alpha^2 * table W(0)
    g2 = Grid(2, 64, 40.0)
    arr = veff.config_array(g2)
    assert arr[0, 0] == pytest.approx(4.0 * veff.tables[(0, 1)].w0, rel=1e-12)
    assert np.min(arr) == pytest.approx(4.0 * veff.tables[(0, 1)].w0, rel=1e-12)

    single = veff_assemble(make_params(d=1, N=1, alpha=2.0), ax)
    assert np.all(single.at_points(np.zeros((3, 1, 1))) == 0.0)
    assert single.bound == 0.0


def test_radial_evaluator_matches_grid_table():
    # the quadrature route reproduces the fine-grid FFT route
    g = Grid(1, 8192, 1024.0)
    tab = compute_pair_potential(SHARP01, SHARP01, g)
    w_of_r = radial_pair_potential(SHARP01, SHARP01, 1, r_max=60.0)
    disp = g.displacement_values()
    for q in (0, 8, 40, 160, 400):
        r = abs(disp[q])
        assert tab.values[q] == pytest.approx(w_of_r(np.array([r]))[0],
                                              abs=0.02 * abs(tab.w0))


def test_csv_export(tmp_path):
    tab = compute_pair_potential(SHARP01, SHARP01, Grid(1, 16, 10.0))
    path = tmp_path / "w.csv"
    export_table_csv(tab, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x0,W"
    assert len(lines) == 17
