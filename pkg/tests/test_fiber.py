import numpy as np
import pytest

from relbind.effpot import compute_pair_potential
from relbind.fiber import (build_fiber, default_p_samples, dispersion_scan,
                           fiber_ground_energy, fiber_ground_state,
                           subcluster_threshold)
from relbind.model import CutoffProfile, Grid, ModelError
from relbind.spectral import dense_ground_state, ground_state, localization_metrics

from conftest import make_params


def test_symbol_minimum_at_rest():
    grel = Grid(1, 64, 20.0)
    op = build_fiber([0.0], make_params(d=1, N=2), grel)
    assert float(np.min(op.symbol)) == 0.0
    res = ground_state(op, tol=1e-10)
    assert abs(res.eigenvalue) <= 1e-10


def test_moving_fiber_against_scalar_minimization():
    grel = Grid(1, 512, 60.0)
    op = build_fiber([3.0], make_params(d=1, N=2), grel)
    res = ground_state(op, tol=1e-9)
    # exact oracle: scalar minimization over the operator's own momentum lattice
    q = grel.axis_momenta
    oracle = np.min(np.sqrt((3.0 - q) ** 2 + 1) + np.sqrt(q ** 2 + 1) - 2.0)
    assert res.eigenvalue == pytest.approx(oracle, abs=1e-9)
    # and the continuum closed form within the grid tolerance
    assert res.eigenvalue == pytest.approx(np.sqrt(13.0) - 2.0, rel=1e-3)


def test_nyquist_edge_flagged():
    grel = Grid(1, 64, 20.0)
    op = build_fiber([grel.nyquist], make_params(d=1, N=2), grel)
    assert op.edge_sample
    op_in = build_fiber([0.5 * grel.nyquist], make_params(d=1, N=2), grel)
    assert not op_in.edge_sample


def test_dimension_checks():
    with pytest.raises(ModelError):
        build_fiber([0.0, 0.0], make_params(d=1, N=2), Grid(1, 32, 10.0))
    with pytest.raises(ModelError):
        build_fiber([0.0], make_params(d=1, N=3), Grid(1, 32, 10.0))
    with pytest.raises(ModelError):
        build_fiber([0.0], make_params(d=1, N=1), Grid(1, 32, 10.0))


def test_scan_requires_zero_sample():
    with pytest.raises(ModelError):
        dispersion_scan([[1.0]], make_params(d=1, N=2), Grid(1, 32, 10.0))


def test_single_sample_scan():
    curve = dispersion_scan([[0.0]], make_params(d=1, N=2), Grid(1, 64, 20.0))
    assert curve.modulus is None
    assert curve.monotone_ok


def test_closed_form_dispersion():
    grel = Grid(1, 512, 60.0)
    samples = default_p_samples(grel, 1, 9)
    curve = dispersion_scan(samples, make_params(d=1, N=2), grel, tol=1e-8)
    assert not curve.failures
    for p, e in zip(curve.P_samples, curve.energies):
        exact = np.sqrt(p[0] ** 2 + 4.0) - 2.0
        assert e == pytest.approx(exact, rel=5e-3, abs=1e-8)
    assert curve.monotone_ok


def test_dispersion_monotone_with_coupling():
    grel = Grid(1, 256, 30.0)
    samples = default_p_samples(grel, 1, 5)
    curve = dispersion_scan(samples, make_params(d=1, N=2, alpha=4.0), grel, tol=1e-8)
    assert curve.monotone_ok and not curve.failures


def test_modulus_stable_under_refinement():
    params = make_params(d=1, N=2, alpha=4.0)
    samples = [[0.0], [1.0], [2.0], [3.0]]
    m1 = dispersion_scan(samples, params, Grid(1, 512, 60.0), tol=1e-9).modulus
    m2 = dispersion_scan(samples, params, Grid(1, 1024, 120.0), tol=1e-9).modulus
    assert m1 == pytest.approx(m2, rel=0.2)


def test_fiber_ground_state_free_is_delocalized():
    grel = Grid(1, 128, 30.0)
    fgs = fiber_ground_state(0.0, make_params(d=1, N=2), grel)
    assert not fgs.localized
    assert fgs.participation_ratio == pytest.approx(grel.box_volume, rel=1e-6)


def test_fiber_ground_state_localizes():
    grel = Grid(1, 512, 30.0)
    params = make_params(d=1, N=2, alpha=16.0)
    fgs = fiber_ground_state(16.0, params, grel, tol=1e-9)
    assert fgs.localized
    met = localization_metrics(fgs.state, radii=(2.0,))
    assert met.mass_outside[2.0] < 0.05
    # dense-oracle eigenvector agrees
    op = build_fiber([0.0], params, grel)
    ev, vec = dense_ground_state(op)
    assert fgs.eigenvalue == pytest.approx(ev, abs=1e-8)


def test_rayleigh_floor_alpha_squared():
    grel = Grid(1, 256, 30.0)
    alpha = 8.0
    params = make_params(d=1, N=2, alpha=alpha)
    w0 = compute_pair_potential(params.profiles[0], params.profiles[1],
                                Grid(1, grel.n, grel.L)).w0
    fgs = fiber_ground_state(alpha, params, grel, tol=1e-9)
    assert fgs.eigenvalue >= alpha ** 2 * w0 - 1e-9


def test_alpha_squared_scaling_monotone():
    grel = Grid(1, 512, 30.0)
    w0 = compute_pair_potential(CutoffProfile("sharp-flat", 1.0, 0.1),
                                CutoffProfile("sharp-flat", 1.0, 0.1),
                                Grid(1, grel.n, grel.L)).w0
    ratios = []
    for alpha in (4.0, 8.0, 16.0):
        fgs = fiber_ground_state(alpha, make_params(d=1, N=2, alpha=alpha), grel, tol=1e-9)
        ratios.append(fgs.eigenvalue / alpha ** 2)
    # nonincreasing toward the table minimum
    assert all(b <= a + 1e-10 for a, b in zip(ratios, ratios[1:]))
    assert all(r >= w0 - 1e-9 for r in ratios)


def test_subadditivity_consistency_random_states():
    # <psi, U h0 U^-1 psi> <= <psi, (|p_1| + k(0)) psi> on the two-particle grid
    n, L = 32, 20.0
    params = make_params(d=1, N=2, alpha=2.0)
    ax = Grid(1, n, L)
    tab = compute_pair_potential(params.profiles[0], params.profiles[1], ax)
    k = ax.axis_momenta
    sym_lhs = (np.sqrt((k[:, None] - k[None, :]) ** 2 + 1.0) - 1.0
               + np.sqrt(k[None, :] ** 2 + 1.0) - 1.0)
    sym_rhs = (np.abs(k[:, None])
               + np.sqrt(k[None, :] ** 2 + 1.0) - 1.0
               + np.sqrt(k[None, :] ** 2 + 1.0) - 1.0)
    pos_to_disp = (np.arange(n) + n // 2) % n
    diag = 4.0 * tab.values[pos_to_disp][None, :]

    rng = np.random.Generator(np.random.Philox(17))
    for _ in range(20):
        psi = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        psi /= np.linalg.norm(psi)
        ft = np.fft.fft2(psi, norm="ortho")
        lhs = np.vdot(ft, sym_lhs * ft).real + np.vdot(psi, diag * psi).real
        rhs = np.vdot(ft, sym_rhs * ft).real + np.vdot(psi, diag * psi).real
        assert lhs <= rhs + 1e-10


def test_fiber_ground_energy_subsets():
    params = make_params(d=1, N=3, alpha=2.0)
    e_pair = fiber_ground_energy(params, (0, 1), 64, 20.0)
    assert e_pair < 0
    assert fiber_ground_energy(params, (1, 2), 64, 20.0) == pytest.approx(e_pair, abs=1e-8)


def test_subcluster_threshold_n2():
    grel = Grid(1, 128, 20.0)
    params = make_params(d=1, N=2, alpha=4.0)
    out = subcluster_threshold([0.0], params, grel, tol=1e-9)
    # for N=2 the only sub-channel is the free relative particle at 0
    assert out["threshold"] == pytest.approx(0.0, abs=1e-8)
    assert out["e_p"] < 0
    assert out["gap"] > 0
