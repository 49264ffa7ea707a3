import numpy as np
import pytest

from relbind.kinetic import hermiticity_defect
from relbind.model import ExternalPotential, Grid, GridWavefunction, ModelError
from relbind.spectral import (SolverError, binding_verdict, build_heff, cluster_energies,
                              count_negative_eigenvalues, dense_ground_state,
                              grid_energy_resolution, ground_state, localization_metrics)

from conftest import make_params


def test_free_particle_ground_state():
    h = build_heff(make_params(d=1, N=1), Grid(1, 128, 40.0), None)
    res = ground_state(h, tol=1e-10)
    assert abs(res.eigenvalue) <= 1e-10
    assert res.residual <= 1e-10
    assert res.converged


def test_lanczos_matches_dense_well():
    pot = ExternalPotential("gaussian-well", v0=0.5, w=1.0)
    h = build_heff(make_params(d=1, N=1), Grid(1, 256, 40.0), pot)
    res = ground_state(h, tol=1e-10, seed=3)
    ev, vec = dense_ground_state(h)
    assert abs(res.eigenvalue - ev) <= 1e-8
    overlap = abs(np.vdot(vec, res.eigenvector))
    assert overlap == pytest.approx(1.0, abs=1e-6)


def test_deep_well_variational_floor():
    pot = ExternalPotential("gaussian-well", v0=30.0, w=1.0)
    h = build_heff(make_params(d=1, N=1), Grid(1, 128, 40.0), pot)
    res = ground_state(h, tol=1e-8)
    assert res.eigenvalue >= -30.0


def test_nonconvergence_carries_best_iterate():
    pot = ExternalPotential("gaussian-well", v0=0.5, w=1.0)
    h = build_heff(make_params(d=1, N=1), Grid(1, 2048, 400.0), pot)
    with pytest.raises(SolverError) as err:
        ground_state(h, tol=1e-14, max_iter=1, krylov=3)
    best = err.value.result
    assert best is not None and not best.converged
    assert np.isfinite(best.eigenvalue)


def test_ground_state_deterministic():
    pot = ExternalPotential("gaussian-well", v0=0.5, w=1.0)
    h = build_heff(make_params(d=1, N=1), Grid(1, 128, 40.0), pot)
    a = ground_state(h, tol=1e-9, seed=11)
    b = ground_state(h, tol=1e-9, seed=11)
    assert a.eigenvalue == b.eigenvalue
    assert np.array_equal(a.eigenvector, b.eigenvector)
    assert a.seed == 11


def test_cluster_energies_trivial_cases():
    g = Grid(2, 64, 40.0)
    pot = ExternalPotential("gaussian-well", v0=0.0, w=1.0)
    rep = cluster_energies(make_params(d=1, N=2, alpha=0.0), g, pot, tol=1e-9)
    assert all(abs(r.total) <= 1e-8 for r in rep.rows)
    assert abs(rep.xi) <= 1e-8
    assert abs(rep.e_v_full) <= 1e-8


def test_cluster_energies_n2_structure(shallow_well):
    g = Grid(2, 64, 40.0)
    params = make_params(d=1, N=2, alpha=3.0)
    rep = cluster_energies(params, g, shallow_well, tol=1e-9)
    betas = {r.beta for r in rep.rows}
    assert betas == {(), (0,), (1,)}
    by_beta = {r.beta: r for r in rep.rows}
    # singleton complements are free particles: E^0 = 0 exactly
    assert by_beta[(0,)].e0_complement == 0.0
    assert by_beta[(1,)].e0_complement == 0.0
    # identical particles: the two one-particle channels coincide
    assert by_beta[(0,)].e_v_beta == pytest.approx(by_beta[(1,)].e_v_beta, abs=1e-9)
    # the empty set contributes E^0(C_N), the escaping bound pair
    e0_pair = by_beta[()].e0_complement
    assert e0_pair < 0
    # Xi is the minimum over all proper subsets, empty set included
    for r in rep.rows:
        assert rep.xi <= r.total + 1e-12
    assert rep.xi == pytest.approx(e0_pair)
    # variational oracle: a trial state concentrated near x1 = x2 bounds E^0
    ax = Grid(1, g.n, g.L)
    from relbind.fiber import build_fiber

    op = build_fiber([0.0], params, ax)
    x = ax.position_radii()
    trial = GridWavefunction(ax, np.exp(-x ** 2).astype(complex)).normalized()
    rayleigh = float(np.vdot(trial.amplitudes.ravel(),
                             op.matvec(trial.amplitudes.ravel())).real * ax.cell_volume)
    assert rayleigh < 0
    assert e0_pair <= rayleigh + 1e-9


def test_count_negative_eigenvalues():
    g = Grid(1, 256, 40.0)
    params = make_params(d=1, N=1)
    assert count_negative_eigenvalues(build_heff(params, g, None)) == 0
    tiny = ExternalPotential("gaussian-well", v0=0.01, w=1.0)
    assert count_negative_eigenvalues(build_heff(params, g, tiny)) == 0
    deep = ExternalPotential("gaussian-well", v0=5.0, w=1.0)
    assert count_negative_eigenvalues(build_heff(params, g, deep)) >= 1


def test_count_negative_size_guard():
    h = build_heff(make_params(d=1, N=2), Grid(2, 128, 40.0), None)
    with pytest.raises(ModelError):
        count_negative_eigenvalues(h)


def test_localization_metrics_delta_and_constant():
    g = Grid(1, 64, 32.0)
    amp = np.zeros(g.shape, dtype=complex)
    amp[0] = 1.0
    delta = GridWavefunction(g, amp).normalized()
    met = localization_metrics(delta)
    assert met.participation_ratio == pytest.approx(g.cell_volume, rel=1e-12)

    const = GridWavefunction.constant(g)
    met_c = localization_metrics(const, radii=(4.0,))
    assert met_c.participation_ratio == pytest.approx(g.box_volume, rel=1e-12)
    # uniform measure: mass outside r is 1 - vol(ball)/vol(box)
    expected = 1.0 - 2 * 4.0 / g.L
    assert met_c.mass_outside[4.0] == pytest.approx(expected, abs=0.05)


def test_bound_state_decay_fit():
    pot = ExternalPotential("gaussian-well", v0=5.0, w=1.0)
    h = build_heff(make_params(d=1, N=1), Grid(1, 256, 40.0), pot)
    ev, vec = dense_ground_state(h)
    state = GridWavefunction(Grid(1, 256, 40.0), vec.reshape(256)).normalized()
    met = localization_metrics(state)
    assert met.decay_rate is not None and met.decay_rate > 0


def test_attractive_potential_lowers_energy():
    g = Grid(1, 128, 40.0)
    params = make_params(d=1, N=1)
    free = ground_state(build_heff(params, g, None), tol=1e-9).eigenvalue
    for v0 in (0.2, 0.5, 1.0):
        pot = ExternalPotential("gaussian-well", v0=v0, w=1.0)
        bound = ground_state(build_heff(params, g, pot), tol=1e-9).eigenvalue
        assert bound <= free + 1e-10
        free = bound  # deeper well never raises the ground energy


def test_potential_shift_bound(shallow_well):
    # E^V(beta) <= E^0(beta) + max(sum_j V): V <= 0 here so E^V <= E^0
    g = Grid(2, 64, 40.0)
    params = make_params(d=1, N=2, alpha=2.0)
    with_v = ground_state(build_heff(params, g, shallow_well), tol=1e-9).eigenvalue
    without = ground_state(build_heff(params, g, None), tol=1e-9).eigenvalue
    assert with_v <= without + 1e-10


def test_binding_verdict_shape(shallow_well):
    g = Grid(2, 64, 40.0)
    params = make_params(d=1, N=2, alpha=3.0)
    rep = cluster_energies(params, g, shallow_well, tol=1e-9)
    gs = ground_state(build_heff(params, g, shallow_well), tol=1e-9)
    v = binding_verdict(rep, gs.wavefunction(g).normalized(), g, params.masses)
    assert v.margin_threshold >= max(5.0 * grid_energy_resolution(g, params.masses), 1e-4)
    assert isinstance(v.bound, bool)


def test_hermiticity_regimen(shallow_well):
    for alpha in (0.0, 4.0):
        h = build_heff(make_params(d=1, N=2, alpha=alpha), Grid(2, 32, 20.0), shallow_well)
        assert hermiticity_defect(h, seed=2) <= 1e-10
