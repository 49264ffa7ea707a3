import numpy as np
import pytest

from relbind.effpot import compute_pair_potential
from relbind.kinetic import (EffectiveHamiltonian, KineticOperator, apply_kinetic,
                             build_effective_hamiltonian, hermiticity_defect,
                             kinetic_symbol)
from relbind.model import ExternalPotential, Grid, GridWavefunction, ModelError

from conftest import make_params


def test_constant_mode_annihilated():
    g = Grid(1, 32, 11.0)
    op = KineticOperator.build(g, 1.5, [0])
    psi = GridWavefunction.constant(g)
    out = apply_kinetic(op, psi)
    assert np.max(np.abs(out.amplitudes)) <= 1e-13


def test_massless_plane_wave():
    g = Grid(1, 32, 2 * np.pi)
    op = KineticOperator.build(g, 0.0, [0])
    for k in (1.0, 5.0, -3.0):
        psi = GridWavefunction(g, np.exp(1j * k * g.axis_positions))
        out = apply_kinetic(op, psi)
        assert np.allclose(out.amplitudes, abs(k) * psi.amplitudes, atol=1e-12)


def test_three_four_five():
    g = Grid(1, 16, 2 * np.pi)
    op = KineticOperator.build(g, 3.0, [0])
    psi = GridWavefunction(g, np.exp(1j * 4.0 * g.axis_positions))
    out = apply_kinetic(op, psi)
    assert np.max(np.abs(out.amplitudes - 2.0 * psi.amplitudes)) <= 1e-12


def test_dimension_mismatch_rejected():
    g = Grid(1, 16, 5.0)
    other = Grid(1, 32, 5.0)
    op = KineticOperator.build(g, 1.0, [0])
    psi = GridWavefunction.constant(other)
    with pytest.raises(ModelError):
        apply_kinetic(op, psi)


def test_symbol_invariants():
    g = Grid(1, 64, 40.0)
    sym = kinetic_symbol(g.axis_momenta, 2.0)
    assert np.all(sym >= 0)
    assert sym[0] == 0.0
    # m -> 0 continuity on a grid with moderate Nyquist momentum
    tiny = kinetic_symbol(g.axis_momenta, 1e-6)
    assert np.max(np.abs(tiny - np.abs(g.axis_momenta))) <= 1e-6


def test_subadditivity_over_grid_pairs():
    g = Grid(1, 64, 17.0)
    k = g.axis_momenta
    m = 1.3
    a = k[:, None]
    b = k[None, :]
    lhs = np.sqrt((a + b) ** 2 + m * m) - m
    rhs = np.abs(a) + np.sqrt(b * b + m * m) - m
    assert np.all(lhs <= rhs + 1e-12)


def test_translation_commutes():
    g = Grid(1, 64, 9.0)
    op = KineticOperator.build(g, 0.7, [0])
    rng = np.random.Generator(np.random.Philox(5))
    psi = GridWavefunction(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    shifted = GridWavefunction(g, np.roll(psi.amplitudes, 7))
    a = apply_kinetic(op, shifted).amplitudes
    b = np.roll(apply_kinetic(op, psi).amplitudes, 7)
    assert np.allclose(a, b, atol=1e-12)


def _heff_two_body(alpha, v0=0.5, n=32, L=20.0):
    params = make_params(d=1, N=2, alpha=alpha)
    g = Grid(2, n, L)
    ax = Grid(1, n, L)
    pot = ExternalPotential("gaussian-well", v0=v0, w=1.0) if v0 else None
    tab = compute_pair_potential(params.profiles[0], params.profiles[1], ax)
    return build_effective_hamiltonian(
        g, [1.0, 1.0], 1,
        pot.on_axis_grid(ax) if pot else None,
        {(0, 1): tab.values} if alpha else None, alpha), g


def test_heff_zero_potential_reduction():
    h, g = _heff_two_body(alpha=0.0, v0=0.0)
    rng = np.random.Generator(np.random.Philox(9))
    psi = GridWavefunction(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    out = h.apply(psi).amplitudes
    expected = sum(apply_kinetic(op, psi).amplitudes for op in h.kinetics)
    assert np.allclose(out, expected, atol=1e-13)


def test_heff_single_particle_no_pairs():
    params = make_params(d=1, N=1, alpha=2.0)
    g = Grid(1, 32, 20.0)
    pot = ExternalPotential("gaussian-well", v0=0.5, w=1.0)
    h = build_effective_hamiltonian(g, [1.0], 1, pot.on_axis_grid(g), None, 2.0)
    # one-particle operator: kinetic + V only
    assert np.allclose(h.diagonal, pot.on_axis_grid(g), atol=0)
    assert len(h.kinetics) == 1


def test_rayleigh_quotient_floor():
    h, g = _heff_two_body(alpha=2.0)
    floor = float(np.min(h.diagonal))
    for seed in range(10):
        psi = GridWavefunction.random(g, seed)
        assert h.expectation(psi) >= floor - 1e-10


def test_hermiticity_across_regimes():
    for alpha, v0 in ((0.0, 0.0), (0.0, 0.5), (2.0, 0.5), (8.0, 0.1)):
        h, _ = _heff_two_body(alpha=alpha, v0=v0)
        assert hermiticity_defect(h, seed=1) <= 1e-10


def test_empty_mask_rejected():
    g = Grid(1, 16, 5.0)
    op = KineticOperator.build(g, 1.0, [0])
    with pytest.raises(ModelError):
        EffectiveHamiltonian(grid=g, kinetics=(op,), diagonal=np.zeros(g.shape),
                             mask=(), alpha=0.0)
