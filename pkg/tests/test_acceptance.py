"""The acceptance gate: every criterion runs at its pinned tolerance and
prints one pass/fail line. These are the exit criteria of the artifact."""

from relbind import acceptance


def _run(fn):
    res = acceptance.run_check(fn)
    print(res.line())
    assert res.passed, res.detail


def test_acceptance_01_kinetic_exactness(capsys):
    with capsys.disabled():
        _run(acceptance.check_01_kinetic_exactness)


def test_acceptance_02_pair_potential_oracle(capsys):
    with capsys.disabled():
        _run(acceptance.check_02_pair_potential_oracle)


def test_acceptance_03_eigensolver_equivalence(capsys):
    with capsys.disabled():
        _run(acceptance.check_03_eigensolver_equivalence)


def test_acceptance_04_fiber_dispersion(capsys):
    with capsys.disabled():
        _run(acceptance.check_04_fiber_dispersion)


def test_acceptance_05_levy_fidelity(capsys):
    with capsys.disabled():
        _run(acceptance.check_05_levy_fidelity)


def test_acceptance_06_feynman_kac(capsys):
    with capsys.disabled():
        _run(acceptance.check_06_feynman_kac)


def test_acceptance_07_exceedance_decay(capsys):
    with capsys.disabled():
        _run(acceptance.check_07_exceedance_decay)


def test_acceptance_08_enhanced_binding_scan(capsys):
    with capsys.disabled():
        _run(acceptance.check_08_enhanced_binding_scan)


def test_acceptance_09_pair_energy_asymptotics(capsys):
    with capsys.disabled():
        _run(acceptance.check_09_pair_energy_asymptotics)


def test_acceptance_10_concentration(capsys):
    with capsys.disabled():
        _run(acceptance.check_10_concentration)


def test_acceptance_11_fock_certificates(capsys):
    with capsys.disabled():
        _run(acceptance.check_11_fock_certificates)


def test_acceptance_12_decay_envelope(capsys):
    with capsys.disabled():
        _run(acceptance.check_12_decay_envelope)
