import pytest

from relbind.model import CutoffProfile, ExternalPotential, ModelParams


@pytest.fixture(scope="session")
def sharp_profile():
    return CutoffProfile("sharp-flat", Lambda=1.0, sigma_floor=0.1)


@pytest.fixture(scope="session")
def shallow_well():
    return ExternalPotential("gaussian-well", v0=0.1, w=1.0)


@pytest.fixture(scope="session")
def well():
    return ExternalPotential("gaussian-well", v0=0.5, w=1.0)


def make_params(d=1, N=2, alpha=0.0, kappa=1.0, profile=None, masses=None):
    profile = profile or CutoffProfile("sharp-flat", Lambda=1.0, sigma_floor=0.1)
    masses = masses or (1.0,) * N
    return ModelParams(d=d, N=N, masses=masses, alpha=alpha, kappa=kappa,
                       ir_cutoff=profile.sigma_floor, profiles=(profile,))


@pytest.fixture(scope="session")
def params_one(sharp_profile):
    return make_params(d=1, N=1)


@pytest.fixture(scope="session")
def params_two(sharp_profile):
    return make_params(d=1, N=2)
