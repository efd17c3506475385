import pytest

from tripling import spectrum
from tripling.model import ModelParams


@pytest.fixture(scope='session')
def well_f05() -> ModelParams:
    return ModelParams(f=0.5, lam=0.004, kappa=0.01, nbar=0.0)


@pytest.fixture(scope='session')
def well_f1() -> ModelParams:
    return ModelParams(f=1.0, lam=0.04, kappa=0.01, nbar=0.0)


@pytest.fixture(scope='session')
def spectrum_f1(well_f1):
    return spectrum.diagonalize(well_f1)


@pytest.fixture(scope='session')
def spectrum_f05(well_f05):
    return spectrum.diagonalize(well_f05)


@pytest.fixture(scope='session')
def wannier_f05(spectrum_f05):
    return spectrum.build_wannier(spectrum_f05, spectrum.classify_triplets(spectrum_f05))


@pytest.fixture(scope='session')
def wannier_f1(spectrum_f1):
    return spectrum.build_wannier(spectrum_f1, spectrum.classify_triplets(spectrum_f1))
