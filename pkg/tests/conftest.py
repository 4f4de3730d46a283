import numpy as np
import pytest

from gapgrad import (
    WeightSpec,
    assemble_disk_system,
    assemble_operator,
    circle_grid,
    polar_grid,
    solve_disk,
    solve_spectrum,
)

ONES = WeightSpec(d=3, m=2.0, kappa0=1.0, kappa=(1.0, 1.0), set_b={1, 2})
CUBE = WeightSpec(d=3, m=4.0, kappa0=1.0, kappa=(1.0, 1.0), set_b={1, 2})
ANISO = WeightSpec(d=3, m=2.0, kappa0=1.0, kappa=(1.0, 2.0), set_b={1, 2})

# session caches: dense eigensolves and 512^2 disk solves are shared
# between the module tests and the acceptance suite
_SPECTRA: dict = {}
_MODES: dict = {}


@pytest.fixture(scope="session")
def ones_weight():
    return ONES


@pytest.fixture(scope="session")
def cube_weight():
    return CUBE


@pytest.fixture(scope="session")
def aniso_weight():
    return ANISO


@pytest.fixture(scope="session")
def get_spectrum():
    def get(spec, n, k=3):
        key = (spec, n, k)
        if key not in _SPECTRA:
            grid = circle_grid(n)
            k_mat, m_mat = assemble_operator(spec, grid)
            _SPECTRA[key] = solve_spectrum(k_mat, m_mat, k=k, grid=grid)
        return _SPECTRA[key]

    return get


@pytest.fixture(scope="session")
def get_mode_solution(get_spectrum):
    """eps=0 disk solve with the first eigenfunction as boundary data.

    Returns (field, lambda1, y1) cached per (spec, n_r, n_theta).
    """

    def get(spec, n_r, n_theta):
        key = (spec, n_r, n_theta)
        if key not in _MODES:
            spectrum = get_spectrum(spec, n_theta)
            y1 = spectrum.eigenfunctions[:, 1]
            grid = polar_grid(n_r, n_theta)
            system = assemble_disk_system(spec, 0.0, grid, None, y1)
            fld = solve_disk(system)
            _MODES[key] = (fld, float(spectrum.eigenvalues[1]), y1)
        return _MODES[key]

    return get
