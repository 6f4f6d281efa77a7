import numpy as np
import pytest

from chemostat_qsd import BirthLaw, ChemostatParams, DeathLaw


@pytest.fixture(scope="session")
def monod_params():
    """Reference configuration with closed-form equilibria oracles."""
    return ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=0.0,
                           birth=BirthLaw.monod(5.0, 1.0),
                           death=DeathLaw.constant(1.0))


@pytest.fixture(scope="session")
def pure_death_params():
    """No births: extinction from n = k has a closed-form law."""
    return ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=0.0,
                           birth=BirthLaw.monod(0.0, 1.0),
                           death=DeathLaw.constant(1.0))


@pytest.fixture(scope="session")
def maintenance_params():
    """eta = 0.4: equilibria exist only for n <= 2."""
    return ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=0.4,
                           birth=BirthLaw.monod(5.0, 1.0),
                           death=DeathLaw.constant(1.0))


@pytest.fixture(scope="session")
def singular_params():
    """Death rate diverging like y**(-1/2) at the depleted boundary."""
    return ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=0.0,
                           birth=BirthLaw.monod(5.0, 1.0),
                           death=DeathLaw.singular_power(0.5, 0.5, 0.5))


@pytest.fixture(scope="session")
def y1_exact():
    return (np.sqrt(29.0) - 5.0) / 2.0
