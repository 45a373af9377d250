import pytest

from reflect_lab.theory import SimplifiedParams


@pytest.fixture
def ref_params() -> SimplifiedParams:
    """The reference parameter point used by the headline accuracy curves."""
    return SimplifiedParams(mu=0.8, e_minus=0.3, e_plus=0.2, f=0.8)


@pytest.fixture
def alt_params() -> SimplifiedParams:
    """A second, unremarkable point so tests never overfit to one tuple."""
    return SimplifiedParams(mu=0.6, e_minus=0.25, e_plus=0.1, f=0.5)
