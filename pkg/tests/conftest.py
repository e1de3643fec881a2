import pytest

from monitoring.metrics import configure_logging


@pytest.fixture(autouse=True)
def quiet_logging():
    """Bind structlog to the stderr pytest is capturing for this test."""
    configure_logging("WARNING")
    yield
