import pytest
from hypothesis import HealthCheck, settings

from microverif.aig import aig_scope
from microverif.design.bugs import reset_bugs
from microverif.design.rom import set_active_rom

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def clean_config():
    """Each test starts with the reference ROM, no bugs, and a private AIG store."""
    reset_bugs()
    set_active_rom(None)
    with aig_scope():
        yield
    reset_bugs()
    set_active_rom(None)
