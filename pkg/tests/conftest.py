import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"

# runnable experiment scripts double as test helpers
sys.path.insert(0, str(ROOT / "scripts"))

from kommentar.gateway import Gateway  # noqa: E402
from kommentar.mock_backend import MockBackend  # noqa: E402
from kommentar.provisions import ProvisionRegistry  # noqa: E402


@pytest.fixture(scope="session")
def registry() -> ProvisionRegistry:
    return ProvisionRegistry.from_file(FIXTURES / "provisions.json")


@pytest.fixture()
def mock_gateway(tmp_path) -> Gateway:
    return Gateway(MockBackend(42), tmp_path / "cache", backoff_base=0.0)


@pytest.fixture()
def gateway_factory(tmp_path):
    def factory(backend, **kwargs):
        kwargs.setdefault("backoff_base", 0.0)
        return Gateway(backend, tmp_path / "cache", **kwargs)

    return factory
