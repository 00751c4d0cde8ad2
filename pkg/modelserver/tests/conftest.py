import pytest
from starlette.testclient import TestClient

from modelserver import create_app


@pytest.fixture(scope="session")
def client():
    with TestClient(create_app()) as client:
        yield client
