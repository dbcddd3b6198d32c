import pytest

from predictor_service import PredictorServer, ServiceConfig


@pytest.fixture(scope="session")
def lexicon_server():
    server = PredictorServer(ServiceConfig()).start()
    yield server
    server.close()
