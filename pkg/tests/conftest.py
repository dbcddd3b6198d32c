import pytest

from tessy.mock_server import MockFixtureServer, MockServerConfig


@pytest.fixture(scope="session")
def procedural_server():
    """One procedural fixture server shared by every HTTP-facing test."""
    server = MockFixtureServer(MockServerConfig(seed=7)).start()
    yield server
    server.stop()


@pytest.fixture
def fixture_server_factory():
    """Start scripted or custom servers that are torn down per test."""
    servers = []

    def start(config: MockServerConfig) -> MockFixtureServer:
        server = MockFixtureServer(config).start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()
