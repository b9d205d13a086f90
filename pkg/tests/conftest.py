from __future__ import annotations

import socket
import threading
import time

import pytest

from discom.server.api import create_app
from discom.server.service import PlatformService
from discom.server.store import SnapshotStore


@pytest.fixture
def service():
    svc = PlatformService()
    yield svc
    svc.close()


@pytest.fixture
def inline_service():
    svc = PlatformService(inline_propagation=True)
    yield svc
    svc.close()


@pytest.fixture
def stored_service(tmp_path):
    svc = PlatformService(SnapshotStore(tmp_path / "data"))
    yield svc
    svc.close()


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class UvicornFixture:
    """A real HTTP server in a background thread."""

    def __init__(self, service: PlatformService):
        import uvicorn

        self.service = service
        self.port = free_port()
        self.url = f"http://127.0.0.1:{self.port}"
        config = uvicorn.Config(create_app(service), host="127.0.0.1",
                                port=self.port, log_level="error")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("uvicorn did not start")
            time.sleep(0.02)
        return self

    def stop(self):
        self.server.should_exit = True
        self.thread.join(timeout=5)
        self.service.close()


@pytest.fixture
def http_server():
    svc = PlatformService()
    fixture = UvicornFixture(svc).start()
    yield fixture
    fixture.stop()
