"""Client-side agent: local workbook, offline cache, poll/push loop."""

from discom.agent.core import Agent
from discom.agent.localapi import create_local_app
from discom.agent.transport import HttpTransport, LocalTransport, Transport

__all__ = ["Agent", "HttpTransport", "LocalTransport", "Transport",
           "create_local_app"]
