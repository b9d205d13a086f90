"""The platform service: CRUD, versioned contributions, data propagation."""

from discom.server.api import create_app
from discom.server.config import ServerConfig, load_config
from discom.server.service import (IntermediateRecord, PlatformService,
                                   RevocationNotice, StoredExport, UpdateDelta)
from discom.server.store import SnapshotStore

__all__ = [
    "IntermediateRecord", "PlatformService", "RevocationNotice",
    "ServerConfig", "SnapshotStore", "StoredExport", "UpdateDelta",
    "create_app", "load_config",
]
