"""Crash-safe snapshot persistence.

One JSON document holds the whole platform state; every commit rewrites
it via write-to-temp + atomic rename (fsync on file and directory), so a
crash at any point leaves either the previous or the new snapshot on
disk, never a torn one. A leftover temp file from an interrupted write
is discarded on startup.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from discom.errors import StoreCorruptError

SNAPSHOT_NAME = "state.json"


class SnapshotStore:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.data_dir / SNAPSHOT_NAME
        self._tmp = self.data_dir / (SNAPSHOT_NAME + ".tmp")

    def load(self) -> dict[str, Any] | None:
        """Read the snapshot; None when the directory is fresh."""
        if self._tmp.exists():
            # an interrupted write never replaced the real snapshot
            self._tmp.unlink()
        if not self.path.exists():
            return None
        raw = self.path.read_bytes()
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise StoreCorruptError(
                f"snapshot {self.path} is unreadable: {exc}", str(self.path)) from None
        if not isinstance(payload, dict):
            raise StoreCorruptError(
                f"snapshot {self.path} does not hold an object", str(self.path))
        return payload

    def save(self, payload: dict[str, Any]) -> None:
        data = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        fd = os.open(self._tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
        try:
            os.write(fd, data)
            os.fsync(fd)
        finally:
            os.close(fd)
        os.replace(self._tmp, self.path)
        dir_fd = os.open(self.data_dir, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)
