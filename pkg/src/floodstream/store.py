"""On-disk surface store: content-addressed blobs plus a JSON manifest.

Layout under the data directory:

* ``blobs/<sha256>.bin`` — surface payloads exactly as uploaded (PGM or
  PNG bytes), shared between surfaces with identical content;
* ``manifest.json`` — surface metadata, insertion order, the working set
  and its version counter;
* ``profiles/<name>.json`` — device profiles saved through the API.

Everything a restart needs lives in these files; reloading a store from the
same directory reproduces ids, the working set and the version byte-exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from pathlib import Path

from .rasters import RasterSurface, decode_surface_bytes

_NAME_RE = re.compile(r"^[A-Za-z0-9._-]{1,64}$")


class StoreError(ValueError):
    pass


class UnknownSurface(StoreError):
    pass


class DimensionMismatch(StoreError):
    def __init__(self, expected: tuple[int, int], got: tuple[int, int]):
        self.expected = expected
        self.got = got
        super().__init__(
            f"surface is {got[0]}x{got[1]} but the store holds "
            f"{expected[0]}x{expected[1]} surfaces"
        )


def _surface_id(name: str, payload: bytes) -> str:
    digest = hashlib.sha256(name.encode() + b"\0" + payload)
    return digest.hexdigest()[:12]


class SurfaceStore:
    """Thread-safe surface/working-set persistence.

    Mutations are serialized by one lock and each rewrites the manifest
    atomically, so concurrent readers always observe a complete state.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.blob_dir = self.root / "blobs"
        self.profile_dir = self.root / "profiles"
        self.manifest_path = self.root / "manifest.json"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self.profile_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._surfaces: dict[str, dict] = {}
        self._order: list[str] = []
        self._working_set: list[str] = []
        self._version = 0
        if self.manifest_path.exists():
            self._load_manifest()

    # -- manifest ----------------------------------------------------------

    def _load_manifest(self) -> None:
        doc = json.loads(self.manifest_path.read_text())
        self._surfaces = dict(doc["surfaces"])
        self._order = list(doc["order"])
        self._working_set = list(doc["working_set"])
        self._version = int(doc["version"])

    def _write_manifest(self) -> None:
        doc = {
            "surfaces": self._surfaces,
            "order": self._order,
            "working_set": self._working_set,
            "version": self._version,
        }
        tmp = self.manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.manifest_path)

    # -- surfaces ----------------------------------------------------------

    @property
    def version(self) -> int:
        with self._lock:
            return self._version

    def dims(self) -> tuple[int, int] | None:
        with self._lock:
            if not self._order:
                return None
            first = self._surfaces[self._order[0]]
            return first["width"], first["height"]

    def ingest(self, name: str, payload: bytes) -> str:
        width, height, _ = decode_surface_bytes(payload)  # raises RasterError
        with self._lock:
            expected = self.dims()
            if expected is not None and expected != (width, height):
                raise DimensionMismatch(expected, (width, height))
            sid = _surface_id(name, payload)
            blob = hashlib.sha256(payload).hexdigest()
            blob_path = self.blob_dir / f"{blob}.bin"
            if not blob_path.exists():
                blob_path.write_bytes(payload)
            if sid not in self._surfaces:
                self._surfaces[sid] = {
                    "name": name,
                    "blob": blob,
                    "width": width,
                    "height": height,
                }
                self._order.append(sid)
                self._write_manifest()
            return sid

    def list_surfaces(self) -> list[dict]:
        with self._lock:
            selected = set(self._working_set)
            return [
                {
                    "id": sid,
                    "name": self._surfaces[sid]["name"],
                    "width": self._surfaces[sid]["width"],
                    "height": self._surfaces[sid]["height"],
                    "selected": sid in selected,
                }
                for sid in self._order
            ]

    def has(self, surface_id: str) -> bool:
        with self._lock:
            return surface_id in self._surfaces

    def payload(self, surface_id: str) -> bytes:
        with self._lock:
            try:
                blob = self._surfaces[surface_id]["blob"]
            except KeyError:
                raise UnknownSurface(f"no such surface: {surface_id}") from None
        return (self.blob_dir / f"{blob}.bin").read_bytes()

    def surface(self, surface_id: str) -> RasterSurface:
        with self._lock:
            try:
                meta = self._surfaces[surface_id]
            except KeyError:
                raise UnknownSurface(f"no such surface: {surface_id}") from None
        data = (self.blob_dir / f"{meta['blob']}.bin").read_bytes()
        width, height, cells = decode_surface_bytes(data)
        return RasterSurface(
            id=surface_id,
            name=meta["name"],
            width=width,
            height=height,
            cells=cells,
        )

    def delete(self, surface_id: str) -> bool:
        """Remove a surface; returns True when the working set changed."""
        with self._lock:
            if surface_id not in self._surfaces:
                raise UnknownSurface(f"no such surface: {surface_id}")
            blob = self._surfaces.pop(surface_id)["blob"]
            self._order.remove(surface_id)
            ws_changed = surface_id in self._working_set
            if ws_changed:
                self._working_set = [
                    sid for sid in self._working_set if sid != surface_id
                ]
                self._version += 1
            if not any(meta["blob"] == blob for meta in self._surfaces.values()):
                (self.blob_dir / f"{blob}.bin").unlink(missing_ok=True)
            self._write_manifest()
            return ws_changed

    # -- working set -------------------------------------------------------

    def working_set(self) -> list[str]:
        with self._lock:
            return list(self._working_set)

    def snapshot_state(self) -> tuple[int, list[str]]:
        """Version and working set read under one lock (no torn pairs)."""
        with self._lock:
            return self._version, list(self._working_set)

    def set_working_set(self, ids: list[str]) -> int:
        """Replace the working set atomically; returns the new version."""
        with self._lock:
            deduped: list[str] = []
            for sid in ids:
                if sid not in deduped:
                    deduped.append(sid)
            missing = [sid for sid in deduped if sid not in self._surfaces]
            if missing:
                raise UnknownSurface(
                    "unknown surface ids: " + ", ".join(sorted(missing))
                )
            self._working_set = deduped
            self._version += 1
            self._write_manifest()
            return self._version

    def working_surfaces(self) -> list[RasterSurface]:
        with self._lock:
            ids = list(self._working_set)
        return [self.surface(sid) for sid in ids]

    # -- profiles ----------------------------------------------------------

    def profile_path(self, name: str) -> Path:
        if not _NAME_RE.match(name):
            raise StoreError(f"invalid profile name {name!r}")
        return self.profile_dir / f"{name}.json"
