"""Content-addressed on-disk cache for backend responses.

One JSON file per digest under ``{cache_dir}/{first 2 hex}/{digest}.json``.
Writes are atomic (write-temp-then-rename), so concurrent identical misses
race benignly: last write wins with identical content under deterministic
backends. There is no TTL; key inputs (rubric versions, fingerprints)
invalidate naturally.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path


def digest_of(*parts: object) -> str:
    """Stable hex digest over an ordered sequence of key parts."""

    payload = json.dumps(parts, ensure_ascii=False, separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ContentCache:
    """Disk-backed JSON payload cache; a ``None`` directory disables caching."""

    def __init__(self, cache_dir: Path | str | None) -> None:
        self._dir = Path(cache_dir) if cache_dir is not None else None
        self.hits = 0
        self.misses = 0

    @property
    def enabled(self) -> bool:
        return self._dir is not None

    def _path(self, digest: str) -> Path:
        assert self._dir is not None
        return self._dir / digest[:2] / f"{digest}.json"

    def get(self, digest: str) -> dict | None:
        if self._dir is None:
            return None
        path = self._path(digest)
        try:
            payload = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            self.misses += 1
            return None
        self.hits += 1
        return payload

    def put(self, digest: str, payload: dict) -> None:
        if self._dir is None:
            return
        path = self._path(digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as handle:
                json.dump(payload, handle, ensure_ascii=False)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise
