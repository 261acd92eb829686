#!/usr/bin/env python3
"""Re-pin the rubric library manifest after editing category files.

Recomputes per-file sha256 checksums and metric counts. Run from the repo
root; the engine refuses to load a library whose files drift from the
manifest, so every intentional edit must be followed by this script.
"""

import hashlib
import json
from pathlib import Path

LIBRARY_DIR = Path(__file__).resolve().parent.parent / "src" / "dialogue_audit" / "data" / "library"


def main() -> None:
    manifest_path = LIBRARY_DIR / "manifest.json"
    old = json.loads(manifest_path.read_text()) if manifest_path.exists() else {"version": 1}

    files = []
    total = 0
    for path in sorted(LIBRARY_DIR.glob("*.json")):
        if path.name == "manifest.json":
            continue
        docs = json.loads(path.read_text())
        categories = {doc["category"] for doc in docs}
        if len(categories) != 1:
            raise SystemExit(f"{path.name}: expected one category per file, found {categories}")
        files.append(
            {
                "name": path.name,
                "category": categories.pop(),
                "metric_count": len(docs),
                "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
            }
        )
        total += len(docs)

    # Keep the Table-2-style category ordering stable if the old manifest had one.
    order = {entry["name"]: i for i, entry in enumerate(old.get("files", []))}
    files.sort(key=lambda e: order.get(e["name"], len(order)))

    manifest = {"version": old.get("version", 1), "total_metrics": total, "files": files}
    manifest_path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    print(f"pinned {total} metrics across {len(files)} files")


if __name__ == "__main__":
    main()
