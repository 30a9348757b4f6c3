"""Regenerate the 60-entry retrieval fixture under tests/data/.

Writes fixture_index_60.bin (the serialized index) and
fixture_index_60_texts.json (id -> question text, so tests can re-embed
the same texts). Entries q17 and q41 share the exact same text, giving
the index two identical vectors: nearest-neighbor ties must resolve by
entry id.

Run from the repository root:

    python3 tools/make_fixture_index.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from nl2api.vectors import HashEmbeddingBackend, build_index, save_index

DIMENSION = 32

TOPICS = [
    "mining deals in region {n}",
    "deals over {n}00 hectares",
    "contracts signed in {n}",
    "investors from country {n}",
    "rice farming deals near parcel {n}",
    "leases expiring after 20{n:02d}",
]


def texts() -> dict[str, str]:
    out = {}
    for i in range(60):
        template = TOPICS[i % len(TOPICS)]
        out[f"q{i:02d}"] = "Which " + template.format(n=i + 3) + "?"
    # Exact duplicate: identical text embeds to an identical vector.
    out["q41"] = out["q17"]
    return out


def main() -> int:
    mapping = texts()
    backend = HashEmbeddingBackend(dimension=DIMENSION)
    index = build_index(sorted(mapping.items()), backend)
    out_dir = ROOT / "tests" / "data"
    save_index(index, out_dir / "fixture_index_60.bin")
    (out_dir / "fixture_index_60_texts.json").write_text(
        json.dumps(mapping, indent=2, sort_keys=True) + "\n"
    )
    print(f"wrote {len(index.entry_ids)} entries at dimension {DIMENSION} -> {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
