"""Label-table validation and manifest assembly."""

from __future__ import annotations


class IncompleteManifest(Exception):
    """An example is missing one of the requested label keys."""


class DuplicateExample(Exception):
    """Two examples share an id."""


def build_manifest(labels: dict[str, dict[str, str]],
                   alignments: dict[str, int] | None = None,
                   required_keys: list[str] | None = None) -> list[dict]:
    """Manifest entries from an id -> {key: value} table.

    Entry order follows the table's insertion order; alignments contribute
    optional center frames. Any example missing a required key raises
    IncompleteManifest; duplicate ids cannot occur in a dict input but are
    guarded against for sequence inputs upstream.
    """
    alignments = alignments or {}
    entries = []
    seen = set()
    for ex_id, label_map in labels.items():
        if ex_id in seen:
            raise DuplicateExample(f"duplicate example id {ex_id!r}")
        seen.add(ex_id)
        if required_keys:
            missing = [k for k in required_keys if k not in label_map]
            if missing:
                raise IncompleteManifest(
                    f"example {ex_id!r} is missing label keys {missing}")
        entry = {"id": str(ex_id), "labels": {str(k): str(v) for k, v in label_map.items()}}
        if ex_id in alignments:
            entry["center_frame"] = int(alignments[ex_id])
        entries.append(entry)
    return entries
