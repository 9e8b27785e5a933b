from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError as JsonSchemaValidationError

from stemsim.errors import ErrorCode, StemSimError

from .types import DEFAULT_SAMPLE_RATE, ROLES, SPLITS, CorpusManifest, TrackEntry

MANIFEST_NAME = "manifest.json"
SCHEMA_PATH = Path(__file__).parent / "schemas" / "manifest.schema.json"


def _schema() -> Dict[str, Any]:
    with SCHEMA_PATH.open("r", encoding="utf-8") as f:
        return json.load(f)


def load_manifest(path: Path) -> CorpusManifest:
    """
    Load and validate a corpus manifest. Stem paths are resolved relative to the
    manifest's directory; every listed file must exist.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Manifest not readable: {path}", {"path": str(path)}) from e
    except json.JSONDecodeError as e:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Manifest is not valid JSON", {"path": str(path), "error": str(e)}) from e

    try:
        Draft202012Validator(_schema()).validate(raw)
    except JsonSchemaValidationError as ve:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "Manifest validation failed",
            {"error": ve.message, "path": [str(p) for p in ve.path]},
        ) from ve

    root = path.parent.resolve()
    tracks: List[TrackEntry] = []
    seen = set()
    for t in raw["tracks"]:
        if t["id"] in seen:
            raise StemSimError(ErrorCode.VALIDATION_ERROR, f"Duplicate track id '{t['id']}'", {"track_id": t["id"]})
        seen.add(t["id"])

        stems: Dict[str, Path] = {}
        for role, rel in t["stems"].items():
            p = (root / rel).resolve()
            if not p.exists():
                raise StemSimError(
                    ErrorCode.NOT_FOUND,
                    f"Missing stem file for track '{t['id']}' role '{role}'",
                    {"track_id": t["id"], "role": role, "path": str(p)},
                )
            stems[role] = p
        tracks.append(TrackEntry(track_id=t["id"], split=t["split"], stems=stems))

    return CorpusManifest(root=root, sample_rate=int(raw["sample_rate"]), tracks=tracks)


def manifest_to_json(manifest: CorpusManifest) -> Dict[str, Any]:
    out_tracks = []
    for t in manifest.tracks:
        stems = {}
        for role in ROLES:
            if role in t.stems:
                p = Path(t.stems[role])
                try:
                    p = p.resolve().relative_to(manifest.root.resolve())
                except ValueError:
                    pass
                stems[role] = p.as_posix()
        out_tracks.append({"id": t.track_id, "split": t.split, "stems": stems})
    return {"sample_rate": manifest.sample_rate, "tracks": out_tracks}


def save_manifest(manifest: CorpusManifest, path: Path) -> Path:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        path.write_text(json.dumps(manifest_to_json(manifest), indent=2, sort_keys=False) + "\n", encoding="utf-8")
    except OSError as e:
        raise StemSimError(ErrorCode.IO_ERROR, f"Cannot write manifest: {path}", {"path": str(path)}) from e
    return path


def manifest_from_layout(root: Path, sample_rate: int = DEFAULT_SAMPLE_RATE) -> CorpusManifest:
    """
    Build a manifest from a directory layout:

        root/train/<track_id>/<role>.wav
        root/test/<track_id>/<role>.wav

    Files whose stem is not a known role are ignored.
    """
    root = Path(root).resolve()
    tracks: List[TrackEntry] = []
    for split in SPLITS:
        split_dir = root / split
        if not split_dir.is_dir():
            continue
        for track_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
            stems = {
                f.stem: f.resolve()
                for f in sorted(track_dir.glob("*.wav"))
                if f.stem in ROLES
            }
            if stems:
                tracks.append(TrackEntry(track_id=track_dir.name, split=split, stems=stems))

    if not tracks:
        raise StemSimError(
            ErrorCode.EMPTY_RESULT,
            "No track directories with role-named WAV files found",
            {"root": str(root)},
        )
    ids = [t.track_id for t in tracks]
    if len(ids) != len(set(ids)):
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Track ids are not unique across splits", {"root": str(root)})
    return CorpusManifest(root=root, sample_rate=sample_rate, tracks=tracks)
