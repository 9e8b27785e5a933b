from __future__ import annotations

import copy
import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml
from jsonschema import Draft202012Validator

from stemsim.encoder import ConvBlock
from stemsim.errors import ErrorCode, StemSimError
from stemsim.evaluation import EvalConfig
from stemsim.features import FeatureConfig
from stemsim.trainer import TrainConfig

from .types import RunConfig, SegmentationSettings

SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "run_config.schema.json"


@lru_cache(maxsize=1)
def _validator() -> Draft202012Validator:
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    return Draft202012Validator(schema)


def apply_overrides(raw: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Set dotted keys ("training.epochs") on a copy of the raw document; None values are skipped."""
    out = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = out
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise StemSimError(
                    ErrorCode.VALIDATION_ERROR,
                    f"Cannot override '{dotted}': '{key}' is not a section",
                    {"path": dotted.split(".")},
                )
        node[leaf] = value
    return out


def validate_run_document(raw: Dict[str, Any]) -> None:
    errors = sorted(_validator().iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            f"Invalid run config: {e.message}",
            {"path": list(e.absolute_path), "error": e.message, "n_errors": len(errors)},
        )


def _pair(value: Any, default):
    return tuple(int(v) for v in value) if value is not None else default


def build_run_config(raw: Dict[str, Any]) -> RunConfig:
    validate_run_document(raw)

    seg_raw = raw.get("segmentation", {})
    feat_raw = dict(raw.get("features", {}))
    cache_dir = feat_raw.pop("cache_dir", None)
    enc_raw = raw.get("encoder", {})
    base = RunConfig.__dataclass_fields__

    blocks = base["conv_blocks"].default
    if "conv_blocks" in enc_raw:
        blocks = tuple(
            ConvBlock(
                out_channels=int(b["out_channels"]),
                kernel=_pair(b.get("kernel"), (3, 3)),
                stride=_pair(b.get("stride"), (2, 2)),
            )
            for b in enc_raw["conv_blocks"]
        )

    seed = int(raw.get("seed", 0))
    manifest = raw.get("manifest")
    return RunConfig(
        manifest=Path(manifest) if manifest else None,
        output_dir=Path(raw.get("output_dir", "runs")),
        seed=seed,
        sample_rate=int(raw.get("sample_rate", base["sample_rate"].default)),
        roles=tuple(raw.get("roles", base["roles"].default)),
        segmentation=SegmentationSettings(**seg_raw),
        features=FeatureConfig(**feat_raw),
        cache_dir=Path(cache_dir) if cache_dir else None,
        conv_blocks=blocks,
        embedding_dim=int(enc_raw.get("embedding_dim", base["embedding_dim"].default)),
        training=TrainConfig(**raw.get("training", {}), seed=seed),
        evaluation=EvalConfig(**raw.get("evaluation", {})),
    )


def load_run_document(path: Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Config file not readable: {path}", {"path": str(path)}) from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, f"Config is not valid YAML/JSON: {e}", {"path": []}) from e
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Config document must be a mapping", {"path": []})
    return raw


def load_run_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    raw = load_run_document(path) if path is not None else {}
    return build_run_config(apply_overrides(raw, overrides or {}))
