from __future__ import annotations

import importlib
import json
from pathlib import Path
from typing import Any, Dict, Optional

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError as JsonSchemaValidationError

from stemsim.errors import ErrorCode, StemSimError

from .types import RegisteredVoice, VoiceSpec


class VoiceRegistryError(StemSimError):
    pass


def _registry_error(message: str, **details: Any) -> VoiceRegistryError:
    return VoiceRegistryError(ErrorCode.INTERNAL_ERROR, message, details or None)


def _import_handler(handler: str):
    """
    handler format: "module.path:ClassName"
    example: "voices.drums.voice:NoiseKit"
    """
    if ":" not in handler:
        raise _registry_error(f"Invalid handler '{handler}'. Expected 'module:Class'.")
    module_path, attr = handler.split(":", 1)
    mod = importlib.import_module(module_path)
    obj = getattr(mod, attr, None)
    if obj is None:
        raise _registry_error(f"Handler '{handler}' not found.")
    return obj


def _load_json(p: Path) -> Dict[str, Any]:
    with p.open("r", encoding="utf-8") as f:
        return json.load(f)


def default_voices_root() -> Path:
    import voices

    return Path(voices.__file__).resolve().parent


class VoiceRegistry:
    """
    Discovers instrument voices by scanning voices/*/manifest.json.
    """
    def __init__(self, voices_root: Optional[Path] = None):
        self.voices_root = voices_root or default_voices_root()
        self._voices: Dict[str, RegisteredVoice] = {}
        self._schemas: Dict[str, Dict[str, Any]] = {}

    def discover(self) -> "VoiceRegistry":
        if not self.voices_root.exists():
            raise _registry_error(f"Voices root does not exist: {self.voices_root}")

        for manifest_path in sorted(self.voices_root.glob("*/manifest.json")):
            self._register_from_manifest(manifest_path)
        return self

    def _register_from_manifest(self, manifest_path: Path) -> None:
        voice_dir = manifest_path.parent
        manifest = _load_json(manifest_path)

        pkg = manifest.get("package")
        entries = manifest.get("voices", [])
        if not pkg or not isinstance(entries, list) or not entries:
            raise _registry_error(f"Invalid manifest format: {manifest_path}")

        for v in entries:
            name = v["name"]
            role = v["role"]
            schema_path = (voice_dir / v["schemas"]["params"]).resolve()
            if not schema_path.exists():
                raise _registry_error(f"Missing params schema for {name}: {schema_path}")

            spec = VoiceSpec(
                name=name,
                role=role,
                handler=v["handler"],
                params_schema_path=schema_path,
                description=v.get("description", ""),
            )
            voice = _import_handler(spec.handler)()

            # one voice per role; the generator asks for voices by role
            if role in self._voices:
                raise _registry_error(
                    f"Duplicate voice for role '{role}' from {manifest_path}",
                    existing=self._voices[role].spec.name,
                )
            self._voices[role] = RegisteredVoice(spec=spec, voice=voice)

    def get(self, role: str) -> RegisteredVoice:
        if role not in self._voices:
            raise StemSimError(
                ErrorCode.NOT_FOUND,
                f"No voice registered for role '{role}'. Did you call discover()?",
                {"role": role, "registered": sorted(self._voices)},
            )
        return self._voices[role]

    def list(self) -> Dict[str, VoiceSpec]:
        return {k: v.spec for k, v in self._voices.items()}

    def get_params_schema(self, role: str) -> Dict[str, Any]:
        if role not in self._schemas:
            self._schemas[role] = _load_json(self.get(role).spec.params_schema_path)
        return self._schemas[role]

    def validate_params(self, role: str, params: Dict[str, Any]) -> None:
        schema = self.get_params_schema(role)
        try:
            Draft202012Validator(schema).validate(params)
        except JsonSchemaValidationError as ve:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                f"Voice parameters for '{role}' failed validation",
                {
                    "schema_id": schema.get("$id"),
                    "error": ve.message,
                    "path": [str(p) for p in ve.path],
                },
            ) from ve
