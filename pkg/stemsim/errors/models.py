from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional


# Not frozen: contextlib assigns __traceback__ when an error leaves a `with` block.
@dataclass(eq=False)
class StemSimError(Exception):
    code: str
    message: str
    details: Optional[Dict[str, Any]] = None

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"

    def to_json(self) -> Dict[str, Any]:
        return {
            "code": self.code,
            "message": self.message,
            "details": self.details or {},
        }
