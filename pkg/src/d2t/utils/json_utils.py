import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel


class PathEncoder(json.JSONEncoder):
    """JSON encoder that also understands paths, tuples-in-models and sets."""

    def default(self, obj: Any) -> Any:
        if isinstance(obj, Path):
            return str(obj)
        if isinstance(obj, BaseModel):
            return obj.model_dump(mode="json")
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        return super().default(obj)


class JsonLineError(ValueError):
    """A line of a line-delimited JSON file does not parse."""

    def __init__(self, file_name: str, lineno: int, message: str) -> None:
        self.file_name = file_name
        self.lineno = lineno
        super().__init__(f"{file_name}:{lineno}: {message}")
