"""File utilities for d2t.

1. Environment loading
2. Text file read/write
3. JSON and line-delimited JSON
4. Corpus file discovery
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Union

from dotenv import load_dotenv
from loguru import logger

from d2t.utils.json_utils import JsonLineError, PathEncoder


def load_env_file(env_name: Optional[str] = None, search_dir: Optional[Path] = None) -> bool:
    """Load environment variables from a .env file if one exists.

    Args:
        env_name: Environment name suffix. Looks for .env.{env_name} when given.
        search_dir: Directory to start from, defaults to the working directory.

    Returns:
        bool: True if a file was loaded.
    """
    current = (search_dir or Path.cwd()).resolve()
    name = f".env.{env_name}" if env_name else ".env"
    for directory in [current, *current.parents]:
        env_file = directory / name
        if env_file.exists():
            load_dotenv(env_file, override=False)
            logger.debug(f"Loaded environment from {env_file}")
            return True
    return False


def read_file(file_path: Union[str, Path]) -> str:
    """Read a UTF-8 file.

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            content = f.read()
            logger.debug(f"Read {file_path} ({len(content)} chars)")
            return content
    except FileNotFoundError as e:
        logger.error(f"File not found: {file_path}")
        raise FileNotFoundError(f"File not found: {file_path}") from e


def write_file(file_path: Union[str, Path], content: str) -> None:
    """Write a UTF-8 file, creating parent directories."""
    try:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as f:
            f.write(content)
            logger.debug(f"Wrote file: {file_path}")
    except Exception as e:
        logger.error(f"Error writing file {file_path}: {e}")
        raise


def save_json(file_path: Union[str, Path], data: Any) -> None:
    """Save data as indented JSON."""
    try:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, cls=PathEncoder)
            logger.debug(f"Saved JSON to: {file_path}")
    except Exception as e:
        logger.error(f"Error saving JSON to {file_path}: {e}")
        raise


def load_json(file_path: Union[str, Path]) -> Any:
    """Load JSON data from a file."""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        logger.error(f"Error loading JSON from {file_path}: {e}")
        raise


def write_jsonl(file_path: Union[str, Path], records: Iterable[Dict[str, Any]]) -> int:
    """Write one JSON object per line.

    Returns:
        int: Number of records written.
    """
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, cls=PathEncoder))
            f.write("\n")
            n += 1
    logger.debug(f"Wrote {n} records to {path}")
    return n


def iter_jsonl(file_path: Union[str, Path]) -> Iterator[Dict[str, Any]]:
    """Yield records from a line-delimited JSON file, skipping blank lines.

    Raises:
        JsonLineError: Naming the file and the 1-based line that failed.
    """
    with open(file_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise JsonLineError(str(file_path), lineno, e.msg) from e


def read_jsonl(file_path: Union[str, Path]) -> List[Dict[str, Any]]:
    return list(iter_jsonl(file_path))


def collect_files(directory: Union[str, Path], suffix: str) -> List[Path]:
    """Collect files with a suffix under a directory, sorted by path.

    Raises:
        FileNotFoundError: If the directory doesn't exist
    """
    directory = Path(directory)
    if not directory.exists():
        raise FileNotFoundError(f"Directory not found: {directory}")
    files = []
    for root, _, filenames in os.walk(directory):
        for filename in filenames:
            if filename.endswith(suffix):
                files.append(Path(root) / filename)
    return sorted(files)
