"""Config-file defaults and process seeding."""

import random
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import torch
from loguru import logger

from d2t.utils.file_utils import load_json

DEFAULT_SEED = 13


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a JSON config whose top-level keys are subcommand names.

    Raises:
        ValueError: If the file does not hold a JSON object.
    """
    data = load_json(path)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    logger.info(f"Loaded config sections {sorted(data)} from {path}")
    return data


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch and pin torch to one deterministic thread."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True, warn_only=True)
