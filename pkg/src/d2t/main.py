#!/usr/bin/env python3

"""
d2t - pipeline and end-to-end RDF-to-text generation.

Usage:
    # Convert the corpus once
    d2t import --xml path/to/webnlg --out corpus.jsonl

    # Train the majority baselines and realization rules
    d2t train --corpus corpus.jsonl --task ordering --out models
    d2t train --corpus corpus.jsonl --task rules --out models

    # Verbalize the test split and score it
    d2t run --corpus corpus.jsonl --models models --out runs/majority
    d2t eval --run runs/majority --refs corpus.jsonl

For more information, run:
    d2t --help
    d2t <command> --help
"""

import sys
from typing import List, Optional

import click
from loguru import logger

from d2t.cli import cli
from d2t.utils.file_utils import load_env_file


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the CLI with proper error handling.

    Args:
        argv: Command line arguments. If None, sys.argv[1:] is used.

    Returns:
        int: 0 on success, 1 on a runtime failure, 2 on a usage error.
    """
    load_env_file()
    try:
        rv = cli.main(args=argv if argv is not None else sys.argv[1:], prog_name="d2t", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return 1
    except (click.Abort, KeyboardInterrupt):
        logger.info("Operation cancelled by user")
        return 1
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
