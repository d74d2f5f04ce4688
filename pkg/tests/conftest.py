"""Configure pytest for d2t tests."""
import sys
import warnings
from pathlib import Path

import pytest
from loguru import logger

from d2t.corpus import extract_task_dataset, import_webnlg
from d2t.lexicalization import template_store_train
from d2t.ordering import order_majority_train
from d2t.pipeline import PipelineResources
from d2t.realization import rules_extract
from d2t.structuring import structure_majority_train

# Filter Pydantic deprecation warnings
warnings.filterwarnings(
    "ignore",
    message="Support for class-based.*",
    category=DeprecationWarning,
    module="pydantic.*"
)

FIXTURES = Path(__file__).parent / "fixtures"

# Configure test logging
LOG_FORMAT = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | <level>{message}</level> | {extra}"


@pytest.fixture(autouse=True)
def setup_logging(request):
    """Configure logging for tests with file and console output."""
    logs_dir = Path("tests/logs")
    logs_dir.mkdir(parents=True, exist_ok=True)

    test_name = request.node.name.replace("[", "_").replace("]", "_")
    log_file = logs_dir / f"{test_name}.log"

    logger.remove()
    logger.add(
        log_file,
        format=LOG_FORMAT,
        level="DEBUG",
        rotation="1 MB",
        retention="3 days",
        enqueue=True
    )
    logger.add(
        sys.stderr,
        format=LOG_FORMAT,
        level="INFO",
        enqueue=True
    )
    logger.configure(
        extra={
            "test_name": test_name,
            "test_path": str(request.path)
        }
    )

    yield

    logger.info(f"Test logs saved to: {log_file}")


@pytest.fixture(scope="session")
def sample_dir():
    """The WebNLG-shaped XML sample: 20 entries over train/dev/test."""
    return FIXTURES / "webnlg_sample"


@pytest.fixture(scope="session")
def corpus(sample_dir):
    return import_webnlg(sample_dir, "xml")


@pytest.fixture(scope="session")
def datasets(corpus):
    """(train, dev, test) per task."""
    return {
        task: extract_task_dataset(corpus, task)
        for task in ("ordering", "structuring", "lexicalization", "reg", "e2e")
    }


@pytest.fixture(scope="session")
def rules(corpus):
    return rules_extract(corpus)


@pytest.fixture(scope="session")
def resources(corpus, datasets, rules):
    """Majority tables and rules trained on the sample's train split."""
    return PipelineResources(
        order_model=order_majority_train(datasets["ordering"][0]),
        struct_model=structure_majority_train(datasets["structuring"][0]),
        template_store=template_store_train(datasets["lexicalization"][0]),
        rules=rules,
    )


@pytest.fixture
def entries(corpus):
    """Corpus entries keyed by eid."""
    return {e.eid: e for e in corpus.entries}
