"""d2t - pipeline and end-to-end RDF-to-text generation."""

__version__ = "0.1.0"

from d2t.corpus import extract_task_dataset, import_webnlg, read_corpus, write_corpus
from d2t.evaluation import accuracy, bleu, breakdown
from d2t.pipeline import PipelineConfig, PipelineResources, run_corpus, run_e2e, run_pipeline
from d2t.utils.models import Corpus, CorpusEntry, LexEntry, ReferenceInstance, Triple, TripleSet

__all__ = [
    "Corpus",
    "CorpusEntry",
    "LexEntry",
    "PipelineConfig",
    "PipelineResources",
    "ReferenceInstance",
    "Triple",
    "TripleSet",
    "accuracy",
    "bleu",
    "breakdown",
    "extract_task_dataset",
    "import_webnlg",
    "read_corpus",
    "run_corpus",
    "run_e2e",
    "run_pipeline",
    "write_corpus",
]
