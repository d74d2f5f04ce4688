#!/usr/bin/env python3

import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from loguru import logger

from d2t.corpus import (
    TASKS,
    compare_with_reference,
    dataset_sizes,
    extract_task_dataset,
    import_webnlg,
    read_corpus,
    seen_entities,
    write_corpus,
)
from d2t.evaluation import format_domains, format_report
from d2t.experiments import RANDOM_SEEDS, evaluate_run, stage_table
from d2t.lexicalization import TemplateStore, template_store_train
from d2t.neural.checkpoint import load_neuralreg, load_translator, save_neuralreg, save_seq2seq
from d2t.neural.engine import train_translator
from d2t.neural.training import TrainingConfig
from d2t.ordering import OrderModel, order_majority_train
from d2t.pipeline import STAGES, PipelineConfig, PipelineResources, run_corpus
from d2t.realization import RuleTable, rules_extract
from d2t.reg import reg_train
from d2t.structuring import StructModel, structure_majority_train
from d2t.utils.config import DEFAULT_SEED, load_config_file
from d2t.utils.file_utils import read_jsonl, save_json, write_file, write_jsonl
from d2t.utils.log_utils import configure_logging
from d2t.utils.models import Corpus, RunManifest

# File names inside a model directory.
ORDER_TABLE = "ordering.majority.jsonl"
STRUCT_TABLE = "structuring.majority.jsonl"
TEMPLATE_STORE = "lexicalization.templates.jsonl"
RULES = "realization.rules.jsonl"
REG_CHECKPOINT = "reg.neuralreg.pt"
BPE_TASKS = ("lexicalization", "e2e")
TRANSLATORS = {
    "ordering": "order_translator",
    "structuring": "struct_translator",
    "lexicalization": "lex_translator",
    "e2e": "e2e_translator",
}


def corpus_version(path: Path) -> str:
    digest = hashlib.sha1(Path(path).read_bytes()).hexdigest()[:12]
    return f"sha1:{digest}"


def write_manifest(
    ctx: click.Context,
    location: Path,
    started: datetime,
    inputs: Dict[str, Any],
    outputs: Dict[str, Any],
    corpus: Optional[Path] = None,
) -> Path:
    """Write ``manifest.json`` into ``location`` (or next to it, for a file)."""
    target = location / "manifest.json" if location.is_dir() else location.with_suffix(".manifest.json")
    manifest = RunManifest(
        command=ctx.command_path,
        config={k: str(v) if isinstance(v, Path) else v for k, v in ctx.params.items()},
        inputs={k: str(v) for k, v in inputs.items()},
        outputs={k: str(v) for k, v in outputs.items()},
        seed=ctx.obj["seed"],
        corpus_version=corpus_version(corpus) if corpus is not None else None,
        started_at=started,
        finished_at=datetime.now(timezone.utc),
    )
    save_json(target, manifest.model_dump(mode="json"))
    logger.debug(f"Wrote manifest {target}")
    return target


def load_resources(models: Optional[Path], corpus: Corpus, arch: str = "gru", beam: Optional[int] = None) -> PipelineResources:
    """Load whatever trained artifacts ``models`` holds; absent ones stay empty."""
    res = PipelineResources(seen_entities=seen_entities(corpus))
    if models is None:
        return res
    if (models / ORDER_TABLE).exists():
        res.order_model = OrderModel.load(models / ORDER_TABLE)
    if (models / STRUCT_TABLE).exists():
        res.struct_model = StructModel.load(models / STRUCT_TABLE)
    if (models / TEMPLATE_STORE).exists():
        res.template_store = TemplateStore.load(models / TEMPLATE_STORE)
    if (models / RULES).exists():
        res.rules = RuleTable.load(models / RULES)
    if (models / REG_CHECKPOINT).exists():
        res.reg_model = load_neuralreg(models / REG_CHECKPOINT)
    for task, attribute in TRANSLATORS.items():
        paths = sorted(models.glob(f"{task}.{arch}.run*.pt"))
        if paths:
            setattr(res, attribute, load_translator(paths, beam=beam))
    return res


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON file with one section of option defaults per subcommand")
@click.option("--seed", type=int, default=DEFAULT_SEED, envvar="D2T_SEED", show_default=True, help="Global seed")
@click.option("--log-level", default="INFO", envvar="D2T_LOG_LEVEL", show_default=True, help="stderr log level")
@click.option("--log-file", default="d2t_debug.log", envvar="D2T_LOG_FILE", show_default=True,
              help="Debug log file; empty to disable")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], seed: int, log_level: str, log_file: str) -> None:
    """d2t - pipeline and end-to-end RDF-to-text generation."""
    configure_logging(log_level, log_file or None)
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    if config_path is not None:
        try:
            ctx.default_map = load_config_file(config_path)
        except ValueError as e:
            raise click.UsageError(str(e)) from e


@cli.command("import")
@click.option("--xml", "xml_dir", type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of WebNLG XML files")
@click.option("--jsonl", "jsonl_path", type=click.Path(exists=True, path_type=Path),
              help="Existing interchange file or directory to normalize")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Interchange file to write")
@click.pass_context
def import_cmd(ctx: click.Context, xml_dir: Optional[Path], jsonl_path: Optional[Path], out: Path) -> None:
    """Convert the corpus into the line-delimited interchange format."""
    if (xml_dir is None) == (jsonl_path is None):
        raise click.UsageError("give exactly one of --xml or --jsonl")
    started = datetime.now(timezone.utc)
    source = xml_dir or jsonl_path
    try:
        corpus = import_webnlg(source, "xml" if xml_dir is not None else "jsonl")
        n = write_corpus(corpus, out)
    except (OSError, ValueError) as e:
        logger.error(f"Import failed: {e}")
        raise click.ClickException(str(e)) from e
    click.echo(f"Wrote {n} entries to {out}")
    write_manifest(ctx, out, started, {"source": source}, {"corpus": out}, corpus=out)


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--task", "tasks", multiple=True, type=click.Choice(list(TASKS) + ["lex"]),
              help="Tasks to extract; all when omitted")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--min-order-size", default=2, show_default=True, type=int)
@click.option("--sizes", is_flag=True, help="Print dataset sizes and differences from the published counts")
@click.pass_context
def extract(
    ctx: click.Context, corpus_path: Path, tasks: Tuple[str, ...], out: Path, min_order_size: int, sizes: bool
) -> None:
    """Write train/dev/test datasets for each stage."""
    started = datetime.now(timezone.utc)
    try:
        corpus = read_corpus(corpus_path)
        out.mkdir(parents=True, exist_ok=True)
        written: Dict[str, Path] = {}
        for task in tasks or TASKS:
            for ds in extract_task_dataset(corpus, task, min_order_size):
                path = out / f"{ds.task}.{ds.split}.jsonl"
                write_jsonl(path, (i.model_dump(mode="json") for i in ds.instances))
                written[f"{ds.task}.{ds.split}"] = path
                click.echo(f"{ds.task:<15} {ds.split:<5} sources={ds.n_sources} targets={ds.n_targets}")
        if sizes:
            differences = compare_with_reference(dataset_sizes(corpus, min_order_size))
            report = "\n".join(differences) if differences else "all counts match the published sizes"
            write_file(out / "sizes.txt", report + "\n")
            written["sizes"] = out / "sizes.txt"
            click.echo(report)
    except (OSError, ValueError) as e:
        logger.error(f"Extraction failed: {e}")
        raise click.ClickException(str(e)) from e
    write_manifest(ctx, out, started, {"corpus": corpus_path}, written, corpus=corpus_path)


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--task", required=True,
              type=click.Choice(["ordering", "structuring", "lex", "lexicalization", "reg", "e2e", "rules"]))
@click.option("--engine", default="majority", show_default=True, type=click.Choice(["majority", "neural"]),
              help="Frequency tables or sequence-to-sequence models (reg and e2e are always neural)")
@click.option("--arch", default="gru", show_default=True, type=click.Choice(["gru", "transformer"]))
@click.option("--profile", default="desk", show_default=True, type=click.Choice(["desk", "paper"]))
@click.option("--runs", type=int, help="Independent runs to ensemble; profile default when omitted")
@click.option("--max-updates", type=int, help="Override the update budget")
@click.option("--sentence-windows", is_flag=True, help="Also store per-sentence-window templates")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Model directory")
@click.pass_context
def train(
    ctx: click.Context,
    corpus_path: Path,
    task: str,
    engine: str,
    arch: str,
    profile: str,
    runs: Optional[int],
    max_updates: Optional[int],
    sentence_windows: bool,
    out: Path,
) -> None:
    """Train one stage's model and write it into the model directory."""
    started = datetime.now(timezone.utc)
    seed = ctx.obj["seed"]
    task = "lexicalization" if task == "lex" else task
    outputs: Dict[str, Path] = {}
    try:
        corpus = read_corpus(corpus_path)
        out.mkdir(parents=True, exist_ok=True)
        if task == "rules":
            rules = rules_extract(corpus)
            rules.save(out / RULES)
            outputs["rules"] = out / RULES
        elif task == "reg":
            cfg = TrainingConfig.for_reg(profile)  # type: ignore[arg-type]
            train_ds, dev_ds, _ = extract_task_dataset(corpus, "reg")
            reg = reg_train(train_ds, cfg, dev_ds, seed)
            outputs["reg"] = save_neuralreg(out / REG_CHECKPOINT, reg)
        elif engine == "majority" and task != "e2e":
            train_ds, _, _ = extract_task_dataset(corpus, task)
            if task == "ordering":
                outputs["ordering"] = out / ORDER_TABLE
                order_majority_train(train_ds).save(outputs["ordering"])
            elif task == "structuring":
                outputs["structuring"] = out / STRUCT_TABLE
                structure_majority_train(train_ds).save(outputs["structuring"])
            else:
                outputs["lexicalization"] = out / TEMPLATE_STORE
                template_store_train(train_ds, sentence_windows).save(outputs["lexicalization"])
        else:
            overrides: Dict[str, Any] = {}
            if runs is not None:
                overrides["runs"] = runs
            if max_updates is not None:
                overrides["max_updates"] = max_updates
            cfg = TrainingConfig.for_profile(profile, arch, **overrides)  # type: ignore[arg-type]
            train_ds, dev_ds, _ = extract_task_dataset(corpus, task)
            seeds = [seed + i for i in range(cfg.runs)]
            translator, results = train_translator(
                train_ds.pairs(), cfg, seeds, dev_ds.pairs() or None, use_bpe=task in BPE_TASKS
            )
            for i, result in enumerate(results):
                path = out / f"{task}.{arch}.run{i}.pt"
                outputs[f"run{i}"] = save_seq2seq(path, result.model, translator.vocab, cfg, task, translator.bpe)
                click.echo(f"run {i}: seed {result.seed}, best dev loss {result.best_dev_loss:.4f}")
    except (OSError, ValueError, RuntimeError) as e:
        logger.error(f"Training {task} failed: {e}")
        raise click.ClickException(str(e)) from e
    for name, path in outputs.items():
        click.echo(f"{name}: {path}")
    write_manifest(ctx, out, started, {"corpus": corpus_path}, outputs, corpus=corpus_path)


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--models", type=click.Path(exists=True, file_okay=False, path_type=Path), help="Model directory")
@click.option("--split", default="test", show_default=True, type=click.Choice(["train", "dev", "test"]))
@click.option("--mode", default="pipeline", show_default=True, type=click.Choice(["pipeline", "e2e"]))
@click.option("--ordering", default="majority", show_default=True,
              type=click.Choice(["random", "majority", "neural", "gold"]))
@click.option("--structuring", default="majority", show_default=True,
              type=click.Choice(["random", "majority", "neural", "gold"]))
@click.option("--lex", "lexicalization", default="majority", show_default=True,
              type=click.Choice(["random", "majority", "neural", "gold"]))
@click.option("--reg", default="onlynames", show_default=True, type=click.Choice(["onlynames", "neuralreg", "gold"]))
@click.option("--oracle-upto", type=click.Choice(list(STAGES)), help="Use gold output up to this stage")
@click.option("--arch", default="gru", show_default=True, type=click.Choice(["gru", "transformer"]))
@click.option("--beam", type=int, help="Beam size; checkpoint default when omitted")
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_context
def run(
    ctx: click.Context,
    corpus_path: Path,
    models: Optional[Path],
    split: str,
    mode: str,
    ordering: str,
    structuring: str,
    lexicalization: str,
    reg: str,
    oracle_upto: Optional[str],
    arch: str,
    beam: Optional[int],
    workers: int,
    out: Path,
) -> None:
    """Verbalize every entry of a split and write run records."""
    started = datetime.now(timezone.utc)
    try:
        cfg = PipelineConfig(
            mode=mode,
            ordering=ordering,
            structuring=structuring,
            lexicalization=lexicalization,
            reg=reg,
            oracle_upto=oracle_upto,
            seed=ctx.obj["seed"],
        )
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    try:
        corpus = read_corpus(corpus_path)
        resources = load_resources(models, corpus, arch, beam)
        records = run_corpus(corpus, split, cfg, resources, workers)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "run.jsonl", records)
        write_file(out / "text.txt", "".join(r["text"] + "\n" for r in records))
    except (OSError, ValueError, RuntimeError) as e:
        logger.error(f"Run failed: {e}")
        raise click.ClickException(str(e)) from e
    fallbacks = sum(any(r["trace"]["fallbacks"].values()) for r in records)
    click.echo(f"Wrote {len(records)} texts to {out} ({fallbacks} with a fallback)")
    inputs: Dict[str, Any] = {"corpus": corpus_path}
    if models is not None:
        inputs["models"] = models
    write_manifest(
        ctx, out, started, inputs, {"run": out / "run.jsonl", "text": out / "text.txt"}, corpus=corpus_path
    )


@cli.command("eval")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--refs", "refs_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Interchange corpus holding the reference texts")
@click.option("--split", default="test", show_default=True, type=click.Choice(["train", "dev", "test"]))
@click.option("--metric", default="bleu", show_default=True, type=click.Choice(["bleu", "accuracy"]))
@click.option("--domains", "show_domains", is_flag=True, help="Also print the per-domain table")
@click.pass_context
def eval_cmd(ctx: click.Context, run_dir: Path, refs_path: Path, split: str, metric: str, show_domains: bool) -> None:
    """Score a run directory against the reference texts."""
    started = datetime.now(timezone.utc)
    try:
        records = read_jsonl(run_dir / "run.jsonl")
        report = evaluate_run(records, read_corpus(refs_path), split, metric)
    except (OSError, ValueError, KeyError) as e:
        logger.error(f"Evaluation failed: {e!r}")
        raise click.ClickException(f"cannot evaluate {run_dir}: {e!r}") from e
    text = format_report([(run_dir.name, report)], include_meteor=metric == "bleu")
    if show_domains:
        text += "\n" + format_domains(report)
    click.echo(text)
    write_file(run_dir / f"eval.{metric}.txt", text + "\n")
    save_json(run_dir / f"eval.{metric}.json", report.model_dump(mode="json"))
    write_manifest(
        ctx,
        run_dir / f"eval.{metric}.json",
        started,
        {"run": run_dir / "run.jsonl", "refs": refs_path},
        {"report": run_dir / f"eval.{metric}.txt", "record": run_dir / f"eval.{metric}.json"},
        corpus=refs_path,
    )


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--models", type=click.Path(exists=True, file_okay=False, path_type=Path), help="Model directory")
@click.option("--split", default="test", show_default=True, type=click.Choice(["dev", "test"]))
@click.option("--task", "tasks", multiple=True, type=click.Choice(["ordering", "structuring", "lexicalization", "reg"]))
@click.option("--seeds", default=len(RANDOM_SEEDS), show_default=True, type=int, help="Seeds for random engines")
@click.option("--arch", default="gru", show_default=True, type=click.Choice(["gru", "transformer"]))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Directory for the report")
@click.pass_context
def report(
    ctx: click.Context,
    corpus_path: Path,
    models: Optional[Path],
    split: str,
    tasks: Tuple[str, ...],
    seeds: int,
    arch: str,
    out: Optional[Path],
) -> None:
    """Stage-level results of every engine with gold input."""
    started = datetime.now(timezone.utc)
    try:
        corpus = read_corpus(corpus_path)
        resources = load_resources(models, corpus, arch)
        datasets = {}
        for task in tasks or ("ordering", "structuring", "lexicalization", "reg"):
            _, dev_ds, test_ds = extract_task_dataset(corpus, task)
            datasets[task] = test_ds if split == "test" else dev_ds
        seed_list: List[int] = [ctx.obj["seed"] + i for i in range(seeds)]
        text = stage_table(datasets, resources, seed_list).format()
    except (OSError, ValueError, RuntimeError) as e:
        logger.error(f"Report failed: {e}")
        raise click.ClickException(str(e)) from e
    click.echo(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_file(out / "report.txt", text + "\n")
        inputs: Dict[str, Any] = {"corpus": corpus_path}
        if models is not None:
            inputs["models"] = models
        write_manifest(ctx, out, started, inputs, {"report": out / "report.txt"}, corpus=corpus_path)

