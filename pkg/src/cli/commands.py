import logging
from argparse import Namespace
from pathlib import Path

from config.general import settings
from config.run import RunConfig, load_run_config, save_run_config
from src.datagen.generator import generate_dataset
from src.datagen.labels import build_examples
from src.datagen.repo import collection_summary, dataset_load, dataset_save, export_annotations
from src.datagen.schemas import SoundscapeCollection
from src.exceptions import DataError, MatrixError, UsageError
from src.metrics.matrix import evaluate, run_ablation, run_matrix
from src.metrics.report import (
    FLOAT_FORMAT,
    emit_ablation_gaps,
    emit_report,
    f1_table,
    write_scenario_detail,
)
from src.models.adapter import AdapterComposite, NeuralAdapter, compose, extract_target
from src.models.incremental import train_adapter_tl, train_simple_tl, train_source
from src.models.repo import checkpoint_load, checkpoint_save
from src.models.schemas import ModelKind, SedCnnConfig
from src.models.sedcnn import SedCnn, build_source, migrate_weights
from src.models.utils import parameter_count, parameter_digest
from src.nncore.utils import derive_seed, make_rng
from src.training.trainer import TrainingLog

logger = logging.getLogger(__name__)

DATASET_SUFFIX = ".sedd"
# Sub-streams of the run seed used by the training commands.
INIT_STREAM, TRAIN_STREAM, MIGRATE_STREAM, ADAPTER_STREAM = range(4)


def split_list(value: str | None) -> list[str] | None:
    if value is None:
        return None
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise UsageError(f"empty list {value!r}")
    return items


def parse_counts(value: str | None) -> list[int] | None:
    items = split_list(value)
    if items is None:
        return None
    try:
        counts = [int(item) for item in items]
    except ValueError:
        raise UsageError(f"counts must be integers, got {value!r}")
    if len(counts) != 3:
        raise UsageError(f"counts need three values train,val,test, got {value!r}")
    if any(count < 1 for count in counts):
        raise DataError(f"every split needs at least one soundscape, got counts {tuple(counts)}")
    return counts


def resolve_config(args: Namespace) -> RunConfig:
    """Preset, then --config file, then explicit flags."""
    overrides = {
        "seed": getattr(args, "seed", None),
        "classes": split_list(getattr(args, "classes", None)),
        "regimes": split_list(getattr(args, "regime", None)),
        "counts": parse_counts(getattr(args, "counts", None)),
        "workers": getattr(args, "workers", None),
    }
    if getattr(args, "progress", False) or settings.progress:
        overrides["train"] = {"progress": True}
    if getattr(args, "max_epochs", None) is not None:
        overrides.setdefault("train", {})["early_stop"] = {"max_epochs": args.max_epochs}
    return load_run_config(
        getattr(args, "config", None),
        overrides,
        preset=getattr(args, "preset", None),
        full=getattr(args, "full", False),
    )


def output_path(value: str | None, *parts: str) -> Path:
    return Path(value) if value else Path(settings.output_dir).joinpath(*parts)


def log_path(value: str | None, model_path: Path) -> Path:
    return output_path(value, "logs", f"{model_path.stem}_log.csv")


def load_split(data: str | Path, split: str) -> SoundscapeCollection:
    path = Path(data)
    if path.is_dir():
        path = path / f"{split}{DATASET_SUFFIX}"
    return dataset_load(path)


def load_sedcnn(path: str | Path) -> SedCnn:
    model = checkpoint_load(path)
    if model.kind is not ModelKind.SED_CNN:
        raise DataError(f"{path}: expected a {ModelKind.SED_CNN.name} checkpoint, got {model.kind.name}")
    return model


def load_composite(path: str | Path) -> AdapterComposite:
    model = checkpoint_load(path)
    if model.kind is not ModelKind.ADAPTER_COMPOSITE:
        raise DataError(f"{path}: expected an {ModelKind.ADAPTER_COMPOSITE.name} checkpoint, got {model.kind.name}")
    return model


def write_log(log: TrainingLog, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    log.to_csv(path)
    logger.info(f"training log written to {path}")


def cmd_gen_data(args: Namespace) -> int:
    """Generates train/val/test dataset files and prints a per-split summary."""
    config = resolve_config(args)
    if not config.classes:
        raise UsageError("gen-data needs --classes or --preset")
    splits = generate_dataset(config.classes, config.regime, config.counts, config.seed, config.generator)
    out = output_path(args.out, "datasets")
    for split, collection in splits.items():
        dataset_save(collection, out / f"{split}{DATASET_SUFFIX}")
        if args.annotations:
            export_annotations(collection, out / f"{split}_annotations.csv", prefix=split)
        summary = collection_summary(collection)
        counts = ", ".join(f"{name}={count}" for name, count in summary["events"].items())
        present = ", ".join(f"{name}={count}" for name, count in summary["present"].items())
        print(
            f"{split}: {summary['soundscapes']} soundscapes, events [{counts}], "
            f"present in [{present}], empty fraction {summary['empty_fraction']:.4f}"
        )
    save_run_config(config, out / "run_config.json")
    return 0


def cmd_train_source(args: Namespace) -> int:
    """Trains a source model on a subset of the dataset classes."""
    config = resolve_config(args)
    train_data, val_data = load_split(args.data, "train"), load_split(args.data, "val")
    classes = config.classes or train_data.class_names
    train_set, val_set = build_examples(train_data, classes), build_examples(val_data, classes)
    geometry = {"input_mels": train_set.features.shape[1], "input_frames": train_set.features.shape[2]}
    model_config = SedCnnConfig(**{**config.model.model_dump(), **geometry})

    model = build_source(model_config, classes, make_rng(derive_seed(config.seed, INIT_STREAM)))
    model, log = train_source(model, train_set, val_set, config.train, make_rng(derive_seed(config.seed, TRAIN_STREAM)))
    out = output_path(args.out, "models", "source.sedm")
    checkpoint_save(model, out)
    write_log(log, log_path(args.log, out))
    print(f"source model on {classes}: best epoch {log.best_epoch}, saved to {out}")
    return 0


def cmd_train_incremental(args: Namespace) -> int:
    """Adds ``--new-class`` to a source model by simple TL or through the neural adapter."""
    config = resolve_config(args)
    source = load_sedcnn(args.source)
    if args.new_class in source.class_names:
        raise DataError(f"class {args.new_class!r} is already learned by the source model")
    classes = source.class_names + [args.new_class]
    train_data, val_data = load_split(args.data, "train"), load_split(args.data, "val")
    train_set, val_set = build_examples(train_data, classes), build_examples(val_data, classes)

    target = migrate_weights(source, args.new_class, make_rng(derive_seed(config.seed, MIGRATE_STREAM)))
    train_rng = make_rng(derive_seed(config.seed, TRAIN_STREAM))
    if args.method == "simple":
        model, log = train_simple_tl(target, train_set, val_set, config.train, train_rng)
    else:
        n = source.num_classes
        adapter = NeuralAdapter(n, n + 1, make_rng(derive_seed(config.seed, ADAPTER_STREAM)), config.adapter)
        model, log = train_adapter_tl(compose(source, adapter, target), train_set, val_set, config.train, train_rng)
    out = output_path(args.out, "models", f"{args.method}.sedm")
    checkpoint_save(model, out)
    write_log(log, log_path(args.log, out))
    print(f"{args.method} model on {classes}: best epoch {log.best_epoch}, saved to {out}")
    return 0


def subset_columns(model: SedCnn | AdapterComposite, subset: str) -> list[int]:
    """
    Column indices of "all" classes, the previously learned "ds" classes or the
    "new" class. The new class is always the last column, which is where
    migration puts it; a plain source model has no new class of its own.
    """
    n = model.num_classes
    if subset == "all":
        return list(range(n))
    if n < 2:
        raise UsageError(f"--classes {subset} needs a model with at least two classes")
    if model.kind is ModelKind.SED_CNN:
        logger.warning(
            f"--classes {subset} on a plain model treats its last class {model.class_names[-1]!r} as the new one"
        )
    return list(range(n - 1)) if subset == "ds" else [n - 1]


def cmd_evaluate(args: Namespace) -> int:
    """Prints and writes per-class and micro F1 for a class subset."""
    model = checkpoint_load(args.model)
    examples = build_examples(load_split(args.data, "test"), model.class_names)
    columns = subset_columns(model, args.classes)
    result = evaluate(model, examples, columns, args.threshold)
    per_class = {model.class_names[score.index]: score.f1 for score in result.per_class}
    table = f1_table([model.class_names[column] for column in columns], per_class, result.micro_f1, result.macro_f1)
    print(table.to_string(index=False, float_format=lambda value: FLOAT_FORMAT % value))
    if args.report:
        path = Path(args.report)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return 0


def cmd_ablation(args: Namespace) -> int:
    """Scores the A, B and C outputs of an adapter composite."""
    composite = load_composite(args.composite)
    examples = build_examples(load_split(args.data, "test"), composite.class_names)
    result = run_ablation(composite, examples, args.threshold)
    print(f"f1_A={result.f1_A:.4f} f1_B={result.f1_B:.4f} f1_C={result.f1_C:.4f}")
    if args.report:
        path = Path(args.report)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
    return 0


def cmd_run_matrix(args: Namespace) -> int:
    """
    Runs the leave-one-out matrix for every configured regime and writes
    reports/<regime>/matrix.csv, matrix.md and one JSON file per scenario.
    """
    config = resolve_config(args)
    if len(config.classes) < 2:
        raise UsageError("run-matrix needs at least two classes (--classes, --preset or config)")
    matrix_config = config.matrix_config()
    out = output_path(args.out)
    save_run_config(config, out / "run_config.json")

    results = {}
    failures = []
    for regime in config.regimes:
        reports_dir = out / "reports" / regime.value

        def on_complete(index, report, directory=reports_dir / "scenarios"):
            write_scenario_detail(report, directory)

        try:
            rows = run_matrix(config.classes, regime, matrix_config, config.seed, on_complete)
        except MatrixError as error:
            failures.append(error)
            continue
        emit_report(rows, "csv", reports_dir / "matrix.csv")
        emit_report(rows, "markdown", reports_dir / "matrix.md")
        results[regime.value] = rows
        print(f"{regime.value}: {len(rows) - 1} scenarios written to {reports_dir}")
    if results:
        emit_ablation_gaps(results, out / "reports" / "ablation_gaps.csv")
    if failures:
        raise MatrixError([failure for error in failures for failure in error.failures])
    return 0


def cmd_inspect(args: Namespace) -> int:
    model = checkpoint_load(args.model)
    print(f"kind: {model.kind.name}")
    print(f"classes: {', '.join(model.class_names)}")
    print(f"parameters: {parameter_count(model)}")
    if model.kind is ModelKind.ADAPTER_COMPOSITE:
        print(f"source classes: {', '.join(model.source.class_names)}")
        print(f"source digest: {parameter_digest(model.source)}")
    else:
        print(f"digest: {parameter_digest(model)}")
    return 0


def cmd_extract_target(args: Namespace) -> int:
    """Saves the target branch (B) of a composite as a standalone model."""
    target = extract_target(load_composite(args.composite))
    out = output_path(args.out, "models", "target.sedm")
    checkpoint_save(target, out)
    print(f"target branch on {target.class_names} saved to {out}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-source": cmd_train_source,
    "train-incremental": cmd_train_incremental,
    "evaluate": cmd_evaluate,
    "ablation": cmd_ablation,
    "run-matrix": cmd_run_matrix,
    "inspect": cmd_inspect,
    "extract-target": cmd_extract_target,
}
