import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from src.datagen.generator import generate_dataset
from src.datagen.labels import build_examples
from src.datagen.schemas import Regime
from src.exceptions import DataError, MatrixError, ScenarioError, SedError
from src.metrics.schemas import OVERALL, SCORE_COLUMNS, AblationResult, MatrixConfig, ScenarioReport
from src.metrics.scoring import F1Result, f1_segment
from src.models.adapter import AdapterComposite, NeuralAdapter, compose
from src.models.incremental import train_adapter_tl, train_simple_tl, train_source
from src.models.sedcnn import build_source, migrate_weights
from src.models.utils import parameter_digest
from src.nncore.layers import sigmoid
from src.nncore.utils import derive_seed, make_rng
from src.training.dataset import ExampleSet

logger = logging.getLogger(__name__)

OnComplete = Callable[[int, ScenarioReport], None]

# Sub-streams of one scenario seed.
DATA_SOURCE, DATA_TARGET, INIT_SOURCE, TRAIN_SOURCE, MIGRATE, TRAIN_SIMPLE, INIT_ADAPTER, TRAIN_ADAPTER = range(8)


def scenario_id(classes: list[str], source_classes: list[str]) -> str:
    """Scenario label built from the 1-based positions of the source classes, e.g. "C1C2C3"."""
    return "".join(f"C{classes.index(name) + 1}" for name in source_classes)


def evaluate(model, examples: ExampleSet, classes: list[int] | None = None, threshold: float = 0.5) -> F1Result:
    """Segment F1 of ``model`` on ``examples`` over a column subset."""
    if examples.class_names != model.class_names:
        raise DataError(f"model classes {model.class_names} differ from dataset classes {examples.class_names}")
    return f1_segment(model.predict_proba(examples.features), examples.labels, threshold, classes)


def run_ablation(composite: AdapterComposite, test_set: ExampleSet, threshold: float = 0.5) -> AblationResult:
    """
    Scores the adapter branch (A), the target branch (B) and the merged
    output (C) as standalone predictors over all classes of ``test_set``.
    """
    if test_set.class_names != composite.class_names:
        raise DataError(
            f"composite classes {composite.class_names} differ from dataset classes {test_set.class_names}"
        )
    branches = composite.predict_branch_logits(test_set.features)
    scores = {
        key: f1_segment(sigmoid(logits), test_set.labels, threshold).micro_f1 for key, logits in branches.items()
    }
    return AblationResult(f1_A=scores["A"], f1_B=scores["B"], f1_C=scores["C"])


def _per_class(result: F1Result, class_names: list[str]) -> dict[str, float]:
    return {class_names[score.index]: score.f1 for score in result.per_class}


def run_scenario(
    classes: list[str],
    new_class: str,
    regime: Regime,
    config: MatrixConfig,
    seed: int,
) -> ScenarioReport:
    """
    One leave-one-out scenario: ``new_class`` is withheld from the source.

    Trains M_S on the remaining N classes, then builds the N+1-class model twice
    from the same migrated weights, once by simple transfer learning and once
    through the neural adapter with M_S frozen. All randomness derives from
    ``seed``.
    """
    source_classes = [name for name in classes if name != new_class]
    target_classes = source_classes + [new_class]
    scenario = scenario_id(classes, source_classes)
    n = len(source_classes)

    def stream(key: int) -> np.random.Generator:
        return make_rng(derive_seed(seed, key))

    generate = dict(regime=regime, counts=config.counts, config=config.generator, universe=classes)
    source_data = generate_dataset(source_classes, seed=derive_seed(seed, DATA_SOURCE), **generate)
    target_data = generate_dataset(target_classes, seed=derive_seed(seed, DATA_TARGET), **generate)
    ds = {split: build_examples(collection, source_classes) for split, collection in source_data.items()}
    dt = {split: build_examples(collection, target_classes) for split, collection in target_data.items()}

    source = build_source(config.model, source_classes, stream(INIT_SOURCE))
    source, _ = train_source(source, ds["train"], ds["val"], config.train, stream(TRAIN_SOURCE))
    ms_ds = evaluate(source, ds["test"], threshold=config.threshold)
    logger.info(f"{scenario}: source F1 on D_S {ms_ds.micro_f1:.4f}")

    simple = migrate_weights(source, new_class, stream(MIGRATE))
    simple, _ = train_simple_tl(simple, dt["train"], dt["val"], config.train, stream(TRAIN_SIMPLE))

    target = migrate_weights(source, new_class, stream(MIGRATE))
    adapter = NeuralAdapter(n, n + 1, stream(INIT_ADAPTER), config.adapter)
    composite = compose(source, adapter, target)
    digest = parameter_digest(source)
    composite, _ = train_adapter_tl(composite, dt["train"], dt["val"], config.train, stream(TRAIN_ADAPTER))
    if parameter_digest(composite.source) != digest:
        raise ScenarioError(scenario, "source parameters changed during adapter training")

    ds_cols, new_cols = list(range(n)), [n]
    simple_all = evaluate(simple, dt["test"], threshold=config.threshold)
    adapter_all = evaluate(composite, dt["test"], threshold=config.threshold)
    ablation = run_ablation(composite, dt["test"], config.threshold)
    report = ScenarioReport(
        scenario=scenario,
        source_classes=source_classes,
        new_class=new_class,
        ms_ds=ms_ds.micro_f1,
        simple_ds=evaluate(simple, dt["test"], ds_cols, config.threshold).micro_f1,
        simple_new=evaluate(simple, dt["test"], new_cols, config.threshold).micro_f1,
        simple_all=simple_all.micro_f1,
        adapter_ds=evaluate(composite, dt["test"], ds_cols, config.threshold).micro_f1,
        adapter_new=evaluate(composite, dt["test"], new_cols, config.threshold).micro_f1,
        adapter_all=adapter_all.micro_f1,
        **ablation.model_dump(),
        macro={"ms": ms_ds.macro_f1, "simple": simple_all.macro_f1, "adapter": adapter_all.macro_f1},
        per_class={
            "ms": _per_class(ms_ds, source_classes),
            "simple": _per_class(simple_all, target_classes),
            "adapter": _per_class(adapter_all, target_classes),
        },
    )
    logger.info(
        f"{scenario}: simple D_S {report.simple_ds:.4f}, adapter D_S {report.adapter_ds:.4f}, "
        f"A/B/C {report.f1_A:.4f}/{report.f1_B:.4f}/{report.f1_C:.4f}"
    )
    return report


def overall_row(reports: list[ScenarioReport]) -> ScenarioReport:
    """Column means over the scenario rows."""
    means = {
        column: float(np.clip(np.mean([getattr(report, column) for report in reports]), 0.0, 1.0))
        for column in SCORE_COLUMNS
    }
    return ScenarioReport(scenario=OVERALL, **means)


def run_matrix(
    classes: list[str],
    regime: Regime,
    config: MatrixConfig,
    seed: int,
    on_complete: OnComplete | None = None,
) -> list[ScenarioReport]:
    """
    Runs every leave-one-out scenario over ``classes``.

    Scenario i holds out ``classes[i]`` and uses the seed derived from
    (seed, i). Scenarios may run on ``config.workers`` threads; rows come back
    in class order followed by the overall mean row. ``on_complete(index,
    report)`` fires as soon as a scenario finishes.

    Raises:
    DataError: If fewer than two classes are given.
    MatrixError: If any scenario failed; the completed rows stay on ``error.reports``.
    """
    if len(classes) < 2:
        raise DataError("the experiment matrix needs at least two classes")
    if len(set(classes)) != len(classes):
        raise DataError(f"duplicate class names: {classes}")

    def one(index: int) -> ScenarioReport:
        new_class = classes[index]
        try:
            report = run_scenario(classes, new_class, regime, config, derive_seed(seed, index))
        except ScenarioError:
            logger.exception(f"scenario holding out {new_class!r} failed")
            raise
        except SedError as error:
            logger.exception(f"scenario holding out {new_class!r} failed")
            raise ScenarioError(scenario_id(classes, [c for c in classes if c != new_class]), error.detail)
        if on_complete is not None:
            on_complete(index, report)
        return report

    indices = range(len(classes))
    results: list[ScenarioReport | ScenarioError] = []
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(one, index) for index in indices]
            for future in futures:
                error = future.exception()
                if error is not None and not isinstance(error, ScenarioError):
                    raise error
                results.append(error if error is not None else future.result())
    else:
        for index in indices:
            try:
                results.append(one(index))
            except ScenarioError as error:
                results.append(error)

    failures = [result for result in results if isinstance(result, ScenarioError)]
    reports = [result for result in results if isinstance(result, ScenarioReport)]
    if failures:
        error = MatrixError(failures)
        error.reports = reports
        raise error
    return reports + [overall_row(reports)]
