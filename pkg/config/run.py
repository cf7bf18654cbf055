from pathlib import Path

from pydantic import BaseModel, Field, model_validator

from config.general import settings
from src.datagen.schemas import PRESETS, GeneratorConfig, Regime
from src.exceptions import UsageError
from src.metrics.schemas import DESK_MATRIX, MatrixConfig
from src.models.schemas import AdapterConfig, SedCnnConfig
from src.training.schemas import TrainConfig


class RunConfig(BaseModel):
    """
    Serializable description of a run: a config file plus its seed reproduces
    every output bit-exactly.
    """

    seed: int = Field(0, ge=0)
    classes: list[str] = []
    regimes: list[Regime] = [Regime.CLEAN]
    counts: tuple[int, int, int] = (200, 50, 50)
    generator: GeneratorConfig = GeneratorConfig()
    model: SedCnnConfig = SedCnnConfig()
    adapter: AdapterConfig = AdapterConfig()
    train: TrainConfig = TrainConfig()
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    workers: int = Field(default_factory=lambda: settings.workers, ge=1)
    output_dir: str = Field(default_factory=lambda: settings.output_dir)

    @model_validator(mode="after")
    def check_counts(self) -> "RunConfig":
        if any(count < 1 for count in self.counts):
            raise ValueError(f"every split needs at least one soundscape, got {self.counts}")
        return self

    @property
    def regime(self) -> Regime:
        return self.regimes[0]

    def matrix_config(self) -> MatrixConfig:
        return MatrixConfig(
            counts=self.counts,
            generator=self.generator,
            model=self.model,
            adapter=self.adapter,
            train=self.train,
            threshold=self.threshold,
            workers=self.workers,
        )


def merge(base: dict, overrides: dict) -> dict:
    """Recursively overlays ``overrides`` on ``base``; None values are ignored."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def preset_values(name: str, full: bool = False) -> dict:
    """Preset classes, regime and counts; without ``full`` the desk-scale geometry and training too."""
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}, choose from {sorted(PRESETS)}")
    preset = PRESETS[name]
    values = {
        "classes": list(preset.classes),
        "regimes": [preset.regime.value],
        "counts": list(preset.full_counts if full else preset.desk_counts),
    }
    if not full:
        desk = DESK_MATRIX.model_dump(mode="json", include={"generator", "model", "adapter", "train"})
        values.update(desk)
    return values


def load_run_config(
    path: str | Path | None = None,
    overrides: dict | None = None,
    preset: str | None = None,
    full: bool = False,
) -> RunConfig:
    """
    Resolves a RunConfig from preset values, then the JSON file, then flag
    overrides, each layer replacing the previous one.

    Raises:
    UsageError: If the file is missing or unreadable.
    ValidationError: If the resolved values are invalid.
    """
    values = preset_values(preset, full) if preset else {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file {path} does not exist")
        loaded = RunConfig.model_validate_json(path.read_text(encoding="utf-8"))
        values = merge(values, loaded.model_dump(mode="json", exclude_unset=True))
    return RunConfig.model_validate(merge(values, overrides or {}))


def save_run_config(config: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path
