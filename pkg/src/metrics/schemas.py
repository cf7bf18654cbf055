from typing import Annotated

from pydantic import BaseModel, Field, model_validator

from src.datagen.schemas import GeneratorConfig
from src.models.schemas import AdapterConfig, SedCnnConfig
from src.training.schemas import AdamConfig, EarlyStopConfig, TrainConfig

REPORT_COLUMNS = [
    "scenario",
    "ms_ds",
    "simple_ds",
    "simple_new",
    "simple_all",
    "adapter_ds",
    "adapter_new",
    "adapter_all",
    "f1_A",
    "f1_B",
    "f1_C",
]
SCORE_COLUMNS = REPORT_COLUMNS[1:]
OVERALL = "Overall"

Score = Annotated[float, Field(ge=0.0, le=1.0)]


class MatrixConfig(BaseModel):
    """Everything one leave-one-out experiment needs besides classes, regime and seed."""

    counts: tuple[int, int, int] = (200, 50, 50)
    generator: GeneratorConfig = GeneratorConfig()
    model: SedCnnConfig = SedCnnConfig()
    adapter: AdapterConfig = AdapterConfig()
    train: TrainConfig = TrainConfig()
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_geometry(self) -> "MatrixConfig":
        if self.model.input_mels != self.generator.input_mels:
            raise ValueError(
                f"model input_mels {self.model.input_mels} != generator input_mels {self.generator.input_mels}"
            )
        if self.model.input_frames != self.generator.frames_per_second:
            raise ValueError(
                f"model input_frames {self.model.input_frames} != frames per one-second window "
                f"{self.generator.frames_per_second}"
            )
        return self


class AblationResult(BaseModel):
    f1_A: Score
    f1_B: Score
    f1_C: Score


class ScenarioReport(BaseModel):
    """
    One row of the experiment matrix.

    ``ms_ds`` scores the source model on its own classes. The ``simple_*`` and
    ``adapter_*`` columns score the two incremental methods on the source
    classes, the new class and all classes jointly. ``f1_A``/``f1_B``/``f1_C``
    are the micro F1 of the adapter branch, target branch and merged output
    over all classes. ``per_class`` keeps the per-class F1 of every method.
    """

    scenario: str
    source_classes: list[str] = []
    new_class: str = ""
    ms_ds: Score
    simple_ds: Score
    simple_new: Score
    simple_all: Score
    adapter_ds: Score
    adapter_new: Score
    adapter_all: Score
    f1_A: Score
    f1_B: Score
    f1_C: Score
    macro: dict[str, float] = {}
    per_class: dict[str, dict[str, float]] = {}

    def row(self) -> dict:
        return {column: getattr(self, column) for column in REPORT_COLUMNS}


# Desk-scale settings for CPU runs of the four-class clean matrix. Events sit
# 20 dB above the background so single-frame overlaps at segment edges stay
# detectable in 32x32 windows.
DESK_MATRIX = MatrixConfig(
    counts=(200, 50, 50),
    generator=GeneratorConfig(input_mels=32, frames_per_second=32, snr_db=20.0),
    model=SedCnnConfig(input_mels=32, input_frames=32, conv_filters=8, num_conv_blocks=3),
    adapter=AdapterConfig(hidden=32),
    train=TrainConfig(
        batch_size=32,
        optimizer=AdamConfig(lr=1e-3),
        early_stop=EarlyStopConfig(patience=15, max_epochs=100),
    ),
)
