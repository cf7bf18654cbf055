from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.nncore.utils import Tensor

SOUNDSCAPE_SECONDS = 10.0


class Regime(Enum):
    CLEAN = "clean"
    NOISY = "noisy"


REGIME_CODES = {Regime.CLEAN: 0, Regime.NOISY: 1}


class GeneratorConfig(BaseModel):
    input_mels: int = Field(128, ge=1)
    frames_per_second: int = Field(128, ge=1)
    snr_db: float = Field(10.0, ge=0.0)
    event_min_s: float = Field(0.5, gt=0.0)
    event_max_s: float = Field(2.0, gt=0.0)
    max_polyphony: int = Field(4, ge=1)
    band_width: int | None = Field(None, ge=1)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_durations(self) -> "GeneratorConfig":
        if self.event_min_s > self.event_max_s:
            raise ValueError("event_min_s must not exceed event_max_s")
        if self.event_max_s > SOUNDSCAPE_SECONDS:
            raise ValueError(f"events cannot be longer than {SOUNDSCAPE_SECONDS} s")
        return self

    @property
    def bandwidth(self) -> int:
        return self.band_width or max(1, self.input_mels // 8)

    @property
    def total_frames(self) -> int:
        return int(SOUNDSCAPE_SECONDS * self.frames_per_second)


class Event(BaseModel):
    model_config = ConfigDict(frozen=True)

    class_id: int = Field(ge=0)
    onset_s: float = Field(ge=0.0)
    offset_s: float = Field(le=SOUNDSCAPE_SECONDS)

    @model_validator(mode="after")
    def check_order(self) -> "Event":
        if not self.onset_s < self.offset_s:
            raise ValueError(f"onset {self.onset_s} must precede offset {self.offset_s}")
        return self


class Soundscape(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    events: list[Event]
    features: Tensor
    duration_s: float = SOUNDSCAPE_SECONDS


class SoundscapeCollection(BaseModel):
    """One split of a generated dataset: its class table, regime, seed and soundscapes."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    class_names: list[str]
    regime: Regime
    seed: int = Field(ge=0)
    soundscapes: list[Soundscape]

    def __len__(self) -> int:
        return len(self.soundscapes)


class DatasetSplits(BaseModel):
    train: SoundscapeCollection
    val: SoundscapeCollection
    test: SoundscapeCollection

    def items(self) -> list[tuple[str, SoundscapeCollection]]:
        return [("train", self.train), ("val", self.val), ("test", self.test)]


class DatasetPreset(BaseModel):
    classes: list[str]
    regime: Regime
    desk_counts: tuple[int, int, int]
    full_counts: tuple[int, int, int]


PRESETS = {
    "dcase16": DatasetPreset(
        classes=["keyboard", "door_slam", "phone_ringing", "door_knock"],
        regime=Regime.CLEAN,
        desk_counts=(200, 50, 50),
        full_counts=(800, 200, 200),
    ),
    "us-sed": DatasetPreset(
        classes=["street_music", "siren", "gun_shot", "dog_bark", "car_horn"],
        regime=Regime.NOISY,
        desk_counts=(999, 333, 333),
        full_counts=(4995, 1665, 1665),
    ),
    "us-8k": DatasetPreset(
        classes=["street_music", "siren", "gun_shot", "dog_bark", "car_horn"],
        regime=Regime.CLEAN,
        desk_counts=(200, 50, 50),
        full_counts=(800, 200, 200),
    ),
}
