from enum import Enum
from typing import Literal

from pydantic import BaseModel, Field, model_validator


class ModelKind(Enum):
    SED_CNN = 0
    ADAPTER_COMPOSITE = 1


class SedCnnConfig(BaseModel):
    input_mels: int = Field(128, ge=1)
    input_frames: int = Field(128, ge=1)
    conv_filters: int = Field(64, ge=1)
    num_conv_blocks: int = Field(3, ge=1)
    pool_h: int = Field(2, ge=1)
    pool_w: int = Field(2, ge=1)
    kernel_size: int = Field(3, ge=1)
    num_classes: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_pooling(self) -> "SedCnnConfig":
        factor_h = self.pool_h**self.num_conv_blocks
        factor_w = self.pool_w**self.num_conv_blocks
        if self.input_mels % factor_h or self.input_frames % factor_w:
            raise ValueError(
                f"input {self.input_mels}x{self.input_frames} is not divisible by the "
                f"pooling factor {factor_h}x{factor_w} of {self.num_conv_blocks} blocks"
            )
        return self

    @property
    def pool(self) -> tuple[int, int]:
        return self.pool_h, self.pool_w

    @property
    def flat_features(self) -> int:
        height = self.input_mels // self.pool_h**self.num_conv_blocks
        width = self.input_frames // self.pool_w**self.num_conv_blocks
        return self.conv_filters * height * width

    def with_classes(self, num_classes: int) -> "SedCnnConfig":
        return self.model_copy(update={"num_classes": num_classes})


class AdapterConfig(BaseModel):
    hidden: int = Field(32, ge=1)
    adapter_input: Literal["logits", "probabilities"] = "logits"
