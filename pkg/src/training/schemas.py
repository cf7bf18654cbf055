from pydantic import BaseModel, Field


class AdamConfig(BaseModel):
    lr: float = Field(1e-3, ge=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)


class EarlyStopConfig(BaseModel):
    patience: int = Field(100, ge=1)
    max_epochs: int = Field(500, ge=0)


class TrainConfig(BaseModel):
    batch_size: int = Field(32, ge=1)
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    optimizer: AdamConfig = AdamConfig()
    early_stop: EarlyStopConfig = EarlyStopConfig()
    progress: bool = False


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_f1: float
    best_f1: float
    stopped_flag: bool = False
