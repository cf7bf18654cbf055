import numpy as np

from src.nncore.utils import FLOAT32, Tensor

# Fixed dynamic range of the feature maps, in units of the event prototype peak.
FEATURE_RANGE = (-4.0, 4.0)


class FeatureScaler:
    """
    Clamps feature maps to ``FEATURE_RANGE`` and standardizes them with a
    scalar mean and standard deviation fitted on training windows.

    An unfitted scaler is the identity after clamping (mean 0, std 1).
    """

    def __init__(self, dtype=FLOAT32):
        self.mean = np.zeros(1, dtype=dtype)
        self.std = np.ones(1, dtype=dtype)

    def fit(self, windows: Tensor) -> "FeatureScaler":
        clamped = np.clip(windows, *FEATURE_RANGE).astype(np.float64)
        std = clamped.std()
        self.mean[...] = clamped.mean()
        self.std[...] = std if std > 0 else 1.0
        return self

    def transform(self, x: Tensor) -> Tensor:
        clamped = np.clip(x, *FEATURE_RANGE).astype(self.mean.dtype, copy=False)
        return (clamped - self.mean[0]) / self.std[0]

    def buffers(self) -> dict[str, Tensor]:
        return {"scaler.mean": self.mean, "scaler.std": self.std}

    def copy(self) -> "FeatureScaler":
        clone = FeatureScaler(self.mean.dtype)
        clone.mean[...] = self.mean
        clone.std[...] = self.std
        return clone

    def cast(self, dtype) -> None:
        self.mean = self.mean.astype(dtype)
        self.std = self.std.astype(dtype)
