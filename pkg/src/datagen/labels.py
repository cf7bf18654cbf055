import numpy as np

from src.datagen.schemas import Soundscape, SoundscapeCollection
from src.exceptions import DataError, ShapeError
from src.nncore.utils import FLOAT32, Tensor
from src.training.dataset import ExampleSet

SEGMENT_SECONDS = 1.0


def segment_labels(
    soundscape: Soundscape,
    num_classes: int,
    segment_s: float = SEGMENT_SECONDS,
    classes: list[int] | None = None,
) -> Tensor:
    """
    Multi-label segment matrix [segments, K] for one soundscape.

    Segment s covers the half-open interval [s * segment_s, (s + 1) * segment_s);
    class k is active when one of its events overlaps that interval with
    positive length.

    Parameters:
    soundscape (Soundscape): Source of the event list.
    num_classes (int): Size of the soundscape's class table.
    segment_s (float, optional): Segment length in seconds. Defaults to 1.0.
    classes (list[int], optional): Class ids to keep, in column order. Events of other
        classes are ignored. Defaults to every class.

    Returns:
    Tensor: float32 matrix of zeros and ones.
    """
    classes = list(range(num_classes)) if classes is None else list(classes)
    columns = {class_id: column for column, class_id in enumerate(classes)}
    segments = int(round(soundscape.duration_s / segment_s))
    labels = np.zeros((segments, len(classes)), dtype=FLOAT32)
    starts = np.arange(segments) * segment_s
    for event in soundscape.events:
        column = columns.get(event.class_id)
        if column is None:
            continue
        active = (event.onset_s < starts + segment_s) & (event.offset_s > starts)
        labels[active, column] = 1.0
    return labels


def window_examples(soundscape: Soundscape, labels: Tensor) -> tuple[Tensor, Tensor]:
    """
    Cuts a soundscape into non-overlapping one-segment windows.

    Returns:
    tuple[Tensor, Tensor]: Windows [segments, mels, frames] and their label rows.

    Raises:
    ShapeError: If the frame count is not a multiple of the segment count.
    """
    segments = labels.shape[0]
    mels, frames = soundscape.features.shape
    if segments == 0 or frames % segments:
        raise ShapeError(f"{frames} frames cannot be split into {segments} equal windows")
    width = frames // segments
    windows = soundscape.features.reshape(mels, segments, width).transpose(1, 0, 2)
    return np.ascontiguousarray(windows), labels


def build_examples(collection: SoundscapeCollection, class_names: list[str] | None = None) -> ExampleSet:
    """
    Windows every soundscape of a collection into an ExampleSet whose label
    columns follow ``class_names`` (a subset of the collection's classes).

    Raises:
    DataError: If a requested class is not in the collection.
    """
    class_names = list(collection.class_names if class_names is None else class_names)
    missing = [name for name in class_names if name not in collection.class_names]
    if missing:
        raise DataError(f"classes {missing} are not present in the dataset ({collection.class_names})")
    if not collection.soundscapes:
        raise DataError("the collection holds no soundscapes")
    ids = [collection.class_names.index(name) for name in class_names]

    features, labels = [], []
    for soundscape in collection.soundscapes:
        matrix = segment_labels(soundscape, len(collection.class_names), classes=ids)
        windows, rows = window_examples(soundscape, matrix)
        features.append(windows)
        labels.append(rows)
    return ExampleSet(np.concatenate(features), np.concatenate(labels), class_names)
