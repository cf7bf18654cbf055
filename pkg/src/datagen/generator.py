import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.datagen.schemas import (
    SOUNDSCAPE_SECONDS,
    DatasetSplits,
    Event,
    GeneratorConfig,
    Regime,
    Soundscape,
    SoundscapeCollection,
)
from src.exceptions import DataError
from src.nncore.utils import FLOAT32, Tensor, derive_seed, make_rng

logger = logging.getLogger(__name__)

# Prototypes depend on the class id only, so every dataset draws the same pattern per class.
PROTOTYPE_SEED = 20200706
MAX_PLACEMENT_ATTEMPTS = 64
NOISY_MAX_EVENTS = 9
SPLIT_CODES = {"train": 0, "val": 1, "test": 2}


class EventClass:
    """
    Synthetic stand-in for a sound event class.

    The class owns a dominant mel band [band_start, band_start + band_width)
    with a raised-cosine spectral profile, and an amplitude modulation whose
    rate grows with the class id. Bands of distinct ids are disjoint while
    the number of ids stays within input_mels // band_width.

    Parameters:
    class_id (int): Position of the class in the class universe.
    name (str): Label.
    config (GeneratorConfig): Mel resolution and band width.
    """

    def __init__(self, class_id: int, name: str, config: GeneratorConfig):
        self.id = class_id
        self.name = name
        width = min(config.bandwidth, config.input_mels)
        slots = config.input_mels // width
        self.band_start = (class_id % slots) * width
        self.band_width = width
        rng = make_rng(derive_seed(PROTOTYPE_SEED, class_id))
        self.modulation_hz = 1.0 + 1.5 * class_id
        self.phase = float(rng.uniform(0.0, 2.0 * np.pi))
        bins = np.arange(1, width + 1)
        self.profile = 0.5 * (1.0 - np.cos(2.0 * np.pi * bins / (width + 1)))
        self.profile /= self.profile.max()

    @property
    def band(self) -> slice:
        return slice(self.band_start, self.band_start + self.band_width)

    def pattern(self, frames: int, frames_per_second: int) -> Tensor:
        """Prototype contribution [band_width, frames] with peak amplitude 1."""
        t = np.arange(frames) / frames_per_second
        envelope = 0.6 + 0.4 * np.cos(2.0 * np.pi * self.modulation_hz * t + self.phase)
        return (self.profile[:, np.newaxis] * envelope[np.newaxis, :]).astype(FLOAT32)


def make_event_classes(
    class_names: list[str], config: GeneratorConfig, universe: list[str] | None = None
) -> list[EventClass]:
    """
    Builds EventClass objects whose ids are positions in ``universe``.

    Parameters:
    class_names (list[str]): Active classes of the dataset.
    config (GeneratorConfig): Generator geometry.
    universe (list[str], optional): Class list that fixes prototype ids across datasets.
        Defaults to ``class_names``.

    Raises:
    DataError: If a class is missing from the universe or names repeat.
    """
    universe = list(universe or class_names)
    if len(set(class_names)) != len(class_names):
        raise DataError(f"duplicate class names: {class_names}")
    missing = [name for name in class_names if name not in universe]
    if missing:
        raise DataError(f"classes {missing} are not part of the class universe {universe}")
    return [EventClass(universe.index(name), name, config) for name in class_names]


def render_features(
    event_classes: list[EventClass],
    events: list[Event],
    background: Tensor,
    config: GeneratorConfig,
) -> Tensor:
    """Adds every event's prototype onto a copy of the background [mels, frames]."""
    features = background.astype(FLOAT32, copy=True)
    fps = config.frames_per_second
    for event in events:
        event_class = event_classes[event.class_id]
        start = int(round(event.onset_s * fps))
        stop = int(round(event.offset_s * fps))
        features[event_class.band, start:stop] += event_class.pattern(stop - start, fps)
    return features


def _check_budget(num_classes: int, regime: Regime, config: GeneratorConfig) -> None:
    if regime is Regime.CLEAN:
        needed = 2 * num_classes * config.event_min_s
        available = SOUNDSCAPE_SECONDS * config.max_polyphony
        if needed > available:
            raise DataError(
                f"clean regime cannot place up to {2 * num_classes} events of >= {config.event_min_s} s "
                f"in {SOUNDSCAPE_SECONDS} s with polyphony {config.max_polyphony}"
            )


def _place(rng: np.random.Generator, occupancy: Tensor, config: GeneratorConfig) -> tuple[int, int]:
    fps = config.frames_per_second
    total = occupancy.size
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        duration = rng.uniform(config.event_min_s, config.event_max_s)
        frames = max(1, int(round(duration * fps)))
        start = int(rng.integers(0, total - frames + 1))
        if occupancy[start : start + frames].max() < config.max_polyphony:
            return start, start + frames

    frames = max(1, int(round(config.event_min_s * fps)))
    busy = sliding_window_view(occupancy, frames).max(axis=1)
    free = np.flatnonzero(busy < config.max_polyphony)
    if free.size == 0:
        raise DataError("no room left for another event under the polyphony limit")
    start = int(free[0])
    return start, start + frames


def _draw_class_ids(rng: np.random.Generator, num_classes: int, regime: Regime) -> list[int]:
    if regime is Regime.CLEAN:
        ids = []
        for class_id in range(num_classes):
            ids += [class_id] * int(rng.integers(1, 3))
        return ids
    count = int(rng.integers(0, NOISY_MAX_EVENTS + 1))
    return [int(rng.integers(0, num_classes)) for _ in range(count)]


def generate_soundscape(
    event_classes: list[EventClass],
    regime: Regime,
    config: GeneratorConfig,
    rng: np.random.Generator,
) -> Soundscape:
    """
    Draws one 10-second soundscape.

    Clean regime: every class occurs once or twice. Noisy regime: the total
    event count is uniform on {0..9} with classes drawn with replacement.
    Event durations are uniform on [event_min_s, event_max_s] and overlaps are
    capped at ``max_polyphony`` simultaneous events.
    """
    fps = config.frames_per_second
    occupancy = np.zeros(config.total_frames, dtype=np.int32)
    events = []
    for class_id in _draw_class_ids(rng, len(event_classes), regime):
        start, stop = _place(rng, occupancy, config)
        occupancy[start:stop] += 1
        onset = float(np.float32(start / fps))
        offset = float(np.float32(stop / fps))
        events.append(Event(class_id=class_id, onset_s=onset, offset_s=offset))
    events.sort(key=lambda event: (event.onset_s, event.class_id, event.offset_s))

    noise_std = 10.0 ** (-config.snr_db / 20.0)
    background = rng.normal(0.0, noise_std, size=(config.input_mels, config.total_frames))
    features = render_features(event_classes, events, background, config)
    return Soundscape(events=events, features=features)


def _generate_split(
    event_classes: list[EventClass],
    regime: Regime,
    count: int,
    seed: int,
    split: str,
    config: GeneratorConfig,
) -> list[Soundscape]:
    def one(index: int) -> Soundscape:
        rng = make_rng(derive_seed(seed, SPLIT_CODES[split], index))
        return generate_soundscape(event_classes, regime, config, rng)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(one, range(count)))
    return [one(index) for index in range(count)]


def generate_dataset(
    class_names: list[str],
    regime: Regime,
    counts: tuple[int, int, int],
    seed: int,
    config: GeneratorConfig | None = None,
    universe: list[str] | None = None,
) -> DatasetSplits:
    """
    Generates train/val/test soundscape collections.

    Each soundscape is drawn from its own generator seeded by (seed, split,
    index), so the result does not depend on the worker count.

    Parameters:
    class_names (list[str]): Classes that may occur.
    regime (Regime): Clean (1-2 occurrences per class) or noisy (0-9 events).
    counts (tuple[int, int, int]): Soundscapes per split (train, val, test).
    seed (int): Master seed.
    config (GeneratorConfig, optional): Geometry and noise level. Defaults to GeneratorConfig().
    universe (list[str], optional): Class list that fixes prototype ids. Defaults to ``class_names``.

    Returns:
    DatasetSplits: The three collections.

    Raises:
    DataError: On empty class lists, zero counts or an impossible duration budget.
    """
    config = config or GeneratorConfig()
    if not class_names:
        raise DataError("at least one class is required")
    if len(counts) != 3 or any(count < 1 for count in counts):
        raise DataError(f"every split needs at least one soundscape, got counts {tuple(counts)}")
    _check_budget(len(class_names), regime, config)
    event_classes = make_event_classes(class_names, config, universe)

    collections = {}
    for split, count in zip(SPLIT_CODES, counts):
        soundscapes = _generate_split(event_classes, regime, count, seed, split, config)
        collections[split] = SoundscapeCollection(
            class_names=list(class_names), regime=regime, seed=seed, soundscapes=soundscapes
        )
        logger.info(f"generated {count} {regime.value} soundscapes for {split}")
    return DatasetSplits(**collections)
