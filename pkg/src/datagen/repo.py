import logging
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from src.datagen.schemas import REGIME_CODES, Event, Regime, Soundscape, SoundscapeCollection
from src.exceptions import DataError
from src.storage.codec import BinaryReader, BinaryWriter, TextDecodeError, TruncatedError

logger = logging.getLogger(__name__)

MAGIC = b"SEDD"
VERSION = 1
ANNOTATION_COLUMNS = ["file_id", "class_name", "onset_s", "offset_s"]


class DatasetRepository:
    """
    Reads and writes soundscape collections in the SEDD binary format.

    Layout (little-endian): magic "SEDD", version u32, regime u8, seed u64,
    class table, soundscape count u32, then per soundscape an event count u32,
    the events as (class u32, onset f32, offset f32) and the feature tensor
    named ``soundscape.<index>``.
    """

    def encode(self, collection: SoundscapeCollection) -> bytes:
        writer = BinaryWriter()
        writer.raw(MAGIC)
        writer.u32(VERSION)
        writer.u8(REGIME_CODES[collection.regime])
        writer.u64(collection.seed)
        writer.texts(collection.class_names)
        writer.u32(len(collection.soundscapes))
        for index, soundscape in enumerate(collection.soundscapes):
            writer.u32(len(soundscape.events))
            for event in soundscape.events:
                writer.u32(event.class_id)
                writer.f32(event.onset_s)
                writer.f32(event.offset_s)
            writer.tensor(f"soundscape.{index}", soundscape.features)
        return writer.getvalue()

    def decode(self, data: bytes, origin: str = "<bytes>") -> SoundscapeCollection:
        reader = BinaryReader(data)
        record = "header"
        try:
            magic = reader.raw(4)
            if magic != MAGIC:
                raise DataError(f"{origin}: bad magic {magic!r}, expected {MAGIC!r}")
            version = reader.u32()
            if version != VERSION:
                raise DataError(f"{origin}: unsupported dataset version {version}, expected {VERSION}")
            code = reader.u8()
            regimes = {value: key for key, value in REGIME_CODES.items()}
            if code not in regimes:
                raise DataError(f"{origin}: unknown regime code {code}")
            seed = reader.u64()
            class_names = reader.texts()
            soundscapes = []
            for index in range(reader.u32()):
                record = f"soundscape {index}"
                soundscapes.append(self._read_soundscape(reader, len(class_names)))
        except TruncatedError as error:
            raise DataError(f"{origin}: truncated dataset in record {record} ({error})")
        except TextDecodeError as error:
            raise DataError(f"{origin}: corrupted text in record {record} ({error})")
        except ValidationError as error:
            raise DataError(f"{origin}: invalid event in record {record}: {error}")
        if not reader.at_end():
            raise DataError(f"{origin}: unexpected trailing bytes at offset {reader.offset}")
        return SoundscapeCollection(
            class_names=class_names, regime=regimes[code], seed=seed, soundscapes=soundscapes
        )

    def _read_soundscape(self, reader: BinaryReader, num_classes: int) -> Soundscape:
        events = []
        for _ in range(reader.u32()):
            class_id = reader.u32()
            if class_id >= num_classes:
                raise DataError(f"event class {class_id} is outside the class table of {num_classes}")
            events.append(Event(class_id=class_id, onset_s=reader.f32(), offset_s=reader.f32()))
        _, features = reader.tensor()
        if features.ndim != 2:
            raise DataError(f"soundscape features must be [mels, frames], got {features.shape}")
        return Soundscape(events=events, features=features)

    def save(self, collection: SoundscapeCollection, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.encode(collection))
        logger.info(f"saved {len(collection)} soundscapes to {path}")
        return path

    def load(self, path: str | Path) -> SoundscapeCollection:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"dataset {path} does not exist")
        return self.decode(path.read_bytes(), str(path))


def dataset_save(collection: SoundscapeCollection, path: str | Path) -> Path:
    return DatasetRepository().save(collection, path)


def dataset_load(path: str | Path) -> SoundscapeCollection:
    return DatasetRepository().load(path)


def annotations_frame(collection: SoundscapeCollection, prefix: str = "soundscape") -> pd.DataFrame:
    rows = [
        {
            "file_id": f"{prefix}_{index:05d}",
            "class_name": collection.class_names[event.class_id],
            "onset_s": event.onset_s,
            "offset_s": event.offset_s,
        }
        for index, soundscape in enumerate(collection.soundscapes)
        for event in soundscape.events
    ]
    return pd.DataFrame(rows, columns=ANNOTATION_COLUMNS)


def export_annotations(collection: SoundscapeCollection, path: str | Path, prefix: str = "soundscape") -> Path:
    """Writes one CSV row per event: file_id, class_name, onset_s, offset_s."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    annotations_frame(collection, prefix).to_csv(path, index=False, float_format="%.6f")
    return path


def collection_summary(collection: SoundscapeCollection) -> dict:
    """Per-class event counts, soundscapes containing each class and the empty-soundscape fraction."""
    events = {name: 0 for name in collection.class_names}
    present = {name: 0 for name in collection.class_names}
    empty = 0
    for soundscape in collection.soundscapes:
        if not soundscape.events:
            empty += 1
        seen = set()
        for event in soundscape.events:
            name = collection.class_names[event.class_id]
            events[name] += 1
            seen.add(name)
        for name in seen:
            present[name] += 1
    total = len(collection)
    return {
        "soundscapes": total,
        "events": events,
        "present": present,
        "empty_fraction": empty / total if total else 0.0,
    }
