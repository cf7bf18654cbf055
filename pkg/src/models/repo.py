import logging
from pathlib import Path

from src.exceptions import CheckpointError, ShapeError
from src.models.adapter import AdapterComposite, NeuralAdapter
from src.models.schemas import AdapterConfig, ModelKind, SedCnnConfig
from src.models.sedcnn import SedCnn
from src.nncore.utils import make_rng
from src.storage.codec import BinaryReader, BinaryWriter, TextDecodeError, TruncatedError

logger = logging.getLogger(__name__)

MAGIC = b"SEDM"
VERSION = 1

CONFIG_FIELDS = (
    "input_mels",
    "input_frames",
    "conv_filters",
    "num_conv_blocks",
    "pool_h",
    "pool_w",
    "kernel_size",
    "num_classes",
)
ADAPTER_INPUTS = ("logits", "probabilities")


class CheckpointRepository:
    """
    Reads and writes model checkpoints in the SEDM binary format.

    Layout (little-endian): magic "SEDM", version u32, model kind u8, then one
    model block for a SedCnn or three blocks (source, adapter, target) for an
    AdapterComposite. A block holds its integer config as u32 values, the
    class names as length-prefixed UTF-8 strings, a tensor count u32 and the
    named float32 tensors.
    """

    def encode(self, model: SedCnn | AdapterComposite) -> bytes:
        writer = BinaryWriter()
        writer.raw(MAGIC)
        writer.u32(VERSION)
        writer.u8(model.kind.value)
        if model.kind is ModelKind.SED_CNN:
            self._write_sedcnn(writer, model)
        else:
            self._write_sedcnn(writer, model.source)
            self._write_adapter(writer, model.adapter, model.target.class_names)
            self._write_sedcnn(writer, model.target)
        return writer.getvalue()

    def decode(self, data: bytes, origin: str = "<bytes>") -> SedCnn | AdapterComposite:
        reader = BinaryReader(data)
        try:
            magic = reader.raw(4)
            if magic != MAGIC:
                raise CheckpointError(f"{origin}: bad magic {magic!r}, expected {MAGIC!r}")
            version = reader.u32()
            if version != VERSION:
                raise CheckpointError(f"{origin}: unsupported checkpoint version {version}, expected {VERSION}")
            kind_code = reader.u8()
            try:
                kind = ModelKind(kind_code)
            except ValueError:
                raise CheckpointError(f"{origin}: unknown model kind {kind_code}")
            if kind is ModelKind.SED_CNN:
                model = self._read_sedcnn(reader)
            else:
                source = self._read_sedcnn(reader)
                adapter = self._read_adapter(reader)
                target = self._read_sedcnn(reader)
                model = AdapterComposite(source, adapter, target)
        except TruncatedError as error:
            raise CheckpointError(f"{origin}: truncated checkpoint ({error})")
        except TextDecodeError as error:
            raise CheckpointError(f"{origin}: corrupted checkpoint ({error})")
        except ShapeError as error:
            raise CheckpointError(f"{origin}: inconsistent checkpoint ({error.detail})")
        if not reader.at_end():
            raise CheckpointError(f"{origin}: unexpected trailing bytes at offset {reader.offset}")
        return model

    def save(self, model: SedCnn | AdapterComposite, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.encode(model))
        logger.info(f"saved {model.kind.name} checkpoint to {path}")
        return path

    def load(self, path: str | Path) -> SedCnn | AdapterComposite:
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"checkpoint {path} does not exist")
        return self.decode(path.read_bytes(), str(path))

    def _write_tensors(self, writer: BinaryWriter, tensors: dict) -> None:
        writer.u32(len(tensors))
        for name, value in tensors.items():
            writer.tensor(name, value)

    def _read_tensors(self, reader: BinaryReader) -> dict:
        return dict(reader.tensor() for _ in range(reader.u32()))

    def _write_sedcnn(self, writer: BinaryWriter, model: SedCnn) -> None:
        for field in CONFIG_FIELDS:
            writer.u32(getattr(model.config, field))
        writer.texts(model.class_names)
        self._write_tensors(writer, model.state_tensors())

    def _read_sedcnn(self, reader: BinaryReader) -> SedCnn:
        values = {field: reader.u32() for field in CONFIG_FIELDS}
        try:
            config = SedCnnConfig(**values)
        except ValueError as error:
            raise CheckpointError(f"invalid model config {values}: {error}")
        class_names = reader.texts()
        model = SedCnn(config, class_names, make_rng(0))
        model.load_state(self._read_tensors(reader))
        return model

    def _write_adapter(self, writer: BinaryWriter, adapter: NeuralAdapter, class_names: list[str]) -> None:
        writer.u32(adapter.in_features)
        writer.u32(adapter.config.hidden)
        writer.u32(adapter.out_features)
        writer.u32(ADAPTER_INPUTS.index(adapter.config.adapter_input))
        writer.texts(class_names)
        self._write_tensors(writer, adapter.state_tensors())

    def _read_adapter(self, reader: BinaryReader) -> NeuralAdapter:
        in_features, hidden, out_features, mode = (reader.u32() for _ in range(4))
        if mode >= len(ADAPTER_INPUTS):
            raise CheckpointError(f"unknown adapter input mode {mode}")
        reader.texts()
        config = AdapterConfig(hidden=hidden, adapter_input=ADAPTER_INPUTS[mode])
        adapter = NeuralAdapter(in_features, out_features, make_rng(0), config)
        tensors = self._read_tensors(reader)
        expected = adapter.state_tensors()
        if set(tensors) != set(expected):
            raise CheckpointError(f"adapter tensors {sorted(tensors)} != {sorted(expected)}")
        for name, target in expected.items():
            if tensors[name].shape != target.shape:
                raise CheckpointError(f"adapter tensor {name}: shape {tensors[name].shape} != {target.shape}")
            target[...] = tensors[name]
        return adapter


def checkpoint_save(model: SedCnn | AdapterComposite, path: str | Path) -> Path:
    return CheckpointRepository().save(model, path)


def checkpoint_load(path: str | Path) -> SedCnn | AdapterComposite:
    return CheckpointRepository().load(path)
