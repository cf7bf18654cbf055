"""
Little-endian binary encoding shared by checkpoint and dataset files.

Tensors are written as: name (u32 length + UTF-8), ndim u32, dims u32 x ndim,
then the raw float32 payload in row-major order.
"""

import struct

import numpy as np

from src.nncore.utils import Tensor


class TruncatedError(Exception):
    """Raised when a read runs past the end of the buffer."""


class TextDecodeError(Exception):
    """Raised when a length-prefixed string is not valid UTF-8."""


class BinaryWriter:
    def __init__(self):
        self._chunks: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self._chunks.append(data)

    def u8(self, value: int) -> None:
        self._chunks.append(struct.pack("<B", value))

    def u32(self, value: int) -> None:
        self._chunks.append(struct.pack("<I", value))

    def u64(self, value: int) -> None:
        self._chunks.append(struct.pack("<Q", value))

    def f32(self, value: float) -> None:
        self._chunks.append(struct.pack("<f", value))

    def text(self, value: str) -> None:
        encoded = value.encode("utf-8")
        self.u32(len(encoded))
        self._chunks.append(encoded)

    def texts(self, values: list[str]) -> None:
        self.u32(len(values))
        for value in values:
            self.text(value)

    def tensor(self, name: str, value: Tensor) -> None:
        self.text(name)
        self.u32(value.ndim)
        for dim in value.shape:
            self.u32(dim)
        self._chunks.append(np.ascontiguousarray(value, dtype="<f4").tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)


class BinaryReader:
    def __init__(self, data: bytes):
        self._data = data
        self._offset = 0

    @property
    def offset(self) -> int:
        return self._offset

    def at_end(self) -> bool:
        return self._offset == len(self._data)

    def raw(self, size: int) -> bytes:
        end = self._offset + size
        if end > len(self._data):
            raise TruncatedError(
                f"need {size} bytes at offset {self._offset}, only {len(self._data) - self._offset} left"
            )
        chunk = self._data[self._offset : end]
        self._offset = end
        return chunk

    def _unpack(self, fmt: str) -> int | float:
        return struct.unpack(fmt, self.raw(struct.calcsize(fmt)))[0]

    def u8(self) -> int:
        return self._unpack("<B")

    def u32(self) -> int:
        return self._unpack("<I")

    def u64(self) -> int:
        return self._unpack("<Q")

    def f32(self) -> float:
        return self._unpack("<f")

    def text(self) -> str:
        start = self._offset
        try:
            return self.raw(self.u32()).decode("utf-8")
        except UnicodeDecodeError as error:
            raise TextDecodeError(f"invalid UTF-8 string at offset {start}: {error.reason}")

    def texts(self) -> list[str]:
        return [self.text() for _ in range(self.u32())]

    def tensor(self) -> tuple[str, Tensor]:
        name = self.text()
        ndim = self.u32()
        shape = tuple(self.u32() for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        payload = self.raw(4 * count)
        value = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)
        return name, value
