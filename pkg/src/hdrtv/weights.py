"""Named parameter store, the HDCW binary container and seeded weight generation.

Container layout (all integers little-endian)::

    magic        b"HDCW"
    version      u32 = 1
    count        u32
    records      count x (name_len u16, name utf-8, rank u8, dims u32 x rank, offset u64)
    padding      zero bytes up to a 64-byte boundary
    data         float32 payloads, each starting on a 64-byte boundary at `offset`
    crc          u32 CRC32 of every preceding byte
"""

from __future__ import annotations

import logging
import struct
import zlib
from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np

from .errors import CorruptWeights, IoError, MissingWeightError, ShapeError
from .tensor import ConvParams

logger = logging.getLogger(__name__)

MAGIC = b"HDCW"
VERSION = 1
ALIGN = 64


class ModelWeights(Mapping):
    """Read-only mapping from tensor name to a float32 array."""

    def __init__(self, tensors: Mapping[str, np.ndarray] | None = None):
        self._tensors: dict[str, np.ndarray] = {}
        for name, value in (tensors or {}).items():
            arr = np.array(value, dtype=np.float32, order="C", copy=True)
            arr.flags.writeable = False
            self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise MissingWeightError(name) from None

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def conv(self, prefix: str, stride: int = 1) -> ConvParams:
        """ConvParams built from ``{prefix}.weight`` and ``{prefix}.bias``."""
        return ConvParams(self[f"{prefix}.weight"], self[f"{prefix}.bias"], stride=stride)

    def with_tensors(self, updates: Mapping[str, np.ndarray]) -> "ModelWeights":
        merged = dict(self._tensors)
        merged.update(updates)
        return ModelWeights(merged)

    def check_shapes(self, shapes: Mapping[str, tuple[int, ...]]) -> None:
        """Raise on any present tensor whose shape differs from ``shapes``."""
        for name, shape in shapes.items():
            if name in self._tensors and self._tensors[name].shape != tuple(shape):
                raise ShapeError(
                    f"weight {name!r} has shape {self._tensors[name].shape}, expected {tuple(shape)}"
                )

    def warn_unknown(self, known: Iterable[str]) -> list[str]:
        unknown = sorted(set(self._tensors) - set(known))
        for name in unknown:
            logger.warning("ignoring unknown weight tensor %r", name)
        return unknown


def _align(n: int) -> int:
    return -(-n // ALIGN) * ALIGN


def save_weights(weights: Mapping[str, np.ndarray], path) -> None:
    names = list(weights)
    arrays = [np.asarray(weights[n], dtype="<f4") for n in names]
    encoded = [n.encode("utf-8") for n in names]
    if len(set(names)) != len(names):
        raise ValueError("duplicate tensor names")

    header_len = 4 + 4 + 4 + sum(2 + len(e) + 1 + 4 * a.ndim + 8 for e, a in zip(encoded, arrays))
    offsets = []
    cursor = _align(header_len)
    for a in arrays:
        offsets.append(cursor)
        cursor = _align(cursor + a.nbytes)

    buf = bytearray()
    buf += MAGIC + struct.pack("<II", VERSION, len(names))
    for e, a, off in zip(encoded, arrays, offsets):
        buf += struct.pack("<H", len(e)) + e + struct.pack("<B", a.ndim)
        buf += struct.pack(f"<{a.ndim}I", *a.shape) + struct.pack("<Q", off)
    for a, off in zip(arrays, offsets):
        buf += bytes(off - len(buf))
        buf += a.tobytes(order="C")
    buf += struct.pack("<I", zlib.crc32(buf))
    try:
        Path(path).write_bytes(bytes(buf))
    except OSError as exc:
        raise IoError(path, exc.strerror or exc) from exc


def parse_weights(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CorruptWeights("not an HDCW container (bad magic)")
    (crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    body = blob[:-4]
    if zlib.crc32(body) != crc:
        raise CorruptWeights("CRC32 mismatch")
    version, count = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise CorruptWeights(f"unsupported container version {version}")

    pos = 12
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", body, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            (offset,) = struct.unpack_from("<Q", body, pos)
            pos += 8
            nbytes = 4 * int(np.prod(dims, dtype=np.int64))
            if offset % ALIGN or offset < pos or offset + nbytes > len(body):
                raise CorruptWeights(f"tensor {name!r} has out-of-range offset {offset}")
            if name in tensors:
                raise CorruptWeights(f"duplicate tensor name {name!r}")
            data = np.frombuffer(body, dtype="<f4", count=nbytes // 4, offset=offset)
            tensors[name] = data.reshape(dims).astype(np.float32)
    except (struct.error, UnicodeDecodeError) as exc:
        raise CorruptWeights(f"truncated or malformed header: {exc}") from exc
    return tensors


def load_weights(path, known: Iterable[str] | None = None) -> ModelWeights:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(path, exc.strerror or exc) from exc
    weights = ModelWeights(parse_weights(blob))
    if known is not None:
        weights.warn_unknown(known)
    return weights


# -- seeded generation -------------------------------------------------------
#
# Each tensor draws from its own SplitMix64 stream (a xorshift-multiply
# generator), keyed by FNV-1a-64(name) XOR seed. Element i is
#     z  = key + (i + 1) * 0x9E3779B97F4A7C15
#     z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
#     z ^= z >> 27; z *= 0x94D049BB133111EB
#     z ^= z >> 31
# and maps to (z >> 40) / 2**24 - 0.5, exactly representable in float32.

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def splitmix64_stream(key: int, n: int) -> np.ndarray:
    """First ``n`` outputs of the SplitMix64 sequence starting from state ``key``."""
    with np.errstate(over="ignore"):
        z = np.uint64(key & _MASK64) + np.arange(1, n + 1, dtype=np.uint64) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniform_tensor(seed: int, name: str, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape, dtype=np.int64))
    bits = splitmix64_stream(fnv1a64(name) ^ (seed & _MASK64), n) >> np.uint64(40)
    return (bits.astype(np.float64) / float(1 << 24) - 0.5).astype(np.float32).reshape(shape)


def seeded_weights(seed: int, cfg) -> ModelWeights:
    """Fill every tensor ``cfg`` requires with uniform values in [-0.5, 0.5).

    ``cfg`` is any object with a ``weight_shapes()`` method, or a mapping of
    name to shape.
    """
    shapes = cfg if isinstance(cfg, Mapping) else cfg.weight_shapes()
    return ModelWeights({name: uniform_tensor(seed, name, tuple(s)) for name, s in shapes.items()})
