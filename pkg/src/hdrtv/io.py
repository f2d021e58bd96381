"""PNG reading/writing and replicate padding to a size multiple."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import png

from .color import Gamut, ImageFrame, Transfer, dequantize, quantize
from .errors import ConfigError, IoError, UnsupportedFormat
from .tensor import Tensor

DEFAULT_TAGS = {
    8: (Gamut.BT709, Transfer.SDR_GAMMA),
    16: (Gamut.BT2020, Transfer.PQ),
}


def read_png(path, gamut: Gamut | None = None, transfer: Transfer | None = None) -> ImageFrame:
    """Read an 8- or 16-bit RGB PNG.

    Untagged 8-bit files are taken as SDR gamma / BT.709 and 16-bit files as
    PQ / BT.2020; pass ``gamut``/``transfer`` to override.
    """
    try:
        reader = png.Reader(filename=str(path))
        width, height, rows, info = reader.read()
        if info.get("palette") is not None:
            raise UnsupportedFormat(path, "paletted PNG is not supported")
        if info["greyscale"]:
            raise UnsupportedFormat(path, "grayscale PNG is not supported")
        if info["alpha"]:
            raise UnsupportedFormat(path, "PNG with alpha channel is not supported")
        bits = info["bitdepth"]
        if bits not in DEFAULT_TAGS:
            raise UnsupportedFormat(path, f"{bits}-bit PNG is not supported")
        codes = np.vstack([np.asarray(r, dtype=np.uint32) for r in rows])
    except UnsupportedFormat:
        raise
    except OSError as exc:
        raise IoError(path, exc.strerror or exc) from exc
    except png.Error as exc:
        raise IoError(path, exc) from exc

    codes = codes.reshape(height, width, 3).transpose(2, 0, 1)
    default_gamut, default_transfer = DEFAULT_TAGS[bits]
    return dequantize(codes, bits, gamut or default_gamut, transfer or default_transfer)


def write_png(frame: ImageFrame, path, bits: int = 16) -> None:
    codes = quantize(frame, bits)
    h, w = frame.height, frame.width
    rows = codes.transpose(1, 2, 0).reshape(h, w * 3)
    writer = png.Writer(width=w, height=h, greyscale=False, alpha=False, bitdepth=bits)
    try:
        with open(path, "wb") as fh:
            writer.write(fh, rows)
    except OSError as exc:
        raise IoError(path, exc.strerror or exc) from exc


@dataclass(frozen=True)
class CropRecord:
    height: int
    width: int


def _pad_array(arr: np.ndarray, multiple: int) -> np.ndarray:
    h, w = arr.shape[1:]
    ph, pw = -h % multiple, -w % multiple
    if ph == 0 and pw == 0:
        return arr
    return np.pad(arr, ((0, 0), (0, ph), (0, pw)), mode="edge")


def pad_to_multiple(frame: ImageFrame, m: int = 32) -> tuple[ImageFrame, CropRecord]:
    """Replicate-pad right and bottom edges up to the next multiple of ``m``."""
    if m < 1:
        raise ConfigError(f"pad multiple must be positive, got {m}")
    record = CropRecord(frame.height, frame.width)
    padded = _pad_array(frame.data, m)
    if padded is frame.data:
        return frame, record
    return ImageFrame(Tensor(padded), frame.gamut, frame.transfer), record


def unpad(frame: ImageFrame, record: CropRecord) -> ImageFrame:
    if (frame.height, frame.width) == (record.height, record.width):
        return frame
    data = frame.data[:, : record.height, : record.width]
    return ImageFrame(Tensor(data), frame.gamut, frame.transfer)

