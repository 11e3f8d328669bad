"""Minimal bit-transparent TIFF container for packed flow words.

Writes a single-image little-endian TIFF: 1 sample/pixel, 32 bits/sample,
Deflate compression (tag value 8), strips of at most 64 rows, SampleFormat
declared as IEEE float.  Samples are treated as opaque 32-bit words: raw
strip bytes go through zlib untouched, so NaN bit patterns survive.  The
quantization scale lives in private tag 65000 (LONG).

The decoder accepts only layouts this encoder produces and rejects
everything else, so every file it reads is guaranteed lossless.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CorruptStrip, MissingScaleTag, UnsupportedTiff
from .quantization import PackedImage

ROWS_PER_STRIP = 64
SCALE_TAG = 65000

_TAG_WIDTH = 256
_TAG_HEIGHT = 257
_TAG_BITS = 258
_TAG_COMPRESSION = 259
_TAG_PHOTOMETRIC = 262
_TAG_STRIP_OFFSETS = 273
_TAG_SAMPLES_PER_PIXEL = 277
_TAG_ROWS_PER_STRIP = 278
_TAG_STRIP_COUNTS = 279
_TAG_SAMPLE_FORMAT = 339

_TYPE_SHORT = 3
_TYPE_LONG = 4
_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8}


def encode_tiff(packed: PackedImage, scale: int) -> bytes:
    """Serialize a PackedImage plus its quantization scale."""
    h, w = packed.height, packed.width
    raw = np.ascontiguousarray(packed.words.astype("<u4"))

    strips = []
    for r0 in range(0, h, ROWS_PER_STRIP):
        strips.append(zlib.compress(raw[r0 : r0 + ROWS_PER_STRIP].tobytes(), 6))

    n = len(strips)
    pos = 8  # after header
    strip_offsets = []
    for s in strips:
        strip_offsets.append(pos)
        pos += len(s)

    # value arrays that do not fit inline go after the strip data
    aux = b""
    if n > 1:
        offsets_pos = pos
        aux += struct.pack(f"<{n}I", *strip_offsets)
        counts_pos = pos + 4 * n
        aux += struct.pack(f"<{n}I", *[len(s) for s in strips])
        pos += len(aux)
    ifd_offset = pos

    def entry(tag, typ, count, value):
        size = _TYPE_SIZES[typ] * count
        if size <= 4:
            fmt = "<H" if typ == _TYPE_SHORT else "<I"
            packed_val = struct.pack(fmt, value).ljust(4, b"\0")
            return struct.pack("<HHI", tag, typ, count) + packed_val
        return struct.pack("<HHII", tag, typ, count, value)

    entries = [
        entry(_TAG_WIDTH, _TYPE_LONG, 1, w),
        entry(_TAG_HEIGHT, _TYPE_LONG, 1, h),
        entry(_TAG_BITS, _TYPE_SHORT, 1, 32),
        entry(_TAG_COMPRESSION, _TYPE_SHORT, 1, 8),
        entry(_TAG_PHOTOMETRIC, _TYPE_SHORT, 1, 1),
        entry(
            _TAG_STRIP_OFFSETS, _TYPE_LONG, n, strip_offsets[0] if n == 1 else offsets_pos
        ),
        entry(_TAG_SAMPLES_PER_PIXEL, _TYPE_SHORT, 1, 1),
        entry(_TAG_ROWS_PER_STRIP, _TYPE_LONG, 1, ROWS_PER_STRIP),
        entry(
            _TAG_STRIP_COUNTS, _TYPE_LONG, n, len(strips[0]) if n == 1 else counts_pos
        ),
        entry(_TAG_SAMPLE_FORMAT, _TYPE_SHORT, 1, 3),
        entry(SCALE_TAG, _TYPE_LONG, 1, int(scale)),
    ]

    out = struct.pack("<2sHI", b"II", 42, ifd_offset)
    out += b"".join(strips)
    out += aux
    out += struct.pack("<H", len(entries)) + b"".join(entries) + struct.pack("<I", 0)
    return out


def _read_values(data, typ, count, raw_value):
    size = _TYPE_SIZES.get(typ)
    if size is None:
        raise UnsupportedTiff(f"unsupported field type {typ}")
    fmt = {_TYPE_SHORT: "H", _TYPE_LONG: "I"}.get(typ)
    if fmt is None:
        raise UnsupportedTiff(f"unexpected field type {typ}")
    total = size * count
    if total <= 4:
        return struct.unpack_from(f"<{count}{fmt}", raw_value)
    (offset,) = struct.unpack("<I", raw_value)
    if offset + total > len(data):
        raise UnsupportedTiff("value array extends past end of file")
    return struct.unpack_from(f"<{count}{fmt}", data, offset)


def decode_tiff(data: bytes) -> tuple[PackedImage, int]:
    """Inverse of encode_tiff, bit-exact; rejects anything else."""
    if len(data) < 8:
        raise UnsupportedTiff("file shorter than a TIFF header")
    order, version, ifd_offset = struct.unpack_from("<2sHI", data, 0)
    if order != b"II" or version != 42:
        raise UnsupportedTiff(f"not a little-endian classic TIFF (order={order!r}, version={version})")
    if ifd_offset + 2 > len(data):
        raise UnsupportedTiff("IFD offset out of range")

    (n_entries,) = struct.unpack_from("<H", data, ifd_offset)
    tags = {}
    for i in range(n_entries):
        base = ifd_offset + 2 + 12 * i
        if base + 12 > len(data):
            raise UnsupportedTiff("truncated IFD")
        tag, typ, count = struct.unpack_from("<HHI", data, base)
        tags[tag] = _read_values(data, typ, count, data[base + 8 : base + 12])

    def single(tag, name):
        if tag not in tags:
            raise UnsupportedTiff(f"missing required tag {name} ({tag})")
        vals = tags[tag]
        if len(vals) != 1:
            raise UnsupportedTiff(f"tag {name} must have a single value")
        return vals[0]

    if 322 in tags or 323 in tags or 324 in tags or 325 in tags:
        raise UnsupportedTiff("tiled TIFFs are not supported")

    w = single(_TAG_WIDTH, "ImageWidth")
    h = single(_TAG_HEIGHT, "ImageLength")
    if w < 1 or h < 1:
        raise UnsupportedTiff(f"bad dimensions {w}x{h}")
    if single(_TAG_BITS, "BitsPerSample") != 32:
        raise UnsupportedTiff("expected 32 bits per sample")
    if single(_TAG_COMPRESSION, "Compression") != 8:
        raise UnsupportedTiff("expected Deflate compression (8)")
    if single(_TAG_SAMPLES_PER_PIXEL, "SamplesPerPixel") != 1:
        raise UnsupportedTiff("expected 1 sample per pixel")
    if single(_TAG_SAMPLE_FORMAT, "SampleFormat") != 3:
        raise UnsupportedTiff("expected IEEE float sample format")
    rows_per_strip = single(_TAG_ROWS_PER_STRIP, "RowsPerStrip")

    if SCALE_TAG not in tags:
        raise MissingScaleTag("quantization scale tag 65000 is absent")
    scale = tags[SCALE_TAG][0]
    if scale < 1:
        raise UnsupportedTiff(f"non-positive scale {scale}")

    offsets = tags.get(_TAG_STRIP_OFFSETS)
    counts = tags.get(_TAG_STRIP_COUNTS)
    if offsets is None or counts is None or len(offsets) != len(counts):
        raise UnsupportedTiff("inconsistent strip offsets/byte counts")
    expected_strips = (h + rows_per_strip - 1) // rows_per_strip
    if len(offsets) != expected_strips:
        raise UnsupportedTiff(f"expected {expected_strips} strips, found {len(offsets)}")

    chunks = []
    for off, cnt in zip(offsets, counts):
        if off + cnt > len(data):
            raise UnsupportedTiff("strip extends past end of file")
        try:
            chunks.append(zlib.decompress(data[off : off + cnt]))
        except zlib.error as e:
            raise CorruptStrip(f"deflate stream error: {e}") from e

    raw = b"".join(chunks)
    if len(raw) != 4 * w * h:
        raise CorruptStrip(f"decompressed to {len(raw)} bytes, expected {4 * w * h}")
    words = np.frombuffer(raw, dtype="<u4").reshape(h, w).astype(np.uint32)
    return PackedImage(words=words), int(scale)
