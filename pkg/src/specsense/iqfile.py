"""IQ recordings: a short text header followed by little-endian float32 I/Q pairs.

Header layout (ASCII, one ``key=value`` per line, blank line terminates)::

    SPECSENSE-IQ 1
    sample_rate_hz=1000000.0
    count=65536
    format=cf32le

``count`` is the number of complex samples; the payload must hold
exactly ``2 * count`` float32 values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signals import SampleBuffer

MAGIC = "SPECSENSE-IQ 1"
FORMAT_TAG = "cf32le"
_MAX_HEADER = 4096


class IqFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IqRecording:
    samples: np.ndarray
    sample_rate_hz: float
    sample_format: str = FORMAT_TAG

    def to_buffer(self) -> SampleBuffer:
        return SampleBuffer(self.samples.astype(np.complex128), self.sample_rate_hz)


def encode(buffer: SampleBuffer) -> bytes:
    header = (f"{MAGIC}\nsample_rate_hz={buffer.sample_rate_hz!r}\n"
              f"count={len(buffer)}\nformat={FORMAT_TAG}\n\n").encode("ascii")
    inter = np.empty(2 * len(buffer), dtype="<f4")
    inter[0::2] = buffer.samples.real
    inter[1::2] = buffer.samples.imag
    return header + inter.tobytes()


def decode(data: bytes) -> IqRecording:
    end = data.find(b"\n\n", 0, _MAX_HEADER)
    if end < 0:
        raise IqFormatError("missing or oversized header")
    try:
        lines = data[:end].decode("ascii").split("\n")
    except UnicodeDecodeError as exc:
        raise IqFormatError("header is not ASCII") from exc
    if lines[0] != MAGIC:
        raise IqFormatError(f"bad magic {lines[0]!r}")
    fields = {}
    for line in lines[1:]:
        key, sep, value = line.partition("=")
        if not sep:
            raise IqFormatError(f"bad header line {line!r}")
        fields[key] = value
    try:
        fs = float(fields["sample_rate_hz"])
        count = int(fields["count"])
        fmt = fields["format"]
    except (KeyError, ValueError) as exc:
        raise IqFormatError(f"bad or missing header field: {exc}") from exc
    if fmt != FORMAT_TAG:
        raise IqFormatError(f"unsupported sample format {fmt!r}")
    if not fs > 0 or count < 1:
        raise IqFormatError("sample rate and count must be positive")
    payload = data[end + 2:]
    if len(payload) % 4:
        raise IqFormatError("payload is not a whole number of float32 values")
    values = np.frombuffer(payload, dtype="<f4")
    if values.size % 2:
        raise IqFormatError("odd number of scalar values; I/Q pairs are incomplete")
    if values.size != 2 * count:
        raise IqFormatError(f"header declares {count} samples, payload holds {values.size // 2}")
    if not np.all(np.isfinite(values)):
        raise IqFormatError("payload contains non-finite values")
    samples = values[0::2].astype(np.float64) + 1j * values[1::2].astype(np.float64)
    return IqRecording(samples, fs, fmt)


def read_iq(path) -> IqRecording:
    return decode(Path(path).read_bytes())
