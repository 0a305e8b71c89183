import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from specsense.iqfile import IqFormatError, decode, encode, read_iq
from specsense.signals import SampleBuffer


@given(arrays(np.float32, st.integers(1, 100).map(lambda n: 2 * n),
              elements=st.floats(-1e6, 1e6, width=32)),
       st.floats(1.0, 1e9))
@settings(max_examples=40, deadline=None)
def test_roundtrip(vals, fs):
    buf = SampleBuffer(vals[0::2].astype(float) + 1j * vals[1::2].astype(float), fs)
    rec = decode(encode(buf))
    assert rec.sample_rate_hz == fs and rec.sample_format == "cf32le"
    assert np.array_equal(rec.samples, buf.samples)


def test_read_file(tmp_path):
    p = tmp_path / "x.iq"
    p.write_bytes(encode(SampleBuffer([1 + 2j, -3j], 8.0)))
    assert np.array_equal(read_iq(p).to_buffer().samples, [1 + 2j, -3j])


def _good():
    return encode(SampleBuffer(np.arange(4) + 1j, 2.0))


@pytest.mark.parametrize("mutate", [
    lambda b: b.replace(b"SPECSENSE-IQ 1", b"OTHER-IQ 1"),
    lambda b: b[:-4],
    lambda b: b[:-1],
    lambda b: b + b"\x00" * 8,
    lambda b: b.replace(b"count=4", b"count=x"),
    lambda b: b.replace(b"format=cf32le", b"format=ci16"),
    lambda b: b.replace(b"\nformat=cf32le", b""),
    lambda b: b.replace(b"\n\n", b"\n"),
    lambda b: b.replace(b"count=4", b"count=0"),
])
def test_malformed_rejected(mutate):
    with pytest.raises(IqFormatError):
        decode(mutate(_good()))


def test_non_finite_rejected():
    data = bytearray(_good())
    data[-4:] = np.array([np.nan], dtype="<f4").tobytes()
    with pytest.raises(IqFormatError):
        decode(bytes(data))
