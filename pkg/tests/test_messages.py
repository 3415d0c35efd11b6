import socket
import struct
import threading

import numpy as np
import pytest

from dualkin.pipeline.messages import (
    FrameReader,
    Measurement,
    ParamUpdate,
    ProtocolError,
    Shutdown,
    Threshold,
    decode_frame,
    encode,
    send_message,
)


def test_measurement_frame_bytes_exact():
    msg = Measurement(k=3, t=0.03, y=np.array([1.5, -2.0]))
    frame = encode(msg)
    # u32 LE payload length, u8 tag 0x01, then f64 fields k, t, y...
    assert frame[:5] == struct.pack("<IB", 4 * 8, 0x01)
    fields = np.frombuffer(frame[5:], dtype="<f8")
    assert np.array_equal(fields, [3.0, 0.03, 1.5, -2.0])


def test_tag_values():
    assert encode(Measurement(1, 0.0, np.zeros(1)))[4] == 0x01
    assert encode(ParamUpdate(1, 10, np.zeros(3)))[4] == 0x02
    assert encode(Threshold(50))[4] == 0x03
    assert encode(Shutdown())[4] == 0x04
    assert encode(Shutdown()) == struct.pack("<IB", 0, 0x04)


@pytest.mark.parametrize(
    "msg",
    [
        Measurement(k=7, t=0.07, y=np.linspace(-1, 1, 12)),
        ParamUpdate(source=2, k_used=120, theta=np.array([0.05, 0.0, 0.03])),
        Threshold(beta=140),
        Shutdown(),
    ],
)
def test_round_trip(msg):
    out = decode_frame(encode(msg))
    assert type(out) is type(msg)
    if isinstance(msg, Measurement):
        assert out.k == msg.k and out.t == msg.t and np.array_equal(out.y, msg.y)
    elif isinstance(msg, ParamUpdate):
        assert (out.source, out.k_used) == (msg.source, msg.k_used)
        assert np.array_equal(out.theta, msg.theta)
    elif isinstance(msg, Threshold):
        assert out.beta == msg.beta


def test_unknown_tag_rejected():
    frame = struct.pack("<IB", 0, 0x77)
    with pytest.raises(ProtocolError):
        decode_frame(frame)


def test_length_mismatch_rejected():
    frame = struct.pack("<IB", 16, 0x01) + b"\x00" * 8
    with pytest.raises(ProtocolError):
        decode_frame(frame)


def test_reader_over_socket():
    a, b = socket.socketpair()
    messages = [
        Measurement(k=1, t=0.01, y=np.arange(12.0)),
        ParamUpdate(source=1, k_used=30, theta=np.array([1.0, 2.0, 3.0])),
        Threshold(beta=50),
        Shutdown(),
    ]

    def writer():
        for msg in messages:
            send_message(a, msg)
        a.close()

    th = threading.Thread(target=writer)
    th.start()
    reader = FrameReader(b)
    got = [reader.read() for _ in range(len(messages))]
    th.join()
    b.close()
    assert [type(m) for m in got] == [type(m) for m in messages]
    assert np.array_equal(got[0].y, messages[0].y)
    assert got[2].beta == 50


def test_reader_detects_truncation():
    a, b = socket.socketpair()
    a.sendall(encode(Threshold(5))[:3])
    a.close()
    with pytest.raises(ProtocolError):
        FrameReader(b).read()
    b.close()
