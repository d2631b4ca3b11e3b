"""Framing tests for the critic socket protocol: byte-level round trips,
malformed-input rejection, socket IO, and a zero-noise loopback server
standing in for an external critic process."""

import socket
import threading

import numpy as np
import pytest

from skelmotion import mosds, wire


def sample_arrays(rng, shapes=((3, 1, 4, 4), (2, 5))):
    return [rng.standard_normal(s).astype(np.float32) for s in shapes]


# ---------------------------------------------------------------------------
# byte-level encode / decode


def test_round_trip_preserves_float32_payloads_bitwise():
    rng = np.random.default_rng(0)
    arrays = sample_arrays(rng)
    buf = wire.encode_message({"type": "request", "tau": 0.25}, arrays)
    header, out = wire.decode_message(buf)
    assert header["type"] == "request"
    assert header["tau"] == 0.25
    assert header["dtype"] == "float32"
    assert header["shapes"] == [[3, 1, 4, 4], [2, 5]]
    for a, b in zip(arrays, out):
        assert b.dtype == np.float32
        assert np.array_equal(a, b)


def test_encode_downcasts_float64_to_float32():
    arr = np.array([[0.1, 2.0**-30, 7.0]])
    _, out = wire.decode_message(wire.encode_message({"type": "request"},
                                                     [arr]))
    assert np.array_equal(out[0], arr.astype(np.float32))


def test_header_floats_survive_json_round_trip():
    tau = 0.1234567890123456789
    header, _ = wire.decode_message(wire.encode_message(
        {"type": "request", "tau": tau, "cfg_scale": 10.0, "seed": 3}, []))
    assert header["tau"] == tau
    assert header["cfg_scale"] == 10.0
    assert header["seed"] == 3


def test_payload_free_message_round_trips():
    header, arrays = wire.decode_message(
        wire.encode_message({"type": "error", "message": "nope"}))
    assert header["message"] == "nope"
    assert arrays == []


def test_decode_rejects_truncation_and_trailing_bytes():
    buf = wire.encode_message({"type": "request"},
                              [np.zeros((2, 2), dtype=np.float32)])
    with pytest.raises(wire.WireError):
        wire.decode_message(buf[:-1])
    with pytest.raises(wire.WireError):
        wire.decode_message(buf + b"\x00")
    with pytest.raises(wire.WireError):
        wire.decode_message(buf[:3])


def test_decode_rejects_oversized_header_claim():
    import struct
    with pytest.raises(wire.WireError):
        wire.decode_message(struct.pack("<I", 1 << 24) + b"{}")


# ---------------------------------------------------------------------------
# socket IO


def test_socket_round_trip_is_bit_exact():
    rng = np.random.default_rng(1)
    arrays = sample_arrays(rng, shapes=((4, 1, 8, 8),))
    left, right = socket.socketpair()
    try:
        wire.write_message(left, {"type": "request", "seed": 11}, arrays)
        header, out = wire.read_message(right)
    finally:
        left.close()
        right.close()
    assert header["seed"] == 11
    assert np.array_equal(out[0], arrays[0])


def test_read_message_raises_on_early_close():
    left, right = socket.socketpair()
    left.sendall(b"\x10\x00\x00\x00{")
    left.close()
    try:
        with pytest.raises(wire.WireError):
            wire.read_message(right)
    finally:
        right.close()


# ---------------------------------------------------------------------------
# response mapping


def test_response_from_wire_builds_float64_response():
    rng = np.random.default_rng(2)
    arrays = sample_arrays(rng, shapes=((2, 1, 3, 3),) * 3)
    header = {"type": "response", "schedule_weight": 0.75,
              "shapes": [[2, 1, 3, 3]] * 3}
    resp = wire.response_from_wire(header, arrays)
    assert resp.schedule_weight == 0.75
    assert resp.latent_shape == (2, 1, 3, 3)
    assert resp.eps_uncond.dtype == np.float64
    assert np.array_equal(resp.eps_uncond, arrays[0].astype(np.float64))


def test_response_from_wire_raises_bridge_error():
    with pytest.raises(wire.BridgeError, match="model exploded"):
        wire.response_from_wire({"type": "error",
                                 "message": "model exploded"}, [])


def test_response_from_wire_rejects_bad_shape_count():
    arrays = [np.zeros((1, 1, 2, 2), dtype=np.float32)] * 2
    with pytest.raises(wire.WireError):
        wire.response_from_wire({"type": "response"}, arrays)


def test_bridge_critic_rejects_malformed_address():
    for address in ("localhost", "nope:", ":123", "host:port"):
        with pytest.raises(ValueError):
            wire.BridgeCritic(address)


# ---------------------------------------------------------------------------
# loopback critic service


def zero_noise_server(listener, served):
    conn, _ = listener.accept()
    with conn:
        while True:
            try:
                header, arrays = wire.read_message(conn)
            except wire.WireError:
                break
            served.append(header)
            if header.get("type") != "request":
                wire.write_message(conn, {"type": "error",
                                          "message": "bad type"})
                continue
            shape = arrays[0].shape
            zeros = np.zeros(shape, dtype=np.float32)
            wire.write_message(conn, {"type": "response",
                                      "schedule_weight": 1.0 - header["tau"]},
                               [zeros, zeros, zeros])


def test_bridge_critic_against_loopback_service():
    listener = socket.create_server(("127.0.0.1", 0))
    served = []
    thread = threading.Thread(target=zero_noise_server,
                              args=(listener, served), daemon=True)
    thread.start()
    host, port = listener.getsockname()
    critic = wire.BridgeCritic(f"{host}:{port}")
    try:
        frames = np.zeros((3, 1, 4, 4))
        req = mosds.CriticRequest(frames=frames, prompt="walk",
                                  tau=0.25, seed=7)
        resp = critic(req)
        assert resp.latent_shape == (3, 1, 4, 4)
        assert resp.schedule_weight == 0.75
        grad = mosds.mosds_gradient(resp, cfg_scale=10.0,
                                    lambda_appear=0.1, lambda_motion=1.0)
        assert np.all(grad.combined == 0.0)

        resp2 = critic(req)          # connection stays open across calls
        assert np.array_equal(resp2.eps_text, resp.eps_text)
    finally:
        critic.close()
        listener.close()
    assert len(served) == 2
    assert served[0]["prompt"] == "walk"
    assert served[0]["shapes"] == [[3, 1, 4, 4]]
