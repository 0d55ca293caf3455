"""Length-prefixed binary protocol for driving the environment.

Frame layout, both directions:

    uint32 LE payload length | uint8 message type | payload

Client -> server: RESET (JSON config and options), STEP (int32 LE Q16.16
action channels), CLOSE. Server -> client: OBS (uint32 LE JSON header
length, JSON header with proprio/reward/done/info, then raw float32 LE
RGBD image bytes), ERR (UTF-8 message). The protocol is synchronous:
every RESET or STEP gets exactly one OBS or ERR back.
"""

from __future__ import annotations

import json
import socket
import struct
import sys

import numpy as np

from .archive import config_from_dict
from .envapi import Env, EnvError, q16_to_action
from .simkernel import PhysicsParams

MSG_RESET = 1
MSG_STEP = 2
MSG_CLOSE = 3
MSG_OBS = 10
MSG_ERR = 255


class WireError(RuntimeError):
    """Framing or protocol violation."""


def _read_exact(stream, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = stream.read(n - got)
        if not chunk:
            raise EOFError
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_message(stream) -> "tuple[int, bytes]":
    header = _read_exact(stream, 5)
    (length,) = struct.unpack("<I", header[:4])
    mtype = header[4]
    payload = _read_exact(stream, length) if length else b""
    return mtype, payload


def write_message(stream, mtype: int, payload: bytes = b"") -> None:
    stream.write(struct.pack("<I", len(payload)) + bytes([mtype]) + payload)
    stream.flush()


def encode_obs(obs, reward: float, done: bool, info: dict) -> bytes:
    header = json.dumps({
        "reward": reward,
        "done": done,
        "info": info,
        "proprio": [float(v) for v in obs.proprio],
        "image_shape": list(obs.image.shape),
    }, separators=(",", ":")).encode()
    image = np.ascontiguousarray(obs.image, dtype="<f4").tobytes()
    return struct.pack("<I", len(header)) + header + image


def decode_obs(payload: bytes) -> dict:
    (hlen,) = struct.unpack_from("<I", payload, 0)
    header = json.loads(payload[4:4 + hlen].decode())
    shape = tuple(header["image_shape"])
    image = np.frombuffer(payload[4 + hlen:], dtype="<f4").reshape(shape)
    header["image"] = image
    header["proprio"] = np.asarray(header["proprio"], dtype=np.float32)
    return header


class WireServer:
    """Serves one client over a pair of binary streams."""

    def __init__(self, stream_in, stream_out):
        self.stream_in = stream_in
        self.stream_out = stream_out
        self.env: "Env | None" = None

    def serve(self) -> None:
        while True:
            try:
                mtype, payload = read_message(self.stream_in)
            except EOFError:
                return
            if mtype == MSG_CLOSE:
                return
            try:
                if mtype == MSG_RESET:
                    self._handle_reset(payload)
                elif mtype == MSG_STEP:
                    self._handle_step(payload)
                else:
                    raise WireError(f"unknown message type {mtype}")
            except Exception as err:  # report, keep serving
                write_message(self.stream_out, MSG_ERR,
                              f"{type(err).__name__}: {err}".encode())

    def _handle_reset(self, payload: bytes) -> None:
        req = json.loads(payload.decode()) if payload else {}
        config = config_from_dict(req["config"])
        params = PhysicsParams(**req.get("physics", {})) \
            if req.get("physics") else None
        self.env = Env(params=params,
                       reduced_actions=req.get("reduced_actions", False),
                       image_size=req.get("image_size", 96),
                       render=req.get("render", True))
        obs = self.env.reset(config, record=req.get("record", False))
        info = {"frame": 0, "termination": None,
                "action_dim": self.env.action_dim,
                "time_limit_frames": self.env.sim.world.time_limit_frames,
                "state_hash": self.env.sim.state_digest()}
        write_message(self.stream_out, MSG_OBS,
                      encode_obs(obs, 0.0, False, info))

    def _handle_step(self, payload: bytes) -> None:
        if self.env is None:
            raise EnvError("STEP before RESET")
        if len(payload) % 4 != 0:
            raise WireError("action payload must be int32-aligned")
        row = list(struct.unpack(f"<{len(payload) // 4}i", payload))
        obs, reward, done, info = self.env.step(q16_to_action(row))
        if done:
            info = dict(info)
            info["state_hash"] = self.env.sim.state_digest()
        write_message(self.stream_out, MSG_OBS,
                      encode_obs(obs, reward, done, info))


def serve_stdio() -> None:
    WireServer(sys.stdin.buffer, sys.stdout.buffer).serve()


def serve_tcp(host: str = "127.0.0.1", port: int = 0) -> None:
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    print(f"listening on {srv.getsockname()[0]}:{srv.getsockname()[1]}",
          flush=True)
    while True:
        conn, _ = srv.accept()
        with conn:
            fin = conn.makefile("rb")
            fout = conn.makefile("wb")
            WireServer(fin, fout).serve()


class WireClient:
    """Minimal in-process client, used by tests and the CLI."""

    def __init__(self, stream_in, stream_out):
        self.stream_in = stream_in
        self.stream_out = stream_out

    def reset(self, config_dict: dict, **options) -> dict:
        req = {"config": config_dict, **options}
        write_message(self.stream_out, MSG_RESET,
                      json.dumps(req, separators=(",", ":")).encode())
        return self._recv()

    def step(self, action_q16: list) -> dict:
        payload = struct.pack(f"<{len(action_q16)}i", *action_q16)
        write_message(self.stream_out, MSG_STEP, payload)
        return self._recv()

    def close(self) -> None:
        try:
            write_message(self.stream_out, MSG_CLOSE)
        except (BrokenPipeError, ValueError):
            pass

    def _recv(self) -> dict:
        mtype, payload = read_message(self.stream_in)
        if mtype == MSG_ERR:
            raise WireError(payload.decode())
        if mtype != MSG_OBS:
            raise WireError(f"unexpected message type {mtype}")
        return decode_obs(payload)
