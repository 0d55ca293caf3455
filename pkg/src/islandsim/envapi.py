"""Gym-style environment facade.

Actions arrive as float arrays in [-1, 1], are quantized to the Q16.16
grid at this boundary, and are decoded into per-frame control deltas.
Observations are a 96x96x4 RGBD image plus 51 proprioceptive floats
(14 three-vectors and 9 scalars); nothing in them leaks world state the
agent could not sense from inside the body.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import archive
from .fixedmath import NANO, Q16
from .renderer import Renderer
from .simkernel import ControlFrame, PhysicsParams, Simulation
from .taskgen import generate_task_world
from .worldcore import WorldConfig

ACTION_DIM_FULL = 21
ACTION_DIM_REDUCED = 9
PROPRIO_DIM = 51

# Per-frame scale of each continuous channel.
HEAD_DELTA_SCALE = 0.5      # m
ROT_DELTA_SCALE = 0.3       # rad
HAND_DELTA_SCALE = 0.5      # m


class EnvError(RuntimeError):
    """Lifecycle misuse: stepping before reset or after done."""


def quantize_action(action: np.ndarray) -> np.ndarray:
    """Clamp to [-1, 1] and snap to the Q16.16 grid."""
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    return np.round(a * Q16) / Q16


def action_to_q16(action: np.ndarray) -> list:
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    return [int(v) for v in np.round(a * Q16).astype(np.int64)]


def q16_to_action(row: list) -> np.ndarray:
    return np.asarray(row, dtype=np.float64) / Q16


def decode_action(action: np.ndarray, reduced: bool) -> ControlFrame:
    """Turn a quantized action vector into a control frame.

    Full layout (21): head dpos(3), head drot(3), left hand dpos(3),
    left hand drot(3), right hand dpos(3), right hand drot(3),
    grasp_left, grasp_right, jump.

    Reduced layout (9): fwd, left, yaw, pitch, right-hand fwd,
    right-hand up, grasp_right, jump, crouch.
    """
    a = quantize_action(action)
    if reduced:
        if a.shape != (ACTION_DIM_REDUCED,):
            raise EnvError(f"expected {ACTION_DIM_REDUCED} action dims")
        return ControlFrame(
            head_delta=(a[0] * HEAD_DELTA_SCALE, a[1] * HEAD_DELTA_SCALE,
                        a[8] * HEAD_DELTA_SCALE),
            head_rot=(a[3] * ROT_DELTA_SCALE, a[2] * ROT_DELTA_SCALE, 0.0),
            right_hand_delta=(a[4] * HAND_DELTA_SCALE, 0.0,
                              a[5] * HAND_DELTA_SCALE),
            grasp_right=bool(a[6] >= 0.5),
            jump=bool(a[7] >= 0.5))
    if a.shape != (ACTION_DIM_FULL,):
        raise EnvError(f"expected {ACTION_DIM_FULL} action dims")
    return ControlFrame(
        head_delta=(a[0] * HEAD_DELTA_SCALE, a[1] * HEAD_DELTA_SCALE,
                    a[2] * HEAD_DELTA_SCALE),
        head_rot=(a[3] * ROT_DELTA_SCALE, a[4] * ROT_DELTA_SCALE,
                  a[5] * ROT_DELTA_SCALE),
        left_hand_delta=(a[6] * HAND_DELTA_SCALE, a[7] * HAND_DELTA_SCALE,
                         a[8] * HAND_DELTA_SCALE),
        right_hand_delta=(a[12] * HAND_DELTA_SCALE,
                          a[13] * HAND_DELTA_SCALE,
                          a[14] * HAND_DELTA_SCALE),
        grasp_left=bool(a[18] >= 0.5),
        grasp_right=bool(a[19] >= 0.5),
        jump=bool(a[20] >= 0.5))


@dataclass
class Observation:
    image: np.ndarray      # (n, n, 4) float32 RGBD
    proprio: np.ndarray    # (51,) float32

    def flat_proprio(self) -> np.ndarray:
        return self.proprio


class Env:
    """One reusable environment; reset() builds a world from a config."""

    def __init__(self, params: "PhysicsParams | None" = None,
                 reduced_actions: bool = False, image_size: int = 96,
                 render: bool = True):
        self.params = params or PhysicsParams()
        self.reduced = reduced_actions
        self.render_enabled = render
        self.renderer = Renderer(image_size) if render else None
        self.sim: "Simulation | None" = None
        self.config: "WorldConfig | None" = None
        self.recording: "list | None" = None
        self._hash_every = 100
        self._hashes: dict = {}
        self._prev: "dict | None" = None

    @property
    def action_dim(self) -> int:
        return ACTION_DIM_REDUCED if self.reduced else ACTION_DIM_FULL

    def reset(self, config: WorldConfig, record: bool = False,
              world=None) -> Observation:
        self.config = config
        if world is None:
            world = generate_task_world(config)
        self.sim = Simulation(world, self.params)
        self.recording = [] if record else None
        self._hashes = {}
        self._prev = None
        return self._observe()

    def step(self, action) -> "tuple[Observation, float, bool, dict]":
        if self.sim is None:
            raise EnvError("step before reset")
        if self.sim.done:
            raise EnvError("episode is done; call reset")
        if self.recording is not None:
            self.recording.append(action_to_q16(np.asarray(action)))
        control = decode_action(np.asarray(action), self.reduced)
        result = self.sim.step(control)
        if self.sim.frame % self._hash_every == 0 or self.sim.done:
            self._hashes[self.sim.frame] = self.sim.state_digest()
        obs = self._observe()
        info = {
            "frame": self.sim.frame,
            "termination": self.sim.termination,
            "success": self.sim.success,
            "ledger": self.sim.ledger.breakdown(),
            "reward_nano": result["reward_nano"],
        }
        return obs, result["reward"], result["done"], info

    # -- observation -----------------------------------------------------

    def _observe(self) -> Observation:
        sim = self.sim
        a = sim.agent
        p = sim.params
        head = a.head_position(p)
        state = {
            "body": a.position,
            "body_rot": (0.0, a.yaw, 0.0),
            "head": (0.0, 0.0, head[2] - a.position[2]),
            "head_rot": (a.pitch, a.yaw, a.roll),
            "hand0": a.hands[0].rel,
            "hand1": a.hands[1].rel,
        }
        prev = self._prev or state
        self._prev = state

        def d(key):
            return tuple(state[key][i] - prev[key][i] for i in range(3))

        vec = []
        for key in ("body", "body_rot", "head", "head_rot",
                    "hand0", "hand1"):
            vec.extend(d(key))
        # Hand rotation deltas mirror the wrist channels; the simulation
        # keeps hands unoriented, so these read zero.
        vec.extend((0.0, 0.0, 0.0))
        vec.extend((0.0, 0.0, 0.0))
        for key in ("head", "head_rot", "hand0", "hand1"):
            vec.extend(state[key])
        vec.extend((0.0, a.pitch, 0.0))   # left wrist orientation
        vec.extend((0.0, a.pitch, 0.0))   # right wrist orientation
        led = sim.ledger
        scalars = [
            1.0 if a.hands[0].touching else 0.0,
            1.0 if a.hands[1].touching else 0.0,
            1.0 if (a.hands[0].grasp or a.hands[0].anchor) else 0.0,
            1.0 if (a.hands[1].grasp or a.hands[1].anchor) else 0.0,
            led.energy,
            led.food_gained / NANO,
            led.fall_lost / NANO,
            led.attack_lost / NANO,
            sim.frames_remaining() / max(1, sim.world.time_limit_frames),
        ]
        proprio = np.asarray(vec + scalars, dtype=np.float32)
        assert proprio.shape == (PROPRIO_DIM,)
        if self.render_enabled:
            image = self.renderer.render(sim)
        else:
            n = self.renderer.n if self.renderer else 96
            image = np.zeros((96, 96, 4), dtype=np.float32)
        return Observation(image=image, proprio=proprio)

    # -- replay ----------------------------------------------------------

    def save_replay(self) -> bytes:
        if self.recording is None or self.sim is None:
            raise EnvError("no recording in progress")
        return archive.save_replay(
            self.config, self.recording, self._hashes,
            self.sim.state_digest())


def verify_replay(data: bytes, params: "PhysicsParams | None" = None,
                  reduced: "bool | None" = None) -> dict:
    """Re-simulate a replay and compare the recorded state hashes."""
    rep = archive.load_replay(data)
    actions = rep["actions_q16"]
    width = len(actions[0]) if actions else ACTION_DIM_FULL
    env = Env(params=params, render=False,
              reduced_actions=(width == ACTION_DIM_REDUCED
                               if reduced is None else reduced))
    env.reset(rep["config"])
    mismatches = []
    for row in actions:
        env.step(q16_to_action(row))
        f = env.sim.frame
        if f in rep["state_hashes"]:
            if env._hashes.get(f) != rep["state_hashes"][f]:
                mismatches.append(f)
        if env.sim.done:
            break
    final = env.sim.state_digest()
    return {
        "ok": not mismatches and final == rep["final_hash"],
        "final_hash": final,
        "expected_final_hash": rep["final_hash"],
        "mismatched_frames": mismatches,
        "frames_replayed": env.sim.frame,
    }
