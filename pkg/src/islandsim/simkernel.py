"""Agent physics, the energy ledger, and episode stepping.

The agent is a capsule with a head and two hands driven by per-frame
deltas, as a VR player would be. All positions are quantized to the
Q16.16 grid after every frame and the energy ledger is kept in integer
nano-units, so a whole episode is bit-reproducible from (config, action
sequence) alone.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from .entities import (AnimalState, AgentSnapshot, Attachment, FoodKind,
                       FoodState, Instrument, ItemKind, ItemState, Mode,
                       SPEC_TABLE, food_energy, food_update, hit_entity,
                       step_animal, step_door, step_switch_timers)
from .fixedmath import (NANO, Rng, det_cos, det_hypot, det_sin, quantize,
                        to_nano)
from .taskgen import GeneratedWorld, has_line_of_sight


@dataclass(frozen=True)
class PhysicsParams:
    """Energy and locomotion constants."""
    gravity: float = 10.0
    dt: float = 0.1
    mass_body: float = 60.0
    mass_head: float = 4.8
    mass_hand: float = 3.0
    fall_coefficient: float = 0.000026
    fall_speed_threshold: float = 10.0     # m/s
    move_coefficient: float = 1e-8
    kinetic_coefficient: float = 0.0
    potential_coefficient: float = 1.0
    frame_penalty: float = 1e-4
    initial_energy: float = 1.0

    capsule_radius: float = 0.4
    capsule_height: float = 1.8
    eye_height: float = 1.6
    shoulder_height: float = 1.4
    reach: float = 1.0
    grab_range: float = 0.45
    eat_range: float = 0.5
    step_height: float = 0.5
    max_head_delta: float = 0.5            # m per frame -> 5 m/s walk cap
    max_hand_delta: float = 0.5
    max_rot_delta: float = 0.3             # rad per frame
    jump_speed: float = 28.0 ** 0.5        # 1.4 m apex under g=10
    throw_gain: float = 3.0
    food_mass: float = 0.5

    @classmethod
    def standard(cls) -> "PhysicsParams":
        return cls()

    @classmethod
    def lethal_28m(cls) -> "PhysicsParams":
        """Alternate calibration: safe below ~12 m, fatal at a 28 m fall."""
        v2 = 2.0 * 10.0 * 28.0
        thresh = 240.0 ** 0.5
        coeff = 1.0 / (60.0 * (v2 - 240.0))
        return cls(fall_coefficient=coeff, fall_speed_threshold=thresh)


@dataclass
class ControlFrame:
    """One frame of already-decoded agent control."""
    head_delta: tuple = (0.0, 0.0, 0.0)    # body frame (fwd, left, up)
    head_rot: tuple = (0.0, 0.0, 0.0)      # (pitch, yaw, roll) deltas
    left_hand_delta: tuple = (0.0, 0.0, 0.0)
    right_hand_delta: tuple = (0.0, 0.0, 0.0)
    grasp_left: bool = False
    grasp_right: bool = False
    jump: bool = False


@dataclass
class MotionDeltas:
    """Per-part vertical rise and velocity-change terms for one frame."""
    body_rise: float = 0.0
    head_rise: float = 0.0
    hand_rise: tuple = (0.0, 0.0)
    body_vdot: float = 0.0                 # mean-velocity dot delta-v
    hand_vdot: tuple = (0.0, 0.0)


def fall_energy_nano(impact_speed: float, params: PhysicsParams) -> int:
    """Energy lost on landing; zero below the speed threshold."""
    over = impact_speed * impact_speed \
        - params.fall_speed_threshold * params.fall_speed_threshold
    if over <= 0.0:
        return 0
    return to_nano(params.fall_coefficient * params.mass_body * over)


def movement_penalty_nano(deltas: MotionDeltas,
                          params: PhysicsParams) -> int:
    """Per-frame cost of raising mass and changing its speed."""
    g = params.gravity
    cp = params.potential_coefficient
    ck = params.kinetic_coefficient
    total = cp * params.mass_body * g * max(0.0, deltas.body_rise)
    total += cp * params.mass_head * g * max(0.0, deltas.head_rise)
    total += ck * params.mass_body * max(0.0, deltas.body_vdot)
    for k in range(2):
        total += cp * params.mass_hand * g * max(0.0, deltas.hand_rise[k])
        total += ck * params.mass_hand * max(0.0, deltas.hand_vdot[k])
    return to_nano(params.move_coefficient * total)


@dataclass
class EnergyLedger:
    """Integer nano-unit accounting; penalties do not drain energy."""
    initial: int = NANO
    food_gained: int = 0
    fall_lost: int = 0
    attack_lost: int = 0
    move_penalty: int = 0
    frame_penalty: int = 0
    frames: int = 0

    @property
    def energy_nano(self) -> int:
        return self.initial + self.food_gained - self.fall_lost \
            - self.attack_lost

    @property
    def energy(self) -> float:
        return self.energy_nano / NANO

    def breakdown(self) -> dict:
        return {
            "energy": self.energy,
            "food_gained": self.food_gained / NANO,
            "fall_lost": self.fall_lost / NANO,
            "attack_lost": self.attack_lost / NANO,
            "move_penalty": self.move_penalty / NANO,
            "frame_penalty": self.frame_penalty / NANO,
        }


@dataclass
class HandState:
    rel: tuple = (0.5, 0.3, 1.2)          # body frame, z from the feet
    grasp: "tuple | None" = None          # ("item"|"food"|"animal", idx)
    anchor: "tuple | None" = None         # world climb point
    world: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (0.0, 0.0, 0.0)
    touching: "tuple | None" = None


@dataclass
class AgentBody:
    position: tuple                        # feet (x, y, z)
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    crouch: float = 0.0                    # head drop, [-0.9, 0]
    velocity: tuple = (0.0, 0.0, 0.0)
    grounded: bool = True
    hands: list = field(default_factory=lambda: [
        HandState(rel=(0.5, 0.3, 1.2)), HandState(rel=(0.5, -0.3, 1.2))])

    def head_position(self, params: PhysicsParams) -> tuple:
        x, y, z = self.position
        return (x, y, z + params.eye_height + self.crouch)

    def shoulder(self, params: PhysicsParams) -> tuple:
        x, y, z = self.position
        return (x, y, z + params.shoulder_height + self.crouch)

    @property
    def climbing(self) -> bool:
        return any(h.anchor is not None for h in self.hands)


def _rot(yaw: float, fwd: float, left: float) -> tuple:
    c, s = det_cos(yaw), det_sin(yaw)
    return (c * fwd - s * left, s * fwd + c * left)


def _q3(v: tuple) -> tuple:
    return (quantize(v[0]), quantize(v[1]), quantize(v[2]))


_INSTRUMENT = {
    ItemKind.ROCK: Instrument.ROCK,
    ItemKind.STICK: Instrument.STICK,
    ItemKind.STONE: Instrument.STONE,
    ItemKind.BOULDER: Instrument.OTHER,
    ItemKind.LOG: Instrument.OTHER,
}

# Items big enough to stand on.
_SUPPORT_KINDS = (ItemKind.STONE, ItemKind.BOULDER, ItemKind.LOG)

from .entities import ITEM_HALF_EXTENTS  # noqa: E402


class _WorldView:
    """The perception interface animals are given."""

    def __init__(self, sim: "Simulation"):
        self._sim = sim

    def height_at(self, x: float, y: float) -> float:
        return self._sim.world.heightmap.height_at(x, y)

    def water_level(self) -> float:
        return self._sim.world.water_level

    def size_x(self) -> float:
        return self._sim.world.heightmap.size_x

    def size_y(self) -> float:
        return self._sim.world.heightmap.size_y

    def line_of_sight(self, a: tuple, b: tuple) -> bool:
        return has_line_of_sight(self._sim.world.heightmap, a, b)


class Simulation:
    """One episode over a generated world."""

    def __init__(self, world: GeneratedWorld,
                 params: "PhysicsParams | None" = None):
        self.world = world
        self.params = params or PhysicsParams()
        sx, sy, sz, syaw = world.spawn
        self.agent = AgentBody(position=(sx, sy, sz), yaw=syaw)
        self.ledger = EnergyLedger(
            initial=to_nano(self.params.initial_energy))
        self.frame = 0
        self.done = False
        self.success = False
        self.termination: "str | None" = None
        self.last_deltas = MotionDeltas()
        self.last_reward_nano = 0
        self.last_attacks: list = []
        self.last_fall_speed = 0.0
        self._grace_end: "int | None" = None

        m = world.entities
        self.foods = [FoodState(kind=f.kind, pose=f.pose, attached=f.attached,
                                opened=f.opened, spoiled=f.spoiled)
                      for f in m.foods]
        self.items = [ItemState(kind=i.kind, pose=i.pose, yaw=i.yaw,
                                mass=i.mass) for i in m.items]
        self.animals = []
        for kind, pose, tc, tr in m.animals:
            self.animals.append(AnimalState(
                spec=SPEC_TABLE[kind], pose=pose, territory_center=tc,
                territory_radius=tr))
        self.doors = [dp.make_state() for dp in m.doors]
        self._door_placements = list(m.doors)
        self.eaten = [False] * len(self.foods)
        self.animal_eaten = [False] * len(self.animals)
        self._food_fall_start = [None] * len(self.foods)
        self._carrot_pull = [0.0] * len(self.foods)
        self._item_fall_start = [None] * len(self.items)
        self._view = _WorldView(self)
        seed = world.config.seed
        self._animal_rngs = [Rng(seed, 0xA71, i)
                             for i in range(len(self.animals))]
        self._refresh_hands(init=True)

    # -- queries ---------------------------------------------------------

    def foods_remaining(self) -> int:
        n = 0
        for ref in self.world.foods:
            if ref[0] == "food" and not self.eaten[ref[1]]:
                n += 1
            elif ref[0] == "animal" and not self.animal_eaten[ref[1]]:
                n += 1
        return n

    def frames_remaining(self) -> int:
        return max(0, self.world.time_limit_frames - self.frame)

    def inside_building(self, x: float, y: float) -> bool:
        return any(b.contains(x, y) for b in self.world.buildings)

    def support_height(self, x: float, y: float, z_ref: float,
                       exclude: "int | None" = None) -> float:
        s = self.world.heightmap.height_at(x, y)
        for idx, item in enumerate(self.items):
            if idx == exclude or item.held_by is not None:
                continue
            if item.kind not in _SUPPORT_KINDS:
                continue
            top = self._box_top(item, x, y)
            if top is not None and top <= z_ref + 0.55:
                s = max(s, top)
        return s

    def _box_top(self, item: ItemState, x: float, y: float) -> "float | None":
        hx, hy, hz = ITEM_HALF_EXTENTS[item.kind]
        dx, dy = x - item.pose[0], y - item.pose[1]
        c, s = det_cos(-item.yaw), det_sin(-item.yaw)
        lx = c * dx - s * dy
        ly = s * dx + c * dy
        if abs(lx) <= hx + 0.1 and abs(ly) <= hy + 0.1:
            return item.pose[2] + hz
        return None

    def _blocked_horizontal(self, x: float, y: float,
                            radius: float = 0.35) -> bool:
        z = self.agent.position[2]
        for b in self.world.buildings:
            x0, y0, x1, y1 = b.footprint
            if not (x0 - 1 < x < x1 + 1 and y0 - 1 < y < y1 + 1):
                continue
            if z > b.floor_height + b.wall_height - 0.2:
                continue
            for (ax, ay), (bx, by) in b.wall_segments():
                if _point_seg_dist(x, y, ax, ay, bx, by) < \
                        radius + b.wall_thickness / 2.0:
                    return True
            for di, dp in enumerate(self._door_placements):
                if dp in b.doors and not self.doors[di].passable:
                    gx, gy = dp.position
                    if det_hypot(x - gx, y - gy) < radius + dp.width / 2.0:
                        # A closed door fills its gap.
                        if abs(x - gx) < dp.width if dp.axis == "x" \
                                else abs(y - gy) < dp.width:
                            return True
        for pl in self.world.scenery.placements:
            if not pl.colliding:
                continue
            px, py, pz = pl.position
            trunk = 0.25 * pl.scale
            if det_hypot(x - px, y - py) < radius + trunk and \
                    z < pz + 3.0 * pl.scale:
                return True
        return False

    def state_digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        a = self.agent
        def pk(*vals):
            for v in vals:
                if isinstance(v, float):
                    h.update(struct.pack("<q", int(round(v * 65536))))
                else:
                    h.update(struct.pack("<q", int(v)))
        pk(self.frame, self.ledger.energy_nano, self.ledger.move_penalty,
           self.ledger.frame_penalty)
        pk(*a.position, a.yaw, a.pitch, a.roll, a.crouch, *a.velocity,
           1 if a.grounded else 0)
        for hd in a.hands:
            pk(*hd.rel, 1 if hd.grasp else 0, 1 if hd.anchor else 0)
        for f, e in zip(self.foods, self.eaten):
            pk(*f.pose, int(f.kind), 1 if f.opened else 0,
               1 if f.spoiled else 0, 1 if e else 0)
        for it in self.items:
            pk(*it.pose, it.yaw, 1 if it.airborne else 0)
        for an in self.animals:
            pk(*an.pose, an.facing, list(Mode).index(an.mode),
               an.hp_remaining if an.hp_remaining != float("inf") else -1)
        for d in self.doors:
            pk(d.open_fraction, d.switch_timer, *d.lock_travel)
        return h.hexdigest()

    # -- stepping --------------------------------------------------------

    def step(self, control: ControlFrame) -> dict:
        if self.done:
            raise RuntimeError("episode is over; reset first")
        p = self.params
        before_food = self.ledger.food_gained
        before_fall = self.ledger.fall_lost
        before_attack = self.ledger.attack_lost

        deltas = self._step_agent(control)
        self._step_items()
        self._step_doors(control)
        self._step_foods()
        attacks = self._step_animals()
        for ev in attacks:
            self.ledger.attack_lost += to_nano(ev.damage)
        self.last_attacks = attacks
        self._try_eat()

        move_nano = movement_penalty_nano(deltas, p)
        frame_nano = to_nano(p.frame_penalty)
        self.ledger.move_penalty += move_nano
        self.ledger.frame_penalty += frame_nano
        self.ledger.frames += 1
        self.frame += 1
        self.last_deltas = deltas

        reward_nano = (self.ledger.food_gained - before_food) \
            - (self.ledger.fall_lost - before_fall) \
            - (self.ledger.attack_lost - before_attack) \
            - move_nano - frame_nano
        self.last_reward_nano = reward_nano

        if self.ledger.energy_nano <= 0:
            self.done = True
            self.termination = "death"
        elif self._grace_end is None and self.foods_remaining() == 0:
            # Ten extra frames after the last food, then the episode ends.
            self._grace_end = self.frame + 10
        if not self.done and self._grace_end is not None \
                and self.frame >= self._grace_end:
            self.done = True
            self.success = True
            self.termination = "success"
        if not self.done and self.frame >= self.world.time_limit_frames:
            self.done = True
            self.termination = "timeout"
        return {
            "reward_nano": reward_nano,
            "reward": reward_nano / NANO,
            "done": self.done,
            "termination": self.termination,
            "energy": self.ledger.energy,
        }

    # -- agent -----------------------------------------------------------

    def _step_agent(self, c: ControlFrame) -> MotionDeltas:
        p = self.params
        a = self.agent
        dt = p.dt
        clampd = lambda v, m: max(-m, min(m, v))
        hd = tuple(clampd(v, p.max_head_delta) for v in c.head_delta)
        hr = tuple(clampd(v, p.max_rot_delta) for v in c.head_rot)

        old_pos = a.position
        old_crouch = a.crouch
        old_vel = a.velocity
        old_hand_rel = [h.rel for h in a.hands]
        old_hand_world = [h.world for h in a.hands]

        a.yaw = quantize((a.yaw + hr[1]) % 6.283185307179586)
        a.pitch = quantize(clampd(a.pitch + hr[0], 1.3))
        a.roll = quantize(clampd(a.roll + hr[2], 1.3))
        a.crouch = quantize(max(-0.9, min(0.0, a.crouch + hd[2])))

        self.last_fall_speed = 0.0
        if a.climbing:
            self._climb_move(c)
        elif a.grounded:
            self._walk_move(hd, c.jump)
        else:
            self._air_move()

        self._move_hands(c)
        self._grasp_transitions(c)
        a.position = _q3(a.position)
        a.velocity = _q3(a.velocity)
        self._refresh_hands()

        # Energy terms, relative to the body for head and hands.
        hand_rise = [a.hands[k].rel[2] - old_hand_rel[k][2]
                     for k in range(2)]
        # Hand kinetic terms use world motion; with the default zero
        # kinetic coefficient they never reach the ledger.
        hand_vdot = [0.0, 0.0]
        new_vel = a.velocity
        vbar_dot = sum((new_vel[i] + old_vel[i]) * 0.5
                       * (new_vel[i] - old_vel[i]) for i in range(3))
        return MotionDeltas(
            body_rise=a.position[2] - old_pos[2],
            head_rise=a.crouch - old_crouch,
            hand_rise=tuple(hand_rise),
            body_vdot=vbar_dot,
            hand_vdot=tuple(hand_vdot))

    def _can_stand(self, x: float, y: float, z: float) -> "float | None":
        """New foot height if the agent may occupy (x, y), else None."""
        hm = self.world.heightmap
        if not (0.3 <= x <= hm.size_x - 0.3 and 0.3 <= y <= hm.size_y - 0.3):
            return None
        if self._blocked_horizontal(x, y):
            return None
        support = self.support_height(x, y, z)
        if support - z > self.params.step_height:
            return None
        for item in self.items:
            if item.kind not in _SUPPORT_KINDS or item.held_by is not None:
                continue
            top = self._box_top(item, x, y)
            if top is not None and top - z > self.params.step_height:
                # Too tall to step onto: the item blocks the way.
                return None
        terrain = hm.height_at(x, y)
        if terrain < self.world.water_level - 1.2 and \
                support <= terrain + 0.01:
            # Too deep to wade into from shallower footing.  A body
            # already on the bottom may still trudge along the floor,
            # so only entry from above the wade limit is refused.
            ap = self.agent.position
            here = hm.height_at(ap[0], ap[1])
            if not (here < self.world.water_level - 1.2 and
                    ap[2] <= here + 0.6):
                return None
        return support

    def _walk_move(self, hd: tuple, jump: bool) -> None:
        a = self.agent
        p = self.params
        dt = p.dt
        wx, wy = _rot(a.yaw, hd[0], hd[1])
        mag = det_hypot(wx, wy)
        if mag > p.max_head_delta:
            wx *= p.max_head_delta / mag
            wy *= p.max_head_delta / mag
        x, y, z = a.position
        moved = False
        for cx, cy in ((x + wx, y + wy), (x + wx, y), (x, y + wy)):
            support = self._can_stand(cx, cy, z)
            if support is None:
                self._try_push(cx, cy, wx, wy)
                continue
            if z - support > p.step_height + 0.3:
                # Walked off an edge; go ballistic.
                a.position = (cx, cy, z)
                a.velocity = ((cx - x) / dt, (cy - y) / dt, 0.0)
                a.grounded = False
                moved = True
                break
            a.position = (cx, cy, support)
            a.velocity = ((cx - x) / dt, (cy - y) / dt,
                          (support - z) / dt)
            moved = True
            break
        if not moved:
            a.velocity = (0.0, 0.0, 0.0)
        if jump and a.grounded:
            vx, vy = a.velocity[0], a.velocity[1]
            a.velocity = (vx, vy, p.jump_speed)
            a.grounded = False

    def _air_move(self) -> None:
        a = self.agent
        p = self.params
        dt = p.dt
        vx, vy, vz = a.velocity
        x, y, z = a.position
        nx, ny = x + vx * dt, y + vy * dt
        hm = self.world.heightmap
        if not (0.3 <= nx <= hm.size_x - 0.3 and
                0.3 <= ny <= hm.size_y - 0.3) or \
                self._blocked_horizontal(nx, ny):
            nx, ny = x, y
            vx = vy = 0.0
        nz = z + vz * dt
        nvz = vz - p.gravity * dt
        support = self.support_height(nx, ny, z)
        wall = hm.height_at(nx, ny)
        if wall - z > p.step_height and wall > support:
            # Flew into rising terrain: stop at the face.
            nx, ny = x, y
            vx = vy = 0.0
            support = self.support_height(x, y, z)
        if nz <= support:
            self.last_fall_speed = abs(vz)
            self.ledger.fall_lost += fall_energy_nano(abs(vz), p)
            a.position = (nx, ny, support)
            a.velocity = (0.0, 0.0, 0.0)
            a.grounded = True
        else:
            a.position = (nx, ny, nz)
            a.velocity = (vx, vy, nvz)

    def _climb_move(self, c: ControlFrame) -> None:
        a = self.agent
        p = self.params
        deltas = []
        for k, hand in enumerate(a.hands):
            if hand.anchor is None:
                continue
            d = c.left_hand_delta if k == 0 else c.right_hand_delta
            d = tuple(max(-p.max_hand_delta, min(p.max_hand_delta, v))
                      for v in d)
            wx, wy = _rot(a.yaw, d[0], d[1])
            deltas.append((wx, wy, d[2]))
        if not deltas:
            return
        mx = -sum(d[0] for d in deltas) / len(deltas)
        my = -sum(d[1] for d in deltas) / len(deltas)
        mz = -sum(d[2] for d in deltas) / len(deltas)
        x, y, z = a.position
        nx, ny = x + mx, y + my
        hm = self.world.heightmap
        nx = min(max(nx, 0.3), hm.size_x - 0.3)
        ny = min(max(ny, 0.3), hm.size_y - 0.3)
        if self._blocked_horizontal(nx, ny):
            nx, ny = x, y
        nz = z + mz
        support = self.support_height(nx, ny, nz + p.step_height)
        terrain = hm.height_at(nx, ny)
        if nz < terrain:
            # Pressed into the face: ride it upward, but no faster than a
            # hand pull per frame.
            nz = min(terrain, z + 0.6)
        a.position = (nx, ny, nz)
        a.velocity = ((nx - x) / p.dt, (ny - y) / p.dt, (nz - z) / p.dt)
        if nz <= support + 0.05:
            a.grounded = True
        else:
            a.grounded = False
        # Anchored hands stay put; release any stretched past full reach.
        shoulder = a.shoulder(p)
        for hand in a.hands:
            if hand.anchor is None:
                continue
            dx = hand.anchor[0] - shoulder[0]
            dy = hand.anchor[1] - shoulder[1]
            dz = hand.anchor[2] - shoulder[2]
            if (dx * dx + dy * dy + dz * dz) ** 0.5 > p.reach + 0.05:
                hand.anchor = None

    def _try_push(self, cx: float, cy: float, wx: float, wy: float) -> None:
        """Walking into a boulder shoves it along the walk direction."""
        a = self.agent
        for item in self.items:
            if item.kind != ItemKind.BOULDER or item.held_by is not None:
                continue
            half = ITEM_HALF_EXTENTS[item.kind][0]
            if det_hypot(cx - item.pose[0], cy - item.pose[1]) < \
                    self.params.capsule_radius + half + 0.2:
                nx = item.pose[0] + wx
                ny = item.pose[1] + wy
                hm = self.world.heightmap
                nx = min(max(nx, 1.0), hm.size_x - 1.0)
                ny = min(max(ny, 1.0), hm.size_y - 1.0)
                ground = hm.height_at(nx, ny)
                if abs(ground - hm.height_at(*item.pose[:2])) < 0.5:
                    item.pose = (quantize(nx), quantize(ny),
                                 quantize(ground + ITEM_HALF_EXTENTS[
                                     item.kind][2]))
                return

    # -- hands and grasping ----------------------------------------------

    def _hand_world(self, hand: HandState) -> tuple:
        a = self.agent
        wx, wy = _rot(a.yaw, hand.rel[0], hand.rel[1])
        return (a.position[0] + wx, a.position[1] + wy,
                a.position[2] + hand.rel[2])

    def _refresh_hands(self, init: bool = False) -> None:
        dt = self.params.dt
        for hand in self.agent.hands:
            old = hand.world
            if hand.anchor is not None:
                hand.world = hand.anchor
            else:
                hand.world = _q3(self._hand_world(hand))
            if init:
                hand.velocity = (0.0, 0.0, 0.0)
            else:
                hand.velocity = ((hand.world[0] - old[0]) / dt,
                                 (hand.world[1] - old[1]) / dt,
                                 (hand.world[2] - old[2]) / dt)

    def _move_hands(self, c: ControlFrame) -> None:
        p = self.params
        a = self.agent
        for k, hand in enumerate(a.hands):
            if hand.anchor is not None:
                continue
            d = c.left_hand_delta if k == 0 else c.right_hand_delta
            d = tuple(max(-p.max_hand_delta, min(p.max_hand_delta, v))
                      for v in d)
            rx, ry, rz = hand.rel[0] + d[0], hand.rel[1] + d[1], \
                hand.rel[2] + d[2]
            # Keep the wrist inside the reach sphere about the shoulder,
            # which rides down with a crouch.
            sx, sy, sz = 0.0, 0.0, p.shoulder_height + a.crouch
            dx, dy, dz = rx - sx, ry - sy, rz - sz
            n = (dx * dx + dy * dy + dz * dz) ** 0.5
            if n > p.reach:
                f = p.reach / n
                rx, ry, rz = sx + dx * f, sy + dy * f, sz + dz * f
            hand.rel = (quantize(rx), quantize(ry), quantize(rz))

    def _grasp_transitions(self, c: ControlFrame) -> None:
        p = self.params
        a = self.agent
        for k, hand in enumerate(a.hands):
            want = c.grasp_left if k == 0 else c.grasp_right
            world = self._hand_world(hand) if hand.anchor is None \
                else hand.anchor
            hand.touching = self._nearest_graspable(world)
            if want and hand.grasp is None and hand.anchor is None:
                self._begin_grasp(k, hand, world)
            elif not want and (hand.grasp is not None or
                               hand.anchor is not None):
                self._release(k, hand)
            elif want and hand.grasp is not None:
                self._maintain_grasp(k, hand, world)

    def _nearest_graspable(self, world: tuple) -> "tuple | None":
        p = self.params
        best = None
        best_d = p.grab_range
        held_foods = {h.grasp[1] for h in self.agent.hands
                      if h.grasp and h.grasp[0] == "food"}
        for i, food in enumerate(self.foods):
            if self.eaten[i] or i in held_foods:
                continue
            d = _dist3(world, food.pose)
            if d < best_d:
                best, best_d = ("food", i), d
        for i, item in enumerate(self.items):
            if item.held_by is not None:
                continue
            d = _dist3(world, item.pose)
            hx = max(ITEM_HALF_EXTENTS[item.kind])
            if d < best_d + hx:
                best, best_d = ("item", i), max(0.0, d - hx)
        for i, an in enumerate(self.animals):
            if an.mode == Mode.DEAD and not self.animal_eaten[i]:
                if _dist3(world, an.pose) < best_d + 0.3:
                    best, best_d = ("animal", i), _dist3(world, an.pose)
        return best

    def _begin_grasp(self, k: int, hand: HandState, world: tuple) -> None:
        p = self.params
        target = self._nearest_graspable(world)
        if target is not None:
            kind, idx = target
            if kind == "food":
                food = self.foods[idx]
                if food.attached == Attachment.TREE:
                    food.attached = Attachment.FREE
                if food.attached != Attachment.GROUND:
                    food.pose = world
                hand.grasp = target
                return
            if kind == "item":
                item = self.items[idx]
                if item.kind in (ItemKind.BOULDER, ItemKind.LOG) and \
                        item.kind == ItemKind.BOULDER:
                    return  # boulders are pushed, not carried
                item.held_by = k
                item.airborne = False
                item.velocity = (0.0, 0.0, 0.0)
                item.pose = world
                self._item_fall_start[idx] = None
                hand.grasp = target
                return
            if kind == "animal":
                hand.grasp = target
                return
        hx, hy, hz = world
        hm = self.world.heightmap
        terrain = hm.height_at(hx, hy)
        if terrain >= hz - 0.35 and hm.is_climbable_at(hx, hy):
            hand.anchor = _q3((hx, hy, max(hz, terrain)))
            self.agent.grounded = False
            return
        for pl in self.world.scenery.placements:
            if not pl.colliding:
                continue
            px, py, pz = pl.position
            if det_hypot(hx - px, hy - py) < 0.6 * pl.scale and \
                    pz - 0.2 <= hz <= pz + 4.0 * pl.scale:
                hand.anchor = _q3(world)
                self.agent.grounded = False
                return

    def _maintain_grasp(self, k: int, hand: HandState, world: tuple) -> None:
        kind, idx = hand.grasp
        if kind == "food":
            food = self.foods[idx]
            if self.eaten[idx]:
                hand.grasp = None
                return
            if food.kind == FoodKind.CARROT and \
                    food.attached == Attachment.GROUND:
                rise = max(0.0, hand.velocity[2] * self.params.dt)
                self._carrot_pull[idx] += rise
                food_update(food, [("pull", self._carrot_pull[idx])])
                if food.attached != Attachment.GROUND:
                    food.pose = world
            else:
                food.pose = world
        elif kind == "item":
            item = self.items[idx]
            item.pose = world
            item.yaw = self.agent.yaw
        elif kind == "animal":
            an = self.animals[idx]
            an.pose = world

    def _release(self, k: int, hand: HandState) -> None:
        p = self.params
        if hand.anchor is not None:
            hand.anchor = None
            if not self.agent.climbing and not self.agent.grounded:
                pass  # free fall resumes in _air_move
            return
        if hand.grasp is None:
            return
        kind, idx = hand.grasp
        hand.grasp = None
        v = hand.velocity
        speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) ** 0.5
        throw = tuple(c * p.throw_gain for c in v) if speed > 0.5 \
            else (0.0, 0.0, 0.0)
        if kind == "item":
            item = self.items[idx]
            item.held_by = None
            item.velocity = _q3(throw)
            item.airborne = True
            self._item_fall_start[idx] = item.pose[2]
        elif kind == "food":
            food = self.foods[idx]
            if food.attached == Attachment.FREE:
                self._food_fall_start[idx] = food.pose[2]

    # -- non-agent entities ----------------------------------------------

    def _step_items(self) -> None:
        p = self.params
        dt = p.dt
        for idx, item in enumerate(self.items):
            if item.held_by is not None:
                self._swing_hit(item)
                continue
            if not item.airborne:
                continue
            vx, vy, vz = item.velocity
            x, y, z = item.pose
            nx, ny, nz = x + vx * dt, y + vy * dt, z + vz * dt
            hm = self.world.heightmap
            nx = min(max(nx, 0.2), hm.size_x - 0.2)
            ny = min(max(ny, 0.2), hm.size_y - 0.2)
            nvz = vz - p.gravity * dt
            speed = (vx * vx + vy * vy + vz * vz) ** 0.5
            hit = False
            if speed > 0.5:
                energy = 0.5 * item.mass * speed * speed
                for ai, an in enumerate(self.animals):
                    if an.mode == Mode.DEAD:
                        continue
                    if _seg_dist3((x, y, z), (nx, ny, nz),
                                  an.pose) < 0.7:
                        hit_entity(an, energy, _INSTRUMENT[item.kind])
                        hit = True
                        break
                if not hit:
                    for fi, food in enumerate(self.foods):
                        if self.eaten[fi]:
                            continue
                        if _seg_dist3((x, y, z), (nx, ny, nz),
                                      food.pose) < 0.45:
                            hit_entity(food, energy,
                                       _INSTRUMENT[item.kind])
                            hit = True
                            break
            hz = ITEM_HALF_EXTENTS[item.kind][2]
            support = self.support_height(nx, ny, nz, exclude=idx)
            if item.kind == ItemKind.LOG:
                # A log spans a gap whenever its ends find solid ground.
                half = ITEM_HALF_EXTENTS[ItemKind.LOG][0]
                c, s = det_cos(item.yaw), det_sin(item.yaw)
                for sign in (-1.0, 1.0):
                    ex = nx + sign * half * c
                    ey = ny + sign * half * s
                    end = self.support_height(ex, ey, nz, exclude=idx)
                    support = max(support, end)
            if hit:
                item.velocity = (0.0, 0.0, nvz)
                item.pose = _q3((nx, ny, nz))
            elif nz - hz <= support:
                item.pose = _q3((nx, ny, support + hz))
                item.velocity = (0.0, 0.0, 0.0)
                item.airborne = False
                self._item_fall_start[idx] = None
            else:
                item.pose = _q3((nx, ny, nz))
                item.velocity = _q3((vx, vy, nvz))

    def _swing_hit(self, item: ItemState) -> None:
        """A held tool swung fast enough strikes what it passes through."""
        hand = self.agent.hands[item.held_by]
        v = hand.velocity
        speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) ** 0.5
        if speed < 2.0:
            return
        swing = speed * self.params.throw_gain
        energy = 0.5 * item.mass * swing * swing
        for an in self.animals:
            if an.mode == Mode.DEAD:
                continue
            if _dist3(item.pose, an.pose) < 0.8:
                hit_entity(an, energy, _INSTRUMENT[item.kind])
                return
        for fi, food in enumerate(self.foods):
            if self.eaten[fi]:
                continue
            if _dist3(item.pose, food.pose) < 0.5:
                hit_entity(food, energy, _INSTRUMENT[item.kind])
                return

    def _step_doors(self, c: ControlFrame) -> None:
        p = self.params
        a = self.agent
        for di, door in enumerate(self.doors):
            step_switch_timers(door)
            dp = self._door_placements[di]
            gx, gy = dp.position
            ops = []
            for k, hand in enumerate(a.hands):
                hw = hand.world
                if det_hypot(hw[0] - gx, hw[1] - gy) > 1.0:
                    continue
                want = c.grasp_left if k == 0 else c.grasp_right
                for li, lk in enumerate(door.spec.locks):
                    from .entities import LockKind
                    if lk == LockKind.TIMED_SWITCH:
                        if want and _dist3(hw, (gx, gy, hw[2])) < 0.6:
                            ops.append(("press_switch", li))
                    elif want:
                        travel = hand.velocity[0] * p.dt \
                            if dp.axis == "x" else hand.velocity[1] * p.dt
                        if abs(travel) > 1e-6:
                            ops.append(("drag_lock", li, abs(travel)))
                if want and hand.grasp is None and hand.anchor is None:
                    # Dragging the handle along the opening direction.
                    travel = det_hypot(hand.velocity[0],
                                       hand.velocity[1]) * p.dt
                    if travel > 1e-6:
                        ops.append(("drag_handle", travel))
            # Walking into a rotating door pushes it.
            ax, ay = a.position[0], a.position[1]
            if det_hypot(ax - gx, ay - gy) < 0.8:
                push = det_hypot(a.velocity[0], a.velocity[1]) * p.dt
                if push > 1e-6:
                    ops.append(("body_push", push))
            if ops:
                step_door(door, ops)

    def _step_foods(self) -> None:
        p = self.params
        dt = p.dt
        held = set()
        for hand in self.agent.hands:
            if hand.grasp and hand.grasp[0] == "food":
                held.add(hand.grasp[1])
        for idx, food in enumerate(self.foods):
            if self.eaten[idx] or idx in held:
                continue
            if food.attached != Attachment.FREE:
                continue
            x, y, z = food.pose
            support = self.support_height(x, y, z) + 0.1
            if z > support + 0.02:
                if self._food_fall_start[idx] is None:
                    self._food_fall_start[idx] = z
                # Loose food drops at a fixed 6 m/s; only the total fall
                # height matters for the impact rules.
                nz = max(support, z - 6.0 * dt)
                if nz <= support + 0.02:
                    drop = (self._food_fall_start[idx] or z) - support
                    self._food_fall_start[idx] = None
                    v2 = 2.0 * p.gravity * max(0.0, drop)
                    food_update(food, [("fall", drop), ("ground_contact",),
                                       ("force",
                                        0.5 * p.food_mass * v2)])
                    food.pose = _q3((x, y, support))
                else:
                    food.pose = _q3((x, y, nz))

    def _step_animals(self) -> list:
        p = self.params
        a = self.agent
        ground = self.world.heightmap.height_at(a.position[0], a.position[1])
        snap = AgentSnapshot(
            position=a.position,
            head_position=a.head_position(p),
            facing=a.yaw,
            speed=det_hypot(a.velocity[0], a.velocity[1]),
            height_above_ground=a.position[2] - ground,
            inside_building=self.inside_building(a.position[0],
                                                 a.position[1]))
        held = set()
        for hand in a.hands:
            if hand.grasp and hand.grasp[0] == "animal":
                held.add(hand.grasp[1])
        events = []
        for i, an in enumerate(self.animals):
            if i in held or self.animal_eaten[i]:
                continue
            _, evs = step_animal(an, snap, self._view, self._animal_rngs[i],
                                 dt=p.dt, animal_id=i)
            an.pose = _q3(an.pose)
            events.extend(evs)
        return events

    def _try_eat(self) -> None:
        p = self.params
        head = self.agent.head_position(p)
        held_foods = set()
        held_animals = set()
        for hand in self.agent.hands:
            if hand.grasp:
                if hand.grasp[0] == "food":
                    held_foods.add(hand.grasp[1])
                elif hand.grasp[0] == "animal":
                    held_animals.add(hand.grasp[1])
        for idx, food in enumerate(self.foods):
            if self.eaten[idx] or not food.edible:
                continue
            near = _dist3(head, food.pose) <= p.eat_range
            if near or (idx in held_foods and
                        _dist3(head, food.pose) <= p.eat_range):
                self.eaten[idx] = True
                self.ledger.food_gained += to_nano(food.energy_value)
                for hand in self.agent.hands:
                    if hand.grasp == ("food", idx):
                        hand.grasp = None
        for idx, an in enumerate(self.animals):
            if self.animal_eaten[idx] or an.mode != Mode.DEAD:
                continue
            if _dist3(head, an.pose) <= p.eat_range:
                self.animal_eaten[idx] = True
                self.ledger.food_gained += to_nano(1.0)
                for hand in self.agent.hands:
                    if hand.grasp == ("animal", idx):
                        hand.grasp = None


def _dist3(a: tuple, b: tuple) -> float:
    dx, dy, dz = a[0] - b[0], a[1] - b[1], a[2] - b[2]
    return (dx * dx + dy * dy + dz * dz) ** 0.5


def _seg_dist3(a: tuple, b: tuple, p: tuple) -> float:
    """Distance from point p to segment a-b (a projectile's frame sweep)."""
    vx, vy, vz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    wx, wy, wz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    vv = vx * vx + vy * vy + vz * vz
    t = 0.0 if vv <= 0.0 else (wx * vx + wy * vy + wz * vz) / vv
    t = min(1.0, max(0.0, t))
    return _dist3((a[0] + t * vx, a[1] + t * vy, a[2] + t * vz), p)


def _point_seg_dist(px: float, py: float, ax: float, ay: float,
                    bx: float, by: float) -> float:
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    c1 = vx * wx + vy * wy
    if c1 <= 0:
        return det_hypot(px - ax, py - ay)
    c2 = vx * vx + vy * vy
    if c2 <= c1:
        return det_hypot(px - bx, py - by)
    t = c1 / c2
    return det_hypot(px - (ax + t * vx), py - (ay + t * vy))
