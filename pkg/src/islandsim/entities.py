"""Interactable non-agent things: foods, items, animals, doors.

Animal behavior is a small finite-state machine per animal: inactive
(idle behavior) <-> active (pursue or flee) with per-species activation
and deactivation conditions, plus absorbing dead and timed respite modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

from .fixedmath import Rng, det_atan2, det_cos, det_hypot, det_sin


# ---------------------------------------------------------------------------
# Foods
# ---------------------------------------------------------------------------

class FoodKind(IntEnum):
    APPLE = 0
    BANANA = 1
    FIG = 2
    ORANGE = 3
    AVOCADO = 4
    COCONUT = 5
    HONEYCOMB = 6
    CHERRY = 7
    MULBERRY = 8
    CARROT = 9


class Attachment(Enum):
    TREE = "tree"
    GROUND = "ground"
    FREE = "free"


# Kinds that start sealed and must be opened before they are edible.
SEALED_KINDS = (FoodKind.ORANGE, FoodKind.AVOCADO, FoodKind.COCONUT)


def food_energy(kind: FoodKind) -> float:
    return 0.5 if kind == FoodKind.BANANA else 1.0


@dataclass
class FoodState:
    kind: FoodKind
    pose: tuple  # (x, y, z)
    attached: Attachment = Attachment.TREE
    opened: bool = False
    spoiled: bool = False

    def __post_init__(self):
        if self.kind == FoodKind.CARROT and self.attached == Attachment.TREE:
            self.attached = Attachment.GROUND

    @property
    def energy_value(self) -> float:
        return food_energy(self.kind)

    @property
    def edible(self) -> bool:
        if self.spoiled:
            return False
        if self.kind in SEALED_KINDS:
            return self.opened
        if self.kind == FoodKind.CARROT:
            return self.attached == Attachment.FREE
        return True


# ---------------------------------------------------------------------------
# Items (tools)
# ---------------------------------------------------------------------------

class ItemKind(IntEnum):
    ROCK = 0
    STICK = 1
    STONE = 2
    BOULDER = 3
    LOG = 4


ITEM_MASS = {
    ItemKind.ROCK: 1.0,
    ItemKind.STICK: 2.0,
    ItemKind.STONE: 20.0,
    ItemKind.BOULDER: 120.0,
    ItemKind.LOG: 40.0,
}

# Collision half-extents (x, y, z) of the item proxy boxes, meters.
ITEM_HALF_EXTENTS = {
    ItemKind.ROCK: (0.08, 0.08, 0.08),
    ItemKind.STICK: (0.5, 0.06, 0.06),
    ItemKind.STONE: (0.4, 0.4, 0.4),
    ItemKind.BOULDER: (0.5, 0.5, 0.5),
    ItemKind.LOG: (2.25, 0.2, 0.2),
}


@dataclass
class ItemState:
    kind: ItemKind
    pose: tuple                       # (x, y, z) of the box center
    velocity: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    mass: float = 0.0
    held_by: "int | None" = None      # hand id (0 left, 1 right)
    airborne: bool = False

    def __post_init__(self):
        if self.mass == 0.0:
            self.mass = ITEM_MASS[self.kind]


# ---------------------------------------------------------------------------
# Doors and locks
# ---------------------------------------------------------------------------

class DoorMotion(Enum):
    ROTATING = "rotating"
    SLIDING = "sliding"


class OpenDirection(Enum):
    PUSH = "push"
    PULL = "pull"
    SLIDE = "slide"


class LockKind(Enum):
    DEADBOLT_SLIDE = "deadbolt_slide"
    ROTATING_BOLT = "rotating_bolt"
    TIMED_SWITCH = "timed_switch"


@dataclass(frozen=True)
class DoorSpec:
    motion: DoorMotion = DoorMotion.ROTATING
    open_direction: OpenDirection = OpenDirection.PUSH
    locks: tuple = ()

    def __post_init__(self):
        if len(self.locks) > 3:
            raise ValueError("at most three locks")
        if len(set(self.locks)) != len(self.locks):
            raise ValueError("lock kinds must be distinct")


@dataclass
class DoorState:
    spec: DoorSpec
    open_fraction: float = 0.0
    lock_travel: list = field(default_factory=list)  # per-lock [0,1]
    switch_timer: int = 0

    def __post_init__(self):
        if not self.lock_travel:
            self.lock_travel = [0.0] * len(self.spec.locks)

    def lock_engaged(self, idx: int) -> bool:
        kind = self.spec.locks[idx]
        if kind == LockKind.TIMED_SWITCH:
            return self.switch_timer <= 0
        return self.lock_travel[idx] < 0.8

    @property
    def lock_states(self) -> list:
        return [self.lock_engaged(i) for i in range(len(self.spec.locks))]

    @property
    def unlocked(self) -> bool:
        return not any(self.lock_states)

    @property
    def passable(self) -> bool:
        return self.open_fraction > 0.6


class BehaviorParams:
    """Numeric thresholds the behavior tables leave unspecified."""
    radius_small = 3.0        # m
    radius_wide = 10.0        # m
    deactivate_factor = 1.5   # deactivation radius = factor * activation
    speed_slow = 1.5          # m/s
    speed_fast = 5.0          # m/s
    idle_speed_slow = 1.0
    idle_speed_fast = 2.5
    avoidant_speed = 0.75
    respite_frames = 100
    freeze_window = 20        # frames of agent stillness to lose the jaguar
    attack_range = 0.8        # m horizontal
    attack_height = 1.8       # m vertical tolerance
    attack_cooldown = 10      # frames between persistent attacks
    hit_threshold_j = 5.0
    fig_splatter_j = 15.0
    coconut_drop_m = 2.0
    carrot_pull_m = 0.5
    switch_window = 50        # frames
    fov_half_angle = math.pi / 3
    domain_climb_height = 1.5  # m above terrain counts as "up a tree"


def step_switch_timers(door: DoorState) -> None:
    if door.switch_timer > 0:
        door.switch_timer -= 1


def step_door(door: DoorState, interactions: list) -> DoorState:
    """Apply one frame of hand/body interactions to a door.

    interactions: list of tuples -
      ("drag_lock", idx, delta)   move a bolt by delta travel fraction
      ("press_switch", idx)       press a timed switch
      ("drag_handle", delta)      pull/push the handle
      ("body_push", delta)        walk into a rotating door
    """
    has_switch = LockKind.TIMED_SWITCH in door.spec.locks
    switch_open = door.switch_timer > 0
    locks_movable = (not has_switch) or switch_open

    for op in interactions:
        if op[0] == "press_switch":
            idx = op[1]
            if door.spec.locks[idx] == LockKind.TIMED_SWITCH:
                door.switch_timer = BehaviorParams.switch_window
                switch_open = True
                locks_movable = True
        elif op[0] == "drag_lock":
            idx, delta = op[1], op[2]
            if door.spec.locks[idx] == LockKind.TIMED_SWITCH:
                continue
            if locks_movable:
                door.lock_travel[idx] = min(1.0, max(
                    0.0, door.lock_travel[idx] + delta))
        elif op[0] in ("drag_handle", "body_push"):
            delta = op[1]
            if op[0] == "body_push" and door.spec.motion != DoorMotion.ROTATING:
                continue
            if door.unlocked:
                door.open_fraction = min(1.0, max(
                    0.0, door.open_fraction + delta))
    return door


# ---------------------------------------------------------------------------
# Animals
# ---------------------------------------------------------------------------

class AnimalKind(IntEnum):
    # predators
    BEE = 0
    SNAKE = 1
    HAWK = 2
    HIPPO = 3
    ALLIGATOR = 4
    EAGLE = 5
    WOLF = 6
    JAGUAR = 7
    BEAR = 8
    # prey
    FROG = 9
    TURTLE = 10
    MOUSE = 11
    RABBIT = 12
    PIGEON = 13
    SQUIRREL = 14
    CROW = 15
    DEER = 16


PREDATORS = tuple(AnimalKind(i) for i in range(9))
PREY = tuple(AnimalKind(i) for i in range(9, 17))


class Domain(Enum):
    GROUND = "ground"
    AIR = "air"


class Activation(Enum):
    RADIUS_SMALL = "radius_small"
    RADIUS_WIDE = "radius_wide"
    TERRITORY = "territory"
    MUST_SEE_YOU = "must_see_you"
    YOU_DONT_SEE_IT = "you_dont_see_it"


class Deactivation(Enum):
    OUTSIDE_RADIUS = "outside_radius"
    OUTSIDE_TERRITORY = "outside_territory"
    OUTSIDE_DOMAIN = "outside_domain"
    KO = "ko"
    YOU_SEE_IT = "you_see_it"
    YOU_STOP_MOVING = "you_stop_moving"
    CANT_SEE_YOU = "cant_see_you"


class Idle(Enum):
    STATIC_AVOIDANT = "static_avoidant"
    SLOW_RANDOM = "slow_random"
    FAST_RANDOM = "fast_random"
    TERRITORY_BOUND_SLOW = "territory_bound_slow"
    TERRITORY_BOUND_FAST = "territory_bound_fast"
    PERIODIC_FIXED = "periodic_fixed"


class Speed(Enum):
    SLOW = "slow"
    FAST = "fast"


class Respite(Enum):
    PERMANENT = "permanent"
    TEMPORARY = "temporary"
    PERSISTENT = "persistent"


INFINITE = float("inf")


@dataclass(frozen=True)
class AnimalSpec:
    kind: AnimalKind
    domain: Domain
    can_climb: bool
    no_inside: bool
    activation: frozenset
    deactivation: frozenset
    idle: Idle
    active_speed: "Speed | None"
    attack_damage: float       # 0.0 for prey
    respite: "Respite | None"
    defense_hp: float          # hit points; inf = indestructible

    @property
    def is_predator(self) -> bool:
        return self.kind in PREDATORS


def _spec(kind, domain, climb, no_inside, act, deact, idle, speed,
          attack, respite, hp):
    return AnimalSpec(kind=kind, domain=domain, can_climb=climb,
                      no_inside=no_inside, activation=frozenset(act),
                      deactivation=frozenset(deact), idle=idle,
                      active_speed=speed, attack_damage=attack,
                      respite=respite, defense_hp=hp)


A, D = Activation, Deactivation

SPEC_TABLE = {
    AnimalKind.BEE: _spec(
        AnimalKind.BEE, Domain.AIR, False, False,
        {A.RADIUS_SMALL}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.TERRITORY_BOUND_FAST, Speed.FAST, 0.25, Respite.PERMANENT, 1),
    AnimalKind.SNAKE: _spec(
        AnimalKind.SNAKE, Domain.GROUND, False, False,
        {A.RADIUS_SMALL}, {D.KO},
        Idle.STATIC_AVOIDANT, Speed.FAST, 5.0, Respite.PERSISTENT, 1),
    AnimalKind.HAWK: _spec(
        AnimalKind.HAWK, Domain.AIR, False, False,
        {A.RADIUS_WIDE, A.TERRITORY},
        {D.OUTSIDE_RADIUS, D.OUTSIDE_TERRITORY, D.KO},
        Idle.PERIODIC_FIXED, Speed.FAST, 0.25, Respite.TEMPORARY, 1),
    AnimalKind.HIPPO: _spec(
        AnimalKind.HIPPO, Domain.GROUND, False, True,
        {A.RADIUS_WIDE}, {D.OUTSIDE_RADIUS, D.OUTSIDE_DOMAIN},
        Idle.STATIC_AVOIDANT, Speed.FAST, 0.5, Respite.PERSISTENT, INFINITE),
    AnimalKind.ALLIGATOR: _spec(
        AnimalKind.ALLIGATOR, Domain.GROUND, False, False,
        {A.RADIUS_WIDE}, {D.OUTSIDE_RADIUS, D.OUTSIDE_DOMAIN, D.KO},
        Idle.SLOW_RANDOM, Speed.SLOW, 0.5, Respite.PERSISTENT, 1),
    AnimalKind.EAGLE: _spec(
        AnimalKind.EAGLE, Domain.AIR, False, False,
        {A.RADIUS_WIDE, A.YOU_DONT_SEE_IT}, {D.YOU_SEE_IT, D.KO},
        Idle.FAST_RANDOM, Speed.FAST, 0.5, Respite.PERSISTENT, 1),
    AnimalKind.WOLF: _spec(
        AnimalKind.WOLF, Domain.GROUND, False, False,
        {A.RADIUS_WIDE, A.TERRITORY},
        {D.OUTSIDE_RADIUS, D.OUTSIDE_DOMAIN, D.KO},
        Idle.TERRITORY_BOUND_SLOW, Speed.FAST, 0.5, Respite.PERSISTENT, 2),
    AnimalKind.JAGUAR: _spec(
        AnimalKind.JAGUAR, Domain.GROUND, True, False,
        {A.RADIUS_WIDE, A.MUST_SEE_YOU},
        {D.OUTSIDE_RADIUS, D.YOU_STOP_MOVING, D.KO},
        Idle.PERIODIC_FIXED, Speed.FAST, 0.5, Respite.PERSISTENT, 2),
    AnimalKind.BEAR: _spec(
        AnimalKind.BEAR, Domain.GROUND, True, True,
        {A.RADIUS_WIDE}, {D.OUTSIDE_RADIUS, D.OUTSIDE_DOMAIN},
        Idle.SLOW_RANDOM, Speed.FAST, 0.5, Respite.PERSISTENT, INFINITE),
    AnimalKind.FROG: _spec(
        AnimalKind.FROG, Domain.GROUND, False, False,
        set(), {D.KO},
        Idle.SLOW_RANDOM, None, 0.0, None, 1),
    AnimalKind.TURTLE: _spec(
        AnimalKind.TURTLE, Domain.GROUND, False, False,
        {A.RADIUS_SMALL}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.PERIODIC_FIXED, Speed.SLOW, 0.0, None, 1),
    AnimalKind.MOUSE: _spec(
        AnimalKind.MOUSE, Domain.GROUND, True, False,
        {A.RADIUS_SMALL, A.MUST_SEE_YOU},
        {D.OUTSIDE_RADIUS, D.CANT_SEE_YOU, D.KO},
        Idle.FAST_RANDOM, Speed.FAST, 0.0, None, 1),
    AnimalKind.RABBIT: _spec(
        AnimalKind.RABBIT, Domain.GROUND, False, False,
        {A.RADIUS_WIDE}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.FAST_RANDOM, Speed.FAST, 0.0, None, 1),
    AnimalKind.PIGEON: _spec(
        AnimalKind.PIGEON, Domain.AIR, False, False,
        {A.RADIUS_SMALL}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.TERRITORY_BOUND_FAST, Speed.FAST, 0.0, None, 1),
    AnimalKind.SQUIRREL: _spec(
        AnimalKind.SQUIRREL, Domain.GROUND, True, False,
        {A.RADIUS_SMALL}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.FAST_RANDOM, Speed.FAST, 0.0, None, 1),
    AnimalKind.CROW: _spec(
        AnimalKind.CROW, Domain.AIR, False, False,
        {A.RADIUS_WIDE}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.SLOW_RANDOM, Speed.FAST, 0.0, None, 1),
    AnimalKind.DEER: _spec(
        AnimalKind.DEER, Domain.GROUND, False, False,
        {A.RADIUS_WIDE}, {D.OUTSIDE_RADIUS, D.KO},
        Idle.STATIC_AVOIDANT, Speed.FAST, 0.0, None, 2),
}


class Mode(Enum):
    INACTIVE = "inactive"
    ACTIVE = "active"
    DEAD = "dead"
    RESPITE = "respite"


@dataclass
class AnimalState:
    spec: AnimalSpec
    pose: tuple                      # (x, y, z)
    territory_center: tuple          # (x, y)
    territory_radius: float = 12.0
    facing: float = 0.0              # yaw, radians
    velocity: tuple = (0.0, 0.0, 0.0)
    mode: Mode = Mode.INACTIVE
    hp_remaining: float = 0.0
    respite_timer: int = 0
    attack_cooldown: int = 0
    agent_still_frames: int = 0
    waypoint: "tuple | None" = None
    patrol: "tuple | None" = None    # periodic-fixed waypoint loop
    patrol_idx: int = 0

    def __post_init__(self):
        if self.hp_remaining == 0.0:
            self.hp_remaining = self.spec.defense_hp


@dataclass
class AgentSnapshot:
    """What animals are allowed to perceive about the agent."""
    position: tuple       # body anchor (x, y, z at feet)
    head_position: tuple
    facing: float         # body yaw
    speed: float          # horizontal speed, m/s
    height_above_ground: float
    inside_building: bool

    def sees(self, point: tuple, los) -> bool:
        """Whether the point is in the agent's forward FOV with clear LOS."""
        dx = point[0] - self.head_position[0]
        dy = point[1] - self.head_position[1]
        ang = det_atan2(dy, dx)
        diff = (ang - self.facing + math.pi) % (2 * math.pi) - math.pi
        if abs(diff) > BehaviorParams.fov_half_angle:
            return False
        return los(self.head_position, point)


def _animal_sees(state: AnimalState, agent: AgentSnapshot, los) -> bool:
    dx = agent.head_position[0] - state.pose[0]
    dy = agent.head_position[1] - state.pose[1]
    ang = det_atan2(dy, dx)
    diff = (ang - state.facing + math.pi) % (2 * math.pi) - math.pi
    if abs(diff) > BehaviorParams.fov_half_angle:
        return False
    eye = (state.pose[0], state.pose[1], state.pose[2] + 0.5)
    return los(eye, agent.head_position)


def _activation_radius(spec: AnimalSpec) -> float:
    if Activation.RADIUS_SMALL in spec.activation:
        return BehaviorParams.radius_small
    return BehaviorParams.radius_wide


def _horizontal_dist(a: tuple, b: tuple) -> float:
    return det_hypot(a[0] - b[0], a[1] - b[1])


def _outside_domain(spec: AnimalSpec, agent: AgentSnapshot) -> bool:
    if spec.no_inside and agent.inside_building:
        return True
    if spec.domain == Domain.GROUND and not spec.can_climb:
        return agent.height_above_ground > BehaviorParams.domain_climb_height
    return False


def _should_deactivate(state: AnimalState, agent: AgentSnapshot, los) -> bool:
    spec = state.spec
    d = spec.deactivation
    dist = _horizontal_dist(state.pose, agent.position)
    if Deactivation.OUTSIDE_RADIUS in d:
        if dist > _activation_radius(spec) * BehaviorParams.deactivate_factor:
            return True
    if Deactivation.OUTSIDE_TERRITORY in d:
        tc = state.territory_center
        if det_hypot(agent.position[0] - tc[0],
                      agent.position[1] - tc[1]) > state.territory_radius:
            return True
    if Deactivation.OUTSIDE_DOMAIN in d and _outside_domain(spec, agent):
        return True
    if Deactivation.YOU_SEE_IT in d and agent.sees(state.pose, los):
        return True
    if Deactivation.YOU_STOP_MOVING in d and \
            state.agent_still_frames >= BehaviorParams.freeze_window:
        return True
    if Deactivation.CANT_SEE_YOU in d and not _animal_sees(state, agent, los):
        return True
    return False


def _should_activate(state: AnimalState, agent: AgentSnapshot, los) -> bool:
    spec = state.spec
    a = spec.activation
    if not a:
        return False
    if _outside_domain(spec, agent):
        return False
    spatial = []
    if Activation.RADIUS_SMALL in a or Activation.RADIUS_WIDE in a:
        dist = _horizontal_dist(state.pose, agent.position)
        spatial.append(dist < _activation_radius(spec))
    if Activation.TERRITORY in a:
        tc = state.territory_center
        spatial.append(det_hypot(agent.position[0] - tc[0],
                                  agent.position[1] - tc[1])
                       <= state.territory_radius)
    if spatial and not any(spatial):
        return False
    # Perception conditions gate the spatial trigger.
    if Activation.MUST_SEE_YOU in a and not _animal_sees(state, agent, los):
        return False
    if Activation.YOU_DONT_SEE_IT in a and agent.sees(state.pose, los):
        return False
    return True


def _move_toward(state: AnimalState, target: tuple, speed: float,
                 world, dt: float) -> None:
    dx = target[0] - state.pose[0]
    dy = target[1] - state.pose[1]
    dist = det_hypot(dx, dy)
    if dist < 1e-9:
        return
    step = min(speed * dt, dist)
    nx = state.pose[0] + dx / dist * step
    ny = state.pose[1] + dy / dist * step
    nx = min(max(nx, 0.0), world.size_x())
    ny = min(max(ny, 0.0), world.size_y())
    state.facing = det_atan2(dy, dx)
    if state.spec.domain == Domain.AIR:
        ground = world.height_at(nx, ny)
        tz = max(ground + 2.0, target[2]) if len(target) > 2 else ground + 2.0
        nz = state.pose[2] + max(-speed * dt, min(speed * dt,
                                                  tz - state.pose[2]))
        state.velocity = ((nx - state.pose[0]) / dt,
                          (ny - state.pose[1]) / dt,
                          (nz - state.pose[2]) / dt)
        state.pose = (nx, ny, nz)
    else:
        new_h = world.height_at(nx, ny)
        if new_h - state.pose[2] > 0.6:   # too steep to walk up
            return
        if new_h < world.water_level() - 0.5 and \
                state.spec.kind not in (AnimalKind.ALLIGATOR,
                                        AnimalKind.HIPPO):
            return
        state.velocity = ((nx - state.pose[0]) / dt,
                          (ny - state.pose[1]) / dt,
                          (new_h - state.pose[2]) / dt)
        state.pose = (nx, ny, new_h)


def _idle_move(state: AnimalState, agent: AgentSnapshot, world,
               rng: Rng, dt: float) -> None:
    idle = state.spec.idle
    p = BehaviorParams
    if idle == Idle.STATIC_AVOIDANT:
        dist = _horizontal_dist(state.pose, agent.position)
        if dist < 2.0 * _activation_radius(state.spec):
            away = (state.pose[0] * 2 - agent.position[0],
                    state.pose[1] * 2 - agent.position[1])
            _move_toward(state, away, p.avoidant_speed, world, dt)
        return
    if idle == Idle.PERIODIC_FIXED:
        if state.patrol is None:
            cx, cy = state.territory_center
            r = max(2.0, state.territory_radius * 0.6)
            state.patrol = tuple(
                (cx + r * det_cos(k * math.pi / 2 + rng.uniform(0, 0.5)),
                 cy + r * det_sin(k * math.pi / 2 + rng.uniform(0, 0.5)))
                for k in range(4))
        wp = state.patrol[state.patrol_idx]
        if _horizontal_dist(state.pose, wp) < 0.5:
            state.patrol_idx = (state.patrol_idx + 1) % 4
            wp = state.patrol[state.patrol_idx]
        _move_toward(state, wp, p.idle_speed_slow if
                     state.spec.active_speed != Speed.FAST
                     else p.idle_speed_fast, world, dt)
        return
    # Random-walk styles.
    bound_territory = idle in (Idle.TERRITORY_BOUND_SLOW,
                               Idle.TERRITORY_BOUND_FAST)
    speed = p.idle_speed_fast if idle in (Idle.FAST_RANDOM,
                                          Idle.TERRITORY_BOUND_FAST) \
        else p.idle_speed_slow
    if state.waypoint is None or \
            _horizontal_dist(state.pose, state.waypoint) < 0.5:
        if bound_territory:
            cx, cy = state.territory_center
            r = state.territory_radius
        else:
            cx, cy = state.pose[0], state.pose[1]
            r = 8.0
        ang = rng.uniform(0.0, 2 * math.pi)
        rad = r * math.sqrt(rng.uniform(0.0, 1.0))
        state.waypoint = (min(max(cx + rad * det_cos(ang), 1.0),
                              world.size_x() - 1.0),
                          min(max(cy + rad * det_sin(ang), 1.0),
                              world.size_y() - 1.0))
    _move_toward(state, state.waypoint, speed, world, dt)


@dataclass(frozen=True)
class AttackEvent:
    animal_id: int
    kind: AnimalKind
    damage: float


def step_animal(state: AnimalState, agent: AgentSnapshot, world,
                rng: Rng, dt: float = 0.1,
                animal_id: int = 0) -> "tuple[AnimalState, list]":
    """Advance one animal by one control frame.

    world must expose height_at(x, y), water_level(), size_x(), size_y()
    and line_of_sight(a, b). Mutates and returns state plus attack events.
    """
    if state.mode == Mode.DEAD:
        return state, []
    los = world.line_of_sight
    events: list = []
    # Velocity reflects this frame's motion only; _move_toward rewrites
    # it, and a frame with no move must read as standing still.
    state.velocity = (0.0, 0.0, 0.0)

    if agent.speed < 0.1:
        state.agent_still_frames += 1
    else:
        state.agent_still_frames = 0
    if state.attack_cooldown > 0:
        state.attack_cooldown -= 1

    if state.mode == Mode.RESPITE:
        state.respite_timer -= 1
        if state.respite_timer <= 0:
            state.mode = Mode.INACTIVE
        return state, events

    # Deactivation first, then activation.
    if state.mode == Mode.ACTIVE and _should_deactivate(state, agent, los):
        state.mode = Mode.INACTIVE
        state.waypoint = None
    if state.mode == Mode.INACTIVE and _should_activate(state, agent, los):
        state.mode = Mode.ACTIVE

    spec = state.spec
    if state.mode == Mode.ACTIVE:
        speed = BehaviorParams.speed_fast if spec.active_speed == Speed.FAST \
            else BehaviorParams.speed_slow
        if spec.is_predator:
            target = agent.head_position if spec.domain == Domain.AIR \
                else agent.position
            _move_toward(state, target, speed, world, dt)
            dist = _horizontal_dist(state.pose, agent.position)
            dz = abs(state.pose[2] - agent.position[2])
            if dist < BehaviorParams.attack_range and \
                    dz < BehaviorParams.attack_height and \
                    state.attack_cooldown == 0:
                events.append(AttackEvent(animal_id=animal_id, kind=spec.kind,
                                          damage=spec.attack_damage))
                if spec.respite == Respite.PERMANENT:
                    state.mode = Mode.DEAD
                elif spec.respite == Respite.TEMPORARY:
                    state.mode = Mode.RESPITE
                    state.respite_timer = BehaviorParams.respite_frames
                else:
                    state.attack_cooldown = BehaviorParams.attack_cooldown
        else:
            away = (state.pose[0] * 2 - agent.position[0],
                    state.pose[1] * 2 - agent.position[1])
            _move_toward(state, away, speed, world, dt)
    else:
        _idle_move(state, agent, world, rng, dt)
    return state, events


# ---------------------------------------------------------------------------
# Impacts
# ---------------------------------------------------------------------------

class Instrument(Enum):
    ROCK = "rock"
    STICK = "stick"
    STONE = "stone"
    HAND = "hand"
    FALL = "fall"
    OTHER = "other"


WEAPONS = (Instrument.ROCK, Instrument.STICK, Instrument.STONE)


def hit_entity(target, energy_j: float, instrument: Instrument,
               fall_height: float = 0.0):
    """Apply an impact to an animal or a food item. Returns the target."""
    if energy_j < 0:
        raise ValueError("impact energy must be >= 0")
    p = BehaviorParams
    if isinstance(target, AnimalState):
        if target.mode == Mode.DEAD:
            return target
        if instrument in WEAPONS and energy_j >= p.hit_threshold_j and \
                target.spec.defense_hp != INFINITE:
            target.hp_remaining -= 1
            if target.hp_remaining <= 0:
                target.mode = Mode.DEAD
        return target
    food: FoodState = target
    if food.kind == FoodKind.AVOCADO:
        if instrument == Instrument.ROCK and energy_j >= p.hit_threshold_j:
            food.opened = True
    elif food.kind == FoodKind.ORANGE:
        if energy_j >= p.hit_threshold_j:
            food.opened = True
    elif food.kind == FoodKind.FIG:
        if energy_j >= p.fig_splatter_j:
            food.spoiled = True
    elif food.kind == FoodKind.COCONUT:
        if instrument == Instrument.FALL and fall_height >= p.coconut_drop_m:
            food.opened = True
    return food


def food_update(food: FoodState, events: list) -> FoodState:
    """Apply physics events to a food item.

    events: ("ground_contact",), ("fall", height_m), ("force", energy_j),
    ("pull", upward_travel_m).
    """
    p = BehaviorParams
    for ev in events:
        tag = ev[0]
        if tag == "ground_contact" and food.kind == FoodKind.HONEYCOMB:
            food.spoiled = True
        elif tag == "fall":
            if food.kind == FoodKind.COCONUT and ev[1] >= p.coconut_drop_m:
                food.opened = True
            # A hard fall is also a force event for delicate fruit.
            if food.kind == FoodKind.FIG and ev[1] >= 2.0:
                food.spoiled = True
        elif tag == "force":
            hit_entity(food, ev[1], Instrument.OTHER)
        elif tag == "pull":
            if food.kind == FoodKind.CARROT and ev[1] >= p.carrot_pull_m and \
                    food.attached == Attachment.GROUND:
                food.attached = Attachment.FREE
    return food
