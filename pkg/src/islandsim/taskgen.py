"""Task-specific world shaping.

Each of the 20 tasks is generated by one function, parameterized only by
difficulty. Generators take the base island from worldcore, carve
obstacle rings or buildings, and place foods, tools, and animals so that
reaching the food requires the task's skill.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import worldcore
from .entities import (AnimalKind, Attachment, DoorMotion, DoorSpec,
                       DoorState, FoodKind, FoodState, ItemKind, ItemState,
                       LockKind, OpenDirection, PREDATORS, PREY, SPEC_TABLE)
from .fixedmath import (Q16, Rng, det_atan2, det_cos,
                        det_hypot, det_sin, hash_combine)
from .worldcore import (Biome, BiomeMap, HeightMap, SceneryField,
                        SceneryKind, SceneryPlacement, WorldConfig,
                        build_outdoor_world_map, classify_biomes,
                        place_scenery)


class GeneratorError(RuntimeError):
    """World generation could not satisfy a constraint."""


class GeometryError(ValueError):
    """An edit fell outside the world or an unsuitable site."""


class TaskKind(Enum):
    EAT = "eat"
    MOVE = "move"
    JUMP = "jump"
    CLIMB = "climb"
    SCRAMBLE = "scramble"
    DESCEND = "descend"
    THROW = "throw"
    HUNT = "hunt"
    FIGHT = "fight"
    AVOID = "avoid"
    PUSH = "push"
    STACK = "stack"
    BRIDGE = "bridge"
    OPEN = "open"
    CARRY = "carry"
    EXPLORE = "explore"
    NAVIGATE = "navigate"
    FIND = "find"
    GATHER = "gather"
    SURVIVE = "survive"

    @property
    def is_compositional(self) -> bool:
        return self in COMPOSITIONAL_TASKS


BASIC_TASKS = tuple(t for t in TaskKind if t.value in (
    "eat", "move", "jump", "climb", "scramble", "descend", "throw", "hunt",
    "fight", "avoid", "push", "stack", "bridge", "open", "carry", "explore"))
COMPOSITIONAL_TASKS = (TaskKind.NAVIGATE, TaskKind.FIND, TaskKind.GATHER,
                       TaskKind.SURVIVE)

# Episode frame budgets at the 10 Hz control rate (15 / 10 / 5 minutes).
TIME_LIMITS = {}
for _t in TaskKind:
    TIME_LIMITS[_t] = 3000
for _t in (TaskKind.NAVIGATE, TaskKind.FIND):
    TIME_LIMITS[_t] = 9000
for _t in (TaskKind.SURVIVE, TaskKind.GATHER, TaskKind.STACK,
           TaskKind.CARRY, TaskKind.EXPLORE):
    TIME_LIMITS[_t] = 6000

# Tasks whose food must NOT be guaranteed visible from spawn.
HIDDEN_FOOD_TASKS = (TaskKind.EXPLORE, TaskKind.FIND, TaskKind.GATHER,
                     TaskKind.SURVIVE)


class RingKind(Enum):
    CLIFF = "cliff"
    CHASM = "chasm"
    RIDGE = "ridge"
    DROP = "drop"


class PassageMode(Enum):
    WALK = "walk"
    JUMP = "jump"
    CLIMB = "climb"
    DESCEND = "descend"


@dataclass
class ObstacleRing:
    center: tuple                # (x, y) m
    inner_radius: float
    outer_radius: float
    kind: RingKind
    passage_arc: tuple           # (start_angle, width) radians
    height_delta: float          # signed, m
    passage_mode: PassageMode = PassageMode.WALK
    passage_width: float = 2.0   # radial extent to cross at the passage, m
    noise_seed: int = 0

    def __post_init__(self):
        if self.inner_radius >= self.outer_radius:
            raise GeometryError("inner_radius must be < outer_radius")
        if self.passage_arc[1] <= 0:
            raise GeometryError("passage arc width must be positive")

    def passage_angle(self) -> float:
        return self.passage_arc[0] + self.passage_arc[1] / 2.0

    def passage_point(self, radius: float) -> tuple:
        a = self.passage_angle()
        return (self.center[0] + radius * det_cos(a),
                self.center[1] + radius * det_sin(a))


@dataclass
class Building:
    footprint: tuple             # (x0, y0, x1, y1) m
    floor_height: float
    stories: int = 1
    rooms: list = field(default_factory=list)   # room rects
    doors: list = field(default_factory=list)   # DoorPlacement
    climbable_exterior: bool = False
    contains_food: bool = True
    wall_height: float = 3.0
    wall_thickness: float = 0.2

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.footprint
        return x0 <= x <= x1 and y0 <= y <= y1

    def wall_segments(self) -> list:
        """2D wall segments ((ax, ay), (bx, by)) with door gaps removed."""
        segs = []
        x0, y0, x1, y1 = self.footprint
        outline = [((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)),
                   ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))]
        for seg in outline:
            segs.extend(self._cut_doors(seg))
        for room in self.rooms[1:]:
            rx0, ry0, rx1, ry1 = room
            for seg in (((rx0, ry0), (rx1, ry0)), ((rx1, ry0), (rx1, ry1)),
                        ((rx1, ry1), (rx0, ry1)), ((rx0, ry1), (rx0, ry0))):
                if not self._on_outline(seg):
                    segs.extend(self._cut_doors(seg))
        return segs

    def _on_outline(self, seg) -> bool:
        x0, y0, x1, y1 = self.footprint
        (ax, ay), (bx, by) = seg
        if abs(ax - bx) < 1e-9:  # vertical
            return abs(ax - x0) < 1e-6 or abs(ax - x1) < 1e-6
        return abs(ay - y0) < 1e-6 or abs(ay - y1) < 1e-6

    def _cut_doors(self, seg) -> list:
        (ax, ay), (bx, by) = seg
        pieces = [((ax, ay), (bx, by))]
        for dp in self.doors:
            gx, gy, gw = dp.position[0], dp.position[1], dp.width
            new = []
            for (px, py), (qx, qy) in pieces:
                if abs(py - qy) < 1e-9 and abs(py - gy) < 1e-6:
                    lo, hi = min(px, qx), max(px, qx)
                    if lo < gx - gw / 2 and hi > gx + gw / 2:
                        new.append(((lo, py), (gx - gw / 2, py)))
                        new.append(((gx + gw / 2, py), (hi, py)))
                        continue
                elif abs(px - qx) < 1e-9 and abs(px - gx) < 1e-6:
                    lo, hi = min(py, qy), max(py, qy)
                    if lo < gy - gw / 2 and hi > gy + gw / 2:
                        new.append(((px, lo), (px, gy - gw / 2)))
                        new.append(((px, gy + gw / 2), (px, hi)))
                        continue
                new.append(((px, py), (qx, qy)))
            pieces = new
        return pieces


@dataclass
class DoorPlacement:
    spec: DoorSpec
    position: tuple     # (x, y) center of the gap in a wall
    width: float = 1.2
    axis: str = "x"     # wall direction the gap lies along

    def make_state(self) -> DoorState:
        return DoorState(spec=self.spec)


@dataclass
class EntityManifest:
    """Initial entity records, stepped in listed order."""
    foods: list = field(default_factory=list)      # FoodState
    animals: list = field(default_factory=list)    # (AnimalKind, pose, territory_center, territory_radius)
    items: list = field(default_factory=list)      # ItemState
    doors: list = field(default_factory=list)      # DoorPlacement


@dataclass
class GeneratedWorld:
    config: WorldConfig
    heightmap: HeightMap
    biomemap: BiomeMap
    scenery: SceneryField
    entities: EntityManifest
    buildings: list
    rings: list
    spawn: tuple                 # (x, y, z, yaw)
    foods: list                  # entity refs ("food", i) or ("animal", i)
    time_limit_frames: int
    task: TaskKind
    difficulty: float
    meta: dict = field(default_factory=dict)
    attempts: int = 1

    @property
    def water_level(self) -> float:
        return self.config.water_level


# ---------------------------------------------------------------------------
# Ring carving
# ---------------------------------------------------------------------------

def _ring_noise(ring: ObstacleRing, theta: float) -> float:
    """Smooth boundary noise, +-0.8 m, periodic in angle."""
    k = int((theta % (2 * math.pi)) * 16 / (2 * math.pi))
    h0 = hash_combine(ring.noise_seed, k)
    h1 = hash_combine(ring.noise_seed, (k + 1) % 16)
    f = (theta * 16 / (2 * math.pi)) % 1.0
    f = f * f * (3 - 2 * f)
    a = (h0 & 0xFFFF) / 65536.0 - 0.5
    b = (h1 & 0xFFFF) / 65536.0 - 0.5
    return 1.6 * (a + (b - a) * f)


def _angle_diff(a: float, b: float) -> float:
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def apply_obstacle_ring(hm: HeightMap, bm: BiomeMap,
                        ring: ObstacleRing) -> None:
    """Carve one ring into the heightmap (in place)."""
    cx, cy = ring.center
    if not (0 <= cx <= hm.size_x and 0 <= cy <= hm.size_y):
        raise GeometryError("ring center outside world bounds")
    cs = hm.cell_size
    pad = ring.outer_radius + 3.0
    i0 = max(0, int((cy - pad) / cs))
    i1 = min(hm.height - 1, int((cy + pad) / cs))
    j0 = max(0, int((cx - pad) / cs))
    j1 = min(hm.width - 1, int((cx + pad) / cs))
    pa = ring.passage_angle()
    half_arc = ring.passage_arc[1] / 2.0
    delta_q = int(round(ring.height_delta * Q16))
    kind = ring.kind

    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            x, y = hm.cell_center(i, j)
            dx, dy = x - cx, y - cy
            r = det_hypot(dx, dy)
            theta = det_atan2(dy, dx)
            in_passage = _angle_diff(theta, pa) <= half_arc
            noise = _ring_noise(ring, theta)
            inner = ring.inner_radius + noise
            if kind in (RingKind.CLIFF, RingKind.DROP):
                if r < inner:
                    hm.heights_q[i, j] += delta_q
                if abs(r - inner) < 1.8:
                    if in_passage:
                        hm.climbable[i, j] = True
                        bm.biome_id[i, j] = int(Biome.BARE)
                    else:
                        hm.climbable[i, j] = False
                        bm.biome_id[i, j] = int(Biome.UNCLIMBABLE)
            elif kind == RingKind.CHASM:
                width = ring.passage_width if in_passage \
                    else (ring.outer_radius - ring.inner_radius)
                if inner < r < inner + width:
                    hm.heights_q[i, j] -= delta_q
                    # Outer wall stays climbable so a fallen agent can
                    # retreat; the food-side wall cannot be climbed.
                    if r < inner + width * 0.5:
                        hm.climbable[i, j] = False
                        bm.biome_id[i, j] = int(Biome.UNCLIMBABLE)
            elif kind == RingKind.RIDGE:
                mid = (ring.inner_radius + ring.outer_radius) / 2.0
                hw = (ring.outer_radius - ring.inner_radius) / 2.0
                if abs(r - mid) < hw:
                    profile = 0.5 * (1 + det_cos(math.pi * (r - mid) / hw))
                    scale = 0.18 if in_passage else 1.0
                    hm.heights_q[i, j] += int(delta_q * profile * scale)


# ---------------------------------------------------------------------------
# Traversability search
# ---------------------------------------------------------------------------

def flood_reachable(hm: HeightMap, start: tuple, goal: tuple,
                    jump_distance: float = 0.0,
                    allow_climb: bool = False,
                    max_step_up: float = 0.5,
                    max_drop: float = 3.0,
                    water_level: float = -1e9) -> bool:
    """Grid BFS from start to goal with the given movement primitives."""
    cs = hm.cell_size
    h = hm.heights
    start_c = hm.cell_of(start[0], start[1])
    goal_c = hm.cell_of(goal[0], goal[1])
    jump_cells = int(jump_distance / cs)
    seen = np.zeros(h.shape, dtype=bool)
    seen[start_c] = True
    q = deque([start_c])
    nbrs = ((1, 0), (-1, 0), (0, 1), (0, -1))
    while q:
        i, j = q.popleft()
        if (i, j) == goal_c:
            return True
        hij = h[i, j]
        for di, dj in nbrs:
            ni, nj = i + di, j + dj
            if not (0 <= ni < hm.height and 0 <= nj < hm.width) or \
                    seen[ni, nj]:
                continue
            dh = h[ni, nj] - hij
            if h[ni, nj] < water_level - 1.2:
                continue
            ok = (dh <= max_step_up and -dh <= max_drop)
            if not ok and allow_climb and dh > 0 and hm.climbable[ni, nj]:
                ok = True
            if not ok and allow_climb and dh < 0 and hm.climbable[i, j]:
                ok = True
            if ok:
                seen[ni, nj] = True
                q.append((ni, nj))
        if jump_cells >= 2:
            for di, dj in nbrs:
                for k in range(2, jump_cells + 1):
                    ni, nj = i + di * k, j + dj * k
                    if not (0 <= ni < hm.height and 0 <= nj < hm.width):
                        break
                    mids = [(i + di * m, j + dj * m) for m in range(1, k)]
                    if all(h[mi, mj] < hij - 0.5 for mi, mj in mids) and \
                            h[ni, nj] - hij <= 0.5 and \
                            h[ni, nj] >= water_level - 1.2:
                        if not seen[ni, nj]:
                            seen[ni, nj] = True
                            q.append((ni, nj))
    return False


def has_line_of_sight(hm: HeightMap, a: tuple, b: tuple,
                      margin: float = 0.2) -> bool:
    """Terrain-only sight test between two 3D points."""
    ax, ay, az = a
    bx, by, bz = b
    dist = det_hypot(bx - ax, by - ay)
    steps = max(2, int(dist / (hm.cell_size * 0.5)))
    for s in range(1, steps):
        t = s / steps
        x = ax + (bx - ax) * t
        y = ay + (by - ay) * t
        z = az + (bz - az) * t
        if hm.height_at(x, y) > z - margin:
            return False
    return True


def visible_from_spawn(world_hm: HeightMap, spawn: tuple,
                       point: tuple) -> bool:
    eye = (spawn[0], spawn[1], spawn[2] + 1.6)
    return has_line_of_sight(world_hm, eye, point)


# ---------------------------------------------------------------------------
# Generation helpers
# ---------------------------------------------------------------------------

def _flatten_site(hm: HeightMap, x: float, y: float, radius: float,
                  height: "float | None" = None) -> float:
    """Level a disc of terrain; returns the site height."""
    ci, cj = hm.cell_of(x, y)
    if height is None:
        height = hm.heights_q[ci, cj] / Q16
    hq = int(round(height * Q16))
    cs = hm.cell_size
    rc = int(radius / cs) + 1
    for i in range(max(0, ci - rc), min(hm.height, ci + rc + 1)):
        for j in range(max(0, cj - rc), min(hm.width, cj + rc + 1)):
            px, py = hm.cell_center(i, j)
            if (px - x) ** 2 + (py - y) ** 2 <= radius * radius:
                hm.heights_q[i, j] = hq
                hm.climbable[i, j] = True
    return height


def _site_ok(hm: HeightMap, bm: BiomeMap, x: float, y: float,
             water_level: float, margin: float, slope_limit: float = 0.6,
             clearance: float = 0.0) -> bool:
    if not (margin <= x <= hm.size_x - margin and
            margin <= y <= hm.size_y - margin):
        return False
    i, j = hm.cell_of(x, y)
    b = Biome(int(bm.biome_id[i, j]))
    if b in (Biome.WATER, Biome.FRESH_WATER, Biome.UNCLIMBABLE):
        return False
    h0 = hm.heights_q[i, j] / Q16
    if h0 < water_level + 0.2:
        return False
    cs = hm.cell_size
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = i + di, j + dj
        if 0 <= ni < hm.height and 0 <= nj < hm.width:
            if abs(hm.heights_q[ni, nj] / Q16 - h0) > slope_limit * cs:
                return False
    if clearance > 0.0:
        rc = int(clearance / cs)
        for di in range(-rc, rc + 1):
            for dj in range(-rc, rc + 1):
                ni, nj = i + di, j + dj
                if 0 <= ni < hm.height and 0 <= nj < hm.width:
                    hb = Biome(int(bm.biome_id[ni, nj]))
                    if hb in (Biome.WATER, Biome.FRESH_WATER):
                        return False
    return True


def _pick_site(rng: Rng, hm: HeightMap, bm: BiomeMap, water_level: float,
               margin: float = 3.0, near: "tuple | None" = None,
               dist_range: "tuple | None" = None, tries: int = 200,
               clearance: float = 0.0) -> "tuple | None":
    for _ in range(tries):
        if near is not None and dist_range is not None:
            lo, hi = dist_range
            ang = rng.uniform(0, 2 * math.pi)
            d = rng.uniform(lo, hi)
            x = near[0] + d * det_cos(ang)
            y = near[1] + d * det_sin(ang)
        else:
            x = rng.uniform(margin, hm.size_x - margin)
            y = rng.uniform(margin, hm.size_y - margin)
        if _site_ok(hm, bm, x, y, water_level, margin, clearance=clearance):
            return (x, y)
    return None


# Fruit tiers for `eat`: roughly increasing handling complexity.
_EAT_TIERS = (FoodKind.APPLE, FoodKind.BANANA, FoodKind.CHERRY,
              FoodKind.MULBERRY, FoodKind.ORANGE, FoodKind.CARROT,
              FoodKind.AVOCADO, FoodKind.HONEYCOMB, FoodKind.FIG,
              FoodKind.COCONUT)

# Predator tiers for `avoid` (easiest first, per the behavior table order).
_AVOID_TIERS = (AnimalKind.BEE, AnimalKind.SNAKE, AnimalKind.HAWK,
                AnimalKind.HIPPO, AnimalKind.ALLIGATOR, AnimalKind.EAGLE,
                AnimalKind.WOLF, AnimalKind.JAGUAR, AnimalKind.BEAR)

# Prey tiers for `throw`/`hunt` (easiest to hit first).
_PREY_TIERS = (AnimalKind.FROG, AnimalKind.TURTLE, AnimalKind.MOUSE,
               AnimalKind.RABBIT, AnimalKind.PIGEON, AnimalKind.SQUIRREL,
               AnimalKind.CROW, AnimalKind.DEER)

# Predators suitable for `fight` (finite defense, non-lethal attacks).
_FIGHT_TIERS = (AnimalKind.ALLIGATOR, AnimalKind.WOLF, AnimalKind.JAGUAR)


class _Builder:
    """Mutable scratch state shared by the per-task generators."""

    def __init__(self, config: WorldConfig, attempt: int):
        sub_seed = hash_combine(config.seed, 0x7A5C, attempt) \
            if attempt else config.seed
        self.config = config
        self.attempt = attempt
        self.rng = Rng(sub_seed, 0xB111D)
        base_cfg = WorldConfig(
            seed=sub_seed, size_in_meters=config.size_in_meters,
            fractal_iteration_count=config.fractal_iteration_count,
            noise_scale_decay=config.noise_scale_decay,
            water_level=config.water_level,
            cells_per_meter=config.cells_per_meter,
            mountain_amplitude=config.mountain_amplitude,
            base_uplift=config.base_uplift,
            base_grid_size=config.base_grid_size,
            biome_thresholds=config.biome_thresholds)
        self.base_cfg = base_cfg
        self.hm = build_outdoor_world_map(base_cfg)
        self.bm = classify_biomes(self.hm, base_cfg)
        self.manifest = EntityManifest()
        self.buildings: list = []
        self.rings: list = []
        self.foods: list = []
        self.spawn: "tuple | None" = None
        self.clearings: list = []
        self.meta: dict = {}
        self.extra_scenery: list = []

    @property
    def water(self) -> float:
        return self.config.water_level

    def set_spawn(self, x: float, y: float, yaw: float = 0.0) -> None:
        z = _flatten_site(self.hm, x, y, 1.5)
        self.spawn = (x, y, z, yaw)
        self.clearings.append((x, y, 3.0))

    def face_spawn_toward(self, target: tuple) -> None:
        x, y, z, _ = self.spawn
        yaw = det_atan2(target[1] - y, target[0] - x)
        self.spawn = (x, y, z, yaw)

    def add_food(self, kind: FoodKind, pos: tuple,
                 attached: Attachment = Attachment.FREE,
                 on_tree: bool = False) -> int:
        idx = len(self.manifest.foods)
        if on_tree:
            x, y = pos[0], pos[1]
            z = self.hm.height_at(x, y)
            tree = SceneryPlacement(
                kind=SceneryKind.FRUIT_TREE, position=(x, y, z),
                scale=1.4, yaw=self.rng.uniform(0, 2 * math.pi),
                colliding=True)
            self.extra_scenery.append(tree)
            pos = (x, y, z + 2.2)
            attached = Attachment.TREE
        self.manifest.foods.append(FoodState(kind=kind, pose=pos,
                                             attached=attached))
        self.foods.append(("food", idx))
        self.clearings.append((pos[0], pos[1], 2.5))
        return idx

    def add_animal(self, kind: AnimalKind, pos: tuple,
                   territory_radius: float = 12.0,
                   as_food: bool = False) -> int:
        z = self.hm.height_at(pos[0], pos[1])
        if SPEC_TABLE[kind].domain.value == "air":
            z += 2.5
        idx = len(self.manifest.animals)
        self.manifest.animals.append(
            (kind, (pos[0], pos[1], z), (pos[0], pos[1]), territory_radius))
        if as_food:
            self.foods.append(("animal", idx))
        return idx

    def add_item(self, kind: ItemKind, pos: tuple, yaw: float = 0.0,
                 mass: float = 0.0) -> int:
        z = self.hm.height_at(pos[0], pos[1])
        from .entities import ITEM_HALF_EXTENTS
        half = ITEM_HALF_EXTENTS[kind][2]
        item = ItemState(kind=kind, pose=(pos[0], pos[1], z + half), yaw=yaw)
        if mass:
            item.mass = mass
        self.manifest.items.append(item)
        return len(self.manifest.items) - 1

    def finish(self, task: TaskKind, visible_food: bool = True) -> GeneratedWorld:
        scenery = place_scenery(self.hm, self.bm, self.base_cfg,
                                clearings=self.clearings)
        scenery.placements.extend(self.extra_scenery)
        return GeneratedWorld(
            config=self.config, heightmap=self.hm, biomemap=self.bm,
            scenery=scenery, entities=self.manifest,
            buildings=self.buildings, rings=self.rings, spawn=self.spawn,
            foods=self.foods, time_limit_frames=TIME_LIMITS[task],
            task=task, difficulty=self.config.difficulty, meta=self.meta,
            attempts=self.attempt + 1)


def _require(cond: bool, constraint: str) -> None:
    if not cond:
        raise GeneratorError(constraint)


def _spawn_food_pair(b: _Builder, dist_lo: float, dist_hi: float,
                     clearance: float = 0.0) -> "tuple[tuple, tuple]":
    for widen in range(8):
        spawn = _pick_site(b.rng, b.hm, b.bm, b.water, clearance=clearance)
        if spawn is None:
            continue
        food = _pick_site(b.rng, b.hm, b.bm, b.water, near=spawn,
                          dist_range=(dist_lo, dist_hi + 2.0 * widen),
                          clearance=clearance)
        if food is not None:
            return spawn, food
    _require(False, "no spawn/food pair at the required distance")


def _ring_site(b: _Builder, radius: float) -> "tuple | None":
    """A site with enough flat margin to host a ring of this radius."""
    margin = radius + 2.0
    site = _pick_site(b.rng, b.hm, b.bm, b.water, margin=margin, tries=300)
    if site is not None:
        return site
    # Large rings: fall back to the island center, which the radial
    # falloff keeps above water.
    cx, cy = b.hm.size_x / 2.0, b.hm.size_y / 2.0
    if margin <= cx and b.hm.height_at(cx, cy) > b.water + 0.2:
        return (cx, cy)
    return None


def _add_ring_around(b: _Builder, center: tuple, kind: RingKind,
                     inner: float, height_delta: float,
                     passage_mode: PassageMode,
                     passage_width: float = 2.0,
                     arc_width: float = 0.9,
                     ring_width: float = 4.0) -> ObstacleRing:
    ring = ObstacleRing(
        center=center, inner_radius=inner, outer_radius=inner + ring_width,
        kind=kind,
        passage_arc=(b.rng.uniform(0, 2 * math.pi), arc_width),
        height_delta=height_delta, passage_mode=passage_mode,
        passage_width=passage_width,
        noise_seed=hash_combine(b.base_cfg.seed, 0x4117, len(b.rings)))
    # Flatten the annulus neighborhood so the carved geometry is clean.
    _flatten_site(b.hm, center[0], center[1], inner + ring_width + 2.0)
    apply_obstacle_ring(b.hm, b.bm, ring)
    b.rings.append(ring)
    pa = ring.passage_angle()
    b.clearings.append((*ring.passage_point(inner), 2.5))
    b.clearings.append((*ring.passage_point(inner + ring_width), 2.5))
    return ring


# ---------------------------------------------------------------------------
# Buildings
# ---------------------------------------------------------------------------

def generate_building(config: WorldConfig, site: tuple, rng: Rng,
                      hm: HeightMap, lock_count: int = 0,
                      door_motion: DoorMotion = DoorMotion.ROTATING,
                      size: float = 10.0) -> Building:
    """A flat-floored one-story building with two connected rooms."""
    x, y = site
    half = size / 2.0
    if not (half < x < hm.size_x - half and half < y < hm.size_y - half):
        raise GeometryError("building site outside world bounds")
    floor = _flatten_site(hm, x, y, half * 1.6)
    fp = (x - half, y - half, x + half, y + half)
    mid_y = y
    rooms = [(fp[0], fp[1], fp[2], mid_y), (fp[0], mid_y, fp[2], fp[3])]
    lock_kinds = (LockKind.DEADBOLT_SLIDE, LockKind.ROTATING_BOLT,
                  LockKind.TIMED_SWITCH)[:lock_count]
    inner_spec = DoorSpec(
        motion=door_motion,
        open_direction=(OpenDirection.SLIDE
                        if door_motion == DoorMotion.SLIDING
                        else (OpenDirection.PUSH if rng.uniform() < 0.7
                              else OpenDirection.PULL)),
        locks=tuple(lock_kinds))
    entrance = DoorSpec(motion=DoorMotion.ROTATING,
                        open_direction=OpenDirection.PUSH, locks=())
    doors = [
        DoorPlacement(spec=entrance, position=(x, fp[1]), axis="x"),
        DoorPlacement(spec=inner_spec, position=(x, mid_y), axis="x"),
    ]
    return Building(footprint=fp, floor_height=floor, rooms=rooms,
                    doors=doors, climbable_exterior=False)


# ---------------------------------------------------------------------------
# Per-task generators
# ---------------------------------------------------------------------------

def _gen_eat(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    forced = getattr(b.config, "forced_kind", None)
    if forced:
        kind = FoodKind[forced.upper()]
    elif d < 0.1:
        kind = FoodKind.APPLE
    else:
        tier = min(9, int(d * 9 + b.rng.uniform(0, 0.999)))
        kind = _EAT_TIERS[tier]
    spawn = _pick_site(b.rng, b.hm, b.bm, b.water)
    _require(spawn is not None, "no flat spawn site on land")
    b.set_spawn(*spawn)
    x, y, z, _ = b.spawn
    if d < 0.1 and kind == FoodKind.APPLE:
        # The fruit hangs within grasp reach straight ahead.
        fx, fy = x + 0.8, y
        b.add_food(kind, (fx, fy, z + 1.2), attached=Attachment.TREE)
    else:
        ang = b.rng.uniform(0, 2 * math.pi)
        dist = 2.0 + 6.0 * d
        fx = min(max(x + dist * det_cos(ang), 3.0), b.hm.size_x - 3.0)
        fy = min(max(y + dist * det_sin(ang), 3.0), b.hm.size_y - 3.0)
        _flatten_site(b.hm, fx, fy, 2.0)
        if kind == FoodKind.CARROT:
            fz = b.hm.height_at(fx, fy)
            b.add_food(kind, (fx, fy, fz), attached=Attachment.GROUND)
        else:
            b.add_food(kind, (fx, fy), on_tree=True)
        if kind == FoodKind.AVOCADO:
            b.add_item(ItemKind.ROCK, (fx + 1.0, fy))
        if kind == FoodKind.CHERRY:  # cherries come as a cluster
            pos = b.manifest.foods[0].pose
            b.manifest.foods[0] = FoodState(
                kind=kind, pose=pos, attached=Attachment.TREE)
    b.face_spawn_toward(b.manifest.foods[0].pose)
    b.meta["controlling_param"] = d
    return b.finish(TaskKind.EAT)


def _gen_move(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    dist = 4.0 + 18.0 * d
    spawn, food = _spawn_food_pair(b, dist, dist + 3.0)
    b.set_spawn(*spawn)
    # Guarantee a walkable corridor; it narrows with difficulty by leaving
    # rough terrain closer on both sides.
    half_w = max(1.0, 3.0 - 2.0 * d)
    sx, sy = spawn
    fx, fy = food
    steps = int(det_hypot(fx - sx, fy - sy) / half_w) + 1
    for s in range(steps + 1):
        t = s / steps
        _flatten_site(b.hm, sx + (fx - sx) * t, sy + (fy - sy) * t,
                      half_w, height=b.spawn[2])
    b.add_food(FoodKind.APPLE, (fx, fy), on_tree=True)
    b.face_spawn_toward((fx, fy))
    b.meta["controlling_param"] = dist
    return b.finish(TaskKind.MOVE)


def _gen_jump(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    width = 1.0 + 3.0 * d
    depth = 2.0 + 2.0 * d
    center = _ring_site(b, 6.0 + 4.0)
    _require(center is not None, "no site large enough for a chasm ring")
    ring = _add_ring_around(
        b, center, RingKind.CHASM, inner=5.0, height_delta=depth,
        passage_mode=PassageMode.JUMP, passage_width=width,
        arc_width=max(0.35, 1.0 - 0.6 * d), ring_width=width + 3.0)
    b.add_food(FoodKind.APPLE, center, on_tree=True)
    sp = ring.passage_point(ring.outer_radius + 3.0)
    b.set_spawn(*sp)
    b.face_spawn_toward(center)
    b.meta["controlling_param"] = width
    b.meta["ring_passage"] = ring.passage_point(ring.inner_radius - 1.5)
    return b.finish(TaskKind.JUMP)


def _gen_climb(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    height = 3.0 + 12.0 * d
    center = _ring_site(b, 9.0)
    _require(center is not None, "no site large enough for a cliff ring")
    ring = _add_ring_around(
        b, center, RingKind.CLIFF, inner=5.0, height_delta=height,
        passage_mode=PassageMode.CLIMB,
        arc_width=max(0.25, 0.9 - 0.55 * d))
    b.add_food(FoodKind.APPLE, center, on_tree=True)
    sp = ring.passage_point(ring.inner_radius + 3.5)
    b.set_spawn(*sp)
    b.face_spawn_toward(center)
    b.meta["controlling_param"] = height
    return b.finish(TaskKind.CLIMB)


def _gen_scramble(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    dist = 8.0 + 14.0 * d
    spawn, food = _spawn_food_pair(b, dist, dist + 4.0)
    b.set_spawn(*spawn)
    sx, sy = spawn
    fx, fy = food
    # Corrugate the corridor: ribs the agent must hop or clamber over.
    n_ribs = 2 + int(4 * d)
    amp = 0.7 + 1.3 * d
    for k in range(1, n_ribs + 1):
        t = k / (n_ribs + 1)
        cx2, cy2 = sx + (fx - sx) * t, sy + (fy - sy) * t
        _flatten_site(b.hm, cx2, cy2, 2.5,
                      height=b.hm.height_at(cx2, cy2) + amp)
    _flatten_site(b.hm, fx, fy, 2.0)
    b.add_food(FoodKind.APPLE, (fx, fy), on_tree=True)
    b.face_spawn_toward((fx, fy))
    b.meta["controlling_param"] = amp
    return b.finish(TaskKind.SCRAMBLE)


def _gen_descend(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    height = 4.0 + 26.0 * d
    center = _ring_site(b, 9.0)
    _require(center is not None, "no site large enough for a descent ring")
    ring = _add_ring_around(
        b, center, RingKind.DROP, inner=5.0, height_delta=height,
        passage_mode=PassageMode.DESCEND,
        arc_width=max(0.3, 0.9 - 0.5 * d))
    b.set_spawn(*center)
    if d < 0.5:
        # A mid-height platform outside the wall for a safe two-stage fall.
        px, py = ring.passage_point(ring.inner_radius + 1.2)
        _flatten_site(b.hm, px, py, 1.2, height=b.spawn[2] - height / 2.0)
    food = ring.passage_point(ring.inner_radius + 4.0)
    _flatten_site(b.hm, food[0], food[1], 2.0)
    b.add_food(FoodKind.APPLE, food, on_tree=True)
    b.face_spawn_toward(food)
    b.meta["controlling_param"] = height
    return b.finish(TaskKind.DESCEND)


def _prey_for_difficulty(b: _Builder, d: float) -> AnimalKind:
    forced = getattr(b.config, "forced_kind", None)
    if forced:
        return AnimalKind[forced.upper()]
    tier = min(len(_PREY_TIERS) - 1, int(d * len(_PREY_TIERS)))
    return _PREY_TIERS[tier]


def _gen_throw(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    kind = _prey_for_difficulty(b, d)
    dist = 4.0 + 10.0 * d
    spawn, prey_site = _spawn_food_pair(b, dist, dist + 3.0)
    b.set_spawn(*spawn)
    _flatten_site(b.hm, prey_site[0], prey_site[1], 3.0)
    b.add_animal(kind, prey_site, territory_radius=6.0, as_food=True)
    n_rocks = 3 - int(2 * d)
    for k in range(max(1, n_rocks)):
        b.add_item(ItemKind.ROCK, (spawn[0] + 0.7 + 0.3 * k,
                                   spawn[1] + 0.4 * (k - 1)))
    b.face_spawn_toward(prey_site)
    b.meta["controlling_param"] = dist
    return b.finish(TaskKind.THROW)


def _gen_hunt(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    kind = _prey_for_difficulty(b, d)
    dist = 5.0 + 14.0 * d
    spawn, prey_site = _spawn_food_pair(b, dist, dist + 4.0)
    b.set_spawn(*spawn)
    _flatten_site(b.hm, prey_site[0], prey_site[1], 3.0)
    b.add_animal(kind, prey_site, territory_radius=8.0, as_food=True)
    if d < 0.7:
        b.add_item(ItemKind.ROCK, (spawn[0] + 0.8, spawn[1] + 0.3))
    b.add_item(ItemKind.STICK, (spawn[0] + 0.8, spawn[1] - 0.3))
    b.face_spawn_toward(prey_site)
    b.meta["controlling_param"] = dist
    return b.finish(TaskKind.HUNT)


def _gen_fight(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    tier = min(len(_FIGHT_TIERS) - 1, int(d * len(_FIGHT_TIERS)))
    kind = _FIGHT_TIERS[tier]
    spawn, food = _spawn_food_pair(b, 8.0, 12.0)
    b.set_spawn(*spawn)
    _flatten_site(b.hm, food[0], food[1], 3.0)
    b.add_food(FoodKind.APPLE, food, on_tree=True)
    n = 1 + int(d + 0.5 * b.rng.uniform())
    for k in range(n):
        ang = b.rng.uniform(0, 2 * math.pi)
        b.add_animal(kind, (food[0] + 2.0 * det_cos(ang),
                            food[1] + 2.0 * det_sin(ang)),
                     territory_radius=8.0)
    for k in range(2):
        b.add_item(ItemKind.STICK, (spawn[0] + 0.8, spawn[1] + 0.5 - 0.5 * k))
        b.add_item(ItemKind.ROCK, (spawn[0] + 1.2, spawn[1] + 0.5 - 0.5 * k))
    b.face_spawn_toward(food)
    b.meta["controlling_param"] = n
    return b.finish(TaskKind.FIGHT)


def _gen_avoid(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    forced = getattr(b.config, "forced_kind", None)
    spawn, food = _spawn_food_pair(b, 10.0, 16.0)
    b.set_spawn(*spawn)
    _flatten_site(b.hm, food[0], food[1], 2.0)
    b.add_food(FoodKind.APPLE, food, on_tree=True)
    n = 1 + int(3 * d)
    tier_hi = max(1, int(d * len(_AVOID_TIERS)))
    for k in range(n):
        if forced and k == 0:
            kind = AnimalKind[forced.upper()]
        else:
            kind = _AVOID_TIERS[b.rng.randint(0, tier_hi - 1)]
        # Offset perpendicular to the spawn-food line so a careful path
        # around stays outside the activation radius at low difficulty.
        ang = det_atan2(food[1] - spawn[1], food[0] - spawn[0])
        side = 1 if k % 2 == 0 else -1
        off = 6.0 - 2.0 * d
        px = food[0] + off * det_cos(ang + side * math.pi / 2)
        py = food[1] + off * det_sin(ang + side * math.pi / 2)
        px = min(max(px, 2.0), b.hm.size_x - 2.0)
        py = min(max(py, 2.0), b.hm.size_y - 2.0)
        b.add_animal(kind, (px, py), territory_radius=5.0)
    b.face_spawn_toward(food)
    b.meta["controlling_param"] = n
    return b.finish(TaskKind.AVOID)


def _gen_push(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    ledge_h = 1.8 + 0.4 * d
    center = _ring_site(b, 8.0)
    _require(center is not None, "no site for the push ledge")
    cx, cy = center
    _flatten_site(b.hm, cx, cy, 8.0)
    ground = b.hm.height_at(cx, cy)
    # A small unclimbable plateau holds the food.
    _flatten_site(b.hm, cx, cy, 2.0, height=ground + ledge_h)
    ci, cj = b.hm.cell_of(cx, cy)
    rc = int(2.0 / b.hm.cell_size) + 1
    for i in range(ci - rc, ci + rc + 1):
        for j in range(cj - rc, cj + rc + 1):
            if 0 <= i < b.hm.height and 0 <= j < b.hm.width:
                b.hm.climbable[i, j] = False
    b.add_food(FoodKind.APPLE, (cx, cy, ground + ledge_h + 0.4))
    boulder_dist = 3.5 + 4.5 * d
    bx, by = cx + boulder_dist, cy
    b.add_item(ItemKind.BOULDER, (bx, by), mass=120.0 + 180.0 * d)
    b.set_spawn(cx + 5.5, cy + 2.0)
    b.face_spawn_toward((cx, cy))
    b.meta["controlling_param"] = boulder_dist
    b.meta["ledge"] = (cx, cy, ground + ledge_h)
    b.meta["ledge_edge"] = (cx + 2.2, cy)
    return b.finish(TaskKind.PUSH)


_STACK_LEDGES = (1.2, 2.2, 3.0, 3.8)


def _gen_stack(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    ledge_h = _STACK_LEDGES[min(3, int(d * 4))]
    center = _ring_site(b, 8.0)
    _require(center is not None, "no site for the stack ledge")
    cx, cy = center
    _flatten_site(b.hm, cx, cy, 8.0)
    ground = b.hm.height_at(cx, cy)
    _flatten_site(b.hm, cx, cy, 2.0, height=ground + ledge_h)
    ci, cj = b.hm.cell_of(cx, cy)
    rc = int(2.0 / b.hm.cell_size) + 1
    for i in range(ci - rc, ci + rc + 1):
        for j in range(cj - rc, cj + rc + 1):
            if 0 <= i < b.hm.height and 0 <= j < b.hm.width:
                b.hm.climbable[i, j] = False
    b.add_food(FoodKind.APPLE, (cx, cy, ground + ledge_h + 0.4))
    layers = max(0, math.ceil((ledge_h - 1.4) / 0.8 - 1e-9))
    n_stones = max(1, layers + 1)
    stone_dist = 3.2 + 2.0 * d
    for k in range(n_stones):
        ang = 0.5 * k
        b.add_item(ItemKind.STONE, (cx + stone_dist + 0.9 * det_cos(ang),
                                    cy + 0.9 * det_sin(ang) + 0.9 * k - 1.0))
    b.set_spawn(cx + 5.5, cy - 2.0)
    b.face_spawn_toward((cx, cy))
    b.meta["controlling_param"] = ledge_h
    b.meta["ledge"] = (cx, cy, ground + ledge_h)
    b.meta["ledge_edge"] = (cx + 2.2, cy)
    b.meta["layers_needed"] = layers
    return b.finish(TaskKind.STACK)


def _gen_bridge(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    gap = 2.0 + 1.5 * d
    center = _ring_site(b, 11.0)
    _require(center is not None, "no site for a bridge chasm")
    ring = _add_ring_around(
        b, center, RingKind.CHASM, inner=5.0, height_delta=4.0,
        passage_mode=PassageMode.WALK, passage_width=gap,
        arc_width=max(0.3, 0.8 - 0.4 * d), ring_width=gap + 3.0)
    # Both chasm walls are sheer: the log is the only way across.
    cs = b.hm.cell_size
    cx, cy = center
    pad = ring.outer_radius + 2.0
    for i in range(max(0, int((cy - pad) / cs)),
                   min(b.hm.height, int((cy + pad) / cs) + 1)):
        for j in range(max(0, int((cx - pad) / cs)),
                       min(b.hm.width, int((cx + pad) / cs) + 1)):
            x, y = b.hm.cell_center(i, j)
            r = det_hypot(x - cx, y - cy)
            if ring.inner_radius - 1.0 < r < ring.outer_radius + 1.0:
                if b.hm.height_at(x, y) < b.hm.height_at(cx, cy) - 1.0:
                    b.hm.climbable[i, j] = False
    b.add_food(FoodKind.APPLE, center, on_tree=True)
    sp = ring.passage_point(ring.inner_radius + gap + 3.0)
    b.set_spawn(*sp)
    pa = ring.passage_angle()
    log_yaw = pa  # lying along the crossing direction
    if d < 0.15:
        # Already bridged: the log spans the gap at the passage.
        mid = ring.passage_point(ring.inner_radius + gap / 2.0)
        b.add_item(ItemKind.LOG, mid, yaw=log_yaw)
        log = b.manifest.items[-1]
        rim = b.hm.height_at(*ring.passage_point(ring.inner_radius - 1.0))
        log.pose = (log.pose[0], log.pose[1], rim + 0.2)
    else:
        lx = sp[0] + (2.0 + 8.0 * d) * det_cos(pa + 2.0)
        ly = sp[1] + (2.0 + 8.0 * d) * det_sin(pa + 2.0)
        lx = min(max(lx, 3.0), b.hm.size_x - 3.0)
        ly = min(max(ly, 3.0), b.hm.size_y - 3.0)
        _flatten_site(b.hm, lx, ly, 2.0)
        b.add_item(ItemKind.LOG, (lx, ly), yaw=log_yaw)
    b.face_spawn_toward(center)
    b.meta["controlling_param"] = gap
    b.meta["crossing"] = (ring.passage_point(ring.inner_radius + gap + 0.8),
                          ring.passage_point(ring.inner_radius - 0.8))
    return b.finish(TaskKind.BRIDGE)


def _gen_open(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    lock_count = min(3, int(d * 3 + 0.999)) if d > 0.05 else 0
    if d >= 0.95:
        lock_count = 3
    motion = DoorMotion.SLIDING if (d > 0.4 and b.rng.uniform() < 0.5) \
        else DoorMotion.ROTATING
    site = _pick_site(b.rng, b.hm, b.bm, b.water, margin=9.0, tries=300)
    _require(site is not None, "no flat site for a building")
    building = generate_building(b.config, site, b.rng, b.hm,
                                 lock_count=lock_count, door_motion=motion)
    b.buildings.append(building)
    b.manifest.doors.extend(building.doors)
    x0, y0, x1, y1 = building.footprint
    floor = building.floor_height
    # Spawn in the south room, food in the north room.
    sx, sy = (x0 + x1) / 2.0, y0 + (y1 - y0) * 0.25
    fx, fy = (x0 + x1) / 2.0, y0 + (y1 - y0) * 0.75
    b.spawn = (sx, sy, floor, math.pi / 2.0)
    b.add_food(FoodKind.APPLE, (fx, fy, floor + 1.0))
    b.meta["controlling_param"] = lock_count
    return b.finish(TaskKind.OPEN)


def _gen_carry(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    inner = b.rng.choice((TaskKind.THROW, TaskKind.FIGHT, TaskKind.STACK,
                          TaskKind.BRIDGE))
    world = _TASK_GENERATORS[inner](b)
    # Displace every tool away from where it would normally spawn.
    displacement = 2.0 + 28.0 * d
    rng = b.rng
    for item in world.entities.items:
        for _ in range(40):
            ang = rng.uniform(0, 2 * math.pi)
            nx = item.pose[0] + displacement * det_cos(ang)
            ny = item.pose[1] + displacement * det_sin(ang)
            if _site_ok(b.hm, b.bm, nx, ny, b.water, margin=2.0):
                _flatten_site(b.hm, nx, ny, 1.5)
                nz = b.hm.height_at(nx, ny) + (item.pose[2]
                                               - b.hm.height_at(item.pose[0],
                                                                item.pose[1]))
                item.pose = (nx, ny, nz)
                break
    world.task = TaskKind.CARRY
    world.time_limit_frames = TIME_LIMITS[TaskKind.CARRY]
    world.meta["inner_task"] = inner.value
    world.meta["controlling_param"] = displacement
    return world


def _gen_explore(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    indoor = b.rng.uniform() < getattr(b.config, "indoor_fraction", 0.5)
    if indoor:
        site = _pick_site(b.rng, b.hm, b.bm, b.water, margin=10.0, tries=300)
        _require(site is not None, "no flat site for a building")
        building = generate_building(b.config, site, b.rng, b.hm,
                                     size=8.0 + 6.0 * d)
        b.buildings.append(building)
        b.manifest.doors.extend(building.doors)
        x0, y0, x1, y1 = building.footprint
        fx, fy = (x0 + x1) / 2.0, y0 + (y1 - y0) * 0.75
        b.add_food(FoodKind.APPLE, (fx, fy, building.floor_height + 1.0))
        sp = _pick_site(b.rng, b.hm, b.bm, b.water, near=site,
                        dist_range=(8.0, 14.0))
        _require(sp is not None, "no spawn near the building")
        b.set_spawn(*sp)
        b.face_spawn_toward(site)
        b.meta["controlling_param"] = x1 - x0
        return b.finish(TaskKind.EXPLORE)
    dist = 10.0 + 0.3 * b.hm.size_x * d
    for _ in range(60):
        spawn, food = _spawn_food_pair(b, dist, dist + 6.0)
        eye = (spawn[0], spawn[1], b.hm.height_at(*spawn) + 1.6)
        target = (food[0], food[1], b.hm.height_at(*food) + 2.2)
        if not has_line_of_sight(b.hm, eye, target):
            break
    else:
        raise GeneratorError("could not hide the food from spawn")
    b.set_spawn(*spawn)
    _flatten_site(b.hm, food[0], food[1], 2.0)
    b.add_food(FoodKind.APPLE, food, on_tree=True)
    b.meta["controlling_param"] = dist
    return b.finish(TaskKind.EXPLORE)


def _compositional_rings(b: _Builder, center: tuple, count: int,
                         d: float) -> list:
    """Nested rings around a center, outermost last, non-overlapping."""
    kinds = [(RingKind.CHASM, PassageMode.JUMP),
             (RingKind.CLIFF, PassageMode.CLIMB),
             (RingKind.RIDGE, PassageMode.WALK)]
    rings = []
    inner = 4.0
    _flatten_site(b.hm, center[0], center[1], inner)
    for k in range(count):
        kind, mode = kinds[b.rng.randint(0, len(kinds) - 1)]
        inner_d = d * b.rng.uniform(0.3, 1.0)
        if kind == RingKind.CHASM:
            width = 1.0 + 1.5 * inner_d
            ring = _add_ring_around(
                b, center, RingKind.CHASM, inner=inner, height_delta=2.5,
                passage_mode=mode, passage_width=width,
                ring_width=width + 1.5)
        elif kind == RingKind.CLIFF:
            ring = _add_ring_around(
                b, center, RingKind.CLIFF, inner=inner,
                height_delta=2.5 + 4.0 * inner_d, passage_mode=mode,
                ring_width=2.5)
        else:
            ring = _add_ring_around(
                b, center, RingKind.RIDGE, inner=inner,
                height_delta=1.5 + 1.0 * inner_d, passage_mode=mode,
                ring_width=2.5)
        rings.append(ring)
        inner = ring.outer_radius + 2.0
    return rings


def generate_compositional(config: WorldConfig) -> GeneratedWorld:
    return generate_task_world(config)


def _gen_navigate(b: _Builder, hidden: bool = False) -> GeneratedWorld:
    d = b.config.difficulty
    count = 1 + min(3, int(3 * d + 0.999 * b.rng.uniform()))
    # Rings must fit inside the island with a walkable outer margin.
    fit = int((b.hm.size_x / 2.0 - 10.0) / 6.5)
    count = max(1, min(count, 4, fit))
    center = _ring_site(b, 4.0 + count * 6.5)
    _require(center is not None, "no site for nested rings")
    rings = _compositional_rings(b, center, count, d)
    # Tall fruit tree so the food is visible over the rings.
    b.add_food(FoodKind.APPLE, center, on_tree=True)
    outer = rings[-1]
    sp = outer.passage_point(outer.outer_radius + 3.0)
    b.set_spawn(*sp)
    b.face_spawn_toward(center)
    b.meta["controlling_param"] = count
    task = TaskKind.FIND if hidden else TaskKind.NAVIGATE
    return b.finish(task)


def _gen_find(b: _Builder) -> GeneratedWorld:
    return _gen_navigate(b, hidden=True)


def _gen_gather(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    n_foods = 2 + min(3, int(3 * d + b.rng.uniform()))
    spawn = _pick_site(b.rng, b.hm, b.bm, b.water)
    _require(spawn is not None, "no flat spawn site on land")
    b.set_spawn(*spawn)
    spread = 8.0 + 14.0 * d
    placed = 0
    for k in range(n_foods * 30):
        site = _pick_site(b.rng, b.hm, b.bm, b.water, near=spawn,
                          dist_range=(4.0, spread), tries=40)
        if site is None:
            continue
        _flatten_site(b.hm, site[0], site[1], 2.0)
        b.add_food(FoodKind.APPLE, site, on_tree=True)
        placed += 1
        if placed >= n_foods:
            break
    _require(placed >= 2, "could not place at least two foods")
    b.meta["controlling_param"] = placed
    return b.finish(TaskKind.GATHER)


def _gen_survive(b: _Builder) -> GeneratedWorld:
    d = b.config.difficulty
    n_foods = max(2, round(7 - 4 * d))
    n_pred = round(6 * d)
    n_prey = 1 + int(1.5 * d)
    spawn = _pick_site(b.rng, b.hm, b.bm, b.water)
    _require(spawn is not None, "no flat spawn site on land")
    b.set_spawn(*spawn)
    kinds = (FoodKind.APPLE, FoodKind.BANANA, FoodKind.CHERRY,
             FoodKind.ORANGE, FoodKind.MULBERRY)
    placed = 0
    for k in range(n_foods * 30):
        site = _pick_site(b.rng, b.hm, b.bm, b.water, near=spawn,
                          dist_range=(4.0, 10.0 + 14.0 * d), tries=40)
        if site is None:
            continue
        _flatten_site(b.hm, site[0], site[1], 2.0)
        b.add_food(kinds[placed % len(kinds)], site, on_tree=True)
        placed += 1
        if placed >= n_foods:
            break
    _require(placed >= 2, "could not place survive foods")
    tier_hi = max(1, int(d * len(_AVOID_TIERS)))
    for k in range(n_pred):
        site = _pick_site(b.rng, b.hm, b.bm, b.water, near=spawn,
                          dist_range=(12.0, 24.0), tries=40)
        if site is None:
            continue
        b.add_animal(_AVOID_TIERS[b.rng.randint(0, tier_hi - 1)], site,
                     territory_radius=8.0)
    for k in range(n_prey):
        site = _pick_site(b.rng, b.hm, b.bm, b.water, near=spawn,
                          dist_range=(6.0, 18.0), tries=40)
        if site is None:
            continue
        b.add_animal(_PREY_TIERS[b.rng.randint(0, 2)], site,
                     territory_radius=8.0, as_food=True)
    b.meta["controlling_param"] = n_pred
    b.meta["predator_count"] = n_pred
    b.meta["food_count"] = placed
    return b.finish(TaskKind.SURVIVE)


_TASK_GENERATORS = {
    TaskKind.EAT: _gen_eat,
    TaskKind.MOVE: _gen_move,
    TaskKind.JUMP: _gen_jump,
    TaskKind.CLIMB: _gen_climb,
    TaskKind.SCRAMBLE: _gen_scramble,
    TaskKind.DESCEND: _gen_descend,
    TaskKind.THROW: _gen_throw,
    TaskKind.HUNT: _gen_hunt,
    TaskKind.FIGHT: _gen_fight,
    TaskKind.AVOID: _gen_avoid,
    TaskKind.PUSH: _gen_push,
    TaskKind.STACK: _gen_stack,
    TaskKind.BRIDGE: _gen_bridge,
    TaskKind.OPEN: _gen_open,
    TaskKind.CARRY: _gen_carry,
    TaskKind.EXPLORE: _gen_explore,
    TaskKind.NAVIGATE: _gen_navigate,
    TaskKind.FIND: _gen_find,
    TaskKind.GATHER: _gen_gather,
    TaskKind.SURVIVE: _gen_survive,
}

MAX_ATTEMPTS = 20


def _validate(world: GeneratedWorld) -> "str | None":
    """Cheap feasibility checks; returns a failure string or None."""
    if not world.foods:
        return "no food placed"
    hm = world.heightmap
    spawn = world.spawn
    for ref in world.foods:
        if ref[0] == "food":
            pose = world.entities.foods[ref[1]].pose
        else:
            pose = world.entities.animals[ref[1]][1]
        if not (0 <= pose[0] <= hm.size_x and 0 <= pose[1] <= hm.size_y):
            return "food outside world bounds"
    jump = 0.0
    climb = False
    if world.task in (TaskKind.JUMP,):
        jump = world.meta.get("controlling_param", 2.0) + 1.5
    if world.task in (TaskKind.CLIMB, TaskKind.DESCEND, TaskKind.SCRAMBLE,
                      TaskKind.NAVIGATE, TaskKind.FIND):
        climb = True
        jump = 4.0
    if world.task in (TaskKind.MOVE, TaskKind.GATHER, TaskKind.SURVIVE,
                      TaskKind.EXPLORE, TaskKind.EAT, TaskKind.THROW,
                      TaskKind.HUNT, TaskKind.AVOID,
                      TaskKind.FIGHT) and not world.buildings:
        # Natural terrain between sites: walking plus short hops and
        # climbable slopes is enough.
        jump = 2.0
        climb = True
    if world.task in (TaskKind.PUSH, TaskKind.STACK, TaskKind.BRIDGE,
                      TaskKind.OPEN, TaskKind.CARRY):
        return None  # crossing needs tools; checked by the oracle suite
    for ref in world.foods:
        if ref[0] == "food":
            pose = world.entities.foods[ref[1]].pose
        else:
            pose = world.entities.animals[ref[1]][1]
        if not flood_reachable(hm, spawn, pose, jump_distance=jump,
                               allow_climb=climb,
                               water_level=world.water_level):
            return "food not reachable from spawn"
    return None


def generate_task_world(config: WorldConfig) -> GeneratedWorld:
    """Dispatch to the per-task generator, with bounded retries."""
    if config.task is None:
        raise worldcore.ConfigError("config.task is not set")
    task = TaskKind(config.task)
    last = "unknown"
    for attempt in range(MAX_ATTEMPTS):
        b = _Builder(config, attempt)
        try:
            world = _TASK_GENERATORS[task](b)
        except (GeneratorError, GeometryError) as err:
            last = str(err)
            continue
        failure = _validate(world)
        if failure is None:
            return world
        last = failure
    raise GeneratorError(
        f"could not generate a {task.value} world after {MAX_ATTEMPTS} "
        f"attempts: {last}")
