"""Headless rendering: 96x96 RGBD frames and overhead maps.

The first-person view ray-marches the heightmap with a fixed step table
and splats entities as depth-tested billboards, all in numpy. Colors are
flat per biome or per entity kind; this is an RL observation, not a
screenshot.
"""

from __future__ import annotations

import numpy as np

from .entities import AnimalKind, FoodKind, ItemKind, Mode
from .worldcore import Biome, SceneryKind

IMAGE_SIZE = 96
FOV_DEGREES = 80.0
MAX_DEPTH = 80.0

_BIOME_COLORS = np.zeros((16, 3), dtype=np.float32)
_BIOME_COLORS[int(Biome.TROPICAL_RAIN_FOREST)] = (0.05, 0.35, 0.08)
_BIOME_COLORS[int(Biome.TROPICAL_SEASONAL_FOREST)] = (0.13, 0.42, 0.12)
_BIOME_COLORS[int(Biome.TEMPERATE_RAIN_FOREST)] = (0.10, 0.38, 0.18)
_BIOME_COLORS[int(Biome.TEMPERATE_DECIDUOUS_FOREST)] = (0.20, 0.45, 0.16)
_BIOME_COLORS[int(Biome.GRASSLAND)] = (0.45, 0.60, 0.25)
_BIOME_COLORS[int(Biome.TEMPERATE_DESERT)] = (0.70, 0.65, 0.40)
_BIOME_COLORS[int(Biome.SUBTROPICAL_DESERT)] = (0.80, 0.72, 0.45)
_BIOME_COLORS[int(Biome.WATER)] = (0.10, 0.25, 0.55)
_BIOME_COLORS[int(Biome.FRESH_WATER)] = (0.15, 0.40, 0.60)
_BIOME_COLORS[int(Biome.COASTAL)] = (0.85, 0.78, 0.55)
_BIOME_COLORS[int(Biome.SWAMP)] = (0.25, 0.32, 0.18)
_BIOME_COLORS[int(Biome.DARK_SHORE)] = (0.30, 0.28, 0.22)
_BIOME_COLORS[int(Biome.BARE)] = (0.50, 0.46, 0.42)
_BIOME_COLORS[int(Biome.UNCLIMBABLE)] = (0.35, 0.33, 0.32)

_SKY = np.array((0.55, 0.70, 0.90), dtype=np.float32)
_WATER = np.array((0.12, 0.30, 0.58), dtype=np.float32)

_FOOD_COLORS = {
    FoodKind.APPLE: (0.85, 0.10, 0.10),
    FoodKind.BANANA: (0.90, 0.85, 0.20),
    FoodKind.FIG: (0.45, 0.20, 0.45),
    FoodKind.ORANGE: (0.95, 0.55, 0.10),
    FoodKind.AVOCADO: (0.25, 0.40, 0.12),
    FoodKind.COCONUT: (0.45, 0.30, 0.15),
    FoodKind.HONEYCOMB: (0.90, 0.70, 0.20),
    FoodKind.CHERRY: (0.75, 0.05, 0.20),
    FoodKind.MULBERRY: (0.40, 0.10, 0.40),
    FoodKind.CARROT: (0.95, 0.45, 0.10),
}

_ITEM_COLORS = {
    ItemKind.ROCK: (0.45, 0.45, 0.45),
    ItemKind.STICK: (0.50, 0.35, 0.15),
    ItemKind.STONE: (0.55, 0.55, 0.58),
    ItemKind.BOULDER: (0.40, 0.40, 0.44),
    ItemKind.LOG: (0.42, 0.28, 0.12),
}

_ITEM_SIZES = {
    ItemKind.ROCK: 0.12,
    ItemKind.STICK: 0.35,
    ItemKind.STONE: 0.5,
    ItemKind.BOULDER: 0.6,
    ItemKind.LOG: 0.9,
}

_PREDATOR_COLOR = (0.75, 0.15, 0.10)
_PREY_COLOR = (0.60, 0.50, 0.35)
_DEAD_COLOR = (0.35, 0.25, 0.20)

_ANIMAL_SIZES = {
    AnimalKind.BEE: 0.15, AnimalKind.SNAKE: 0.3, AnimalKind.HAWK: 0.4,
    AnimalKind.HIPPO: 1.2, AnimalKind.ALLIGATOR: 0.9,
    AnimalKind.EAGLE: 0.5, AnimalKind.WOLF: 0.8, AnimalKind.JAGUAR: 0.8,
    AnimalKind.BEAR: 1.2, AnimalKind.FROG: 0.15, AnimalKind.TURTLE: 0.3,
    AnimalKind.MOUSE: 0.12, AnimalKind.RABBIT: 0.25,
    AnimalKind.PIGEON: 0.2, AnimalKind.SQUIRREL: 0.18,
    AnimalKind.CROW: 0.25, AnimalKind.DEER: 0.9,
}

_TREE_COLOR = (0.15, 0.30, 0.10)
_FRUIT_TREE_COLOR = (0.20, 0.40, 0.12)


class Renderer:
    """Renders one simulation's point of view."""

    def __init__(self, image_size: int = IMAGE_SIZE):
        self.n = image_size
        half = np.tan(np.radians(FOV_DEGREES / 2.0))
        lin = np.linspace(-half, half, image_size, dtype=np.float32)
        self._u = lin[None, :].repeat(image_size, axis=0)
        self._v = -lin[:, None].repeat(image_size, axis=1)
        # Geometric step table: fine near the camera, coarse far away.
        self._ts = np.geomspace(0.4, MAX_DEPTH, 72).astype(np.float32)
        self._focal = (image_size / 2.0) / half

    def render(self, sim) -> np.ndarray:
        """RGBD float32 (n, n, 4); depth in meters."""
        n = self.n
        hm = sim.world.heightmap
        heights = hm.heights.astype(np.float32)
        biome = sim.world.biomemap.biome_id
        cam = np.array(sim.agent.head_position(sim.params),
                       dtype=np.float32)
        yaw, pitch = sim.agent.yaw, sim.agent.pitch
        cy, sy = np.cos(yaw), np.sin(yaw)
        cp, sp = np.cos(pitch), np.sin(pitch)
        fwd = np.array((cy * cp, sy * cp, sp), dtype=np.float32)
        right = np.array((sy, -cy, 0.0), dtype=np.float32)
        up = np.cross(right, fwd)

        dirs = (fwd[None, None, :]
                + self._u[:, :, None] * right[None, None, :]
                + self._v[:, :, None] * up[None, None, :])
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)

        # March the terrain.
        ts = self._ts
        px = cam[0] + dirs[:, :, 0:1] * ts[None, None, :]
        py = cam[1] + dirs[:, :, 1:2] * ts[None, None, :]
        pz = cam[2] + dirs[:, :, 2:3] * ts[None, None, :]
        inv = 1.0 / hm.cell_size
        ii = np.clip((py * inv).astype(np.int32), 0, heights.shape[0] - 1)
        jj = np.clip((px * inv).astype(np.int32), 0, heights.shape[1] - 1)
        ground = heights[ii, jj]
        below = pz < ground
        hit_any = below.any(axis=2)
        first = np.argmax(below, axis=2)
        depth = np.where(hit_any, ts[first], MAX_DEPTH).astype(np.float32)

        hit_i = ii[np.arange(n)[:, None], np.arange(n)[None, :], first]
        hit_j = jj[np.arange(n)[:, None], np.arange(n)[None, :], first]
        colors = _BIOME_COLORS[biome[hit_i, hit_j]]
        shade = (1.0 - 0.6 * depth / MAX_DEPTH)[:, :, None]
        rgb = np.where(hit_any[:, :, None], colors * shade, _SKY)

        # Water plane for rays that cross it before the terrain.
        wl = np.float32(sim.world.water_level)
        dz = dirs[:, :, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            tw = (wl - cam[2]) / dz
        water_hit = (tw > 0) & (tw < depth) & (dz < 0)
        rgb = np.where(water_hit[:, :, None], _WATER, rgb)
        depth = np.where(water_hit, tw, depth).astype(np.float32)

        frame = np.concatenate([rgb.astype(np.float32),
                                depth[:, :, None]], axis=2)
        self._splat_entities(sim, frame, cam, fwd, right, up)
        self._draw_hands(sim, frame, cam, fwd, right, up)
        return frame

    def _project(self, cam, fwd, right, up, point):
        rel = np.asarray(point, dtype=np.float32) - cam
        z = float(rel @ fwd)
        if z <= 0.15:
            return None
        x = float(rel @ right) / z
        y = float(rel @ up) / z
        col = int(self.n / 2 + x * self._focal)
        row = int(self.n / 2 - y * self._focal)
        return row, col, z

    def _splat(self, frame, row, col, z, radius_px, color):
        n = self.n
        r = max(1, int(radius_px))
        r0, r1 = max(0, row - r), min(n, row + r + 1)
        c0, c1 = max(0, col - r), min(n, col + r + 1)
        if r0 >= r1 or c0 >= c1:
            return
        patch = frame[r0:r1, c0:c1]
        yy, xx = np.mgrid[r0:r1, c0:c1]
        mask = ((yy - row) ** 2 + (xx - col) ** 2 <= r * r) \
            & (patch[:, :, 3] > z)
        patch[:, :, :3][mask] = color
        patch[:, :, 3][mask] = z

    def _splat_entities(self, sim, frame, cam, fwd, right, up) -> None:
        for pl in sim.world.scenery.placements:
            if not pl.colliding:
                continue
            x, y, z = pl.position
            if abs(x - cam[0]) > MAX_DEPTH or abs(y - cam[1]) > MAX_DEPTH:
                continue
            color = _FRUIT_TREE_COLOR \
                if pl.kind == SceneryKind.FRUIT_TREE else _TREE_COLOR
            p = self._project(cam, fwd, right, up,
                              (x, y, z + 1.8 * pl.scale))
            if p:
                row, col, depth = p
                self._splat(frame, row, col, depth,
                            1.5 * pl.scale * self._focal / depth, color)
        for idx, item in enumerate(sim.items):
            p = self._project(cam, fwd, right, up, item.pose)
            if p:
                row, col, depth = p
                self._splat(frame, row, col, depth,
                            _ITEM_SIZES[item.kind] * self._focal / depth,
                            _ITEM_COLORS[item.kind])
        for idx, food in enumerate(sim.foods):
            if sim.eaten[idx]:
                continue
            p = self._project(cam, fwd, right, up, food.pose)
            if p:
                row, col, depth = p
                self._splat(frame, row, col, depth,
                            0.18 * self._focal / depth,
                            _FOOD_COLORS[food.kind])
        for idx, an in enumerate(sim.animals):
            if sim.animal_eaten[idx]:
                continue
            if an.mode == Mode.DEAD:
                color = _DEAD_COLOR
            elif an.spec.is_predator:
                color = _PREDATOR_COLOR
            else:
                color = _PREY_COLOR
            p = self._project(cam, fwd, right, up, an.pose)
            if p:
                row, col, depth = p
                self._splat(frame, row, col, depth,
                            _ANIMAL_SIZES[an.spec.kind]
                            * self._focal / depth, color)

    def _draw_hands(self, sim, frame, cam, fwd, right, up) -> None:
        # Hands render last so the agent always sees them.
        for k, hand in enumerate(sim.agent.hands):
            p = self._project(cam, fwd, right, up, hand.world)
            if p:
                row, col, depth = p
                color = (0.9, 0.75, 0.6) if hand.grasp is None \
                    and hand.anchor is None else (0.95, 0.9, 0.3)
                self._splat(frame, row, col, 0.0,
                            0.08 * self._focal / max(depth, 0.2), color)


def render_overhead(world, path: "str | None" = None) -> np.ndarray:
    """Top-down biome map with spawn and food markers; optionally a PNG."""
    biome = world.biomemap.biome_id
    rgb = (_BIOME_COLORS[biome] * 255).astype(np.uint8)
    hm = world.heightmap
    inv = 1.0 / hm.cell_size

    def mark(x, y, color, r=2):
        i, j = int(y * inv), int(x * inv)
        rgb[max(0, i - r):i + r + 1, max(0, j - r):j + r + 1] = color

    mark(world.spawn[0], world.spawn[1], (255, 255, 255))
    for ref in world.foods:
        if ref[0] == "food":
            pose = world.entities.foods[ref[1]].pose
        else:
            pose = world.entities.animals[ref[1]][1]
        mark(pose[0], pose[1], (255, 40, 40))
    if path is not None:
        from PIL import Image
        Image.fromarray(rgb[::-1]).save(path)
    return rgb
