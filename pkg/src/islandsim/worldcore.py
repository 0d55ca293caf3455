"""Seeded generation of the base island: terrain, biomes, scenery.

The height pipeline is pure integer arithmetic on a Q16.16 grid, so the
same config yields byte-identical maps on any platform. Floats only
appear downstream of the quantized heights (classification, queries),
restricted to IEEE add/mul/div/sqrt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .fixedmath import Q16, hash_grid_u64, hash_combine

BENCHMARK_SIZES = (32.0, 64.0, 220.0, 440.0)


class Biome(IntEnum):
    # 7 core land biomes
    TROPICAL_RAIN_FOREST = 0
    TROPICAL_SEASONAL_FOREST = 1
    TEMPERATE_RAIN_FOREST = 2
    TEMPERATE_DECIDUOUS_FOREST = 3
    GRASSLAND = 4
    TEMPERATE_DESERT = 5
    SUBTROPICAL_DESERT = 6
    # 7 special biomes
    WATER = 7
    FRESH_WATER = 8
    COASTAL = 9
    SWAMP = 10
    DARK_SHORE = 11
    BARE = 12
    UNCLIMBABLE = 13


CORE_LAND_BIOMES = tuple(Biome(i) for i in range(7))


class SceneryKind(IntEnum):
    MAPLE = 0
    ACACIA = 1
    FIR = 2
    PALM = 3
    BUSH = 4
    FLOWER = 5
    MUSHROOM = 6
    FRUIT_TREE = 7


TREE_KINDS = (SceneryKind.MAPLE, SceneryKind.ACACIA, SceneryKind.FIR,
              SceneryKind.PALM, SceneryKind.FRUIT_TREE)


@dataclass(frozen=True)
class BiomeThresholds:
    """Cutoffs mapping (slope, elevation, water distance) to biomes."""
    slope_cutoffs: tuple = (0.9, 2.2)           # rise/run: steep, very steep
    elevation_cutoffs: tuple = (3.0, 8.0)       # m above water
    water_distance_cutoffs: tuple = (3.0, 8.0, 16.0)  # m, moist -> dry
    beach_slope_cutoff: float = 0.45
    swamp_elevation_max: float = 0.8
    beach_distance: float = 3.0
    dark_shore_distance: float = 2.0
    swamp_distance: float = 6.0

    def __post_init__(self):
        for cuts in (self.slope_cutoffs, self.elevation_cutoffs,
                     self.water_distance_cutoffs):
            if list(cuts) != sorted(cuts) or len(set(cuts)) != len(cuts):
                raise ConfigError("cutoff lists must be strictly increasing")


class ConfigError(ValueError):
    """Invalid world configuration."""


@dataclass(frozen=True)
class WorldConfig:
    seed: int
    size_in_meters: float = 64.0
    fractal_iteration_count: int = 5
    noise_scale_decay: float = 0.55
    water_level: float = 0.0
    cells_per_meter: float = 1.0
    mountain_amplitude: float = 8.0
    base_uplift: float = 4.5
    base_grid_size: int = 8
    biome_thresholds: BiomeThresholds = field(default_factory=BiomeThresholds)
    task: "str | None" = None     # TaskKind name; None for a bare island
    difficulty: float = 0.0
    forced_kind: "str | None" = None  # pin the food or animal kind
    indoor_fraction: float = 0.5      # share of explore worlds with buildings

    def __post_init__(self):
        if self.size_in_meters <= 0:
            raise ConfigError("size_in_meters must be positive")
        if self.cells_per_meter <= 0:
            raise ConfigError("cells_per_meter must be positive")
        if self.fractal_iteration_count < 0:
            raise ConfigError("fractal_iteration_count must be >= 0")
        if not (0.0 < self.noise_scale_decay < 1.0):
            raise ConfigError("noise_scale_decay must be in (0, 1)")
        if self.base_grid_size < 4:
            raise ConfigError("base_grid_size must be >= 4")
        object.__setattr__(self, "difficulty",
                           min(1.0, max(0.0, float(self.difficulty))))
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))


class HeightMap:
    """Rectangular height grid in Q16.16 integers plus climbability flags.

    World coordinates: x right, y forward, z up. Cell (i, j) covers
    [j*cs, (j+1)*cs) x [i*cs, (i+1)*cs); its node height is at the center.
    """

    def __init__(self, heights_q: np.ndarray, cell_size: float):
        assert heights_q.dtype == np.int64 and heights_q.ndim == 2
        self.heights_q = heights_q
        self.cell_size = cell_size
        self.height, self.width = heights_q.shape
        self.climbable = np.ones(heights_q.shape, dtype=bool)

    @property
    def heights(self) -> np.ndarray:
        return self.heights_q / Q16

    @property
    def size_x(self) -> float:
        return self.width * self.cell_size

    @property
    def size_y(self) -> float:
        return self.height * self.cell_size

    def cell_of(self, x: float, y: float):
        j = int(x / self.cell_size)
        i = int(y / self.cell_size)
        return (min(max(i, 0), self.height - 1), min(max(j, 0), self.width - 1))

    def cell_center(self, i: int, j: int):
        return ((j + 0.5) * self.cell_size, (i + 0.5) * self.cell_size)

    def height_at(self, x: float, y: float) -> float:
        """Bilinear height at a world position (clamped at borders)."""
        cs = self.cell_size
        u = x / cs - 0.5
        v = y / cs - 0.5
        j0 = int(np.floor(u))
        i0 = int(np.floor(v))
        fu = u - j0
        fv = v - i0
        j0 = min(max(j0, 0), self.width - 1)
        i0 = min(max(i0, 0), self.height - 1)
        j1 = min(j0 + 1, self.width - 1)
        i1 = min(i0 + 1, self.height - 1)
        h = self.heights_q
        a = h[i0, j0] * (1.0 - fu) + h[i0, j1] * fu
        b = h[i1, j0] * (1.0 - fu) + h[i1, j1] * fu
        return (a * (1.0 - fv) + b * fv) / Q16

    def is_climbable_at(self, x: float, y: float) -> bool:
        i, j = self.cell_of(x, y)
        return bool(self.climbable[i, j])

    def slopes(self) -> np.ndarray:
        """Per-cell slope (max abs central difference / cell size)."""
        h = self.heights
        gy, gx = np.gradient(h, self.cell_size)
        return np.maximum(np.abs(gx), np.abs(gy))


@dataclass
class BiomeMap:
    biome_id: np.ndarray  # uint8 grid of Biome values

    def histogram(self) -> dict:
        ids, counts = np.unique(self.biome_id, return_counts=True)
        return {Biome(int(b)).name.lower(): int(c) for b, c in zip(ids, counts)}


@dataclass
class SceneryPlacement:
    kind: SceneryKind
    position: tuple  # (x, y, z) m
    scale: float
    yaw: float
    colliding: bool


@dataclass
class SceneryField:
    placements: list


# ---------------------------------------------------------------------------
# Terrain pipeline (integer Q16.16 throughout)
# ---------------------------------------------------------------------------

def _subdivide_axis(grid: np.ndarray) -> np.ndarray:
    """Midpoint Catmull-Rom refinement along axis 0: n -> 2n-1 rows."""
    n = grid.shape[0]
    out = np.empty((2 * n - 1,) + grid.shape[1:], dtype=np.int64)
    out[0::2] = grid
    a = grid[np.maximum(np.arange(n - 1) - 1, 0)]
    b = grid[:-1]
    c = grid[1:]
    d = grid[np.minimum(np.arange(1, n) + 1, n - 1)]
    out[1::2] = (-a + 9 * b + 9 * c - d + 8) >> 4
    return out


def _catmull_weights_q16(f: np.ndarray):
    """Catmull-Rom weights (Q16) for fractional offsets f (Q16)."""
    f2 = (f * f) >> 16
    f3 = (f2 * f) >> 16
    w0 = (-f3 + 2 * f2 - f) >> 1
    w1 = (3 * f3 - 5 * f2 + (2 << 16)) >> 1
    w2 = (-3 * f3 + 4 * f2 + f) >> 1
    w3 = (f3 - f2) >> 1
    return w0, w1, w2, w3


def _resample_axis(grid: np.ndarray, n_out: int) -> np.ndarray:
    """Catmull-Rom resample along axis 0 onto n_out cell centers."""
    n_src = grid.shape[0]
    # Cell center i sits at fraction (2i+1)/(2*n_out) of the span.
    t = ((2 * np.arange(n_out, dtype=np.int64) + 1) * (n_src - 1) << 16) \
        // (2 * n_out)
    j = (t >> 16).astype(np.int64)
    f = t - (j << 16)
    w0, w1, w2, w3 = _catmull_weights_q16(f)
    jm1 = np.maximum(j - 1, 0)
    jp1 = np.minimum(j + 1, n_src - 1)
    jp2 = np.minimum(j + 2, n_src - 1)
    shape = (n_out,) + (1,) * (grid.ndim - 1)
    acc = (w0.reshape(shape) * grid[jm1] + w1.reshape(shape) * grid[j]
           + w2.reshape(shape) * grid[jp1] + w3.reshape(shape) * grid[jp2])
    return (acc + (1 << 15)) >> 16


def _smoothstep_q16(f: np.ndarray) -> np.ndarray:
    f2 = (f * f) >> 16
    return (f2 * ((3 << 16) - 2 * f)) >> 16


def build_outdoor_world_map(config: WorldConfig) -> HeightMap:
    """Fractal-subdivision terrain for the island described by config."""
    seed = config.seed
    amp_q = int(round(config.mountain_amplitude * Q16))
    base_n = config.base_grid_size

    ys, xs = np.meshgrid(np.arange(base_n), np.arange(base_n), indexing="ij")
    h = hash_grid_u64(seed, 0xBA5E, ys, xs)
    noise = (h >> np.uint64(32)).astype(np.int64) - (1 << 31)  # [-2^31, 2^31)
    grid = (noise * amp_q) >> 31
    grid += int(round(config.base_uplift * Q16))

    amp_round = amp_q
    for it in range(config.fractal_iteration_count):
        grid = _subdivide_axis(grid)
        grid = _subdivide_axis(grid.T).T
        amp_round = int(amp_round * config.noise_scale_decay)
        n = grid.shape[0]
        ys, xs = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        h = hash_grid_u64(seed, 0x4015E + it, ys, xs)
        noise = (h >> np.uint64(32)).astype(np.int64) - (1 << 31)
        grid = grid + ((noise * amp_round) >> 31)

    n_out = int(np.ceil(config.size_in_meters * config.cells_per_meter))
    grid = _resample_axis(grid, n_out)
    grid = _resample_axis(grid.T, n_out).T

    # Radial falloff: drop the rim below water so the island is ocean-ringed.
    half = n_out << 15  # n_out/2 in Q16 cell units
    coord = (np.arange(n_out, dtype=np.int64) << 16) + (1 << 15) - half
    dy, dx = np.meshgrid(coord, coord, indexing="ij")
    # Chebyshev-ish radius keeps corners from dominating; normalized to half.
    r = np.maximum(np.abs(dx), np.abs(dy))
    r_norm = (r << 16) // max(half, 1)
    r0, r1 = int(0.62 * Q16), int(1.0 * Q16)
    f = np.clip(((r_norm - r0) << 16) // (r1 - r0), 0, Q16)
    drop_q = int(round((2.0 * config.mountain_amplitude
                        + config.base_uplift + 8.0) * Q16))
    grid = grid - ((_smoothstep_q16(f) * drop_q) >> 16)

    hm = HeightMap(grid.astype(np.int64), 1.0 / config.cells_per_meter)
    return hm


# ---------------------------------------------------------------------------
# Biome classification
# ---------------------------------------------------------------------------

_CORE_TABLE = (
    # moisture class 0 (wet) .. 3 (dry), rows by elevation class
    (Biome.TROPICAL_RAIN_FOREST, Biome.TROPICAL_SEASONAL_FOREST,
     Biome.GRASSLAND, Biome.SUBTROPICAL_DESERT),
    (Biome.TEMPERATE_RAIN_FOREST, Biome.TEMPERATE_DECIDUOUS_FOREST,
     Biome.GRASSLAND, Biome.TEMPERATE_DESERT),
    (Biome.TEMPERATE_RAIN_FOREST, Biome.TEMPERATE_DECIDUOUS_FOREST,
     Biome.TEMPERATE_DESERT, Biome.TEMPERATE_DESERT),
)


def classify_biomes(hm: HeightMap, config: WorldConfig) -> BiomeMap:
    th = config.biome_thresholds
    h = hm.heights
    elev = h - config.water_level
    slope = hm.slopes()
    water = elev < 0.0

    labels, _ = ndimage.label(water)
    border = np.zeros_like(water)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    ocean_ids = np.unique(labels[water & border])
    ocean = np.isin(labels, ocean_ids) & water
    fresh = water & ~ocean

    cs = hm.cell_size
    dist_water = np.full(h.shape, np.inf) if not water.any() else \
        ndimage.distance_transform_edt(~water) * cs
    dist_ocean = np.full(h.shape, np.inf) if not ocean.any() else \
        ndimage.distance_transform_edt(~ocean) * cs
    dist_fresh = np.full(h.shape, np.inf) if not fresh.any() else \
        ndimage.distance_transform_edt(~fresh) * cs

    biome = np.empty(h.shape, dtype=np.uint8)

    moist = np.digitize(dist_water, th.water_distance_cutoffs)
    elev_cls = np.digitize(elev, th.elevation_cutoffs)
    table = np.array([[int(b) for b in row] for row in _CORE_TABLE],
                     dtype=np.uint8)
    biome[:] = table[elev_cls, moist]

    steep = slope > th.slope_cutoffs[-1]
    high = elev > th.elevation_cutoffs[-1]
    biome[steep & ~high] = int(Biome.BARE)
    biome[steep & high] = int(Biome.UNCLIMBABLE)

    land = ~water
    swamp = land & (elev < th.swamp_elevation_max) \
        & (dist_fresh < th.swamp_distance)
    coastal = land & (dist_ocean <= th.beach_distance) \
        & (slope < th.beach_slope_cutoff)
    dark = land & (dist_fresh <= th.dark_shore_distance) & ~coastal & ~swamp
    biome[swamp] = int(Biome.SWAMP)
    biome[dark] = int(Biome.DARK_SHORE)
    biome[coastal] = int(Biome.COASTAL)

    biome[fresh] = int(Biome.FRESH_WATER)
    biome[ocean] = int(Biome.WATER)

    hm.climbable[:] = biome != int(Biome.UNCLIMBABLE)
    return BiomeMap(biome_id=biome)


# ---------------------------------------------------------------------------
# Scenery placement
# ---------------------------------------------------------------------------

# (kind, relative weight) choices and base density (placements / m^2).
_BIOME_FLORA = {
    Biome.TROPICAL_RAIN_FOREST: (0.10, ((SceneryKind.PALM, 6),
                                        (SceneryKind.BUSH, 2),
                                        (SceneryKind.FLOWER, 2))),
    Biome.TROPICAL_SEASONAL_FOREST: (0.07, ((SceneryKind.PALM, 5),
                                            (SceneryKind.BUSH, 3),
                                            (SceneryKind.FLOWER, 2))),
    Biome.TEMPERATE_RAIN_FOREST: (0.09, ((SceneryKind.FIR, 6),
                                         (SceneryKind.MUSHROOM, 3),
                                         (SceneryKind.BUSH, 1))),
    Biome.TEMPERATE_DECIDUOUS_FOREST: (0.08, ((SceneryKind.MAPLE, 4),
                                              (SceneryKind.ACACIA, 3),
                                              (SceneryKind.BUSH, 3))),
    Biome.GRASSLAND: (0.04, ((SceneryKind.BUSH, 4),
                             (SceneryKind.FLOWER, 5),
                             (SceneryKind.ACACIA, 1))),
    Biome.TEMPERATE_DESERT: (0.01, ((SceneryKind.BUSH, 1),)),
    Biome.SUBTROPICAL_DESERT: (0.008, ((SceneryKind.BUSH, 1),)),
    Biome.COASTAL: (0.015, ((SceneryKind.PALM, 1),)),
    Biome.SWAMP: (0.05, ((SceneryKind.BUSH, 2), (SceneryKind.MUSHROOM, 3))),
}


def place_scenery(hm: HeightMap, bm: BiomeMap, config: WorldConfig,
                  clearings: "list | None" = None,
                  density_scale: float = 1.0) -> SceneryField:
    """Jittered-grid flora placement with per-biome kinds and density.

    clearings: list of (x, y, radius) circles kept free of colliders
    (spawn points, food sites, obstacle passages).
    """
    clearings = clearings or []
    placements = []
    seed = config.seed
    cs = hm.cell_size
    cell_area = cs * cs
    stride = max(1, int(round(1.0 / cs)))  # about one candidate per m^2

    for i in range(0, hm.height, stride):
        for j in range(0, hm.width, stride):
            b = Biome(int(bm.biome_id[i, j]))
            flora = _BIOME_FLORA.get(b)
            if flora is None:
                continue
            density, kinds = flora
            h0 = hash_combine(seed, 0x5CE7E, i, j)
            u = (h0 >> 11) * 2.0 ** -53
            if u >= density * density_scale * cell_area * stride * stride:
                continue
            h1 = hash_combine(seed, 0x5CE7E + 1, i, j)
            h2 = hash_combine(seed, 0x5CE7E + 2, i, j)
            total = sum(w for _, w in kinds)
            pick = h1 % total
            for kind, w in kinds:
                if pick < w:
                    break
                pick -= w
            x, y = hm.cell_center(i, j)
            jx = ((h2 & 0xFFFF) / 65536.0 - 0.5) * cs
            jy = (((h2 >> 16) & 0xFFFF) / 65536.0 - 0.5) * cs
            x, y = x + jx, y + jy
            colliding = kind in TREE_KINDS
            if colliding and any((x - cx) ** 2 + (y - cy) ** 2 < r * r
                                 for cx, cy, r in clearings):
                continue
            scale = 0.7 + 0.6 * (((h2 >> 32) & 0xFFFF) / 65536.0)
            yaw = 6.283185307179586 * (((h2 >> 48) & 0xFFFF) / 65536.0)
            z = hm.height_at(x, y)
            placements.append(SceneryPlacement(
                kind=kind, position=(x, y, z), scale=scale, yaw=yaw,
                colliding=colliding))
    return SceneryField(placements=placements)
