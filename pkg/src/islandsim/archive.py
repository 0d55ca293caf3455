"""Binary containers for worlds and replays.

World archives freeze a generated world (terrain, biomes, entity
manifest) so it can be reloaded without regenerating; replays freeze a
config plus the full quantized action stream and periodic state hashes,
which is enough to re-simulate and verify bit equality.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .entities import (AnimalKind, Attachment, DoorMotion, DoorSpec,
                       FoodKind, FoodState, ItemKind, ItemState, LockKind,
                       OpenDirection)
from .fixedmath import Q16
from .taskgen import (Building, DoorPlacement, EntityManifest,
                      GeneratedWorld, TaskKind, TIME_LIMITS)
from .worldcore import (BiomeThresholds, HeightMap, SceneryField,
                        SceneryKind, SceneryPlacement, WorldConfig)

WORLD_MAGIC = b"AVLW\x01"
REPLAY_MAGIC = b"AVLR\x01"


class ArchiveError(ValueError):
    """Malformed or truncated archive data."""


def _write_chunk(out: bytearray, tag: bytes, payload: bytes) -> None:
    out += tag
    out += struct.pack("<I", len(payload))
    out += payload


def _read_chunks(buf: bytes, offset: int) -> dict:
    chunks = {}
    while offset < len(buf):
        if offset + 8 > len(buf):
            raise ArchiveError("truncated chunk header")
        tag = buf[offset:offset + 4]
        (size,) = struct.unpack_from("<I", buf, offset + 4)
        offset += 8
        if offset + size > len(buf):
            raise ArchiveError("truncated chunk payload")
        chunks[tag] = buf[offset:offset + size]
        offset += size
    return chunks


def config_to_dict(config: WorldConfig) -> dict:
    d = dataclasses.asdict(config)
    d["biome_thresholds"] = dataclasses.asdict(config.biome_thresholds)
    return d


def config_from_dict(d: dict) -> WorldConfig:
    d = dict(d)
    bt = d.pop("biome_thresholds", None)
    if bt is not None:
        bt = BiomeThresholds(**{k: tuple(v) if isinstance(v, list) else v
                                for k, v in bt.items()})
        d["biome_thresholds"] = bt
    return WorldConfig(**d)


def _manifest_to_json(m: EntityManifest) -> dict:
    return {
        "foods": [{
            "kind": f.kind.name, "pose": list(f.pose),
            "attached": f.attached.value, "opened": f.opened,
            "spoiled": f.spoiled} for f in m.foods],
        "animals": [{
            "kind": k.name, "pose": list(pose),
            "territory_center": list(tc), "territory_radius": tr}
            for k, pose, tc, tr in m.animals],
        "items": [{
            "kind": it.kind.name, "pose": list(it.pose), "yaw": it.yaw,
            "mass": it.mass} for it in m.items],
        "doors": [{
            "motion": dp.spec.motion.value,
            "open_direction": dp.spec.open_direction.value,
            "locks": [lk.value for lk in dp.spec.locks],
            "position": list(dp.position), "width": dp.width,
            "axis": dp.axis} for dp in m.doors],
    }


def _manifest_from_json(d: dict) -> EntityManifest:
    m = EntityManifest()
    for f in d["foods"]:
        m.foods.append(FoodState(
            kind=FoodKind[f["kind"]], pose=tuple(f["pose"]),
            attached=Attachment(f["attached"]), opened=f["opened"],
            spoiled=f["spoiled"]))
    for a in d["animals"]:
        m.animals.append((AnimalKind[a["kind"]], tuple(a["pose"]),
                          tuple(a["territory_center"]),
                          a["territory_radius"]))
    for it in d["items"]:
        m.items.append(ItemState(kind=ItemKind[it["kind"]],
                                 pose=tuple(it["pose"]), yaw=it["yaw"],
                                 mass=it["mass"]))
    for dd in d["doors"]:
        spec = DoorSpec(motion=DoorMotion(dd["motion"]),
                        open_direction=OpenDirection(dd["open_direction"]),
                        locks=tuple(LockKind(v) for v in dd["locks"]))
        m.doors.append(DoorPlacement(spec=spec,
                                     position=tuple(dd["position"]),
                                     width=dd["width"], axis=dd["axis"]))
    return m


def _world_meta_json(world: GeneratedWorld) -> dict:
    return {
        "config": config_to_dict(world.config),
        "manifest": _manifest_to_json(world.entities),
        "buildings": [{
            "footprint": list(b.footprint), "floor_height": b.floor_height,
            "stories": b.stories, "rooms": [list(r) for r in b.rooms],
            "door_count": len(b.doors),
            "climbable_exterior": b.climbable_exterior,
            "wall_height": b.wall_height,
            "wall_thickness": b.wall_thickness} for b in world.buildings],
        "scenery": [{
            "kind": pl.kind.name, "position": list(pl.position),
            "scale": pl.scale, "yaw": pl.yaw, "colliding": pl.colliding}
            for pl in world.scenery.placements],
        "spawn": list(world.spawn),
        "foods": [list(ref) for ref in world.foods],
        "time_limit_frames": world.time_limit_frames,
        "task": world.task.value,
        "difficulty": world.difficulty,
        "meta": world.meta,
        "cell_size": world.heightmap.cell_size,
        "grid_shape": [world.heightmap.height, world.heightmap.width],
    }


def save_world(world: GeneratedWorld) -> bytes:
    """Serialize a world; heights are little-endian int32 in Q16.16."""
    out = bytearray(WORLD_MAGIC)
    meta = json.dumps(_world_meta_json(world),
                      separators=(",", ":"), sort_keys=True).encode()
    _write_chunk(out, b"META", meta)
    hq = world.heightmap.heights_q
    if np.any(hq > np.iinfo(np.int32).max) or \
            np.any(hq < np.iinfo(np.int32).min):
        raise ArchiveError("height out of int32 Q16.16 range")
    _write_chunk(out, b"HGTS",
                 hq.astype("<i4").tobytes())
    _write_chunk(out, b"BIOM", world.biomemap.biome_id.astype(
        np.uint8).tobytes())
    _write_chunk(out, b"CLMB", np.packbits(
        world.heightmap.climbable).tobytes())
    return bytes(out)


def load_world(data: bytes) -> GeneratedWorld:
    if data[:5] != WORLD_MAGIC:
        raise ArchiveError("bad world magic")
    chunks = _read_chunks(data, 5)
    for tag in (b"META", b"HGTS", b"BIOM", b"CLMB"):
        if tag not in chunks:
            raise ArchiveError(f"missing chunk {tag!r}")
    meta = json.loads(chunks[b"META"].decode())
    rows, cols = meta["grid_shape"]
    hq = np.frombuffer(chunks[b"HGTS"], dtype="<i4").astype(
        np.int64).reshape(rows, cols)
    hm = HeightMap(heights_q=hq.copy(), cell_size=meta["cell_size"])
    biome = np.frombuffer(chunks[b"BIOM"], dtype=np.uint8).reshape(
        rows, cols).copy()
    climb = np.unpackbits(np.frombuffer(chunks[b"CLMB"], dtype=np.uint8),
                          count=rows * cols).reshape(rows, cols)
    hm.climbable = climb.astype(bool)
    from .worldcore import BiomeMap
    bm = BiomeMap(biome_id=biome)
    config = config_from_dict(meta["config"])
    scenery = SceneryField(placements=[
        SceneryPlacement(kind=SceneryKind[p["kind"]],
                         position=tuple(p["position"]), scale=p["scale"],
                         yaw=p["yaw"], colliding=p["colliding"])
        for p in meta["scenery"]])
    buildings = []
    door_cursor = 0
    manifest = _manifest_from_json(meta["manifest"])
    for bd in meta["buildings"]:
        n = bd["door_count"]
        b = Building(footprint=tuple(bd["footprint"]),
                     floor_height=bd["floor_height"],
                     stories=bd["stories"],
                     rooms=[tuple(r) for r in bd["rooms"]],
                     doors=manifest.doors[door_cursor:door_cursor + n],
                     climbable_exterior=bd["climbable_exterior"],
                     wall_height=bd["wall_height"],
                     wall_thickness=bd["wall_thickness"])
        door_cursor += n
        buildings.append(b)
    return GeneratedWorld(
        config=config, heightmap=hm, biomemap=bm, scenery=scenery,
        entities=manifest, buildings=buildings, rings=[],
        spawn=tuple(meta["spawn"]),
        foods=[tuple(ref) for ref in meta["foods"]],
        time_limit_frames=meta["time_limit_frames"],
        task=TaskKind(meta["task"]), difficulty=meta["difficulty"],
        meta=meta["meta"])


def save_world_file(world: GeneratedWorld, path: str) -> None:
    data = save_world(world)
    with open(path, "wb") as fh:
        fh.write(data)
    with open(path + ".json", "w") as fh:
        json.dump(_world_meta_json(world), fh, indent=2, sort_keys=True)


def load_world_file(path: str) -> GeneratedWorld:
    with open(path, "rb") as fh:
        return load_world(fh.read())


# ---------------------------------------------------------------------------
# Replays
# ---------------------------------------------------------------------------

def save_replay(config: WorldConfig, actions_q16: "list[list[int]]",
                state_hashes: "dict[int, str]",
                final_hash: str) -> bytes:
    """Pack a replay: config, Q16 action rows, and frame-indexed hashes."""
    out = bytearray(REPLAY_MAGIC)
    header = {
        "config": config_to_dict(config),
        "action_width": len(actions_q16[0]) if actions_q16 else 0,
        "frames": len(actions_q16),
        "hash_frames": sorted(state_hashes),
        "final_hash": final_hash,
    }
    _write_chunk(out, b"HEAD", json.dumps(
        header, separators=(",", ":"), sort_keys=True).encode())
    flat = bytearray()
    for row in actions_q16:
        for v in row:
            flat += struct.pack("<i", v)
    _write_chunk(out, b"ACTS", bytes(flat))
    hashes = "".join(state_hashes[f] for f in sorted(state_hashes))
    _write_chunk(out, b"HASH", hashes.encode())
    return bytes(out)


def load_replay(data: bytes) -> dict:
    if data[:5] != REPLAY_MAGIC:
        raise ArchiveError("bad replay magic")
    chunks = _read_chunks(data, 5)
    for tag in (b"HEAD", b"ACTS"):
        if tag not in chunks:
            raise ArchiveError(f"missing chunk {tag!r}")
    head = json.loads(chunks[b"HEAD"].decode())
    width = head["action_width"]
    frames = head["frames"]
    raw = chunks[b"ACTS"]
    if len(raw) != 4 * width * frames:
        raise ArchiveError("action block size mismatch")
    actions = []
    for i in range(frames):
        row = struct.unpack_from(f"<{width}i", raw, i * width * 4)
        actions.append(list(row))
    hashes = {}
    if b"HASH" in chunks and head["hash_frames"]:
        text = chunks[b"HASH"].decode()
        n = len(text) // len(head["hash_frames"])
        for k, f in enumerate(head["hash_frames"]):
            hashes[f] = text[k * n:(k + 1) * n]
    return {
        "config": config_from_dict(head["config"]),
        "actions_q16": actions,
        "state_hashes": hashes,
        "final_hash": head["final_hash"],
    }
