"""Scripted reference policies.

One privileged policy per task, built from a small set of movement and
manipulation primitives (walk, leap a gap, scale a face, reach, throw,
swing, work a door). They read simulation state directly; they exist to
prove generated worlds are solvable and to provide the skilled baseline
for score normalization.
"""

from __future__ import annotations

import math

from .entities import (Attachment, FoodKind, ItemKind, Mode)
from .fixedmath import det_atan2, det_cos, det_hypot, det_sin
from .simkernel import ControlFrame, PhysicsParams, Simulation
from .taskgen import GeneratedWorld, PassageMode, RingKind, TaskKind

_IDLE = ControlFrame()


def _clamp(v: float, m: float) -> float:
    return max(-m, min(m, v))


def _yaw_to(sim: Simulation, target) -> float:
    a = sim.agent
    return det_atan2(target[1] - a.position[1], target[0] - a.position[0])


def _yaw_err(sim: Simulation, target) -> float:
    err = _yaw_to(sim, target) - sim.agent.yaw
    return (err + math.pi) % (2 * math.pi) - math.pi


def _dist_xy(sim: Simulation, target) -> float:
    a = sim.agent.position
    return det_hypot(target[0] - a[0], target[1] - a[1])


def _body_frame(sim: Simulation, wx: float, wy: float) -> tuple:
    yaw = sim.agent.yaw
    c, s = det_cos(yaw), det_sin(yaw)
    return (c * wx + s * wy, -s * wx + c * wy)


def _hold_frame(hold: bool, **kw) -> ControlFrame:
    return ControlFrame(grasp_right=hold, **kw)


# Waypoint entry modes produced by the grid planner.
_WP_WALK, _WP_JUMP, _WP_CLIMB, _WP_TAKEOFF = 0, 1, 2, 3


def _grid_path(hm, start, goal, jump_distance: float = 2.0,
               max_step_up: float = 0.5, max_drop: float = 3.0,
               water_level: float = -1e9):
    """BFS route over the terrain grid using walk/hop/climb moves.

    Returns a sparse list of (x, y, mode) waypoints (mode says how the
    waypoint is entered), or None when no route exists.
    """
    h = hm.heights
    start_c = hm.cell_of(start[0], start[1])
    goal_c = hm.cell_of(goal[0], goal[1])
    jump_cells = int(jump_distance / hm.cell_size)
    from collections import deque
    parent = {start_c: None}
    q = deque([start_c])
    nbrs = ((1, 0), (-1, 0), (0, 1), (0, -1))
    while q:
        cur = q.popleft()
        if cur == goal_c:
            break
        i, j = cur
        hij = h[i, j]
        for di, dj in nbrs:
            ni, nj = i + di, j + dj
            if not (0 <= ni < hm.height and 0 <= nj < hm.width) or \
                    (ni, nj) in parent:
                continue
            if h[ni, nj] < water_level - 1.2:
                continue
            dh = h[ni, nj] - hij
            mode = None
            if dh <= max_step_up and -dh <= max_drop:
                mode = _WP_WALK
            elif dh > 0 and hm.climbable[ni, nj]:
                mode = _WP_CLIMB
            elif dh < 0 and hm.climbable[i, j]:
                mode = _WP_WALK
            if mode is not None:
                parent[(ni, nj)] = (cur, mode)
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
                            h[ni, nj] >= water_level - 1.2 and \
                            (ni, nj) not in parent:
                        parent[(ni, nj)] = (cur, _WP_JUMP)
                        q.append((ni, nj))
    if goal_c not in parent:
        return None
    raw = []
    cur = goal_c
    while cur is not None:
        link = parent[cur]
        if link is None:
            raw.append((cur, _WP_WALK))
            cur = None
        else:
            prev, mode = link
            raw.append((cur, mode))
            cur = prev
    raw.reverse()
    out = []
    n = len(raw)
    i = 1
    while i < n:
        cell, mode = raw[i]
        if mode == _WP_JUMP:
            px, py = hm.cell_center(*raw[i - 1][0])
            out.append((px, py, _WP_TAKEOFF))
            x, y = hm.cell_center(*cell)
            out.append((x, y, _WP_JUMP))
            i += 1
        elif mode == _WP_CLIMB:
            j = i
            while j + 1 < n and raw[j + 1][1] == _WP_CLIMB:
                j += 1
            x, y = hm.cell_center(*raw[j][0])
            out.append((x, y, _WP_CLIMB))
            i = j + 1
        else:
            j = i
            while j + 1 < n and raw[j + 1][1] == _WP_WALK \
                    and j - i < 3:
                j += 1
            x, y = hm.cell_center(*raw[j][0])
            out.append((x, y, _WP_WALK))
            i = j + 1
    return out


def _hand(delta: tuple, grasp: bool, **kw) -> ControlFrame:
    return ControlFrame(right_hand_delta=delta, grasp_right=grasp, **kw)


def _nearest_dry(hm, pos, water: float) -> "tuple | None":
    """Center of the closest cell whose ground sits at or above water."""
    i0, j0 = hm.cell_of(pos[0], pos[1])
    rows, cols = hm.heights.shape
    best, bd = None, 1e18
    for di in range(-14, 15):
        for dj in range(-14, 15):
            i, j = i0 + di, j0 + dj
            if 0 <= i < rows and 0 <= j < cols and \
                    hm.heights[i][j] >= water - 0.2:
                x, y = hm.cell_center(i, j)
                dd = (x - pos[0]) ** 2 + (y - pos[1]) ** 2
                if dd < bd:
                    best, bd = (x, y), dd
    return best


class _Driver:
    """Primitive motions expressed as generators of control frames.

    All manipulation uses the right hand; `hold` keeps its grasp flag
    raised so a carried object is not dropped between primitives.
    """

    def __init__(self, sim: Simulation):
        self.sim = sim

    # -- locomotion ------------------------------------------------------

    def face(self, target, tol: float = 0.1, hold: bool = False,
             timeout: int = 25):
        sim = self.sim
        for _ in range(timeout):
            err = _yaw_err(sim, target)
            if abs(err) <= tol:
                return
            yield _hold_frame(hold, head_rot=(0.0, _clamp(err, 0.3), 0.0))

    def goto(self, target, stop: float = 0.6, speed: float = 1.0,
             timeout: int = 900, hold: bool = False,
             jump_when_stuck: bool = True, avoid_falls: bool = True,
             wade: bool = False):
        sim = self.sim
        hm = sim.world.heightmap
        stuck = 0
        detours = 0
        last = sim.agent.position
        water = sim.world.water_level

        def chasm(h: float, from_z: float) -> bool:
            # A long drop or deep water both end the walk; wading mutes
            # the water half so shallow retrievals can push through.
            if from_z - h > 5.0:
                return True
            return not wade and h < water - 1.2 and from_z >= water - 0.95

        dry = sim.agent.position
        for _ in range(timeout):
            pos0 = sim.agent.position
            if pos0[2] >= water - 0.3:
                dry = pos0
            elif pos0[2] < water - (2.0 if wade else 0.9):
                # In over the head (or down a drowned gully).  Leave by
                # the easiest wall: the ray whose near rim can be hooked
                # by a hand and whose farther ground runs highest.  Walk
                # and jump first, climb if that fails, then abandon this
                # leg so the caller can re-plan around the water.
                best_ang, best_score = None, -1e18
                for k8 in range(8):
                    ang = k8 * 0.7853981634
                    h1 = hm.height_at(pos0[0] + 1.1 * det_cos(ang),
                                      pos0[1] + 1.1 * det_sin(ang))
                    if h1 - pos0[2] > 2.3:
                        continue  # rim above any hand hold from here
                    h3 = hm.height_at(pos0[0] + 3.0 * det_cos(ang),
                                      pos0[1] + 3.0 * det_sin(ang))
                    score = min(h1, water + 0.5) + min(h3, water + 0.5)
                    h0 = hm.height_at(pos0[0] + 0.45 * det_cos(ang),
                                      pos0[1] + 0.45 * det_sin(ang))
                    if h0 < water - 1.2:
                        # First step lands in water too deep to wade;
                        # walking that way gives no run-up, and a jump
                        # from a standstill goes straight up.
                        score -= 5.0
                    if score > best_score:
                        best_score, best_ang = score, ang
                if best_ang is None:
                    exit_pt = _nearest_dry(hm, pos0, water) or dry
                else:
                    exit_pt = (pos0[0] + 3.0 * det_cos(best_ang),
                               pos0[1] + 3.0 * det_sin(best_ang))
                for k in range(60):
                    apos = sim.agent.position
                    if sim.agent.grounded:
                        if apos[2] >= water - 0.3:
                            return
                        if det_hypot(apos[0] - pos0[0],
                                     apos[1] - pos0[1]) >= 1.0 and \
                                hm.height_at(apos[0], apos[1]) >= \
                                water - 1.1:
                            # Out of the too-deep-to-wade zone; normal
                            # walking works again, so let the caller
                            # re-plan from here.
                            return
                    derr = _yaw_err(sim, exit_pt)
                    if abs(derr) > 0.8:
                        yield _hold_frame(hold,
                                          head_rot=(0.0, _clamp(derr, 0.3),
                                                    0.0))
                    else:
                        yield _hold_frame(hold,
                                          head_delta=(0.5, 0.0, 0.0),
                                          head_rot=(0.0, _clamp(derr, 0.3),
                                                    0.0),
                                          jump=(k % 3 == 2))
                yield from self.climb_to(exit_pt, stop=0.8, timeout=250,
                                         lefty=hold)
                return
            if _dist_xy(sim, target) <= stop:
                return
            err = _yaw_err(sim, target)
            rot = _clamp(err, 0.3)
            if abs(err) > 0.8:
                yield _hold_frame(hold, head_rot=(0.0, rot, 0.0))
                continue
            step = min(0.5 * speed, _dist_xy(sim, target))
            yaw_t = _yaw_to(sim, target)
            fwd, left = _body_frame(sim, step * det_cos(yaw_t),
                                    step * det_sin(yaw_t))
            if avoid_falls and sim.agent.grounded and stuck < 20:
                ap = sim.agent.position
                ax = ap[0] + 0.9 * det_cos(yaw_t)
                ay = ap[1] + 0.9 * det_sin(yaw_t)
                ahead_h = hm.height_at(ax, ay)
                danger = chasm(ahead_h, ap[2])
                if not danger and ap[2] - ahead_h > 0.8 and step > 0.2:
                    # A step down this far goes ballistic; creep so the
                    # hop stays short and the next edge probe runs from
                    # the ground rather than mid-flight.
                    step = 0.2
                    fwd, left = _body_frame(
                        sim, step * det_cos(yaw_t),
                        step * det_sin(yaw_t))
                if danger:
                    # Sheer edge straight ahead; treat it as a wall:
                    # sidestep along it, and let the stuck counter
                    # escalate to a wide detour.  The sidestep itself
                    # must not walk off an edge either, so probe both
                    # sides and back up when the spur is that narrow.
                    stuck = max(stuck + 1, 8)
                    ayaw = sim.agent.yaw
                    sgn = 1.0 if (stuck // 6) % 2 else -1.0

                    def _ledge(s: float) -> bool:
                        ly = ayaw + s * 1.5707963
                        return chasm(hm.height_at(
                            ap[0] + 1.1 * det_cos(ly),
                            ap[1] + 1.1 * det_sin(ly)), ap[2])

                    if _ledge(sgn):
                        sgn = -sgn
                    if _ledge(sgn):
                        # Edges ahead and to both sides.  Back up a
                        # little only while the ground behind is flat
                        # and dry -- an unbounded retreat just marches
                        # down the far slope into the sea.  Otherwise
                        # hold and let the stuck counter escalate.
                        bh = hm.height_at(
                            ap[0] - 1.1 * det_cos(sim.agent.yaw),
                            ap[1] - 1.1 * det_sin(sim.agent.yaw))
                        if stuck < 14 and ap[2] - bh <= 1.5 and \
                                bh > water + 0.3:
                            yield _hold_frame(hold,
                                              head_delta=(-0.5, 0.0, 0.0),
                                              head_rot=(0.0, rot, 0.0))
                        else:
                            yield _hold_frame(hold,
                                              head_rot=(0.0, rot, 0.0))
                    else:
                        yield _hold_frame(hold,
                                          head_delta=(0.0, 0.45 * sgn,
                                                      0.0),
                                          head_rot=(0.0, rot, 0.0))
                    last = sim.agent.position
                    continue
            if stuck >= 20:
                # Jumping and sidesteps both failed; swing wide around
                # the obstacle, a little wider after every attempt.
                side = 1.0 if detours % 2 == 0 else -1.0
                span = 2.5 + 1.5 * detours
                a = sim.agent.position
                wp = (a[0] - det_sin(yaw_t) * side * span
                      + det_cos(yaw_t),
                      a[1] + det_cos(yaw_t) * side * span
                      + det_sin(yaw_t))
                for _ in range(40):
                    if _dist_xy(sim, wp) < 0.8:
                        break
                    werr = _yaw_err(sim, wp)
                    wrot = _clamp(werr, 0.3)
                    if abs(werr) > 0.8:
                        yield _hold_frame(hold, head_rot=(0.0, wrot, 0.0))
                        continue
                    if avoid_falls and sim.agent.grounded:
                        ap = sim.agent.position
                        wyaw = _yaw_to(sim, wp)
                        if chasm(hm.height_at(
                                ap[0] + 0.9 * det_cos(wyaw),
                                ap[1] + 0.9 * det_sin(wyaw)), ap[2]):
                            break
                    yield _hold_frame(hold, head_delta=(0.5, 0.0, 0.0),
                                      head_rot=(0.0, wrot, 0.0))
                detours += 1
                stuck = 0
                last = sim.agent.position
                continue
            if stuck == 4 and jump_when_stuck:
                # Take the obstacle at a run so the jump carries
                # horizontal speed -- but flight is ballistic, so gauge
                # the run-up against any sheer drop ahead first.
                cliff = 99.0
                if avoid_falls:
                    ap = sim.agent.position
                    for dd in (2.0, 3.5, 5.0, 6.5):
                        if chasm(hm.height_at(
                                ap[0] + dd * det_cos(yaw_t),
                                ap[1] + dd * det_sin(yaw_t)), ap[2]):
                            cliff = dd
                            break
                if cliff > 6.0:
                    dash = 0.5
                elif cliff > 2.5:
                    dash = 0.2
                else:
                    # Any jump would land in the chasm; fall through to
                    # the sidestep machinery instead.
                    stuck = 8
                    yield _hold_frame(hold, head_rot=(0.0, rot, 0.0))
                    continue
                ap = sim.agent.position
                ok_back = True
                if avoid_falls:
                    for dd in (1.2, 2.2):
                        bh = hm.height_at(
                            ap[0] - dd * det_cos(yaw_t),
                            ap[1] - dd * det_sin(yaw_t))
                        if ap[2] - bh > 1.2 or bh < water + 0.3:
                            ok_back = False
                            break
                if ok_back:
                    # Only take a run-up when the ground behind holds.
                    for _ in range(2):
                        yield _hold_frame(hold,
                                          head_delta=(-0.5, 0.0, 0.0))
                        if not sim.agent.grounded:
                            break
                if sim.agent.grounded:
                    yield _hold_frame(hold, head_delta=(dash, 0.0, 0.0))
                    yield _hold_frame(hold, head_delta=(dash, 0.0, 0.0),
                                      jump=True)
                for _ in range(30):
                    if sim.agent.grounded:
                        break
                    yield _hold_frame(hold, head_delta=(0.0, 0.0, 0.0))
                stuck += 1
                last = sim.agent.position
                continue
            if stuck >= 8:
                # Sidestep around whatever is in the way, avoiding any
                # edge on the chosen side.
                fwd = 0.2
                sgn = 1.0 if (stuck // 6) % 2 else -1.0
                if avoid_falls and sim.agent.grounded:
                    ap = sim.agent.position
                    ly = sim.agent.yaw + sgn * 1.5707963
                    if chasm(hm.height_at(
                            ap[0] + 1.1 * det_cos(ly),
                            ap[1] + 1.1 * det_sin(ly)), ap[2]):
                        sgn = -sgn
                left = 0.45 * sgn
            yield _hold_frame(hold, head_delta=(fwd, left, 0.0),
                              head_rot=(0.0, rot, 0.0))
            pos = sim.agent.position
            if det_hypot(pos[0] - last[0], pos[1] - last[1]) < 0.05 and \
                    sim.agent.grounded:
                stuck += 1
            else:
                stuck = 0
            last = pos

    def leap(self, target, dashes: int = 2, hold: bool = False):
        """Face the target, sprint briefly, jump, ride out the flight."""
        sim = self.sim
        hm = sim.world.heightmap
        yield from self.face(target, hold=hold)
        # Flight is ballistic, so meter the run-up: launched from high
        # ground, a full sprint overshoots the landing by several body
        # lengths and can end in the sea.
        p = sim.params
        z0 = sim.agent.position[2]
        land = hm.height_at(target[0], target[1])
        vz = p.jump_speed
        disc = vz * vz - 2.0 * p.gravity * (land - z0)
        t = (vz + disc ** 0.5) / p.gravity if disc > 0 \
            else vz / p.gravity
        dash = min(0.5, max(0.2,
                            1.15 * _dist_xy(sim, target)
                            / max(t, 0.2) * p.dt))
        for k in range(dashes + 1):
            err = _yaw_err(sim, target)
            yield _hold_frame(hold, head_delta=(dash, 0.0, 0.0),
                              head_rot=(0.0, _clamp(err, 0.3), 0.0),
                              jump=(k == dashes))
        for _ in range(40):
            if sim.agent.grounded:
                return
            # Ride the flight toward the landing point; once past it
            # (or out over a drop) drive nothing and fall straight.
            ap = sim.agent.position
            push = _dist_xy(sim, target) > 0.6 and \
                ap[2] - hm.height_at(ap[0], ap[1]) < 4.0
            yield _hold_frame(hold,
                              head_delta=(0.5, 0.0, 0.0) if push
                              else (0.0, 0.0, 0.0))

    def climb_to(self, target, stop: float = 1.0, timeout: int = 600,
                 lefty: bool = False):
        """Walk toward the target; pull up any face that bars the way.

        Each climb cycle places the hand high on the face, grasps, and
        pulls down-and-back for a few frames (the body rises opposite
        the hand motion), then releases and repeats.  With `lefty` the
        left hand does the climbing and the right keeps its grip on
        whatever it carries.
        """
        sim = self.sim
        hm = sim.world.heightmap
        budget = timeout
        cycle = 0

        def cf(delta, grasp, **kw):
            if lefty:
                return ControlFrame(left_hand_delta=delta,
                                    grasp_left=grasp,
                                    grasp_right=True, **kw)
            return _hand(delta, grasp, **kw)

        def wf(**kw):
            return ControlFrame(grasp_right=lefty, **kw)

        # Alternate hand heights: high for sheer walls, low for small
        # steps and shallow slopes.
        heights = (1.9, 0.9, 1.5, 2.2, 1.2)
        wstuck = 0
        last = sim.agent.position
        while budget > 0:
            if _dist_xy(sim, target) <= stop:
                yield wf()  # drop any climbing anchor before moving on
                return
            a = sim.agent
            err = _yaw_err(sim, target)
            if abs(err) > 0.4:
                yield wf(head_rot=(0.0, _clamp(err, 0.3), 0.0))
                budget -= 1
                continue
            yaw_t = _yaw_to(sim, target)
            ahead = hm.height_at(a.position[0] + 0.8 * det_cos(yaw_t),
                                 a.position[1] + 0.8 * det_sin(yaw_t))
            # A sampled height can look walkable while a sub-cell lip
            # still blocks the step, so escalate to a pull-up once plain
            # walking stops making progress.
            if ahead <= a.position[2] + 0.5 and wstuck < 6:
                yield wf(
                    head_delta=(min(0.5, _dist_xy(sim, target)), 0.0, 0.0),
                    head_rot=(0.0, _clamp(err, 0.3), 0.0))
                budget -= 1
                pos = sim.agent.position
                if det_hypot(pos[0] - last[0], pos[1] - last[1]) < 0.04:
                    wstuck += 1
                else:
                    wstuck = 0
                last = pos
                continue
            wstuck = 0
            last = sim.agent.position
            # Put the hand high on the face ahead.
            hand_z = heights[cycle % len(heights)]
            cycle += 1
            for _ in range(4):
                h = a.hands[0] if lefty else a.hands[1]
                dlt = (_clamp(0.75 - h.rel[0], 0.5),
                       _clamp(0.0 - h.rel[1], 0.5),
                       _clamp(hand_z - h.rel[2], 0.5))
                yield cf(dlt, False)
                budget -= 1
            yield cf((0.0, 0.0, 0.0), True)
            budget -= 1
            if not a.climbing:
                # No hold here; shuffle to the very base and try again.
                yield wf(head_delta=(0.3, 0.0, 0.0))
                budget -= 1
                continue
            for _ in range(3):
                if not a.climbing:
                    break
                yield cf((-0.4, 0.0, -0.5), True)
                budget -= 1
            h = a.hands[0] if lefty else a.hands[1]
            if h.grasp is not None and h.grasp[0] == "item":
                # The climbing hand snagged a loose object instead of a
                # hold.  Still the hand first so letting go drops it in
                # place instead of hurling it.
                yield cf((0.0, 0.0, 0.0), True)
                yield cf((0.0, 0.0, 0.0), True)
                budget -= 2
            yield cf((0.0, 0.0, 0.0), False)
            budget -= 1
            for _ in range(15):
                if sim.agent.grounded or sim.agent.climbing:
                    break
                yield wf()
                budget -= 1
            pos = sim.agent.position
            if det_hypot(pos[0] - last[0], pos[1] - last[1]) < 0.1:
                # This line up the face gives nothing -- a trunk or an
                # overhang keeps snapping the body back -- so shuffle
                # sideways and attack a different spot.
                side = 0.5 if (cycle // 2) % 2 else -0.5
                for _ in range(4):
                    yield wf(head_delta=(0.0, side, 0.0))
                    budget -= 1
            last = sim.agent.position

    def navigate(self, target, stop: float = 0.6, hold: bool = False):
        """Route-planned travel: walk, hop gaps, and climb per waypoint.

        Falls back to plain goto when no grid route exists (or once the
        route is exhausted, to close the final gap).
        """
        sim = self.sim
        hm = sim.world.heightmap
        a = sim.agent.position
        path = _grid_path(hm, a, target,
                          water_level=sim.world.water_level)
        if path:
            for x, y, mode in path:
                if _dist_xy(sim, target) <= stop:
                    break
                if mode == _WP_CLIMB:
                    yield from self.climb_to((x, y), stop=0.7,
                                             timeout=250, lefty=hold)
                elif mode == _WP_TAKEOFF:
                    yield from self.goto((x, y), stop=0.35, timeout=60,
                                         hold=hold,
                                         jump_when_stuck=False)
                elif mode == _WP_JUMP:
                    yield from self.leap((x, y), dashes=1, hold=hold)
                else:
                    yield from self.goto((x, y), stop=0.9, timeout=60,
                                         hold=hold)
        yield from self.goto(target, stop=stop, timeout=250, hold=hold)

    # -- manipulation ----------------------------------------------------

    def reach_hand(self, point_fn, grasp: bool = True, timeout: int = 25,
                   want_target=None):
        """Bring the right hand to a world point; grasp when close.

        `want_target` names the only acceptable grasp, e.g.
        ("animal", 3); anything else the fingers close on is let go.
        Any crouch used to reach low is undone before returning.
        """
        yield from self._reach_hand_raw(point_fn, grasp, timeout,
                                        want_target)
        for _ in range(3):
            if self.sim.agent.crouch >= -1e-9:
                return
            keep = self.sim.agent.hands[1].grasp is not None
            yield _hand((0.0, 0.0, 0.0), keep,
                        head_delta=(0.0, 0.0, 0.5))

    def _reach_hand_raw(self, point_fn, grasp: bool, timeout: int,
                        want_target):
        sim = self.sim
        for _ in range(timeout):
            a = sim.agent
            h = a.hands[1]
            if h.grasp is not None and want_target is not None and \
                    h.grasp != want_target:
                yield _hand((0.0, 0.0, 0.0), False)
                continue
            point = point_fn() if callable(point_fn) else point_fn
            if point is None:
                return
            want = (point[0] - a.position[0], point[1] - a.position[1],
                    point[2] - a.position[2])
            # A target below the arm's floor (in a hollow, underwater)
            # only comes into range by crouching the whole body down.
            duck = (0.0, 0.0, -0.4) if want[2] < 0.65 else (0.0, 0.0, 0.0)
            fwd, left = _body_frame(sim, want[0], want[1])
            d = (fwd - h.rel[0], left - h.rel[1], want[2] - h.rel[2])
            gap = (h.world[0] - point[0], h.world[1] - point[1],
                   h.world[2] - point[2])
            close = (gap[0] * gap[0] + gap[1] * gap[1]
                     + gap[2] * gap[2]) ** 0.5 < 0.42
            if close and grasp:
                yield _hand((0.0, 0.0, 0.0), True)
                if h.grasp is not None and (want_target is None
                                            or h.grasp == want_target):
                    return
                if h.anchor is not None:
                    # Caught bare terrain instead of the target; let go
                    # and keep reaching.
                    yield _hand((0.0, 0.0, 0.0), False)
            elif close:
                return
            else:
                # Grasp while closing in: ground-level targets sit right
                # at the edge of the arm's sphere, where the hand can
                # touch them without ever satisfying the close test.
                near = (gap[0] * gap[0] + gap[1] * gap[1]
                        + gap[2] * gap[2]) ** 0.5 < 0.75
                yield _hand(tuple(_clamp(v, 0.5) for v in d),
                            grasp and near, head_delta=duck)
                if grasp and h.grasp is not None and \
                        (want_target is None or h.grasp == want_target):
                    return
                if h.anchor is not None:
                    yield _hand((0.0, 0.0, 0.0), False)

    def raise_to_head(self, frames: int = 8):
        sim = self.sim
        for _ in range(frames):
            h = sim.agent.hands[1]
            tgt = (0.25, 0.0, 1.5)
            d = tuple(_clamp(tgt[i] - h.rel[i], 0.5) for i in range(3))
            yield _hand(d, True)

    def grab(self, pose_fn, approach: float = 0.8):
        pose = pose_fn() if callable(pose_fn) else pose_fn
        yield from self.navigate(pose, stop=approach)
        yield from self.reach_hand(pose_fn)

    def eat_held(self):
        # Stand back up first in case the grab required crouching; a
        # crouched head sits too low to meet the raised hand.
        yield _hand((0.0, 0.0, 0.0), True, head_delta=(0.0, 0.0, 0.5))
        yield _hand((0.0, 0.0, 0.0), True, head_delta=(0.0, 0.0, 0.5))
        yield from self.raise_to_head()
        for _ in range(4):
            yield _hand((0.0, 0.0, 0.0), True)

    def drop(self):
        yield _hand((0.0, 0.0, 0.0), False)

    def throw_at(self, pose_fn, vel_fn=None, speed: "float | None" = None):
        """Hurl the held object: wind back, fast frames, release.

        Aims a fixed-speed ballistic shot from the shoulder, leading a
        moving target and lifting to offset gravity drop in flight.
        """
        sim = self.sim
        a = sim.agent
        h = a.hands[1]

        def solve():
            tgt = pose_fn() if callable(pose_fn) else pose_fn
            if tgt is None:
                return None
            vel = vel_fn() if vel_fn is not None else (0.0, 0.0, 0.0)
            org = (a.position[0], a.position[1], a.position[2] + 1.4)
            g = 10.0
            aim = tgt
            t = 0.5
            for _ in range(4):
                # Lead the target, then pick the high-arc launch angle
                # that lands exactly on it; the lob clears rims and
                # banks that a flat shot would clip.
                aim = (tgt[0] + vel[0] * t, tgt[1] + vel[1] * t,
                       tgt[2] + vel[2] * t)
                dh = max(det_hypot(aim[0] - org[0], aim[1] - org[1]),
                         1e-6)
                dz = aim[2] - org[2]
                # Slowest speed that can reach (dh, dz), padded so the
                # angle solve keeps a real discriminant.
                need = g * (dz + (dz * dz + dh * dh) ** 0.5)
                s = speed if speed is not None \
                    else min(12.0, max(4.0, 1.2 * max(need, 1.0) ** 0.5))
                disc = s ** 4 - g * (g * dh * dh + 2.0 * dz * s * s)
                if disc < 0.0:
                    disc = 0.0
                # High arc clears rims on the way to level or raised
                # targets; a target well below (over a ledge) needs the
                # low arc, or the lob lands back at the thrower's feet.
                steep_down = dz < -1.5 and dh < 2.0 * -dz
                root = disc ** 0.5 if steep_down else -disc ** 0.5
                tan_th = (s * s - root) / (g * dh)
                cos_th = 1.0 / (1.0 + tan_th * tan_th) ** 0.5
                t = dh / max(s * cos_th, 1e-6)
            ux = (aim[0] - org[0]) / dh
            uy = (aim[1] - org[1]) / dh
            want = (ux * cos_th, uy * cos_th, tan_th * cos_th)
            return s, want

        first = pose_fn() if callable(pose_fn) else pose_fn
        if first is None:
            return
        yield from self.face(first, hold=True)
        sol = solve()
        if sol is None:
            return
        s, dirw = sol
        # Wind the hand to the rim of its sphere opposite the shot so
        # the launch frames have room to accelerate.
        bx, by = _body_frame(sim, dirw[0], dirw[1])
        back = (-0.62 * bx, -0.62 * by, 1.4 - 0.62 * dirw[2])
        for _ in range(5):
            d = tuple(_clamp(back[i] - h.rel[i], 0.45) for i in range(3))
            if max(abs(v) for v in d) < 0.05:
                break
            yield _hand(d, True)
        sol = solve()
        if sol is not None:
            s, dirw = sol
        bx, by = _body_frame(sim, dirw[0], dirw[1])
        step = s * sim.params.dt / sim.params.throw_gain
        for k in range(3):
            yield _hand((bx * step, by * step, dirw[2] * step), k < 2)

    def swing_at(self, pose_fn, swings: int = 16):
        """Melee: whip the held tool back and forth through the target.

        Always leaves the agent standing, whichever way the swing
        sequence ends.
        """
        yield from self._swing_at_raw(pose_fn, swings)
        for _ in range(3):
            if self.sim.agent.crouch >= -1e-9:
                return
            keep = self.sim.agent.hands[1].grasp is not None
            yield _hand((0.0, 0.0, 0.0), keep,
                        head_delta=(0.0, 0.0, 0.5))

    def _swing_at_raw(self, pose_fn, swings: int):
        sim = self.sim
        for _ in range(swings):
            h = sim.agent.hands[1]
            if h.grasp is None or h.grasp[0] != "item":
                # Bare hands strike nothing, and keeping the grasp flag
                # up would only anchor the hand to terrain.
                return
            pose = pose_fn()
            if pose is None:
                return
            if _dist_xy(sim, pose) > 1.1:
                # Short pursuit bursts: the target moves, and its own
                # body can block the exact point we aimed at, so chase
                # in small re-aimed steps rather than one long goto.
                yield from self.goto(pose, stop=0.55, timeout=8,
                                     hold=True)
                pose = pose_fn()
                if pose is None:
                    return
                if _dist_xy(sim, pose) > 1.1:
                    continue
            a = sim.agent
            want = (pose[0] - a.position[0], pose[1] - a.position[1],
                    max(-1.2, pose[2] - a.position[2]))
            duck = -0.4 if want[2] < -0.2 else 0.4
            fwd, left = _body_frame(sim, want[0], want[1])
            yield _hand((-0.45, 0.0, 0.2), True,
                        head_rot=(0.0, _clamp(_yaw_err(sim, pose), 0.3),
                                  0.0),
                        head_delta=(0.0, 0.0, duck))
            h = sim.agent.hands[1]
            for _ in range(2):
                yield _hand((_clamp(fwd - h.rel[0], 0.5),
                             _clamp(left - h.rel[1], 0.5),
                             _clamp(want[2] - h.rel[2], 0.5)), True,
                            head_delta=(0.0, 0.0, duck))
        for _ in range(3):
            if sim.agent.crouch >= -1e-9:
                return
            keep = sim.agent.hands[1].grasp is not None
            yield _hand((0.0, 0.0, 0.0), keep,
                        head_delta=(0.0, 0.0, 0.5))

    def open_door(self, door_idx: int):
        sim = self.sim
        dp = sim._door_placements[door_idx]
        door = sim.doors[door_idx]
        gx, gy = dp.position
        for attempt in range(2):
            if door.passable:
                break
            # Stand squarely in front of the leaf on this side of the
            # wall; reaching from a diagonal puts the hand against
            # blank wall instead of the handle.
            ap = sim.agent.position
            if dp.axis == "x":
                stand = (gx, gy + (0.9 if ap[1] > gy else -0.9))
            else:
                stand = (gx + (0.9 if ap[0] > gx else -0.9), gy)
            yield from self.goto(stand, stop=0.35, timeout=200,
                                 jump_when_stuck=False)
            yield from self.face((gx, gy))
            hand_z = sim.agent.position[2] + 1.2
            yield from self.reach_hand((gx, gy, hand_z), grasp=False,
                                       timeout=12)
            # Hold the switch (if any), then rattle the locks loose,
            # then drag the door itself open.  Wiggling the hand along
            # the wall supplies travel for bolts and the handle alike.
            for _ in range(4):
                yield _hand((0.0, 0.0, 0.0), True)
            for cycle in range(40):
                if door.passable:
                    break
                side = 0.45 if cycle % 2 == 0 else -0.45
                yield _hand((0.0, side, 0.0), True)
            yield _hand((0.0, 0.0, 0.0), False)

    def wait(self, frames: int):
        for _ in range(frames):
            yield _IDLE

    def settle(self, timeout: int = 30):
        """Idle until the body lands; reaching mid-air grabs nothing."""
        for _ in range(timeout):
            if self.sim.agent.grounded:
                return
            yield _IDLE


# ---------------------------------------------------------------------------
# Food handling
# ---------------------------------------------------------------------------

def _find_item(sim: Simulation, *kinds, exclude=()) -> "int | None":
    best, best_d = None, 1e18
    for i, item in enumerate(sim.items):
        if i in exclude:
            continue
        if item.airborne:
            continue  # still in flight; chasing it invites mid-air snags
        if item.kind in kinds and item.held_by is None:
            dd = _dist_xy(sim, item.pose)
            if dd < best_d:
                best, best_d = i, dd
    return best


def _consume_food(d: _Driver, idx: int):
    """Get one food item eaten, honoring its opening rules."""
    sim = d.sim

    def pose():
        return None if sim.eaten[idx] else sim.foods[idx].pose

    food = sim.foods[idx]
    # Tree-hung food has a trunk in the way: stop short of it. Food at
    # ground level must be approached close, or the arm cannot dip low
    # enough to touch it.
    above = food.pose[2] - sim.world.heightmap.height_at(
        food.pose[0], food.pose[1])
    off = 0.85 if above > 1.2 else 0.38
    # Approach until the food sits inside the arm's envelope.  The first
    # stand point can land on high ground next to the food (or the walk
    # can overshoot downhill), so recompute it from wherever we ended up
    # and try again; climb as a last resort when walking stalls.
    for attempt in range(3):
        a = sim.agent.position
        ang = det_atan2(a[1] - food.pose[1], a[0] - food.pose[0])
        k = off * (1.0 - 0.25 * attempt)
        stand = (food.pose[0] + k * det_cos(ang),
                 food.pose[1] + k * det_sin(ang))
        if attempt == 0:
            yield from d.navigate(stand, stop=0.35)
        else:
            yield from d.goto(stand,
                              stop=max(0.15, 0.35 - 0.1 * attempt),
                              timeout=300)
        yield from d.settle()
        a = sim.agent.position
        dx = food.pose[0] - a[0]
        dy = food.pose[1] - a[1]
        dz = food.pose[2] - (a[2] + 1.4)
        if (dx * dx + dy * dy + dz * dz) ** 0.5 <= 1.35:
            break
        if attempt == 1:
            yield from d.climb_to(stand, stop=0.6, timeout=250)
    yield from d.face(food.pose)
    if food.kind == FoodKind.AVOCADO and not food.opened:
        # Only a rock blow opens it; do that before picking it up.
        rock = _find_item(sim, ItemKind.ROCK)
        if rock is not None:
            yield from d.grab(lambda: sim.items[rock].pose)
            yield from d.swing_at(
                lambda: None if food.opened else pose(), swings=8)
            yield from d.drop()
    yield from d.reach_hand(pose, want_target=("food", idx))
    if sim.eaten[idx]:
        return
    if food.kind == FoodKind.CARROT and food.attached == Attachment.GROUND:
        for _ in range(6):
            yield _hand((0.0, 0.0, 0.5), True)
    if food.kind in (FoodKind.COCONUT, FoodKind.ORANGE) and \
            not food.opened:
        # Hoist high and drop; the impact cracks it open.
        for _ in range(4):
            yield _hand((0.0, 0.0, 0.5), True)
        yield from d.drop()
        yield from d.wait(10)
        yield from d.reach_hand(pose)
    yield from d.eat_held()
    yield from d.drop()


def _eat_corpse(d: _Driver, ai: int):
    sim = d.sim

    def pose():
        return None if sim.animal_eaten[ai] else sim.animals[ai].pose

    target = pose()
    if target is None:
        return
    yield from d.drop()
    if target[2] < sim.world.water_level + 0.2:
        # The carcass lies at or under the waterline.  Approach dry as
        # far as the planner allows, then wade the final stretch.
        yield from d.navigate(target, stop=2.5)
        yield from d.settle()
        # Creep the last stretch: a full-speed downhill stride goes
        # ballistic off the bank and sails past the carcass into deep
        # water, where no recovery is possible.
        yield from d.goto(target, stop=0.3, timeout=150, wade=True,
                          speed=0.4, jump_when_stuck=False)
    else:
        yield from d.navigate(target, stop=0.3)
    if target[2] - sim.agent.position[2] > 0.9 and \
            _dist_xy(sim, target) < 2.0:
        # The carcass sits on a ledge straight overhead; back away from
        # the face so the climb cycle can approach and scale it.
        a = sim.agent.position
        ang = det_atan2(a[1] - target[1], a[0] - target[0])
        off = (target[0] + 2.5 * det_cos(ang),
               target[1] + 2.5 * det_sin(ang))
        yield from d.goto(off, stop=0.5, timeout=80)
    if _dist_xy(sim, target) > 1.5 or \
            target[2] - sim.agent.position[2] > 0.9:
        # Walking could not get there; the carcass sits on high ground.
        yield from d.climb_to(target, stop=0.6, timeout=300)
        yield from d.goto(target, stop=0.3, timeout=150)
    yield from d.settle()
    if sim.agent.position[2] - target[2] > 0.9:
        # Standing on a lip above the carcass (it fell in a pool or off
        # a ledge); walk past it so the step down puts it in reach.
        a = sim.agent.position
        ang = det_atan2(target[1] - a[1], target[0] - a[0])
        far = (target[0] + 0.6 * det_cos(ang),
               target[1] + 0.6 * det_sin(ang))
        yield from d.goto(far, stop=0.2, timeout=80, speed=0.4,
                          jump_when_stuck=False)
        yield from d.settle()
        yield from d.goto(target, stop=0.3, timeout=60, speed=0.4)
        yield from d.settle()
    # A dropped tool lying on the carcass wins every grasp race (loose
    # items take priority over animals), so haul any such item away
    # before reaching for the carcass itself.
    for _ in range(2):
        cp = sim.animals[ai].pose
        blocker = None
        for i, item in enumerate(sim.items):
            if item.held_by is not None:
                continue
            bx = item.pose[0] - cp[0]
            by = item.pose[1] - cp[1]
            if (bx * bx + by * by) ** 0.5 < 1.0:
                blocker = i
                break
        if blocker is None:
            break
        yield from d.reach_hand(lambda b=blocker: sim.items[b].pose,
                                want_target=("item", blocker))
        if sim.agent.hands[1].grasp != ("item", blocker):
            break
        a = sim.agent.position
        ang = det_atan2(a[1] - cp[1], a[0] - cp[0])
        away = (cp[0] + 3.0 * det_cos(ang), cp[1] + 3.0 * det_sin(ang))
        yield from d.goto(away, stop=0.6, timeout=80, hold=True)
        yield from d.drop()
        yield from d.wait(2)
        yield from d.navigate(sim.animals[ai].pose, stop=0.3)
        yield from d.settle()
    yield from d.face(sim.animals[ai].pose)
    yield from d.reach_hand(pose, want_target=("animal", ai))
    yield from d.eat_held()
    yield from d.drop()


def _lob_blocked(sim: Simulation, tgt) -> bool:
    """True when the standard lob from here would clip terrain en route.

    Mirrors the throw solver's high/low arc choice, then samples the
    parabola against the heightmap (ignoring the last stretch around
    the target, where impact is the point).
    """
    a = sim.agent.position
    org = (a[0], a[1], a[2] + 1.4)
    g = 10.0
    dh = max(det_hypot(tgt[0] - org[0], tgt[1] - org[1]), 1e-6)
    dz = tgt[2] - org[2]
    need = g * (dz + (dz * dz + dh * dh) ** 0.5)
    s = min(12.0, max(4.0, 1.2 * max(need, 1.0) ** 0.5))
    disc = s ** 4 - g * (g * dh * dh + 2.0 * dz * s * s)
    if disc < 0.0:
        disc = 0.0
    steep_down = dz < -1.5 and dh < 2.0 * -dz
    root = disc ** 0.5 if steep_down else -disc ** 0.5
    tan_th = (s * s - root) / (g * dh)
    cos_th = 1.0 / (1.0 + tan_th * tan_th) ** 0.5
    vh = s * cos_th
    vz = s * tan_th * cos_th
    t_total = dh / max(vh, 1e-6)
    ux = (tgt[0] - org[0]) / dh
    uy = (tgt[1] - org[1]) / dh
    hm = sim.world.heightmap
    n = 12
    for k in range(1, n):
        t = t_total * k / n
        x = org[0] + ux * vh * t
        y = org[1] + uy * vh * t
        z = org[2] + vz * t - 0.5 * g * t * t
        if det_hypot(x - tgt[0], y - tgt[1]) < 1.2:
            break
        if z < hm.height_at(x, y) + 0.3:
            return True
    return False


def _kill_and_eat(d: _Driver, ai: int):
    """Bring down one animal with throws, finish with melee, then eat."""
    sim = d.sim
    an = sim.animals[ai]

    def alive():
        return None if an.mode == Mode.DEAD else an.pose

    water = sim.world.water_level

    def _weapon_held():
        g = sim.agent.hands[1].grasp
        return g is not None and g[0] == "item" and \
            sim.items[g[1]].kind in (ItemKind.ROCK, ItemKind.STONE,
                                     ItemKind.STICK)

    for _round in range(2):
        if an.mode == Mode.DEAD:
            break
        skip = set()
        for _ in range(6):
            if an.mode == Mode.DEAD:
                break
            if not _weapon_held():
                ri = _find_item(sim, ItemKind.ROCK, ItemKind.STONE,
                                ItemKind.STICK, exclude=skip)
                if ri is None:
                    break
                if sim.items[ri].pose[2] < water - 0.4:
                    skip.add(ri)  # landed in deep water; unrecoverable
                    continue
                yield from d.grab(lambda: sim.items[ri].pose)
                if not _weapon_held():
                    skip.add(ri)
                    continue
            # Close in with re-planned hops so a wandering target
            # cannot drag us far along a stale route.  Prey sitting in
            # water gets engaged from the bank at full throwing range
            # rather than waded after.
            in_water = an.pose[2] < water - 0.2
            engage = 8.5 if in_water else 5.0
            for _ in range(4):
                if an.mode == Mode.DEAD or \
                        _dist_xy(sim, an.pose) <= engage:
                    break
                yield from d.navigate(an.pose,
                                      stop=max(4.0, engage - 1.0),
                                      hold=True)
            if an.mode != Mode.DEAD and _lob_blocked(sim, an.pose):
                # A rise between here and the target would eat the
                # shot; move to a clear firing position first.
                yield from d.navigate(an.pose, stop=2.5, hold=True)
            yield from d.throw_at(lambda: None if an.mode == Mode.DEAD
                                  else an.pose,
                                  vel_fn=lambda: an.velocity)
            # Let the shot land before picking the next weapon, so the
            # rock still in flight is never chased or re-grabbed.
            for _ in range(30):
                if not any(it.airborne for it in sim.items):
                    break
                yield _IDLE
        if an.mode != Mode.DEAD and an.pose[2] >= water - 0.2:
            wi = _find_item(sim, ItemKind.STICK, ItemKind.ROCK,
                            ItemKind.STONE)
            if wi is not None and not _weapon_held():
                yield from d.grab(lambda: sim.items[wi].pose)
            if _weapon_held():
                if _dist_xy(sim, an.pose) > 6.0:
                    yield from d.navigate(an.pose, stop=4.0, hold=True)
                yield from d.swing_at(alive, swings=30)
            yield from d.drop()
    if an.mode == Mode.DEAD:
        for _ in range(3):
            if sim.animal_eaten[ai]:
                break
            yield from _eat_corpse(d, ai)


# ---------------------------------------------------------------------------
# Ring traversal
# ---------------------------------------------------------------------------

def _cross_rings(d: _Driver):
    """Traverse rings outermost first, through each one's passage."""
    sim = d.sim
    rings = sorted(sim.world.rings, key=lambda r: -r.inner_radius)
    for ring in rings:
        if _dist_xy(sim, ring.center) < ring.inner_radius - 0.5:
            continue  # already inside this one
        approach = ring.passage_point(ring.outer_radius + 1.5)
        inside = ring.passage_point(max(1.0, ring.inner_radius - 1.8))
        if ring.kind == RingKind.CHASM:
            rim = ring.passage_point(ring.inner_radius
                                     + ring.passage_width + 0.6)
            yield from d.goto(approach, stop=1.0)
            for _ in range(4):
                yield from d.goto(rim, stop=0.5, jump_when_stuck=False)
                yield from d.leap(inside)
                if _dist_xy(sim, ring.center) < ring.inner_radius + 0.4:
                    break
                # Fell short: climb the (climbable) outer wall back to
                # the rim and take another run at it.
                yield from d.climb_to(rim, stop=0.8, timeout=250)
            yield from d.goto(inside, stop=1.0, timeout=200)
        elif ring.passage_mode == PassageMode.CLIMB or \
                ring.kind == RingKind.CLIFF:
            yield from d.goto(ring.passage_point(ring.inner_radius + 2.2),
                              stop=1.0)
            yield from d.climb_to(inside, stop=1.0)
        else:
            yield from d.goto(approach, stop=1.0)
            yield from d.goto(inside, stop=1.0)


# ---------------------------------------------------------------------------
# Per-task plans
# ---------------------------------------------------------------------------

def _plan_foods(d: _Driver):
    """Walk to each remaining food (crossing rings) and eat it.

    The whole pass is retried while targets remain: a retrieval that
    stalled once often lands from a fresh start point.
    """
    sim = d.sim
    for _sweep in range(3):
        done = True
        for ref in list(sim.world.foods):
            if ref[0] == "food" and not sim.eaten[ref[1]]:
                done = False
                if sim.world.rings:
                    yield from _cross_rings(d)
                yield from _consume_food(d, ref[1])
            elif ref[0] == "animal" and not sim.animal_eaten[ref[1]]:
                done = False
                yield from _kill_and_eat(d, ref[1])
        if done:
            return


def _plan_descend(d: _Driver):
    # Start on the plateau; walk straight off at the passage, landing on
    # the mid platform when present, then eat on the low ground.
    sim = d.sim
    ring = sim.world.rings[0]
    food = sim.foods[0].pose
    yield from d.goto(ring.passage_point(ring.inner_radius - 1.0),
                      stop=0.7, jump_when_stuck=False, avoid_falls=False)
    yield from d.goto(food, stop=0.8, timeout=400, avoid_falls=False)
    yield from _consume_food(d, 0)


def _plan_avoid(d: _Driver):
    sim = d.sim
    for ref in sim.world.foods:
        if ref[0] != "food" or sim.eaten[ref[1]]:
            continue
        food = sim.foods[ref[1]]
        preds = [an for an in sim.animals
                 if an.spec.is_predator and an.mode != Mode.DEAD]
        if preds:
            # Swing wide: waypoint pushed away from the predators'
            # centroid, then approach the food from that side.
            cx = sum(an.pose[0] for an in preds) / len(preds)
            cy = sum(an.pose[1] for an in preds) / len(preds)
            ax, ay = sim.agent.position[0], sim.agent.position[1]
            mx, my = (ax + food.pose[0]) / 2.0, (ay + food.pose[1]) / 2.0
            away = (mx - cx, my - cy)
            n = det_hypot(away[0], away[1])
            if n > 1e-6:
                hm = sim.world.heightmap
                wp = (min(max(mx + away[0] / n * 5.0, 1.5),
                          hm.size_x - 1.5),
                      min(max(my + away[1] / n * 5.0, 1.5),
                          hm.size_y - 1.5))
                yield from d.goto(wp, stop=1.5, timeout=400)
        yield from _consume_food(d, ref[1])


def _plan_push(d: _Driver):
    sim = d.sim
    lx, ly, lz = sim.world.meta["ledge"]
    bi = _find_item(sim, ItemKind.BOULDER)
    for _ in range(50):
        item = sim.items[bi]
        # Park the boulder just off the plateau edge, facing the ledge.
        dirx, diry = lx - item.pose[0], ly - item.pose[1]
        n = max(det_hypot(dirx, diry), 1e-9)
        if n < 2.9:
            break
        behind = (item.pose[0] - dirx / n * 1.1,
                  item.pose[1] - diry / n * 1.1)
        yield from d.goto(behind, stop=0.35, timeout=150,
                          jump_when_stuck=False)
        yield from d.face(item.pose)
        for _ in range(4):
            fwd, left = _body_frame(sim, dirx / n * 0.45, diry / n * 0.45)
            yield ControlFrame(head_delta=(fwd, left, 0.0))
    item = sim.items[bi]
    back = (item.pose[0] + (item.pose[0] - lx) * 0.45,
            item.pose[1] + (item.pose[1] - ly) * 0.45)
    yield from d.goto(back, stop=0.4, timeout=120, jump_when_stuck=False)
    yield from d.leap(item.pose, dashes=1)      # onto the boulder
    yield from d.leap((lx, ly), dashes=1)       # onto the ledge
    yield from d.goto((lx, ly), stop=0.8, timeout=120)
    yield from _plan_foods(d)


def _plan_stack(d: _Driver):
    sim = d.sim
    lx, ly, lz = sim.world.meta["ledge"]
    ex, ey = sim.world.meta["ledge_edge"]
    layers = sim.world.meta.get("layers_needed", 0)
    stones = [i for i, it in enumerate(sim.items)
              if it.kind == ItemKind.STONE]
    drop = (ex + 0.5, ey)
    for si in stones[:layers]:
        yield from d.grab(lambda si=si: sim.items[si].pose)
        if sim.agent.hands[1].grasp != ("item", si):
            continue
        yield from d.goto((drop[0] + 1.2, drop[1]), stop=0.5, hold=True,
                          jump_when_stuck=False)
        yield from d.face(drop, hold=True)
        top = sim.support_height(drop[0], drop[1],
                                 sim.agent.position[2] + 3.0)
        yield from d.reach_hand(
            (drop[0], drop[1],
             min(top + 0.9, sim.agent.position[2] + 2.3)),
            grasp=False, timeout=10)
        for _ in range(2):
            yield _hand((0.3, 0.0, 0.3), True)
        yield from d.drop()
        yield from d.wait(6)
    # Up the pile (if any), then onto the ledge.
    if layers:
        yield from d.leap(drop, dashes=1)
        yield from d.wait(2)
    yield from d.leap((lx, ly), dashes=1)
    yield from d.goto((lx, ly), stop=0.8, timeout=150)
    yield from _plan_foods(d)


def _plan_bridge(d: _Driver):
    sim = d.sim
    outside, inside = sim.world.meta["crossing"]
    ring = sim.world.rings[0]
    mid = ring.passage_point(ring.inner_radius + ring.passage_width / 2.0)
    li = _find_item(sim, ItemKind.LOG)
    item = sim.items[li]
    rim = sim.world.heightmap.height_at(outside[0], outside[1])
    placed = item.pose[2] > rim - 0.5 and \
        det_hypot(item.pose[0] - mid[0], item.pose[1] - mid[1]) < 2.5
    if not placed:
        yield from d.grab(lambda: sim.items[li].pose)
        yield from d.goto(outside, stop=0.5, hold=True,
                          jump_when_stuck=False)
        yield from d.face(inside, hold=True)
        yield from d.reach_hand(
            (mid[0], mid[1], sim.agent.position[2] + 1.0), grasp=False,
            timeout=8)
        for _ in range(2):
            yield _hand((0.4, 0.0, 0.1), True)
        yield from d.drop()
        yield from d.wait(8)
    yield from d.goto(inside, stop=0.9, timeout=300,
                      jump_when_stuck=False)
    yield from d.climb_to(inside, stop=1.2)
    yield from _plan_foods(d)


def _work_doors(d: _Driver, food):
    """Open doors nearest-first until the food is reachable on foot."""
    sim = d.sim
    order = sorted(range(len(sim.doors)),
                   key=lambda di: _dist_xy(
                       sim, sim._door_placements[di].position))
    for di in order:
        gx, gy = sim._door_placements[di].position
        yield from d.open_door(di)
        if sim.doors[di].passable:
            yield from d.goto((gx, gy), stop=0.3, timeout=100,
                              jump_when_stuck=False)
        if _dist_xy(sim, food) < 3.0:
            break


def _behind_walls(sim: Simulation, pose) -> bool:
    """True when the point lies inside some building footprint."""
    for b in sim.world.buildings:
        x0, y0, x1, y1 = b.footprint
        if x0 <= pose[0] <= x1 and y0 <= pose[1] <= y1:
            return True
    return False


def _plan_open(d: _Driver):
    sim = d.sim
    yield from _work_doors(d, sim.foods[0].pose)
    yield from _plan_foods(d)


def _plan_fight(d: _Driver):
    sim = d.sim
    wi = _find_item(sim, ItemKind.STICK, ItemKind.ROCK, ItemKind.STONE)
    if wi is not None:
        yield from d.grab(lambda: sim.items[wi].pose)
    for an in sim.animals:
        if not an.spec.is_predator:
            continue
        yield from d.swing_at(
            lambda an=an: None if an.mode == Mode.DEAD else an.pose,
            swings=30)
    yield from d.drop()
    yield from _plan_foods(d)


def _plan_carry(d: _Driver):
    inner = d.sim.world.meta.get("inner_task", "throw")
    plan = {"throw": _plan_foods, "fight": _plan_fight,
            "stack": _plan_stack, "bridge": _plan_bridge}[inner]
    yield from plan(d)


def _plan_gather(d: _Driver):
    """Eat foods nearest-first; covers gather, survive, explore, find.

    The pass is retried while targets remain, so one stalled retrieval
    does not end the episode early.
    """
    sim = d.sim
    for _sweep in range(3):
        remaining = [r for r in sim.world.foods
                     if r[0] == "food" and not sim.eaten[r[1]]]
        hunted = [r for r in sim.world.foods
                  if r[0] == "animal" and not sim.animal_eaten[r[1]]]
        if not remaining and not hunted:
            return
        while remaining:
            best = min(remaining,
                       key=lambda r: 1e18 if sim.eaten[r[1]]
                       else _dist_xy(sim, sim.foods[r[1]].pose))
            remaining.remove(best)
            if sim.eaten[best[1]]:
                continue
            if sim.world.rings:
                yield from _cross_rings(d)
            if sim.doors and _behind_walls(sim, sim.foods[best[1]].pose):
                yield from _work_doors(d, sim.foods[best[1]].pose)
            yield from _consume_food(d, best[1])
        for ref in hunted:
            if not sim.animal_eaten[ref[1]]:
                yield from _kill_and_eat(d, ref[1])


_PLANS = {
    TaskKind.EAT: _plan_foods,
    TaskKind.MOVE: _plan_foods,
    TaskKind.JUMP: _plan_foods,
    TaskKind.CLIMB: _plan_foods,
    TaskKind.SCRAMBLE: _plan_foods,
    TaskKind.DESCEND: _plan_descend,
    TaskKind.THROW: _plan_foods,
    TaskKind.HUNT: _plan_foods,
    TaskKind.FIGHT: _plan_fight,
    TaskKind.AVOID: _plan_avoid,
    TaskKind.PUSH: _plan_push,
    TaskKind.STACK: _plan_stack,
    TaskKind.BRIDGE: _plan_bridge,
    TaskKind.OPEN: _plan_open,
    TaskKind.CARRY: _plan_carry,
    TaskKind.EXPLORE: _plan_gather,
    TaskKind.NAVIGATE: _plan_gather,
    TaskKind.FIND: _plan_gather,
    TaskKind.GATHER: _plan_gather,
    TaskKind.SURVIVE: _plan_gather,
}


def run_oracle(world: GeneratedWorld,
               params: "PhysicsParams | None" = None) -> dict:
    """Run the scripted policy for the world's task to completion."""
    sim = Simulation(world, params)
    d = _Driver(sim)
    for control in _PLANS[world.task](d):
        sim.step(control)
        if sim.done:
            break
    # Idle out the clock if the plan ends with food still uneaten.
    while not sim.done:
        sim.step(_IDLE)
    return {
        "success": sim.success,
        "termination": sim.termination,
        "frames": sim.frame,
        "energy": sim.ledger.energy,
        "energy_nano": sim.ledger.energy_nano,
        "foods_left": sim.foods_remaining(),
        "time_limit_frames": world.time_limit_frames,
    }
