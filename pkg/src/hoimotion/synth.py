"""Synthetic walk -> reach -> grasp -> place sequences on a 21-joint skeleton.

The room has a counter along the far wall (+y). A person starts somewhere in
the room, walks to a standing spot in front of the counter, turns their head
to a target object, reaches for it with the right hand, carries it to a place
location and lets go. Every stage is driven by minimum-jerk interpolation so
trajectories are smooth; joint noise is added last.

Skeleton (z up, meters)::

    0 hips        5 l_clavicle   9 r_clavicle  13 l_hip   17 r_hip
    1 spine       6 l_shoulder  10 r_shoulder  14 l_knee  18 r_knee
    2 chest       7 l_elbow     11 r_elbow     15 l_ankle 19 r_ankle
    3 neck        8 l_wrist     12 r_wrist     16 l_toe   20 r_toe
    4 head
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import MotionSequence
from .scene import SceneObject

JOINT_NAMES = (
    "hips", "spine", "chest", "neck", "head",
    "l_clavicle", "l_shoulder", "l_elbow", "l_wrist",
    "r_clavicle", "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle", "l_toe",
    "r_hip", "r_knee", "r_ankle", "r_toe",
)
PARENTS = (-1, 0, 1, 2, 3, 2, 5, 6, 7, 2, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19)
JOINT = {name: i for i, name in enumerate(JOINT_NAMES)}
ARM_JOINTS = tuple(range(5, 13))

HIP_HEIGHT = 0.95
UPPER_ARM = 0.32
FOREARM = 0.30
THIGH = 0.43
SHIN = 0.42
REACH = UPPER_ARM + FOREARM
STRIDE = 1.3  # meters per gait cycle
MAX_LEAN = 0.15  # radians of forward torso pitch at full reach

# upper-body offsets from the hips in the body frame (forward, left, up)
_TORSO = {
    "spine": (0.0, 0.0, 0.12), "chest": (0.0, 0.0, 0.32), "neck": (0.0, 0.0, 0.52),
    "head": (0.0, 0.0, 0.66),
    "l_clavicle": (0.0, 0.05, 0.47), "r_clavicle": (0.0, -0.05, 0.47),
    "l_shoulder": (0.0, 0.18, 0.47), "r_shoulder": (0.0, -0.18, 0.47),
}


class UnreachableTargetError(ValueError):
    pass


def min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)


def box_vertices(center, size, yaw: float = 0.0) -> np.ndarray:
    """8 x 3 vertices of a box with a vertical yaw axis."""
    half = np.asarray(size, dtype=np.float64) / 2.0
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64)
    local = signs * half
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return local @ rot.T + np.asarray(center, dtype=np.float64)


def _normalize(v):
    return v / np.linalg.norm(v)


def _lerp_angle(a: float, b: float, w: float) -> float:
    d = (b - a + math.pi) % (2 * math.pi) - math.pi
    return a + d * w


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """One scene plus the action script performed in it.

    Offsets of objects on the counter are ``(dx, dy)`` from the standing
    spot's x and the counter's front face; durations are in frames.
    """

    room: tuple = (6.0, 5.0)
    start_xy: tuple = (1.0, 1.0)
    start_yaw: float = 0.0
    counter_y: float = 4.2
    counter_x: float = 3.0
    counter_size: tuple = (2.4, 0.6, 1.0)  # length along x, depth, height
    table_xy: tuple = (1.2, 3.0)
    table_size: tuple = (0.9, 0.7, 0.74)
    stand_x: float = 3.0
    stand_gap: float = 0.2
    target_offset: tuple = (0.2, 0.15)
    target_size: tuple = (0.08, 0.08, 0.12)
    place_offset: tuple = (0.0, 0.2)
    distractors: tuple = ((-0.5, 0.2), (0.7, 0.25))
    table_objects: int = 1
    walk: bool = True
    walk_speed: float = 1.0
    idle_frames: int = 10
    look_frames: int = 10
    reach_frames: int = 24
    grasp_frames: int = 6
    place_frames: int = 30
    release_frames: int = 4
    retract_frames: int = 20
    tail_frames: int = 6
    max_frames: int | None = None
    target_id: int = 1
    noise: float = 0.0
    fps: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.fps != 30.0:
            raise ValueError(f"synthetic sequences are generated at 30 Hz, got fps={self.fps}")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        w, d = self.room
        if not (0 <= self.start_xy[0] <= w and 0 <= self.start_xy[1] <= d):
            raise ValueError(f"start {self.start_xy} lies outside the room {self.room}")

    @property
    def stand_xy(self) -> np.ndarray:
        return np.array([self.stand_x, self.counter_y - self.stand_gap])

    def on_counter(self, offset, size) -> np.ndarray:
        return np.array([self.stand_x + offset[0], self.counter_y + offset[1],
                         self.counter_size[2] + size[2] / 2.0])

    @property
    def target_center(self) -> np.ndarray:
        return self.on_counter(self.target_offset, self.target_size)

    @property
    def place_center(self) -> np.ndarray:
        return self.on_counter(self.place_offset, self.target_size)


FACE_COUNTER = math.pi / 2


def _frame_axes(yaw: float):
    f = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    left = np.array([-math.sin(yaw), math.cos(yaw), 0.0])
    return f, left, np.array([0.0, 0.0, 1.0])


def _torso_point(hips, axes, offset, lean):
    f, left, up = axes
    vf, vl, vu = offset
    cf, sf = math.cos(lean), math.sin(lean)
    return hips + (vf * cf + vu * sf) * f + vl * left + (-vf * sf + vu * cf) * up


def _shoulder(root_xy, yaw, lean, side="r"):
    hips = np.array([root_xy[0], root_xy[1], HIP_HEIGHT])
    return _torso_point(hips, _frame_axes(yaw), _TORSO[f"{side}_shoulder"], lean)


def _swing_arm(shoulder, axes, angle):
    f, left, up = axes
    d1 = math.sin(angle) * f - math.cos(angle) * up
    bend = angle + 0.25
    d2 = math.sin(bend) * f - math.cos(bend) * up
    elbow = shoulder + UPPER_ARM * d1
    return elbow, elbow + FOREARM * d2


def _ik_arm(shoulder, wrist, axes, side="r"):
    """Two-link arm reaching ``wrist``; returns ``(elbow, wrist)``."""
    f, left, up = axes
    ray = wrist - shoulder
    d = float(np.linalg.norm(ray))
    if d > REACH - 1e-9:
        raise UnreachableTargetError(f"wrist target {d:.3f} m from the shoulder exceeds arm length {REACH:.2f} m")
    d = max(d, 1e-6)
    axis = ray / d
    a = (UPPER_ARM ** 2 - FOREARM ** 2 + d * d) / (2 * d)
    h = math.sqrt(max(UPPER_ARM ** 2 - a * a, 0.0))
    outward = -left if side == "r" else left
    pole = -0.8 * up + 0.45 * outward - 0.2 * f
    pole = pole - np.dot(pole, axis) * axis
    n = np.linalg.norm(pole)
    pole = pole / n if n > 1e-9 else _normalize(np.cross(axis, f))
    return shoulder + a * axis + h * pole, wrist


def skeleton_pose(root_xy, yaw: float, phase: float = 0.0, amp: float = 0.0, lean: float = 0.0,
                  r_wrist=None) -> np.ndarray:
    """Joint positions ``[21, 3]`` for one frame.

    ``phase``/``amp`` drive the gait (amp 0 = standing), ``lean`` pitches the
    torso forward and ``r_wrist`` (world position) puts the right arm in IK.
    """
    axes = _frame_axes(yaw)
    f, left, up = axes
    hips = np.array([root_xy[0], root_xy[1], HIP_HEIGHT + 0.02 * amp * math.cos(2 * phase)])
    out = np.zeros((21, 3))
    out[JOINT["hips"]] = hips
    for name, off in _TORSO.items():
        out[JOINT[name]] = _torso_point(hips, axes, off, lean)

    swing = 0.3 * amp * math.sin(phase)
    out[JOINT["l_elbow"]], out[JOINT["l_wrist"]] = _swing_arm(out[JOINT["l_shoulder"]], axes, -swing)
    if r_wrist is None:
        out[JOINT["r_elbow"]], out[JOINT["r_wrist"]] = _swing_arm(out[JOINT["r_shoulder"]], axes, swing)
    else:
        out[JOINT["r_elbow"]], out[JOINT["r_wrist"]] = _ik_arm(out[JOINT["r_shoulder"]], np.asarray(r_wrist), axes)

    for side, sign, ph in (("l", 1.0, phase), ("r", -1.0, phase + math.pi)):
        hip = hips + 0.10 * sign * left - 0.05 * up
        thigh = 0.4 * amp * math.sin(ph)
        knee_flex = 0.6 * amp * max(0.0, math.sin(ph + math.pi / 2))
        knee = hip + THIGH * (math.sin(thigh) * f - math.cos(thigh) * up)
        shin = thigh - knee_flex
        ankle = knee + SHIN * (math.sin(shin) * f - math.cos(shin) * up)
        out[JOINT[f"{side}_hip"]] = hip
        out[JOINT[f"{side}_knee"]] = knee
        out[JOINT[f"{side}_ankle"]] = ankle
        out[JOINT[f"{side}_toe"]] = ankle + 0.14 * f - 0.04 * up
    return out


def rest_wrist(root_xy, yaw: float, lean: float = 0.0) -> np.ndarray:
    return skeleton_pose(root_xy, yaw, lean=lean)[JOINT["r_wrist"]]


@dataclass
class _Track:
    root: list = field(default_factory=list)
    yaw: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    amp: list = field(default_factory=list)
    lean: list = field(default_factory=list)
    wrist: list = field(default_factory=list)  # None = swinging arm
    look: list = field(default_factory=list)  # ("dir", unit vector) or ("at", world point)
    carried: list = field(default_factory=list)  # target centroid per frame
    reach_start: int = 0  # first frame in which the arm moves toward the target

    def push(self, root, yaw, phase, amp, lean, wrist, look, carried):
        self.root.append(np.asarray(root, dtype=np.float64))
        self.yaw.append(float(yaw))
        self.phase.append(float(phase))
        self.amp.append(float(amp))
        self.lean.append(float(lean))
        self.wrist.append(None if wrist is None else np.asarray(wrist, dtype=np.float64))
        self.look.append(look if isinstance(look, tuple) else ("at", np.asarray(look, dtype=np.float64)))
        self.carried.append(np.asarray(carried, dtype=np.float64))


def _scene_objects(spec: SyntheticTaskSpec, rng: np.random.Generator):
    """Static boxes, plus dynamic boxes other than the target (fixed for the sequence)."""
    cx, cy = spec.counter_x, spec.counter_y
    L, D, H = spec.counter_size
    static = [
        SceneObject(101, "static", box_vertices((cx, cy + D / 2, H / 2), (L, D, H))),
        SceneObject(102, "static", box_vertices((*spec.table_xy, spec.table_size[2] / 2), spec.table_size)),
        SceneObject(103, "static", box_vertices((spec.room[0] - 0.3, 1.0, 0.9), (0.4, 1.2, 1.8))),
    ]
    ids = (i for i in range(1, 100) if i != spec.target_id)
    dynamic = []
    for off in spec.distractors:
        size = tuple(rng.uniform(0.06, 0.14, size=3))
        dynamic.append(SceneObject(next(ids), "dynamic", box_vertices(spec.on_counter(off, size), size)))
    for _ in range(spec.table_objects):
        size = tuple(rng.uniform(0.06, 0.14, size=3))
        tx = spec.table_xy[0] + rng.uniform(-0.3, 0.3)
        ty = spec.table_xy[1] + rng.uniform(-0.2, 0.2)
        dynamic.append(SceneObject(next(ids), "dynamic",
                                   box_vertices((tx, ty, spec.table_size[2] + size[2] / 2), size)))
    return static, dynamic


def check_reachable(spec: SyntheticTaskSpec) -> None:
    stand = spec.stand_xy
    for what, point in (("target", spec.target_center), ("place location", spec.place_center)):
        shoulder = _shoulder(stand, FACE_COUNTER, MAX_LEAN)
        d = float(np.linalg.norm(point - shoulder))
        if d > REACH - 0.01:
            raise UnreachableTargetError(
                f"{what} at {np.round(point, 3).tolist()} is {d:.3f} m from the right shoulder; "
                f"arm reach is {REACH:.2f} m"
            )


def _script(spec: SyntheticTaskSpec) -> _Track:
    tr = _Track()
    stand = spec.stand_xy
    target0, place = spec.target_center, spec.place_center
    start = np.asarray(spec.start_xy, dtype=np.float64) if spec.walk else stand
    yaw0 = spec.start_yaw if spec.walk else FACE_COUNTER

    def ahead(yaw, pitch):
        return ("dir", np.array([math.cos(yaw) * math.cos(pitch), math.sin(yaw) * math.cos(pitch), math.sin(pitch)]))

    for _ in range(spec.idle_frames):
        tr.push(start, yaw0, 0.0, 0.0, 0.0, None, ahead(yaw0, -0.15), target0)

    phase, yaw = 0.0, yaw0
    if spec.walk:
        delta = stand - start
        dist = float(np.linalg.norm(delta))
        n = max(int(math.ceil(dist / spec.walk_speed * spec.fps * 1.2)), 1)
        path_yaw = math.atan2(delta[1], delta[0]) if dist > 1e-6 else yaw0
        prev = start
        for i in range(1, n + 1):
            tau = i / n
            pos = start + delta * min_jerk(tau)
            yaw = _lerp_angle(yaw0, path_yaw, float(min_jerk(tau / 0.3)))
            yaw = _lerp_angle(yaw, FACE_COUNTER, float(min_jerk((tau - 0.7) / 0.3)))
            step = float(np.linalg.norm(pos - prev))
            phase += 2 * math.pi * step / STRIDE
            amp = min(1.0, step * spec.fps / 0.6)
            prev = pos
            tr.push(pos, yaw, phase, amp, 0.0, None, ahead(yaw, -0.2), target0)
    yaw = FACE_COUNTER

    # turn the head toward the target before moving the arm
    head0 = skeleton_pose(stand, yaw)[JOINT["head"]]
    kind, v = tr.look[-1] if tr.look else ahead(yaw, -0.2)
    look_from = v if kind == "dir" else _normalize(v - head0)
    to_target = _normalize(target0 - head0)
    for i in range(1, spec.look_frames + 1):
        w = float(min_jerk(i / spec.look_frames))
        tr.push(stand, yaw, phase, 0.0, 0.0, None, ("dir", _normalize((1 - w) * look_from + w * to_target)), target0)

    w_rest = rest_wrist(stand, yaw)
    tr.reach_start = len(tr.root)
    for i in range(1, spec.reach_frames + 1):
        s = float(min_jerk(i / spec.reach_frames))
        tr.push(stand, yaw, phase, 0.0, MAX_LEAN * s, w_rest + (target0 - w_rest) * s, target0, target0)
    for _ in range(spec.grasp_frames):
        tr.push(stand, yaw, phase, 0.0, MAX_LEAN, target0, target0, target0)
    for i in range(1, spec.place_frames + 1):
        tau = i / spec.place_frames
        s = float(min_jerk(tau))
        pos = target0 + (place - target0) * s + np.array([0.0, 0.0, 0.08 * math.sin(math.pi * tau)])
        tr.push(stand, yaw, phase, 0.0, MAX_LEAN, pos, place, pos)
    for _ in range(spec.release_frames):
        tr.push(stand, yaw, phase, 0.0, MAX_LEAN, place, place, place)
    for i in range(1, spec.retract_frames + 1):
        s = float(min_jerk(i / spec.retract_frames))
        lean = MAX_LEAN * (1 - s)
        w_goal = rest_wrist(stand, yaw, lean)
        tr.push(stand, yaw, phase, 0.0, lean, place + (w_goal - place) * s, place, place)
    for _ in range(spec.tail_frames):
        tr.push(stand, yaw, phase, 0.0, 0.0, None, place, place)
    return tr


def reach_onset(spec: SyntheticTaskSpec) -> int:
    """Index of the first frame of the reach toward the target."""
    return _script(spec).reach_start


def generate_synthetic(spec: SyntheticTaskSpec, name: str = "") -> MotionSequence:
    """Render one task script to a sequence; deterministic in ``spec.seed``."""
    check_reachable(spec)
    rng = np.random.default_rng(spec.seed)
    static, others = _scene_objects(spec, rng)
    tr = _script(spec)
    F = len(tr.root)
    if spec.max_frames is not None:
        F = min(F, spec.max_frames)

    pose = np.stack([
        skeleton_pose(tr.root[i], tr.yaw[i], tr.phase[i], tr.amp[i], tr.lean[i], tr.wrist[i]) for i in range(F)
    ])
    head_pos = pose[:, JOINT["head"]].copy()
    head_dir = np.zeros((F, 3))
    for i in range(F):
        kind, v = tr.look[i]
        head_dir[i] = v if kind == "dir" else _normalize(v - head_pos[i])
    objects = []
    for i in range(F):
        target = SceneObject(spec.target_id, "dynamic",
                             box_vertices(tr.carried[i], spec.target_size))
        objects.append(static + [target] + others)

    noise_rng = np.random.default_rng([spec.seed, 1])
    if spec.noise > 0:
        pose = pose + noise_rng.normal(0.0, spec.noise, size=pose.shape)
    return MotionSequence(pose, head_dir, head_pos, objects, np.arange(F), spec.fps, name or f"synth-{spec.seed}")


def sample_task_spec(rng: np.random.Generator, scenario: str = "walk_reach", noise: float = 0.002,
                     seed: int | None = None) -> SyntheticTaskSpec:
    """Draw a reachable random task.

    ``walk_reach`` randomizes start, standing spot and objects. ``reach``
    keeps the person fixed at the counter and varies only the objects, so
    the upcoming reach cannot be read off the body pose.
    """
    if scenario not in ("walk_reach", "reach"):
        raise ValueError(f"unknown scenario {scenario!r}")
    seed = int(rng.integers(2**31)) if seed is None else seed
    for _ in range(100):
        target = (float(rng.uniform(-0.05, 0.4)), float(rng.uniform(0.08, 0.25)))
        place = (float(rng.uniform(-0.05, 0.4)), float(rng.uniform(0.08, 0.25)))
        if abs(place[0] - target[0]) < 0.12:
            continue
        distractors = []
        for _ in range(int(rng.integers(1, 4))):
            dx = float(rng.uniform(-1.0, 1.0))
            if abs(dx - target[0]) > 0.25 and abs(dx - place[0]) > 0.2:
                distractors.append((dx, float(rng.uniform(0.1, 0.4))))
        kwargs = dict(target_offset=target, place_offset=place, distractors=tuple(distractors),
                      target_id=int(rng.integers(1, 6)), noise=noise, seed=seed)
        if scenario == "walk_reach":
            kwargs.update(
                start_xy=(float(rng.uniform(0.5, 5.5)), float(rng.uniform(0.5, 2.5))),
                start_yaw=float(rng.uniform(-math.pi, math.pi)),
                stand_x=float(rng.uniform(2.0, 4.0)),
                idle_frames=int(rng.integers(4, 12)),
                look_frames=int(rng.integers(6, 14)),
                reach_frames=int(rng.integers(20, 30)),
                place_frames=int(rng.integers(24, 36)),
            )
        else:
            kwargs.update(walk=False, idle_frames=int(rng.integers(2, 6)), look_frames=int(rng.integers(8, 12)),
                          reach_frames=24, place_frames=30)
        spec = SyntheticTaskSpec(**kwargs)
        try:
            check_reachable(spec)
        except UnreachableTargetError:
            continue
        return spec
    raise RuntimeError("could not sample a reachable task")


def sample_corpus(count: int, seed: int = 0, scenario: str = "walk_reach", noise: float = 0.002,
                  **overrides) -> list[tuple[SyntheticTaskSpec, MotionSequence]]:
    """Random task specs and their rendered sequences, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        spec = sample_task_spec(rng, scenario, noise, seed=int(rng.integers(2**31)))
        if overrides:
            spec = replace(spec, **overrides)
        out.append((spec, generate_synthetic(spec, name=f"{scenario}-{seed}-{i:04d}")))
    return out


def generate_corpus(count: int, seed: int = 0, scenario: str = "walk_reach", noise: float = 0.002,
                    **overrides) -> list[MotionSequence]:
    return [seq for _, seq in sample_corpus(count, seed, scenario, noise, **overrides)]
