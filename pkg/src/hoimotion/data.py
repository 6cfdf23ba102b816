"""Motion sequence files, frame-rate reduction and 10-in / 30-out windowing.

Text format (``.jsonl``), one JSON object per line. The first line is a
header::

    {"format": "hoimotion-seq", "version": 1, "unit": "m", "fps": 30, "n_joints": 21}

``unit`` is one of ``m``, ``cm``, ``mm`` and applies to ``pose``,
``head_pos`` and ``bbox``. Every further line is one frame::

    {"seq": "s000", "frame": 0,
     "pose": [[x, y, z], ...],            # n_joints rows
     "head_dir": [x, y, z], "head_pos": [x, y, z],
     "objects": [{"id": 3, "category": "dynamic", "bbox": [[x, y, z], ...]}]}   # 8 rows

Frames of one sequence are contiguous and their ``frame`` indices increase.
Files ending in ``.npz`` use the binary layout written by
:func:`write_sequences` instead; values are stored in meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scene import CATEGORIES, SceneObject, ViewportState, build_selected_sequence

FORMAT = "hoimotion-seq"
VERSION = 1
UNITS = {"m": 1.0, "cm": 0.01, "mm": 0.001}


class DataError(ValueError):
    pass


@dataclass
class MotionSequence:
    pose: np.ndarray  # [F, n, 3] meters
    head_dir: np.ndarray  # [F, 3], renormalized to unit length
    head_pos: np.ndarray  # [F, 3]
    objects: list[list[SceneObject]]
    frames: np.ndarray | None = None  # [F] source frame indices
    fps: float = 30.0
    name: str = ""

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=np.float64)
        self.head_pos = np.asarray(self.head_pos, dtype=np.float64)
        hd = np.asarray(self.head_dir, dtype=np.float64)
        F = self.pose.shape[0]
        if self.pose.ndim != 3 or self.pose.shape[2] != 3:
            raise DataError(f"{self.name}: pose must be [frames, joints, 3], got {self.pose.shape}")
        if hd.shape != (F, 3) or self.head_pos.shape != (F, 3) or len(self.objects) != F:
            raise DataError(f"{self.name}: head/object streams do not cover {F} frames")
        norms = np.linalg.norm(hd, axis=1)
        if np.any(norms < 1e-9):
            raise DataError(f"{self.name}: zero-length head direction at frame {int(np.argmin(norms))}")
        # leave already-unit vectors untouched so binary round trips stay exact
        norms = np.where(np.abs(norms - 1.0) > 1e-12, norms, 1.0)
        self.head_dir = hd / norms[:, None]
        if self.frames is None:
            self.frames = np.arange(F)
        self.frames = np.asarray(self.frames, dtype=np.int64)
        if np.any(np.diff(self.frames) <= 0):
            raise DataError(f"{self.name}: frame indices are not increasing")

    def __len__(self) -> int:
        return self.pose.shape[0]

    @property
    def n_joints(self) -> int:
        return self.pose.shape[1]

    def viewports(self) -> list[ViewportState]:
        return [ViewportState(p, d) for p, d in zip(self.head_pos, self.head_dir)]


# --------------------------------------------------------------------------
# files


def _parse_record(rec: dict, lineno: int, n_joints: int, scale: float):
    def arr(key, shape):
        if key not in rec:
            raise DataError(f"line {lineno}: missing field {key!r}")
        a = np.asarray(rec[key], dtype=np.float64)
        if a.shape != shape:
            if key == "pose" and a.ndim == 2 and a.shape[1] == 3:
                raise DataError(f"line {lineno}: pose has {a.shape[0]} joints, expected {n_joints}")
            raise DataError(f"line {lineno}: field {key!r} has shape {a.shape}, expected {shape}")
        if not np.isfinite(a).all():
            raise DataError(f"line {lineno}: field {key!r} has non-finite values")
        return a

    pose = arr("pose", (n_joints, 3)) * scale
    head_dir = arr("head_dir", (3,))
    head_pos = arr("head_pos", (3,)) * scale
    objects = []
    for obj in rec.get("objects", []):
        try:
            bbox = np.asarray(obj["bbox"], dtype=np.float64) * scale
            objects.append(SceneObject(obj["id"], obj["category"], bbox))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"line {lineno}: bad object: {e}") from None
    if "frame" not in rec or "seq" not in rec:
        raise DataError(f"line {lineno}: missing field 'frame' or 'seq'")
    return rec["seq"], int(rec["frame"]), pose, head_dir, head_pos, objects


def _load_text(path: Path) -> list[MotionSequence]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: line 1: bad header: {e}") from None
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise DataError(f"{path}: line 1: not a {FORMAT} v{VERSION} header")
    if "unit" not in header:
        raise DataError(f"{path}: line 1: header lacks the 'unit' field")
    if header["unit"] not in UNITS:
        raise DataError(f"{path}: line 1: unknown unit {header['unit']!r}")
    scale = UNITS[header["unit"]]
    n_joints = int(header.get("n_joints", 21))
    fps = float(header.get("fps", 30))

    groups: dict[str, list] = {}
    order = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: line {lineno}: {e}") from None
        try:
            seq, *rest = _parse_record(rec, lineno, n_joints, scale)
        except DataError as e:
            raise DataError(f"{path}: {e}") from None
        if seq not in groups:
            groups[seq] = []
            order.append(seq)
        elif order[-1] != seq:
            raise DataError(f"{path}: line {lineno}: sequence {seq!r} is not contiguous")
        groups[seq].append(rest)

    out = []
    for name in order:
        frames, poses, dirs, poss, objs = zip(*groups[name])
        try:
            out.append(MotionSequence(np.stack(poses), np.stack(dirs), np.stack(poss), list(objs),
                                      np.array(frames), fps, str(name)))
        except DataError as e:
            raise DataError(f"{path}: {e}") from None
    return out


def _objects_json(seq: MotionSequence) -> list:
    return [[{"id": o.id, "category": o.category, "bbox": o.bbox.tolist()} for o in frame]
            for frame in seq.objects]


def _write_text(path: Path, seqs: list[MotionSequence]) -> None:
    n_joints = seqs[0].n_joints if seqs else 21
    fps = seqs[0].fps if seqs else 30.0
    lines = [json.dumps({"format": FORMAT, "version": VERSION, "unit": "m", "fps": fps, "n_joints": n_joints})]
    for seq in seqs:
        if seq.n_joints != n_joints or seq.fps != fps:
            raise DataError("all sequences in one file must share joint count and frame rate")
        objs = _objects_json(seq)
        for i in range(len(seq)):
            lines.append(json.dumps({
                "seq": seq.name, "frame": int(seq.frames[i]),
                "pose": seq.pose[i].tolist(), "head_dir": seq.head_dir[i].tolist(),
                "head_pos": seq.head_pos[i].tolist(), "objects": objs[i],
            }))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_binary(path: Path, seqs: list[MotionSequence]) -> None:
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    meta = {"format": FORMAT, "version": VERSION, "unit": "m",
            "names": [s.name for s in seqs], "fps": [s.fps for s in seqs],
            "objects": [_objects_json(s) for s in seqs]}
    with open(path, "wb") as fh:
        np.savez(fh, lengths=lengths,
                 pose=np.concatenate([s.pose for s in seqs]),
                 head_dir=np.concatenate([s.head_dir for s in seqs]),
                 head_pos=np.concatenate([s.head_pos for s in seqs]),
                 frames=np.concatenate([s.frames for s in seqs]),
                 meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8))


def _load_binary(path: Path) -> list[MotionSequence]:
    try:
        z = np.load(path)
        meta = json.loads(z["meta"].tobytes().decode("utf-8"))
        lengths = z["lengths"]
        pose, hd, hp, frames = z["pose"], z["head_dir"], z["head_pos"], z["frames"]
    except Exception as e:  # zipfile / key / json errors all mean a bad file
        raise DataError(f"{path}: unreadable binary sequence file: {e}") from None
    if meta.get("format") != FORMAT or meta.get("version") != VERSION:
        raise DataError(f"{path}: not a {FORMAT} v{VERSION} file")
    out, start = [], 0
    for i, n in enumerate(lengths):
        sl = slice(start, start + int(n))
        objs = [[SceneObject(o["id"], o["category"], np.array(o["bbox"])) for o in frame]
                for frame in meta["objects"][i]]
        out.append(MotionSequence(pose[sl], hd[sl], hp[sl], objs, frames[sl], meta["fps"][i], meta["names"][i]))
        start += int(n)
    return out


def load_sequences(path) -> list[MotionSequence]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    return _load_binary(path) if path.suffix == ".npz" else _load_text(path)


def write_sequences(path, seqs: list[MotionSequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    (_write_binary if path.suffix == ".npz" else _write_text)(path, list(seqs))


# --------------------------------------------------------------------------
# resampling and windows


def downsample(seq: MotionSequence, src_hz: float, dst_hz: float) -> MotionSequence:
    """Keep every ``src_hz / dst_hz``-th frame, starting at frame 0."""
    ratio = src_hz / dst_hz
    if dst_hz <= 0 or ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise DataError(f"cannot downsample {src_hz} Hz to {dst_hz} Hz: rates are not divisible")
    step = int(round(ratio))
    return MotionSequence(seq.pose[::step], seq.head_dir[::step], seq.head_pos[::step],
                          seq.objects[::step], seq.frames[::step], dst_hz, seq.name)


@dataclass
class Window:
    pose: np.ndarray  # [3, n, t_in]
    head: np.ndarray  # [3, t_in]
    dynamic: np.ndarray  # [3, 8, k, t_in]
    static: np.ndarray  # [3, 8, k, t_in]
    target: np.ndarray  # [3, n, t_out]
    source: tuple = ()  # (sequence name, first frame)


@dataclass
class WindowBatch:
    pose: np.ndarray
    head: np.ndarray
    dynamic: np.ndarray
    static: np.ndarray
    target: np.ndarray
    sources: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.pose.shape[0]

    def take(self, idx) -> "WindowBatch":
        idx = np.asarray(idx)
        return WindowBatch(self.pose[idx], self.head[idx], self.dynamic[idx], self.static[idx],
                           self.target[idx], [self.sources[i] for i in idx] if self.sources else [])

    def with_objects(self, k: int) -> "WindowBatch":
        """Keep the ``k`` closest objects per category (selection is closest-first)."""
        have = self.dynamic.shape[-2]
        if k > have:
            raise DataError(f"windows carry {have} objects per category, {k} requested")
        if k == have:
            return self
        return WindowBatch(self.pose, self.head, self.dynamic[..., :k, :], self.static[..., :k, :],
                           self.target, self.sources)

    @property
    def t_in(self) -> int:
        return self.pose.shape[-1]

    @property
    def t_out(self) -> int:
        return self.target.shape[-1]


def make_windows(seq: MotionSequence, t_in: int = 10, t_out: int = 30, stride: int = 1,
                 objects_per_category: int = 2) -> list[Window]:
    """Overlapping windows inside one sequence; too-short sequences give none."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    F = len(seq)
    if F < t_in + t_out:
        return []
    k = objects_per_category
    pose = np.transpose(seq.pose, (2, 1, 0))  # [3, n, F]
    head = seq.head_dir.T  # [3, F]
    if k > 0:
        sel = build_selected_sequence(seq.objects, seq.viewports(), k)
        dyn, stat = sel.dynamic, sel.static
    else:
        dyn = stat = np.zeros((3, 8, 0, F))
    out = []
    for s in range(0, F - t_in - t_out + 1, stride):
        e = s + t_in
        out.append(Window(pose[:, :, s:e].copy(), head[:, s:e].copy(), dyn[..., s:e].copy(),
                          stat[..., s:e].copy(), pose[:, :, e:e + t_out].copy(), (seq.name, s)))
    return out


def stack_windows(windows: list[Window]) -> WindowBatch:
    if not windows:
        raise DataError("no windows to stack")
    return WindowBatch(
        np.stack([w.pose for w in windows]), np.stack([w.head for w in windows]),
        np.stack([w.dynamic for w in windows]), np.stack([w.static for w in windows]),
        np.stack([w.target for w in windows]), [w.source for w in windows],
    )


def windows_from_sequences(seqs, t_in: int = 10, t_out: int = 30, stride: int = 1,
                           objects_per_category: int = 2) -> WindowBatch:
    windows = []
    for seq in seqs:
        windows.extend(make_windows(seq, t_in, t_out, stride, objects_per_category))
    return stack_windows(windows)


__all__ = [
    "CATEGORIES", "DataError", "MotionSequence", "Window", "WindowBatch", "downsample",
    "load_sequences", "make_windows", "stack_windows", "windows_from_sequences", "write_sequences",
]
