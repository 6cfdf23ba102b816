"""Pick the scene objects closest to the centre of the user's view.

Objects are split into dynamic and static categories and, per frame, ranked by
the angle between the head's forward direction and the ray from the head to
the box centroid. The ``k`` best per category are kept, closest first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

CATEGORIES = ("dynamic", "static")


class CoincidentCentroidWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SceneObject:
    id: Hashable
    category: str
    bbox: np.ndarray  # (8, 3) vertices in meters

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"object {self.id!r}: category must be one of {CATEGORIES}, got {self.category!r}")
        bbox = np.asarray(self.bbox, dtype=np.float64)
        if bbox.shape != (8, 3):
            raise ValueError(f"object {self.id!r}: bbox must be 8x3, got {bbox.shape}")
        object.__setattr__(self, "bbox", bbox)

    @property
    def centroid(self) -> np.ndarray:
        return self.bbox.mean(axis=0)


@dataclass(frozen=True)
class ViewportState:
    head_pos: np.ndarray
    head_dir: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.head_dir, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError(f"head_dir must be a unit vector, norm is {np.linalg.norm(d)}")
        object.__setattr__(self, "head_dir", d)
        object.__setattr__(self, "head_pos", np.asarray(self.head_pos, dtype=np.float64))


def _as_vertices(bbox) -> np.ndarray:
    b = np.asarray(bbox, dtype=np.float64)
    if b.shape == (3, 8):
        return b.T
    if b.shape == (8, 3):
        return b
    raise ValueError(f"bbox must be 8x3 or 3x8, got {b.shape}")


def angular_distance(viewport: ViewportState, bbox) -> float:
    """Angle in radians between the view direction and the head-to-centroid ray.

    A centroid within 1e-9 m of the head gives 0 and a
    :class:`CoincidentCentroidWarning`.
    """
    centroid = _as_vertices(bbox).mean(axis=0)
    ray = centroid - viewport.head_pos
    dist = np.linalg.norm(ray)
    if dist < 1e-9:
        warnings.warn("object centroid coincides with the head position", CoincidentCentroidWarning)
        return 0.0
    cos = float(np.dot(viewport.head_dir, ray / dist))
    return math.acos(min(1.0, max(-1.0, cos)))


def select_topk(objects: Sequence[SceneObject], viewport: ViewportState, k: int = 2) -> dict[str, list]:
    """Per category, the ids of the ``k`` objects closest to the view centre.

    Ties go to the smaller id. Missing slots are ``None`` (filled with
    zero boxes downstream).
    """
    ranked: dict[str, list] = {c: [] for c in CATEGORIES}
    for obj in objects:
        ranked[obj.category].append((angular_distance(viewport, obj.bbox), obj.id))
    chosen = {}
    for cat, items in ranked.items():
        items.sort(key=lambda item: (item[0], item[1]))
        ids = [oid for _, oid in items[:k]]
        chosen[cat] = ids + [None] * (k - len(ids))
    return chosen


@dataclass
class SelectedObjects:
    dynamic: np.ndarray  # [3, 8, k, t]
    static: np.ndarray  # [3, 8, k, t]
    valid: dict[str, np.ndarray]  # category -> bool [k, t]
    log: list[dict] = field(default_factory=list)  # per frame: category -> [(id, angle)]

    @property
    def length(self) -> int:
        return self.dynamic.shape[-1]


def build_selected_sequence(frames: Sequence[Sequence[SceneObject]],
                            viewports: Sequence[ViewportState], k: int = 2) -> SelectedObjects:
    if len(frames) != len(viewports):
        raise ValueError(f"{len(frames)} object frames but {len(viewports)} viewports")
    t = len(frames)
    if t < 1:
        raise ValueError("need at least one frame")
    boxes = {c: np.zeros((3, 8, k, t)) for c in CATEGORIES}
    valid = {c: np.zeros((k, t), dtype=bool) for c in CATEGORIES}
    log = []
    for i, (objects, vp) in enumerate(zip(frames, viewports)):
        by_id = {}
        for obj in objects:
            if obj.id in by_id:
                raise ValueError(f"frame {i}: duplicate object id {obj.id!r}")
            by_id[obj.id] = obj
        chosen = select_topk(objects, vp, k)
        entry = {}
        for cat in CATEGORIES:
            entry[cat] = []
            for slot, oid in enumerate(chosen[cat]):
                if oid is None:
                    entry[cat].append((None, None))
                    continue
                box = by_id[oid].bbox
                boxes[cat][:, :, slot, i] = box.T
                valid[cat][slot, i] = True
                entry[cat].append((oid, angular_distance(vp, box)))
        log.append(entry)
    return SelectedObjects(boxes["dynamic"], boxes["static"], valid, log)
