"""Synthetic rooms and box-built pointing avatars for tests and experiments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gesture_imputer.scene import (
    AvatarModel,
    PointCloud,
    SceneObject,
    save_avatar,
    write_ply,
    write_segmentation,
)

FURNITURE_LABELS = ("table", "chair", "cabinet", "sofa", "desk", "bookshelf")

SHOULDER_Z = 1.42
SHOULDER_HALF_WIDTH = 0.22
ARM_LENGTH = 0.62


def _grid(a0, a1, spacing):
    n = max(1, int(math.ceil((a1 - a0) / spacing)))
    return np.linspace(a0, a1, n + 1)


def box_surface(lo, hi, spacing: float) -> np.ndarray:
    """Points on the six faces of an axis-aligned box, no farther apart than ``spacing``."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    axes = [_grid(lo[a], hi[a], spacing) for a in range(3)]
    faces = []
    for a in range(3):
        b, c = [x for x in range(3) if x != a]
        gb, gc = np.meshgrid(axes[b], axes[c], indexing="ij")
        for val in (lo[a], hi[a]):
            face = np.empty((gb.size, 3))
            face[:, a] = val
            face[:, b] = gb.ravel()
            face[:, c] = gc.ravel()
            faces.append(face)
    return np.unique(np.concatenate(faces), axis=0)


def plane(lo, hi, spacing: float) -> np.ndarray:
    """Axis-aligned rectangle: exactly one of lo/hi components must be equal."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    axes = [np.array([lo[a]]) if lo[a] == hi[a] else _grid(lo[a], hi[a], spacing) for a in range(3)]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([x.ravel() for x in g], axis=1)


def tube(start, direction, length: float, radius: float, spacing: float) -> np.ndarray:
    start = np.asarray(start, float)
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    helper = np.array([0.0, 0.0, 1.0]) if abs(direction[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(direction, helper)
    u /= np.linalg.norm(u)
    w = np.cross(direction, u)
    n_ring = max(6, int(math.ceil(2 * math.pi * radius / spacing)))
    ang = np.linspace(0, 2 * math.pi, n_ring, endpoint=False)
    ts = _grid(0.0, length, spacing)
    ring = radius * (np.cos(ang)[:, None] * u + np.sin(ang)[:, None] * w)
    pts = start + ts[:, None, None] * direction + ring[None, :, :]
    axis_pts = start + ts[:, None] * direction
    return np.concatenate([pts.reshape(-1, 3), axis_pts])


def make_avatar(avatar_id: str, hand: str = "right", elevation_deg: float = 0.0,
                gender: str = "female", spacing: float = 0.02, seed: int = 0) -> AvatarModel:
    """Blocky human facing local +x with the gesturing arm raised ``elevation_deg`` above horizontal."""
    rng = np.random.default_rng(seed)
    parts = [
        box_surface((-0.08, 0.02, 0.0), (0.08, 0.16, 0.85), spacing),
        box_surface((-0.08, -0.16, 0.0), (0.08, -0.02, 0.85), spacing),
        box_surface((-0.12, -0.18, 0.85), (0.12, 0.18, 1.45), spacing),
        box_surface((-0.1, -0.09, 1.5), (0.1, 0.09, 1.75), spacing),
    ]
    shoulders = {
        "left": np.array([0.0, SHOULDER_HALF_WIDTH, SHOULDER_Z]),
        "right": np.array([0.0, -SHOULDER_HALF_WIDTH, SHOULDER_Z]),
    }
    el = math.radians(elevation_deg)
    tips = {}
    for side, sh in shoulders.items():
        if side == hand:
            direction = np.array([math.cos(el), 0.0, math.sin(el)])
        else:
            direction = np.array([0.0, 0.0, -1.0])
        tips[side] = sh + ARM_LENGTH * direction
        parts.append(tube(sh, direction, ARM_LENGTH, 0.035, spacing))
    pts = np.concatenate(parts)
    skin = rng.integers(90, 230, size=3)
    cloth = rng.integers(20, 200, size=3)
    colors = np.where((pts[:, 2] > 1.5)[:, None], skin, cloth).astype(np.uint8)
    cloud = PointCloud(pts, colors)
    keypoints = {
        "left_shoulder": shoulders["left"],
        "right_shoulder": shoulders["right"],
        "left_fingertip": tips["left"],
        "right_fingertip": tips["right"],
        "foot": np.array([0.0, 0.09, float(cloud.points[:, 2].min())]),
    }
    return AvatarModel(avatar_id, cloud, keypoints, hand, float(elevation_deg), gender)


def make_library(elevations=(-45, -30, -15, 0, 15, 30), hands=("right", "left"),
                 spacing: float = 0.02) -> list:
    lib = []
    for h_i, hand in enumerate(hands):
        for e_i, el in enumerate(elevations):
            gender = "female" if (h_i + e_i) % 2 == 0 else "male"
            lib.append(make_avatar(f"{hand}_{el:+d}", hand, el, gender, spacing, seed=len(lib)))
    return lib


@dataclass
class SyntheticRoom:
    scene_id: str
    cloud: PointCloud
    objects: list
    floor_indices: np.ndarray
    target_id: int
    size: tuple


def make_room(scene_id: str, rng: np.random.Generator, size=(6.0, 5.0, 3.0),
              n_furniture: int = 4, spacing: float = 0.02) -> SyntheticRoom:
    """Floor, four walls and non-overlapping box furniture; the first box is the target."""
    lx, ly, lz = size
    chunks = [
        ("floor", plane((0, 0, 0), (lx, ly, 0), spacing)),
        ("wall", plane((0, 0, 0), (0, ly, lz), spacing)),
        ("wall", plane((lx, 0, 0), (lx, ly, lz), spacing)),
        ("wall", plane((0, 0, 0), (lx, 0, lz), spacing)),
        ("wall", plane((0, ly, 0), (lx, ly, lz), spacing)),
    ]
    placed = []
    tries = 0
    while len(placed) < n_furniture and tries < 500:
        tries += 1
        w, d = rng.uniform(0.4, 1.1, size=2)
        h = rng.uniform(0.4, 1.0)
        x0 = rng.uniform(0.4, lx - 0.4 - w)
        y0 = rng.uniform(0.4, ly - 0.4 - d)
        lo, hi = np.array([x0, y0, 0.0]), np.array([x0 + w, y0 + d, h])
        if any(np.all(lo[:2] < q_hi[:2] + 0.5) and np.all(q_lo[:2] < hi[:2] + 0.5)
               for q_lo, q_hi in placed):
            continue
        placed.append((lo, hi))
    for n, (lo, hi) in enumerate(placed):
        chunks.append((FURNITURE_LABELS[n % len(FURNITURE_LABELS)], box_surface(lo, hi, spacing)))

    palette = {"floor": (120, 100, 80), "wall": (200, 200, 190)}
    pts, cols, objects = [], [], []
    offset = 0
    for oid, (label, chunk) in enumerate(chunks):
        color = palette.get(label) or tuple(int(v) for v in rng.integers(30, 230, size=3))
        pts.append(chunk)
        cols.append(np.tile(np.array(color, np.uint8), (len(chunk), 1)))
        objects.append(SceneObject(oid, label, np.arange(offset, offset + len(chunk))))
        offset += len(chunk)
    inst = np.concatenate([np.full(len(c), o.object_id) for c, o in zip(pts, objects)])
    names = sorted({o.semantic_name for o in objects})
    sem = np.concatenate([np.full(len(c), names.index(o.semantic_name)) for c, o in zip(pts, objects)])
    cloud = PointCloud(np.concatenate(pts), np.concatenate(cols), None, inst, sem)
    target = 5 if len(objects) > 5 else 0
    return SyntheticRoom(scene_id, cloud, objects, objects[0].point_indices, target, tuple(size))


def write_dataset(out_dir, n_rooms: int = 3, seed: int = 0, size=(5.0, 4.0, 2.6),
                  spacing: float = 0.02, n_furniture: int = 3) -> dict:
    """Write scenes/, avatars/ and a run config under ``out_dir``; returns the config dict."""
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    (out / "avatars").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    targets = []
    for n in range(n_rooms):
        room = make_room(f"room{n:03d}", rng, size, n_furniture, spacing)
        write_ply(room.cloud, out / "scenes" / f"{room.scene_id}.ply", "binary_le")
        write_segmentation(out / "scenes" / f"{room.scene_id}.seg.json", room.objects)
        targets.append([room.scene_id, room.target_id])
    for avatar in make_library():
        save_avatar(avatar, out / "avatars" / f"{avatar.avatar_id}.json")
    cfg = {
        "scenes_dir": str(out / "scenes"),
        "avatars_dir": str(out / "avatars"),
        "out_dir": str(out / "out"),
        "targets": targets,
        "seed": seed,
    }
    with open(out / "config.json", "w") as f:
        json.dump(cfg, f, indent=2)
    return cfg
