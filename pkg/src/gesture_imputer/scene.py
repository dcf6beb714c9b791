"""Point-cloud scenes, avatars, and their PLY / JSON carriers."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from gesture_imputer.errors import FormatError, MissingFloorWarning

KEYPOINT_NAMES = (
    "left_shoulder",
    "right_shoulder",
    "left_fingertip",
    "right_fingertip",
    "foot",
)

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Colored points with per-point instance / semantic labels.

    Coordinates are stored as float32 (the PLY storage type) so that a binary
    write/read cycle is lossless. Unlabeled points carry instance label -1.
    """

    points: np.ndarray
    colors: np.ndarray | None = None
    normals: np.ndarray | None = None
    instance_label: np.ndarray | None = None
    semantic_label: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float32).reshape(-1, 3)
        n = len(pts)
        cols = (np.zeros((n, 3), np.uint8) if self.colors is None
                else np.array(self.colors, dtype=np.uint8).reshape(-1, 3))
        inst = (np.full(n, -1, np.int32) if self.instance_label is None
                else np.array(self.instance_label, dtype=np.int32).reshape(-1))
        sem = (np.full(n, -1, np.int32) if self.semantic_label is None
               else np.array(self.semantic_label, dtype=np.int32).reshape(-1))
        nrm = None
        if self.normals is not None:
            nrm = np.array(self.normals, dtype=np.float32).reshape(-1, 3)
            if len(nrm) != n:
                raise ValueError("normals length differs from points")
            if n and np.abs(np.linalg.norm(nrm.astype(np.float64), axis=1) - 1.0).max() > 1e-3:
                raise ValueError("normals must be unit vectors")
        if not (len(cols) == len(inst) == len(sem) == n):
            raise ValueError("parallel arrays must have identical length")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "colors", _frozen(cols))
        object.__setattr__(self, "normals", None if nrm is None else _frozen(nrm))
        object.__setattr__(self, "instance_label", _frozen(inst))
        object.__setattr__(self, "semantic_label", _frozen(sem))

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        if (self.normals is None) != (other.normals is None):
            return False
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.colors, other.colors)
            and np.array_equal(self.instance_label, other.instance_label)
            and np.array_equal(self.semantic_label, other.semantic_label)
            and (self.normals is None or np.array_equal(self.normals, other.normals))
        )

    __hash__ = None

    def subset(self, keep: np.ndarray) -> "PointCloud":
        return PointCloud(
            self.points[keep],
            self.colors[keep],
            None if self.normals is None else self.normals[keep],
            self.instance_label[keep],
            self.semantic_label[keep],
        )


@dataclass(frozen=True, eq=False)
class SceneObject:
    object_id: int
    semantic_name: str
    point_indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.point_indices, dtype=np.int64).reshape(-1)
        if len(idx) == 0:
            raise ValueError(f"object {self.object_id} has no points")
        if idx.min() < 0:
            raise ValueError(f"object {self.object_id} has negative point indices")
        object.__setattr__(self, "point_indices", _frozen(idx))

    def check(self, cloud: PointCloud) -> None:
        if self.point_indices.max() >= len(cloud):
            raise FormatError(
                f"object {self.object_id}: point index {self.point_indices.max()} "
                f"out of range for cloud of {len(cloud)} points"
            )


@dataclass(frozen=True)
class BoundingBox3D:
    min_corner: tuple
    max_corner: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.min_corner)
        hi = tuple(float(v) for v in self.max_corner)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("box corners must be 3-vectors")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"min_corner {lo} exceeds max_corner {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "BoundingBox3D":
        values = list(values)
        if len(values) != 6:
            raise FormatError(f"expected 6 box values, got {len(values)}")
        return cls(values[:3], values[3:])

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.min_corner) + np.asarray(self.max_corner)) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.max_corner) - np.asarray(self.min_corner)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=1)


@dataclass(frozen=True, eq=False)
class AvatarModel:
    """A pre-posed human point set with annotated keypoints (local frame, +Z up)."""

    avatar_id: str
    cloud: PointCloud
    keypoints: Mapping[str, np.ndarray]
    gesturing_hand: str
    arm_elevation_deg: float
    gender_tag: str = ""

    def __post_init__(self):
        if self.gesturing_hand not in ("left", "right"):
            raise ValueError(f"gesturing_hand must be left|right, got {self.gesturing_hand!r}")
        missing = [k for k in KEYPOINT_NAMES if k not in self.keypoints]
        if missing:
            raise ValueError(f"avatar {self.avatar_id}: missing keypoints {missing}")
        kps = {k: _frozen(np.array(self.keypoints[k], dtype=np.float64).reshape(3))
               for k in KEYPOINT_NAMES}
        object.__setattr__(self, "keypoints", kps)
        if len(self.cloud) == 0:
            return
        zmin = float(self.cloud.points[:, 2].min())
        if abs(kps["foot"][2] - zmin) > 1e-6:
            raise ValueError(
                f"avatar {self.avatar_id}: foot z {kps['foot'][2]} is not the cloud minimum {zmin}"
            )
        if np.array_equal(self.shoulder, self.fingertip):
            raise ValueError(f"avatar {self.avatar_id}: gesturing fingertip equals shoulder")

    @property
    def shoulder(self) -> np.ndarray:
        return self.keypoints[f"{self.gesturing_hand}_shoulder"]

    @property
    def fingertip(self) -> np.ndarray:
        return self.keypoints[f"{self.gesturing_hand}_fingertip"]


@dataclass(frozen=True)
class YawTransform:
    """p -> Rz(yaw) p + translation. Never tilts or scales."""

    yaw_deg: float = 0.0
    translation: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "yaw_deg", float(self.yaw_deg))
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))

    @classmethod
    def about(cls, pivot, yaw_deg: float, shift=(0.0, 0.0, 0.0)) -> "YawTransform":
        """Rotation about the vertical line through ``pivot``, then ``shift``."""
        rot = _rot_z(yaw_deg)
        pivot = np.asarray(pivot, dtype=np.float64)
        t = pivot - rot @ pivot + np.asarray(shift, dtype=np.float64)
        return cls(yaw_deg, tuple(t))

    @property
    def rotation(self) -> np.ndarray:
        return _rot_z(self.yaw_deg)

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.rotation.T + np.asarray(self.translation)

    def rotate(self, vecs) -> np.ndarray:
        return np.asarray(vecs, dtype=np.float64) @ self.rotation.T


def _rot_z(yaw_deg: float) -> np.ndarray:
    a = math.radians(yaw_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# --------------------------------------------------------------------- PLY


def _parse_header(f):
    first = f.readline()
    if first.strip() != b"ply":
        raise FormatError("not a PLY file (missing 'ply' magic)")
    fmt = None
    elements = []  # (name, count, [(prop, dtype or ('list', cnt_t, item_t))])
    while True:
        raw = f.readline()
        if not raw:
            raise FormatError("PLY header has no end_header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tok = line.split()
        if tok[0] == "end_header":
            break
        if tok[0] == "format":
            if len(tok) < 2:
                raise FormatError("bad format line")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise FormatError(f"bad element line: {line!r}")
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise FormatError("property before any element")
            if tok[1] == "list":
                if len(tok) != 5 or tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise FormatError(f"bad list property: {line!r}")
                elements[-1][2].append((tok[4], ("list", _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]])))
            else:
                if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                    raise FormatError(f"bad property line: {line!r}")
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
        else:
            raise FormatError(f"unknown header line: {line!r}")
    if fmt not in ("ascii", "binary_little_endian"):
        raise FormatError(f"unsupported PLY format {fmt!r}")
    return fmt, elements


def read_ply(path) -> PointCloud:
    """Read the ``vertex`` element of an ascii or binary little-endian PLY."""
    with open(path, "rb") as f:
        fmt, elements = _parse_header(f)
        body = f.read()
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise FormatError("PLY has no vertex element")
    if names.index("vertex") != 0:
        raise FormatError("vertex must be the first PLY element")
    _, count, props = elements[0]
    if any(isinstance(t, tuple) for _, t in props):
        raise FormatError("list properties on vertex are not supported")
    pnames = [p for p, _ in props]
    for req in ("x", "y", "z"):
        if req not in pnames:
            raise FormatError(f"vertex lacks property {req!r}")

    if fmt == "ascii":
        tokens = body.split()
        need = count * len(props)
        if len(tokens) < need:
            raise FormatError(f"truncated ascii body: {len(tokens)} of {need} values")
        table = np.array(tokens[:need]).reshape(count, len(props))
        try:
            cols = {p: table[:, i].astype(np.float64).astype(t) for i, (p, t) in enumerate(props)}
        except ValueError as exc:
            raise FormatError(f"bad numeric token in ascii body: {exc}") from None
    else:
        dt = np.dtype([(p, "<" + t) for p, t in props])
        if len(body) < count * dt.itemsize:
            raise FormatError(
                f"truncated binary body: {len(body)} bytes, need {count * dt.itemsize}"
            )
        rec = np.frombuffer(body, dtype=dt, count=count)
        cols = {p: rec[p] for p in pnames}

    pts = np.stack([cols["x"], cols["y"], cols["z"]], axis=1).astype(np.float32)
    colors = None
    if all(c in cols for c in ("red", "green", "blue")):
        colors = np.stack([cols["red"], cols["green"], cols["blue"]], axis=1).astype(np.uint8)
    normals = None
    if all(c in cols for c in ("nx", "ny", "nz")):
        normals = np.stack([cols["nx"], cols["ny"], cols["nz"]], axis=1).astype(np.float32)
    try:
        return PointCloud(pts, colors, normals)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_ply(cloud: PointCloud, path, encoding: str = "binary_le") -> None:
    """Write x,y,z / red,green,blue / optional normals.

    ``ascii`` stores coordinates with 6 decimals; ``binary_le`` is bit exact.
    Raises OSError when the path cannot be written.
    """
    if encoding not in ("ascii", "binary_le"):
        raise ValueError(f"encoding must be ascii|binary_le, got {encoding!r}")
    fmt = "ascii" if encoding == "ascii" else "binary_little_endian"
    has_n = cloud.normals is not None
    header = [
        "ply",
        f"format {fmt} 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if has_n:
        header += ["property float nx", "property float ny", "property float nz"]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    if encoding == "binary_le":
        fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                  ("red", "u1"), ("green", "u1"), ("blue", "u1")]
        if has_n:
            fields += [("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4")]
        rec = np.empty(len(cloud), dtype=np.dtype(fields))
        rec["x"], rec["y"], rec["z"] = cloud.points.T
        rec["red"], rec["green"], rec["blue"] = cloud.colors.T
        if has_n:
            rec["nx"], rec["ny"], rec["nz"] = cloud.normals.T
        payload = rec.tobytes()
    else:
        lines = []
        pts = cloud.points.astype(np.float64)
        for i in range(len(cloud)):
            x, y, z = pts[i]
            r, g, b = cloud.colors[i]
            s = f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b}"
            if has_n:
                nx, ny, nz = cloud.normals[i].astype(np.float64)
                s += f" {nx:.6f} {ny:.6f} {nz:.6f}"
            lines.append(s)
        payload = ("\n".join(lines) + ("\n" if lines else "")).encode("ascii")

    with open(path, "wb") as f:
        f.write(head)
        f.write(payload)


# ------------------------------------------------------ segmentation / scenes


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def load_segmentation(seg_path, n_points: int | None = None):
    """Parse the object index; returns (objects, floor_label).

    Point indices are range-checked only when ``n_points`` is given.
    """
    doc = _read_json(seg_path)
    if not isinstance(doc, dict) or not isinstance(doc.get("objects"), list):
        raise FormatError(f"{seg_path}: expected an object with an 'objects' list")
    objects = []
    for entry in doc["objects"]:
        try:
            obj = SceneObject(int(entry["id"]), str(entry["label"]), entry["point_indices"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{seg_path}: bad object entry ({exc})") from None
        if n_points is not None and obj.point_indices.max() >= n_points:
            raise FormatError(
                f"{seg_path}: object {obj.object_id} index "
                f"{obj.point_indices.max()} out of range ({n_points} points)"
            )
        objects.append(obj)
    ids = [o.object_id for o in objects]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{seg_path}: duplicate object ids")
    return objects, str(doc.get("floor_label", "floor"))


def load_scene(ply_path, seg_path, floor_label: str | None = None):
    """Load a PLY scene plus its JSON object index.

    Returns ``(cloud, objects, floor_indices)``. Semantic ids are positions in
    the sorted list of distinct object labels.
    """
    cloud = read_ply(ply_path)
    objects, file_floor = load_segmentation(seg_path, len(cloud))
    floor_label = file_floor if floor_label is None else floor_label

    names = sorted({o.semantic_name for o in objects})
    sem_id = {n: i for i, n in enumerate(names)}
    inst = np.full(len(cloud), -1, np.int32)
    sem = np.full(len(cloud), -1, np.int32)
    for obj in objects:
        if np.any(inst[obj.point_indices] != -1):
            raise FormatError(f"{seg_path}: object {obj.object_id} overlaps another object")
        inst[obj.point_indices] = obj.object_id
        sem[obj.point_indices] = sem_id[obj.semantic_name]
    cloud = PointCloud(cloud.points, cloud.colors, cloud.normals, inst, sem)

    floor_sets = [o.point_indices for o in objects if o.semantic_name == floor_label]
    if floor_sets:
        floor_indices = np.unique(np.concatenate(floor_sets))
    else:
        warnings.warn(f"{seg_path}: no object labeled {floor_label!r}", MissingFloorWarning)
        floor_indices = np.zeros(0, np.int64)
    return cloud, objects, floor_indices


def write_segmentation(path, objects: Sequence[SceneObject], floor_label: str = "floor") -> None:
    doc = {
        "objects": [
            {"id": int(o.object_id), "label": o.semantic_name,
             "point_indices": [int(i) for i in o.point_indices]}
            for o in objects
        ],
        "floor_label": floor_label,
    }
    with open(path, "w") as f:
        json.dump(doc, f, separators=(",", ":"))


def load_avatar(meta_path) -> AvatarModel:
    meta_path = Path(meta_path)
    doc = _read_json(meta_path)
    try:
        cloud = read_ply(meta_path.parent / doc["ply"])
        return AvatarModel(
            avatar_id=str(doc["avatar_id"]),
            cloud=cloud,
            keypoints={k: doc["keypoints"][k] for k in KEYPOINT_NAMES},
            gesturing_hand=doc["gesturing_hand"],
            arm_elevation_deg=float(doc["arm_elevation_deg"]),
            gender_tag=str(doc.get("gender", "")),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{meta_path}: bad avatar metadata ({exc})") from None
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{meta_path}: {exc}") from None


def save_avatar(avatar: AvatarModel, meta_path, ply_name: str | None = None) -> None:
    meta_path = Path(meta_path)
    ply_name = ply_name or f"{avatar.avatar_id}.ply"
    write_ply(avatar.cloud, meta_path.parent / ply_name, "binary_le")
    doc = {
        "avatar_id": avatar.avatar_id,
        "gender": avatar.gender_tag,
        "gesturing_hand": avatar.gesturing_hand,
        "arm_elevation_deg": avatar.arm_elevation_deg,
        "keypoints": {k: [float(v) for v in avatar.keypoints[k]] for k in KEYPOINT_NAMES},
        "ply": ply_name,
    }
    with open(meta_path, "w") as f:
        json.dump(doc, f, indent=1)


# ------------------------------------------------------------- operations


def object_bbox(cloud: PointCloud, obj: SceneObject) -> BoundingBox3D:
    obj.check(cloud)
    pts = cloud.points[obj.point_indices].astype(np.float64)
    return BoundingBox3D(pts.min(axis=0), pts.max(axis=0))


def compose_scene(
    scene: PointCloud,
    avatar: AvatarModel,
    transform: YawTransform,
    human_semantic_label: int = 99,
) -> PointCloud:
    """Append the transformed avatar to ``scene`` under a fresh instance label.

    Normals survive only when both inputs carry them.
    """
    n_av = len(avatar.cloud)
    new_inst = int(scene.instance_label.max(initial=-1)) + 1
    av_pts = transform.apply(avatar.cloud.points).astype(np.float32)
    normals = None
    if scene.normals is not None and avatar.cloud.normals is not None:
        av_n = transform.rotate(avatar.cloud.normals)
        av_n /= np.linalg.norm(av_n, axis=1, keepdims=True)
        normals = np.concatenate([scene.normals, av_n.astype(np.float32)])
    return PointCloud(
        np.concatenate([scene.points, av_pts]),
        np.concatenate([scene.colors, avatar.cloud.colors]),
        normals,
        np.concatenate([scene.instance_label, np.full(n_av, new_inst, np.int32)]),
        np.concatenate([scene.semantic_label, np.full(n_av, human_semantic_label, np.int32)]),
    )
