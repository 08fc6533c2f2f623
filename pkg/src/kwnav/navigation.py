"""Guidance geometry: planned trajectory in world, tool axis, error indicator,
surface marker from a skin point cloud."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FrameError, InputError, InsufficientDataError, NoIntersectionError
from .geometry import (Frame, FramedTransform, Line3, compose, normalize,
                       transform_line, transform_point)

# lines within 1 degree of lying in an indicator plane have no usable crossing
MAX_PLANE_ANGLE_DEG = 89.0
HATCH_EPS = 1e-9
DEFAULT_K = 500


@dataclass(frozen=True)
class TrajectoryPlan:
    entry: np.ndarray
    exit: np.ndarray
    frame: Frame = Frame.IMAGE

    def __post_init__(self):
        e = np.asarray(self.entry, dtype=float).reshape(3)
        x = np.asarray(self.exit, dtype=float).reshape(3)
        if not np.linalg.norm(e - x) > 1.0:
            raise InputError("plan entry and exit must be more than 1 mm apart")
        object.__setattr__(self, "entry", e)
        object.__setattr__(self, "exit", x)
        object.__setattr__(self, "frame", Frame.parse(self.frame))

    @property
    def direction(self):
        """Planned axis, entry minus exit (points out of the bone)."""
        return normalize(self.entry - self.exit)

    def to_dict(self) -> dict:
        return {"entry_mm": [float(v) for v in self.entry],
                "exit_mm": [float(v) for v in self.exit],
                "frame": self.frame.value}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryPlan":
        try:
            return cls(d["entry_mm"], d["exit_mm"], d.get("frame", "I"))
        except KeyError as exc:
            raise InputError(f"plan is missing {exc}") from None

    @classmethod
    def load(cls, path) -> "TrajectoryPlan":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class IndicatorGeometry:
    entry_center: np.ndarray
    entry_radius: float
    entry_hatch: Optional[np.ndarray]
    end_center: np.ndarray
    end_radius: float
    end_hatch: Optional[np.ndarray]


@dataclass(frozen=True)
class SurfaceMarker:
    position: np.ndarray
    normal: np.ndarray
    index: int = -1


def _require(xf: FramedTransform, frm: Frame, to: Frame, name: str):
    if xf.frm != frm or xf.to != to:
        raise FrameError(f"{name} must be {frm}->{to}, got {xf.frm}->{xf.to}")


def world_trajectory(f_wh: FramedTransform, f_hp: FramedTransform,
                     f_pi: FramedTransform, plan: TrajectoryPlan):
    """Map a planned trajectory from image space into world space.

    Returns ``(entry_w, exit_w, axis)`` where ``axis`` runs through the world
    entry point with direction normalize(entry_w - exit_w).
    """
    _require(f_wh, Frame.WORLD, Frame.HMD, "f_wh")
    _require(f_hp, Frame.HMD, Frame.PATIENT, "f_hp")
    _require(f_pi, Frame.PATIENT, Frame.IMAGE, "f_pi")
    f_wi = compose(f_wh, f_hp, f_pi)
    entry_w = transform_point(f_wi, plan.entry)
    exit_w = transform_point(f_wi, plan.exit)
    return entry_w, exit_w, Line3(entry_w, entry_w - exit_w)


def tool_axis_world(f_wh: FramedTransform, f_hc: FramedTransform,
                    shaft: Line3) -> Line3:
    _require(f_wh, Frame.WORLD, Frame.HMD, "f_wh")
    _require(f_hc, Frame.HMD, Frame.CANNULA, "f_hc")
    return transform_line(compose(f_wh, f_hc), shaft)


def plane_crossing(line: Line3, anchor, normal):
    """Where ``line`` pierces the plane through ``anchor`` with unit ``normal``."""
    cos = float(line.direction @ normal)
    if abs(cos) < np.cos(np.radians(MAX_PLANE_ANGLE_DEG)):
        raise NoIntersectionError(
            f"line is within {90 - MAX_PLANE_ANGLE_DEG:g} deg of the plane")
    s = float((np.asarray(anchor) - line.point) @ normal) / cos
    return line.at(s)


def in_plane_offset(line, anchor, axis):
    """Vector from the line's crossing of the plane (anchor, axis) to anchor."""
    x = plane_crossing(line, anchor, axis)
    off = np.asarray(anchor, dtype=float) - x
    # strip round-off along the axis so the hatch is exactly in-plane
    off = off - (off @ axis) * axis
    return off


def _hatch(off):
    r = float(np.linalg.norm(off))
    return r, (off / r if r >= HATCH_EPS else None)


def error_indicator(tool: Line3, entry_w, exit_w) -> IndicatorGeometry:
    """Entry and end deviation circles for a tracked tool line.

    Each circle lives in the plane orthogonal to the planned axis through the
    planned entry (resp. exit) point. The radius is the in-plane distance from
    that anchor to where the tool line crosses the plane; the hatch is the unit
    correction direction, from the crossing toward the anchor.
    """
    entry_w = np.asarray(entry_w, dtype=float)
    exit_w = np.asarray(exit_w, dtype=float)
    axis = normalize(entry_w - exit_w)
    r_e, h_e = _hatch(in_plane_offset(tool, entry_w, axis))
    r_x, h_x = _hatch(in_plane_offset(tool, exit_w, axis))
    return IndicatorGeometry(entry_w, r_e, h_e, exit_w, r_x, h_x)


def fit_plane(points):
    """Centroid and unit normal (least singular vector) of a point set."""
    P = np.asarray(points, dtype=float)
    if len(P) < 3:
        raise InsufficientDataError("plane fit needs at least 3 points")
    c = P.mean(axis=0)
    _, s, Vt = np.linalg.svd(P - c, full_matrices=False)
    if s[1] < 1e-12:
        raise InsufficientDataError("plane fit points are collinear")
    return c, Vt[-1]


def _nearest(cloud, p, k):
    d2 = np.sum((cloud - p) ** 2, axis=1)
    k = min(k, len(cloud))
    if k == len(cloud):
        return np.arange(len(cloud))
    return np.argpartition(d2, k - 1)[:k]


def surface_marker(cloud, axis: Line3, k: int = DEFAULT_K) -> SurfaceMarker:
    """Skin insertion marker: cloud point closest to ``axis`` plus local normal.

    The normal is the least-variance direction of the ``min(k, len(cloud))``
    points nearest the marker and is oriented against ``axis.direction``.
    Ties in distance go to the lexicographically smallest point, so the result
    does not depend on cloud ordering.
    """
    P = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if len(P) == 0:
        raise InputError("empty point cloud")
    if not np.all(np.isfinite(P)):
        raise InputError("point cloud has non-finite coordinates")
    dist = axis.distance_to(P)
    order = np.lexsort((P[:, 2], P[:, 1], P[:, 0], dist))
    i = int(order[0])
    pos = P[i]
    nbr = P[_nearest(P, pos, k)]
    _, n = fit_plane(nbr)
    s = float(n @ axis.direction)
    if s > 0 or (s == 0 and n[np.argmax(np.abs(n))] < 0):
        n = -n
    return SurfaceMarker(pos.copy(), n, i)


# -- point cloud files -------------------------------------------------------

def read_point_cloud(path) -> np.ndarray:
    path = str(path)
    if path.lower().endswith(".ply"):
        return _read_ply(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        cols = [h.strip() for h in header]
        want = ["x_mm", "y_mm", "z_mm"]
        if cols[:3] != want:
            raise InputError(f"{path}: expected header {','.join(want)}")
        try:
            rows = [[float(v) for v in r[:3]] for r in reader if r]
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    return np.array(rows, dtype=float).reshape(-1, 3)


def _read_ply(path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise InputError(f"{path}: not a PLY file")
    n_vert = None
    props = []
    i = 1
    in_vertex = False
    while i < len(lines):
        tok = lines[i].split()
        i += 1
        if not tok:
            continue
        if tok[0] == "format" and tok[1] != "ascii":
            raise InputError(f"{path}: only ascii PLY is supported")
        if tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vert = int(tok[2])
            elif int(tok[2]) > 0:
                raise InputError(f"{path}: only vertex-only PLY is supported")
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            break
    if n_vert is None or not {"x", "y", "z"} <= set(props):
        raise InputError(f"{path}: PLY lacks x/y/z vertex properties")
    ix = [props.index(c) for c in "xyz"]
    try:
        data = np.array([[float(v) for v in lines[i + j].split()]
                         for j in range(n_vert)])
    except (IndexError, ValueError) as exc:
        raise InputError(f"{path}: bad vertex data ({exc})") from None
    return data[:, ix].reshape(-1, 3)


def write_point_cloud(path, points):
    P = np.asarray(points, dtype=float)
    if str(path).lower().endswith(".ply"):
        with open(path, "w") as fh:
            fh.write(f"ply\nformat ascii 1.0\nelement vertex {len(P)}\n"
                     "property float x\nproperty float y\nproperty float z\n"
                     "end_header\n")
            for p in P:
                fh.write(" ".join(repr(float(v)) for v in p) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_mm", "y_mm", "z_mm"])
        for p in P:
            w.writerow([repr(float(v)) for v in p])
