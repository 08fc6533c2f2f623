"""Pivot calibration and shaft-axis regression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateError, InsufficientDataError
from .geometry import Line3, RigidTransform, quat_to_matrix

MIN_PIVOT_POSES = 10
# smallest singular value of the stacked [R_i, -I] system
DISPERSION_THRESHOLD = 1e-3


@dataclass(frozen=True)
class PivotResult:
    tip_offset: np.ndarray   # marker-body frame, mm
    pivot_point: np.ndarray  # tracker frame, mm
    rms_error: float
    mean_error: float
    condition: float = float("nan")

    def to_dict(self) -> dict:
        return {"tip_offset": [float(v) for v in self.tip_offset],
                "pivot_point": [float(v) for v in self.pivot_point],
                "rms_mm": float(self.rms_error),
                "mean_mm": float(self.mean_error)}

    @classmethod
    def from_dict(cls, d: dict) -> "PivotResult":
        return cls(np.asarray(d["tip_offset"], float),
                   np.asarray(d["pivot_point"], float),
                   float(d["rms_mm"]), float(d["mean_mm"]))


@dataclass(frozen=True)
class ShaftAxisFit:
    axis: Line3
    residual_rms: float

    def to_dict(self) -> dict:
        return {"point": [float(v) for v in self.axis.point],
                "direction": [float(v) for v in self.axis.direction],
                "residual_rms_mm": float(self.residual_rms)}

    @classmethod
    def from_dict(cls, d: dict) -> "ShaftAxisFit":
        return cls(Line3(d["point"], d["direction"]),
                   float(d.get("residual_rms_mm", 0.0)))


def _as_pose_arrays(observations: Sequence[RigidTransform]):
    R = np.stack([o.rotation for o in observations])
    t = np.stack([o.t for o in observations])
    return R, t


def pivot_calibrate(observations: Sequence[RigidTransform],
                    threshold: float = DISPERSION_THRESHOLD) -> PivotResult:
    """Solve R_i p_tip + t_i = pivot for (p_tip, pivot) by linear least squares.

    ``observations`` are marker-body poses in the tracker frame. Residual
    statistics are over the per-pose 3D residual norms:
    rms = sqrt(mean |r_i|^2), mean = mean |r_i|.

    Raises DegenerateError when there are fewer than ``MIN_PIVOT_POSES`` poses
    or when the rotations do not spread enough to pin the tip down.
    """
    n = len(observations)
    if n < MIN_PIVOT_POSES:
        raise DegenerateError(
            f"pivot calibration needs at least {MIN_PIVOT_POSES} poses, got {n}")
    R, t = _as_pose_arrays(observations)
    A = np.concatenate([R, np.broadcast_to(-np.eye(3), R.shape)], axis=2)
    A = A.reshape(3 * n, 6)
    b = -t.reshape(3 * n)

    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if sv[-1] <= threshold:
        raise DegenerateError(
            f"pivot poses lack rotational spread (smallest singular value "
            f"{sv[-1]:.3g}, condition number {cond:.3g})", condition=cond)

    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    tip, pivot = x[:3], x[3:]
    resid = np.einsum("nij,j->ni", R, tip) + t - pivot
    norms = np.linalg.norm(resid, axis=1)
    return PivotResult(tip, pivot, float(np.sqrt(np.mean(norms ** 2))),
                       float(np.mean(norms)), cond)


def shaft_axis_fit(tip_offsets) -> ShaftAxisFit:
    """Total-least-squares line through tip offsets from an extended wire."""
    P = np.asarray(tip_offsets, dtype=float)
    if P.ndim != 2 or P.shape[1] != 3 or len(P) < 3:
        raise InsufficientDataError("shaft fit needs at least 3 points")
    c = P.mean(axis=0)
    X = P - c
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s[0] < 1e-9:
        raise InsufficientDataError("shaft fit points are coincident")
    d = Vt[0]
    # deterministic sign: point from the first sample toward the last
    if (P[-1] - P[0]) @ d < 0:
        d = -d
    axis = Line3(c, d)
    resid = axis.distance_to(P)
    return ShaftAxisFit(axis, float(np.sqrt(np.mean(resid ** 2))))


def synthetic_pivot_poses(tip_offset, pivot_point, n, rng, noise_mm=0.0,
                          max_tilt_deg=30.0):
    """Poses of a marker body pivoting its tip about ``pivot_point``.

    ``noise_mm`` is the 3D RMS magnitude of isotropic translation noise
    (per-axis std ``noise_mm / sqrt(3)``).
    """
    tip = np.asarray(tip_offset, float)
    pivot = np.asarray(pivot_point, float)
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    half = 0.5 * np.radians(rng.uniform(0.0, max_tilt_deg, size=n))
    q = np.column_stack([np.cos(half), np.sin(half)[:, None] * axis])
    noise = rng.normal(scale=noise_mm / np.sqrt(3.0), size=(n, 3))
    out = []
    for qi, ei in zip(q, noise):
        R = quat_to_matrix(qi)
        out.append(RigidTransform(qi, pivot - R @ tip + ei))
    return out


def extended_wire_tips(base, direction, increments_mm=10.0, count=6):
    """Tip offsets of a wire extended in equal increments (default 6 x 1 cm)."""
    base = np.asarray(base, float)
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    return np.array([base + (i + 1) * increments_mm * d for i in range(count)])
