"""Paired-point rigid registration, marker-layout pose estimation, CT registration."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (AmbiguityError, DegenerateError, FrameError, InputError,
                     TrackingFailure)
from .geometry import Frame, FramedTransform, RigidTransform, compose, invert

COLLINEAR_TOL = 1e-6
MATCH_TOL_MM = 1.5


@dataclass(frozen=True)
class RegistrationResult:
    xf: FramedTransform
    fre_rms: float
    matches: tuple = ()

    def to_dict(self) -> dict:
        d = {"transform": self.xf.to_literal(), "fre_rms_mm": float(self.fre_rms)}
        if self.matches:
            d["matches"] = [list(m) for m in self.matches]
        return d


@dataclass(frozen=True)
class MarkerLayout:
    """Named marker positions in a rigid body's own frame (mm)."""

    name: str
    names: tuple
    points: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim != 2 or P.shape[1] != 3 or len(P) < 3:
            raise InputError("a marker layout needs at least 3 points")
        if len(self.names) != len(P):
            raise InputError("layout names and points differ in length")
        if _collinear(P):
            raise DegenerateError(f"layout {self.name!r} is collinear")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "names", tuple(self.names))

    def min_distance_separation(self) -> float:
        """Smallest gap between any two distinct inter-marker distances."""
        d = np.sort(_pdist(self.points)[np.triu_indices(len(self.points), 1)])
        return float(np.min(np.diff(d))) if len(d) > 1 else float("inf")

    @classmethod
    def from_dict(cls, obj: dict) -> "MarkerLayout":
        pts = obj["points"]
        return cls(obj.get("name", ""), tuple(pts.keys()),
                   np.array([pts[k] for k in pts], dtype=float))

    def to_dict(self) -> dict:
        return {"name": self.name,
                "points": {n: [float(v) for v in p]
                           for n, p in zip(self.names, self.points)}}

    @classmethod
    def load(cls, path) -> "MarkerLayout":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _pdist(P):
    return np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)


def _collinear(P, tol=COLLINEAR_TOL) -> bool:
    X = P - P.mean(axis=0)
    s = np.linalg.svd(X, compute_uv=False)
    return s[0] < tol or s[1] <= tol * max(1.0, s[0])


def paired_point_register(model, observed, frm=Frame.TRACKER,
                          to=Frame.MACHINE) -> RegistrationResult:
    """Least-squares rigid transform taking ``model`` points onto ``observed``.

    Closed-form SVD solution (Arun/Umeyama) with a reflection guard. The
    returned transform is tagged ``frm -> to``: model points live in ``to``,
    observed points in ``frm``.
    """
    A = np.asarray(model, dtype=float)
    B = np.asarray(observed, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[1] != 3:
        raise InputError(
            f"point sets must both be (N, 3); got {A.shape} and {B.shape}")
    if len(A) < 3:
        raise InputError("paired-point registration needs at least 3 pairs")
    if _collinear(A):
        raise DegenerateError("model points are collinear")

    ca, cb = A.mean(axis=0), B.mean(axis=0)
    H = (A - ca).T @ (B - cb)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    xf = RigidTransform.from_rotation_matrix(R, t)
    resid = A @ R.T + t - B
    fre = float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))
    return RegistrationResult(FramedTransform(frm, to, xf), fre)


def _consistent_assignments(Dl, Dd, tol, min_matches):
    """All maximal injective layout->detection maps with consistent distances.

    Interpretation-tree search: each layout marker is assigned a detection or
    left unmatched, pruning any branch where a pairwise distance disagrees by
    more than ``tol``. Marker counts are tiny so the search is cheap.
    """
    n_l, n_d = len(Dl), len(Dd)
    best = []
    best_size = 0

    def extend(i, assign, used):
        nonlocal best, best_size
        size = sum(a is not None for a in assign)
        if size + (n_l - i) < max(best_size, min_matches):
            return
        if i == n_l:
            if size > best_size:
                best, best_size = [tuple(assign)], size
            elif size == best_size:
                best.append(tuple(assign))
            return
        for j in range(n_d):
            if j in used:
                continue
            ok = all(a is None or abs(Dl[i, k] - Dd[j, a]) <= tol
                     for k, a in enumerate(assign))
            if ok:
                extend(i + 1, assign + [j], used | {j})
        extend(i + 1, assign + [None], used)

    extend(0, [], frozenset())
    return best, best_size


def pose_from_markers(layout: MarkerLayout, detections, tol=MATCH_TOL_MM,
                      max_unmatched=2, frm=Frame.HMD, to=Frame.CANNULA
                      ) -> RegistrationResult:
    """Pose of a marker body from unordered, possibly incomplete detections.

    Correspondence comes from pairwise-distance agreement within ``tol``;
    up to ``max_unmatched`` stray detections are ignored. Raises
    TrackingFailure with fewer than 3 usable matches and AmbiguityError when
    two different assignments explain the detections equally well.
    """
    D = np.asarray(detections, dtype=float).reshape(-1, 3)
    if len(D) < 3:
        raise TrackingFailure(f"only {len(D)} detections; need at least 3")
    Dl = _pdist(layout.points)
    Dd = _pdist(D)
    cands, size = _consistent_assignments(Dl, Dd, tol, 3)
    if size < 3 or not cands:
        raise TrackingFailure("fewer than 3 markers matched the layout")
    if len(D) - size > max_unmatched:
        raise TrackingFailure(
            f"{len(D) - size} unmatched detections exceed limit {max_unmatched}")

    results = []
    for assign in cands:
        idx_l = [i for i, a in enumerate(assign) if a is not None]
        idx_d = [assign[i] for i in idx_l]
        reg = paired_point_register(layout.points[idx_l], D[idx_d], frm, to)
        results.append((reg, tuple((layout.names[i], int(j))
                                   for i, j in zip(idx_l, idx_d))))
    # distance-consistent but improper (mirror) assignments fit badly
    results = [r for r in results if r[0].fre_rms <= tol]
    if not results:
        raise TrackingFailure("no rigid fit of the matched markers within tolerance")
    # symmetric duplicates that land on the same pose are harmless
    ref = results[0][0].xf.xf.apply(layout.points)
    for reg, _ in results[1:]:
        if np.max(np.linalg.norm(reg.xf.xf.apply(layout.points) - ref, axis=1)) > tol:
            raise AmbiguityError(
                f"{len(results)} marker assignments fit within {tol} mm")
    reg, matches = min(results, key=lambda r: r[0].fre_rms)
    return RegistrationResult(reg.xf, reg.fre_rms, matches)


def ct_register(f_tp: FramedTransform, f_tm: FramedTransform,
                f_mi: FramedTransform) -> FramedTransform:
    """F^P_I = (F^T_P)^-1 F^T_M F^M_I."""
    expected = [(f_tp, Frame.TRACKER, Frame.PATIENT),
                (f_tm, Frame.TRACKER, Frame.MACHINE),
                (f_mi, Frame.MACHINE, Frame.IMAGE)]
    for xf, a, b in expected:
        if xf.frm != a or xf.to != b:
            raise FrameError(f"expected {a}->{b}, got {xf.frm}->{xf.to}")
    return compose(invert(f_tp), f_tm, f_mi)
