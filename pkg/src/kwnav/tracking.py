"""Pose-stream conditioning: Kalman filtering, interpolation, dropout gating."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError, OrderingError
from .geometry import (FramedTransform, RigidTransform, quat_from_rotvec,
                       quat_multiply, quat_conjugate, quat_normalize,
                       quat_slerp, quat_to_rotvec)

DEFAULT_GRACE_S = 0.3

POSE_CSV_HEADER = ["t_s", "frame_from", "frame_to", "qw", "qx", "qy", "qz",
                   "tx_mm", "ty_mm", "tz_mm", "valid"]


@dataclass(frozen=True)
class PoseSample:
    t: float
    pose: FramedTransform
    valid: bool = True


@dataclass(frozen=True)
class KalmanParams:
    """Noise settings. Spectral densities are per axis.

    accel_psd: white-acceleration density, mm^2/s^3 (constant-velocity model)
    gyro_psd: angular random-walk density, rad^2/s
    """

    accel_psd: float = 100.0
    gyro_psd: float = 1e-3
    meas_trans_std: float = 0.5   # mm
    meas_rot_std: float = 0.5     # deg


@dataclass(frozen=True)
class FilterState:
    """Nominal pose plus covariance over the error state [dp, dv, dtheta]."""

    q: np.ndarray
    p: np.ndarray
    v: np.ndarray
    cov: np.ndarray
    t: float
    frm: str = "H"
    to: str = "C"

    @property
    def pose(self) -> FramedTransform:
        return FramedTransform(self.frm, self.to, RigidTransform(self.q, self.p))


def kalman_init(sample: PoseSample, params: KalmanParams = KalmanParams(),
                vel_std: float = 100.0) -> FilterState:
    xf = sample.pose.xf
    cov = np.diag(np.concatenate([
        np.full(3, params.meas_trans_std ** 2),
        np.full(3, vel_std ** 2),
        np.full(3, np.radians(params.meas_rot_std) ** 2)]))
    return FilterState(np.array(xf.q), np.array(xf.t), np.zeros(3), cov,
                       float(sample.t), sample.pose.frm.value, sample.pose.to.value)


def _predict(state: FilterState, dt: float, params: KalmanParams):
    I3 = np.eye(3)
    F = np.eye(9)
    F[0:3, 3:6] = dt * I3
    Q = np.zeros((9, 9))
    qa = params.accel_psd
    Q[0:3, 0:3] = qa * dt ** 3 / 3 * I3
    Q[0:3, 3:6] = Q[3:6, 0:3] = qa * dt ** 2 / 2 * I3
    Q[3:6, 3:6] = qa * dt * I3
    Q[6:9, 6:9] = params.gyro_psd * dt * I3
    p = state.p + dt * state.v
    cov = F @ state.cov @ F.T + Q
    return p, state.v, cov


def kalman_update(state: FilterState, sample: PoseSample,
                  params: KalmanParams = KalmanParams()) -> FilterState:
    """One predict/correct cycle of a multiplicative (error-state) filter.

    Translation follows a constant-velocity model; orientation is a random
    walk whose error lives in the body-frame tangent space, so the nominal
    quaternion is corrected by q <- q * exp(dtheta) and never leaves the unit
    sphere.
    """
    if not sample.valid:
        raise InputError("kalman_update needs a valid sample")
    dt = sample.t - state.t
    if not dt > 0:
        raise OrderingError(
            f"sample time {sample.t} does not follow state time {state.t}")
    p, v, P = _predict(state, dt, params)

    meas = sample.pose.xf
    q_meas = np.asarray(meas.q)
    if np.dot(q_meas, state.q) < 0:
        q_meas = -q_meas
    y = np.concatenate([meas.t - p,
                        quat_to_rotvec(quat_multiply(quat_conjugate(state.q), q_meas))])
    H = np.zeros((6, 9))
    H[0:3, 0:3] = np.eye(3)
    H[3:6, 6:9] = np.eye(3)
    R = np.diag(np.concatenate([np.full(3, params.meas_trans_std ** 2),
                                np.full(3, np.radians(params.meas_rot_std) ** 2)]))
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    dx = K @ y
    IKH = np.eye(9) - K @ H
    # Joseph form keeps the covariance symmetric PSD
    P_post = IKH @ P @ IKH.T + K @ R @ K.T
    P_post = 0.5 * (P_post + P_post.T)
    q = quat_normalize(quat_multiply(state.q, quat_from_rotvec(dx[6:9])))
    return FilterState(q, p + dx[0:3], v + dx[3:6], P_post, float(sample.t),
                       state.frm, state.to)


def predicted_covariance(state: FilterState, t: float,
                         params: KalmanParams = KalmanParams()) -> np.ndarray:
    return _predict(state, t - state.t, params)[2]


def filter_stream(samples, params: KalmanParams = KalmanParams()):
    """Filter one body's samples; invalid samples are skipped (no prediction)."""
    state = None
    out = []
    for s in samples:
        if not s.valid:
            continue
        state = kalman_init(s, params) if state is None else kalman_update(state, s, params)
        out.append(PoseSample(s.t, state.pose, True))
    return out


def interpolate_pose(a: PoseSample, b: PoseSample, t: float) -> RigidTransform:
    """Linear translation + shortest-arc slerp between two samples.

    Endpoints are reproduced exactly; no extrapolation outside [a.t, b.t].
    """
    if a.pose.frm != b.pose.frm or a.pose.to != b.pose.to:
        raise InputError("cannot interpolate between different frame pairs")
    lo, hi = min(a.t, b.t), max(a.t, b.t)
    if not lo <= t <= hi or lo == hi:
        raise ValueError(f"t={t} outside [{lo}, {hi}]")
    if t == a.t:
        return a.pose.xf
    if t == b.t:
        return b.pose.xf
    u = (t - a.t) / (b.t - a.t)
    xa, xb = a.pose.xf, b.pose.xf
    return RigidTransform(quat_slerp(xa.q, xb.q, u), (1 - u) * xa.t + u * xb.t)


class Nav(str, enum.Enum):
    ACTIVE = "Active"
    SUSPENDED = "Suspended"


@dataclass(frozen=True)
class NavState:
    state: Nav
    since: float

    @property
    def active(self) -> bool:
        return self.state is Nav.ACTIVE


def gate_navigation(tool_last_valid: float, patient_last_valid: float,
                    now: float, grace: float = DEFAULT_GRACE_S) -> NavState:
    """Suspend navigation once either body has been lost longer than ``grace``.

    ``since`` is the moment the current state began when it can be derived
    from the inputs alone: the suspension time for Suspended, and the later of
    the two last-valid times for Active.
    """
    if not grace > 0:
        raise ValueError("grace must be positive")
    stale_tool = now - tool_last_valid
    stale_patient = now - patient_last_valid
    if stale_tool <= grace and stale_patient <= grace:
        return NavState(Nav.ACTIVE, max(tool_last_valid, patient_last_valid))
    return NavState(Nav.SUSPENDED, min(tool_last_valid, patient_last_valid) + grace)


# -- pose stream files -------------------------------------------------------

def _truthy(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "y", "t"):
        return True
    if v in ("0", "false", "no", "n", "f", ""):
        return False
    raise InputError(f"bad valid flag {s!r}")


def read_pose_stream(path, check_order=True):
    """Read a pose CSV; per frame pair, timestamps must strictly increase."""
    samples = []
    last = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(POSE_CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                t = float(row["t_s"])
                q = [float(row[k]) for k in ("qw", "qx", "qy", "qz")]
                tr = [float(row[k]) for k in ("tx_mm", "ty_mm", "tz_mm")]
                pose = FramedTransform(row["frame_from"], row["frame_to"],
                                       RigidTransform(q, tr))
                valid = _truthy(row["valid"])
            except (ValueError, KeyError) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            key = (pose.frm, pose.to)
            if check_order and key in last and not t > last[key]:
                raise OrderingError(
                    f"{path}:{lineno}: timestamp {t} not after {last[key]} "
                    f"for {pose.frm}->{pose.to}")
            last[key] = t
            samples.append(PoseSample(t, pose, valid))
    return samples


def write_pose_stream(path, samples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_CSV_HEADER)
        for s in samples:
            xf = s.pose.xf
            w.writerow([repr(float(s.t)), s.pose.frm.value, s.pose.to.value,
                        *(repr(float(v)) for v in xf.q),
                        *(repr(float(v)) for v in xf.t), int(bool(s.valid))])
