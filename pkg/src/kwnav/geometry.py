"""Frame-tagged rigid transforms.

Chain convention
----------------
A ``FramedTransform(frm=A, to=B)`` is the transform written F^A_B. Its
homogeneous matrix maps coordinates expressed in frame ``B`` into frame
``A``, so chains read left to right exactly as they are written::

    F^W_I = compose(F^W_H, F^H_P, F^P_I)
    p_W   = transform_point(F^W_I, p_I)

``compose(a, b)`` requires ``a.to == b.frm`` and its matrix is
``a.matrix @ b.matrix``: applying the result to a point applies ``b`` first,
then ``a``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FrameError, InputError

QUAT_NORM_TOL = 1e-9


class Frame(str, enum.Enum):
    WORLD = "W"
    HMD = "H"
    CANNULA = "C"
    PATIENT = "P"
    IMAGE = "I"
    TRACKER = "T"
    MACHINE = "M"
    TIP = "tip"

    @classmethod
    def parse(cls, value) -> "Frame":
        if isinstance(value, Frame):
            return value
        for f in cls:
            if value == f.value or str(value).upper() == f.name:
                return f
        raise InputError(f"unknown frame {value!r}")

    def __str__(self):
        return self.value


# -- quaternion helpers (w, x, y, z) ---------------------------------------

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("zero quaternion")
    q = q / n
    # canonical hemisphere keeps literals and equality checks stable
    if q[0] < 0:
        q = -q
    return q


def quat_multiply(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Shepperd's method; picks the numerically largest pivot."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    diag = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s,
             (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s,
             (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s,
             (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
             (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return quat_normalize(q)


def quat_from_rotvec(v):
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        # second-order series keeps exp/log consistent near zero
        q = np.array([1.0 - angle * angle / 8.0, *(0.5 * v)])
        return q / np.linalg.norm(q)
    axis = v / angle
    return np.array([np.cos(angle / 2), *(np.sin(angle / 2) * axis)])


def quat_to_rotvec(q):
    q = np.asarray(q, dtype=float)
    if q[0] < 0:
        q = -q
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, q[0])
    return angle * q[1:] / s


def quat_from_axis_angle(axis, angle_deg):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return quat_from_rotvec(axis * np.radians(angle_deg))


def quat_slerp(q0, q1, u):
    """Shortest-arc spherical interpolation, ``u`` in [0, 1]."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.dot(q0, q1) < 0:
        q1 = -q1
    rel = quat_multiply(quat_conjugate(q0), q1)
    return quat_multiply(q0, quat_from_rotvec(u * quat_to_rotvec(rel)))


# -- value types -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation (unit quaternion w, x, y, z) plus translation in mm."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(4)
        t = np.array(self.t, dtype=float).reshape(3)
        if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
            q = quat_normalize(q)
        elif q[0] < 0:
            q = -q
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.array([1.0, 0, 0, 0]), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> "RigidTransform":
        M = np.asarray(M, dtype=float)
        return cls(matrix_to_quat(M[:3, :3]), M[:3, 3])

    @classmethod
    def from_rotation_matrix(cls, R, t=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(matrix_to_quat(R), t)

    @classmethod
    def random(cls, rng, max_translation=100.0) -> "RigidTransform":
        q = rng.normal(size=4)
        t = rng.uniform(-max_translation, max_translation, size=3)
        return cls(q / np.linalg.norm(q), t)

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.t
        return M

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        return p @ self.rotation.T + self.t

    def apply_direction(self, d):
        return np.asarray(d, dtype=float) @ self.rotation.T

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        q = quat_normalize(quat_multiply(self.q, other.q))
        return RigidTransform(q, self.rotation @ other.t + self.t)

    def inverse(self) -> "RigidTransform":
        qi = quat_conjugate(self.q)
        return RigidTransform(qi, -(quat_to_matrix(qi) @ self.t))

    def isclose(self, other: "RigidTransform", atol=1e-9) -> bool:
        return (np.allclose(self.matrix, other.matrix, rtol=0, atol=atol))

    def __repr__(self):
        return f"RigidTransform(q={self.q.tolist()}, t={self.t.tolist()})"


@dataclass(frozen=True)
class FramedTransform:
    """F^frm_to: maps coordinates in ``to`` into coordinates in ``frm``."""

    frm: Frame
    to: Frame
    xf: RigidTransform

    def __post_init__(self):
        object.__setattr__(self, "frm", Frame.parse(self.frm))
        object.__setattr__(self, "to", Frame.parse(self.to))

    @classmethod
    def identity(cls, frm, to=None) -> "FramedTransform":
        return cls(frm, frm if to is None else to, RigidTransform.identity())

    @property
    def matrix(self) -> np.ndarray:
        return self.xf.matrix

    def __matmul__(self, other: "FramedTransform") -> "FramedTransform":
        return compose(self, other)

    def isclose(self, other: "FramedTransform", atol=1e-9) -> bool:
        return (self.frm == other.frm and self.to == other.to
                and self.xf.isclose(other.xf, atol))

    def to_literal(self) -> dict:
        return {"from": self.frm.value, "to": self.to.value,
                "q": [float(v) for v in self.xf.q],
                "t": [float(v) for v in self.xf.t]}

    @classmethod
    def from_literal(cls, obj: dict) -> "FramedTransform":
        try:
            return cls(obj["from"], obj["to"],
                       RigidTransform(obj["q"], obj["t"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad transform literal {obj!r}: {exc}") from None


@dataclass(frozen=True, eq=False)
class Line3:
    """Point plus unit direction, in mm."""

    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).reshape(3).copy()
        d = np.asarray(self.direction, dtype=float).reshape(3)
        n = np.linalg.norm(d)
        if not np.isfinite(n) or n < 1e-12:
            raise ValueError("line direction must be a nonzero vector")
        d = d / n
        p.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "direction", d)

    @classmethod
    def through(cls, a, b) -> "Line3":
        a = np.asarray(a, dtype=float)
        return cls(a, np.asarray(b, dtype=float) - a)

    def at(self, s):
        return self.point + s * self.direction

    def distance_to(self, p):
        v = np.asarray(p, dtype=float) - self.point
        along = (v @ self.direction)[..., None] * self.direction
        return np.linalg.norm(v - along, axis=-1)


def _check_chain(a: FramedTransform, b: FramedTransform):
    if a.to != b.frm:
        raise FrameError(
            f"cannot compose {a.frm}->{a.to} with {b.frm}->{b.to}: "
            f"inner frames {a.to} and {b.frm} differ")


def compose(*chain: FramedTransform) -> FramedTransform:
    """Compose transforms left to right; inner frames must match."""
    if not chain:
        raise ValueError("compose needs at least one transform")
    out = chain[0]
    for nxt in chain[1:]:
        _check_chain(out, nxt)
        out = FramedTransform(out.frm, nxt.to, out.xf @ nxt.xf)
    return out


def invert(a: FramedTransform) -> FramedTransform:
    return FramedTransform(a.to, a.frm, a.xf.inverse())


def transform_point(a: FramedTransform, p):
    """Map ``p`` (given in ``a.to``) into ``a.frm``. Accepts (3,) or (N, 3)."""
    return a.xf.apply(p)


def transform_direction(a: FramedTransform, d):
    return a.xf.apply_direction(d)


def transform_line(a: FramedTransform, line: Line3) -> Line3:
    return Line3(a.xf.apply(line.point), a.xf.apply_direction(line.direction))


def angle_between(u, v, axis_mode=False) -> float:
    """Angle in degrees between two directions.

    With ``axis_mode`` the result is sign-insensitive, min(theta, 180 - theta),
    which is what a wire (no forward sign) needs.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        raise ValueError("angle undefined for a zero vector")
    u, v = u / nu, v / nv
    # atan2 form stays accurate near 0 and 180 degrees
    theta = np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v)), u @ v))
    if axis_mode:
        theta = min(theta, 180.0 - theta)
    return float(theta)


def normalize(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def rotation_about(axis, angle_deg, frm, to=None, t=(0.0, 0.0, 0.0)):
    """Convenience constructor for a framed pure rotation (plus optional t)."""
    return FramedTransform(frm, frm if to is None else to,
                           RigidTransform(quat_from_axis_angle(axis, angle_deg), t))
