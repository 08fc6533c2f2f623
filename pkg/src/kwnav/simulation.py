"""Synthetic data and Monte Carlo studies.

Two studies live here:

* ``simulate_e2e`` propagates a noise budget through the touch-point chain
  (tool side vs. image side of the same landmark) and reports the distribution
  of the end-to-end error.
* ``simulate_insertion`` runs a simulated operator through guided wire
  insertions into a synthetic nine-corridor phantom and scores each final wire
  against its planned corridor.

Every trial draws from its own RNG stream seeded by ``(seed, stream, trial)``,
so serial and parallel execution produce identical numbers.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .errors import InputError
from .geometry import (FramedTransform, Line3, RigidTransform,
                       normalize, quat_from_rotvec, quat_multiply)
from .metrics import PlacementError, placement_error
from .navigation import error_indicator, plane_crossing, surface_marker


# -- parameter blocks ----------------------------------------------------------

@dataclass(frozen=True)
class NoiseBudget:
    """Per-component error magnitudes (translation mm per axis, rotation deg)."""

    slam_trans: float = 0.0
    slam_rot: float = 0.0
    tool_trans: float = 0.0
    tool_rot: float = 0.0
    patient_trans: float = 0.0
    patient_rot: float = 0.0
    pivot: float = 0.0
    ctreg_trans: float = 0.0
    ctreg_rot: float = 0.0
    annotation: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise InputError(f"noise budget {f.name} must be >= 0")

    def only(self, name: str) -> "NoiseBudget":
        """Copy keeping a single component."""
        return NoiseBudget(**{name: getattr(self, name)})


@dataclass(frozen=True)
class Corridor:
    entry: np.ndarray   # on the bone surface
    exit: np.ndarray
    tilt_deg: float

    @property
    def up(self):
        return normalize(self.entry - self.exit)


@dataclass(frozen=True)
class PhantomSpec:
    corridors: tuple
    soft_tissue_mm: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if len(self.corridors) != 9:
            raise InputError("a phantom has exactly 9 corridors")

    @property
    def skin_z(self) -> float:
        return self.soft_tissue_mm


@dataclass(frozen=True)
class OperatorModel:
    """Simulated hand-eye loop.

    The operator starts from an initial placement error and repeatedly moves
    the tool so that the displayed deviation circles shrink by ``gain`` per
    iteration, with hand tremor ``tremor_mm`` added at each plane, until both
    radii fall below ``threshold_mm`` or ``iterations`` run out. Without
    tracking (visual aiming) the operator's perception of the tool carries a
    per-trial error of ``visual_mm`` at each plane and partially corrects
    visible wire bending by ``visual_compensation``.
    """

    init_offset_mm: float = 5.0
    init_angle_deg: float = 5.0
    gain: float = 0.5
    tremor_mm: float = 2.5
    iterations: int = 12
    threshold_mm: float = 5.0
    visual_mm: float = 5.5
    visual_tremor_mm: float = 2.5
    visual_compensation: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise InputError("operator needs at least one alignment iteration")
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InputError(f"operator {f.name} must be >= 0")


@dataclass(frozen=True)
class BendingModel:
    """Wire deviation from the guiding body.

    Lateral offset at bone contact is ``tissue_gain`` mm per degree of
    off-vertical entry (soft-tissue deflection) plus an isotropic skate offset
    of std ``skate_mm``; both are scaled by the mode's stiffness factor
    (0 = fully constrained, 1 = free wire). The offset decays to
    ``end_fraction`` of itself at the corridor end.
    """

    tissue_gain: float = 0.5
    skate_mm: float = 9.0
    end_fraction: float = 0.35
    cannula_stiffness: float = 0.05
    wire_stiffness: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InputError(f"bending {f.name} must be >= 0")
        for name in ("cannula_stiffness", "wire_stiffness"):
            if getattr(self, name) > 1:
                raise InputError(f"bending {name} must lie in [0, 1]")


@dataclass(frozen=True)
class DepthSensorModel:
    noise_mm: float = 1.0
    bias_mm: float = 4.0
    # share of the incision offset the soft tissue imposes on the final wire
    tissue_coupling: float = 0.8
    grid_mm: float = 2.0
    half_width_mm: float = 30.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InputError(f"depth {f.name} must be >= 0")


class Mode(str, enum.Enum):
    NON_TRACKED = "NonTracked"
    DRILL = "DrillMounted"
    CANNULA = "Cannula"

    @property
    def label(self) -> str:
        return {"NonTracked": "Non-tracked", "DrillMounted": "Drill",
                "Cannula": "Cannula"}[self.value]


# -- noise primitives ----------------------------------------------------------

def random_unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _rotvecs(rng, n, std_deg):
    """Random-axis rotation vectors with N(0, std) magnitude (radians)."""
    ang = np.radians(rng.normal(scale=std_deg, size=n))
    return random_unit_vectors(rng, n) * ang[:, None]


def _rodrigues(rv):
    """Batch rotation vectors (n, 3) -> matrices (n, 3, 3)."""
    theta = np.linalg.norm(rv, axis=1)
    small = theta < 1e-12
    k = np.where(small[:, None], 0.0, rv / np.where(small, 1.0, theta)[:, None])
    K = np.zeros((len(rv), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -k[:, 2], k[:, 1]
    K[:, 1, 0], K[:, 1, 2] = k[:, 2], -k[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -k[:, 1], k[:, 0]
    s = np.sin(theta)[:, None, None]
    c = (1 - np.cos(theta))[:, None, None]
    return np.eye(3) + s * K + c * (K @ K)


def perturb(xf: FramedTransform, trans_std: float, rot_std: float, rng) -> FramedTransform:
    """Noisy copy of ``xf``: isotropic Gaussian translation (per-axis std, mm)
    plus a body-frame rotation about a uniform random axis whose angle is
    N(0, rot_std) degrees. Frame tags are kept."""
    if trans_std < 0 or rot_std < 0:
        raise InputError("noise std must be >= 0")
    q, t = xf.xf.q, xf.xf.t
    if rot_std > 0:
        q = quat_multiply(q, quat_from_rotvec(_rotvecs(rng, 1, rot_std)[0]))
    if trans_std > 0:
        t = t + rng.normal(scale=trans_std, size=3)
    return FramedTransform(xf.frm, xf.to, RigidTransform(q, t))


class _Batch:
    """Stack of rigid transforms (R: (n,3,3), t: (n,3)) for vectorized chains."""

    def __init__(self, R, t):
        self.R = R
        self.t = t

    @classmethod
    def repeat(cls, xf: RigidTransform, n):
        return cls(np.broadcast_to(xf.rotation, (n, 3, 3)).copy(),
                   np.broadcast_to(xf.t, (n, 3)).copy())

    def perturbed(self, trans_std, rot_std, rng):
        n = len(self.t)
        R, t = self.R, self.t
        if rot_std > 0:
            R = R @ _rodrigues(_rotvecs(rng, n, rot_std))
        if trans_std > 0:
            t = t + rng.normal(scale=trans_std, size=(n, 3))
        return _Batch(R, t)

    def __matmul__(self, other):
        return _Batch(self.R @ other.R,
                      np.einsum("nij,nj->ni", self.R, other.t) + self.t)

    def apply(self, p):
        return np.einsum("nij,nj->ni", self.R, p) + self.t


# -- touch-point (end-to-end) study -------------------------------------------

@dataclass(frozen=True)
class TouchChain:
    """Ground-truth transforms for the touch-point study.

    ``f_htip[l]`` places the pointer so that its calibrated tip touches
    landmark ``l``.
    """

    f_wh: FramedTransform
    f_hp: FramedTransform
    f_pi: FramedTransform
    f_htip: tuple
    p_tip: np.ndarray
    landmarks: np.ndarray


def random_touch_chain(landmarks, rng, p_tip=(0.0, 0.0, 150.0)) -> TouchChain:
    L = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    p_tip = np.asarray(p_tip, dtype=float)

    def rand_xf(frm, to, offset):
        xf = RigidTransform.random(rng, 50.0)
        return FramedTransform(frm, to, RigidTransform(xf.q, xf.t + offset))

    f_wh = rand_xf("W", "H", np.zeros(3))
    f_hp = rand_xf("H", "P", np.array([0.0, 0.0, 400.0]))
    f_pi = rand_xf("P", "I", np.zeros(3))
    f_hi = f_hp.xf @ f_pi.xf
    tips = []
    for p in L:
        rot = RigidTransform.random(rng, 0.0)
        target_h = f_hi.apply(p)
        tips.append(FramedTransform("H", "tip", RigidTransform(
            rot.q, target_h - rot.rotation @ p_tip)))
    return TouchChain(f_wh, f_hp, f_pi, tuple(tips), p_tip, L)


@dataclass(frozen=True)
class E2EResult:
    mean: float
    std: float
    samples: np.ndarray  # (trials, landmarks)

    def to_dict(self) -> dict:
        return {"mean_mm": self.mean, "std_mm": self.std,
                "n": int(self.samples.size)}


def simulate_e2e(budget: NoiseBudget, landmarks, trials: int, rng,
                 chain: TouchChain | None = None) -> E2EResult:
    """Monte Carlo of the touch-point error under ``budget``.

    Per trial the pivot offset and CT registration carry one error each (they
    are calibrated once); SLAM, both optical-tracking terms and the landmark
    annotation are drawn afresh for every touch. The tool side and the image
    side each see an independent SLAM draw: the hologram is anchored to the
    world when placed, while the pointer is tracked live.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    L = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    if len(L) < 1:
        raise InputError("need at least one landmark")
    if chain is None:
        chain = random_touch_chain(L, rng)
    n_l = len(L)
    n = trials * n_l
    b = budget

    wh = _Batch.repeat(chain.f_wh.xf, n)
    wh_tool = wh.perturbed(b.slam_trans, b.slam_rot, rng)
    wh_img = wh.perturbed(b.slam_trans, b.slam_rot, rng)

    htip = _Batch(np.tile(np.stack([x.xf.rotation for x in chain.f_htip]), (trials, 1, 1)),
                  np.tile(np.stack([x.xf.t for x in chain.f_htip]), (trials, 1)))
    htip = htip.perturbed(b.tool_trans, b.tool_rot, rng)
    hp = _Batch.repeat(chain.f_hp.xf, n).perturbed(b.patient_trans, b.patient_rot, rng)

    pi_trial = _Batch.repeat(chain.f_pi.xf, trials).perturbed(b.ctreg_trans, b.ctreg_rot, rng)
    pi = _Batch(np.repeat(pi_trial.R, n_l, axis=0), np.repeat(pi_trial.t, n_l, axis=0))

    tip = np.broadcast_to(chain.p_tip, (trials, 3))
    if b.pivot > 0:
        tip = tip + rng.normal(scale=b.pivot, size=(trials, 3))
    tip = np.repeat(tip, n_l, axis=0)
    p_img = np.tile(chain.landmarks, (trials, 1))
    if b.annotation > 0:
        p_img = p_img + rng.normal(scale=b.annotation, size=p_img.shape)

    tool_side = (wh_tool @ htip).apply(tip)
    image_side = (wh_img @ hp @ pi).apply(p_img)
    err = np.linalg.norm(tool_side - image_side, axis=1).reshape(trials, n_l)
    std = float(np.std(err, ddof=1)) if err.size > 1 else 0.0
    return E2EResult(float(np.mean(err)), std, err)


# -- phantom ---------------------------------------------------------------------

def generate_phantom(seed: int, soft_tissue_mm: float = 20.0, spacing_mm: float = 40.0,
                     length_mm: float = 100.0, max_tilt_deg: float = 15.0) -> PhantomSpec:
    """Nine corridors on a 3 x 3 grid with random tilt below ``max_tilt_deg``.

    The bone surface is the plane z = 0 and the skin is z = soft_tissue_mm;
    corridors enter at the bone surface and run ``length_mm`` downward.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(9):
        entry = np.array([((i % 3) - 1) * spacing_mm, ((i // 3) - 1) * spacing_mm, 0.0])
        tilt = rng.uniform(0.0, max_tilt_deg)
        az = rng.uniform(0.0, 2 * np.pi)
        th = np.radians(tilt)
        up = np.array([np.sin(th) * np.cos(az), np.sin(th) * np.sin(az), np.cos(th)])
        out.append(Corridor(entry, entry - length_mm * up, float(tilt)))
    return PhantomSpec(tuple(out), soft_tissue_mm, seed)


# -- insertion study -------------------------------------------------------------

def _in_plane_basis(axis):
    a = normalize(axis)
    helper = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0, 1.0, 0])
    u = normalize(np.cross(a, helper))
    return u, np.cross(a, u)


def _planar_noise(rng, axis, std):
    if std == 0:
        return np.zeros(3)
    u, v = _in_plane_basis(axis)
    g = rng.normal(scale=std, size=2)
    return g[0] * u + g[1] * v


def _line_from_crossings(entry_pt, end_pt):
    return Line3(entry_pt, entry_pt - end_pt)


def _rigid_noise(rng, trans_std, rot_std, center):
    """Random rigid motion (R, t) rotating about ``center``."""
    R = _rodrigues(_rotvecs(rng, 1, rot_std))[0] if rot_std > 0 else np.eye(3)
    t = rng.normal(scale=trans_std, size=3) if trans_std > 0 else np.zeros(3)
    c = np.asarray(center, dtype=float)
    return R, c - R @ c + t


def _apply_rt(rt, p):
    R, t = rt
    return R @ p + t


def _inverse_rt(rt):
    R, t = rt
    return R.T, -R.T @ t


def _move_line(rt, line: Line3):
    R, t = rt
    return Line3(R @ line.point + t, R @ line.direction)


def skin_cloud(center_xy, skin_z, depth: DepthSensorModel, rng):
    """Noisy depth-sensor samples of a flat skin patch around ``center_xy``."""
    h, g = depth.half_width_mm, depth.grid_mm
    ticks = np.arange(-h, h + 0.5 * g, g) if g > 0 else np.array([0.0])
    X, Y = np.meshgrid(ticks + center_xy[0], ticks + center_xy[1], indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, skin_z)])
    if depth.noise_mm > 0:
        P[:, 2] += rng.normal(scale=depth.noise_mm, size=len(P))
    if depth.bias_mm > 0:
        phi = rng.uniform(0, 2 * np.pi)
        P[:, :2] += depth.bias_mm * np.array([np.cos(phi), np.sin(phi)])
    return P


def _stiffness(mode: Mode, bending: BendingModel) -> float:
    return bending.cannula_stiffness if mode is Mode.CANNULA else bending.wire_stiffness


def _one_insertion(phantom: PhantomSpec, mode: Mode, use_surface_marker: bool,
                   budget: NoiseBudget, op: OperatorModel, bending: BendingModel,
                   depth: DepthSensorModel, rng) -> PlacementError:
    cor = phantom.corridors[int(rng.integers(len(phantom.corridors)))]
    E, X = cor.entry, cor.exit
    axis = normalize(E - X)

    # displayed plan: annotation error on the points, then one rigid error
    # combining CT registration, patient tracking and SLAM
    plan_t = np.sqrt(budget.ctreg_trans ** 2 + budget.patient_trans ** 2 + budget.slam_trans ** 2)
    plan_r = np.sqrt(budget.ctreg_rot ** 2 + budget.patient_rot ** 2 + budget.slam_rot ** 2)
    E_ann = E + (rng.normal(scale=budget.annotation, size=3) if budget.annotation > 0 else 0)
    X_ann = X + (rng.normal(scale=budget.annotation, size=3) if budget.annotation > 0 else 0)
    G_plan = _rigid_noise(rng, plan_t, plan_r, E)
    dE, dX = _apply_rt(G_plan, E_ann), _apply_rt(G_plan, X_ann)
    d_axis = normalize(dE - dX)

    # how the operator perceives the guiding body
    if mode is Mode.NON_TRACKED:
        perc_e = _planar_noise(rng, d_axis, op.visual_mm)
        perc_x = _planar_noise(rng, d_axis, op.visual_mm)
        tremor = op.visual_tremor_mm

        def perceived(line):
            ce = plane_crossing(line, dE, d_axis) + perc_e
            cx = plane_crossing(line, dX, d_axis) + perc_x
            return _line_from_crossings(ce, cx)

        def actual_from_perceived(ce, cx):
            return _line_from_crossings(ce - perc_e, cx - perc_x)
    else:
        G_tool = _rigid_noise(rng, budget.tool_trans, budget.tool_rot, E)
        piv = _planar_noise(rng, axis, budget.pivot)
        G_inv = _inverse_rt(G_tool)
        tremor = op.tremor_mm

        def perceived(line):
            moved = _move_line(G_tool, line)
            return Line3(moved.point + piv, moved.direction)

        def actual_from_perceived(ce, cx):
            shown = _line_from_crossings(ce - piv, cx - piv)
            return _move_line(G_inv, shown)

    # initial placement around the displayed plan
    start_e = dE + _planar_noise(rng, d_axis, op.init_offset_mm)
    tilt = np.radians(rng.normal(scale=op.init_angle_deg))
    u, v = _in_plane_basis(d_axis)
    phi = rng.uniform(0, 2 * np.pi)
    lean = np.cos(phi) * u + np.sin(phi) * v
    body = Line3(start_e, np.cos(tilt) * d_axis + np.sin(tilt) * lean)

    for _ in range(op.iterations):
        shown = perceived(body)
        ind = error_indicator(shown, dE, dX)
        if ind.entry_radius < op.threshold_mm and ind.end_radius < op.threshold_mm:
            break
        ce = plane_crossing(shown, dE, d_axis)
        cx = plane_crossing(shown, dX, d_axis)
        ce = ce + op.gain * (dE - ce) + _planar_noise(rng, d_axis, tremor)
        cx = cx + op.gain * (dX - cx) + _planar_noise(rng, d_axis, tremor)
        body = actual_from_perceived(ce, cx)

    # incision placed from the surface marker drags the shaft laterally
    if use_surface_marker:
        cloud = skin_cloud(plane_crossing(Line3(dE, d_axis), [0, 0, phantom.skin_z],
                                          np.array([0.0, 0, 1]))[:2],
                           phantom.skin_z, depth, rng)
        marker = surface_marker(cloud, Line3(dE, -d_axis))
        true_skin = plane_crossing(Line3(E, axis), marker.position, axis)
        e_s = marker.position - true_skin
        e_s = e_s - (e_s @ axis) * axis
        shift = depth.tissue_coupling * e_s
        body = Line3(body.point + shift, body.direction)

    # wire bending relative to the guiding body
    s = _stiffness(mode, bending)
    if s > 0:
        entry_angle = np.degrees(np.arccos(min(1.0, abs(body.direction[2]))))
        horiz = body.direction.copy()
        horiz[2] = 0.0
        hn = np.linalg.norm(horiz)
        defl_dir = horiz / hn if hn > 1e-12 else np.zeros(3)
        b = bending.tissue_gain * entry_angle * defl_dir
        b = b + _planar_noise(rng, axis, bending.skate_mm)
        b = s * b
        if mode is Mode.NON_TRACKED:
            b = (1.0 - op.visual_compensation) * b
        ce = plane_crossing(body, E, axis) + b
        cx = plane_crossing(body, X, axis) + bending.end_fraction * b
        wire = _line_from_crossings(ce, cx)
    else:
        wire = body
    return placement_error(E, X, wire)


def trial_rng(seed: int, stream: int, trial: int):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(trial)]))


def _run_chunk(args):
    (phantom, mode, marker, budget, op, bending, depth, seed, stream, idx) = args
    return [_one_insertion(phantom, mode, marker, budget, op, bending, depth,
                           trial_rng(seed, stream, i)).as_tuple() for i in idx]


def simulate_insertion(phantom: PhantomSpec, mode: Mode, use_surface_marker: bool,
                       budget: NoiseBudget, operator: OperatorModel,
                       bending: BendingModel, depth: DepthSensorModel,
                       trials: int, seed: int = 0, stream: int = 0,
                       workers: int = 1):
    """Run ``trials`` simulated insertions and score each final wire.

    Trial ``i`` uses the RNG stream ``(seed, stream, i)``; ``workers > 1``
    spreads trials across processes without changing any result.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    mode = Mode(mode)
    if workers <= 1:
        rows = _run_chunk((phantom, mode, use_surface_marker, budget, operator,
                           bending, depth, seed, stream, range(trials)))
    else:
        chunks = [range(i, trials, workers) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [
                (phantom, mode, use_surface_marker, budget, operator, bending,
                 depth, seed, stream, c) for c in chunks]))
        rows = [None] * trials
        for c, part in zip(chunks, parts):
            for i, r in zip(c, part):
                rows[i] = r
    return [PlacementError(*r) for r in rows]


# -- study configuration ---------------------------------------------------------

CONDITIONS = [(Mode.NON_TRACKED, False), (Mode.DRILL, False), (Mode.CANNULA, False),
              (Mode.NON_TRACKED, True), (Mode.DRILL, True), (Mode.CANNULA, True)]


def condition_name(mode: Mode, marker: bool) -> str:
    return mode.label + (" + surface marker" if marker else "")


@dataclass(frozen=True)
class StudyConfig:
    budget: NoiseBudget = field(default_factory=NoiseBudget)
    operator: OperatorModel = field(default_factory=OperatorModel)
    bending: BendingModel = field(default_factory=BendingModel)
    depth: DepthSensorModel = field(default_factory=DepthSensorModel)
    trials: int = 500
    seed: int = 0
    phantom_seed: int = 0
    soft_tissue_mm: float = 20.0
    e2e_trials: int = 10000

    def __post_init__(self):
        if self.trials < 1:
            raise InputError("trials must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown study config keys: {sorted(unknown)}")
        base = cls()
        kw = {}
        blocks = {"budget": NoiseBudget, "operator": OperatorModel,
                  "bending": BendingModel, "depth": DepthSensorModel}
        for k, v in d.items():
            if k in blocks:
                if not isinstance(v, dict):
                    raise InputError(f"study config {k} must be an object")
                try:
                    kw[k] = replace(getattr(base, k), **v)
                except TypeError as exc:
                    raise InputError(f"study config {k}: {exc}") from None
            else:
                kw[k] = v
        try:
            return replace(base, **kw)
        except TypeError as exc:
            raise InputError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "StudyConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_config() -> StudyConfig:
    """Defaults shipped in ``kwnav/data/default_study.json``."""
    text = resources.files("kwnav").joinpath("data/default_study.json").read_text()
    return StudyConfig.from_dict(json.loads(text))


def run_study(config: StudyConfig, conditions=CONDITIONS, workers: int = 1):
    """All requested conditions; returns ``{condition name: [PlacementError]}``."""
    phantom = generate_phantom(config.phantom_seed, config.soft_tissue_mm)
    out = {}
    for mode, marker in conditions:
        # stream id is fixed per condition so subsets reproduce the full run
        stream = CONDITIONS.index((Mode(mode), bool(marker)))
        out[condition_name(mode, marker)] = simulate_insertion(
            phantom, mode, marker, config.budget, config.operator, config.bending,
            config.depth, config.trials, config.seed, stream, workers)
    return out
