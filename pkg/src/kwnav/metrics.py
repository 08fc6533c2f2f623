"""Placement errors, touch-point error, aggregation and significance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateError, InsufficientDataError, InputError
from .geometry import Line3, angle_between, normalize
from .navigation import in_plane_offset

FIELDS = ("entry_mm", "mid_mm", "end_mm", "rotation_deg")
FIELD_TITLES = {"entry_mm": "Entry Point Error (mm)",
                "mid_mm": "Mid Point Error (mm)",
                "end_mm": "End Point Error (mm)",
                "rotation_deg": "Rotation Error (deg)"}


@dataclass(frozen=True)
class PlacementError:
    entry_mm: float
    mid_mm: float
    end_mm: float
    rotation_deg: float

    def as_tuple(self):
        return (self.entry_mm, self.mid_mm, self.end_mm, self.rotation_deg)


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float

    def __format__(self, spec):
        spec = spec or ".2f"
        return f"{self.mean:{spec}} ± {self.std:{spec}}"


@dataclass(frozen=True)
class StudySummary:
    condition: str
    entry_mm: Stat
    mid_mm: Stat
    end_mm: Stat
    rotation_deg: Stat
    n: int

    def to_dict(self) -> dict:
        d = {"condition": self.condition}
        for f in FIELDS:
            s = getattr(self, f)
            d[f] = {"mean": s.mean, "std": s.std}
        d["n"] = self.n
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StudySummary":
        return cls(d["condition"], *(Stat(d[f]["mean"], d[f]["std"]) for f in FIELDS),
                   int(d["n"]))

    def row(self, spec=".2f"):
        return [format(getattr(self, f), spec) for f in FIELDS]


def placement_error(plan_entry_w, plan_exit_w, actual: Line3) -> PlacementError:
    """Deviation of an actual wire line from the planned corridor.

    Translational errors are in-plane distances at the planes orthogonal to
    the planned axis through its entry, midpoint and exit; the angle is the
    sign-free deviation between the two axes.
    """
    e = np.asarray(plan_entry_w, dtype=float)
    x = np.asarray(plan_exit_w, dtype=float)
    axis = normalize(e - x)
    errs = [float(np.linalg.norm(in_plane_offset(actual, a, axis)))
            for a in (e, 0.5 * (e + x), x)]
    rot = angle_between(actual.direction, axis, axis_mode=True)
    return PlacementError(*errs, rot)


def end_to_end_error(predicted, measured) -> float:
    return float(np.linalg.norm(np.asarray(predicted, float) - np.asarray(measured, float)))


def mean_std(values):
    """Mean and sample standard deviation (n - 1)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InsufficientDataError("need at least 2 values for a standard deviation")
    return Stat(float(np.mean(v)), float(np.std(v, ddof=1)))


def summarize(samples, condition: str = "") -> StudySummary:
    if len(samples) < 2:
        raise InsufficientDataError("summarize needs at least 2 samples")
    arr = np.array([s.as_tuple() for s in samples], dtype=float)
    return StudySummary(condition, *(mean_std(arr[:, i]) for i in range(4)), len(samples))


def significance(group_a, group_b) -> float:
    """Two-sided Welch t-test p-value."""
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError("each group needs at least 2 samples")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va + vb <= 0:
        raise DegenerateError("both groups have zero variance")
    if va == 0 or vb == 0:
        # scipy's Welch path divides by each variance; handle the one-sided case
        se = math.sqrt(va / a.size + vb / b.size)
        t = (a.mean() - b.mean()) / se
        df = a.size - 1 if vb == 0 else b.size - 1
        return float(min(1.0, 2 * stats.t.sf(abs(t), df)))
    p = stats.ttest_ind(a, b, equal_var=False).pvalue
    return float(min(1.0, max(0.0, p)))


# -- files -------------------------------------------------------------------

def write_trials_csv(path, rows):
    """``rows`` are (condition, trial, PlacementError) triples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "trial", *FIELDS])
        for cond, trial, pe in rows:
            w.writerow([cond, trial, *(repr(float(v)) for v in pe.as_tuple())])


def read_trials_csv(path):
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"condition", *FIELDS}
        if not need <= set(reader.fieldnames or []):
            raise InputError(f"{path}: expected columns condition,trial,{','.join(FIELDS)}")
        for lineno, r in enumerate(reader, start=2):
            try:
                pe = PlacementError(*(float(r[f]) for f in FIELDS))
                trial = int(r.get("trial") or lineno - 2)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            out.append((r["condition"], trial, pe))
    return out


def group_by_condition(rows):
    groups = {}
    for cond, _, pe in rows:
        groups.setdefault(cond, []).append(pe)
    return groups


def format_table(summaries, spec=".2f") -> str:
    """Plain-text table: one row per condition, mean ± std per field."""
    head = ["Navigation Target", *(FIELD_TITLES[f] for f in FIELDS)]
    body = [[s.condition, *s.row(spec)] for s in summaries]
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                       for i, (c, w) in enumerate(zip(r, widths)))
             for r in [head, *body]]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def pvalue_table(groups, reference, others):
    """p-values of ``reference`` against each of ``others`` for every field.

    Fields where both groups have zero variance get ``None``.
    """
    table = {}
    ref = np.array([g.as_tuple() for g in groups[reference]])
    for o in others:
        arr = np.array([g.as_tuple() for g in groups[o]])
        table[o] = {}
        for i, f in enumerate(FIELDS):
            try:
                table[o][f] = significance(ref[:, i], arr[:, i])
            except DegenerateError:
                table[o][f] = None
    return table

