"""Command-line entry point.

Exit status: 0 success, 2 input error (parse, frames, counts, ordering),
3 numerical/degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .calibration import PivotResult, ShaftAxisFit, pivot_calibrate, shaft_axis_fit
from .errors import InputError, NoIntersectionError, NumericalError
from .geometry import Frame, FramedTransform, Line3
from .metrics import (format_table, group_by_condition, pvalue_table,
                      read_trials_csv, summarize, write_trials_csv)
from .navigation import (TrajectoryPlan, error_indicator, read_point_cloud,
                         surface_marker, tool_axis_world, world_trajectory)
from .registration import ct_register, paired_point_register
from .simulation import (CONDITIONS, StudyConfig, default_config,
                         run_study, simulate_e2e)
from .tracking import DEFAULT_GRACE_S, filter_stream, gate_navigation, read_pose_stream

log = logging.getLogger("kwnav")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

E2E_BAND = (1.92, 3.86)


# -- small I/O helpers ---------------------------------------------------------

def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                         f"{exc.msg}") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_transform(path) -> FramedTransform:
    return FramedTransform.from_literal(_load_json(path))


def _load_points(path) -> np.ndarray:
    """Point list from a bare JSON array or a marker-layout object."""
    obj = _load_json(path)
    if isinstance(obj, dict) and "points" in obj:
        pts = obj["points"]
        obj = list(pts.values()) if isinstance(pts, dict) else pts
    try:
        P = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{path}: expected a list of [x, y, z] points") from None
    if P.ndim != 2 or P.shape[1] != 3:
        raise InputError(f"{path}: expected a list of [x, y, z] points")
    return P


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _out(args, name):
    os.makedirs(args.output_dir, exist_ok=True)
    return os.path.join(args.output_dir, name)


def write_manifest(args, command, inputs, config, outputs):
    """Manifest next to the outputs: enough to check a rerun byte for byte."""
    manifest = {
        "command": command,
        "inputs": [os.path.basename(str(p)) for p in inputs],
        "input_sha256": {os.path.basename(str(p)): _sha256(p) for p in inputs},
        "config_sha256": _config_hash(config),
        "seed": args.seed,
        "version": __version__,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    return _dump_json(manifest, _out(args, f"{command}_manifest.json"))


def _say(args, text):
    if not args.quiet:
        print(text)


# -- commands --------------------------------------------------------------------

def cmd_pivot(args):
    obj = _load_json(args.input)
    if not isinstance(obj, list):
        raise InputError(f"{args.input}: expected a JSON array of transform literals")
    poses = [FramedTransform.from_literal(o).xf for o in obj]
    res = pivot_calibrate(poses)
    out = _dump_json(res.to_dict(), args.output or _out(args, "pivot_result.json"))
    write_manifest(args, "pivot", [args.input], {"command": "pivot"}, [out])
    _say(args, f"tip offset {np.round(res.tip_offset, 3).tolist()} mm, "
               f"rms {res.rms_error:.3f} mm, mean {res.mean_error:.3f} mm")
    return EXIT_OK


def cmd_shaft_fit(args):
    pts = []
    for path in args.inputs:
        obj = _load_json(path)
        if isinstance(obj, dict) and "tip_offset" in obj:
            pts.append(PivotResult.from_dict(obj).tip_offset)
        else:
            pts.extend(_load_points(path))
    fit = shaft_axis_fit(np.asarray(pts, dtype=float))
    out = _dump_json(fit.to_dict(), args.output or _out(args, "shaft_axis.json"))
    write_manifest(args, "shaft-fit", args.inputs, {"command": "shaft-fit"}, [out])
    _say(args, f"shaft direction {np.round(fit.axis.direction, 5).tolist()}, "
               f"residual rms {fit.residual_rms:.3f} mm")
    return EXIT_OK


def cmd_register(args):
    model = _load_points(args.model)
    observed = _load_points(args.observed)
    if len(model) != len(observed):
        raise InputError(f"model has {len(model)} points but observed has {len(observed)}")
    res = paired_point_register(model, observed, args.frm, args.to)
    out = _dump_json(res.to_dict(), args.output or _out(args, "registration.json"))
    write_manifest(args, "register", [args.model, args.observed],
                   {"from": args.frm, "to": args.to}, [out])
    _say(args, f"FRE {res.fre_rms:.4f} mm")
    return EXIT_OK


def cmd_ct_register(args):
    f_pi = ct_register(_load_transform(args.tp), _load_transform(args.tm),
                       _load_transform(args.mi))
    out = _dump_json(f_pi.to_literal(), args.output or _out(args, "ct_registration.json"))
    write_manifest(args, "ct-register", [args.tp, args.tm, args.mi], {}, [out])
    return EXIT_OK


def _load_shaft(path) -> Line3:
    obj = _load_json(path)
    try:
        return ShaftAxisFit.from_dict(obj).axis
    except (KeyError, TypeError, ValueError):
        raise InputError(f"{path}: expected {{\"point\": [...], \"direction\": [...]}}") from None


INDICATOR_HEADER = ["t_s", "entry_radius_mm", "end_radius_mm",
                    "entry_hatch_x", "entry_hatch_y", "entry_hatch_z",
                    "end_hatch_x", "end_hatch_y", "end_hatch_z"]


def indicator_rows(plan, f_pi, shaft, samples, grace=DEFAULT_GRACE_S):
    """Indicator geometry per timestamp, skipping frames while suspended.

    ``samples`` must be ordered by time. The latest valid pose of each body is
    used; W->H defaults to identity when the stream carries none (radii do not
    depend on it).
    """
    latest = {}
    last_valid = {"tool": -np.inf, "patient": -np.inf}
    times = []
    for s in samples:
        if times and s.t < times[-1]:
            raise InputError(f"pose stream goes back in time at t={s.t}")
        if not times or s.t != times[-1]:
            times.append(s.t)
    by_t = {}
    for s in samples:
        by_t.setdefault(s.t, []).append(s)

    rows = []
    suppressed = 0
    for t in times:
        for s in by_t[t]:
            key = (s.pose.frm, s.pose.to)
            if s.valid:
                latest[key] = s.pose
                if key == (Frame.HMD, Frame.CANNULA):
                    last_valid["tool"] = t
                elif key == (Frame.HMD, Frame.PATIENT):
                    last_valid["patient"] = t
        state = gate_navigation(last_valid["tool"], last_valid["patient"], t, grace)
        if not state.active:
            suppressed += 1
            continue
        f_wh = latest.get((Frame.WORLD, Frame.HMD), FramedTransform.identity("W", "H"))
        f_hp = latest[(Frame.HMD, Frame.PATIENT)]
        f_hc = latest[(Frame.HMD, Frame.CANNULA)]
        entry_w, exit_w, _ = world_trajectory(f_wh, f_hp, f_pi, plan)
        tool = tool_axis_world(f_wh, f_hc, shaft)
        try:
            ind = error_indicator(tool, entry_w, exit_w)
        except NoIntersectionError:
            suppressed += 1
            continue
        rows.append((t, ind))
    return rows, suppressed


def cmd_indicate(args):
    plan = TrajectoryPlan.load(args.plan)
    f_pi = _load_transform(args.ct_registration)
    if (f_pi.frm, f_pi.to) != (Frame.PATIENT, Frame.IMAGE):
        raise InputError(f"{args.ct_registration}: expected a P->I transform")
    shaft = _load_shaft(args.shaft)
    samples = read_pose_stream(args.stream)
    if args.filter:
        bodies = {}
        for s in samples:
            bodies.setdefault((s.pose.frm, s.pose.to), []).append(s)
        samples = sorted((f for b in bodies.values() for f in filter_stream(b)),
                         key=lambda s: s.t)
    rows, suppressed = indicator_rows(plan, f_pi, shaft, samples, args.grace)

    out = args.output or _out(args, "indicators.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INDICATOR_HEADER)
        for t, ind in rows:
            eh = ind.entry_hatch if ind.entry_hatch is not None else [""] * 3
            xh = ind.end_hatch if ind.end_hatch is not None else [""] * 3
            w.writerow([repr(float(t)), repr(ind.entry_radius), repr(ind.end_radius),
                        *(v if v == "" else repr(float(v)) for v in eh),
                        *(v if v == "" else repr(float(v)) for v in xh)])
    outputs = [out]
    if rows and args.figures:
        from .plotting import plot_indicator_trace
        ts = [t for t, _ in rows]
        outputs.append(plot_indicator_trace(ts, [i.entry_radius for _, i in rows],
                                            [i.end_radius for _, i in rows],
                                            _out(args, "indicators.png")))
    write_manifest(args, "indicate",
                   [args.plan, args.ct_registration, args.shaft, args.stream],
                   {"grace": args.grace, "filter": args.filter}, outputs)
    _say(args, f"{len(rows)} indicator rows, {suppressed} frames suppressed")
    return EXIT_OK


def cmd_surface_marker(args):
    cloud = read_point_cloud(args.cloud)
    plan = TrajectoryPlan.load(args.plan)
    # insertion direction, so the fitted normal faces out of the skin
    axis = Line3(plan.entry, plan.exit - plan.entry)
    m = surface_marker(cloud, axis, args.k)
    out = _dump_json({"position_mm": m.position.tolist(), "normal": m.normal.tolist(),
                      "index": m.index}, args.output or _out(args, "surface_marker.json"))
    write_manifest(args, "surface-marker", [args.cloud, args.plan], {"k": args.k}, [out])
    _say(args, f"marker at {np.round(m.position, 3).tolist()} mm")
    return EXIT_OK


def _study_report(groups, meta):
    summaries = [summarize(v, k) for k, v in groups.items()]
    report = {"conditions": [s.to_dict() for s in summaries]}
    pv = {}
    for suffix in ("", " + surface marker"):
        ref = "Cannula" + suffix
        others = [n + suffix for n in ("Non-tracked", "Drill") if n + suffix in groups]
        if ref in groups and others:
            pv[ref] = pvalue_table(groups, ref, others)
    report["p_values"] = pv
    report.update(meta)
    return report, summaries


def cmd_metrics(args):
    rows = read_trials_csv(args.trials)
    groups = group_by_condition(rows)
    report, summaries = _study_report(groups, {})
    out = _dump_json(report, args.output or _out(args, "metrics_report.json"))
    outputs = [out]
    if args.figures:
        from .plotting import plot_study
        outputs.append(plot_study(groups, _out(args, "metrics_report.png")))
    write_manifest(args, "metrics", [args.trials], {}, outputs)
    _say(args, format_table(summaries))
    return EXIT_OK


def _load_config(args) -> StudyConfig:
    cfg = StudyConfig.load(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "trials", None):
        cfg = replace(cfg, trials=args.trials)
    args.seed = cfg.seed
    return cfg


def cmd_simulate_e2e(args):
    cfg = _load_config(args)
    rng = np.random.default_rng(cfg.seed)
    landmarks = rng.uniform(-60.0, 60.0, size=(args.landmarks, 3))
    trials = args.e2e_trials or cfg.e2e_trials
    res = simulate_e2e(cfg.budget, landmarks, trials, rng)
    report = {**res.to_dict(), "landmarks": args.landmarks, "trials": trials,
              "budget": cfg.to_dict()["budget"]}
    out = _dump_json(report, _out(args, "e2e_report.json"))
    samples = _out(args, "e2e_samples.csv")
    with open(samples, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "landmark", "error_mm"])
        for i, row in enumerate(res.samples):
            for j, v in enumerate(row):
                w.writerow([i, j, repr(float(v))])
    outputs = [out, samples]
    if args.figures:
        from .plotting import plot_e2e
        outputs.append(plot_e2e(res.samples, _out(args, "e2e_hist.png"), band=E2E_BAND))
    write_manifest(args, "simulate-e2e", [args.config] if args.config else [],
                   {**cfg.to_dict(), "landmarks": args.landmarks, "trials": trials}, outputs)
    _say(args, f"end-to-end error {res.mean:.2f} ± {res.std:.2f} mm "
               f"({args.landmarks} landmarks x {trials} trials)")
    return EXIT_OK


def cmd_simulate_study(args):
    cfg = _load_config(args)
    groups = run_study(cfg, CONDITIONS, workers=args.workers)
    report, summaries = _study_report(groups, {"seed": cfg.seed, "trials": cfg.trials})
    out = _dump_json(report, _out(args, "study_report.json"))
    trials_csv = _out(args, "study_trials.csv")
    write_trials_csv(trials_csv, [(name, i, pe) for name, pes in groups.items()
                                  for i, pe in enumerate(pes)])
    outputs = [out, trials_csv]
    if args.figures:
        from .plotting import plot_study
        outputs.append(plot_study(groups, _out(args, "study_errors.png")))
    write_manifest(args, "simulate-study", [args.config] if args.config else [],
                   cfg.to_dict(), outputs)
    _say(args, format_table(summaries))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="kwnav", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    p.add_argument("--config", help="study config JSON (simulate commands)")
    p.add_argument("--output-dir", default=".", help="directory for outputs and manifests")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip PNG figures")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("pivot", help="pivot calibration from tracked poses")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_pivot)

    s = sub.add_parser("shaft-fit", help="shaft axis from tip offsets or pivot results")
    s.add_argument("inputs", nargs="+")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_shaft_fit)

    s = sub.add_parser("register", help="paired-point registration")
    s.add_argument("model")
    s.add_argument("observed")
    s.add_argument("--from", dest="frm", default="T")
    s.add_argument("--to", default="M")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_register)

    s = sub.add_parser("ct-register", help="compose the CT-to-patient registration")
    s.add_argument("--tp", required=True, help="T->P transform literal")
    s.add_argument("--tm", required=True, help="T->M transform literal")
    s.add_argument("--mi", required=True, help="M->I transform literal")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_ct_register)

    s = sub.add_parser("indicate", help="error-indicator geometry along a pose stream")
    s.add_argument("plan")
    s.add_argument("stream")
    s.add_argument("--ct-registration", required=True, help="P->I transform literal")
    s.add_argument("--shaft", required=True, help="shaft axis JSON (cannula frame)")
    s.add_argument("--grace", type=float, default=DEFAULT_GRACE_S)
    s.add_argument("--filter", action="store_true", help="Kalman-filter each body first")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_indicate)

    s = sub.add_parser("surface-marker", help="skin insertion marker from a point cloud")
    s.add_argument("cloud")
    s.add_argument("--plan", required=True)
    s.add_argument("-k", type=int, default=500)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_surface_marker)

    s = sub.add_parser("metrics", help="summaries and p-values from a per-trial CSV")
    s.add_argument("trials")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("simulate-e2e", help="touch-point error Monte Carlo")
    s.add_argument("--landmarks", type=int, default=7)
    s.add_argument("--trials", dest="e2e_trials", type=int, default=None)
    s.set_defaults(func=cmd_simulate_e2e)

    s = sub.add_parser("simulate-study", help="simulated insertion study")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate_study)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
