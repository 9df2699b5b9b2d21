"""Scenario runner: reproducible experiments from declarative configs.

Subcommands: run <config>, constants <params>, verify <trajectory-dir>,
rescale <trajectory-dir>. Configs are TOML (JSON accepted); outputs are
CSV/JSON/SVG with deterministic bytes for identical configs. The env var
AMBIENTFLOW_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:             # Python < 3.11
    import tomli as tomllib

from . import __version__, constants, diagnostics, flow, svgout
from .field import AmbientField, estimate_bounds
from .geometry import ClosedCurve, build_parabola_closure

SCENARIOS = ("baseline-circle", "killing-equivalence", "loss-of-convexity",
             "round-point", "identity-audit", "constants")


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    with open(path, "rb") as f:
        raw = f.read()
    if str(path).endswith(".json"):
        return json.loads(raw)
    return tomllib.loads(raw.decode())


def _num(v):
    if v == "inf":
        return math.inf
    return v


def make_curve(spec: dict) -> ClosedCurve:
    kind = spec.get("kind")
    n = int(spec.get("n", 512))
    if kind == "circle":
        return ClosedCurve.circle(spec.get("r", 1.0), n,
                                  center=tuple(spec.get("center", (0.0, 0.0))))
    if kind == "ellipse":
        return ClosedCurve.ellipse(spec["a"], spec["b"], n,
                                   center=tuple(spec.get("center", (0.0, 0.0))))
    if kind == "parabola-closure":
        return build_parabola_closure(spec["eps"], spec.get("delta", 1.0), n)
    if kind == "file":
        path = spec["path"]
        if str(path).endswith(".json"):
            return ClosedCurve.from_json(path)
        return ClosedCurve.from_csv(path)
    raise ConfigError(f"unknown curve kind {kind!r}")


def make_control(spec: dict) -> flow.StepControl:
    kw = {}
    for name in ("dt", "c_cfl", "resample_every", "max_time", "area_floor",
                 "max_steps", "snapshot_every", "snapshot_dt",
                 "snapshot_area_ratio", "stop_on_nonconvex", "nonconvex_threshold"):
        if name in spec:
            kw[name] = _num(spec[name])
    return flow.StepControl(**kw)


def make_params(spec: dict) -> flow.FlowParams:
    return flow.FlowParams(sigma1=spec.get("sigma1", 1.0),
                           sigma2=spec.get("sigma2", 0.0))


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    raise TypeError(f"not serializable: {type(v)}")


def _sanitize(obj):
    """Make a config/manifest tree JSON-clean (inf -> 'inf', arrays -> lists)."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, float) and math.isnan(obj):
        return "nan"
    return obj


def write_manifest(outdir, manifest: dict) -> None:
    tmp = os.path.join(outdir, "manifest.json.tmp")
    with open(tmp, "w") as f:
        json.dump(_sanitize(manifest), f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, os.path.join(outdir, "manifest.json"))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (int, float, np.floating))
                        else v for v in row])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AMBIENTFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _run_one(config, outdir):
    """Evolve per config and persist the trajectory; returns (traj, files)."""
    curve = make_curve(config["curve"])
    fld = AmbientField.from_descriptor(config.get("field", {"kind": "zero"}))
    params = make_params(config.get("params", {}))
    control = make_control(config.get("control", {}))
    traj = flow.evolve(curve, fld, params, control)
    files = flow.save_trajectory(traj, outdir)
    svgout.render_svg(os.path.join(outdir, "curves.svg"),
                      [s.curve.vertices for s in traj.snapshots])
    files.append("curves.svg")
    return traj, files


def _scenario_baseline_circle(config, outdir):
    traj, files = _run_one(config, outdir)
    headline = {"stop_reason": traj.stop_reason,
                "max_winding_dev": float(np.abs(traj.col("W") - 1.0).max())}
    verdicts = {}
    if traj.stop_reason == "extinct":
        T, O = flow.estimate_extinction(traj)
        headline["T"] = T
        headline["O"] = [float(O[0]), float(O[1])]
    if len(traj.snapshots) >= 3:
        rep = diagnostics.identity_residuals(traj, traj.fld, traj.params)
        headline["identity_rel_length"] = rep.rel_length
        headline["identity_rel_area"] = rep.rel_area
        headline["identity_winding"] = rep.max_winding
    verdicts["winding_conserved"] = headline["max_winding_dev"] <= 1e-8
    return headline, verdicts, files


def _scenario_killing(config, outdir):
    opts = config.get("scenario_options", {})
    a = opts.get("a", 1.0)
    b = opts.get("b", 0.5)
    c = opts.get("c", -0.3)
    n_times = int(opts.get("matched_times", 20))
    tol_factor = opts.get("hausdorff_tol", 1e-3)

    curve = make_curve(config["curve"])
    params = make_params(config.get("params", {}))
    control = make_control(config.get("control", {}))
    base = flow.evolve(curve, AmbientField.zero(), params, control)
    actual = flow.evolve(curve, AmbientField.killing(a, b, c), params, control)
    pred = flow.rigid_motion_killing(base, a, b, c)

    t_end = min(base.snapshots[-1].t, actual.snapshots[-1].t)
    targets = np.linspace(0.0, t_end, n_times + 1)[1:]
    from .geometry import hausdorff_distance
    rows = []
    worst = 0.0
    for t in targets:
        sp = pred.state_at_time(t)
        sa = actual.state_at_time(t)
        d = hausdorff_distance(sp.curve, sa.curve)
        rows.append((t, d))
        worst = max(worst, d)
    write_csv(os.path.join(outdir, "killing_mismatch.csv"),
              ("t", "hausdorff"), rows)
    files = flow.save_trajectory(actual, outdir)
    files.append("killing_mismatch.csv")
    svgout.render_svg(os.path.join(outdir, "curves.svg"),
                      [s.curve.vertices for s in actual.snapshots])
    files.append("curves.svg")
    tol = tol_factor * curve.diameter
    headline = {"worst_hausdorff": worst, "tolerance": tol,
                "matched_times": n_times, "a": a, "b": b, "c": c}
    verdicts = {"killing_equivalence": worst <= tol}
    return headline, verdicts, files


def _scenario_loss(config, outdir):
    opts = config.get("scenario_options", {})
    eps_list = list(opts.get("eps_list", (0.1, 0.05, 0.025)))
    delta = opts.get("delta", 1.0)
    n = int(config.get("curve", {}).get("n", 1024))
    params = make_params(config.get("params", {}))
    control = make_control(config.get("control", {"stop_on_nonconvex": True,
                                                  "max_time": 2.0}))
    fld = AmbientField.from_descriptor(config.get("field", {"kind": "saddle"}))

    def one(eps):
        sub = os.path.join(outdir, f"eps_{eps:g}")
        os.makedirs(sub, exist_ok=True)
        curve = build_parabola_closure(eps, delta, n)
        traj = flow.evolve(curve, fld, params, control)
        files = flow.save_trajectory(traj, sub)
        svgout.render_svg(os.path.join(sub, "curves.svg"),
                          [s.curve.vertices for s in traj.snapshots])
        return eps, traj.nonconvex_time, traj.stop_reason, files

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(one, eps_list))
    rows = [(eps, t if t is not None else math.nan) for eps, t, _, _ in results]
    write_csv(os.path.join(outdir, "events.csv"), ("eps", "event_time"), rows)
    times = [t for _, t, _, _ in results]
    all_events = all(t is not None for t in times)
    ordered = all_events and all(
        t_hi >= t_lo - 1e-12
        for (e_hi, t_hi), (e_lo, t_lo)
        in zip(sorted(zip(eps_list, times), key=lambda p: -p[0])[:-1],
               sorted(zip(eps_list, times), key=lambda p: -p[0])[1:]))
    headline = {"eps_list": eps_list, "delta": delta,
                "event_times": [None if t is None else float(t) for t in times]}
    verdicts = {"all_events_recorded": all_events,
                "event_times_non_increasing": bool(ordered)}
    files = ["events.csv"] + [f"eps_{eps:g}/" for eps in eps_list]
    return headline, verdicts, files


def _scenario_round_point(config, outdir):
    opts = config.get("scenario_options", {})
    r0 = _num(opts.get("region_r0", math.inf))
    curve = make_curve(config["curve"])
    fld = AmbientField.from_descriptor(config.get("field", {"kind": "zero"}))
    params = make_params(config.get("params", {}))
    control = make_control(config.get("control", {}))

    hyp = constants.check_hypotheses(curve, fld, params, r0)
    traj = flow.evolve(curve, fld, params, control)
    files = flow.save_trajectory(traj, outdir)
    svgout.render_svg(os.path.join(outdir, "curves.svg"),
                      [s.curve.vertices for s in traj.snapshots])
    files.append("curves.svg")

    headline = {"stop_reason": traj.stop_reason,
                "K": hyp.constants.K, "M": hyp.constants.M,
                "case": hyp.constants.case,
                "min_k0": hyp.min_k0, "L0": hyp.length0,
                "max_winding_dev": float(np.abs(traj.col("W") - 1.0).max())}
    verdicts = {"hypotheses": hyp.all_satisfied,
                "winding_conserved": headline["max_winding_dev"] <= 1e-8,
                "min_k_preserved":
                    bool(traj.col("kmin").min() >= hyp.constants.K - 1e-3)}
    if traj.stop_reason == "extinct":
        T, O = flow.estimate_extinction(traj)
        headline["T"] = T
        headline["O"] = [float(O[0]), float(O[1])]
        rt = flow.rescale_trajectory(traj, T, O)
        files += _write_rescaled_reports(rt, params, outdir)
        rr = diagnostics.rescaled_roundness(rt)
        tail = rr.that >= rr.that.max() / 10.0
        headline["rescaled_area_dev"] = float(
            np.abs(rr.area[tail] - params.sigma1 * math.pi).max()
            / (params.sigma1 * math.pi))
        headline["roundness_ratio_max"] = float(rr.ratio[tail].max())
        headline["f_tail_max"] = float(np.nanmax(rr.f[tail]))
        verdicts["rescaled_area"] = headline["rescaled_area_dev"] <= 0.02
        verdicts["round_ratio"] = headline["roundness_ratio_max"] <= 1.02
        verdicts["f_small"] = headline["f_tail_max"] <= 0.05
        verdicts["reverse_isoperimetric"] = bool(rr.iso_slack.min() >= -1e-3)
        bounds = estimate_bounds(fld, r0 if math.isfinite(r0)
                                 else max(10.0, 2.0 * curve.diameter))
        sm = diagnostics.speed_monitor(traj, bounds, params, hyp.constants.K)
        headline["speed_violations"] = sm.violations
        verdicts["speed_bounds"] = not sm.violations
        ge = diagnostics.geometric_estimate(traj)
        verdicts["geometric_estimate"] = ge.all_hold
    return headline, verdicts, files


def _write_rescaled_reports(rt: flow.RescaledTrajectory, params, outdir) -> list[str]:
    files = []
    that, L, A, kmn, kmx = rt.series()
    write_csv(os.path.join(outdir, "rescaled.csv"),
              ("that", "Lhat", "Ahat", "kmin", "kmax"),
              zip(that, L, A, kmn, kmx))
    files.append("rescaled.csv")
    rr = diagnostics.rescaled_roundness(rt)
    write_csv(os.path.join(outdir, "roundness.csv"),
              ("that", "Ahat", "Lhat", "ratio", "f", "iso_slack"),
              zip(rr.that, rr.area, rr.length, rr.ratio, rr.f, rr.iso_slack))
    files.append("roundness.csv")
    gm = diagnostics.gaussian_monitor(rt, params)
    write_csv(os.path.join(outdir, "gaussian.csv"),
              ("that", "R", "dissipation", "q_max"),
              zip(gm.that, gm.R, gm.dissipation, gm.q_max))
    files.append("gaussian.csv")
    svgout.render_svg(os.path.join(outdir, "rescaled.svg"),
                      [s.curve.vertices for s in rt.snapshots])
    files.append("rescaled.svg")
    return files


def _scenario_identity_audit(config, outdir):
    opts = config.get("scenario_options", {})
    ladder = list(opts.get("ladder", (128, 181, 256)))
    fld = AmbientField.from_descriptor(config.get("field", {"kind": "zero"}))
    params = make_params(config.get("params", {}))
    base_curve = dict(config["curve"])
    control_spec = dict(config.get("control", {}))
    control_spec.setdefault("snapshot_every", 1)
    control_spec.setdefault("max_time", 0.01)

    def one(n):
        spec = dict(base_curve)
        spec["n"] = n
        curve = make_curve(spec)
        traj = flow.evolve(curve, fld, params, make_control(control_spec))
        rep = diagnostics.identity_residuals(traj, fld, params)
        return n, rep

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(one, ladder))
    rows = [(n, r.rel_length, r.rel_area, r.max_winding) for n, r in reports]
    write_csv(os.path.join(outdir, "identity_residuals.csv"),
              ("n", "rel_length", "rel_area", "winding_abs"), rows)
    orders = []
    for (n0, r0), (n1, r1) in zip(reports[:-1], reports[1:]):
        orders.append({
            "n_coarse": n0, "n_fine": n1,
            "order_length": diagnostics.convergence_order(r0.rel_length, r1.rel_length),
            "order_area": diagnostics.convergence_order(r0.rel_area, r1.rel_area),
            "order_winding": diagnostics.convergence_order(r0.max_winding, r1.max_winding),
        })
    finest = reports[-1][1]
    headline = {"ladder": ladder, "orders": orders,
                "finest_rel_length": finest.rel_length,
                "finest_rel_area": finest.rel_area,
                "finest_winding": finest.max_winding}
    ok_orders = all(
        (o["order_length"] is None or o["order_length"] >= 0.58)
        and (o["order_area"] is None or o["order_area"] >= 0.58)
        for o in orders)
    verdicts = {"residuals_small": finest.rel_length <= 1e-3
                and finest.rel_area <= 1e-3 and finest.max_winding <= 1e-6,
                "order_at_least_one": ok_orders}
    return headline, verdicts, ["identity_residuals.csv"]


def _scenario_constants(config, outdir):
    opts = config.get("scenario_options", {})
    params = make_params(config.get("params", {}))
    rep = constants.compute_constants(
        params.sigma1, params.sigma2,
        opts.get("c0", 0.0), opts.get("c1", 0.0), opts.get("c2", 0.0),
        case=opts.get("case", "a"))
    with open(os.path.join(outdir, "constants.json"), "w") as f:
        f.write(rep.to_json())
        f.write("\n")
    headline = {"K": rep.K, "M": rep.M, "case": rep.case}
    return headline, {}, ["constants.json"]


_RUNNERS = {
    "baseline-circle": _scenario_baseline_circle,
    "killing-equivalence": _scenario_killing,
    "loss-of-convexity": _scenario_loss,
    "round-point": _scenario_round_point,
    "identity-audit": _scenario_identity_audit,
    "constants": _scenario_constants,
}


def run_scenario(config: dict, outdir=None) -> dict:
    """Execute one scenario config; writes outputs and returns the manifest."""
    name = config.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {name!r}")
    outdir = outdir or config.get("output_dir")
    if not outdir:
        raise ConfigError("config needs output_dir (or pass --out)")
    os.makedirs(outdir, exist_ok=True)
    headline, verdicts, files = _RUNNERS[name](config, outdir)
    manifest = {
        "schema": "ambientflow-run-1",
        "version": __version__,
        "scenario": name,
        "config": config,
        "headline": headline,
        "verdicts": verdicts,
        "files": sorted(files) + ["manifest.json"],
    }
    write_manifest(outdir, manifest)
    return manifest


# ---------------------------------------------------------------------------
# verify / rescale over stored trajectory directories


def verify_trajectory_dir(dirpath) -> dict:
    traj = flow.load_trajectory(dirpath)
    report = {"dir": str(dirpath), "stop_reason": traj.stop_reason}
    wdev = float(np.abs(traj.col("W") - 1.0).max()) if len(traj.series) else 0.0
    verdicts = {"winding_conserved": wdev <= 1e-8}
    report["max_winding_dev"] = wdev
    if len(traj.snapshots) >= 3:
        rep = diagnostics.identity_residuals(traj, traj.fld, traj.params)
        report["identity_rel_length"] = rep.rel_length
        report["identity_rel_area"] = rep.rel_area
        report["identity_winding"] = rep.max_winding
    ge = diagnostics.geometric_estimate(traj)
    report["geometric_estimate_skipped"] = ge.skipped
    verdicts["geometric_estimate"] = ge.all_hold
    db = diagnostics.derivative_boundedness(traj)
    report["max_k_s"] = float(db.max_k_s.max()) if len(db.max_k_s) else 0.0
    report["verdicts"] = verdicts
    with open(os.path.join(dirpath, "verify.json"), "w") as f:
        json.dump(_sanitize(report), f, indent=2, sort_keys=True)
        f.write("\n")
    return report


def rescale_trajectory_dir(dirpath) -> dict:
    traj = flow.load_trajectory(dirpath)
    T, O = flow.estimate_extinction(traj)
    rt = flow.rescale_trajectory(traj, T, O)
    files = _write_rescaled_reports(rt, traj.params, dirpath)
    out = {"T": T, "O": [float(O[0]), float(O[1])], "files": files}
    with open(os.path.join(dirpath, "rescale.json"), "w") as f:
        json.dump(_sanitize(out), f, indent=2, sort_keys=True)
        f.write("\n")
    return out


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ambientflow")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config (TOML or JSON)")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the output directory")
    p_run.add_argument("--strict", action="store_true",
                       help="exit nonzero when any verdict fails")

    p_const = sub.add_parser("constants", help="print the constants report as JSON")
    p_const.add_argument("--sigma1", type=float, default=1.0)
    p_const.add_argument("--sigma2", type=float, default=0.0)
    p_const.add_argument("--c0", type=float, default=0.0)
    p_const.add_argument("--c1", type=float, default=0.0)
    p_const.add_argument("--c2", type=float, default=0.0)
    p_const.add_argument("--case", choices=("a", "b", "c"), default="a")
    p_const.add_argument("--x-t0", type=float, default=None,
                         help="confinement ODE value x(T0) for case c")

    p_ver = sub.add_parser("verify", help="re-run monitors over a trajectory dir")
    p_ver.add_argument("trajectory_dir")
    p_ver.add_argument("--strict", action="store_true")

    p_res = sub.add_parser("rescale", help="rescale a stored extinct trajectory")
    p_res.add_argument("trajectory_dir")

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            config = load_config(args.config)
            manifest = run_scenario(config, outdir=args.out)
        except (ConfigError, KeyError, OSError, tomllib.TOMLDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(json.dumps(_sanitize(manifest["headline"]), indent=2, sort_keys=True))
        if args.strict and not all(manifest["verdicts"].values()):
            failed = [k for k, v in manifest["verdicts"].items() if not v]
            print(f"verification failed: {failed}", file=sys.stderr)
            return 1
        return 0

    if args.command == "constants":
        if args.case == "c":
            if args.x_t0 is None:
                print("case c needs --x-t0", file=sys.stderr)
                return 2
            K, cubic = constants.curvature_threshold_K(
                args.sigma1, args.sigma2, args.c1, args.c2)
            M = constants.length_threshold_M("c", args.sigma1, args.sigma2,
                                             args.c0, args.c1, x_t0=args.x_t0)
            rep = constants.ConstantsReport(
                sigma1=args.sigma1, sigma2=args.sigma2, c0=args.c0,
                c1=args.c1, c2=args.c2, K=K, cubic=cubic, case="c", M=M,
                t0=1.0 / (args.sigma1 * math.pi), x_t0=args.x_t0)
        else:
            rep = constants.compute_constants(args.sigma1, args.sigma2,
                                              args.c0, args.c1, args.c2,
                                              case=args.case)
        print(rep.to_json())
        return 0

    if args.command == "verify":
        report = verify_trajectory_dir(args.trajectory_dir)
        print(json.dumps(_sanitize(report), indent=2, sort_keys=True))
        if args.strict and not all(report["verdicts"].values()):
            return 1
        return 0

    if args.command == "rescale":
        try:
            out = rescale_trajectory_dir(args.trajectory_dir)
        except flow.EstimatorInapplicableError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(json.dumps(_sanitize(out), indent=2, sort_keys=True))
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
