"""Command line: build and certify curves, re-certify, flow tables, plot exports.

Exit codes: 0 when every enforced certificate section passes, 1 otherwise,
2 for unreadable or malformed input (with a JSON error object on stderr).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import certify as cert
from .automorphisms import CompositeAut, HyperplaneUnion
from .flows import (
    commuting_benchmark, convergence_study, noncommuting_benchmark, schedule_from_json,
    table_csv,
)
from .numerics import cfrom, cpair
from .pipelines import lemma3, prop1, prop5, prop6, prop7
from .pipelines.common import (
    HoloCurve, PipelineError, SceneError, cvec, parse_body, parse_factors, parse_obstacle,
    parse_points,
)
from .regions import (
    Mirror, comb_base, comb_cell, lattice, re_at_least,
)

DEFAULT_PITCH = 0.25
INJECTIVITY_POINTS = 2500  # cap on the injectivity grid (pairwise work is quadratic)
TRACE_SAMPLES = 401


class InputError(ValueError):
    """Malformed input: reported with exit code 2."""


# --------------------------------------------------------------------------
# options and scene access


class Options:
    def __init__(self, seed: int = 0, pitch: float | None = None, rver: float | None = None,
                 strict: bool = False):
        self.seed, self.pitch, self.rver, self.strict = int(seed), pitch, rver, bool(strict)

    def radius(self, scene: dict, default: float) -> float:
        if self.rver is not None:
            return float(self.rver)
        return float(scene.get("params", {}).get("R_ver", default))

    def grid_pitch(self, scene: dict) -> float:
        if self.pitch is not None:
            return float(self.pitch)
        return float(scene.get("params", {}).get("pitch", DEFAULT_PITCH))


def _param(scene: dict, key: str, default=None):
    return scene.get("params", {}).get(key, default)


def _point(v) -> np.ndarray:
    return cvec(v)


def _plain_points(scene: dict) -> list:
    return [_point(p) for p in scene.get("points", [])]


def _injectivity_pitch(R: float, pitch: float) -> float:
    h = pitch
    while len(lattice(R, h)) > INJECTIVITY_POINTS:
        h *= 2
    return h


# --------------------------------------------------------------------------
# construction


def construct(scene: dict, opts: Options) -> dict:
    """Run the scene's pipeline.  Returns {"curve"|"automorphism", "stages"}."""
    name = scene.get("pipeline")
    if name == "prop1_line":
        F = parse_obstacle(scene.get("F")) or HyperplaneUnion.coordinate(2, [1])
        c = prop1.prop1_line(parse_points(scene), F, opts.radius(scene, 3.0))
        return {"curve": c, "stages": c.stages}
    if name == "prop1_convex":
        F = parse_body(scene["F"])
        c = prop1.prop1_convex(parse_points(scene), F, opts.radius(scene, 12.0),
                               strict=opts.strict)
        return {"curve": c, "stages": c.stages}
    if name == "prop2_initial":
        c = prop5.prop2_initial(int(scene.get("n", 2)))
        return {"curve": c, "stages": c.stages}
    if name == "lemma3":
        K = parse_body(scene["F"])
        H = _hyperplanes(scene, K.n)
        phi = lemma3.lemma3_move(K, _lemma3_A(scene, K.n), H, _point(scene["p"]),
                                 _point(scene["q"]), float(_param(scene, "eps", 0.1)))
        return {"automorphism": phi, "stages": [{"step": "lemma3_move",
                                                 "factors": len(phi.factors)}]}
    if name == "prop5":
        return _build_prop5(scene, opts)
    if name == "prop6":
        F, G = parse_factors(scene["F"])
        c = prop6.prop6_immersion(_plain_points(scene), F, G, int(_param(scene, "J", 3)),
                                  _param(scene, "eps"), strict=opts.strict)
        return {"curve": c, "stages": c.stages}
    if name == "prop7":
        F, G = parse_factors(scene["F"])
        jets = scene.get("jets") or {}
        c = prop7.prop7_jet(F, G, _point(jets["c"]), _point(jets["X"]))
        return {"curve": c, "stages": c.stages}
    raise SceneError(f"unknown pipeline {name!r}")


def _hyperplanes(scene: dict, n: int) -> HyperplaneUnion | None:
    H = scene.get("H")
    if H is None:
        return None
    if isinstance(H, dict) and "indices" in H:
        return HyperplaneUnion.coordinate(n, [int(i) for i in H["indices"]])
    return HyperplaneUnion.from_json(H)


def _lemma3_A(scene: dict, n: int) -> np.ndarray:
    A = [_point(a) for a in scene.get("A", [])]
    return np.array(A, dtype=complex).reshape(-1, n)


def _nodes_json(nodes) -> list:
    return [{"zeta": cpair(z), "point": [cpair(c) for c in a]} for z, a in nodes]


def _nodes_from_json(data) -> list:
    return [(cfrom(r["zeta"]), cvec(r["point"])) for r in data]


def _build_prop5(scene: dict, opts: Options) -> dict:
    K = parse_body(scene["F"])
    pts = _plain_points(scene)
    X = _point((scene.get("jets") or {})["X"])
    curve, _, records, _, history = prop5.prop5_run(
        K, pts, X, deltas=_param(scene, "deltas"), R_ver=opts.radius(scene, 8.0))
    # every stage curve is kept: closeness of consecutive stages is re-checked
    # from them, and reparametrization moves the earlier nodes between stages
    data = {"X": [cpair(c) for c in X],
            "rho": [r["rho"] for r in records],
            "delta": [r["delta"] for r in records],
            "history": [{"components": c.to_json()["components"], "nodes": _nodes_json(nd)}
                        for c, nd in history[:-1]],
            "nodes": _nodes_json(history[-1][1])}
    return {"curve": HoloCurve(curve.components, "prop5", records, data), "stages": records}


# --------------------------------------------------------------------------
# certification (shared by build and verify)


def certify(scene: dict, obj: dict, opts: Options) -> dict:
    """Certificate recomputed from the serialized object and the scene alone."""
    name = scene.get("pipeline")
    pitch = opts.grid_pitch(scene)
    if name == "lemma3":
        K = parse_body(scene["F"])
        phi = obj["automorphism"]
        secs = lemma3.certify_move(phi, K, _lemma3_A(scene, K.n), _hyperplanes(scene, K.n),
                                   _point(scene["p"]), _point(scene["q"]),
                                   float(_param(scene, "eps", 0.1)), seed=opts.seed)
        return cert.assemble(secs, 0.0, pitch)
    curve = obj["curve"]
    if name == "prop1_line":
        R = opts.radius(scene, 3.0)
        F = parse_obstacle(scene.get("F")) or HyperplaneUnion.coordinate(2, [1])
        pts = parse_points(scene)
        secs = {"interpolation": cert.check_interpolation(curve, pts),
                "avoidance": cert.check_avoidance(curve, F, R, pitch),
                "immersion": cert.check_immersion(curve, R, pitch),
                "injectivity": cert.check_injectivity(curve, R, _injectivity_pitch(R, pitch))}
        secs["lempert"] = cert.lempert_section(pts, R, secs["avoidance"]["pass"])
        return cert.assemble(secs, R, pitch)
    if name == "prop1_convex":
        R = opts.radius(scene, 12.0)
        F = parse_body(scene["F"])
        pts = parse_points(scene)
        frame = prop1.verify_frame(curve.data.get("frame", {}), curve.components, F)
        graph = bool(frame["pass"])
        secs = {"frame": frame,
                "interpolation": cert.check_interpolation(curve, pts),
                "avoidance": cert.check_avoidance(curve, F, R, pitch, structural=graph),
                "immersion": cert.check_immersion(curve, R, pitch, structural=graph),
                "injectivity": cert.check_injectivity(curve, R, _injectivity_pitch(R, pitch),
                                                      structural=graph)}
        secs["lempert"] = cert.lempert_section(pts, R, secs["avoidance"]["pass"])
        extra = {"relaxations": curve.data.get("relaxations", []),
                 "strict": bool(curve.data.get("strict", False))}
        return cert.assemble(secs, R, pitch, extra)
    if name == "prop2_initial":
        R = opts.radius(scene, 3.0)
        secs = {}
        for i in range(curve.n):
            H = HyperplaneUnion.coordinate(curve.n, [i])
            secs[f"avoidance_z{i + 1}"] = cert.check_avoidance(curve, H, R, pitch)
        secs["immersion"] = cert.check_immersion(curve, R, pitch)
        secs["properness"] = cert.properness_proxy(curve, [1.0, 2.0, 3.0, 4.0])
        return cert.assemble(secs, R, pitch)
    if name == "prop5":
        return _certify_prop5(scene, curve, opts, pitch)
    if name == "prop6":
        F, G = parse_factors(scene["F"])
        R = opts.radius(scene, prop6.fit_radius(int(curve.data.get("J", 0))))
        secs = prop6.prop6_sections(curve, F, G, R, pitch)
        return cert.assemble(secs, R, pitch, {"truncation": curve.data.get("J"),
                                              "relaxations": curve.data.get("relaxations", []),
                                              "strict": bool(curve.data.get("strict", False))})
    if name == "prop7":
        F, G = parse_factors(scene["F"])
        jets = scene.get("jets") or {}
        c, X = _point(jets["c"]), _point(jets["X"])
        R = opts.radius(scene, 5.0)
        secs = prop7.prop7_sections(curve, F, G, c, X, R, pitch, seed=opts.seed)
        secs["kobayashi"] = cert.kobayashi_section(X, R, secs["avoidance"]["pass"])
        return cert.assemble(secs, R, pitch)
    raise SceneError(f"unknown pipeline {name!r}")


def _certify_prop5(scene: dict, curve: HoloCurve, opts: Options, pitch: float) -> dict:
    K = parse_body(scene["F"])
    R = opts.radius(scene, 8.0)
    d = curve.data
    try:
        X = cvec(d["X"])
        stages = [(HoloCurve.from_json(h), _nodes_from_json(h["nodes"])) for h in d["history"]]
        stages.append((curve, _nodes_from_json(d["nodes"])))
        rhos, deltas = [float(r) for r in d["rho"]], [float(v) for v in d["delta"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"curve data lacks the stage record: {exc}") from exc
    if not (len(stages) - 1 == len(rhos) == len(deltas)):
        raise InputError("stage history does not match the radii and budgets")
    nodes = stages[-1][1]
    jet = (nodes[0][0], X)
    secs = {}
    for j in range(1, len(stages)):
        secs[f"stage_{j}"] = _stage_section(prop5.stage_checks(
            stages[j - 1][0], stages[j][0], stages[j][1], K, rhos[j - 1], deltas[j - 1],
            jet, R, pitch))
    secs["interpolation"] = cert.check_interpolation(
        curve, nodes, jets=[(jet[0], nodes[0][1], X)])
    secs["avoidance"] = cert.check_avoidance(curve, K, R, pitch)
    secs["immersion"] = cert.check_immersion(curve, R, pitch)
    secs["lempert"] = cert.lempert_section(nodes, R, secs["avoidance"]["pass"])
    return cert.assemble(secs, R, pitch)


def _stage_section(checks: dict) -> dict:
    return {"pass": all(v["pass"] for v in checks.values()), **checks}


# --------------------------------------------------------------------------
# serialization


def clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars plain numbers."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return clean([obj.real, obj.imag])
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, allow_nan=False) + "\n"


def result_json(scene: dict, built: dict, certificate: dict) -> dict:
    out = {"schema": cert.SCHEMA, "pipeline": scene.get("pipeline")}
    if "curve" in built:
        out["curve"] = built["curve"].to_json()
    else:
        out["automorphism"] = built["automorphism"].to_json()
    out["stages"] = built["stages"]
    out["certificate"] = certificate
    out["scene"] = scene
    return out


def object_from_json(data: dict, scene: dict) -> dict:
    """Curve or automorphism from a result file or a bare curve/automorphism object."""
    if not isinstance(data, dict):
        raise InputError("curve file must hold a JSON object")
    try:
        if "automorphism" in data:
            return {"automorphism": CompositeAut.from_json(data["automorphism"])}
        if "curve" in data:
            return {"curve": HoloCurve.from_json(data["curve"], scene.get("pipeline", ""))}
        if "components" in data:
            return {"curve": HoloCurve.from_json(data, scene.get("pipeline", ""))}
        if "factors" in data:
            return {"automorphism": CompositeAut.from_json(data)}
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"malformed curve description: {exc}") from exc
    raise InputError("no curve or automorphism found")


def load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path} must hold a JSON object")
    return data


# --------------------------------------------------------------------------
# report


def region_boundary(region, R: float, h: float) -> np.ndarray:
    """Lattice points of the region with a lattice neighbour outside it."""
    z = lattice(R, h)
    inside = np.asarray(region.contains(z), bool)
    edge = np.zeros(len(z), bool)
    for step in (h, -h, 1j * h, -1j * h):
        edge |= inside & ~np.asarray(region.contains(z + step), bool)
    return z[edge]


def _write_csv(path: Path, header: list, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if v is not None else "" for v in r])


def _trace_rows(curve: HoloCurve, t: np.ndarray):
    vals = cert.curve_values(curve, t)
    for s, v in zip(t, vals):
        row = [s.real, s.imag]
        for c in v:
            row += [None, None] if np.isnan(c) else [c.real, c.imag]
        yield row


def report(result: dict, outdir: Path) -> list[str]:
    """Curve traces and region boundaries as CSV files; returns the file names."""
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    scene = result.get("scene", {})
    R = float(result.get("certificate", {}).get("R_ver") or 3.0)
    pitch = float(result.get("certificate", {}).get("pitch") or DEFAULT_PITCH)
    if "curve" in result:
        curve = HoloCurve.from_json(result["curve"])
        header = ["re_param", "im_param"]
        for m in range(curve.n):
            header += [f"re_z{m + 1}", f"im_z{m + 1}"]
        s = np.linspace(-R, R, TRACE_SAMPLES)
        for name, t in (("curve_real_axis.csv", s + 0j), ("curve_imag_axis.csv", 1j * s),
                        ("curve_circle.csv",
                         R * np.exp(2j * np.pi * np.arange(TRACE_SAMPLES) / TRACE_SAMPLES))):
            _write_csv(outdir / name, header, _trace_rows(curve, t))
            written.append(name)
    F = scene.get("F")
    if isinstance(F, dict):
        bodies = ([("F", F["F"]), ("G", F["G"])] if F.get("type") == "product"
                  else [("F", F)])
        for label, body in bodies:
            if body.get("type") == "hyperplanes":
                continue
            K = parse_body(body)
            header = [f"u_{p}_z{m + 1}" for m in range(K.n) for p in ("re", "im")]
            header.append("offset")
            name = f"obstacle_{label}.csv"
            _write_csv(outdir / name, header, (list(a) + [b] for a, b in zip(K.A, K.b)))
            written.append(name)
    regions = []
    if scene.get("pipeline") == "prop6" and "curve" in result:
        J = int(result["curve"].get("data", {}).get("J", 0))
        regions.append(("A0", comb_base(J)))
        regions += [(f"A{j}", comb_cell(j)) for j in range(1, J + 1)]
        regions.append(("B0", Mirror(comb_base(J))))
        regions += [(f"B{j}", Mirror(comb_cell(j))) for j in range(1, J + 1)]
    if scene.get("pipeline") == "prop7" and "curve" in result:
        r = result["curve"].get("data", {}).get("r")
        if r:
            regions.append(("half_plane", re_at_least(1.0 / float(r))))
    for label, region in regions:
        name = f"region_{label}.csv"
        pts = region_boundary(region, R, pitch)
        _write_csv(outdir / name, ["re", "im"], ([z.real, z.imag] for z in pts))
        written.append(name)
    return written


# --------------------------------------------------------------------------
# commands


def _options(args) -> Options:
    return Options(args.seed, args.pitch, args.rver, args.strict)


def cmd_build(args) -> int:
    scene = load_json(args.scene)
    opts = _options(args)
    try:
        built = construct(scene, opts)
    except PipelineError as exc:
        _error("pipeline_failed", str(exc))
        return 1
    certificate = certify(scene, built, opts)
    Path(args.out).write_text(dumps(result_json(scene, built, certificate)))
    return 0 if certificate["pass"] else 1


def cmd_verify(args) -> int:
    scene = load_json(args.scene)
    obj = object_from_json(load_json(args.curve), scene)
    certificate = certify(scene, obj, _options(args))
    sys.stdout.write(dumps(certificate))
    return 0 if certificate["pass"] else 1


def cmd_flow_demo(args) -> int:
    data = load_json(args.schedule)
    try:
        bench = data.get("benchmark")
        if bench is not None:
            terms = {"noncommuting": noncommuting_benchmark,
                     "commuting": commuting_benchmark}[bench]()
            Ns = [int(n) for n in data.get("N", [8, 16, 32, 64])]
            probes = np.array([[cfrom(c) for c in p] for p in data["probes"]])
        else:
            terms, Ns, probes = schedule_from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed schedule: {exc}") from exc
    rows = convergence_study(terms, Ns, probes)
    Path(args.out).write_text(table_csv(rows))
    return 0


def cmd_report(args) -> int:
    result = load_json(args.result)
    files = report(result, Path(args.plot_csv))
    sys.stdout.write(dumps({"files": files}))
    return 0


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _flags(top: bool) -> argparse.ArgumentParser:
    """Shared flags.  Only the top level carries defaults, so a flag given
    before the subcommand is not reset by the subcommand's copy."""
    def d(value):
        return value if top else argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(0), help="sampling seed")
    common.add_argument("--pitch", type=float, default=d(None),
                        help="verification grid pitch")
    common.add_argument("--rver", type=float, default=d(None), help="verification radius")
    common.add_argument("--strict", action="store_true", default=d(False),
                        help="disable eps relaxation")
    return common


def parser() -> argparse.ArgumentParser:
    common = _flags(False)
    p = argparse.ArgumentParser(prog="holocurves", parents=[_flags(True)],
                                description="Build and certify entire curves avoiding "
                                            "closed sets.")
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", parents=[common], help="run a pipeline and certify it")
    b.add_argument("--scene", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)
    v = sub.add_parser("verify", parents=[common], help="re-certify a serialized curve")
    v.add_argument("--curve", required=True)
    v.add_argument("--scene", required=True)
    v.set_defaults(func=cmd_verify)
    f = sub.add_parser("flow-demo", parents=[common], help="splitting convergence table")
    f.add_argument("--schedule", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_flow_demo)
    r = sub.add_parser("report", parents=[common], help="CSV exports for plotting")
    r.add_argument("--result", required=True)
    r.add_argument("--plot-csv", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _error("malformed_input", str(exc))
        return 2
    except SceneError as exc:
        _error("invalid_scene", str(exc))
        return 2
    except (KeyError, TypeError) as exc:
        _error("malformed_input", f"missing or mistyped field: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
