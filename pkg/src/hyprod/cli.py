"""Command-line entry point: ``hyprod <verb> ...``.

Exit status: 0 all checks pass, 1 a bound was violated, 2 bad configuration
or infeasible input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checks import SlackPolicy, _plain, digest, make_record

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _emit(rec: dict) -> None:
    print(json.dumps(_plain(rec), sort_keys=True))


def _op(op: str, inputs, value, verdict: str = "info", slack=None, **extra) -> dict:
    rec = {"op": op, "inputs_digest": digest(inputs), "value": value, "slack": slack, "verdict": verdict}
    rec.update(extra)
    return rec


def _point(space, text: str):
    from .spaces import GraphSpace, Segment
    v = json.loads(text) if text.strip().startswith("[") else [float(t) for t in text.split(",")]
    if isinstance(v, (int, float)):
        v = [v]
    if isinstance(space, GraphSpace):
        return int(v[0])
    if isinstance(space, Segment):
        return float(v[0])
    return tuple(float(t) for t in v)


# -- verbs ------------------------------------------------------------------


def cmd_space(args) -> int:
    from .spaces import load_space
    sp = load_space(args.file)
    if args.action == "validate":
        info = {"kind": sp.doc["kind"], "label": sp.label, "exact": sp.is_exact, "mesh": sp.mesh}
        if hasattr(sp, "n"):
            info["vertices"] = sp.n
        _emit(_op("space.validate", sp.doc, info, "pass"))
    else:
        pts = sp.sample_points(args.n, args.seed)
        _emit(_op("space.sample", {"doc": sp.doc, "n": args.n, "seed": args.seed}, pts))
    return EXIT_OK


def cmd_delta(args) -> int:
    from .checks import delta_checks
    from .spaces import load_space
    sp = load_space(args.file)
    est, recs, _ = delta_checks(sp, args.seed, args.n)
    for r in recs:
        _emit(r)
    return EXIT_FAIL if any(r["verdict"] == "fail" for r in recs) else EXIT_OK


def cmd_tcheck(args) -> int:
    from .checks import delta_checks, tcheck_checks
    from .spaces import load_space
    sp = load_space(args.file)
    dl = args.delta if args.delta is not None else delta_checks(sp, args.seed, args.n)[0].delta
    _, recs, _ = tcheck_checks(sp, dl, args.trials, args.seed, SlackPolicy())
    for r in recs:
        _emit(r)
    return EXIT_FAIL if any(r["verdict"] == "fail" for r in recs) else EXIT_OK


def cmd_morse(args) -> int:
    """Config: {"space": path, "delta"?: float, "detours"?: [{"x", "y", "p", "R", "path"}]}."""
    from .checks import delta_checks, morse_checks
    from .hyperbolicity import MorseParams, morse_check
    from .spaces import load_space, validate_doc
    cfg_path = Path(args.config)
    doc = json.loads(cfg_path.read_text())
    validate_doc(doc, "morse.schema.json")
    ref = Path(doc["space"])
    ref = ref if ref.is_absolute() else cfg_path.parent / ref
    if not ref.exists():
        raise FileNotFoundError(f"referenced file not found: {ref}")
    sp = load_space(ref)
    dl = doc["delta"] if "delta" in doc else delta_checks(sp, doc.get("seed", 0))[0].delta
    if "detours" not in doc:
        recs, _ = morse_checks(sp, dl)
        for r in recs:
            _emit(r)
        return EXIT_FAIL if any(r["verdict"] == "fail" for r in recs) else EXIT_OK
    failed = False
    for k, d in enumerate(doc["detours"]):
        conv = lambda v: _point(sp, json.dumps(v))
        path = [conv(v) for v in d["path"]]
        v = morse_check(sp, path, conv(d["x"]), conv(d["y"]), conv(d["p"]), MorseParams(d["R"], dl))
        verdict = {"bound_violated": "fail", "bound_holds": "pass"}.get(v.status, "info")
        failed |= verdict == "fail"
        _emit(make_record(f"morse/{sp.label}/{k}", "detours avoiding B(p,R), R > 90 delta, are long",
                          {"detour": d, "delta": dl}, v.length, v.bound, sp.slack, verdict, status=v.status,
                          min_distance=v.min_distance, margin=v.margin, reason=v.reason,
                          witness=v.witness or None))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_busemann(args) -> int:
    from .busemann import b_ray_from, busemann_value, field_from_doc
    from .errors import ConfigError
    from .spaces import load_space
    sp = load_space(args.file)
    if "busemann" not in sp.doc:
        raise ConfigError(f"{args.file}: no busemann block", ["busemann"])
    fld = field_from_doc(sp, sp.doc["busemann"])
    x = _point(sp, args.point)
    if args.action == "eval":
        val, defect = fld.value_with_defect(x)
        _emit(_op("busemann.eval", {"doc": sp.doc, "x": x}, val, "info", fld.tolerance, defect=defect))
    else:
        ray = b_ray_from(fld, x, args.length, allow_short=args.allow_short)
        pts = ray.sample(args.step)[1] if ray.evaluator is not None else ray.points
        _emit(_op("busemann.ray", {"doc": sp.doc, "x": x, "length": args.length}, pts, "info",
                  fld.tolerance, length=ray.length))
    return EXIT_OK


def cmd_product(args) -> int:
    from .checks import product_checks
    from .product import build_product, load_product_spec
    Y = build_product(load_product_spec(args.spec))
    if args.action == "build":
        _emit(_op("product.build", Y.spec.label, Y.summary(), "pass" if Y.n_components == 1 else "fail"))
        return EXIT_OK if Y.n_components == 1 else EXIT_FAIL
    if args.action == "export":
        Y.export_edges(args.out, args.flavor)
        _emit(_op("product.export", {"spec": Y.spec.label, "flavor": args.flavor}, str(args.out)))
        return EXIT_OK
    recs, _, consts = product_checks(Y, args.pairs, args.seed, args.delta_n)
    for r in recs:
        _emit(r)
    return EXIT_FAIL if any(r["verdict"] == "fail" for r in recs) else EXIT_OK


def cmd_boundary(args) -> int:
    from .checks import boundary_checks, default_rays
    from .errors import ConfigError
    from .product import build_product, load_product_spec
    from .suite import load_rays
    Y = build_product(load_product_spec(args.spec))
    rays = load_rays(Y, args.rays, args.K) if args.rays else default_rays(Y, args.K)
    if not rays:
        raise ConfigError("no rays: pass --rays for this product", ["rays"])
    recs = boundary_checks(Y, rays, args.K, args.lam, args.expect)
    for r in recs:
        _emit(r)
    return EXIT_FAIL if any(r["verdict"] == "fail" for r in recs) else EXIT_OK


def cmd_suite(args) -> int:
    from .suite import export_plotdata, load_config, run_suite
    if args.action == "run":
        cfg = load_config(args.config)
        if args.output:
            cfg.output = Path(args.output)
        rep = run_suite(cfg)
        print(rep.human())
        print(f"report: {cfg.output_path()}")
        return EXIT_FAIL if rep.failed else EXIT_OK
    path = export_plotdata(args.report, args.what, args.out)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyprod", description="Hyperbolic product metric checks.")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("space", help="validate or sample a space description")
    s.add_argument("action", choices=["validate", "sample"])
    s.add_argument("file")
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_space)

    s = sub.add_parser("delta", help="four-point delta of a space")
    s.add_argument("file")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_delta)

    s = sub.add_parser("tcheck", help="distance functions along geodesics against T-functions")
    s.add_argument("file")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=200, help="sample size for the delta estimate")
    s.add_argument("--delta", type=float, default=None)
    s.set_defaults(func=cmd_tcheck)

    s = sub.add_parser("morse", help="detour length check")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_morse)

    s = sub.add_parser("busemann", help="evaluate a Busemann function or trace a B-ray")
    s.add_argument("action", choices=["eval", "ray"])
    s.add_argument("file")
    s.add_argument("--point", required=True, help="vertex id, number, or 'x,y'")
    s.add_argument("--length", type=float, default=1.0)
    s.add_argument("--step", type=float, default=0.1)
    s.add_argument("--allow-short", action="store_true")
    s.set_defaults(func=cmd_busemann)

    s = sub.add_parser("product", help="build, verify or export a product space")
    s.add_argument("action", choices=["build", "verify", "export"])
    s.add_argument("spec")
    s.add_argument("--pairs", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--delta-n", type=int, default=30)
    s.add_argument("--out", default="edges.csv")
    s.add_argument("--flavor", choices=["max", "euclidean"], default=None)
    s.set_defaults(func=cmd_product)

    s = sub.add_parser("boundary", help="classify rays into boundary classes")
    s.add_argument("action", choices=["classify"])
    s.add_argument("spec")
    s.add_argument("--rays", default=None)
    s.add_argument("--K", type=int, default=10)
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--expect", type=int, default=None, help="expected number of classes")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_boundary)

    s = sub.add_parser("suite", help="run a suite config or export plot data")
    ss = s.add_subparsers(dest="action", required=True)
    r = ss.add_parser("run")
    r.add_argument("config")
    r.add_argument("--output", default=None)
    e = ss.add_parser("export")
    e.add_argument("report")
    e.add_argument("--what", required=True,
                   help="tdeviation, fellow or delta_convergence, optionally with ':<label>'")
    e.add_argument("--out", required=True)
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    from .errors import ConfigError, DomainError, HyprodError, InfeasibleError
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e} (fields: {', '.join(e.fields)})", file=sys.stderr)
    except FileNotFoundError as e:
        print(f"file not found: {e}", file=sys.stderr)
    except (InfeasibleError, DomainError, HyprodError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
