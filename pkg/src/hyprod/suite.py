"""Suite configuration, orchestration, JSON-lines reports and plot-data export."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .busemann import field_from_doc
from .checks import (SlackPolicy, boundary_checks, busemann_checks, default_rays, delta_checks,
                     morse_checks, product_checks, tcheck_checks, tripod_checks)
from .errors import ConfigError, DomainError, HyprodError
from .product import build_product, load_product_spec
from .spaces import EXHAUSTIVE_MAX, GraphSpace, load_space, validate_doc

OUTPUT_ENV = "HYPROD_OUTPUT_DIR"
PLOT_KINDS = ("tdeviation", "fellow", "delta_convergence")


@dataclass
class SuiteConfig:
    seed: int
    checks: list
    spaces: list = field(default_factory=list)
    products: list = field(default_factory=list)
    output: Path | None = None
    pairs: int = 20
    delta_n: int = 200
    tcheck_trials: int = 50
    product_delta_n: int = 30
    triangles: int = 300
    seeds: list | None = None
    K: int = 10
    lam: float = 0.5
    rays: Path | None = None
    slack: SlackPolicy = field(default_factory=SlackPolicy)
    source: Path | None = None

    def output_path(self) -> Path:
        if self.output is not None:
            return self.output
        stem = self.source.stem if self.source is not None else "suite"
        return Path(os.environ.get(OUTPUT_ENV, "out")) / f"{stem}.jsonl"


def _existing(base: Path, ref: str) -> Path:
    p = Path(ref) if Path(ref).is_absolute() else base / ref
    if not p.exists():
        raise FileNotFoundError(f"referenced file not found: {p}")
    return p


def load_config(path) -> SuiteConfig:
    """Read and validate a suite config; paths resolve relative to the file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})", ["<root>"]) from e
    validate_doc(doc, "suite.schema.json")
    base = path.parent
    samples = doc.get("samples", {})
    bnd = doc.get("boundary", {})
    sl = doc.get("slack", {})
    return SuiteConfig(
        seed=doc["seed"], checks=list(doc["checks"]),
        spaces=[_existing(base, s) for s in doc.get("spaces", [])],
        products=[_existing(base, s) for s in doc.get("products", [])],
        output=(base / doc["output"]) if "output" in doc else None,
        pairs=samples.get("pairs", 20), delta_n=samples.get("delta_n", 200),
        tcheck_trials=samples.get("tcheck_trials", 50),
        product_delta_n=samples.get("product_delta_n", 30),
        triangles=samples.get("triangles", 300),
        seeds=doc.get("seeds"), K=bnd.get("K", 10), lam=bnd.get("lambda", 0.5),
        rays=_existing(base, bnd["rays"]) if "rays" in bnd else None,
        slack=SlackPolicy(sl.get("exact", 1e-6), sl.get("graph", 1e-9), sl.get("mesh_factor", 4.0)),
        source=path,
    )


@dataclass
class Report:
    records: list
    series: list
    summary: dict

    @property
    def failed(self) -> bool:
        return any(r["verdict"] == "fail" for r in self.records)

    def lines(self) -> list:
        out = [json.dumps({"kind": "record", **r}, sort_keys=True) for r in self.records]
        out += [json.dumps({"kind": "series", **s}, sort_keys=True) for s in self.series]
        out.append(json.dumps({"kind": "summary", **self.summary}, sort_keys=True))
        return out

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.lines()) + "\n")
        return path

    def human(self) -> str:
        c = self.summary["counts"]
        rows = [f"{r['verdict']:>5}  {r['check']}  value={_short(r['value'])}  bound={_short(r['bound'])}"
                for r in self.records]
        rows.append(f"pass={c.get('pass', 0)} fail={c.get('fail', 0)} info={c.get('info', 0)}")
        return "\n".join(rows)

    def find_series(self, what: str) -> dict:
        for s in self.series:
            if s["name"] == what or s["name"].split(":")[0] == what:
                return s
        raise KeyError(f"report has no series {what!r}")


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def load_report(path) -> Report:
    recs, ser, summ = [], [], {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        kind = d.pop("kind")
        if kind == "record":
            recs.append(d)
        elif kind == "series":
            ser.append(d)
        else:
            summ = d
    return Report(recs, ser, summ)


def load_rays(Y, path, K: int) -> list:
    """Rays file: {"rays": [{"nodes": [...]}, {"points": [...]}, {"toward": point}]}."""
    from .boundary import ray_from_points, ray_toward
    doc = json.loads(Path(path).read_text())
    rays = []
    for k, item in enumerate(doc.get("rays", [])):
        if "nodes" in item:
            rays.append([int(n) for n in item["nodes"]])
        elif "points" in item:
            rays.append(ray_from_points(Y, [tuple(map(_pt, p)) for p in item["points"]]))
        elif "toward" in item:
            if "from" in item:
                z = Y.resolve(tuple(map(_pt, item["from"])))
            elif Y.spec.mode == "basepoint":
                z = Y.resolve(tuple(Y.spec.basepoints))
            else:
                raise ConfigError(f"rays[{k}] needs a 'from' point in busemann mode", [f"rays/{k}/from"])
            rays.append(ray_toward(Y, z, Y.resolve(tuple(map(_pt, item["toward"]))), K))
        else:
            raise ConfigError(f"rays[{k}] needs nodes, points or toward", [f"rays/{k}"])
    return rays


def _pt(v):
    return tuple(v) if isinstance(v, list) else v


def run_suite(config: SuiteConfig, write: bool = True) -> Report:
    records, series, consts = [], [], {"spaces": {}, "products": {}, "morse": {}}
    cfg = config
    need_delta = set(cfg.checks) & {"delta", "tripod", "tcheck", "morse", "busemann"}
    for path in cfg.spaces:
        sp = load_space(path)
        label = sp.label
        try:
            if not need_delta:
                continue
            est, recs, ser = delta_checks(sp, cfg.seed, cfg.delta_n, cfg.seeds)
            if "delta" in cfg.checks:
                records += recs
                series += ser
            dl = est.delta
            consts["spaces"][label] = {"delta": dl, "tilde_delta": est.tilde_delta,
                                       "exhaustive": est.is_exhaustive}
            if "tripod" in cfg.checks:
                exh = isinstance(sp, GraphSpace) and sp.n <= EXHAUSTIVE_MAX
                records += tripod_checks(sp, dl, cfg.seed, cfg.triangles, cfg.slack, exhaustive=exh)
            if "tcheck" in cfg.checks:
                _, recs, ser = tcheck_checks(sp, dl, cfg.tcheck_trials, cfg.seed, cfg.slack)
                records += recs
                series += ser
            if "morse" in cfg.checks:
                recs, counts = morse_checks(sp, dl, cfg.slack)
                records += recs
                if recs:
                    consts["morse"][label] = {r["check"].split("/")[0]: r["extra"].get(
                        "min_margin", r["extra"].get("margin")) for r in recs}
            if "busemann" in cfg.checks and "busemann" in getattr(sp, "doc", {}):
                fld = field_from_doc(sp, sp.doc["busemann"])
                records += busemann_checks(sp, fld, dl, cfg.seed, slack=cfg.slack)
        except HyprodError as e:
            e.args = (f"[{label}] {e.args[0] if e.args else e}",) + tuple(e.args[1:])
            raise
    for path in cfg.products:
        if not set(cfg.checks) & {"product", "boundary"}:
            break
        spec = load_product_spec(path)
        Y = build_product(spec)
        label = spec.label
        try:
            if "product" in cfg.checks:
                recs, ser, c = product_checks(Y, cfg.pairs, cfg.seed, cfg.product_delta_n, cfg.seeds)
                records += recs
                series += ser
                consts["products"][label] = c
            if "boundary" in cfg.checks:
                rays = load_rays(Y, cfg.rays, cfg.K) if cfg.rays is not None else default_rays(Y, cfg.K)
                if len(rays) >= 1:
                    records += boundary_checks(Y, rays, cfg.K, cfg.lam)
        except HyprodError as e:
            e.args = (f"[{label}] {e.args[0] if e.args else e}",) + tuple(e.args[1:])
            raise
    records.sort(key=lambda r: r["check"])
    series.sort(key=lambda s: s["name"])
    counts = {}
    for r in records:
        counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
    summary = {"seed": cfg.seed, "checks": cfg.checks, "counts": counts, "constants": consts,
               "failed": sorted(r["check"] for r in records if r["verdict"] == "fail")}
    from .checks import _plain
    rep = Report(records, series, _plain(summary))
    if write:
        rep.write(cfg.output_path())
    return rep


_COLUMN_DOC = {
    "tdeviation": "t = arclength on the geodesic; d_z_gamma = distance from z; f = fitted T-function; "
                  "f_plus_4delta = f + 4 delta envelope",
    "fellow": "t = parameter of the reparameterized curve; gap = distance to the shortest path",
    "delta_convergence": "n = sample size; delta_est = four-point delta estimate",
}


def export_plotdata(report, what: str, path) -> Path:
    """Write one report series as CSV with a documenting header comment.

    ``what`` is a series kind (first match wins) or a full ``kind:label`` name.
    """
    kind = what.split(":")[0]
    if kind not in PLOT_KINDS:
        raise DomainError(f"unknown series kind {what!r}; expected one of {PLOT_KINDS}")
    rep = report if isinstance(report, Report) else load_report(report)
    try:
        s = rep.find_series(what)
    except KeyError as e:
        raise DomainError(str(e.args[0])) from e
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# series: {s['name']}\n# columns: {_COLUMN_DOC[kind]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(s["columns"])
        for row in s["rows"]:
            w.writerow([repr(float(v)) for v in row])
    return path
