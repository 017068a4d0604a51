"""Command-line front end.

Thin client over the HTTP service: every subcommand builds a request, sends
it to the app (in process by default, to a remote server with --server), and
renders the response to the fixed CSV/SVG artifacts.  No simulation code
runs in this module.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from types import SimpleNamespace

from . import __version__, reporting


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # upstream shim warns about its own httpx pin; not actionable here
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _fail(msg: str, code: int = 2) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load_config(path: str):
    """Parse a JSON config file; returns (dict, None) or (None, exit code)."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        return None, _fail(f"cannot read config {path}: {exc.strerror or exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        return None, _fail(
            f"config {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        return None, _fail(f"config {path}: top level must be a JSON object")
    return data, None


def _report_422(resp) -> int:
    """Render pydantic validation details as field diagnostics."""
    try:
        detail = resp.json()["detail"]
    except Exception:
        detail = resp.text
    if isinstance(detail, list):
        for item in detail:
            loc = ".".join(str(p) for p in item.get("loc", []) if p != "body")
            print(f"error: field {loc or '<request>'}: {item.get('msg', '?')}",
                  file=sys.stderr)
    else:
        print(f"error: {detail}", file=sys.stderr)
    return 2


def _namespaces(records):
    """Attribute-style view of response record dicts for the CSV writer."""
    return [SimpleNamespace(**r) for r in records]


def _write(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    reporting.write_text_atomic(path, text)
    return path


def _write_charts(out_dir: str, charts: dict) -> list:
    return [_write(out_dir, f"{stem}.svg", svg) for stem, svg in sorted(charts.items())]


def cmd_run(args) -> int:
    cfg, err = _load_config(args.config)
    if err is not None:
        return err
    with _client(args.server) as client:
        resp = client.post("/api/run", json=cfg)
    if resp.status_code == 422:
        return _report_422(resp)
    if resp.status_code != 200:
        return _fail(f"server returned {resp.status_code}: {resp.text[:200]}", 1)
    j = resp.json()
    records = _namespaces(j["records"])
    truncation = j["error"] or None
    path = _write(args.out, "run.csv", reporting.run_csv_text(records, truncation=truncation))
    written = [path]
    if args.plots and records:
        written += _write_charts(args.out, reporting.run_charts(records))
    for p in written:
        print(p)
    if truncation:
        print(f"error: run failed during {j['error_stage']}: {j['error']} "
              f"(partial output kept)", file=sys.stderr)
        return 1
    last = records[-1]
    print(f"done: {len(records)} records, lesion {last.lesion_volume * 1e9:.1f} mm3, "
          f"T_max {last.t_max:.1f} C")
    return 0


def _point_stem(method: str, voltage: float, ratio: float) -> str:
    return f"run_{method}_V{voltage:g}_r{ratio:g}"


def cmd_sweep(args) -> int:
    req = {}
    if args.config:
        req, err = _load_config(args.config)
        if err is not None:
            return err
    req["group"] = args.group
    req["jobs"] = args.jobs
    with _client(args.server) as client:
        resp = client.post("/api/sweep", json=req)
    if resp.status_code == 422:
        return _report_422(resp)
    if resp.status_code != 200:
        return _fail(f"server returned {resp.status_code}: {resp.text[:200]}", 1)
    j = resp.json()
    labeled = []
    failures = []
    for pt in j["points"]:
        if pt["error"]:
            failures.append((pt["voltage"], pt["ratio"], pt["error"]))
            labeled.append((None, None, None, None))
            continue
        recs = {m: _namespaces(rl) for m, rl in pt["records"].items()}
        for method, rl in sorted(recs.items()):
            print(_write(args.out, _point_stem(method, pt["voltage"], pt["ratio"]) + ".csv",
                         reporting.run_csv_text(rl)))
        cmp_ = None
        if pt["comparison"] is not None:
            c = pt["comparison"]
            cmp_ = SimpleNamespace(
                times=c["times"],
                difference_ratio=[float("nan") if v is None else v
                                  for v in c["difference_ratio"]],
            )
        label = (f"r={pt['ratio']:g}" if args.group == "convection"
                 else f"{pt['voltage']:g}V")
        labeled.append((label, recs.get("BE"), recs.get("HBE"), cmp_))
    print(_write(args.out, "summary.csv", reporting.summary_csv_text(j["summary"])))
    if args.plots:
        charts = reporting.sweep_charts(
            [(lb, be, hbe, cm) for lb, be, hbe, cm in labeled if lb is not None])
        for p in _write_charts(args.out, charts):
            print(p)
    for voltage, ratio, msg in failures:
        print(f"error: point V={voltage:g} ratio={ratio:g} failed: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_validate(args) -> int:
    with _client(args.server) as client:
        resp = client.post("/api/validate")
    if resp.status_code != 200:
        return _fail(f"server returned {resp.status_code}: {resp.text[:200]}", 1)
    j = resp.json()
    print(j["report"])
    return 0 if j["passed"] else 1


def cmd_mesh(args) -> int:
    with _client(args.server) as client:
        if args.export:
            resp = client.post("/api/mesh/export", json={})
            if resp.status_code != 200:
                return _fail(f"server returned {resp.status_code}: {resp.text[:200]}", 1)
            j = resp.json()
            reporting.write_text_atomic(args.export, j["text"])
            print(args.export)
            info = j["info"]
        else:
            resp = client.get("/api/mesh/info")
            if resp.status_code != 200:
                return _fail(f"server returned {resp.status_code}: {resp.text[:200]}", 1)
            info = resp.json()
    print(f"nodes:       {info['n_nodes']}")
    print(f"triangles:   {info['n_triangles']}")
    print(f"min angle:   {info['min_angle_deg']:.2f} deg")
    print(f"max aspect:  {info['max_aspect']:.2f}")
    for name, vol in info["region_volumes"].items():
        print(f"volume {name:<10} {vol * 1e9:12.2f} mm3")
    print(f"volume {'total':<10} {info['total_volume'] * 1e9:12.2f} mm3")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("ablasim.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ablasim",
                                description="RF-ablation bioheat simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_server(sp):
        sp.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")

    sp = sub.add_parser("run", help="one transient run from a JSON config")
    sp.add_argument("--config", required=True, help="JSON config file")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--plots", action="store_true", help="also write SVG charts")
    add_server(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run one experiment group")
    sp.add_argument("--group", required=True, choices=["convection", "voltage"])
    sp.add_argument("--jobs", type=int, default=1, help="parallel points")
    sp.add_argument("--config", default=None,
                    help="JSON overrides for the sweep request (points, base run)")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--plots", action="store_true", help="also write SVG charts")
    add_server(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="run the solver verification suite")
    add_server(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("mesh", help="inspect or export the default mesh")
    sp.add_argument("--info", action="store_true", help="print mesh statistics")
    sp.add_argument("--export", default=None, metavar="PATH",
                    help="write the mesh as text to PATH")
    add_server(sp)
    sp.set_defaults(func=cmd_mesh)

    sp = sub.add_parser("serve", help="start the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
