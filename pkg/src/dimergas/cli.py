"""Command-line driver: every computation as a subcommand with
machine-readable output.

Output envelope: {"config": ..., "result": ..., "meta": {...}} as JSON,
with every float serialized as a decimal string of 17 significant digits
so identical runs are byte-identical after dropping the meta field (which
holds the timestamp).  CSV/NDJSON are used where a subcommand emits rows.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import amoeba as am
from . import correlations as corr
from . import greens as gr
from . import sampler as sp
from . import spectral
from . import validation
from .lattice import DriftedWeights, Edge, FlippedWeights, to_drifted


def _fmt(x):
    """17-significant-digit decimal string (round-trips binary doubles)."""
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            return str(x)
        return format(x, ".17g")
    if isinstance(x, dict):
        return {k: _fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_fmt(v) for v in x]
    if isinstance(x, np.floating):
        return format(float(x), ".17g")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _emit(args, config: dict, result: dict, rows=None):
    """Write the envelope (JSON) or rows (csv/ndjson) to --out or stdout."""
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w")
    try:
        if args.format == "json" or rows is None:
            envelope = {
                "config": _fmt(config),
                "result": _fmt(result),
                "meta": {
                    "version": __version__,
                    "timestamp": datetime.datetime.now(
                        datetime.timezone.utc).isoformat(),
                },
            }
            json.dump(envelope, out, indent=2, sort_keys=True)
            out.write("\n")
        elif args.format == "csv":
            header, data = rows
            out.write(",".join(header) + "\n")
            for row in data:
                out.write(",".join(
                    v if isinstance(v, str) else format(float(v), ".17g")
                    for v in row) + "\n")
        elif args.format == "ndjson":
            header, data = rows
            for row in data:
                out.write(json.dumps(_fmt(dict(zip(header, row))),
                                     sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _fail(message: str, code: int = 2):
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    raise SystemExit(code)


def _parse_weights(text: str, n: int = 4) -> tuple[float, ...]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != n:
        _fail(f"expected {n} comma-separated weights, got {text!r}")
    if min(parts) <= 0:
        _fail("weights must be positive")
    return tuple(parts)


def _model_weights(args):
    if args.model == "flipped":
        return FlippedWeights(*_parse_weights(args.weights))
    if args.model == "drifted":
        return DriftedWeights(*_parse_weights(args.weights))
    _fail(f"model {args.model!r} does not take a weight vector here")


def _parse_lambda(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2 or parts[0] < 0 or parts[1] < 0:
        _fail(f"expected 'l1,l2' with nonnegative rates, got {text!r}")
    return tuple(parts)


def _parse_intervals(text: str, n: int | None = None):
    out = []
    for chunk in text.split(":"):
        a, b = (float(p) for p in chunk.split(","))
        if b <= a:
            _fail(f"interval ({a},{b}) has nonpositive length")
        out.append((a, b))
    spans = sorted(out)
    for lo, hi in zip(spans[:-1], spans[1:]):
        if hi[0] <= lo[1]:
            _fail(f"intervals overlap: {lo}, {hi}")
    if n is not None and len(out) != n:
        _fail(f"expected {n} intervals, got {len(out)}")
    return tuple(out)


def _parse_edge(text: str) -> Edge:
    try:
        a, b = text.split(":")
        ax, ay = (int(p) for p in a.split(","))
        bx, by = (int(p) for p in b.split(","))
        return Edge.between((ax, ay), (bx, by))
    except (ValueError, TypeError) as exc:
        _fail(f"bad edge {text!r}: {exc}")


def _charpoly(args) -> spectral.CharPoly:
    if args.model == "square-octagon":
        return spectral.CharPoly.square_octagon(args.t)
    if args.model == "flipped":
        return spectral.CharPoly.flipped(FlippedWeights(*_parse_weights(args.weights)))
    return spectral.CharPoly.drifted(DriftedWeights(*_parse_weights(args.weights)))


def _base_config(args, **extra):
    cfg = {"subcommand": args.command, "format": args.format,
           "workers": args.workers}
    cfg.update(extra)
    return cfg


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_free_energy(args):
    P = _charpoly(args)
    res = spectral.free_energy(P, tol=args.tol)
    _emit(args, _base_config(args, model=args.model,
                             weights=getattr(args, "weights", None),
                             t=getattr(args, "t", None), tol=args.tol),
          {"value": res.value, "error_estimate": res.error_estimate,
           "n_grid": res.n_grid})


def _cmd_edge_prob(args):
    weights = _model_weights(args)
    edges = [_parse_edge(t) for t in args.edge]
    value = spectral.local_stats(edges, weights, tol=args.tol)
    _emit(args, _base_config(args, model=args.model, weights=args.weights,
                             edges=args.edge, tol=args.tol),
          {"probability": value})


def _cmd_inv_kasteleyn(args):
    weights = _model_weights(args)
    from .lattice import VertexClass
    b_cls = VertexClass.B0 if args.b == 0 else VertexClass.B1
    w_cls = VertexClass.W0 if args.w == 0 else VertexClass.W1
    entry = spectral.inv_kasteleyn(weights, b_cls, w_cls, args.x, args.y,
                               tol=args.tol)
    _emit(args, _base_config(args, model=args.model, weights=args.weights,
                             b=args.b, w=args.w, x=args.x, y=args.y,
                             tol=args.tol),
          {"value": entry.value, "error_estimate": entry.error_estimate})


def _cmd_green(args):
    lam = _parse_lambda(args.lam)
    x0, x1, nx = args.grid[0]
    y0, y1, ny = args.grid[1]
    rows = []
    for x in np.linspace(x0, x1, int(nx)):
        for y in np.linspace(y0, y1, int(ny)):
            if x == 0 and y == 0:
                continue
            if args.kind == "massive":
                val = gr.green_massive(x, y, lam)
            else:
                val = gr.green_drifted(x, y, lam)
            rows.append((x, y, val))
    args.format = args.format if args.format != "json" else "csv"
    _emit(args, _base_config(args, kind=args.kind, lam=args.lam),
          {"n_rows": len(rows)}, rows=(("x", "y", "value"), rows))


def _cmd_s2(args):
    lam = _parse_lambda(args.lam)
    g1, g2 = _parse_intervals(args.intervals, 2)
    value, err = corr.s2(g1, g2, lam, tol=args.tol)
    _emit(args, _base_config(args, lam=args.lam, intervals=args.intervals,
                             tol=args.tol),
          {"value": value, "error_estimate": err})


def _cmd_s4(args):
    lam = _parse_lambda(args.lam)
    intervals = _parse_intervals(args.intervals, 4)
    report = corr.wick_defect(corr.CorrelationSpec(intervals, lam[0], lam[1],
                                                   tol=args.tol))
    _emit(args, _base_config(args, lam=args.lam, intervals=args.intervals,
                             tol=args.tol),
          {"s4": report.s4, "wick_sum": report.wick_sum,
           "defect": report.defect, "error_estimate": report.error_estimate,
           "certified": report.certified})


def _cmd_wick_defect(args):
    lam = _parse_lambda(args.lam)
    intervals = _parse_intervals(args.intervals, 4)
    report = corr.wick_defect(corr.CorrelationSpec(intervals, lam[0], lam[1],
                                                   tol=args.tol))
    _emit(args, _base_config(args, lam=args.lam, intervals=args.intervals,
                             tol=args.tol),
          {"value": report.defect, "error_estimate": report.error_estimate,
           "certified": report.certified, "s4": report.s4,
           "wick_sum": report.wick_sum,
           "connected_integral": report.connected_integral})


def _cmd_amoeba(args):
    P = _charpoly(args)
    if args.raster:
        (u0, u1, nu), (v0, v1, nv) = args.raster
        grid = am.phase_raster(P, (u0, u1), (v0, v1), n=int(nu))
        rows = [(u, v, int(grid[i, j]))
                for i, u in enumerate(np.linspace(u0, u1, int(nu)))
                for j, v in enumerate(np.linspace(v0, v1, int(nv)))]
        header = ("u", "v", "in_amoeba")
    else:
        pts = am.hole_boundary(P, n_rays=args.rays, r_max=args.r_max,
                               xtol=1e-10)
        rows = [(p[0], p[1]) for p in pts]
        header = ("u", "v")
    args.format = args.format if args.format != "json" else "csv"
    _emit(args, _base_config(args, model=args.model), {"n_rows": len(rows)},
          rows=(header, rows))


def _cmd_sample(args):
    s = DriftedWeights(*_parse_weights(args.weights))
    region = sp.GridRegion(args.width, args.height, args.boundary)
    rng = sp.RngStream(args.seed, args.stream)
    ci, cj = region.width // 2, region.height // 2
    rows = []
    counts = np.zeros(4, dtype=int)
    for k in range(args.n):
        tree = sp.wilson_sample(region, s, rng)
        d = tree.arrow(ci, cj)
        counts[d] += 1
        rows.append((k, sp.DIRECTIONS[d]))
    freq = counts / max(args.n, 1)
    result = {
        "n_samples": args.n,
        "center_node": [ci, cj],
        "center_arrow_freq": {name: float(f)
                              for name, f in zip(sp.DIRECTIONS, freq)},
        "stderr": float(np.sqrt(np.max(freq * (1 - freq)) / max(args.n, 1))),
    }
    if args.format == "ndjson":
        _emit(args, _base_config(args), result,
              rows=(("sample", "center_arrow"), rows))
    else:
        _emit(args, _base_config(args, width=args.width, height=args.height,
                                 weights=args.weights, seed=args.seed,
                                 stream=args.stream, boundary=args.boundary),
              result)


def _cmd_validate(args):
    which = args.what
    if which not in validation.GROUPS:
        _fail(f"unknown validation group {which!r}; "
              f"choose from {sorted(validation.GROUPS)}")
    results = validation.run_all(which, seed=args.seed, report=print)
    ok = all(r.passed for r in results)
    print(f"{'ALL PASS' if ok else 'FAILURES PRESENT'} "
          f"({sum(r.passed for r in results)}/{len(results)})")
    raise SystemExit(0 if ok else 1)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _grid_spec(text: str):
    out = []
    for chunk in text.split(","):
        a, b, n = chunk.split(":")
        out.append((float(a), float(b), int(n)))
    if len(out) != 2:
        raise argparse.ArgumentTypeError("grid must be x0:x1:nx,y0:y1:ny")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dimergas",
        description="Exact computation and sampling for off-critical "
                    "square-grid dimer models.")
    parser.add_argument("--config", help="JSON or TOML file of defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tol_default=1e-8):
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", default="json",
                       choices=["json", "csv", "ndjson"])
        p.add_argument("--tol", type=float, default=tol_default)
        p.add_argument("--workers", type=int,
                       default=int(os.environ.get("DIMERGAS_WORKERS", "1")),
                       help="worker count (results are deterministic "
                            "regardless)")

    p = sub.add_parser("free-energy", help="log-partition-function density")
    p.add_argument("--model", required=True,
                   choices=["flipped", "drifted", "square-octagon"])
    p.add_argument("--weights", help="r1,r2,r3,r4 or s1,s2,s3,s4")
    p.add_argument("--t", type=float, help="square-octagon diagonal weight")
    common(p)
    p.set_defaults(func=_cmd_free_energy)

    p = sub.add_parser("edge-prob", help="probability of a set of edges")
    p.add_argument("--model", required=True, choices=["flipped", "drifted"])
    p.add_argument("--weights", required=True)
    p.add_argument("--edge", action="append", required=True,
                   help="x1,y1:x2,y2 (repeatable)")
    common(p, 1e-9)
    p.set_defaults(func=_cmd_edge_prob)

    p = sub.add_parser("inv-kasteleyn", help="inverse-Kasteleyn entry")
    p.add_argument("--model", required=True, choices=["flipped", "drifted"])
    p.add_argument("--weights", required=True)
    p.add_argument("--b", type=int, required=True, choices=[0, 1])
    p.add_argument("--w", type=int, required=True, choices=[0, 1])
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--y", type=int, required=True)
    common(p, 1e-9)
    p.set_defaults(func=_cmd_inv_kasteleyn)

    p = sub.add_parser("green", help="continuum Green's function on a grid")
    p.add_argument("--lambda", dest="lam", required=True, help="l1,l2")
    p.add_argument("--kind", default="massive", choices=["massive", "drifted"])
    p.add_argument("--grid", type=_grid_spec, required=True,
                   help="x0:x1:nx,y0:y1:ny")
    common(p)
    p.set_defaults(func=_cmd_green)

    p = sub.add_parser("s2", help="two-point height correlation")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--intervals", required=True, help="a,b:c,d")
    common(p)
    p.set_defaults(func=_cmd_s2)

    p = sub.add_parser("s4", help="four-point height correlation report")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--intervals", required=True, help="four a,b chunks")
    common(p, 1e-6)
    p.set_defaults(func=_cmd_s4)

    p = sub.add_parser("wick-defect", help="S4 minus its Wick approximation")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--intervals", required=True)
    common(p, 1e-6)
    p.set_defaults(func=_cmd_wick_defect)

    p = sub.add_parser("amoeba", help="hole boundary or membership raster")
    p.add_argument("--model", required=True,
                   choices=["flipped", "drifted", "square-octagon"])
    p.add_argument("--weights")
    p.add_argument("--t", type=float)
    p.add_argument("--rays", type=int, default=32)
    p.add_argument("--r-max", type=float, default=2.0)
    p.add_argument("--raster", type=_grid_spec, default=None,
                   help="u0:u1:nu,v0:v1:nv membership raster instead")
    common(p)
    p.set_defaults(func=_cmd_amoeba)

    p = sub.add_parser("sample", help="Wilson-sample drifted spanning trees")
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--weights", default="1,1,1,1")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--boundary", default="wired", choices=["wired", "corner"])
    common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("validate", help="run the acceptance battery")
    p.add_argument("what", nargs="?", default="all")
    p.add_argument("--seed", type=int, default=42)
    common(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def _load_config_defaults(argv: list[str]) -> list[str]:
    """Fold --config file values in as argument defaults (CLI wins)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        with open(path) as fh:
            data = json.load(fh)
    extra = []
    for key, value in data.items():
        flag = f"--{key.replace('_', '-')}"
        if flag not in argv:
            extra.extend([flag, str(value)])
    return argv[:idx] + argv[idx + 2:] + extra


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _load_config_defaults(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, spectral.QuadratureError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
