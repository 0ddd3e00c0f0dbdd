"""Command-line front end: ``gpm run | analyze | render | oracle | matrices``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import METHODS, check_sorted, estimate_theta, minimal_cost_subdivision
from .bridging import build_bridge_system
from .dynamics import (
    GLAUBER,
    KAWASAKI,
    MODES,
    ChainParams,
    ChainState,
    code_powers,
    exact_gibbs,
    initial_configuration,
    make_rng,
    run_chain,
    sweep_length,
)
from .io import (
    MetricsWriter,
    SnapshotError,
    dump_json,
    format_snapshot,
    load_json,
    parse_palette,
    read_snapshot,
    write_ppm,
)
from .model import BUILTIN_NAMES, CostMatrix, DensityVector, builtin_matrix, magnetization

PRESETS = {
    "fig1": {"L": 63, "q": 8, "matrix": "potts", "beta": 1.0, "rho": [1] * 7 + [14], "mode": KAWASAKI, "sweeps": 10_000},
}
for _name in ("fig2a", "fig2b", "fig2c", "fig2d"):
    PRESETS[_name] = {"L": 63, "q": 9, "matrix": _name, "beta": 1.0, "rho": [1] * 8 + [16], "mode": KAWASAKI,
                      "sweeps": 10_000}

DEFAULTS = {
    "L": None, "q": None, "beta": None, "matrix": "potts", "rho": None, "counts": None, "mode": KAWASAKI,
    "steps": None, "sweeps": None, "thin": None, "thin_sweeps": None, "seed": 0, "replicas": 1, "h": None,
    "init": "canonical", "out": "gpm_out", "render": False,
}


class ConfigError(ValueError):
    pass


def _floats(text):
    if text is None:
        return None
    if isinstance(text, str):
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    return [float(t) for t in text]


def resolve_matrix(spec, q):
    if isinstance(spec, dict):
        A = CostMatrix.from_json(spec)
    elif isinstance(spec, str) and spec.endswith(".json"):
        A = CostMatrix.from_json(load_json(spec))
    else:
        A = builtin_matrix(str(spec), q)
    if q is not None and A.q != q:
        raise ConfigError(f"matrix has q={A.q} but config says q={q}")
    return A


def resolve_config(cfg: dict) -> dict:
    """Fill defaults, validate against the model rules and return a JSON-ready config."""
    out = dict(DEFAULTS)
    out.update({k: v for k, v in cfg.items() if v is not None})
    unknown = set(out) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if out["L"] is None or out["beta"] is None:
        raise ConfigError("config needs L and beta")
    L = int(out["L"])
    if L < 3:
        raise ConfigError("L must be >= 3")
    A = resolve_matrix(out["matrix"], out["q"])
    out["L"], out["q"], out["beta"] = L, A.q, float(out["beta"])
    if out["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    sw = sweep_length(L, out["mode"])
    if out["steps"] is None:
        out["steps"] = int(round(float(out["sweeps"] or 0) * sw))
    if out["thin"] is None:
        out["thin"] = int(round(float(out["thin_sweeps"]) * sw)) if out["thin_sweeps"] else max(out["steps"], 1)
    out["steps"], out["thin"] = int(out["steps"]), int(out["thin"])
    out["sweeps"] = out["thin_sweeps"] = None
    if out["rho"] is not None:
        out["rho"] = _floats(out["rho"])
        DensityVector.proportional(out["rho"])
    if out["counts"] is not None:
        out["counts"] = [int(x) for x in out["counts"]]
    if out["h"] is not None:
        out["h"] = _floats(out["h"])
    out["seed"], out["replicas"] = int(out["seed"]), int(out["replicas"])
    if out["replicas"] < 1:
        raise ConfigError("replicas must be >= 1")
    if not (out["init"] in ("canonical", "random") or str(out["init"]).startswith("file:")):
        raise ConfigError("init must be 'canonical', 'random' or 'file:<snapshot>'")
    _params(out, 0)  # cross-validation
    return out


def _params(cfg: dict, replica: int) -> ChainParams:
    A = resolve_matrix(cfg["matrix"], cfg["q"])
    return ChainParams(
        beta=cfg["beta"], A=A, L=cfg["L"], mode=cfg["mode"],
        rho=DensityVector.proportional(cfg["rho"]) if cfg["rho"] else None,
        counts=tuple(cfg["counts"]) if cfg["counts"] else None,
        h=tuple(cfg["h"]) if cfg["h"] else None,
        steps=cfg["steps"], thin=cfg["thin"], seed=cfg["seed"], replica=replica,
    )


def run_replica(cfg: dict, replica: int) -> dict:
    params = _params(cfg, replica)
    init = cfg["init"]
    if str(init).startswith("file:"):
        init = read_snapshot(init[5:])
    rdir = Path(cfg["out"]) / f"replica_{replica:03d}"
    rdir.mkdir(parents=True, exist_ok=True)
    width = len(str(max(params.steps, 1)))
    last = None
    with MetricsWriter(rdir / "metrics.csv", params.A.q) as mw:
        for s in run_chain(params, init):
            mw.write(s)
            (rdir / f"snap_{s.step:0{width}d}.txt").write_text(format_snapshot(s.config), encoding="utf-8")
            last = s
    if cfg.get("render"):
        write_ppm(rdir / "final.ppm", last.config)
    return {"replica": replica, "final_energy": last.energy, "final_boundary_size": last.boundary_size}


def worker_count(flag=None) -> int:
    if flag:
        return max(1, int(flag))
    env = os.environ.get("GPM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def manifest_for(cfg: dict) -> dict:
    return {
        "config": cfg,
        "seeds": [
            {"replica": r, "dynamics": {"entropy": cfg["seed"], "spawn_key": [r, 0]},
             "init": {"entropy": cfg["seed"], "spawn_key": [r, 1]}}
            for r in range(cfg["replicas"])
        ],
        "rng": "numpy PCG64 via SeedSequence",
        "version": __version__,
    }


def cmd_run(args) -> int:
    cfg = {}
    if args.manifest:
        cfg.update(load_json(args.manifest)["config"])
    if args.preset:
        cfg.update(PRESETS[args.preset])
    if args.config:
        cfg.update(load_json(args.config))
    for key in ("L", "q", "beta", "matrix", "rho", "mode", "steps", "sweeps", "thin", "thin_sweeps", "seed",
                "replicas", "h", "init", "out"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.counts is not None:
        cfg["counts"] = [int(x) for x in args.counts.split(",")]
    if args.render:
        cfg["render"] = True
    # an explicit length on the command line replaces the other unit
    if args.sweeps is not None:
        cfg.pop("steps", None)
    if args.thin_sweeps is not None:
        cfg.pop("thin", None)
    cfg = resolve_config(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / "manifest.json", manifest_for(cfg))
    n = worker_count(args.workers)
    if n == 1 or cfg["replicas"] == 1:
        results = [run_replica(cfg, r) for r in range(cfg["replicas"])]
    else:
        with ProcessPoolExecutor(max_workers=min(n, cfg["replicas"])) as ex:
            results = list(ex.map(run_replica, [cfg] * cfg["replicas"], range(cfg["replicas"])))
    for r in results:
        print(f"replica {r['replica']}: energy {r['final_energy']:g}, boundary {r['final_boundary_size']}")
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    A_spec, rho = args.matrix, _floats(args.rho)
    if args.manifest:
        mcfg = load_json(args.manifest)["config"]
        A_spec = A_spec or mcfg["matrix"]
        rho = rho or mcfg.get("rho")
    baselines: dict = {}
    rows, samples = [], []
    for path in args.snapshots:
        try:
            sigma = read_snapshot(path)
        except (OSError, SnapshotError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            continue
        A = resolve_matrix(A_spec or "potts", sigma.q)
        r = rho if rho else (magnetization(sigma) / sigma.lattice.n_vertices).tolist()
        dv = DensityVector.proportional(r)
        key = (sigma.L, tuple(dv), args.baseline)
        if key not in baselines:
            baselines[key] = minimal_cost_subdivision(sigma.L, dv, A, args.baseline, seed=args.seed)[1]
        rep = check_sorted(sigma, A, dv, args.alpha, args.delta, args.baseline, baseline_cost=baselines[key])
        stem = Path(path).name.rsplit(".", 1)[0]
        payload = {"snapshot": str(path), **rep.to_json()}
        dump_json(out / f"{stem}.sorted.json", payload)
        if args.bridges:
            dump_json(out / f"{stem}.bridges.json", build_bridge_system(sigma, args.delta).dump(sigma, A))
        bsize = int(np.count_nonzero((sigma.colors[sigma.lattice.neighbor_table] != sigma.colors[:, None]).any(axis=1)))
        rows.append((str(path), rep, bsize))
        samples.append(sigma)
    if not rows:
        print("error: no snapshot could be parsed", file=sys.stderr)
        return 1
    with open(out / "reports.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["snapshot", "passed", "ratio", "partition_cost", "baseline_cost", "baseline_kind", "boundary_size"])
        for path, rep, bsize in rows:
            w.writerow([path, int(rep.passed), repr(rep.ratio), repr(rep.partition_cost), repr(rep.baseline_cost),
                        rep.baseline_kind, bsize])
    finite = [rep.ratio for _, rep, _ in rows if math.isfinite(rep.ratio)]
    agg = {
        "n_snapshots": len(rows),
        "sorted_fraction": sum(rep.passed for _, rep, _ in rows) / len(rows),
        "mean_ratio": float(np.mean(finite)) if finite else float("nan"),
        "mean_boundary_size": float(np.mean([b for _, _, b in rows])),
    }
    with open(out / "aggregate.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(list(agg))
        w.writerow([repr(v) if isinstance(v, float) else v for v in agg.values()])
    if args.theta:
        th = estimate_theta(samples, args.delta, require_all=False)
        (out / "theta.csv").write_text(th.to_csv(), encoding="utf-8")
        if th.missing:
            print(f"warning: no regions observed for colour(s) {list(th.missing)}", file=sys.stderr)
    print(f"{agg['n_snapshots']} snapshot(s), sorted fraction {agg['sorted_fraction']:.3f}")
    return 0


def cmd_render(args) -> int:
    sigma = read_snapshot(args.snapshot)
    palette = parse_palette(load_json(args.palette)) if args.palette else None
    write_ppm(args.output, sigma, palette, args.scale)
    return 0


def cmd_oracle(args) -> int:
    A = resolve_matrix(args.matrix, args.q)
    counts = [int(x) for x in args.counts.split(",")] if args.counts else None
    h = _floats(args.h)
    table = exact_gibbs(args.L, A, args.beta, counts=counts, h=h)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "gibbs_table.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["code", "config", "energy", "probability"])
        for code, cfg, e, p in zip(table.codes, table.support, table.energies, table.probabilities):
            w.writerow([int(code), "".join(str(int(c) - 1) for c in cfg), repr(float(e)), repr(float(p))])
    report = {"L": args.L, "q": A.q, "beta": args.beta, "counts": counts, "h": h, "states": len(table)}
    if args.chain_steps:
        mode = KAWASAKI if counts is not None else GLAUBER
        params = ChainParams(beta=args.beta, A=A, L=args.L, mode=mode, counts=tuple(counts) if counts else None,
                             h=tuple(h) if h else None, seed=args.seed)
        state = ChainState(initial_configuration(params), A, args.beta, mode, h=h, rng=make_rng(args.seed, 0, 0))
        hist = np.zeros(A.q ** (args.L * args.L), dtype=np.int64)
        state.advance(args.chain_steps, hist=hist, pows=code_powers(A.q, args.L * args.L))
        report.update(mode=mode, chain_steps=args.chain_steps, seed=args.seed, tv_distance=table.tv_distance(hist))
        print(f"TV distance after {args.chain_steps} steps: {report['tv_distance']:.5f}")
    dump_json(out / "oracle_report.json", report)
    return 0


def cmd_matrices(args) -> int:
    if args.action == "list":
        for name in BUILTIN_NAMES:
            print(name)
        return 0
    if not args.name:
        raise ConfigError("matrices dump needs a name")
    print(json.dumps(builtin_matrix(args.name, args.q).to_json(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpm", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run Markov-chain replicas")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--manifest", help="rerun from a manifest.json")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--L", type=int)
    r.add_argument("--q", type=int)
    r.add_argument("--beta", type=float)
    r.add_argument("--matrix", help="builtin name or path to a JSON matrix")
    r.add_argument("--rho", help="comma-separated density weights (normalised)")
    r.add_argument("--counts", help="comma-separated colour counts")
    r.add_argument("--h", help="comma-separated field strengths (glauber)")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--steps", type=int)
    r.add_argument("--sweeps", type=float)
    r.add_argument("--thin", type=int)
    r.add_argument("--thin-sweeps", dest="thin_sweeps", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--replicas", type=int)
    r.add_argument("--init", help="canonical | random | file:<snapshot>")
    r.add_argument("--out")
    r.add_argument("--workers", type=int, help="worker processes (default: GPM_THREADS or CPU count)")
    r.add_argument("--render", action="store_true", help="also write final.ppm per replica")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="Sorted(alpha, delta) reports for snapshots")
    a.add_argument("snapshots", nargs="+")
    a.add_argument("--matrix")
    a.add_argument("--rho", help="density weights; default: each snapshot's own colour fractions")
    a.add_argument("--manifest", help="take matrix and rho from a run manifest")
    a.add_argument("--alpha", type=float, default=3.0)
    a.add_argument("--delta", type=float, default=0.15)
    a.add_argument("--baseline", choices=METHODS, default="anneal")
    a.add_argument("--seed", type=int, default=0, help="annealing seed")
    a.add_argument("--bridges", action="store_true", help="also dump bridge systems")
    a.add_argument("--theta", action="store_true", help="also estimate theta from the batch")
    a.add_argument("--out", default="gpm_analysis")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("render", help="render a snapshot as binary PPM")
    d.add_argument("snapshot")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--palette", help="JSON list of [r,g,b] or #rrggbb")
    d.add_argument("--scale", type=int, default=4)
    d.set_defaults(func=cmd_render)

    o = sub.add_parser("oracle", help="exact Gibbs table and optional chain TV check")
    o.add_argument("--L", type=int, default=3)
    o.add_argument("--q", type=int, default=2)
    o.add_argument("--matrix", default="potts")
    o.add_argument("--beta", type=float, required=True)
    grp = o.add_mutually_exclusive_group()
    grp.add_argument("--counts")
    grp.add_argument("--h")
    o.add_argument("--chain-steps", dest="chain_steps", type=int, default=0)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", default="gpm_oracle")
    o.set_defaults(func=cmd_oracle)

    m = sub.add_parser("matrices", help="list or dump builtin cost matrices")
    m.add_argument("action", choices=["list", "dump"])
    m.add_argument("name", nargs="?")
    m.add_argument("--q", type=int)
    m.set_defaults(func=cmd_matrices)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
