"""Command-line entry point.

    morphforge validate ROBOT.urdf [--json]
    morphforge randomize ROBOT.urdf [--config CFG.json] [--seed N] [--count N] [--outdir DIR] [--workers N]
    morphforge graph ROBOT.urdf [--aliases A.json] [--format csv|dot|json]
    morphforge export ROBOT.urdf [--aliases A.json] [--kind map|adjacency|mask] [--output PATH]
    morphforge inspect ROBOT.urdf [--aliases A.json] [--json]

Exit codes: 0 success, 1 validation failure, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .canonical import (
    N_MAX,
    AliasTable,
    adjacency,
    adjacency_csv,
    attention_mask,
    build_graph,
    build_joint_map,
    graph_dot,
)
from .data import aliases_path
from .errors import CanonicalError, ConfigError, InconsistentTemplate, RandomizerError, RobotModelError
from .inertia import check_consistency, principal_moments
from .randomizer import RandomizationConfig, check_template, derive_seed, generate
from .robot_model import load_robot, parse_robot, serialize_robot

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

SEED_ENV = "MORPHFORGE_SEED"


class InputError(Exception):
    """Bad user input; mapped to exit code 2."""


def _err(msg):
    print(f"morphforge: {msg}", file=sys.stderr)


def _load_robot(path):
    try:
        return load_robot(path)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from e
    except RobotModelError as e:
        raise InputError(f"{path}: {e}") from e


def _load_aliases(path):
    path = path or aliases_path()
    try:
        return AliasTable.load(path)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from e
    except (ValueError, KeyError, TypeError) as e:
        raise InputError(f"{path}: bad alias file: {e}") from e


def _atomic_write(path: Path, data: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# validate


def validation_report(r):
    rows = []
    for ln in r.links:
        if ln.massless:
            rows.append({"name": ln.name, "mass": 0.0, "status": "SKIP", "reason": "massless frame"})
            continue
        rep = check_consistency(ln.inertial)
        failed = [k for k in ("mass_positive", "moments_positive", "triangle_ok", "pd_ok") if not getattr(rep, k)]
        rows.append({
            "name": ln.name,
            "mass": ln.inertial.m,
            "status": "OK" if rep.consistent else "FAIL",
            "failed_checks": failed,
            "min_eigenvalue_J": rep.min_eigenvalue_J,
        })
    n_failed = sum(row["status"] == "FAIL" for row in rows)
    return {"robot": r.name, "n_links": len(rows), "n_failed": n_failed, "consistent": n_failed == 0, "links": rows}


def cmd_validate(args):
    r = _load_robot(args.robot)
    rep = validation_report(r)
    if args.json:
        sys.stdout.write(_dump(rep))
    else:
        width = max([len(row["name"]) for row in rep["links"]] + [4])
        print(f"{'link':<{width}}  {'mass':>10}  status")
        for row in rep["links"]:
            extra = ""
            if row["status"] == "FAIL":
                extra = f"  ({', '.join(row['failed_checks'])}; min eig J = {row['min_eigenvalue_J']:.3e})"
            print(f"{row['name']:<{width}}  {row['mass']:>10.4f}  {row['status']}{extra}")
        print(f"{rep['n_links'] - rep['n_failed']}/{rep['n_links']} links consistent")
    return EXIT_OK if rep["consistent"] else EXIT_INVALID


# ---------------------------------------------------------------------------
# randomize


def _render_sample(template_text, cfg_dict, base_seed, index):
    """Worker: one sample as (urdf text, sidecar json text)."""
    r = parse_robot(template_text)
    cfg = RandomizationConfig.from_dict(cfg_dict)
    s = generate(r, cfg, derive_seed(base_seed, index))
    meta = s.metadata()
    meta["index"] = index
    meta["template"] = r.name
    return serialize_robot(s.robot), _dump(meta)


def _resolve_seed(args, cfg):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError as e:
            raise InputError(f"{SEED_ENV}={env!r} is not an integer") from e
    return cfg.seed


def cmd_randomize(args):
    r = _load_robot(args.robot)
    try:
        cfg = RandomizationConfig.load(args.config) if args.config else RandomizationConfig()
    except OSError as e:
        raise InputError(f"cannot read {args.config}: {e.strerror or e}") from e
    except (ConfigError, ValueError) as e:
        raise InputError(f"{args.config}: {e}") from e
    seed = _resolve_seed(args, cfg)
    if seed < 0:
        raise InputError("seed must be non-negative")
    if args.count < 0:
        raise InputError("--count must be non-negative")
    try:
        check_template(r)
        cfg.lockable_joints(r)
        cfg.resolved_gain_reference(r)
    except InconsistentTemplate as e:
        _err(str(e))
        return EXIT_INVALID
    except RandomizerError as e:
        raise InputError(str(e)) from e

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    text = serialize_robot(r)
    cfg_dict = cfg.to_dict()
    jobs = range(args.count)
    if args.workers > 1 and args.count > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_render_sample, text, cfg_dict, seed, i) for i in jobs]
            results = (f.result() for f in futures)
            written = _write_samples(outdir, r.name, results)
    else:
        written = _write_samples(outdir, r.name, (_render_sample(text, cfg_dict, seed, i) for i in jobs))
    print(f"wrote {written} samples to {outdir} (seed {seed})")
    return EXIT_OK


def _write_samples(outdir, name, results):
    n = 0
    for i, (urdf, meta) in enumerate(results):
        stem = f"{name}_{i:05d}"
        _atomic_write(outdir / f"{stem}.urdf", urdf)
        _atomic_write(outdir / f"{stem}.json", meta)
        n += 1
    return n


# ---------------------------------------------------------------------------
# graph / export


def _graph_for(args):
    r = _load_robot(args.robot)
    table = _load_aliases(args.aliases)
    jm = build_joint_map(r, table)
    g = build_graph(r, jm, table.parallel_groups)
    return r, jm, g


def cmd_graph(args):
    r, jm, g = _graph_for(args)
    if args.format == "csv":
        sys.stdout.write(adjacency_csv(adjacency(g)))
    elif args.format == "dot":
        sys.stdout.write(graph_dot(g, r.name))
    else:
        sys.stdout.write(_dump({
            "robot": r.name,
            "present": [int(i) for i in range(N_MAX) if g.present[i]],
            "edges": [list(e) for e in g.edges],
            "joint_map": {n: jm.forward[n] for n in jm.order},
        }))
    return EXIT_OK


def cmd_export(args):
    r, jm, g = _graph_for(args)
    if args.kind == "map":
        text = jm.to_json() + "\n"
    elif args.kind == "adjacency":
        text = adjacency_csv(adjacency(g))
    else:
        text = adjacency_csv(attention_mask(adjacency(g), symmetric=not args.directed))
    if args.output:
        _atomic_write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect


def inspection(r, table=None):
    links = []
    for ln in r.links:
        row = {"name": ln.name, "mass": ln.inertial.m}
        if not ln.massless:
            row["com"] = ln.inertial.com.tolist()
            try:
                row["principal_moments"] = principal_moments(ln.inertial).D.tolist()
            except ValueError:
                row["principal_moments"] = None
        links.append(row)
    out = {
        "robot": r.name,
        "total_mass": r.total_mass(),
        "n_links": r.n_b,
        "dof": r.n_d,
        "fixed_joints": len(r.joints) - r.n_d,
        "links": links,
    }
    if table is not None:
        try:
            jm = build_joint_map(r, table)
            out["canonical_coverage"] = {"slots": sorted(jm.inverse), "count": jm.n_r, "of": N_MAX}
        except CanonicalError as e:
            out["canonical_coverage"] = {"error": str(e)}
    return out


def cmd_inspect(args):
    r = _load_robot(args.robot)
    table = _load_aliases(args.aliases)
    info = inspection(r, table)
    if args.json:
        sys.stdout.write(_dump(info))
        return EXIT_OK
    print(f"robot: {info['robot']}")
    print(f"total mass: {info['total_mass']:.6g} kg")
    print(f"links: {info['n_links']}  dof: {info['dof']}  fixed joints: {info['fixed_joints']}")
    cov = info["canonical_coverage"]
    if "error" in cov:
        print(f"canonical coverage: unavailable ({cov['error']})")
    else:
        print(f"canonical coverage: {cov['count']}/{cov['of']} slots")
    for row in info["links"]:
        if "com" not in row:
            print(f"  {row['name']}: massless")
            continue
        com = ", ".join(f"{c:+.4f}" for c in row["com"])
        D = row["principal_moments"]
        mom = ", ".join(f"{d:.4e}" for d in D) if D else "n/a"
        print(f"  {row['name']}: m={row['mass']:.4f} com=({com}) D=({mom})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="morphforge", description="Randomized humanoid morphologies and canonical graphs")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check physical consistency of every link")
    v.add_argument("robot")
    v.add_argument("--json", action="store_true", help="machine-readable report")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("randomize", help="generate randomized embodiments")
    r.add_argument("robot")
    r.add_argument("--config", help="randomization config JSON (default: built-in tables)")
    r.add_argument("--seed", type=int, default=None, help=f"base seed (CLI > env:{SEED_ENV} > config)")
    r.add_argument("--count", type=int, default=1)
    r.add_argument("--outdir", default="samples")
    r.add_argument("--workers", type=int, default=1, help="worker processes; output does not depend on it")
    r.set_defaults(func=cmd_randomize)

    g = sub.add_parser("graph", help="print the 32-slot embodiment graph")
    g.add_argument("robot")
    g.add_argument("--aliases", help="alias table JSON (default: bundled template aliases)")
    g.add_argument("--format", choices=("csv", "dot", "json"), default="csv")
    g.set_defaults(func=cmd_graph)

    e = sub.add_parser("export", help="write joint map, adjacency or attention mask")
    e.add_argument("robot")
    e.add_argument("--aliases")
    e.add_argument("--kind", choices=("map", "adjacency", "mask"), default="map")
    e.add_argument("--directed", action="store_true", help="mask from the directed adjacency")
    e.add_argument("--output")
    e.set_defaults(func=cmd_export)

    i = sub.add_parser("inspect", help="summarize mass, inertia and canonical coverage")
    i.add_argument("robot")
    i.add_argument("--aliases")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits 2 on usage errors, 0 on --help
        return int(e.code or 0)
    try:
        return args.func(args)
    except InputError as e:
        _err(str(e))
        return EXIT_INPUT
    except CanonicalError as e:
        _err(str(e))
        return EXIT_INVALID
    except Exception:  # noqa: BLE001 - last-resort guard, reported as internal error
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
