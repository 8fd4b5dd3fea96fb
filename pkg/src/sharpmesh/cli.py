"""Command-line front end.

Subcommands::

    sharpmesh gen-data  --gt gt.obj --curves curves.yml --out out_dir
    sharpmesh remesh    --input coarse.obj --provider oracle --gt gt.obj
                        --curves curves.yml --output refined.obj
    sharpmesh eval      --recon refined.obj --gt gt.obj --curves curves.yml
    sharpmesh fields    export|inspect ...

Exit codes: 0 ok, 1 usage error, 2 input error, 3 internal invariant
violation. Every error prints a single ``error: <reason>`` line on stderr.
A ``--config`` YAML file supplies defaults; explicit flags override it, and
the effective configuration is echoed into every report.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import io as sio
from .correspond import correspondence_map, default_density
from .engine import RemeshConfig, run_pipeline
from .guidance import distance_direction_fields, surface_improvement_field
from .mesh import EditGuard, simplify_short_edges
from .metrics import MetricsConfig, evaluate_meshes, report_rows, rows_to_csv
from .patches import crop_patch, poisson_seeds
from .providers import (
    FileFieldProvider,
    HeuristicFieldProvider,
    OracleFieldProvider,
)
from .rng import random_rotation
from .scaling import GridBudgetError, ScalingConfig, scale_for_sampling
from .sdf import marching_cubes, sdf_grid
from .spatial import SurfaceLocator
from .validation import check_mesh

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


def _load_config_file(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config file must be a mapping")
    return data


def _merged(args, file_cfg, defaults):
    """Effective settings: defaults < config file < explicit flags."""
    out = dict(defaults)
    for key in defaults:
        if key in file_cfg:
            out[key] = file_cfg[key]
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
    return out


_GEN_DEFAULTS = {
    "lam": 0.05,
    "n_samples": 80,
    "alpha_curve": 0.25,
    "max_grid": 512,
    "padding": 3.0,
    "rotate": False,
    "simplify_fraction": 0.33,
    "epsilon": 4.0,
    "density": None,
    "seed": 0,
    "patches": False,
    "seed_spacing": 16.0,
    "patch_radius": 32.0,
    "max_patch_vertices": 2000,
    "threads": 1,
}

_REMESH_DEFAULTS = {
    "lam": None,
    "alpha_prox": 2.0,
    "flip_threshold": 0.01,
    "n_flip": None,
    "max_flip_sets": 2,
    "post_dot": 0.95,
    "max_outer_iters": 8,
    "simplify_fraction": None,
    "seed_spacing": 16.0,
    "patch_radius": 32.0,
    "max_patch_vertices": 2000,
    "epsilon": 4.0,
    "seed": 0,
    "threads": 1,
}

_EVAL_DEFAULTS = {
    "lam": None,
    "samples": 100000,
    "tau": 1.0,
    "normal_deg": 10.0,
    "delta": 2.0,
    "seed": 0,
}


def build_parser():
    parser = _Parser(prog="sharpmesh",
                     description="feature-aware surface remeshing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[], help="simulate a coarse "
                       "reconstruction and compute exact guidance fields")
    g.add_argument("--gt", required=True, help="ground-truth OBJ mesh")
    g.add_argument("--curves", required=True,
                   help="feature curves (YAML/JSON; vertex-indexed "
                        "annotation files are converted using the mesh)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--config", help="YAML config file")
    g.add_argument("--lam", type=float)
    g.add_argument("--n-samples", dest="n_samples", type=int)
    g.add_argument("--alpha-curve", dest="alpha_curve", type=float)
    g.add_argument("--max-grid", dest="max_grid", type=int)
    g.add_argument("--padding", type=float)
    g.add_argument("--rotate", action="store_const", const=True, default=None)
    g.add_argument("--no-rotate", dest="rotate", action="store_const",
                   const=False)
    g.add_argument("--simplify-fraction", dest="simplify_fraction", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--density", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--patches", action="store_const", const=True, default=None)
    g.add_argument("--threads", type=int)
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("remesh", help="refine a coarse mesh")
    r.add_argument("--input", required=True, help="coarse OBJ mesh")
    r.add_argument("--output", required=True, help="refined OBJ path")
    r.add_argument("--provider", required=True,
                   choices=["oracle", "heuristic", "files"])
    r.add_argument("--gt", help="ground-truth OBJ (oracle provider)")
    r.add_argument("--curves", help="feature curves (oracle provider)")
    r.add_argument("--fields", help="sidecar directory or stem (files provider)")
    r.add_argument("--report", help="stage report JSON path")
    r.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the report file "
                        "(makes it non-reproducible)")
    r.add_argument("--dump-stages", help="directory for intermediate meshes")
    r.add_argument("--config", help="YAML config file")
    r.add_argument("--lam", type=float)
    r.add_argument("--alpha-prox", dest="alpha_prox", type=float)
    r.add_argument("--flip-threshold", dest="flip_threshold", type=float)
    r.add_argument("--n-flip", dest="n_flip", type=int)
    r.add_argument("--max-flip-sets", dest="max_flip_sets", type=int)
    r.add_argument("--post-dot", dest="post_dot", type=float)
    r.add_argument("--max-outer-iters", dest="max_outer_iters", type=int)
    r.add_argument("--simplify-fraction", dest="simplify_fraction", type=float)
    r.add_argument("--seed-spacing", dest="seed_spacing", type=float)
    r.add_argument("--patch-radius", dest="patch_radius", type=float)
    r.add_argument("--max-patch-vertices", dest="max_patch_vertices", type=int)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.set_defaults(func=cmd_remesh)

    e = sub.add_parser("eval", help="compare a reconstruction to ground truth")
    e.add_argument("--recon", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--curves", help="feature curves for the near-feature band")
    e.add_argument("--out", help="report path (.json or .csv)")
    e.add_argument("--config", help="YAML config file")
    e.add_argument("--lam", type=float,
                   help="spacing unit (median GT edge length if omitted)")
    e.add_argument("--samples", type=int)
    e.add_argument("--tau", type=float)
    e.add_argument("--normal-deg", dest="normal_deg", type=float)
    e.add_argument("--delta", type=float)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("fields", help="export or inspect field sidecars")
    fsub = f.add_subparsers(dest="fields_command", required=True)
    fe = fsub.add_parser("export", help="compute exact fields for a mesh "
                         "against ground truth and write sidecars")
    fe.add_argument("--mesh", required=True, help="coarse OBJ mesh")
    fe.add_argument("--gt", required=True)
    fe.add_argument("--curves", required=True)
    fe.add_argument("--out", required=True, help="output stem (three sidecars)")
    fe.add_argument("--lam", type=float)
    fe.add_argument("--epsilon", type=float, default=None)
    fe.add_argument("--density", type=float, default=None)
    fe.add_argument("--seed", type=int, default=0)
    fe.set_defaults(func=cmd_fields_export)
    fi = fsub.add_parser("inspect", help="print sidecar statistics")
    fi.add_argument("--mesh", required=True)
    fi.add_argument("--fields", required=True, help="sidecar directory or stem")
    fi.add_argument("--epsilon", type=float, default=None)
    fi.set_defaults(func=cmd_fields_inspect)
    return parser


def _read_inputs_gen(args):
    gt = sio.read_obj(args.gt)
    curves = sio.read_curves(args.curves, mesh=gt)
    return gt, curves


def cmd_gen_data(args):
    cfg = _merged(args, _load_config_file(args.config), _GEN_DEFAULTS)
    gt, curves = _read_inputs_gen(args)
    check_mesh(gt)
    if len(curves) == 0:
        _fail(EXIT_INPUT, "curve file contains no usable curves")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    scaling = ScalingConfig(lam=cfg["lam"], n=cfg["n_samples"],
                            alpha_curve=cfg["alpha_curve"],
                            max_grid=cfg["max_grid"])
    gt_s, curves_s, beta = scale_for_sampling(gt, curves, scaling)
    if cfg["rotate"]:
        R = random_rotation(cfg["seed"])
        gt_s = type(gt_s)(gt_s.vertices @ R.T, gt_s.faces, validate=False)
        curves_s = curves_s.rotated(R)
    sio.write_obj(out / "gt.obj", gt_s)
    sio.write_curves(out / "curves.yml", curves_s)

    grid = sdf_grid(gt_s, cfg["lam"], padding=cfg["padding"],
                    max_grid=cfg["max_grid"])
    sio.write_sdf_grid(out / "grid.sdf", grid)

    coarse_raw = marching_cubes(grid)
    sio.write_obj(out / "coarse_raw.obj", coarse_raw)
    coarse = coarse_raw
    if cfg["simplify_fraction"] and cfg["simplify_fraction"] < 1.0:
        coarse = simplify_short_edges(coarse_raw, cfg["simplify_fraction"],
                                      lam=cfg["lam"])
    sio.write_obj(out / "coarse.obj", coarse)

    density = cfg["density"] or default_density(coarse)
    cmap = correspondence_map(coarse, gt_s, density, seed=cfg["seed"],
                              direction="coarse_to_gt")
    gt_density = cfg["density"] or default_density(gt_s)
    cmap_back = correspondence_map(gt_s, coarse, gt_density,
                                   seed=cfg["seed"] + 1,
                                   direction="gt_to_coarse")
    _write_map(out / "map_coarse_to_gt.csv", cmap)
    _write_map(out / "map_gt_to_coarse.csv", cmap_back)

    epsilon = cfg["epsilon"] * cfg["lam"]
    d, r = distance_direction_fields(coarse, curves_s, epsilon)
    improvement = surface_improvement_field(coarse, gt_s, cmap)
    sio.write_vertex_field_csv(out / "coarse.dist.csv", d.values)
    sio.write_vertex_field_csv(out / "coarse.dir.csv", r.values)
    sio.write_edge_field_csv(out / "coarse.simp.csv", improvement.edges,
                             improvement.values)

    if cfg["patches"]:
        seeds = poisson_seeds(coarse, cfg["seed_spacing"] * cfg["lam"],
                              seed=cfg["seed"])
        locator = SurfaceLocator(coarse)
        patch_list = [
            crop_patch(coarse, s, cfg["patch_radius"] * cfg["lam"],
                       cfg["max_patch_vertices"], locator=locator)
            for s in seeds
        ]
        from .engine import _map_concurrently

        per_patch = _map_concurrently(
            lambda p: distance_direction_fields(p.mesh, curves_s, epsilon),
            patch_list, cfg["threads"],
        )
        fields = {
            i: {"distance": pd.values, "direction": pr.values}
            for i, (pd, pr) in enumerate(per_patch)
        }
        sio.export_patch_dataset(out / "patches", patch_list, fields)

    report = {
        "config": {k: cfg[k] for k in sorted(cfg) if k != "threads"},
        "beta": beta,
        "grid_dims": list(grid.dims),
        "coarse_raw_faces": coarse_raw.n_faces,
        "coarse_faces": coarse.n_faces,
        "gt_faces": gt_s.n_faces,
        "outputs": sorted(p.name for p in out.iterdir() if p.is_file()),
    }
    sio.write_json(out / "report.json", report)
    print(json.dumps({"out": str(out), "coarse_faces": coarse.n_faces},
                     sort_keys=True))
    return EXIT_OK


def _write_map(path, cmap):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src_face,b0,b1,b2,dst_face,x,y,z\n")
        for i in range(len(cmap)):
            b = cmap.src_bary[i]
            p = cmap.dst_point[i]
            fh.write(
                f"{cmap.src_face[i]},{b[0]!r},{b[1]!r},{b[2]!r},"
                f"{cmap.dst_face[i]},{p[0]!r},{p[1]!r},{p[2]!r}\n"
            )


def cmd_remesh(args):
    cfg = _merged(args, _load_config_file(args.config), _REMESH_DEFAULTS)
    if args.provider == "oracle" and (not args.gt or not args.curves):
        _fail(EXIT_USAGE, "oracle provider needs --gt and --curves")
    if args.provider == "files" and not args.fields:
        _fail(EXIT_USAGE, "files provider needs --fields")
    mesh = sio.read_obj(args.input)
    check_mesh(mesh)
    lam = cfg["lam"] if cfg["lam"] is not None else mesh.median_edge_length()
    epsilon = cfg["epsilon"] * lam

    if args.provider == "oracle":
        gt = sio.read_obj(args.gt)
        curves = sio.read_curves(args.curves, mesh=gt)
        provider = OracleFieldProvider(gt, curves, epsilon, seed=cfg["seed"])
    elif args.provider == "heuristic":
        provider = HeuristicFieldProvider(epsilon)
    else:
        provider = FileFieldProvider(mesh, args.fields, epsilon)

    remesh_cfg = RemeshConfig(
        alpha_prox=cfg["alpha_prox"], flip_threshold=cfg["flip_threshold"],
        n_flip=cfg["n_flip"], max_flip_sets=cfg["max_flip_sets"],
        post_dot=cfg["post_dot"], max_outer_iters=cfg["max_outer_iters"],
        simplify_fraction=cfg["simplify_fraction"],
        seed_spacing=cfg["seed_spacing"], patch_radius=cfg["patch_radius"],
        max_patch_vertices=cfg["max_patch_vertices"], epsilon=cfg["epsilon"],
        lam=lam, seed=cfg["seed"], threads=cfg["threads"],
    )
    on_stage = None
    if args.dump_stages:
        dump_dir = Path(args.dump_stages)
        dump_dir.mkdir(parents=True, exist_ok=True)
        counter = iter(range(1, 100))

        def on_stage(name, stage_mesh):
            sio.write_obj(dump_dir / f"{next(counter):02d}_{name}.obj",
                          stage_mesh)

    refined, report = run_pipeline(mesh, provider, remesh_cfg, lam=lam,
                                   on_stage=on_stage)
    sio.write_obj(args.output, refined)
    # threads is an execution knob, not configuration: outputs are identical
    # for any worker count, so the echoed config omits it
    report["config"] = {k: cfg[k] for k in sorted(cfg) if k != "threads"}
    report["provider"] = provider.provenance
    if not args.timings:
        # wall-clock timings would break byte-identical reruns
        report.pop("timings_sec", None)
    if args.report:
        sio.write_json(args.report, report)
    print(json.dumps(
        {"output": args.output, "faces": refined.n_faces,
         "stages": [s["stage"] for s in report["stages"]]},
        sort_keys=True,
    ))
    return EXIT_OK


def cmd_eval(args):
    cfg = _merged(args, _load_config_file(args.config), _EVAL_DEFAULTS)
    recon = sio.read_obj(args.recon)
    gt = sio.read_obj(args.gt)
    check_mesh(recon, require_manifold=False)
    check_mesh(gt, require_manifold=False)
    curves = sio.read_curves(args.curves, mesh=gt) if args.curves else None
    lam = cfg["lam"] if cfg["lam"] is not None else gt.median_edge_length()
    mcfg = MetricsConfig(lam=lam, samples=cfg["samples"], tau=cfg["tau"],
                         normal_deg=cfg["normal_deg"], delta=cfg["delta"],
                         seed=cfg["seed"])
    result = evaluate_meshes(recon, gt, mcfg, curves=curves)
    result["config"] = {k: cfg[k] for k in sorted(cfg)}
    if args.out:
        out = Path(args.out)
        if out.suffix.lower() == ".csv":
            rows = report_rows(result, f"{Path(args.recon).name}"
                                       f"|{Path(args.gt).name}")
            out.write_text(rows_to_csv(rows), encoding="utf-8")
        else:
            sio.write_json(out, result)
    print(json.dumps({k: v for k, v in sorted(result.items())
                      if isinstance(v, (int, float))}, sort_keys=True))
    return EXIT_OK


def cmd_fields_export(args):
    mesh = sio.read_obj(args.mesh)
    gt = sio.read_obj(args.gt)
    curves = sio.read_curves(args.curves, mesh=gt)
    check_mesh(mesh)
    lam = args.lam if args.lam is not None else mesh.median_edge_length()
    epsilon = (args.epsilon if args.epsilon is not None else 4.0) * lam
    density = args.density or default_density(mesh)
    d, r = distance_direction_fields(mesh, curves, epsilon)
    cmap = correspondence_map(mesh, gt, density, seed=args.seed)
    improvement = surface_improvement_field(mesh, gt, cmap)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sio.write_vertex_field_csv(f"{out}.dist.csv", d.values)
    sio.write_vertex_field_csv(f"{out}.dir.csv", r.values)
    sio.write_edge_field_csv(f"{out}.simp.csv", improvement.edges,
                             improvement.values)
    print(json.dumps({"out": str(out), "vertices": mesh.n_vertices,
                      "edges": len(improvement)}, sort_keys=True))
    return EXIT_OK


def cmd_fields_inspect(args):
    mesh = sio.read_obj(args.mesh)
    lam = mesh.median_edge_length()
    epsilon = (args.epsilon if args.epsilon is not None else 4.0) * lam
    provider = FileFieldProvider(mesh, args.fields, epsilon)
    stats = {"capabilities": sorted(provider.capabilities()),
             "violations": provider.violation_counts}
    if provider._dist is not None:
        stats["distance"] = {
            "min": float(provider._dist.min()),
            "max": float(provider._dist.max()),
            "mean": float(provider._dist.mean()),
        }
    if provider._dir is not None:
        norms = np.linalg.norm(provider._dir, axis=1)
        stats["direction_nonzero"] = int((norms > 0).sum())
    if provider._simp is not None:
        vals = np.array(list(provider._simp.values()))
        stats["improvement"] = {
            "n_positive": int((vals > 0).sum()),
            "max": float(vals.max()) if len(vals) else 0.0,
        }
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (FileNotFoundError, ValueError, GridBudgetError, OSError) as exc:
        _fail(EXIT_INPUT, str(exc).replace("\n", " "))
    except AssertionError as exc:
        _fail(EXIT_INTERNAL, f"internal invariant violation: {exc}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
