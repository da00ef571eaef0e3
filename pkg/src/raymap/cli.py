"""Command-line interface.

One binary, thin wrappers around the library: scene gen | simulate |
dataset build | dataset validate | eval mse | eval hist | loss report |
export img | bench.  Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import heatmap as hm
from . import losses
from . import raytracer as rt
from . import scene as sc
from .errors import RaymapError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_size(text: str) -> tuple[float, float]:
    try:
        w, d = text.lower().split("x")
        return float(w), float(d)
    except ValueError:
        raise _UsageError(f"expected WxD size (e.g. 2x2), got {text!r}") from None


def _parse_point3(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"expected x,y,z, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_mix(text: str) -> dict[str, float]:
    mix = {}
    for item in text.split(","):
        name, _, value = item.partition("=")
        mix[name.strip()] = float(value)
    return mix


def _trace_config(args) -> rt.TraceConfig:
    return rt.TraceConfig(
        max_reflection_order=args.order,
        enable_diffraction=not args.no_diffraction,
        combine_mode="coherent_phasor_sum" if args.coherent else "noncoherent_power_sum",
        floor_dbm=args.floor,
    )


def _add_trace_flags(p):
    p.add_argument("--order", type=int, default=2, help="max reflection order (0-3)")
    p.add_argument("--no-diffraction", action="store_true")
    p.add_argument("--coherent", action="store_true", help="coherent phasor combining")
    p.add_argument("--floor", type=float, default=-150.0, help="floor value in dBm")


def _grid_from_args(args, bounds) -> sc.GridSpec:
    xmin, ymin, xmax, ymax = bounds
    return sc.GridSpec(
        (xmin, ymin), xmax - xmin, ymax - ymin, args.res, args.rx_height
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="raymap")
    sub = parser.add_subparsers(dest="command", required=True)

    scene_p = sub.add_parser("scene")
    scene_sub = scene_p.add_subparsers(dest="subcommand", required=True)
    gen = scene_sub.add_parser("gen")
    gen.add_argument("--archetype", required=True, choices=sc.ARCHETYPES)
    gen.add_argument("--size", required=True, help="WxD in meters, e.g. 2x2")
    gen.add_argument("--materials", required=True, help="comma-separated names")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)

    sim = sub.add_parser("simulate")
    sim.add_argument("--scene", required=True)
    sim.add_argument("--tx", required=True, help="x,y,z in meters")
    sim.add_argument("--power", type=float, default=0.0, help="tx power in dBm")
    sim.add_argument("--freq", type=float, default=2.4e9, help="carrier in Hz")
    sim.add_argument("--res", type=float, default=0.05)
    sim.add_argument("--rx-height", type=float, default=1.5)
    sim.add_argument("--threads", type=int, default=1)
    _add_trace_flags(sim)
    sim.add_argument("-o", "--output", required=True)

    data_p = sub.add_parser("dataset")
    data_sub = data_p.add_subparsers(dest="subcommand", required=True)
    build = data_sub.add_parser("build")
    build.add_argument("--scenes", type=int, required=True)
    build.add_argument("--mix", default="single_room=1.0", help="e.g. single_room=0.5,multiple_rooms=0.5")
    build.add_argument("--tx-per-scene", type=int, default=1)
    build.add_argument("--size", required=True)
    build.add_argument("--res", type=float, default=0.05)
    build.add_argument("--rx-height", type=float, default=1.5)
    build.add_argument("--materials", default="concrete,wood,glass")
    build.add_argument("--power", type=float, default=0.0)
    build.add_argument("--freq", type=float, default=2.4e9)
    build.add_argument("--seed", type=int, default=0)
    _add_trace_flags(build)
    build.add_argument("--out", required=True)
    validate = data_sub.add_parser("validate")
    validate.add_argument("manifest")
    validate.add_argument("--json", action="store_true")

    eval_p = sub.add_parser("eval")
    eval_sub = eval_p.add_subparsers(dest="subcommand", required=True)
    emse = eval_sub.add_parser("mse")
    emse.add_argument("a")
    emse.add_argument("b")
    emse.add_argument("--json", action="store_true")
    ehist = eval_sub.add_parser("hist")
    ehist.add_argument("a")
    ehist.add_argument("b")
    ehist.add_argument("--bins", type=int, default=50)
    ehist.add_argument("--json", action="store_true")

    loss_p = sub.add_parser("loss")
    loss_sub = loss_p.add_subparsers(dest="subcommand", required=True)
    lrep = loss_sub.add_parser("report")
    lrep.add_argument("--pred", required=True, help="predicted heatmap (EMHM)")
    lrep.add_argument("--target", required=True, help="reference heatmap (EMHM)")
    lrep.add_argument("--scene", help="scene file for physics components")
    lrep.add_argument("--samples", type=int, default=64, help="receiver points to sample")
    lrep.add_argument("--lambda", dest="lam", type=float, default=1.0)
    lrep.add_argument("--mu", type=float, default=0.1)
    lrep.add_argument("--alpha", type=float, default=1.0)
    lrep.add_argument("--beta", type=float, default=1.0)
    lrep.add_argument("--gamma", type=float, default=1.0)
    _add_trace_flags(lrep)
    lrep.add_argument("-o", "--output", help="write report JSON here instead of stdout")

    exp_p = sub.add_parser("export")
    exp_sub = exp_p.add_subparsers(dest="subcommand", required=True)
    img = exp_sub.add_parser("img")
    img.add_argument("heatmap")
    img.add_argument("--palette", choices=("grayscale", "thermal"), default="thermal")
    img.add_argument("-o", "--output", required=True)

    bench = sub.add_parser("bench")
    bench.add_argument("--scene", required=True)
    bench.add_argument("--tx", help="x,y,z; defaults to the scene center")
    bench.add_argument("--power", type=float, default=0.0)
    bench.add_argument("--freq", type=float, default=2.4e9)
    bench.add_argument("--res", type=float, default=0.05)
    bench.add_argument("--rx-height", type=float, default=1.5)
    bench.add_argument("--threads", type=int, default=1)
    _add_trace_flags(bench)
    bench.add_argument("--json", action="store_true")

    return parser


def _cmd_scene_gen(args) -> int:
    scene = sc.generate_scene(
        args.archetype, _parse_size(args.size), args.materials.split(","), args.seed
    )
    Path(args.output).write_bytes(sc.save_scene(scene))
    print(f"wrote {args.output} ({len(scene.walls)} walls)")
    return 0


def _cmd_simulate(args) -> int:
    scene = sc.load_scene(Path(args.scene).read_bytes())
    tx = sc.TxLocation(_parse_point3(args.tx), args.power, args.freq)
    grid = _grid_from_args(args, scene.bounds)
    heat = rt.simulate_heatmap(scene, tx, grid, _trace_config(args), threads=args.threads)
    Path(args.output).write_bytes(hm.save_heatmap(heat))
    print(f"wrote {args.output} ({grid.nx}x{grid.ny} cells)")
    return 0


def _cmd_dataset_build(args) -> int:
    size = _parse_size(args.size)
    grid = sc.GridSpec((0.0, 0.0), size[0], size[1], args.res, args.rx_height)
    manifest = ds.build_dataset(
        args.scenes,
        _parse_mix(args.mix),
        args.tx_per_scene,
        grid,
        _trace_config(args),
        args.seed,
        args.out,
        materials=tuple(args.materials.split(",")),
        tx_power=args.power,
        frequency=args.freq,
    )
    print(f"wrote {len(manifest['records'])} records under {args.out}")
    return 0


def _cmd_dataset_validate(args) -> int:
    report = ds.validate_manifest(args.manifest)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for rid, entry in report["records"].items():
            status = "pass" if entry["ok"] else "FAIL " + "; ".join(entry["errors"])
            print(f"{rid}: {status}")
        print(f"overall: {'pass' if report['ok'] else 'FAIL'}")
    return 0 if report["ok"] else 2


def _load_heatmap(path) -> hm.Heatmap:
    return hm.load_heatmap(Path(path).read_bytes())


def _cmd_eval_mse(args) -> int:
    value = hm.mse(_load_heatmap(args.a), _load_heatmap(args.b))
    if args.json:
        print(json.dumps({"mse_dbm2": value}))
    else:
        print(f"mse={value:.6f} dBm^2")
    return 0


def _cmd_eval_hist(args) -> int:
    hist = hm.normalized_diff_histogram(_load_heatmap(args.a), _load_heatmap(args.b), args.bins)
    if args.json:
        print(
            json.dumps(
                {
                    "bin_edges": hist.bin_edges.tolist(),
                    "counts": hist.counts.tolist(),
                    "percentiles": {str(k): v for k, v in hist.percentiles.items()},
                }
            )
        )
    else:
        for level in hm.PERCENTILE_LEVELS:
            print(f"p{level}={hist.percentiles[level]:.6f}")
    return 0


def _cmd_loss_report(args) -> int:
    pred = _load_heatmap(args.pred)
    target = _load_heatmap(args.target)
    weights = losses.LossWeights(args.lam, args.mu, args.alpha, args.beta, args.gamma)
    mse_val = losses.mse_loss(pred, target)
    samples = None
    if args.scene:
        scene = sc.load_scene(Path(args.scene).read_bytes())
        cfg = _trace_config(args)
        samples = losses.ComponentSamples()
        grid = target.grid
        centers = grid.cell_centers().reshape(grid.nx, grid.ny, 2)
        step = max(1, int(np.sqrt(grid.nx * grid.ny / max(args.samples, 1))))
        tx = target.tx
        for i in range(0, grid.nx, step):
            for j in range(0, grid.ny, step):
                rx = (centers[i, j, 0], centers[i, j, 1], grid.receiver_height)
                if np.hypot(rx[0] - tx.position[0], rx[1] - tx.position[1]) < grid.resolution:
                    continue
                paths = rt.trace_paths(scene, tx, rx, cfg)
                mech = losses.classify_dominant_mechanism(paths)
                if mech is None:
                    continue
                oracle = rt.component_path_loss(scene, tx, rx, cfg)[
                    losses.MECHANISMS.index(mech)
                ]
                predicted = tx.power - float(pred.values[i, j])
                samples.add(mech, predicted, oracle)
    report = losses.loss_report(weights, mse=mse_val, samples=samples)
    payload = losses.serialize_loss_report(report)
    if args.output:
        Path(args.output).write_bytes(payload)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def _cmd_export_img(args) -> int:
    heat = _load_heatmap(args.heatmap)
    Path(args.output).write_bytes(hm.export_image(heat, args.palette))
    print(f"wrote {args.output}")
    return 0


def _cmd_bench(args) -> int:
    scene = sc.load_scene(Path(args.scene).read_bytes())
    xmin, ymin, xmax, ymax = scene.bounds
    if args.tx:
        tx_pos = _parse_point3(args.tx)
    else:
        tx_pos = ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0, args.rx_height)
    tx = sc.TxLocation(tx_pos, args.power, args.freq)
    grid = _grid_from_args(args, scene.bounds)
    cfg = _trace_config(args)
    start = time.perf_counter()
    heat = rt.simulate_heatmap(scene, tx, grid, cfg, threads=args.threads)
    total = time.perf_counter() - start
    points = heat.values.size
    if args.json:
        print(json.dumps({"points": points, "total_s": total, "per_point_s": total / points}))
    else:
        print(f"points={points} total={total:.3f}s per_point={total / points:.6f}s")
    return 0


_DISPATCH = {
    ("scene", "gen"): _cmd_scene_gen,
    ("simulate", None): _cmd_simulate,
    ("dataset", "build"): _cmd_dataset_build,
    ("dataset", "validate"): _cmd_dataset_validate,
    ("eval", "mse"): _cmd_eval_mse,
    ("eval", "hist"): _cmd_eval_hist,
    ("loss", "report"): _cmd_loss_report,
    ("export", "img"): _cmd_export_img,
    ("bench", None): _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    handler = _DISPATCH[(args.command, getattr(args, "subcommand", None))]
    try:
        return handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (RaymapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
