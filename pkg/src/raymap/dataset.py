"""Batch dataset builder: scenes -> rasters + reference heatmaps + manifest.

Everything is file-based and deterministic given the seed: per-record child
seeds come from numpy SeedSequences, JSON output is key-sorted, and the
binary formats carry no timestamps, so re-runs are byte-identical.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import heatmap as hm
from . import raytracer as rt
from . import scene as sc
from .errors import InvalidMix, ManifestInvalid, OutputDirNotWritable, ParseError

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
TRAIN_FRACTION = 0.9


@dataclass(frozen=True)
class DatasetRecord:
    record_id: str
    scene_path: str
    raster_path: str
    heatmap_path: str
    tx: sc.TxLocation
    grid: sc.GridSpec
    seed: int
    split: str


def _normalize_mix(archetype_mix) -> dict[str, float]:
    mix = dict(archetype_mix)
    unknown = set(mix) - set(sc.ARCHETYPES)
    if unknown:
        raise InvalidMix(f"unknown archetypes in mix: {sorted(unknown)}")
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-9:
        raise InvalidMix(f"archetype proportions sum to {total}, expected 1")
    if any(v < 0 for v in mix.values()):
        raise InvalidMix("archetype proportions must be >= 0")
    return {a: mix.get(a, 0.0) for a in sc.ARCHETYPES}


def _archetype_counts(mix: dict[str, float], n_scenes: int) -> dict[str, int]:
    raw = {a: mix[a] * n_scenes for a in sc.ARCHETYPES}
    counts = {a: int(np.floor(raw[a])) for a in sc.ARCHETYPES}
    remainder = n_scenes - sum(counts.values())
    by_frac = sorted(sc.ARCHETYPES, key=lambda a: (counts[a] - raw[a], a))
    for a in by_frac[:remainder]:
        counts[a] += 1
    return counts


def _child_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def _split_for(record_id: str) -> str:
    digest = hashlib.sha1(record_id.encode("ascii")).digest()
    return "train" if digest[0] / 256.0 < TRAIN_FRACTION else "test"


def _sample_tx(scene: sc.Scene, grid: sc.GridSpec, rng, height: float) -> sc.TxLocation:
    xmin, ymin, xmax, ymax = scene.bounds
    margin = 2.0 * grid.resolution
    for _ in range(1000):
        x = float(rng.uniform(xmin + margin, xmax - margin))
        y = float(rng.uniform(ymin + margin, ymax - margin))
        if not scene.point_in_wall_solid(x, y):
            return sc.TxLocation((x, y, height))
    raise RuntimeError("could not place transmitter in free space after 1000 draws")


def build_dataset(
    n_scenes: int,
    archetype_mix,
    tx_per_scene: int,
    grid: sc.GridSpec,
    cfg: rt.TraceConfig,
    seed: int,
    out_dir,
    materials=("concrete", "wood", "glass"),
    tx_power: float = 0.0,
    frequency: float = 2.4e9,
) -> dict:
    """Generate scenes, simulate heatmaps, and write a versioned dataset.

    Produces n_scenes * tx_per_scene records under out_dir with a 90/10
    train/test split keyed on the record-id hash.  Returns the manifest."""
    if n_scenes < 1 or tx_per_scene < 1:
        raise ValueError("n_scenes and tx_per_scene must be >= 1")
    mix = _normalize_mix(archetype_mix)
    counts = _archetype_counts(mix, n_scenes)

    out = Path(out_dir)
    try:
        for sub in ("scenes", "rasters", "heatmaps"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OutputDirNotWritable(f"cannot write dataset under {out}: {exc}") from exc

    records = []
    scene_idx = 0
    for archetype in sc.ARCHETYPES:
        for _ in range(counts[archetype]):
            scene_seed = _child_seed(seed, 0, scene_idx)
            scene = sc.generate_scene(
                archetype, (grid.width, grid.depth), materials, scene_seed
            )
            scene_name = f"s{scene_idx:05d}"
            scene_rel = f"scenes/{scene_name}.scene"
            (out / scene_rel).write_bytes(sc.save_scene(scene))

            for t in range(tx_per_scene):
                rng = np.random.default_rng(_child_seed(seed, 1, scene_idx, t))
                tx = _sample_tx(scene, grid, rng, grid.receiver_height)
                tx = sc.TxLocation(tx.position, tx_power, frequency)
                record_id = f"{scene_name}_t{t}"

                raster = sc.rasterize(scene, grid, tx)
                raster_rel = f"rasters/{record_id}.emeg"
                (out / raster_rel).write_bytes(sc.save_raster(raster))

                heat = rt.simulate_heatmap(scene, tx, grid, cfg)
                heat_rel = f"heatmaps/{record_id}.emhm"
                (out / heat_rel).write_bytes(hm.save_heatmap(heat))

                records.append(
                    DatasetRecord(
                        record_id,
                        scene_rel,
                        raster_rel,
                        heat_rel,
                        tx,
                        grid,
                        scene_seed,
                        _split_for(record_id),
                    )
                )
            scene_idx += 1

    manifest = {
        "version": MANIFEST_VERSION,
        "generator": {
            "seed": seed,
            "frequency": frequency,
            "tx_power": tx_power,
            "materials": sorted(materials),
            "trace_config": asdict(cfg),
        },
        "records": [
            {
                "record_id": r.record_id,
                "scene_path": r.scene_path,
                "raster_path": r.raster_path,
                "heatmap_path": r.heatmap_path,
                "tx": {
                    "position": list(r.tx.position),
                    "power": r.tx.power,
                    "frequency": r.tx.frequency,
                },
                "grid": {
                    "origin": list(r.grid.origin),
                    "width": r.grid.width,
                    "depth": r.grid.depth,
                    "resolution": r.grid.resolution,
                    "receiver_height": r.grid.receiver_height,
                },
                "seed": r.seed,
                "split": r.split,
            }
            for r in records
        ],
    }
    (out / MANIFEST_NAME).write_bytes(
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")
    )
    return manifest


def load_manifest(manifest_path) -> dict:
    path = Path(manifest_path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or "records" not in doc or "version" not in doc:
        raise ManifestInvalid(f"{path} is not a dataset manifest")
    if doc["version"] != MANIFEST_VERSION:
        raise ManifestInvalid(f"unsupported manifest version {doc['version']}")
    ids = [r["record_id"] for r in doc["records"]]
    if len(ids) != len(set(ids)):
        raise ManifestInvalid("duplicate record ids in manifest")
    return doc


def validate_manifest(manifest_path) -> dict:
    """Check every record's files exist, parse, and agree on the grid.

    Returns {"records": {record_id: {"ok": bool, "errors": [...]}}, "ok": bool}."""
    doc = load_manifest(manifest_path)
    base = Path(manifest_path).parent
    report = {"records": {}, "ok": True}
    for rec in doc["records"]:
        errors = []
        scene_obj = raster = heat = None
        for key, loader in (
            ("scene_path", sc.load_scene),
            ("raster_path", sc.load_raster),
            ("heatmap_path", hm.load_heatmap),
        ):
            path = base / rec[key]
            if not path.exists():
                errors.append(f"MissingFile: {rec[key]}")
                continue
            try:
                obj = loader(path.read_bytes())
            except ParseError as exc:
                errors.append(f"ParseError: {rec[key]}: {exc}")
                continue
            if key == "scene_path":
                scene_obj = obj
            elif key == "raster_path":
                raster = obj
            else:
                heat = obj
        if raster is not None and heat is not None and raster.grid != heat.grid:
            errors.append(
                f"GridMismatch: raster {raster.grid.nx}x{raster.grid.ny} vs "
                f"heatmap {heat.grid.nx}x{heat.grid.ny}"
            )
        g = rec["grid"]
        if raster is not None and (
            raster.grid.nx != round(g["width"] / g["resolution"])
            or raster.grid.ny != round(g["depth"] / g["resolution"])
        ):
            errors.append("GridMismatch: raster does not match manifest grid")
        del scene_obj
        report["records"][rec["record_id"]] = {"ok": not errors, "errors": errors}
        if errors:
            report["ok"] = False
    return report


def split_records(manifest: dict, split: str) -> list[dict]:
    return [r for r in manifest["records"] if r["split"] == split]
