"""Adversarial training loop, checkpointing, and the loss-parity guard."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from raymap import heatmap as prim_hm
from raymap import losses as prim_losses
from raymap import raytracer as prim_rt
from raymap import scene as prim_sc

from . import data, formats
from .config import DBM_FLOOR, DBM_SPAN, TrainConfig
from .models import Discriminator, Generator

_EPS = 1e-7


class ManifestInvalid(Exception):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass
class Checkpoint:
    generator_state: dict
    discriminator_state: dict
    config: TrainConfig
    curves: list

    def save(self, path):
        path = Path(path)
        payload = {
            "generator_state": self.generator_state,
            "discriminator_state": self.discriminator_state,
            "config": self.config.to_dict(),
            "curves": self.curves,
        }
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                torch.save(payload, fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def load(path) -> "Checkpoint":
        payload = torch.load(path, map_location="cpu", weights_only=False)
        return Checkpoint(
            payload["generator_state"],
            payload["discriminator_state"],
            TrainConfig.from_dict(payload["config"]),
            payload["curves"],
        )

    def build_generator(self) -> Generator:
        gen = Generator(self.config.effective_noise_channels, self.config.base_channels)
        gen.load_state_dict(self.generator_state)
        gen.eval()
        return gen


def _adv_generator(scores: torch.Tensor) -> torch.Tensor:
    return -torch.log(scores.clamp(_EPS, 1 - _EPS)).mean()


def _adv_discriminator(real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    r = real.clamp(_EPS, 1 - _EPS)
    f = fake.clamp(_EPS, 1 - _EPS)
    return -torch.log(r).mean() - torch.log1p(-f).mean()


def _mse_db2(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return (((pred - target) * DBM_SPAN) ** 2).mean()


def _phy_db2(pred, mech_mask, oracle_pl, tx_power, weights) -> torch.Tensor:
    """Mean over the batch of per-record weighted sums of squared dB errors."""
    pred_dbm = pred.squeeze(1).double() * DBM_SPAN + DBM_FLOOR
    pred_pl = tx_power.view(-1, 1, 1) - pred_dbm
    err2 = (pred_pl - oracle_pl.double()) ** 2
    total = pred.new_zeros((), dtype=torch.double)
    wts = [weights.direct_weight, weights.reflection_weight, weights.diffraction_weight]
    for m in range(3):
        sel = mech_mask == m
        if sel.any():
            total = total + wts[m] * err2[sel].sum()
    return total / pred.shape[0]


def _noise_like(raster: torch.Tensor, channels: int, generator=None) -> torch.Tensor | None:
    if channels == 0:
        return None
    b, _, h, w = raster.shape
    return torch.randn(b, channels, h, w, generator=generator)


def _record_heatmap(rec: data.Record, values_dbm: np.ndarray) -> prim_rt.Heatmap:
    h = rec.heatmap
    nx, ny = h.values.shape
    grid = prim_sc.GridSpec(
        h.origin, nx * h.resolution, ny * h.resolution, h.resolution, h.receiver_height
    )
    tx = prim_sc.TxLocation(h.tx_position, h.tx_power, h.tx_frequency)
    return prim_rt.Heatmap(grid, values_dbm, h.floor_dbm, tx)


def _assert_loss_parity(records, cfg: TrainConfig, gen, disc, tmp_dir):
    """Round-trip one batch's loss inputs through files and check that the
    in-graph loss values match the reference evaluators exactly."""
    idx = list(range(min(len(records), 8)))
    raster, target = data.batch_tensors(records, idx)
    g = torch.Generator().manual_seed(cfg.seed)
    with torch.no_grad():
        pred = gen(raster, _noise_like(raster, cfg.effective_noise_channels, g))
        fake_scores = disc(raster, pred)
        real_scores = disc(raster, target)

    tmp = Path(tmp_dir)
    score_file = tmp / "scores.json"
    score_file.write_text(
        json.dumps({"fake": fake_scores.tolist(), "real": real_scores.tolist()})
    )
    mse_vals = []
    phy_samples = prim_losses.ComponentSamples()
    for j, i in enumerate(idx):
        rec = records[i]
        pred_dbm = data.unit_to_dbm(pred[j, 0].numpy())
        target_dbm = data.unit_to_dbm(target[j, 0].numpy())
        pf, tf = tmp / f"p{j}.emhm", tmp / f"t{j}.emhm"
        formats.write_heatmap(pf, rec.heatmap.__class__(
            pred_dbm, rec.heatmap.resolution, rec.heatmap.origin,
            rec.heatmap.receiver_height, rec.heatmap.floor_dbm,
            rec.heatmap.tx_position, rec.heatmap.tx_power, rec.heatmap.tx_frequency,
        ))
        formats.write_heatmap(tf, rec.heatmap.__class__(
            target_dbm, rec.heatmap.resolution, rec.heatmap.origin,
            rec.heatmap.receiver_height, rec.heatmap.floor_dbm,
            rec.heatmap.tx_position, rec.heatmap.tx_power, rec.heatmap.tx_frequency,
        ))
        p_loaded = prim_hm.load_heatmap(pf.read_bytes())
        t_loaded = prim_hm.load_heatmap(tf.read_bytes())
        mse_vals.append(prim_hm.mse(p_loaded, t_loaded))
        if rec.mech_mask is not None:
            pl = rec.heatmap.tx_power - p_loaded.values
            for m, mech in enumerate(data.MECHANISMS):
                for a, b in zip(pl[rec.mech_mask == m], rec.oracle_pl[rec.mech_mask == m]):
                    phy_samples.add(mech, float(a), float(b))

    scores = json.loads(score_file.read_text())
    reference_mse = float(np.mean(mse_vals))
    if any(phy_samples.count(m) for m in data.MECHANISMS):
        reference_phy = prim_losses.phy_loss(phy_samples, cfg.weights) / len(idx)
    else:
        reference_phy = 0.0
    reference_g = prim_losses.generator_objective(
        scores["fake"], reference_mse, reference_phy, cfg.weights
    )
    reference_d = prim_losses.discriminator_objective(scores["real"], scores["fake"])

    # recompute the in-graph values from the same float32 round-tripped data
    pred32 = torch.from_numpy(
        np.stack([data.dbm_to_unit(data.unit_to_dbm(pred[j, 0].numpy())) for j in range(len(idx))])
    ).unsqueeze(1)
    target32 = torch.from_numpy(
        np.stack([data.dbm_to_unit(data.unit_to_dbm(target[j, 0].numpy())) for j in range(len(idx))])
    ).unsqueeze(1)
    local_mse = float(_mse_db2(pred32.double(), target32.double()))
    if records[0].mech_mask is not None:
        mask, oracle = data.batch_physics(records, idx)
        txp = torch.tensor([records[i].heatmap.tx_power for i in idx])
        local_phy = float(_phy_db2(pred32, mask, oracle, txp, cfg.weights))
    else:
        local_phy = 0.0
    local_g = float(
        _adv_generator(fake_scores)
        + cfg.weights.mse_weight * local_mse
        + cfg.weights.phy_weight * local_phy
    )
    local_d = float(_adv_discriminator(real_scores, fake_scores))

    for name, a, b in (
        ("generator", local_g, reference_g),
        ("discriminator", local_d, reference_d),
        ("mse", local_mse, reference_mse),
        ("phy", local_phy, reference_phy),
    ):
        if abs(a - b) > 1e-6 * max(1.0, abs(b)):
            raise AssertionError(
                f"loss parity violated for {name}: local {a} vs reference {b}"
            )
    return {"generator": reference_g, "discriminator": reference_d}


def validation_mse(gen: Generator, records, cfg: TrainConfig) -> float:
    if not records:
        return float("nan")
    raster, target = data.batch_tensors(records, list(range(len(records))))
    g = torch.Generator().manual_seed(cfg.seed)
    with torch.no_grad():
        pred = gen(raster, _noise_like(raster, cfg.effective_noise_channels, g))
    diff = (pred - target).squeeze(1).numpy() * DBM_SPAN
    return float(np.mean(diff**2))


def train(manifest_path, cfg: TrainConfig, log_path=None) -> Checkpoint:
    manifest = formats.read_manifest(manifest_path)
    if not formats.split_records(manifest, "train"):
        raise ManifestInvalid("train split is empty")
    base = Path(manifest_path).parent
    try:
        records = data.load_records(base, manifest, "train", physics=not cfg.no_physics)
        val_records = data.load_records(base, manifest, "test")
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc

    torch.manual_seed(cfg.seed)
    gen = Generator(cfg.effective_noise_channels, cfg.base_channels)
    disc = Discriminator(cfg.base_channels)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.learning_rate, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.learning_rate, betas=(0.5, 0.999))

    with tempfile.TemporaryDirectory() as tmp:
        _assert_loss_parity(records, cfg, gen, disc, tmp)

    rng = np.random.default_rng(cfg.seed)
    curves = []
    log_lines = []
    n = len(records)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        g_losses, d_losses = [], []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size].tolist()
            raster, target = data.batch_tensors(records, idx)
            noise = _noise_like(raster, cfg.effective_noise_channels)

            pred = gen(raster, noise)

            opt_d.zero_grad()
            d_loss = _adv_discriminator(disc(raster, target), disc(raster, pred.detach()))
            d_loss.backward()
            opt_d.step()

            opt_g.zero_grad()
            g_loss = _adv_generator(disc(raster, pred)) + cfg.weights.mse_weight * _mse_db2(
                pred, target
            )
            if not cfg.no_physics:
                mask, oracle = data.batch_physics(records, idx)
                txp = torch.tensor([records[i].heatmap.tx_power for i in idx])
                g_loss = g_loss + cfg.weights.phy_weight * _phy_db2(
                    pred, mask, oracle, txp, cfg.weights
                )
            g_loss.backward()
            opt_g.step()

            g_losses.append(float(g_loss.detach()))
            d_losses.append(float(d_loss.detach()))

        gen.eval()
        val_mse = validation_mse(gen, val_records, cfg)
        gen.train()
        entry = {
            "epoch": epoch,
            "g_loss": float(np.mean(g_losses)),
            "d_loss": float(np.mean(d_losses)),
            "val_mse": val_mse,
        }
        curves.append(entry)
        log_lines.append(
            f"epoch={epoch} g_loss={entry['g_loss']:.6f} "
            f"d_loss={entry['d_loss']:.6f} val_mse={val_mse:.6f}"
        )

    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n")

    gen.eval()
    return Checkpoint(gen.state_dict(), disc.state_dict(), cfg, curves)
