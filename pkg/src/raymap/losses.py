"""Framework-free evaluators for the training objective terms.

Everything here is a pure function over plain floats/arrays so the neural
trainer (a separate process) and standalone evaluation share one definition
of each term.  Adversarial terms take discriminator scores in (0, 1);
component terms take per-sample path-loss pairs in dB.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import heatmap as hm
from .errors import NoSamplesForMechanism, ScoreOutOfRange

MECHANISMS = ("direct", "reflection", "diffraction")


@dataclass(frozen=True)
class LossWeights:
    mse_weight: float = 1.0  # lambda
    phy_weight: float = 0.1  # mu
    direct_weight: float = 1.0  # alpha
    reflection_weight: float = 1.0  # beta
    diffraction_weight: float = 1.0  # gamma

    def __post_init__(self):
        for name in (
            "mse_weight",
            "phy_weight",
            "direct_weight",
            "reflection_weight",
            "diffraction_weight",
        ):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def mechanism_weight(self, mechanism: str) -> float:
        return {
            "direct": self.direct_weight,
            "reflection": self.reflection_weight,
            "diffraction": self.diffraction_weight,
        }[mechanism]


@dataclass
class ComponentSamples:
    """Per-receiver-point (predicted, oracle) path losses by mechanism.

    A mechanism contributes to a sample only when both sides are present."""

    predicted: dict[str, list[float]] = field(default_factory=dict)
    oracle: dict[str, list[float]] = field(default_factory=dict)

    def add(self, mechanism: str, predicted_db, oracle_db):
        if mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {mechanism!r}")
        if predicted_db is None or oracle_db is None:
            return
        self.predicted.setdefault(mechanism, []).append(float(predicted_db))
        self.oracle.setdefault(mechanism, []).append(float(oracle_db))

    def count(self, mechanism: str) -> int:
        return len(self.predicted.get(mechanism, []))


def _validate_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("score batch is empty")
    if (s <= 0.0).any() or (s >= 1.0).any():
        bad = s[(s <= 0.0) | (s >= 1.0)]
        raise ScoreOutOfRange(f"scores must lie in (0, 1); got {bad[:5]}")
    return s


def mse_loss(pred: hm.Heatmap, target: hm.Heatmap) -> float:
    """Squared-error heatmap discrepancy in dBm^2 (same contract as heatmap.mse)."""
    return hm.mse(pred, target)


def component_loss(samples: ComponentSamples, mechanism: str) -> float:
    """Sum of squared path-loss errors (dB^2) for one mechanism."""
    if samples.count(mechanism) == 0:
        raise NoSamplesForMechanism(f"no samples carry mechanism {mechanism!r}")
    pred = np.asarray(samples.predicted[mechanism])
    oracle = np.asarray(samples.oracle[mechanism])
    return float(np.sum((pred - oracle) ** 2))


def phy_loss(samples: ComponentSamples, w: LossWeights) -> float:
    """Weighted physics loss: alpha*direct + beta*reflection + gamma*diffraction."""
    total = 0.0
    for mech in MECHANISMS:
        if samples.count(mech) == 0:
            continue
        total += w.mechanism_weight(mech) * component_loss(samples, mech)
    return total


def generator_objective(fake_scores, mse: float, phy: float, w: LossWeights) -> float:
    """Non-saturating generator loss: -mean(log D) + lambda*MSE + mu*phy."""
    s = _validate_scores(fake_scores)
    return float(-np.mean(np.log(s)) + w.mse_weight * mse + w.phy_weight * phy)


def generator_saturating_term(fake_scores) -> float:
    """Original saturating adversarial term mean(log(1 - D))."""
    s = _validate_scores(fake_scores)
    return float(np.mean(np.log1p(-s)))


def discriminator_objective(real_scores, fake_scores) -> float:
    """-mean(log D(real)) - mean(log(1 - D(fake))): BCE with targets 1/0."""
    r = _validate_scores(real_scores)
    f = _validate_scores(fake_scores)
    return float(-np.mean(np.log(r)) - np.mean(np.log1p(-f)))


def classify_dominant_mechanism(paths, threshold: float = 0.9):
    """Mechanism contributing > threshold of total linear power, else None."""
    lin = {m: 0.0 for m in MECHANISMS}
    for r in paths.records:
        lin[r.mechanism] += 10.0 ** (r.power_dbm / 10.0)
    total = sum(lin.values())
    if total <= 0.0:
        return None
    for mech in MECHANISMS:
        if lin[mech] / total > threshold:
            return mech
    return None


def loss_report(
    w: LossWeights,
    adversarial: float | None = None,
    mse: float | None = None,
    samples: ComponentSamples | None = None,
) -> dict:
    """Assemble every term, weight, and sample count into a serializable report."""
    report: dict = {
        "weights": {
            "lambda": w.mse_weight,
            "mu": w.phy_weight,
            "alpha": w.direct_weight,
            "beta": w.reflection_weight,
            "gamma": w.diffraction_weight,
        },
        "terms": {},
        "sample_counts": {},
    }
    if adversarial is not None:
        report["terms"]["adversarial"] = adversarial
    if mse is not None:
        report["terms"]["mse_dbm2"] = mse
    if samples is not None:
        for mech in MECHANISMS:
            n = samples.count(mech)
            report["sample_counts"][mech] = n
            if n:
                report["terms"][f"component_{mech}_db2"] = component_loss(samples, mech)
        report["terms"]["phy_db2"] = phy_loss(samples, w)
    if adversarial is not None and mse is not None and samples is not None:
        report["terms"]["generator_total"] = (
            adversarial + w.mse_weight * mse + w.phy_weight * phy_loss(samples, w)
        )
    return report


def serialize_loss_report(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("utf-8")
