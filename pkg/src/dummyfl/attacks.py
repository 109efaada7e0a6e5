"""Model-poisoning updates sent by compromised devices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .nn import ModelParams

ATTACK_KINDS = ("none", "targeted", "untargeted")


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "none"
    lam: float | None = None  # boosting factor; None means "number of devices"
    eta: float = 10.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ConfigurationError(f"attack must be one of {ATTACK_KINDS}, got {self.kind!r}")
        if self.kind == "targeted" and self.lam is not None and self.lam < 0:
            raise ConfigurationError(f"boosting factor lambda must be >= 0, got {self.lam}")
        if self.kind == "untargeted" and self.eta < 0:
            raise ConfigurationError(f"scaling factor eta must be >= 0, got {self.eta}")

    def boost(self, num_devices: int) -> float:
        return float(num_devices) if self.lam is None else float(self.lam)


def targeted_attack(local: ModelParams, global_model: ModelParams, lam: float) -> ModelParams:
    """Boost an honestly trained model away from the global one by ``lam``."""
    if local.arch != global_model.arch:
        raise ConfigurationError("local and global models have different architectures")
    return local.with_theta(local.theta + lam * (local.theta - global_model.theta))


def untargeted_attack(global_model: ModelParams, eta: float, rng: np.random.Generator) -> ModelParams:
    """Fake update ``eta * (noise - global)`` with standard normal noise; no training."""
    noise = rng.standard_normal(global_model.theta.size)
    return global_model.with_theta(eta * (noise - global_model.theta))
