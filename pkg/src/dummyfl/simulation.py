"""Federated round loop: broadcast, local training, attacks, aggregation, evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import nn
from .aggregation import RULES, RuleConfig, aggregate, check_rule
from .attacks import AttackConfig, targeted_attack, untargeted_attack
from .data import Dataset, PartitionSpec, generate_dummies, generate_synthetic, quantity_skew_partition, sample_blobs
from .errors import ConfigurationError, InputError
from .nn import LabeledBatch, MlpArchitecture, ModelParams

log = logging.getLogger(__name__)

# stream tags for deriving independent RNGs from the run seed
_INIT, _LOCAL, _ATTACK, _DUMMY, _PARTITION, _SERVER = range(6)


@dataclass(frozen=True)
class ExperimentConfig:
    num_devices: int = 10
    rounds: int = 150
    local_epochs: int = 2
    batch_size: int = 32
    lr: float = 0.05
    beta: int | None = None  # None: beta = number of compromised devices
    p: float = 0.0
    alpha: float = 1.0
    attack: AttackConfig = field(default_factory=AttackConfig)
    rule: str = "dummy_contrastive"
    fang_discard: str = "lowest"
    dummy_count: int = 16
    regenerate_dummies: bool = False
    anchor_lag: int = 1
    num_classes: int = 4
    per_class: int = 500
    input_dim: int = 16
    hidden_dims: tuple[int, ...] = nn.DEFAULT_HIDDEN
    server_per_class: int = 25
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise ConfigurationError(f"p must satisfy 0 <= p < 1, got {self.p}")
        if self.rounds < 1:
            raise ConfigurationError(f"rounds (G) must be >= 1, got {self.rounds}")
        if self.local_epochs < 1:
            raise ConfigurationError(f"local_epochs (L) must be >= 1, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr < 0:
            raise ConfigurationError(f"lr must be >= 0, got {self.lr}")
        if self.anchor_lag < 1:
            raise ConfigurationError(f"anchor_lag must be >= 1, got {self.anchor_lag}")
        if self.dummy_count < 1:
            raise ConfigurationError(f"dummy_count must be >= 1, got {self.dummy_count}")
        if self.rule not in RULES:
            raise ConfigurationError(f"rule must be one of {RULES}, got {self.rule!r}")
        PartitionSpec(self.num_devices, self.alpha, self.seed)
        check_rule(self.rule, self.num_devices, self.resolved_beta)

    @property
    def num_compromised(self) -> int:
        # round-half-up so p = 0.25, M = 10 gives 3 rather than banker's 2
        return int(np.floor(self.p * self.num_devices + 0.5))

    @property
    def resolved_beta(self) -> int:
        return self.num_compromised if self.beta is None else self.beta

    @property
    def arch(self) -> MlpArchitecture:
        return MlpArchitecture(self.input_dim, self.hidden_dims, self.num_classes)


@dataclass(frozen=True, eq=False)
class DeviceState:
    index: int
    compromised: bool
    shard: LabeledBatch

    @property
    def role(self) -> str:
        return "compromised" if self.compromised else "benign"


@dataclass(frozen=True, eq=False)
class RoundMetrics:
    round: int
    test_accuracy: float
    scores: np.ndarray | None
    excluded_devices: tuple[int, ...]
    skipped_devices: tuple[int, ...] = ()

    @property
    def test_error(self) -> float:
        return 1.0 - self.test_accuracy


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``; order of use does not matter."""
    return np.random.default_rng([int(seed), *map(int, keys)])


def local_train(device: DeviceState, global_model: ModelParams, config: ExperimentConfig,
                rng: np.random.Generator) -> ModelParams:
    """``L`` epochs of shuffled mini-batch SGD starting from the broadcast model."""
    n = len(device.shard)
    if n == 0:
        raise InputError(f"device {device.index} has an empty shard")
    model = global_model
    for _ in range(config.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = device.shard.subset(order[start:start + config.batch_size])
            model = nn.sgd_step(model, nn.backward(model, batch), config.lr)
    return model


@dataclass
class SimulationState:
    config: ExperimentConfig
    dataset: Dataset
    devices: list[DeviceState]
    server_data: LabeledBatch
    dummy: np.ndarray
    history: list[ModelParams]

    @property
    def global_model(self) -> ModelParams:
        return self.history[-1]

    def anchor(self) -> ModelParams:
        lag = self.config.anchor_lag
        return self.history[max(0, len(self.history) - lag)]


def setup(config: ExperimentConfig) -> SimulationState:
    dataset = generate_synthetic(config.num_classes, config.per_class, config.input_dim, config.seed)
    shards = quantity_skew_partition(
        dataset.train, PartitionSpec(config.num_devices, config.alpha, config.seed + 1_000_003)
    )
    c = config.num_compromised
    devices = [DeviceState(i, i < c, dataset.train.subset(idx)) for i, idx in enumerate(shards)]
    server_data = sample_blobs(config.num_classes, config.server_per_class, config.input_dim,
                               rng_for(config.seed, _SERVER))
    dummy = generate_dummies(config.dummy_count, config.input_dim, [config.seed, _DUMMY])
    init = nn.init_params(config.arch, rng_for(config.seed, _INIT))
    return SimulationState(config, dataset, devices, server_data, dummy, [init])


def device_update(state: SimulationState, device: DeviceState, g_e: int) -> ModelParams:
    config = state.config
    broadcast = state.global_model
    if device.compromised and config.attack.kind == "untargeted":
        return untargeted_attack(broadcast, config.attack.eta, rng_for(config.seed, _ATTACK, device.index, g_e))
    local = local_train(device, broadcast, config, rng_for(config.seed, _LOCAL, device.index, g_e))
    if device.compromised and config.attack.kind == "targeted":
        return targeted_attack(local, broadcast, config.attack.boost(config.num_devices))
    return local


def run_round(state: SimulationState, g_e: int) -> tuple[ModelParams, RoundMetrics]:
    """One global epoch; appends the new global model to ``state.history``."""
    config = state.config
    updates, senders, skipped = [], [], []
    for device in state.devices:
        if len(device.shard) == 0:
            log.warning("device %d has no data; skipped in round %d", device.index, g_e)
            skipped.append(device.index)
            continue
        updates.append(device_update(state, device, g_e))
        senders.append(device.index)

    dummy = state.dummy
    if config.regenerate_dummies:
        dummy = generate_dummies(config.dummy_count, config.input_dim, [config.seed, _DUMMY, g_e])
    rule = RuleConfig(config.rule, config.resolved_beta, state.server_data, dummy, config.fang_discard)
    result = aggregate(updates, rule, prev_global=state.anchor())

    new_global = result.model
    state.history.append(new_global)
    keep_from = max(0, len(state.history) - config.anchor_lag)
    del state.history[:keep_from]

    metrics = RoundMetrics(
        round=g_e,
        test_accuracy=nn.accuracy(new_global, state.dataset.test),
        scores=result.scores,
        excluded_devices=tuple(senders[i] for i in result.excluded),
        skipped_devices=tuple(skipped),
    )
    return new_global, metrics


def run_experiment(config: ExperimentConfig) -> list[RoundMetrics]:
    state = setup(config)
    return [run_round(state, g_e)[1] for g_e in range(config.rounds)]


def min_test_error(metrics: Sequence[RoundMetrics]) -> float:
    if not metrics:
        raise InputError("no rounds recorded")
    return min(m.test_error for m in metrics)


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **changes)
