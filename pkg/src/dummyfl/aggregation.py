"""Server-side aggregation rules.

Every rule takes the list of models received in a round (indexed by device)
and returns the next global model. Ties in any ranking are broken by the
lower device index (stable sorts throughout), so all rules are
deterministic functions of their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import nn
from .errors import ConfigurationError, InputError
from .nn import LabeledBatch, ModelParams

RULES = ("fedavg", "krum", "trimmed_mean", "fang", "dummy_contrastive")


@dataclass(frozen=True, eq=False)
class RuleConfig:
    rule: str = "fedavg"
    beta: int = 0
    server_data: LabeledBatch | None = None
    dummy: np.ndarray | None = None
    fang_discard: str = "lowest"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigurationError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.fang_discard not in ("lowest", "highest"):
            raise ConfigurationError(f"fang_discard must be 'lowest' or 'highest', got {self.fang_discard!r}")

    def validate(self, num_models: int) -> None:
        check_rule(self.rule, num_models, self.beta)
        if self.rule == "fang" and (self.server_data is None or len(self.server_data) == 0):
            raise ConfigurationError("fang needs a non-empty server dataset")
        if self.rule == "dummy_contrastive" and self.dummy is None:
            raise ConfigurationError("dummy_contrastive needs a dummy input set")


def check_rule(rule: str, m: int, beta: int) -> None:
    """Raise if ``beta`` is infeasible for ``rule`` with ``m`` models."""
    if m < 1:
        raise InputError("no models to aggregate")
    if rule == "krum" and m - beta - 2 < 1:
        raise ConfigurationError(
            f"krum requires M - beta - 2 >= 1 (got M={m}, beta={beta})"
        )
    if rule == "trimmed_mean" and not 2 * beta < m:
        raise ConfigurationError(
            f"trimmed_mean requires beta < M/2: beta should be smaller than M/2 (got M={m}, beta={beta})"
        )
    if rule == "fang" and m - 1 - 2 * beta < 1:
        raise ConfigurationError(
            f"fang requires M - 1 - 2*beta >= 1 for its leave-one-out trimmed mean (got M={m}, beta={beta})"
        )
    if rule == "dummy_contrastive" and not beta < m:
        raise ConfigurationError(f"dummy_contrastive requires beta < M (got M={m}, beta={beta})")


@dataclass(frozen=True, eq=False)
class AggregationResult:
    model: ModelParams
    scores: np.ndarray | None
    excluded: tuple[int, ...]
    rule: str


def _stack(models: Sequence[ModelParams]) -> np.ndarray:
    if len(models) == 0:
        raise InputError("no models to aggregate")
    arch = models[0].arch
    if any(m.arch != arch for m in models):
        raise ConfigurationError("models have different architectures")
    return np.stack([m.theta for m in models])


def _mean_of(models: Sequence[ModelParams], keep) -> ModelParams:
    thetas = _stack(models)
    return models[0].with_theta(thetas[np.asarray(keep)].mean(axis=0))


def pairwise_sq_dist(a: ModelParams, b: ModelParams) -> float:
    if a.arch != b.arch:
        raise ConfigurationError("models have different architectures")
    d = a.theta - b.theta
    return float(d @ d)


def distance_matrix(models: Sequence[ModelParams]) -> np.ndarray:
    thetas = _stack(models)
    m = len(thetas)
    out = np.zeros((m, m))
    for i in range(m):
        d = thetas - thetas[i]
        out[i] = np.einsum("ij,ij->i", d, d)
    # exact symmetry regardless of rounding in the einsum
    return np.minimum(out, out.T)


def fedavg(models: Sequence[ModelParams]) -> ModelParams:
    return _mean_of(models, np.arange(len(models)))


# -- Krum ------------------------------------------------------------------

def krum_score(models: Sequence[ModelParams], beta: int) -> np.ndarray:
    """Sum of squared distances to the ``M - beta - 2`` nearest other models."""
    m = len(models)
    check_rule("krum", m, beta)
    dist = distance_matrix(models)
    k = m - beta - 2
    scores = np.empty(m)
    for i in range(m):
        others = np.delete(np.arange(m), i)
        nearest = others[np.argsort(dist[i, others], kind="stable")[:k]]
        scores[i] = dist[i, nearest].sum()
    return scores


def krum_index(models: Sequence[ModelParams], beta: int) -> int:
    return int(np.argmin(krum_score(models, beta)))


def krum_select(models: Sequence[ModelParams], beta: int) -> ModelParams:
    return models[krum_index(models, beta)]


# -- Trimmed mean ----------------------------------------------------------

def trim_score(models: Sequence[ModelParams]) -> np.ndarray:
    """Total squared distance to all models (self term included, it is 0)."""
    return distance_matrix(models).sum(axis=1)


def trimmed_keep(models: Sequence[ModelParams], beta: int) -> np.ndarray:
    check_rule("trimmed_mean", len(models), beta)
    order = np.argsort(trim_score(models), kind="stable")
    return np.sort(order[beta:len(models) - beta])


def trimmed_mean(models: Sequence[ModelParams], beta: int) -> ModelParams:
    """Mean after dropping the ``beta`` lowest- and ``beta`` highest-scored models."""
    return _mean_of(models, trimmed_keep(models, beta))


# -- Fang ------------------------------------------------------------------

def fang_score(models: Sequence[ModelParams], beta: int, server_data: LabeledBatch) -> np.ndarray:
    """Loss of the full trimmed mean minus loss of the leave-one-out trimmed mean."""
    m = len(models)
    check_rule("fang", m, beta)
    if server_data is None or len(server_data) == 0:
        raise ConfigurationError("fang needs a non-empty server dataset")
    loss_all = nn.loss(trimmed_mean(models, beta), server_data)
    scores = np.empty(m)
    for i in range(m):
        rest = [models[j] for j in range(m) if j != i]
        scores[i] = loss_all - nn.loss(trimmed_mean(rest, beta), server_data)
    return scores


def fang_keep(scores: np.ndarray, beta: int, discard: str = "lowest") -> np.ndarray:
    key = scores if discard == "lowest" else -scores
    order = np.argsort(key, kind="stable")
    return np.sort(order[beta:])


def fang_aggregate(models: Sequence[ModelParams], beta: int, server_data: LabeledBatch,
                   discard: str = "lowest") -> ModelParams:
    scores = fang_score(models, beta, server_data)
    return _mean_of(models, fang_keep(scores, beta, discard))


# -- Dummy contrastive -----------------------------------------------------

def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def bce_logits(x, y) -> float:
    """Binary cross-entropy of logits ``x`` against raw targets ``y``.

    ``y`` is not required to lie in [0, 1]. Uses
    ``-log sigmoid(x) = softplus(-x)`` and ``-log(1 - sigmoid(x)) = softplus(x)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InputError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.mean(y * softplus(-x) + (1.0 - y) * softplus(x)))


def bce_rows(x: np.ndarray, y: np.ndarray) -> float:
    """Row-wise ``bce_logits`` averaged over the rows of two N x O matrices."""
    if x.shape != y.shape:
        raise InputError(f"shape mismatch: {x.shape} vs {y.shape}")
    per_row = np.mean(y * softplus(-x) + (1.0 - y) * softplus(x), axis=1)
    return float(per_row.mean())


def anchor_losses(models: Sequence[ModelParams], prev_global: ModelParams, dummy: np.ndarray) -> np.ndarray:
    """``bce_rows(p_g, p_i)`` for each model, with features taken on ``dummy``."""
    if dummy is None:
        raise ConfigurationError("dummy_contrastive needs a dummy input set")
    _stack(models)
    if models[0].arch != prev_global.arch:
        raise ConfigurationError("previous global model has a different architecture")
    p_g = nn.project(prev_global, dummy)
    return np.array([bce_rows(p_g, nn.project(m, dummy)) for m in models])


def dummy_contrastive_score(models: Sequence[ModelParams], prev_global: ModelParams,
                            dummy: np.ndarray) -> np.ndarray:
    """``s_i = sum_j [bce(p_g; p_j) + bce(p_g; p_i)]`` over the M received models."""
    per_model = anchor_losses(models, prev_global, dummy)
    m = len(models)
    return per_model.sum() + m * per_model


def dummy_contrastive_keep(scores: np.ndarray, beta: int) -> np.ndarray:
    check_rule("dummy_contrastive", len(scores), beta)
    order = np.argsort(scores, kind="stable")
    return np.sort(order[:len(scores) - beta])


def dummy_contrastive_aggregate(models: Sequence[ModelParams], prev_global: ModelParams,
                                beta: int, dummy: np.ndarray) -> ModelParams:
    """Drop the ``beta`` highest-scored models and average the rest."""
    scores = dummy_contrastive_score(models, prev_global, dummy)
    return _mean_of(models, dummy_contrastive_keep(scores, beta))


# -- dispatch --------------------------------------------------------------

def aggregate(models: Sequence[ModelParams], config: RuleConfig,
              prev_global: ModelParams | None = None) -> AggregationResult:
    """Apply ``config.rule`` and report the scores and dropped device indices."""
    m = len(models)
    config.validate(m)
    everyone = np.arange(m)
    beta = config.beta
    scores = None
    if config.rule == "fedavg":
        keep = everyone
    elif config.rule == "krum":
        scores = krum_score(models, beta)
        keep = np.array([int(np.argmin(scores))])
    elif config.rule == "trimmed_mean":
        scores = trim_score(models)
        keep = trimmed_keep(models, beta)
    elif config.rule == "fang":
        scores = fang_score(models, beta, config.server_data)
        keep = fang_keep(scores, beta, config.fang_discard)
    else:
        if prev_global is None:
            raise ConfigurationError("dummy_contrastive needs the previous global model")
        scores = dummy_contrastive_score(models, prev_global, config.dummy)
        keep = dummy_contrastive_keep(scores, beta)
    excluded = tuple(int(i) for i in np.setdiff1d(everyone, keep))
    return AggregationResult(_mean_of(models, keep), scores, excluded, config.rule)
