"""Mini-batch SGD with a flat-then-geometric learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericsError
from .netparams import NetworkParams, init_params
from .netspec import NetworkSpec
from .network import Mode, _loss_and_grads, _stack_batch
from .rng import STREAM_TRAIN, derive_stream


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    base_lr: float = 1e-3
    lr_decay_start_epoch: int = 10
    lr_decay_factor: float = 0.99
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr <= 0.0:
            raise DomainError(f"base_lr must be positive, got {self.base_lr}")
        if not (0.0 < self.lr_decay_factor <= 1.0):
            raise DomainError(
                f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}"
            )
        if self.lr_decay_start_epoch < 0:
            raise DomainError(
                f"lr_decay_start_epoch must be >= 0, got {self.lr_decay_start_epoch}"
            )


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch mean training loss (dropout active) and learning rate."""

    losses: tuple[float, ...]
    lrs: tuple[float, ...]

    @property
    def epochs(self) -> int:
        return len(self.losses)


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Learning rate for a 1-based epoch: flat through the start epoch,
    then multiplied by the decay factor once per later epoch."""
    if epoch < 1:
        raise DomainError(f"epoch is 1-based, got {epoch}")
    if epoch <= config.lr_decay_start_epoch:
        return config.base_lr
    return config.base_lr * config.lr_decay_factor ** (epoch - config.lr_decay_start_epoch)


def _sgd_step(params: NetworkParams, grads: NetworkParams, lr: float) -> NetworkParams:
    return NetworkParams(tuple(t - lr * g for t, g in zip(params.tensors, grads.tensors)))


def train(spec: NetworkSpec, records, config: TrainConfig):
    """Train from a fresh Glorot init; returns (params, history).

    ``records`` is a sequence of decision records (anything with .features
    and .label) or bare (features, label) pairs. Reproducibility: the init,
    the per-epoch shuffles, and the per-epoch dropout masks each come from
    their own derived stream of config.seed, so equal configs give
    byte-identical parameters.
    """
    pairs = [
        (r.features, r.label) if hasattr(r, "features") else tuple(r) for r in records
    ]
    x, y = _stack_batch(spec, pairs)
    n = x.shape[0]

    params = init_params(spec, derive_stream(config.seed, STREAM_TRAIN, 0))
    losses, lrs = [], []
    for epoch in range(1, config.epochs + 1):
        lr = lr_schedule(epoch, config)
        perm = derive_stream(config.seed, STREAM_TRAIN, 1, epoch).permutation(n)
        mask_rng = derive_stream(config.seed, STREAM_TRAIN, 2, epoch)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            try:
                loss, grads = _loss_and_grads(
                    spec, params, x[idx], y[idx], Mode.TRAIN, mask_rng
                )
            except NumericsError as exc:
                raise NumericsError(f"epoch {epoch}: {exc}") from exc
            params = _sgd_step(params, grads, lr)
            loss_sum += loss * len(idx)
        params.check_finite()
        losses.append(loss_sum / n)
        lrs.append(lr)
    return params, TrainHistory(tuple(losses), tuple(lrs))
