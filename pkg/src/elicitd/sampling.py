"""Monte Carlo dropout sampling of predicted probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .netparams import NetworkParams
from .netspec import NetworkSpec, SoftmaxHead
from .network import Mode, forward_batch
from .rng import STREAM_MC, derive_stream, stream_label


@dataclass(frozen=True)
class ProbabilitySample:
    """T stochastic forward-pass probabilities for one input.

    ``seed`` is the label of the rng stream the passes were drawn from,
    "" when the sample was built directly from values.
    """

    values: np.ndarray
    seed: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 2:
            raise DomainError(f"need a 1-d sample of at least 2 values, got shape {v.shape}")
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise DomainError("sampled probabilities must lie in [0, 1]")

    @property
    def T(self) -> int:
        return int(self.values.size)


def _positive_prob(spec: NetworkSpec, probs: np.ndarray) -> np.ndarray:
    head = spec.layers[-1]
    if isinstance(head, SoftmaxHead):
        if head.k != 2:
            raise DomainError("binary elicitation requires a sigmoid head or softmax with k=2")
        return probs[:, 1]
    return probs[:, 0]


def mc_sample(
    spec: NetworkSpec,
    params: NetworkParams,
    input: np.ndarray,
    T: int = 100,
    seed: int = 0,
    record_index: int = 0,
) -> ProbabilitySample:
    """Run T dropout-active forward passes on one input.

    The input is tiled and the passes run as a single batch, so each row
    gets an independent fresh mask from the record's own derived stream.
    """
    if T < 2:
        raise DomainError(f"T must be >= 2, got {T}")
    x = np.asarray(input, dtype=np.float64)
    tiled = np.broadcast_to(x, (T,) + x.shape)
    rng = derive_stream(seed, STREAM_MC, record_index)
    probs = forward_batch(spec, params, tiled, Mode.MC_SAMPLE, rng)
    return ProbabilitySample(
        _positive_prob(spec, probs), seed=stream_label(seed, STREAM_MC, record_index)
    )


def sample_to_text(sample: ProbabilitySample) -> str:
    """One probability per line, full-precision decimal text."""
    return "".join(f"{repr(float(v))}\n" for v in sample.values)


def sample_from_text(text: str, seed: str = "") -> ProbabilitySample:
    values = [float(line) for line in text.splitlines() if line.strip()]
    return ProbabilitySample(np.array(values), seed=seed)


def credible_interval(sample: ProbabilitySample, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed interval from sample percentiles (linear interpolation)."""
    if not (0.0 < level < 1.0):
        raise DomainError(f"level must be in (0, 1), got {level}")
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(sample.values, [tail, 100.0 - tail])
    return float(lo), float(hi)
