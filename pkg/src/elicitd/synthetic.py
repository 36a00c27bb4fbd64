"""Synthetic decision records from a known truth function and a simulated
expert panel, plus oracle checks of elicited distributions against that truth."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .betafit import ElicitedDistribution, beta_cdf
from .datasets import DecisionRecord
from .errors import DataError, DomainError
from .network import sigmoid
from .rng import STREAM_SYNTH, derive_stream
from .stats import DEFAULT_ENTROPY_BINS, DiscreteDistribution, discretize, distribution_entropy, kl_divergence

TRUTH_FUNCTIONS = ("logistic", "piecewise", "constant")
REFERENCE_CONCENTRATION = 50.0
REFERENCE_MEAN_CLAMP = 1e-3


@dataclass(frozen=True)
class PanelConfig:
    """A K-expert panel over n records with a chosen ground-truth function.

    Each expert carries a persistent bias drawn once from N(0, expert_noise^2)
    and votes Bernoulli(clip(p_true + bias)); the label is the majority vote.
    """

    n: int
    k: int = 7
    expert_noise: float = 0.1
    seed: int = 0
    truth: str = "logistic"
    n_features: int = 8
    constant_p: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.k < 1 or self.k % 2 == 0:
            raise DomainError(f"panel size must be odd and positive, got {self.k}")
        if not (self.expert_noise >= 0.0 and np.isfinite(self.expert_noise)):
            raise DomainError(f"expert_noise must be finite and >= 0, got {self.expert_noise}")
        if self.truth not in TRUTH_FUNCTIONS:
            raise DomainError(f"truth must be one of {TRUTH_FUNCTIONS}, got {self.truth!r}")
        if self.n_features < 1:
            raise DomainError(f"n_features must be >= 1, got {self.n_features}")
        if not (0.0 <= self.constant_p <= 1.0):
            raise DomainError(f"constant_p must lie in [0, 1], got {self.constant_p}")


@dataclass(frozen=True)
class GroundTruth:
    """Per-record true probabilities; kept out of the training files."""

    ids: tuple[str, ...]
    p_true: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p_true, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "p_true", p)
        if len(self.ids) != p.size:
            raise DataError("ids and p_true lengths differ")
        if np.any((p < 0.0) | (p > 1.0)):
            raise DataError("true probabilities must lie in [0, 1]")


def _true_probabilities(cfg: PanelConfig, rng: np.random.Generator):
    """Draw order is fixed (truth params, then features) so that generated
    datasets are reproducible byte for byte."""
    if cfg.truth == "logistic":
        w = rng.normal(size=cfg.n_features) * (2.0 / np.sqrt(cfg.n_features))
        x = rng.normal(size=(cfg.n, cfg.n_features))
        return x, sigmoid(x @ w)
    x = rng.normal(size=(cfg.n, cfg.n_features))
    if cfg.truth == "piecewise":
        x0 = x[:, 0]
        return x, np.where(x0 < -0.5, 0.1, np.where(x0 < 0.5, 0.5, 0.9))
    return x, np.full(cfg.n, cfg.constant_p)


def generate(cfg: PanelConfig):
    """Seeded panel simulation; returns (records, truth)."""
    rng = derive_stream(cfg.seed, STREAM_SYNTH)
    x, p_true = _true_probabilities(cfg, rng)
    offsets = rng.normal(0.0, cfg.expert_noise, size=cfg.k) if cfg.expert_noise > 0 else np.zeros(cfg.k)
    vote_p = np.clip(p_true[:, None] + offsets[None, :], 0.0, 1.0)
    votes = rng.random((cfg.n, cfg.k)) < vote_p
    ones = votes.sum(axis=1)
    labels = (2 * ones > cfg.k).astype(int)
    agreements = np.where(labels == 1, ones, cfg.k - ones)

    width = max(6, len(str(cfg.n - 1)))
    records = [
        DecisionRecord(f"s{i:0{width}d}", x[i], int(labels[i]), int(agreements[i]))
        for i in range(cfg.n)
    ]
    truth = GroundTruth(tuple(r.record_id for r in records), p_true)
    return records, truth


@dataclass(frozen=True)
class ValidationReport:
    """How well elicited distributions track the generating truth."""

    n: int
    mean_kl: float
    ci_coverage: float
    trend_full_minus_most_opposing: float | None
    per_record_kl: tuple[float, ...]


def reference_distribution(p_true: float, bins: int = 20) -> DiscreteDistribution:
    """Discretized sharp-but-proper reference around the true probability:
    a Beta with mean clip(p_true) and concentration 50. A point mass would
    make KL undefined, and deep-tail bins can round to exactly zero mass,
    so a vanishing uniform component keeps every bin on-support."""
    m = min(max(p_true, REFERENCE_MEAN_CLAMP), 1.0 - REFERENCE_MEAN_CLAMP)
    alpha = m * REFERENCE_CONCENTRATION
    beta = (1.0 - m) * REFERENCE_CONCENTRATION
    edges = np.linspace(0.0, 1.0, bins + 1)
    mix = 1e-12
    probs = np.diff(beta_cdf(alpha, beta, edges)) * (1.0 - mix) + mix / bins
    return DiscreteDistribution(probs)


def oracle_validate(
    elicited: list[ElicitedDistribution],
    truth: GroundTruth,
    bins: int = 20,
    agreements: list[int] | None = None,
    panel_size: int = 7,
    entropy_bins: int = DEFAULT_ENTROPY_BINS,
) -> ValidationReport:
    """Score elicited distributions against the ground truth.

    Per record: KL(elicited || reference-at-p_true) on a shared bin grid.
    Aggregates: mean KL, 95% CI coverage of p_true, and, when agreement
    counts are supplied, mean sample entropy of the full-agreement group
    minus the most-opposed group (negative when uncertainty grows with
    disagreement, the expected direction).
    """
    if len(elicited) != truth.p_true.size:
        raise DataError(f"{len(elicited)} distributions vs {truth.p_true.size} truth entries")
    if agreements is not None and len(agreements) != len(elicited):
        raise DataError(f"{len(agreements)} agreement counts vs {len(elicited)} distributions")

    kls, covered = [], 0
    for dist, p in zip(elicited, truth.p_true):
        q = discretize(dist, bins)
        kls.append(kl_divergence(q, reference_distribution(float(p), bins)))
        lo, hi = dist.ci95
        covered += lo <= p <= hi

    trend = None
    if agreements is not None:
        most = panel_size // 2
        ent = {0: [], most: []}
        for dist, a in zip(elicited, agreements):
            opposing = panel_size - a
            if opposing in ent:
                if dist.sample is None:
                    raise DataError("trend statistic needs distributions with attached samples")
                ent[opposing].append(distribution_entropy(dist.sample, entropy_bins))
        if ent[0] and ent[most]:
            trend = float(np.mean(ent[0]) - np.mean(ent[most]))

    return ValidationReport(
        n=len(elicited),
        mean_kl=float(np.mean(kls)),
        ci_coverage=covered / len(elicited),
        trend_full_minus_most_opposing=trend,
        per_record_kl=tuple(kls),
    )


def truth_to_csv_text(truth: GroundTruth) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "p_true"])
    for rid, p in zip(truth.ids, truth.p_true):
        writer.writerow([rid, repr(float(p))])
    return buf.getvalue()


def write_truth_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(truth_to_csv_text(truth))


def read_truth_csv(path) -> GroundTruth:
    path = Path(path)
    ids, ps = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "p_true"]:
            raise DataError(f"{path.name}: expected header id,p_true")
        for row in reader:
            ids.append(row[0])
            ps.append(float(row[1]))
    if not ids:
        raise DataError(f"{path.name}: no data rows")
    return GroundTruth(tuple(ids), np.array(ps))
