"""Beta distributions fitted to probability samples by matching moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .sampling import ProbabilitySample, credible_interval

VAR_FLOOR = 1e-12
DEGENERATE_CONCENTRATION = 1e6
MEAN_CLAMP = 1e-9


@dataclass(frozen=True)
class ElicitedDistribution:
    """A Beta(alpha, beta) summary of one probability sample.

    ``degenerate`` marks samples whose moments admit no proper Beta fit
    (zero variance, variance at or above the Bernoulli bound m(1-m), or a
    mean outside (0, 1)); alpha and beta then describe a spike surrogate
    with concentration 1e6 at the clamped mean. ci95 always comes from the
    sample percentiles, never from the fitted quantiles.
    """

    alpha: float
    beta: float
    sample_mean: float
    sample_var: float
    ci95: tuple[float, float]
    degenerate: bool
    T: int
    seed: str = ""
    sample: ProbabilitySample | None = None

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def var(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))

    @property
    def mode(self) -> float:
        """Density peak; defined only for alpha > 1 and beta > 1."""
        if self.alpha <= 1.0 or self.beta <= 1.0:
            raise DomainError("mode requires alpha > 1 and beta > 1")
        return (self.alpha - 1.0) / (self.alpha + self.beta - 2.0)


def fit_beta_mom(sample: ProbabilitySample, ci_level: float = 0.95) -> ElicitedDistribution:
    """Method-of-moments fit: match the sample mean and unbiased variance.

    With m = mean and v = variance, c = m(1-m)/v - 1 gives alpha = m*c and
    beta = (1-m)*c. The fit is proper only for 0 < m < 1 and 0 < v < m(1-m).
    """
    values = sample.values
    m = float(np.mean(values))
    v = float(np.var(values, ddof=1))
    ci = credible_interval(sample, ci_level)
    bound = m * (1.0 - m)
    degenerate = not (0.0 < m < 1.0) or v <= VAR_FLOOR or v >= bound
    if degenerate:
        mc = min(max(m, MEAN_CLAMP), 1.0 - MEAN_CLAMP)
        alpha = mc * DEGENERATE_CONCENTRATION
        beta = (1.0 - mc) * DEGENERATE_CONCENTRATION
    else:
        c = bound / v - 1.0
        alpha = m * c
        beta = (1.0 - m) * c
    return ElicitedDistribution(
        alpha=alpha,
        beta=beta,
        sample_mean=m,
        sample_var=v,
        ci95=ci,
        degenerate=degenerate,
        T=sample.T,
        seed=sample.seed,
        sample=sample,
    )


def elicited_to_json_dict(dist: ElicitedDistribution) -> dict:
    return {
        "alpha": dist.alpha,
        "beta": dist.beta,
        "mean": dist.sample_mean,
        "var": dist.sample_var,
        "ci95": [dist.ci95[0], dist.ci95[1]],
        "degenerate": dist.degenerate,
        "T": dist.T,
        "seed": dist.seed,
    }


def elicited_from_json_dict(d: dict) -> ElicitedDistribution:
    return ElicitedDistribution(
        alpha=float(d["alpha"]),
        beta=float(d["beta"]),
        sample_mean=float(d["mean"]),
        sample_var=float(d["var"]),
        ci95=(float(d["ci95"][0]), float(d["ci95"][1])),
        degenerate=bool(d["degenerate"]),
        T=int(d["T"]),
        seed=str(d.get("seed", "")),
    )


def _check_params(alpha: float, beta: float) -> None:
    if not (alpha > 0.0 and beta > 0.0 and math.isfinite(alpha) and math.isfinite(beta)):
        raise DomainError(f"Beta parameters must be finite and positive, got ({alpha}, {beta})")


def beta_pdf(alpha: float, beta: float, x):
    """Beta density, built from log-gamma rather than library distributions."""
    _check_params(alpha, beta)
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("beta_pdf support is [0, 1]")
    ln_b = special.betaln(alpha, beta)
    interior = (x > 0.0) & (x < 1.0)
    out = np.zeros_like(x)
    xi = x[interior]
    out[interior] = np.exp(
        (alpha - 1.0) * np.log(xi) + (beta - 1.0) * np.log1p(-xi) - ln_b
    )
    # boundary values: x^(a-1) at 0 and (1-x)^(b-1) at 1 decide the limit
    for edge, expo in ((x == 0.0, alpha), (x == 1.0, beta)):
        if np.any(edge):
            if expo > 1.0:
                out[edge] = 0.0
            elif expo == 1.0:
                out[edge] = np.exp(-ln_b)
            else:
                out[edge] = np.inf
    if out.ndim == 0:
        return float(out)
    return out


def beta_cdf(alpha: float, beta: float, x):
    """Regularized incomplete beta function I_x(alpha, beta)."""
    _check_params(alpha, beta)
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("beta_cdf support is [0, 1]")
    out = special.betainc(alpha, beta, x)
    if out.ndim == 0:
        return float(out)
    return out


def beta_interval(alpha: float, beta: float, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed interval of the fitted distribution itself.

    This is the analytic counterpart to the percentile ci95 and is exposed
    for comparison only; downstream decisions use the sample interval.
    """
    _check_params(alpha, beta)
    if not (0.0 < level < 1.0):
        raise DomainError(f"level must be in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    lo = special.betaincinv(alpha, beta, tail)
    hi = special.betaincinv(alpha, beta, 1.0 - tail)
    return float(lo), float(hi)
