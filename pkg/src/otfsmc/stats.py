"""Wilson score intervals and iterative sample-size determination."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable

__all__ = [
    "ConfidenceSpec", "Estimate", "EstimationAborted",
    "normal_quantile", "wilson_interval", "wilson_sample_size",
    "conservative_sample_size", "iterative_estimate", "wald_interval",
]

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class ConfidenceSpec:
    """Target: interval half-width ``epsilon`` at confidence ``1 - alpha``."""

    alpha: float = 0.01
    epsilon: float = 0.025

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")


@dataclass
class Estimate:
    p_hat: float
    n_total: int
    successes: int
    lower: float
    upper: float
    iterations: list[tuple[int, int]] = field(default_factory=list)  # (batch size, successes)


class EstimationAborted(RuntimeError):
    def __init__(self, message: str, partial: Estimate):
        self.partial = partial
        super().__init__(message)


def normal_quantile(q: float) -> float:
    """Inverse standard normal CDF."""
    if not 0 < q < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    return _STD_NORMAL.inv_cdf(q)


def _z(alpha: float) -> float:
    return normal_quantile(1 - alpha / 2)


def wilson_interval(p_hat: float, n: int, alpha: float) -> tuple[float, float]:
    if not 0 <= p_hat <= 1:
        raise ValueError(f"p_hat must lie in [0, 1], got {p_hat}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    z = _z(alpha)
    z2 = z * z
    denom = 1 + z2 / n
    center = p_hat + z2 / (2 * n)
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
    lower = (center - half) / denom
    upper = (center + half) / denom
    if p_hat == 0:
        lower = 0.0
    if p_hat == 1:
        upper = 1.0
    return max(0.0, lower), min(1.0, upper)


def wald_interval(p_hat: float, n: int, alpha: float) -> tuple[float, float]:
    """Normal-approximation interval, kept for comparison output only."""
    half = _z(alpha) * math.sqrt(p_hat * (1 - p_hat) / n)
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


def wilson_sample_size(p_hat: float, epsilon: float, alpha: float) -> int:
    """Smallest N whose Wilson interval at ``p_hat`` has half-width <= epsilon."""
    if not 0 <= p_hat <= 1:
        raise ValueError(f"p_hat must lie in [0, 1], got {p_hat}")
    ConfidenceSpec(alpha, epsilon)
    z = _z(alpha)
    e2 = epsilon * epsilon
    v = p_hat * (1 - p_hat)
    bracket = v - 2 * e2 + math.sqrt(v * v + 4 * e2 * (p_hat - 0.5) ** 2)
    return max(1, math.ceil(z * z * bracket / (2 * e2)))


def conservative_sample_size(spec: ConfidenceSpec) -> int:
    return wilson_sample_size(0.5, spec.epsilon, spec.alpha)


def iterative_estimate(run_batch: Callable[[int], int], spec: ConfidenceSpec) -> Estimate:
    """Estimate a Bernoulli probability with an adaptively sized sample.

    Starts from the sample size needed at p = 1, then repeatedly shifts the
    running estimate by ``epsilon`` towards 0.5, recomputes the required
    size and tops up the sample until it is large enough.
    ``run_batch(n)`` must run ``n`` fresh independent trials and return
    the number of successes.
    """
    eps, alpha = spec.epsilon, spec.alpha
    n = wilson_sample_size(1.0, eps, alpha)
    n_tot = 0
    yes = 0
    log: list[tuple[int, int]] = []
    while True:
        try:
            s = int(run_batch(n))
        except Exception as exc:
            p = yes / n_tot if n_tot else 0.0
            raise EstimationAborted(
                f"batch of {n} failed after {n_tot} trials: {exc}",
                Estimate(p, n_tot, yes, 0.0, 1.0, log),
            ) from exc
        if not 0 <= s <= n:
            raise ValueError(f"batch of {n} reported {s} successes")
        log.append((n, s))
        n_tot += n
        yes += s
        p_hat = yes / n_tot
        p_round = p_hat + eps if p_hat <= 0.5 else p_hat - eps
        p_round = min(1.0, max(0.0, p_round))
        n_new = wilson_sample_size(p_round, eps, alpha) - n_tot
        if n_new <= 0:
            lower, upper = wilson_interval(p_hat, n_tot, alpha)
            return Estimate(p_hat, n_tot, yes, lower, upper, log)
        n = n_new
