"""Exact discrete laws evaluated through log-factorials.

Every pmf is computed as ``exp(log pmf)`` with ``gammaln`` supplying the
log-factorials, so counts up to ~1e6 do not overflow. Out-of-support
outcomes have probability zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .._validation import check_int


def _log_choose(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


@dataclass(frozen=True)
class Binomial:
    trials: int
    prob: float

    def __post_init__(self):
        check_int(self.trials, "trials", low=0)
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"prob must lie in [0, 1], got {self.prob}")

    def support(self) -> np.ndarray:
        return np.arange(self.trials + 1)

    def pmf_vector(self) -> np.ndarray:
        """pmf over ``0..trials``."""
        n, p = self.trials, self.prob
        k = np.arange(n + 1, dtype=float)
        if p == 0.0:
            out = np.zeros(n + 1)
            out[0] = 1.0
            return out
        if p == 1.0:
            out = np.zeros(n + 1)
            out[n] = 1.0
            return out
        logp = _log_choose(n, k) + k * math.log(p) + (n - k) * math.log1p(-p)
        return np.exp(logp)

    def pmf(self, k) -> float:
        if not float(k).is_integer() or k < 0 or k > self.trials:
            return 0.0
        return float(self.pmf_vector()[int(k)])

    def cdf(self, x) -> float:
        """P(X <= x)."""
        k = math.floor(x)
        if k < 0:
            return 0.0
        if k >= self.trials:
            return 1.0
        return float(min(1.0, self.pmf_vector()[: k + 1].sum()))

    def sf(self, x) -> float:
        """P(X > x), summed directly over the upper tail."""
        k = math.floor(x)
        if k < 0:
            return 1.0
        if k >= self.trials:
            return 0.0
        return float(min(1.0, self.pmf_vector()[k + 1:].sum()))


@dataclass(frozen=True)
class Hypergeometric:
    """Number of successes in ``draws`` draws without replacement from ``population``."""

    population: int
    successes: int
    draws: int

    def __post_init__(self):
        check_int(self.population, "population", low=0)
        check_int(self.successes, "successes", low=0, high=self.population)
        check_int(self.draws, "draws", low=0, high=self.population)

    @property
    def lo(self) -> int:
        return max(0, self.draws - (self.population - self.successes))

    @property
    def hi(self) -> int:
        return min(self.successes, self.draws)

    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def pmf_vector(self) -> np.ndarray:
        """pmf over ``lo..hi``."""
        N, K, d = self.population, self.successes, self.draws
        k = self.support().astype(float)
        logp = _log_choose(K, k) + _log_choose(N - K, d - k) - _log_choose(N, d)
        return np.exp(logp)

    def pmf(self, k) -> float:
        if not float(k).is_integer() or k < self.lo or k > self.hi:
            return 0.0
        return float(self.pmf_vector()[int(k) - self.lo])

    def cdf(self, x) -> float:
        k = math.floor(x)
        if k < self.lo:
            return 0.0
        if k >= self.hi:
            return 1.0
        return float(min(1.0, self.pmf_vector()[: k - self.lo + 1].sum()))

    def sf(self, x) -> float:
        k = math.floor(x)
        if k < self.lo:
            return 1.0
        if k >= self.hi:
            return 0.0
        return float(min(1.0, self.pmf_vector()[k - self.lo + 1:].sum()))


def _cap_weights(weights, threshold):
    w = np.asarray(weights, dtype=np.int64)
    if np.any(w < 0):
        raise ValueError("category weights must be nonnegative")
    return np.minimum(w, max(int(threshold), 0))


@dataclass(frozen=True)
class MultivariateHypergeometric:
    """Category counts of ``draws`` rows sampled without replacement."""

    counts: tuple
    draws: int

    def __post_init__(self):
        counts = tuple(int(check_int(z, "count", low=0)) for z in self.counts)
        object.__setattr__(self, "counts", counts)
        check_int(self.draws, "draws", low=0, high=sum(counts))

    @property
    def population(self) -> int:
        return sum(self.counts)

    def pmf(self, z) -> float:
        z = tuple(int(v) for v in z)
        if len(z) != len(self.counts) or sum(z) != self.draws:
            return 0.0
        if any(v < 0 or v > c for v, c in zip(z, self.counts)):
            return 0.0
        logp = sum(_log_choose(c, v) for c, v in zip(self.counts, z))
        return float(np.exp(logp - _log_choose(self.population, self.draws)))

    def weighted_tail(self, weights, threshold) -> float:
        """P(sum_l weights[l] * z_l >= threshold), exact.

        Dynamic programme over categories on the state (rows drawn, weighted
        sum capped at ``threshold``), carried in log space.
        """
        if threshold <= 0:
            return 1.0
        T = int(threshold)
        w = _cap_weights(weights, T)
        d_max = self.draws
        state = np.full((d_max + 1, T + 1), -np.inf)
        state[0, 0] = 0.0
        for count, wl in zip(self.counts, w):
            if count == 0:
                continue
            new = np.full_like(state, -np.inf)
            for z in range(min(count, d_max) + 1):
                shifted = state[: d_max + 1 - z] + _log_choose(count, z)
                add = int(min(wl * z, T))
                target = new[z:]
                if add == 0:
                    np.logaddexp(target, shifted, out=target)
                    continue
                # sums that reach the cap collapse into column T
                target[:, add:T] = np.logaddexp(target[:, add:T], shifted[:, : T - add])
                capped = logsumexp(shifted[:, T - add:], axis=1)
                target[:, T] = np.logaddexp(target[:, T], capped)
            state = new
        logp = state[d_max, T] - _log_choose(self.population, d_max)
        return float(min(1.0, np.exp(logp)))

    def state_size(self, threshold) -> int:
        """Work estimate for :meth:`weighted_tail`."""
        T = max(int(threshold), 0)
        steps = sum(min(c, self.draws) + 1 for c in self.counts if c)
        return steps * (self.draws + 1) * (T + 1)


@dataclass(frozen=True)
class Multinomial:
    trials: int
    probs: tuple

    def __post_init__(self):
        check_int(self.trials, "trials", low=0)
        probs = tuple(float(v) for v in self.probs)
        if any(v < 0 for v in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1 within 1e-12")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_counts(cls, trials, counts):
        total = sum(counts)
        return cls(trials, tuple(c / total for c in counts))

    def pmf(self, z) -> float:
        z = tuple(int(v) for v in z)
        if len(z) != len(self.probs) or sum(z) != self.trials or min(z) < 0:
            return 0.0
        logp = gammaln(self.trials + 1.0)
        for v, pr in zip(z, self.probs):
            if v == 0:
                continue
            if pr == 0.0:
                return 0.0
            logp += v * math.log(pr) - gammaln(v + 1.0)
        return float(np.exp(logp))

    def weighted_tail(self, weights, threshold) -> float:
        """P(sum_l weights[l] * z_l >= threshold) by repeated capped convolution."""
        if threshold <= 0:
            return 1.0
        T = int(threshold)
        w = _cap_weights(weights, T)
        dist = np.zeros(T + 1)
        dist[0] = 1.0
        for _ in range(self.trials):
            new = np.zeros_like(dist)
            for wl, pr in zip(w, self.probs):
                if pr == 0.0:
                    continue
                wl = int(wl)
                if wl == 0:
                    new += pr * dist
                    continue
                new[wl:T] += pr * dist[: T - wl]
                new[T] += pr * dist[T - wl:].sum()
            dist = new
        return float(min(1.0, dist[T]))

    def state_size(self, threshold) -> int:
        T = max(int(threshold), 0)
        return self.trials * len(self.probs) * (T + 1)


def pmf(law, outcome) -> float:
    return law.pmf(outcome)


def cdf(law, x) -> float:
    return law.cdf(x)
