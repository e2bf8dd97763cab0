"""Exact Mallows model over permutations under the Kendall tau distance.

Permutations are one-based tuples of positions, e.g. the identity of
length 5 is ``(1, 2, 3, 4, 5)``. The distribution assigns probability
proportional to ``exp(-theta * d(pi, identity))`` where ``d`` is the
inversion count (minimum number of adjacent swaps).

Sampling uses the insertion-code decomposition: the permutation is built
by inserting items 1..n, where item j is placed so that ``V_j`` already
placed items end up after it, with ``P(V_j = r)`` proportional to
``exp(-theta * r)``. The codes are independent and sum to the inversion
count, so the construction is exact for any sign of theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Below this magnitude the closed forms with 1 - exp(-theta) denominators
# switch to their theta -> 0 limits.
THETA_EPS = 1e-8


def identity_permutation(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1))


def reversal_permutation(n: int) -> tuple[int, ...]:
    return tuple(range(n, 0, -1))


def check_permutation(pi) -> tuple[int, ...]:
    """Validate that ``pi`` is a bijection on 1..n and return it as a tuple."""
    pi = tuple(int(p) for p in pi)
    n = len(pi)
    if n < 1:
        raise ValueError("permutation must have length >= 1")
    if sorted(pi) != list(range(1, n + 1)):
        raise ValueError(f"not a bijection on 1..{n}: {pi}")
    return pi


def _merge_count(values: list[int]) -> tuple[list[int], int]:
    if len(values) <= 1:
        return values, 0
    mid = len(values) // 2
    left, a = _merge_count(values[:mid])
    right, b = _merge_count(values[mid:])
    merged: list[int] = []
    count = a + b
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            count += len(left) - i
            j += 1
    merged += left[i:]
    merged += right[j:]
    return merged, count


def inversion_count(pi) -> int:
    """Number of pairs i < j with pi(i) > pi(j), via merge sort."""
    _, count = _merge_count(list(pi))
    return count


def kendall_tau(pi, pi0=None) -> int:
    """Kendall tau distance between two permutations of equal length.

    Equals the inversion count of ``pi`` composed with the inverse of
    ``pi0`` (identity when ``pi0`` is omitted): the minimum number of
    adjacent swaps turning ``pi`` into ``pi0``.
    """
    pi = check_permutation(pi)
    if pi0 is None:
        return inversion_count(pi)
    pi0 = check_permutation(pi0)
    if len(pi) != len(pi0):
        raise ValueError(f"length mismatch: {len(pi)} vs {len(pi0)}")
    # sigma = pi o pi0^-1, so that d(pi, pi0) = inv(sigma)
    pi0_inv = [0] * len(pi0)
    for i, v in enumerate(pi0):
        pi0_inv[v - 1] = i + 1
    sigma = [pi[pi0_inv[i] - 1] for i in range(len(pi))]
    return inversion_count(sigma)


def log_partition(n: int, theta: float) -> float:
    """log Z(theta, n) via the closed product form.

    Z = prod_{j=1..n} (1 - e^{-j theta}) / (1 - e^{-theta}),
    with the analytic limit log(n!) at theta = 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if abs(theta) < THETA_EPS:
        return math.lgamma(n + 1)
    j = np.arange(1, n + 1, dtype=float)
    if theta > 0:
        terms = np.log1p(-np.exp(-j * theta)) - np.log1p(-math.exp(-theta))
    else:
        # 1 - e^{-j theta} = -e^{-j theta} (1 - e^{j theta}); the e^{-...}
        # prefactors are pulled out in log space to avoid overflow.
        terms = (
            -(j - 1) * theta
            + np.log1p(-np.exp(j * theta))
            - math.log1p(-math.exp(theta))
        )
    return float(terms.sum())


def max_distance(n: int) -> int:
    return n * (n - 1) // 2


def max_variance(n: int) -> float:
    """Variance of the inversion count of a uniform random permutation."""
    return n * (n - 1) * (2 * n + 5) / 72.0


def analytic_moments(n: int, theta: float) -> tuple[float, float]:
    """Mean and variance of the Kendall distance under the Mallows model.

    E = n e^{-t}/(1-e^{-t}) - sum_j j e^{-jt}/(1-e^{-jt}) and the matching
    variance. Rewritten through g(a) = 1/(e^a - 1) and h(a) = g(a)(1+g(a))
    so both signs of theta stay finite; at |theta| < eps returns the
    uniform-distribution limits n(n-1)/4 and n(n-1)(2n+5)/72.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if abs(theta) < THETA_EPS:
        return n * (n - 1) / 4.0, max_variance(n)
    j = np.arange(1, n + 1, dtype=float)
    with np.errstate(over="ignore"):
        g1 = 1.0 / math.expm1(theta)
        gj = 1.0 / np.expm1(j * theta)
    h1 = g1 * (1.0 + g1)
    hj = gj * (1.0 + gj)
    mean = n * g1 - float((j * gj).sum())
    var = n * h1 - float((j * j * hj).sum())
    return mean, max(var, 0.0)


@dataclass(frozen=True)
class MallowsDistribution:
    """Mallows distribution for permutations of a fixed length.

    Derived quantities (log partition, analytic moments, distance bounds)
    are computed eagerly so the instance is a plain value object.
    """

    n: int
    theta: float
    log_partition: float = field(init=False)
    mean_distance: float = field(init=False)
    variance_distance: float = field(init=False)
    d_max: int = field(init=False)
    v_max: float = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        mean, var = analytic_moments(self.n, self.theta)
        object.__setattr__(self, "log_partition", log_partition(self.n, self.theta))
        object.__setattr__(self, "mean_distance", mean)
        object.__setattr__(self, "variance_distance", var)
        object.__setattr__(self, "d_max", max_distance(self.n))
        object.__setattr__(self, "v_max", max_variance(self.n))

    def log_probability(self, pi) -> float:
        pi = check_permutation(pi)
        if len(pi) != self.n:
            raise ValueError(f"length mismatch: {len(pi)} vs n={self.n}")
        return -self.theta * inversion_count(pi) - self.log_partition

    def _code_cdfs(self) -> list[np.ndarray]:
        """Cumulative insertion-code distributions for item j = 2..n."""
        cdfs = []
        for j in range(2, self.n + 1):
            r = np.arange(j, dtype=float)
            logits = -self.theta * r
            logits -= logits.max()
            weights = np.exp(logits)
            cdfs.append(np.cumsum(weights / weights.sum()))
        return cdfs

    def sample_permutations(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` exact samples; returns an int array (size, n).

        Deterministic given the generator state. The loop over item j is
        vectorized over samples: ``pos[:, k]`` tracks where item k+1
        currently sits, and inserting item j at slot s shifts every item
        at position >= s one step right.
        """
        n = self.n
        pos = np.zeros((size, n), dtype=np.int64)
        for j, cdf in zip(range(2, n + 1), self._code_cdfs()):
            u = rng.random(size)
            codes = np.searchsorted(cdf, u, side="right")
            slots = (j - 1) - codes
            pos[:, : j - 1] += pos[:, : j - 1] >= slots[:, None]
            pos[:, j - 1] = slots
        perms = np.empty((size, n), dtype=np.int64)
        rows = np.arange(size)[:, None]
        perms[rows, pos] = np.arange(1, n + 1)
        return perms

    def sample_permutation(self, rng: np.random.Generator) -> tuple[int, ...]:
        """Draw one exact sample as a one-based tuple."""
        return tuple(int(v) for v in self.sample_permutations(1, rng)[0])


def log_probability(dist: MallowsDistribution, pi) -> float:
    return dist.log_probability(pi)


def sample_permutation(dist: MallowsDistribution, rng: np.random.Generator):
    return dist.sample_permutation(rng)


def sample_permutations(dist: MallowsDistribution, size: int, rng: np.random.Generator):
    return dist.sample_permutations(size, rng)
