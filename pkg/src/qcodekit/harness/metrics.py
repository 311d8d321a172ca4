"""Pass@k: probability that a random size-k subset of n completions passes.

Computed as 1 - C(n-c, k)/C(n, k), evaluated as one exact integer ratio
(Python bignum combinatorics, so no intermediate overflow) with a single
correctly rounded float division at the end.
"""

from __future__ import annotations

from math import comb


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator from n completions with c passes, subset size k."""
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    total = comb(n, k)
    return (total - comb(n - c, k)) / total
