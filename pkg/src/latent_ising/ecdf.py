"""Empirical cumulative distribution functions and quantiles.

The step CDF built here is the substrate for every encoder and decoder:
evaluation is right-continuous counting, and the quantile is the
pseudo-inverse ``inf {x : F(x) >= q}``.  Both directions share the same
floating-point comparisons, so the Galois connection

    eval(x) >= q  <=>  x >= quantile(q)        for q in (0, 1]

holds exactly, not just up to rounding.
"""

from __future__ import annotations

import numpy as np

__all__ = ["EmpiricalCdf"]


class EmpiricalCdf:
    """Right-continuous step CDF over a finite sample.

    Duplicate samples accumulate mass (a step of height k/n), and
    ``quantile(0)`` returns the minimum sample so that predictions stay
    inside the observed support.

    Parameters
    ----------
    samples : array_like
        Non-empty collection of finite real values (any order).
    """

    __slots__ = ("sorted_samples", "n", "_ranks")

    def __init__(self, samples):
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 1:
            arr = arr.ravel()
        if arr.size == 0:
            raise ValueError("no samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError("invalid sample")
        self.sorted_samples = np.sort(arr)
        self.n = int(arr.size)
        # eval value attained at each sorted sample: 1/n, 2/n, ..., 1
        self._ranks = np.arange(1, self.n + 1, dtype=float) / self.n

    def evaluate(self, x):
        """F(x) = (#samples <= x) / n.  Accepts scalars or arrays."""
        idx = np.searchsorted(self.sorted_samples, x, side="right")
        out = idx / self.n
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(out)
        return out

    def quantile(self, q):
        """Pseudo-inverse: smallest sample x with F(x) >= q.

        ``q = 0`` returns the minimum sample.  Accepts scalars or arrays.
        """
        qa = np.asarray(q, dtype=float)
        if np.any(qa < 0.0) or np.any(qa > 1.0):
            raise ValueError("invalid probability")
        idx = np.searchsorted(self._ranks, qa, side="left")
        idx = np.minimum(idx, self.n - 1)
        out = self.sorted_samples[idx]
        if np.isscalar(q) or np.ndim(q) == 0:
            return float(out)
        return out

    def median(self):
        return self.quantile(0.5)

    @property
    def min(self) -> float:
        return float(self.sorted_samples[0])

    @property
    def max(self) -> float:
        return float(self.sorted_samples[-1])

    def __repr__(self):
        return f"EmpiricalCdf(n={self.n}, support=[{self.min:g}, {self.max:g}])"
