from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

NORMS = ("L1_terminal", "L1_stopping", "L1_sup", "Lp_sup", "gamma_sup")


@dataclass(frozen=True)
class ErrorEstimate:
    """Monte Carlo estimate of one error functional at step count ``n``.

    For ``Lp_sup`` ``mean`` is the p-th root of ``raw_moment`` (the mean
    p-th power); for ``gamma_sup`` it is the mean of sup|dX|^gamma.
    """

    n: int
    norm: str
    mean: float
    std_error: float
    paths: int
    p: Optional[float] = None
    raw_moment: Optional[float] = None
    raw_std_error: Optional[float] = None
    bound_shape: Optional[float] = None

    def __post_init__(self):
        if self.mean < 0.0 or self.std_error < 0.0:
            raise ValueError("mean and std_error must be non-negative")
        if self.paths < 2:
            raise ValueError("an estimate needs at least 2 paths")


def mean_and_se(values: np.ndarray) -> tuple:
    """Mean and standard error over the path axis (last axis).

    ``values`` is laid out in path order, so the result does not depend on
    how the paths were split across workers.
    """
    v = np.asarray(values, dtype=float)
    k = v.shape[-1]
    mean = np.mean(v, axis=-1)
    se = np.std(v, axis=-1, ddof=1) / math.sqrt(k)
    return mean, se
