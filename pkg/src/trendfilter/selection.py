"""Tuning-parameter selection: SIC and MC criteria over a fitted lambda path.

Both score a fit through its residual sum of squares and its kink count k:

    sic = log(rss / n) + (k + 2) * log(n) / n
    mc  = log(rss / n) + k * (k + 1) * log(n) / n

The +2 in the SIC degrees of freedom is the affine part of the fit. An exact
interpolation (rss = 0, the lam = 0 endpoint) has no finite score; it is
excluded from selection with a warning rather than failing the path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .core import KINK_TOL, LambdaPath, TimeSeries, TrendFit, extract_kinks


class NoSelectableModelError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionScore:
    lam: float
    rss: float
    k_hat: int
    sic: float
    mc: float


def score(y, fit: TrendFit, tol_kink: float = KINK_TOL) -> SelectionScore:
    yv = y.y if isinstance(y, TimeSeries) else y
    n = len(yv)
    resid = yv - fit.mu_hat
    rss = float(resid @ resid)
    k = len(extract_kinks(fit, tol_kink))
    if rss <= 0.0:
        warnings.warn("zero residual (interpolating fit); excluded from selection")
        return SelectionScore(fit.lam, rss, k, float("-inf"), float("-inf"))
    logn = math.log(n)
    base = math.log(rss / n)
    return SelectionScore(
        lam=fit.lam,
        rss=rss,
        k_hat=k,
        sic=base + (k + 2) * logn / n,
        mc=base + k * (k + 1) * logn / n,
    )


def select(path: LambdaPath, y, criterion: str = "mc",
           tol_kink: float = KINK_TOL) -> tuple[float, TrendFit, list[SelectionScore]]:
    """Entry minimizing the chosen criterion; ties go to the larger lambda.

    Returns (lambda_opt, fit, all scores). Raises if no entry has a finite
    score (e.g. a single-entry path that interpolates).
    """
    crit = criterion.lower()
    if crit not in ("sic", "mc"):
        raise ValueError(f"criterion must be 'sic' or 'mc', got {criterion!r}")
    scores = [score(y, e.fit, tol_kink) for e in path.entries]
    best = None
    best_val = math.inf
    for e, s in zip(path.entries, scores):
        v = s.sic if crit == "sic" else s.mc
        if math.isfinite(v) and v <= best_val:  # <= so later (larger) lambda wins ties
            best = e
            best_val = v
    if best is None:
        raise NoSelectableModelError("no path entry has a finite selection score")
    return best.lam, best.fit, scores


def default_grid(lam_max: float, size: int = 60, min_rel: float = 1e-4,
                 include_zero: bool = True) -> list[float]:
    """log-spaced grid from lam_max * min_rel to lam_max, optionally led by 0."""
    if lam_max <= 0:
        return [0.0] if include_zero else []
    if size < 1:
        raise ValueError("size must be >= 1")
    if size == 1:
        grid = [lam_max]
    else:
        ratio = (1.0 / min_rel) ** (1.0 / (size - 1))
        grid = [lam_max * min_rel * ratio ** i for i in range(size - 1)] + [lam_max]
    return ([0.0] + grid) if include_zero else grid
