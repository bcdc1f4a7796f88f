from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
import statsmodels.api as sm


@dataclass(frozen=True, slots=True)
class LogLogFit:
    slope: float
    intercept: float
    stderr: float
    rsquared: float
    nobs: int

    def within(self, low: float, high: float) -> bool:
        return bool(low <= self.slope <= high)


def loglog_slope(x, y) -> LogLogFit:
    """OLS fit of ``log(y) ~ 1 + log(x)``.

    Pairs where either side is non-positive or non-finite are dropped; fewer
    than two usable pairs gives a NaN fit.

    Parameters
    ----------
    x, y : array-like or pd.Series
        Positional pairs, e.g. participation and mean detection rate.

    Returns
    -------
    LogLogFit
        Slope (the power-law exponent), intercept, slope standard error,
        r-squared and the number of pairs used.
    """

    xv = pd.Series(np.asarray(x, dtype=float))
    yv = pd.Series(np.asarray(y, dtype=float))
    if len(xv) != len(yv):
        raise ValueError(f"x and y differ in length: {len(xv)} != {len(yv)}")

    ok = (xv > 0) & (yv > 0) & np.isfinite(xv) & np.isfinite(yv)
    lx = np.log(xv[ok].to_numpy())
    ly = np.log(yv[ok].to_numpy())
    if lx.size < 2:
        nan = float("nan")
        return LogLogFit(nan, nan, nan, nan, int(lx.size))

    res = sm.OLS(ly, sm.add_constant(lx, has_constant="add")).fit()
    stderr = float(res.bse[1]) if lx.size > 2 else float("nan")
    rsq = float(res.rsquared) if lx.size > 2 else 1.0
    return LogLogFit(
        slope=float(res.params[1]),
        intercept=float(res.params[0]),
        stderr=stderr,
        rsquared=rsq,
        nobs=int(res.nobs),
    )


def loglog_summary(x, y) -> str:
    """Return statsmodels summary text for the log-log fit."""

    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    res = sm.OLS(ly, sm.add_constant(lx, has_constant="add")).fit()
    return str(res.summary())
