"""Extremal-index estimation and extreme-data preparation helpers."""

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd


@dataclass
class ExtremalIndexEstimate:
    """Moment-based extremal index with the evidence behind it.

    theta is capped at 1; mean_cluster_size = 1/theta is the implied
    average run of dependent exceedances.  branch records which of the
    two moment formulas applied (2 when some interexceedance time
    exceeds 2 time units).
    """

    theta: float
    n_exceedances: int
    branch: int
    interexceedance: np.ndarray = field(repr=False)

    @property
    def mean_cluster_size(self) -> float:
        return 1.0 / self.theta

    def __float__(self):
        return float(self.theta)


def _as_times(times, n):
    if times is None:
        return np.arange(n, dtype=float)
    t = np.asarray(times)
    if np.issubdtype(t.dtype, np.datetime64):
        t = t.astype("datetime64[D]").astype(float)
    else:
        t = t.astype(float)
    if t.shape[0] != n:
        raise ValueError("times and exceedance indicator differ in length")
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be strictly increasing")
    return t


def extremal_index(exceed, times=None) -> ExtremalIndexEstimate:
    """Intervals estimator of the extremal index.

    exceed flags which observations exceed the threshold; times are
    their time stamps (defaults to the row index).  Gaps in the record
    should be reflected in the stamps so interexceedance times come out
    right.  Requires at least two exceedances.
    """
    exceed = np.asarray(exceed, dtype=bool)
    t = _as_times(times, exceed.shape[0])
    te = t[exceed]
    if te.shape[0] < 2:
        raise ValueError("need at least two exceedances")
    T = np.diff(te)
    N = te.shape[0]
    if T.max() <= 2.0:
        num = 2.0 * T.sum() ** 2
        den = (N - 1) * np.sum(T ** 2)
        branch = 1
    else:
        num = 2.0 * np.sum(T - 1.0) ** 2
        den = (N - 1) * np.sum((T - 1.0) * (T - 2.0))
        branch = 2
    theta = min(1.0, num / den)
    return ExtremalIndexEstimate(theta=float(theta), n_exceedances=int(N),
                                 branch=branch, interexceedance=T)


def _listify(by):
    return [by] if isinstance(by, str) else list(by)


def block_maxima(data, by, value):
    """Per-block maxima of a value column.

    Missing values are skipped; blocks that are empty after removal are
    dropped with a warning.
    """
    by = _listify(by)
    df = pd.DataFrame(data)
    out = df.groupby(by, as_index=False, sort=True)[value].max()
    empty = out[value].isna()
    if empty.any():
        warnings.warn(f"dropping {int(empty.sum())} block(s) with no data")
        out = out[~empty]
    return out.reset_index(drop=True)


def threshold_excesses(values, thresholds):
    """Excesses of a (possibly varying) threshold.

    Non-exceedances come back as NaN so that downstream fitting skips
    them; equality with the threshold does not count as an exceedance.
    """
    v = np.asarray(values, dtype=float)
    u = np.asarray(thresholds, dtype=float)
    if u.ndim > 0 and v.shape != u.shape:
        raise ValueError("values and thresholds differ in length")
    with np.errstate(invalid="ignore"):
        return np.where(v > u, v - u, np.nan)


def r_largest(data, by, value, r, ny=None):
    """Top r values per group, sorted descending within group.

    r = -1 keeps every value.  Groups holding fewer than r values keep
    all of them, with a warning.  If ny (periods of observation) is a
    scalar or a dict keyed by group, it is attached as an "ny" column.
    """
    if r != -1 and r < 1:
        raise ValueError("r must be a positive integer or -1")
    by = _listify(by)
    df = pd.DataFrame(data).dropna(subset=[value])
    if r != -1:
        sizes = df.groupby(by).size()
        short = sizes[sizes < r]
        if len(short):
            warnings.warn(
                f"{len(short)} group(s) hold fewer than r = {r} values; "
                "using all of them")
        df = df.sort_values(value, ascending=False, kind="stable")
        df = df.groupby(by, sort=False).head(r)
    out = df.sort_values(by + [value], ascending=[True] * len(by) + [False],
                         kind="stable").reset_index(drop=True)
    if ny is not None:
        if isinstance(ny, dict):
            if len(by) != 1:
                raise ValueError("dict ny needs a single group column")
            out["ny"] = out[by[0]].map(ny)
            if out["ny"].isna().any():
                raise ValueError("ny map does not cover every group")
        else:
            out["ny"] = float(ny)
    return out
