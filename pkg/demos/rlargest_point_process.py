"""
Sharper annual-maximum estimates from the r largest values
==========================================================

A GEV fit to annual maxima throws away every other large value in each
year.  The point-process likelihood keeps the top r values per year and
still estimates annual-maximum GEV parameters, typically with visibly
smaller standard errors.  This script fits both to the same synthetic
record and compares.
"""

import numpy as np
import pandas as pd

import evsmooth as ev

rng = np.random.default_rng(12)

# --- 60 years of daily observations with a slow trend ------------------
nyears, ndays = 60, 365
year = np.repeat(np.arange(nyears), ndays)
t = year / (nyears - 1.0)                     # 0 .. 1 across the record
daily = 8.0 + 1.5 * t + rng.gumbel(scale=1.2, size=nyears * ndays)
data = pd.DataFrame({"year": year, "t": t, "y": daily})

# peek at what the top-5 extraction looks like
top5 = ev.r_largest(data, by="year", value="y", r=5)
print("top-5 table head:")
print(top5.head(6).to_string(index=False))

# --- classical fit: one maximum per year -------------------------------
ann = ev.block_maxima(data, by=["year", "t"], value="y")
gev = ev.fit(
    ev.ModelSpec("gev", response="y",
                 formulas=[[ev.linear("t")], [], []]),
    ann,
)

# --- point-process fit: top 5 values per year --------------------------
# each group spans one year of observation, hence ny = 1
pp = ev.fit(
    ev.ModelSpec("pp", response="y",
                 formulas=[[ev.linear("t")], [], []],
                 pp_args={"group": "year", "r": 5, "ny": 1.0}),
    data,
)

# --- compare the annual-maximum parameters -----------------------------
grid = pd.DataFrame({"t": [0.0, 1.0]})
for label, mdl in [("block maxima (r=1)", gev), ("point process (r=5)", pp)]:
    p = mdl.predict(grid, se_fit=True)
    print(f"\n{label}:")
    print(f"  location at t=0: {p['location'][0]:7.3f} "
          f"+- {p['location_se'][0]:.3f}")
    print(f"  location at t=1: {p['location'][1]:7.3f} "
          f"+- {p['location_se'][1]:.3f}")
    print(f"  scale:           {p['scale'][0]:7.3f} "
          f"+- {p['scale_se'][0]:.3f}")
    print(f"  shape:           {p['shape'][0]:7.3f} "
          f"+- {p['shape_se'][0]:.3f}")

# the trend in the daily mean is 1.5 units over the record, and the
# annual-maximum location inherits it; Gumbel daily noise means the
# true shape is ~0
z = pp.predict(grid, type="quantile", prob=0.99, se_fit=True)
print(f"\n100-year level, start vs end of record: "
      f"{z['quantile'][0]:.2f} +- {z['quantile_se'][0]:.2f}  vs  "
      f"{z['quantile'][1]:.2f} +- {z['quantile_se'][1]:.2f}")
