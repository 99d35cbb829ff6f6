"""Empirical panels, band-pass detrending, series joining and the
model-vs-data scenario harness.

The band-pass filter is the asymmetric random-walk variant: ideal low/high
cut weights B_j = (sin(j b) - sin(j a)) / (pi j) with a = 2 pi / p_high and
b = 2 pi / p_low, endpoint weights chosen so every weight row sums to zero,
applied after removing the linear drift (x_T - x_1)/(T - 1).  The cycle is
defined at every observation including the endpoints; the trend is the
original series minus the cycle, so original = cycle + trend identically.
"""

from __future__ import annotations

import concurrent.futures
import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._format import fmt
from .dynamics import DEFAULT_QUARTIC, AgentParams
from .errors import (
    ConfigError,
    DuplicateKey,
    EmptyGroup,
    MalformedRow,
    MissingJoinYear,
    NonPositiveValue,
    SeriesTooShort,
)
from .networks import FINAL_DEMAND, InteractionNetwork
from .simulation import ShockConfig, SimulationConfig, aggregate_series, simulate

__all__ = [
    "PanelRecord",
    "PanelSeries",
    "FilteredSeries",
    "ScenarioSpec",
    "ScenarioRow",
    "DYNAMICS_PRESETS",
    "SHOCK_PRESETS",
    "DEFAULT_SECTOR_EXCLUSIONS",
    "load_panel_csv",
    "cf_weight_matrix",
    "cf_bandpass",
    "join_offset",
    "join_log",
    "correlation_matrix",
    "grouped_correlations",
    "scenario_run",
    "write_scenario_csv",
]

#: deterministic-dynamics presets (alpha1, alpha2, delta): a limit cycle, a
#: monotonically converging node, and a weakly oscillatory "focus" point
#: that sits marginally outside the stability region (see README notes)
DYNAMICS_PRESETS = {
    "cycle": (-0.04, 0.4, 0.1),
    "node": (-0.11, 0.4, 0.5),
    "focus": (-0.04, 0.3, 0.1),
}

#: shock-layer presets: which layer standard deviations are switched on
#: besides the idiosyncratic grid (rho_u = 0, rho_v = rho_z = 0.3)
SHOCK_PRESETS = {
    "idiosyncratic": {"sigma_v": 0.0, "sigma_z": 0.0},
    "country": {"sigma_v": 0.0, "sigma_z": 0.05},
    "sector": {"sigma_v": 0.05, "sigma_z": 0.0},
}

#: 10-macro-sector codes conventionally dropped from correlation groupings
#: (agriculture, mining, utilities, government)
DEFAULT_SECTOR_EXCLUSIONS = frozenset({"AtB", "C", "E", "LtN"})


@dataclass(frozen=True)
class PanelRecord:
    country: str
    sector: str
    variable: str
    year: int
    value: float


@dataclass
class PanelSeries:
    """Validated long-format panel with per-series gap flags."""

    records: list
    gaps: dict = field(default_factory=dict)   # (country, sector, variable) -> missing years

    def series(self, country, sector, variable):
        """Return (years, values) sorted by year for one series."""
        pairs = sorted((r.year, r.value) for r in self.records
                       if r.country == country and r.sector == sector
                       and r.variable == variable)
        years = np.array([p[0] for p in pairs], dtype=int)
        values = np.array([p[1] for p in pairs], dtype=float)
        return years, values

    def keys(self):
        seen = []
        for r in self.records:
            key = (r.country, r.sector, r.variable)
            if key not in seen:
                seen.append(key)
        return seen


def load_panel_csv(path) -> PanelSeries:
    """Load ``country,sector,variable,year,value`` rows with validation.

    Duplicated (country, sector, variable, year) keys and unparseable rows
    raise with their line numbers; year gaps are recorded per series.
    """
    header = ("country", "sector", "variable", "year", "value")
    records = []
    seen = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(h.strip() for h in first) != header:
            raise MalformedRow(f"{path}: expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise MalformedRow(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                year = int(row[3])
                value = float(row[4])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
            key = (row[0].strip(), row[1].strip(), row[2].strip(), year)
            if key in seen:
                raise DuplicateKey(
                    f"{path}:{lineno}: duplicate of line {seen[key]} for {key}"
                )
            seen[key] = lineno
            records.append(PanelRecord(key[0], key[1], key[2], year, value))

    panel = PanelSeries(records=records)
    for key in panel.keys():
        years, _ = panel.series(*key)
        expected = set(range(int(years.min()), int(years.max()) + 1))
        missing = sorted(expected - set(years.tolist()))
        if missing:
            panel.gaps[key] = missing
    return panel


@dataclass
class FilteredSeries:
    """Band-pass decomposition: original = cycle + trend at every point.

    ``indicator`` is cycle/trend, masked (NaN) where |trend| falls below the
    floor relative to the series scale.
    """

    original: np.ndarray
    cycle: np.ndarray
    trend: np.ndarray
    indicator: np.ndarray
    band: tuple


@lru_cache(maxsize=64)
def cf_weight_matrix(n: int, p_low: float, p_high: float) -> np.ndarray:
    """Filter weights as an (n, n) matrix; every row sums to zero."""
    a = 2.0 * np.pi / p_high
    b = 2.0 * np.pi / p_low
    j = np.arange(1, n)
    bj = np.concatenate([[(b - a) / np.pi],
                         (np.sin(b * j) - np.sin(a * j)) / (np.pi * j)])
    w = np.zeros((n, n))
    for t in range(n):
        w[t, t] += bj[0]
        n_fore = max(n - 2 - t, 0)      # regular leads, endpoint weight on x[n-1]
        if n_fore > 0:
            w[t, t + 1:t + 1 + n_fore] += bj[1:n_fore + 1]
        w[t, n - 1] += -0.5 * bj[0] - bj[1:n_fore + 1].sum()
        n_back = max(t - 1, 0)          # regular lags, endpoint weight on x[0]
        if n_back > 0:
            w[t, t - n_back:t] += bj[1:n_back + 1][::-1]
        w[t, 0] += -0.5 * bj[0] - bj[1:n_back + 1].sum()
    w.setflags(write=False)
    return w


def cf_bandpass(series, p_low: float = 2.0, p_high: float = 25.0, *,
                drift: bool = True, trend_floor: float = 1e-6) -> FilteredSeries:
    """Asymmetric random-walk band-pass decomposition of one series.

    Keeps fluctuations with periodicities between ``p_low`` and ``p_high``
    (in observation units, years for annual data).
    """
    original = np.asarray(series, dtype=float)
    n = original.size
    if n < 8:
        raise SeriesTooShort(f"need at least 8 observations, got {n}")
    if not 0 < p_low < p_high:
        raise ConfigError(f"need 0 < p_low < p_high, got ({p_low}, {p_high})")
    if np.any(~np.isfinite(original)):
        raise ConfigError("series must be finite (split on gaps before filtering)")
    if drift:
        adjusted = original - (original[-1] - original[0]) / (n - 1) * np.arange(n)
    else:
        adjusted = original
    cycle = cf_weight_matrix(n, float(p_low), float(p_high)) @ adjusted
    trend = original - cycle
    scale = np.max(np.abs(original))
    floor = trend_floor * scale if scale > 0 else trend_floor
    safe_trend = np.where(np.abs(trend) < floor, np.nan, trend)
    with np.errstate(invalid="ignore"):
        indicator = cycle / safe_trend
    return FilteredSeries(original=original, cycle=cycle, trend=trend,
                          indicator=indicator, band=(p_low, p_high))


def join_offset(x: dict, y: dict, join_year) -> dict:
    """Shift series y by a constant so it matches x at the joining year."""
    if join_year not in x or join_year not in y:
        raise MissingJoinYear(f"both series must be defined at {join_year}")
    offset = x[join_year] - y[join_year]
    return {year: value + offset for year, value in y.items()}


def join_log(x: dict, y: dict, join_year) -> dict:
    """Rescale series y so it matches x at the joining year, preserving growth rates."""
    if join_year not in x or join_year not in y:
        raise MissingJoinYear(f"both series must be defined at {join_year}")
    if x[join_year] <= 0 or any(v <= 0 for v in y.values()):
        raise NonPositiveValue("logarithmic joining needs strictly positive values")
    ratio = np.log(x[join_year]) - np.log(y[join_year])
    return {year: float(np.exp(np.log(value) + ratio)) for year, value in y.items()}


def _detrend_column(col, p_low, p_high):
    """CF-filter the longest contiguous observed run; NaN elsewhere."""
    out = np.full(col.size, np.nan)
    finite = np.isfinite(col)
    if not finite.any():
        return out
    # longest contiguous run of observed values
    best = (0, 0)
    start = None
    for i, ok in enumerate(np.append(finite, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    lo, hi = best
    if hi - lo >= 8:
        out[lo:hi] = cf_bandpass(col[lo:hi], p_low, p_high).indicator
    return out


def correlation_matrix(data, *, detrend: bool = False, min_overlap: int = 10,
                       p_low: float = 2.0, p_high: float = 25.0) -> np.ndarray:
    """Pairwise-complete Pearson correlations of (T, N) columns.

    Entries with fewer than ``min_overlap`` common observations, or with a
    degenerate (zero-variance) overlap, are NaN.  With ``detrend`` the
    band-pass indicator of each column is correlated instead.
    """
    arr = np.array(data, dtype=float)
    if arr.ndim != 2:
        raise ConfigError("expected a (T, N) array")
    if detrend:
        arr = np.column_stack([_detrend_column(arr[:, i], p_low, p_high)
                               for i in range(arr.shape[1])])
    n = arr.shape[1]
    corr = np.full((n, n), np.nan)
    np.fill_diagonal(corr, 1.0)
    for i in range(n):
        for j in range(i + 1, n):
            ok = np.isfinite(arr[:, i]) & np.isfinite(arr[:, j])
            if ok.sum() < min_overlap:
                continue
            xi, xj = arr[ok, i], arr[ok, j]
            if xi.std() == 0 or xj.std() == 0:
                continue
            corr[i, j] = corr[j, i] = float(np.corrcoef(xi, xj)[0, 1])
    return corr


def grouped_correlations(matrix, groups, grouping: str = "within_country_sectors",
                         exclusions=()) -> dict:
    """Average correlations by country.

    ``within_country_sectors``: ``groups`` gives (sector, country) per
    column; for each country, average over its sector pairs, skipping
    excluded sectors and final demand.  ``across_country_aggregates``:
    ``groups`` gives a country per column (one aggregate series each); for
    each country, average its correlations with all other countries.
    """
    matrix = np.asarray(matrix, dtype=float)
    exclusions = set(exclusions)
    result = {}
    if grouping == "within_country_sectors":
        countries = []
        for sector, country in groups:
            if country not in countries:
                countries.append(country)
        for country in countries:
            ids = [i for i, (s, c) in enumerate(groups)
                   if c == country and s not in exclusions and s != FINAL_DEMAND]
            vals = [matrix[a, b] for k, a in enumerate(ids) for b in ids[k + 1:]
                    if np.isfinite(matrix[a, b])]
            if not vals:
                raise EmptyGroup(f"no sector pairs for country {country!r}")
            result[country] = float(np.mean(vals))
    elif grouping == "across_country_aggregates":
        countries = list(groups)
        for i, country in enumerate(countries):
            vals = [matrix[i, j] for j in range(len(countries))
                    if j != i and np.isfinite(matrix[i, j])]
            if not vals:
                raise EmptyGroup(f"no cross-country entries for {country!r}")
            result[country] = float(np.mean(vals))
    else:
        raise ConfigError(f"unknown grouping {grouping!r}")
    return result


@dataclass(frozen=True)
class ScenarioSpec:
    """Grid of deterministic-dynamics and shock scenarios to compare."""

    dynamics: tuple = ("cycle", "node", "focus")
    shock_types: tuple = ("idiosyncratic", "country", "sector")
    sigma_u_grid: tuple = (0.0, 0.1, 0.2, 0.3, 0.4)
    n_seeds: int = 20
    steps: int = 600
    retain: int = 228
    stride: int = 4
    rho_u: float = 0.0
    rho_v: float = 0.3
    rho_z: float = 0.3
    detrend: bool = False
    exclusions: tuple = ()

    def __post_init__(self):
        for name in self.dynamics:
            if name not in DYNAMICS_PRESETS:
                raise ConfigError(f"unknown dynamics preset {name!r}")
        for name in self.shock_types:
            if name not in SHOCK_PRESETS:
                raise ConfigError(f"unknown shock preset {name!r}")


@dataclass(frozen=True)
class ScenarioRow:
    dynamics: str
    shock_type: str
    sigma_u: float
    group: str
    mean_corr: float
    sd_corr: float
    n_seeds: int


def _scenario_cell(net, q, spec, dynamics, shock_type, sigma_u, seed):
    """Grouped correlation means for one (scenario, seed) cell."""
    a1, a2, de = DYNAMICS_PRESETS[dynamics]
    params = AgentParams.with_steady_state(a1, a2, de, q)
    preset = SHOCK_PRESETS[shock_type]
    shocks = ShockConfig(rho_u=spec.rho_u, sigma_u=sigma_u,
                         rho_v=spec.rho_v, sigma_v=preset["sigma_v"],
                         rho_z=spec.rho_z, sigma_z=preset["sigma_z"])
    cfg = SimulationConfig(steps=spec.steps, retain=spec.retain,
                           aggregate_stride=spec.stride, seed=seed)
    traj = simulate(net, params, q, shocks, cfg)
    annual = aggregate_series(traj.y, spec.stride)

    pairs = list(zip(traj.sectors, traj.countries))
    corr = correlation_matrix(annual, detrend=spec.detrend, min_overlap=3)
    within = grouped_correlations(corr, pairs, "within_country_sectors",
                                  spec.exclusions)

    countries = []
    for c in traj.countries:
        if c not in countries:
            countries.append(c)
    agg = np.empty((annual.shape[0], len(countries)))
    for j, country in enumerate(countries):
        ids = [i for i, c in enumerate(traj.countries) if c == country]
        agg[:, j] = aggregate_series(annual[:, ids], 1, weights=traj.outputs[ids])
    corr_c = correlation_matrix(agg, detrend=spec.detrend, min_overlap=3)
    across = grouped_correlations(corr_c, countries, "across_country_aggregates")
    return {
        "within_country_sectors": float(np.mean(list(within.values()))),
        "across_country_aggregates": float(np.mean(list(across.values()))),
    }


def _scenario_task(args):
    return args[3:], _scenario_cell(*args)


def scenario_run(net: InteractionNetwork, spec: ScenarioSpec,
                 q=DEFAULT_QUARTIC, jobs: int = 1) -> list:
    """Run the scenario grid and summarize grouped correlations over seeds.

    Returns :class:`ScenarioRow` records, one per (dynamics, shock type,
    sigma_u, grouping), with the mean and standard deviation over seeds.
    Cells are independent; with ``jobs > 1`` they run in worker processes
    and merge by key, producing the same result set as a serial run.
    """
    tasks = [(net, q, spec, dyn, shock, float(su), seed)
             for dyn in spec.dynamics
             for shock in spec.shock_types
             for su in spec.sigma_u_grid
             for seed in range(spec.n_seeds)]
    cells = {}
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, value in pool.map(_scenario_task, tasks, chunksize=4):
                cells[key] = value
    else:
        for args in tasks:
            key, value = _scenario_task(args)
            cells[key] = value

    rows = []
    for dyn in spec.dynamics:
        for shock in spec.shock_types:
            for su in spec.sigma_u_grid:
                for group in ("within_country_sectors", "across_country_aggregates"):
                    vals = np.array([cells[(dyn, shock, float(su), seed)][group]
                                     for seed in range(spec.n_seeds)])
                    rows.append(ScenarioRow(
                        dynamics=dyn, shock_type=shock, sigma_u=float(su),
                        group=group, mean_corr=float(vals.mean()),
                        sd_corr=float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                        n_seeds=spec.n_seeds))
    return rows


def write_scenario_csv(rows, path):
    """Results table: dynamics,shock_type,sigma_u,group,mean_corr,sd_corr,n_seeds."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dynamics,shock_type,sigma_u,group,mean_corr,sd_corr,n_seeds\n")
        for r in rows:
            fh.write(f"{r.dynamics},{r.shock_type},{fmt(r.sigma_u)},{r.group},"
                     f"{fmt(r.mean_corr)},{fmt(r.sd_corr)},{r.n_seeds}\n")
