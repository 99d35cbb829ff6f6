"""Forward simulation of the coupled stochastic system.

The coupled map iterates, per node i,

    x[t+1] = (1 - delta_i) x[t] + y[t]
    y[t+1] = alpha0_i + alpha1_i x[t] + alpha2_i y[t] + F(w_i . y[t])
             + u_i[t] + v_{sector(i)}[t] + z_{country(i)}[t]

with AR(1) shock layers: idiosyncratic per node, sector-wide and
country-wide.  Each (layer, entity) pair draws from an independent stream
keyed by (seed, layer, entity index), so enabling one layer never changes
another layer's draws and runs are reproducible from the seed alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ._format import fmt
from .dynamics import DEFAULT_QUARTIC, AgentParams, QuarticCoefficients, eval_f
from .errors import ConfigError, NumericalBlowup
from .networks import InteractionNetwork

__all__ = [
    "ShockConfig",
    "SimulationConfig",
    "TrajectorySet",
    "ar1_path",
    "simulate",
    "aggregate_series",
    "write_metadata",
]

_LAYER_IDIO = 0
_LAYER_SECTOR = 1
_LAYER_COUNTRY = 2
_LAYER_INIT = 3

#: how normal variates are produced, echoed into run metadata
_NORMAL_METHOD = "numpy-pcg64-ziggurat"


@dataclass(frozen=True)
class ShockConfig:
    """AR(1) shock layers: (persistence, innovation s.d.) per layer."""

    rho_u: float = 0.0
    sigma_u: float = 0.0
    rho_v: float = 0.0
    sigma_v: float = 0.0
    rho_z: float = 0.0
    sigma_z: float = 0.0

    def __post_init__(self):
        for name in ("rho_u", "rho_v", "rho_z"):
            rho = getattr(self, name)
            if not 0.0 <= rho < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {rho}")
        for name in ("sigma_u", "sigma_v", "sigma_z"):
            sigma = getattr(self, name)
            if sigma < 0:
                raise ConfigError(f"{name} must be non-negative, got {sigma}")

    @property
    def silent(self) -> bool:
        return self.sigma_u == 0 and self.sigma_v == 0 and self.sigma_z == 0


@dataclass(frozen=True)
class SimulationConfig:
    """Run length, retention window, aggregation stride and seeding.

    The analysis window is the final ``retain`` steps of the ``steps``
    simulated; ``burn_in`` is the discarded prefix and defaults to
    ``steps - retain``.
    """

    steps: int
    burn_in: int = None
    retain: int = None
    aggregate_stride: int = 1
    seed: int = 0
    initial_mode: str = "perturbed"
    initial_spread: float = 0.1
    blowup_bound: float = 1e3
    shocks_during_burn_in: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be positive")
        burn, keep = self.burn_in, self.retain
        if burn is None and keep is None:
            burn, keep = 0, self.steps
        elif burn is None:
            burn = self.steps - keep
        elif keep is None:
            keep = self.steps - burn
        object.__setattr__(self, "burn_in", burn)
        object.__setattr__(self, "retain", keep)
        if burn < 0 or keep < 1 or burn + keep > self.steps:
            raise ConfigError(
                f"need burn_in + retain <= steps, got {burn} + {keep} > {self.steps}"
            )
        if self.aggregate_stride < 1 or keep % self.aggregate_stride != 0:
            raise ConfigError(
                f"aggregate_stride {self.aggregate_stride} must divide retain {keep}"
            )
        if self.initial_mode not in ("perturbed", "fixed_point"):
            raise ConfigError(f"unknown initial mode {self.initial_mode!r}")

    def echo(self) -> dict:
        return {
            "steps": self.steps,
            "burn_in": self.burn_in,
            "retain": self.retain,
            "aggregate_stride": self.aggregate_stride,
            "seed": self.seed,
            "initial_mode": self.initial_mode,
            "initial_spread": self.initial_spread,
            "blowup_bound": self.blowup_bound,
            "shocks_during_burn_in": self.shocks_during_burn_in,
            "normal_method": _NORMAL_METHOD,
        }


@dataclass
class TrajectorySet:
    """Retained simulated paths plus the shock paths that produced them.

    Arrays are (retain, N).  ``u``, ``v``, ``z`` hold the per-node shock
    contributions of each layer over the retained window.
    """

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    labels: list
    sectors: list
    countries: list
    outputs: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def steps(self) -> int:
        return self.y.shape[0]

    def to_csv(self, path):
        """Long-format export: node,step,x,y."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("node,step,x,y\n")
            for i, label in enumerate(self.labels):
                for t in range(self.steps):
                    fh.write(f"{label},{t},{fmt(self.x[t, i])},{fmt(self.y[t, i])}\n")


def _stream(seed, layer, index) -> np.random.Generator:
    return np.random.default_rng((seed, layer, index))


def ar1_path(rho: float, sigma: float, steps: int, rng) -> np.ndarray:
    """AR(1) path with u[0] = 0 and u[t+1] = rho u[t] + N(0, sigma)."""
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"persistence must lie in [0, 1), got {rho}")
    if sigma < 0:
        raise ConfigError(f"innovation s.d. must be non-negative, got {sigma}")
    out = np.zeros(steps)
    if sigma == 0.0 or steps < 2:
        return out
    innovations = rng.normal(0.0, sigma, steps - 1)
    out[1:] = lfilter([1.0], [1.0, -rho], innovations)
    return out


def _per_node_params(params, n: int):
    if isinstance(params, AgentParams):
        params = [params] * n
    params = list(params)
    if len(params) != n:
        raise ConfigError(f"expected {n} parameter sets, got {len(params)}")
    a0 = np.array([p.alpha0 for p in params])
    a1 = np.array([p.alpha1 for p in params])
    a2 = np.array([p.alpha2 for p in params])
    de = np.array([p.delta for p in params])
    return a0, a1, a2, de


def simulate(net: InteractionNetwork, params, q: QuarticCoefficients = DEFAULT_QUARTIC,
             shocks: ShockConfig = None, cfg: SimulationConfig = None) -> TrajectorySet:
    """Iterate the coupled system and return the retained window.

    ``params`` is one :class:`AgentParams` (homogeneous agents) or one per
    node.  Deterministic given (config, seed).  Raises
    :class:`NumericalBlowup` if any |y| exceeds the configured bound.
    """
    if cfg is None:
        cfg = SimulationConfig(steps=600)
    if shocks is None:
        shocks = ShockConfig()
    n = net.n
    a0, a1, a2, de = _per_node_params(params, n)
    w = net.weights
    steps = cfg.steps

    u = np.zeros((steps, n))
    v = np.zeros((steps, n))
    z = np.zeros((steps, n))
    if shocks.sigma_u > 0:
        for i in range(n):
            u[:, i] = ar1_path(shocks.rho_u, shocks.sigma_u, steps,
                               _stream(cfg.seed, _LAYER_IDIO, i))
    if shocks.sigma_v > 0:
        sector_ids = sorted({s for s in net.sectors if s is not None})
        for j, s in enumerate(sector_ids):
            path = ar1_path(shocks.rho_v, shocks.sigma_v, steps,
                            _stream(cfg.seed, _LAYER_SECTOR, j))
            for i in range(n):
                if net.sectors[i] == s:
                    v[:, i] = path
    if shocks.sigma_z > 0:
        country_ids = sorted({c for c in net.countries if c is not None})
        for j, c in enumerate(country_ids):
            path = ar1_path(shocks.rho_z, shocks.sigma_z, steps,
                            _stream(cfg.seed, _LAYER_COUNTRY, j))
            for i in range(n):
                if net.countries[i] == c:
                    z[:, i] = path
    if not cfg.shocks_during_burn_in:
        u[:cfg.burn_in] = 0.0
        v[:cfg.burn_in] = 0.0
        z[:cfg.burn_in] = 0.0
    shock_sum = u + v + z

    x = np.full(n, 1.0) / de
    y = np.ones(n)
    if cfg.initial_mode == "perturbed":
        rng = _stream(cfg.seed, _LAYER_INIT, 0)
        x = x * (1.0 + rng.uniform(-cfg.initial_spread, cfg.initial_spread, n))
        y = y * (1.0 + rng.uniform(-cfg.initial_spread, cfg.initial_spread, n))

    keep_from = cfg.steps - cfg.retain
    xs = np.empty((cfg.retain, n))
    ys = np.empty((cfg.retain, n))
    one_minus_de = 1.0 - de
    bound = cfg.blowup_bound
    for t in range(steps):
        ybar = w @ y
        x, y = (one_minus_de * x + y,
                a0 + a1 * x + a2 * y + eval_f(q, ybar) + shock_sum[t])
        peak = np.max(np.abs(y))
        if not np.isfinite(peak) or peak > bound:
            raise NumericalBlowup(step=t, value=float(peak), bound=bound)
        if t >= keep_from:
            xs[t - keep_from] = x
            ys[t - keep_from] = y

    config = cfg.echo()
    config["shocks"] = {
        "rho_u": shocks.rho_u, "sigma_u": shocks.sigma_u,
        "rho_v": shocks.rho_v, "sigma_v": shocks.sigma_v,
        "rho_z": shocks.rho_z, "sigma_z": shocks.sigma_z,
    }
    return TrajectorySet(
        x=xs, y=ys,
        u=u[keep_from:], v=v[keep_from:], z=z[keep_from:],
        labels=list(net.labels), sectors=list(net.sectors),
        countries=list(net.countries), outputs=net.outputs.copy(),
        config=config,
    )


def aggregate_series(values, stride: int, weights=None) -> np.ndarray:
    """Non-overlapping block means over time, optionally output-weighted.

    ``values`` is (T,) or (T, N); a :class:`TrajectorySet` aggregates its
    decision variable.  With ``weights`` given, nodes are first combined
    into the weighted cross-node average sum(w_i y_i)/sum(w_i).
    """
    if isinstance(values, TrajectorySet):
        values = values.y
    arr = np.asarray(values, dtype=float)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        arr = arr @ weights / weights.sum()
    t = arr.shape[0]
    if stride < 1 or t % stride != 0:
        raise ConfigError(f"stride {stride} must divide series length {t}")
    shape = (t // stride, stride) + arr.shape[1:]
    return arr.reshape(shape).mean(axis=1)


def write_metadata(path, mapping: dict):
    """Write a JSON metadata sidecar."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mapping, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
