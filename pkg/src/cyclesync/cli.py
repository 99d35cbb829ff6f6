"""Command-line entry point for the experiment suite.

Every experiment reads a flat sectioned key-value config (INI syntax),
optionally starting from a shipped preset, writes its module CSV outputs
plus a plot-ready ``figure-<experiment>.csv`` (x, y, series columns) into
the output directory, and echoes the fully resolved configuration next to
them.  Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 data or IO error.
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import empirics, fixtures, master_stability, phase
from ._format import fmt
from .dynamics import AgentParams, QuarticCoefficients
from .errors import ConfigError, CycleSyncError, DataError, NumericalError
from .networks import FlowTable, build_io_network, build_topology, uniform_coupling
from .simulation import ShockConfig, SimulationConfig, simulate, write_metadata

__all__ = ["main"]

ENV_OUTDIR = "CYCLESYNC_OUTDIR"

_KNOWN_KEYS = {
    "network": {"kind", "n", "eps", "sizes", "bridge", "flows"},
    "dynamics": {"alpha1", "alpha2", "delta", "betas"},
    "shocks": {"rho_u", "sigma_u", "rho_v", "sigma_v", "rho_z", "sigma_z"},
    "run": {"steps", "burn_in", "retain", "stride", "seed", "initial_mode"},
    "measure": {"min_separation", "min_prominence", "smooth_window"},
    "sweep": {"eps_grid", "entrain_tol"},
    "centrality": {"n_draws", "mode", "entrain_tol"},
    "msf": {"k_grid", "window", "burn_in"},
    "shock_response": {"shock", "tau", "window_periods", "horizon_periods"},
    "scenarios": {"dynamics", "shock_types", "sigma_u_grid", "n_seeds",
                  "steps", "retain", "stride", "detrend", "exclusions"},
}


def _load_config(preset: str = None, path: str = None, overrides=()) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if preset:
        ref = resources.files("cyclesync").joinpath(f"presets/{preset}.cfg")
        if not ref.is_file():
            available = sorted(p.name[:-4] for p in
                               resources.files("cyclesync").joinpath("presets").iterdir()
                               if p.name.endswith(".cfg"))
            raise ConfigError(f"unknown preset {preset!r}; available: {available}")
        cfg.read_string(ref.read_text(encoding="utf-8"))
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg.read(path)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        section, option = key.split(".", 1)
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section.strip(), option.strip(), value.strip())
    for section in cfg.sections():
        known = _KNOWN_KEYS.get(section)
        if known is None:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(cfg.options(section)) - known
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return cfg


def _floats(text: str) -> np.ndarray:
    text = text.strip()
    if text.startswith("linspace:"):
        lo, hi, num = text[len("linspace:"):].split(",")
        return np.linspace(float(lo), float(hi), int(num))
    return np.array([float(v) for v in text.split(",") if v.strip()])


def _get(cfg, section, key, default=None, convert=str):
    if cfg.has_option(section, key):
        return convert(cfg.get(section, key))
    return default


def _quartic(cfg) -> QuarticCoefficients:
    betas = _get(cfg, "dynamics", "betas")
    if betas is None:
        from .dynamics import DEFAULT_QUARTIC
        return DEFAULT_QUARTIC
    values = _floats(betas)
    if values.size != 5:
        raise ConfigError(f"betas needs 5 coefficients, got {values.size}")
    return QuarticCoefficients(*values)


def _network(cfg):
    kind = _get(cfg, "network", "kind", "complete")
    if kind == "single":
        from .networks import InteractionNetwork
        return InteractionNetwork(weights=np.eye(1)), None
    if kind == "io":
        flows_path = _get(cfg, "network", "flows")
        if not flows_path:
            raise ConfigError("network.kind = io requires network.flows")
        return build_io_network(FlowTable.from_csv(flows_path)), None
    if kind == "demo_io":
        return build_io_network(fixtures.demo_flow_table()), None
    n = _get(cfg, "network", "n", 10, int)
    eps = _get(cfg, "network", "eps", 0.2, float)
    kwargs = {}
    if kind == "two_clique":
        sizes = _get(cfg, "network", "sizes")
        bridge = _get(cfg, "network", "bridge")
        if sizes:
            kwargs["sizes"] = tuple(int(v) for v in sizes.split(","))
        if bridge:
            kwargs["bridge"] = tuple(int(v) for v in bridge.split(","))
        adj = build_topology(kind, **kwargs)
    else:
        adj = build_topology(kind, n)
    return uniform_coupling(adj, eps), adj


def _alpha1_values(cfg, n: int) -> np.ndarray:
    text = _get(cfg, "dynamics", "alpha1", "-0.04")
    values = _floats(text)
    if values.size == 1:
        values = np.full(n, values[0])
    if values.size != n:
        raise ConfigError(f"alpha1 must give 1 or {n} values, got {values.size}")
    return values


def _agent_params(cfg, n: int, q) -> list:
    alpha2 = _get(cfg, "dynamics", "alpha2", 0.4, float)
    delta = _get(cfg, "dynamics", "delta", 0.1, float)
    return [AgentParams.with_steady_state(a1, alpha2, delta, q)
            for a1 in _alpha1_values(cfg, n)]


def _shock_config(cfg) -> ShockConfig:
    return ShockConfig(
        rho_u=_get(cfg, "shocks", "rho_u", 0.0, float),
        sigma_u=_get(cfg, "shocks", "sigma_u", 0.0, float),
        rho_v=_get(cfg, "shocks", "rho_v", 0.0, float),
        sigma_v=_get(cfg, "shocks", "sigma_v", 0.0, float),
        rho_z=_get(cfg, "shocks", "rho_z", 0.0, float),
        sigma_z=_get(cfg, "shocks", "sigma_z", 0.0, float),
    )


def _sim_config(cfg, default_steps=2500) -> SimulationConfig:
    return SimulationConfig(
        steps=_get(cfg, "run", "steps", default_steps, int),
        burn_in=_get(cfg, "run", "burn_in", None,
                     lambda v: None if v == "" else int(v)),
        retain=_get(cfg, "run", "retain", None,
                    lambda v: None if v == "" else int(v)),
        aggregate_stride=_get(cfg, "run", "stride", 1, int),
        seed=_get(cfg, "run", "seed", 0, int),
        initial_mode=_get(cfg, "run", "initial_mode", "perturbed"),
    )


def _peak_kwargs(cfg) -> dict:
    return {
        "min_separation": _get(cfg, "measure", "min_separation", 5, int),
        "min_prominence": _get(cfg, "measure", "min_prominence", None,
                               lambda v: None if v == "" else float(v)),
        "smooth_window": _get(cfg, "measure", "smooth_window", 1, int),
    }


def _echo_config(cfg, outdir: Path, experiment: str, extra: dict):
    resolved = outdir / "resolved-config.cfg"
    with open(resolved, "w", encoding="utf-8") as fh:
        cfg.write(fh)
    meta = {
        "experiment": experiment,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    meta.update(extra)
    write_metadata(outdir / "metadata.json", meta)


def _write_figure(path, rows):
    """Plot-ready long format: x, y, series label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,series\n")
        for x, y, series in rows:
            fh.write(f"{fmt(x)},{fmt(y)},{series}\n")


def cmd_simulate(cfg, outdir: Path) -> dict:
    net, _ = _network(cfg)
    q = _quartic(cfg)
    params = _agent_params(cfg, net.n, q)
    traj = simulate(net, params, q, _shock_config(cfg), _sim_config(cfg))
    traj.to_csv(outdir / "trajectory.csv")
    peak_kwargs = _peak_kwargs(cfg)
    periods = {}
    for i, label in enumerate(traj.labels):
        try:
            omega = phase.measured_frequency(traj.y[:, i], **peak_kwargs)
            periods[label] = 2.0 * np.pi / omega
        except CycleSyncError:
            periods[label] = None
    _write_figure(outdir / "figure-simulate.csv",
                  [(t, traj.y[t, i], traj.labels[i])
                   for i in range(traj.n) for t in range(traj.steps)])
    return {"measured_periods": periods, "config_echo": traj.config}


def cmd_sweep_epsilon(cfg, outdir: Path) -> dict:
    _, adj = _network(cfg)
    if adj is None:
        raise ConfigError("sweep-epsilon needs an abstract topology")
    q = _quartic(cfg)
    sim_cfg = _sim_config(cfg)
    result = phase.epsilon_sweep(
        adj, _alpha1_values(cfg, adj.n),
        _floats(_get(cfg, "sweep", "eps_grid", "linspace:0,0.5,11")),
        alpha2=_get(cfg, "dynamics", "alpha2", 0.4, float),
        delta=_get(cfg, "dynamics", "delta", 0.1, float),
        q=q, shocks=_shock_config(cfg) if cfg.has_section("shocks") else None,
        steps=sim_cfg.steps, burn_in=sim_cfg.burn_in, seed=sim_cfg.seed,
        entrain_tol=_get(cfg, "sweep", "entrain_tol", 0.01, float),
        peak_kwargs=_peak_kwargs(cfg))
    result.to_csv(outdir / "entrainment.csv")
    rows = []
    for k, eps in enumerate(result.eps_grid):
        rows.extend((eps, result.omegas[k, i], f"omega_node_{i}")
                    for i in range(result.omegas.shape[1]))
        rows.append((eps, result.coherence[k], "coherence"))
        rows.append((eps, result.mean_correlation[k], "mean_correlation"))
    _write_figure(outdir / "figure-sweep-epsilon.csv", rows)
    return {"transition_epsilon": result.transition_epsilon()}


def cmd_sync_centrality(cfg, outdir: Path) -> dict:
    net, _ = _network(cfg)
    sim_cfg = _sim_config(cfg, default_steps=2000)
    result = phase.sync_centrality(
        net,
        n_draws=_get(cfg, "centrality", "n_draws", 100, int),
        mode=_get(cfg, "centrality", "mode", "L"),
        seed=sim_cfg.seed, q=_quartic(cfg),
        alpha2=_get(cfg, "dynamics", "alpha2", 0.4, float),
        delta=_get(cfg, "dynamics", "delta", 0.1, float),
        steps=sim_cfg.steps, burn_in=sim_cfg.burn_in,
        entrain_tol=_get(cfg, "centrality", "entrain_tol", 0.05, float),
        peak_kwargs=_peak_kwargs(cfg))
    result.to_csv(outdir / "sync-centrality.csv")
    _write_figure(outdir / "figure-sync-centrality.csv",
                  [(i, result.scores[i], result.labels[i])
                   for i in range(result.scores.size)])
    return {"benchmark_frequency": result.benchmark_frequency,
            "mode": result.mode, "n_draws": result.n_draws}


def cmd_msf(cfg, outdir: Path) -> dict:
    q = _quartic(cfg)
    params = _agent_params(cfg, 1, q)[0]
    window = _get(cfg, "msf", "window", 100000, int)
    burn = _get(cfg, "msf", "burn_in", 1000, int)
    orbit = master_stability.synchronized_orbit(params, q, steps=window + burn)
    curve = master_stability.master_stability_function(
        orbit, _floats(_get(cfg, "msf", "k_grid", "linspace:0,2,21")),
        burn_in=burn, window=window)
    curve.to_csv(outdir / "msf.csv")
    rows = [(k, m, "mu1") for k, m in zip(curve.k_grid, curve.mu1)]
    rows += [(k, m, "mu2") for k, m in zip(curve.k_grid, curve.mu2)]
    _write_figure(outdir / "figure-msf.csv", rows)
    return {"orbit_period": orbit.period, "mu1_at_zero": float(curve.mu1[0])}


def cmd_shock_response(cfg, outdir: Path) -> dict:
    net, _ = _network(cfg)
    q = _quartic(cfg)
    params = _agent_params(cfg, net.n, q)[0]
    shock_text = _get(cfg, "shock_response", "shock", "0.1")
    shock = _floats(shock_text)
    if shock.size == 1 and net.n > 1:
        shock = np.concatenate([shock, np.zeros(net.n - 1)])
    response = master_stability.shock_response_compare(
        net, params, q, shock=shock,
        tau=_get(cfg, "shock_response", "tau", None,
                 lambda v: None if v == "" else int(v)),
        window_periods=_get(cfg, "shock_response", "window_periods", 3, int),
        horizon_periods=_get(cfg, "shock_response", "horizon_periods", 10, int))
    response.to_csv(outdir / "shock-response.csv")
    rows = [(t, response.nonlinear_y[t, i], f"nonlinear_node_{i}")
            for i in range(net.n) for t in range(response.nonlinear_y.shape[0])]
    rows += [(t, response.linear_y[t, i], f"linear_node_{i}")
             for i in range(net.n) for t in range(response.linear_y.shape[0])]
    _write_figure(outdir / "figure-shock-response.csv", rows)
    return {"rmse": response.rmse, "phase_shift": response.phase_shift}


def cmd_scenarios(cfg, outdir: Path, jobs: int = 1) -> dict:
    net, _ = _network(cfg)
    spec = empirics.ScenarioSpec(
        dynamics=tuple((_get(cfg, "scenarios", "dynamics", "cycle,node,focus")).split(",")),
        shock_types=tuple((_get(cfg, "scenarios", "shock_types",
                                "idiosyncratic,country,sector")).split(",")),
        sigma_u_grid=tuple(_floats(_get(cfg, "scenarios", "sigma_u_grid", "0.1,0.2,0.3"))),
        n_seeds=_get(cfg, "scenarios", "n_seeds", 20, int),
        steps=_get(cfg, "scenarios", "steps", 600, int),
        retain=_get(cfg, "scenarios", "retain", 228, int),
        stride=_get(cfg, "scenarios", "stride", 4, int),
        detrend=_get(cfg, "scenarios", "detrend", False,
                     lambda v: v.lower() in ("1", "true", "yes")),
        exclusions=tuple(e for e in
                         _get(cfg, "scenarios", "exclusions", "").split(",") if e),
    )
    rows = empirics.scenario_run(net, spec, q=_quartic(cfg), jobs=jobs)
    empirics.write_scenario_csv(rows, outdir / "scenario-results.csv")
    _write_figure(outdir / "figure-scenarios.csv",
                  [(r.sigma_u, r.mean_corr, f"{r.dynamics}/{r.shock_type}/{r.group}")
                   for r in rows])
    return {"cells": len(rows), "n_seeds": spec.n_seeds}


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-epsilon": cmd_sweep_epsilon,
    "sync-centrality": cmd_sync_centrality,
    "msf": cmd_msf,
    "shock-response": cmd_shock_response,
    "scenarios": cmd_scenarios,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclesync",
        description="Experiments on synchronization of coupled business-cycle "
                    "oscillators: simulation, entrainment sweeps, centrality, "
                    "master stability, shock responses and scenario comparisons.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, func in _COMMANDS.items():
        cmd = sub.add_parser(name, help=func.__doc__)
        cmd.add_argument("--config", help="flat sectioned key-value config file")
        cmd.add_argument("--preset", help="name of a shipped preset config")
        cmd.add_argument("--outdir", default=None,
                         help=f"output directory (default ${ENV_OUTDIR} or cwd)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override run.seed")
        cmd.add_argument("--jobs", type=int, default=1,
                         help="worker processes for parallel sweeps")
        cmd.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                         help="override a single config value")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"run.seed={args.seed}")
        cfg = _load_config(args.preset, args.config, overrides)
        outdir = Path(args.outdir or os.environ.get(ENV_OUTDIR, "."))
        outdir.mkdir(parents=True, exist_ok=True)
        command = _COMMANDS[args.experiment]
        if args.experiment == "scenarios":
            summary = command(cfg, outdir, jobs=args.jobs)
        else:
            summary = command(cfg, outdir)
        _echo_config(cfg, outdir, args.experiment, summary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
