"""Experiment driver: config handling, commands, and reproducible outputs.

Configs are single JSON files with nested sections; defaults below.  All
quantities are in the grid's natural units.  Outputs are CSV (plus JSON
manifests and reports) under the configured output directory; rerunning a
command with the same config and seed produces byte-identical CSV bodies.

Exit codes: 0 success, 1 lemma-check failures, 2 config validation,
3 blow-up during solving, 4 convergence condition false without --force,
5 sweep underflow or too few coupling values.
"""

from __future__ import annotations

import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from .propagation import TimeGrid
from .series import bracket_ds
from .series import readout as readout_series
from .series import series as run_series
from .solver import BlowUp, TestFunction, dirac_test_function, energy, field_energy_norm, gaussian_field
from .solver import solve as solve_pde
from .spectral import (
    ModeArray,
    SpectralGrid,
    estimate_algebra_constant,
    evaluate_at,
    random_band_limited,
)
from .storage import format_float, read_trajectory, write_report_csv, write_report_json, write_trajectory
from .trees import (
    DEFAULT_ENUMERATION_CAP,
    GrowSpec,
    enumerate_trees,
    graft,
    grow,
    leaf,
    leaf_count,
    signed_grow_sum,
    to_dyck,
)

DEFAULT_CONFIG = {
    "grid": {"L": 40.0, "Nx": 128, "m": 1.0, "q": 1, "dim": 1},
    "time": {"T": 0.5, "s": 0.5, "nt": 512},
    "coupling": 0.2,
    "initial": {"type": "gaussian", "amplitude": 0.5, "width": 2.0, "center": 0.0},
    "test_function": {
        "type": "gaussian",
        "amplitude": 1.0,
        "width": 3.0,
        "center": 0.5,
        "slot": "both",
    },
    "max_order": 4,
    "seed": 0,
    "threads": 1,
    "out": "runs/desk",
}


class ConfigError(Exception):
    """Config validation failure; carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


def _get(section: dict, section_name: str, key: str, cast, default):
    raw = section.get(key, default)
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section_name}.{key}", str(exc)) from exc


@dataclass
class ExperimentConfig:
    dim: int
    extent: float
    modes: int
    mass: float
    sobolev_q: int
    window: float
    s: float
    nt: int
    coupling: object
    initial: dict
    test_function: dict
    max_order: int
    seed: int
    threads: int
    out: str

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        for name in ("grid", "time", "initial", "test_function"):
            if name in data and not isinstance(data[name], dict):
                raise ConfigError(name, "must be an object")
        grid = data.get("grid", {})
        time = data.get("time", {})
        dg, dt = DEFAULT_CONFIG["grid"], DEFAULT_CONFIG["time"]
        return cls(
            dim=_get(grid, "grid", "dim", int, dg["dim"]),
            extent=_get(grid, "grid", "L", float, dg["L"]),
            modes=_get(grid, "grid", "Nx", int, dg["Nx"]),
            mass=_get(grid, "grid", "m", float, dg["m"]),
            sobolev_q=_get(grid, "grid", "q", int, dg["q"]),
            window=_get(time, "time", "T", float, dt["T"]),
            s=_get(time, "time", "s", float, dt["s"]),
            nt=_get(time, "time", "nt", int, dt["nt"]),
            coupling=data.get("coupling", DEFAULT_CONFIG["coupling"]),
            initial={**DEFAULT_CONFIG["initial"], **data.get("initial", {})},
            test_function={**DEFAULT_CONFIG["test_function"], **data.get("test_function", {})},
            max_order=_get(data, "", "max_order", int, DEFAULT_CONFIG["max_order"]),
            seed=_get(data, "", "seed", int, DEFAULT_CONFIG["seed"]),
            threads=_get(data, "", "threads", int, DEFAULT_CONFIG["threads"]),
            out=str(data.get("out", DEFAULT_CONFIG["out"])),
        )

    def build_grid(self) -> SpectralGrid:
        try:
            return SpectralGrid(self.dim, self.extent, self.modes, self.mass, self.sobolev_q)
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from exc

    def build_tgrid(self) -> TimeGrid:
        try:
            tgrid = TimeGrid(self.window, self.nt)
        except ValueError as exc:
            raise ConfigError("time", str(exc)) from exc
        if self.s > self.window:
            raise ConfigError("time.s", f"s={self.s} exceeds the window T={self.window}")
        if not self.s > 0:
            raise ConfigError("time.s", f"s must be positive, got {self.s}")
        try:
            tgrid.node_index(self.s)
        except ValueError as exc:
            raise ConfigError("time.s", "s must coincide with a time-grid node") from exc
        return tgrid

    def coupling_list(self) -> list[float]:
        values = self.coupling if isinstance(self.coupling, (list, tuple)) else [self.coupling]
        try:
            return [float(v) for v in values]
        except (TypeError, ValueError) as exc:
            raise ConfigError("coupling", str(exc)) from exc

    def coupling_scalar(self) -> float:
        values = self.coupling_list()
        if len(values) != 1:
            raise ConfigError("coupling", "this command needs a single coupling value")
        return values[0]

    def validate(self) -> None:
        self.build_grid()
        self.build_tgrid()
        self.coupling_list()
        if not 0 <= self.max_order <= DEFAULT_ENUMERATION_CAP:
            raise ConfigError(
                "max_order", f"must be between 0 and {DEFAULT_ENUMERATION_CAP}"
            )
        if self.threads < 1:
            raise ConfigError("threads", "must be at least 1")
        if self.initial.get("type") != "gaussian":
            raise ConfigError("initial.type", "only 'gaussian' initial data is supported")
        if not float(self.initial.get("width", 0)) > 0:
            raise ConfigError("initial.width", "must be positive")
        kind = self.test_function.get("type")
        if kind not in ("gaussian", "low-mode", "dirac"):
            raise ConfigError("test_function.type", f"unknown type {kind!r}")
        if kind == "gaussian":
            if self.test_function.get("slot", "both") not in ("both", "position", "velocity"):
                raise ConfigError("test_function.slot", "must be both, position, or velocity")
            if not float(self.test_function.get("width", 0)) > 0:
                raise ConfigError("test_function.width", "must be positive")
        if kind == "dirac":
            x0 = float(self.test_function.get("x0", self.extent / 2))
            if not 0 <= x0 < self.extent:
                raise ConfigError("test_function.x0", f"x0={x0} outside the grid [0, {self.extent})")
            if not float(self.test_function.get("width", 0)) > 0:
                raise ConfigError("test_function.width", "must be positive")

    def build_initial(self, grid: SpectralGrid):
        from .spectral import FieldSnapshot

        phi = gaussian_field(
            grid,
            float(self.initial["amplitude"]),
            float(self.initial["width"]),
            float(self.initial.get("center", 0.0)),
        )
        pi = ModeArray(grid, np.zeros(grid.shape, dtype=complex))
        return FieldSnapshot(0.0, phi, pi)

    def build_test_function(self, grid: SpectralGrid) -> TestFunction:
        spec = self.test_function
        kind = spec["type"]
        if kind == "gaussian":
            g = gaussian_field(
                grid,
                float(spec.get("amplitude", 1.0)),
                float(spec["width"]),
                float(spec.get("center", 0.0)),
            )
            zero = ModeArray(grid, np.zeros(grid.shape, dtype=complex))
            slot = spec.get("slot", "both")
            if slot == "position":
                return TestFunction(g, zero)
            if slot == "velocity":
                return TestFunction(zero, g)
            return TestFunction(g, g)
        if kind == "low-mode":
            rng = np.random.default_rng(self.seed)
            kmax = int(spec.get("kmax", 8))
            amp = float(spec.get("amplitude", 1.0))
            psi0 = random_band_limited(grid, rng, kmax)
            psi1 = random_band_limited(grid, rng, kmax)
            psi0.values *= amp
            psi1.values *= amp
            return TestFunction(psi0, psi1)
        return dirac_test_function(
            grid,
            float(spec.get("x0", self.extent / 2)),
            float(spec["width"]),
            spec.get("which", "velocity"),
        )


def _load_config(path: str, max_order=None, seed=None, out=None, threads=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
    cfg = ExperimentConfig.from_dict(data)
    if max_order is not None:
        cfg.max_order = max_order
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    if threads is not None:
        cfg.threads = threads
    cfg.validate()
    return cfg


def _fail(code: int, message: str):
    click.echo(message, err=True)
    sys.exit(code)


def _config_errors(func):
    """Map ConfigError raised inside a command to exit code 2."""

    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            _fail(2, str(exc))

    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


@click.group(
    epilog="Default configuration (JSON):\n\n\b\n" + json.dumps(DEFAULT_CONFIG, indent=2)
)
def main():
    """Reconstruct the linear Klein-Gordon charge from a single time slice.

    Commands read one JSON config (see the epilog for every default) and
    write CSV/JSON outputs under the configured directory.
    """


_config_opt = click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
_out_opt = click.option("--out", default=None, help="Override the output directory.")
_max_order_opt = click.option("--max-order", type=int, default=None, help="Override max_order.")
_seed_opt = click.option("--seed", type=int, default=None, help="Override the seed.")
_threads_opt = click.option("--threads", type=int, default=None, help="Cap worker threads.")


def _trajectory_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out) / "trajectory"


def _read_matching_trajectory(cfg: ExperimentConfig):
    tdir = _trajectory_dir(cfg)
    if not (tdir / "manifest.json").exists():
        raise ConfigError("out", f"no trajectory found under {tdir}; run solve first")
    traj = read_trajectory(tdir)
    if traj.grid != cfg.build_grid():
        raise ConfigError("grid", "stored trajectory was produced with a different grid")
    if traj.tgrid != cfg.build_tgrid():
        raise ConfigError("time", "stored trajectory was produced with a different time grid")
    return traj


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_config_errors
def solve(config_path, out, seed):
    """Integrate the field equation and store the trajectory."""
    cfg = _load_config(config_path, seed=seed, out=out)
    grid = cfg.build_grid()
    tgrid = cfg.build_tgrid()
    initial = cfg.build_initial(grid)
    coupling = cfg.coupling_scalar()
    try:
        traj = solve_pde(initial, coupling, tgrid)
    except BlowUp as exc:
        _fail(3, f"blow-up: {exc}")
    energies = [energy(s, coupling) for s in traj.snapshots]
    drift = max(abs(e - energies[0]) for e in energies) / max(1.0, abs(energies[0]))
    write_trajectory(
        _trajectory_dir(cfg),
        traj,
        {
            "seed": cfg.seed,
            "energy_drift": drift,
            "created": datetime.now(timezone.utc).isoformat(),
        },
    )
    click.echo(f"wrote {tgrid.nnodes} snapshots to {_trajectory_dir(cfg)} (energy drift {drift:.3e})")


@main.command()
@_config_opt
@_out_opt
@_max_order_opt
@click.option("--force", is_flag=True, help="Run even if the convergence condition fails.")
@_config_errors
def transport(config_path, out, max_order, force):
    """Sum the tree series at s and compare with the charge at t=0."""
    cfg = _load_config(config_path, max_order=max_order, out=out)
    traj = _read_matching_trajectory(cfg)
    grid = traj.grid
    psi = cfg.build_test_function(grid)
    target = bracket_ds(psi, traj.node(0))
    snap = traj.node(traj.tgrid.node_index(cfg.s))
    report = run_series(
        psi,
        snap,
        traj.coupling,
        traj.tgrid,
        cfg.max_order,
        target=target,
        window=cfg.window,
        c_q=estimate_algebra_constant(grid),
        phi_e_norm=field_energy_norm(traj),
    )
    if not report.condition_ok:
        if not force:
            _fail(
                4,
                "convergence condition is false for this run; rerun with --force to proceed",
            )
        report.meta["forced"] = True
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(out_dir / "report.json", report)
    write_report_csv(out_dir / "report.csv", report)
    for term, residual in zip(report.per_order, report.residuals):
        click.echo(
            f"order {term.order}: {term.tree_count} trees, partial sum residual {residual:.3e}"
        )
    click.echo(f"radius bound {report.radius_bound:.6f}, condition_ok {report.condition_ok}")


@main.command()
@_config_opt
@_out_opt
@_max_order_opt
@_seed_opt
@_threads_opt
@_config_errors
def sweep(config_path, out, max_order, seed, threads):
    """Solve and transport across a coupling list; fit residual slopes."""
    cfg = _load_config(config_path, max_order=max_order, seed=seed, out=out, threads=threads)
    couplings = cfg.coupling_list()
    if len(couplings) < 3:
        _fail(5, f"sweep needs at least 3 coupling values, got {len(couplings)}")
    grid = cfg.build_grid()
    tgrid = cfg.build_tgrid()
    initial = cfg.build_initial(grid)
    psi = cfg.build_test_function(grid)
    c_q = estimate_algebra_constant(grid)

    def one(coupling: float):
        traj = solve_pde(initial, coupling, tgrid)
        target = bracket_ds(psi, traj.node(0))
        snap = traj.node(tgrid.node_index(cfg.s))
        return run_series(
            psi,
            snap,
            coupling,
            tgrid,
            cfg.max_order,
            target=target,
            window=cfg.window,
            c_q=c_q,
            phi_e_norm=field_energy_norm(traj),
        )

    try:
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                reports = list(pool.map(one, couplings))
        else:
            reports = [one(c) for c in couplings]
    except BlowUp as exc:
        _fail(3, f"blow-up: {exc}")
    for coupling, report in zip(couplings, reports):
        for order, residual in enumerate(report.residuals):
            if residual < 1e-14:
                _fail(
                    5,
                    f"residual underflow at coupling {coupling}, order {order}: "
                    f"{residual:.3e} is below 1e-14, slope fit unreliable",
                )
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep_residuals.csv", "w", newline="") as fh:
        fh.write("coupling,order,residual,partial_sum\n")
        for coupling, report in zip(couplings, reports):
            for term, partial in zip(report.per_order, report.partial_sums):
                fh.write(
                    f"{format_float(coupling)},{term.order},"
                    f"{format_float(report.residuals[term.order])},{format_float(partial)}\n"
                )
    log_l = np.log(np.abs(couplings))
    with open(out_dir / "sweep_slopes.csv", "w", newline="") as fh:
        fh.write("order,slope\n")
        for order in range(cfg.max_order + 1):
            log_r = np.log([report.residuals[order] for report in reports])
            slope = np.polyfit(log_l, log_r, 1)[0]
            fh.write(f"{order},{format_float(slope)}\n")
            click.echo(f"order {order}: residual slope {slope:.3f}")


@main.command("lemma-check")
@click.option("--max-leaves", type=int, default=8, show_default=True, help="Largest leaf count checked.")
def lemma_check(max_leaves):
    """Exhaustively verify the signed-growth and leaf-count identities."""
    if not 1 <= max_leaves <= 8:
        _fail(2, "config field 'max-leaves': must be between 1 and 8")
    cherry = graft(leaf(), leaf())
    failures = 0
    for beta in range(2, max_leaves + 1):
        trees = enumerate_trees(beta - 1)
        signed_ok = all(signed_grow_sum(b) == 0 for b in trees)
        grow_ok = True
        specs_checked = 0
        for a in trees:
            n = leaf_count(a)
            if n + 1 > max_leaves:
                continue
            for entries in itertools.product((leaf(), cherry), repeat=n):
                spec = GrowSpec(entries)
                grow_ok = grow_ok and leaf_count(grow(spec, a)) == n + spec.n_y
                specs_checked += 1
        if not (signed_ok and grow_ok):
            failures += 1
        click.echo(
            f"beta={beta} trees={len(trees)} "
            f"signed_sum={'PASS' if signed_ok else 'FAIL'} "
            f"grow_identity={'PASS' if grow_ok else 'FAIL'} ({specs_checked} growths)"
        )
    if max_leaves < 2:
        click.echo("no trees with beta >= 2 in range; vacuous PASS")
    if failures:
        _fail(1, f"{failures} leaf-count class(es) failed")
    click.echo("all checks passed")


@main.command()
@_config_opt
@_out_opt
@_max_order_opt
@_config_errors
def readout(config_path, out, max_order):
    """Recover phi and its time derivative at (t=0, x0) from the slice at s."""
    cfg = _load_config(config_path, max_order=max_order, out=out)
    if cfg.test_function.get("type") != "dirac":
        raise ConfigError("test_function.type", "readout needs a dirac test-function spec")
    traj = _read_matching_trajectory(cfg)
    x0 = float(cfg.test_function.get("x0", cfg.extent / 2))
    width = float(cfg.test_function["width"])
    phi_est, dtphi_est = readout_series(traj, cfg.s, x0, width, cfg.max_order)
    first = traj.node(0)
    phi_true = evaluate_at(first.phi, x0)
    dtphi_true = evaluate_at(first.pi, x0)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "readout.csv", "w", newline="") as fh:
        fh.write("x0,phi_true,phi_est,dtphi_true,dtphi_est,phi_abs_err,dtphi_abs_err\n")
        fh.write(
            ",".join(
                format_float(v)
                for v in (
                    x0,
                    phi_true,
                    phi_est,
                    dtphi_true,
                    dtphi_est,
                    abs(phi_est - phi_true),
                    abs(dtphi_est - dtphi_true),
                )
            )
            + "\n"
        )
    click.echo(
        f"phi(0,{x0}) = {phi_est:.6f} (true {phi_true:.6f}), "
        f"d/dt phi(0,{x0}) = {dtphi_est:.6f} (true {dtphi_true:.6f})"
    )


@main.command("enumerate")
@click.option("--max-order", type=int, default=6, show_default=True, help="Largest order listed.")
@_out_opt
def enumerate_cmd(max_order, out):
    """List every tree up to an order as (order, dyck) CSV rows."""
    if not 0 <= max_order <= DEFAULT_ENUMERATION_CAP:
        _fail(2, f"config field 'max-order': must be between 0 and {DEFAULT_ENUMERATION_CAP}")
    lines = ["order,dyck"]
    counts = []
    for order in range(max_order + 1):
        forest = enumerate_trees(order)
        counts.append(len(forest))
        for b in forest:
            lines.append(f"{order},{to_dyck(b)}")
    body = "\n".join(lines) + "\n"
    if out is None:
        click.echo(body, nl=False)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(body)
        click.echo(f"orders 0..{max_order}: counts {counts}; wrote {out}")


if __name__ == "__main__":
    main()
