"""Experiment orchestration: config parsing, the run registry, CSV/JSON
emission and pass/fail validation.

A run is described by one TOML file with sections mirroring the domain
types key for key:

    [grid]        max_mode, pad_factor
    [equation]    p, sign, gamma, forcing (list of [k, re, im])
    [stepper]     dt, scheme, record_every
    [experiment]  command-specific keys (see the command functions)
    [constants]   c_B, c_C, r_comp, gap
    [output]      label (optional)

Each run writes <out>/<run_id>/ with a manifest.json and schema-checked
CSVs; run_id is a content hash of the config and code version, so
re-running an identical config lands in the same directory with
byte-identical CSV bodies (timing fields aside).

Exit status: 0 all validations passed, 1 a numerical validation failed
or the run blew up, 2 the config is malformed (the offending field path
is printed).
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .attractor import (
    ForcedRunConfig,
    absorbing_sweep,
    energy_dissipation_residual,
    global_smoothing_check,
    mass_dissipation_residual,
    member_series,
    relative_residual,
    sweep_series,
)
from .diagnostics import DiagnosticSeries, write_csv
from .dynamics import (
    BlowUpError,
    ConfigurationError,
    EquationParams,
    StepperConfig,
    energy,
    evolve,
    mass,
    write_snapshots,
)
from .resonance import CaseConstants, verify_decomposition
from .smoothing import (
    random_sobolev_data,
    smoothing_difference,
    smoothing_difference_field,
    smoothing_refinement,
)
from .spectral import GridSpec, SpectralField, sobolev_norm


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"config error at {path}: {message}")
        self.path = path


def _get(cfg: dict, section: str, key: str, default=None, required=False):
    table = cfg.get(section, {})
    if key not in table:
        if required:
            raise ConfigError(f"{section}.{key}", "missing required key")
        return default
    return table[key]


def _field_from_modes(grid: GridSpec, triples, path: str) -> SpectralField:
    out = SpectralField.zeros(grid)
    for i, triple in enumerate(triples):
        if len(triple) != 3:
            raise ConfigError(f"{path}[{i}]", "expected [k, re, im]")
        k, re, im = triple
        if abs(int(k)) > grid.max_mode:
            raise ConfigError(f"{path}[{i}]", f"mode {k} outside window K={grid.max_mode}")
        out.coeffs[int(k) + grid.max_mode] = float(re) + 1j * float(im)
    return out


def parse_p(cfg: dict) -> int:
    p = _get(cfg, "equation", "p", 5)
    if not isinstance(p, int) or p < 3 or p % 2 == 0:
        raise ConfigError("equation.p", f"must be an odd integer >= 3, got {p!r}")
    return p


def parse_grid(cfg: dict, p: int) -> GridSpec:
    k_max = _get(cfg, "grid", "max_mode", required=True)
    if not isinstance(k_max, int) or k_max < 1:
        raise ConfigError("grid.max_mode", f"must be a positive integer, got {k_max!r}")
    pad = _get(cfg, "grid", "pad_factor", (p + 1) / 2.0)
    grid = GridSpec(k_max, float(pad))
    if not grid.supports_power(p):
        raise ConfigError("grid.pad_factor", f"{pad} < (p+1)/2 = {(p + 1) / 2}")
    return grid


def parse_equation(cfg: dict, grid: GridSpec) -> EquationParams:
    p = parse_p(cfg)
    sign_word = _get(cfg, "equation", "sign", "defocusing")
    if sign_word not in ("focusing", "defocusing"):
        raise ConfigError("equation.sign", f"must be focusing|defocusing, got {sign_word!r}")
    gamma = float(_get(cfg, "equation", "gamma", 0.0))
    if gamma < 0:
        raise ConfigError("equation.gamma", f"must be >= 0, got {gamma}")
    forcing_spec = _get(cfg, "equation", "forcing")
    forcing = None
    if forcing_spec is not None:
        forcing = _field_from_modes(grid, forcing_spec, "equation.forcing")
    try:
        return EquationParams(
            p=p, sign=+1 if sign_word == "focusing" else -1, gamma=gamma, forcing=forcing
        )
    except ConfigurationError as exc:
        raise ConfigError("equation", str(exc))


def parse_stepper(cfg: dict) -> StepperConfig:
    dt = _get(cfg, "stepper", "dt", required=True)
    scheme = _get(cfg, "stepper", "scheme", "exponential_rk4")
    record_every = _get(cfg, "stepper", "record_every", 1)
    try:
        return StepperConfig(float(dt), scheme, int(record_every))
    except ConfigurationError as exc:
        raise ConfigError("stepper", str(exc))


def parse_constants(cfg: dict) -> CaseConstants:
    table = cfg.get("constants", {})
    try:
        return CaseConstants(
            c_B=float(table.get("c_B", CaseConstants.c_B)),
            c_C=float(table.get("c_C", CaseConstants.c_C)),
            r_comp=float(table.get("r_comp", CaseConstants.r_comp)),
            gap=float(table.get("gap", CaseConstants.gap)),
        )
    except ValueError as exc:
        raise ConfigError("constants", str(exc))


def parse_initial(cfg: dict, grid: GridSpec, seed_override) -> SpectralField:
    spec = _get(cfg, "experiment", "initial", required=True)
    kind = spec.get("type")
    if kind == "plane_wave":
        return SpectralField.plane_wave(
            grid, int(spec.get("mode", 1)), float(spec.get("amplitude", 1.0))
        )
    if kind == "random_sobolev":
        seed = int(spec.get("seed", 0)) if seed_override is None else seed_override
        u0 = random_sobolev_data(
            float(spec.get("s", 0.6)), float(spec.get("delta_rough", 0.05)), seed, grid
        )
        target = spec.get("norm")
        if target is not None:
            u0 = (float(target) / sobolev_norm(u0, float(spec.get("s", 0.6)))) * u0
        return u0
    if kind == "modes":
        return _field_from_modes(grid, spec.get("modes", []), "experiment.initial.modes")
    raise ConfigError("experiment.initial.type",
                      f"must be plane_wave|random_sobolev|modes, got {kind!r}")


# ----------------------------------------------------------------------
# run registry
# ----------------------------------------------------------------------

def run_id_for(config: dict) -> str:
    blob = json.dumps({"config": config, "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class RunContext:
    def __init__(self, config: dict, command: str, out_dir: Path, threads: int):
        self.config = config
        self.command = command
        self.threads = max(1, threads)
        self.run_id = run_id_for(config)
        self.dir = out_dir / self.run_id
        self.dir.mkdir(parents=True, exist_ok=True)
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.outputs: list[str] = []
        self.validation: dict[str, dict] = {}

    def emit(self, series: DiagnosticSeries, name: str) -> None:
        write_csv(series, self.dir / name)
        self.outputs.append(name)

    def check(self, name: str, passed: bool, value: float) -> None:
        self.validation[name] = {"passed": bool(passed), "value": float(value)}

    def map_ordered(self, fn, items):
        if self.threads == 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def finish(self) -> int:
        manifest = {
            "run_id": self.run_id,
            "command": self.command,
            "code_version": __version__,
            "config": self.config,
            "started": self.started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "outputs": self.outputs,
            "validation": self.validation,
        }
        tmp = self.dir / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.dir / "manifest.json")
        ok = all(v["passed"] for v in self.validation.values())
        for name, v in sorted(self.validation.items()):
            print(f"  [{'PASS' if v['passed'] else 'FAIL'}] {name} = {v['value']:.6g}")
        print(f"run {self.run_id}: {'ok' if ok else 'FAILED'} -> {self.dir}")
        return 0 if ok else 1


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "H1_u", "mass", "energy", "theta")


def cmd_simulate(ctx: RunContext, seed_override) -> int:
    cfg = ctx.config
    grid = parse_grid(cfg, parse_p(cfg))
    params = parse_equation(cfg, grid)
    stepper = parse_stepper(cfg)
    t_end = float(_get(cfg, "experiment", "t_end", required=True))
    u0 = parse_initial(cfg, grid, seed_override)

    try:
        traj = evolve(u0, params, stepper, t_end)
    except BlowUpError as exc:
        ctx.check("no_blowup", False, exc.time)
        return ctx.finish()
    ctx.check("no_blowup", True, t_end)

    series = DiagnosticSeries(TRAJECTORY_COLUMNS)
    for i, (t, u) in enumerate(traj):
        series.append(t, sobolev_norm(u, 1.0), mass(u), energy(u, params),
                      traj.thetas[i])
    ctx.emit(series, "trajectory.csv")
    write_snapshots(traj, ctx.dir / "snapshots.bin")
    ctx.outputs.append("snapshots.bin")

    if params.conservative:
        m = series.column("mass")
        drift = max(abs(v - m[0]) for v in m) / m[0]
        ctx.check("mass_conservation_rel", drift <= 1e-8, drift)
    elif params.forcing is None:
        m = series.column("mass")
        t = series.column("t")
        worst = max(
            abs(mv - m[0] * np.exp(-2 * params.gamma * tv)) / m[0]
            for mv, tv in zip(m, t)
        )
        ctx.check("mass_decay_law_rel", worst <= 1e-8, worst)

    init = _get(cfg, "experiment", "initial", {})
    if init.get("type") == "plane_wave" and params.conservative:
        amp = float(init.get("amplitude", 1.0))
        mode = int(init.get("mode", 1))
        omega = params.sign * amp ** (params.p - 1) - mode * mode
        want = amp * np.exp(1j * omega * traj.times[-1])
        err = abs(traj.final.coeff(mode) - want)
        ctx.check("plane_wave_phase_error", err < 1e-8, err)
    return ctx.finish()


DECOMPOSITION_COLUMNS = ("box", "p", "c_B", "c_C", "r_comp", "gap",
                         "violations", "min_ratio", "wall_time_ms")


def cmd_resonance(ctx: RunContext, seed_override) -> int:
    cfg = ctx.config
    box = _get(cfg, "experiment", "box", required=True)
    p = _get(cfg, "experiment", "p", 5)
    constants = parse_constants(cfg)
    report = verify_decomposition(int(box), int(p), constants)
    series = DiagnosticSeries(DECOMPOSITION_COLUMNS)
    series.append(report.box, report.p, constants.c_B, constants.c_C,
                  constants.r_comp, constants.gap, report.violations,
                  report.min_ratio if report.min_ratio is not None else -1.0,
                  report.wall_time_ms)
    ctx.emit(series, "decomposition.csv")
    ctx.check("lemma_violations", report.violations == 0, report.violations)
    if report.min_ratio is not None:
        ctx.check("min_ratio_exceeds_cB", report.min_ratio > constants.c_B,
                  report.min_ratio)
    if report.examples:
        (ctx.dir / "violations.json").write_text(
            json.dumps(report.examples, indent=1) + "\n")
        ctx.outputs.append("violations.json")
    return ctx.finish()


SPECTRUM_COLUMNS = ("k", "abs_u", "abs_D")
REFINEMENT_COLUMNS = ("seed", "d_coarse", "d_fine", "lin_coarse", "lin_fine",
                      "ratio_N16", "ratio_N32", "ratio_N64", "ratio_N128",
                      "slope_D", "theta_end")


def cmd_smoothing(ctx: RunContext, seed_override) -> int:
    cfg = ctx.config
    p = parse_p(cfg)
    grid = parse_grid(cfg, p)
    stepper = parse_stepper(cfg)
    exp = cfg.get("experiment", {})
    s = float(exp.get("s", 0.6))
    eps = float(exp.get("epsilon", 0.3))
    delta = float(exp.get("delta_rough", 0.05))
    seeds = [int(v) for v in exp.get("seeds", [0])]
    if seed_override is not None:
        seeds = [seed_override + i for i in range(len(seeds))]
    k_coarse = int(exp.get("k_coarse", grid.max_mode // 2))
    t_end = float(exp.get("t_end", 0.5))

    rows = ctx.map_ordered(
        lambda seed: smoothing_refinement(
            [seed], s=s, eps=eps, k_coarse=k_coarse, k_fine=grid.max_mode,
            p=p, t_end=t_end, dt=stepper.dt, delta_rough=delta,
        )[0],
        seeds,
    )
    table = DiagnosticSeries(REFINEMENT_COLUMNS)
    for r in rows:
        table.append(r.seed, r.d_coarse, r.d_fine, r.lin_coarse, r.lin_fine,
                     *r.band_ratios, r.slope_d, r.theta_end)
    ctx.emit(table, "refinement.csv")

    # time series and final spectrum for the first seed, for the plots
    params = EquationParams(p=p, sign=-1)
    u0 = random_sobolev_data(s, delta, seeds[0], grid)
    u0 = (1.0 / sobolev_norm(u0, s)) * u0
    traj = evolve(u0, params, stepper, t_end)
    ctx.emit(smoothing_difference(traj, u0, s, eps), "smoothing_series.csv")
    d_final = smoothing_difference_field(traj, u0, len(traj) - 1)
    spectrum = DiagnosticSeries(SPECTRUM_COLUMNS)
    for j, k in enumerate(range(-grid.max_mode, grid.max_mode + 1)):
        spectrum.append(k, abs(traj.final.coeffs[j]), abs(d_final.coeffs[j]))
    ctx.emit(spectrum, "spectrum.csv")

    stability = float(np.median([abs(r.d_fine - r.d_coarse) / r.d_coarse for r in rows]))
    growth = float(np.median([r.lin_fine / r.lin_coarse - 1.0 for r in rows]))
    ratios = np.median(np.asarray([r.band_ratios for r in rows]), axis=0)
    monotone = bool(np.all(ratios[1:] <= 1.2 * ratios[:-1]))
    ctx.check("difference_norm_stable", stability <= 0.10, stability)
    ctx.check("linear_norm_grows", growth >= 0.15, growth)
    ctx.check("band_ratios_decreasing", monotone, float(ratios[-1] / ratios[0]))
    return ctx.finish()


RESIDUAL_ORDER_COLUMNS = ("dt", "mass_residual_rel", "energy_residual_rel")


def cmd_attractor(ctx: RunContext, seed_override) -> int:
    cfg = ctx.config
    mode = _get(cfg, "experiment", "mode", required=True)
    if mode == "absorbing":
        return _attractor_absorbing(ctx, seed_override)
    if mode == "dissipation":
        return _attractor_dissipation(ctx)
    if mode == "global_smoothing":
        return _attractor_global(ctx, seed_override)
    raise ConfigError("experiment.mode",
                      f"must be absorbing|dissipation|global_smoothing, got {mode!r}")


def _attractor_absorbing(ctx: RunContext, seed_override) -> int:
    cfg = ctx.config
    grid = parse_grid(cfg, parse_p(cfg))
    params = parse_equation(cfg, grid)
    exp = cfg.get("experiment", {})
    scales = [float(v) for v in exp.get("scales", [1.0, 5.0, 10.0])]
    profile_spec = exp.get("profile", [[1, 1.0, 0.0], [2, 0.4, 0.0], [-1, 0.2, 0.0]])
    profile = _field_from_modes(grid, profile_spec, "experiment.profile")
    base = sobolev_norm(profile, 1.0)
    members = [(scale / base) * profile for scale in scales]
    config = ForcedRunConfig(
        params=params,
        members=members,
        horizon=float(exp.get("horizon", 30.0)),
        dt=float(_get(cfg, "stepper", "dt", 1e-3)),
        transient_time=float(exp.get("transient_time", 3.0)),
        transient_dt=float(exp.get("transient_dt", 5e-5)),
        record_dt=float(exp.get("record_dt", 0.1)),
    )
    report = absorbing_sweep(config)
    ctx.emit(sweep_series(report), "sweep.csv")
    for row in report.rows:
        if row.trajectory is not None:
            ctx.emit(member_series(row.trajectory, params, members[row.member_id]),
                     f"member_{row.member_id}.csv")
    ctx.check("no_member_flagged", not any(r.flags for r in report.rows),
              sum(1 for r in report.rows if r.flags))
    ctx.check("longtime_maxima_agree", report.spread <= 0.05, report.spread)
    ctx.check("absorbing_radius", np.isfinite(report.r_star), report.r_star)
    return ctx.finish()


def _attractor_dissipation(ctx: RunContext) -> int:
    cfg = ctx.config
    grid = parse_grid(cfg, parse_p(cfg))
    params = parse_equation(cfg, grid)
    exp = cfg.get("experiment", {})
    dts = [float(v) for v in exp.get("dts", [2e-4, 1e-4])]
    t_end = float(exp.get("t_end", 0.05))
    u0 = parse_initial(cfg, grid, None)

    def residuals(dt):
        traj = evolve(u0, params, StepperConfig(dt, "exponential_rk4", 1), t_end,
                      track_phase=False)
        return (relative_residual(mass_dissipation_residual(traj, params)),
                relative_residual(energy_dissipation_residual(traj, params)))

    pairs = ctx.map_ordered(residuals, dts)
    table = DiagnosticSeries(RESIDUAL_ORDER_COLUMNS)
    for dt, (mr, er) in zip(dts, pairs):
        table.append(dt, mr, er)
    ctx.emit(table, "residual_order.csv")

    mr_t, er_t = pairs[-1]
    ctx.check("mass_residual_rel", mr_t <= 1e-6, mr_t)
    ctx.check("energy_residual_rel", er_t <= 1e-6, er_t)
    if len(dts) >= 2:
        order_m = np.log(pairs[0][0] / pairs[-1][0]) / np.log(dts[0] / dts[-1])
        order_e = np.log(pairs[0][1] / pairs[-1][1]) / np.log(dts[0] / dts[-1])
        ctx.check("mass_residual_order", order_m >= 1.9, order_m)
        ctx.check("energy_residual_order", order_e >= 1.9, order_e)

    # decay-law cross check with the forcing removed
    free_params = EquationParams(p=params.p, sign=params.sign, gamma=params.gamma)
    traj = evolve(u0, free_params, StepperConfig(dts[-1], "exponential_rk4", 10), t_end,
                  track_phase=False)
    m0 = mass(u0)
    worst = max(
        abs(mass(u) - m0 * np.exp(-2 * params.gamma * t)) / m0 for t, u in traj
    )
    ctx.check("decay_law_rel", worst <= 1e-8, worst)
    return ctx.finish()


def _attractor_global(ctx: RunContext, seed_override) -> int:
    cfg = ctx.config
    grid = parse_grid(cfg, parse_p(cfg))
    params = parse_equation(cfg, grid)
    stepper = parse_stepper(cfg)
    exp = cfg.get("experiment", {})
    horizon = float(exp.get("horizon", 20.0))
    eps = float(exp.get("epsilon", 0.3))
    window = float(exp.get("window", 0.5))
    u0 = parse_initial(cfg, grid, seed_override)

    traj = evolve(u0, params, stepper, horizon)
    series, windows = global_smoothing_check(traj, u0, params.gamma, eps, window)
    ctx.emit(series, "global_smoothing.csv")
    ctx.emit(windows, "windows.csv")

    t = np.asarray(series.column("t"))
    rm = np.asarray(series.column("running_max"))
    half = rm[t >= horizon / 2.0]
    growth = float(rm[-1] / half[0] - 1.0)
    ctx.check("running_max_plateaus", growth < 0.02, growth)
    bad = sum(1 for row in windows.rows if row[4] > row[3] + 1e-9)
    ctx.check("telescoping_bound_holds", bad == 0, bad)
    return ctx.finish()


def cmd_report(out_dir: Path) -> int:
    rows = []
    for manifest_path in sorted(out_dir.glob("*/manifest.json")):
        data = json.loads(manifest_path.read_text())
        for name, v in sorted(data.get("validation", {}).items()):
            rows.append((data["run_id"], data["command"], name,
                         1.0 if v["passed"] else 0.0, v["value"]))
    summary_lines = ["run_id,command,check,passed,value"]
    all_ok = True
    for rid, command, name, passed, value in rows:
        summary_lines.append(f"{rid},{command},{name},{int(passed)},{value!r}")
        all_ok = all_ok and passed == 1.0
        print(f"{rid}  {command:<10} {name:<28} {'PASS' if passed else 'FAIL'} ({value:.6g})")
    (out_dir / "summary.csv").write_text("\n".join(summary_lines) + "\n")
    print(f"{len(rows)} checks, {'all passed' if all_ok else 'FAILURES PRESENT'}")
    return 0 if all_ok else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "resonance": cmd_resonance,
    "smoothing": cmd_smoothing,
    "attractor": cmd_attractor,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusnls",
        description="Pseudospectral experiments for the odd-power Schrodinger "
                    "family on the torus.",
    )
    parser.add_argument("command", choices=[*COMMANDS, "report"])
    parser.add_argument("--config", type=Path, help="TOML experiment description")
    parser.add_argument("--out", type=Path, default=Path("runs"), help="run registry root")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)

    if args.command == "report":
        return cmd_report(args.out)

    if args.config is None:
        print("config error at --config: a config file is required", file=sys.stderr)
        return 2
    try:
        config = tomllib.loads(args.config.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"config error at {args.config}: {exc}", file=sys.stderr)
        return 2

    try:
        ctx = RunContext(config, args.command, args.out, args.threads)
        return COMMANDS[args.command](ctx, args.seed_override)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
