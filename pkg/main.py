"""
Command-line entry point for the nuclear forward scattering switching simulator.

Subcommands: simulate, design, scan, entangle. Each reads a JSON scenario file
(--config) and writes its results into an output directory (--out).
"""

import argparse
import asyncio
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from angular import build_level_scheme, default_hyperfine, g_factors
from config import settings
from exceptions import ConfigError, DesignError, NFSError
from models import (
    BellSettings, Geometry, HyperfineConfig, InterferometerConfig, LineOverride, NuclearConstants,
    PolarizationTarget, RotationSpec, SampleConfig, ScenarioConfig, SwitchDesign, SwitchingEvent,
    SwitchSequence, TimeGrid, WindowSpec,
)
from photonics import photonics_service
from scattering import ScatteringService
from switching import BACK_TO_Z, BEAM_PARALLEL, SwitchingService, in_plane_rotation

logger = logging.getLogger(__name__)


def load_config(path: Path) -> ScenarioConfig:
    """Parse and validate a scenario file"""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"{path}: {location}: {first['msg']}") from exc


def build_services(cfg: ScenarioConfig) -> Tuple[SwitchingService, ScatteringService]:
    """Level scheme, geometry and constants from the scenario"""
    hf = cfg.hyperfine
    g_g, g_e = g_factors(hf.mu_ground_nm, hf.mu_excited_nm)
    if hf.override_lines is not None:
        overrides = [LineOverride(**line.model_dump()) for line in hf.override_lines]
        hyperfine = HyperfineConfig(field_magnitude_tesla=hf.field_tesla or 0.0, g_factor_ground=g_g,
                                    g_factor_excited=g_e, override_frequencies=overrides)
    elif hf.field_tesla is not None:
        hyperfine = HyperfineConfig(field_magnitude_tesla=hf.field_tesla, g_factor_ground=g_g, g_factor_excited=g_e)
    else:
        omega0 = math.pi / (2 * hf.first_beat_minimum_ns * 1e-9)
        hyperfine = default_hyperfine(omega0, hf.mu_ground_nm, hf.mu_excited_nm)

    try:
        geometry = Geometry(k_direction=cfg.geometry.k_direction,
                            incident_polarization=cfg.geometry.incident_polarization,
                            quantization_axis=cfg.geometry.quantization_axis)
    except ValidationError as exc:
        raise ConfigError(f"geometry: {exc.errors()[0]['msg']}") from exc
    constants = NuclearConstants(E0_ev=cfg.nuclear.transition_energy_ev, tau_s=cfg.nuclear.lifetime_ns * 1e-9,
                                 ic_ratio=cfg.nuclear.ic_ratio)
    switching = SwitchingService(build_level_scheme(hyperfine), geometry, constants)
    return switching, ScatteringService(switching)


def build_grid(cfg: ScenarioConfig) -> TimeGrid:
    try:
        return TimeGrid(t_start=cfg.grid.t_start_ns * 1e-9, t_end=cfg.grid.t_end_ns * 1e-9, dt=cfg.grid.dt_ns * 1e-9)
    except ValidationError as exc:
        raise ConfigError(f"grid: {exc.errors()[0]['msg']}") from exc


def explicit_sequence(cfg: ScenarioConfig) -> SwitchSequence:
    try:
        events = [SwitchingEvent(time=e.t_ns * 1e-9, field_axis=e.field_axis,
                                 rotation=RotationSpec.from_degrees(e.alpha_deg, e.beta_deg, e.gamma_deg))
                  for e in cfg.sequence.events]
        return SwitchSequence(events=tuple(events))
    except ValidationError as exc:
        raise ConfigError(f"sequence.events: {exc.errors()[0]['msg']}") from exc


def resolve_sequence(cfg: ScenarioConfig, switching: SwitchingService) -> Tuple[SwitchSequence, List[SwitchDesign]]:
    """Explicit events, optionally extended or replaced by a design request"""
    sequence = explicit_sequence(cfg)
    design = cfg.sequence.design
    if design is None:
        return sequence, []
    if design.kind == "four_switch":
        return switching.four_switch_plan(design.final_polarization)

    rotation = {"beam_parallel": BEAM_PARALLEL, "back_to_z": BACK_TO_Z,
                "in_plane": in_plane_rotation(design.in_plane_deg)}[design.rotation]
    state = switching.propagate(sequence)[-1]
    window = tuple(t * 1e-9 for t in design.window_ns) if design.window_ns else None
    candidates = switching.design_release_time(state, rotation, design.target, window)
    if not candidates:
        raise DesignError(f"no {design.target.value} switching time in window {design.window_ns} ns")
    chosen = switching.select_design(candidates)
    return SwitchSequence(events=sequence.events + (chosen.event,)), [chosen]


def residual_report(switching: SwitchingService, sequence: SwitchSequence) -> List[dict]:
    """Leftover-amplitude measures of every switch in the sequence, for each target"""
    states = switching.propagate(sequence)
    report = []
    for state, event in zip(states, sequence.events):
        entry = {"t_ns": event.time * 1e9}
        for target in PolarizationTarget:
            entry[target.value] = float(switching.residual_profile(state, event.rotation, event.time, target,
                                                                      event.field_axis)[0][0])
        report.append(entry)
    return report


def sequence_payload(sequence: SwitchSequence, designs: List[SwitchDesign]) -> dict:
    events = [{"t_ns": e.time * 1e9,
               "alpha_deg": math.degrees(e.rotation.euler_alpha),
               "beta_deg": math.degrees(e.rotation.euler_beta),
               "gamma_deg": math.degrees(e.rotation.euler_gamma),
               "field_axis": None if e.field_axis is None else list(e.field_axis)} for e in sequence.events]
    residuals = [{"t_ns": d.event.time * 1e9, "target": d.target.value, "residual": d.residual,
                  "complement": d.complement} for d in designs]
    return {"events": events, "residuals": residuals}


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def first_local_minimum(times: np.ndarray, values: np.ndarray) -> Optional[float]:
    interior = np.where((values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:]))[0]
    return float(times[interior[0] + 1]) if len(interior) else None


def run_simulation(cfg: ScenarioConfig, out_dir: Path) -> dict:
    """Series solution of one scenario; writes the intensity CSV and summary"""
    out_dir.mkdir(parents=True, exist_ok=True)
    switching, scattering = build_services(cfg)
    sequence, designs = resolve_sequence(cfg, switching)
    grid = build_grid(cfg)
    rec = scattering.solve_series(SampleConfig(xi=cfg.sample.xi, thickness_m=cfg.sample.thickness_m), sequence,
                                  grid, cfg.series.max_order, cfg.series.tol_rel)
    scattering.write_intensity_csv(rec, out_dir / cfg.output.intensity_csv)

    table = scattering.intensity_series(rec)
    minimum = first_local_minimum(table[:, 0], table[:, 1])
    first_order = np.sum(np.abs(rec.orders[0]) ** 2, axis=1)
    order_minimum = first_local_minimum(table[:, 0], first_order)
    summary = {
        "xi": cfg.sample.xi,
        "converged": rec.converged,
        "series_residual": rec.residual,
        "truncation_order": rec.truncation_order,
        "order_ratios": scattering.order_ratios(rec),
        "switch_times_ns": [t * 1e9 for t in rec.switch_times],
        "first_intensity_minimum_ns": None if minimum is None else minimum * 1e9,
        "first_order_minimum_ns": None if order_minimum is None else order_minimum * 1e9,
        "beat_minima_ns": [t * 1e9 for t in scattering.unperturbed_beat_minima(switching.scheme, 3)],
        "peak_intensity": float(np.max(table[:, 1])),
        "residual_report": residual_report(switching, sequence),
    }
    write_json(out_dir / cfg.output.summary_json, summary)
    if designs:
        write_json(out_dir / cfg.output.sequence_json, sequence_payload(sequence, designs))
    logger.info("Simulation xi=%g written to %s", cfg.sample.xi, out_dir)
    return summary


def cmd_simulate(config_path: Path, out_dir: Path) -> dict:
    return run_simulation(load_config(config_path), out_dir)


def cmd_design(config_path: Path, out_dir: Path) -> dict:
    """Design the requested switching sequence and write it with its residuals"""
    cfg = load_config(config_path)
    if cfg.sequence.design is None:
        raise ConfigError(f"{config_path}: sequence.design: a design request is required")
    switching, _ = build_services(cfg)
    sequence, designs = resolve_sequence(cfg, switching)
    payload = sequence_payload(sequence, designs)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / cfg.output.sequence_json, payload)
    return payload


async def _scan(cfg: ScenarioConfig, out_dir: Path) -> List[dict]:
    tasks = [asyncio.to_thread(run_simulation, cfg.model_copy(update={"sample": cfg.sample.model_copy(update={"xi": xi})}),
                               out_dir / f"xi_{xi:g}")
             for xi in cfg.scan.xi_values]
    results = await asyncio.gather(*tasks, return_exceptions=True)
    for xi, result in zip(cfg.scan.xi_values, results):
        if isinstance(result, Exception):
            logger.error("Scan point xi=%g failed: %s", xi, result)
            raise result
    return list(results)


def cmd_scan(config_path: Path, out_dir: Path) -> List[dict]:
    """The scenario repeated over scan.xi_values, one output directory per value"""
    cfg = load_config(config_path)
    if not cfg.scan.xi_values:
        raise ConfigError(f"{config_path}: scan.xi_values: at least one value is required")
    return asyncio.run(_scan(cfg, out_dir))


def mode_windows(cfg: ScenarioConfig, sequence: SwitchSequence, grid: TimeGrid) -> WindowSpec:
    """Configured windows, else (t2, t3) for pi and (t4, end) for sigma"""
    times = sequence.times
    sigma = cfg.windows.sigma_window_ns
    pi = cfg.windows.pi_window_ns
    if sigma is None or pi is None:
        if len(times) < 4:
            raise ConfigError("windows: give sigma_window_ns and pi_window_ns or a four-switch sequence")
        if sigma is None and times[3] >= grid.t_end:
            raise ConfigError(f"grid: t_end_ns must exceed the last switch at {times[3] * 1e9:.2f} ns")
    sigma_s = tuple(t * 1e-9 for t in sigma) if sigma else (times[3], grid.t_end)
    pi_s = tuple(t * 1e-9 for t in pi) if pi else (times[1], times[2])
    try:
        return WindowSpec(sigma_window=sigma_s, pi_window=pi_s)
    except ValidationError as exc:
        raise ConfigError(f"windows: {exc.errors()[0]['msg']}") from exc


def cmd_entangle(config_path: Path, out_dir: Path) -> dict:
    """Two-mode state of the switched emission and the Bell scan over it"""
    cfg = load_config(config_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    switching, scattering = build_services(cfg)
    sequence, designs = resolve_sequence(cfg, switching)
    grid = build_grid(cfg)
    windows = mode_windows(cfg, sequence, grid)
    rec = scattering.solve_series(SampleConfig(xi=cfg.sample.xi), sequence, grid,
                                  cfg.series.max_order, cfg.series.tol_rel)

    bell = cfg.bell
    state = photonics_service.extract_modes(rec, windows, cfg.nuclear.ic_ratio if bell.include_incoherent_loss else None)
    phases = photonics_service.optimal_settings(state)
    if None not in (bell.a_rad, bell.a_prime_rad, bell.b_rad, bell.b_prime_rad):
        phases = BellSettings(a=bell.a_rad, a_prime=bell.a_prime_rad, b=bell.b_rad, b_prime=bell.b_prime_rad)
    scan = photonics_service.bell_scan(state, phases)
    photonics_service.write_bell_csv(scan, out_dir / cfg.output.bell_csv)

    p_d1, p_d2 = photonics_service.detector_probabilities(
        state, InterferometerConfig(splitter_transmittance=bell.splitter_transmittance))
    summary = {
        "alpha_abs2": abs(state.alpha) ** 2,
        "beta_abs2": abs(state.beta) ** 2,
        "loss_fraction": state.loss_fraction,
        "visibility": photonics_service.visibility(state),
        "S": scan.s_value,
        "classical_bound": scan.classical_bound,
        "violates_classical_bound": scan.violates,
        "p_d1_zero_phase": p_d1,
        "p_d2_zero_phase": p_d2,
        "sigma_window_ns": [t * 1e9 for t in windows.sigma_window],
        "pi_window_ns": [t * 1e9 for t in windows.pi_window],
        "switch_times_ns": [t * 1e9 for t in sequence.times],
    }
    write_json(out_dir / cfg.output.summary_json, summary)
    if designs:
        write_json(out_dir / cfg.output.sequence_json, sequence_payload(sequence, designs))
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "design": cmd_design,
    "scan": cmd_scan,
    "entangle": cmd_entangle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Nuclear forward scattering with hyperfine-field switching")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        sub = commands.add_parser(name, help=handler.__doc__)
        sub.add_argument("--config", required=True, type=Path, help="JSON scenario file")
        sub.add_argument("--out", default=Path("out"), type=Path, help="output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.LOG_LEVEL.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args.config, args.out)
    except NFSError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
