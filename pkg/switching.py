"""
Hyperfine-field switching: amplitude propagation through rotations and design of switching times.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from angular import build_level_scheme, rotation_matrix, wigner_D_matrix
from config import settings
from currents import coupling, current_matrix, decay_exponents, frame_from_axis
from exceptions import DesignError, NFSInputError
from models import (
    AmplitudeSet, Geometry, LevelScheme, NuclearConstants, Polarization, PolarizationTarget,
    RotationSpec, SwitchDesign, SwitchingEvent, SwitchSequence, Vector3,
)

logger = logging.getLogger(__name__)

# Lab polarization axes for a beam along y
SIGMA_AXIS = np.array([1.0, 0.0, 0.0])
PI_AXIS = np.array([0.0, 0.0, 1.0])

# Field from z to the beam direction y, and from there back to z
BEAM_PARALLEL = RotationSpec.from_degrees(-90.0, -90.0, 0.0)
BACK_TO_Z = RotationSpec.from_degrees(0.0, 90.0, 0.0)


def in_plane_rotation(beta_deg: float) -> RotationSpec:
    """Rotation of the field by beta about y, staying in the plane perpendicular to the beam"""
    return RotationSpec.from_degrees(0.0, beta_deg, 0.0)


def two_switch_closed_form(dt: float, omega0: float, omega1: float, x: complex = 1.0) -> Dict[Tuple[int, int], complex]:
    """
    Coefficients of the six lines right after a beam-parallel switch at a suppression
    time followed, dt later, by the return to z.

    x is the coupling of the (1/2, 1/2) line; keys are (2m_g, 2m_e). The result is
    fixed up to one overall phase.
    """
    s = (math.sin(omega0 * dt) + 3 * math.sin(omega1 * dt)) * 1j * x / 4
    d = (3 * math.cos(omega1 * dt) - math.cos(omega0 * dt)) * x / 4
    f = -math.sqrt(3) * (math.cos(omega0 * dt) + math.cos(omega1 * dt)) * x / 4
    return {(1, 1): s, (-1, -1): -s, (-1, 1): d, (1, -1): -d, (1, 3): f, (-1, -3): -f}


class SwitchingService:
    """Propagates excitation coefficients across switching events and designs switching times"""

    def __init__(self, scheme: Optional[LevelScheme] = None, geometry: Optional[Geometry] = None,
                 constants: Optional[NuclearConstants] = None):
        self.scheme = scheme or build_level_scheme()
        self.geometry = geometry or Geometry()
        self.constants = constants or NuclearConstants()
        self.keys = self.scheme.coherences()
        self.line_slots = [i for i, (mg, me) in enumerate(self.keys) if abs(me - mg) <= 2]
        self.exponents = decay_exponents(self.scheme, self.constants)

    def spin_rotation(self, rotation: RotationSpec) -> np.ndarray:
        """D^{I_g} (x) D^{I_e} acting on the coherence vector"""
        d_ground = wigner_D_matrix(self.scheme.spin_ground.twice_value, rotation)
        d_excited = wigner_D_matrix(self.scheme.spin_excited.twice_value, rotation)
        return np.kron(d_ground, d_excited)

    def _amplitude_set(self, coefficients: np.ndarray, frame: np.ndarray, valid_from: float,
                       history: Tuple[SwitchingEvent, ...]) -> AmplitudeSet:
        jmat = current_matrix(self.scheme, self.geometry.k_direction, frame)
        amplitudes = {self.keys[i]: jmat[:, i] * coefficients[i] for i in self.line_slots}
        return AmplitudeSet(coefficients=coefficients, amplitudes=amplitudes,
                            valid_from=valid_from, frame=frame, history=history)

    def initial_amplitudes(self, t_start: float = 0.0) -> AmplitudeSet:
        """Coefficients created by the incident flash at t = 0"""
        frame = frame_from_axis(self.geometry.quantization_axis)
        c = coupling(self.scheme, self.geometry.k_direction, frame, self.geometry.incident_polarization)
        if np.linalg.norm(c) == 0.0:
            logger.warning("Incident polarization couples to no line; the field is zero")
        return self._amplitude_set(c, frame, t_start, ())

    def coefficients_at(self, state: AmplitudeSet, t) -> np.ndarray:
        """Coherence coefficients at time(s) t, shape (8,) or (len(t), 8)"""
        ts = np.asarray(t, dtype=float)
        return state.coefficients * np.exp(-np.multiply.outer(ts, self.exponents))

    def canonical_axis(self, rotation: RotationSpec) -> Optional[Vector3]:
        """Lab field direction reached by the two canonical switches, None for any other rotation"""
        if rotation == BEAM_PARALLEL:
            return self.geometry.k_direction
        if rotation == BACK_TO_Z:
            return self.geometry.quantization_axis
        return None

    def switch_event(self, time: float, rotation: RotationSpec) -> SwitchingEvent:
        return SwitchingEvent(time=time, rotation=rotation, field_axis=self.canonical_axis(rotation))

    @staticmethod
    def frame_after(frame: np.ndarray, rotation: RotationSpec, field_axis: Optional[Vector3] = None) -> np.ndarray:
        """Frame once the switch is done: the lab target when given, else turned relative to `frame`"""
        if field_axis is not None:
            return frame_from_axis(field_axis)
        return frame @ rotation_matrix(rotation)

    def apply_switch(self, state: AmplitudeSet, event: SwitchingEvent) -> AmplitudeSet:
        """Instantaneous rotation: coefficients continuous through D, frame rotated"""
        if not state.valid_from <= event.time < state.valid_to:
            raise NFSInputError(f"switch at {event.time:.6e} s outside [{state.valid_from}, {state.valid_to})")
        rotated = self.spin_rotation(event.rotation) @ self.coefficients_at(state, event.time)
        coefficients = rotated * np.exp(self.exponents * event.time)
        frame = self.frame_after(state.frame, event.rotation, event.field_axis)
        logger.debug("Switch at %.3f ns, new axis %s", event.time * 1e9, np.round(frame[:, 2], 12))
        return self._amplitude_set(coefficients, frame, event.time, state.history + (event,))

    def propagate(self, sequence: SwitchSequence, t_start: float = 0.0) -> List[AmplitudeSet]:
        """One amplitude set per inter-switch interval"""
        states = [self.initial_amplitudes(t_start)]
        for event in sequence.events:
            new_state = self.apply_switch(states[-1], event)
            states[-1] = states[-1].model_copy(update={"valid_to": event.time})
            states.append(new_state)
        return states

    def line_amplitudes(self, state: AmplitudeSet, t: float) -> Dict[Tuple[int, int], np.ndarray]:
        """A_l(t) = j^_l c_l(t) for the six lines"""
        c_t = self.coefficients_at(state, t)
        jmat = current_matrix(self.scheme, self.geometry.k_direction, state.frame)
        return {self.keys[i]: jmat[:, i] * c_t[i] for i in self.line_slots}

    def suppression_times(self, n_max: Optional[int] = None, t_max: float = settings.GRID_T_END_S) -> List[float]:
        """t_n = (n - 1/2) pi / Omega0: beat minima where the beam-parallel rotation stores the excitation"""
        omega0 = self.scheme.omega0
        times = []
        n = 1
        while n_max is None or n <= n_max:
            t = (n - 0.5) * math.pi / omega0
            if n_max is None and t > t_max:
                break
            times.append(t)
            n += 1
        return times

    def is_suppression_time(self, t: float) -> bool:
        n = t * self.scheme.omega0 / math.pi + 0.5
        return n >= 1 - 1e-9 and abs(n - round(n)) < 1e-9

    def two_switch_closed_form(self, t1: float, t2: float) -> Dict[Tuple[int, int], complex]:
        """Closed-form coefficients for a store at t1 and a return to z at t2, normalized to the (1/2, 1/2) coupling"""
        if not self.is_suppression_time(t1):
            raise NFSInputError(f"{t1 * 1e9:.4f} ns is not a suppression time")
        if t2 <= t1:
            raise NFSInputError("t2 must follow t1")
        return two_switch_closed_form(t2 - t1, self.scheme.omega0, self.scheme.omega1)

    def residual_profile(self, state: AmplitudeSet, rotation: RotationSpec, times, target: PolarizationTarget,
                         field_axis: Optional[Vector3] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Relative leftover emission for a switch at each of `times`.

        residual = max over lines of the unwanted amplitude / (max |j^| * |c(t)|);
        the second array is the same measure for the wanted polarization.
        """
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        c_t = self.coefficients_at(state, ts)
        rotated = c_t @ self.spin_rotation(rotation).T
        frame = self.frame_after(state.frame, rotation, field_axis)
        jmat = current_matrix(self.scheme, self.geometry.k_direction, frame)[:, self.line_slots]
        amps = rotated[:, self.line_slots, None] * jmat.T[None, :, :]

        scale = np.max(np.linalg.norm(jmat, axis=0)) * np.linalg.norm(c_t, axis=1)
        scale = np.where(scale > 0, scale, 1.0)
        sigma = np.max(np.abs(amps @ SIGMA_AXIS), axis=1) / scale
        pi = np.max(np.abs(amps @ PI_AXIS), axis=1) / scale
        if target == PolarizationTarget.SIGMA_ONLY:
            return pi, sigma
        if target == PolarizationTarget.PI_ONLY:
            return sigma, pi
        return np.max(np.linalg.norm(amps, axis=2), axis=1) / scale, None

    def design_release_time(self, state: AmplitudeSet, rotation: RotationSpec, target: PolarizationTarget,
                            window: Optional[Tuple[float, float]] = None) -> List[SwitchDesign]:
        """
        Candidate switching times in the window whose rotation leaves only the target emitting.

        Local minima of the residual on the scan grid are refined by bounded minimisation.
        Canonical rotations switch the field to their lab direction.
        Returns candidates sorted by time; an empty window gives an empty list.
        """
        step = settings.DESIGN_SCAN_STEP_S
        lo, hi = window or (state.valid_from, settings.GRID_T_END_S)
        lo = max(lo, state.valid_from)
        times = np.arange(lo + step, hi + step / 2, step)
        if len(times) < 3:
            return []
        axis = self.canonical_axis(rotation)
        residual, complement = self.residual_profile(state, rotation, times, target, axis)
        complement_max = None if complement is None else float(np.max(complement))

        def objective(t_ns: float) -> float:
            return float(self.residual_profile(state, rotation, t_ns * 1e-9, target, axis)[0][0])

        candidates = []
        interior = np.where((residual[1:-1] <= residual[:-2]) & (residual[1:-1] <= residual[2:]))[0] + 1
        for i in interior:
            if residual[i] >= settings.DESIGN_REL_TOL:
                continue
            fit = minimize_scalar(objective, bounds=(times[i - 1] * 1e9, times[i + 1] * 1e9),
                                  method="bounded", options={"xatol": settings.DESIGN_REFINE_TOL_S * 1e9})
            if fit.fun < residual[i]:
                t_best, r_best = float(fit.x) * 1e-9, float(fit.fun)
            else:
                t_best, r_best = float(times[i]), float(residual[i])
            comp = None
            if complement is not None:
                comp = float(self.residual_profile(state, rotation, t_best, target, axis)[1][0])
                if comp <= settings.DESIGN_COMPLEMENT_FLOOR * complement_max:
                    logger.debug("Rejecting %.3f ns: wanted polarization also suppressed", t_best * 1e9)
                    continue
            candidates.append(SwitchDesign(event=SwitchingEvent(time=t_best, rotation=rotation, field_axis=axis),
                                           target=target, residual=r_best, complement=comp))

        logger.info("%d %s candidate(s) in [%.2f, %.2f] ns", len(candidates), target.value, lo * 1e9, hi * 1e9)
        return candidates

    @staticmethod
    def select_design(candidates: List[SwitchDesign]) -> SwitchDesign:
        """Smallest residual; candidates within DESIGN_TIE_TOL of it are ties and the earliest wins"""
        if not candidates:
            raise DesignError("no switching time satisfies the target")
        best = min(c.residual for c in candidates)
        return min((c for c in candidates if c.residual <= best + settings.DESIGN_TIE_TOL),
                   key=lambda c: c.event.time)

    def four_switch_plan(self, final_polarization: Polarization = Polarization.SIGMA
                         ) -> Tuple[SwitchSequence, List[SwitchDesign]]:
        """Store at the first beat minimum, release pi, store again, release the final polarization"""
        state = self.initial_amplitudes()
        t1 = self.suppression_times(n_max=1)[0]
        first = self.switch_event(t1, BEAM_PARALLEL)
        residual = float(self.residual_profile(state, BEAM_PARALLEL, t1, PolarizationTarget.FULL_SUPPRESSION,
                                               first.field_axis)[0][0])
        designs = [SwitchDesign(event=first, target=PolarizationTarget.FULL_SUPPRESSION, residual=residual)]
        state = self.apply_switch(state, first)

        final = (PolarizationTarget.SIGMA_ONLY if final_polarization == Polarization.SIGMA
                 else PolarizationTarget.PI_ONLY)
        steps = ((BACK_TO_Z, PolarizationTarget.PI_ONLY, settings.GRID_T_END_S),
                 (BEAM_PARALLEL, PolarizationTarget.FULL_SUPPRESSION, settings.GRID_T_END_S),
                 (BACK_TO_Z, final, settings.PLAN_RELEASE_HORIZON_S))
        for rotation, target, horizon in steps:
            candidates = self.design_release_time(state, rotation, target, (state.valid_from, horizon))
            if not candidates:
                raise DesignError(f"no {target.value} switching time after {state.valid_from * 1e9:.2f} ns")
            design = self.select_design(candidates)
            designs.append(design)
            state = self.apply_switch(state, design.event)

        sequence = SwitchSequence(events=tuple(d.event for d in designs))
        logger.info("Four-switch plan (%s): %s ns", final_polarization.value,
                    ", ".join(f"{t * 1e9:.3f}" for t in sequence.times))
        return sequence, designs


switching_service = SwitchingService()
