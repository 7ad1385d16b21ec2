"""
Two-mode single-photon state from the switched emission, Mach-Zehnder detection
and a CHSH-type phase scan.
"""

import cmath
import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from config import settings
from exceptions import NFSInputError, NoPhotonError
from models import (
    BellRow, BellScan, BellSettings, FieldRecord, InterferometerConfig,
    TwoModeState, WindowSpec,
)

logger = logging.getLogger(__name__)


class PhotonicsService:
    """Mode extraction and interferometer statistics"""

    def window_energy(self, rec: FieldRecord, window: Tuple[float, float], component: np.ndarray) -> float:
        """Integral of |E|^2 of one polarization over a window; edges within a billionth of a step snap to the grid"""
        times = rec.grid.times()
        lo, hi = window
        if lo < times[0] - 1e-15 or lo >= times[-1]:
            raise NFSInputError(f"window [{lo}, {hi}] outside the record grid")
        slack = rec.grid.dt * 1e-9
        start = int(np.searchsorted(times, lo - slack, side="left"))
        stop = int(np.searchsorted(times, hi + slack, side="right"))
        if stop - start < 2:
            return 0.0
        return float(trapezoid(np.abs(component[start:stop]) ** 2, times[start:stop]))

    def extract_modes(self, rec: FieldRecord, windows: WindowSpec,
                      ic_ratio: Optional[float] = settings.IC_RATIO) -> TwoModeState:
        """
        alpha from the sigma energy in the sigma window, beta from the pi energy in the pi window.

        The relative phase is fixed to zero. loss_fraction compares the window energy with the
        total coherent energy plus an incoherent proxy (ic_ratio / (1 + ic_ratio) of it);
        pass ic_ratio=None to count coherent losses only.
        """
        sigma_energy = self.window_energy(rec, windows.sigma_window, rec.e_sigma)
        pi_energy = self.window_energy(rec, windows.pi_window, rec.e_pi)
        captured = sigma_energy + pi_energy
        if captured <= 0.0:
            raise NoPhotonError("both mode windows are empty")

        times = rec.grid.times()
        coherent = float(trapezoid(np.abs(rec.e_sigma) ** 2 + np.abs(rec.e_pi) ** 2, times))
        total = coherent * (1 + (ic_ratio / (1 + ic_ratio) if ic_ratio is not None else 0.0))
        loss = min(1.0, max(0.0, 1.0 - captured / total))

        state = TwoModeState(alpha=math.sqrt(sigma_energy / captured),
                             beta=math.sqrt(pi_energy / captured), loss_fraction=loss)
        logger.info("Two-mode state |alpha|^2=%.4f |beta|^2=%.4f loss=%.4f",
                    abs(state.alpha) ** 2, abs(state.beta) ** 2, loss)
        return state

    @staticmethod
    def detector_probabilities(state: TwoModeState, cfg: InterferometerConfig) -> Tuple[float, float]:
        """Output-port probabilities of the recombining splitter, conditioned on detection"""
        t = cfg.splitter_transmittance
        a2, b2 = abs(state.alpha) ** 2, abs(state.beta) ** 2
        relative = cmath.phase(state.alpha * state.beta.conjugate())
        cross = 2 * math.sqrt(t * (1 - t)) * abs(state.alpha) * abs(state.beta)
        p_d1 = t * a2 + (1 - t) * b2 + cross * math.cos(cfg.phase_sigma - cfg.phase_pi + relative)
        p_d1 = min(1.0, max(0.0, p_d1))
        return p_d1, 1.0 - p_d1

    @staticmethod
    def visibility(state: TwoModeState) -> float:
        return 2 * abs(state.alpha) * abs(state.beta)

    def correlation(self, state: TwoModeState, phi_a: float, phi_b: float) -> float:
        """P_D1 - P_D2 at a balanced splitter"""
        return self.visibility(state) * math.cos(phi_a - phi_b + cmath.phase(state.alpha * state.beta.conjugate()))

    def fringe(self, state: TwoModeState, phases: Sequence[float],
               cfg: Optional[InterferometerConfig] = None) -> np.ndarray:
        """Rows (delta_phi, P_D1, P_D2) over a sweep of the sigma-arm phase"""
        cfg = cfg or InterferometerConfig()
        rows = []
        for phase in phases:
            swept = cfg.model_copy(update={"phase_sigma": cfg.phase_pi + phase})
            rows.append((phase, *self.detector_probabilities(state, swept)))
        return np.array(rows)

    @staticmethod
    def optimal_settings(state: Optional[TwoModeState] = None) -> BellSettings:
        """Phases maximizing S; the pi-arm phases absorb the state's relative phase"""
        shift = cmath.phase(state.alpha * state.beta.conjugate()) if state else 0.0
        return BellSettings(a=0.0, a_prime=math.pi / 2, b=math.pi / 4 + shift, b_prime=3 * math.pi / 4 + shift)

    def bell_scan(self, state: TwoModeState, phases: Optional[BellSettings] = None) -> BellScan:
        """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| with the classical bound alongside"""
        phases = phases or self.optimal_settings()
        pairs = [(phases.a, phases.b), (phases.a, phases.b_prime),
                 (phases.a_prime, phases.b), (phases.a_prime, phases.b_prime)]
        rows = []
        for phi_a, phi_b in pairs:
            p_d1, p_d2 = self.detector_probabilities(
                state, InterferometerConfig(phase_sigma=phi_a, phase_pi=phi_b, splitter_transmittance=0.5))
            rows.append(BellRow(phi_a=phi_a, phi_b=phi_b, correlation=self.correlation(state, phi_a, phi_b),
                                p_d1=p_d1, p_d2=p_d2))
        e = [r.correlation for r in rows]
        s_value = abs(e[0] - e[1] + e[2] + e[3])
        logger.info("Bell scan S=%.6f (classical bound %g)", s_value, settings.CLASSICAL_BOUND)
        return BellScan(rows=rows, s_value=s_value)

    @staticmethod
    def write_bell_csv(scan: BellScan, path: Path) -> None:
        lines = ["phi_a,phi_b,E,P_D1,P_D2"]
        lines += [f"{r.phi_a:.17e},{r.phi_b:.17e},{r.correlation:.17e},{r.p_d1:.17e},{r.p_d2:.17e}" for r in scan.rows]
        lines.append(f"# S={scan.s_value:.17e},classical_bound={scan.classical_bound:g}")
        Path(path).write_text("\n".join(lines) + "\n")


photonics_service = PhotonicsService()
