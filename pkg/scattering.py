"""
Forward-scattered field at the sample exit as a multiple-scattering series.

Fields are normalized so that the unperturbed first-order field has unit modulus at t = 0+.
Scattering order n is E_n = F_n / n! with F_1 the closed-form first order and
F_n = -(xi / tau) K[F_{n-1}], K being the memory integral through the nuclear currents.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.signal import lfilter

from config import settings
from currents import current_matrix
from exceptions import NFSInputError
from models import AmplitudeSet, FieldRecord, LevelScheme, SampleConfig, SwitchSequence, TimeGrid
from switching import PI_AXIS, SIGMA_AXIS, SwitchingService, switching_service

logger = logging.getLogger(__name__)

CSV_HEADER = "t_ns,I_total,I_sigma,I_pi,ReE_sigma,ImE_sigma,ReE_pi,ImE_pi"


def _hold_step(h: float, lam: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Trapezoid over a partial step with the source held at g"""
    return h / 2 * (1 + np.exp(-lam * h)) * g


def _decaying_sum(s0: np.ndarray, g: np.ndarray, lam: np.ndarray, step: float) -> np.ndarray:
    """
    s_i = exp(-lam step) s_{i-1} + step / 2 (exp(-lam step) g_{i-1} + g_i) for i >= 1, as one IIR filter per coherence.

    Only decaying factors appear, so long grids stay finite.
    """
    decay = np.exp(-lam * step)
    drive = step / 2 * (decay * g[:-1] + g[1:])
    out = np.empty_like(drive)
    for c in range(len(lam)):
        out[:, c], _ = lfilter([1.0], [1.0, -decay[c]], drive[:, c], zi=[decay[c] * s0[c]])
    return out


class ScatteringService:
    """Evaluates scattered fields for a sample and a switching sequence"""

    def __init__(self, switching: Optional[SwitchingService] = None):
        self.switching = switching or switching_service

    def _segment_index(self, states: Sequence[AmplitudeSet], times: np.ndarray) -> np.ndarray:
        starts = np.array([s.valid_from for s in states[1:]])
        index = np.searchsorted(starts, times, side="right")
        for k, state in enumerate(states):
            inside = times[index == k]
            if len(inside) and (inside[0] < state.valid_from or inside[-1] >= state.valid_to):
                raise NFSInputError(f"grid leaves the interval of amplitude set {k}")
        return index

    def first_order_vectors(self, states: Sequence[AmplitudeSet], times: np.ndarray) -> np.ndarray:
        """F_1(t) = -sum_l A_l exp(-lambda_l t) using each interval's own amplitudes, shape (N, 3)"""
        index = self._segment_index(states, times)
        field = np.zeros((len(times), 3), dtype=complex)
        k_hat = self.switching.geometry.k_direction
        for k, state in enumerate(states):
            mask = index == k
            if not mask.any():
                continue
            jmat = current_matrix(self.switching.scheme, k_hat, state.frame)
            field[mask] = -self.switching.coefficients_at(state, times[mask]) @ jmat.T
        return field

    def first_order_field(self, amplitudes: Union[AmplitudeSet, Sequence[AmplitudeSet]],
                          grid: Optional[TimeGrid] = None) -> FieldRecord:
        """Closed-form single-scattering field, interval by interval"""
        grid = grid or TimeGrid()
        states = [amplitudes] if isinstance(amplitudes, AmplitudeSet) else list(amplitudes)
        times = grid.times()
        if times[0] < states[0].valid_from:
            raise NFSInputError("grid starts before the first amplitude set is valid")
        field = self.first_order_vectors(states, times)
        return FieldRecord(grid=grid, e_sigma=field @ SIGMA_AXIS, e_pi=field @ PI_AXIS,
                           orders=(field,), truncation_order=1,
                           switch_times=tuple(s.valid_from for s in states[1:]))

    def memory_integral(self, field: np.ndarray, states: Sequence[AmplitudeSet],
                        sequence: SwitchSequence, times: np.ndarray) -> np.ndarray:
        """
        K[F](t) = sum over coherences of j^(t) s(t), with s the retarded integral of j^dagger . F
        carried through every switch by the spin rotation.

        Inside each interval the retarded integral is a trapezoid recurrence on the uniform grid.
        """
        lam = self.switching.exponents
        k_hat = self.switching.geometry.k_direction
        index = self._segment_index(states, times)
        out = np.zeros_like(field)
        s_head = np.zeros(len(lam), dtype=complex)

        for k, state in enumerate(states):
            p0, p_end = state.valid_from, state.valid_to
            mask = np.flatnonzero(index == k)
            if len(mask) == 0:
                s_end = s_head * np.exp(-lam * (min(p_end, times[-1]) - p0))
            else:
                t = times[mask]
                jmat = current_matrix(self.switching.scheme, k_hat, state.frame)
                g = field[mask] @ jmat.conj()
                s = np.empty_like(g)
                s[0] = np.exp(-lam * (t[0] - p0)) * s_head + _hold_step(t[0] - p0, lam, g[0])
                if len(t) > 1:
                    s[1:] = _decaying_sum(s[0], g, lam, t[1] - t[0])
                out[mask] = s @ jmat.T
                if k + 1 < len(states):
                    h = p_end - t[-1]
                    s_end = np.exp(-lam * h) * s[-1] + _hold_step(h, lam, g[-1])
            if k + 1 < len(states):
                s_head = self.switching.spin_rotation(sequence.events[k].rotation) @ s_end
        return out

    def solve_series(self, sample: SampleConfig, sequence: Optional[SwitchSequence] = None,
                     grid: Optional[TimeGrid] = None, max_order: int = settings.SERIES_MAX_ORDER,
                     tol_rel: float = settings.SERIES_TOL_REL) -> FieldRecord:
        """Multiple-scattering series truncated at max_order or once the newest order drops below tol_rel"""
        if max_order < 1 or tol_rel <= 0:
            raise NFSInputError("max_order must be >= 1 and tol_rel > 0")
        grid = grid or TimeGrid()
        sequence = sequence or SwitchSequence()
        if grid.t_start != 0.0:
            raise NFSInputError("the series needs the field history from t = 0")
        states = self.switching.propagate(sequence)
        times = grid.times()
        coupling = sample.xi / self.switching.constants.tau_s

        previous = self.first_order_vectors(states, times)
        total = previous.copy()
        terms: List[np.ndarray] = [previous]
        converged = False
        residual = math.inf
        for n in range(2, max_order + 2):
            current = -coupling * self.memory_integral(previous, states, sequence, times)
            term = current / math.factorial(n)
            peak = float(np.max(np.abs(total))) or 1.0
            residual = float(np.max(np.abs(term))) / peak
            logger.debug("Order %d: relative size %.3e", n, residual)
            if n > max_order:
                break  # only used to estimate the truncation error
            total += term
            terms.append(term)
            previous = current
            if residual < tol_rel:
                converged = True
                break

        if not converged:
            logger.warning("Series not converged at order %d (residual %.3e, xi=%g)", max_order, residual, sample.xi)
        return FieldRecord(grid=grid, e_sigma=total @ SIGMA_AXIS, e_pi=total @ PI_AXIS, orders=tuple(terms),
                           truncation_order=len(terms), converged=converged, residual=residual,
                           switch_times=tuple(sequence.times))

    @staticmethod
    def intensity_series(rec: FieldRecord) -> np.ndarray:
        """Columns t, I_total, I_sigma, I_pi"""
        i_sigma = np.abs(rec.e_sigma) ** 2
        i_pi = np.abs(rec.e_pi) ** 2
        return np.column_stack([rec.grid.times(), i_sigma + i_pi, i_sigma, i_pi])

    @staticmethod
    def order_ratios(rec: FieldRecord) -> List[float]:
        """max|E_{n+1}| / max|E_n| for consecutive retained orders"""
        if not rec.orders:
            return []
        peaks = [float(np.max(np.linalg.norm(term, axis=1))) for term in rec.orders]
        return [b / a if a > 0 else 0.0 for a, b in zip(peaks, peaks[1:])]

    @staticmethod
    def unperturbed_beat_minima(scheme: LevelScheme, n: int) -> List[float]:
        """Zeros of cos(Omega0 t): the first n quantum-beat minima"""
        return [(k - 0.5) * math.pi / scheme.omega0 for k in range(1, n + 1)]

    def write_intensity_csv(self, rec: FieldRecord, path: Path) -> None:
        table = self.intensity_series(rec)
        table[:, 0] *= 1e9
        columns = np.column_stack([table, rec.e_sigma.real, rec.e_sigma.imag, rec.e_pi.real, rec.e_pi.imag])
        np.savetxt(path, columns, fmt="%.17e", delimiter=",", header=CSV_HEADER, comments="")
        logger.info("Wrote %d samples to %s", len(columns), path)


scattering_service = ScatteringService()
