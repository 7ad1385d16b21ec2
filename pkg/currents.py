"""
Nuclear transition currents of the M1 lines and their time dependence.

Every current is built in the lab frame from the current quantization frame
(a 3x3 matrix whose columns are the frame axes, column 2 being the field axis).
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT, e as ELEMENTARY_CHARGE, hbar

from angular import three_j
from models import CurrentMatrixElement, Geometry, LevelScheme, NuclearConstants, TransitionLine

logger = logging.getLogger(__name__)


def frame_from_axis(axis) -> np.ndarray:
    """Right-handed frame with the given unit vector as its z column"""
    z = np.asarray(axis, dtype=float)
    z = z / np.linalg.norm(z)
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = ref - z * (ref @ z)
    x /= np.linalg.norm(x)
    return np.column_stack([x, np.cross(z, x), z])


def spherical_unit_vector(q: int, frame: Optional[np.ndarray] = None) -> np.ndarray:
    """Spherical basis vector n_q of the given frame (lab components)"""
    f = np.eye(3) if frame is None else np.asarray(frame)
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    if q == 0:
        return fz.astype(complex)
    if q == 1:
        return -(fx + 1j * fy) / math.sqrt(2)
    if q == -1:
        return (fx - 1j * fy) / math.sqrt(2)
    raise ValueError(f"no spherical unit vector for q={q}")


def normalized_current(line: TransitionLine, scheme: LevelScheme,
                       k_hat, frame: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Dimensionless current j^_l, transverse to k.

    The six vectors satisfy sum_l j^_l j^_l^dagger = 1 - k k.
    """
    tg = scheme.spin_ground.twice_value
    te = scheme.spin_excited.twice_value
    coefficient = three_j(tg, 2, te, -line.twice_m_g, line.twice_m_g - line.twice_m_e, line.twice_m_e)
    phase = (-1) ** ((tg - line.twice_m_g) // 2) * (-1) ** line.q
    k = np.asarray(k_hat, dtype=float)
    return math.sqrt(3) * phase * coefficient * np.cross(k, spherical_unit_vector(line.q, frame))


def current_prefactor(scheme: LevelScheme, constants: NuclearConstants) -> float:
    """sqrt(3 (2 I_e + 1) c^5 Gamma_gamma / (4 omega0^3)), rates in 1/s"""
    gamma_gamma = constants.gamma_gamma_ev * ELEMENTARY_CHARGE / hbar
    omega0 = constants.E0_ev * ELEMENTARY_CHARGE / hbar
    two_ie_plus_one = scheme.spin_excited.twice_value + 1
    return math.sqrt(3 * two_ie_plus_one * SPEED_OF_LIGHT ** 5 * gamma_gamma / (4 * omega0 ** 3))


def current_element(line: TransitionLine, scheme: LevelScheme, geometry: Geometry,
                    constants: NuclearConstants, frame: Optional[np.ndarray] = None) -> CurrentMatrixElement:
    """Physical current j_l(k) = prefactor * k / sqrt(3) * j^_l"""
    prefactor = current_prefactor(scheme, constants) * geometry.k_magnitude / math.sqrt(3)
    j_hat = normalized_current(line, scheme, geometry.k_direction, frame)
    return CurrentMatrixElement(line=line, j_vec=prefactor * j_hat, prefactor=prefactor)


def current_matrix(scheme: LevelScheme, k_hat, frame: Optional[np.ndarray] = None) -> np.ndarray:
    """3 x N matrix of normalized currents, one column per coherence; |dm| > 1 columns are zero"""
    columns = []
    for mg, me in scheme.coherences():
        if abs(me - mg) > 2:
            columns.append(np.zeros(3, dtype=complex))
        else:
            columns.append(normalized_current(scheme.line(mg, me), scheme, k_hat, frame))
    return np.column_stack(columns)


def decay_exponents(scheme: LevelScheme, constants: NuclearConstants) -> np.ndarray:
    """lambda = i Omega + Gamma0 / 2hbar for every coherence"""
    omegas = np.array([scheme.omega(mg, me) for mg, me in scheme.coherences()])
    return 1j * omegas + constants.decay_rate / 2


def time_current(coefficients: np.ndarray, t, scheme: LevelScheme, constants: NuclearConstants,
                 k_hat, frame: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Total normalized current sum_l j^_l c~_l exp(-lambda_l t) at time(s) t.

    Returns shape (3,) for scalar t, else (len(t), 3).
    """
    lam = decay_exponents(scheme, constants)
    jmat = current_matrix(scheme, k_hat, frame)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    evolved = coefficients[None, :] * np.exp(-np.outer(ts, lam))
    out = evolved @ jmat.T
    return out[0] if np.ndim(t) == 0 else out


def coupling(scheme: LevelScheme, k_hat, frame: Optional[np.ndarray], polarization) -> np.ndarray:
    """Excitation coefficients c_l = j^_l^dagger . e0 for every coherence"""
    e0 = np.asarray(polarization, dtype=complex)
    return current_matrix(scheme, k_hat, frame).conj().T @ e0
