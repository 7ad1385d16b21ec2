"""
Angular-momentum algebra: Wigner d/D matrices, 3j symbols and the hyperfine level scheme.

Spins and projections are passed as twice their value so every argument is an integer.
"""

import logging
import math
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy.constants import hbar, physical_constants

from config import settings
from exceptions import NFSInputError
from models import HyperfineConfig, LevelScheme, RotationSpec, SpinHalfInt, TransitionLine

logger = logging.getLogger(__name__)

NUCLEAR_MAGNETON = physical_constants["nuclear magneton"][0]


def _half(twice: int) -> int:
    if twice % 2:
        raise NFSInputError(f"{twice}/2 is not an integer combination")
    return twice // 2


def _check(twice_j: int, twice_m: int) -> None:
    if twice_j < 0 or abs(twice_m) > twice_j or (twice_j - twice_m) % 2:
        raise NFSInputError(f"invalid projection {twice_m}/2 for spin {twice_j}/2")


def wigner_small_d(twice_j: int, twice_m_to: int, twice_m_from: int, beta: float) -> float:
    """
    d^j_{m'm}(beta) from the factorial sum.

    Follows the convention D_{m'm}(a, b, c) = exp(-i m' a) d_{m'm}(b) exp(-i m c).
    """
    _check(twice_j, twice_m_to)
    _check(twice_j, twice_m_from)
    jpm_to = _half(twice_j + twice_m_to)
    jmm_to = _half(twice_j - twice_m_to)
    jpm = _half(twice_j + twice_m_from)
    jmm = _half(twice_j - twice_m_from)
    dm = _half(twice_m_to - twice_m_from)  # m' - m
    norm = math.sqrt(math.factorial(jpm_to) * math.factorial(jmm_to)
                     * math.factorial(jpm) * math.factorial(jmm))
    c = math.cos(beta / 2)
    s = math.sin(beta / 2)

    total = 0.0
    for k in range(max(0, -dm), min(jpm, jmm_to) + 1):
        denom = (math.factorial(jpm - k) * math.factorial(k)
                 * math.factorial(dm + k) * math.factorial(jmm_to - k))
        cos_pow = jpm + jmm - dm - 2 * k
        sin_pow = dm + 2 * k
        total += (-1) ** (dm + k) / denom * c ** cos_pow * s ** sin_pow
    return norm * total


def wigner_d_matrix(twice_j: int, beta: float) -> np.ndarray:
    """Real (2j+1)x(2j+1) matrix, rows/cols ordered m = +j ... -j"""
    ms = SpinHalfInt(twice_value=twice_j).projections()
    return np.array([[wigner_small_d(twice_j, mp, m, beta) for m in ms] for mp in ms])


def wigner_D_matrix(twice_j: int, rotation: RotationSpec) -> np.ndarray:
    """Unitary rotation matrix D^j(alpha, beta, gamma), ordered m = +j ... -j"""
    ms = np.array(SpinHalfInt(twice_value=twice_j).projections()) / 2
    d = wigner_d_matrix(twice_j, rotation.euler_beta)
    left = np.exp(-1j * ms * rotation.euler_alpha)
    right = np.exp(-1j * ms * rotation.euler_gamma)
    return left[:, None] * d * right[None, :]


def rotation_matrix(rotation: RotationSpec) -> np.ndarray:
    """Cartesian R = Rz(alpha) Ry(beta) Rz(gamma)"""
    def rz(a):
        ca, sa = math.cos(a), math.sin(a)
        return np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])

    cb, sb = math.cos(rotation.euler_beta), math.sin(rotation.euler_beta)
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    return rz(rotation.euler_alpha) @ ry @ rz(rotation.euler_gamma)


@lru_cache(maxsize=1024)
def three_j(twice_j1: int, twice_j2: int, twice_j3: int,
            twice_m1: int, twice_m2: int, twice_m3: int) -> float:
    """Wigner 3j symbol (Racah formula); zero when a selection rule fails"""
    for tj, tm in ((twice_j1, twice_m1), (twice_j2, twice_m2), (twice_j3, twice_m3)):
        _check(tj, tm)
    if twice_m1 + twice_m2 + twice_m3 != 0:
        return 0.0
    if not abs(twice_j1 - twice_j2) <= twice_j3 <= twice_j1 + twice_j2:
        return 0.0
    if (twice_j1 + twice_j2 + twice_j3) % 2:
        return 0.0

    a = _half(twice_j1 + twice_j2 - twice_j3)
    b = _half(twice_j1 - twice_j2 + twice_j3)
    c = _half(-twice_j1 + twice_j2 + twice_j3)
    triangle = (math.factorial(a) * math.factorial(b) * math.factorial(c)
                / math.factorial(_half(twice_j1 + twice_j2 + twice_j3) + 1))
    norm = math.sqrt(triangle * math.prod(
        math.factorial(_half(tj + s * tm))
        for tj, tm in ((twice_j1, twice_m1), (twice_j2, twice_m2), (twice_j3, twice_m3))
        for s in (1, -1)))

    # the six factorial arguments of the sum
    t1 = _half(twice_j3 - twice_j2 + twice_m1)
    t2 = _half(twice_j3 - twice_j1 - twice_m2)
    t3 = a
    t4 = _half(twice_j1 - twice_m1)
    t5 = _half(twice_j2 + twice_m2)
    total = 0.0
    for k in range(max(0, -t1, -t2), min(t3, t4, t5) + 1):
        total += (-1) ** k / (math.factorial(k) * math.factorial(t1 + k) * math.factorial(t2 + k)
                              * math.factorial(t3 - k) * math.factorial(t4 - k) * math.factorial(t5 - k))
    phase = (-1) ** _half(twice_j1 - twice_j2 - twice_m3)
    return phase * norm * total


def g_factors(mu_ground_nm: float = settings.MU_GROUND_NM,
              mu_excited_nm: float = settings.MU_EXCITED_NM):
    """Nuclear g-factors g = mu / I for the 1/2 -> 3/2 transition"""
    return (mu_ground_nm / (settings.TWICE_SPIN_GROUND / 2),
            mu_excited_nm / (settings.TWICE_SPIN_EXCITED / 2))


def zeeman_omega(twice_m_g: int, twice_m_e: int, config: HyperfineConfig) -> float:
    """Omega(m_g, m_e) = -(g_e m_e - g_g m_g) mu_N B / hbar"""
    scale = NUCLEAR_MAGNETON * config.field_magnitude_tesla / hbar
    return -(config.g_factor_excited * twice_m_e / 2 - config.g_factor_ground * twice_m_g / 2) * scale


def default_hyperfine(omega0: float = settings.OMEGA0_RAD_S, mu_ground_nm: float = settings.MU_GROUND_NM,
                      mu_excited_nm: float = settings.MU_EXCITED_NM) -> HyperfineConfig:
    """Hyperfine field chosen so the Delta m = 0 lines beat at omega0"""
    g_g, g_e = g_factors(mu_ground_nm, mu_excited_nm)
    field = omega0 * hbar / ((g_g - g_e) / 2 * NUCLEAR_MAGNETON)
    logger.debug("Calibrated hyperfine field %.4f T for omega0=%.6e rad/s", field, omega0)
    return HyperfineConfig(field_magnitude_tesla=field, g_factor_ground=g_g, g_factor_excited=g_e)


def build_level_scheme(config: Optional[HyperfineConfig] = None,
                       twice_spin_ground: int = settings.TWICE_SPIN_GROUND,
                       twice_spin_excited: int = settings.TWICE_SPIN_EXCITED) -> LevelScheme:
    """Enumerate the M1 lines and assign each its hyperfine frequency"""
    config = config or default_hyperfine()
    ground = SpinHalfInt(twice_value=twice_spin_ground)
    excited = SpinHalfInt(twice_value=twice_spin_excited)

    keys = [(mg, me) for mg in ground.projections() for me in excited.projections()
            if abs(me - mg) <= 2]

    overrides = {}
    if config.override_frequencies is not None:
        for item in config.override_frequencies:
            ground.check_projection(item.twice_m_g)
            excited.check_projection(item.twice_m_e)
            overrides[(item.twice_m_g, item.twice_m_e)] = item.omega_rad_s
        if len(config.override_frequencies) != len(keys) or sorted(overrides) != sorted(keys):
            raise NFSInputError(
                f"override table must list exactly the {len(keys)} allowed lines, got {sorted(overrides)}")

    lines: List[TransitionLine] = []
    for mg, me in keys:
        omega = overrides[(mg, me)] if overrides else zeeman_omega(mg, me, config)
        lines.append(TransitionLine(twice_m_g=mg, twice_m_e=me, omega_hf=omega))
    return LevelScheme(spin_ground=ground, spin_excited=excited, lines=tuple(lines))
