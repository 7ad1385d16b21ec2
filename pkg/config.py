"""
Configuration settings for the nuclear forward scattering switching simulator.
"""

import math
import os


class Settings:
    """Simulation defaults and calibrated constants"""

    # Logging (the only environment-driven setting)
    LOG_LEVEL: str = os.getenv("NFS_LOG_LEVEL", "INFO")

    # 57Fe nuclear constants
    TRANSITION_ENERGY_EV: float = 14413.0
    LIFETIME_S: float = 141e-9  # excited-state lifetime tau
    IC_RATIO: float = 8.0  # Gamma_IC / Gamma_gamma

    # Hyperfine calibration: first quantum-beat minimum at 8 ns
    FIRST_BEAT_MINIMUM_S: float = 8e-9
    OMEGA0_RAD_S: float = math.pi / (2 * 8e-9)
    MU_GROUND_NM: float = 0.09044  # nuclear magnetons, I_g = 1/2
    MU_EXCITED_NM: float = -0.1553  # nuclear magnetons, I_e = 3/2
    TWICE_SPIN_GROUND: int = 1
    TWICE_SPIN_EXCITED: int = 3

    # Time grid
    GRID_T_END_S: float = 300e-9
    GRID_DT_S: float = 0.05e-9

    # Multiple-scattering series
    SERIES_MAX_ORDER: int = 16
    SERIES_TOL_REL: float = 1e-8
    DEFAULT_XI: float = 5.0

    # Switching-time designer
    DESIGN_SCAN_STEP_S: float = 0.1e-9
    DESIGN_REFINE_TOL_S: float = 1e-4 * 1e-9
    DESIGN_REL_TOL: float = 0.1  # max residual accepted as a candidate
    DESIGN_COMPLEMENT_FLOOR: float = 0.10  # of the complementary group's window maximum
    DESIGN_TIE_TOL: float = 1e-3  # residuals this close to the best count as ties; earliest wins
    PLAN_RELEASE_HORIZON_S: float = 400e-9  # search end for the last release of the four-switch plan

    # Interferometer
    SPLITTER_TRANSMITTANCE: float = 0.5
    CLASSICAL_BOUND: float = 2.0


settings = Settings()
