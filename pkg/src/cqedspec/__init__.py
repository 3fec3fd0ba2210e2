"""Transmission spectra, susceptibility and normal modes of a single cavity mode
collectively coupled to an ensemble of multi-level atoms."""

from .errors import NumericalError, ValidationError
from .model import (
    CavityParams,
    CollectiveCoupling,
    FrequencyQuantity,
    Grid,
    SystemConfig,
    TransitionLadder,
    Unit,
    build_from_splittings,
    convert,
    coupling_from_dipole,
)
from .response import Spectrum, scan_spectrum, susceptibility, transmission_amplitude
from .modes import (
    ModeMatrix,
    PolaritonModes,
    audit_quartic,
    branch_scan,
    characteristic_polynomial,
    eigenmodes,
    mode_matrix,
    paper_quartic_coefficients,
    poly_roots,
)
from .dynamics import LinearSystem, Trajectory, integrate, linear_system, steady_state
from .analysis import Peak, find_peaks, match_peaks_to_modes, spectrum_distance
from .fit import FitProblem, FitResult, fit_spectrum, residuals
from .config import parse_config, preset

__version__ = "0.1.0"
