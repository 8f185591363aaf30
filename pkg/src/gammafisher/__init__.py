"""Numerical checks of the low-temperature expansion of the rescaled Fisher information.

Landscape analysis, discrete generator spectra, quasimode recovery measures
and Langevin exit statistics for polynomial potentials in one and two
dimensions.
"""

from .errors import (AssumptionViolated, CutoffOverlap, DegenerateInput, DeltaTooLarge,
                     GridMismatch, NoConvergence, NumericalError, ResolutionGuardFailed,
                     ResolutionTooCoarse, SaddleRefinementFailed, SolverStagnation, UnstableStep)
from .functionals import (PLUS_INF, AtomicMeasure, GridMeasure, coercivity_bound, eta_k, eval_I,
                          eval_J, eval_Jk, fisher_information, gibbs_measure, mixture, zeta)
from .grid import Grid
from .landscape import LandscapeReport, analyze, compute_barriers, find_critical_points
from .potential import Potential, double_well, harmonic, polynomial
from .spectral import (DiscreteGenerator, HarmonicPrediction, SpectralResult, build_generator,
                       compare_spectra, harmonic_spectrum, kramers_prediction, kramers_sweep,
                       lowest_eigenpairs)
from .quasimodes import (GridFunction, WitnessReport, gamma_witness_suite, hermite_quasimode,
                         recovery_measure_I, well_quasimode)
from .langevin import TrajectoryStats, exit_time_experiment, first_passage_times, simulate

__version__ = "0.1.0"
