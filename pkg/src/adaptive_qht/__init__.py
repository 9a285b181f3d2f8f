"""Adaptive homodyne tomography with null-function control variates."""
from .adapt import OptimizationResult, estimate_A, estimate_b, estimate_c, gamma_scan, optimize, solve
from .estimators import AdaptiveKernelEstimator, NullFeatures, exact_value, reconstruct_elements
from .exceptions import ConvergenceError, GridError, IllConditionedError, TomographyError, TruncationError
from .homodyne import HomodyneDataset, PhaseStrategy, generate_dataset, load_dataset, sample_quadrature
from .kernels import KernelExpr, Target, base_kernel, eval_kernel, pattern_kernel, richter_kernel
from .nullfns import MonomialIndex, NullFamily, family_member
from .states import StateSpec, density_matrix_element, normally_ordered_moment, quadrature_pdf
from .stats import EstimateReport, kernel_histogram, noise_ratio, tomo_average

__version__ = "0.1.0"
