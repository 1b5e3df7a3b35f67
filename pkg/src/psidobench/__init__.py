"""Pseudodifferential operators, symbol classes, maximal functions and variable Lebesgue norms
on uniform grids, with a harness for estimating the constants of the boundedness argument."""

from .errors import (CapabilityError, CatalogError, ConfigError, ConvergenceError,
                     DegenerateFamilyError, EvaluationError, NormUndefinedError, ParameterError,
                     PathError, PreconditionError, PsidoError, SamplingError)
from .grid import (GridFunction, GridSpec, TestFamilySpec, export_csv, forward_transform,
                   generate_family, inverse_transform, load_psbf, make_grid, sample, save_psbf)
from .maximal import Cube, CubeFamilySpec, cube_average, hardy_littlewood, q_maximal, sharp_maximal
from .psido import ApplyOptions, apply_multiplier, apply_op, apply_op_direct, op_norm_witness
from .spaces import (ExponentFunction, NormResult, check_log_holder_infinity,
                     check_log_holder_local, check_nekvinda, conjugate_exponent, constant_norm,
                     distribution_measure, exponent, modular, nekvinda_constant, vlp_norm)
from .symbols import (CertificateReport, HormanderSpec, MiyachiSpec, SamplingPlan, Symbol,
                      catalog_symbol, certify_hormander, certify_miyachi, check_inclusion,
                      eval_derivative, miyachi_norm)

__version__ = "0.1.0"
