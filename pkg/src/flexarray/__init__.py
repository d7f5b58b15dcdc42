"""Folded patch-array simulator: fields, power, impedance, link budget, QAM BER and beam alignment."""

from .align import AlignmentResult, FoldEvaluation, align_beam, default_budget, evaluate_fold, sweep
from .errors import (ConfigError, ConvergenceError, DomainError, FarFieldError, FlexArrayError, FramingError,
                     InvalidExcitationError, InvalidImpedanceError, NumericError)
from .fields import (FAR_FIELD_RADIUS, BeamDirection, FieldSample, RadiationPattern, SquintResult, SynthesisMode,
                     beam_peak, beam_squint, element_field_global, element_field_local, locate_beam,
                     mu_coefficients, pattern, total_field)
from .geometry import (ArraySpec, ElementFrame, FoldSpec, change_of_basis, fold_layout, rotation_angles,
                       rotation_matrix_inv)
from .link import (LinkBudget, Modulation, ber_analytic, ber_from_snr, budget_snr, evm_from_snr, mismatch_factor,
                   path_gain, q_function, received_power, snr, thermal_noise_power)
from .modem import BerResult, QamConstellation, awgn, ber_monte_carlo, constellation, demodulate, modulate
from .power import (ImpedanceReport, PowerReport, calibrate, chi, directivity, impedance_report, input_impedance,
                    power_report, radiated_power_closed, radiated_power_quadrature, radiation_resistance)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
