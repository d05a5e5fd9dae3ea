"""ciscat: scattering and topology toolkit for two-channel conical
intersections.

The package covers five layers, in dependency order:

``field``        grids, two-component complex fields, spectral transforms,
                 and the portable field-dump format
``models``       the catalog of traceless 2x2 potential models and their
                 single-valued eigenframes
``gauge``        projected gauge fields, loop holonomies, crossing-point
                 location, and curvature checks
``propagator``   split-operator packet propagation with diagnostics
``partialwave``  radial matching and angular distributions for a flux line
                 plus a short-range potential
``topo``         phase-winding charges and nodal-line extraction on sampled
                 fields

``config``/``runner``/``cli`` wrap those into reproducible scenario runs;
``ciscat list`` (or ``python -m ciscat list``) shows the preset catalog.
"""

from .errors import (CiscatError, ConfigError, DegenerateCIError,
                     DivergenceError, FieldError, GaugeSingularityError,
                     MatchingError, NodalCrossingError,
                     NumericalInstabilityError, QuadratureError,
                     SingularBasisError, TruncationError,
                     UnresolvedCandidateWarning)
from .field import (Grid2D, Populations, SpinorField, adiabatic_populations,
                    apply_unitary, forward_spectrum, inverse_spectrum,
                    mean_wavenumber_xi, norm, populations_in_basis,
                    read_field, spectral_roundtrip, to_adiabatic,
                    to_diabatic, write_field, zeros_like_field)
from .models import (BarrierSpec, TwoStatePotential, capped_jt, catalog,
                     linear_jt, twisted_capped_jt, two_ci, u_c, u_d,
                     u_general, xi_factor)
from .gauge import (LoopPath, abelian_field, curvature_check, find_cis,
                    loop_integral, nonabelian_gauge, projected_gauge,
                    scalar_correction, wilson_loop, wilson_sign_predicted)
from .propagator import (AbsorberSpec, DiagnosticsRecord, PacketSpec,
                         absorber_mask, kinetic_half_step, potential_step, step,
                         PropagationConfig, SplitOperatorPropagator,
                         Trajectory, auto_dtau, backscatter_fraction,
                         energy_expectation, prepare_packet, run)
from .partialwave import (PartialWaveSolution, RadialPotential, ab_amplitude,
                          bessel_halfint, coefficients,
                          differential_cross_section, hankel1_halfint,
                          psi_ab, psi_total, radial_logderiv,
                          short_range_amplitude, solve, xs_pure_ab)
from .topo import (DislocationSegment, DislocationSet, PhaseLoopResult,
                   charge_at_point, dislocation_lines, grid_sampler,
                   topological_charge)
from .config import ScenarioConfig, parse_config
from .runner import run_scenario

__version__ = "1.0.0"

__all__ = [
    "__version__",
    # errors
    "CiscatError", "ConfigError", "DegenerateCIError", "DivergenceError",
    "FieldError", "GaugeSingularityError", "MatchingError",
    "NodalCrossingError", "NumericalInstabilityError", "QuadratureError",
    "SingularBasisError", "TruncationError", "UnresolvedCandidateWarning",
    # field
    "Grid2D", "Populations", "SpinorField", "adiabatic_populations",
    "apply_unitary", "forward_spectrum", "inverse_spectrum",
    "mean_wavenumber_xi", "norm", "populations_in_basis", "read_field",
    "spectral_roundtrip", "to_adiabatic", "to_diabatic", "write_field",
    "zeros_like_field",
    # models
    "BarrierSpec", "TwoStatePotential", "capped_jt", "catalog", "linear_jt",
    "twisted_capped_jt", "two_ci", "u_c", "u_d", "u_general", "xi_factor",
    # gauge
    "LoopPath", "abelian_field", "curvature_check", "find_cis",
    "loop_integral", "nonabelian_gauge", "projected_gauge",
    "scalar_correction", "wilson_loop", "wilson_sign_predicted",
    # propagator
    "AbsorberSpec", "DiagnosticsRecord", "PacketSpec", "PropagationConfig",
    "SplitOperatorPropagator", "Trajectory", "auto_dtau",
    "backscatter_fraction", "energy_expectation", "prepare_packet", "run",
    "absorber_mask", "kinetic_half_step", "potential_step", "step",
    # partial waves
    "PartialWaveSolution", "RadialPotential", "ab_amplitude",
    "bessel_halfint", "coefficients", "differential_cross_section",
    "hankel1_halfint", "psi_ab", "psi_total", "radial_logderiv",
    "short_range_amplitude", "solve", "xs_pure_ab",
    # topology
    "DislocationSegment", "DislocationSet", "PhaseLoopResult",
    "charge_at_point", "dislocation_lines", "grid_sampler",
    "topological_charge",
    # scenarios
    "ScenarioConfig", "parse_config", "run_scenario",
]
