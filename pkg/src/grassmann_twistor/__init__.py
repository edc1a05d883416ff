"""Harmonic maps from the Riemann sphere into complex Grassmannians.

Projector-valued fields, flag fields and their twistor lifts, splitting
types of holomorphic bundles, Birkhoff factorisation of loops, and a
truncated model of the Hilbert-space Grassmannian.
"""

from .bundle_fields import (ComplementField, FlagField, RankDrop, SubbundleField, SumField, ZeroColumn,
                            commutator_oracle, component_a, energy, energy_density, flag_components,
                            flatness_identity_check, gauss_transform, harmonicity_matrices,
                            harmonicity_residual, harmonicity_residual_fd, holomorphicity_residual, merge_flag,
                            osculating_flag, osculating_frames, projector_field, random_flag_field,
                            veronese_curve)
from .grassmann_flags import (BadSigma, FlagPoint, GrassmannPoint, NotComplete, NotOrthogonal, SigmaSubset,
                              TangentBlock, invariant_metric, make_flag, project_sigma, tangent_blocks)
from .hs_model import (HSSubspacePoint, InvalidVirtualFlag, RankAmbiguous, TruncatedPolarizedSpace, Unstable,
                       VirtualFlagPoint, hs_block_report, make_virtual_flag, truncation_stability,
                       virtual_codimension, virtual_dimension)
from .numeric_core import (DEFAULT_TOL, BiPoly, NonFinite, RankDeficient, ShapeMismatch, ToleranceConfig,
                           TwistorError, column_reduce)
from .sphere_domain import ChartPoint, SphereGrid, integrate_chartwise, integrate_sphere, make_grid
from .splitting import (HolomorphicSubbundle, KMFrame, LaurentMatrix, SplittingData, birkhoff_factorize,
                        brute_force_dims, hn_filtration, minimal_kernel_basis, section_dims, splitting_exponents,
                        transition_from_subbundle)
from .twistor import (LiftResult, Move, NoReducingMove, NotJ2Holomorphic, PresentedBundle, check_length_zero_form,
                      forbidden_pairs, j2_residual, reduce_length, reduction_chain, twistor_lift,
                      verify_twistor_property)

__version__ = "0.1.0"
