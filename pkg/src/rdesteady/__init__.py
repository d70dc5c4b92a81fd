"""Steady-state posterior densities and stability maps for random ODEs.

The parameters of the Rosenzweig-MacArthur predator-prey model are drawn
from Gaussian-mixture laws; steady states and Jacobian eigenvalues are then
described by Monte Carlo posterior densities on 2-D grids.
"""
__version__ = "0.1.0"

from .densities import (MixtureDensity1D, ParameterLaw, SampleMatrix, lhs_sample,
                        mixture_cdf, mixture_inverse_cdf, mixture_pdf, plain_sample)
from .errors import (ContractError, DegeneratePosteriorError, DomainError, EvaluationError,
                     GridParseError, IntegrationBlowUpError, RdeError, SamplingError,
                     VerificationWarning)
from .gridio import (PeakList, find_peaks, read_grid_csv, write_grid_csv,
                     write_heatmap_pgm)
from .model_rm import (ComplexEigenPair, PopulationState, RMParams, eig_system,
                       rm_charpoly_residual, rm_eigenvalues, rm_equilibria, rm_jacobian,
                       rm_rhs, rm_steady_residual, steady_system)
from .randeq import (DensityGrid2D, GridSpec2D, NoiseSpec, ResidualSystem, normalize,
                     posterior_unnormalized)
from .stability import (KappaGrid, ProbePoint, eig_posterior, kappa_direct, kappa_from_grid,
                        kappa_map)
from .verify import (NewtonConfig, OdeConfig, histogram_analytic, histogram_newton,
                     histogram_ode, integrate_ode, newton_solve, total_variation)
