"""Lattice Gaussian sampling and convergence diagnostics.

Samplers: the backward-pass (Klein) sampler, random-scan Gibbs,
Metropolis-within-Gibbs, the blocked Gibbs-Klein kernel and parallel
tempering. Diagnostics: exact boxed targets, transition matrices, spectral
radii of the forward operator, TV decay and mixing times. A MIMO detection
harness and a CLI sit on top.
"""

from ._kernels import BACKEND as kernel_backend
from .blocked import (BlockDraw, BlockPlan, GkSampler, block_accept_ratio,
                      block_conditional_pmf, block_conditional_table,
                      draw_block, gk_accepted_block_table, gk_step,
                      gk_step_draw, validity_check)
from .core import (BUILTIN_BASES, Dgauss1dSpec, GaussianParams, LatticeBasis,
                   build_basis, builtin_basis, density_exponent,
                   dgauss_1d_pmf, dgauss_1d_table, read_basis_file,
                   sample_dgauss_1d, sample_dgauss_1d_many, theta_sum)
from .diagnostics import (Box, DecayCurve, KernelMatrix, PmfTable,
                          SpectralReport, build_kernel, default_box,
                          enumerate_target, estimate_mixing,
                          spectral_radius_forward, tv_decay_curve, tv_distance)
from .errors import (ConfigError, DimensionMismatch, EmptyAlphabet,
                     LatticeGibbsError, NotConverged, NotErgodicWarning,
                     NotReversible, NotStationary, PermutationSpaceTooLarge,
                     RankDeficient, RetryCapExceeded, StateSpaceTooLarge)
from .klein import KleinSample, klein_log_pmf, klein_pmf, klein_sample
from .mimo import (DetectionInstance, MimoConfig, RealizedLattice, SamplerSpec,
                   babai_round, ber_experiment, detect, generate_instance,
                   realize_lattice, write_ber_csv)
from .tempering import PtRun, TemperLadder, pt_run, swap_log_ratio
from .univariate import (ChainRun, ChainState, GibbsSampler, MwgSampler,
                         ScanPolicy, SiteAlphabet, conditional_pmf, gibbs_step,
                         make_state, mwg_step, run_chain)

__version__ = "0.1.0"
