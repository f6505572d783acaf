"""Compressed-sensing block reconstruction with a weak-lp sparsity index.

Submodules
----------
sparsity   ordering, weak-lp quasi-norm, ``s_p`` and ``s``
transform  orthonormal 2D DCT and the synthesis basis ``A``
sensing    random binary masks, measurements, image blocking
solvers    OMP and basis pursuit
metrics    MSE/PSNR/SSIM, sparsity index ``E``, truncation PSNR bound
pipeline   whole-image experiments, hypothesis classes, reports
"""

__version__ = "0.1.0"

from .config import RunConfig
from .errors import DomainError, GenerationError, InvalidInputError, SolverError
from .metrics import (
    mse,
    mssim,
    psnr,
    psnr_lower_bound,
    sparsity_index,
    ssim_map,
    truncate_smallest,
    truncation_experiment,
)
from .pipeline import (
    aggregate_scatter,
    classify_hypothesis,
    correlation_check,
    reconstruct_image,
    run_experiment,
)
from .sensing import gen_measurement_ensemble, measure
from .solvers import BpParams, bp, omp
from .sparsity import ordering, sparsity_s, sparsity_sp, weak_lp_pow
from .transform import build_synthesis_basis, dct2, idct2, unvec, vec
