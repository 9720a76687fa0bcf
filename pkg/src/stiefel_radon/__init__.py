"""Cosine, sine and Funk-type transforms on Stiefel manifolds.

Monte Carlo estimators with counter-based streams, Siegel-gamma constants,
the Cayley-Laplace operator on homogeneous extensions, and inversion chains.
"""

from .errors import *  # noqa: F401,F403
from .linalg import Stream, polar_decompose, qr_positive
from .montecarlo import TransformEstimate, workers
from .special import MeroValue, constant, cosine_mass, siegel_gamma, sine_mass
from .testfuncs import InvariantFunction, make_test_function, parse_catalog_key
from .transforms import (SampleSet, a_km, cosine_dual, cosine_transform, duality_pairing, funk_dual,
                         funk_transform, grassmann_composition, grassmann_radon, intermediate_funk,
                         intermediate_funk_dual, normalized_cosine, normalized_cosine_dual, sine_transform)
from .diffops import (DiffOperator, apply_diffop, cayley_laplace_expand, delta_lambda_ell,
                      kernel_diff_cosine_dual, kernel_diff_sine)
from .inversion import intertwined_inversion, local_inversion, nonlocal_inversion

__version__ = "0.1.0"
