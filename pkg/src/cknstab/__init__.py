"""Numerical toolkit for stability of weighted Caffarelli-Kohn-Nirenberg
interpolation inequalities: constants, minimizer families, deficits,
projections onto the families and verification campaigns.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (BadSamples, BoundaryHit, CknError, InvalidBracket, InvalidInput,
                     MissingSecondDerivative, NonConvergence, NumericalFailure, RegimeMismatch,
                     SingularEndpoint, UnsupportedRegime, ZeroDenominator)
from .params import (Ckn2Params, CknParams, Regime, classify_regime, derive_first_order,
                     derive_second_order, reduced_params)
from .numerics import DEFAULT_SPEC, QuadratureSpec, integrate_radial
from .model import (ClosedForm, MinimizerPoint, MinimizerSpec, PerturbedMinimizer, Samples,
                    TestFunction, family_function, make_profile)
from .functionals import deficit, deficit2, norms_first_order, norms_second_order

__all__ = [
    "BadSamples", "BoundaryHit", "CknError", "InvalidBracket", "InvalidInput",
    "MissingSecondDerivative", "NonConvergence", "NumericalFailure", "RegimeMismatch",
    "SingularEndpoint", "UnsupportedRegime", "ZeroDenominator",
    "Ckn2Params", "CknParams", "Regime", "classify_regime", "derive_first_order",
    "derive_second_order", "reduced_params", "DEFAULT_SPEC", "QuadratureSpec",
    "integrate_radial", "ClosedForm", "MinimizerPoint", "MinimizerSpec", "PerturbedMinimizer",
    "Samples", "TestFunction", "family_function", "make_profile", "deficit", "deficit2",
    "norms_first_order", "norms_second_order", "__version__",
]
