"""Sudler products P_N(alpha), perturbed products and their limit functions
for alpha = [b, b, b, ...], with rigorous error bounds."""

from .bounds import CompensatedSum, EvalWithBound
from .errors import (BudgetExceeded, DigitRuleError, FactorizationUndefined, InvalidInterval,
                     SudlerError)
from .growth import (GrowthVerdict, certify_case_b5, certify_small_b, decompose, growth_verdict,
                     liminf_witness, limsup_witness, perturbation_range, ratio_limit_check)
from .kernel import factor_triple, perturbed_product, signed_frac, sudler_product
from .limitfn import (C_const, G_eval, certify_above, certify_below, d2_log_G, roots_near_zero,
                      u_seq)
from .qcf import (convergents, fibonacci, make_surd, ostrowski_expand, ostrowski_value,
                  zeckendorff_expand)

__version__ = "0.1.0"
