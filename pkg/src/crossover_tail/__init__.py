"""Deformed Airy functions, the edge crossover kernel and the right tail of its distribution."""
from .crossover import (MuContourSpec, TailFit, fit_tail_envelope, tail_probability,
                        tail_probability_report)
from .deformed_airy import DeformedAiryParams, ai_lower_gamma, ai_upper_gamma, airy_classical, kappa
from .fredholm import nystrom_det
from .operator import KernelSpec, hs_norms, kernel_eval
from .special import gamma, recip_gamma

__all__ = ["MuContourSpec", "TailFit", "fit_tail_envelope", "tail_probability", "tail_probability_report",
           "DeformedAiryParams", "ai_lower_gamma", "ai_upper_gamma", "airy_classical", "kappa",
           "nystrom_det", "KernelSpec", "hs_norms", "kernel_eval", "gamma", "recip_gamma"]
__version__ = "0.1.0"
