"""ARCH LM tests that stay reliable when the conditional mean is misspecified."""

__version__ = "0.1.0"

from .arch_test import ArchTestResult, DegenerateResiduals, arch_test_pipeline, lm_arch_test
from .dgp import ArchErrorSpec, DgpSpec, preset, simulate
from .mean_models import MeanModelSpec, fit_mean_model
from .numerics import RngStream

__all__ = [
    "ArchErrorSpec",
    "ArchTestResult",
    "DegenerateResiduals",
    "DgpSpec",
    "MeanModelSpec",
    "RngStream",
    "arch_test_pipeline",
    "fit_mean_model",
    "lm_arch_test",
    "preset",
    "simulate",
]
