from .curves import fit_exp_decay, fit_rabi, fit_saturation, fit_voigt
from .lm import DegenerateFitError, FitResult, Model, least_squares
from .models import decay_model, emg_shape, rabi_model, saturation_model, voigt_fwhm, voigt_model, voigt_profile

__all__ = [
    "DegenerateFitError",
    "FitResult",
    "Model",
    "decay_model",
    "emg_shape",
    "fit_exp_decay",
    "fit_rabi",
    "fit_saturation",
    "fit_voigt",
    "least_squares",
    "rabi_model",
    "saturation_model",
    "voigt_fwhm",
    "voigt_model",
    "voigt_profile",
]
