"""PAC-Bayesian domain adaptation for linear and kernel classifiers.

Closed-form Gibbs quantities under isotropic Gaussian posteriors, the PBGD3
and PBDA learners, PAC-Bayes bound evaluators, an exact finite-class oracle,
reverse cross-validation and a rotated-moons benchmark.
"""

__version__ = "0.1.0"
SPEC_VERSION = "1.0"

from .bounds import BoundReport, evaluate  # noqa: E402
from .gibbs import (  # noqa: E402
    domain_disagreement,
    gibbs_joint_error,
    gibbs_risk,
    gibbs_self_disagreement,
    kl_gaussian,
    predict,
)
from .models import DualModel, KernelSpec, LinearModel, load_model, save_model  # noqa: E402
from .optimize import Settings, train_multi_pbda, train_pbda, train_pbgd3  # noqa: E402
from .samples import LabeledSample, UnlabeledSample  # noqa: E402

__all__ = [
    "BoundReport",
    "DualModel",
    "KernelSpec",
    "LabeledSample",
    "LinearModel",
    "Settings",
    "UnlabeledSample",
    "domain_disagreement",
    "evaluate",
    "gibbs_joint_error",
    "gibbs_risk",
    "gibbs_self_disagreement",
    "kl_gaussian",
    "load_model",
    "predict",
    "save_model",
    "train_multi_pbda",
    "train_pbda",
    "train_pbgd3",
]
