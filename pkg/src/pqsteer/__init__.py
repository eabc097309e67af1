"""Activation of post-quantum steering in quantum networks.

Submodules: ``matkernel`` (matrix primitives), ``assemblage`` (data model
and validation), ``quantum`` (models, reference assemblage, GHJW,
sampling), ``functionals`` (steering and Bell functionals), ``activation``
(the network pipeline), ``certify`` (certificates), ``optimize``
(see-saw) and ``cli``.
"""
from .matkernel import BACKEND
from .assemblage import Assemblage, BipartiteAssemblage, NetworkAssemblage, validate
from .quantum import QuantumModel, reference_assemblage, pr_box_assemblage, ghjw_realization
from .functionals import SteeringFunctional, BellCoefficients, CorrelationTable, shifted_chsh_functional
from .activation import ActivationReport, activate, activate_n

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Assemblage",
    "BipartiteAssemblage",
    "NetworkAssemblage",
    "validate",
    "QuantumModel",
    "reference_assemblage",
    "pr_box_assemblage",
    "ghjw_realization",
    "SteeringFunctional",
    "BellCoefficients",
    "CorrelationTable",
    "shifted_chsh_functional",
    "ActivationReport",
    "activate",
    "activate_n",
]
