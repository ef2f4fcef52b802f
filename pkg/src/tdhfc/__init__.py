"""Neural-network feedback control of finite-basis time-dependent
Hartree-Fock dynamics, optimized through a discrete adjoint method.

The package splits along the problem's joints: ``herm`` (Hermitian-matrix
primitives and real coordinates), ``matexp`` (exponentials and their
Jacobians), ``molsys`` (molecular data and Hamiltonians), ``controller``
(the feedback network), ``propagator`` (closed-loop time stepping),
``adjoint`` (objective, backward sweep, parameter gradient), ``optimizer``
(trust-region quasi-Newton outer loop), and ``cli``.
"""

from . import adjoint, cli, controller, errors, herm, matexp, molsys, optimizer, propagator
from .adjoint import ControlProblem
from .controller import NetConfig
from .optimizer import OptConfig

__version__ = "0.1.0"

__all__ = [
    "adjoint", "cli", "controller", "errors", "herm", "matexp", "molsys",
    "optimizer", "propagator", "ControlProblem", "NetConfig", "OptConfig",
    "__version__",
]
