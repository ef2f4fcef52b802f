"""Closed-loop leapfrog propagation of the density matrix.

The first step conjugates the initial density with exp(-i dt H); every
later step uses the two-step-unitary form P_{k+1} = U_k P_{k-1} U_k^dagger
with U_k = exp(-2i dt H(P_k, a(P_k))).  Unitary conjugation preserves the
spectrum, so Hermitian symmetry, idempotency, and the trace survive the
whole horizon up to roundoff; each step re-symmetrizes and checks all three
so that a too-large time step fails loudly instead of drifting.

The feedback amplitudes a(P_k) are recorded alongside states and
propagators: they form the open-loop signal that would reproduce the
trajectory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .controller import NetConfig, forward
from .errors import InvariantBreachError
from .herm import HermBasis, hermitize, unvec
from .matexp import expm_antihermitian
from .molsys import MolSystem, hamiltonian

TRACE_TOL = 1e-10
IDEMPOTENCY_TOL = 1e-8
UNITARITY_TOL = 1e-10
BREACH_FACTOR = 10.0


@dataclass(frozen=True)
class Trajectory:
    """States P[0..K], propagators U[0..K-1], recorded amplitudes a[0..K-1]."""

    P: np.ndarray   # (K+1, n, n) complex
    U: np.ndarray   # (K, n, n) complex
    a: np.ndarray   # (K, n_active) real
    dt: float

    def __post_init__(self):
        for arr in (self.P, self.U, self.a):
            arr.setflags(write=False)

    @property
    def K(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[1]

    def invariant_maxima(self, n_electrons: int) -> dict:
        """Worst-case conservation errors over the whole trajectory."""
        half = n_electrons / 2.0
        trace_err = max(abs(np.trace(Pk).real - half) + abs(np.trace(Pk).imag)
                        for Pk in self.P)
        idem_err = max(np.linalg.norm(Pk @ Pk - Pk) for Pk in self.P)
        unit_err = max(
            np.linalg.norm(Uk.conj().T @ Uk - np.eye(self.n)) for Uk in self.U
        )
        return {
            "max_trace_error": float(trace_err),
            "max_idempotency_error": float(idem_err),
            "max_unitarity_error": float(unit_err),
        }


def _controller_amplitudes(basis, cfg, theta, P):
    return forward(cfg, theta, unvec(P, basis))


def step_first(
    sys: MolSystem, basis: HermBasis, cfg: NetConfig, theta: np.ndarray,
    P0: np.ndarray, dt: float,
):
    """Single-step start: returns (P1, U0, a0)."""
    half = sys.n_electrons / 2.0
    if abs(np.trace(P0) - half) > 1e-8:
        raise ValueError(
            f"initial density has trace {np.trace(P0):.6g}, expected {half}"
        )
    if np.linalg.norm(P0 @ P0 - P0) > 1e-6:
        warnings.warn("initial density is not idempotent", stacklevel=2)
    a0 = _controller_amplitudes(basis, cfg, theta, P0)
    U0 = expm_antihermitian(hamiltonian(sys, P0, a0), -1j * dt)
    P1 = hermitize(U0 @ P0 @ U0.conj().T)
    return P1, U0, a0


def step_mmut(
    sys: MolSystem, basis: HermBasis, cfg: NetConfig, theta: np.ndarray,
    Pk: np.ndarray, Pkm1: np.ndarray, k: int, dt: float,
):
    """Two-step-unitary step for k >= 1: returns (P_{k+1}, U_k, a_k)."""
    if k < 1:
        raise ValueError("two-step form applies only from step 1 onward")
    ak = _controller_amplitudes(basis, cfg, theta, Pk)
    Uk = expm_antihermitian(hamiltonian(sys, Pk, ak), -2j * dt)
    Pkp1 = hermitize(Uk @ Pkm1 @ Uk.conj().T)
    return Pkp1, Uk, ak


def _check_step(k: int, P: np.ndarray, U: np.ndarray, half: float):
    n = P.shape[0]
    trace_err = abs(np.trace(P) - half)
    if trace_err > BREACH_FACTOR * TRACE_TOL:
        raise InvariantBreachError(k, f"trace error {trace_err:.3e}; reduce dt")
    idem_err = np.linalg.norm(P @ P - P)
    if idem_err > BREACH_FACTOR * IDEMPOTENCY_TOL:
        raise InvariantBreachError(k, f"idempotency error {idem_err:.3e}; reduce dt")
    unit_err = np.linalg.norm(U.conj().T @ U - np.eye(n))
    if unit_err > BREACH_FACTOR * UNITARITY_TOL:
        raise InvariantBreachError(k, f"unitarity error {unit_err:.3e}")


def propagate(
    sys: MolSystem, basis: HermBasis, cfg: NetConfig, theta: np.ndarray,
    P0: np.ndarray, dt: float, K: int,
) -> Trajectory:
    """Propagate K steps under the feedback controller."""
    if K < 1:
        raise ValueError("need at least one step")
    n = sys.n
    half = sys.n_electrons / 2.0
    P = np.empty((K + 1, n, n), dtype=np.complex128)
    U = np.empty((K, n, n), dtype=np.complex128)
    a = np.empty((K, sys.n_active), dtype=np.float64)
    P[0] = hermitize(np.asarray(P0, dtype=np.complex128))
    P[1], U[0], a[0] = step_first(sys, basis, cfg, theta, P[0], dt)
    _check_step(0, P[1], U[0], half)
    for k in range(1, K):
        P[k + 1], U[k], a[k] = step_mmut(sys, basis, cfg, theta, P[k], P[k - 1], k, dt)
        _check_step(k, P[k + 1], U[k], half)
    return Trajectory(P=P, U=U, a=a, dt=float(dt))
