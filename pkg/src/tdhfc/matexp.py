"""Matrix exponential of (anti-)Hermitian generators and its full Jacobian.

For a Hermitian ``H`` and purely imaginary scalar ``c``, the generator
``Z = c*H`` is anti-Hermitian and normal, so ``exp(Z)`` is unitary and both
the value and the derivative follow from one eigendecomposition of ``H``:
with ``H = V diag(w) V^dagger`` and ``mu = c*w``,

    exp(Z)       = V diag(exp(mu)) V^dagger
    D exp(Z)[E]  = V (Gamma o (V^dagger E V)) V^dagger

where ``o`` is the Hadamard product and ``Gamma[i, j]`` is the divided
difference ``(exp(mu_i) - exp(mu_j)) / (mu_i - mu_j)``, continued with
``exp(mu_i)`` when ``|mu_i - mu_j| < 1e-10``.  The full 4-index Jacobian
``jac[a, b, j, l] = d(exp Z)_{ab} / dZ_{jl}`` is the matrix of this linear
map in the elementary-direction basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .herm import contract_left

DEGENERACY_CUTOFF = 1e-10


@dataclass(frozen=True)
class ExpJacobian:
    """Value and full first derivative of a matrix exponential.

    ``contract_left(jac, E)`` equals the directional derivative of ``exp``
    at the generator along ``E``.
    """

    value: np.ndarray  # (n, n) complex
    jac: np.ndarray    # (n, n, n, n) complex

    def apply(self, E: np.ndarray) -> np.ndarray:
        """Directional derivative D exp(Z)[E]."""
        return contract_left(self.jac, E)


def _check_imaginary(c: complex) -> complex:
    c = complex(c)
    if abs(c.real) > 1e-14 * max(1.0, abs(c.imag)):
        raise ValueError(f"scalar factor must be purely imaginary, got {c}")
    return 1j * c.imag


def _eig_antihermitian(H: np.ndarray, c: complex):
    w, V = np.linalg.eigh(np.asarray(H, dtype=np.complex128))
    mu = c * w
    return w, V, mu


def expm_antihermitian(H: np.ndarray, c: complex) -> np.ndarray:
    """exp(c*H) for Hermitian H and purely imaginary c; the result is unitary."""
    c = _check_imaginary(c)
    _, V, mu = _eig_antihermitian(H, c)
    return (V * np.exp(mu)) @ V.conj().T


def _divided_difference_table(mu: np.ndarray) -> np.ndarray:
    """Gamma[i, j] = (e^{mu_i} - e^{mu_j}) / (mu_i - mu_j), e^{mu_i} on near-ties.

    mu is purely imaginary here, so the quotient is evaluated through the
    cancellation-free identity e^{i(x+y)/2} * sinc((x-y)/2) with x = Im mu_i,
    y = Im mu_j; the result agrees with the raw quotient to machine precision
    away from ties and stays exact through the degeneracy cutoff.
    """
    phi = mu.imag
    d = 0.5 * (phi[:, None] - phi[None, :])
    mean = 0.5 * (phi[:, None] + phi[None, :])
    gamma = np.exp(1j * mean) * np.sinc(d / np.pi)
    near = np.abs(mu[:, None] - mu[None, :]) < DEGENERACY_CUTOFF
    if np.any(near):
        emu = np.exp(mu)
        gamma = np.where(near, np.broadcast_to(emu[:, None], gamma.shape), gamma)
    return gamma


def expm_with_jacobian(H: np.ndarray, c: complex) -> ExpJacobian:
    """exp(c*H) together with the full Jacobian tensor of the exponential."""
    c = _check_imaginary(c)
    _, V, mu = _eig_antihermitian(H, c)
    value = (V * np.exp(mu)) @ V.conj().T
    gamma = _divided_difference_table(mu)
    # jac[a,b,j,l] = sum_{pq} V[a,p] conj(V[j,p]) Gamma[p,q] V[l,q] conj(V[b,q]);
    # the (a,j)/(l,b) pair factors give a Khatri-Rao sandwich around Gamma.
    n = V.shape[0]
    A1 = (V[:, None, :] * V.conj()[None, :, :]).reshape(n * n, n)   # [(a,j), p]
    A2 = (V[:, None, :] * V.conj()[None, :, :]).reshape(n * n, n)   # [(l,b), q]
    M = A1 @ gamma @ A2.T                                           # [(a,j), (l,b)]
    jac = M.reshape(n, n, n, n).transpose(0, 3, 1, 2)
    return ExpJacobian(value=value, jac=np.ascontiguousarray(jac))


def conjugate_jacobian(ej: ExpJacobian) -> ExpJacobian:
    """Exponential Jacobian for the adjoint generator.

    If ``ej`` was computed for ``Z = c*H``, the result is the Jacobian for
    ``-c*H = Z^dagger``, obtained without a second eigendecomposition from
    ``exp(Z)^dagger = exp(Z^dagger)``.
    """
    value = ej.value.conj().T
    jac = ej.jac.conj().transpose(1, 0, 3, 2)
    return ExpJacobian(value=value.copy(), jac=jac.copy())
