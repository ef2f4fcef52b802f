"""Hermitian-matrix primitives: generator basis, real-coordinate maps,
Frobenius inner product, and 4-index tensor contractions.

Conventions used throughout the package:

* Matrices are dense ``complex128`` arrays in C (row-major) order, and
  ``vec`` flattens rows first: ``vec(P)[i*n + j] == P[i, j]``.
* An ``n x n`` Hermitian matrix is equivalently ``n**2`` real coordinates
  relative to the generator basis of :func:`build_basis`.  The ordering is
  fixed: the ``n*(n+1)/2`` real-part generators first (row-major upper
  triangle, diagonal included), then the ``n*(n-1)/2`` imaginary-part
  generators in the same traversal order.  For ``n == 2`` this produces,
  in order::

      [[1,0],[0,0]]  [[0,1],[1,0]]  [[0,0],[0,1]]  [[0,i],[-i,0]]

* 4-index tensors ``xi[a, b, r, s]`` contract against matrices on either
  side: ``contract_left`` sums over the trailing pair, ``contract_right``
  over the leading pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImagResidueError

IMAG_RESIDUE_TOL = 1e-10


def hermitize(A: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (A + A^dagger)/2 as a new array."""
    return 0.5 * (A + A.conj().T)


def herm_defect(A: np.ndarray) -> float:
    """Frobenius norm of the anti-Hermitian part of A."""
    return float(np.linalg.norm(A - A.conj().T))


@dataclass(frozen=True)
class HermBasis:
    """Generator basis of the n x n Hermitian matrices plus its vec-space form.

    ``B[q, r, m]`` is entry (q, r) of the m-th generator.  ``R`` maps real
    coordinates to the vectorized matrix, ``vec(P) = R @ p``; ``Rinv`` is its
    inverse, so ``p = Rinv @ vec(P)`` (real for Hermitian ``P``).
    """

    n: int
    B: np.ndarray      # (n, n, n**2) complex
    R: np.ndarray      # (n**2, n**2) complex
    Rinv: np.ndarray   # (n**2, n**2) complex

    def __post_init__(self):
        for arr in (self.B, self.R, self.Rinv):
            arr.setflags(write=False)


def build_basis(n: int) -> HermBasis:
    """Construct the Hermitian generator basis for dimension ``n >= 1``."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    m_total = n * n
    B = np.zeros((n, n, m_total), dtype=np.complex128)
    m = 0
    for i in range(n):
        for j in range(i, n):
            if i == j:
                B[i, i, m] = 1.0
            else:
                B[i, j, m] = 1.0
                B[j, i, m] = 1.0
            m += 1
    for i in range(n):
        for j in range(i + 1, n):
            B[i, j, m] = 1.0j
            B[j, i, m] = -1.0j
            m += 1
    R = B.reshape(n * n, m_total)
    # Columns of R are orthogonal (norms 1 or sqrt(2)); a direct inverse keeps
    # the roundtrip residual at machine precision for every n used here.
    Rinv = np.linalg.inv(R)
    return HermBasis(n=n, B=B, R=R.copy(), Rinv=Rinv)


def vec(P: np.ndarray) -> np.ndarray:
    """Row-major vectorization of a square matrix."""
    n = P.shape[0]
    if P.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {P.shape}")
    return np.asarray(P, dtype=np.complex128).reshape(n * n)


def unvec(P: np.ndarray, basis: HermBasis) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in the generator basis.

    Raises :class:`ImagResidueError` if the coordinates carry an imaginary
    residue above ``IMAG_RESIDUE_TOL``, which signals a non-Hermitian input.
    """
    p = basis.Rinv @ vec(P)
    residue = float(np.max(np.abs(p.imag))) if p.size else 0.0
    if residue > IMAG_RESIDUE_TOL:
        raise ImagResidueError(
            f"imaginary residue {residue:.3e} exceeds {IMAG_RESIDUE_TOL:.0e}; "
            "input is not Hermitian"
        )
    return p.real.copy()


def reconstruct(p: np.ndarray, basis: HermBasis) -> np.ndarray:
    """Hermitian matrix with real coordinates ``p`` in the generator basis."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (basis.n * basis.n,):
        raise ValueError(
            f"expected {basis.n * basis.n} coordinates, got shape {p.shape}"
        )
    return np.einsum("qrm,m->qr", basis.B, p)


def frobenius_ip(A: np.ndarray, B: np.ndarray) -> complex:
    """Frobenius inner product tr(A^dagger B)."""
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return complex(np.vdot(A, B))


def contract_left(xi: np.ndarray, A: np.ndarray) -> np.ndarray:
    """(xi : A)_{ij} = sum_{kl} xi_{ijkl} A_{kl}."""
    if xi.shape[2:] != A.shape:
        raise ValueError(f"shape mismatch: tensor {xi.shape} vs matrix {A.shape}")
    return np.tensordot(xi, A, axes=([2, 3], [0, 1]))


def contract_right(A: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """(A : xi)_{ij} = sum_{kl} A_{kl} xi_{klij}."""
    if xi.shape[:2] != A.shape:
        raise ValueError(f"shape mismatch: matrix {A.shape} vs tensor {xi.shape}")
    return np.tensordot(A, xi, axes=([0, 1], [0, 1]))
