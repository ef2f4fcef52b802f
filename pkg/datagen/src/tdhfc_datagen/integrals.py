"""Gaussian integral kernels over contracted Cartesian shells.

McMurchie-Davidson scheme: Cartesian Gaussian products are expanded in
Hermite Gaussians (coefficients ``hermite_expansion``), one-electron
integrals reduce to the t = 0 or t = 1 coefficients, and Coulomb-type
integrals contract the expansions against Hermite Coulomb integrals
``hermite_coulomb`` built on the Boys function.  Angular momenta up to p
are exercised here; the recursions themselves are general.
"""

from __future__ import annotations

from functools import lru_cache
from math import exp, pi, sqrt

import numpy as np
from scipy.special import gamma, gammainc


def boys(n: int, T: float) -> float:
    """Boys function F_n(T) via the regularized lower incomplete gamma."""
    if T < 1e-12:
        return 1.0 / (2 * n + 1) - T / (2 * n + 3)
    a = n + 0.5
    return 0.5 * gamma(a) * gammainc(a, T) * T ** (-a)


def hermite_expansion(i: int, j: int, t: int, Qx: float, a: float, b: float) -> float:
    """Coefficient E_t^{ij} of the Hermite expansion of a 1D Gaussian product.

    Qx is the center separation A_x - B_x; a, b are the exponents.
    """
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return exp(-q * Qx * Qx)
    if j == 0:
        return (
            hermite_expansion(i - 1, j, t - 1, Qx, a, b) / (2 * p)
            - q * Qx / a * hermite_expansion(i - 1, j, t, Qx, a, b)
            + (t + 1) * hermite_expansion(i - 1, j, t + 1, Qx, a, b)
        )
    return (
        hermite_expansion(i, j - 1, t - 1, Qx, a, b) / (2 * p)
        + q * Qx / b * hermite_expansion(i, j - 1, t, Qx, a, b)
        + (t + 1) * hermite_expansion(i, j - 1, t + 1, Qx, a, b)
    )


def hermite_coulomb(t: int, u: int, v: int, n: int, p: float, PC: np.ndarray) -> float:
    """Hermite Coulomb integral R^n_{tuv} for composite exponent p."""
    if t == u == v == 0:
        T = p * float(PC @ PC)
        return (-2.0 * p) ** n * boys(n, T)
    if t > 0:
        val = 0.0
        if t > 1:
            val += (t - 1) * hermite_coulomb(t - 2, u, v, n + 1, p, PC)
        val += PC[0] * hermite_coulomb(t - 1, u, v, n + 1, p, PC)
        return val
    if u > 0:
        val = 0.0
        if u > 1:
            val += (u - 1) * hermite_coulomb(t, u - 2, v, n + 1, p, PC)
        val += PC[1] * hermite_coulomb(t, u - 1, v, n + 1, p, PC)
        return val
    val = 0.0
    if v > 1:
        val += (v - 1) * hermite_coulomb(t, u, v - 2, n + 1, p, PC)
    val += PC[2] * hermite_coulomb(t, u, v - 1, n + 1, p, PC)
    return val


@lru_cache(maxsize=None)
def _double_factorial(k: int) -> int:
    return 1 if k <= 0 else k * _double_factorial(k - 2)


def primitive_norm(alpha: float, lmn: tuple[int, int, int]) -> float:
    l, m, n = lmn
    num = (2 * alpha / pi) ** 0.75 * (4 * alpha) ** ((l + m + n) / 2)
    den = sqrt(
        _double_factorial(2 * l - 1)
        * _double_factorial(2 * m - 1)
        * _double_factorial(2 * n - 1)
    )
    return num / den


def overlap_prim(a, lmn1, A, b, lmn2, B) -> float:
    """Overlap of two primitive Cartesian Gaussians."""
    p = a + b
    s = (pi / p) ** 1.5
    for d in range(3):
        s *= hermite_expansion(lmn1[d], lmn2[d], 0, A[d] - B[d], a, b)
    return s


def _overlap_1d(i, j, Qx, a, b) -> float:
    return hermite_expansion(i, j, 0, Qx, a, b) * sqrt(pi / (a + b))


def kinetic_prim(a, lmn1, A, b, lmn2, B) -> float:
    """Kinetic-energy integral, assembled from shifted overlaps on the ket."""
    l2, m2, n2 = lmn2
    term0 = b * (2 * (l2 + m2 + n2) + 3) * overlap_prim(a, lmn1, A, b, lmn2, B)
    term1 = -2 * b * b * (
        overlap_prim(a, lmn1, A, b, (l2 + 2, m2, n2), B)
        + overlap_prim(a, lmn1, A, b, (l2, m2 + 2, n2), B)
        + overlap_prim(a, lmn1, A, b, (l2, m2, n2 + 2), B)
    )
    term2 = -0.5 * (
        l2 * (l2 - 1) * overlap_prim(a, lmn1, A, b, (l2 - 2, m2, n2), B)
        + m2 * (m2 - 1) * overlap_prim(a, lmn1, A, b, (l2, m2 - 2, n2), B)
        + n2 * (n2 - 1) * overlap_prim(a, lmn1, A, b, (l2, m2, n2 - 2), B)
    )
    return term0 + term1 + term2


def nuclear_prim(a, lmn1, A, b, lmn2, B, C) -> float:
    """Attraction integral <g_a | 1/|r - C| | g_b> (positive by convention)."""
    p = a + b
    P = (a * A + b * B) / p
    val = 0.0
    for t in range(lmn1[0] + lmn2[0] + 1):
        Ex = hermite_expansion(lmn1[0], lmn2[0], t, A[0] - B[0], a, b)
        for u in range(lmn1[1] + lmn2[1] + 1):
            Ey = hermite_expansion(lmn1[1], lmn2[1], u, A[1] - B[1], a, b)
            for v in range(lmn1[2] + lmn2[2] + 1):
                Ez = hermite_expansion(lmn1[2], lmn2[2], v, A[2] - B[2], a, b)
                val += Ex * Ey * Ez * hermite_coulomb(t, u, v, 0, p, P - C)
    return 2 * pi / p * val


def dipole_prim(a, lmn1, A, b, lmn2, B, C, direction: int) -> float:
    """Moment integral <g_a | (r - C)_direction | g_b>."""
    p = a + b
    P = (a * A + b * B) / p
    comps = []
    for d in range(3):
        i, j, Qx = lmn1[d], lmn2[d], A[d] - B[d]
        if d == direction:
            val = hermite_expansion(i, j, 1, Qx, a, b) + (P[d] - C[d]) * hermite_expansion(
                i, j, 0, Qx, a, b
            )
        else:
            val = hermite_expansion(i, j, 0, Qx, a, b)
        comps.append(val * sqrt(pi / p))
    return comps[0] * comps[1] * comps[2]


def eri_prim(a, lmn1, A, b, lmn2, B, c, lmn3, C, d, lmn4, D) -> float:
    """Two-electron repulsion integral (ab|cd) over primitives."""
    p = a + b
    q = c + d
    alpha = p * q / (p + q)
    P = (a * A + b * B) / p
    Q = (c * C + d * D) / q
    val = 0.0
    for t in range(lmn1[0] + lmn2[0] + 1):
        E1x = hermite_expansion(lmn1[0], lmn2[0], t, A[0] - B[0], a, b)
        for u in range(lmn1[1] + lmn2[1] + 1):
            E1y = hermite_expansion(lmn1[1], lmn2[1], u, A[1] - B[1], a, b)
            for v in range(lmn1[2] + lmn2[2] + 1):
                E1z = hermite_expansion(lmn1[2], lmn2[2], v, A[2] - B[2], a, b)
                pre = E1x * E1y * E1z
                if pre == 0.0:
                    continue
                for tau in range(lmn3[0] + lmn4[0] + 1):
                    E2x = hermite_expansion(lmn3[0], lmn4[0], tau, C[0] - D[0], c, d)
                    for nu in range(lmn3[1] + lmn4[1] + 1):
                        E2y = hermite_expansion(lmn3[1], lmn4[1], nu, C[1] - D[1], c, d)
                        for phi in range(lmn3[2] + lmn4[2] + 1):
                            E2z = hermite_expansion(lmn3[2], lmn4[2], phi, C[2] - D[2], c, d)
                            sign = (-1.0) ** (tau + nu + phi)
                            val += (
                                pre
                                * sign
                                * E2x
                                * E2y
                                * E2z
                                * hermite_coulomb(t + tau, u + nu, v + phi, 0, alpha, P - Q)
                            )
    return val * 2 * pi ** 2.5 / (p * q * sqrt(p + q))
