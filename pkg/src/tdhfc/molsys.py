"""Molecular system ingestion and Hamiltonian assembly.

Interchange files carry overlap, core Hamiltonian, two-electron repulsion
tensor (chemist notation), and dipole matrices in the atomic-orbital basis;
see :func:`load_system` for the exact schema.  :func:`orthogonalize` moves
everything into the canonically orthogonalized working basis where the rest
of the package operates.  Closed-shell restricted conventions are used
throughout: the density matrix has trace N_e / 2 and the two-electron part
of the Fock matrix is G(D)_pq = sum_rs D_sr [2 (pq|rs) - (pr|qs)].
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (
    InvariantViolationError,
    NearSingularOverlapError,
    NoConvergenceError,
    ParseError,
)
from .herm import hermitize

SYMMETRY_TOL = 1e-10
ACTIVE_DIPOLE_TOL = 1e-10
OVERLAP_MIN_EIG = 1e-8
SCF_COMMUTATOR_TOL = 1e-8
SCF_MAX_ITERS = 500


@dataclass(frozen=True)
class MolSystemRaw:
    """Validated molecular data exactly as read from an interchange file."""

    name: str
    n_basis: int
    n_electrons: int
    overlap: np.ndarray   # (n, n) real symmetric
    hcore: np.ndarray     # (n, n) real symmetric, hartree
    eri: np.ndarray       # (n, n, n, n) chemist (pq|rs), hartree
    dipole: np.ndarray    # (3, n, n) real symmetric, bohr * e

    def __post_init__(self):
        for arr in (self.overlap, self.hcore, self.eri, self.dipole):
            arr.setflags(write=False)


@dataclass(frozen=True)
class MolSystem:
    """Molecular system in the canonically orthogonalized basis.

    ``g2co[j, l, u, v]`` is the derivative of the two-electron part of the
    field-free Hamiltonian with respect to density entry (u, v); the Fock
    build contracts it directly, which is equivalent to transforming the
    density back to the atomic-orbital basis, building G there, and
    transforming the result forward.
    """

    raw: MolSystemRaw
    X: np.ndarray          # (n, n) canonical orthogonalization transform
    hcore_co: np.ndarray   # (n, n)
    dipoles_co: np.ndarray  # (3, n, n)
    active: tuple[int, ...]  # indices of dipoles with nonvanishing norm
    g2co: np.ndarray       # (n, n, n, n)

    def __post_init__(self):
        for arr in (self.X, self.hcore_co, self.dipoles_co, self.g2co):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.raw.n_basis

    @property
    def n_electrons(self) -> int:
        return self.raw.n_electrons

    @property
    def n_active(self) -> int:
        return len(self.active)

    @property
    def active_dipoles(self) -> np.ndarray:
        """(n_active, n, n) stack of the active dipole matrices."""
        return self.dipoles_co[list(self.active)]

    @property
    def dipole_gram(self) -> np.ndarray:
        """Gram matrix of the active dipoles under the Frobenius pairing."""
        M = self.active_dipoles
        return np.einsum("auv,buv->ab", M, M).real


def bundled_data_path(filename: str) -> str:
    """Resolve a bundled data file, honoring the TDHFC_DATA_DIR override."""
    override = os.environ.get("TDHFC_DATA_DIR")
    if override:
        candidate = os.path.join(override, filename)
        if os.path.exists(candidate):
            return candidate
    return str(resources.files("tdhfc").joinpath("data", filename))


_REQUIRED_KEYS = (
    "name", "n_basis", "n_electrons", "units",
    "overlap", "hcore", "dipole_x", "dipole_y", "dipole_z", "eri",
)


def load_system(path: str) -> MolSystemRaw:
    """Read and validate an interchange JSON file.

    Schema: UTF-8 JSON object with keys "name" (string), "n_basis" (int),
    "n_electrons" (int), "units" (must equal "hartree_bohr"), "overlap",
    "hcore", "dipole_x", "dipole_y", "dipole_z" (row-major flat arrays of
    n_basis**2 doubles), and "eri" (flat array of n_basis**4 doubles with
    index ((p*N + q)*N + r)*N + s for chemist-notation (pq|rs)).  Unknown
    keys are ignored.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top-level value must be an object")
    for key in _REQUIRED_KEYS:
        if key not in doc:
            raise ParseError(f"{path}: missing key {key!r}")
    if doc["units"] != "hartree_bohr":
        raise ParseError(f"{path}: units must be 'hartree_bohr', got {doc['units']!r}")

    try:
        n = int(doc["n_basis"])
        n_e = int(doc["n_electrons"])
        overlap = np.asarray(doc["overlap"], dtype=float).reshape(n, n)
        hcore = np.asarray(doc["hcore"], dtype=float).reshape(n, n)
        dipole = np.stack(
            [np.asarray(doc[f"dipole_{ax}"], dtype=float).reshape(n, n) for ax in "xyz"]
        )
        eri = np.asarray(doc["eri"], dtype=float).reshape(n, n, n, n)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc

    raw = MolSystemRaw(
        name=str(doc["name"]), n_basis=n, n_electrons=n_e,
        overlap=overlap, hcore=hcore, eri=eri, dipole=dipole,
    )
    validate_raw(raw)
    return raw


def validate_raw(raw: MolSystemRaw) -> None:
    """Check every MolSystemRaw invariant; raise naming the failing check."""
    def fail(check: str):
        raise InvariantViolationError(f"{raw.name}: {check}")

    if raw.n_basis < 1:
        fail("n_basis must be >= 1")
    if raw.n_electrons <= 0 or raw.n_electrons % 2 != 0:
        fail("n_electrons must be positive and even (closed shell)")
    for label, arr in (("overlap", raw.overlap), ("hcore", raw.hcore),
                       ("eri", raw.eri), ("dipole", raw.dipole)):
        if not np.all(np.isfinite(arr)):
            fail(f"{label} contains non-finite entries")
    for label, mat in (("overlap", raw.overlap), ("hcore", raw.hcore),
                       ("dipole_x", raw.dipole[0]), ("dipole_y", raw.dipole[1]),
                       ("dipole_z", raw.dipole[2])):
        if np.max(np.abs(mat - mat.T)) > SYMMETRY_TOL:
            fail(f"{label} is not symmetric")
    if np.min(np.linalg.eigvalsh(raw.overlap)) <= 0:
        fail("overlap is not positive-definite")
    eri = raw.eri
    for label, permuted in (
        ("(pq|rs)=(qp|rs)", eri.transpose(1, 0, 2, 3)),
        ("(pq|rs)=(pq|sr)", eri.transpose(0, 1, 3, 2)),
        ("(pq|rs)=(rs|pq)", eri.transpose(2, 3, 0, 1)),
    ):
        if np.max(np.abs(eri - permuted)) > SYMMETRY_TOL:
            fail(f"eri permutation symmetry {label} broken")


def orthogonalize(raw: MolSystemRaw) -> MolSystem:
    """Build the canonical orthogonalization X = U s^(-1/2) and transform.

    Overlap eigenvalues are taken in ascending order and each eigenvector's
    sign is fixed so its largest-magnitude entry is positive, which makes the
    transform deterministic across platforms.
    """
    s, U = np.linalg.eigh(raw.overlap)
    if np.min(s) < OVERLAP_MIN_EIG:
        raise NearSingularOverlapError(
            f"{raw.name}: smallest overlap eigenvalue {np.min(s):.3e} < {OVERLAP_MIN_EIG:.0e}"
        )
    for col in range(U.shape[1]):
        lead = np.argmax(np.abs(U[:, col]))
        if U[lead, col] < 0:
            U[:, col] = -U[:, col]
    X = U @ np.diag(s**-0.5)

    hcore_co = X.T @ raw.hcore @ X
    dipoles_co = np.stack([X.T @ raw.dipole[d] @ X for d in range(3)])
    active = tuple(
        d for d in range(3) if np.linalg.norm(dipoles_co[d]) > ACTIVE_DIPOLE_TOL
    )
    # Derivative of the two-electron term with respect to the working-basis
    # density: fold the back-and-forth basis transforms into the repulsion
    # tensor once.  g2[p,q,r,s] = 2(pq|rs) - (pr|qs) contracts against the
    # AO density entry (s, r).
    g2 = 2.0 * raw.eri - raw.eri.transpose(0, 2, 1, 3)
    g2co = np.einsum("pj,ql,pqrs,su,rv->jluv", X, X, g2, X, X, optimize=True)
    return MolSystem(
        raw=raw, X=X, hcore_co=hcore_co, dipoles_co=dipoles_co,
        active=active, g2co=g2co,
    )


def fock(sys: MolSystem, P: np.ndarray) -> np.ndarray:
    """Field-free Hamiltonian H0(P) in the orthogonalized basis."""
    if P.shape != (sys.n, sys.n):
        raise ValueError(f"density has shape {P.shape}, system dimension is {sys.n}")
    return sys.hcore_co + np.einsum("jluv,uv->jl", sys.g2co, P)


def fock_ao_path(sys: MolSystem, P: np.ndarray) -> np.ndarray:
    """H0(P) via the explicit AO round trip; reference for testing fock()."""
    P_ao = sys.X @ P @ sys.X.conj().T
    g2 = 2.0 * sys.raw.eri - sys.raw.eri.transpose(0, 2, 1, 3)
    G = np.einsum("pqrs,sr->pq", g2, P_ao)
    return sys.X.T @ (sys.raw.hcore + G) @ sys.X

def hamiltonian(sys: MolSystem, P: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Full Hamiltonian H0(P) plus the dipole coupling to amplitudes ``a``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (sys.n_active,):
        raise ValueError(f"expected {sys.n_active} amplitudes, got shape {a.shape}")
    H = fock(sys, P)
    for amp, idx in zip(a, sys.active):
        H = H + amp * sys.dipoles_co[idx]
    return H


def ground_state(sys: MolSystem) -> np.ndarray:
    """Closed-shell SCF fixed point by repeated diagonalization.

    Aufbau occupation of the lowest N_e/2 orbitals of H0(P); converged when
    the commutator norm ||[H0(P), P]||_F drops below 1e-8.
    """
    n_occ = sys.n_electrons // 2
    if n_occ > sys.n:
        raise InvariantViolationError(
            f"{sys.raw.name}: {sys.n_electrons} electrons exceed basis capacity"
        )
    P = np.zeros((sys.n, sys.n), dtype=np.complex128)
    for _ in range(SCF_MAX_ITERS):
        H = fock(sys, P)
        comm = H @ P - P @ H
        if np.linalg.norm(comm) < SCF_COMMUTATOR_TOL and np.any(P):
            return P
        _, C = np.linalg.eigh(H)
        occ = C[:, :n_occ]
        P = hermitize(occ @ occ.conj().T)
    raise NoConvergenceError(
        f"{sys.raw.name}: SCF not converged in {SCF_MAX_ITERS} iterations"
    )
