"""Assemble interchange JSON files (overlap, core Hamiltonian, repulsion
tensor, dipole matrices) for small molecules in the STO-3G basis.

All quantities are in hartree / bohr atomic units.  The repulsion tensor is
written in chemist notation (pq|rs) as a flat array with index
((p*N + q)*N + r)*N + s; dipole matrices take the center of nuclear charge
as origin.  Geometries are recorded in the "name" field of the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .basis import ATOMIC_NUMBER, BasisFunction, build_basis_functions
from .integrals import dipole_prim, eri_prim, kinetic_prim, nuclear_prim, overlap_prim


@dataclass
class GeometrySpec:
    """Element symbols, Cartesian coordinates in bohr, total charge."""

    name: str
    symbols: list[str]
    coords: np.ndarray  # (n_atoms, 3), bohr
    charge: int = 0
    basis: str = "STO-3G"

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if len(self.symbols) < 1:
            raise ValueError("need at least one atom")
        if self.coords.shape != (len(self.symbols), 3):
            raise ValueError(f"coordinate array has shape {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coordinates must be finite")

    @property
    def n_electrons(self) -> int:
        return sum(ATOMIC_NUMBER[s] for s in self.symbols) - self.charge

    def describe(self) -> str:
        atoms = " ".join(
            f"{s}({x:.4f},{y:.4f},{z:.4f})" for s, (x, y, z) in zip(self.symbols, self.coords)
        )
        return f"{self.name} {self.basis} charge={self.charge} bohr: {atoms}"


def _contracted(kernel, f1: BasisFunction, f2: BasisFunction, *args) -> float:
    val = 0.0
    for a, ca in zip(f1.exps, f1.coefs):
        for b, cb in zip(f2.exps, f2.coefs):
            val += ca * cb * kernel(a, f1.lmn, f1.center, b, f2.lmn, f2.center, *args)
    return val


def _contracted_eri(funcs: list[BasisFunction], p: int, q: int, r: int, s: int) -> float:
    fp, fq, fr, fs = funcs[p], funcs[q], funcs[r], funcs[s]
    val = 0.0
    for a, ca in zip(fp.exps, fp.coefs):
        for b, cb in zip(fq.exps, fq.coefs):
            for c, cc in zip(fr.exps, fr.coefs):
                for d, cd in zip(fs.exps, fs.coefs):
                    val += ca * cb * cc * cd * eri_prim(
                        a, fp.lmn, fp.center, b, fq.lmn, fq.center,
                        c, fr.lmn, fr.center, d, fs.lmn, fs.center,
                    )
    return val


def compute_matrices(spec: GeometrySpec) -> dict:
    funcs = build_basis_functions(spec.symbols, spec.coords)
    n = len(funcs)
    charges = np.array([ATOMIC_NUMBER[s] for s in spec.symbols], dtype=float)
    origin = charges @ spec.coords / charges.sum()

    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    dip = np.zeros((3, n, n))
    for i in range(n):
        for j in range(i, n):
            S[i, j] = S[j, i] = _contracted(overlap_prim, funcs[i], funcs[j])
            T[i, j] = T[j, i] = _contracted(kinetic_prim, funcs[i], funcs[j])
            v = 0.0
            for Z, center in zip(charges, spec.coords):
                v -= Z * _contracted(nuclear_prim, funcs[i], funcs[j], center)
            V[i, j] = V[j, i] = v
            for d in range(3):
                dip[d, i, j] = dip[d, j, i] = _contracted(
                    dipole_prim, funcs[i], funcs[j], origin, d
                )

    eri = np.zeros((n, n, n, n))
    # 8-fold permutation symmetry of real orbitals: compute canonical quartets only.
    for p in range(n):
        for q in range(p + 1):
            for r in range(p + 1):
                s_max = q if r == p else r
                for s in range(s_max + 1):
                    val = _contracted_eri(funcs, p, q, r, s)
                    for a, b, c, d in {
                        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
                    }:
                        eri[a, b, c, d] = val

    return {
        "n_basis": n,
        "n_electrons": spec.n_electrons,
        "overlap": S,
        "hcore": T + V,
        "dipole": dip,
        "eri": eri,
        "labels": [f.label for f in funcs],
    }


def write_interchange(spec: GeometrySpec, out_path: str) -> dict:
    """Compute all matrices for `spec` and write the interchange JSON file."""
    mats = compute_matrices(spec)
    n = mats["n_basis"]
    payload = {
        "name": spec.describe(),
        "n_basis": n,
        "n_electrons": mats["n_electrons"],
        "units": "hartree_bohr",
        "overlap": mats["overlap"].reshape(-1).tolist(),
        "hcore": mats["hcore"].reshape(-1).tolist(),
        "dipole_x": mats["dipole"][0].reshape(-1).tolist(),
        "dipole_y": mats["dipole"][1].reshape(-1).tolist(),
        "dipole_z": mats["dipole"][2].reshape(-1).tolist(),
        "eri": mats["eri"].reshape(-1).tolist(),
        "basis_labels": mats["labels"],
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    return payload


BUNDLED_SYSTEMS = {
    "h2": GeometrySpec(
        name="H2",
        symbols=["H", "H"],
        coords=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.4]]),
        charge=0,
    ),
    "hehp": GeometrySpec(
        name="HeH+",
        symbols=["He", "H"],
        coords=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.4632]]),
        charge=1,
    ),
    "lih": GeometrySpec(
        name="LiH",
        symbols=["Li", "H"],
        coords=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 3.015]]),
        charge=0,
    ),
}
