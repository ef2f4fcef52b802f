"""STO-3G basis data and contracted basis-function assembly.

Exponents and contraction coefficients are the standard STO-3G values
(molecule-optimized Slater scaling baked in: zeta = 1.24 for H, 1.69 for
He, 2.69 / 0.80 for Li core / valence).  Contractions are renormalized to
unit self-overlap after attaching primitive norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrals import overlap_prim, primitive_norm

STO3G = {
    "H": [
        ("s", [3.425250914, 0.6239137298, 0.1688554040],
         [0.1543289673, 0.5353281423, 0.4446345422]),
    ],
    "He": [
        ("s", [6.362421394, 1.158922999, 0.3136497915],
         [0.1543289673, 0.5353281423, 0.4446345422]),
    ],
    "Li": [
        ("s", [16.11957475, 2.936200663, 0.7946504870],
         [0.1543289673, 0.5353281423, 0.4446345422]),
        ("sp", [0.6362897469, 0.1478600533, 0.0480886784],
         [-0.09996722919, 0.3995128261, 0.7001154689],
         [0.1559162750, 0.6076837186, 0.3919573931]),
    ],
}

ATOMIC_NUMBER = {"H": 1, "He": 2, "Li": 3}

_CART = {"s": [(0, 0, 0)], "p": [(1, 0, 0), (0, 1, 0), (0, 0, 1)]}


@dataclass
class BasisFunction:
    """Contracted Cartesian Gaussian: exponents, weighted coefficients, center."""

    center: np.ndarray
    lmn: tuple[int, int, int]
    exps: list[float]
    coefs: list[float] = field(default_factory=list)
    label: str = ""

    def normalize(self):
        w = [c * primitive_norm(a, self.lmn) for a, c in zip(self.exps, self.coefs)]
        s = 0.0
        for wa, a in zip(w, self.exps):
            for wb, b in zip(w, self.exps):
                s += wa * wb * overlap_prim(a, self.lmn, self.center, b, self.lmn, self.center)
        self.coefs = [wi / np.sqrt(s) for wi in w]
        return self


def build_basis_functions(symbols: list[str], coords: np.ndarray) -> list[BasisFunction]:
    """STO-3G basis functions for a molecule, atom by atom, p shells in x,y,z order."""
    funcs: list[BasisFunction] = []
    for sym, xyz in zip(symbols, coords):
        if sym not in STO3G:
            raise ValueError(f"no STO-3G data for element {sym!r}")
        for shell in STO3G[sym]:
            kind, exps = shell[0], shell[1]
            subshells = [("s", shell[2])] if kind == "s" else [("s", shell[2]), ("p", shell[3])]
            for sub_kind, coefs in subshells:
                for lmn in _CART[sub_kind]:
                    funcs.append(
                        BasisFunction(
                            center=np.asarray(xyz, dtype=float),
                            lmn=lmn,
                            exps=list(exps),
                            coefs=list(coefs),
                            label=f"{sym}_{sub_kind}{lmn}",
                        ).normalize()
                    )
    return funcs
