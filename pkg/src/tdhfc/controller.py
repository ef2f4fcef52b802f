"""Dense feedforward controller mapping density coordinates to field amplitudes.

The network input is the real coordinate vector of the density matrix
(length n**2), the output the amplitude vector over the active dipoles.
Hidden layers use softplus; the output layer is either the identity or the
bounded map z -> 10 tanh(z) ("tanh10").  Parameters live in one flat vector
ordered layer by layer, each layer's weight matrix (row-major,
output x input) followed by its bias, so checkpoints are portable.

Besides the forward pass this module provides exact reverse-mode Jacobians
with respect to the input and the parameters, and the lifted derivatives of
the external dipole potential V = sum_j a_j M_j that the adjoint sweep
consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .herm import HermBasis, unvec
from .molsys import MolSystem

OUTPUT_ACTIVATIONS = ("identity", "tanh10")
TANH_SCALE = 10.0
_SOFTPLUS_CUTOFF = 30.0


@dataclass(frozen=True)
class NetConfig:
    """Layer widths [n_in, hidden..., n_out] and the output activation."""

    layer_sizes: tuple[int, ...]
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(w) for w in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(w < 1 for w in self.layer_sizes):
            raise ValueError("layer widths must be >= 1")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def param_count(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(self.n_layers))


@dataclass(frozen=True)
class VextDerivs:
    """External potential with its density and parameter derivatives.

    ``dV_dP[j, l, r, s]`` differentiates entry (j, l) with respect to density
    entry (r, s) through the controller; ``dV_dtheta[t]`` is the Hermitian
    derivative slice for parameter t.
    """

    value: np.ndarray      # (n, n)
    dV_dP: np.ndarray      # (n, n, n, n)
    dV_dtheta: np.ndarray  # (M, n, n)


def glorot_init(cfg: NetConfig, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases, from a seeded PCG64 stream.

    Weights are uniform on +-sqrt(6 / (fan_in + fan_out)).  The draw order
    follows the flat parameter layout, so a given seed pins the full vector.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    theta = np.zeros(cfg.param_count)
    offset = 0
    sizes = cfg.layer_sizes
    for i in range(cfg.n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=fan_out * fan_in)
        theta[offset:offset + w.size] = w
        offset += w.size + fan_out  # biases stay zero
    return theta


def unpack(cfg: NetConfig, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat parameter vector into per-layer (weights, bias) views."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cfg.param_count,):
        raise ValueError(f"expected {cfg.param_count} parameters, got shape {theta.shape}")
    layers = []
    offset = 0
    sizes = cfg.layer_sizes
    for i in range(cfg.n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        W = theta[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
        offset += fan_out * fan_in
        b = theta[offset:offset + fan_out]
        offset += fan_out
        layers.append((W, b))
    return layers


def _softplus(x: np.ndarray) -> np.ndarray:
    # exp(30) is representable but the guard skips the pointless exp/log1p.
    return np.where(x > _SOFTPLUS_CUTOFF, x, np.log1p(np.exp(np.minimum(x, _SOFTPLUS_CUTOFF))))


def _softplus_deriv(x: np.ndarray) -> np.ndarray:
    # logistic sigma(x), overflow-safe on both tails
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_pass(cfg: NetConfig, theta: np.ndarray, p: np.ndarray):
    """Activations and pre-activations of every layer."""
    p = np.asarray(p, dtype=float)
    if p.shape != (cfg.layer_sizes[0],):
        raise ValueError(f"expected input of length {cfg.layer_sizes[0]}, got shape {p.shape}")
    layers = unpack(cfg, theta)
    acts = [p]
    pre = []
    x = p
    for idx, (W, b) in enumerate(layers):
        z = W @ x + b
        pre.append(z)
        if idx < len(layers) - 1:
            x = _softplus(z)
        elif cfg.output_activation == "tanh10":
            x = TANH_SCALE * np.tanh(z)
        else:
            x = z
        acts.append(x)
    return layers, acts, pre


def forward(cfg: NetConfig, theta: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Amplitude vector a(p; theta)."""
    return _forward_pass(cfg, theta, p)[1][-1]


def jacobians(cfg: NetConfig, theta: np.ndarray, p: np.ndarray):
    """Exact Jacobians (da/dp, da/dtheta) by reverse accumulation."""
    layers, acts, pre = _forward_pass(cfg, theta, p)
    n_out = cfg.layer_sizes[-1]
    L = len(layers)
    if cfg.output_activation == "tanh10":
        sens = np.diag(TANH_SCALE * (1.0 - np.tanh(pre[-1]) ** 2))
    else:
        sens = np.eye(n_out)
    # sens == da/dz_l while walking backward; harvest weight/bias blocks.
    da_dtheta = np.zeros((n_out, cfg.param_count))
    offsets = []
    off = 0
    for W, b in layers:
        offsets.append(off)
        off += W.size + b.size
    for l in range(L - 1, -1, -1):
        W, b = layers[l]
        w_block = np.einsum("oi,j->oij", sens, acts[l]).reshape(n_out, W.size)
        da_dtheta[:, offsets[l]:offsets[l] + W.size] = w_block
        da_dtheta[:, offsets[l] + W.size:offsets[l] + W.size + b.size] = sens
        if l > 0:
            sens = (sens @ W) * _softplus_deriv(pre[l - 1])[None, :]
    da_dp = sens @ layers[0][0]
    return da_dp, da_dtheta


def vext_with_derivs(
    sys: MolSystem, basis: HermBasis, cfg: NetConfig, theta: np.ndarray, P: np.ndarray
) -> VextDerivs:
    """External potential at density P plus its density/parameter derivatives.

    The density pathway chains the controller Jacobian through the
    real-coordinate map: dV/dP[j,l,r,s] = sum_j' M_j'[j,l] *
    (da/dp @ Rinv)[j', r*n+s].
    """
    n = sys.n
    p = unvec(P, basis)
    a = forward(cfg, theta, p)
    da_dp, da_dtheta = jacobians(cfg, theta, p)
    M = sys.active_dipoles
    value = np.einsum("a,ajl->jl", a, M)
    coeff = (da_dp.astype(complex) @ basis.Rinv).reshape(sys.n_active, n, n)
    dV_dP = np.einsum("ajl,ars->jlrs", M.astype(complex), coeff)
    dV_dtheta = np.einsum("at,ajl->tjl", da_dtheta, M.astype(complex))
    return VextDerivs(value=value, dV_dP=dV_dP, dV_dtheta=dV_dtheta)


def save_theta(path: str, cfg: NetConfig, theta: np.ndarray) -> None:
    """Write a parameter checkpoint as portable JSON."""
    doc = {
        "layer_sizes": list(cfg.layer_sizes),
        "output_activation": cfg.output_activation,
        "theta": np.asarray(theta, dtype=float).tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_theta(path: str) -> tuple[NetConfig, np.ndarray]:
    """Read a parameter checkpoint; returns (config, flat parameters)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    cfg = NetConfig(
        layer_sizes=tuple(doc["layer_sizes"]),
        output_activation=doc.get("output_activation", "identity"),
    )
    theta = np.asarray(doc["theta"], dtype=float)
    if theta.shape != (cfg.param_count,):
        raise ValueError(
            f"{path}: checkpoint has {theta.size} parameters, config needs {cfg.param_count}"
        )
    return cfg, theta
