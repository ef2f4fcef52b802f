"""Trust-region quasi-Newton outer loop with multi-start and selection.

The curvature model is limited-memory SR1: symmetric by construction and
deliberately not forced positive-definite, which suits objectives whose
true Hessian is indefinite.  Subproblems are solved by Steihaug truncated
conjugate gradients, stepping to the trust boundary on nonpositive
curvature.  Pairs from rejected trial steps still update the model.

Runs terminate when the terminal mean absolute error drops below
``mae_tol`` (the convergence criterion), when the iteration budget is
exhausted, or when the radius collapses.  Gradient norms are recorded but
never used for termination.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .controller import NetConfig, glorot_init
from .errors import NoConvergedRunsError, NonFiniteObjectiveError

SR1_SKIP_TOL = 1e-8
MIN_TR_RADIUS = 1e-12


@dataclass(frozen=True)
class OptConfig:
    """Outer-loop settings; defaults follow the bundled campaign protocols."""

    max_iters: int = 100
    memory: int = 10
    tr_radius0: float = 1.0
    tr_max: float = 100.0
    eta_accept: float = 1e-4
    shrink: float = 0.25
    expand: float = 2.0
    mae_tol: float = 1e-2
    n_restarts: int = 1
    seed0: int = 0
    rho: float = 0.0
    rescale: bool = False
    method: str = "lsr1"  # "lsr1" | "gd" (backtracking fallback for debugging)

    def __post_init__(self):
        if self.mae_tol <= 0:
            raise ValueError("mae_tol must be positive")
        for name in ("max_iters", "memory", "tr_radius0", "tr_max", "eta_accept",
                     "shrink", "expand", "n_restarts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.method not in ("lsr1", "gd"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class RunRecord:
    """Outcome of one restart."""

    seed: int
    theta_final: np.ndarray
    alpha: float
    beta: float
    iters: int
    converged: bool
    grad_norm_initial: float
    grad_norm_final: float
    status: str = ""
    objective_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "theta_final": np.asarray(self.theta_final, dtype=float).tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "iters": self.iters,
            "converged": self.converged,
            "grad_norm_initial": self.grad_norm_initial,
            "grad_norm_final": self.grad_norm_final,
            "status": self.status,
            "objective_history": list(self.objective_history),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        return cls(
            seed=int(doc["seed"]),
            theta_final=np.asarray(doc["theta_final"], dtype=float),
            alpha=float(doc["alpha"]),
            beta=float(doc["beta"]),
            iters=int(doc["iters"]),
            converged=bool(doc["converged"]),
            grad_norm_initial=float(doc["grad_norm_initial"]),
            grad_norm_final=float(doc["grad_norm_final"]),
            status=str(doc.get("status", "")),
            objective_history=[float(x) for x in doc.get("objective_history", [])],
        )


class LSR1Model:
    """Limited-memory SR1 curvature model, replayed as rank-1 corrections.

    B = gamma*I + sum_i u_i u_i^T / (u_i . s_i) with u_i = y_i - B_{i-1} s_i;
    pairs whose denominator is too small relative to ||s|| ||u|| are skipped,
    which keeps the replay well conditioned.
    """

    def __init__(self, dim: int, memory: int):
        self.dim = dim
        self.memory = memory
        self.pairs: list[tuple[np.ndarray, np.ndarray]] = []
        self.gamma = 1.0
        self._corrections: list[tuple[np.ndarray, float]] = []

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.gamma * v
        for u, d in self._corrections:
            out = out + (u @ v) / d * u
        return out

    def _rebuild(self):
        self._corrections = []
        for s, y in self.pairs:
            u = y - self.matvec(s)
            d = float(u @ s)
            if abs(d) >= SR1_SKIP_TOL * np.linalg.norm(s) * max(np.linalg.norm(u), 1e-300):
                self._corrections.append((u, d))

    def update(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Absorb a displacement/gradient-difference pair; False if skipped."""
        u = y - self.matvec(s)
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0 or abs(u @ s) < SR1_SKIP_TOL * np.linalg.norm(s) * norm_u:
            return False
        self.pairs.append((s.copy(), y.copy()))
        if len(self.pairs) > self.memory:
            self.pairs.pop(0)
        sy = float(s @ y)
        if sy != 0.0 and np.isfinite(sy):
            self.gamma = float(np.clip(abs((y @ y) / sy), 1e-8, 1e8))
        self._rebuild()
        return True


def steihaug_cg(grad: np.ndarray, model: LSR1Model, radius: float,
                max_iter: int | None = None) -> np.ndarray:
    """Approximately minimize g.p + p.Bp/2 within ||p|| <= radius."""
    dim = len(grad)
    max_iter = max_iter or 2 * dim
    z = np.zeros(dim)
    r = grad.copy()
    d = -r
    rr = float(r @ r)
    if np.sqrt(rr) == 0.0:
        return z
    tol = min(0.5, np.sqrt(np.sqrt(rr))) * np.sqrt(rr)

    def to_boundary(z, d):
        a = float(d @ d)
        b = 2.0 * float(z @ d)
        c = float(z @ z) - radius * radius
        tau = (-b + np.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)
        return z + tau * d

    for _ in range(max_iter):
        Bd = model.matvec(d)
        curv = float(d @ Bd)
        if curv <= 1e-14 * float(d @ d):
            return to_boundary(z, d)
        alpha = rr / curv
        z_next = z + alpha * d
        if np.linalg.norm(z_next) >= radius:
            return to_boundary(z, d)
        z = z_next
        r = r + alpha * Bd
        rr_next = float(r @ r)
        if np.sqrt(rr_next) < tol:
            return z
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return z


def _check_finite(f: float, g: np.ndarray):
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteObjectiveError(f"objective {f}, gradient finite: "
                                      f"{bool(np.all(np.isfinite(g)))}")


def minimize(fg, theta0: np.ndarray, cfg: OptConfig, seed: int = 0) -> RunRecord:
    """Trust-region L-SR1 descent from theta0.

    ``fg(theta)`` must return (objective, gradient, metrics); convergence is
    declared when metrics["beta"] (terminal mean absolute error) drops below
    cfg.mae_tol.  A non-finite evaluation aborts the run, which is recorded
    as not converged.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    model = LSR1Model(len(theta), cfg.memory)
    radius = cfg.tr_radius0
    status = "max_iters"
    iters = 0
    try:
        f, g, met = fg(theta)
        _check_finite(f, g)
    except (NonFiniteObjectiveError, np.linalg.LinAlgError):
        return RunRecord(seed=seed, theta_final=theta, alpha=np.nan, beta=np.nan,
                         iters=0, converged=False, grad_norm_initial=np.nan,
                         grad_norm_final=np.nan, status="nonfinite")
    grad_norm_initial = float(np.linalg.norm(g))
    history = [f]
    converged = met.get("beta", np.inf) < cfg.mae_tol
    if converged:
        status = "converged"
    while not converged and iters < cfg.max_iters:
        iters += 1
        if cfg.method == "gd":
            step = _backtracking_step(fg, theta, f, g)
        else:
            step = steihaug_cg(g, model, radius)
        if np.linalg.norm(step) == 0.0:
            status = "stationary"
            break
        try:
            f_trial, g_trial, met_trial = fg(theta + step)
            _check_finite(f_trial, g_trial)
        except (NonFiniteObjectiveError, np.linalg.LinAlgError):
            status = "nonfinite"
            break
        if cfg.method == "lsr1":
            pred = -(float(g @ step) + 0.5 * float(step @ model.matvec(step)))
            model.update(step, g_trial - g)
            ratio = (f - f_trial) / pred if pred > 0 else -np.inf
            accepted = pred > 0 and ratio >= cfg.eta_accept
            if accepted:
                theta = theta + step
                f, g, met = f_trial, g_trial, met_trial
                history.append(f)
                if met.get("beta", np.inf) < cfg.mae_tol:
                    converged = True
                    status = "converged"
            if ratio >= 0.75 and np.linalg.norm(step) >= 0.8 * radius:
                radius = min(cfg.expand * radius, cfg.tr_max)
            elif ratio < 0.25:
                radius *= cfg.shrink
        else:
            theta = theta + step
            f, g, met = fg(theta)
            history.append(f)
            if met.get("beta", np.inf) < cfg.mae_tol:
                converged = True
                status = "converged"
        if radius < MIN_TR_RADIUS:
            status = "radius_collapsed"
            break
    return RunRecord(
        seed=seed, theta_final=theta,
        alpha=float(met.get("alpha", np.nan)), beta=float(met.get("beta", np.nan)),
        iters=iters, converged=converged,
        grad_norm_initial=grad_norm_initial,
        grad_norm_final=float(np.linalg.norm(g)),
        status=status, objective_history=history,
    )


def _backtracking_step(fg, theta, f, g, shrink=0.5, c1=1e-4, max_back=40):
    t = 1.0
    gg = float(g @ g)
    for _ in range(max_back):
        f_trial = fg(theta - t * g)[0]
        if f_trial <= f - c1 * t * gg:
            return -t * g
        t *= shrink
    return -t * g


def write_ledger(path: str, records: list[RunRecord]) -> None:
    ordered = sorted(records, key=lambda r: r.seed)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in ordered], fh)
    os.replace(tmp, path)


def read_ledger(path: str) -> list[RunRecord]:
    with open(path, encoding="utf-8") as fh:
        return [RunRecord.from_dict(doc) for doc in json.load(fh)]


def multistart(problem, netcfg: NetConfig, cfg: OptConfig,
               ledger_path: str | None = None,
               stop_after: int | None = None) -> list[RunRecord]:
    """Independent restarts from seeded initializations, merged by seed.

    Seeds run seed0, seed0+1, ...; with a ledger path, completed seeds are
    skipped on resume and the file is rewritten after every finished run.
    ``stop_after`` ends the scan once that many converged runs exist.
    """
    records: list[RunRecord] = []
    done = set()
    if ledger_path and os.path.exists(ledger_path):
        records = read_ledger(ledger_path)
        done = {r.seed for r in records}
    for seed in range(cfg.seed0, cfg.seed0 + cfg.n_restarts):
        n_converged = sum(r.converged for r in records)
        if stop_after is not None and n_converged >= stop_after:
            break
        if seed in done:
            continue
        theta0 = glorot_init(netcfg, seed)
        rec = minimize(problem.evaluate, theta0, cfg, seed=seed)
        records.append(rec)
        if ledger_path:
            write_ledger(ledger_path, records)
    return sorted(records, key=lambda r: r.seed)


def select_best(records: list[RunRecord]) -> int:
    """Pick the converged run minimizing rescaled alpha^2 + beta^2.

    Both columns are min-max rescaled to [0, 1] over the converged pool
    (constant columns become all zeros); ties break on lower raw beta, then
    lower seed.  Returns an index into ``records``.
    """
    pool = [(i, r) for i, r in enumerate(records) if r.converged]
    if not pool:
        raise NoConvergedRunsError(f"no converged runs among {len(records)}")

    def rescaled(vals):
        lo, hi = min(vals), max(vals)
        if hi - lo == 0:
            return [0.0 for _ in vals]
        return [(v - lo) / (hi - lo) for v in vals]

    alphas = rescaled([r.alpha for _, r in pool])
    betas = rescaled([r.beta for _, r in pool])
    scored = [
        (a * a + b * b, r.beta, r.seed, i)
        for (i, r), a, b in zip(pool, alphas, betas)
    ]
    return min(scored)[3]
