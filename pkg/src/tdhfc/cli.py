"""Command-line surface: propagation runs, optimization campaigns, and
gradient checks, with plot-ready CSV export.

Campaign configuration is one JSON object::

    {
      "system_file": "h2_sto3g.json",      # absolute, config-relative,
                                           # $TDHFC_DATA_DIR, or bundled
      "p0": [0, 1],                        # diagonal occupancies, or a path
      "pt": [1, 0],                        #   to {"real": [[..]], "imag": [[..]]}
      "dt": 8.268e-3, "K": 700,
      "rho": 1e4, "rescale": false,
      "net": {"layer_sizes": [4, 4, 4, 1], "output_activation": "identity"},
      "opt": {"max_iters": 100, "n_restarts": 24, "seed0": 0, "mae_tol": 1e-2},
      "out_dir": "runs/h2"
    }

Exit codes: 0 success, 2 usage/configuration error, 3 no converged runs,
1 internal or numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys as _sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from . import molsys, optimizer
from .adjoint import ControlProblem, fidelity, terminal_mae
from .controller import NetConfig, glorot_init, load_theta, save_theta
from .errors import NoConvergedRunsError, TdhfcError
from .herm import build_basis
from .optimizer import OptConfig, RunRecord
from .propagator import Trajectory, propagate

GRADCHECK_TOL = 1e-5


class ConfigError(TdhfcError):
    """Campaign configuration is unusable; reported with exit code 2."""


@dataclass(frozen=True)
class CampaignConfig:
    """One control task: system, endpoints, horizon, and solver settings."""

    system_file: str
    P0: np.ndarray
    PT: np.ndarray
    dt: float
    K: int
    rho: float
    rescale: bool
    net: NetConfig
    opt: OptConfig
    out_dir: str


def bundled_campaign_path(name: str) -> str:
    return str(resources.files("tdhfc").joinpath("data", "campaigns", name))


def _resolve_system_file(name: str, config_dir: str) -> str:
    if os.path.isabs(name) and os.path.exists(name):
        return name
    rel = os.path.join(config_dir, name)
    if os.path.exists(rel):
        return rel
    return molsys.bundled_data_path(name)


def _load_endpoint(value, n: int, half_trace: float, label: str, config_dir: str) -> np.ndarray:
    if isinstance(value, str):
        path = value if os.path.isabs(value) else os.path.join(config_dir, value)
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            P = np.asarray(doc["real"], dtype=float) + 1j * np.asarray(
                doc.get("imag", np.zeros((n, n))), dtype=float
            )
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ConfigError(f"{label}: cannot load matrix file {value!r}: {exc}") from exc
    else:
        occ = np.asarray(value, dtype=float)
        if occ.shape != (n,):
            raise ConfigError(f"{label}: need {n} diagonal occupancies, got {occ.shape}")
        P = np.diag(occ).astype(complex)
    if P.shape != (n, n):
        raise ConfigError(f"{label}: matrix has shape {P.shape}, system dimension is {n}")
    if np.max(np.abs(P - P.conj().T)) > 1e-10:
        raise ConfigError(f"{label}: matrix is not Hermitian")
    if abs(np.trace(P).real - half_trace) > 1e-8:
        raise ConfigError(
            f"{label}: trace {np.trace(P).real:.6g} != N_e/2 = {half_trace:.6g}"
        )
    return P


def load_campaign(path: str) -> tuple[CampaignConfig, molsys.MolSystem]:
    """Parse and validate a campaign file; returns (config, loaded system)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    config_dir = os.path.dirname(os.path.abspath(path))
    try:
        system_file = _resolve_system_file(doc["system_file"], config_dir)
        sys_ = molsys.orthogonalize(molsys.load_system(system_file))
        dt = float(doc["dt"])
        K = int(doc["K"])
        if dt <= 0 or K < 1:
            raise ConfigError(f"{path}: need dt > 0 and K >= 1")
        half = sys_.n_electrons / 2.0
        P0 = _load_endpoint(doc["p0"], sys_.n, half, "p0", config_dir)
        PT = _load_endpoint(doc["pt"], sys_.n, half, "pt", config_dir)
        net_doc = doc.get("net", {})
        net = NetConfig(
            layer_sizes=tuple(net_doc["layer_sizes"]),
            output_activation=net_doc.get("output_activation", "identity"),
        )
        if net.layer_sizes[0] != sys_.n**2 or net.layer_sizes[-1] != sys_.n_active:
            raise ConfigError(
                f"{path}: net must map {sys_.n**2} -> {sys_.n_active}, "
                f"got {net.layer_sizes}"
            )
        rho = float(doc.get("rho", 0.0))
        rescale = bool(doc.get("rescale", False))
        opt = OptConfig(rho=rho, rescale=rescale, **doc.get("opt", {}))
        cfg = CampaignConfig(
            system_file=system_file, P0=P0, PT=PT, dt=dt, K=K, rho=rho,
            rescale=rescale, net=net, opt=opt,
            out_dir=doc.get("out_dir", "."),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, sys_


def build_problem(cfg: CampaignConfig, sys_: molsys.MolSystem) -> ControlProblem:
    return ControlProblem(
        sys=sys_, basis=build_basis(sys_.n), cfg=cfg.net,
        P0=cfg.P0, PT=cfg.PT, dt=cfg.dt, K=cfg.K,
        rho=cfg.rho, rescale=cfg.rescale,
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(path: str, traj: Trajectory) -> None:
    """Column order: k, t, then Re/Im of every density entry in row-major
    order, then the amplitude components (absent on the final row)."""
    n = traj.n
    n_a = traj.a.shape[1]
    header = ["k", "t"]
    for i in range(n):
        for j in range(n):
            header += [f"ReP{i}{j}", f"ImP{i}{j}"]
    header += [f"a{j}" for j in range(n_a)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(traj.K + 1):
            row = [str(k), _fmt(k * traj.dt)]
            for i in range(n):
                for j in range(n):
                    row += [_fmt(traj.P[k, i, j].real), _fmt(traj.P[k, i, j].imag)]
            if k < traj.K:
                row += [_fmt(x) for x in traj.a[k]]
            else:
                row += [""] * n_a
            w.writerow(row)


def read_trajectory_csv(path: str):
    """Inverse of write_trajectory_csv; returns (P, a, dt) arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = int(np.sqrt((len([c for c in header if c.startswith("ReP")]))))
    n_a = len([c for c in header if c.startswith("a")])
    K = len(body) - 1
    P = np.zeros((K + 1, n, n), dtype=np.complex128)
    a = np.zeros((K, n_a))
    for k, row in enumerate(body):
        vals = row[2:2 + 2 * n * n]
        for idx in range(n * n):
            P[k, idx // n, idx % n] = float(vals[2 * idx]) + 1j * float(vals[2 * idx + 1])
        if k < K:
            a[k] = [float(x) for x in row[2 + 2 * n * n:]]
    dt = float(body[1][1]) - float(body[0][1]) if K >= 1 else 0.0
    return P, a, dt


def write_control_csv(path: str, traj: Trajectory) -> None:
    n_a = traj.a.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t"] + [f"a{j}" for j in range(n_a)])
        for k in range(traj.K):
            w.writerow([str(k), _fmt(k * traj.dt)] + [_fmt(x) for x in traj.a[k]])


def _summary(traj: Trajectory, sys_: molsys.MolSystem, PT: np.ndarray) -> dict:
    doc = {
        "terminal_mae": terminal_mae(traj.P[-1], PT),
        "fidelity": fidelity(traj.P[-1], PT),
        "K": traj.K,
        "dt": traj.dt,
        "n_basis": traj.n,
    }
    doc.update(traj.invariant_maxima(sys_.n_electrons))
    return doc


def cmd_propagate(args) -> int:
    cfg, sys_ = load_campaign(args.config)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    if args.theta:
        if not os.path.exists(args.theta):
            raise ConfigError(f"theta file not found: {args.theta}")
        net, theta = load_theta(args.theta)
    else:
        net, theta = cfg.net, np.zeros(cfg.net.param_count)
    traj = propagate(sys_, build_basis(sys_.n), net, theta, cfg.P0, cfg.dt, cfg.K)
    write_trajectory_csv(os.path.join(out_dir, "traj.csv"), traj)
    summary = _summary(traj, sys_, cfg.PT)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
    print(f"propagated {cfg.K} steps: terminal MAE {summary['terminal_mae']:.6g}, "
          f"fidelity {summary['fidelity']:.6g}")
    return 0


def _run_one_seed(payload: tuple) -> dict:
    config_path, seed = payload
    cfg, sys_ = load_campaign(config_path)
    problem = build_problem(cfg, sys_)
    opt = replace(cfg.opt, seed0=seed, n_restarts=1)
    theta0 = glorot_init(cfg.net, seed)
    return optimizer.minimize(problem.evaluate, theta0, opt, seed=seed).to_dict()


def _multistart_parallel(args, cfg: CampaignConfig, ledger_path: str) -> list[RunRecord]:
    records = []
    done = set()
    if os.path.exists(ledger_path):
        records = optimizer.read_ledger(ledger_path)
        done = {r.seed for r in records}
    seeds = [s for s in range(cfg.opt.seed0, cfg.opt.seed0 + cfg.opt.n_restarts)
             if s not in done]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = {pool.submit(_run_one_seed, (args.config, s)): s for s in seeds}
        for fut in as_completed(futures):
            records.append(RunRecord.from_dict(fut.result()))
            optimizer.write_ledger(ledger_path, records)
    return sorted(records, key=lambda r: r.seed)


def cmd_optimize(args) -> int:
    cfg, sys_ = load_campaign(args.config)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    problem = build_problem(cfg, sys_)
    ledger_path = os.path.join(out_dir, "runs.json")
    if args.jobs > 1:
        records = _multistart_parallel(args, cfg, ledger_path)
    else:
        records = optimizer.multistart(
            problem, cfg.net, cfg.opt, ledger_path=ledger_path,
            stop_after=args.stop_after,
        )
    n_conv = sum(r.converged for r in records)
    print(f"{len(records)} runs, {n_conv} converged (ledger: {ledger_path})")
    best = optimizer.select_best(records)  # raises NoConvergedRunsError -> exit 3
    winner = records[best]
    print(f"selected seed {winner.seed}: alpha={winner.alpha:.6g} "
          f"beta={winner.beta:.6g} iters={winner.iters}")
    save_theta(os.path.join(out_dir, "theta_best.json"), cfg.net, winner.theta_final)
    traj = problem.propagate(winner.theta_final)
    write_trajectory_csv(os.path.join(out_dir, "traj.csv"), traj)
    write_control_csv(os.path.join(out_dir, "control.csv"), traj)
    report = {
        "seed": winner.seed,
        "alpha": winner.alpha,
        "beta": winner.beta,
        "iters": winner.iters,
        "grad_norm_initial": winner.grad_norm_initial,
        "grad_norm_final": winner.grad_norm_final,
        "n_runs": len(records),
        "n_converged": n_conv,
    }
    report.update(_summary(traj, sys_, cfg.PT))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    return 0


def cmd_gradcheck(args) -> int:
    cfg, sys_ = load_campaign(args.config)
    problem = build_problem(cfg, sys_)
    theta = glorot_init(cfg.net, args.seed)
    _, grad, _ = problem.evaluate(theta)
    d1 = problem.fd_gradient(theta, 1e-4)
    d2 = problem.fd_gradient(theta, 5e-5)
    fd = (4.0 * d2 - d1) / 3.0
    denom = np.maximum(np.abs(fd), 1e-8 * np.linalg.norm(fd))
    rel = np.abs(grad - fd) / denom
    worst = int(np.argmax(rel))
    ok = rel[worst] < GRADCHECK_TOL
    print(f"max relative component error {rel[worst]:.3e} at component {worst} "
          f"({'PASS' if ok else 'FAIL'}, tolerance {GRADCHECK_TOL:g})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdhfc",
        description="Learn neural feedback fields that steer closed-shell "
                    "electron dynamics between density matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_prop = sub.add_parser("propagate", help="run the closed-loop dynamics once")
    p_prop.add_argument("--config", required=True, help="campaign JSON path")
    p_prop.add_argument("--theta", help="controller checkpoint (default: zero field)")
    p_prop.add_argument("--out", help="output directory (default from config)")
    p_prop.set_defaults(func=cmd_propagate)

    p_opt = sub.add_parser("optimize", help="multi-start campaign + selection")
    p_opt.add_argument("--config", required=True, help="campaign JSON path")
    p_opt.add_argument("--out", help="output directory (default from config)")
    p_opt.add_argument("--jobs", type=int, default=1,
                       help="parallel restarts (default 1, reproducible order)")
    p_opt.add_argument("--stop-after", type=int, default=None, dest="stop_after",
                       help="stop once this many runs converged")
    p_opt.set_defaults(func=cmd_optimize)

    p_grad = sub.add_parser("gradcheck",
                            help="adjoint gradient vs finite differences")
    p_grad.add_argument("--config", required=True, help="campaign JSON path")
    p_grad.add_argument("--seed", type=int, default=0, help="Glorot seed")
    p_grad.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        parser.print_usage(_sys.stderr)
        return 2
    except NoConvergedRunsError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 3
    except TdhfcError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    _sys.exit(main())
