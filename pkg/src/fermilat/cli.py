"""Command-line front end: ``fermilat verify|pressure|varcheck --config PATH``.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 size guard exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import equilibrium as eq
from . import thermo
from .car import (
    MAX_SITES,
    SizeGuardError,
    annihilation,
    build_region,
    check_size,
    cube,
    op_norm,
    tau,
    theta,
    v_unitary,
)
from .config import ConfigError, build_potential, load
from .expectations import commuting_square_residual, cond_expect
from .potentials import (
    derivation_images,
    hamiltonian_from_derivation,
    internal_energy,
    internal_energy_table,
    moebius_invert,
    random_standard_potential,
    reconstruct_residual,
    validate_standard,
)
from .report import Report, inputs_hash
from .sampling import random_density, random_operator, rng_for
from .states import StateDensity, perturb, relative_entropy, ssa_residual, tracial_state

SCHEMA = "# fermilat-schema v1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SIZE = 0, 1, 2, 3

PRESSURE_COLUMNS = [
    "row", "beta", "size", "p", "P", "energy_density", "entropy_density", "surface_density",
    "oracle_p", "oracle_delta", "res_P", "res_variational", "fit_rms",
]
VARCHECK_COLUMNS = ["check", "beta", "size", "value", "residual", "verdict"]


# ---------------------------------------------------------------- output helpers

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.14g" % x


def _csv_text(columns, rows):
    buf = io.StringIO(newline="")
    buf.write(SCHEMA + "\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write(out_dir, stem, columns, rows, meta):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.csv").write_bytes(_csv_text(columns, rows).encode("utf-8"))
    doc = {"schema": "fermilat-schema v1", "meta": meta, "rows": rows}
    text = json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"
    (out / f"{stem}.json").write_bytes(text.encode("utf-8"))


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("FERMILAT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _run(tasks, threads):
    """Evaluate zero-argument callables, results in task order."""
    if threads == 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


# ---------------------------------------------------------------- verify suite

def _check_car(seed, tol):
    amb = cube(4)
    ops = [annihilation(s, amb) for s in amb]
    worst = 0.0
    eye = np.eye(1 << len(amb))
    for i, a in enumerate(ops):
        for j, b in enumerate(ops):
            ab = (a @ b.dag + b.dag @ a).matrix
            worst = max(worst, float(np.abs(ab - (eye if i == j else 0)).max()))
            worst = max(worst, float(np.abs((a @ b + b @ a).matrix).max()))
        worst = max(worst, op_norm(theta(a) + a))
    return Report("car_relations", [worst], tol, inputs_hash("car", 4))


def _check_expectations(seed, tol):
    amb = cube(4)
    I, J = build_region([0, 1, 2]), build_region([1, 2, 3])
    rep = commuting_square_residual(I, J, 10, amb, seed=seed, tol=tol)
    worst = 0.0
    for k in range(10):
        x = random_operator(amb, rng_for(seed, 100 + k))
        worst = max(worst, op_norm(cond_expect(x, I) - cond_expect(x, I, method="units")))
    return Report("conditional_expectation", rep.residuals + [worst], tol, rep.inputs)


def _check_potential(Phi, seed, tol):
    I = cube(3, Phi.nu) if Phi.nu == 1 else cube(2, Phi.nu)
    table = internal_energy_table(Phi, I)
    back = moebius_invert(table, I)
    worst = 0.0
    for K, op in Phi.terms_in(I):
        worst = max(worst, op_norm(back[K] - op))
    for K, op in back.items():
        if Phi.term(K) is None:
            worst = max(worst, op_norm(op))
    std = validate_standard(Phi, I, tol=tol)
    J = cube(1, Phi.nu)
    amb = J.expand(Phi.range)
    dv = derivation_images(Phi, J, amb)
    H = hamiltonian_from_derivation(dv, J, amb)
    sakai = reconstruct_residual(H, dv, J, amb)
    return Report("potential_roundtrip", [worst, std.max_residual, sakai], tol, inputs_hash(repr(Phi), seed))


def _check_entropy(seed, tol):
    R = cube(3)
    ssa = max(ssa_residual(StateDensity(random_density(R, rng_for(seed, 200 + k))),
                           build_region([0, 1]), build_region([1, 2])) for k in range(10))
    worst_pert = 0.0
    for k in range(10):
        rng = rng_for(seed, 300 + k)
        phi = StateDensity(random_density(R, rng))
        h = random_operator(R, rng, hermitian=True)
        h = h / op_norm(h)
        ph = perturb(phi, h)
        lhs = relative_entropy(ph, phi)
        worst_pert = max(worst_pert, abs(lhs + phi(h).real))
        h2 = random_operator(R, rng, hermitian=True)
        h2 = h2 / op_norm(h2)
        worst_pert = max(worst_pert, op_norm(perturb(ph, h2).rho_hat - perturb(phi, h + h2).rho_hat))
    return Report("entropy_perturbation", [max(ssa, 0.0), worst_pert], tol, inputs_hash("entropy", seed))


def _equilibrium_setup(Phi, beta):
    if Phi.nu == 1:
        I, amb = build_region([1]), cube(4)
    else:
        I, amb = cube(1, Phi.nu), cube(2, Phi.nu)
    return I, amb, eq.finite_gibbs_state(Phi, beta, amb)


def _check_equilibrium(Phi, beta, seed, tol):
    I, amb, phi = _equilibrium_setup(Phi, beta)
    U = internal_energy(Phi, amb)
    kms = 0.0
    for k in range(5):
        A = random_operator(amb, rng_for(seed, 400 + k))
        B = random_operator(amb, rng_for(seed, 500 + k))
        kms = max(kms, eq.kms_residual(phi, U, beta, A, B) / (op_norm(A) * op_norm(B)))
    ops = [random_operator(I, rng_for(seed, 600 + k)) for k in range(5)]
    dk = eq.dkms_check(phi, Phi, beta, I, amb, ops, tol=tol)
    gc = eq.gibbs_condition_residual(phi, Phi, beta, I, amb, tol=tol)
    pf = eq.product_form_residual(phi, Phi, beta, I, amb, "complement", samples=5, seed=seed)
    return Report("equilibrium", [kms] + dk.residuals + gc.residuals + [pf], tol,
                  inputs_hash(repr(Phi), beta, seed))


def _check_negative_controls(Phi, beta, seed):
    site = cube(1)
    a = annihilation((0,), site)
    kms_bad = eq.kms_residual(tracial_state(site), v_unitary(site, site), 1.0, a, a.dag)
    I, amb, _ = _equilibrium_setup(Phi, max(beta, 0.5))
    bad = eq.odd_perturbed_state(Phi, max(beta, 0.5), I, amb, seed=seed)
    pf_bad = eq.product_form_residual(bad, Phi, max(beta, 0.5), I, amb, "complement", samples=5, seed=seed)
    return Report("negative_controls", [kms_bad, pf_bad], 1e-3, inputs_hash("neg", seed), kind="negative_control")


def cmd_verify(cfg, Phi, threads):
    beta = cfg.beta[0]
    tol = cfg.tolerance
    seed = cfg.seed
    tasks = [
        lambda: _check_car(seed, tol),
        lambda: _check_expectations(seed, tol),
        lambda: _check_potential(Phi, seed, tol),
        lambda: _check_entropy(seed, tol),
        lambda: _check_equilibrium(Phi, beta, seed, tol),
        lambda: _check_negative_controls(Phi, beta, seed),
    ]
    reports = _run(tasks, threads)
    rows = [r.to_dict() for r in reports]
    return reports, rows


# ---------------------------------------------------------------- pressure

def _pressure_row(Phi, beta, size):
    row = thermo.thermo_row(Phi, beta, size)
    C = cube(size, Phi.nu)
    oracle = thermo.quadratic_pressure(internal_energy(Phi, C), beta)
    return {
        "row": "box",
        "beta": beta,
        "size": size,
        "p": row.p,
        "P": row.P,
        "energy_density": row.energy_density,
        "entropy_density": row.entropy_density,
        "surface_density": row.surface_density,
        "oracle_p": oracle,
        "oracle_delta": None if oracle is None else abs(oracle - row.p),
        "res_P": row.residuals["P-p-log2"],
        "res_variational": row.residuals["variational"],
    }


def _extrapolation_rows(cfg, rows):
    out = []
    for beta in cfg.beta:
        sel = [r for r in rows if r["beta"] == beta]
        sizes = [r["size"] for r in sel]
        fit = {k: thermo.extrapolate(sizes, [r[k] for r in sel])
               for k in ("p", "energy_density", "entropy_density", "surface_density")}
        out.append({
            "row": "extrapolation",
            "beta": beta,
            "p": fit["p"][0],
            "P": fit["p"][0] + math.log(2.0),
            "energy_density": fit["energy_density"][0],
            "entropy_density": fit["entropy_density"][0],
            "surface_density": fit["surface_density"][0],
            "fit_rms": fit["p"][2],
        })
    return out


def cmd_pressure(cfg, Phi, threads):
    grid = [(b, s) for b in cfg.beta for s in cfg.sizes]
    rows = _run([lambda b=b, s=s: _pressure_row(Phi, b, s) for b, s in grid], threads)
    rows += _extrapolation_rows(cfg, rows)
    ok = all(r["res_P"] <= 1e-12 and r["res_variational"] <= cfg.tolerance
             and (r["oracle_delta"] is None or r["oracle_delta"] <= cfg.tolerance)
             for r in rows if r["row"] == "box")
    return ok, rows


# ---------------------------------------------------------------- varcheck

def _chain_oracle(Phi, beta):
    """Infinite-chain pressure when the model is a nearest-neighbour hopping chain."""
    if Phi.nu != 1:
        return None
    C = cube(3)
    U = internal_energy(Phi, C)
    a = [annihilation(s, C) for s in C]
    A = np.array([[2 * tau(a[i] @ (U @ a[j].dag - a[j].dag @ U)) for j in range(3)] for i in range(3)])
    if thermo.quadratic_pressure(U, beta) is None:
        return None
    if np.abs(A.imag).max() > 1e-12 or abs(A[0, 2]) > 1e-12 or abs(tau(U)) > 1e-12:
        return None
    t, mu = A[0, 1].real, A[1, 1].real
    if abs(A[0, 0] - A[1, 1]) > 1e-12 or abs(A[1, 2] - A[0, 1]) > 1e-12:
        return None
    return thermo.free_fermion_infinite(t, mu, beta)


def _varcheck_identity(Phi, beta, size, seed, tol):
    C = cube(size, Phi.nu)
    rng = rng_for(seed, 700 + size)
    omega = StateDensity(random_density(C, rng))
    relent, res = thermo.gibbs_variational_identity(Phi, beta, C, omega)
    same, res_same = thermo.gibbs_variational_identity(Phi, beta, C, thermo.local_gibbs(Phi, beta, C))
    ok = relent >= -1e-10 and res <= tol and abs(same) <= tol and res_same <= tol
    return [
        {"check": "relative_entropy_random", "beta": beta, "size": size, "value": relent, "residual": res,
         "verdict": "pass" if ok else "fail"},
        {"check": "relative_entropy_gibbs", "beta": beta, "size": size, "value": same, "residual": res_same,
         "verdict": "pass" if ok else "fail"},
    ]


def _varcheck_witness(Phi, beta, a, p_inf):
    w = thermo.witness(Phi, beta, a, p_inf)
    gap = w["gap"]
    return [{"check": "witness_gap", "beta": beta, "size": a, "value": w["value"], "residual": gap,
             "verdict": "pass" if gap is None or gap >= -1e-9 else "fail"}]


def _varcheck_tangent(Phi, beta, seed):
    Psi = random_standard_potential(rng_for(seed, 800), nu=Phi.nu)
    I = cube(4, Phi.nu) if Phi.nu == 1 else cube(2, Phi.nu)
    fd, expct = thermo.pressure_tangent(Phi, Psi, beta, I)
    res = abs(fd - expct)
    return [{"check": "pressure_tangent", "beta": beta, "size": len(I), "value": fd, "residual": res,
             "verdict": "pass" if res <= 1e-6 else "fail"}]


def cmd_varcheck(cfg, Phi, threads):
    tasks = []
    for beta in cfg.beta:
        p_inf = _chain_oracle(Phi, beta)
        tasks += [lambda b=beta, s=s: _varcheck_identity(Phi, b, s, cfg.seed, cfg.tolerance) for s in cfg.sizes]
        tasks += [lambda b=beta, a=a, p=p_inf: _varcheck_witness(Phi, b, a, p) for a in cfg.tiles]
        tasks.append(lambda b=beta: _varcheck_tangent(Phi, b, cfg.seed))
    rows = [r for chunk in _run(tasks, threads) for r in chunk]
    return all(r["verdict"] == "pass" for r in rows), rows


# ---------------------------------------------------------------- entry point

def _size_guard(cfg, command):
    sizes = list(cfg.sizes)
    if command == "varcheck":
        sizes += list(cfg.tiles)
    for s in sizes:
        check_size(s ** cfg.nu, MAX_SITES)


def build_parser():
    p = argparse.ArgumentParser(prog="fermilat", description="Finite-volume Fermion lattice checks and tables.")
    p.add_argument("command", choices=["verify", "pressure", "varcheck"])
    p.add_argument("--config", required=True, help="model file (text or JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default FERMILAT_THREADS or 1)")
    p.add_argument("--out", default=None, help="output directory (default from config)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        Phi, constant = build_potential(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = _threads(args.threads)
    out_dir = args.out if args.out is not None else cfg.out
    meta = {"command": args.command, "model": cfg.name, "seed": cfg.seed, "nu": cfg.nu,
            "beta": cfg.beta, "sizes": cfg.sizes, "tolerance": cfg.tolerance,
            "standardization_constant": constant}
    try:
        _size_guard(cfg, args.command)
        if args.command == "verify":
            reports, rows = cmd_verify(cfg, Phi, threads)
            for r in reports:
                print(r.line())
            ok = all(r.verdict for r in reports)
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            doc = {"schema": "fermilat-schema v1", "meta": meta, "reports": rows}
            (out / "verify.json").write_bytes((json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n").encode())
        elif args.command == "pressure":
            meta["tiles"] = cfg.tiles
            ok, rows = cmd_pressure(cfg, Phi, threads)
            _write(out_dir, "pressure", PRESSURE_COLUMNS, rows, meta)
            print(f"pressure: {len(rows)} rows written to {out_dir}")
        else:
            meta["tiles"] = cfg.tiles
            ok, rows = cmd_varcheck(cfg, Phi, threads)
            _write(out_dir, "varcheck", VARCHECK_COLUMNS, rows, meta)
            for r in rows:
                print(f"[{r['verdict'].upper()}] {r['check']} beta={_fmt(r['beta'])} size={r['size']} "
                      f"value={_fmt(r['value'])} residual={_fmt(r['residual'])}")
    except SizeGuardError as exc:
        print(f"size guard: {exc}", file=sys.stderr)
        return EXIT_SIZE
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
