"""Command-line front end: ``kickbath <command> ...``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .config import (ConfigError, evaluate, load_config, scenario_from_config,
                     sweep_from_config, preset_names)
from .grid import GridFormatError, read_header
from .harness import (PRESETS, Scenario, ScenarioError, SweepSpec, kicks_to_energy,
                      run_scenario, run_sweep, write_sweep_csv)
from .model import ParameterError
from .observables import moments
from . import oracle


def _scenarios(cfg) -> list[Scenario]:
    p = PRESETS.get(cfg.get("preset", ""))
    if isinstance(p, list) and set(cfg) <= {"preset", "out_dir"}:
        return list(p)
    return [scenario_from_config(cfg)]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scs = _scenarios(cfg)
    out = args.out or cfg.get("out_dir") or "out"
    for sc in scs:
        target = os.path.join(out, sc.name) if len(scs) > 1 else out
        res = run_scenario(replace(sc, out_dir=target))
        s = res.state
        last = f"E_plus={res.rows[-1][3]:.10g}" if res.rows else "no kicks"
        print(f"{sc.name}: {s.n_kicks} kicks, tau={s.tau:.10g}, {last}, "
              f"boundary_leak={s.boundary_leak}, output in {target}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    sw = sweep_from_config(cfg)
    rows = run_sweep(sw, n_jobs=int(evaluate(cfg.get("n_jobs", "1"))))
    path = args.out or os.path.join(cfg.get("out_dir", "."), "sweep.csv")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    write_sweep_csv(path, rows, sw.parameter)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    return 0


def cmd_kicks_to_energy(args) -> int:
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg)
    n_max = int(evaluate(cfg["n_max"])) if "n_max" in cfg else sc.n_kicks
    n = kicks_to_energy(sc, args.target, n_max)
    print(f"not-reached ({n_max})" if n is None else n)
    return 0


def cmd_oracle_check(args) -> int:
    """Compare the grid pipeline with the number-basis oracle at every tau_n-/tau_n+."""
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg)
    if sc.initial.kind != "coherent":
        raise ConfigError("oracle-check supports coherent initial states only")
    N = int(evaluate(cfg.get("fock_dim", "60")))
    dt = evaluate(cfg.get("oracle_dt", "1e-3"))
    rtol = evaluate(cfg.get("oracle_rtol", "1e-3"))
    atol = evaluate(cfg.get("oracle_atol", "1e-9"))
    tail = evaluate(cfg.get("tail_tol", "1e-8"))
    p = sc.params
    res = run_scenario(replace(sc, snapshots=tuple(f"{n}{s}" for n in range(1, sc.n_kicks + 1)
                                                   for s in "-+"), out_dir=None))
    rho = oracle.coherent_fock(N, sc.initial.x0, sc.initial.p0)
    names = ("mean_x", "mean_p", "xx", "pp", "xp_sym")
    print("label," + ",".join(f"{n}_grid,{n}_fock" for n in names) + ",max_rel")
    worst = 0.0
    for n in range(1, sc.n_kicks + 1):
        rho = oracle.evolve_master(rho, p.sigma_k, p, dt, tail)
        for side in "-+":
            if side == "+":
                rho = oracle.apply_kick_fock(rho, p, tail)
            a = np.array(moments(res.snapshots[f"{n}{side}"], False).as_tuple())
            b = np.array(oracle.moments_fock(rho).as_tuple())
            rel = float(np.max(np.abs(a - b) / (np.abs(b) + atol / rtol)))
            worst = max(worst, rel)
            print(f"{n}{side}," + ",".join(f"{x:.10g},{y:.10g}" for x, y in zip(a, b))
                  + f",{rel:.3e}")
    ok = worst <= rtol
    print(f"{'PASS' if ok else 'FAIL'}: worst relative deviation {worst:.3e} (tolerance {rtol:g})")
    return 0 if ok else 1


def cmd_info(args) -> int:
    h = read_header(args.grid)
    labels = ("k_max s_max" if h["magic"] == "CHORD1" else "z_max p_max")
    print(f"magic: {h['magic']}")
    print(f"size: {h['n1']} x {h['n2']}")
    print(f"{labels}: {h['extent1']!r} {h['extent2']!r}")
    print(f"tau: {h['tau']!r}")
    print(f"n_kicks: {h['n_kicks']}")
    return 0


def cmd_presets(args) -> int:
    for name in preset_names():
        p = PRESETS[name]
        kind = "sweep" if isinstance(p, SweepSpec) else (
            f"{len(p)} runs" if isinstance(p, list) else "scenario")
        print(f"{name}\t{kind}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kickbath", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write its outputs")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: out_dir key or ./out)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run a one-parameter sweep and write a CSV table")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="CSV path (default: <out_dir>/sweep.csv)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("kicks-to-energy", help="kicks needed to reach a target energy")
    s.add_argument("--config", required=True)
    s.add_argument("--target", required=True, type=float)
    s.set_defaults(func=cmd_kicks_to_energy)

    s = sub.add_parser("oracle-check", help="compare moments against the number-basis oracle")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("info", help="print the header of a grid file")
    s.add_argument("--grid", required=True)
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("presets", help="list scenario presets")
    s.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, GridFormatError, ScenarioError, ValueError,
            ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
