"""Plain-text run configuration: ``key = value`` lines, ``#`` comments.

Numeric values may be simple arithmetic in ``pi`` and ``sqrt``, e.g.
``eta2 = 0.7*pi`` or ``eta2 = (1 + sqrt(5))*pi/2``.  List values are comma
separated; ``linspace(a, b, n)`` expands to ``n`` evenly spaced values.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import replace

import numpy as np

from .harness import (GridRequest, InitialState, PRESETS, Scenario, SweepSpec, preset)
from .model import ModelParams, PhysicalParams, from_physical

__all__ = ["ConfigError", "parse_config", "load_config", "scenario_from_config",
           "sweep_from_config", "evaluate"]


class ConfigError(ValueError):
    pass


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt}


def evaluate(text: str) -> float:
    """Evaluate a numeric expression built from literals, ``pi``, ``sqrt`` and + - * / **."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except SyntaxError:
        raise ConfigError(f"cannot parse number {text!r}") from None


def _values(text: str) -> list[float]:
    text = text.strip()
    if text.startswith("linspace(") and text.endswith(")"):
        parts = _split(text[len("linspace("):-1])
        if len(parts) != 3:
            raise ConfigError("linspace needs (start, stop, num)")
        a, b = evaluate(parts[0]), evaluate(parts[1])
        return list(np.linspace(a, b, int(evaluate(parts[2]))))
    return [evaluate(t) for t in _split(text)]


def _split(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
            continue
        depth += (ch == "(") - (ch == ")")
        cur += ch
    if cur.strip():
        out.append(cur)
    return [s.strip() for s in out if s.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_config(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings; later keys override earlier ones."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_config(fh.read())


_PHYSICAL_KEYS = ("m", "omega0", "gamma", "T", "K", "mu", "Tk")
_KNOWN = {
    "preset", "name", "beta", "D", "kappa", "eta", "eta2", "q", "hbar", "kB",
    "nk", "ns", "k_max", "s_max", "commensurate", "n_kicks", "snapshots", "outputs", "out_dir",
    "trace_tol", "trace_warn", "leak_budget", "leak_tol", "scheme", "kick_tol",
    "kick_interpolation", "kick_first", "check_resolution", "initial", "x0", "p0",
    "initial_D", "initial_path", "sweep_parameter", "sweep_values", "reduction", "E_target",
    "window", "n_jobs", "n_max", "fock_dim", "oracle_dt", "oracle_rtol", "oracle_atol",
    "tail_tol", *_PHYSICAL_KEYS,
}


def _check_keys(cfg: dict) -> None:
    unknown = sorted(set(cfg) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _params(cfg: dict, base: ModelParams | None) -> ModelParams:
    phys = [k for k in _PHYSICAL_KEYS if k in cfg]
    if phys:
        missing = [k for k in _PHYSICAL_KEYS if k not in cfg]
        if missing:
            raise ConfigError(f"physical units need all of {_PHYSICAL_KEYS}; missing {missing}")
        extra = {k: evaluate(cfg[k]) for k in ("hbar", "kB") if k in cfg}
        return from_physical(PhysicalParams(**{k: evaluate(cfg[k]) for k in _PHYSICAL_KEYS},
                                            **extra))
    vals = {}
    for k in ("beta", "D", "kappa", "q"):
        if k in cfg:
            vals[k] = evaluate(cfg[k])
    if "eta2" in cfg and "eta" in cfg:
        raise ConfigError("give either eta or eta2, not both")
    if "eta2" in cfg:
        vals["eta"] = math.sqrt(evaluate(cfg["eta2"]))
    elif "eta" in cfg:
        vals["eta"] = evaluate(cfg["eta"])
    if base is not None:
        return base.replace(**vals)
    missing = [k for k in ("beta", "D", "kappa", "eta", "q") if k not in vals]
    if missing:
        raise ConfigError(f"missing parameters: {', '.join(missing)}")
    return ModelParams(**vals)


def _base_from_preset(cfg: dict):
    if "preset" not in cfg:
        return None
    try:
        return preset(cfg["preset"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def scenario_from_config(cfg: dict, base: Scenario | None = None) -> Scenario:
    """Build a :class:`Scenario`; a ``preset`` key (or ``base``) supplies defaults."""
    _check_keys(cfg)
    if base is None:
        p = _base_from_preset(cfg)
        if isinstance(p, SweepSpec):
            p = p.base
        if isinstance(p, list):
            raise ConfigError(f"preset {cfg['preset']!r} holds several runs; use it with "
                              "'simulate' only, without overrides")
        base = p
    params = _params(cfg, None if base is None else base.params)

    grid = GridRequest() if base is None else base.grid
    if isinstance(grid, GridRequest):
        g = {}
        for k in ("nk", "ns"):
            if k in cfg:
                g[k] = int(evaluate(cfg[k]))
        for k in ("k_max", "s_max"):
            if k in cfg:
                g[k] = evaluate(cfg[k])
        if "commensurate" in cfg:
            g["commensurate"] = _bool(cfg["commensurate"])
        grid = replace(grid, **g)

    init = InitialState() if base is None else base.initial
    if "initial" in cfg:
        init = InitialState(kind=cfg["initial"].strip())
    ch = {}
    for k, attr in (("x0", "x0"), ("p0", "p0"), ("initial_D", "D")):
        if k in cfg:
            ch[attr] = evaluate(cfg[k])
    if "initial_path" in cfg:
        ch["path"] = cfg["initial_path"]
    init = replace(init, **ch)

    kw = {}
    for k in ("n_kicks",):
        if k in cfg:
            kw[k] = int(evaluate(cfg[k]))
    for k in ("trace_tol", "trace_warn", "leak_tol", "kick_tol"):
        if k in cfg:
            kw[k] = evaluate(cfg[k])
    for k in ("scheme", "kick_interpolation", "name", "out_dir"):
        if k in cfg:
            kw[k] = cfg[k]
    for k in ("kick_first", "check_resolution"):
        if k in cfg:
            kw[k] = _bool(cfg[k])
    if "leak_budget" in cfg:
        v = cfg["leak_budget"].strip().lower()
        kw["leak_budget"] = None if v in ("none", "off", "unlimited") else int(evaluate(v))
    if "snapshots" in cfg:
        kw["snapshots"] = tuple(_split(cfg["snapshots"]))
    if "outputs" in cfg:
        kw["outputs"] = frozenset(_split(cfg["outputs"]))
    try:
        if base is None:
            return Scenario(params=params, grid=grid, initial=init, **kw)
        return replace(base, params=params, grid=grid, initial=init, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def sweep_from_config(cfg: dict) -> SweepSpec:
    _check_keys(cfg)
    p = _base_from_preset(cfg)
    if isinstance(p, list):
        raise ConfigError(f"preset {cfg['preset']!r} holds several sweeps; pick a parameter set "
                          "explicitly")
    base_sweep = p if isinstance(p, SweepSpec) else None
    base_sc = base_sweep.base if base_sweep else p
    sc = scenario_from_config({k: v for k, v in cfg.items() if k != "preset"}, base_sc)
    parameter = cfg.get("sweep_parameter", base_sweep.parameter if base_sweep else None)
    if parameter is None:
        raise ConfigError("sweep needs sweep_parameter")
    if "sweep_values" in cfg:
        values = _values(cfg["sweep_values"])
    elif base_sweep is not None:
        values = base_sweep.values
    else:
        raise ConfigError("sweep needs sweep_values")
    reduction = cfg.get("reduction", base_sweep.reduction if base_sweep else "cycle")
    E_target = evaluate(cfg["E_target"]) if "E_target" in cfg else (
        base_sweep.E_target if base_sweep else None)
    window = int(evaluate(cfg["window"])) if "window" in cfg else (
        base_sweep.window if base_sweep else None)
    try:
        return SweepSpec(sc, parameter, tuple(values), reduction, E_target, window)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def preset_names() -> list[str]:
    return sorted(PRESETS)
